export type QuestionClass = 'mmodel' | 'multimodels' | 'cant_answer';

export type ElementKind = 'task' | 'method' | 'knowledge';

export interface RetrievalHit {
  element_id: string;
  kind: ElementKind;
  score: number;
}

export interface AskResponse {
  question: string;
  class: QuestionClass;
  hits: RetrievalHit[];
  steps: string[];
  answer: string;
  metadata: Record<string, unknown>;
  session_id: string | null;
}

export interface ModelSummary {
  agent_name: string;
  version: string;
  counts: Record<ElementKind, number>;
  top_level_task: { id: string; name: string };
}

export interface ServiceErrorBody {
  error: { code: string; stage: string; message: string };
  request_id: string;
}

export interface ChatTurn {
  question: string;
  result: AskResponse;
  timestamp: number;
}
