import { AskResponse, ModelSummary, ServiceErrorBody } from './types.js';

/** Service error carrying the pipeline stage that failed. */
export class ApiError extends Error {
  constructor(
    public readonly code: string,
    public readonly stage: string,
    message: string,
  ) {
    super(message);
  }
}

async function throwServiceError(response: Response): Promise<never> {
  let body: ServiceErrorBody | null = null;
  try {
    body = (await response.json()) as ServiceErrorBody;
  } catch {
    // non-JSON error body; fall through to the generic error
  }
  if (body && body.error) {
    throw new ApiError(body.error.code, body.error.stage, body.error.message);
  }
  throw new ApiError(`HTTP_${response.status}`, 'request', response.statusText);
}

export async function askQuestion(
  baseUrl: string,
  question: string,
  sessionId: string,
  k?: number,
): Promise<AskResponse> {
  const response = await fetch(`${baseUrl}/ask`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify({ question, session_id: sessionId, k: k ?? null }),
  });
  if (!response.ok) {
    return throwServiceError(response);
  }
  return (await response.json()) as AskResponse;
}

export async function fetchModel(baseUrl: string): Promise<ModelSummary> {
  const response = await fetch(`${baseUrl}/model`);
  if (!response.ok) {
    return throwServiceError(response);
  }
  return (await response.json()) as ModelSummary;
}

interface StringStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const SESSION_KEY = 'asktmk-session-id';

/** Session id persisted for the lifetime of one browser tab. */
export function getOrCreateSessionId(store: StringStore, random: () => string): string {
  const existing = store.getItem(SESSION_KEY);
  if (existing) {
    return existing;
  }
  const fresh = random();
  store.setItem(SESSION_KEY, fresh);
  return fresh;
}
