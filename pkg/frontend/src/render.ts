import { escapeHtml, formatPercent } from './format.js';
import { ChatTurn, RetrievalHit } from './types.js';

/**
 * Pure HTML rendering for one chat turn: class badge, hits with similarity
 * percentages, collapsible intermediate-steps panel (collapsed by default),
 * and the answer bubble. cant_answer turns render a refusal bubble and no
 * hits panel at all. Kept DOM-free so it is testable without a browser.
 */
export function renderTurn(turn: ChatTurn): string {
  const { result } = turn;
  const parts: string[] = [];
  parts.push(`<div class="bubble user">${escapeHtml(turn.question)}</div>`);
  parts.push(`<span class="badge badge-${result.class}">${result.class}</span>`);
  if (result.hits.length > 0) {
    parts.push(renderHits(result.hits));
  }
  if (result.steps.length > 0) {
    parts.push(renderSteps(result.steps));
  }
  const answerClass = result.class === 'cant_answer' ? 'bubble answer refusal' : 'bubble answer';
  parts.push(`<div class="${answerClass}">${escapeHtml(result.answer)}</div>`);
  return `<div class="turn">${parts.join('\n')}</div>`;
}

function renderHits(hits: RetrievalHit[]): string {
  const rows = hits
    .map(
      (hit) =>
        `<tr class="hit"><td class="score">${formatPercent(hit.score)}</td>` +
        `<td class="kind">${escapeHtml(hit.kind)}</td>` +
        `<td class="element">${escapeHtml(hit.element_id)}</td></tr>`,
    )
    .join('');
  return `<table class="hits"><tbody>${rows}</tbody></table>`;
}

function renderSteps(steps: string[]): string {
  const items = steps.map((step) => `<li>${escapeHtml(step)}</li>`).join('');
  return (
    `<details class="steps"><summary>${steps.length} intermediate step` +
    `${steps.length === 1 ? '' : 's'}</summary><ol>${items}</ol></details>`
  );
}

/** Error banner naming the pipeline stage the service reported. */
export function renderErrorBanner(stage: string, message: string): string {
  return (
    `<div class="banner error"><strong>${escapeHtml(stage)}</strong> failed: ` +
    `${escapeHtml(message)}</div>`
  );
}

export function renderHeader(agentName: string, topTask: string): string {
  return (
    `<h1>Ask ${escapeHtml(agentName)}</h1>` +
    `<p class="subtitle">top-level goal: ${escapeHtml(topTask)}</p>`
  );
}
