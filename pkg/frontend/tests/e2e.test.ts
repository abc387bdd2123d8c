/**
 * End-to-end against a live mock-mode service (`scripts/e2e.sh` starts one).
 * Drives the real /ask endpoint and feeds the live responses through the same
 * render functions the page uses, asserting on the produced view.
 */

import { describe, expect, it } from 'vitest';

import { askQuestion, fetchModel } from '../src/api.js';
import { renderTurn } from '../src/render.js';

const BASE_URL = process.env.ASKTMK_BASE_URL ?? 'http://127.0.0.1:8766';
const WORKING_EXAMPLE = 'How can I best utilise the output of the system in VERA?';

describe('live service end to end', () => {
  it('serves the model summary', async () => {
    const model = await fetchModel(BASE_URL);
    expect(model.agent_name).toBe('VERA');
    expect(model.counts).toEqual({ task: 5, method: 4, knowledge: 6 });
  });

  it('working-example question renders badge, 4 score rows, 4 steps, answer', async () => {
    const result = await askQuestion(BASE_URL, WORKING_EXAMPLE, 'e2e-tab');
    const html = renderTurn({ question: WORKING_EXAMPLE, result, timestamp: Date.now() });

    expect(html).toContain('badge-multimodels');
    const rows = html.match(/<tr class="hit">/g) ?? [];
    expect(rows).toHaveLength(4);
    const percents = html.match(/\d+\.\d{2} %/g) ?? [];
    expect(percents.length).toBeGreaterThanOrEqual(4);
    expect(html).toContain('4 intermediate steps');
    expect((html.match(/<li>/g) ?? []).length).toBe(4);
    expect(html).toContain('<div class="bubble answer">');
  });

  it('cant_answer question renders a refusal and no hits panel', async () => {
    const result = await askQuestion(BASE_URL, 'What is the capital of France?', 'e2e-tab');
    const html = renderTurn({
      question: 'What is the capital of France?',
      result,
      timestamp: Date.now(),
    });

    expect(result.class).toBe('cant_answer');
    expect(html).toContain('bubble answer refusal');
    expect(html).not.toContain('<table class="hits">');
  });

  it('session id is echoed back by the service', async () => {
    const result = await askQuestion(BASE_URL, 'What does VERA do?', 'e2e-tab-2');
    expect(result.session_id).toBe('e2e-tab-2');
  });
});
