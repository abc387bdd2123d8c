import { askQuestion, fetchModel, getOrCreateSessionId, ApiError } from './api.js';
import { renderErrorBanner, renderHeader, renderTurn } from './render.js';
import { ChatTurn } from './types.js';

const BASE_URL = '';

window.addEventListener('DOMContentLoaded', async () => {
  const headerEl = document.getElementById('header')!;
  const turnsEl = document.getElementById('turns')!;
  const formEl = document.getElementById('ask-form') as HTMLFormElement;
  const inputEl = document.getElementById('question') as HTMLInputElement;
  const sendEl = document.getElementById('send') as HTMLButtonElement;

  const sessionId = getOrCreateSessionId(window.sessionStorage, () =>
    crypto.randomUUID(),
  );

  try {
    const model = await fetchModel(BASE_URL);
    headerEl.innerHTML = renderHeader(model.agent_name, model.top_level_task.name);
  } catch {
    headerEl.innerHTML = renderHeader('the agent', 'unavailable');
  }

  let pending = false;

  formEl.addEventListener('submit', async (event) => {
    event.preventDefault();
    const question = inputEl.value.trim();
    if (!question || pending) {
      return;
    }
    // one in-flight ask per session: lock the input until the answer lands
    pending = true;
    inputEl.disabled = true;
    sendEl.disabled = true;
    try {
      const result = await askQuestion(BASE_URL, question, sessionId);
      const turn: ChatTurn = { question, result, timestamp: Date.now() };
      turnsEl.insertAdjacentHTML('beforeend', renderTurn(turn));
      inputEl.value = '';
    } catch (error) {
      const stage = error instanceof ApiError ? error.stage : 'request';
      const message = error instanceof Error ? error.message : String(error);
      turnsEl.insertAdjacentHTML('beforeend', renderErrorBanner(stage, message));
    } finally {
      pending = false;
      inputEl.disabled = false;
      sendEl.disabled = false;
      inputEl.focus();
      turnsEl.scrollTop = turnsEl.scrollHeight;
    }
  });
});
