// Pure state -> markup functions.  No DOM access here: equal states produce
// byte-equal strings, which is what the snapshot tests assert.

import type { SearchPayload } from "./types.js";
import type { UiSearchState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function scoreBar(score: number): string {
  const width = Math.round(Math.max(0, Math.min(1, score)) * 100);
  return `<span class="bar"><span class="bar-fill" style="width:${width}%"></span></span>`;
}

export function renderResults(payload: SearchPayload): string {
  if (payload.results.length === 0) {
    return `<p class="empty">No results for <b>${escapeHtml(payload.query)}</b>.</p>`;
  }
  const cards = payload.results.map((group) => {
    const passages = group.passages
      .map(
        (hit) => `
      <div class="passage" data-passage-id="${escapeHtml(hit.passage_id)}">
        <div class="scores">l2 ${hit.l2_score.toFixed(3)} ${scoreBar(hit.l2_score)}
             <span class="l1">l1 ${hit.l1_score.toFixed(2)}</span></div>
        <p>${escapeHtml(hit.text)}</p>
      </div>`,
      )
      .join("");
    return `
    <article class="card" data-doc-id="${escapeHtml(group.doc_id)}">
      <h3>${escapeHtml(group.title) || escapeHtml(group.doc_id)}</h3>
      ${passages}
    </article>`;
  });
  return cards.join("\n");
}

export function renderAnswer(payload: SearchPayload, warn: (msg: string) => void = console.warn): string {
  const answer = payload.answer;
  if (!answer) return "";
  const passage = payload.results
    .flatMap((group) => group.passages)
    .find((hit) => hit.passage_id === answer.passage_id);
  if (!passage) {
    warn(`answer references unknown passage ${answer.passage_id}; suppressed`);
    return "";
  }
  const { start, end } = answer;
  if (!(Number.isInteger(start) && Number.isInteger(end) && 0 <= start && start < end && end <= passage.text.length)) {
    warn(`answer span [${start}, ${end}) out of bounds for ${answer.passage_id}; suppressed`);
    return "";
  }
  const before = escapeHtml(passage.text.slice(0, start));
  const highlighted = escapeHtml(passage.text.slice(start, end));
  const after = escapeHtml(passage.text.slice(end));
  return `
  <section class="answer">
    <h2>Answer <span class="confidence">confidence ${answer.confidence.toFixed(2)}</span></h2>
    <p>${before}<mark>${highlighted}</mark>${after}</p>
    <p class="provenance">from ${escapeHtml(answer.passage_id)}</p>
  </section>`;
}

function renderTiming(payload: SearchPayload): string {
  const t = payload.timing;
  const cached = t.cache_hit ? " (cached)" : ` &middot; l1 ${t.l1_ms.toFixed(1)}ms &middot; l2 ${t.l2_ms.toFixed(1)}ms`;
  return `<p class="timing">${t.total_ms.toFixed(1)}ms${cached}</p>`;
}

export function renderApp(state: UiSearchState): string {
  const parts: string[] = [];
  parts.push(`
  <form id="search-form">
    <input id="query" type="search" value="${escapeHtml(state.query)}"
           placeholder="search the literature" autocomplete="off" />
    <button type="submit"${state.loading ? " disabled" : ""}>Search</button>
    <label><input type="checkbox" id="toggle-fusion"${state.fusion ? " checked" : ""}/> fusion</label>
    <label><input type="checkbox" id="toggle-answers"${state.answers ? " checked" : ""}/> answers</label>
  </form>`);

  if (state.loading) {
    parts.push(`<p class="loading">Searching&hellip;</p>`);
  } else if (state.error) {
    parts.push(`
    <div class="error">
      <p>${escapeHtml(state.error)}</p>
      <button type="button" data-action="retry">Retry</button>
    </div>`);
  }

  if (state.hint) {
    parts.push(`<p class="hint">${escapeHtml(state.hint)}</p>`);
  }

  if (state.result) {
    parts.push(renderAnswer(state.result));
    parts.push(`<section class="results">${renderResults(state.result)}</section>`);
    parts.push(renderTiming(state.result));
  }
  return parts.join("\n");
}
