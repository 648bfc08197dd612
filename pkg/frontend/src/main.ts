// Browser entry point: wires the store to the DOM.  All rendering goes
// through renderApp so the page is a pure function of the store state.

import { health, search } from "./api.js";
import { renderApp } from "./render.js";
import { SearchStore } from "./state.js";

interface UiConfig {
  apiBaseUrl: string;
}

async function loadConfig(): Promise<UiConfig> {
  try {
    const resp = await fetch("./config.json");
    if (resp.ok) return (await resp.json()) as UiConfig;
  } catch {
    // fall through to the default
  }
  return { apiBaseUrl: "http://localhost:8080" };
}

async function start(): Promise<void> {
  const config = await loadConfig();
  const root = document.getElementById("app");
  const status = document.getElementById("status");
  if (!root) throw new Error("missing #app element");

  const store = new SearchStore((query, opts, signal) =>
    search(config.apiBaseUrl, query, opts, signal),
  );

  store.subscribe((state) => {
    root.innerHTML = renderApp(state);
  });
  root.innerHTML = renderApp(store.state);

  root.addEventListener("submit", (event) => {
    if ((event.target as HTMLElement).id === "search-form") {
      event.preventDefault();
      const input = root.querySelector<HTMLInputElement>("#query");
      void store.submitQuery(input?.value ?? "");
    }
  });
  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.action === "retry") void store.retry();
  });
  root.addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement;
    if (target.id === "toggle-fusion") store.setFusion(target.checked);
    if (target.id === "toggle-answers") store.setAnswers(target.checked);
  });

  if (status) {
    try {
      const info = await health(config.apiBaseUrl);
      status.textContent =
        `index ${info.index_generation} | ${info.num_passages} passages in ` +
        `${info.num_shards} shards | ${info.model_version}`;
    } catch {
      status.textContent = `backend unreachable at ${config.apiBaseUrl}`;
    }
  }
}

void start();
