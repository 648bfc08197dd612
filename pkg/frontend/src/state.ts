// UI state and transitions.
//
// The rendered page is a pure function of this state (see render.ts).  A
// monotonically increasing sequence number tags every submission; a response
// only applies if it still carries the latest tag, so a slow early response
// can never clobber a newer one.  Superseded in-flight requests are also
// aborted as a courtesy to the network.

import type { SearchOptions, SearchPayload } from "./types.js";

export interface UiSearchState {
  query: string;
  fusion: boolean;
  answers: boolean;
  loading: boolean;
  error: string | null;
  hint: string | null;
  result: SearchPayload | null;
}

export type SearchFn = (
  query: string,
  opts: SearchOptions,
  signal?: AbortSignal,
) => Promise<SearchPayload>;

export function initialState(): UiSearchState {
  return {
    query: "",
    fusion: false,
    answers: true,
    loading: false,
    error: null,
    hint: "Type a query to search.",
    result: null,
  };
}

export class SearchStore {
  state: UiSearchState = initialState();

  private seq = 0;
  private controller: AbortController | null = null;
  private listeners: Array<(state: UiSearchState) => void> = [];

  constructor(private readonly searchFn: SearchFn) {}

  subscribe(listener: (state: UiSearchState) => void): void {
    this.listeners.push(listener);
  }

  private update(patch: Partial<UiSearchState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  setFusion(on: boolean): void {
    this.update({ fusion: on });
  }

  setAnswers(on: boolean): void {
    this.update({ answers: on });
  }

  retry(): Promise<void> {
    return this.submitQuery(this.state.query);
  }

  async submitQuery(text: string): Promise<void> {
    const query = text.trim();
    if (!query) {
      // Guard: no request for an empty query, just the hint.
      this.update({ query: text, hint: "Type a query to search.", error: null, loading: false });
      return;
    }

    const mySeq = ++this.seq;
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    this.update({ query, loading: true, error: null, hint: null });

    let payload: SearchPayload;
    try {
      payload = await this.searchFn(
        query,
        { answers: this.state.answers, fusion: this.state.fusion },
        controller.signal,
      );
    } catch (err) {
      if (mySeq !== this.seq) return; // superseded; drop silently
      const message = err instanceof Error ? err.message : String(err);
      // Error banner with retry; the previous result stays on screen.
      this.update({ loading: false, error: message });
      return;
    }
    if (mySeq !== this.seq) return; // stale response; a newer submission won
    this.update({ loading: false, error: null, result: payload });
  }
}
