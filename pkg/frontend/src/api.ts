// Typed client for the search backend.

import type { HealthPayload, SearchOptions, SearchPayload } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ApiError";
  }
}

export function buildSearchUrl(baseUrl: string, query: string, opts: SearchOptions = {}): string {
  const params = new URLSearchParams({ q: query });
  if (opts.k !== undefined) params.set("k", String(opts.k));
  if (opts.fusion) params.set("fusion", "1");
  if (opts.answers) params.set("answers", "1");
  if (opts.noCache) params.set("no_cache", "1");
  return `${baseUrl.replace(/\/$/, "")}/search?${params.toString()}`;
}

async function getJson<T>(url: string, signal?: AbortSignal): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, { signal });
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") throw err;
    throw new ApiError(`network error: ${String(err)}`);
  }
  if (!response.ok) {
    let detail = "";
    try {
      const body = (await response.json()) as { error?: string };
      detail = body.error ?? "";
    } catch {
      // non-JSON error body; status alone is enough
    }
    throw new ApiError(detail || `request failed with status ${response.status}`, response.status);
  }
  return (await response.json()) as T;
}

export function search(
  baseUrl: string,
  query: string,
  opts: SearchOptions = {},
  signal?: AbortSignal,
): Promise<SearchPayload> {
  return getJson<SearchPayload>(buildSearchUrl(baseUrl, query, opts), signal);
}

export function health(baseUrl: string, signal?: AbortSignal): Promise<HealthPayload> {
  return getJson<HealthPayload>(`${baseUrl.replace(/\/$/, "")}/health`, signal);
}
