// Wire types of the search backend: GET /search and GET /health payloads.

export interface PassageHit {
  passage_id: string;
  text: string;
  l1_score: number;
  l2_score: number;
}

export interface DocumentGroup {
  doc_id: string;
  title: string;
  passages: PassageHit[];
}

export interface Answer {
  passage_id: string;
  start: number;
  end: number;
  confidence: number;
}

export interface Timing {
  cache_hit: boolean;
  l1_ms: number;
  l2_ms: number;
  total_ms: number;
}

export interface SearchPayload {
  query: string;
  results: DocumentGroup[];
  answer: Answer | null;
  timing: Timing;
}

export interface HealthPayload {
  index_generation: string;
  num_shards: number;
  num_passages: number;
  model_version: string;
  cache_size: number;
}

export interface SearchOptions {
  k?: number;
  fusion?: boolean;
  answers?: boolean;
  noCache?: boolean;
}
