import type { SearchPayload } from "../src/types.js";

export function fixturePayload(): SearchPayload {
  return {
    query: "spike protein binding",
    results: [
      {
        doc_id: "doc1",
        title: "Study 1 on spike protein binding",
        passages: [
          {
            passage_id: "doc1#1",
            text: "We measure spike protein binding in a cohort. The rate varies with dose.",
            l1_score: 4.21,
            l2_score: 0.93,
          },
          {
            passage_id: "doc1#0",
            text: "Study 1 on spike protein binding",
            l1_score: 3.9,
            l2_score: 0.88,
          },
        ],
      },
      {
        doc_id: "doc7",
        title: "Study 7 on receptor affinity",
        passages: [
          {
            passage_id: "doc7#1",
            text: "Receptor affinity correlates with binding strength.",
            l1_score: 2.2,
            l2_score: 0.61,
          },
        ],
      },
      {
        doc_id: "doc9",
        title: "",
        passages: [
          {
            passage_id: "doc9#0",
            text: "An untitled note about binding.",
            l1_score: 1.0,
            l2_score: 0.4,
          },
        ],
      },
    ],
    answer: {
      passage_id: "doc1#1",
      start: 11,
      end: 41,
      confidence: 0.82,
    },
    timing: { cache_hit: false, l1_ms: 2.4, l2_ms: 11.9, total_ms: 15.1 },
  };
}
