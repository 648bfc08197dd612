# The serving pipeline over HTTP
#
# cache -> L1 retrieve -> L2 rerank -> group by document -> answer span.
# The same request twice: second hit comes straight from the LRU cache with an
# identical payload.  Everything here runs against a real HTTP server on a
# loopback port.

import json
import random
import urllib.parse
import urllib.request

from vertsearch import build_index
from vertsearch.corpus import Document, segment_passages
from vertsearch.httpapi import BackgroundServer
from vertsearch.rerank import CrossScorer
from vertsearch.service import SearchService

import numpy as np

rng = random.Random(5)
topics = ["spike protein binding", "vaccine trial outcomes", "viral replication rates"]
docs = []
for i, topic in enumerate(topics * 4):
    docs.append(
        Document(
            doc_id=f"doc{i}",
            title=f"Study {i}: {topic}",
            abstract=(
                f"This study examines {topic} in detail. "
                f"Results show {topic} depends on dose. "
                f"Further work on {rng.choice(topics)} is needed."
            ),
        )
    )
passages = [p for d in docs for p in segment_passages(d)]
index = build_index(passages, num_shards=3)

# A hand-weighted scorer stands in for a trained model here (see demo 05).
scorer = CrossScorer(np.array([0.3, 2.0, 1.0, 2.0, -0.2, 0.0, -1.0]))
service = SearchService(index, scorer=scorer, cache_capacity=128, abstain_threshold=0.3)

with BackgroundServer(service) as server:
    print(f"serving on {server.url}")

    query = urllib.parse.quote("vaccine trial outcomes")
    url = f"{server.url}/search?q={query}&answers=1"
    with urllib.request.urlopen(url) as resp:
        result = json.load(resp)

    print(f"\nquery: {result['query']!r}")
    for group in result["results"][:3]:
        print(f"  {group['doc_id']}: {group['title']}")
        for hit in group["passages"][:1]:
            print(f"      l1={hit['l1_score']:.2f} l2={hit['l2_score']:.2f} {hit['text'][:60]}")
    answer = result["answer"]
    if answer:
        texts = {h["passage_id"]: h["text"] for g in result["results"] for h in g["passages"]}
        span = texts[answer["passage_id"]][answer["start"]:answer["end"]]
        print(f"\nanswer (confidence {answer['confidence']:.2f}): {span!r}")

    # Second identical request: served from cache, payload unchanged.
    with urllib.request.urlopen(url) as resp:
        again = json.load(resp)
    print(f"\nsecond request cache_hit={again['timing']['cache_hit']} "
          f"in {again['timing']['total_ms']:.2f}ms "
          f"(first took {result['timing']['total_ms']:.2f}ms)")
    first_payload = {k: v for k, v in result.items() if k != "timing"}
    again_payload = {k: v for k, v in again.items() if k != "timing"}
    assert first_payload == again_payload

    with urllib.request.urlopen(f"{server.url}/health") as resp:
        print("\nhealth:", json.load(resp))

# The same service runs standalone from a key=value config file:
#   vertsearch serve --config service.conf
