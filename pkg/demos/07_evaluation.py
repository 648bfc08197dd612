# TREC-style evaluation
#
# Rankings exchange as run files (topic Q0 id rank score tag), judgments as
# qrels (topic 0 id rel).  NDCG@10 is the headline metric, P@5 secondary.
# Conventions are printed in the report header: linear gain, log2 discount,
# unjudged = non-relevant.

import tempfile
from pathlib import Path

from vertsearch import evaluate, read_qrels, read_run, write_run
from vertsearch.evaluation import run_from_ranking

workdir = Path(tempfile.mkdtemp(prefix="vertsearch-demo-"))

# Judgments: two topics, graded relevance 0..2.
qrels_text = """\
covid-vaccines 0 doc-a 2
covid-vaccines 0 doc-b 1
covid-vaccines 0 doc-c 0
covid-vaccines 0 doc-d 2
spike-binding 0 doc-x 1
spike-binding 0 doc-y 0
"""
(workdir / "qrels.txt").write_text(qrels_text, encoding="utf-8")
qrels = read_qrels(workdir / "qrels.txt")

# A system's ranking: good on the first topic, mediocre on the second.
run = {
    "covid-vaccines": run_from_ranking(
        "covid-vaccines",
        [("doc-a", 9.1), ("doc-d", 8.7), ("doc-b", 5.2), ("doc-c", 1.0)],
        tag="demo",
    ),
    "spike-binding": run_from_ranking(
        "spike-binding", [("doc-y", 4.0), ("doc-x", 3.5)], tag="demo"
    ),
}
write_run(run, workdir / "run.txt")
assert read_run(workdir / "run.txt") == run  # files round-trip exactly

report = evaluate(run, qrels, k_ndcg=10, k_p=5)
print(report.format())
print()
print(f"mean NDCG@10 = {report.mean_ndcg:.4f}, mean P@5 = {report.mean_precision:.4f}")

# From the command line:
#   vertsearch eval --run run.txt --qrels qrels.txt --k-ndcg 10 --k-p 5
