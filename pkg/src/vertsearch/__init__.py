"""Passage-level vertical search: sharded BM25 retrieval feeding a trainable
reranker, self-supervised training-data generation, a serving pipeline with
caching and answer extraction, TREC-style evaluation, and a load harness."""

from .corpus import (
    CorpusStats,
    Document,
    Passage,
    decode_passage_id,
    encode_passage_id,
    load_corpus,
    segment_corpus,
    segment_passages,
)
from .evaluation import evaluate, ndcg_at_k, precision_at_k, read_qrels, read_run, write_run
from .index import (
    IndexMeta,
    IndexShard,
    SearchIndex,
    bm25_score,
    build_index,
    load_index,
    save_index,
    scatter_gather,
    shard_search,
)
from .loadgen import LatencyReport, LoadConfig, QuerySampler, percentile, run_load
from .rerank import (
    CrossScorer,
    ExternalScorerEndpoint,
    TrainConfig,
    featurize,
    load_model,
    remote_score,
    rerank,
    save_model,
    train,
)
from .retrieval import CandidateSet, SaliencyTable, load_saliency, retrieve, retrieve_fused
from .service import (
    LruCache,
    SearchRequest,
    SearchResult,
    SearchService,
    extract_answer,
    load_config,
)
from .textproc import Analyzer, BpeVocabulary, analyze, bpe_encode, load_vocab, save_vocab, train_bpe
from .training_data import (
    DomainLexicon,
    RelevancePair,
    TrainingTriple,
    balance_and_emit,
    filter_queries,
    generate_training_data,
    mine_negatives,
)

__version__ = "0.1.0"
