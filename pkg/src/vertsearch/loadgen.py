"""Closed-loop load harness: virtual users with think time, a warm-up phase,
a never-repeat query sampler, and a latency report in the classic
QPS/median/p90/mean/min/max table schema.

Virtual users loop request -> record latency -> sleep a uniform think time.
The optional warm-up phase sends a fixed-rate trickle first and its samples
are excluded from the report.  A ``time_scale`` divisor shrinks every
duration and think interval so a protocol designed in minutes can run in
seconds during tests without changing request counts per phase structure.
"""

from __future__ import annotations

import logging
import math
import random
import statistics
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

logger = logging.getLogger(__name__)

DEFAULT_THINK_RANGE = (15.0, 60.0)
DEFAULT_DURATION = 600.0
DEFAULT_WARMUP_QPS = 0.5
DEFAULT_WARMUP_DURATION = 600.0

REPORT_COLUMNS = ("QPS", "Median (s)", "90% (s)", "Mean (s)", "Min (s)", "Max (s)")


class PoolExhausted(RuntimeError):
    pass


class LoadTargetError(RuntimeError):
    pass


def percentile(samples: Sequence[float], q: float) -> float:
    """Nearest-rank percentile: the value at 1-based index ceil(q*n) of the
    sorted samples."""
    if not samples:
        raise ValueError("percentile of empty sample list")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    ordered = sorted(samples)
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


class QuerySampler:
    """Seeded permutation over a query pool; every draw is unique."""

    def __init__(self, queries: Sequence[str], seed: int = 0):
        self._queries = list(queries)
        random.Random(seed).shuffle(self._queries)
        self._cursor = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._queries)

    @property
    def remaining(self) -> int:
        with self._lock:
            return len(self._queries) - self._cursor

    def next(self) -> str:
        with self._lock:
            if self._cursor >= len(self._queries):
                raise PoolExhausted("query pool exhausted")
            query = self._queries[self._cursor]
            self._cursor += 1
            return query


@dataclass
class LoadConfig:
    url: str
    queries: Sequence[str]
    num_users: int = 10
    think_range: tuple[float, float] = DEFAULT_THINK_RANGE
    duration: float = DEFAULT_DURATION
    warmup_qps: float = DEFAULT_WARMUP_QPS
    warmup_duration: float = DEFAULT_WARMUP_DURATION
    time_scale: float = 1.0
    seed: int = 0
    timeout: float = 30.0
    no_cache: bool = True  # measurement protocol: bypass the result cache

    def __post_init__(self) -> None:
        if self.think_range[0] > self.think_range[1] or self.think_range[0] < 0:
            raise ValueError("think_range must satisfy 0 <= min <= max")
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if self.time_scale <= 0:
            raise ValueError("time_scale must be positive")

    @property
    def warmup_count(self) -> int:
        return round(self.warmup_qps * self.warmup_duration)


@dataclass
class LatencyReport:
    qps: float = 0.0
    failures: int = 0
    median_s: float = 0.0
    p90_s: float = 0.0
    mean_s: float = 0.0
    min_s: float = 0.0
    max_s: float = 0.0
    num_samples: int = 0
    valid: bool = True
    note: str = ""

    def row(self) -> tuple[float, float, float, float, float, float]:
        return (self.qps, self.median_s, self.p90_s, self.mean_s, self.min_s, self.max_s)

    def to_tsv(self) -> str:
        header = "\t".join(REPORT_COLUMNS)
        row = "\t".join(f"{v:.4f}" for v in self.row())
        return f"{header}\n{row}\n"


def write_report(report: LatencyReport, path: str | Path) -> None:
    Path(path).write_text(report.to_tsv(), encoding="utf-8")


def _http_request(base_url: str, query: str, timeout: float, no_cache: bool) -> None:
    params = {"q": query}
    if no_cache:
        params["no_cache"] = "1"
    url = f"{base_url.rstrip('/')}/search?{urllib.parse.urlencode(params)}"
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        resp.read()
        if not 200 <= resp.status < 300:
            raise urllib.error.HTTPError(url, resp.status, "bad status", resp.headers, None)


def _probe_target(base_url: str, timeout: float) -> None:
    url = f"{base_url.rstrip('/')}/health"
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            resp.read()
    except urllib.error.HTTPError:
        return  # any HTTP response means the target is reachable
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise LoadTargetError(f"target {base_url} unreachable: {exc}") from exc


@dataclass
class _Collector:
    samples: list[float] = field(default_factory=list)
    failures: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def success(self, latency: float) -> None:
        with self._lock:
            self.samples.append(latency)

    def failure(self) -> None:
        with self._lock:
            self.failures += 1


def run_load(
    config: LoadConfig,
    request_fn: Callable[[str], None] | None = None,
) -> LatencyReport:
    """Execute the warm-up phase then the measured closed-loop experiment.

    ``request_fn`` defaults to a GET against ``{url}/search``; it must raise
    on a failed request.  Pool exhaustion aborts with a partial report flagged
    invalid; an unreachable target is fatal before any load starts.
    """
    if request_fn is None:
        _probe_target(config.url, config.timeout)
        request_fn = lambda q: _http_request(config.url, q, config.timeout, config.no_cache)

    sampler = QuerySampler(config.queries, config.seed)
    if len(sampler) < config.warmup_count + config.num_users:
        raise ValueError(
            f"query pool of {len(sampler)} cannot cover warm-up ({config.warmup_count}) "
            f"plus one request per user ({config.num_users})"
        )
    scale = config.time_scale

    # Warm-up: fixed-rate trickle, samples discarded.
    if config.warmup_count > 0 and config.warmup_qps > 0:
        interval = (1.0 / config.warmup_qps) / scale
        start = time.perf_counter()
        for i in range(config.warmup_count):
            try:
                request_fn(sampler.next())
            except PoolExhausted:
                return LatencyReport(valid=False, note="query pool exhausted during warm-up")
            except Exception:  # noqa: BLE001 - warm-up failures are not reported
                pass
            next_at = start + (i + 1) * interval
            pause = next_at - time.perf_counter()
            if pause > 0:
                time.sleep(pause)

    collector = _Collector()
    exhausted = threading.Event()
    deadline = time.perf_counter() + config.duration / scale

    def user_loop(user_id: int) -> None:
        rng = random.Random(f"{config.seed}:{user_id}")
        while time.perf_counter() < deadline and not exhausted.is_set():
            try:
                query = sampler.next()
            except PoolExhausted:
                exhausted.set()
                return
            t0 = time.perf_counter()
            try:
                request_fn(query)
                collector.success(time.perf_counter() - t0)
            except Exception:  # noqa: BLE001 - recorded as a failure
                collector.failure()
            think = rng.uniform(*config.think_range) / scale
            remaining = deadline - time.perf_counter()
            if remaining <= 0:
                return
            time.sleep(min(think, remaining + 0.01))

    threads = [threading.Thread(target=user_loop, args=(uid,)) for uid in range(config.num_users)]
    t_begin = time.perf_counter()
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    elapsed = max(time.perf_counter() - t_begin, 1e-9)

    samples = collector.samples
    if not samples:
        return LatencyReport(
            failures=collector.failures,
            num_samples=0,
            valid=False,
            note="no samples collected",
        )
    report = LatencyReport(
        qps=len(samples) / elapsed,
        failures=collector.failures,
        median_s=percentile(samples, 0.5),
        p90_s=percentile(samples, 0.9),
        mean_s=statistics.fmean(samples),
        min_s=min(samples),
        max_s=max(samples),
        num_samples=len(samples),
    )
    if exhausted.is_set():
        report.valid = False
        report.note = "query pool exhausted; partial report"
    logger.info(
        "load run: %d samples, %.2f qps, median %.3fs, p90 %.3fs, %d failures",
        report.num_samples, report.qps, report.median_s, report.p90_s, report.failures,
    )
    return report
