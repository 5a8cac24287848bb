"""Sweep orchestration: RD curves per (clip, k), cost evaluation, and the
per-clip search for the best scale factor.

Cost of one k trial is the BD-Rate of its curve against the k=1 reference
curve, so each trial costs one full QP-ladder sweep (N encodes).  Points
are cached content-addressed and every completed encode (fresh or cached)
is appended to a JSON Lines run ledger, which is sufficient to recompute
every derived statistic.

The search runs bracketing plus Brent over log k by default.  k-hat is
the best evaluated trial including the k=1 baseline, so no clip can
regress: reported bd_rate is always <= 0.
"""

from __future__ import annotations

import hashlib
import json
import math
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

from .errors import RdtuneError, SweepError
from .encoder_bridge import EncodeJob
from .lambda_model import CodecId, FrameTypeGroup, LambdaScope, validate_qp
from .rd_curve import (
    RDCurve,
    RDPoint,
    bd_rate,
    bd_quality,
    matched_qp_savings,
    mean_matched_savings,
    mean_vmaf_delta,
)
from .scalar_opt import (
    BracketError,
    OptimizerConfig,
    SearchDomain,
    bracket_minimum,
    brent_minimize,
)

__all__ = [
    "DEFAULT_QP_LADDERS",
    "DEFAULT_OPTIMIZER",
    "SweepConfig",
    "TrialRecord",
    "OptimizationResult",
    "InvocationBudget",
    "EncoderBackend",
    "PointCache",
    "RunLedger",
    "cache_key",
    "run_sweep",
    "evaluate_cost",
    "optimize_clip",
    "predict_budget",
    "curves_from_ledger",
    "save_result",
    "load_result",
]

DEFAULT_QP_LADDERS: dict[CodecId, tuple[int, ...]] = {
    CodecId.AV1: (27, 39, 49, 59, 63),
    CodecId.HEVC: (22, 27, 32, 37, 42),
}

DEFAULT_OPTIMIZER = OptimizerConfig(
    xtol=0.01, max_iters=25, search_domain=SearchDomain.LOGARITHMIC
)

# Default multiplicative search window and downhill seeds for k.
DEFAULT_K_BOUNDS = (1.0 / 16.0, 16.0)
DEFAULT_K_SEEDS = (0.5, 1.0)

_K_QUANTUM = 1e-6


def _quantize_k(k: float) -> int:
    return round(k / _K_QUANTUM)


class EncoderBackend(Protocol):
    """What the orchestrator needs from an encode backend."""

    invocations: int

    def measure(self, job: EncodeJob) -> RDPoint: ...

    def clip_digest(self, clip_id: str) -> str: ...

    def template_digest(self) -> str: ...

    def input_path(self, clip_id: str) -> Path | None: ...


@dataclass(frozen=True)
class SweepConfig:
    """Ladder, targeting, parallelism and cache placement for sweeps."""

    codec: CodecId
    group: FrameTypeGroup = FrameTypeGroup.ALL_FRAMES
    scope: LambdaScope = LambdaScope.TOP
    qp_ladder: tuple[int, ...] | None = None
    workers: int = 5
    cache_dir: Path | None = None
    min_curve_points: int = 4

    def __post_init__(self) -> None:
        ladder = self.qp_ladder
        if ladder is None:
            ladder = DEFAULT_QP_LADDERS[self.codec]
        ladder = tuple(int(q) for q in ladder)
        object.__setattr__(self, "qp_ladder", ladder)
        if self.cache_dir is not None:
            object.__setattr__(self, "cache_dir", Path(self.cache_dir))
        if not ladder:
            raise ValueError("qp_ladder must not be empty")
        if list(ladder) != sorted(set(ladder)):
            raise ValueError(f"qp_ladder must be strictly ascending, got {ladder}")
        for qp in ladder:
            if not validate_qp(self.codec, qp):
                lo, hi = self.codec.qp_range
                raise ValueError(f"qp {qp} outside [{lo}, {hi}] for {self.codec.value}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")
        if not self.group.valid_for(self.codec):
            raise ValueError(f"group {self.group.value} invalid for codec {self.codec.value}")

    @property
    def rd2_qp(self) -> int:
        """Second operating point of the ladder (typical streaming rates)."""
        return self.qp_ladder[1] if len(self.qp_ladder) > 1 else self.qp_ladder[0]


class PointCache:
    """Content-addressed store of parsed RD points (never media).

    Backed by one JSON file per key under `root`, plus an in-memory layer;
    with root=None the cache is memory-only.  Writes are serialized.
    """

    def __init__(self, root: Path | None = None):
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
        self._mem: dict[str, RDPoint] = {}
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> RDPoint | None:
        with self._lock:
            if key in self._mem:
                return self._mem[key]
        if self.root is None:
            return None
        path = self._path(key)
        if not path.exists():
            return None
        point = RDPoint.from_dict(json.loads(path.read_text())["rdpoint"])
        with self._lock:
            self._mem[key] = point
        return point

    def put(self, key: str, point: RDPoint) -> None:
        with self._lock:
            self._mem[key] = point
            if self.root is None:
                return
            tmp = self._path(key).with_suffix(".tmp")
            tmp.write_text(json.dumps({"cache_key": key, "rdpoint": point.to_dict()}, sort_keys=True))
            tmp.replace(self._path(key))


class RunLedger:
    """Append-only JSON Lines record of every completed encode."""

    def __init__(self, path: Path | None = None):
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
        self._records: list[dict] = []
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        with self._lock:
            self._records.append(record)
            if self.path is not None:
                with self.path.open("a") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")

    @property
    def records(self) -> list[dict]:
        with self._lock:
            return list(self._records)

    @staticmethod
    def load(path: Path | str) -> list[dict]:
        out = []
        with Path(path).open() as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out


def cache_key(job: EncodeJob, template_digest: str, clip_digest: str) -> str:
    """Stable digest over clip content identity and every job parameter
    that can change the encode.  k is quantized to 1e-6."""
    payload = "\n".join(
        [
            clip_digest,
            job.codec.value,
            str(job.qp),
            str(_quantize_k(job.k)),
            job.group.value,
            job.scope.value,
            template_digest,
        ]
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def _ledger_record(
    key: str, job: EncodeJob, point: RDPoint, seconds: float, cached: bool
) -> dict:
    return {
        "timestamp": time.time(),
        "cache_key": key,
        "clip": job.clip_id,
        "codec": job.codec.value,
        "qp": job.qp,
        "k": job.k,
        "group": job.group.value,
        "scope": job.scope.value,
        "bitrate_kbps": point.bitrate_kbps,
        "msssim": point.msssim,
        "msssim_db": point.msssim_db,
        "vmaf": point.vmaf,
        "invocation_seconds": seconds,
        "cached": cached,
    }


def _work_root(config: SweepConfig) -> Path:
    if config.cache_dir is not None:
        return config.cache_dir / "work"
    return Path(tempfile.gettempdir()) / "rdtune-work"


def _sweep(
    clip_id: str,
    k: float,
    config: SweepConfig,
    backend: EncoderBackend,
    cache: PointCache,
    ledger: RunLedger,
) -> tuple[RDCurve, int]:
    """Measure the full ladder for one (clip, k); returns (curve, fresh_encodes)."""
    template_digest = backend.template_digest()
    clip_digest = backend.clip_digest(clip_id)
    work_root = _work_root(config)

    points: dict[int, RDPoint] = {}
    pending: list[tuple[int, EncodeJob, str]] = []
    for qp in config.qp_ladder:
        job = EncodeJob(
            clip_id=clip_id,
            codec=config.codec,
            qp=qp,
            k=k,
            group=config.group,
            scope=config.scope,
            input_path=backend.input_path(clip_id),
            work_dir=None,
        )
        key = cache_key(job, template_digest, clip_digest)
        job = replace(job, work_dir=work_root / key[:16])
        point = cache.get(key)
        if point is not None:
            points[qp] = point
            ledger.append(_ledger_record(key, job, point, 0.0, cached=True))
        else:
            pending.append((qp, job, key))

    failures: list[tuple[int, Exception]] = []
    if pending:
        def run_one(job: EncodeJob) -> tuple[RDPoint, float]:
            start = time.perf_counter()
            point = backend.measure(job)
            return point, time.perf_counter() - start

        with ThreadPoolExecutor(max_workers=min(config.workers, len(pending))) as pool:
            futures = {pool.submit(run_one, job): (qp, job, key) for qp, job, key in pending}
            for fut in as_completed(futures):
                qp, job, key = futures[fut]
                try:
                    point, seconds = fut.result()
                except Exception as exc:  # partial results stay cached
                    failures.append((qp, exc))
                    continue
                cache.put(key, point)
                points[qp] = point
                ledger.append(_ledger_record(key, job, point, seconds, cached=False))

    if failures:
        failures.sort(key=lambda f: f[0])
        qp, exc = failures[0]
        more = f" (+{len(failures) - 1} more)" if len(failures) > 1 else ""
        raise SweepError(f"encode failed at qp={qp}, k={k}{more}: {exc}") from exc

    curve = RDCurve(
        clip_id=clip_id,
        codec=config.codec,
        k=k,
        group=config.group,
        scope=config.scope,
        points=tuple(points[qp] for qp in config.qp_ladder),
    )
    return curve, len(pending)


def _cache_for(config: SweepConfig, cache: PointCache | None) -> PointCache:
    return cache if cache is not None else PointCache(config.cache_dir)


def _ledger_for(config: SweepConfig, ledger: RunLedger | None) -> RunLedger:
    if ledger is not None:
        return ledger
    path = config.cache_dir / "ledger.jsonl" if config.cache_dir is not None else None
    return RunLedger(path)


def run_sweep(
    clip_id: str,
    k: float,
    config: SweepConfig,
    backend: EncoderBackend,
    cache: PointCache | None = None,
    ledger: RunLedger | None = None,
) -> RDCurve:
    """RD curve over the full ladder for one (clip, k), using up to
    config.workers concurrent encodes and consulting the cache first."""
    curve, _ = _sweep(clip_id, k, config, backend, _cache_for(config, cache), _ledger_for(config, ledger))
    return curve


@dataclass(frozen=True)
class TrialRecord:
    """One evaluated scale factor and what it cost."""

    k: float
    curve: RDCurve
    cost: float
    encoder_invocations: int

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "cost": self.cost,
            "encoder_invocations": self.encoder_invocations,
            "curve": self.curve.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(
            k=float(d["k"]),
            curve=RDCurve.from_dict(d["curve"]),
            cost=float(d["cost"]),
            encoder_invocations=int(d["encoder_invocations"]),
        )


def evaluate_cost(
    clip_id: str,
    k: float,
    reference_curve: RDCurve,
    config: SweepConfig,
    backend: EncoderBackend,
    cache: PointCache | None = None,
    ledger: RunLedger | None = None,
) -> TrialRecord:
    """BD-Rate of the k-curve against the k=1 reference curve.

    k=1 short-circuits to cost 0 with zero invocations; the reference
    curve already exists by precondition.
    """
    if _quantize_k(k) == _quantize_k(1.0):
        return TrialRecord(k=1.0, curve=reference_curve, cost=0.0, encoder_invocations=0)
    curve, fresh = _sweep(
        clip_id, k, config, backend, _cache_for(config, cache), _ledger_for(config, ledger)
    )
    cost = bd_rate(reference_curve, curve, min_points=config.min_curve_points)
    return TrialRecord(k=k, curve=curve, cost=cost, encoder_invocations=fresh)


@dataclass(frozen=True)
class OptimizationResult:
    """Converged per-clip outcome plus everything needed to report it."""

    clip_id: str
    codec: CodecId
    group: FrameTypeGroup
    scope: LambdaScope
    k_hat: float
    bd_rate: float
    iterations: int
    improved: bool
    rd2_savings: float
    mean_savings: float
    msssim_change_db: float
    vmaf_change: float | None
    total_invocations: int
    trials: tuple[TrialRecord, ...]
    reference_curve: RDCurve

    def to_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "codec": self.codec.value,
            "group": self.group.value,
            "scope": self.scope.value,
            "k_hat": self.k_hat,
            "bd_rate": self.bd_rate,
            "iterations": self.iterations,
            "improved": self.improved,
            "rd2_savings": self.rd2_savings,
            "mean_savings": self.mean_savings,
            "msssim_change_db": self.msssim_change_db,
            "vmaf_change": self.vmaf_change,
            "total_invocations": self.total_invocations,
            "trials": [t.to_dict() for t in self.trials],
            "reference_curve": self.reference_curve.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizationResult":
        return cls(
            clip_id=str(d["clip_id"]),
            codec=CodecId.parse(d["codec"]),
            group=FrameTypeGroup.parse(d["group"]),
            scope=LambdaScope.parse(d["scope"]),
            k_hat=float(d["k_hat"]),
            bd_rate=float(d["bd_rate"]),
            iterations=int(d["iterations"]),
            improved=bool(d["improved"]),
            rd2_savings=float(d["rd2_savings"]),
            mean_savings=float(d["mean_savings"]),
            msssim_change_db=float(d["msssim_change_db"]),
            vmaf_change=None if d.get("vmaf_change") is None else float(d["vmaf_change"]),
            total_invocations=int(d["total_invocations"]),
            trials=tuple(TrialRecord.from_dict(t) for t in d["trials"]),
            reference_curve=RDCurve.from_dict(d["reference_curve"]),
        )


def save_result(result: OptimizationResult, path: Path | str) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")


def load_result(path: Path | str) -> OptimizationResult:
    return OptimizationResult.from_dict(json.loads(Path(path).read_text()))


class _TrialFailure(RdtuneError):
    """A trial failed twice in a row; the optimization degrades to k=1."""


class _CostObjective:
    """Memoized cost callback over the optimizer's coordinate.

    Arguments are quantized to a 1e-6 grid so re-probes are free.  A
    failing trial is retried once (partial points are already cached, so
    the retry only re-dispatches what failed); a second failure aborts
    the optimization via _TrialFailure.
    """

    def __init__(self, clip_id, config, backend, reference, cache, ledger, log_domain: bool):
        self.clip_id = clip_id
        self.config = config
        self.backend = backend
        self.reference = reference
        self.cache = cache
        self.ledger = ledger
        self.log_domain = log_domain
        self.trials: list[TrialRecord] = []
        self._memo: dict[int, float] = {}

    def __call__(self, coord: float) -> float:
        grid = round(coord / 1e-6)
        if grid in self._memo:
            return self._memo[grid]
        k = math.exp(coord) if self.log_domain else coord
        try:
            trial = evaluate_cost(
                self.clip_id, k, self.reference, self.config, self.backend, self.cache, self.ledger
            )
        except RdtuneError:
            try:
                trial = evaluate_cost(
                    self.clip_id, k, self.reference, self.config, self.backend, self.cache, self.ledger
                )
            except RdtuneError as exc:
                raise _TrialFailure(f"trial k={k:.6f} failed twice: {exc}") from exc
        self.trials.append(trial)
        self._memo[grid] = trial.cost
        return trial.cost


def optimize_clip(
    clip_id: str,
    config: SweepConfig,
    backend: EncoderBackend,
    optimizer: OptimizerConfig = DEFAULT_OPTIMIZER,
    *,
    k_bounds: tuple[float, float] = DEFAULT_K_BOUNDS,
    k_seeds: tuple[float, float] = DEFAULT_K_SEEDS,
    cache: PointCache | None = None,
    ledger: RunLedger | None = None,
) -> OptimizationResult:
    """Find the scale factor minimizing BD-Rate against the clip's k=1 curve.

    Brackets downhill from the seeds, then runs Brent; k-hat is the best
    evaluated trial including the k=1 baseline.  On bracket failure or a
    twice-failed trial the result degenerates to k-hat=1, flagged
    improved=False.  A failed reference sweep is retried once (completed
    points are already cached) and then propagates, since no result can
    be reported without the k=1 curve.
    """
    cache = _cache_for(config, cache)
    ledger = _ledger_for(config, ledger)
    try:
        reference, _ = _sweep(clip_id, 1.0, config, backend, cache, ledger)
    except RdtuneError:
        reference, _ = _sweep(clip_id, 1.0, config, backend, cache, ledger)

    log_domain = optimizer.search_domain is SearchDomain.LOGARITHMIC
    to_coord = math.log if log_domain else (lambda v: v)
    objective = _CostObjective(clip_id, config, backend, reference, cache, ledger, log_domain)

    degenerate = False
    try:
        bracket = bracket_minimum(
            objective,
            to_coord(k_seeds[0]),
            to_coord(k_seeds[1]),
            max_expansions=32,
            lo=to_coord(k_bounds[0]),
            hi=to_coord(k_bounds[1]),
        )
        brent_minimize(objective, bracket, optimizer)
    except (BracketError, _TrialFailure):
        degenerate = True

    trials = list(objective.trials)
    baseline = TrialRecord(k=1.0, curve=reference, cost=0.0, encoder_invocations=0)
    if not any(_quantize_k(t.k) == _quantize_k(1.0) for t in trials):
        trials.insert(0, baseline)

    iterations = sum(1 for t in trials if _quantize_k(t.k) != _quantize_k(1.0))
    total_invocations = sum(t.encoder_invocations for t in trials)

    if degenerate:
        best = baseline
    else:
        best = min(trials, key=lambda t: (t.cost, abs(math.log(t.k))))

    if _quantize_k(best.k) == _quantize_k(1.0) or best.cost >= 0.0:
        return OptimizationResult(
            clip_id=clip_id,
            codec=config.codec,
            group=config.group,
            scope=config.scope,
            k_hat=1.0,
            bd_rate=0.0,
            iterations=iterations,
            improved=False,
            rd2_savings=0.0,
            mean_savings=0.0,
            msssim_change_db=0.0,
            vmaf_change=0.0,
            total_invocations=total_invocations,
            trials=tuple(trials),
            reference_curve=reference,
        )

    return OptimizationResult(
        clip_id=clip_id,
        codec=config.codec,
        group=config.group,
        scope=config.scope,
        k_hat=best.k,
        bd_rate=best.cost,
        iterations=iterations,
        improved=True,
        rd2_savings=matched_qp_savings(reference, best.curve, config.rd2_qp),
        mean_savings=mean_matched_savings(reference, best.curve),
        msssim_change_db=bd_quality(reference, best.curve, min_points=config.min_curve_points),
        vmaf_change=mean_vmaf_delta(reference, best.curve),
        total_invocations=total_invocations,
        trials=tuple(trials),
        reference_curve=reference,
    )


@dataclass(frozen=True)
class InvocationBudget:
    """PNM accounting: P optimizer iterations, N ladder points, M clips."""

    p: int
    n: int
    m: int

    def __post_init__(self) -> None:
        for name in ("p", "n", "m"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


def predict_budget(budget: InvocationBudget) -> int:
    """Predicted encoder invocations for a full run: P*N*M."""
    return budget.p * budget.n * budget.m


def curves_from_ledger(records: list[dict]) -> list[RDCurve]:
    """Rebuild all complete RD curves recorded in a ledger.

    Records are deduplicated by cache_key (last wins), then grouped by
    (clip, codec, k, group, scope).
    """
    latest: dict[str, dict] = {}
    order: list[str] = []
    for rec in records:
        key = rec["cache_key"]
        if key not in latest:
            order.append(key)
        latest[key] = rec

    groups: dict[tuple, dict[int, RDPoint]] = {}
    for key in order:
        rec = latest[key]
        ident = (rec["clip"], rec["codec"], _quantize_k(rec["k"]), rec["group"], rec["scope"], rec["k"])
        point = RDPoint(
            qp=int(rec["qp"]),
            bitrate_kbps=float(rec["bitrate_kbps"]),
            msssim=float(rec["msssim"]),
            msssim_db=float(rec["msssim_db"]),
            vmaf=None if rec.get("vmaf") is None else float(rec["vmaf"]),
        )
        groups.setdefault(ident, {})[point.qp] = point

    curves = []
    for (clip, codec, _kq, group, scope, k), by_qp in groups.items():
        if len(by_qp) < 2:
            continue
        curves.append(
            RDCurve(
                clip_id=clip,
                codec=CodecId.parse(codec),
                k=float(k),
                group=FrameTypeGroup.parse(group),
                scope=LambdaScope.parse(scope),
                points=tuple(by_qp[qp] for qp in sorted(by_qp)),
            )
        )
    return curves
