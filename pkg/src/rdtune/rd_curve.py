"""RD-curve data model and Bjontegaard-style metrics.

A curve is a set of (qp, bitrate, quality) measurements for one encode
configuration.  Quality is MS-SSIM expressed in dB via the standard map
db = -10*log10(1 - score); the raw score compresses near 1.0, which makes
integration ill-conditioned, so all curve math runs on the dB axis.

bd_rate fits a monotone cubic to quality -> log10(bitrate) for each curve
and averages the log-rate difference over the overlapping quality
interval; the result is the signed average bitrate difference in percent
(negative means the test curve needs fewer bits at equal quality).
bd_quality is the same construction with the axes swapped.  There is no
extrapolation beyond the overlap interval, ever.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    CurveDataError,
    DomainError,
    InsufficientPointsError,
    LadderMismatchError,
    MissingPointError,
    OverlapError,
)
from .lambda_model import CodecId, FrameTypeGroup, LambdaScope
from .pchip import PchipInterpolant, pchip_fit

__all__ = [
    "RDPoint",
    "RDCurve",
    "OverlapInterval",
    "msssim_to_db",
    "db_to_msssim",
    "overlap_interval",
    "bd_rate",
    "bd_quality",
    "matched_qp_savings",
    "mean_matched_savings",
    "mean_vmaf_delta",
]

# Above this score (90 dB), 1 - msssim has lost enough precision that the
# dB consistency check would mostly measure rounding noise.
_SCORE_CHECK_LIMIT = 1.0 - 1e-9


def msssim_to_db(score: float) -> float:
    """Map an MS-SSIM score in [0, 1) to decibels: -10*log10(1 - score)."""
    if not (0.0 <= score < 1.0):
        raise DomainError(f"msssim score must lie in [0, 1), got {score}")
    return -10.0 * math.log10(1.0 - score)


def db_to_msssim(db: float) -> float:
    """Inverse of msssim_to_db; requires db > 0 so the score lands in (0, 1)."""
    if not (db > 0.0 and math.isfinite(db)):
        raise DomainError(f"msssim_db must be positive and finite, got {db}")
    return 1.0 - 10.0 ** (-db / 10.0)


@dataclass(frozen=True)
class RDPoint:
    """One (qp, bitrate, quality) measurement."""

    qp: int
    bitrate_kbps: float
    msssim: float
    msssim_db: float
    vmaf: float | None = None

    def __post_init__(self) -> None:
        if self.bitrate_kbps <= 0.0 or not math.isfinite(self.bitrate_kbps):
            raise CurveDataError(f"bitrate must be positive and finite, got {self.bitrate_kbps}")
        if not (0.0 < self.msssim <= 1.0):
            raise CurveDataError(f"msssim must lie in (0, 1], got {self.msssim}")
        if not math.isfinite(self.msssim_db):
            raise CurveDataError(f"msssim_db must be finite, got {self.msssim_db}")
        if self.msssim < _SCORE_CHECK_LIMIT:
            expected = msssim_to_db(self.msssim)
            if abs(self.msssim_db - expected) > 1e-6 * max(1.0, abs(expected)):
                raise CurveDataError(
                    f"msssim_db={self.msssim_db} inconsistent with score {self.msssim} "
                    f"(expected {expected})"
                )

    @classmethod
    def from_score(cls, qp: int, bitrate_kbps: float, msssim: float, vmaf: float | None = None) -> "RDPoint":
        return cls(qp=qp, bitrate_kbps=bitrate_kbps, msssim=msssim,
                   msssim_db=msssim_to_db(msssim), vmaf=vmaf)

    @classmethod
    def from_db(cls, qp: int, bitrate_kbps: float, msssim_db: float, vmaf: float | None = None) -> "RDPoint":
        return cls(qp=qp, bitrate_kbps=bitrate_kbps, msssim=db_to_msssim(msssim_db),
                   msssim_db=msssim_db, vmaf=vmaf)

    def to_dict(self) -> dict:
        return {
            "qp": self.qp,
            "bitrate_kbps": self.bitrate_kbps,
            "msssim": self.msssim,
            "msssim_db": self.msssim_db,
            "vmaf": self.vmaf,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RDPoint":
        return cls(qp=int(d["qp"]), bitrate_kbps=float(d["bitrate_kbps"]),
                   msssim=float(d["msssim"]), msssim_db=float(d["msssim_db"]),
                   vmaf=None if d.get("vmaf") is None else float(d["vmaf"]))


@dataclass(frozen=True)
class RDCurve:
    """Measurements for one (clip, k, group, scope), sorted by ascending quality.

    Both quality and bitrate must be strictly increasing along the sorted
    points (the monotone RD assumption) and QPs must be unique.
    """

    clip_id: str
    codec: CodecId
    k: float
    group: FrameTypeGroup
    scope: LambdaScope
    points: tuple[RDPoint, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.k <= 0.0:
            raise CurveDataError(f"scale factor k must be positive, got {self.k}")
        if not self.group.valid_for(self.codec):
            raise CurveDataError(f"group {self.group.value} invalid for codec {self.codec.value}")
        pts = tuple(sorted(self.points, key=lambda p: p.msssim_db))
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise CurveDataError(f"curve needs at least 2 points, got {len(pts)}")
        qps = [p.qp for p in pts]
        if len(set(qps)) != len(qps):
            dupes = sorted({q for q in qps if qps.count(q) > 1})
            raise CurveDataError(f"duplicate QPs in curve: {dupes}")
        for a, b in zip(pts, pts[1:]):
            if b.msssim_db <= a.msssim_db:
                raise CurveDataError(
                    f"quality not strictly increasing: {a.msssim_db} then {b.msssim_db}"
                )
            if b.bitrate_kbps <= a.bitrate_kbps:
                raise CurveDataError(
                    f"bitrate not strictly increasing with quality: "
                    f"{a.bitrate_kbps} then {b.bitrate_kbps} (qp {a.qp} -> {b.qp})"
                )

    @property
    def qualities_db(self) -> np.ndarray:
        return np.array([p.msssim_db for p in self.points])

    @property
    def log10_rates(self) -> np.ndarray:
        return np.log10([p.bitrate_kbps for p in self.points])

    @property
    def qps(self) -> tuple[int, ...]:
        return tuple(p.qp for p in self.points)

    def point_at(self, qp: int) -> RDPoint:
        for p in self.points:
            if p.qp == qp:
                return p
        raise MissingPointError(f"qp {qp} not present in curve for clip {self.clip_id!r}")

    def rate_fit(self) -> PchipInterpolant:
        """Monotone fit of quality (dB) -> log10 bitrate."""
        return pchip_fit(np.column_stack([self.qualities_db, self.log10_rates]))

    def quality_fit(self) -> PchipInterpolant:
        """Monotone fit of log10 bitrate -> quality (dB)."""
        return pchip_fit(np.column_stack([self.log10_rates, self.qualities_db]))

    def to_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "codec": self.codec.value,
            "k": self.k,
            "group": self.group.value,
            "scope": self.scope.value,
            "points": [p.to_dict() for p in self.points],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RDCurve":
        return cls(
            clip_id=str(d["clip_id"]),
            codec=CodecId.parse(d["codec"]),
            k=float(d["k"]),
            group=FrameTypeGroup.parse(d["group"]),
            scope=LambdaScope.parse(d["scope"]),
            points=tuple(RDPoint.from_dict(p) for p in d["points"]),
        )


@dataclass(frozen=True)
class OverlapInterval:
    """Shared span of two curves on the integration axis."""

    d1: float
    d2: float

    def __post_init__(self) -> None:
        if not self.d1 < self.d2:
            raise OverlapError(f"empty overlap interval [{self.d1}, {self.d2}]")

    @property
    def width(self) -> float:
        return self.d2 - self.d1


def overlap_interval(reference: RDCurve, test: RDCurve) -> OverlapInterval:
    """Overlap of the two curves' quality (dB) spans."""
    d1 = max(reference.points[0].msssim_db, test.points[0].msssim_db)
    d2 = min(reference.points[-1].msssim_db, test.points[-1].msssim_db)
    if d1 >= d2:
        raise OverlapError(
            f"curves share no quality interval: [{d1}, {d2}] "
            f"(ref span {reference.points[0].msssim_db}..{reference.points[-1].msssim_db}, "
            f"test span {test.points[0].msssim_db}..{test.points[-1].msssim_db})"
        )
    return OverlapInterval(d1, d2)


def _check_floor(reference: RDCurve, test: RDCurve, min_points: int, metric: str) -> None:
    if min_points < 2:
        raise InsufficientPointsError(f"{metric} floor cannot go below 2 points")
    if min_points < 4:
        warnings.warn(
            f"{metric} with fewer than 4 points is unreliable (floor set to {min_points})",
            stacklevel=3,
        )
    for name, curve in (("reference", reference), ("test", test)):
        if len(curve.points) < min_points:
            raise InsufficientPointsError(
                f"{metric} needs at least {min_points} points, {name} curve has {len(curve.points)}"
            )


def _simpson(fa: float, fm: float, fb: float, width: float) -> float:
    return width * (fa + 4.0 * fm + fb) / 6.0


def _adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    fa: float,
    fm: float,
    fb: float,
    whole: float,
    tol: float,
    depth: int,
) -> float:
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = _simpson(fa, flm, fm, m - a)
    right = _simpson(fm, frm, fb, b - m)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return _adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + _adaptive_simpson(
        f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1
    )


def _integrate_difference(
    f_test: PchipInterpolant,
    f_ref: PchipInterpolant,
    lo: float,
    hi: float,
    tol: float = 1e-8,
) -> float:
    """Integral of (f_test - f_ref) over [lo, hi].

    The integrand is piecewise cubic with breakpoints at the union of both
    knot sets, so Simpson is exact on each piece; the adaptive recursion
    only fires on rounding-level residuals.  `tol` bounds the error of the
    integral divided by (hi - lo).
    """
    cuts = np.unique(np.concatenate([f_test.x, f_ref.x, [lo, hi]]))
    cuts = cuts[(cuts >= lo) & (cuts <= hi)]

    def diff(v: float) -> float:
        return f_test(v) - f_ref(v)

    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        fa, fb = diff(a), diff(b)
        m = 0.5 * (a + b)
        fm = diff(m)
        whole = _simpson(fa, fm, fb, b - a)
        total += _adaptive_simpson(diff, a, b, fa, fm, fb, whole, tol * (b - a), 30)
    return total


def bd_rate(reference: RDCurve, test: RDCurve, *, min_points: int = 4) -> float:
    """Average bitrate difference of test vs reference, percent, over the
    overlapping quality interval.  Negative means the test curve is better."""
    _check_floor(reference, test, min_points, "bd_rate")
    span = overlap_interval(reference, test)
    integral = _integrate_difference(test.rate_fit(), reference.rate_fit(), span.d1, span.d2)
    delta = integral / span.width
    return (10.0 ** delta - 1.0) * 100.0


def bd_quality(reference: RDCurve, test: RDCurve, *, min_points: int = 4) -> float:
    """Average quality difference (dB) of test vs reference over the
    overlapping log-rate interval.  Positive means the test curve is better."""
    _check_floor(reference, test, min_points, "bd_quality")
    r1 = max(reference.log10_rates[0], test.log10_rates[0])
    r2 = min(reference.log10_rates[-1], test.log10_rates[-1])
    if r1 >= r2:
        raise OverlapError(f"curves share no rate interval: [{r1}, {r2}] in log10 kbps")
    integral = _integrate_difference(test.quality_fit(), reference.quality_fit(), r1, r2)
    return integral / (r2 - r1)


def matched_qp_savings(reference: RDCurve, test: RDCurve, qp: int) -> float:
    """Signed percent bitrate change of test vs reference at one shared QP."""
    ref_rate = reference.point_at(qp).bitrate_kbps
    test_rate = test.point_at(qp).bitrate_kbps
    return (test_rate - ref_rate) / ref_rate * 100.0


def mean_matched_savings(reference: RDCurve, test: RDCurve) -> float:
    """Arithmetic mean of matched-QP savings over the shared ladder.

    Both curves must cover exactly the same QPs.
    """
    ref_qps, test_qps = sorted(reference.qps), sorted(test.qps)
    if ref_qps != test_qps:
        raise LadderMismatchError(
            f"QP ladders differ: reference {ref_qps} vs test {test_qps}"
        )
    return float(np.mean([matched_qp_savings(reference, test, qp) for qp in ref_qps]))


def mean_vmaf_delta(reference: RDCurve, test: RDCurve) -> float | None:
    """Mean VMAF change over the shared ladder; None if any point lacks VMAF."""
    ref_qps, test_qps = sorted(reference.qps), sorted(test.qps)
    if ref_qps != test_qps:
        raise LadderMismatchError(
            f"QP ladders differ: reference {ref_qps} vs test {test_qps}"
        )
    deltas = []
    for qp in ref_qps:
        rv, tv = reference.point_at(qp).vmaf, test.point_at(qp).vmaf
        if rv is None or tv is None:
            return None
        deltas.append(tv - rv)
    return float(np.mean(deltas))
