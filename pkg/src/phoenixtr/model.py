"""Clock-segment domain types and the regression/composition primitives.

A *segment* is one monotonic run of a mote's local clock between reboots.
Within a segment the local clock relates to global time linearly::

    gts = alpha * lc + beta

Pairwise fits between segments are stored for the ordered pair ``(i, j)`` with
``i < j`` and express ``j``'s clock as a function of ``i``'s clock.
"""

from __future__ import annotations

import sys
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

CHI_MAX = sys.float_info.max
# one shared NaN so sentinel fits compare equal to each other
_NAN = float("nan")
DEFAULT_MIN_FIT_POINTS = 3


class ReconstructionError(ValueError):
    """Base class for value-level reconstruction failures."""


class InsufficientPoints(ReconstructionError):
    pass


class DegenerateX(ReconstructionError):
    pass


class ZeroSlope(ReconstructionError):
    pass


class SentinelFit(ReconstructionError):
    pass


class SegmentId(NamedTuple):
    """``(mote_id, reboot_count)``; tuple ordering gives the lexicographic total order."""

    mote_id: int
    reboot_count: int

    def __str__(self) -> str:
        return f"{self.mote_id}:{self.reboot_count}"

    @classmethod
    def parse(cls, text: str) -> "SegmentId":
        mote, rc = text.split(":")
        return cls(int(mote), int(rc))


@dataclass(frozen=True)
class AnchorRecord:
    """One observed clock pair.

    ``receiver == sender`` marks a global anchor, in which case ``lc_s`` holds
    global time rather than a local clock reading.
    """

    receiver: SegmentId
    lc_r: float
    sender: SegmentId
    lc_s: float

    @property
    def is_global(self) -> bool:
        return self.receiver == self.sender


@dataclass(frozen=True)
class LocalFit:
    a: float
    b: float
    chi: float
    df: int
    n: int


@dataclass(frozen=True)
class GlobalFit:
    """A segment's mapping to global time.

    ``path`` runs from the segment itself to the segment holding global
    references, so ``path[0]`` is the owner and ``path[1]`` (if any) the parent.
    ``ancestors`` is the same path as a set; following the reconstruction
    algorithm's initialisation it includes the owner.
    """

    alpha: float
    beta: float
    chi: float
    df: int
    path: tuple[SegmentId, ...]
    ancestors: frozenset[SegmentId] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ancestors", frozenset(self.path))

    @property
    def segment(self) -> SegmentId:
        return self.path[0]

    @property
    def parent(self) -> Optional[SegmentId]:
        return self.path[1] if len(self.path) > 1 else None

    @property
    def is_sentinel(self) -> bool:
        return self.chi == CHI_MAX

    @classmethod
    def sentinel(cls, segment: SegmentId) -> "GlobalFit":
        return cls(alpha=_NAN, beta=_NAN, chi=CHI_MAX, df=0, path=(segment,))


def fit_llse(
    points: Iterable[tuple[float, float]] | np.ndarray,
    min_points: int = DEFAULT_MIN_FIT_POINTS,
) -> LocalFit:
    """Ordinary least-squares line ``y = a*x + b``.

    ``chi`` is the unbiased residual variance ``RSS / (n - 2)``; for an exact
    two-point fit (only reachable with ``min_points=2``) it is 0.

    Every float64 is a dyadic rational, so the normal equations are solved in
    exact integer arithmetic and each output is correctly rounded.  Clock
    readings of ~1e7 s with microsecond scatter lose most of the residual in
    any fixed-width float accumulation.
    """
    pts = np.asarray(points if isinstance(points, np.ndarray) else list(points), dtype=np.float64)
    n = 0 if pts.size == 0 else pts.shape[0]
    if n < max(min_points, 2):
        raise InsufficientPoints(f"{n} points, need {max(min_points, 2)}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite anchor value")
    xs, xd = _scaled_ints(pts[:, 0])
    ys, yd = _scaled_ints(pts[:, 1])
    sx, sy = sum(xs), sum(ys)
    dxx = n * sum(x * x for x in xs) - sx * sx
    if dxx == 0:
        raise DegenerateX("all x values identical")
    dxy = n * sum(x * y for x, y in zip(xs, ys)) - sx * sy
    dyy = n * sum(y * y for y in ys) - sy * sy
    a = Fraction(dxy * xd, dxx * yd)
    b = (Fraction(sy, yd) - a * Fraction(sx, xd)) / n
    df = n - 2
    chi = float(Fraction(dyy * dxx - dxy * dxy, n * dxx * yd * yd * df)) if df > 0 else 0.0
    return LocalFit(a=float(a), b=float(b), chi=chi, df=df, n=n)


def _scaled_ints(values: np.ndarray) -> tuple[list[int], int]:
    """Integers ``k`` and a power-of-two ``d`` with ``values == k / d`` exactly."""
    ratios = [v.as_integer_ratio() for v in values.tolist()]
    d = max(q for _, q in ratios)
    return [p * (d // q) for p, q in ratios], d


def residuals(fit: LocalFit, points: Sequence[tuple[float, float]]) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return pts[:, 1] - (fit.a * pts[:, 0] + fit.b)


def global_from_local(segment: SegmentId, lf: LocalFit) -> GlobalFit:
    """Seed a segment's global fit from its own (local -> global) regression."""
    return GlobalFit(alpha=lf.a, beta=lf.b, chi=lf.chi, df=lf.df, path=(segment,))


def compose_fit(gf_q: GlobalFit, lf: LocalFit, q: SegmentId, c: SegmentId) -> GlobalFit:
    """Extend ``q``'s global fit across the pairwise fit to neighbour ``c``.

    ``lf`` must be the fit stored for ``(min(q, c), max(q, c))``.  The smaller
    segment is the independent variable of that fit.
    """
    if q > c:
        # q = a*c + b
        alpha = gf_q.alpha * lf.a
        beta = gf_q.alpha * lf.b + gf_q.beta
    else:
        # c = a*q + b  =>  q = (c - b) / a
        if lf.a == 0:
            raise ZeroSlope(f"edge {q}-{c} has zero slope")
        alpha = gf_q.alpha / lf.a
        beta = gf_q.beta - alpha * lf.b
    df = gf_q.df + lf.df
    chi = (gf_q.df * gf_q.chi + lf.df * lf.chi) / df if df > 0 else 0.0
    return GlobalFit(alpha=alpha, beta=beta, chi=chi, df=df, path=(c,) + gf_q.path)


def estimate_gts(fit: GlobalFit, lc: float) -> float:
    if fit.is_sentinel:
        raise SentinelFit(f"segment {fit.segment} has no global fit")
    return fit.alpha * lc + fit.beta
