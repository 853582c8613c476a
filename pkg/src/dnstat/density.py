"""Window-weighted densities of index predicates and tail-limit estimation.

The weighted density of a predicate at window index m counts the
integers n with 1 <= n <= floor(R_m) satisfying the predicate and
divides by R_m, where R_m is the window weight sum of the active
normalizer convention.  ``density_limit`` evaluates that density along a
horizon of window indices and reports whether the tail stays below a
tolerance.  A finite horizon cannot certify a limit, so the verdict can
also be Inconclusive when the tail oscillates; the full trace is always
returned so callers can tighten the run.

Predicates of the separable form  w(m, n) * level(n) >= threshold  are
evaluated through a vectorized path; arbitrary callables fall back to a
per-index loop.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .schedules import (
    DeferredSchedule,
    DegenerateNormalizerError,
    NormalizerMode,
    WeightScheme,
    convolution,
    window_weight,
)

__all__ = [
    "DensityConfig",
    "Verdict",
    "TracePoint",
    "ConvergenceVerdict",
    "counting_bound",
    "weighted_density",
    "density_limit",
    "level_density_limit",
    "dn_stat_limit",
    "trace_csv",
]

# Hard cap on floor(R_m); counting ranges beyond this indicate a weight
# scheme this engine is not meant for.
_COUNT_CAP = 2_000_000

# Traces longer than this are subsampled outside the tail window.
_TRACE_CAP = 1000


class Verdict(Enum):
    CONVERGES = "converges"
    DIVERGES = "diverges"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DensityConfig:
    """Finite-horizon settings for density limit runs.

    ``tail_fraction`` selects the trailing share of window indices whose
    maximum density decides the verdict; the tail is always traced
    densely even when the head is subsampled.
    """

    horizon: int = 10_000
    tail_fraction: float = 0.2
    tolerance: float = 0.02
    mode: NormalizerMode = NormalizerMode.REGULAR

    def __post_init__(self) -> None:
        if self.horizon < 10:
            raise ValueError(f"horizon {self.horizon} rejected as underpowered (need >= 10)")
        if not (0.0 < self.tail_fraction <= 1.0):
            raise ValueError(f"tail_fraction must be in (0, 1], got {self.tail_fraction}")
        if self.tolerance <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.tail_length() < 2:
            raise ValueError("tail window must contain at least 2 points")

    def tail_length(self) -> int:
        return max(2, int(round(self.tail_fraction * self.horizon)))

    def tail_start(self) -> int:
        return self.horizon - self.tail_length() + 1


@dataclass(frozen=True)
class TracePoint:
    """One density evaluation: (m, R_m, count, d_m)."""

    m: int
    normalizer: float
    count: int
    density: float


@dataclass(frozen=True)
class ConvergenceVerdict:
    """Outcome of a density limit run.

    ``tail_max`` is the maximum density over the tail window.  The
    verdict is Converges exactly when tail_max < tolerance; above the
    tolerance it is Diverges unless the tail moves by more than the
    tolerance in both directions, which is reported as Inconclusive.
    Sub-tolerance oscillation never blocks a Converges verdict.
    """

    verdict: Verdict
    trace: tuple[TracePoint, ...]
    tail_max: float
    config: DensityConfig
    extras: Mapping[str, object] = field(default_factory=dict)

    def tail_points(self) -> tuple[TracePoint, ...]:
        start = self.config.tail_start()
        return tuple(p for p in self.trace if p.m >= start)

    def summary(self) -> dict[str, object]:
        return {
            "verdict": self.verdict.value,
            "tail_max": self.tail_max,
            "horizon": self.config.horizon,
            "tail_fraction": self.config.tail_fraction,
            "tolerance": self.config.tolerance,
            "normalizer_mode": self.config.mode.value,
            "trace_points": len(self.trace),
        }


def _trace_indices(cfg: DensityConfig) -> list[int]:
    """Window indices to evaluate: dense tail plus a subsampled head."""
    tail_start = cfg.tail_start()
    tail = list(range(tail_start, cfg.horizon + 1))
    head_span = tail_start - 1
    if head_span <= 0:
        return tail
    if head_span <= _TRACE_CAP:
        return list(range(1, tail_start)) + tail
    picks = np.unique(np.linspace(1, head_span, _TRACE_CAP).astype(np.int64))
    return [int(m) for m in picks] + tail


def _normalizer_for(
    schedule: DeferredSchedule,
    weights: WeightScheme,
    m: int,
    mode: NormalizerMode,
    e_vals: np.ndarray | None,
    g_vals: np.ndarray | None,
) -> float:
    """R_m via array slices when possible, else the scalar fsum path."""
    if weights.override is not None or e_vals is None or g_vals is None:
        return convolution(schedule, weights, m, mode)
    xv, yv = schedule.bounds(m)
    if mode is NormalizerMode.LITERAL:
        ev = e_vals[xv + 1 : yv + 1]
        gv = g_vals[0 : yv - xv][::-1]
    else:
        ev = e_vals[0 : yv - xv][::-1]
        gv = g_vals[xv + 1 : yv + 1]
    return float(np.sum(ev * gv))


def _count_point(
    schedule: DeferredSchedule,
    weights: WeightScheme,
    m: int,
    r: float,
    pred: Callable[[int, int], bool],
) -> int:
    """Count of n in 1..floor(R_m) satisfying a generic predicate."""
    k = int(math.floor(r))
    count = 0
    for n in range(1, k + 1):
        if pred(m, n):
            count += 1
    return count


def weighted_density(
    pred: Callable[[int, int], bool],
    schedule: DeferredSchedule,
    weights: WeightScheme,
    m: int,
    mode: NormalizerMode = NormalizerMode.REGULAR,
) -> float:
    """Density (1/R_m) * |{n : n <= floor(R_m), pred(m, n)}| in [0, 1]."""
    r = convolution(schedule, weights, m, mode)
    if r <= 0.0:
        raise DegenerateNormalizerError(f"degenerate normalizer at m={m}: R_m={r}")
    if math.floor(r) > _COUNT_CAP:
        raise ValueError(f"floor(R_m)={math.floor(r)} at m={m} exceeds counting cap {_COUNT_CAP}")
    return _count_point(schedule, weights, m, r, pred) / r


def _assemble(
    points: list[TracePoint],
    cfg: DensityConfig,
    extras: Mapping[str, object] | None,
) -> ConvergenceVerdict:
    tail_start = cfg.tail_start()
    tail = [p.density for p in points if p.m >= tail_start]
    tail_max = max(tail)
    if tail_max < cfg.tolerance:
        verdict = Verdict.CONVERGES
    else:
        diffs = np.diff(np.asarray(tail))
        up = float(diffs.max(initial=0.0))
        down = float(-diffs.min(initial=0.0))
        # Oscillation guard: moving more than the tolerance in both
        # directions means the tail has not settled.
        verdict = Verdict.INCONCLUSIVE if min(up, down) > cfg.tolerance else Verdict.DIVERGES
    return ConvergenceVerdict(verdict, tuple(points), tail_max, cfg, dict(extras or {}))


def density_limit(
    pred: Callable[[int, int], bool],
    schedule: DeferredSchedule,
    weights: WeightScheme,
    cfg: DensityConfig,
) -> ConvergenceVerdict:
    """Density trace of a generic predicate over m = 1..horizon.

    The predicate may accept a numpy array as its second argument and
    return a boolean array; that path is probed once and used when it
    works, otherwise evaluation falls back to one call per index.
    """
    ms = _trace_indices(cfg)
    e_vals, g_vals = _weight_tables(schedule, weights, ms)
    vector_ok: bool | None = None
    points: list[TracePoint] = []
    for m in ms:
        try:
            r = _normalizer_for(schedule, weights, m, cfg.mode, e_vals, g_vals)
            if r <= 0.0:
                raise DegenerateNormalizerError(f"degenerate normalizer at m={m}: R_m={r}")
            k = int(math.floor(r))
            if k > _COUNT_CAP:
                raise ValueError(f"floor(R_m)={k} exceeds counting cap {_COUNT_CAP}")
            if vector_ok is None:
                vector_ok = _probe_vector_pred(pred, m)
            if vector_ok and k > 0:
                narr = np.arange(1, k + 1, dtype=np.int64)
                mask = np.asarray(pred(m, narr), dtype=bool)
                if mask.shape != narr.shape:
                    raise ValueError("vectorized predicate returned a wrong shape")
                count = int(np.count_nonzero(mask))
            else:
                count = _count_point(schedule, weights, m, r, pred)
            points.append(TracePoint(m, r, count, count / r))
        except Exception as exc:
            raise type(exc)(f"density evaluation failed at m={m}: {exc}") from exc
    return _assemble(points, cfg, None)


def _probe_vector_pred(pred: Callable, m: int) -> bool:
    try:
        probe = pred(m, np.arange(1, 3, dtype=np.int64))
    except Exception:
        return False
    arr = np.asarray(probe)
    return arr.dtype == bool and arr.shape == (2,)


def _weight_tables(
    schedule: DeferredSchedule,
    weights: WeightScheme,
    ms: Sequence[int],
) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Dense e/g value tables up to the largest window bound, if possible."""
    if weights.override is not None:
        return None, None
    y_max = max(schedule.bounds(m)[1] for m in ms)
    try:
        return weights.e.array(y_max), weights.g.array(y_max)
    except Exception:
        return None, None


def counting_bound(
    schedule: DeferredSchedule,
    weights: WeightScheme,
    cfg: DensityConfig,
) -> int:
    """Largest floor(R_m) over the window indices a run will evaluate.

    Level sequences fed to the detectors must be defined at least this
    far; the bound is also the engine's per-index work ceiling.
    """
    ms = _trace_indices(cfg)
    e_vals, g_vals = _weight_tables(schedule, weights, ms)
    k_max = 0
    for m in ms:
        r = _normalizer_for(schedule, weights, m, cfg.mode, e_vals, g_vals)
        if r <= 0.0:
            raise DegenerateNormalizerError(f"degenerate normalizer at m={m}: R_m={r}")
        k = int(math.floor(r))
        if k > _COUNT_CAP:
            raise ValueError(f"floor(R_m)={k} at m={m} exceeds counting cap {_COUNT_CAP}")
        k_max = max(k_max, k)
    return k_max


def level_density_limit(
    levels: Callable[[int], float] | np.ndarray,
    threshold: float,
    schedule: DeferredSchedule,
    weights: WeightScheme,
    cfg: DensityConfig,
    extras: Mapping[str, object] | None = None,
) -> ConvergenceVerdict:
    """Density limit of the separable predicate w(m, n) * level(n) >= threshold.

    ``levels`` is indexed by n starting at 1 (an array is read as
    levels[n-1]).  This is the workhorse behind the sequence and
    random-variable detectors; weights enter as a per-index multiplier,
    indices with no defined weight (beyond y_m) count as weight 0.
    """
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    ms = _trace_indices(cfg)
    e_vals, g_vals = _weight_tables(schedule, weights, ms)

    # First pass: normalizers, which bound the level indices needed.
    normalizers: list[float] = []
    k_max = 0
    for m in ms:
        r = _normalizer_for(schedule, weights, m, cfg.mode, e_vals, g_vals)
        if r <= 0.0:
            raise DegenerateNormalizerError(f"degenerate normalizer at m={m}: R_m={r}")
        k = int(math.floor(r))
        if k > _COUNT_CAP:
            raise ValueError(f"floor(R_m)={k} at m={m} exceeds counting cap {_COUNT_CAP}")
        k_max = max(k_max, k)
        normalizers.append(r)

    if isinstance(levels, np.ndarray):
        if len(levels) < k_max:
            raise ValueError(f"levels array too short: need {k_max}, got {len(levels)}")
        level_arr = np.asarray(levels, dtype=np.float64)
    else:
        level_arr = np.fromiter((float(levels(n)) for n in range(1, k_max + 1)), np.float64, k_max)

    points: list[TracePoint] = []
    for m, r in zip(ms, normalizers):
        k = int(math.floor(r))
        if k == 0:
            points.append(TracePoint(m, r, 0, 0.0))
            continue
        if weights.override is not None:
            w = np.fromiter(
                (window_weight(schedule, weights, m, n) for n in range(1, k + 1)), np.float64, k
            )
        elif e_vals is not None and g_vals is not None:
            _, yv = schedule.bounds(m)
            keff = min(k, yv)
            w = np.zeros(k, dtype=np.float64)
            if keff > 0:
                w[:keff] = e_vals[yv - keff : yv][::-1] * g_vals[1 : keff + 1]
        else:
            w = np.fromiter(
                (window_weight(schedule, weights, m, n) for n in range(1, k + 1)), np.float64, k
            )
        count = int(np.count_nonzero(w * level_arr[:k] >= threshold))
        points.append(TracePoint(m, r, count, count / r))

    merged = dict(extras or {})
    merged.setdefault("threshold", threshold)
    return _assemble(points, cfg, merged)


def dn_stat_limit(
    seq: Callable[[int], float],
    candidate: float,
    eps: float,
    schedule: DeferredSchedule,
    weights: WeightScheme,
    cfg: DensityConfig,
) -> ConvergenceVerdict:
    """Statistical-limit check of a real sequence against a candidate.

    Evaluates d_m = (1/R_m) |{n <= floor(R_m) : w(m, n) |seq(n) - candidate| >= eps}|
    along the horizon and applies the tail verdict rule.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    cand = float(candidate)
    return level_density_limit(
        lambda n: abs(float(seq(n)) - cand),
        eps,
        schedule,
        weights,
        cfg,
        extras={"candidate": cand, "eps": eps},
    )


def trace_csv(verdict: ConvergenceVerdict) -> str:
    """Trace as CSV text with columns m, R_m, count, d_m."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["m", "R_m", "count", "d_m"])
    for p in verdict.trace:
        writer.writerow([p.m, repr(p.normalizer), p.count, repr(p.density)])
    return buf.getvalue()


def with_horizon(cfg: DensityConfig, horizon: int) -> DensityConfig:
    return replace(cfg, horizon=horizon)
