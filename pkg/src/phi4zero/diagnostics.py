"""Trace diagnostics: damping class, pseudo-period, ratio curves, scans, sign map.

Extrema are found with a hysteresis ("zigzag") filter: a turning point is
confirmed only once the trace has moved back from it by more than
``tolerance * (max - min)`` of the whole trace. Reversals smaller than
that are treated as noise, which is what keeps a trace with a tiny early
overshoot or round-off wiggles in the monotone class.
"""

from __future__ import annotations

import enum
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .model import _b, _c, _idx, check_coupling, expected_sign
from .solver import IterationTrace, SolverConfig, Status, run

__all__ = [
    "TraceClass",
    "TraceClassification",
    "RunClassification",
    "InsufficientDataError",
    "turning_points",
    "classify_trace",
    "classify_run",
    "pseudo_period",
    "RatioCurve",
    "delta_infinity_proxy",
    "ratio_curves",
    "ScanCell",
    "ScanResult",
    "stability_scan",
    "SignMapCell",
    "sign_map",
    "spearman",
]

log = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 0.05
DEFAULT_BURN_IN = 3


class TraceClass(str, enum.Enum):
    MONOTONE = "monotone"
    DAMPED = "damped-oscillation"
    AMPLIFIED = "amplified-oscillation"
    DIVERGENT = "non-oscillatory-divergent"


# tie-break order for run summaries, most severe first
_SEVERITY = [TraceClass.DIVERGENT, TraceClass.AMPLIFIED, TraceClass.DAMPED, TraceClass.MONOTONE]


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class TraceClassification:
    cls: TraceClass
    pseudo_period: float | None
    extrema_amplitudes: tuple[float, ...]


def turning_points(values, threshold: float) -> list[int]:
    """Indices of confirmed extrema; a reversal must exceed ``threshold``."""
    v = np.asarray(values, dtype=float)
    ext: list[int] = []
    trend = 0
    piv = 0
    for i in range(1, v.size):
        x = v[i]
        if trend == 0:
            if x - v[0] > threshold:
                trend, piv = 1, i
            elif v[0] - x > threshold:
                trend, piv = -1, i
        elif trend > 0:
            if x >= v[piv]:
                piv = i
            elif v[piv] - x > threshold:
                ext.append(piv)
                trend, piv = -1, i
        else:
            if x <= v[piv]:
                piv = i
            elif x - v[piv] > threshold:
                ext.append(piv)
                trend, piv = 1, i
    return ext


def _threshold(v: np.ndarray, tolerance: float) -> float:
    return tolerance * float(np.max(v) - np.min(v))


def pseudo_period(values, tolerance: float = DEFAULT_TOLERANCE) -> float | None:
    """Mean spacing (in samples) between successive local maxima, or ``None``."""
    v = np.asarray(values, dtype=float)
    if v.size < 3 or not np.all(np.isfinite(v)):
        return None
    ext = turning_points(v, _threshold(v, tolerance))
    maxima = [i for k, i in enumerate(ext) if _is_max(v, ext, k)]
    if len(maxima) < 2:
        return None
    return float(np.mean(np.diff(maxima)))


def _is_max(v: np.ndarray, ext: list[int], k: int) -> bool:
    i = ext[k]
    if k + 1 < len(ext):
        return v[i] > v[ext[k + 1]]
    if k > 0:
        return v[i] > v[ext[k - 1]]
    return v[i] > v[-1]


def classify_trace(values, tolerance: float = DEFAULT_TOLERANCE, burn_in: int = DEFAULT_BURN_IN) -> TraceClassification:
    """Classify a trace over iterations as monotone, damped, amplified or divergent.

    Turning points must reverse by more than ``tolerance`` times the range of
    the whole trace (burn-in included, so a large initial transient does not
    make late ripples look significant). After the first ``burn_in`` samples,
    a trace without a confirmed turning point is monotone.

    Otherwise the swings between successive extrema are split by time into
    the earlier and later half of the window, and the largest swing of each
    half is compared with ``tolerance`` as the relative margin. A half with
    no confirmed swing is credited with the detection threshold, which bounds
    whatever oscillation it holds. Fewer than three extrema are padded with
    the first and last samples so a lone overshoot still yields two swings.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 4:
        raise InsufficientDataError(f"need at least 4 samples, got {v.size}")
    if not np.all(np.isfinite(v)):
        return TraceClassification(TraceClass.DIVERGENT, None, ())
    w = v[burn_in:]
    if w.size < 2:
        return TraceClassification(TraceClass.MONOTONE, None, ())
    thr = _threshold(v, tolerance)
    ext = turning_points(w, thr)
    if not ext:
        return TraceClassification(TraceClass.MONOTONE, None, ())

    idx = ext if len(ext) >= 3 else [0, *ext, w.size - 1]
    idx = np.asarray(idx)
    swings = np.abs(np.diff(w[idx]))
    mid = 0.5 * (idx[:-1] + idx[1:])
    early_sw = swings[mid < 0.5 * (w.size - 1)]
    late_sw = swings[mid >= 0.5 * (w.size - 1)]
    early = float(early_sw.max()) if early_sw.size else thr
    late = float(late_sw.max()) if late_sw.size else thr
    if late < (1.0 - tolerance) * early:
        cls = TraceClass.DAMPED
    elif late > (1.0 + tolerance) * early:
        cls = TraceClass.AMPLIFIED
    else:
        cls = TraceClass.DIVERGENT
    period = pseudo_period(v, tolerance) if cls in (TraceClass.DAMPED, TraceClass.AMPLIFIED) else None
    return TraceClassification(cls, period, tuple(float(s) for s in swings))


@dataclass(frozen=True)
class RunClassification:
    per_level: dict[int, TraceClassification]
    summary: TraceClass

    def counts(self, min_level: int = 5) -> Counter:
        return Counter(c.cls for n, c in self.per_level.items() if n >= min_level)

    def fraction(self, cls: TraceClass, min_level: int = 5) -> float:
        counts = self.counts(min_level)
        total = sum(counts.values())
        return counts[TraceClass(cls)] / total if total else 0.0


def classify_run(trace: IterationTrace, tolerance: float = DEFAULT_TOLERANCE,
                 burn_in: int = DEFAULT_BURN_IN) -> RunClassification:
    """Classify every delta_n trace; the summary is the most common class for n >= 5.

    Runs that stopped on a breakdown are summarised as divergent, and traces
    too short to classify count as monotone.
    """
    d = trace.delta_matrix()
    per_level = {}
    for n in trace.levels:
        series = d[:, _idx(n)] if d.size else np.empty(0)
        try:
            per_level[n] = classify_trace(series, tolerance, burn_in)
        except InsufficientDataError:
            per_level[n] = TraceClassification(TraceClass.MONOTONE, None, ())
    if trace.status in (Status.DIVERGED, Status.DEGENERATE):
        return RunClassification(per_level, TraceClass.DIVERGENT)
    counts = Counter(c.cls for n, c in per_level.items() if n >= 5)
    top = max(counts.values())
    summary = next(c for c in _SEVERITY if counts.get(c) == top)
    return RunClassification(per_level, summary)


@dataclass(frozen=True)
class RatioCurve:
    nu: np.ndarray
    ratio: np.ndarray  # nan where the reference is zero
    converged: bool


def ratio_curves(trace: IterationTrace) -> dict[int, RatioCurve]:
    """``|H_nu / H_ref|`` per component up to its ``nu_conv``.

    Converged components use their value at ``nu_conv``; others fall back to
    the last snapshot and are marked ``converged=False``.
    """
    h = trace.h_matrix()
    nus = np.asarray(trace.nu)
    out = {}
    if not nus.size:
        return out
    for n in trace.levels:
        i = _idx(n)
        k = int(trace.nu_conv[i]) if trace.nu_conv is not None else 0
        if k > 0 and k in trace.nu:
            ref_row = trace.nu.index(k)
            keep = nus <= k
        else:
            ref_row = len(nus) - 1
            keep = np.ones(nus.size, dtype=bool)
        ref = h[ref_row, i]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(h[keep, i] / ref) if ref != 0 else np.full(int(keep.sum()), np.nan)
        out[n] = RatioCurve(nus[keep], ratio, k > 0)
    return out


def delta_infinity_proxy(delta) -> float:
    """Largest ``delta_n`` over the top third of the levels.

    A finite truncation has no limit ``n -> infinity``; this is only a proxy
    for the uniform bound at infinity. Undefined entries are ignored.
    """
    v = np.asarray(getattr(delta, "values", delta), dtype=float)
    tail = v[-max(1, v.size // 3):]
    tail = tail[np.isfinite(tail)]
    return float(tail.max()) if tail.size else float("nan")


# -- parameter scans ---------------------------------------------------------


@dataclass(frozen=True)
class ScanCell:
    lam: float
    n_max: int
    status: str
    classification: str | None
    max_nu_conv: int
    max_delta_conv: float
    iterations_used: int
    error: str | None = None

    @property
    def converged(self) -> bool:
        return self.status == Status.CONVERGED.value


@dataclass(frozen=True)
class ScanResult:
    cells: dict[tuple[float, int], ScanCell]
    thresholds: dict[float, int | None]

    def row(self, lam: float) -> list[ScanCell]:
        return [c for (l, _), c in sorted(self.cells.items()) if l == lam]


def _scan_cell(cfg: SolverConfig) -> ScanCell:
    try:
        result, trace = run(cfg)
        cls = classify_run(trace).summary.value
        nu = int(result.nu_conv.max()) if result.nu_conv.size else 0
        d = result.delta_conv.values
        dmax = float(np.nanmax(d)) if np.any(np.isfinite(d)) else float("nan")
        return ScanCell(cfg.lam, cfg.n_max, result.status.value, cls, nu, dmax, result.iterations_used)
    except Exception as exc:  # a failed cell must not abort the scan
        log.warning("scan cell lam=%g n_max=%d failed: %s", cfg.lam, cfg.n_max, exc)
        return ScanCell(cfg.lam, cfg.n_max, "Error", None, 0, float("nan"), 0, repr(exc))


def stability_scan(lambdas, n_maxes, base: SolverConfig | None = None, workers: int = 1) -> ScanResult:
    """One solver run per ``(lam, n_max)`` cell.

    The threshold for each ``lam`` is the smallest ``n_max`` in the grid
    whose run did not converge (``None`` when every cell converged).
    """
    lambdas = [check_coupling(x) for x in lambdas]
    n_maxes = [int(n) for n in n_maxes]
    if not lambdas or not n_maxes:
        raise ValueError("scan grids must be nonempty")
    base = base or SolverConfig(lam=lambdas[0])
    configs = []
    for lam in lambdas:
        for n_max in n_maxes:
            try:
                configs.append(replace(base, lam=lam, n_max=n_max, start=None))
            except (TypeError, ValueError) as exc:
                configs.append(exc)
                log.warning("invalid scan cell lam=%g n_max=%d: %s", lam, n_max, exc)

    runnable = [c for c in configs if isinstance(c, SolverConfig)]
    if workers > 1 and len(runnable) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_scan_cell, runnable))
    else:
        done = [_scan_cell(c) for c in runnable]
    by_key = {(c.lam, c.n_max): c for c in done}

    cells = {}
    for lam in lambdas:
        for n_max in n_maxes:
            cell = by_key.get((lam, n_max))
            if cell is None:
                cell = ScanCell(lam, n_max, "Error", None, 0, float("nan"), 0, "invalid configuration")
            cells[(lam, n_max)] = cell

    thresholds = {}
    for lam in lambdas:
        bad = [n for n in sorted(n_maxes) if not cells[(lam, n)].converged]
        thresholds[lam] = bad[0] if bad else None
    return ScanResult(cells, thresholds)


# -- sign map ------------------------------------------------------------------


@dataclass(frozen=True)
class SignMapCell:
    lam: float
    h2: float
    result: str  # "valid", "violation", "zero" or "nonfinite"
    first_violation_n: int | None


def _sign_walk(lam: float, h2: float, n_max: int) -> SignMapCell:
    m = (n_max + 1) // 2
    v = np.zeros(m)
    v[0] = h2
    if h2 <= 0:
        return SignMapCell(lam, h2, "violation" if h2 < 0 else "zero", 1)
    with np.errstate(all="ignore"):
        v[1] = (1.0 - h2) / lam
        for n in range(3, n_max + 1, 2):
            x = v[_idx(n)]
            if not math.isfinite(x):
                return SignMapCell(lam, h2, "nonfinite", n)
            if x == 0.0:
                return SignMapCell(lam, h2, "zero", n)
            if np.sign(x) != expected_sign(n):
                return SignMapCell(lam, h2, "violation", n)
            if n + 2 <= n_max:
                # H^{n+1} = -lam H^{n+3} + B + C, solved for H^{n+3}
                v[_idx(n) + 1] = (_b(v, n, lam) + _c(v, n, lam) - x) / lam
    return SignMapCell(lam, h2, "valid", None)


def sign_map(lambda_grid, h2_grid, n_max: int) -> list[SignMapCell]:
    """Walk the equations upward from ``(H^2, lam)`` and report the first wrong sign.

    Cells are ordered by ``lam`` then ``H^2`` as given.
    """
    if n_max < 5 or n_max % 2 == 0:
        raise ValueError(f"n_max must be odd and >= 5, got {n_max}")
    lambdas = [check_coupling(x) for x in lambda_grid]
    h2s = [float(x) for x in h2_grid]
    if not lambdas or not h2s:
        raise ValueError("sign map grids must be nonempty")
    return [_sign_walk(lam, h2, n_max) for lam in lambdas for h2 in h2s]


def spearman(x, y) -> float:
    """Spearman rank correlation (average ranks for ties)."""
    from scipy.stats import spearmanr

    return float(spearmanr(x, y).statistic)
