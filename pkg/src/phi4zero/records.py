"""Durable outputs: run records (JSON) and the CSV tables.

Floats are written with ``repr`` so every value reads back bit-identical;
``nan`` becomes ``null`` in JSON. All files are UTF-8 and CSVs use ``.`` as
the decimal separator.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .mapping import SweepConfig
from .model import GreenSequence
from .solver import IterationTrace, RunResult, SolverConfig, Status

__all__ = [
    "RunRecord",
    "ComponentRecord",
    "record_from_result",
    "write_record",
    "read_record",
    "TRACE_COLUMNS",
    "SCAN_COLUMNS",
    "SIGNMAP_COLUMNS",
    "write_trace_csv",
    "read_trace_csv",
    "write_scan_csv",
    "write_thresholds_csv",
    "write_signmap_csv",
    "CorruptFileError",
]

TRACE_COLUMNS = ("nu", "n", "H_value", "delta_value", "frozen")
SCAN_COLUMNS = ("lambda", "n_max", "status", "classification", "max_nu_conv", "max_delta_conv")
SIGNMAP_COLUMNS = ("lambda", "h2", "result", "first_violation_n")


class CorruptFileError(ValueError):
    pass


def _num(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _unnum(x):
    return math.nan if x is None else float(x)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@dataclass(frozen=True)
class ComponentRecord:
    n: int
    h_conv: float
    delta_conv: float
    nu_conv: int | None


@dataclass
class RunRecord:
    """Everything needed to reproduce and inspect one solver run."""

    config: dict
    status: str
    iterations_used: int
    components: list[ComponentRecord]
    classification: str | None
    tool_version: str
    timestamp: str = ""
    extra: dict = field(default_factory=dict)

    def solver_config(self) -> SolverConfig:
        c = self.config
        start = c.get("start")
        return SolverConfig(
            lam=c["lam"],
            n_max=c["n_max"],
            epsilon_h=c["epsilon_h"],
            max_iterations=c["max_iterations"],
            sweep=SweepConfig(c["sweep_order"], c["closure"]),
            freeze=c["freeze"],
            start=None if start in (None, "fundamental") else GreenSequence([_unnum(v) for v in start]),
            trace_stride=c.get("trace_stride", 1),
        )

    def h_conv(self) -> GreenSequence:
        return GreenSequence([c.h_conv for c in self.components])

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "status": self.status,
            "iterations_used": self.iterations_used,
            "components": [
                {"n": c.n, "H_conv": _num(c.h_conv), "delta_conv": _num(c.delta_conv), "nu_conv": c.nu_conv}
                for c in self.components
            ],
            "classification": self.classification,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "extra": _clean(self.extra),
        }

    @classmethod
    def from_dict(cls, d: dict) -> RunRecord:
        try:
            comps = [
                ComponentRecord(int(c["n"]), _unnum(c["H_conv"]), _unnum(c["delta_conv"]), c["nu_conv"])
                for c in d["components"]
            ]
            return cls(
                config=d["config"],
                status=d["status"],
                iterations_used=int(d["iterations_used"]),
                components=comps,
                classification=d.get("classification"),
                tool_version=d["tool_version"],
                timestamp=d.get("timestamp", ""),
                extra=d.get("extra", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFileError(f"not a run record: {exc}") from exc


def _config_dict(config: SolverConfig, mode: str) -> dict:
    return {
        "lam": float(config.lam),
        "n_max": int(config.n_max),
        "epsilon_h": float(config.epsilon_h),
        "max_iterations": int(config.max_iterations),
        "sweep_order": config.sweep.order.value,
        "closure": config.sweep.closure.value,
        "freeze": bool(config.freeze),
        "start": "fundamental" if config.start is None else [_num(v) for v in config.start.values],
        "trace_stride": int(config.trace_stride),
        "mode": mode,
    }


def record_from_result(result: RunResult, classification: str | None = None,
                       mode: str = "run", timestamp: str | None = None) -> RunRecord:
    from . import __version__

    comps = [
        ComponentRecord(int(n), float(h), float(d), int(k) or None)
        for n, h, d, k in zip(result.h_conv.levels, result.h_conv.values,
                              result.delta_conv.values, result.nu_conv)
    ]
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return RunRecord(
        config=_config_dict(result.config, mode),
        status=result.status.value,
        iterations_used=int(result.iterations_used),
        components=comps,
        classification=classification,
        tool_version=__version__,
        timestamp=timestamp,
    )


def write_record(record: RunRecord, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(record.to_dict(), indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def read_record(path: str | Path) -> RunRecord:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorruptFileError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise CorruptFileError(f"{path}: expected a JSON object")
    return RunRecord.from_dict(data)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_trace_csv(trace: IterationTrace, path: str | Path) -> Path:
    """One row per (iteration, component). ``nu = 0`` is the start sequence."""
    from .model import extract_splitting

    path = Path(path)
    levels = list(trace.levels)
    nu_conv = np.asarray(trace.nu_conv) if trace.nu_conv is not None else np.zeros(len(levels), int)
    start_delta = extract_splitting(trace.start, trace.lam).values
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(TRACE_COLUMNS)
        for i, n in enumerate(levels):
            w.writerow([0, n, _fmt(trace.start.values[i]), _fmt(start_delta[i]), 0])
        for nu, h, d in zip(trace.nu, trace.h, trace.delta):
            for i, n in enumerate(levels):
                frozen = 0 < nu_conv[i] <= nu
                w.writerow([nu, n, _fmt(h[i]), _fmt(d[i]), _fmt(frozen)])
    return path


@dataclass(frozen=True)
class TraceTable:
    """A trace read back from CSV, as ``(iterations, components)`` arrays."""

    nu: np.ndarray
    levels: np.ndarray
    h: np.ndarray
    delta: np.ndarray
    frozen: np.ndarray


def read_trace_csv(path: str | Path) -> TraceTable:
    path = Path(path)
    try:
        with path.open(encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{path}: {exc}") from exc
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise CorruptFileError(f"{path}: missing trace header")
    try:
        parsed = [(int(r[0]), int(r[1]), float(r[2]), float(r[3]), bool(int(r[4]))) for r in rows[1:]]
    except (ValueError, IndexError) as exc:
        raise CorruptFileError(f"{path}: {exc}") from exc
    if not parsed:
        raise CorruptFileError(f"{path}: no data rows")
    nus = sorted({p[0] for p in parsed})
    levels = sorted({p[1] for p in parsed})
    shape = (len(nus), len(levels))
    if len(parsed) != shape[0] * shape[1]:
        raise CorruptFileError(f"{path}: ragged trace")
    row_of = {v: k for k, v in enumerate(nus)}
    col_of = {v: k for k, v in enumerate(levels)}
    h = np.full(shape, np.nan)
    d = np.full(shape, np.nan)
    fr = np.zeros(shape, dtype=bool)
    for nu, n, hv, dv, f in parsed:
        h[row_of[nu], col_of[n]] = hv
        d[row_of[nu], col_of[n]] = dv
        fr[row_of[nu], col_of[n]] = f
    return TraceTable(np.array(nus), np.array(levels), h, d, fr)


def write_scan_csv(scan, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(SCAN_COLUMNS)
        for (lam, n_max), cell in scan.cells.items():
            w.writerow([_fmt(lam), n_max, cell.status, cell.classification or "", _fmt(cell.max_nu_conv), _fmt(cell.max_delta_conv)])
    return path


def write_thresholds_csv(scan, path: str | Path) -> Path:
    """Per coupling, the smallest scanned ``n_max`` that did not converge (empty if none)."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(("lambda", "threshold_n_max"))
        for lam, thr in scan.thresholds.items():
            w.writerow([_fmt(lam), _fmt(thr)])
    return path


def write_signmap_csv(cells, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(SIGNMAP_COLUMNS)
        for c in cells:
            w.writerow([_fmt(c.lam), _fmt(c.h2), c.result, _fmt(c.first_violation_n)])
    return path


def status_of(record: RunRecord) -> Status:
    return Status(record.status)
