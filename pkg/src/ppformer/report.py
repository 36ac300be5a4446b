"""CSV reports and tensor files for the command-line harness."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .fixed_ring import RingParams, RingTensor
from .mpc import Party, ProtocolRun

__all__ = ["REPORT_COLUMNS", "ReportRow", "rows_for_run", "write_report", "read_report", "save_tensor", "load_tensor"]

REPORT_COLUMNS = ("phase", "party", "bytes", "rounds", "ciphertexts", "coeff_mults", "wall_ms", "max_err")


@dataclass
class ReportRow:
    phase: str
    party: str
    bytes: int
    rounds: int
    ciphertexts: int
    coeff_mults: int
    wall_ms: float
    max_err: float


def rows_for_run(phase: str, run: ProtocolRun, wall_ms: float, max_err: float = 0.0) -> list[ReportRow]:
    """One row per party (bytes and ciphertexts it sent) plus a total row."""
    tr = run.transcript
    rows = []
    for p in (Party.CLIENT, Party.SERVER):
        rows.append(ReportRow(phase, p.name.lower(), tr.bytes_from(p), tr.rounds, tr.ciphertexts(sender=p),
                              run.counters[p].coeff_mults, round(wall_ms, 3), max_err))
    rows.append(ReportRow(phase, "total", tr.bytes, tr.rounds, tr.ciphertexts(),
                          sum(c.coeff_mults for c in run.counters.values()), round(wall_ms, 3), max_err))
    return rows


def write_report(rows: list[ReportRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))


def read_report(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def save_tensor(t: RingTensor, path) -> None:
    """Decimal CSV: a ``rows,cols,ell,scale`` header, its values, then the data."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["rows", "cols", "ell", "scale"])
        w.writerow([t.rows, t.cols, t.params.ell, t.params.scale])
        for row in t.to_real():
            w.writerow([repr(float(v)) for v in row])


def load_tensor(path) -> RingTensor:
    with open(path, newline="", encoding="utf-8") as fh:
        r = list(csv.reader(fh))
    if len(r) < 2 or [c.strip() for c in r[0]] != ["rows", "cols", "ell", "scale"]:
        raise ValueError(f"{path}: missing 'rows,cols,ell,scale' header")
    rows, cols, ell, scale = (int(v) for v in r[1])
    body = [[float(v) for v in line] for line in r[2:] if line]
    data = np.array(body, dtype=np.float64).reshape(-1, cols) if body else np.zeros((0, cols))
    if data.shape != (rows, cols):
        raise ValueError(f"{path}: header says {rows}x{cols}, found {data.shape[0]}x{data.shape[1]}")
    return RingTensor.from_real(data, RingParams(ell, scale))

