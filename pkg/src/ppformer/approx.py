"""Distribution-aware piecewise polynomial approximation.

Targets are fitted piece by piece with weighted least squares, where the
weights are histogram masses of the activation inputs, and breakpoints are
chosen by an exhaustive grid search around initial guesses. Two templates are
provided:

* ``gelu``: 0 for x <= T1, quadratic on (T1, T2], x for x > T2.
* ``exp``:  0 for x < T, cubic on [T, 0] (inputs are max-shifted, so x <= 0).

``eval_piecewise_fixed`` mirrors the secure protocols' ring arithmetic
(Horner, ring product, arithmetic shift after each multiply) and reports
whether any intermediate left the signed range.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf
from scipy.stats import norm

from .fixed_ring import RingParams

__all__ = [
    "gelu",
    "Histogram",
    "Piece",
    "PiecewisePoly",
    "Template",
    "GELU_TEMPLATE",
    "EXP_TEMPLATE",
    "TEMPLATES",
    "weighted_fit",
    "fit_template",
    "weighted_loss",
    "weighted_rmse",
    "search_breakpoints",
    "template_gelu",
    "template_exp",
    "eval_piecewise_real",
    "eval_piecewise_fixed",
    "FixedEval",
    "horner_fixed",
    "reference_poly",
    "fixed_degradation",
    "encode_breakpoints",
    "encode_coeffs",
    "save_model",
    "load_model",
]


def gelu(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


# --- histograms ---------------------------------------------------------------

@dataclass
class Histogram:
    """Binned input distribution; bin i covers [lower[i], upper[i])."""

    lower: np.ndarray
    upper: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if not (self.lower.shape == self.upper.shape == self.counts.shape) or self.lower.ndim != 1:
            raise ValueError("histogram arrays must be 1-D and equally long")
        if len(self.lower) == 0:
            raise ValueError("histogram has no bins")
        if np.any(self.upper <= self.lower):
            raise ValueError("every bin needs upper > lower")
        if np.any(self.lower[1:] < self.upper[:-1]):
            raise ValueError("bins must be sorted and non-overlapping")
        if np.any(self.counts < 0):
            raise ValueError("bin counts must be nonnegative")
        if self.counts.sum() <= 0:
            raise ValueError("histogram total count must be positive")

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def mass(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.lower[0]), float(self.upper[-1])

    def density(self, x) -> np.ndarray:
        """Normalised density p(x); zero outside every bin."""
        x = np.asarray(x, dtype=np.float64)
        idx = np.searchsorted(self.lower, x, side="right") - 1
        ok = (idx >= 0) & (x < self.upper[np.clip(idx, 0, None)])
        widths = self.upper - self.lower
        d = self.mass / widths
        return np.where(ok, d[np.clip(idx, 0, None)], 0.0)

    @classmethod
    def from_samples(cls, samples, bins: int = 256, range: tuple[float, float] | None = None) -> "Histogram":
        counts, edges = np.histogram(np.asarray(samples, dtype=np.float64), bins=bins, range=range)
        return cls(edges[:-1], edges[1:], counts)

    @classmethod
    def from_cdf(cls, cdf: Callable, lo: float, hi: float, bins: int) -> "Histogram":
        edges = np.linspace(lo, hi, bins + 1)
        return cls(edges[:-1], edges[1:], np.diff(cdf(edges)))

    @classmethod
    def synthetic_gelu(cls, bins: int = 640, lo: float = -8.0, hi: float = 8.0) -> "Histogram":
        """Stand-in for GELU inputs: 0.8 N(-2, 1) + 0.2 N(0.5, 1)."""
        return cls.from_cdf(lambda e: 0.8 * norm.cdf(e, -2.0, 1.0) + 0.2 * norm.cdf(e, 0.5, 1.0), lo, hi, bins)

    @classmethod
    def synthetic_softmax(cls, bins: int = 640, lo: float = -16.0) -> "Histogram":
        """Stand-in for max-shifted softmax inputs: -|N(0, 2)| clipped to [lo, 0]."""
        def cdf(e):
            c = 2.0 * norm.cdf(e, 0.0, 2.0)
            # clipping piles the tail below lo onto the first bin
            return np.where(e <= lo, 0.0, c)
        return cls.from_cdf(cdf, lo, 0.0, bins)

    @classmethod
    def load(cls, path) -> "Histogram":
        rows = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'lower upper count'")
            rows.append([float(p) for p in parts])
        if not rows:
            raise ValueError(f"{path}: no bins")
        a = np.array(rows)
        return cls(a[:, 0], a[:, 1], a[:, 2])

    def save(self, path):
        lines = ["# lower upper count"]
        lines += [f"{lo!r} {hi!r} {c!r}" for lo, hi, c in zip(self.lower.tolist(), self.upper.tolist(), self.counts.tolist())]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- piecewise polynomials ----------------------------------------------------

@dataclass(frozen=True)
class Piece:
    kind: str  # "zero", "identity" or "poly"
    coeffs: tuple[float, ...] = ()  # increasing degree

    def __post_init__(self):
        if self.kind not in ("zero", "identity", "poly"):
            raise ValueError(f"unknown piece kind {self.kind!r}")
        if self.kind == "poly" and not self.coeffs:
            raise ValueError("polynomial piece needs coefficients")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1 if self.kind == "poly" else (1 if self.kind == "identity" else 0)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "identity":
            return x.copy()
        return np.polynomial.polynomial.polyval(x, self.coeffs)


@dataclass(frozen=True)
class PiecewisePoly:
    """Pieces separated by sorted breakpoints.

    With ``closed="right"`` piece i covers (T_{i-1}, T_i]; with ``"left"`` it
    covers [T_{i-1}, T_i).
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[Piece, ...]
    closed: str = "right"
    name: str = ""
    loss: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one more piece than breakpoints")
        if any(b >= a for a, b in zip(self.breakpoints[1:], self.breakpoints[:-1])):
            raise ValueError("breakpoints must be strictly increasing")
        if self.closed not in ("left", "right"):
            raise ValueError("closed must be 'left' or 'right'")

    def piece_index(self, x) -> np.ndarray:
        side = "left" if self.closed == "right" else "right"
        return np.searchsorted(np.asarray(self.breakpoints, dtype=np.float64), np.asarray(x, dtype=np.float64), side=side)

    def __call__(self, x):
        return eval_piecewise_real(self, x)


def eval_piecewise_real(p: PiecewisePoly, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    idx = p.piece_index(x)
    out = np.zeros_like(x)
    for i, piece in enumerate(p.pieces):
        sel = idx == i
        if np.any(sel):
            out[sel] = piece(x[sel])
    return out


# --- fitting ------------------------------------------------------------------

def weighted_fit(f: Callable, lo: float, hi: float, degree: int, hist: Histogram | None,
                 fallback_points: int = 257) -> tuple[float, ...]:
    """Weighted least-squares polynomial (increasing-degree coefficients).

    Sample points are the histogram bin midpoints inside [lo, hi] weighted by
    bin mass. With no mass there, a uniform grid is used instead. A rank
    deficient system drops to the highest solvable degree; the missing
    coefficients are zero.
    """
    if not hi > lo:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    x = w = None
    if hist is not None:
        mid = hist.midpoints
        sel = (mid >= lo) & (mid <= hi)
        if sel.any() and hist.mass[sel].sum() > 0:
            x, w = mid[sel], hist.mass[sel]
    if x is None:
        x = np.linspace(lo, hi, fallback_points)
        w = np.full_like(x, 1.0 / len(x))
    y = np.asarray(f(x), dtype=np.float64)
    sw = np.sqrt(w)
    for d in range(degree, -1, -1):
        v = np.vander(x, d + 1, increasing=True) * sw[:, None]
        if np.linalg.matrix_rank(v) == d + 1:
            # same minimiser as the normal equations, better conditioned
            coef, *_ = np.linalg.lstsq(v, sw * y, rcond=None)
            return tuple(float(c) for c in coef) + (0.0,) * (degree - d)
    raise ValueError("no usable sample points")


@dataclass(frozen=True)
class Template:
    name: str
    target: Callable
    kinds: tuple  # per piece: "zero", "identity" or ("poly", degree)
    closed: str
    init: tuple[float, ...]

    @property
    def n_breaks(self) -> int:
        return len(self.kinds) - 1


GELU_TEMPLATE = Template("gelu", gelu, ("zero", ("poly", 2), "identity"), "right", (-2.1, 0.2))
EXP_TEMPLATE = Template("exp", np.exp, ("zero", ("poly", 3)), "left", (-4.0,))
TEMPLATES = {"gelu": GELU_TEMPLATE, "exp": EXP_TEMPLATE}


def fit_template(template: Template, breakpoints: Sequence[float], hist: Histogram,
                 target: Callable | None = None) -> PiecewisePoly:
    f = target or template.target
    bps = tuple(float(b) for b in breakpoints)
    if len(bps) != template.n_breaks:
        raise ValueError(f"template {template.name} takes {template.n_breaks} breakpoints")
    lo_dom, hi_dom = hist.domain
    edges = (min(lo_dom, bps[0]),) + bps + (max(hi_dom, bps[-1]),)
    pieces = []
    for i, kind in enumerate(template.kinds):
        if kind in ("zero", "identity"):
            pieces.append(Piece(kind))
            continue
        _, deg = kind
        lo, hi = edges[i], edges[i + 1]
        if not hi > lo:
            hi = lo + 1e-9
        pieces.append(Piece("poly", weighted_fit(f, lo, hi, deg, hist)))
    pw = PiecewisePoly(bps, tuple(pieces), template.closed, template.name)
    return replace(pw, loss=weighted_loss(pw, f, hist))


def weighted_loss(p: PiecewisePoly, f: Callable, hist: Histogram, lo: float = -math.inf, hi: float = math.inf) -> float:
    """sum_bins mass * (f - p)^2 over bins whose midpoint is in [lo, hi]."""
    mid = hist.midpoints
    sel = (mid >= lo) & (mid <= hi)
    err = np.asarray(f(mid[sel])) - eval_piecewise_real(p, mid[sel])
    return float(np.sum(hist.mass[sel] * err * err))


def weighted_rmse(p: PiecewisePoly, f: Callable, hist: Histogram, lo: float = -math.inf, hi: float = math.inf) -> float:
    mid = hist.midpoints
    sel = (mid >= lo) & (mid <= hi)
    total = hist.mass[sel].sum()
    if total <= 0:
        raise ValueError("no histogram mass in the evaluation range")
    return math.sqrt(weighted_loss(p, f, hist, lo, hi) / total)


def _candidates(init: float, radius: float, step: float) -> list[float]:
    if step <= 0:
        raise ValueError("step must be positive")
    j = int(round(radius / step))
    # centre first so that ties keep the initial guess
    offsets = sorted(range(-j, j + 1), key=lambda v: (abs(v), v))
    return [init + step * o for o in offsets]


def search_breakpoints(f: Callable | None, template: Template, init: Sequence[float] | None, hist: Histogram,
                       radius: float = 0.5, step: float = 0.05) -> PiecewisePoly:
    """Grid search over breakpoints near ``init``; returns the min-loss fit.

    Every combination of per-breakpoint candidates (init + step*j, |j| <=
    radius/step) is fitted; combinations that are not strictly increasing
    are skipped. The first candidate reaching the minimum wins.
    """
    init = tuple(template.init if init is None else init)
    grids = [_candidates(b, radius, step) for b in init]
    best = None
    for combo in itertools.product(*grids):
        if any(b >= a for a, b in zip(combo[1:], combo[:-1])):
            continue
        pw = fit_template(template, combo, hist, f)
        if best is None or pw.loss < best.loss:
            best = pw
    if best is None:
        raise ValueError("empty breakpoint candidate set")
    return best


def template_gelu(hist: Histogram | None = None, radius: float = 0.5, step: float = 0.05) -> PiecewisePoly:
    return search_breakpoints(gelu, GELU_TEMPLATE, None, hist or Histogram.synthetic_gelu(), radius, step)


def template_exp(hist: Histogram | None = None, radius: float = 0.5, step: float = 0.05) -> PiecewisePoly:
    return search_breakpoints(np.exp, EXP_TEMPLATE, None, hist or Histogram.synthetic_softmax(), radius, step)


def reference_poly(f: Callable, lo: float, hi: float, degree: int = 6, hist: Histogram | None = None) -> PiecewisePoly:
    """Single high-degree least-squares polynomial on [lo, hi] (for error studies)."""
    return PiecewisePoly((), (Piece("poly", weighted_fit(f, lo, hi, degree, hist)),), "right", f"deg{degree}")


# --- fixed-point evaluation ---------------------------------------------------

def encode_coeffs(coeffs: Sequence[float], scale: int) -> list[int]:
    """Nearest-integer encoding of polynomial coefficients, leading term first.

    Inputs keep the floor encoding; rounding the constants halves their
    quantization error, which Horner multiplies by up to |x|^degree.
    """
    return [math.floor(c * (1 << scale) + 0.5) for c in reversed(coeffs)]


def encode_breakpoints(p: PiecewisePoly, scale: int) -> list[int]:
    """Integer thresholds that select pieces exactly as the real-valued rule does.

    For x > T the threshold is floor(T * 2^s); for x >= T it is ceil(T * 2^s).
    """
    rnd = math.floor if p.closed == "right" else math.ceil
    return [rnd(t * (1 << scale)) for t in p.breakpoints]


@dataclass
class FixedEval:
    values: np.ndarray  # signed integers at the input scale (object array)
    overflow: bool
    overflow_mask: np.ndarray

    def to_real(self, scale: int) -> np.ndarray:
        return self.values.astype(np.float64) / float(1 << scale)


def _wrap_signed(v, ell: int):
    m = 1 << ell
    half = 1 << (ell - 1)
    return ((v + half) % m) - half


def horner_fixed(coeffs_desc: Sequence[int], x: np.ndarray, scale: int, ell: int) -> tuple[np.ndarray, np.ndarray]:
    """Ring Horner: acc <- ((acc * x mod 2^ell) >> scale) + b, all signed.

    Returns (values, overflow mask). The first product uses the leading
    coefficient as ``acc``.
    """
    lo, hi = -(1 << (ell - 1)), 1 << (ell - 1)
    x = np.asarray(x, dtype=object)
    acc = np.full(x.shape, int(coeffs_desc[0]), dtype=object)
    flag = np.zeros(x.shape, dtype=bool)
    for b in coeffs_desc[1:]:
        prod = acc * x
        flag |= np.asarray((prod < lo) | (prod >= hi), dtype=bool)
        acc = (_wrap_signed(prod, ell) >> scale) + int(b)
        flag |= np.asarray((acc < lo) | (acc >= hi), dtype=bool)
        acc = _wrap_signed(acc, ell)
    return acc, flag


def eval_piecewise_fixed(p: PiecewisePoly, x, params: RingParams) -> FixedEval:
    """Evaluate on signed fixed-point integers ``x`` (scale ``params.scale``).

    Coefficients go through ``encode_coeffs`` at the same scale; breakpoints use
    ``encode_breakpoints`` so piece selection agrees with the real rule.
    """
    s, ell = params.scale, params.ell
    x = np.asarray(x, dtype=object)
    tb = encode_breakpoints(p, s)
    if p.closed == "right":
        idx = sum((x > t).astype(int) for t in tb) if tb else np.zeros(x.shape, dtype=int)
    else:
        idx = sum((x >= t).astype(int) for t in tb) if tb else np.zeros(x.shape, dtype=int)
    idx = np.asarray(idx)
    out = np.zeros(x.shape, dtype=object)
    flag = np.zeros(x.shape, dtype=bool)
    for i, piece in enumerate(p.pieces):
        sel = idx == i
        if not np.any(sel):
            continue
        if piece.kind == "zero":
            out[sel] = 0
        elif piece.kind == "identity":
            out[sel] = x[sel]
        else:
            desc = encode_coeffs(piece.coeffs, s)
            if len(desc) == 1:
                out[sel] = desc[0]
            else:
                v, f = horner_fixed(desc, x[sel], s, ell)
                out[sel] = v
                flag[sel] = f
    return FixedEval(out, bool(flag.any()), flag)


def fixed_degradation(p: PiecewisePoly, lo: float, hi: float, params: RingParams, points: int = 4001) -> tuple[float, bool]:
    """max |fixed - real| of ``p`` over an evenly spaced sweep of representable inputs."""
    s = params.scale
    xs = np.unique(np.floor(np.linspace(lo, hi, points) * (1 << s)).astype(np.int64))
    fixed = eval_piecewise_fixed(p, xs.astype(object), params)
    real = eval_piecewise_real(p, xs / float(1 << s))
    return float(np.max(np.abs(fixed.to_real(s) - real))), fixed.overflow


# --- model files --------------------------------------------------------------

def save_model(p: PiecewisePoly, path):
    lines = [f"# piecewise model {p.name}".rstrip(), f"closed {p.closed}",
             "breakpoints " + " ".join(repr(float(b)) for b in p.breakpoints)]
    for piece in p.pieces:
        if piece.kind == "poly":
            lines.append("poly " + " ".join(repr(float(c)) for c in piece.coeffs))
        else:
            lines.append(piece.kind)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path) -> PiecewisePoly:
    closed, bps, pieces, name = "right", None, [], ""
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if line.startswith("# piecewise model"):
            name = line[len("# piecewise model"):].strip()
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "closed":
            closed = rest[0]
        elif head == "breakpoints":
            bps = tuple(float(v) for v in rest)
        elif head == "poly":
            pieces.append(Piece("poly", tuple(float(v) for v in rest)))
        elif head in ("zero", "identity"):
            pieces.append(Piece(head))
        else:
            raise ValueError(f"{path}:{lineno}: unknown entry {head!r}")
    if bps is None:
        raise ValueError(f"{path}: missing breakpoints line")
    return PiecewisePoly(bps, tuple(pieces), closed, name)
