"""Analytic error bounds and their Monte Carlo counterparts.

Bounds are evaluated in log2 space. The collision constants that the
analysis leaves unspecified (``c_coll`` and ``p_tilde``) are explicit
parameters; only the constant-free statements are compared against
simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encoder import CoefficientDist, Quantizer, rows_for_rate
from .source_model import JointPMF, entropies, typicality_threshold
from .stats import wilson_ucb

LN2 = math.log(2.0)


def _pow2(log2_value: float) -> float:
    if log2_value > 1023:
        return math.inf
    if log2_value < -1074:
        return 0.0
    return 2.0**log2_value


@dataclass(frozen=True)
class BoundParams:
    """Constants entering the bounds.

    ``p_tilde`` must lie strictly between 1 - p_pm and 1; ``c_coll`` is the
    collision constant of the c/sqrt(t) branch; ``delta`` splits the two
    distance regimes.
    """

    n: int
    eps: float
    x_size: int
    y_size: int
    a: float
    alpha: float
    sigma: float
    b_y: float
    p_pm: float
    p_tilde: float
    c_coll: float = 1.0
    delta: float | None = None

    def __post_init__(self):
        if not (1 - self.p_pm < self.p_tilde < 1):
            raise ValueError(f"p_tilde={self.p_tilde} must lie in (1 - p_pm, 1) = ({1 - self.p_pm}, 1)")
        if self.c_coll <= 0:
            raise ValueError("c_coll must be positive")

    @classmethod
    def from_setting(cls, pmf: JointPMF, dist: CoefficientDist, n: int, eps: float,
                     p_tilde: float | None = None, c_coll: float = 1.0,
                     delta: float | None = None) -> "BoundParams":
        ya = np.asarray(pmf.y_alphabet)
        b_y = float(np.diff(ya).min()) if ya.size > 1 else math.inf
        p_pm = dist.p_pm
        return cls(
            n=n, eps=eps, x_size=len(pmf.x_alphabet), y_size=ya.size,
            a=float(np.abs(ya).max()), alpha=dist.alpha, sigma=math.sqrt(dist.variance),
            b_y=b_y, p_pm=p_pm, p_tilde=1 - p_pm + 0.05 if p_tilde is None else p_tilde,
            c_coll=c_coll, delta=delta,
        )

    def delta_cap(self, rate: float) -> float:
        return self.eps / (2 * (rate + 3 * self.eps))


# -- large-deviation bounds ---------------------------------------------------

def lemma1_bound_log2(n: int, support_size: int, a: float, A: float) -> float:
    """log2 of 2 (n+1)^|W| exp(-A^2 / (2 n a^2))."""
    if n < 1 or a <= 0 or A <= 0:
        raise ValueError("need n >= 1, a > 0, A > 0")
    return 1 + support_size * math.log2(n + 1) - A * A / (2 * n * a * a) / LN2


def lemma1_bound(n: int, support_size: int, a: float, A: float) -> float:
    """Tail bound on |sum of n i.i.d. zero-mean variables| > A (may exceed 1)."""
    return _pow2(lemma1_bound_log2(n, support_size, a, A))


def p1_bound_log2(n: int, eps: float, x_size: int, y_size: int) -> float:
    """log2 of (n+1)^(|X||Y|) exp(-n eps^2 / (2 |X|^2 |Y|^2))."""
    k = x_size * y_size
    return k * math.log2(n + 1) - n * eps * eps / (2 * k * k) / LN2


def p1_bound(n: int, eps: float, x_size: int, y_size: int) -> float:
    """Sanov-type bound on the probability that a block is not strongly typical."""
    return _pow2(p1_bound_log2(n, eps, x_size, y_size))


def overflow_bound(y, n: int, eps: float, dist: CoefficientDist) -> float:
    """Union bound on Pr{|D_i y| > n^(0.5+eps)} split by symbol class of ``y``.

    Each class contributes the large-deviation bound for its own partial sum
    exceeding n^(0.5+eps) / (|Y| |value|); the zero symbol contributes nothing.
    """
    y = np.asarray(y, dtype=float)
    values = np.unique(y)
    ysize = max(len(values), 1)
    total = 0.0
    thresh = n ** (0.5 + eps)
    support = sum(p > 0 for p in dist.probs)
    for v in values:
        if v == 0:
            continue
        size = int((y == v).sum())
        total += lemma1_bound(size, support, dist.alpha, thresh / (ysize * abs(v)))
    return total


# -- collision bounds ---------------------------------------------------------

def collision_cap(t: int, p_tilde: float, c_coll: float) -> float:
    """min(p_tilde, c / sqrt(t)) for vectors differing in t places."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return min(p_tilde, c_coll / math.sqrt(t))


def constant_free_collision_bound(dist: CoefficientDist) -> float:
    """1 - p_pm, valid whenever the step is below b_y * min|d|."""
    return 1.0 - dist.p_pm


def in_constant_free_regime(q: Quantizer, b_y: float, dist: CoefficientDist) -> bool:
    return q.step < b_y * dist.min_abs_nonzero


# -- exponent functions for the two-encoder scheme ------------------------------

def phi1(h: float, rate: float, delta: float, n: int, eps: float, c_coll: float = 1.0) -> float:
    """log2( n 2^(n(h+2 eps)) (c / sqrt(n^(1-delta)))^m(rate) )."""
    m = rows_for_rate(n, rate, eps)
    return math.log2(n) + n * (h + 2 * eps) + m * (math.log2(c_coll) - 0.5 * (1 - delta) * math.log2(n))


def phi2(L: float, rate: float, delta: float, n: int, eps: float, p_tilde: float) -> float:
    """log2( n (L n)^(n^(1-delta)) p_tilde^m(rate) )."""
    m = rows_for_rate(n, rate, eps)
    return math.log2(n) + n ** (1 - delta) * math.log2(L * n) + m * math.log2(p_tilde)


def phi1_threshold(h: float, rate: float, delta: float, eps: float, n_grid: Sequence[int],
                   c_coll: float = 1.0) -> int | None:
    """Smallest grid n from which phi1 <= -n((rate - h) + eps/4) holds on the rest of the grid."""
    ok = [phi1(h, rate, delta, n, eps, c_coll) <= -n * ((rate - h) + eps / 4) for n in n_grid]
    threshold = None
    for n, good in zip(reversed(list(n_grid)), reversed(ok)):
        if not good:
            break
        threshold = n
    return threshold


# -- Monte Carlo counterparts ---------------------------------------------------

def empirical_atypicality(pmf: JointPMF, n: int, eps: float, samples: int, seed=None) -> int:
    """Number of ``samples`` i.i.d. blocks that fail strong typicality.

    Joint types of i.i.d. blocks are multinomial, so types are drawn directly.
    """
    rng = np.random.default_rng(seed)
    thr = typicality_threshold(eps, *pmf.shape)
    counts = rng.multinomial(n, pmf.probs.ravel(), size=samples)
    typical = np.all(np.abs(counts / n - pmf.probs.ravel()[None]) < thr, axis=1)
    return int((~typical).sum())


def _coefficient_sums(sizes: Sequence[int], weights: Sequence[float], dist: CoefficientDist,
                      samples: int, rng: np.random.Generator) -> np.ndarray:
    """Samples of sum_k weights[k] * (sum of sizes[k] i.i.d. coefficients)."""
    vals = np.asarray(dist.values)
    out = np.zeros(samples)
    for size, w in zip(sizes, weights):
        if size == 0 or w == 0:
            continue
        c = rng.multinomial(size, dist.probs, size=samples)
        out += w * (c @ vals)
    return out


def empirical_sum_tail(n: int, A: float, samples: int, dist: CoefficientDist | None = None, seed=None) -> int:
    """Count of samples with |W_1 + ... + W_n| > A, W_i i.i.d. from ``dist``."""
    dist = dist or CoefficientDist.rademacher()
    rng = np.random.default_rng(seed)
    s = _coefficient_sums([n], [1.0], dist, samples, rng)
    return int((np.abs(s) > A).sum())


def empirical_overflow(y, eps: float, rows: int, dist: CoefficientDist | None = None, seed=None) -> int:
    """Count of random rows D_i with |D_i y| > n^(0.5+eps)."""
    dist = dist or CoefficientDist.rademacher()
    y = np.asarray(y, dtype=float)
    n = y.size
    rng = np.random.default_rng(seed)
    values = np.unique(y)
    s = _coefficient_sums([int((y == v).sum()) for v in values], values, dist, rows, rng)
    return int((np.abs(s) > n ** (0.5 + eps)).sum())


def empirical_small_difference(t: int, step: float, rows: int, dist: CoefficientDist | None = None,
                               diff_value: float = 1.0, seed=None) -> int:
    """Count of rows with |D_i (y - y')| < step for y, y' differing in t places.

    Every nonzero difference equals ``diff_value``.
    """
    dist = dist or CoefficientDist.rademacher()
    rng = np.random.default_rng(seed)
    s = _coefficient_sums([t], [diff_value], dist, rows, rng)
    return int((np.abs(s) < step).sum())


def empirical_quantized_collision(n: int, eps: float, t: int, rows: int,
                                  dist: CoefficientDist | None = None, seed=None) -> int:
    """Count of rows whose quantized products agree on a random binary y and y' = y with t flips."""
    dist = dist or CoefficientDist.rademacher()
    if not 1 <= t <= n:
        raise ValueError("need 1 <= t <= n")
    rng = np.random.default_rng(seed)
    q = Quantizer(n, eps)
    y = rng.integers(0, 2, size=n)
    flip = np.zeros(n, dtype=bool)
    flip[rng.choice(n, size=t, replace=False)] = True
    y2 = np.where(flip, 1 - y, y)
    vals = np.asarray(dist.values)
    hits = 0
    chunk = max(1, (1 << 22) // n)
    for start in range(0, rows, chunk):
        k = min(chunk, rows - start)
        D = vals[rng.choice(len(vals), size=(k, n), p=np.asarray(dist.probs))]
        hits += int((q.quantize(D @ y) == q.quantize(D @ y2)).sum())
    return hits


def fit_collision_constant(ts: Sequence[int], freqs: Sequence[float]) -> tuple[float, list[float]]:
    """Least-squares c in freq ~ c / sqrt(t), plus the per-t ratios freq * sqrt(t)."""
    ts_a = np.asarray(ts, dtype=float)
    f = np.asarray(freqs, dtype=float)
    basis = 1 / np.sqrt(ts_a)
    c = float((basis @ f) / (basis @ basis))
    return c, (f * np.sqrt(ts_a)).tolist()


# -- tabulation -------------------------------------------------------------------

def bound_verdict(hits: int, samples: int, bound: float, confidence: float = 0.99) -> str:
    """Compare an empirical frequency with an analytic bound.

    ``"vacuous"`` when the bound is at least 1. When the bound sits above the
    upper confidence limit that zero hits would give, the limit itself must
    stay below the bound (``"pass"``); below that resolution only the
    frequency can be compared (``"pass_point"``).
    """
    if bound >= 1:
        return "vacuous"
    if hits / samples > bound:
        return "fail"
    if bound >= wilson_ucb(0, samples, confidence):
        return "pass" if wilson_ucb(hits, samples, confidence) <= bound else "fail"
    return "pass_point"


@dataclass
class BoundRow:
    name: str
    n: int
    eps: float
    params: str
    bound_log2: float
    empirical_freq: float | None = None
    ucb99: float | None = None
    hits: int | None = None
    samples: int | None = None

    @property
    def verdict(self) -> str:
        if self.hits is None:
            return "n/a"
        return bound_verdict(self.hits, self.samples, _pow2(self.bound_log2))

    COLUMNS = ("name", "n", "eps", "params", "bound_log2", "empirical_freq", "ucb99", "verdict")

    def as_row(self) -> list[str]:
        def f(v):
            return "" if v is None else f"{v:.6g}"
        return [self.name, str(self.n), f"{self.eps:g}", self.params, f"{self.bound_log2:.6g}",
                f(self.empirical_freq), f(self.ucb99), self.verdict]


def bound_table(pmf: JointPMF, n_grid: Sequence[int], eps: float, samples: int = 10_000,
                dist: CoefficientDist | None = None, seed: int = 0) -> list[BoundRow]:
    """Evaluate each constant-free bound on ``n_grid`` next to its empirical frequency."""
    dist = dist or CoefficientDist.rademacher()
    kx, ky = pmf.shape
    rows: list[BoundRow] = []
    h = entropies(pmf)["H_Y_given_X"]
    for i, n in enumerate(n_grid):
        sub = [seed, i]
        k = empirical_atypicality(pmf, n, eps, samples, seed=sub + [0])
        rows.append(BoundRow("p1", n, eps, f"|X|={kx};|Y|={ky}", p1_bound_log2(n, eps, kx, ky),
                             k / samples, wilson_ucb(k, samples), k, samples))
        A = n ** (0.5 + eps)
        k = empirical_sum_tail(n, A, samples, dist, seed=sub + [1])
        rows.append(BoundRow("lemma1", n, eps, f"|W|={len(dist.values)};a={dist.alpha:g};A={A:.6g}",
                             lemma1_bound_log2(n, len(dist.values), dist.alpha, A),
                             k / samples, wilson_ucb(k, samples), k, samples))
        q = Quantizer(n, eps)
        b_y = float(np.diff(pmf.y_alphabet).min()) if ky > 1 else math.inf
        if in_constant_free_regime(q, b_y, dist):
            k = empirical_small_difference(1, q.step, samples, dist, diff_value=b_y, seed=sub + [2])
            rows.append(BoundRow("collision_t1", n, eps, f"step={q.step:.6g}",
                                 math.log2(constant_free_collision_bound(dist)),
                                 k / samples, wilson_ucb(k, samples), k, samples))
        if n >= 2:
            delta = eps / (2 * (h + 3 * eps))
            rows.append(BoundRow("phi1", n, eps, f"h={h:.6g};R={h:.6g};delta={delta:.6g};c=1",
                                 phi1(h, h, delta, n, eps)))
    return rows
