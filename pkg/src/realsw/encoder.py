"""Random real-valued linear encoding followed by uniform quantization."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .source_model import PROB_ATOL

# guards ceil() against float noise such as 25.000000000000004
_CEIL_GUARD = 1e-9


def exact_ceil(value: float) -> int:
    return math.ceil(value - _CEIL_GUARD)


@dataclass(frozen=True, eq=False)
class CoefficientDist:
    """Finite coefficient set with its sampling distribution.

    The coding results assume a zero-mean distribution with at least two
    values carrying mass; ``allow_nonzero_mean`` lifts the first condition
    for experiments only.
    """

    values: tuple[float, ...]
    probs: tuple[float, ...]
    allow_nonzero_mean: bool = False

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(vals) != len(probs) or not vals:
            raise ValueError("values and probs must be nonempty and of equal length")
        if len(set(vals)) != len(vals):
            raise ValueError("coefficient values must be distinct")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > PROB_ATOL:
            raise ValueError("coefficient probabilities must be nonnegative and sum to 1")
        if sum(p > 0 for p in probs) < 2:
            raise ValueError("at least two coefficient values need nonzero probability")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", probs)
        if not self.allow_nonzero_mean:
            if abs(self.mean) > PROB_ATOL:
                raise ValueError(f"coefficient distribution has mean {self.mean}, expected 0")
            if self.p_pm <= 0:
                raise ValueError("zero-mean distribution must put mass on both signs")

    @classmethod
    def rademacher(cls) -> "CoefficientDist":
        return cls((-1.0, 1.0), (0.5, 0.5))

    @property
    def mean(self) -> float:
        return sum(v * p for v, p in zip(self.values, self.probs))

    @property
    def variance(self) -> float:
        mu = self.mean
        return sum(p * (v - mu) ** 2 for v, p in zip(self.values, self.probs))

    @property
    def p_pm(self) -> float:
        """min(Pr{D > 0}, Pr{D < 0})."""
        pos = sum(p for v, p in zip(self.values, self.probs) if v > 0)
        neg = sum(p for v, p in zip(self.values, self.probs) if v < 0)
        return min(pos, neg)

    @property
    def alpha(self) -> float:
        return max(abs(v) for v, p in zip(self.values, self.probs) if p > 0)

    @property
    def min_abs_nonzero(self) -> float:
        return min(abs(v) for v, p in zip(self.values, self.probs) if p > 0 and v != 0)

    @property
    def is_integer(self) -> bool:
        return all(float(v).is_integer() for v in self.values)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"values": list(self.values), "probs": list(self.probs)}
        if self.allow_nonzero_mean:
            d["allow_nonzero_mean"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CoefficientDist":
        return cls(tuple(d["values"]), tuple(d["probs"]), bool(d.get("allow_nonzero_mean", False)))


@dataclass(frozen=True, eq=False)
class EncodingMatrix:
    entries: np.ndarray
    dist: CoefficientDist
    seed: Any = None

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.ndim != 2 or e.shape[1] < 1:
            raise ValueError("encoding matrix must be 2-D with at least one column")
        e = e.astype(np.int64 if self.dist.is_integer else float)
        if e.size and not np.isin(e, np.asarray(self.dist.values)).all():
            raise ValueError("matrix entries must belong to the coefficient set")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "m": self.m,
            "n": self.n,
            "entries": self.entries.ravel().tolist(),
            "dist": self.dist.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EncodingMatrix":
        dist = CoefficientDist.from_dict(d["dist"])
        entries = np.asarray(d["entries"]).reshape(int(d["m"]), int(d["n"]))
        return cls(entries, dist, d.get("seed"))


def draw_matrix(m: int, n: int, dist: CoefficientDist | None = None, seed=None) -> EncodingMatrix:
    """Draw an m x n matrix with i.i.d. entries from ``dist``.

    ``m == 0`` yields an empty encoder (no constraints), which the decoders
    accept as the vacuous code.
    """
    if m < 0 or n < 1:
        raise ValueError(f"invalid matrix dimensions {m}x{n}")
    dist = dist or CoefficientDist.rademacher()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = rng.choice(len(dist.values), size=(m, n), p=np.asarray(dist.probs))
    entries = np.asarray(dist.values)[idx]
    record = None if isinstance(seed, np.random.Generator) else seed
    return EncodingMatrix(entries, dist, record)


@dataclass(frozen=True)
class Quantizer:
    """Uniform quantizer on (-n^(0.5+eps), n^(0.5+eps)) with step 2 n^(-eps).

    Cells are half-open ``[lo + k*step, lo + (k+1)*step)``; values outside
    the range are clamped to the extreme cells.
    """

    n: int
    eps: float
    range_bound: float = field(init=False)
    step: float = field(init=False)
    levels: int = field(init=False)
    bits_per_component: int = field(init=False)

    def __post_init__(self):
        if self.n < 1 or self.eps <= 0:
            raise ValueError("quantizer needs n >= 1 and eps > 0")
        n, eps = self.n, float(self.eps)
        object.__setattr__(self, "range_bound", n ** (0.5 + eps))
        object.__setattr__(self, "step", 2.0 * n ** (-eps))
        object.__setattr__(self, "levels", max(1, exact_ceil(n ** (0.5 + 2 * eps))))
        object.__setattr__(self, "bits_per_component", max(0, exact_ceil((0.5 + 2 * eps) * math.log2(n))))
        if self.bits_per_component > 62:
            raise ValueError(f"quantizer with n={n}, eps={eps} needs {self.bits_per_component} bits per index")

    def quantize(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        idx = np.floor((u + self.range_bound) / self.step)
        return np.clip(idx, 0, self.levels - 1).astype(np.int64)

    def cell(self, index: int) -> tuple[float, float]:
        """Real interval ``[low, high)`` mapped to ``index``; extremes are unbounded."""
        low = -math.inf if index == 0 else -self.range_bound + index * self.step
        high = math.inf if index == self.levels - 1 else -self.range_bound + (index + 1) * self.step
        return low, high


@dataclass(frozen=True)
class CodeParams:
    n: int
    eps: float
    m: int
    quantizer: Quantizer

    @property
    def bits_per_component(self) -> int:
        return self.quantizer.bits_per_component

    @property
    def total_bits(self) -> int:
        return self.m * self.quantizer.bits_per_component

    @property
    def rate_bits_per_symbol(self) -> float:
        return self.total_bits / self.n

    def rho_ratio(self, h: float) -> float:
        """(total_bits - n h) / (eps n): the achieved excess-rate constant."""
        return (self.total_bits - self.n * h) / (self.eps * self.n)


def rows_for_rate(n: int, rate: float, eps: float) -> int:
    """Number of rows ceil(n (rate + 3 eps) / (0.5 log2 n))."""
    if n < 2:
        raise ValueError("row count formula needs n >= 2")
    return exact_ceil(n * (rate + 3 * eps) / (0.5 * math.log2(n)))


def code_params(n: int, eps: float, h_y_given_x: float, m: int | None = None) -> CodeParams:
    if n < 2:
        raise ValueError("code parameters need n >= 2")
    if eps <= 0 or h_y_given_x < 0:
        raise ValueError("need eps > 0 and a nonnegative conditional entropy")
    rows = rows_for_rate(n, h_y_given_x, eps) if m is None else int(m)
    return CodeParams(n, float(eps), rows, Quantizer(n, eps))


def syndromes(D: EncodingMatrix, Y) -> np.ndarray:
    """Row-wise products ``D y`` for a batch ``Y`` of shape (N, n); returns (N, m).

    Integer data is multiplied exactly in int64. Real data is accumulated
    column by column in a fixed order, so a batch and a single vector give
    bit-identical sums and re-quantization checks are reproducible.
    """
    Y = np.asarray(Y)
    if Y.ndim != 2 or Y.shape[1] != D.n:
        raise ValueError(f"source length {Y.shape[-1]} does not match matrix with {D.n} columns")
    Yf = Y.astype(float)
    if D.entries.dtype.kind == "i" and np.all(Yf == np.round(Yf)):
        return Yf.astype(np.int64) @ D.entries.T
    E = D.entries.astype(float)
    out = np.zeros((Y.shape[0], D.m))
    for j in range(D.n):
        out += Yf[:, j, None] * E[None, :, j]
    return out


def encode(D: EncodingMatrix, y: Sequence[float]) -> np.ndarray:
    """U = D y, in exact integer arithmetic when D and y are integer-valued."""
    y = np.asarray(y)
    if y.ndim != 1 or y.size != D.n:
        raise ValueError(f"source length {y.size} does not match matrix with {D.n} columns")
    return syndromes(D, y[None, :])[0]


def quantize(u, q: Quantizer) -> np.ndarray:
    return q.quantize(u)


def encode_and_quantize(D: EncodingMatrix, y, q: Quantizer) -> np.ndarray:
    return q.quantize(encode(D, y))
