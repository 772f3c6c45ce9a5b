"""Integer-program form of binary typicality decoding, solved by branch and bound.

The feasible set of :func:`build_ip` is exactly the set of binary y that the
exhaustive decoder accepts: typicality rows are derived by running the same
cell test on every admissible count, and syndrome rows (for integer
coefficients) by running the quantizer itself on every reachable row sum.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .encoder import EncodingMatrix, Quantizer, syndromes
from .outcomes import DecodeResult, Outcome
from .source_model import JointPMF, cell_is_typical, typicality_threshold, values_to_indices

# pruning slack for real-valued (non-integer) rows only
REAL_TOL = 1e-9


@dataclass(frozen=True)
class Row:
    """Linear constraint ``lower (<|<=) coeffs . y (<|<=) upper``."""

    coeffs: np.ndarray
    lower: float
    upper: float
    kind: str
    lower_strict: bool = False
    upper_strict: bool = False
    # real quantizer cell [low, high) behind a syndrome row, for reference
    cell: tuple[float, float] | None = None

    def holds(self, value) -> bool:
        lo_ok = value > self.lower if self.lower_strict else value >= self.lower
        hi_ok = value < self.upper if self.upper_strict else value <= self.upper
        return bool(lo_ok and hi_ok)


@dataclass
class IPInstance:
    n_vars: int
    domain: tuple[float, ...] = (0.0, 1.0)
    typicality_rows: list[Row] = field(default_factory=list)
    syndrome_rows: list[Row] = field(default_factory=list)
    # S_a index sets behind the typicality rows, one per x symbol
    partition: list[np.ndarray] = field(default_factory=list)
    # (D, q, u_hat) for real-valued syndromes: leaves are re-quantized exactly
    # as the exhaustive decoder does instead of compared with cell bounds
    requantize: tuple | None = None

    @property
    def rows(self) -> list[Row]:
        return self.typicality_rows + self.syndrome_rows

    def is_integral(self) -> bool:
        return all(r.coeffs.dtype.kind == "i" for r in self.rows) and all(
            float(d).is_integer() for d in self.domain
        )

    def satisfied_by(self, y) -> bool:
        y = np.asarray(y)
        if y.shape != (self.n_vars,) or not np.isin(y, self.domain).all():
            return False
        yv = y.astype(np.int64) if self.is_integral() else y.astype(float)
        if self.requantize is None:
            return all(r.holds(r.coeffs @ yv) for r in self.rows)
        D, q, u_hat = self.requantize
        if not all(r.holds(r.coeffs @ yv) for r in self.typicality_rows):
            return False
        extra = self.syndrome_rows[D.m:]
        return (np.array_equal(q.quantize(syndromes(D, yv[None, :])[0]), u_hat)
                and all(r.holds(r.coeffs @ yv) for r in extra))

    def with_row(self, row: Row) -> "IPInstance":
        return IPInstance(self.n_vars, self.domain, list(self.typicality_rows),
                          self.syndrome_rows + [row], list(self.partition), self.requantize)

    def to_dict(self) -> dict[str, Any]:
        def row_dict(r: Row) -> dict[str, Any]:
            d = {
                "kind": r.kind,
                "coeffs": r.coeffs.tolist(),
                "lower": _num(r.lower),
                "upper": _num(r.upper),
                "lower_strict": r.lower_strict,
                "upper_strict": r.upper_strict,
            }
            if r.cell is not None:
                d["cell"] = [_num(r.cell[0]), _num(r.cell[1])]
            return d

        return {
            "n_vars": self.n_vars,
            "domains": [list(self.domain)] * self.n_vars,
            "rows": [row_dict(r) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "IPInstance":
        domains = d["domains"]
        if any(dom != domains[0] for dom in domains):
            raise ValueError("per-variable domains must coincide")
        rows = {"typicality": [], "syndrome": []}
        for rd in d["rows"]:
            coeffs = np.asarray(rd["coeffs"])
            if np.all(coeffs == np.round(coeffs)):
                coeffs = coeffs.astype(np.int64)
            cell = tuple(_from_num(v) for v in rd["cell"]) if "cell" in rd else None
            rows[rd["kind"]].append(Row(coeffs, _from_num(rd["lower"]), _from_num(rd["upper"]),
                                        rd["kind"], rd["lower_strict"], rd["upper_strict"], cell))
        return cls(int(d["n_vars"]), tuple(float(v) for v in domains[0]),
                   rows["typicality"], rows["syndrome"])


def _num(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return int(v) if float(v).is_integer() else float(v)


def _from_num(v) -> float:
    return float(v) if isinstance(v, str) else v


def _count_range(size: int, n: int, p_one: float, p_zero: float, thr: float) -> tuple[int, int]:
    """Closed range of counts c of ones among ``size`` positions keeping both cells typical."""
    c = np.arange(size + 1)
    ok = cell_is_typical(c, n, p_one, thr) & cell_is_typical(size - c, n, p_zero, thr)
    hits = np.nonzero(ok)[0]
    if hits.size == 0:
        return 1, 0
    if hits[-1] - hits[0] + 1 != hits.size:
        raise AssertionError("typical counts do not form an interval")
    return int(hits[0]), int(hits[-1])


def _integer_cell(coeffs: np.ndarray, index: int, q: Quantizer) -> tuple[int, int]:
    """Closed range of reachable integer row sums whose quantized value is ``index``."""
    lo_reach = int(np.minimum(coeffs, 0).sum())
    hi_reach = int(np.maximum(coeffs, 0).sum())
    sums = np.arange(lo_reach, hi_reach + 1)
    hits = np.nonzero(q.quantize(sums) == index)[0]
    if hits.size == 0:
        return 1, 0
    return int(sums[hits[0]]), int(sums[hits[-1]])


def build_ip(x, u_hat, D: EncodingMatrix, pmf: JointPMF, eps: float, q: Quantizer) -> IPInstance:
    """Integer program whose binary solutions are the typical, syndrome-consistent y."""
    if tuple(pmf.y_alphabet) != (0.0, 1.0):
        raise ValueError("build_ip needs Y = {0, 1}; decompose larger alphabets into stages first")
    x_idx = values_to_indices(x, pmf.x_alphabet)
    n = x_idx.size
    u_hat = np.asarray(u_hat, dtype=np.int64).ravel()
    if D.n != n or u_hat.size != D.m or q.n != n:
        raise ValueError("dimension mismatch between x, u_hat, matrix and quantizer")
    kx, ky = pmf.shape
    thr = typicality_threshold(eps, kx, ky)

    partition, trows = [], []
    for a in range(kx):
        S = np.nonzero(x_idx == a)[0]
        partition.append(S)
        lo, hi = _count_range(S.size, n, pmf.probs[a, 1], pmf.probs[a, 0], thr)
        coeffs = np.zeros(n, dtype=np.int64)
        coeffs[S] = 1
        trows.append(Row(coeffs, lo, hi, "typicality"))

    srows = []
    integral = D.entries.dtype.kind == "i"
    for i in range(D.m):
        cell = q.cell(int(u_hat[i]))
        if integral:
            lo, hi = _integer_cell(D.entries[i], int(u_hat[i]), q)
            srows.append(Row(D.entries[i].copy(), lo, hi, "syndrome", cell=cell))
        else:
            srows.append(Row(D.entries[i].astype(float), cell[0], cell[1], "syndrome",
                             upper_strict=True, cell=cell))
    exact = None if integral else (D, q, u_hat.copy())
    return IPInstance(n, (0.0, 1.0), trows, srows, partition, exact)


@dataclass
class SolveReport:
    solutions_found: int
    witnesses: list[np.ndarray]
    nodes_explored: int
    wall_time: float
    status: str  # "complete" or "inconclusive"

    @property
    def inconclusive(self) -> bool:
        return self.status == "inconclusive"


def branching_order(ip: IPInstance) -> list[int]:
    """Most-constrained variable first (largest total |coefficient|), ties by index."""
    if not ip.rows:
        return list(range(ip.n_vars))
    weight = np.abs(np.stack([r.coeffs for r in ip.rows]).astype(float)).sum(axis=0)
    return sorted(range(ip.n_vars), key=lambda j: (-weight[j], j))


def solve_count(
    ip: IPInstance,
    stop_after: int | None = 2,
    budget: int | None = None,
    order: Sequence[int] | None = None,
    on_prune: Callable[[dict[int, float]], None] | None = None,
) -> SolveReport:
    """Depth-first branch and bound counting feasible assignments.

    Each node carries, per row, the partial sum of assigned variables and the
    reachable [min, max] contribution of the unassigned ones; a node is
    pruned as soon as some row's reachable interval misses its bounds.
    ``stop_after=None`` enumerates every solution. ``budget`` caps the number
    of nodes; running out yields ``status="inconclusive"``. ``on_prune``
    receives the partial assignment of every pruned node.
    """
    if stop_after is not None and stop_after < 1:
        raise ValueError("stop_after must be >= 1 or None")
    t0 = time.perf_counter()
    n = ip.n_vars
    order = list(branching_order(ip) if order is None else order)
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the variables")
    rows = ip.rows
    integral = ip.is_integral()
    dtype = np.int64 if integral else float
    dom = np.asarray(sorted(ip.domain), dtype=dtype)
    tol = 0 if integral else REAL_TOL

    if rows:
        A = np.stack([r.coeffs for r in rows]).astype(dtype)
    else:
        A = np.zeros((0, n), dtype=dtype)
    lower = np.array([r.lower for r in rows], dtype=float)
    upper = np.array([r.upper for r in rows], dtype=float)
    lstrict = np.array([r.lower_strict for r in rows], dtype=bool)
    ustrict = np.array([r.upper_strict for r in rows], dtype=bool)

    cmin = np.minimum(A * dom[0], A * dom[-1])
    cmax = np.maximum(A * dom[0], A * dom[-1])
    # suffix sums over the branching order: reachable range of the unassigned tail
    tail_min = np.zeros((n + 1, A.shape[0]), dtype=dtype)
    tail_max = np.zeros((n + 1, A.shape[0]), dtype=dtype)
    for depth in range(n - 1, -1, -1):
        j = order[depth]
        tail_min[depth] = tail_min[depth + 1] + cmin[:, j]
        tail_max[depth] = tail_max[depth + 1] + cmax[:, j]

    def dead(partial: np.ndarray, depth: int) -> bool:
        lo = partial + tail_min[depth]
        hi = partial + tail_max[depth]
        too_high = np.where(ustrict, lo >= upper + tol, lo > upper + tol)
        too_low = np.where(lstrict, hi <= lower - tol, hi < lower - tol)
        return bool(np.any(too_high) or np.any(too_low))

    witnesses: list[np.ndarray] = []
    nodes = 0
    assign = np.zeros(n, dtype=float)
    status = "complete"

    class _Stop(Exception):
        pass

    def visit(depth: int, partial: np.ndarray) -> None:
        nonlocal nodes, status
        if budget is not None and nodes >= budget:
            status = "inconclusive"
            raise _Stop
        nodes += 1
        if dead(partial, depth):
            if on_prune is not None:
                on_prune({order[d]: assign[order[d]] for d in range(depth)})
            return
        if depth == n:
            y = assign.copy()
            if not ip.satisfied_by(y):
                if on_prune is not None:
                    on_prune({j: assign[j] for j in range(n)})
                return
            witnesses.append(y)
            if stop_after is not None and len(witnesses) >= stop_after:
                raise _Stop
            return
        j = order[depth]
        for v in dom:
            assign[j] = v
            visit(depth + 1, partial + A[:, j] * v)
        assign[j] = 0

    try:
        visit(0, np.zeros(A.shape[0], dtype=dtype))
    except _Stop:
        pass
    return SolveReport(len(witnesses), witnesses, nodes, time.perf_counter() - t0, status)


def ip_decode(
    x,
    u_hat,
    D: EncodingMatrix,
    pmf: JointPMF,
    eps: float,
    q: Quantizer,
    budget: int | None = None,
    order: Sequence[int] | None = None,
) -> DecodeResult:
    """Typicality decoding of a binary source via :func:`build_ip` and :func:`solve_count`."""
    ip = build_ip(x, u_hat, D, pmf, eps, q)
    rep = solve_count(ip, stop_after=2, budget=budget, order=order)
    sols = [w.copy() for w in rep.witnesses]
    if rep.inconclusive and rep.solutions_found < 2:
        return DecodeResult(Outcome.INCONCLUSIVE, candidates_examined=rep.nodes_explored, solutions=sols)
    if rep.solutions_found == 0:
        return DecodeResult(Outcome.NONE_FOUND, candidates_examined=rep.nodes_explored)
    if rep.solutions_found == 1:
        return DecodeResult(Outcome.UNIQUE, value=sols[0], candidates_examined=rep.nodes_explored,
                            solutions=sols)
    return DecodeResult(Outcome.MULTIPLE, candidates_examined=rep.nodes_explored, solutions=sols)
