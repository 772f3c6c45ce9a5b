"""Exhaustive typicality, joint, minimum-entropy and multistage decoders.

All exhaustive decoders enumerate candidates in lexicographic order of
alphabet indices (position 0 most significant), which is also the order of
``itertools.product``; the first two admissible candidates are reported
when a search is ambiguous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .encoder import (
    CoefficientDist,
    CodeParams,
    EncodingMatrix,
    Quantizer,
    code_params,
    draw_matrix,
    encode_and_quantize,
    syndromes,
)
from .outcomes import DecodeResult, Outcome
from .source_model import (
    JointPMF,
    cell_is_typical,
    entropies,
    typicality_threshold,
    values_to_indices,
)

CHUNK = 1 << 15
# syndrome-consistent (x, y) pairs scanned by the pair decoders
PAIR_LOG2_LIMIT = 26
TYPICALITY_LOG2_LIMIT = 20
JOINT_LOG2_LIMIT = 20
MED_LOG2_LIMIT = 20


class SearchTooLarge(ValueError):
    """Raised when an exhaustive search space exceeds the configured cap."""


def check_search_space(log2_size: float, limit: float, what: str) -> None:
    if log2_size > limit + 1e-9:
        raise SearchTooLarge(
            f"{what}: search space 2^{log2_size:.1f} exceeds cap 2^{limit:g}; "
            "use ip_decode or a smaller block"
        )


def index_chunks(n: int, k: int, chunk: int = CHUNK) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(start, block)`` where ``block`` holds k-ary digit rows start..start+len."""
    total = k**n
    powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield start, ((idx[:, None] // powers[None, :]) % k).astype(np.int8)


def _syndrome_ok(values: np.ndarray, D: EncodingMatrix, q: Quantizer, u_hat: np.ndarray) -> np.ndarray:
    if D.m == 0:
        return np.ones(values.shape[0], dtype=bool)
    return np.all(q.quantize(syndromes(D, values)) == u_hat[None, :], axis=1)


def feasible_by_syndrome(D: EncodingMatrix, q: Quantizer, u_hat, alphabet: Sequence[float]) -> np.ndarray:
    """All index vectors over ``alphabet`` whose quantized syndrome equals ``u_hat``."""
    u_hat = np.asarray(u_hat, dtype=np.int64)
    alph = np.asarray(alphabet, dtype=float)
    keep = []
    for _, block in index_chunks(D.n, len(alph)):
        keep.append(block[_syndrome_ok(alph[block], D, q, u_hat)])
    return np.concatenate(keep) if keep else np.zeros((0, D.n), dtype=np.int8)


def _counts_given_x(cand: np.ndarray, x_idx: np.ndarray, kx: int, ky: int) -> np.ndarray:
    counts = np.zeros((cand.shape[0], kx, ky), dtype=np.int64)
    for a in range(kx):
        sub = cand[:, x_idx == a]
        for b in range(ky):
            counts[:, a, b] = (sub == b).sum(axis=1)
    return counts


def _check_inputs(D: EncodingMatrix, u_hat, n: int, q: Quantizer) -> np.ndarray:
    u_hat = np.asarray(u_hat, dtype=np.int64).ravel()
    if D.n != n:
        raise ValueError(f"matrix has {D.n} columns but block length is {n}")
    if u_hat.size != D.m:
        raise ValueError(f"syndrome has {u_hat.size} entries but matrix has {D.m} rows")
    if q.n != n:
        raise ValueError(f"quantizer built for n={q.n}, block length is {n}")
    return u_hat


def _verdict(found: list, value_of, examined: int) -> DecodeResult:
    if not found:
        return DecodeResult(Outcome.NONE_FOUND, candidates_examined=examined)
    sols = [value_of(f) for f in found[:2]]
    if len(found) == 1:
        return DecodeResult(Outcome.UNIQUE, value=sols[0], candidates_examined=examined, solutions=sols)
    return DecodeResult(Outcome.MULTIPLE, candidates_examined=examined, solutions=sols)


def typicality_decode(
    x,
    u_hat,
    D: EncodingMatrix,
    pmf: JointPMF,
    eps: float,
    q: Quantizer,
    max_log2_candidates: float = TYPICALITY_LOG2_LIMIT,
) -> DecodeResult:
    """Find the unique y jointly strongly typical with ``x`` and matching ``u_hat``.

    The search stops as soon as a second admissible y is found.
    """
    x_idx = values_to_indices(x, pmf.x_alphabet)
    n = x_idx.size
    u_hat = _check_inputs(D, u_hat, n, q)
    kx, ky = pmf.shape
    check_search_space(n * math.log2(ky), max_log2_candidates, "typicality_decode")
    thr = typicality_threshold(eps, kx, ky)
    y_alph = np.asarray(pmf.y_alphabet)

    found: list[np.ndarray] = []
    examined = 0
    for start, block in index_chunks(n, ky):
        counts = _counts_given_x(block, x_idx, kx, ky)
        typ = np.all(cell_is_typical(counts, n, pmf.probs[None], thr), axis=(1, 2))
        sel = np.nonzero(typ)[0]
        if sel.size:
            sel = sel[_syndrome_ok(y_alph[block[sel]], D, q, u_hat)]
        for s in sel:
            found.append(block[s])
            if len(found) == 2:
                examined = start + int(s) + 1
                break
        if len(found) == 2:
            break
        examined = start + block.shape[0]
    return _verdict(found, lambda idx: y_alph[idx], examined)


def _check_pairs(Fx: np.ndarray, Fy: np.ndarray, what: str) -> None:
    if Fx.shape[0] and Fy.shape[0]:
        check_search_space(math.log2(Fx.shape[0]) + math.log2(Fy.shape[0]), PAIR_LOG2_LIMIT, what + " pairs")


def _pair_scan(Fx: np.ndarray, Fy: np.ndarray, kx: int, ky: int, rows: int = 64):
    """Yield (i0, counts) with counts[i - i0, j] the joint type of (Fx[i], Fy[j])."""
    oy = np.stack([(Fy == b) for b in range(ky)], axis=-1).astype(np.int32)  # (Ny, n, ky)
    for i0 in range(0, Fx.shape[0], rows):
        ox = np.stack([(Fx[i0:i0 + rows] == a) for a in range(kx)], axis=-1).astype(np.int32)
        yield i0, np.einsum("ina,jnb->ijab", ox, oy)


def joint_decode(
    u1_hat,
    u2_hat,
    D1: EncodingMatrix,
    D2: EncodingMatrix,
    pmf: JointPMF,
    eps: float,
    q: Quantizer,
    max_log2_candidates: float = JOINT_LOG2_LIMIT,
) -> DecodeResult:
    """Find the unique jointly strongly typical (x, y) matching both syndromes."""
    n = D1.n
    u1_hat = _check_inputs(D1, u1_hat, n, q)
    u2_hat = _check_inputs(D2, u2_hat, n, q)
    kx, ky = pmf.shape
    check_search_space(n * math.log2(max(kx, ky)), max_log2_candidates, "joint_decode")
    Fx = feasible_by_syndrome(D1, q, u1_hat, pmf.x_alphabet)
    Fy = feasible_by_syndrome(D2, q, u2_hat, pmf.y_alphabet)
    _check_pairs(Fx, Fy, "joint_decode")
    thr = typicality_threshold(eps, kx, ky)
    examined = kx**n + ky**n
    found: list[tuple[int, int]] = []
    if Fx.shape[0] and Fy.shape[0]:
        for i0, counts in _pair_scan(Fx, Fy, kx, ky):
            ok = np.all(cell_is_typical(counts, n, pmf.probs[None, None], thr), axis=(2, 3))
            hits = np.argwhere(ok)
            for i, j in hits[:2]:
                found.append((i0 + int(i), int(j)))
            examined += counts.shape[0] * counts.shape[1]
            if len(found) >= 2:
                break
    xa, ya = np.asarray(pmf.x_alphabet), np.asarray(pmf.y_alphabet)
    return _verdict(found[:2], lambda ij: (xa[Fx[ij[0]]], ya[Fy[ij[1]]]), examined)


def _xlogx_sum(counts: np.ndarray) -> np.ndarray:
    c = counts.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(c > 0, c * np.log2(np.where(c > 0, c, 1.0)), 0.0)
    return t.reshape(*counts.shape[:2], -1).sum(axis=-1)


def exact_type_key(counts: np.ndarray) -> int:
    """prod c^c over the cells: larger key <=> smaller empirical entropy, exactly."""
    key = 1
    for c in counts.ravel().tolist():
        if c > 1:
            key *= c**c
    return key


def min_entropy_decode(
    u1_hat,
    u2_hat,
    D1: EncodingMatrix,
    D2: EncodingMatrix,
    q: Quantizer,
    x_alphabet: Sequence[float] = (0.0, 1.0),
    y_alphabet: Sequence[float] = (0.0, 1.0),
    max_log2_candidates: float = MED_LOG2_LIMIT,
) -> DecodeResult:
    """Return the syndrome-consistent pair of least empirical joint entropy.

    No source distribution is consulted, only the alphabets. Ties at the
    minimum are decided on exact integers and reported as MULTIPLE.
    """
    n = D1.n
    u1_hat = _check_inputs(D1, u1_hat, n, q)
    u2_hat = _check_inputs(D2, u2_hat, n, q)
    kx, ky = len(x_alphabet), len(y_alphabet)
    check_search_space(n * math.log2(max(kx, ky)), max_log2_candidates, "min_entropy_decode")
    Fx = feasible_by_syndrome(D1, q, u1_hat, x_alphabet)
    Fy = feasible_by_syndrome(D2, q, u2_hat, y_alphabet)
    _check_pairs(Fx, Fy, "min_entropy_decode")
    examined = kx**n + ky**n + Fx.shape[0] * Fy.shape[0]
    if not (Fx.shape[0] and Fy.shape[0]):
        return DecodeResult(Outcome.NONE_FOUND, candidates_examined=examined)

    # float pass narrows the field, exact integer keys settle it
    best_key, best = -1, []
    best_float = -math.inf
    for i0, counts in _pair_scan(Fx, Fy, kx, ky):
        s = _xlogx_sum(counts)
        smax = float(s.max())
        if smax < best_float - 1e-6:
            continue
        for i, j in np.argwhere(s >= smax - 1e-6):
            key = exact_type_key(counts[i, j])
            if key > best_key:
                best_key, best = key, [(i0 + int(i), int(j))]
            elif key == best_key:
                best.append((i0 + int(i), int(j)))
        best_float = max(best_float, smax)
    xa, ya = np.asarray(x_alphabet, dtype=float), np.asarray(y_alphabet, dtype=float)
    res = _verdict(best[:2], lambda ij: (xa[Fx[ij[0]]], ya[Fy[ij[1]]]), examined)
    return res


# ---------------------------------------------------------------------------
# multistage decomposition for non-binary Y


@dataclass(frozen=True)
class StagePlan:
    """Binary stage decomposition of a |Y|-ary source.

    ``order`` lists the alphabet values in stage order, ``weights[i]`` is
    Pr{Y not among the first i values}, and ``stage_pmfs[i]`` the induced
    distribution of (X, [Y == order[i]]) given Y is not among the first i
    values (None when that event has probability zero).
    """

    order: tuple[float, ...]
    stage_pmfs: tuple[JointPMF | None, ...]
    weights: tuple[float, ...]
    n: int
    eps: float
    lengths: tuple[int, ...]
    lengths_from_source: bool = False

    @property
    def num_stages(self) -> int:
        return len(self.stage_pmfs)

    def stage_entropy(self, i: int) -> float:
        p = self.stage_pmfs[i]
        return 0.0 if p is None else entropies(p)["H_Y_given_X"]

    def grouped_entropy(self) -> float:
        """Sum of weighted stage conditional entropies; equals H(Y|X)."""
        return sum(w * self.stage_entropy(i) for i, w in enumerate(self.weights))

    def params(self, i: int) -> CodeParams | None:
        """Code parameters of stage ``i`` at its block length (None below n=2)."""
        ni = self.lengths[i]
        if ni < 2:
            return None
        return code_params(ni, self.eps, self.stage_entropy(i))


def _stage_lengths(y_values, order: Sequence[float]) -> tuple[int, ...]:
    y = np.asarray(y_values, dtype=float)
    remaining = y.size
    out = []
    for v in order[:-1]:
        out.append(remaining)
        remaining -= int((y == v).sum())
    return tuple(out)


def plan_stages(pmf: JointPMF, eps: float, n: int, y=None) -> StagePlan:
    """Build the |Y|-1 binary stages of ``pmf``.

    Without ``y`` the stage block lengths are the typical-case bookkeeping
    values ``min(n, floor(n (1 - Pr{earlier values} + eps)))``; with ``y``
    they are the actual counts of undecided positions.
    """
    ky = len(pmf.y_alphabet)
    if ky < 2:
        raise ValueError("multistage coding needs |Y| >= 2")
    order = tuple(pmf.y_alphabet)
    P = pmf.probs
    stage_pmfs: list[JointPMF | None] = []
    weights: list[float] = []
    expected: list[int] = []
    for i in range(ky - 1):
        rest = P[:, i:]
        w = float(rest.sum())
        weights.append(w)
        expected.append(min(n, math.floor(n * (w + eps))))
        if w <= 0:
            stage_pmfs.append(None)
            continue
        hit = rest[:, 0] / w
        miss = rest[:, 1:].sum(axis=1) / w
        probs = np.stack([miss, hit], axis=1)
        probs = probs / probs.sum()
        stage_pmfs.append(JointPMF(pmf.x_alphabet, (0.0, 1.0), probs))
    if y is not None:
        y = np.asarray(y, dtype=float)
        if y.size != n:
            raise ValueError("source length does not match plan block length")
        values_to_indices(y, order)
        lengths, from_src = _stage_lengths(y, order), True
    else:
        lengths, from_src = tuple(expected), False
    return StagePlan(order, tuple(stage_pmfs), tuple(weights), n, float(eps), lengths, from_src)


def _remaining_positions(y_values: np.ndarray, order: Sequence[float], stage: int) -> np.ndarray:
    mask = np.ones(y_values.size, dtype=bool)
    for v in order[:stage]:
        mask &= y_values != v
    return np.nonzero(mask)[0]


def extract_stage_vector(y, plan: StagePlan, stage: int) -> np.ndarray:
    """Binary indicator of ``order[stage]`` over the positions not yet decoded.

    ``stage`` is 0-based: stage 0 marks the first alphabet value over the
    whole block.
    """
    y = np.asarray(y, dtype=float)
    pos = _remaining_positions(y, plan.order, stage)
    return (y[pos] == plan.order[stage]).astype(np.int64)


def reconstruct_from_stages(stage_vectors: Sequence[np.ndarray], order: Sequence[float], n: int) -> np.ndarray:
    """Invert :func:`extract_stage_vector` given all |Y|-1 stage vectors."""
    if len(stage_vectors) != len(order) - 1:
        raise ValueError(f"expected {len(order) - 1} stage vectors, got {len(stage_vectors)}")
    y = np.empty(n)
    undecided = np.arange(n)
    for v, f in zip(order, stage_vectors):
        f = np.asarray(f)
        if f.size != undecided.size:
            raise ValueError("stage vector length does not match undecided positions")
        y[undecided[f == 1]] = v
        undecided = undecided[f == 0]
    y[undecided] = order[-1]
    return y


@dataclass(frozen=True)
class StageEncoding:
    """What the encoder sends for one stage.

    Blocks of length >= 2 are coded with a random matrix; a length-1 block
    is sent raw (one bit) and an empty block sends nothing.
    """

    length: int
    matrix: EncodingMatrix | None = None
    u_hat: np.ndarray | None = None
    params: CodeParams | None = None
    raw: np.ndarray | None = None

    @property
    def bits(self) -> int:
        if self.params is not None:
            return self.params.total_bits
        return 0 if self.raw is None else int(self.raw.size)


@dataclass
class MultistageCode:
    plan: StagePlan
    stages: list[StageEncoding] = field(default_factory=list)

    @property
    def payload_bits(self) -> int:
        return sum(s.bits for s in self.stages)

    @property
    def side_info_bits(self) -> int:
        """Bits spent announcing each stage length n(i) (ceil(log2(n+1)) each)."""
        return len(self.stages) * math.ceil(math.log2(self.plan.n + 1))


def multistage_encode(y, pmf: JointPMF, eps: float, dist: CoefficientDist | None = None, seed=None) -> MultistageCode:
    """Encode a |Y|-ary block as |Y|-1 binary RSWC stages."""
    y = np.asarray(y, dtype=float)
    plan = plan_stages(pmf, eps, y.size, y=y)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    code = MultistageCode(plan)
    for i in range(plan.num_stages):
        f = extract_stage_vector(y, plan, i)
        ni = f.size
        params = plan.params(i)
        if params is None:
            code.stages.append(StageEncoding(ni, raw=f if ni else None))
            continue
        D = draw_matrix(params.m, ni, dist, rng)
        u_hat = encode_and_quantize(D, f, params.quantizer)
        code.stages.append(StageEncoding(ni, D, u_hat, params))
    return code


def multistage_decode(x, code: MultistageCode, decoder: str = "typicality", **decoder_kw) -> DecodeResult:
    """Decode every stage in turn and rebuild y; any stage failure fails the block."""
    from .ip_solver import ip_decode

    plan = code.plan
    x = np.asarray(x, dtype=float)
    if x.size != plan.n:
        raise ValueError("x length does not match plan block length")
    if decoder not in ("typicality", "ip"):
        raise ValueError(f"unknown stage decoder {decoder!r}")
    undecided = np.arange(plan.n)
    y = np.full(plan.n, np.nan)
    records: list[dict] = []
    examined = 0
    for i, st in enumerate(code.stages):
        rec = {"stage": i, "length": st.length}
        records.append(rec)
        if st.length != undecided.size:
            rec["outcome"] = Outcome.NONE_FOUND.value
            rec["reason"] = "length_mismatch"
            return DecodeResult(Outcome.NONE_FOUND, candidates_examined=examined, failed_stage=i, stages=records)
        if st.length == 0:
            rec["outcome"] = "skipped"
            continue
        if st.raw is not None:
            f = st.raw
            rec["outcome"] = "raw"
        else:
            stage_pmf = plan.stage_pmfs[i]
            if stage_pmf is None:
                rec["outcome"] = Outcome.NONE_FOUND.value
                rec["reason"] = "zero_probability_stage"
                return DecodeResult(Outcome.NONE_FOUND, candidates_examined=examined, failed_stage=i, stages=records)
            q = st.params.quantizer
            x_sub = x[undecided]
            if decoder == "ip":
                r = ip_decode(x_sub, st.u_hat, st.matrix, stage_pmf, plan.eps, q, **decoder_kw)
            else:
                r = typicality_decode(x_sub, st.u_hat, st.matrix, stage_pmf, plan.eps, q, **decoder_kw)
            examined += r.candidates_examined
            rec["outcome"] = r.outcome.value
            if not r.ok:
                return DecodeResult(r.outcome, candidates_examined=examined, solutions=r.solutions,
                                    failed_stage=i, stages=records)
            f = np.asarray(r.value).astype(np.int64)
        y[undecided[f == 1]] = plan.order[i]
        undecided = undecided[f == 0]
    y[undecided] = plan.order[-1]
    return DecodeResult(Outcome.UNIQUE, value=y, candidates_examined=examined, solutions=[y], stages=records)
