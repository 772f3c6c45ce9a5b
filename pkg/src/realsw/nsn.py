"""Normal source networks without helpers: topology checks, rate region, simulation.

Strong typicality of a k-tuple of blocks uses per-cell deviation threshold
eps / prod(alphabet sizes) over the sources a decoder hears, the direct
analogue of the two-source definition.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .decoders import exact_type_key, check_search_space, feasible_by_syndrome
from .encoder import CoefficientDist, EncodingMatrix, Quantizer, draw_matrix, encode_and_quantize, rows_for_rate
from .outcomes import DecodeResult, Outcome
from .seeding import encoder_rng, source_rng
from .source_model import PROB_ATOL, RATE_TOL, cell_is_typical, draw_flat_indices, entropy_bits

MAX_DECODER_SOURCES = 16
NSN_LOG2_LIMIT = 20


@dataclass(frozen=True, eq=False)
class MultiPMF:
    """Joint distribution of k sources; ``probs`` has one axis per source."""

    alphabets: tuple[tuple[float, ...], ...]
    probs: np.ndarray

    def __init__(self, alphabets, probs):
        alphs = tuple(tuple(float(v) for v in a) for a in alphabets)
        p = np.array(probs, dtype=float)
        if p.shape != tuple(len(a) for a in alphs):
            raise ValueError(f"probs shape {p.shape} does not match alphabets")
        for a in alphs:
            if not a or any(b <= c for c, b in zip(a, a[1:])):
                raise ValueError("alphabets must be nonempty and strictly increasing")
        if np.any(p < 0) or abs(p.sum() - 1) > PROB_ATOL:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "alphabets", alphs)
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> int:
        return len(self.alphabets)

    def marginal(self, subset: Sequence[int]) -> np.ndarray:
        """Marginal table over ``subset`` with axes in the given order."""
        subset = list(subset)
        drop = tuple(i for i in range(self.k) if i not in subset)
        m = self.probs.sum(axis=drop) if drop else self.probs
        kept = sorted(subset)
        return np.transpose(m, [kept.index(i) for i in subset])

    def entropy(self, subset: Sequence[int]) -> float:
        if not subset:
            return 0.0
        return entropy_bits(self.marginal(subset))

    def conditional_entropy(self, target: Sequence[int], given: Sequence[int]) -> float:
        """H(X_target | X_given) in bits."""
        union = sorted(set(target) | set(given))
        return max(self.entropy(union) - self.entropy(sorted(set(given))), 0.0)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """(k, n) array of alphabet indices of one i.i.d. block."""
        flat = draw_flat_indices(self.probs.ravel(), n, rng)
        return np.stack(np.unravel_index(flat, self.probs.shape))

    @classmethod
    def from_joint(cls, pmf) -> "MultiPMF":
        return cls((pmf.x_alphabet, pmf.y_alphabet), pmf.probs)

    def to_dict(self) -> dict[str, Any]:
        return {"alphabets": [list(a) for a in self.alphabets], "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MultiPMF":
        return cls(d["alphabets"], d["probs"])


@dataclass
class Encoder:
    name: str
    source: str
    rate: float = 0.0
    rows: int | None = None


@dataclass
class DecoderNode:
    name: str
    sources: tuple[str, ...]
    demands: tuple[str, ...]
    direct_sources: tuple[str, ...] = ()


@dataclass
class NSNTopology:
    sources: list[str]
    encoders: list[Encoder]
    decoders: list[DecoderNode]

    def encoder_of(self, source: str) -> Encoder:
        for e in self.encoders:
            if e.source == source:
                return e
        raise KeyError(source)

    def source_index(self, source: str) -> int:
        return self.sources.index(source)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "NSNTopology":
        srcs = [s["name"] if isinstance(s, dict) else str(s) for s in d["sources"]]
        encs = [Encoder(e["name"], e["source"], float(e.get("rate", 0.0)),
                        None if e.get("rows") is None else int(e["rows"])) for e in d["encoders"]]
        decs = []
        for c in d["decoders"]:
            heard = tuple(c["sources"])
            decs.append(DecoderNode(c["name"], heard, tuple(c.get("demands", heard)),
                                    tuple(c.get("direct_sources", ()))))
        return cls(srcs, encs, decs)

    @classmethod
    def from_json(cls, text: str) -> "NSNTopology":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict[str, Any]:
        return {
            "sources": [{"name": s} for s in self.sources],
            "encoders": [{"name": e.name, "source": e.source, "rate": e.rate,
                          **({"rows": e.rows} if e.rows is not None else {})} for e in self.encoders],
            "decoders": [{"name": c.name, "sources": list(c.sources), "demands": list(c.demands),
                          **({"direct_sources": list(c.direct_sources)} if c.direct_sources else {})}
                         for c in self.decoders],
        }


def validate(top: NSNTopology) -> list[str]:
    """Named violations of the NSN-without-helpers conditions; empty means valid."""
    out: set[str] = set()
    known = set(top.sources)
    for c in top.decoders:
        for s in set(c.sources) | set(c.demands) | set(c.direct_sources):
            if s not in known:
                out.add(f"unknown source {s!r} at decoder {c.name!r}")
        for s in sorted(c.direct_sources):
            out.add(f"(i) direct edge from source {s!r} to decoder {c.name!r}")
    enc_sources = [e.source for e in top.encoders]
    if len(top.sources) != len(top.encoders):
        out.add(f"(ii) {len(top.sources)} sources but {len(top.encoders)} encoders")
    for s in sorted(known):
        k = enc_sources.count(s)
        if k != 1:
            out.add(f"(ii) source {s!r} feeds {k} encoders")
    for s in sorted(set(enc_sources) - known):
        out.add(f"(ii) encoder input {s!r} is not a source")
    heard = {}
    for c in top.decoders:
        key = frozenset(c.sources)
        if key in heard:
            a, b = sorted([heard[key], c.name])
            out.add(f"(iii) decoders {a!r} and {b!r} hear the same sources")
        else:
            heard[key] = c.name
    for c1, c2 in itertools.permutations(top.decoders, 2):
        if set(c1.sources) <= set(c2.sources) and not set(c1.demands) <= set(c2.demands):
            out.add(f"(iv) S[{c1.name!r}] within S[{c2.name!r}] but demands are not nested")
    for c in top.decoders:
        for s in sorted(set(c.sources) - set(c.demands)):
            out.add(f"helper: source {s!r} heard but not demanded at decoder {c.name!r}")
        for s in sorted(set(c.demands) - set(c.sources)):
            out.add(f"demand of {s!r} at decoder {c.name!r} without hearing it")
    return sorted(out)


@dataclass
class RateViolation:
    decoder: str
    subset: tuple[str, ...]
    rate_sum: float
    required: float


def rate_region_check(top: NSNTopology, pmf: MultiPMF) -> tuple[bool, list[RateViolation]]:
    """Check sum_{b in L} R_b >= H(X_L | X_{S_c minus L}) for every decoder and nonempty L within S_c."""
    if pmf.k != len(top.sources):
        raise ValueError("pmf has a different number of sources than the topology")
    bad: list[RateViolation] = []
    for c in top.decoders:
        S = list(c.sources)
        if len(S) > MAX_DECODER_SOURCES:
            raise ValueError(f"decoder {c.name!r} hears {len(S)} sources; cap is {MAX_DECODER_SOURCES}")
        for r in range(1, len(S) + 1):
            for L in itertools.combinations(S, r):
                rest = [s for s in S if s not in L]
                need = pmf.conditional_entropy([top.source_index(s) for s in L],
                                               [top.source_index(s) for s in rest])
                have = sum(top.encoder_of(s).rate for s in L)
                if have < need - RATE_TOL:
                    bad.append(RateViolation(c.name, L, have, need))
    return not bad, bad


def inequality_set(top: NSNTopology, pmf: MultiPMF, decoder: str | None = None) -> dict[tuple[str, ...], float]:
    """Right-hand sides H(X_L | X_{S_c minus L}) keyed by L, for one decoder."""
    c = top.decoders[0] if decoder is None else next(d for d in top.decoders if d.name == decoder)
    S = list(c.sources)
    out = {}
    for r in range(1, len(S) + 1):
        for L in itertools.combinations(S, r):
            rest = [s for s in S if s not in L]
            out[L] = pmf.conditional_entropy([top.source_index(s) for s in L],
                                             [top.source_index(s) for s in rest])
    return out


@dataclass
class RoundRecord:
    block: np.ndarray  # (k, n) alphabet indices
    matrices: dict[str, EncodingMatrix]
    syndromes: dict[str, np.ndarray]
    results: dict[str, DecodeResult] = field(default_factory=dict)

    def correct(self, top: NSNTopology, pmf: MultiPMF, decoder: str) -> bool:
        r = self.results[decoder]
        if not r.ok:
            return False
        c = next(d for d in top.decoders if d.name == decoder)
        for s, val in zip(c.sources, r.value):
            i = top.source_index(s)
            if not np.array_equal(np.asarray(pmf.alphabets[i])[self.block[i]], val):
                return False
        return True


def _tuple_search(feasible: list[np.ndarray], sizes: list[int], marginal: np.ndarray, n: int,
                  eps: float, mode: str) -> tuple[list[tuple[int, ...]], int]:
    """Scan the product of per-source feasible sets in lexicographic order.

    ``mode="typicality"`` returns up to two strongly typical tuples;
    ``mode="med"`` returns every tuple of minimal empirical joint entropy.
    """
    cells = int(np.prod(sizes))
    strides = [int(np.prod(sizes[i + 1:])) for i in range(len(sizes))]
    thr = eps / cells
    flat_p = marginal.ravel()
    total = int(np.prod([f.shape[0] for f in feasible]))
    if total == 0:
        return [], 0
    head, tail = feasible[0], feasible[1:]
    # combined codes for the product of the tail sets, shape (T, n)
    tail_codes = np.zeros((1, n), dtype=np.int64)
    tail_shape = []
    for f, st in zip(tail, strides[1:]):
        tail_codes = (tail_codes[:, None, :] + f[None, :, :].astype(np.int64) * st).reshape(-1, n)
        tail_shape.append(f.shape[0])
    found: list[tuple[int, ...]] = []
    best_key = -1
    examined = 0
    for i in range(head.shape[0]):
        codes = tail_codes + head[i][None, :].astype(np.int64) * strides[0]
        counts = np.stack([(codes == cidx).sum(axis=1) for cidx in range(cells)], axis=1)
        examined += codes.shape[0]
        if mode == "typicality":
            ok = np.all(cell_is_typical(counts, n, flat_p[None], thr), axis=1)
            for t in np.nonzero(ok)[0][:2]:
                found.append((i, *np.unravel_index(int(t), tail_shape)) if tail_shape else (i,))
            if len(found) >= 2:
                return found[:2], examined
        else:
            c = counts.astype(float)
            s = np.where(c > 0, c * np.log2(np.maximum(c, 1)), 0.0).sum(axis=1)
            for t in np.nonzero(s >= s.max() - 1e-6)[0]:
                key = exact_type_key(counts[t])
                idx = (i, *np.unravel_index(int(t), tail_shape)) if tail_shape else (i,)
                if key > best_key:
                    best_key, found = key, [idx]
                elif key == best_key:
                    found.append(idx)
    return found, examined


def decode_at(top: NSNTopology, pmf: MultiPMF, decoder: DecoderNode, syndromes: dict[str, np.ndarray],
              matrices: dict[str, EncodingMatrix], q: Quantizer, eps: float, mode: str = "typicality",
              max_log2_candidates: float = NSN_LOG2_LIMIT) -> DecodeResult:
    """Exhaustive tuple decoding at one decoder from the syndromes it hears."""
    S = list(decoder.sources)
    idx = [top.source_index(s) for s in S]
    sizes = [len(pmf.alphabets[i]) for i in idx]
    n = q.n
    check_search_space(n * sum(math.log2(k) for k in sizes), max_log2_candidates, f"decoder {decoder.name}")
    feasible = []
    for s, i in zip(S, idx):
        enc = top.encoder_of(s)
        feasible.append(feasible_by_syndrome(matrices[enc.name], q, syndromes[enc.name], pmf.alphabets[i]))
    found, examined = _tuple_search(feasible, sizes, pmf.marginal(idx), n, eps, mode)
    examined += sum(k**n for k in sizes)

    def value_of(t):
        return tuple(np.asarray(pmf.alphabets[i])[feasible[pos][t[pos]]] for pos, i in enumerate(idx))

    if not found:
        return DecodeResult(Outcome.NONE_FOUND, candidates_examined=examined)
    sols = [value_of(t) for t in found[:2]]
    if len(found) == 1:
        return DecodeResult(Outcome.UNIQUE, value=sols[0], candidates_examined=examined, solutions=sols)
    return DecodeResult(Outcome.MULTIPLE, candidates_examined=examined, solutions=sols)


def simulate_round(top: NSNTopology, pmf: MultiPMF, n: int, eps: float, seed: int,
                   mode: str = "typicality", dist: CoefficientDist | None = None) -> RoundRecord:
    """One block through every encoder and every decoder of the network.

    Encoder ``b`` uses ``rows`` when given, else ceil(n (R_b + 3 eps) / (0.5 log2 n)) rows.
    """
    if mode not in ("typicality", "med"):
        raise ValueError(f"unknown mode {mode!r}")
    problems = validate(top)
    if problems:
        raise ValueError("invalid topology: " + "; ".join(problems))
    block = pmf.sample(n, source_rng(seed))
    q = Quantizer(n, eps)
    matrices, synd = {}, {}
    for b, enc in enumerate(top.encoders):
        m = enc.rows if enc.rows is not None else rows_for_rate(n, enc.rate, eps)
        D = draw_matrix(m, n, dist, encoder_rng(seed, b))
        i = top.source_index(enc.source)
        matrices[enc.name] = D
        synd[enc.name] = encode_and_quantize(D, np.asarray(pmf.alphabets[i])[block[i]], q)
    rec = RoundRecord(block, matrices, synd)
    for c in top.decoders:
        rec.results[c.name] = decode_at(top, pmf, c, synd, matrices, q, eps, mode)
    return rec
