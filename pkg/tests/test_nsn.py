import itertools
import math

import numpy as np
import pytest

from realsw.decoders import joint_decode
from realsw.encoder import Quantizer, draw_matrix, encode_and_quantize, rows_for_rate
from realsw.nsn import (
    DecoderNode,
    Encoder,
    MultiPMF,
    NSNTopology,
    decode_at,
    inequality_set,
    rate_region_check,
    simulate_round,
    validate,
)
from realsw.outcomes import Outcome
from realsw.seeding import encoder_rng, source_rng
from realsw.source_model import JointPMF, in_rate_region, sample_pair

from conftest import random_pmf


def two_source(rx, ry, rows=(None, None)):
    return NSNTopology(
        ["x", "y"],
        [Encoder("ex", "x", rx, rows[0]), Encoder("ey", "y", ry, rows[1])],
        [DecoderNode("c", ("x", "y"), ("x", "y"))],
    )


def chain3(rates=(1.0, 0.05, 0.05), rows=(None, None, None)):
    return NSNTopology(
        ["a", "b", "c"],
        [Encoder(f"e{s}", s, r, m) for s, r, m in zip("abc", rates, rows)],
        [DecoderNode("d", ("a", "b", "c"), ("a", "b", "c"))],
    )


def identical_sources(k, p):
    probs = np.zeros((2,) * k)
    probs[(0,) * k] = p
    probs[(1,) * k] = 1 - p
    return MultiPMF([(0, 1)] * k, probs)


# -- validate -------------------------------------------------------------------

def test_single_source_network_is_valid():
    top = NSNTopology(["s"], [Encoder("e", "s", 1.0)], [DecoderNode("c", ("s",), ("s",))])
    assert validate(top) == []


def test_duplicate_hearing_sets_flagged():
    top = NSNTopology(
        ["a", "b"],
        [Encoder("ea", "a"), Encoder("eb", "b")],
        [DecoderNode("c1", ("a", "b"), ("a", "b")), DecoderNode("c2", ("b", "a"), ("a", "b"))],
    )
    assert any(v.startswith("(iii)") for v in validate(top))


def test_helper_source_reported():
    top = NSNTopology(
        ["1", "2"],
        [Encoder("e1", "1"), Encoder("e2", "2")],
        [DecoderNode("c", ("1", "2"), ("1",))],
    )
    problems = validate(top)
    assert any("helper" in v and "'2'" in v for v in problems)


def test_direct_edge_and_encoder_count_flagged():
    top = NSNTopology(
        ["a", "b"],
        [Encoder("ea", "a"), Encoder("ea2", "a")],
        [DecoderNode("c", ("a",), ("a",), direct_sources=("a",))],
    )
    problems = validate(top)
    assert any(v.startswith("(i) ") for v in problems)
    assert any(v.startswith("(ii)") for v in problems)


def test_nested_hearing_needs_nested_demands():
    top = NSNTopology(
        ["a", "b"],
        [Encoder("ea", "a"), Encoder("eb", "b")],
        [DecoderNode("small", ("a",), ("a",)), DecoderNode("big", ("a", "b"), ("b",))],
    )
    assert any(v.startswith("(iv)") for v in validate(top))


def test_validate_is_order_independent():
    top = NSNTopology(
        ["a", "b", "c"],
        [Encoder("ea", "a"), Encoder("eb", "b"), Encoder("ec", "c"), Encoder("ec2", "c")],
        [
            DecoderNode("c1", ("a", "b"), ("a",)),
            DecoderNode("c2", ("b", "a"), ("a", "b")),
            DecoderNode("c3", ("c",), ("c",), direct_sources=("c",)),
        ],
    )
    base = validate(top)
    assert base
    for srcs in itertools.permutations(top.sources):
        for decs in itertools.permutations(top.decoders):
            for encs in (top.encoders, top.encoders[::-1]):
                assert validate(NSNTopology(list(srcs), list(encs), list(decs))) == base


def test_topology_json_roundtrip():
    top = chain3()
    back = NSNTopology.from_json(__import__("json").dumps(top.to_dict()))
    assert back.to_dict() == top.to_dict()


# -- rate region ----------------------------------------------------------------

def test_independent_uniform_at_marginal_entropies():
    pmf = MultiPMF([(0, 1), (0, 1)], np.full((2, 2), 0.25))
    ok, viol = rate_region_check(two_source(1.0, 1.0), pmf)
    assert ok and viol == []


def test_independent_uniform_rate_too_low():
    pmf = MultiPMF([(0, 1), (0, 1)], np.full((2, 2), 0.25))
    ok, viol = rate_region_check(two_source(0.4, 1.0), pmf)
    assert not ok
    subsets = {v.subset for v in viol}
    assert ("x",) in subsets
    v = next(v for v in viol if v.subset == ("x",))
    assert v.rate_sum == pytest.approx(0.4)
    assert v.required == pytest.approx(1.0)


def test_identical_chain_needs_only_total_entropy():
    ok, viol = rate_region_check(chain3(), identical_sources(3, 0.5))
    assert ok, viol


def test_identical_chain_inequalities_by_hand():
    ineq = inequality_set(chain3(), identical_sources(3, 0.5))
    assert len(ineq) == 7
    for L, rhs in ineq.items():
        assert rhs == (1.0 if len(L) == 3 else 0.0)


def test_rate_region_matches_two_source_predicate():
    rng = np.random.default_rng(8)
    for _ in range(200):
        pmf = random_pmf(rng, 2, 3)
        mp = MultiPMF.from_joint(pmf)
        rx, ry = rng.uniform(0, 2, size=2)
        assert rate_region_check(two_source(rx, ry), mp)[0] == in_rate_region(rx, ry, pmf)


def test_too_many_sources_rejected():
    k = 17
    names = [f"s{i}" for i in range(k)]
    top = NSNTopology(names, [Encoder(f"e{s}", s) for s in names], [DecoderNode("c", tuple(names), tuple(names))])
    pmf = MultiPMF([(0.0,)] * k, np.ones((1,) * k))
    with pytest.raises(ValueError):
        rate_region_check(top, pmf)


def test_marginal_axis_order():
    rng = np.random.default_rng(3)
    p = rng.random((2, 3, 4))
    pmf = MultiPMF([(0, 1), (0, 1, 2), (0, 1, 2, 3)], p / p.sum())
    assert np.allclose(pmf.marginal([2, 0]), pmf.probs.sum(axis=1).T)


# -- simulation -----------------------------------------------------------------

def test_degenerate_sources_decode_uniquely():
    probs = np.zeros((2, 2, 2))
    probs[1, 0, 1] = 1.0
    pmf = MultiPMF([(0, 1)] * 3, probs)
    top = chain3(rates=(0.0, 0.0, 0.0), rows=(0, 0, 0))
    rec = simulate_round(top, pmf, 6, 0.3, seed=4)
    assert rec.results["d"].outcome is Outcome.UNIQUE
    assert rec.correct(top, pmf, "d")


def test_no_rows_gives_multiple():
    pmf = MultiPMF([(0, 1)] * 3, np.full((2, 2, 2), 0.125))
    top = chain3(rows=(0, 0, 0))
    rec = simulate_round(top, pmf, 4, 4.0, seed=1)
    assert rec.results["d"].outcome is Outcome.MULTIPLE


def test_invalid_topology_rejected_by_simulation():
    top = NSNTopology(["a"], [Encoder("e", "a")], [DecoderNode("c", ("a",), ("a",), direct_sources=("a",))])
    with pytest.raises(ValueError):
        simulate_round(top, MultiPMF([(0, 1)], [0.5, 0.5]), 4, 0.3, seed=0)


def test_search_cap_enforced():
    pmf = MultiPMF([(0, 1)] * 3, np.full((2, 2, 2), 0.125))
    with pytest.raises(ValueError):
        simulate_round(chain3(rows=(1, 1, 1)), pmf, 8, 0.3, seed=0)


def _joint_reference(pmf, rx, ry, n, eps, seed):
    pair = sample_pair(pmf, n, source_rng(seed))
    q = Quantizer(n, eps)
    D1 = draw_matrix(rows_for_rate(n, rx, eps), n, None, encoder_rng(seed, 0))
    D2 = draw_matrix(rows_for_rate(n, ry, eps), n, None, encoder_rng(seed, 1))
    u1 = encode_and_quantize(D1, pair.x, q)
    u2 = encode_and_quantize(D2, pair.y, q)
    return joint_decode(u1, u2, D1, D2, pmf, eps, q)


@pytest.mark.parametrize("seed", range(20))
def test_two_source_network_matches_joint_decoder(seed):
    pmf = JointPMF.dsbs(0.11)
    n, eps = 8, 0.5
    rec = simulate_round(two_source(1.0, 0.5), MultiPMF.from_joint(pmf), n, eps, seed)
    got = rec.results["c"]
    want = _joint_reference(pmf, 1.0, 0.5, n, eps, seed)
    assert got.outcome is want.outcome
    if want.ok:
        assert np.array_equal(got.value[0], want.value[0])
        assert np.array_equal(got.value[1], want.value[1])


def test_med_mode_recovers_identical_sources():
    pmf = identical_sources(2, 0.8)
    top = two_source(0.0, 0.0, rows=(3, 3))
    rec = simulate_round(top, pmf, 6, 0.3, seed=2, mode="med")
    assert rec.results["c"].outcome in (Outcome.UNIQUE, Outcome.MULTIPLE)
    if rec.results["c"].ok:
        a, b = rec.results["c"].value
        assert np.array_equal(a, b)


def test_decode_at_reports_work():
    pmf = identical_sources(2, 0.5)
    top = two_source(1.0, 1.0)
    rec = simulate_round(top, pmf, 5, 0.3, seed=0)
    r = decode_at(top, pmf, top.decoders[0], rec.syndromes, rec.matrices, Quantizer(5, 0.3), 0.3)
    assert r.candidates_examined >= 2 * 2**5
    assert r.outcome is rec.results["c"].outcome


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        simulate_round(two_source(1, 1), identical_sources(2, 0.5), 4, 0.3, 0, mode="ml")


def test_conditional_entropy_of_independent_pair():
    pmf = MultiPMF([(0, 1), (0, 1)], np.outer([0.2, 0.8], [0.5, 0.5]))
    h = -(0.2 * math.log2(0.2) + 0.8 * math.log2(0.8))
    assert pmf.conditional_entropy([0], [1]) == pytest.approx(h, abs=1e-12)
