import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from realsw import (
    CoefficientDist,
    EncodingMatrix,
    Quantizer,
    code_params,
    draw_matrix,
    encode,
    encode_and_quantize,
    quantize,
    rows_for_rate,
)
from realsw.encoder import syndromes

PM1 = CoefficientDist.rademacher()


# -- coefficient distributions ------------------------------------------------------

def test_single_value_distribution_rejected():
    with pytest.raises(ValueError):
        CoefficientDist((1.0,), (1.0,))
    with pytest.raises(ValueError):
        CoefficientDist((1.0, 2.0), (1.0, 0.0), allow_nonzero_mean=True)


def test_nonzero_mean_needs_override():
    with pytest.raises(ValueError):
        CoefficientDist((0.0, 1.0), (0.5, 0.5))
    d = CoefficientDist((0.0, 1.0), (0.5, 0.5), allow_nonzero_mean=True)
    assert d.mean == 0.5


def test_derived_constants():
    d = CoefficientDist((-2.0, 0.0, 1.0), (0.25, 0.25, 0.5))
    assert d.mean == 0
    assert d.p_pm == 0.25
    assert d.alpha == 2.0
    assert d.variance == pytest.approx(0.25 * 4 + 0.5 * 1)
    assert d.min_abs_nonzero == 1.0
    assert PM1.p_pm == 0.5 and PM1.alpha == 1.0


# -- matrices -----------------------------------------------------------------------

def test_draw_matrix_deterministic_and_in_set():
    a = draw_matrix(2, 3, PM1, seed=42)
    b = draw_matrix(2, 3, PM1, seed=42)
    assert a.entries.shape == (2, 3)
    assert np.array_equal(a.entries, b.entries)
    assert set(np.unique(a.entries)) <= {-1, 1}


def test_draw_matrix_row_means():
    D = draw_matrix(3, 10_000, PM1, seed=1)
    assert np.all(np.abs(D.entries.mean(axis=1)) <= 0.05)


def test_matrix_rejects_foreign_entries():
    with pytest.raises(ValueError):
        EncodingMatrix(np.array([[1, 2]]), PM1)


def test_matrix_roundtrip_dict():
    D = draw_matrix(3, 5, CoefficientDist((-1.5, 0.5, 1.0), (0.3, 0.5, 0.2)), seed=7)
    E = EncodingMatrix.from_dict(D.to_dict())
    assert np.array_equal(D.entries, E.entries) and E.seed == 7
    assert E.dist.values == D.dist.values


# -- quantizer and code parameters ---------------------------------------------------

def test_code_params_hand_values():
    p = code_params(100, 0.1, 0.49991)
    assert p.m == 25
    assert p.bits_per_component == 5
    assert p.total_bits == 125
    q = p.quantizer
    assert q.step == pytest.approx(1.26191, abs=1e-5)
    assert q.range_bound == pytest.approx(15.8489, abs=1e-4)
    assert q.levels == 26


def test_code_params_zero_entropy():
    for n in (2, 10, 100):
        p = code_params(n, 0.1, 0.0)
        assert p.m == math.ceil(3 * 0.1 * n / (0.5 * math.log2(n)))
        assert p.m >= 1


def test_code_params_rejects_short_blocks():
    with pytest.raises(ValueError):
        code_params(1, 0.1, 0.5)
    with pytest.raises(ValueError):
        rows_for_rate(1, 0.5, 0.1)


def test_quantize_examples():
    q = Quantizer(100, 0.1)
    assert quantize([0.0], q).tolist() == [12]
    assert quantize([-q.range_bound], q).tolist() == [0]
    assert quantize([20.0], q).tolist() == [25]
    assert quantize([-1e9, 1e9], q).tolist() == [0, 25]


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 5000), st.floats(0.01, 1.0))
def test_quantizer_invariants(n, eps):
    q = Quantizer(n, eps)
    assert q.step > 0 and q.levels >= 1
    assert 2 ** q.bits_per_component >= q.levels


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 500), st.floats(0.05, 0.5),
       st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=30))
def test_quantize_monotone_and_cells_consistent(n, eps, us):
    q = Quantizer(n, eps)
    us = sorted(us)
    idx = quantize(us, q)
    assert np.all(np.diff(idx) >= 0)
    assert idx.min() >= 0 and idx.max() <= q.levels - 1
    for u, k in zip(us, idx):
        lo, hi = q.cell(int(k))
        assert lo <= u < hi


def test_cells_partition_the_line():
    q = Quantizer(50, 0.2)
    for k in range(q.levels - 1):
        assert q.cell(k)[1] == q.cell(k + 1)[0]
    assert q.cell(0)[0] == -math.inf and q.cell(q.levels - 1)[1] == math.inf


@pytest.mark.parametrize("eps,h", [(0.1, 0.49991), (0.05, 0.2), (0.3, 1.0)])
def test_bits_per_symbol_sandwich(eps, h):
    # dropping both ceilings gives the floor (1 + 4 eps)(h + 3 eps); each ceiling adds at most one
    limit = (1 + 4 * eps) * (h + 3 * eps)
    for n in [2 ** k for k in range(6, 13)]:
        rate = code_params(n, eps, h).rate_bits_per_symbol
        m_real = n * (h + 3 * eps) / (0.5 * math.log2(n))
        b_real = (0.5 + 2 * eps) * math.log2(n)
        assert limit - 1e-9 <= rate <= (m_real + 1) * (b_real + 1) / n + 1e-9


def test_rho_ratio_is_reported():
    p = code_params(100, 0.1, 0.49991)
    assert p.rho_ratio(0.49991) == pytest.approx((125 - 49.991) / 10)


# -- encoding ------------------------------------------------------------------------

def test_encode_examples():
    D = EncodingMatrix(np.array([[1, -1, 1]]), PM1)
    assert encode(D, [1, 1, 0]).tolist() == [0]
    D = draw_matrix(4, 6, PM1, seed=0)
    assert encode(D, np.zeros(6)).tolist() == [0, 0, 0, 0]
    eye = EncodingMatrix(np.eye(5, dtype=int), CoefficientDist((0.0, 1.0), (0.5, 0.5), allow_nonzero_mean=True))
    y = np.array([3, 0, 1, 2, 1])
    assert encode(eye, y).tolist() == y.tolist()


def test_encode_dimension_mismatch():
    D = draw_matrix(2, 3, PM1, seed=0)
    with pytest.raises(ValueError):
        encode(D, [1, 0])


def test_encode_and_quantize_is_composition():
    rng = np.random.default_rng(0)
    q = Quantizer(20, 0.2)
    assert np.array_equal(encode_and_quantize(draw_matrix(3, 20, seed=1), np.zeros(20), q),
                          quantize(np.zeros(3), q))
    for _ in range(1000):
        D = draw_matrix(int(rng.integers(1, 6)), 20, PM1, seed=rng)
        y = rng.integers(0, 3, 20)
        assert np.array_equal(encode_and_quantize(D, y, q), quantize(encode(D, y), q))


def test_integer_path_equals_float_path():
    rng = np.random.default_rng(2)
    for _ in range(200):
        D = draw_matrix(5, 30, PM1, seed=rng)
        y = rng.integers(-4, 5, 30)
        exact = encode(D, y)
        assert exact.dtype.kind == "i"
        assert np.array_equal(exact, D.entries.astype(float) @ y.astype(float))


def test_real_batch_matches_single_vectors():
    rng = np.random.default_rng(3)
    dist = CoefficientDist((-0.7, 0.3, 0.4), (0.35, 0.15, 0.5))
    D = draw_matrix(4, 12, dist, seed=5)
    Y = rng.choice([0.0, 0.1, 1.3], size=(50, 12))
    batch = syndromes(D, Y)
    for i in range(50):
        assert np.array_equal(batch[i], encode(D, Y[i]))


def test_equal_inputs_quantize_equally():
    D = draw_matrix(6, 15, seed=8)
    q = Quantizer(15, 0.3)
    y = np.random.default_rng(1).integers(0, 2, 15)
    assert np.array_equal(encode_and_quantize(D, y, q), encode_and_quantize(D, y.copy(), q))


def test_quantizer_rejects_indices_beyond_int64():
    with pytest.raises(ValueError):
        Quantizer(8, 50.0)
