"""End-to-end acceptance checks, one printed PASS/FAIL line per criterion."""
import itertools
import math
import time

import numpy as np

from realsw.bounds import (
    bound_verdict,
    constant_free_collision_bound,
    empirical_atypicality,
    empirical_small_difference,
    empirical_sum_tail,
    in_constant_free_regime,
    lemma1_bound,
    p1_bound,
)
from realsw.decoders import (
    extract_stage_vector,
    joint_decode,
    multistage_decode,
    multistage_encode,
    plan_stages,
    reconstruct_from_stages,
    typicality_decode,
)
from realsw.encoder import CoefficientDist, Quantizer, code_params, draw_matrix, encode_and_quantize, rows_for_rate
from realsw.harness import ExperimentConfig, run_campaign, summary_csv, trials_jsonl, emit_plot_data
from realsw.ip_solver import ip_decode
from realsw.nsn import DecoderNode, Encoder, MultiPMF, NSNTopology, inequality_set, rate_region_check, simulate_round
from realsw.outcomes import Outcome
from realsw.seeding import encoder_rng, source_rng
from realsw.source_model import JointPMF, entropies, in_rate_region, sample_pair
from realsw.stats import intervals_overlap

import oracles
from conftest import ASYMMETRIC, random_pmf


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}")


# 1 ------------------------------------------------------------------------------

def test_criterion_1_ip_matches_exhaustive(capsys):
    pmfs = [JointPMF.dsbs(0.11), JointPMF.dsbs(0.25), ASYMMETRIC]
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    mismatches, tally = [], {o: 0 for o in Outcome}
    for i in range(1000):
        pmf = pmfs[i % 3]
        n = int(rng.integers(2, 13))
        eps = float(rng.choice([0.2, 0.4, 0.8, 1.6]))
        q = Quantizer(n, eps)
        D = draw_matrix(int(rng.integers(0, 6)), n, seed=rng)
        s = sample_pair(pmf, n, rng)
        u = encode_and_quantize(D, s.y, q)
        if i % 10 == 9:
            u = u.copy()
            u[...] = (u + rng.integers(1, 3, size=u.shape)) % q.levels
        ex = typicality_decode(s.x, u, D, pmf, eps, q)
        ip = ip_decode(s.x, u, D, pmf, eps, q)
        tally[ex.outcome] += 1
        same = ip.outcome is ex.outcome
        if same and ex.outcome is Outcome.UNIQUE:
            same = np.array_equal(np.asarray(ip.value, float), np.asarray(ex.value, float))
        elif same and ex.outcome is Outcome.MULTIPLE:
            admissible = {tuple(v) for v in oracles.typicality_solutions(s.x, u, D, pmf, eps, q)}
            wit = [tuple(float(v) for v in w) for w in ip.solutions]
            same = len(set(wit)) == 2 and all(w in admissible for w in wit)
        if not same:
            mismatches.append(i)
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 300
    counts = ", ".join(f"{o.value}={c}" for o, c in tally.items())
    report(capsys, 1, ok, f"1000 instances ({counts}), {len(mismatches)} mismatches, {elapsed:.0f}s")
    assert not mismatches
    assert elapsed < 300


# 2 ------------------------------------------------------------------------------

def test_criterion_2_grouping_identity(capsys):
    rng = np.random.default_rng(202)
    worst = 0.0
    for i in range(200):
        ky = 3 + i % 3
        pmf = random_pmf(rng, int(rng.integers(1, 5)), ky)
        plan = plan_stages(pmf, 0.1, 16)
        worst = max(worst, abs(plan.grouped_entropy() - entropies(pmf)["H_Y_given_X"]))
    ok = worst <= 1e-9
    report(capsys, 2, ok, f"200 pmfs, |Y| in 3..5, max deviation {worst:.2e} (limit 1e-9)")
    assert ok


# 3 ------------------------------------------------------------------------------

def test_criterion_3_multistage_roundtrip(capsys):
    pmf = JointPMF((0, 1), (0, 1, 2), [[0.3, 0.1, 0.1], [0.05, 0.15, 0.3]])
    n, eps = 9, 1.0
    unique = wrong = 0
    for seed in range(500):
        s = sample_pair(pmf, n, source_rng(seed))
        code = multistage_encode(s.y, pmf, eps, seed=encoder_rng(seed, 1))
        res = multistage_decode(s.x, code)
        if res.ok:
            unique += 1
            wrong += not np.array_equal(res.value, s.y)
    alphabet = (0.0, 1.0, 2.0)
    inversion_failures = checked = 0
    for length in range(1, 9):
        plan = plan_stages(JointPMF.uniform((0,), alphabet), eps, length)
        for y in itertools.product(alphabet, repeat=length):
            y = np.array(y)
            vecs = [extract_stage_vector(y, plan, i) for i in range(2)]
            inversion_failures += not np.array_equal(reconstruct_from_stages(vecs, plan.order, length), y)
            checked += 1
    ok = wrong == 0 and unique > 0 and inversion_failures == 0
    report(capsys, 3, ok, f"{unique}/500 all-stage Unique, {wrong} wrong reconstructions; "
                          f"{checked} sequences (n<=8) inverted, {inversion_failures} failures")
    assert ok


# 4 ------------------------------------------------------------------------------

def test_criterion_4_error_trend(capsys):
    cfg = ExperimentConfig.from_dict({"scheme": "one_sided", "pmf": {"dsbs": 0.11}, "n_grid": [8, 16],
                                      "eps": 0.5, "trials": 5000, "seed": 4})
    s8, s16 = run_campaign(cfg).summary
    i8, i16 = s8.wilson99, s16.wilson99
    ok = s16.error_rate <= s8.error_rate or intervals_overlap(i8, i16)
    report(capsys, 4, ok, f"eps=0.5, 5000 trials each: n=8 {s8.error_rate:.4f} [{i8[0]:.4f},{i8[1]:.4f}], "
                          f"n=16 {s16.error_rate:.4f} [{i16[0]:.4f},{i16[1]:.4f}]")
    assert ok


# 5 ------------------------------------------------------------------------------

def test_criterion_5_bounds(capsys):
    notes, bad, informative = [], [], 0
    pmf = JointPMF.dsbs(0.11)
    for n in (2000, 5000, 20000):
        for eps in (1.0, 1.5):
            b = p1_bound(n, eps, 2, 2)
            k = empirical_atypicality(pmf, n, eps, 10_000, seed=[5, n, int(eps * 10)])
            v = bound_verdict(k, 10_000, b)
            informative += v != "vacuous"
            if v == "fail":
                bad.append(f"p1 n={n} eps={eps}")
    notes.append(f"p1 non-vacuous points={informative}")

    dists = {"pm1": CoefficientDist.rademacher(),
             "zero_heavy": CoefficientDist((-1.0, 0.0, 1.0), (0.25, 0.5, 0.25))}
    for name, dist in dists.items():
        q = Quantizer(64, 0.3)
        assert in_constant_free_regime(q, 1.0, dist)
        N = 100_000
        k = empirical_small_difference(1, q.step, N, dist, diff_value=1.0, seed=[5, 1])
        cap = constant_free_collision_bound(dist)
        sigma = math.sqrt(cap * (1 - cap) / N)
        if k / N > cap + 3 * sigma:
            bad.append(f"collision {name}")
    notes.append("collision t=1 on 2 coefficient sets")

    lemma_pass = 0
    for n in (50, 100, 200, 400):
        for frac in (0.1, 0.2, 0.3, 0.5):
            A = frac * n
            k = empirical_sum_tail(n, A, 100_000, seed=[5, n, int(frac * 10)])
            v = bound_verdict(k, 100_000, lemma1_bound(n, 2, 1.0, A))
            lemma_pass += v == "pass"
            if v == "fail":
                bad.append(f"lemma1 n={n} A={A}")
    notes.append(f"lemma1 16 grid points, {lemma_pass} with UCB below bound")
    ok = not bad and informative > 0 and lemma_pass > 0
    report(capsys, 5, ok, "; ".join(notes) + (f"; violations: {bad}" if bad else ""))
    assert ok


# 6 ------------------------------------------------------------------------------

def test_criterion_6_rate_accounting(capsys):
    p = code_params(100, 0.1, 0.49991)
    hand = p.m == 25 and p.total_bits == 125
    grid = [2**k for k in range(6, 13)]
    per_symbol = [code_params(n, 0.1, 0.49991).rate_bits_per_symbol for n in grid]
    monotone = all(b <= a for a, b in zip(per_symbol, per_symbol[1:]))
    ok = hand and monotone
    seq = ", ".join(f"{n}:{r:.3f}" for n, r in zip(grid, per_symbol))
    report(capsys, 6, ok, f"n=100 gives m={p.m}, {p.total_bits} bits (hand values {'match' if hand else 'differ'}); "
                          f"bits/n over n=64..4096 {'non-increasing' if monotone else 'NOT non-increasing'}: {seq}")
    assert hand
    assert monotone


# 7 ------------------------------------------------------------------------------

def test_criterion_7_med_universality(capsys):
    import inspect
    from realsw.decoders import min_entropy_decode

    params = set(inspect.signature(min_entropy_decode).parameters)
    no_pmf = not params & {"pmf", "probs", "distribution"}
    base = {"scheme": "joint", "pmf": {"dsbs": 0.11}, "n_grid": [8], "eps": 0.3,
            "rate_x": 1.0, "rate_y": 0.6, "trials": 500, "seed": 7}
    typ = run_campaign(ExperimentConfig.from_dict(base)).summary[0]
    med = run_campaign(ExperimentConfig.from_dict({**base, "decoder": "med"})).summary[0]
    pt, pm = typ.error_rate, med.error_rate
    lo, hi = typ.wilson99
    within = pm <= pt + 2 * (hi - pt)
    two_sided = pt - 2 * (pt - lo) <= pm <= pt + 2 * (hi - pt)
    ok = no_pmf and within
    report(capsys, 7, ok, f"no pmf argument: {no_pmf}; typicality {pt:.3f} [{lo:.3f},{hi:.3f}], MED {pm:.3f}; "
                          f"MED <= typ + 2x band: {within}; inside two-sided band: {two_sided}")
    assert ok


# 8 ------------------------------------------------------------------------------

def test_criterion_8_nsn_reduction(capsys):
    pmf = JointPMF.dsbs(0.11)
    mp = MultiPMF.from_joint(pmf)
    top = NSNTopology(["x", "y"], [Encoder("ex", "x", 1.0), Encoder("ey", "y", 0.5)],
                      [DecoderNode("c", ("x", "y"), ("x", "y"))])
    n, eps = 8, 0.5
    q = Quantizer(n, eps)
    verdict_diff = 0
    for seed in range(200):
        got = simulate_round(top, mp, n, eps, seed).results["c"]
        s = sample_pair(pmf, n, source_rng(seed))
        D1 = draw_matrix(rows_for_rate(n, 1.0, eps), n, None, encoder_rng(seed, 0))
        D2 = draw_matrix(rows_for_rate(n, 0.5, eps), n, None, encoder_rng(seed, 1))
        want = joint_decode(encode_and_quantize(D1, s.x, q), encode_and_quantize(D2, s.y, q), D1, D2, pmf, eps, q)
        same = got.outcome is want.outcome
        if same and want.ok:
            same = all(np.array_equal(a, b) for a, b in zip(got.value, want.value))
        verdict_diff += not same

    rng = np.random.default_rng(808)
    region_diff = 0
    for _ in range(1000):
        p2 = random_pmf(rng, int(rng.integers(2, 4)), int(rng.integers(2, 4)))
        h = entropies(p2)
        rx = float(rng.uniform(0, 1.2 * h["H_XY"]))
        ry = float(rng.uniform(0, 1.2 * h["H_XY"]))
        t2 = NSNTopology(["x", "y"], [Encoder("ex", "x", rx), Encoder("ey", "y", ry)],
                         [DecoderNode("c", ("x", "y"), ("x", "y"))])
        region_diff += rate_region_check(t2, MultiPMF.from_joint(p2))[0] != in_rate_region(rx, ry, p2)

    probs = np.zeros((2, 2, 2))
    probs[0, 0, 0] = probs[1, 1, 1] = 0.5
    chain = NSNTopology(["a", "b", "c"], [Encoder(f"e{s}", s, 1.0) for s in "abc"],
                        [DecoderNode("d", ("a", "b", "c"), ("a", "b", "c"))])
    ineq = inequality_set(chain, MultiPMF([(0, 1)] * 3, probs))
    hand = {L: (1.0 if len(L) == 3 else 0.0) for r in (1, 2, 3) for L in itertools.combinations("abc", r)}
    exact = ineq == hand
    ok = verdict_diff == 0 and region_diff == 0 and exact
    report(capsys, 8, ok, f"{verdict_diff}/200 verdict differences vs joint decoding; "
                          f"{region_diff}/1000 rate-region disagreements; 3-source inequalities exact: {exact}")
    assert ok


# 9 ------------------------------------------------------------------------------

def test_criterion_9_reproducibility(capsys):
    configs = [
        {"scheme": "one_sided", "pmf": {"dsbs": 0.11}, "n_grid": [8, 10], "eps": 0.5, "trials": 30,
         "overlays": ["p1", "phi2"]},
        {"scheme": "one_sided", "pmf": {"dsbs": 0.11}, "n_grid": [8], "eps": 0.5, "trials": 20, "decoder": "ip"},
        {"scheme": "joint", "pmf": {"dsbs": 0.11}, "n_grid": [6], "eps": 0.3, "rate_x": 1.0, "rate_y": 0.6,
         "trials": 20, "decoder": "med"},
        {"scheme": "multistage", "n_grid": [9], "eps": 1.0, "trials": 20,
         "pmf": {"x_alphabet": [0, 1], "y_alphabet": [0, 1, 2], "probs": [[0.3, 0.1, 0.1], [0.05, 0.15, 0.3]]}},
    ]
    differ = []
    for d in configs:
        cfg = ExperimentConfig.from_dict({**d, "seed": 9})
        outs = []
        for threads in (1, 4, 1, 2):
            r = run_campaign(cfg, threads=threads)
            outs.append(trials_jsonl(r) + summary_csv(r) + emit_plot_data(r.summary, cfg.overlays, cfg))
        if len(set(outs)) != 1:
            differ.append(d["scheme"])
    ok = not differ
    report(capsys, 9, ok, f"{len(configs)} campaigns x threads (1,4,1,2): "
                          f"{'byte-identical' if ok else 'differences in ' + str(differ)}")
    assert ok
