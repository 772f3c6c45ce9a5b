"""Monte Carlo campaigns over block lengths, with reproducible outputs."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import bounds as B
from .decoders import joint_decode, min_entropy_decode, multistage_decode, multistage_encode, typicality_decode
from .encoder import CoefficientDist, Quantizer, code_params, draw_matrix, encode_and_quantize, rows_for_rate
from .ip_solver import ip_decode
from .nsn import MultiPMF, NSNTopology, simulate_round, validate
from .outcomes import Outcome
from .seeding import encoder_rng, source_rng, trial_seed
from .source_model import JointPMF, entropies, is_strongly_typical, sample_pair
from .stats import wilson_interval

SCHEMES = ("one_sided", "joint", "multistage", "med", "nsn")
DECODERS = ("typicality", "ip", "med")
VERDICTS = ("correct", "none_found", "multiple", "inconclusive", "atypical_source", "incorrect")
_COMPATIBLE = {
    "one_sided": {"typicality", "ip"},
    "joint": {"typicality", "med"},
    "multistage": {"typicality", "ip"},
    "med": {"med"},
    "nsn": {"typicality", "med"},
}


class ConfigError(ValueError):
    pass


def load_pmf(value: Any) -> JointPMF:
    """A JointPMF from its JSON dict, or the shorthand ``{"dsbs": crossover}``."""
    if isinstance(value, dict) and "dsbs" in value:
        return JointPMF.dsbs(float(value["dsbs"]))
    return JointPMF.from_dict(value)


@dataclass
class ExperimentConfig:
    scheme: str
    n_grid: list[int]
    eps: float
    trials: int
    seed: int = 0
    decoder: str = "typicality"
    pmf: JointPMF | None = None
    multi_pmf: MultiPMF | None = None
    topology: NSNTopology | None = None
    rate_x: float | None = None
    rate_y: float | None = None
    rows: int | None = None
    rows_x: int | None = None
    rows_y: int | None = None
    dist: CoefficientDist = field(default_factory=CoefficientDist.rademacher)
    budget: int | None = None
    threads: int = 1
    output_dir: str | None = None
    overlays: list[str] = field(default_factory=list)
    record_timing: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.decoder not in _COMPATIBLE[self.scheme]:
            raise ConfigError(f"decoder {self.decoder!r} not usable with scheme {self.scheme!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.n_grid or list(self.n_grid) != sorted(self.n_grid) or min(self.n_grid) < 2:
            raise ConfigError("n_grid must be nonempty, ascending, with n >= 2")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.scheme == "nsn":
            if self.multi_pmf is None or self.topology is None:
                raise ConfigError("nsn scheme needs multi_pmf and topology")
            problems = validate(self.topology)
            if problems:
                raise ConfigError("invalid topology: " + "; ".join(problems))
        elif self.pmf is None:
            raise ConfigError("pmf is required")
        if self.decoder == "ip" and self.scheme == "one_sided" and tuple(self.pmf.y_alphabet) != (0.0, 1.0):
            raise ConfigError("ip decoder needs binary Y = {0, 1}; use the multistage scheme")
        if self.scheme in ("joint", "med") and (self.rate_x is None or self.rate_y is None) \
                and (self.rows_x is None or self.rows_y is None):
            raise ConfigError("joint schemes need rate_x/rate_y or rows_x/rows_y")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        try:
            kw: dict[str, Any] = {
                "scheme": d["scheme"],
                "n_grid": [int(v) for v in d["n_grid"]],
                "eps": float(d["eps"]),
                "trials": int(d.get("trials", 1)),
                "seed": int(d.get("seed", 0)),
                "decoder": d.get("decoder", "med" if d["scheme"] == "med" else "typicality"),
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        try:
            if "pmf" in d:
                kw["pmf"] = load_pmf(d["pmf"])
            if "multi_pmf" in d:
                kw["multi_pmf"] = MultiPMF.from_dict(d["multi_pmf"])
            if "topology" in d:
                kw["topology"] = NSNTopology.from_dict(d["topology"])
            if "dist" in d:
                kw["dist"] = CoefficientDist.from_dict(d["dist"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        for key in ("rate_x", "rate_y"):
            if d.get(key) is not None:
                kw[key] = float(d[key])
        for key in ("rows", "rows_x", "rows_y", "budget"):
            if d.get(key) is not None:
                kw[key] = int(d[key])
        kw["threads"] = int(d.get("threads", 1))
        kw["output_dir"] = d.get("output_dir")
        kw["overlays"] = list(d.get("overlays", []))
        kw["record_timing"] = bool(d.get("record_timing", False))
        return cls(**kw)


@dataclass
class TrialRecord:
    n: int
    trial: int
    seed: int
    verdict: str
    bits_sent: int
    wall_time: float = 0.0
    payload: dict[str, Any] = field(default_factory=dict)

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        d = {"n": self.n, "trial": self.trial, "seed": self.seed, "verdict": self.verdict,
             "bits_sent": self.bits_sent, "payload": self.payload}
        if timing:
            d["wall_time"] = self.wall_time
        return d


def _verdict_of(result, truth_ok: bool, typical: bool) -> str:
    if result.outcome is Outcome.UNIQUE:
        return "correct" if truth_ok else "incorrect"
    if not typical:
        return "atypical_source"
    return result.outcome.value


def _one_sided(cfg: ExperimentConfig, n: int, seed: int) -> tuple[str, int, dict]:
    pmf = cfg.pmf
    pair = sample_pair(pmf, n, source_rng(seed))
    params = code_params(n, cfg.eps, entropies(pmf)["H_Y_given_X"], m=cfg.rows)
    q = params.quantizer
    D = draw_matrix(params.m, n, cfg.dist, encoder_rng(seed, 1))
    u = encode_and_quantize(D, pair.y, q)
    typical = is_strongly_typical(pair, pmf, cfg.eps)
    payload = {"m": params.m, "typical": typical}
    if not typical:
        # the planted y is not admissible, so no decoder verdict can be correct
        return "atypical_source", params.total_bits, payload
    if cfg.decoder == "ip":
        r = ip_decode(pair.x, u, D, pmf, cfg.eps, q, budget=cfg.budget)
    else:
        r = typicality_decode(pair.x, u, D, pmf, cfg.eps, q)
    payload.update(outcome=r.outcome.value, candidates_examined=r.candidates_examined)
    ok = r.ok and np.array_equal(np.asarray(r.value, dtype=float), pair.y)
    return _verdict_of(r, ok, typical), params.total_bits, payload


def _joint(cfg: ExperimentConfig, n: int, seed: int) -> tuple[str, int, dict]:
    pmf = cfg.pmf
    pair = sample_pair(pmf, n, source_rng(seed))
    m1 = cfg.rows_x if cfg.rows_x is not None else rows_for_rate(n, cfg.rate_x, cfg.eps)
    m2 = cfg.rows_y if cfg.rows_y is not None else rows_for_rate(n, cfg.rate_y, cfg.eps)
    q = Quantizer(n, cfg.eps)
    D1 = draw_matrix(m1, n, cfg.dist, encoder_rng(seed, 0))
    D2 = draw_matrix(m2, n, cfg.dist, encoder_rng(seed, 1))
    u1 = encode_and_quantize(D1, pair.x, q)
    u2 = encode_and_quantize(D2, pair.y, q)
    bits = (m1 + m2) * q.bits_per_component
    typical = is_strongly_typical(pair, pmf, cfg.eps)
    payload = {"m1": m1, "m2": m2, "typical": typical}
    if cfg.decoder == "med":
        r = min_entropy_decode(u1, u2, D1, D2, q, pmf.x_alphabet, pmf.y_alphabet)
        typical = True  # universality: no typical set enters the verdict
    elif not typical:
        return "atypical_source", bits, payload
    else:
        r = joint_decode(u1, u2, D1, D2, pmf, cfg.eps, q)
    payload.update(outcome=r.outcome.value, candidates_examined=r.candidates_examined)
    ok = r.ok and np.array_equal(r.value[0], pair.x) and np.array_equal(r.value[1], pair.y)
    return _verdict_of(r, ok, typical), bits, payload


def _multistage(cfg: ExperimentConfig, n: int, seed: int) -> tuple[str, int, dict]:
    pmf = cfg.pmf
    pair = sample_pair(pmf, n, source_rng(seed))
    code = multistage_encode(pair.y, pmf, cfg.eps, cfg.dist, encoder_rng(seed, 1))
    kw = {"budget": cfg.budget} if cfg.decoder == "ip" else {}
    r = multistage_decode(pair.x, code, decoder=cfg.decoder, **kw)
    typical = is_strongly_typical(pair, pmf, cfg.eps)
    payload = {
        "typical": typical,
        "stage_lengths": [s.length for s in code.stages],
        "stage_bits": [s.bits for s in code.stages],
        "side_info_bits": code.side_info_bits,
        "failed_stage": r.failed_stage,
        "outcome": r.outcome.value,
    }
    ok = r.ok and np.array_equal(r.value, pair.y)
    return _verdict_of(r, ok, typical), code.payload_bits + code.side_info_bits, payload


def _nsn(cfg: ExperimentConfig, n: int, seed: int) -> tuple[str, int, dict]:
    top, pmf = cfg.topology, cfg.multi_pmf
    mode = "med" if cfg.decoder == "med" else "typicality"
    rec = simulate_round(top, pmf, n, cfg.eps, seed, mode=mode, dist=cfg.dist)
    bits = sum(D.m for D in rec.matrices.values()) * Quantizer(n, cfg.eps).bits_per_component
    per = {}
    verdict = "correct"
    for c in top.decoders:
        r = rec.results[c.name]
        ok = rec.correct(top, pmf, c.name)
        v = "correct" if ok else ("incorrect" if r.ok else r.outcome.value)
        per[c.name] = v
        if v != "correct" and verdict == "correct":
            verdict = v
    return verdict, bits, {"decoders": per}


_RUNNERS = {"one_sided": _one_sided, "joint": _joint, "med": _joint, "multistage": _multistage, "nsn": _nsn}


def run_trial(cfg: ExperimentConfig, n: int, trial: int) -> TrialRecord:
    seed = trial_seed(cfg.seed, cfg.scheme, n, trial)
    t0 = time.perf_counter()
    verdict, bits, payload = _RUNNERS[cfg.scheme](cfg, n, seed)
    return TrialRecord(n, trial, seed, verdict, int(bits), time.perf_counter() - t0, payload)


@dataclass
class NSummary:
    n: int
    trials: int
    counts: dict[str, int]
    mean_bits_per_symbol: float

    @property
    def errors(self) -> int:
        return self.trials - self.counts.get("correct", 0)

    @property
    def error_rate(self) -> float:
        return self.errors / self.trials

    @property
    def wilson99(self) -> tuple[float, float]:
        return wilson_interval(self.errors, self.trials, 0.99)

    def to_dict(self) -> dict[str, Any]:
        lo, hi = self.wilson99
        return {"n": self.n, "trials": self.trials, "errors": self.errors, "error_rate": self.error_rate,
                "wilson_lo99": lo, "wilson_ucb99": hi, "mean_bits_per_symbol": self.mean_bits_per_symbol,
                "counts": dict(self.counts)}


@dataclass
class CampaignResult:
    config: ExperimentConfig
    records: list[TrialRecord]
    summary: list[NSummary]

    @property
    def inconclusive_dominated(self) -> bool:
        return any(s.counts.get("inconclusive", 0) * 2 > s.trials for s in self.summary)


def run_campaign(cfg: ExperimentConfig, threads: int | None = None) -> CampaignResult:
    """Run ``cfg.trials`` trials per block length.

    Seeds are fixed per (n, trial) before dispatch and results are folded in
    trial order, so the outcome does not depend on the thread count.
    """
    threads = cfg.threads if threads is None else threads
    jobs = [(n, t) for n in cfg.n_grid for t in range(cfg.trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda job: run_trial(cfg, *job), jobs))
    else:
        records = [run_trial(cfg, n, t) for n, t in jobs]
    summary = []
    for n in cfg.n_grid:
        recs = [r for r in records if r.n == n]
        counts = {v: 0 for v in VERDICTS}
        for r in recs:
            counts[r.verdict] += 1
        mean_bits = sum(r.bits_sent for r in recs) / len(recs) / n
        summary.append(NSummary(n, len(recs), counts, mean_bits))
    return CampaignResult(cfg, records, summary)


# -- output files ------------------------------------------------------------------

SUMMARY_COLUMNS = ("n", "trials", "errors", "error_rate", "wilson_lo99", "wilson_ucb99",
                   "mean_bits_per_symbol") + VERDICTS


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def summary_csv(result: CampaignResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in result.summary:
        d = s.to_dict()
        w.writerow([_fmt(d[c]) for c in SUMMARY_COLUMNS[:7]] + [s.counts[v] for v in VERDICTS])
    return buf.getvalue()


def trials_jsonl(result: CampaignResult) -> str:
    timing = result.config.record_timing
    return "".join(json.dumps(r.to_dict(timing), sort_keys=True) + "\n" for r in result.records)


def overlay_log2(name: str, cfg: ExperimentConfig, n: int) -> float:
    """Analytic bound (log2) drawn next to the measured error rate."""
    pmf = cfg.pmf
    if pmf is None:
        raise ConfigError("bound overlays need a two-source pmf")
    h = entropies(pmf)
    rate = cfg.rate_y if cfg.rate_y is not None else h["H_Y_given_X"]
    delta = cfg.eps / (2 * (rate + 3 * cfg.eps))
    if name == "p1":
        return B.p1_bound_log2(n, cfg.eps, *pmf.shape)
    if name == "phi1":
        return B.phi1(h["H_Y_given_X"], rate, delta, n, cfg.eps)
    if name == "phi2":
        p_tilde = 1 - cfg.dist.p_pm + 0.05
        return B.phi2(len(pmf.y_alphabet), rate, delta, n, cfg.eps, p_tilde)
    raise ConfigError(f"unknown overlay {name!r}; expected p1, phi1 or phi2")


def emit_plot_data(summary: Sequence[NSummary], overlays: Sequence[str] = (),
                   cfg: ExperimentConfig | None = None) -> str:
    """Tab-separated (series, n, error_rate, ucb, bound_log2) rows, one series per overlay."""
    lines = ["series\tn\terror_rate\tucb\tbound_log2"]
    series = list(overlays) or ["none"]
    for name in series:
        for s in summary:
            b = "" if name == "none" else _fmt(overlay_log2(name, cfg, s.n))
            lines.append(f"{name}\t{s.n}\t{_fmt(s.error_rate)}\t{_fmt(s.wilson99[1])}\t{b}")
    return "\n".join(lines) + "\n"


def write_outputs(result: CampaignResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "summary_csv": out / "summary.csv",
        "summary_json": out / "summary.json",
        "trials": out / "trials.jsonl",
        "plot": out / "plot.tsv",
    }
    paths["summary_csv"].write_text(summary_csv(result))
    paths["summary_json"].write_text(
        json.dumps([s.to_dict() for s in result.summary], indent=2, sort_keys=True) + "\n")
    paths["trials"].write_text(trials_jsonl(result))
    paths["plot"].write_text(emit_plot_data(result.summary, result.config.overlays, result.config))
    return paths
