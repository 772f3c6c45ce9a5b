"""Command-line entry point: ``realsw {simulate,decode,bounds,nsn,rate-region}``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any

import numpy as np

from .bounds import BoundRow, bound_table
from .decoders import SearchTooLarge, joint_decode, min_entropy_decode, typicality_decode
from .encoder import CoefficientDist, EncodingMatrix, Quantizer
from .harness import ConfigError, ExperimentConfig, load_pmf, run_campaign, summary_csv, write_outputs
from .ip_solver import ip_decode
from .nsn import MultiPMF, NSNTopology, inequality_set, rate_region_check, simulate_round, validate
from .seeding import trial_seed
from .source_model import entropies, in_rate_region

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3


def _load_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _cmd_simulate(args) -> int:
    cfg_dict = _load_json(args.config)
    for key in ("seed", "trials", "threads"):
        if getattr(args, key) is not None:
            cfg_dict[key] = getattr(args, key)
    if args.out is not None:
        cfg_dict["output_dir"] = args.out
    cfg = ExperimentConfig.from_dict(cfg_dict)
    result = run_campaign(cfg)
    if cfg.output_dir:
        write_outputs(result, cfg.output_dir)
    sys.stdout.write(summary_csv(result))
    return EXIT_INCONCLUSIVE if result.inconclusive_dominated else EXIT_OK


def _cmd_decode(args) -> int:
    d = _load_json(args.config)
    try:
        pmf = load_pmf(d["pmf"])
        eps = float(d["eps"])
        q = Quantizer(int(d["n"]), eps)
        decoder = d.get("decoder", "typicality")
        if decoder in ("typicality", "ip"):
            D = EncodingMatrix.from_dict(d["matrix"])
            args_ = (np.asarray(d["x"], dtype=float), np.asarray(d["u_hat"]), D, pmf, eps, q)
            r = typicality_decode(*args_) if decoder == "typicality" else ip_decode(*args_, budget=d.get("budget"))
        elif decoder in ("joint", "med"):
            D1 = EncodingMatrix.from_dict(d["matrix_x"])
            D2 = EncodingMatrix.from_dict(d["matrix_y"])
            u1, u2 = np.asarray(d["u_hat_x"]), np.asarray(d["u_hat_y"])
            if decoder == "joint":
                r = joint_decode(u1, u2, D1, D2, pmf, eps, q)
            else:
                r = min_entropy_decode(u1, u2, D1, D2, q, pmf.x_alphabet, pmf.y_alphabet)
        else:
            raise ConfigError(f"unknown decoder {decoder!r}")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad decode input: {exc}") from exc
    print(json.dumps(r.to_dict(), sort_keys=True))
    return EXIT_OK


def _cmd_bounds(args) -> int:
    d = _load_json(args.config)
    try:
        pmf = load_pmf(d["pmf"])
        n_grid = [int(v) for v in d["n_grid"]]
        eps = float(d["eps"])
        dist = CoefficientDist.from_dict(d["dist"]) if "dist" in d else None
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad bounds config: {exc}") from exc
    seed = args.seed if args.seed is not None else int(d.get("seed", 0))
    samples = args.trials if args.trials is not None else int(d.get("samples", 10_000))
    rows = bound_table(pmf, n_grid, eps, samples, dist, seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(BoundRow.COLUMNS)
    for row in rows:
        w.writerow(row.as_row())
    return EXIT_OK


def _cmd_nsn(args) -> int:
    d = _load_json(args.config)
    try:
        top = NSNTopology.from_dict(d["topology"])
        pmf = MultiPMF.from_dict(d["multi_pmf"]) if "multi_pmf" in d else None
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad nsn config: {exc}") from exc
    problems = validate(top)
    report: dict[str, Any] = {"valid": not problems, "violations": problems}
    if problems:
        print(json.dumps(report, indent=2))
        return EXIT_CONFIG
    if pmf is not None:
        ok, viol = rate_region_check(top, pmf)
        report["rate_region_ok"] = ok
        report["rate_violations"] = [v.__dict__ for v in viol]
        report["inequalities"] = {dec.name: {",".join(k): v for k, v in inequality_set(top, pmf, dec.name).items()}
                                  for dec in top.decoders}
        trials = args.trials if args.trials is not None else int(d.get("trials", 0))
        if trials:
            n, eps = int(d["n"]), float(d["eps"])
            mode = d.get("mode", "typicality")
            master = args.seed if args.seed is not None else int(d.get("seed", 0))
            tally = {dec.name: 0 for dec in top.decoders}
            for t in range(trials):
                rec = simulate_round(top, pmf, n, eps, trial_seed(master, "nsn", n, t), mode=mode)
                for dec in top.decoders:
                    tally[dec.name] += rec.correct(top, pmf, dec.name)
            report["simulation"] = {"n": n, "eps": eps, "trials": trials, "mode": mode,
                                    "correct": tally}
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_rate_region(args) -> int:
    pmf = load_pmf(_load_json(args.pmf))
    h = entropies(pmf)
    out = {"rate_x": args.rx, "rate_y": args.ry, "admissible": in_rate_region(args.rx, args.ry, pmf),
           "H_X_given_Y": h["H_X_given_Y"], "H_Y_given_X": h["H_Y_given_X"], "H_XY": h["H_XY"]}
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="realsw", description="Real-valued Slepian-Wolf code simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="master seed override")
        sp.add_argument("--trials", type=int, help="trial (or sample) count override")
        sp.add_argument("--threads", type=int, help="worker threads")

    sp = sub.add_parser("simulate", help="run a Monte Carlo campaign")
    common(sp)
    sp.add_argument("--out", help="directory for summary.csv, trials.jsonl, plot.tsv")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("decode", help="decode a single instance read from JSON")
    common(sp)
    sp.set_defaults(func=_cmd_decode)

    sp = sub.add_parser("bounds", help="tabulate analytic bounds against empirical frequencies (CSV)")
    common(sp)
    sp.set_defaults(func=_cmd_bounds)

    sp = sub.add_parser("nsn", help="validate a source network, check rates, optionally simulate")
    common(sp)
    sp.set_defaults(func=_cmd_nsn)

    sp = sub.add_parser("rate-region", help="test a rate pair against a two-source pmf")
    sp.add_argument("--pmf", required=True, help="JointPMF JSON file")
    sp.add_argument("--rx", type=float, required=True)
    sp.add_argument("--ry", type=float, required=True)
    sp.set_defaults(func=_cmd_rate_region)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SearchTooLarge, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
