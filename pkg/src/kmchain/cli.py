"""Command-line front end.

Every command writes ``<command>.json`` (and CSV detail where useful) to
the output directory: ``--output-path``, else ``$KMCHAIN_OUTPUT_DIR``,
else the working directory. The JSON is also printed. The exit code is 0
when every embedded check passes, 1 when a check fails and 2 on errors.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, chain, estimators, km, lower, upper

log = logging.getLogger("kmchain")

ENV_OUTPUT = "KMCHAIN_OUTPUT_DIR"
LOWER_LIMIT = 1.646
UPPER_LIMIT = 2.92

_COMMON = {"seed": (int, 0), "output_path": (str, None)}

PARAMS = {
    "simulate": {
        "L": (int, 4096), "n_jumps": (int, 10**6), "pattern": (str, "coin"),
        "tail": (str, "coin"), "n_batches": (int, 32), "trace_csv": (bool, False),
    },
    "validate-lemmas": {
        "samples": (int, 10**5), "L": (int, 256), "jmax": (int, 50),
        "confidence": (float, 0.999),
    },
    "lower-bound": {
        "depth": (int, 18), "bad_set": (str, "paper"), "base": (str, "listing"),
        "leaf_csv": (bool, False),
    },
    "upper-bound": {"tol": (float, 1e-6), "cutoff": (int, 10**4)},
    "km-exact": {"n": (int, 12), "convention": (str, "auto")},
    "km-mc": {"n": (int, 100), "replicas": (int, 64)},
    "duality": {"n": (int, 3), "t": (int, 4), "mode": (str, "exact"), "samples": (int, 10**4)},
    "window-census": {
        "L": (int, 1024), "offset": (int, 100), "width": (int, 1), "n_samples": (int, 1000),
        "dt": (float, 1.0), "burn_in": (float, 50.0), "pattern": (str, "coin"),
        "tail": (str, "coin"), "identify_complement": (bool, True),
    },
}

CSV_HELP = {
    "simulate": "CSV trace.csv: n, sigma, jump (one row per leading flip)",
    "validate-lemmas": "CSV lemmas.csv: check, parameter, k, empirical, reference, margin",
    "lower-bound": "CSV leaf_ratios.csv: x, a, b, ratio over leaves [2^N, 2^(N+1))",
    "upper-bound": "no CSV",
    "km-exact": "CSV km_exact.csv: r, l_star",
    "km-mc": "CSV km_mc.csv: replica, steps",
    "duality": "CSV duality.csv: r, lhs, rhs",
    "window-census": "CSV census.csv: pattern, count, frequency",
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    seed: int
    params: dict = field(default_factory=dict)
    output_path: str = "."

    def echo(self):
        return {"command": self.command, "seed": self.seed, "params": dict(sorted(self.params.items()))}


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key, typ, raw):
    try:
        if typ is bool:
            return raw if isinstance(raw, bool) else _parse_bool(raw)
        if typ is int:
            if isinstance(raw, str):
                f = float(raw)
                if not f.is_integer():
                    raise ValueError
                return int(raw) if raw.strip().lstrip("-").isdigit() else int(f)
            return int(raw)
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {typ.__name__}, got {raw!r}") from None


def read_config_file(path):
    """Flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def parse_config(command, file_values=None, flag_values=None):
    """Merge defaults, file values and flags (flags win) into a config."""
    if command not in PARAMS:
        raise ConfigError(f"unknown command {command!r}")
    schema = {**_COMMON, **PARAMS[command]}
    merged = {}
    for source in (file_values or {}, flag_values or {}):
        for k, v in source.items():
            if v is None:
                continue
            if k not in schema:
                raise ConfigError(f"unknown key {k!r} for {command}")
            merged[k] = _convert(k, schema[k][0], v)
    params = {k: merged.get(k, d) for k, (_, d) in PARAMS[command].items()}
    seed = merged.get("seed", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    out = merged.get("output_path") or os.environ.get(ENV_OUTPUT) or "."
    return ExperimentConfig(command, seed, params, out)


# ------------------------------------------------------------ runners


def _pattern(spec, tail):
    if spec == "coin":
        return chain.Pattern.coin() if tail == "coin" else chain.Pattern((1,), tail)
    if spec == "single":
        return chain.Pattern((1,), tail)
    if spec.startswith("ones:"):
        return chain.Pattern((1,) * int(spec[5:]), tail)
    if spec.startswith("bits:"):
        return chain.Pattern.explicit(tuple(int(c) for c in spec[5:]), tail)
    raise ConfigError(f"pattern must be coin, single, ones:R or bits:B, not {spec!r}")


def _run_simulate(cfg, rng, outdir):
    p = cfg.params
    state = chain.new_state(_pattern(p["pattern"], p["tail"]), p["L"], rng)
    trace = chain.run(state, rng, n_leading_flips=p["n_jumps"])
    trace.seed = cfg.seed
    report = {"n_jumps": len(trace), "truncation_hit": bool(trace.truncation_hit),
              "absorbed": bool(trace.absorbed), "validity": not trace.truncation_hit}
    checks = {"no_truncation": not trace.truncation_hit}
    if len(trace):
        est = estimators.speed_estimate(trace, p["n_batches"], cfg.seed, allow_truncated=True)
        report["speed"] = {"spd_sigma": est.spd_sigma, "spd_count": est.spd_count,
                           "stderr": est.stderr, "stderr_count": est.stderr_count,
                           "n_batches": est.n_batches}
        report["sigma_over_n"] = float((trace.sigma[-1] - trace.meta["t0"]) / len(trace))
        report["checkpoints"] = estimators.speed_checkpoints(trace)
        report["within_known_bounds"] = LOWER_LIMIT < est.spd_sigma < UPPER_LIMIT
        checks["positive_speed"] = est.spd_sigma > 0 and est.spd_count > 0
    if p["trace_csv"]:
        trace.to_csv(outdir / "trace.csv")
    return report, checks


def _run_validate(cfg, rng, outdir):
    p = cfg.params
    n, L = p["samples"], p["L"]
    rows = []
    report = {"jump1": [], "zeros_star": [], "ones_after_zero_block": []}
    checks = {}
    for r in (2, 3, 5, 10):
        c = estimators.jump1_check(r, n, rng, L=max(L, 2 * r + 2))
        report["jump1"].append({k: c[k] for k in ("r", "mean", "harmonic", "max_abs_err",
                                                  "cells_ok", "mean_ok")})
        checks[f"jump1_r{r}"] = c["cells_ok"] and c["mean_ok"]
        for k, (e, x) in enumerate(zip(c["empirical"], c["exact"]), 1):
            rows.append(("jump1", r, k, e, x, ""))
    for r in (1, 3, 8):
        for tail in ("coin", "zeros"):
            rep, info = estimators.lemma_eight_check(r, n, rng, L=L, jmax=p["jmax"], tail=tail,
                                                     confidence=p["confidence"])
            report["zeros_star"].append({"r": r, "tail": tail, "passed": rep.passed,
                                         "max_violation": rep.max_violation, **info})
            checks[f"zeros_star_r{r}_{tail}"] = rep.passed
            for d in rep.details:
                rows.append((f"zeros_star_{tail}", r, d["k"], d["empirical"], d["reference"], d["margin"]))
    for j in (1, 2, 5):
        rep, info = estimators.lemma_second_check(j, n, rng, L=L, confidence=p["confidence"])
        report["ones_after_zero_block"].append({"j": j, "passed": rep.passed,
                                                "max_violation": rep.max_violation, **info})
        checks[f"ones_j{j}"] = rep.passed
        for d in rep.details:
            rows.append(("ones", j, d["k"], d["empirical"], d["reference"], d["margin"]))
    with open(outdir / "lemmas.csv", "w") as fh:
        fh.write("check,parameter,k,empirical,reference,margin\n")
        for row in rows:
            fh.write(",".join(map(str, row)) + "\n")
    return report, checks


def _run_lower(cfg, rng, outdir):
    p = cfg.params
    bad = lower.paper_bad_set() if p["bad_set"] == "paper" else (
        lower.BadSet() if p["bad_set"] == "none" else lower.load_bad_set(p["bad_set"]))
    table = lower.reward_table(p["depth"], bad, p["base"])
    x, ratio = lower.leaf_minimum(table)
    ix, ir = lower.internal_minimum(table)
    report = {"N": p["depth"], "bad_set_size": len(bad), "x_min": x, "x_min_binary": bin(x)[2:],
              "ratio": ratio, "bound": 1.0 + ratio, "base": p["base"],
              "internal_min": {"x": ix, "ratio": ir}}
    checks = {"bound_at_least_one": ratio >= 0,
              "x_min_alternates": x == lower.alternating(p["depth"] + 1)}
    if p["leaf_csv"]:
        table.to_csv(outdir / "leaf_ratios.csv")
    return report, checks


def _run_upper(cfg, rng, outdir):
    p = cfg.params
    tol = max(p["tol"], 1e-10)
    ub = upper.upper_bound(p["cutoff"], p["cutoff"], tol)
    exact = upper.e_h_theta2_exact().value
    corrected, corr_tol = upper.upper_bound_corrected(tol)
    report = {**ub.as_dict(), "tol": tol,
              "theta2_exact": exact, "e_h_theta": upper.e_h_theta(),
              "bound_with_exact_theta2": corrected, "bound_with_exact_theta2_tol": corr_tol}
    checks = {"bound_below_2.92": ub.bound + ub.error_budget < UPPER_LIMIT,
              "theta2_series_in_range": 1.9 < ub.theta2.value < 2.0}
    return report, checks


def _run_km_exact(cfg, rng, outdir):
    p = cfg.params
    conv = None if p["convention"] == "auto" else p["convention"]
    res = km.km_exact(p["n"], conv)
    lo, hi = res.bounds
    with open(outdir / "km_exact.csv", "w") as fh:
        fh.write("r,l_star\n")
        for r, v in enumerate(res.l_star, 1):
            fh.write(f"{r},{v!r}\n")
    report = res.as_dict()
    checks = {"identity": res.residual < 1e-10, "bounds": lo <= res.e_n <= hi}
    return report, checks


def _run_km_mc(cfg, rng, outdir):
    p = cfg.params
    est = km.en_simulate(p["n"], p["replicas"], rng, keep=True)
    with open(outdir / "km_mc.csv", "w") as fh:
        fh.write("replica,steps\n")
        for i, s in enumerate(est.samples):
            fh.write(f"{i},{int(s)}\n")
    report = est.as_dict()
    checks = {}
    if p["n"] <= 20:
        exact = km.expected_steps_dp(p["n"])
        report["e_n_exact"] = exact
        checks["agrees_with_dp"] = abs(est.mean - exact) <= 4 * est.stderr + 1e-12
    return report, checks


def _run_duality(cfg, rng, outdir):
    p = cfg.params
    rep = km.duality_check(p["n"], p["t"], p["mode"], p["samples"], rng)
    with open(outdir / "duality.csv", "w") as fh:
        fh.write("r,lhs,rhs\n")
        for row in rep.single:
            fh.write(f"{row['r']},{row['lhs']!r},{row['rhs']!r}\n")
    return rep.as_dict(), {"duality": rep.passed}


def _run_census(cfg, rng, outdir):
    p = cfg.params
    state = chain.new_state(_pattern(p["pattern"], p["tail"]), p["L"], rng)
    if p["burn_in"] > 0:
        chain.run(state, rng, t_max=p["burn_in"])
    counts = estimators.window_census(state, rng, p["offset"], p["width"], p["n_samples"],
                                      p["dt"], p["identify_complement"])
    total = sum(counts.values())
    with open(outdir / "census.csv", "w") as fh:
        fh.write("pattern,count,frequency\n")
        for k in sorted(counts):
            fh.write(f"{k},{counts[k]},{counts[k] / total!r}\n")
    report = {"counts": dict(sorted(counts.items())), "total": total,
              "truncation_hit": bool(state.truncation_hit)}
    return report, {"no_truncation": not state.truncation_hit}


RUNNERS = {
    "simulate": _run_simulate, "validate-lemmas": _run_validate, "lower-bound": _run_lower,
    "upper-bound": _run_upper, "km-exact": _run_km_exact, "km-mc": _run_km_mc,
    "duality": _run_duality, "window-census": _run_census,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def run_experiment(cfg, timestamp=True):
    """Run one command; returns ``(report, exit_code)`` and writes files."""
    outdir = Path(cfg.output_path)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    report = {"config": cfg.echo(), "seed": cfg.seed, "version": __version__}
    try:
        body, checks = RUNNERS[cfg.command](cfg, rng, outdir)
        report["result"] = body
        report["checks"] = checks
        report["passed"] = all(checks.values())
        code = 0 if report["passed"] else 1
    except Exception as exc:  # reported, not raised: the exit code carries it
        log.debug("command failed", exc_info=True)
        report["error"] = f"{type(exc).__name__}: {exc}"
        report["passed"] = False
        code = 2
    if timestamp:
        report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    report = _jsonable(report)
    name = cfg.command.replace("-", "_") + ".json"
    with open(outdir / name, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report, code


def build_parser():
    parser = argparse.ArgumentParser(prog="kmchain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, params in PARAMS.items():
        sp = sub.add_parser(name, help=CSV_HELP[name], epilog=CSV_HELP[name])
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("--seed", type=str)
        sp.add_argument("--output-path", dest="output_path")
        sp.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp field from the report")
        for key, (typ, default) in params.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=str,
                            help=f"{typ.__name__}, default {default}")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config", "verbose", "no_timestamp")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = parse_config(args.command, file_values, flags)
    except (ConfigError, OSError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2
    report, code = run_experiment(cfg, timestamp=not args.no_timestamp)
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
