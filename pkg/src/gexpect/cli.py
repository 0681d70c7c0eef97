"""Batch entry point: run an experiment config, write CSV tables.

One command per process.  The config file (JSON, schema shipped with the
package) names the command; an optional positional command on the command
line must match it.  Outputs are RFC-4180 CSV with LF line endings, '.'
decimals, 17 significant digits, and a trailing column carrying the config
hash, so identical configs yield byte-identical files.

Exit codes: 0 success; 1 config/validation error; 2 numeric error;
3 a mathematical property or axiom check failed (distinct from a program
failure so CI can gate on it).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import importlib.resources
import json
import math
import os
import sys

import jsonschema

from . import properties, representation, risk
from .expectation import AssumptionError, g_expectation
from .gdsl import ParseError, parse_claim, parse_generator
from .model import EvaluationError, TimeGrid
from .solvers import NumericError, simulate_paths

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_CHECK_FAILED = 3

COMMANDS = ("price", "recover", "check-properties", "classify-risk",
            "converge", "equivalence")


class ConfigError(ValueError):
    pass


class CheckFailure(Exception):
    pass


def _schema() -> dict:
    text = importlib.resources.files("gexpect").joinpath("config_schema.json").read_text()
    return json.loads(text)


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    validator = jsonschema.Draft7Validator(_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        lines = ["/" + "/".join(str(p) for p in e.absolute_path) + ": " + e.message
                 for e in errors]
        raise ConfigError("config schema violations:\n  " + "\n  ".join(lines))
    return config


def _require(config, field, command):
    if field not in config:
        raise ConfigError(f"/{field}: required for command {command!r}")
    return config[field]


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: str, header, rows, digest: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header) + ["config_hash"])
        for row in rows:
            writer.writerow([fmt(v) for v in row] + [digest])


def _build_generator(config):
    spec = config["generator"]
    return parse_generator(spec["expr"], spec["d"], lipschitz=float(spec["K"]))


def _build_grid(config, n=None):
    t = float(config["grid"]["T"])
    n = n if n is not None else config["grid"]["N"]
    if not isinstance(n, int):
        raise ConfigError("/grid/N: must be a single integer for this command")
    return TimeGrid(t, n)


def _lsmc_options(config):
    lsmc = config.get("lsmc", {})
    return dict(n_paths=lsmc.get("paths", 20_000),
                basis=lsmc.get("basis_degree", 3),
                picard_iters=lsmc.get("picard_iters", 3))


def _out_path(config, out_dir, default_name):
    name = config.get("output", default_name)
    return name if os.path.isabs(name) else os.path.join(out_dir, name)


def _run_price(config, out_dir, digest):
    g = _build_generator(config)
    claim = parse_claim(_require(config, "claim", "price"), g.dimension)
    grid = _build_grid(config)
    method = config.get("method", "lattice")
    kwargs = {"strict": config.get("strict", True)}
    if method == "lsmc":
        kwargs.update(_lsmc_options(config))
        kwargs["seed"] = config.get("seed", 0)
    if "scheme" in config:
        kwargs["scheme"] = config["scheme"]
    result = g_expectation(g, claim, grid, method, **kwargs)
    path = _out_path(config, out_dir, "price.csv")
    write_csv(path,
              ["command", "generator", "claim", "T[time]", "N[steps]", "method",
               "value", "error_estimate"],
              [["price", config["generator"]["expr"], config["claim"],
                grid.horizon, grid.steps, method, result.value,
                result.error_estimate]],
              digest)
    print(f"price: value={fmt(result.value)} method={method} -> {path}")
    return [path]


def _run_recover(config, out_dir, digest):
    g = _build_generator(config)
    target = _require(config, "target", "recover")
    y = float(target.get("y", 0.0))
    z = target.get("z", [1.0] * g.dimension)
    t = float(target.get("t", 0.0))
    horizon = float(config["grid"]["T"])
    eps = target.get("eps_schedule")
    if eps is None:
        eps = [f * horizon for f in representation.DEFAULT_EPS_FRACTIONS]
    steps = target.get("steps_per_eps", representation.DEFAULT_STEPS_PER_EPS)
    method = config.get("method", "lattice")
    kwargs = {}
    if method == "lsmc":
        opts = _lsmc_options(config)
        kwargs = dict(n_paths=opts["n_paths"], basis=opts["basis"],
                      picard_iters=opts["picard_iters"],
                      seed=config.get("seed", 0))
    result = representation.recover_generator(g, y, z, t, eps, steps, method,
                                              horizon=horizon, **kwargs)
    path = _out_path(config, out_dir, "recover.csv")
    rows = [[e, s, result.extrapolated, result.residual]
            for e, s in zip(result.eps_schedule, result.raw_slopes)]
    write_csv(path, ["eps[time]", "raw_slope", "extrapolated", "residual"],
              rows, digest)
    print(f"recover: extrapolated={fmt(result.extrapolated)} "
          f"residual={fmt(result.residual)} -> {path}")
    return [path]


def _run_equivalence(config, out_dir, digest):
    g = _build_generator(config)
    target = config.get("target", {})
    y = float(target.get("y", 0.0))
    z = target.get("z", [1.0] * g.dimension)
    t = float(target.get("t", 0.0))
    horizon = float(config["grid"]["T"])
    eps = target.get("eps_schedule")
    if eps is None:
        eps = [f * horizon for f in representation.DEFAULT_EPS_FRACTIONS]
    steps = target.get("steps_per_eps", representation.DEFAULT_STEPS_PER_EPS)
    result = representation.limit_equivalence_check(g, y, z, t, eps, steps,
                                                    horizon=horizon)
    path = _out_path(config, out_dir, "equivalence.csv")
    rows = [[e, s, a, gap] for e, s, a, gap in
            zip(result.eps_schedule, result.slopes, result.averages, result.gaps)]
    write_csv(path, ["eps[time]", "slope", "local_average", "gap"], rows, digest)
    tol = config.get("tolerances", {}).get("equivalence", 1e-6)
    print(f"equivalence: max_gap={fmt(result.max_gap)} tol={fmt(tol)} -> {path}")
    if result.max_gap > tol:
        raise CheckFailure(f"limit equivalence gap {result.max_gap:.3g} "
                           f"exceeds {tol:.3g}")
    return [path]


def emit_convergence_table(results, path, digest, oracle=None):
    """results: list of (N, value); columns N, value, abs_error (with an
    oracle), ratio = error(N) / error(2N) where 2N is in the sweep."""
    if len(results) < 2:
        raise ConfigError("/grid/N: converge needs at least 2 grid sizes")
    by_n = {n: v for n, v in results}
    rows = []
    for n, value in results:
        err = abs(value - oracle) if oracle is not None else ""
        ratio = ""
        if oracle is not None and 2 * n in by_n:
            denom = abs(by_n[2 * n] - oracle)
            ratio = err / denom if denom > 0 else math.inf
        rows.append([n, value, err, ratio])
    write_csv(path, ["N[steps]", "value", "abs_error", "ratio"], rows, digest)
    return rows


def _run_converge(config, out_dir, digest):
    g = _build_generator(config)
    claim = parse_claim(_require(config, "claim", "converge"), g.dimension)
    sweep = config["grid"]["N"]
    if not isinstance(sweep, list):
        raise ConfigError("/grid/N: converge needs a list of grid sizes")
    method = config.get("method", "lattice")
    results = []
    for n in sweep:
        grid = _build_grid(config, n=n)
        kwargs = {"strict": config.get("strict", True)}
        if method == "lsmc":
            kwargs.update(_lsmc_options(config))
            kwargs["seed"] = config.get("seed", 0)
        results.append((n, g_expectation(g, claim, grid, method, **kwargs).value))
    path = _out_path(config, out_dir, "converge.csv")
    emit_convergence_table(results, path, digest, oracle=config.get("oracle"))
    print(f"converge: {len(results)} grid sizes -> {path}")
    return [path]


def _claims_from_config(config, d):
    if "claims" in config:
        return {src: parse_claim(src, d) for src in config["claims"]}
    return None


def _run_check_properties(config, out_dir, digest):
    g = _build_generator(config)
    grid = _build_grid(config)
    tols = config.get("tolerances", {})
    cfg = properties.TheoremConfig(
        grid=grid, claims=_claims_from_config(config, g.dimension),
        operator_tol=tols.get("operator", properties.LATTICE_IDENTITY_TOL),
        generator_tol=tols.get("generator", properties.GENERATOR_TOL),
        seed=config.get("seed", 0), strict=config.get("strict", True))
    theorems = config.get("theorems", list(properties.THEOREMS))
    rows = []
    failed = []
    for name in theorems:
        verdict = properties.theorem_verdict(name, g, cfg)
        for rep in (verdict.generator_side,) + verdict.operator_side:
            rows.append([name, rep.property, rep.level, rep.instances_tested,
                         rep.max_violation, rep.tol, rep.passed,
                         json.dumps(rep.witness, sort_keys=True),
                         verdict.consistent])
            if not rep.passed:
                failed.append(f"{name}/{rep.level}: violation "
                              f"{rep.max_violation:.6g} witness {rep.witness}")
        if not verdict.consistent:
            failed.append(f"{name}: sides inconsistent ({verdict.notes})")
    path = _out_path(config, out_dir, "properties.csv")
    write_csv(path, ["theorem", "property", "level", "instances", "violation",
                     "tol", "passed", "witness", "consistent"], rows, digest)
    print(f"check-properties: {len(rows)} reports -> {path}")
    if failed:
        raise CheckFailure("; ".join(failed))
    return [path]


def _run_classify_risk(config, out_dir, digest):
    g = _build_generator(config)
    grid = _build_grid(config)
    tols = config.get("tolerances", {})
    positions = _claims_from_config(config, g.dimension)
    try:
        result = risk.classify(g, positions, grid,
                               tol=tols.get("risk", properties.LATTICE_IDENTITY_TOL),
                               generator_tol=tols.get("generator", 1e-9),
                               seed=config.get("seed", 0),
                               strict=config.get("strict", True))
    except risk.ClassificationError as exc:
        raise CheckFailure(str(exc)) from exc
    rows = [["verdict", "monetary", "", "", "", result.monetary, ""],
            ["verdict", "convex", "", "", "", result.convex, ""],
            ["verdict", "coherent", "", "", "", result.coherent, ""]]
    for name, rep in result.axiom_reports.items():
        rows.append(["axiom", name, rep.level, rep.instances_tested,
                     rep.max_violation, rep.passed,
                     json.dumps(rep.witness, sort_keys=True)])
    path = _out_path(config, out_dir, "risk.csv")
    write_csv(path, ["kind", "name", "level", "instances", "violation",
                     "value", "witness"], rows, digest)
    print(f"classify-risk: monetary={result.monetary} convex={result.convex} "
          f"coherent={result.coherent} -> {path}")
    return [path]


_RUNNERS = {
    "price": _run_price,
    "recover": _run_recover,
    "check-properties": _run_check_properties,
    "classify-risk": _run_classify_risk,
    "converge": _run_converge,
    "equivalence": _run_equivalence,
}


def run(config_path: str, seed: int = None, out_dir: str = ".",
        threads: int = 1) -> int:
    """Execute one experiment config; returns the process exit code."""
    try:
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        config = load_config(config_path)
        if seed is not None:
            config["seed"] = seed
        digest = config_hash(config)
        os.makedirs(out_dir, exist_ok=True)
        _RUNNERS[config["command"]](config, out_dir, digest)
        return EXIT_OK
    except (ConfigError, ParseError, AssumptionError, jsonschema.SchemaError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericError, EvaluationError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except (ValueError, IndexError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gexpect",
        description="Value claims under nonlinear expectations, recover drivers, "
                    "and check the operator/driver equivalences.")
    parser.add_argument("command", nargs="?", choices=COMMANDS,
                        help="optional; must match the command in the config file")
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("GEXPECT_THREADS", "1")),
                        help="worker cap; results are identical for any value")
    args = parser.parse_args(argv)

    if args.command is not None:
        try:
            config = load_config(args.config)
        except ConfigError as exc:
            print(f"validation error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        if config.get("command") != args.command:
            print(f"validation error: /command: config says "
                  f"{config.get('command')!r}, command line says {args.command!r}",
                  file=sys.stderr)
            return EXIT_VALIDATION

    return run(args.config, seed=args.seed, out_dir=args.out, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
