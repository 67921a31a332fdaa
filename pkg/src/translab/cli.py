"""Config-driven experiment runner.

Each experiment is one YAML (or JSON) file::

    system: {id: doubling}
    params: {grid: 0.0625, horizon: 12}
    seed: 0
    output: {dir: reports, name: doubling-scan}

``translab scan --config doubling.yaml`` runs it; pointing ``--config`` at
a directory runs every experiment in it in lexicographic order.  Exit
codes: 0 witness found / check passed, 1 no witness / check failed,
2 invalid config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .catalogue import make_system, parse_complex, shift_vector
from .constructor import NestedBallCertificate, construct_recurrent_point, verify_certificate
from .limits import (
    almost_transitivity_scan,
    gdelta_check,
    jset_witness,
    limit_witness,
    orbit_segment,
    transitivity_scan,
)
from .serialize import dumps, jsonable, point_to_json
from .shifts import (
    compressed_operator,
    is_shift_family,
    orbit_span_basis,
    power_system,
    random_pairs,
    salas_verdict,
    scale_unimodular,
    transitivity_witness,
    unwrap,
    witness_battery,
)
from .spaces import Ball, EnclosureBlowup, InvalidInput, SeededSampler, System

OUTPUT_ENV = "TRANSLAB_OUTPUT_DIR"
COMMANDS = (
    "scan",
    "almost-scan",
    "recurrent",
    "verify-cert",
    "salas",
    "witness",
    "power-check",
    "unimodular-check",
    "span",
    "gdelta",
    "jset",
    "limit",
    "orbit",
)


class ConfigError(Exception):
    pass


class Outcome:
    """What an operation hands back to the runner."""

    def __init__(self, result: dict, passed: bool, message: str = "", files: dict | None = None):
        self.result = result
        self.passed = passed
        self.message = message
        self.files = files or {}


# -- parameter helpers -------------------------------------------------------


def _need(params: dict, key: str):
    if key not in params:
        raise ConfigError(f"missing parameter {key!r}")
    return params[key]


def _positive(params: dict, key: str, default=None) -> float:
    value = params.get(key, default)
    if value is None:
        raise ConfigError(f"missing parameter {key!r}")
    value = float(value)
    if not value > 0:
        raise ConfigError(f"{key} must be > 0, got {value!r}")
    return value


def _count(params: dict, key: str, default=None, minimum: int = 1) -> int:
    value = params.get(key, default)
    if value is None:
        raise ConfigError(f"missing parameter {key!r}")
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}, got {value!r}")
    return value


def _point(system: System, value) -> np.ndarray:
    if is_shift_family(system):
        spec, _, _ = unwrap(system)
        return shift_vector(spec, value).reshape(-1)
    if isinstance(value, list) and value and isinstance(value[0], list):
        value = [parse_complex(c) for c in value]
    return system.point(value)


def _ball(system: System, cfg) -> Ball:
    if not isinstance(cfg, dict):
        raise ConfigError(f"ball must be a mapping with center and radius, got {cfg!r}")
    return Ball(_point(system, _need(cfg, "center")), _positive(cfg, "radius"))


def _pairs(system: System, params: dict):
    raw = params.get("pairs")
    if raw is None:
        return None
    return [(_ball(system, p["u"]), _ball(system, p["v"])) for p in raw]


# -- operations --------------------------------------------------------------


def op_orbit(system, params, sampler, jobs):
    orbit = orbit_segment(system, _point(system, _need(params, "point")), _count(params, "horizon", minimum=0))
    return Outcome({"orbit": [point_to_json(p) for p in orbit]}, True, f"{len(orbit)} points")


def op_limit(system, params, sampler, jobs):
    w = limit_witness(
        system,
        _point(system, _need(params, "point")),
        _point(system, _need(params, "target")),
        _positive(params, "eps"),
        _count(params, "horizon"),
        _count(params, "min_count", 3),
    )
    if w is None:
        return Outcome({"witness": None}, False, "no witness within horizon")
    return Outcome({"witness": w.to_dict()}, True, f"{len(w.times)} times")


def op_jset(system, params, sampler, jobs):
    w = jset_witness(
        system,
        _point(system, _need(params, "point")),
        _point(system, _need(params, "target")),
        _positive(params, "eps"),
        _positive(params, "delta"),
        _count(params, "horizon"),
        _count(params, "samples", 1000),
        sampler,
    )
    if w is None:
        return Outcome({"witness": None}, False, "no witness within budget")
    result = {
        "start_point": point_to_json(w.start_point),
        "time": w.time,
        "start_distance": w.start_distance,
        "end_distance": w.end_distance,
        "sample_index": w.sample_index,
    }
    return Outcome({"witness": result}, True, f"k = {w.time}")


def op_gdelta(system, params, sampler, jobs):
    res = gdelta_check(
        system,
        _point(system, _need(params, "z")),
        _point(system, _need(params, "x")),
        _count(params, "S"),
        _count(params, "N"),
        _count(params, "M"),
    )
    return Outcome(res.to_dict(), res.member, "member" if res.member else f"{len(res.missing)} (s, n) cells unwitnessed")


def _scan(mode):
    def run(system, params, sampler, jobs):
        fn = transitivity_scan if mode == "transitive" else almost_transitivity_scan
        pairs = _pairs(system, params)
        grid = params.get("grid")
        if pairs is None and grid is None:
            raise ConfigError("scan needs either 'pairs' or 'grid'")
        report = fn(
            system,
            pairs,
            grid=None if grid is None else _positive(params, "grid"),
            N=_count(params, "horizon"),
            samples=_count(params, "samples", 256),
            sampler=sampler,
            jobs=jobs,
        )
        msg = f"{report.hit_count}/{len(report.verdicts)} pairs hit"
        return Outcome(report.to_dict(), report.passed, msg, {"csv": report.to_csv()})

    return run


def op_recurrent(system, params, sampler, jobs):
    outcome = construct_recurrent_point(
        system,
        _point(system, _need(params, "target")),
        _ball(system, _need(params, "ball")),
        _count(params, "depth"),
        _count(params, "budget"),
        recurrent=bool(params.get("recurrent", True)),
    )
    if not outcome.ok:
        result = {
            "certificate": None,
            "completed_stages": len(outcome.stages),
            "failed_stage": outcome.failed_stage,
            "failed_kind": outcome.failed_kind,
        }
        return Outcome(result, False, f"{outcome.failed_kind} search failed at stage {outcome.failed_stage}")
    cert = outcome.certificate
    report = verify_certificate(system, cert)
    result = {"certificate": cert.to_json(), "verification": report.to_dict()}
    return Outcome(result, report.passed, f"depth {cert.depth} certificate", {"certificate": dumps(cert.to_json())})


def op_verify_cert(system, params, sampler, jobs, base_dir: Path):
    src = _need(params, "certificate")
    if isinstance(src, str):
        path = Path(src)
        if not path.is_absolute():
            path = base_dir / path
        try:
            src = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read certificate: {exc}") from exc
    cert = NestedBallCertificate.from_json(src)
    report = verify_certificate(system, cert)
    return Outcome(report.to_dict(), report.passed, f"{len(report.failed())} failed checks")


def op_salas(system, params, sampler, jobs):
    spec, _, _ = unwrap(system)
    v = salas_verdict(spec, _count(params, "horizon"), _positive(params, "threshold"))
    return Outcome(v.to_dict(), v.satisfied, v.label)


def op_witness(system, params, sampler, jobs):
    spec, _, _ = unwrap(system)
    u = shift_vector(spec, _need(params, "u"))
    v = shift_vector(spec, _need(params, "v"))
    w = transitivity_witness(system, u, v, _positive(params, "eps_u"), _positive(params, "eps_v", 1.0))
    if w is None:
        return Outcome({"witness": None}, False, "no witness fits the truncation")
    return Outcome({"witness": {"n": w.n, "distance_u": w.distance_u, "z": jsonable(w.z)}}, True, f"n = {w.n}")


def _battery(system, params, sampler):
    spec, _, _ = unwrap(system)
    count = _count(params, "pairs", 20)
    pairs = random_pairs(spec, count, _count(params, "max_support", max(1, spec.truncation // 8)), sampler.generator(0))
    res = witness_battery(system, pairs, _positive(params, "eps_u", 1e-3))
    return Outcome(res.to_dict(), res.passed, f"{sum(w is not None for w in res.witnesses)}/{count} witnesses")


def op_power_check(system, params, sampler, jobs):
    powered = power_system(system, _count(params, "p"))
    if is_shift_family(powered):
        return _battery(powered, params, sampler)
    return _scan("transitive")(powered, params, sampler, jobs)


def op_unimodular_check(system, params, sampler, jobs):
    scaled = scale_unimodular(system, parse_complex(_need(params, "lambda")))
    return _battery(scaled, params, sampler)


def op_span(system, params, sampler, jobs):
    spec, _, _ = unwrap(system)
    seeds = [shift_vector(spec, s) for s in _need(params, "seeds")]
    basis = orbit_span_basis(system, seeds, _count(params, "depth"))
    comp = compressed_operator(system, basis)
    result = {
        "rank": basis.rank,
        "invariance_defect": comp.invariance_defect,
        "column_defects": [float(d) for d in comp.defects],
        "matrix": [point_to_json(row) for row in comp.matrix],
    }
    return Outcome(result, True, f"rank {basis.rank}")


OPERATIONS = {
    "orbit": op_orbit,
    "limit": op_limit,
    "jset": op_jset,
    "gdelta": op_gdelta,
    "scan": _scan("transitive"),
    "almost-scan": _scan("almost-transitive"),
    "recurrent": op_recurrent,
    "verify-cert": op_verify_cert,
    "salas": op_salas,
    "witness": op_witness,
    "power-check": op_power_check,
    "unimodular-check": op_unimodular_check,
    "span": op_span,
}


# -- runner ------------------------------------------------------------------


def report_schema() -> dict:
    """The JSON schema every written report validates against."""
    return json.loads(resources.files("translab").joinpath("schema/report.schema.json").read_text())


def load_config(path: Path) -> dict:
    try:
        cfg = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return cfg


def run(config: dict, command: str | None = None, *, seed: int | None = None, jobs: int = 1, base_dir: Path = Path(".")) -> tuple[dict, int]:
    """Execute one experiment; returns the report and the exit code."""
    started = time.perf_counter()
    try:
        op = config.get("operation", command)
        if command is not None and op != command:
            raise ConfigError(f"config names operation {op!r} but the subcommand is {command!r}")
        if op not in OPERATIONS:
            raise ConfigError(f"unknown operation {op!r}; known: {', '.join(COMMANDS)}")
        if "system" not in config:
            raise ConfigError("config has no 'system'")
        params = config.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError("'params' must be a mapping")
        seed = int(config.get("seed", 0)) if seed is None else int(seed)
        system = make_system(config["system"])
        sampler = SeededSampler(seed)
        fn = OPERATIONS[op]
        if op == "verify-cert":
            outcome = fn(system, params, sampler, jobs, base_dir)
        else:
            outcome = fn(system, params, sampler, jobs)
    except (ConfigError, InvalidInput, KeyError, TypeError, ValueError, EnclosureBlowup) as exc:
        error = {"error": {"type": "invalid-config", "message": str(exc) or type(exc).__name__}}
        return error, 2
    code = 0 if outcome.passed else 1
    report = {
        "tool": "translab",
        "version": __version__,
        "command": op,
        "config": {**config, "seed": seed},
        "wall_time_s": time.perf_counter() - started,
        "result": outcome.result,
        "summary": {"passed": outcome.passed, "exit_code": code, "message": outcome.message},
    }
    report["_files"] = outcome.files
    return report, code


def _output_dir(args, config: dict) -> Path:
    if args.out:
        return Path(args.out)
    out = config.get("output") or {}
    if isinstance(out, dict) and out.get("dir"):
        return Path(out["dir"])
    return Path(os.environ.get(OUTPUT_ENV, "translab-out"))


def _run_file(path: Path, args) -> int:
    try:
        config = load_config(path)
    except ConfigError as exc:
        print(json.dumps({"error": {"type": "invalid-config", "message": str(exc), "config": str(path)}}))
        return 2
    command = None if args.command == "run" else args.command
    report, code = run(config, command, seed=args.seed, jobs=args.jobs, base_dir=path.parent)
    if code == 2:
        report["error"]["config"] = str(path)
        print(json.dumps(report))
        return code
    files = report.pop("_files")
    out_dir = _output_dir(args, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = ((config.get("output") or {}).get("name")) or path.stem
    (out_dir / f"{name}.json").write_text(dumps(report))
    if "csv" in files:
        (out_dir / f"{name}.csv").write_text(files["csv"])
    if "certificate" in files:
        (out_dir / f"{name}.certificate.json").write_text(files["certificate"])
    status = "PASS" if code == 0 else "FAIL"
    print(f"{status} {report['command']} {path.name}: {report['summary']['message']} -> {out_dir / (name + '.json')}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="translab", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"translab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="experiment file or directory of experiment files")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help=f"output directory (default: config output.dir, ${OUTPUT_ENV}, ./translab-out)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for scans")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print(json.dumps({"error": {"type": "invalid-config", "message": "--jobs must be >= 1"}}))
        return 2
    path: Path = args.config
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix in (".yaml", ".yml", ".json"))
        if not files:
            print(json.dumps({"error": {"type": "invalid-config", "message": f"no experiment files in {path}"}}))
            return 2
        return max(_run_file(f, args) for f in files)
    return _run_file(path, args)


if __name__ == "__main__":
    sys.exit(main())
