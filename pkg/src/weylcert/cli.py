"""Batch driver: run certification scenarios and emit JSON/CSV reports.

Exit codes: 0 all certifications and validations pass; 2 expected
negative-control outcome; 1 unexpected failure; 64 bad configuration;
74 output I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import InputError, WeylcertError
from .manifold import manifold_from_json
from .oracle import discretize_radial, lowest_eigenvalues
from .scenarios import (
    ScenarioConfig,
    ScenarioResult,
    get_scenario,
    run_scenario,
    scenario_names,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_EXPECTED_NEGATIVE = 2
EXIT_CONFIG = 64
EXIT_IO = 74

log = logging.getLogger("weylcert")


def _setup_logging():
    level = os.environ.get("SPECTRAL_CERT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _config_from_file(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot parse config {path}: {exc}")
    if not isinstance(obj, dict) or "name" not in obj:
        raise InputError("config must be a JSON object with a 'name' field")
    base = None
    if obj["name"] in scenario_names():
        base = get_scenario(obj["name"])
    fields = {
        "manifold", "lambdas", "sigma_target", "search_budget", "search_count",
        "oracle", "weighted_c", "weighted_lambdas", "weighted_sigma_target",
        "weighted_support_budget", "negative_lambdas", "expected_failure",
        "seed", "kind",
    }
    kwargs = {}
    for k, v in obj.items():
        if k == "name":
            continue
        if k not in fields:
            raise InputError(f"unknown config field {k!r}")
        if k in ("lambdas", "weighted_lambdas", "negative_lambdas"):
            v = tuple(float(x) for x in v)
        if k == "oracle" and v is not None:
            v = (float(v[0]), int(v[1]), float(v[2]))
        kwargs[k] = v
    if base is not None:
        return replace(base, **kwargs)
    return ScenarioConfig(name=obj["name"], **kwargs)


def emit_report(result: ScenarioResult, out_dir: str) -> None:
    """Write report.json, certificates.csv, spectrum.csv and any extra CSVs."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w") as fh:
            json.dump(result.report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(out / "certificates.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "sigma", "epsilon", "nearest_eigenvalue",
                        "validated"])
            for row in result.certificate_rows:
                w.writerow([row["lambda"], row["sigma"], row["epsilon"],
                            row["nearest_eigenvalue"], row["validated"]])
        if result.spectrum:
            with open(out / "spectrum.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["index", "eigenvalue"])
                for i, ev in enumerate(result.spectrum):
                    w.writerow([i, repr(ev)])
        for name, rows in result.extra_csv.items():
            with open(out / f"{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["x", "integral"])
                for row in rows:
                    w.writerow(list(row))
    except OSError as exc:
        log.error("cannot write reports: %s", exc)
        raise SystemExit(EXIT_IO)


def _resolve_config(args) -> ScenarioConfig:
    if args.config:
        cfg = _config_from_file(args.config)
    elif args.scenario:
        cfg = get_scenario(args.scenario)
    else:
        raise InputError("need --scenario or --config")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _cmd_certify(args) -> int:
    cfg = _resolve_config(args)
    result = run_scenario(cfg, jobs=args.jobs)
    if args.out:
        emit_report(result, args.out)
    for row in result.certificate_rows:
        print(f"lambda={row['lambda']:<6g} sigma={row['sigma']:.6g} "
              f"epsilon={row['epsilon']:.6g} validated={row['validated']}")
    for msg in result.report.get("failures", []):
        print(f"FAIL: {msg}", file=sys.stderr)
    return result.exit_code


def _cmd_oracle(args) -> int:
    cfg = _resolve_config(args)
    if cfg.manifold is None or cfg.oracle is None:
        raise InputError("scenario has no oracle configuration")
    M = manifold_from_json(cfg.manifold)
    L, m, _ = cfg.oracle
    T = discretize_radial(M, L, m)
    evs = lowest_eigenvalues(T, args.count)
    if args.out:
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "spectrum.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["index", "eigenvalue"])
                for i, ev in enumerate(evs):
                    w.writerow([i, repr(ev)])
        except OSError as exc:
            log.error("cannot write spectrum: %s", exc)
            return EXIT_IO
    for i, ev in enumerate(evs):
        print(f"{i}\t{ev:.10g}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _resolve_config(args)
    result = run_scenario(cfg, jobs=args.jobs)
    validation = result.report.get("validation")
    if validation is None:
        print("scenario has no oracle validation", file=sys.stderr)
        return EXIT_FAIL
    for entry in validation["entries"]:
        print(f"lambda={entry['lambda']:<6g} "
              f"interval={entry['interval']} "
              f"nearest={entry['nearest_eigenvalue']} "
              f"distance={entry['nearest_distance']} "
              f"validated={entry['validated']}")
    for wmsg in validation.get("warnings", []):
        print(f"warning: {wmsg}", file=sys.stderr)
    if args.out:
        emit_report(result, args.out)
    return result.exit_code


def _cmd_demo(args) -> int:
    if args.what == "cylinder":
        cfg = get_scenario("cylinder")
    elif args.what == "mollify":
        cfg = get_scenario("mollify_suite")
    else:
        raise InputError(f"unknown demo {args.what!r}")
    result = run_scenario(cfg, jobs=args.jobs)
    if args.out:
        emit_report(result, args.out)
    print(json.dumps(result.report, indent=2, sort_keys=True))
    return result.exit_code


def _cmd_list(args) -> int:
    for name in scenario_names():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="weylcert",
        description="Certify spectral intervals on rotationally symmetric "
                    "model manifolds and cross-validate them against a "
                    "tridiagonal eigensolver.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON scenario config")
        sp.add_argument("--scenario", help="builtin scenario name")
        sp.add_argument("--out", help="output directory for reports")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("certify", help="run a scenario end to end")
    common(sp)
    sp.set_defaults(fn=_cmd_certify)

    sp = sub.add_parser("oracle", help="export the oracle spectrum")
    common(sp)
    sp.add_argument("--count", type=int, default=50,
                    help="number of lowest eigenvalues")
    sp.set_defaults(fn=_cmd_oracle)

    sp = sub.add_parser("compare", help="print certificate-vs-spectrum table")
    common(sp)
    sp.set_defaults(fn=_cmd_compare)

    sp = sub.add_parser("demo", help="run a standalone demonstration")
    sp.add_argument("what", choices=["cylinder", "mollify"])
    common(sp)
    sp.set_defaults(fn=_cmd_demo)

    sp = sub.add_parser("list-scenarios", help="list builtin scenario names")
    sp.set_defaults(fn=_cmd_list)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WeylcertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
