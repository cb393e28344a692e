"""Command-line experiment runner.

Exit codes: 0 success, 2 configuration error, 3 enumeration budget exceeded,
4 numerical failure (fixed-point iteration did not converge).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from skrs import __version__
from skrs.config import COMMANDS, ConfigError, ExperimentConfig, from_mapping, load_file, q_from_result
from skrs.gaussian import LinearModelAnalytics
from skrs.lab import experiments as ex
from skrs.lab.gibbs import BudgetError
from skrs.solver import ConvergenceError, solve_fixed_point, t_c_estimate

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("skrs")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skrs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--dist", help="rademacher | uniform | discrete")
        p.add_argument("--atoms", help="JSON array of [value, weight] pairs for a discrete law")
        p.add_argument("--nodes", type=int, help="atom count for the uniform law")
        p.add_argument("--t", type=float)
        p.add_argument("--h", type=float)
        p.add_argument("--x", type=float)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--q", type=float)
        p.add_argument("--q-from", dest="q_from", help="take q from an rs-solve result file")
        p.add_argument("--n", help="system size or comma-separated list")
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--hermite-order", dest="hermite_order", type=int)
        p.add_argument("--lipschitz-xmax", dest="lipschitz_xmax", type=float)
        p.add_argument("--no-antithetic", dest="antithetic", action="store_const", const=False)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="write the JSON result here instead of stdout")
        p.add_argument("--csv", help="also write a CSV table")
    return parser


def resolve_config(argv) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    data = load_file(args.config) if args.config else {}
    if data.get("command") not in (None, args.command):
        raise ConfigError(f"config is for {data['command']!r}, not {args.command!r}")
    data["command"] = args.command
    if args.dist or args.atoms or args.nodes:
        dist = dict(data.get("dist") or {})
        if isinstance(data.get("dist"), str):
            dist = {"kind": data["dist"]}
        if args.dist:
            dist = {"kind": args.dist}
        if args.atoms:
            try:
                dist["atoms"] = json.loads(args.atoms)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"--atoms is not JSON: {exc}") from exc
            dist.setdefault("kind", "discrete")
        if args.nodes:
            dist["nodes"] = args.nodes
        data["dist"] = dist
    for key in ("t", "h", "x", "q", "q_from", "n", "samples", "seed", "steps", "hermite_order",
                "lipschitz_xmax", "antithetic", "workers", "out", "csv"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if args.lam is not None:
        data["lambda"] = args.lam
    try:
        cfg = from_mapping(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.q is None and cfg.q_from:
        cfg.q = q_from_result(cfg.q_from)
    return cfg.validate()


def _analytics(cfg: ExperimentConfig) -> LinearModelAnalytics:
    return LinearModelAnalytics.build(cfg.dist.build(), cfg.h, cfg.hermite_order)


def _resolve_q(cfg: ExperimentConfig, la: LinearModelAnalytics) -> float:
    if cfg.q is not None:
        return cfg.q
    return solve_fixed_point(la, cfg.t, t_c=t_c_estimate(la, cfg.lipschitz_xmax)).q_c


def run_command(cfg: ExperimentConfig) -> tuple[dict, list[dict]]:
    """Run one experiment; returns (report, csv rows)."""
    dist = cfg.dist.build()
    la = _analytics(cfg)
    if cfg.command == "rs-solve":
        sol = solve_fixed_point(la, cfg.t, t_c=t_c_estimate(la, cfg.lipschitz_xmax))
        return sol.to_dict(), [sol.to_dict()]

    if cfg.command == "linear":
        report = {
            "x": cfg.x, "h": cfg.h, "q_lin": la.q_lin(cfg.x), "alpha_lin": la.alpha_lin(cfg.x),
            "dq_lin_dx": la.dq_lin_dx(cfg.x), "lipschitz_bound": la.lipschitz_bound(cfg.lipschitz_xmax),
        }
        rows = [ex.linear_overlap_check(dist, n, cfg.x, cfg.h, cfg.samples, cfg.seed,
                                        cfg.hermite_order, cfg.workers) for n in cfg.n]
        report["overlap_checks"] = rows
        return report, rows

    if cfg.command == "simulate":
        report = ex.convergence_experiment(dist, cfg.n, cfg.t, cfg.h, cfg.samples, cfg.seed,
                                           cfg.hermite_order, cfg.workers)
        return report, report["rows"]

    if cfg.command == "interpolate":
        q = _resolve_q(cfg, la)
        reports = {}
        rows = []
        for n in cfg.n:
            r = ex.interpolation_experiment(dist, n, cfg.t, cfg.h, q, cfg.steps, cfg.samples, cfg.seed,
                                            workers=cfg.workers, antithetic=cfg.antithetic,
                                            hermite_order=cfg.hermite_order)
            reports[str(n)] = r.to_dict()
            rows += [{"n": n, **row} for row in r.csv_rows()]
        return {"q": q, "by_n": reports}, rows

    if cfg.command == "verify-ibp":
        out = {"single": {}, "coupled": {}}
        rows = []
        for n in cfg.n:
            r = ex.verify_ibp_single(dist, n, cfg.t, cfg.x, cfg.h, cfg.samples, cfg.seed,
                                     workers=cfg.workers, antithetic=cfg.antithetic)
            out["single"][str(n)] = r.to_dict()
            rows += [{"n": n, "kind": "single", **_flat(c)} for c in r.to_dict()["checks"]]
            if cfg.lam is not None:
                q = _resolve_q(cfg, la)
                c = ex.verify_ibp_coupled(dist, n, cfg.t, cfg.x, cfg.h, cfg.lam, q, cfg.samples,
                                          cfg.seed, workers=cfg.workers, antithetic=cfg.antithetic)
                out["coupled"][str(n)] = c.to_dict()
                rows += [{"n": n, "kind": "coupled", **_flat(k)} for k in c.to_dict()["checks"]]
        return out, rows

    if cfg.command == "concentration":
        report = ex.concentration_experiment(dist, cfg.n, cfg.x, cfg.h, cfg.lam, cfg.samples,
                                             cfg.seed, hermite_order=cfg.hermite_order,
                                             workers=cfg.workers)
        return report, report["rows"]
    raise ConfigError(f"unknown command {cfg.command!r}")


def _flat(d: dict) -> dict:
    return {k: v for k, v in d.items() if not isinstance(v, (dict, list))}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_csv(path: str, rows: list[dict]) -> None:
    rows = [_flat(r) for r in rows]
    fields: list[str] = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _error_doc(code: int, kind: str, exc: Exception, **extra) -> dict:
    return {"status": "error", "exit_code": code, "error": kind, "message": str(exc), **extra}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(argv)
    except ConfigError as exc:
        _emit(_error_doc(EXIT_CONFIG, "config", exc), None)
        return EXIT_CONFIG
    if cfg.seed_defaulted:
        log.info("no seed given; using default %d", cfg.seed)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        report, rows = run_command(cfg)
    except ConfigError as exc:
        _emit(_error_doc(EXIT_CONFIG, "config", exc), cfg.out)
        return EXIT_CONFIG
    except BudgetError as exc:
        _emit(_error_doc(EXIT_BUDGET, "budget", exc), cfg.out)
        return EXIT_BUDGET
    except ConvergenceError as exc:
        _emit(_error_doc(EXIT_NUMERICAL, "convergence", exc, last_iterate=exc.last_iterate,
                         residual=exc.residual), cfg.out)
        return EXIT_NUMERICAL
    except ValueError as exc:
        _emit(_error_doc(EXIT_CONFIG, "config", exc), cfg.out)
        return EXIT_CONFIG
    doc = {
        "status": "ok",
        "command": cfg.command,
        "config": cfg.echo(),
        "seed_defaulted": cfg.seed_defaulted,
        "version": __version__,
        "started_at": started,
        "wall_time_s": time.perf_counter() - t0,
        "report": report,
    }
    _emit(doc, cfg.out)
    if cfg.csv:
        write_csv(cfg.csv, rows)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
