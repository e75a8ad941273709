"""Command line: ``lorentz-bm {gen, solve-lq, verify, report-merge}``.

Exit codes: 0 when everything requested passes, 1 when a verification
fails, 2 for configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .causal import CausalError
from .experiment import (
    ConfigError,
    ExperimentConfig,
    _load_space,
    build_measures,
    draw_placement,
    run_experiment,
)
from .measures import MeasureError
from .minkowski import GridError, OutOfDomain
from .report import _fmt, read_csv_rows, rows_to_csv
from .transport import TransportError, solve_lq

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
_CONFIG_ERRORS = (ConfigError, GridError, CausalError, MeasureError, OutOfDomain, OSError, json.JSONDecodeError)


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "tol_model", None):
        cfg.tol_model = args.tol_model
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args) -> int:
    cfg = _load(args)
    if cfg.space.grid is None:
        raise ConfigError("space: gen needs a grid spec")
    res = cfg.resolutions[0] if cfg.resolutions else cfg.space.grid.resolution
    space, _ = _load_space(cfg, res)
    path = _out_dir(args) / "space.json"
    space.save(path)
    print(f"wrote {path} ({space.n} points)")
    return EXIT_OK


def cmd_solve_lq(args) -> int:
    cfg = _load(args)
    if cfg.measures is None:
        raise ConfigError("measures: required for solve-lq")
    res = cfg.grid_resolutions()[0]
    space, grid = _load_space(cfg, res)
    mu0, mu1, *_ = build_measures(cfg, space, grid, draw_placement(cfg, 0))
    value, coupling = solve_lq(mu0, mu1, cfg.q)
    doc = coupling.to_json()
    doc["lq"] = _fmt(float(value)) if value == float("-inf") else float(value)
    path = _out_dir(args) / "coupling.json"
    path.write_text(json.dumps(doc, sort_keys=True) + "\n")
    print(_fmt(round(float(value), 12)))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    result = run_experiment(cfg, jobs=max(1, args.jobs))
    out = _out_dir(args)
    (out / cfg.csv).write_text(rows_to_csv(result.rows))
    (out / cfg.json).write_text(json.dumps(result.to_json(), sort_keys=True, indent=1) + "\n")
    n_fail = sum(not r.passed for r in result.rows)
    status = "PASS" if result.passed else "FAIL"
    print(f"{status}: {len(result.rows) - n_fail}/{len(result.rows)} rows pass; wrote {out / cfg.csv}")
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_report_merge(args) -> int:
    rows = []
    for path in args.inputs:
        try:
            rows.extend(read_csv_rows(Path(path).read_text()))
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    path = _out_dir(args) / args.name
    path.write_text(rows_to_csv(rows))
    ok = all(r.passed for r in rows)
    print(f"merged {len(rows)} rows from {len(args.inputs)} files into {path}")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lorentz-bm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="experiment JSON file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed (uint64)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
        sp.add_argument("--tol-model", choices=("fixed", "richardson"), default=None)

    common(sub.add_parser("gen", help="write a grid space as JSON"))
    common(sub.add_parser("solve-lq", help="solve ell_q between the configured measures"))
    common(sub.add_parser("verify", help="run the configured condition checks"))
    merge = sub.add_parser("report-merge", help="merge CSV reports")
    common(merge, config=False)
    merge.add_argument("inputs", nargs="+", help="CSV reports to merge")
    merge.add_argument("--name", default="merged.csv", help="output file name")
    return p


COMMANDS = {
    "gen": cmd_gen,
    "solve-lq": cmd_solve_lq,
    "verify": cmd_verify,
    "report-merge": cmd_report_merge,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
