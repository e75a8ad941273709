"""Experiment configuration and the batch runner behind the command line.

A config is one JSON document::

    {
      "schema": "lorentz-bm/1",
      "space": {"grid": {"bounds": [[0, 4], [-2, 2]], "resolution": 32}},
      "measures": {"type": "boxes", "source": [[0.5, 1], [-0.25, 0.25]],
                   "target": [[3, 3.5], [0, 0.5]]},
      "conditions": [{"kind": "TBM", "K": 0, "N": 2}],
      "resolutions": [32, 64],
      "tol_model": "richardson",
      "seed": 0
    }

Trial ``j`` of a seeded family draws from ``numpy.random.default_rng(seed + j)``
(PCG64), so trials are reproducible one by one and independent of ``--jobs``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .causal import CausalError, FiniteCausalSpace
from .conditions import KINDS, ConditionSpec, verify_condition
from .measures import DiscreteMeasure, MeasureError, dirac, uniform_measure
from .minkowski import GridError, GridSpec, OutOfDomain, grid_sample
from .report import CheckRow, VerificationReport
from .transport import NotTimelike, TransportError, plan_between

SCHEMA = "lorentz-bm/1"
MEASURE_TYPES = ("boxes", "random_boxes", "dirac", "weights")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _fields(doc: Any, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"{path}: unknown field(s) {sorted(extra)}")
    missing = set(required) - set(doc)
    if missing:
        raise ConfigError(f"{path}: missing field(s) {sorted(missing)}")
    return doc


def _box(value: Any, path: str, dim: int | None) -> tuple[tuple[float, float], ...]:
    try:
        box = tuple((float(lo), float(hi)) for lo, hi in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a list of [lo, hi] pairs") from None
    if dim is not None and len(box) != dim:
        raise ConfigError(f"{path}: box has {len(box)} axes, space has {dim}")
    for i, (lo, hi) in enumerate(box):
        if not lo < hi:
            raise ConfigError(f"{path}[{i}]: need lo < hi, got [{lo}, {hi}]")
    return box


def _point(value: Any, path: str, dim: int | None) -> tuple[float, ...]:
    try:
        p = tuple(float(x) for x in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a coordinate list") from None
    if dim is not None and len(p) != dim:
        raise ConfigError(f"{path}: point has {len(p)} coordinates, space has {dim}")
    return p


@dataclass
class SpaceConfig:
    grid: GridSpec | None = None
    file: str | None = None

    @classmethod
    def parse(cls, doc: Any, base: Path) -> "SpaceConfig":
        doc = _fields(doc, "space", {"grid", "file"})
        if ("grid" in doc) == ("file" in doc):
            raise ConfigError("space: give exactly one of 'grid' or 'file'")
        if "grid" in doc:
            g = _fields(doc["grid"], "space.grid", {"bounds", "resolution"}, {"bounds", "resolution"})
            try:
                bounds = _box(g["bounds"], "space.grid.bounds", None)
                return cls(grid=GridSpec(bounds, g["resolution"]))
            except GridError as exc:
                raise ConfigError(f"space.grid: {exc}") from None
            except TypeError:
                raise ConfigError("space.grid.resolution: expected an integer or list of integers") from None
        return cls(file=str((base / doc["file"]).resolve()))

    @property
    def dim(self) -> int | None:
        return self.grid.dim if self.grid is not None else None


@dataclass
class MeasureConfig:
    """How the measure pair (or set pair) of each trial is built."""

    type: str
    source: tuple | None = None
    target: tuple | None = None
    source_point: tuple | None = None
    target_point: tuple | None = None
    weights: tuple[list, list] | None = None
    side: float = 0.5
    separation: float = 3.0
    jitter: float = 0.5
    trials: int = 1
    aligned: bool = True

    @classmethod
    def parse(cls, doc: Any, dim: int | None) -> "MeasureConfig":
        doc = _fields(doc, "measures", {
            "type", "source", "target", "source_point", "target_point",
            "mu0", "mu1", "side", "separation", "jitter", "trials", "aligned",
        }, {"type"})
        kind = doc["type"]
        if kind not in MEASURE_TYPES:
            raise ConfigError(f"measures.type: expected one of {MEASURE_TYPES}, got {kind!r}")
        out = cls(kind)
        if kind == "boxes":
            _fields(doc, "measures", set(doc), {"source", "target"})
            out.source = _box(doc["source"], "measures.source", dim)
            out.target = _box(doc["target"], "measures.target", dim)
        elif kind == "dirac":
            _fields(doc, "measures", set(doc), {"source_point", "target_point"})
        elif kind == "weights":
            _fields(doc, "measures", set(doc), {"mu0", "mu1"})
            out.weights = (list(doc["mu0"]), list(doc["mu1"]))
        if "source_point" in doc:
            out.source_point = _point(doc["source_point"], "measures.source_point", dim)
        if "target_point" in doc:
            out.target_point = _point(doc["target_point"], "measures.target_point", dim)
        for key in ("side", "separation", "jitter"):
            if key in doc:
                setattr(out, key, float(doc[key]))
        if "trials" in doc:
            out.trials = int(doc["trials"])
            if out.trials < 1:
                raise ConfigError("measures.trials: must be >= 1")
        if "aligned" in doc:
            out.aligned = bool(doc["aligned"])
        if kind == "random_boxes" and (out.side <= 0 or out.separation <= out.side):
            raise ConfigError("measures: need 0 < side < separation")
        if kind != "random_boxes":
            out.trials = 1
        return out


@dataclass
class ExperimentConfig:
    space: SpaceConfig
    measures: MeasureConfig
    conditions: list[ConditionSpec] = field(default_factory=list)
    q: float = 0.5
    seed: int = 0
    resolutions: list[int] | None = None
    tol_model: str = "fixed"
    snap: str = "auto"
    csv: str = "report.csv"
    json: str = "report.json"

    @classmethod
    def from_dict(cls, doc: Any, base: Path | str = ".") -> "ExperimentConfig":
        base = Path(base)
        doc = _fields(doc, "config", {
            "schema", "space", "measures", "conditions", "q", "seed",
            "resolutions", "tol_model", "snap", "output",
        }, {"schema", "space"})
        if doc["schema"] != SCHEMA:
            raise ConfigError(f"schema: expected {SCHEMA!r}, got {doc['schema']!r}")
        space = SpaceConfig.parse(doc["space"], base)
        measures = MeasureConfig.parse(doc["measures"], space.dim) if "measures" in doc else None
        conds = []
        for i, c in enumerate(doc.get("conditions", [])):
            c = _fields(c, f"conditions[{i}]", {"kind", "K", "N", "q", "t_grid", "nprime_grid", "C"}, {"kind"})
            try:
                conds.append(ConditionSpec(**c))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"conditions[{i}]: {exc}") from None
        cfg = cls(space, measures, conds)
        if "q" in doc:
            cfg.q = float(doc["q"])
            if not 0 < cfg.q < 1:
                raise ConfigError("q: must lie in (0, 1)")
        if "seed" in doc:
            cfg.seed = _seed(doc["seed"], "seed")
        if "resolutions" in doc:
            res = doc["resolutions"]
            if not isinstance(res, list) or not res or not all(isinstance(r, int) and r >= 1 for r in res):
                raise ConfigError("resolutions: expected a nonempty list of positive integers")
            cfg.resolutions = list(res)
        if "tol_model" in doc:
            cfg.tol_model = doc["tol_model"]
        if cfg.tol_model not in ("fixed", "richardson"):
            raise ConfigError("tol_model: expected 'fixed' or 'richardson'")
        if "snap" in doc:
            cfg.snap = doc["snap"]
            if cfg.snap not in ("auto", "cell", "box"):
                raise ConfigError("snap: expected 'auto', 'cell' or 'box'")
        if "output" in doc:
            out = _fields(doc["output"], "output", {"csv", "json"})
            cfg.csv = out.get("csv", cfg.csv)
            cfg.json = out.get("json", cfg.json)
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        text = path.read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(doc, path.parent)

    def grid_resolutions(self) -> list[int | tuple[int, ...]]:
        """Resolutions to run: one for ``fixed``, a coarse/fine pair for ``richardson``."""
        if self.space.grid is None:
            if self.tol_model == "richardson":
                raise ConfigError("tol_model 'richardson' needs a grid space")
            return [0]
        base = self.resolutions[0] if self.resolutions else self.space.grid.resolution
        if self.tol_model == "fixed":
            return [base]
        if self.resolutions and len(self.resolutions) >= 2:
            fine = self.resolutions[1]
            if fine != 2 * self.resolutions[0]:
                raise ConfigError("resolutions: richardson mode needs [r, 2r]")
            return [base, fine]
        fine = tuple(2 * r for r in base) if isinstance(base, tuple) else 2 * base
        return [base, fine]


def _seed(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2 ** 64:
        raise ConfigError(f"{path}: expected an unsigned 64-bit integer")
    return int(value)


# -- trials -------------------------------------------------------------------


@dataclass
class Placement:
    """Continuum data of one trial: two boxes and optional points."""

    source: tuple | None
    target: tuple | None
    source_point: tuple | None
    target_point: tuple | None


def draw_placement(cfg: ExperimentConfig, trial: int) -> Placement:
    m = cfg.measures
    if m.type != "random_boxes":
        return Placement(m.source, m.target, m.source_point, m.target_point)
    grid = cfg.space.grid
    if grid is None:
        raise ConfigError("measures: random_boxes needs a grid space")
    coarse = GridSpec(grid.bounds, cfg.grid_resolutions()[0])
    rng = np.random.default_rng(cfg.seed + trial)
    lo, hi = grid.lo, grid.hi
    s, sep, jit = m.side, m.separation, m.jitter
    t_room = (hi[0] - lo[0]) - sep - s
    x_room = (hi[1:] - lo[1:]) - s - 2 * jit
    if t_room < 0 or np.any(x_room < 0):
        raise ConfigError("measures: boxes do not fit in the grid bounds")
    corner = np.empty(grid.dim)
    corner[0] = lo[0] + t_room * rng.random()
    corner[1:] = lo[1:] + jit + x_room * rng.random(grid.dim - 1)
    shift = np.empty(grid.dim)
    shift[0] = sep
    shift[1:] = jit * (2 * rng.random(grid.dim - 1) - 1)
    side = np.full(grid.dim, s)
    if m.aligned:
        e = coarse.edges
        corner = lo + np.round((corner - lo) / e) * e
        shift = np.round(shift / e) * e
        side = np.maximum(np.round(side / e), 1) * e
    src = tuple((float(a), float(a + w)) for a, w in zip(corner, side))
    tgt = tuple((float(a + d), float(a + d + w)) for a, d, w in zip(corner, shift, side))
    tp = m.target_point or tuple(float(0.5 * (a + b)) for a, b in tgt)
    return Placement(src, tgt, m.source_point, tp)


def _snap_for(cfg: ExperimentConfig, kind: str) -> str:
    if cfg.snap != "auto":
        return cfg.snap
    return "box" if kind in ("TMCP", "TMCPe") else "cell"


def _failure(spec: ConditionSpec, exc: Exception) -> VerificationReport:
    rep = VerificationReport(spec.kind, info={"error": str(exc)})
    rep.rows.append(CheckRow(spec.kind, math.nan, math.nan, -math.inf, False,
                             K=spec.K, N=spec.N, q=spec.q, reason=type(exc).__name__))
    return rep


def _index_sets(space: FiniteCausalSpace, grid: GridSpec | None, pl: Placement):
    A = B = None
    x0 = None
    if pl.source is not None:
        A = grid.box_cells(pl.source)
        B = grid.box_cells(pl.target)
    if pl.source_point is not None and grid is not None:
        A = grid.locate(np.array([pl.source_point]))
    if pl.target_point is not None and grid is not None:
        x0 = int(grid.locate(np.array([pl.target_point]))[0])
        if pl.target is None:
            B = np.array([x0])
    if A is not None and (A.size == 0 or B is None or B.size == 0):
        raise MeasureError("a box contains no cell centers at this resolution")
    return A, B, x0


def build_measures(cfg: ExperimentConfig, space: FiniteCausalSpace, grid: GridSpec | None, pl: Placement):
    """(mu0, mu1, A, B, x0) for one trial at one resolution."""
    if cfg.measures.type == "weights":
        mu0 = DiscreteMeasure(space, cfg.measures.weights[0])
        mu1 = DiscreteMeasure(space, cfg.measures.weights[1])
        x0 = int(mu1.support[0]) if mu1.support.size == 1 else None
        return mu0, mu1, mu0.support, mu1.support, x0
    A, B, x0 = _index_sets(space, grid, pl)
    return uniform_measure(space, A), uniform_measure(space, B), A, B, x0


def _load_space(cfg: ExperimentConfig, res) -> tuple[FiniteCausalSpace, GridSpec | None]:
    if cfg.space.grid is None:
        space = FiniteCausalSpace.load(cfg.space.file)
        return space, space.grid
    grid = GridSpec(cfg.space.grid.bounds, res)
    return grid_sample(grid), grid


def _res_label(res) -> int:
    return int(max(res)) if isinstance(res, tuple) else int(res)


def run_trial(cfg: ExperimentConfig, trial: int) -> list[tuple[int, str, VerificationReport]]:
    """All conditions of one trial at every resolution."""
    pl = draw_placement(cfg, trial)
    seed = cfg.seed + trial
    out = []
    for res in cfg.grid_resolutions():
        space, grid = _load_space(cfg, res)
        h = grid.h if grid is not None else 1.0
        mu0, mu1, A, B, x0 = build_measures(cfg, space, grid, pl)
        plans: dict = {}
        for spec in cfg.conditions:
            tol = spec.C * h
            try:
                plan = None
                if spec.kind in ("TMCP", "TMCPe"):
                    if x0 is None:
                        raise ConfigError("TMCP conditions need a target point")
                    key = (spec.q, "tmcp", _snap_for(cfg, spec.kind))
                    if key not in plans:
                        plans[key] = plan_between(mu0, dirac(space, x0), spec.q, snap=key[2], extent=(1.0, 0.0))
                    plan = plans[key]
                elif spec.kind != "TBM":
                    key = (spec.q, "pair", _snap_for(cfg, spec.kind))
                    if key not in plans:
                        plans[key] = plan_between(mu0, mu1, spec.q, snap=key[2])
                    plan = plans[key]
                rep = verify_condition(spec, mu0, mu1, plan, A=A, B=B, x0=x0, grid=grid, tol=tol)
            except (NotTimelike, OutOfDomain) as exc:
                rep = _failure(spec, exc)
            for row in rep.rows:
                row.resolution = _res_label(res) if grid is not None else None
                row.seed = seed
            rep.info["tol"] = tol
            out.append((_res_label(res) if grid is not None else 0, spec.kind, rep))
    return out


def richardson_rows(rows: list[CheckRow], C_by_kind: dict[str, float], h_coarse: float, r_coarse: int, r_fine: int) -> list[CheckRow]:
    """Extrapolated rows ``2 m_fine - m_coarse`` tagged ``resolution = 0``.

    The extrapolated margin must stay above ``-C h_fine``; it removes the
    O(h) snapping bias so a systematic violation would show up here.
    """
    def key(r):
        return (r.kind, r.t, r.Nprime, r.seed, r.K, r.N, r.q)

    coarse = {key(r): r for r in rows if r.resolution == r_coarse}
    out = []
    for r in rows:
        if r.resolution != r_fine or key(r) not in coarse:
            continue
        c = coarse[key(r)]
        tol = C_by_kind[r.kind] * h_coarse / 2
        reason = r.reason or c.reason
        if reason:
            m = -math.inf
        else:
            m = 2 * r.margin - c.margin
        lhs = 2 * r.lhs - c.lhs if not reason else math.nan
        rhs = 2 * r.rhs - c.rhs if not reason else math.nan
        out.append(CheckRow(r.kind, lhs, rhs, m, bool(not reason and m >= -tol),
                            K=r.K, N=r.N, q=r.q, t=r.t, Nprime=r.Nprime,
                            reason=reason, resolution=0, seed=r.seed))
    return out


@dataclass
class ExperimentResult:
    rows: list[CheckRow]
    reports: list[tuple[int, int, str, VerificationReport]]
    config: ExperimentConfig

    @property
    def passed(self) -> bool:
        return bool(self.rows) and all(r.passed for r in self.rows) and all(
            rep.n_violations == 0 for *_, rep in self.reports)

    def sorted_rows(self) -> list[CheckRow]:
        return sorted(self.rows, key=CheckRow.sort_key)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "pass": self.passed,
            "seed": self.config.seed,
            "tol_model": self.config.tol_model,
            "reports": [
                {"trial": trial, "resolution": res, **rep.to_json(),
                 "info": {k: v for k, v in sorted(rep.info.items())}}
                for trial, res, _, rep in self.reports
            ],
        }


def _trial_worker(args):
    cfg, trial = args
    return trial, run_trial(cfg, trial)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Run every trial (in a process pool when ``jobs > 1``) and assemble rows."""
    if not cfg.conditions:
        raise ConfigError("conditions: at least one condition is required")
    if cfg.measures is None:
        raise ConfigError("measures: required for verification")
    trials = range(cfg.measures.trials)
    if jobs > 1 and len(trials) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial_worker, [(cfg, j) for j in trials]))
    else:
        results = [_trial_worker((cfg, j)) for j in trials]
    results.sort(key=lambda x: x[0])
    reports, rows = [], []
    for trial, items in results:
        for res, _, rep in items:
            reports.append((trial, res, rep.kind, rep))
            rows.extend(rep.rows)
    resolutions = cfg.grid_resolutions()
    if cfg.tol_model == "richardson":
        rc, rf = (_res_label(r) for r in resolutions)
        h = GridSpec(cfg.space.grid.bounds, resolutions[0]).h
        C = {s.kind: s.C for s in cfg.conditions}
        rows.extend(richardson_rows(rows, C, h, rc, rf))
    return ExperimentResult(rows, reports, cfg)
