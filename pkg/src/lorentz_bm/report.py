"""Verification records shared by every checker in the package."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

CSV_COLUMNS = (
    "kind", "K", "N", "q", "t", "Nprime", "lhs", "rhs",
    "margin", "pass", "reason", "resolution", "seed",
)


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _json_number(value: float | None) -> float | str | None:
    # JSON has no infinities; mirror the "-inf" string used by the space schema.
    if value is None:
        return None
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return value


@dataclass
class CheckRow:
    """One evaluated inequality ``lhs >= rhs`` (or ``<=``) at fixed parameters.

    ``margin`` is always oriented so that a non-negative margin means the
    inequality holds exactly; ``passed`` compares it against the tolerance.
    """

    kind: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    K: float | None = None
    N: float | None = None
    q: float | None = None
    t: float | None = None
    Nprime: float | None = None
    reason: str = ""
    resolution: int | None = None
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "params": {
                "K": self.K, "N": self.N, "q": self.q,
                "t": self.t, "Nprime": self.Nprime,
            },
            "lhs": _json_number(self.lhs),
            "rhs": _json_number(self.rhs),
            "pass": bool(self.passed),
            "margin": _json_number(self.margin),
            "reason": self.reason,
        }

    def csv_values(self) -> list[str]:
        d = {
            "kind": self.kind, "K": self.K, "N": self.N, "q": self.q,
            "t": self.t, "Nprime": self.Nprime, "lhs": self.lhs,
            "rhs": self.rhs, "margin": self.margin, "pass": self.passed,
            "reason": self.reason, "resolution": self.resolution,
            "seed": self.seed,
        }
        return [_fmt(d[c]) for c in CSV_COLUMNS]

    def sort_key(self) -> tuple:
        def k(v):
            return (v is None, -math.inf if v is None else v)
        return (self.kind, k(self.t), k(self.Nprime), k(self.resolution), k(self.seed))


@dataclass
class VerificationReport:
    """Outcome of one verifier call.

    ``rows`` hold evaluated inequalities; ``violations`` hold concrete
    offending witnesses (index triples, permutations, ...) for combinatorial
    checks, capped at ``cap`` entries while ``n_violations`` keeps the full count.
    """

    kind: str
    rows: list[CheckRow] = field(default_factory=list)
    violations: list = field(default_factory=list)
    n_violations: int = 0
    cap: int = 100
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.n_violations == 0 and all(r.passed for r in self.rows)

    def __bool__(self) -> bool:
        return self.passed

    def add_violation(self, witness) -> None:
        self.n_violations += 1
        if len(self.violations) < self.cap:
            self.violations.append(witness)

    @property
    def min_margin(self) -> float:
        return min((r.margin for r in self.rows), default=math.inf)

    def sorted_rows(self) -> list[CheckRow]:
        return sorted(self.rows, key=CheckRow.sort_key)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "pass": self.passed,
            "n_violations": self.n_violations,
            "violations": [list(map(_witness_json, v)) if isinstance(v, tuple) else _witness_json(v)
                           for v in self.violations],
            "rows": [r.to_json() for r in self.sorted_rows()],
        }


def _witness_json(v):
    if isinstance(v, (list, tuple)):
        return [_witness_json(x) for x in v]
    if hasattr(v, "item"):
        return v.item()
    return v


def rows_to_csv(rows: Iterable[CheckRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in sorted(rows, key=CheckRow.sort_key):
        writer.writerow(row.csv_values())
    return buf.getvalue()


def merge_reports(kind: str, reports: Sequence[VerificationReport]) -> VerificationReport:
    merged = VerificationReport(kind)
    for rep in reports:
        merged.rows.extend(rep.rows)
        merged.violations.extend(rep.violations[: max(0, merged.cap - len(merged.violations))])
        merged.n_violations += rep.n_violations
    return merged


def _parse_cell(text: str):
    if text == "":
        return None
    return float(text)


def row_from_csv(record: dict) -> CheckRow:
    """Inverse of :meth:`CheckRow.csv_values` for one ``csv.DictReader`` record."""
    missing = set(CSV_COLUMNS) - set(record)
    if missing:
        raise ValueError(f"CSV row lacks columns {sorted(missing)}")
    res = _parse_cell(record["resolution"])
    seed = record["seed"]
    return CheckRow(
        kind=record["kind"],
        lhs=float(record["lhs"]),
        rhs=float(record["rhs"]),
        margin=float(record["margin"]),
        passed=record["pass"] == "true",
        K=_parse_cell(record["K"]),
        N=_parse_cell(record["N"]),
        q=_parse_cell(record["q"]),
        t=_parse_cell(record["t"]),
        Nprime=_parse_cell(record["Nprime"]),
        reason=record["reason"],
        resolution=None if res is None else int(res),
        seed=None if seed == "" else int(seed),
    )


def read_csv_rows(text: str) -> list[CheckRow]:
    reader = csv.DictReader(io.StringIO(text))
    return [row_from_csv(r) for r in reader]
