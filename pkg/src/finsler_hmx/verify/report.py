"""Check records, reports and their machine / human serializations."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped: precondition"
EXPLORATORY = "exploratory"
STATUSES = (PASS, FAIL, SKIPPED, EXPLORATORY)

CONVENTIONS = {
    "v_derivative": "unscaled: X_i|_j = dot_j X_i - X_r C^r_ij",
    "normal_sign": "last component of B^i non-negative; ties: first nonzero component positive",
    "residual": "max|lhs - rhs| / max(1, max|lhs|, max|rhs|)",
}


def scaled_residual(lhs, rhs) -> float:
    """max|lhs - rhs| relative to max(1, max|lhs|, max|rhs|)."""
    a = np.asarray(lhs, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if a.size == 0 and b.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
    return float(np.max(np.abs(a - b), initial=0.0)) / scale


def jsonable(o):
    """Arrays and numpy scalars to plain lists and floats, recursively."""
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, dict):
        return {str(k): jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [jsonable(v) for v in o]
    return o


def digest(obj) -> str:
    """Short stable hash of JSON-able inputs (arrays allowed)."""

    def enc(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(type(o).__name__)

    text = json.dumps(obj, sort_keys=True, default=enc, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class CheckRecord:
    check_id: str
    ref: str
    residual: float | None
    tolerance: float | None
    tolerance_basis: str
    status: str
    inputs_digest: str = ""
    conventions: tuple[str, ...] = ()
    note: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def gating(self) -> bool:
        return self.status != EXPLORATORY

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conventions"] = list(self.conventions)
        d["kind"] = "check"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CheckRecord":
        d = {k: v for k, v in d.items() if k != "kind"}
        d["conventions"] = tuple(d.get("conventions", ()))
        return cls(**d)


def check(
    check_id: str,
    ref: str,
    residual: float,
    tolerance: float,
    basis: str,
    digest_of=None,
    conventions: Iterable[str] = (),
    note: str = "",
) -> CheckRecord:
    """Record with pass/fail decided by ``residual < tolerance``; NaN fails."""
    residual = float(residual)
    status = PASS if residual < tolerance else FAIL
    return CheckRecord(
        check_id, ref, residual, float(tolerance), basis, status,
        digest(digest_of) if digest_of is not None else "", tuple(conventions), note,
    )


def skipped(check_id: str, ref: str, tolerance: float, basis: str, reason: str, digest_of=None) -> CheckRecord:
    return CheckRecord(
        check_id, ref, None, float(tolerance), basis, SKIPPED,
        digest(digest_of) if digest_of is not None else "", (), reason,
    )


def exploratory(check_id: str, ref: str, residual: float, note: str = "", digest_of=None) -> CheckRecord:
    return CheckRecord(
        check_id, ref, float(residual), None, "exploratory, non-gating", EXPLORATORY,
        digest(digest_of) if digest_of is not None else "", (), note,
    )


@dataclass
class Report:
    command: str
    header: dict = field(default_factory=dict)
    checks: list[CheckRecord] = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def add(self, *records: CheckRecord) -> None:
        self.checks.extend(records)

    def put(self, key: str, value) -> None:
        """Attach a computed value (not a check) under ``key``."""
        self.data[key] = jsonable(value)

    def sorted_checks(self) -> list[CheckRecord]:
        return sorted(self.checks, key=lambda c: c.check_id)

    @property
    def status(self) -> str:
        return FAIL if any(c.status == FAIL for c in self.checks) else PASS

    def counts(self) -> dict[str, int]:
        out = {s: 0 for s in STATUSES}
        for c in self.checks:
            out[c.status] += 1
        return out

    @property
    def exit_code(self) -> int:
        return 0 if self.status == PASS else 1

    # serialization -----------------------------------------------------------

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "header", "command": self.command, **self.header}, sort_keys=True)]
        lines += [json.dumps({"kind": "data", "key": k, "value": self.data[k]}, sort_keys=True) for k in sorted(self.data)]
        lines += [json.dumps(c.to_dict(), sort_keys=True) for c in self.sorted_checks()]
        lines.append(json.dumps({"kind": "summary", "status": self.status, "counts": self.counts()}, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Report":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        head = rows[0]
        if head.get("kind") != "header":
            raise ValueError("report must start with a header record")
        header = {k: v for k, v in head.items() if k not in ("kind", "command")}
        checks = [CheckRecord.from_dict(r) for r in rows if r.get("kind") == "check"]
        data = {r["key"]: r["value"] for r in rows if r.get("kind") == "data"}
        return cls(head["command"], header, checks, data)

    def to_table(self) -> str:
        recs = self.sorted_checks()
        w = max([len(c.check_id) for c in recs] + [8])
        lines = [f"{self.command}: {self.status}  " + " ".join(f"{k}={v}" for k, v in self.counts().items() if v)]
        lines.append(f"{'check':<{w}}  {'status':<22}  {'residual':<24}  tolerance")
        for c in recs:
            res = "-" if c.residual is None else repr(c.residual)
            lines.append(f"{c.check_id:<{w}}  {c.status:<22}  {res:<24}  {'-' if c.tolerance is None else repr(c.tolerance)}")
            if c.note and c.status in (SKIPPED, FAIL):
                lines.append(f"{'':<{w}}  note: {c.note}")
        for k in sorted(self.data):
            lines.append(f"{k} = {json.dumps(self.data[k], sort_keys=True)}")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str = "machine") -> str:
        if fmt == "machine":
            return self.to_jsonl()
        if fmt == "human":
            return self.to_table()
        raise ValueError(f"unknown format {fmt!r}")


def emit_report(report: Report, fmt: str = "machine", path=None) -> str:
    text = report.render(fmt)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
