"""Check reports and their text / json-lines rendering.

The json-lines format deliberately omits wall-clock timing so that two runs
with the same configuration and seed produce byte-identical reports; the
human-readable text format shows the timing.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass
class CheckReport:
    check_id: str
    family: str
    params: dict
    status: str
    witness: Optional[str] = None
    detail: dict = field(default_factory=dict)
    wall_ms: float = 0.0

    def ok(self) -> bool:
        return self.status == PASS


def run_check(check_id: str, family: str, params: dict,
              fn: Callable[[], tuple]) -> CheckReport:
    """Time a check body returning (ok, covered, witness, detail)."""
    t0 = time.perf_counter()
    ok, covered, witness, detail = fn()
    wall = (time.perf_counter() - t0) * 1000.0
    if not ok:
        status = FAIL
    elif not covered:
        status = INCONCLUSIVE
        witness = witness or "guaranteed window does not cover the requested box"
    else:
        status = PASS
        witness = None
    return CheckReport(check_id, family, params, status, witness, detail, wall)


def _canonical(params: dict) -> dict:
    out = {}
    for k in sorted(params):
        v = params[k]
        out[k] = str(v) if not isinstance(v, (int, str, bool)) else v
    return out


def emit_text(reports: list[CheckReport]) -> str:
    lines = []
    for r in reports:
        ps = " ".join(f"{k}={v}" for k, v in _canonical(r.params).items())
        extra = ""
        if r.detail:
            extra = " [" + " ".join(f"{k}={v}" for k, v in sorted(r.detail.items())) + "]"
        wit = f" witness: {r.witness}" if r.witness else ""
        lines.append(f"{r.status.upper():12s} {r.check_id:22s} {ps}{extra}{wit} "
                     f"({r.wall_ms:.1f} ms)")
    return "\n".join(lines) + ("\n" if lines else "")


def emit_jsonl(reports: list[CheckReport]) -> str:
    lines = []
    for r in reports:
        rec = {
            "check_id": r.check_id,
            "family": r.family,
            "params": _canonical(r.params),
            "status": r.status,
            "witness": r.witness,
            "detail": {k: str(v) if not isinstance(v, (int, str, bool)) else v
                       for k, v in sorted(r.detail.items())},
        }
        lines.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")
