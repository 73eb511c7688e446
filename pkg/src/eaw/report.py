"""Check records and report rendering (JSON or text), deterministic by construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

SCHEMA_VERSION = 1


def _round(x, digits: int = 4):
    """Round floats to a fixed number of significant digits so reports do not carry noise."""
    if x is None or isinstance(x, bool) or not isinstance(x, float):
        return x
    if x == 0 or not math.isfinite(x):
        return x if math.isfinite(x) else str(x)
    return float(f"{x:.{digits - 1}e}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float):
        return _round(obj)
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj).replace("**", "^")


@dataclass
class Check:
    name: str
    passed: bool
    verdict: str
    residual_max: float | None = None
    samples: int | None = None
    detail: dict = field(default_factory=dict)
    elapsed: float | None = None

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "name": self.name,
            "passed": bool(self.passed),
            "verdict": self.verdict,
            "residual_max": self.residual_max,
            "samples": self.samples,
        }
        if self.detail:
            out["detail"] = self.detail
        if timings and self.elapsed is not None:
            out["elapsed"] = round(self.elapsed, 3)
        return _clean(out)


@dataclass
class Report:
    command: str
    config: str
    digest: str
    seed: int
    checks: list = field(default_factory=list)
    timings: bool = False
    sections: list = field(default_factory=list)   # nested reports (suite)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def all_checks(self) -> list[Check]:
        out = list(self.checks)
        for s in self.sections:
            out.extend(s.all_checks())
        return out

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.all_checks())

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self) -> dict:
        checks = self.all_checks()
        out = {
            "schema": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "config_digest": self.digest,
            "seed": self.seed,
            "checks": [c.to_dict(self.timings) for c in self.checks],
            "summary": {
                "passed": sum(c.passed for c in checks),
                "failed": sum(not c.passed for c in checks),
                "ok": self.passed,
            },
        }
        if self.sections:
            out["sections"] = [s.to_dict() for s in self.sections]
        return out

    def render(self, fmt: str = "text") -> str:
        if fmt == "json":
            return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        return self._text()

    def _text(self, indent: str = "") -> str:
        lines = [f"{indent}{self.command}  config={self.config}  digest={self.digest}  seed={self.seed}"]
        width = max([len(c.name) for c in self.checks] + [10])
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            extra = ""
            if c.residual_max is not None:
                extra = f"  max={_round(float(c.residual_max), 3):g}"
            if c.samples:
                extra += f"  n={c.samples}"
            if self.timings and c.elapsed is not None:
                extra += f"  {c.elapsed:.2f}s"
            lines.append(f"{indent}  {mark}  {c.name:<{width}}  {c.verdict}{extra}")
        for s in self.sections:
            lines.append(s._text(indent + "  ").rstrip("\n"))
        checks = self.all_checks()
        if not indent:
            lines.append(f"summary: {sum(c.passed for c in checks)} passed, "
                         f"{sum(not c.passed for c in checks)} failed")
        return "\n".join(lines) + "\n"
