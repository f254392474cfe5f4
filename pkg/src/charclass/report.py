"""Check results and run reports."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

SCHEMA_VERSION = 1


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    expected: str = ""
    computed: str = ""
    relations: list = field(default_factory=list)
    stalled: bool = False
    seconds: float = 0.0

    @property
    def status(self) -> str:
        if self.stalled:
            return "stall"
        return "pass" if self.passed else "fail"

    def to_dict(self, timings: bool = True) -> dict:
        d = {"name": self.name, "status": self.status, "detail": self.detail}
        if self.expected or self.computed:
            d["expected"] = self.expected
            d["computed"] = self.computed
        if self.relations:
            d["relations"] = [list(r) for r in self.relations]
        if timings:
            d["seconds"] = round(self.seconds, 3)
        return d


class timed:
    """Context manager stamping elapsed time onto the results produced inside it."""

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
        return False


@dataclass
class Report:
    command: str
    config: dict
    checks: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    version: str = ""

    @property
    def status(self) -> str:
        if any(c.status == "fail" for c in self.checks):
            return "fail"
        if any(c.status == "stall" for c in self.checks):
            return "stall"
        return "pass"

    def to_dict(self, timings: bool = True) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "tool": "charclass",
            "version": self.version,
            "command": self.command,
            "config": dict(sorted(self.config.items())),
            "status": self.status,
            "checks": [c.to_dict(timings) for c in self.checks],
            "artifacts": self.artifacts,
        }

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=False) + "\n"

    def to_text(self, timings: bool = True) -> str:
        lines = [f"charclass {self.version}  {self.command}"]
        for k, v in sorted(self.config.items()):
            lines.append(f"  {k} = {v}")
        for c in self.checks:
            t = f"  ({c.seconds:.2f}s)" if timings else ""
            lines.append(f"[{c.status.upper():5}] {c.name}: {c.detail}{t}")
            if c.status != "pass" and (c.expected or c.computed):
                lines.append(f"        expected: {c.expected}")
                lines.append(f"        computed: {c.computed}")
        lines.append(f"overall: {self.status}")
        return "\n".join(lines) + "\n"
