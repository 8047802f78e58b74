"""Pass/fail check records shared by the verification suites and the CLI."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

__all__ = ["Check", "Report", "parallel_map", "thread_cap"]


@dataclass
class Check:
    name: str
    passed: bool
    witness: str | None = None
    data: dict[str, Any] = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "status": self.status}
        out.update(self.data)
        if self.witness is not None:
            out["witness"] = self.witness
        return out


@dataclass
class Report:
    title: str
    params: dict[str, Any] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, witness: str | None = None, **data) -> Check:
        c = Check(name, bool(passed), None if passed else witness, data)
        self.checks.append(c)
        return c

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict[str, Any]:
        out = {"title": self.title, "params": self.params,
               "checks": [c.to_dict() for c in self.checks]}
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def thread_cap() -> int:
    raw = os.environ.get("QCALC_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        cap = os.cpu_count() or 1
    return max(1, cap)


def parallel_map(fn: Callable, items: Iterable) -> list:
    """``list(map(fn, items))`` on a thread pool capped by ``QCALC_THREADS``; order preserved."""
    items = list(items)
    workers = min(thread_cap(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
