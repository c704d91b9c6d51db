from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Condition:
    name: str
    max_violation: float
    at_x: float | None
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_violation)) and self.max_violation <= self.tol


@dataclass
class ConditionReport:
    """Worst violation of each condition over a grid.  Violations are data, not errors."""

    conditions: dict[str, Condition] = field(default_factory=dict)
    extras: dict[str, float] = field(default_factory=dict)

    def add(self, name, values, grid, tol):
        """Record max(values) over the grid; NaN entries count as violations."""
        values = np.asarray(values, dtype=float)
        grid = np.asarray(grid, dtype=float)
        if values.ndim == 0:
            self.conditions[name] = Condition(name, float(values), float(grid), tol)
            return
        if np.isnan(values).any():
            i = int(np.argmax(np.isnan(values)))
            self.conditions[name] = Condition(name, float("inf"), float(grid[i]), tol)
            return
        i = int(np.argmax(values))
        self.conditions[name] = Condition(name, float(values[i]), float(grid[i]), tol)

    def __getitem__(self, name) -> Condition:
        return self.conditions[name]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions.values())

    @property
    def violated(self) -> list[str]:
        return [n for n, c in self.conditions.items() if not c.passed]

    def to_dict(self) -> dict:
        out = {n: {"max_violation": c.max_violation, "at_x": c.at_x, "tol": c.tol,
                   "passed": c.passed}
               for n, c in self.conditions.items()}
        if self.extras:
            out["extras"] = dict(self.extras)
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)
