"""Piecewise-constant control profiles.

A profile holds one setpoint per 15-minute dispatch interval: battery
power in W (bucket model) or cell current in A (circuit and particle
models). Positive values charge the battery.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataSchemaError

#: Dispatch interval length in seconds.
CONTROL_DT_S = 900

_KIND_COLUMNS = {"power": "power_w", "current": "current_a"}


@dataclass(frozen=True)
class ControlProfile:
    """One control value per 15-minute interval, charge-positive."""

    values: np.ndarray = field(repr=False)
    kind: str = "current"  # "power" (W) or "current" (A)
    dt_s: float = CONTROL_DT_S

    def __post_init__(self):
        if self.kind not in _KIND_COLUMNS:
            raise ValueError(f"unknown control kind {self.kind!r}")
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("control profile must be 1-D")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    @property
    def duration_s(self) -> float:
        return len(self) * self.dt_s

    def value_at(self, t_s: float) -> float:
        """Setpoint active at offset ``t_s`` (zero-order hold)."""
        if not 0 <= t_s < self.duration_s:
            raise ValueError(f"t={t_s} s outside profile span [0, {self.duration_s}) s")
        return float(self.values[int(t_s // self.dt_s)])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self) else 0.0

    def abs_time_integral(self) -> float:
        """Integral of |u| dt in (unit of u) * seconds."""
        return float(np.sum(np.abs(self.values)) * self.dt_s)

    def scaled(self, factor: float) -> "ControlProfile":
        return ControlProfile(self.values * factor, kind=self.kind, dt_s=self.dt_s)

    def slice_intervals(self, start: int, count: int) -> "ControlProfile":
        if start < 0 or start + count > len(self):
            raise ValueError("slice outside profile")
        return ControlProfile(self.values[start : start + count], kind=self.kind, dt_s=self.dt_s)

    @staticmethod
    def concatenate(parts: list["ControlProfile"]) -> "ControlProfile":
        if not parts:
            raise ValueError("nothing to concatenate")
        kind = parts[0].kind
        dt = parts[0].dt_s
        if any(p.kind != kind or p.dt_s != dt for p in parts):
            raise ValueError("mismatched profile kinds or interval lengths")
        return ControlProfile(np.concatenate([p.values for p in parts]), kind=kind, dt_s=dt)

    def to_csv(self, path) -> None:
        column = _KIND_COLUMNS[self.kind]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["interval", column])
            for i, v in enumerate(self.values):
                writer.writerow([i, format(v, ".12g")])


def load_profile(path) -> ControlProfile:
    """Read a profile CSV written by :meth:`ControlProfile.to_csv`."""
    path = Path(path)
    if not path.exists():
        raise DataSchemaError(f"profile file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataSchemaError(f"{path}: empty profile file") from None
        header = [h.strip().lower() for h in header]
        kind = None
        for k, col in _KIND_COLUMNS.items():
            if header == ["interval", col]:
                kind = k
        if kind is None:
            raise DataSchemaError(f"{path}: expected header 'interval,power_w' or 'interval,current_a'")
        values = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                idx, val = int(row[0]), float(row[1])
            except (ValueError, IndexError):
                raise DataSchemaError(f"line {line_no}: malformed profile row {row}") from None
            if idx != len(values):
                raise DataSchemaError(f"line {line_no}: interval index {idx} out of order")
            values.append(val)
    if not values:
        raise DataSchemaError(f"{path}: no data rows")
    return ControlProfile(np.array(values), kind=kind)
