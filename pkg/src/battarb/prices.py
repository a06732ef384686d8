"""Day-ahead electricity price ingestion.

Prices arrive as hourly CSV rows in EUR/MWh and are held internally in
EUR/Wh so that revenue integrals over W and Wh never need unit switches.
A :class:`PriceSeries` is immutable after loading and safe to share
between parallel scenario runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import DataSchemaError

#: Exact EUR/MWh -> EUR/Wh conversion.
EUR_MWH_TO_EUR_WH = 1e-6

#: Hourly grid spacing of the day-ahead market, in seconds.
STEP_S = 3600

_TIME_FORMATS = ("%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M")


def _parse_timestamp(text: str, line_no: int) -> datetime:
    for fmt in _TIME_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    raise DataSchemaError(f"line {line_no}: unparseable timestamp {text!r}")


@dataclass(frozen=True)
class PriceSeries:
    """Hourly wholesale price signal in EUR/Wh.

    ``prices[i]`` applies on ``[start + i h, start + (i+1) h)`` as a
    zero-order hold. Negative prices are legal; day-ahead markets clear
    below zero at times of excess generation.
    """

    start: datetime
    prices: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.prices, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DataSchemaError("price series must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise DataSchemaError("price series contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "prices", arr)

    def __len__(self) -> int:
        return self.prices.size

    @property
    def horizon_s(self) -> int:
        """Covered span in seconds, ``len(self) * 3600``."""
        return len(self) * STEP_S

    def at(self, t_s: float) -> float:
        """Price (EUR/Wh) of the hour containing offset ``t_s`` from start."""
        if not 0 <= t_s < self.horizon_s:
            raise ValueError(f"t={t_s} s outside price horizon [0, {self.horizon_s}) s")
        return float(self.prices[int(t_s // STEP_S)])

    def hourly(self, hour: int) -> float:
        if not 0 <= hour < len(self):
            raise ValueError(f"hour {hour} outside horizon of {len(self)} hours")
        return float(self.prices[hour])

    def slice_hours(self, start_hour: int, n_hours: int) -> "PriceSeries":
        """Sub-series of ``n_hours`` starting ``start_hour`` hours in."""
        if start_hour < 0 or start_hour + n_hours > len(self):
            raise ValueError(
                f"slice [{start_hour}, {start_hour + n_hours}) outside horizon of {len(self)} hours"
            )
        return PriceSeries(
            start=self.start + timedelta(hours=start_hour),
            prices=self.prices[start_hour : start_hour + n_hours].copy(),
        )

    def to_csv(self, path) -> None:
        """Write back in the loader's schema (EUR/MWh).

        The EUR/MWh value is nudged within one ulp where necessary so
        that reloading (which multiplies by 1e-6) reproduces the stored
        floats bit for bit.
        """

        def mwh_repr(p: float) -> str:
            y = p / EUR_MWH_TO_EUR_WH
            for cand in (y, np.nextafter(y, np.inf), np.nextafter(y, -np.inf)):
                if float(cand) * EUR_MWH_TO_EUR_WH == p:
                    return repr(float(cand))
            return repr(float(y))

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "price_eur_mwh"])
            for i, p in enumerate(self.prices):
                stamp = self.start + timedelta(hours=i)
                writer.writerow([stamp.strftime("%Y-%m-%dT%H:%M:%S"), mwh_repr(float(p))])


def load_prices(path, schema: str = "csv_hourly_eur_mwh") -> PriceSeries:
    """Load an hourly day-ahead price file.

    The only supported schema is a CSV with header
    ``timestamp,price_eur_mwh``, ISO-8601 timestamps, one row per hour in
    chronological order with no gaps or duplicates.
    """
    if schema != "csv_hourly_eur_mwh":
        raise DataSchemaError(f"unknown price file schema {schema!r}")
    path = Path(path)
    if not path.exists():
        raise DataSchemaError(f"price file not found: {path}")

    stamps: list[datetime] = []
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataSchemaError(f"{path}: empty price file") from None
        if [h.strip().lower() for h in header] != ["timestamp", "price_eur_mwh"]:
            raise DataSchemaError(f"{path}: expected header 'timestamp,price_eur_mwh', got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataSchemaError(f"line {line_no}: expected 2 columns, got {len(row)}")
            stamp = _parse_timestamp(row[0].strip(), line_no)
            try:
                value = float(row[1])
            except ValueError:
                raise DataSchemaError(f"line {line_no}: unparseable price {row[1]!r}") from None
            if not np.isfinite(value):
                raise DataSchemaError(f"line {line_no}: non-finite price")
            stamps.append(stamp)
            values.append(value)

    if not stamps:
        raise DataSchemaError(f"{path}: no data rows")

    step = timedelta(seconds=STEP_S)
    for i in range(1, len(stamps)):
        expected = stamps[0] + i * step
        if stamps[i] == stamps[i - 1]:
            raise DataSchemaError(f"duplicate hour {stamps[i].isoformat()}")
        if stamps[i] != expected:
            raise DataSchemaError(f"gap in price file: missing hour {expected.isoformat()}")

    return PriceSeries(start=stamps[0], prices=np.array(values) * EUR_MWH_TO_EUR_WH)
