"""Parameter and scenario file loading.

Parameter files are JSON documents whose keys mirror the dataclass
fields; OCV curves live in sibling CSV files referenced by name. The
string ``"default"`` selects the parameter sets and tables shipped with
the package.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .bucket import BucketParams
from .ecm import EcmParams, SchmalstiegParams
from .errors import ConfigError, DataSchemaError
from .spm import ElectrodeParams, SeiParams, SpmParams, ThermalParams

def _data_dir() -> Path:
    return Path(str(resources.files("battarb"))) / "data"


def _resolve(path_or_default: str | Path, default_name: str) -> Path:
    if path_or_default in (None, "default"):
        return _data_dir() / default_name
    return Path(path_or_default)


def _read_json(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"parameter file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def load_table_csv(path, columns: tuple[str, str]) -> tuple[np.ndarray, np.ndarray]:
    """Two-column numeric CSV with the given header."""
    path = Path(path)
    if not path.exists():
        raise DataSchemaError(f"table file not found: {path}")
    xs, ys = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != list(columns):
            raise DataSchemaError(f"{path}: expected header {','.join(columns)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
            except (ValueError, IndexError):
                raise DataSchemaError(f"line {line_no}: malformed table row {row}") from None
    if len(xs) < 2:
        raise DataSchemaError(f"{path}: table needs at least 2 rows")
    return np.array(xs), np.array(ys)


def load_bucket_params(path_or_default="default") -> BucketParams:
    path = _resolve(path_or_default, "bucket.json")
    doc = _read_json(path)
    doc.pop("notes", None)
    try:
        return BucketParams(**doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_ecm_params(path_or_default="default") -> EcmParams:
    path = _resolve(path_or_default, "ecm.json")
    doc = _read_json(path)
    doc.pop("notes", None)
    table = doc.pop("ocv_table", None)
    if table is None:
        raise ConfigError(f"{path}: missing 'ocv_table'")
    z, v = load_table_csv(path.parent / table, ("soc", "ocv_v"))
    aging = doc.pop("aging", {})
    try:
        return EcmParams(ocv_z=z, ocv_v=v, aging=SchmalstiegParams(**aging), **doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _electrode(doc: dict, base: Path, which: str) -> ElectrodeParams:
    sub = dict(doc.get(which) or {})
    table = sub.pop("ocv_table", None)
    if table is None:
        raise ConfigError(f"missing '{which}.ocv_table'")
    s, v = load_table_csv(base / table, ("stoich", "ocv_v"))
    return ElectrodeParams(ocv_stoich=s, ocv_v=v, **sub)


def load_spm_params(path_or_default="default") -> SpmParams:
    path = _resolve(path_or_default, "spm.json")
    doc = _read_json(path)
    doc.pop("notes", None)
    try:
        pos = _electrode(doc, path.parent, "pos")
        neg = _electrode(doc, path.parent, "neg")
        doc.pop("pos")
        doc.pop("neg")
        sei = SeiParams(**doc.pop("sei", {}))
        thermal = ThermalParams(**doc.pop("thermal", {}))
        return SpmParams(pos=pos, neg=neg, sei=sei, thermal=thermal, **doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class Scenario:
    """One optimization-and-validation run."""

    model: str  # bucket | ecm | spm
    objective: str  # revenue | profit
    playback: str  # rescale | voltage_hold
    n_days: int
    prices: str
    output_dir: str
    bucket_params: str = "default"
    ecm_params: str = "default"
    spm_params: str = "default"
    seed: int = 0
    start_day: int = 0  # offset into the price file, days
    solver: dict | None = None

    def __post_init__(self):
        if self.model not in ("bucket", "ecm", "spm"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.objective not in ("revenue", "profit"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.playback not in ("rescale", "voltage_hold"):
            raise ConfigError(f"unknown playback mode {self.playback!r}")
        if self.n_days < 1:
            raise ConfigError("n_days must be at least 1")


def load_scenario(path, overrides: dict | None = None) -> Scenario:
    path = Path(path)
    doc = _read_json(path)
    doc.pop("notes", None)
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        scenario = Scenario(**doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    prices = Path(scenario.prices)
    if not prices.is_absolute():
        object.__setattr__(scenario, "prices", str((path.parent / prices).resolve()))
    for attr in ("bucket_params", "ecm_params", "spm_params"):
        value = getattr(scenario, attr)
        if value != "default" and not Path(value).is_absolute():
            object.__setattr__(scenario, attr, str((path.parent / value).resolve()))
    return scenario
