"""
Swarm Scaling - Run Records

One CSV row per run, appended as soon as the run finishes, plus a JSON
metadata file beside the CSV that carries the sweep spec, package version,
creation time and record schema version.
"""

import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Set, Union

import numpy as np
import pandas as pd
import structlog

from ..errors import RecordSchemaError

logger = structlog.get_logger(__name__)

SCHEMA_VERSION = 1
BASE_COLUMNS = ["run_index", "scenario", "seed", "metric_name", "metric_value", "wall_time", "flags"]
PARAM_PREFIX = "param."


@dataclass
class RunRecord:
    """One (parameters, seed, metric) outcome"""
    run_index: int
    scenario: str
    seed: int
    metric_name: str
    metric_value: float
    wall_time: float
    flags: List[str] = field(default_factory=list)
    params: Dict[str, Any] = field(default_factory=dict)  # flattened, dotted names

    @property
    def failed(self) -> bool:
        return "failed" in self.flags

    def to_row(self) -> Dict[str, Any]:
        row = {
            "run_index": self.run_index,
            "scenario": self.scenario,
            "seed": self.seed,
            "metric_name": self.metric_name,
            "metric_value": self.metric_value,
            "wall_time": self.wall_time,
            "flags": ";".join(self.flags),
        }
        row.update({PARAM_PREFIX + name: value for name, value in self.params.items()})
        return row

    @classmethod
    def from_row(cls, row: Dict[str, Any]) -> "RunRecord":
        flags = row.get("flags")
        flags = [] if not isinstance(flags, str) or not flags else flags.split(";")
        return cls(
            run_index=int(row["run_index"]),
            scenario=str(row["scenario"]),
            seed=int(row["seed"]),
            metric_name=str(row["metric_name"]),
            metric_value=float(row["metric_value"]),
            wall_time=float(row["wall_time"]),
            flags=flags,
            params={
                key[len(PARAM_PREFIX):]: _python(value)
                for key, value in row.items()
                if key.startswith(PARAM_PREFIX)
            },
        )


def _python(value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def meta_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def _check_meta(path: Path) -> Dict[str, Any]:
    meta_file = meta_path(path)
    if not meta_file.exists():
        return {}
    meta = json.loads(meta_file.read_text(encoding="utf-8"))
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise RecordSchemaError(
            f"{path} was written with record schema {version}, this version reads schema {SCHEMA_VERSION}"
        )
    return meta


def _check_header(path: Path, columns: List[str]) -> None:
    if columns[: len(BASE_COLUMNS)] != BASE_COLUMNS:
        raise RecordSchemaError(f"{path} does not start with the record columns {BASE_COLUMNS}")


class RecordStore:
    """
    Append-only record file.

    The caller is the single writer; every append is flushed and synced so
    a crash loses at most the run in flight.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.columns: List[str] = []

    def open(self, param_names: Iterable[str], meta: Optional[Dict[str, Any]] = None) -> Set[int]:
        """
        Create the file with its header, or reopen an existing one.

        Returns:
            run indices already present (to be skipped on resume)
        """
        columns = BASE_COLUMNS + [PARAM_PREFIX + name for name in param_names]
        if self.path.exists() and self.path.stat().st_size > 0:
            _check_meta(self.path)
            existing = pd.read_csv(self.path, usecols=["run_index"])
            header = list(pd.read_csv(self.path, nrows=0).columns)
            _check_header(self.path, header)
            if header != columns:
                raise RecordSchemaError(f"{self.path} holds records for a different parameter set")
            self.columns = header
            done = set(int(i) for i in existing["run_index"])
            logger.info("records.resume", path=str(self.path), completed=len(done))
            return done

        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.columns = columns
        pd.DataFrame(columns=columns).to_csv(self.path, index=False)
        write_meta(self.path, meta or {})
        return set()

    def append(self, record: RunRecord) -> None:
        row = record.to_row()
        frame = pd.DataFrame([[row.get(c) for c in self.columns]], columns=self.columns)
        with self.path.open("a", encoding="utf-8", newline="") as handle:
            frame.to_csv(handle, header=False, index=False)
            handle.flush()
            os.fsync(handle.fileno())


def write_meta(path: Union[str, Path], meta: Dict[str, Any]) -> Path:
    from .. import __version__

    document = {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "created": datetime.now().isoformat(),
    }
    document.update(meta)
    target = meta_path(path)
    target.write_text(json.dumps(document, indent=2, default=str), encoding="utf-8")
    return target


def save_records(path: Union[str, Path], records: List[RunRecord], meta: Optional[Dict[str, Any]] = None) -> Path:
    """Write a complete record set (header only when ``records`` is empty)"""
    path = Path(path)
    param_names = list(records[0].params) if records else []
    if path.exists():
        path.unlink()
    store = RecordStore(path)
    store.open(param_names, meta)
    for record in sorted(records, key=lambda r: r.run_index):
        store.append(record)
    return path


def load_frame(path: Union[str, Path]) -> pd.DataFrame:
    """Records as a DataFrame; raises RecordSchemaError on a version mismatch"""
    path = Path(path)
    _check_meta(path)
    frame = pd.read_csv(path, keep_default_na=True)
    _check_header(path, list(frame.columns))
    if "flags" in frame:
        frame["flags"] = frame["flags"].fillna("")
    return frame.sort_values("run_index", kind="stable").reset_index(drop=True)


def load_records(path: Union[str, Path]) -> List[RunRecord]:
    frame = load_frame(path)
    return [RunRecord.from_row(row) for row in frame.to_dict(orient="records")]
