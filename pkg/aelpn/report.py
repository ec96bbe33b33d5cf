"""
Plot-ready experiment reports

A report is a table with a fixed column order. Most experiments use the long
format (experiment, model, param_name, param, metric, value, seed); the
split-normal run also writes a wide table with one row per grid point.

CSV output is stable across runs: fixed column order, reals with 17
significant digits, LF line endings, empty cells for missing values. A JSON
mirror and a ``<name>.meta.yaml`` sidecar carrying the seed and the exact
configuration can be written next to it.
"""

import csv
import io
import json
import logging
import math
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from .config import dump_yaml
from .errors import NumericalError

logger = logging.getLogger(__name__)

Cell = Union[str, int, float, None]


@dataclass(frozen=True)
class ReportRow:
    """One measured value in the long format"""
    experiment: str
    model: str
    param_name: str
    param: float
    metric: str
    value: float
    seed: int

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NumericalError(f"Metric {self.metric} for {self.model} is not finite: {self.value}")


ROW_COLUMNS = tuple(f.name for f in fields(ReportRow))


def format_cell(value: Cell) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return "" if math.isnan(value) else format(value, ".17g")
    return str(value)


def _json_cell(value: Cell) -> Cell:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@dataclass
class Report:
    """Rows under a fixed column order, plus metadata for the sidecar"""
    name: str
    columns: Sequence[str] = ROW_COLUMNS
    rows: List[List[Cell]] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)

    def add(self, row: ReportRow) -> None:
        if tuple(self.columns) != ROW_COLUMNS:
            raise ValueError("add() needs the long-format columns; use add_values() for wide tables")
        self.rows.append(list(astuple(row)))

    def add_values(self, **values: Cell) -> None:
        unknown = set(values) - set(self.columns)
        if unknown:
            raise ValueError(f"Unknown columns {sorted(unknown)}")
        self.rows.append([values.get(c) for c in self.columns])

    def column(self, name: str) -> List[Cell]:
        i = list(self.columns).index(name)
        return [row[i] for row in self.rows]

    def records(self) -> List[Dict[str, Cell]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def select(self, **criteria: Cell) -> List[Dict[str, Cell]]:
        """Records whose cells equal every given value"""
        return [r for r in self.records() if all(r.get(k) == v for k, v in criteria.items())]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_cell(v) for v in row])
        return buf.getvalue()

    def write(self, directory, json_mirror: bool = False, sidecar: bool = True) -> Path:
        """Write ``<name>.csv`` (and optionally the JSON mirror and the sidecar) into ``directory``"""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.name}.csv"
        with open(path, "w", newline="") as f:
            f.write(self.to_csv())
        if json_mirror:
            with open(out / f"{self.name}.json", "w", newline="\n") as f:
                json.dump(
                    {
                        "name": self.name,
                        "columns": list(self.columns),
                        "rows": [{c: _json_cell(v) for c, v in r.items()} for r in self.records()],
                    },
                    f,
                    indent=2,
                )
                f.write("\n")
        if sidecar:
            (out / f"{self.name}.meta.yaml").write_text(dump_yaml(self.meta))
        logger.info("Wrote report %s (%d rows)", path, len(self.rows))
        return path


def read_csv(path) -> List[Dict[str, str]]:
    """Read a report back as string records"""
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def wide_report(name: str, columns: Sequence[str], meta: Optional[Dict[str, Any]] = None) -> Report:
    return Report(name, tuple(columns), meta=dict(meta or {}))
