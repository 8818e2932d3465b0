"""
CSV and JSON emitters for lab tables.
Floats are written with 15 significant digits independent of locale.
"""

import csv
import json
import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, TextIO

import numpy as np

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '.15g'


@dataclass
class ResultTable:
    """Named columns and rows produced by one command."""
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)

    def add_row(self, values: Sequence[Any]):
        if len(values) != len(self.columns):
            raise ValueError(f"Row has {len(values)} fields, table has {len(self.columns)} columns")
        self.rows.append(list(values))

    def extend(self, other: 'ResultTable'):
        if other.columns != self.columns:
            raise ValueError(f"Cannot merge tables with columns {other.columns} into {self.columns}")
        self.rows.extend(other.rows)

    def records(self) -> List[Dict[str, Any]]:
        return [dict(zip(self.columns, (_plain(v) for v in row))) for row in self.rows]


def _plain(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def format_value(value: Any) -> str:
    """Text form of one CSV field."""
    value = _plain(value)
    if value is None:
        return 'nan'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    return str(value)


def write_csv(table: ResultTable, stream: TextIO):
    """Header line followed by one comma-separated line per row."""
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_value(v) for v in row])
    logger.debug(f"Wrote {len(table.rows)} CSV rows")


def write_json(table: ResultTable, config: Dict[str, Any], meta: Dict[str, Any], stream: TextIO):
    """
    One JSON object {"config", "rows", "meta"}.

    Args:
        table: Rows to emit, one object per row keyed by column
        config: Echo of the run configuration
        meta: Version, timing and evaluation counters
        stream: Text stream to write to
    """
    try:
        document = {'config': config, 'rows': table.records(), 'meta': meta}
        stream.write(json.dumps(document, indent=2, sort_keys=False, default=_plain))
        stream.write('\n')
    except (TypeError, ValueError) as e:
        raise ValueError(f"Failed to encode JSON output: {e}")
    logger.debug(f"Wrote {len(table.rows)} JSON rows")
