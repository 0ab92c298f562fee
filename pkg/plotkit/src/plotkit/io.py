"""CSV intake for the simulator's record files.

The delimited interface: a header row naming the columns, floats printed
with 12 significant digits, empty cells for undefined values, ``true`` and
``false`` for booleans.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass


class PlotError(ValueError):
    """Unusable input for the requested plot kind."""


@dataclass
class Table:
    path: str
    columns: list[str]
    rows: list[dict]

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return [row[name] for row in self.rows]


def _parse_cell(raw: str):
    if raw is None or raw == "":
        return None
    if raw == "true":
        return True
    if raw == "false":
        return False
    try:
        return float(raw)
    except ValueError:
        return raw


def read_table(path: str) -> Table:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotError(f"{path}: empty file, not even a header") from None
        rows = [dict(zip(header, map(_parse_cell, row))) for row in reader]
    return Table(path=path, columns=header, rows=rows)


def require_columns(table: Table, needed, kind: str) -> None:
    missing = [name for name in needed if name not in table.columns]
    if missing:
        raise PlotError(
            f"{table.path}: plot kind '{kind}' needs column(s) "
            f"{', '.join(missing)} which the file does not provide "
            f"(available: {', '.join(table.columns)})")
