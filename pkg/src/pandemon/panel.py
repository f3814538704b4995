"""Daily aggregate count panels: validation, CSV ingestion and occupancy.

A panel holds one row per calendar day with the marginal series published
during an epidemic wave:

* ``n1``    daily positives (optional, informational),
* ``n2``    hospital admissions,
* ``n3``    discharges alive,
* ``n4``    in-hospital deaths,
* ``n_out`` deaths outside hospital (optional, needed for total-death work).

Counts are nonnegative integers on a contiguous daily grid.  All estimation
code downstream treats exposure as inclusive of the exit day: someone who is
admitted and exits the same day still contributes one person-day.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import IO, Mapping, Optional, Sequence, Union

import numpy as np

CSV_COLUMNS = ("date", "n1", "n2", "n3", "n4", "n_out")
_OPTIONAL = frozenset({"n1", "n_out"})
_REQUIRED = ("n2", "n3", "n4")


class PanelValidationError(ValueError):
    """A daily panel breaks one of its construction rules.

    ``row`` carries the offending 0-based data row (or day index) when the
    failure is attributable to a single line.
    """

    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


def _as_count_array(name: str, values: Sequence) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise PanelValidationError(f"{name} must be one-dimensional")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        flt = arr.astype(float)
        if not np.all(np.isfinite(flt)) or np.any(flt != np.floor(flt)):
            bad = int(np.argmax(~np.isfinite(flt) | (flt != np.floor(flt))))
            raise PanelValidationError(f"{name} must be integer-valued", row=bad)
        arr = flt
    out = arr.astype(np.int64)
    if np.any(out < 0):
        raise PanelValidationError(f"{name} must be nonnegative", row=int(np.argmax(out < 0)))
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TimeGridConvention:
    """Daily grid conventions shared by the estimation code.

    ``window`` is the largest tracked stay duration; stays are censored once
    they pass it (exposure kept through duration ``window``, the eventual
    exit dropped).  ``same_day_exits`` keeps duration-0 cells on the grid
    (admission and exit on the same day).
    """

    window: int
    same_day_exits: bool = True
    day_length: float = 1.0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("duration window must be at least 1 day")
        if self.day_length != 1.0:
            raise ValueError("only the daily grid (day_length=1) is supported")


def default_window(n_days: int) -> int:
    """Default duration cap: 60 days, or the span of the data if shorter."""
    return max(1, min(60, n_days - 1))


@dataclass(frozen=True)
class DailyPanel:
    """Aggregate daily counts starting at ``start_date``.

    Arrays are frozen at construction; treat instances as immutable values.
    ``start_date`` also accepts an ISO date string.
    """

    start_date: date
    n2: np.ndarray
    n3: np.ndarray
    n4: np.ndarray
    n1: Optional[np.ndarray] = None
    n_out: Optional[np.ndarray] = None
    label: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.start_date, str):
            object.__setattr__(self, "start_date", date.fromisoformat(self.start_date))
        object.__setattr__(self, "n2", _as_count_array("n2", self.n2))
        object.__setattr__(self, "n3", _as_count_array("n3", self.n3))
        object.__setattr__(self, "n4", _as_count_array("n4", self.n4))
        T = self.n2.size
        if T == 0:
            raise PanelValidationError("no rows")
        for name in ("n3", "n4"):
            if getattr(self, name).size != T:
                raise PanelValidationError(f"{name} has length {getattr(self, name).size}, expected {T}")
        for name in ("n1", "n_out"):
            val = getattr(self, name)
            if val is not None:
                arr = _as_count_array(name, val)
                if arr.size != T:
                    raise PanelValidationError(f"{name} has length {arr.size}, expected {T}")
                object.__setattr__(self, name, arr)
        occ = np.cumsum(self.n2) - np.cumsum(self.n3 + self.n4)
        if np.any(occ < 0):
            day = int(np.argmax(occ < 0))
            raise PanelValidationError(f"occupancy negative at day {day}: more exits than admissions", row=day)

    @property
    def T(self) -> int:
        return self.n2.size

    @property
    def exits(self) -> np.ndarray:
        """Daily hospital exits from any cause (n3 + n4)."""
        return self.n3 + self.n4

    def occupancy(self) -> np.ndarray:
        """End-of-day hospital occupancy: admissions minus exits, cumulated."""
        return np.cumsum(self.n2) - np.cumsum(self.n3 + self.n4)

    def at_risk(self) -> np.ndarray:
        """Person count exposed during each day, inclusive of that day's exits.

        Equals end-of-day occupancy plus same-day exits; this is the series the
        exposure grids must marginalise to.
        """
        return self.occupancy() + self.exits

    def dates(self) -> list[date]:
        return [self.start_date + timedelta(days=int(d)) for d in range(self.T)]

    def date_of(self, day: int) -> date:
        return self.start_date + timedelta(days=int(day))

    def day_index(self, when: date) -> int:
        return (when - self.start_date).days

    def truncated(self, n_days: int) -> "DailyPanel":
        """First ``n_days`` rows as a new panel (used for backtests)."""
        if not 1 <= n_days <= self.T:
            raise PanelValidationError(f"cannot truncate panel of {self.T} days to {n_days}")
        take = lambda a: None if a is None else a[:n_days]
        return DailyPanel(
            start_date=self.start_date,
            n2=self.n2[:n_days],
            n3=self.n3[:n_days],
            n4=self.n4[:n_days],
            n1=take(self.n1),
            n_out=take(self.n_out),
            label=self.label,
        )


def _open_source(source: Union[str, Path, bytes, IO]) -> IO[str]:
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, io.StringIO):
        return source
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data)
    return open(source, "r", encoding="utf-8", newline="")


def ingest_csv(
    source: Union[str, Path, bytes, IO],
    schema: Optional[Mapping[str, str]] = None,
    label: Optional[str] = None,
) -> DailyPanel:
    """Parse and validate a daily panel from CSV.

    The header must provide ``date`` plus the count columns; ``schema`` maps
    logical names to actual header names when they differ.  Dates are
    ISO-8601 and must be contiguous ascending days.  The optional columns
    ``n1``/``n_out`` may be missing entirely or left blank on every row;
    blanks are not allowed anywhere else.
    """
    schema = dict(schema or {})
    col_of = {logical: schema.get(logical, logical) for logical in CSV_COLUMNS}
    fh = _open_source(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelValidationError("no rows") from None
        header = [h.strip() for h in header]
        index: dict[str, int] = {}
        for logical, actual in col_of.items():
            if actual in header:
                index[logical] = header.index(actual)
            elif logical == "date" or logical in _REQUIRED:
                raise PanelValidationError(f"missing required column '{actual}'")
        rows = [row for row in reader if any(cell.strip() for cell in row)]
        if not rows:
            raise PanelValidationError("no rows")

        dates: list[date] = []
        raw: dict[str, list[Optional[str]]] = {name: [] for name in CSV_COLUMNS if name != "date"}
        for i, row in enumerate(rows):
            try:
                dates.append(date.fromisoformat(row[index["date"]].strip()))
            except (ValueError, IndexError):
                raise PanelValidationError("malformed date", row=i) from None
            for name in raw:
                if name not in index:
                    raw[name].append(None)
                    continue
                j = index[name]
                cell = row[j].strip() if j < len(row) else ""
                raw[name].append(cell if cell else None)

        for i in range(1, len(dates)):
            if (dates[i] - dates[i - 1]).days != 1:
                raise PanelValidationError(
                    f"dates must be contiguous daily: {dates[i - 1].isoformat()} is followed by {dates[i].isoformat()}",
                    row=i,
                )

        def column(name: str) -> Optional[np.ndarray]:
            cells = raw[name]
            present = [c is not None for c in cells]
            if not any(present):
                return None
            if not all(present):
                bad = present.index(False)
                if name in _OPTIONAL:
                    raise PanelValidationError(f"column '{col_of[name]}' is partially blank", row=bad)
                raise PanelValidationError(f"blank cell in required column '{col_of[name]}'", row=bad)
            try:
                values = [int(c) for c in cells]  # type: ignore[arg-type]
            except ValueError:
                bad = next(i for i, c in enumerate(cells) if not _is_int(c))
                raise PanelValidationError(f"non-integer value in column '{col_of[name]}'", row=bad) from None
            return np.array(values, dtype=np.int64)

        required = {}
        for name in _REQUIRED:
            col = column(name)
            if col is None:
                raise PanelValidationError(f"missing required column '{col_of[name]}'")
            required[name] = col
        return DailyPanel(
            start_date=dates[0],
            n2=required["n2"],
            n3=required["n3"],
            n4=required["n4"],
            n1=column("n1"),
            n_out=column("n_out"),
            label=label,
        )
    finally:
        fh.close()


def _is_int(cell: Optional[str]) -> bool:
    if cell is None:
        return False
    try:
        int(cell)
        return True
    except ValueError:
        return False


def emit_csv(panel: DailyPanel, dest: Union[str, Path, IO[str], None] = None) -> Optional[str]:
    """Write a panel in the canonical CSV layout; returns the text if ``dest`` is None.

    ``ingest_csv(emit_csv(panel))`` reproduces the panel exactly.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for d in range(panel.T):
        writer.writerow(
            [
                panel.date_of(d).isoformat(),
                "" if panel.n1 is None else int(panel.n1[d]),
                int(panel.n2[d]),
                int(panel.n3[d]),
                int(panel.n4[d]),
                "" if panel.n_out is None else int(panel.n_out[d]),
            ]
        )
    text = buf.getvalue()
    if dest is None:
        return text
    if hasattr(dest, "write"):
        dest.write(text)  # type: ignore[union-attr]
        return None
    Path(dest).write_text(text, encoding="utf-8")
    return None
