"""CSV ingestion and the price-to-return transform.

The one accepted format is a comma-delimited file with a header row
``date,<name1>,...,<namep>``, ISO-8601 dates, '.' decimals and one row per
trading day. Non-trading days are simply absent rows; no calendar logic is
applied. Row numbers in errors are 1-based file lines (the header is
line 1).
"""

import csv
import datetime
from dataclasses import dataclass

import numpy as np

from .errors import (
    NonMonotoneDates,
    NonPositivePrice,
    ParseError,
    TooFewRows,
)


@dataclass(frozen=True)
class PriceTable:
    """Strictly positive prices on strictly increasing dates."""

    dates: tuple
    prices: np.ndarray  # (N, p)
    names: tuple

    def __len__(self):
        return self.prices.shape[0]

    @property
    def p(self):
        return self.prices.shape[1]


@dataclass(frozen=True)
class ReturnTable:
    """Compound returns; row t is log(price[t+1]) - log(price[t])."""

    dates: tuple
    returns: np.ndarray  # (N - 1, p)
    names: tuple

    def __len__(self):
        return self.returns.shape[0]

    @property
    def p(self):
        return self.returns.shape[1]


def _read_table(path, columns=None):
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty", row=1) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "date":
            raise ParseError(
                "header must be 'date,<name1>,...,<namep>'", row=1
            )
        all_names = header[1:]
        if columns is None:
            indices = list(range(1, len(header)))
            names = all_names
        else:
            names = list(columns)
            indices = []
            for name in names:
                if name not in all_names:
                    raise ParseError(f"column {name!r} not in header", row=1)
                indices.append(1 + all_names.index(name))
        dates = []
        rows = []
        prev_date = None
        for line_no, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise ParseError(
                    f"expected {len(header)} cells, found {len(record)}",
                    row=line_no,
                )
            try:
                date = datetime.date.fromisoformat(record[0].strip())
            except ValueError:
                raise ParseError(
                    f"bad date {record[0]!r}", row=line_no, col=1
                ) from None
            if prev_date is not None and date <= prev_date:
                raise NonMonotoneDates(
                    f"date {date.isoformat()} does not increase past "
                    f"{prev_date.isoformat()}",
                    row=line_no,
                )
            prev_date = date
            values = []
            for col in indices:
                cell = record[col].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(
                        f"bad number {cell!r}", row=line_no, col=col + 1
                    ) from None
                if not np.isfinite(value):
                    raise ParseError(
                        f"non-finite value {cell!r}", row=line_no, col=col + 1
                    )
                values.append(value)
            dates.append(date)
            rows.append(values)
    if not rows:
        raise ParseError("no data rows", row=2)
    return tuple(dates), np.asarray(rows, dtype=float), tuple(names)


def ingest(path, columns=None):
    """Read a price CSV into a validated :class:`PriceTable`.

    ``columns`` optionally restricts (and orders) the price columns by
    header name. Rows with non-positive prices are rejected with their
    1-based line number.
    """
    dates, values, names = _read_table(path, columns)
    bad = np.argwhere(values <= 0.0)
    if bad.size:
        i, j = bad[0]
        raise NonPositivePrice(
            f"price {values[i, j]!r} in column {names[j]!r}",
            row=int(i) + 2,
            col=int(j) + 2,
        )
    return PriceTable(dates=dates, prices=values, names=names)


def ingest_returns(path, columns=None):
    """Read a CSV of already-computed returns (values may be negative)."""
    dates, values, names = _read_table(path, columns)
    return ReturnTable(dates=dates, returns=values, names=names)


def to_returns(prices):
    """Compound returns log(price[t+1]) - log(price[t]).

    The returned dates are those on which each return realizes (the later
    day of each pair).
    """
    if len(prices) < 2:
        raise TooFewRows("need at least two price rows to form returns")
    log_prices = np.log(prices.prices)
    returns = np.diff(log_prices, axis=0)
    return ReturnTable(
        dates=prices.dates[1:], returns=returns, names=prices.names
    )


def synthetic_dates(n, start=datetime.date(2000, 1, 3)):
    """n consecutive calendar dates for exporting simulated paths."""
    return tuple(start + datetime.timedelta(days=i) for i in range(n))


def write_observations_csv(path, values, dates=None, names=None):
    """Write observations in the ingestion schema (date plus one column
    per series); floats use shortest round-trip formatting."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n, p = values.shape
    if dates is None:
        dates = synthetic_dates(n)
    if names is None:
        names = [f"series_{i + 1}" for i in range(p)]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date"] + list(names))
        for date, row in zip(dates, values):
            writer.writerow([date.isoformat()] + [repr(float(v)) for v in row])
