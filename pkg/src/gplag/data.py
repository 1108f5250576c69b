"""Irregular multi-series observations: loading, centering and splitting.

A dataset is a flat collection of ``(t, series, y)`` triples.  Series ids are
1-based and series 1 is the lag baseline (its lag is fixed at zero by every
fitting routine), so the order in which labels first appear in a CSV file
matters.
"""

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import FormatError, ParseError, ValidationError

CSV_HEADER = ("t", "series", "y")


class Observation(NamedTuple):
    t: float
    series: int
    y: float


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeSeriesSet:
    """Observations sorted by ``(series, t)``.

    ``offsets[l-1]`` records the vertical shift removed from series ``l`` by
    :func:`center_series` (zero for raw data).  ``labels[l-1]`` is the
    original label of series ``l``.
    """

    t: np.ndarray
    series: np.ndarray
    y: np.ndarray
    num_series: int
    labels: tuple = ()
    offsets: np.ndarray = field(default=None)

    def __post_init__(self):
        t = _readonly(self.t, float)
        s = _readonly(self.series, np.int64)
        y = _readonly(self.y, float)
        if not (len(t) == len(s) == len(y)):
            raise ValidationError("t, series and y must have equal length")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(y)):
            raise ValidationError("times and values must be finite")
        L = int(self.num_series)
        if len(s) and (s.min() < 1 or s.max() > L):
            raise ValidationError(f"series ids must lie in 1..{L}")
        order = np.lexsort((t, s))
        if np.any(order != np.arange(len(order))):
            t, s, y = (_readonly(v[order], v.dtype) for v in (t, s, y))
        offsets = np.zeros(L) if self.offsets is None else self.offsets
        offsets = _readonly(offsets, float)
        if len(offsets) != L:
            raise ValidationError("offsets must have one entry per series")
        labels = tuple(self.labels) if self.labels else tuple(str(i) for i in range(1, L + 1))
        if len(labels) != L:
            raise ValidationError("labels must have one entry per series")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "series", s)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "num_series", L)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "offsets", offsets)

    def __len__(self):
        return len(self.t)

    @property
    def n(self):
        return len(self.t)

    @property
    def observations(self):
        return [Observation(float(a), int(b), float(c)) for a, b, c in zip(self.t, self.series, self.y)]

    def counts(self):
        return np.bincount(self.series, minlength=self.num_series + 1)[1:]

    def mask(self, l):
        return self.series == l

    def times(self, l):
        return self.t[self.series == l]

    def values(self, l):
        return self.y[self.series == l]

    def check(self):
        """Enforce the full dataset invariants (L >= 2, >= 2 points per series)."""
        if self.num_series < 2:
            raise ValidationError("at least two series are required")
        counts = self.counts()
        bad = [self.labels[i] for i in np.flatnonzero(counts < 2)]
        if bad:
            raise ValidationError(f"series with fewer than 2 observations: {bad}")
        return self

    def subset(self, idx):
        idx = np.asarray(idx)
        return TimeSeriesSet(self.t[idx], self.series[idx], self.y[idx], self.num_series,
                             self.labels, self.offsets)

    def select_series(self, ids):
        """Dataset restricted to ``ids`` (renumbered 1..len(ids) in the given order)."""
        ids = list(ids)
        keep = np.isin(self.series, ids)
        remap = np.zeros(self.num_series + 1, dtype=np.int64)
        remap[ids] = np.arange(1, len(ids) + 1)
        return TimeSeriesSet(self.t[keep], remap[self.series[keep]], self.y[keep], len(ids),
                             tuple(self.labels[i - 1] for i in ids), self.offsets[np.array(ids) - 1])

    def with_values(self, y, offsets=None):
        return TimeSeriesSet(self.t, self.series, y, self.num_series, self.labels,
                             self.offsets if offsets is None else offsets)


def from_series(times, values, labels=None):
    """Build a set from per-series sequences ``times[l]``, ``values[l]``."""
    t = np.concatenate([np.asarray(x, float) for x in times])
    y = np.concatenate([np.asarray(x, float) for x in values])
    s = np.concatenate([np.full(len(x), i + 1) for i, x in enumerate(times)])
    return TimeSeriesSet(t, s, y, len(times), tuple(labels) if labels else ())


def load_csv(path):
    """Read a ``t,series,y`` CSV file.

    Labels are mapped to ids 1..L in order of first appearance.  Replicated
    times within a series are kept.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        header = tuple(h.strip() for h in header)
        if header != CSV_HEADER:
            if len(set(header)) != len(header):
                raise FormatError(f"{path}: duplicate columns in header {header}")
            raise FormatError(f"{path}: expected header 't,series,y', got {','.join(header)}")
        ids = {}
        t, s, y = [], [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", row_no)
            tv, label, yv = (c.strip() for c in row)
            try:
                tf = float(tv)
            except ValueError:
                raise ParseError(f"non-numeric time {tv!r}", row_no) from None
            try:
                yf = float(yv)
            except ValueError:
                raise ParseError(f"non-numeric value {yv!r}", row_no) from None
            if not (np.isfinite(tf) and np.isfinite(yf)):
                raise ParseError("non-finite time or value", row_no)
            t.append(tf)
            y.append(yf)
            s.append(ids.setdefault(label, len(ids) + 1))
    labels = tuple(ids)
    return TimeSeriesSet(t, s, y, len(labels), labels).check()


def save_csv(data, path):
    """Write ``data`` as CSV, values with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, s, y in zip(data.t, data.series, data.y):
            w.writerow((format(t, ".17g"), data.labels[s - 1], format(y, ".17g")))


def center_series(data):
    """Subtract each series' sample mean; the means are added to ``offsets``."""
    y = np.array(data.y, dtype=float)
    shift = np.zeros(data.num_series)
    for l in range(1, data.num_series + 1):
        m = data.series == l
        if m.any():
            shift[l - 1] = y[m].mean()
            y[m] -= shift[l - 1]
            # second pass removes the rounding residue of the first
            resid = y[m].mean()
            y[m] -= resid
            shift[l - 1] += resid
    return data.with_values(y, data.offsets + shift)


@dataclass(frozen=True)
class SplitResult:
    train: TimeSeriesSet
    test: TimeSeriesSet
    seed: int
    train_index: np.ndarray = field(repr=False, default=None)


def train_test_split(data, fraction, seed):
    """Random split keeping ``round(fraction * n_l)`` points of each series.

    When all series have the same length the held-out positions are drawn
    once (on series 1) and reused for every series, so the same positional
    indices are held out everywhere.
    """
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    counts = data.counts()
    sizes = np.rint(fraction * counts).astype(int)
    if np.any(fraction * counts < 2):
        raise ValidationError("fraction * n_l must be at least 2 for every series")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    paired = np.all(counts == counts[0])
    if paired:
        pos = np.sort(rng.choice(counts[0], size=sizes[0], replace=False))
    train_idx = []
    for l in range(data.num_series):
        if not paired:
            pos = np.sort(rng.choice(counts[l], size=sizes[l], replace=False))
        train_idx.append(starts[l] + pos)
    train_idx = np.concatenate(train_idx)
    test_idx = np.setdiff1d(np.arange(data.n), train_idx)
    return SplitResult(data.subset(train_idx), data.subset(test_idx), seed, train_idx)
