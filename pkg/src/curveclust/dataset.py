"""Curve containers and CSV persistence.

Two layouts are supported on disk:

* ``wide`` -- one shared abscissa grid. The first row is ``x,<x1>,...,<xm>``
  (or ``label_x,<x1>,...`` when a label column is present) and each further
  row holds ``[<label>,]<y1>,...,<ym>``.
* ``long`` -- ragged data. Header ``curve_id,x,y[,label]``, rows grouped by
  ``curve_id`` with ``x`` ascending inside each group.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

LAYOUTS = ("wide", "long")


class DatasetError(ValueError):
    """Raised for malformed curves or unreadable curve files."""


def _fmt(v: float) -> str:
    # repr() of a float is the shortest string that round-trips exactly (>= 12 sig. digits needed)
    return repr(float(v))


@dataclass(frozen=True)
class Curve:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).ravel())
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).ravel())
        self.x.flags.writeable = False
        self.y.flags.writeable = False

    @property
    def m(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of curves with optional ground-truth labels.

    Labels are only used for evaluation; they never enter the fit.
    """

    curves: tuple
    labels: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(self.curves))
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.dtype.kind == "f":
                if not np.all(labels == np.round(labels)):
                    raise DatasetError("labels must be integers")
                labels = labels.astype(int)
            labels = labels.astype(int, copy=True)
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_arrays(cls, x, Y, labels=None) -> "Dataset":
        """Build a shared-grid dataset from a grid ``x`` and an ``(n, m)`` response matrix."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return cls(tuple(Curve(x, row) for row in Y), labels)

    @property
    def n(self) -> int:
        return len(self.curves)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([c.m for c in self.curves], dtype=int)

    @property
    def shared_grid(self) -> bool:
        x0 = self.curves[0].x
        return all(c.m == x0.shape[0] and np.array_equal(c.x, x0) for c in self.curves)

    @property
    def x_range(self) -> tuple:
        lo = min(float(c.x[0]) for c in self.curves)
        hi = max(float(c.x[-1]) for c in self.curves)
        return lo, hi

    def response_matrix(self) -> np.ndarray:
        """Stack the responses into ``(n, m)``; requires a shared grid."""
        if not self.shared_grid:
            raise DatasetError("curves do not share a common grid")
        return np.vstack([c.y for c in self.curves])


def validate(dataset: Dataset) -> Dataset:
    """Check every curve invariant and return ``dataset`` unchanged.

    Raises
    ------
    DatasetError
        On the first violated invariant, naming the offending curve index.
    """
    if dataset.n < 1:
        raise DatasetError("no curves")
    for i, c in enumerate(dataset.curves):
        if c.x.shape != c.y.shape:
            raise DatasetError(f"curve {i}: length mismatch (x has {c.x.size}, y has {c.y.size})")
        if c.m < 1:
            raise DatasetError(f"curve {i}: empty curve")
        if not np.all(np.isfinite(c.x)) or not np.all(np.isfinite(c.y)):
            raise DatasetError(f"curve {i}: non-finite value")
        if np.any(np.diff(c.x) <= 0):
            raise DatasetError(f"curve {i}: non-increasing abscissae")
    if dataset.labels is not None:
        if dataset.labels.shape != (dataset.n,):
            raise DatasetError(f"labels: expected {dataset.n} entries, got {dataset.labels.size}")
        if np.any(dataset.labels < 1):
            raise DatasetError("labels must be >= 1")
    return dataset


def _parse_float(text: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise DatasetError(f"line {lineno}: cannot parse {text!r} as a number") from None


def _read_rows(path) -> list:
    with open(path, newline="") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh))]
    return [(ln, [c.strip() for c in row]) for ln, row in rows if row and any(c.strip() for c in row)]


def _read_wide(rows) -> Dataset:
    (hl, header), body = rows[0], rows[1:]
    if header[0] not in ("x", "label_x"):
        raise DatasetError(f"line {hl}: wide header must start with 'x' or 'label_x'")
    has_labels = header[0] == "label_x"
    x = np.array([_parse_float(v, hl) for v in header[1:]])
    if not body:
        raise DatasetError("no curves")
    curves, labels = [], []
    width = len(header) if has_labels else len(header) - 1
    for ln, row in body:
        if len(row) != width:
            raise DatasetError(f"line {ln}: expected {width} fields, got {len(row)}")
        if has_labels:
            lab = _parse_float(row[0], ln)
            if lab != int(lab):
                raise DatasetError(f"line {ln}: label {row[0]!r} is not an integer")
            labels.append(int(lab))
        values = row[1:] if has_labels else row
        curves.append(Curve(x, [_parse_float(v, ln) for v in values]))
    return Dataset(tuple(curves), np.array(labels) if has_labels else None)


def _read_long(rows) -> Dataset:
    (hl, header), body = rows[0], rows[1:]
    if header[:3] != ["curve_id", "x", "y"] or len(header) not in (3, 4):
        raise DatasetError(f"line {hl}: long header must be curve_id,x,y[,label]")
    has_labels = len(header) == 4
    if has_labels and header[3] != "label":
        raise DatasetError(f"line {hl}: fourth column must be 'label'")
    if not body:
        raise DatasetError("no curves")
    groups: dict = {}
    order: list = []
    last = None
    for ln, row in body:
        if len(row) != len(header):
            raise DatasetError(f"line {ln}: expected {len(header)} fields, got {len(row)}")
        cid = row[0]
        if cid != last and cid in groups:
            raise DatasetError(f"line {ln}: rows of curve {cid!r} are not contiguous")
        if cid not in groups:
            groups[cid] = {"x": [], "y": [], "label": None}
            order.append(cid)
        g = groups[cid]
        g["x"].append(_parse_float(row[1], ln))
        g["y"].append(_parse_float(row[2], ln))
        if has_labels:
            lab = _parse_float(row[3], ln)
            if g["label"] is not None and g["label"] != lab:
                raise DatasetError(f"line {ln}: curve {cid!r} has conflicting labels")
            g["label"] = lab
        last = cid
    curves = tuple(Curve(groups[c]["x"], groups[c]["y"]) for c in order)
    labels = np.array([int(groups[c]["label"]) for c in order]) if has_labels else None
    return Dataset(curves, labels)


def read_csv(path, layout: str = "wide") -> Dataset:
    """Read a dataset in the ``wide`` or ``long`` layout and validate it."""
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}, got {layout!r}")
    rows = _read_rows(path)
    if not rows:
        raise DatasetError("no curves")
    ds = _read_wide(rows) if layout == "wide" else _read_long(rows)
    return validate(ds)


def write_csv(dataset: Dataset, path, layout: str = "wide") -> None:
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}, got {layout!r}")
    validate(dataset)
    labels = dataset.labels
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if layout == "wide":
            if not dataset.shared_grid:
                raise DatasetError("wide layout requires a shared grid; use layout='long'")
            head = "label_x" if labels is not None else "x"
            w.writerow([head] + [_fmt(v) for v in dataset.curves[0].x])
            for i, c in enumerate(dataset.curves):
                lead = [str(int(labels[i]))] if labels is not None else []
                w.writerow(lead + [_fmt(v) for v in c.y])
        else:
            w.writerow(["curve_id", "x", "y"] + (["label"] if labels is not None else []))
            for i, c in enumerate(dataset.curves):
                tail = [str(int(labels[i]))] if labels is not None else []
                for xv, yv in zip(c.x, c.y):
                    w.writerow([str(i + 1), _fmt(xv), _fmt(yv)] + tail)


def concat(datasets: Iterable[Dataset]) -> Dataset:
    datasets = list(datasets)
    curves: Sequence = tuple(c for d in datasets for c in d.curves)
    if all(d.labels is not None for d in datasets):
        labels = np.concatenate([d.labels for d in datasets])
    else:
        labels = None
    return Dataset(curves, labels)
