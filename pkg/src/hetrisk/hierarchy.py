"""Binary industry classification: tickers -> sub-industries -> industries -> sectors.

Level 0 maps tickers to the most granular clusters; level l maps the
clusters of level l - 1 to those of level l.  Clusters at each level are
ordered by their sorted labels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import HierarchyError, HierarchyMismatch

DEFAULT_LEVEL_NAMES = ("sub_industry", "industry", "sector")


@dataclass(frozen=True)
class IndustryHierarchy:
    tickers: tuple[str, ...]
    parents: tuple[np.ndarray, ...]
    labels: tuple[tuple[str, ...], ...]
    level_names: tuple[str, ...] = DEFAULT_LEVEL_NAMES

    def __post_init__(self):
        if len(self.parents) != len(self.labels) or not self.parents:
            raise HierarchyError("need one parent map and one label list per level")
        if len(self.level_names) != len(self.parents):
            object.__setattr__(
                self, "level_names", tuple(f"level{l + 1}" for l in range(len(self.parents)))
            )
        sizes = [len(self.tickers)] + [len(lab) for lab in self.labels]
        for lvl, parent in enumerate(self.parents):
            parent = np.asarray(parent, dtype=int)
            if parent.shape != (sizes[lvl],):
                raise HierarchyError(f"level {lvl + 1} parent map has wrong length")
            if parent.size and (parent.min() < 0 or parent.max() >= sizes[lvl + 1]):
                raise HierarchyError(f"level {lvl + 1} parent map out of range")
            counts = np.bincount(parent, minlength=sizes[lvl + 1])
            if (counts == 0).any():
                empty = np.flatnonzero(counts == 0)[0]
                raise HierarchyError(
                    f"{self.level_names[lvl]} cluster {self.labels[lvl][empty]!r} is empty"
                )

    @classmethod
    def from_assignments(cls, tickers: Sequence[str], columns: Sequence[Sequence[str]],
                         level_names: Sequence[str] = DEFAULT_LEVEL_NAMES,
                         first_row: int = 1) -> "IndustryHierarchy":
        """Build from per-ticker labels, most granular level first.

        Every cluster must map to exactly one parent cluster; otherwise the
        first offending ticker is reported.
        """
        tickers = tuple(str(t) for t in tickers)
        if len(set(tickers)) != len(tickers):
            raise HierarchyError("duplicate tickers in hierarchy")
        columns = [tuple(str(x) for x in col) for col in columns]
        for col in columns:
            if len(col) != len(tickers):
                raise HierarchyError("label column length does not match tickers")
        labels = [tuple(sorted(set(col))) for col in columns]
        parents = []
        index0 = {lab: i for i, lab in enumerate(labels[0])}
        parents.append(np.array([index0[x] for x in columns[0]], dtype=int))
        for lvl in range(1, len(columns)):
            child_idx = {lab: i for i, lab in enumerate(labels[lvl - 1])}
            parent_idx = {lab: i for i, lab in enumerate(labels[lvl])}
            parent = np.full(len(labels[lvl - 1]), -1, dtype=int)
            for row, (child, par) in enumerate(zip(columns[lvl - 1], columns[lvl])):
                c, p = child_idx[child], parent_idx[par]
                if parent[c] not in (-1, p):
                    raise HierarchyError(
                        f"row {row + first_row} ({tickers[row]}): {level_names[lvl - 1]} {child!r} "
                        f"belongs to both {labels[lvl][parent[c]]!r} and {par!r}"
                    )
                parent[c] = p
            parents.append(parent)
        return cls(tickers, tuple(parents), tuple(labels), tuple(level_names[:len(columns)]))

    @property
    def depth(self) -> int:
        return len(self.parents)

    def counts(self) -> list[int]:
        return [len(lab) for lab in self.labels]

    def ticker_clusters(self, level: int) -> np.ndarray:
        """Cluster index at ``level`` (0-based) for every ticker."""
        idx = np.asarray(self.parents[0])
        for lvl in range(1, level + 1):
            idx = np.asarray(self.parents[lvl])[idx]
        return idx

    def membership(self, level: int) -> np.ndarray:
        """Binary (children x clusters) matrix of ``level``."""
        parent = np.asarray(self.parents[level])
        out = np.zeros((parent.size, len(self.labels[level])))
        out[np.arange(parent.size), parent] = 1.0
        return out

    def ticker_membership(self, level: int = 0) -> np.ndarray:
        idx = self.ticker_clusters(level)
        out = np.zeros((idx.size, len(self.labels[level])))
        out[np.arange(idx.size), idx] = 1.0
        return out

    def assignments(self) -> list[tuple[str, ...]]:
        """Per-ticker label columns, most granular first."""
        return [
            tuple(self.labels[lvl][c] for c in self.ticker_clusters(lvl))
            for lvl in range(self.depth)
        ]

    def singleton_tickers(self) -> np.ndarray:
        """Boolean mask of tickers alone in their most granular cluster."""
        sizes = np.bincount(self.parents[0], minlength=len(self.labels[0]))
        return sizes[self.parents[0]] == 1

    def restrict(self, tickers: Sequence[str]) -> "IndustryHierarchy":
        """Hierarchy over ``tickers`` (in that order), empty clusters dropped."""
        index = {t: i for i, t in enumerate(self.tickers)}
        missing = [t for t in tickers if t not in index]
        if missing:
            raise HierarchyMismatch(f"tickers missing from hierarchy: {missing[:5]}")
        rows = [index[t] for t in tickers]
        columns = [tuple(np.asarray(col)[rows]) for col in self.assignments()]
        return IndustryHierarchy.from_assignments(tickers, columns, self.level_names)

    def validate_nesting(self, strict: bool = False) -> None:
        sizes = [len(self.tickers)] + self.counts()
        for lvl in range(1, len(sizes)):
            bad = sizes[lvl] >= sizes[lvl - 1] if strict else sizes[lvl] > sizes[lvl - 1]
            if bad:
                raise HierarchyError(
                    f"{self.level_names[lvl - 1]} has {sizes[lvl]} clusters, "
                    f"not fewer than the {sizes[lvl - 1]} below it"
                )

    def to_csv(self, path) -> None:
        cols = self.assignments()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["ticker", *self.level_names])
            for i, t in enumerate(self.tickers):
                writer.writerow([t, *(col[i] for col in cols)])

    @classmethod
    def from_csv(cls, path) -> "IndustryHierarchy":
        """Read ``ticker,sub_industry,industry,sector`` (header required)."""
        with open(Path(path), newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise HierarchyError(f"{path}: empty hierarchy file") from None
            if len(header) < 2 or header[0] != "ticker":
                raise HierarchyError(f"{path}: header must start with 'ticker', got {header}")
            tickers, cols = [], [[] for _ in header[1:]]
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header) or any(not x.strip() for x in row):
                    raise HierarchyError(f"{path}: malformed row {lineno}: {row}")
                tickers.append(row[0].strip())
                for col, x in zip(cols, row[1:]):
                    col.append(x.strip())
        if not tickers:
            raise HierarchyError(f"{path}: no rows")
        try:
            return cls.from_assignments(tickers, cols, tuple(header[1:]), first_row=2)
        except HierarchyError as exc:
            raise HierarchyError(f"{path}: {exc}") from None
