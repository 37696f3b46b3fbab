"""Discretization, contingency tables, and entropy-based association.

All entropies are Shannon entropies in bits (log base 2). Re-scaled
conditional entropy H(X|Y)/H(X) is base-invariant, so the base is only
observable in raw-entropy outputs.

NA values map to category 0 and participate in contingency tables as an
ordinary category: a right-censored feature is information, not missing
data to be dropped.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ComputationError

ROWS_GIVEN_COLS = "rows|cols"
COLS_GIVEN_ROWS = "cols|rows"


class DegenerateColumnWarning(UserWarning):
    """Column has too few distinct values for the requested binning."""


@dataclass(frozen=True)
class CategoricalMatrix:
    """Units x features matrix of categories in {0,1,..,n_bins}, 0 = NA."""

    unit_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    cells: np.ndarray  # shape (n_units, n_features), dtype int
    bin_edges: dict[str, Optional[np.ndarray]] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.feature_names.index(name)
        except ValueError as exc:
            raise ComputationError(f"unknown feature column {name!r}") from exc
        return self.cells[:, j]

    def with_columns(
        self, names: Sequence[str], columns: Sequence[np.ndarray]
    ) -> "CategoricalMatrix":
        """Return a copy with extra categorical columns appended."""
        extra = np.column_stack([np.asarray(c, dtype=int) for c in columns])
        return CategoricalMatrix(
            unit_ids=self.unit_ids,
            feature_names=self.feature_names + tuple(names),
            cells=np.hstack([self.cells, extra]),
            bin_edges=dict(self.bin_edges),
        )


@dataclass(frozen=True)
class ContingencyTable:
    """r x c count table; the substrate for all entropy computations."""

    row_labels: tuple[int, ...]
    col_labels: tuple[int, ...]
    counts: np.ndarray  # shape (r, c), non-negative ints

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.col_labels, self.row_labels, self.counts.T.copy())


@dataclass(frozen=True)
class AssociationMatrices:
    """Pairwise directed and mutual re-scaled conditional entropies.

    ``directed[i, j]`` is H(X_j | X_i) / H(X_j): how much of feature j's
    uncertainty survives knowing feature i. ``mutual`` is the symmetric
    average of the two directions. Diagonals are 0.
    """

    feature_names: tuple[str, ...]
    directed: np.ndarray
    mutual: np.ndarray


@dataclass(frozen=True)
class Graph:
    """Threshold network over features; minimal container for DOT export."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]  # (u, v, weight)
    directed: bool

    def to_dot(self, name: str = "association") -> str:
        kind = "digraph" if self.directed else "graph"
        arrow = "->" if self.directed else "--"
        lines = [f"{kind} {name} {{"]
        for node in self.nodes:
            lines.append(f'    "{node}";')
        for u, v, w in self.edges:
            lines.append(f'    "{u}" {arrow} "{v}" [weight={w:.6f}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def discretize(
    values: Iterable[Optional[float]], n_bins: int = 4
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Quartile-bin a real column into categories 1..n_bins; NA -> 0.

    Bin edges sit at the interior percentiles (linear interpolation);
    bins are left-closed with the last bin right-closed. Columns with
    fewer than n_bins distinct values fall back to distinct-value bins
    with a warning. Returns (categories, edges); edges is None for the
    fallback path.
    """
    vals = [None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)
            for v in values]
    if not vals:
        raise ComputationError("empty column")
    present = np.array([v for v in vals if v is not None], dtype=float)
    if present.size == 0:
        raise ComputationError("column is all NA")

    distinct = np.unique(present)
    cats = np.zeros(len(vals), dtype=int)

    if distinct.size < n_bins:
        warnings.warn(
            f"degenerate column: {distinct.size} distinct values for "
            f"{n_bins} bins; using distinct-value bins",
            DegenerateColumnWarning,
        )
        lookup = {v: i + 1 for i, v in enumerate(distinct)}
        for i, v in enumerate(vals):
            if v is not None:
                cats[i] = lookup[v]
        return cats, None

    qs = [100.0 * k / n_bins for k in range(1, n_bins)]
    edges = np.percentile(present, qs)
    for i, v in enumerate(vals):
        if v is not None:
            cats[i] = 1 + int(np.sum(v >= edges))
    return cats, edges


def contingency(x: Sequence[int], y: Sequence[int]) -> ContingencyTable:
    """Cross-tabulate two categorical columns; labels are the sorted
    distinct observed categories (0 included when present)."""
    x = np.asarray(x, dtype=int)
    y = np.asarray(y, dtype=int)
    if x.shape != y.shape:
        raise ComputationError(f"length mismatch: {x.size} vs {y.size}")
    if x.size == 0:
        raise ComputationError("empty columns")
    row_labels = tuple(int(v) for v in np.unique(x))
    col_labels = tuple(int(v) for v in np.unique(y))
    counts = np.zeros((len(row_labels), len(col_labels)), dtype=int)
    ri = {v: i for i, v in enumerate(row_labels)}
    ci = {v: i for i, v in enumerate(col_labels)}
    for a, b in zip(x, y):
        counts[ri[int(a)], ci[int(b)]] += 1
    return ContingencyTable(row_labels, col_labels, counts)


def entropy(counts: Iterable[float]) -> float:
    """Shannon entropy (bits) of the empirical distribution of counts."""
    c = np.asarray(list(counts), dtype=float)
    if np.any(c < 0):
        raise ComputationError("negative count")
    total = c.sum()
    if total <= 0:
        raise ComputationError("all-zero counts")
    p = c[c > 0] / total
    return float(-np.sum(p * np.log2(p)))


def conditional_entropy(t: ContingencyTable, direction: str = COLS_GIVEN_ROWS) -> float:
    """H(col|row) (default) or H(row|col), in bits.

    The count-weighted mean of the per-row (per-column) cell-distribution
    entropies; satisfies the chain rule H(X,Y) = H(X) + H(Y|X) exactly.
    """
    if direction == ROWS_GIVEN_COLS:
        t = t.transpose()
    elif direction != COLS_GIVEN_ROWS:
        raise ComputationError(f"unknown direction {direction!r}")
    n = t.total
    if n < 1:
        raise ComputationError("empty table")
    h = 0.0
    for row in t.counts:
        nr = row.sum()
        if nr > 0:
            h += (nr / n) * entropy(row)
    return h


def rescaled_ce(t: ContingencyTable, direction: str = COLS_GIVEN_ROWS) -> float:
    """Conditional entropy divided by the target margin's entropy, in [0, 1]."""
    margin = t.col_sums if direction == COLS_GIVEN_ROWS else t.row_sums
    h_target = entropy(margin)
    if h_target == 0.0:
        raise ComputationError("degenerate target margin (zero entropy)")
    return conditional_entropy(t, direction) / h_target


def mutual_ce(t: ContingencyTable) -> float:
    """Symmetric association: mean of the two directional re-scaled CEs."""
    return 0.5 * (rescaled_ce(t, COLS_GIVEN_ROWS) + rescaled_ce(t, ROWS_GIVEN_COLS))


def association_matrices(m: CategoricalMatrix) -> AssociationMatrices:
    """All-pairs directed and mutual re-scaled CEs over the feature columns."""
    p = len(m.feature_names)
    if p < 2:
        raise ComputationError("need at least 2 feature columns")
    for name in m.feature_names:
        if entropy(np.bincount(m.column(name))) == 0.0:
            raise ComputationError(f"degenerate column {name!r} (zero entropy)")
    directed = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            t = contingency(m.column(m.feature_names[i]), m.column(m.feature_names[j]))
            directed[i, j] = rescaled_ce(t, COLS_GIVEN_ROWS)
    mutual = 0.5 * (directed + directed.T)
    np.fill_diagonal(mutual, 0.0)
    return AssociationMatrices(m.feature_names, directed, mutual)


def threshold_network(
    a: AssociationMatrices, which: str = "mutual", tau: float = 0.6
) -> Graph:
    """Edges where the association entry is <= tau; weight = 1 - entry."""
    if not 0.0 <= tau <= 1.0:
        raise ComputationError(f"threshold {tau} outside [0, 1]")
    if which == "directed":
        mat, is_directed = a.directed, True
    elif which == "mutual":
        mat, is_directed = a.mutual, False
    else:
        raise ComputationError(f"unknown matrix kind {which!r}")
    names = a.feature_names
    edges = []
    for i in range(len(names)):
        js = range(len(names)) if is_directed else range(i + 1, len(names))
        for j in js:
            if i != j and mat[i, j] <= tau:
                edges.append((names[i], names[j], 1.0 - float(mat[i, j])))
    return Graph(nodes=names, edges=tuple(edges), directed=is_directed)


def odds_ratio(t: ContingencyTable) -> tuple[float, float, float]:
    """Per-row odds counts[i][1]/counts[i][0] of a 2x2 table and their ratio."""
    if t.counts.shape != (2, 2):
        raise ComputationError("odds ratio needs a 2x2 table")
    if t.counts[0, 0] == 0 or t.counts[1, 0] == 0:
        raise ComputationError("zero cell in a denominator position")
    odds1 = t.counts[0, 1] / t.counts[0, 0]
    odds2 = t.counts[1, 1] / t.counts[1, 0]
    return float(odds1), float(odds2), float(odds1 / odds2)
