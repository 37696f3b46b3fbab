"""Major-factor selection for a categorical response.

Scans condition the response on single features (order 1) and feature
pairs (order 2), ranking by conditional entropy. Whether an entropy drop
is real or a finite-sample artifact is judged against a permutation
null: the candidate column is shuffled, destroying any link to the
response while keeping its margin, and the resulting drops form the
noise baseline.

SCE-drop of a feature set is the smallest conditional-entropy reduction
any single member contributes over the set without it; for singletons it
coincides with the plain CE-drop. A pair whose SCE-drop beats both the
better singleton drop and the noise baseline carries a genuine order-2
(interaction) effect.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ComputationError
from .infotheory import entropy

ORDER1 = "order1"
ORDER1_PAIR = "order1-pair"
ORDER2_INTERACTION = "order2-interaction"
REDUNDANT = "redundant"
INSIGNIFICANT = "insignificant"

#: Numerical slack for comparing entropies.
EPS = 1e-9


@dataclass(frozen=True)
class FeatureSetResult:
    """Conditional-entropy result for one feature set (all values in bits,
    plus the response-rescaled CE for reporting)."""

    feature_names: tuple[str, ...]
    ce: float
    rescaled_ce: float
    ce_drop: float
    sce_drop: float
    significant: Optional[bool] = None
    classification: Optional[str] = None


@dataclass(frozen=True)
class NullDropStats:
    """Permutation-null distribution of the entropy drop from one candidate."""

    replicates: int
    mean: float
    sd: float
    q95: float
    seed: int


def _check_lengths(y: np.ndarray, cols: Sequence[np.ndarray]) -> None:
    for c in cols:
        if len(c) != len(y):
            raise ComputationError(f"length mismatch: {len(c)} vs {len(y)}")


def _marginal_entropy(y: np.ndarray) -> float:
    _, counts = np.unique(y, return_counts=True)
    return entropy(counts)


def joint_conditional_entropy(y: Sequence[int], cols: Sequence[Sequence[int]]) -> float:
    """H(Y | F) in bits, on the joint table over observed category tuples of F."""
    y = np.asarray(y, dtype=int)
    if len(cols) == 0:
        raise ComputationError("empty feature set")
    cols = [np.asarray(c, dtype=int) for c in cols]
    _check_lengths(y, cols)
    n = y.size
    groups: dict[tuple[int, ...], dict[int, int]] = {}
    for i in range(n):
        key = tuple(int(c[i]) for c in cols)
        cell = groups.setdefault(key, {})
        cell[int(y[i])] = cell.get(int(y[i]), 0) + 1
    h = 0.0
    for cell in groups.values():
        counts = list(cell.values())
        nk = sum(counts)
        h += (nk / n) * entropy(counts)
    return h


def scan_order1(
    y: Sequence[int], candidates: dict[str, Sequence[int]]
) -> list[FeatureSetResult]:
    """CE of the response given each single candidate, ranked ascending.

    Ties break on feature name so the ranking is independent of the
    candidates' input order.
    """
    if not candidates:
        raise ComputationError("no candidates")
    y = np.asarray(y, dtype=int)
    h_y = _marginal_entropy(y)
    results = []
    for name in candidates:
        ce = joint_conditional_entropy(y, [candidates[name]])
        drop = h_y - ce
        results.append(
            FeatureSetResult(
                feature_names=(name,),
                ce=ce,
                rescaled_ce=ce / h_y if h_y > 0 else 0.0,
                ce_drop=drop,
                sce_drop=drop,
            )
        )
    return sorted(results, key=lambda r: (r.ce, r.feature_names))


def scan_order2(
    y: Sequence[int], candidates: dict[str, Sequence[int]]
) -> list[FeatureSetResult]:
    """CE of the response given each unordered candidate pair, ranked ascending."""
    names = sorted(candidates)
    if len(names) < 2:
        raise ComputationError("need at least 2 candidates")
    y = np.asarray(y, dtype=int)
    h_y = _marginal_entropy(y)
    singleton_ce = {n: joint_conditional_entropy(y, [candidates[n]]) for n in names}
    results = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            ce = joint_conditional_entropy(y, [candidates[a], candidates[b]])
            sce = min(singleton_ce[b] - ce, singleton_ce[a] - ce)
            results.append(
                FeatureSetResult(
                    feature_names=(a, b),
                    ce=ce,
                    rescaled_ce=ce / h_y if h_y > 0 else 0.0,
                    ce_drop=h_y - ce,
                    sce_drop=sce,
                )
            )
    return sorted(results, key=lambda r: (r.ce, r.feature_names))


def noise_threshold(
    y: Sequence[int],
    existing: Sequence[Sequence[int]],
    candidate: Sequence[int],
    replicates: int = 200,
    seed: int = 0,
) -> NullDropStats:
    """Permutation-null stats for the drop contributed by a candidate.

    Each replicate shuffles the candidate column with its own rng
    derived from (seed, replicate index), so results do not depend on
    evaluation order.
    """
    if replicates < 1:
        raise ComputationError("replicates must be >= 1")
    y = np.asarray(y, dtype=int)
    existing = [np.asarray(c, dtype=int) for c in existing]
    candidate = np.asarray(candidate, dtype=int)
    _check_lengths(y, existing + [candidate])
    base = (
        joint_conditional_entropy(y, existing) if existing else _marginal_entropy(y)
    )
    drops = np.empty(replicates)
    for r in range(replicates):
        rng = np.random.default_rng([seed, r])
        perm = rng.permutation(candidate)
        drops[r] = base - joint_conditional_entropy(y, existing + [perm])
    return NullDropStats(
        replicates=replicates,
        mean=float(drops.mean()),
        sd=float(drops.std()),
        q95=float(np.percentile(drops, 95)),
        seed=seed,
    )


def classify_pair(
    result_pair: FeatureSetResult,
    result_i: FeatureSetResult,
    result_j: FeatureSetResult,
    null_i: NullDropStats,
    null_j: NullDropStats,
) -> str:
    """Classify a candidate pair against its members' singleton results.

    ``null_i``/``null_j`` are the singleton permutation nulls of the two
    members. Classification:

    * order2-interaction: the pair's SCE-drop exceeds both the better
      singleton drop and the noise q95 baseline.
    * order1-pair: both members individually significant and the joint
      drop at most additive (two concurrent order-1 factors).
    * redundant: the weaker member adds less than its noise baseline on
      top of the stronger one.
    * insignificant: everything else.
    """
    drop_i, drop_j = result_i.sce_drop, result_j.sce_drop
    sig_i = drop_i > null_i.q95 + EPS
    sig_j = drop_j > null_j.q95 + EPS
    sce_pair = result_pair.sce_drop
    q95_max = max(null_i.q95, null_j.q95)

    if sce_pair > min(drop_i, drop_j) + EPS and sce_pair > q95_max + EPS:
        return ORDER2_INTERACTION

    # incremental drop of the weaker member on top of the stronger one
    if drop_i >= drop_j:
        weak_inc = result_i.ce - result_pair.ce
        weak_null = null_j
    else:
        weak_inc = result_j.ce - result_pair.ce
        weak_null = null_i
    if (sig_i or sig_j) and weak_inc <= weak_null.q95 + EPS:
        return REDUNDANT

    if sig_i and sig_j and result_pair.ce_drop <= drop_i + drop_j + EPS:
        return ORDER1_PAIR

    return INSIGNIFICANT


def factor_report(
    scan1: Sequence[FeatureSetResult],
    scan2: Sequence[FeatureSetResult],
    top_k: int = 5,
    bottom_k: int = 1,
    markdown: bool = False,
) -> str:
    """Side-by-side ranked table of 1-feature and 2-feature scans.

    Columns: ``1-feature, CE, SCE-drop, 2-feature, CE, SCE-drop`` with
    re-scaled CE at 4 decimals; top_k head rows plus bottom_k tail rows.
    """
    if not scan1 or not scan2:
        raise ComputationError("empty scan")
    rows = max(len(scan1), len(scan2))
    if top_k + bottom_k > rows:
        warnings.warn(
            f"top {top_k} + bottom {bottom_k} exceeds {rows} results; clamping"
        )

    def pick(scan):
        k_top = min(top_k, len(scan))
        k_bot = min(bottom_k, len(scan) - k_top)
        return list(scan[:k_top]) + list(scan[len(scan) - k_bot:])

    sel1, sel2 = pick(scan1), pick(scan2)
    n = max(len(sel1), len(sel2))

    def cells(sel, i):
        if i < len(sel):
            r = sel[i]
            return ["_".join(r.feature_names), f"{r.rescaled_ce:.4f}",
                    f"{r.sce_drop:.4f}"]
        return ["", "", ""]

    header = ["1-feature", "CE", "SCE-drop", "2-feature", "CE", "SCE-drop"]
    table = [cells(sel1, i) + cells(sel2, i) for i in range(n)]
    widths = [max(len(header[c]), *(len(row[c]) for row in table)) for c in range(6)]

    def fmt(row, sep):
        return sep.join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()

    if markdown:
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
        lines += ["| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |"
                  for row in table]
    else:
        lines = [fmt(header, "  "), "-" * (sum(widths) + 2 * 5)]
        lines += [fmt(row, "  ") for row in table]
    return "\n".join(lines) + "\n"
