"""Shared synthetic-data builders for the test suite."""

from __future__ import annotations

import csv
import datetime as dt

import numpy as np

from epicurve.ingest import RateSeries

START = dt.date(2022, 3, 25)
END = dt.date(2022, 8, 19)


def triangle(pad: int, rise: int, decline: int, peak: float, total: int) -> np.ndarray:
    """Zero-padded rise/decline triangle of length ``total``."""
    curve = np.zeros(total)
    for d in range(rise + 1):
        curve[pad + d] = peak * d / rise
    for d in range(1, decline + 1):
        t = pad + rise + d
        if t < total:
            curve[t] = max(0.0, peak * (1 - d / decline))
    return curve


def geography_series(n_per_side: int = 42, seed: int = 123):
    """Two groups of rate curves: steep growth (North) vs shallow (South),
    with matched decline. Returns (series list, {unit_id: region})."""
    rng = np.random.default_rng(seed)
    total = (END - START).days + 1
    series, regions = [], {}
    for i in range(2 * n_per_side):
        north = i < n_per_side
        rise = int(rng.integers(16, 24)) if north else int(rng.integers(50, 62))
        decline = int(rng.integers(62, 70))
        peak = 80.0 * float(1 + 0.08 * rng.standard_normal())
        curve = triangle(pad=12, rise=rise, decline=decline, peak=peak, total=total)
        unit = f"{'NO' if north else 'SO'}{i:03d}"
        series.append(RateSeries(unit_id=unit, start_date=START, rates=tuple(curve)))
        regions[unit] = "North" if north else "South"
    return series, regions


def write_synthetic_inputs(dirpath, n_units: int = 20, seed: int = 7):
    """Write cases.csv and meta.csv for a small varied synthetic cohort.

    Half the units get steep growth and are tagged North/Urban, the other
    half shallow growth, South/Suburban. Returns (cases_path, meta_path).
    """
    rng = np.random.default_rng(seed)
    total = (END - START).days + 1
    cases_path = dirpath / "cases.csv"
    meta_path = dirpath / "meta.csv"

    with open(cases_path, "w", newline="") as cfh, open(meta_path, "w", newline="") as mfh:
        cases = csv.writer(cfh)
        meta = csv.writer(mfh)
        cases.writerow(["unit_id", "date", "count"])
        meta.writerow(["unit_id", "city_code", "district_letter", "age_group",
                       "population", "region", "status"])
        for i in range(n_units):
            north = i < n_units // 2
            rise = int(rng.integers(15, 26)) if north else int(rng.integers(35, 46))
            decline = int(rng.integers(65, 86))
            peak = float(rng.integers(400, 650))
            curve = triangle(pad=5, rise=rise, decline=decline, peak=peak, total=total)
            noise = 1.0 + 0.08 * rng.standard_normal(total)
            counts = np.maximum(0, np.rint(curve * noise)).astype(int)
            unit = f"{'TP' if north else 'KS'}{chr(ord('a') + i % 12)}{i:02d}"
            for d, c in enumerate(counts):
                cases.writerow([unit, (START + dt.timedelta(days=d)).isoformat(), c])
            meta.writerow([
                unit, "TP" if north else "KS", chr(ord("a") + i % 12), "",
                100000 + 1000 * i,
                "North" if north else "South",
                "Urban" if north else "Suburban",
            ])
    return cases_path, meta_path


def base_config(dirpath, out_name: str = "out") -> dict:
    """Config mapping exercising every stage on the synthetic cohort."""
    return {
        "cases": "cases.csv",
        "metadata": "meta.csv",
        "output": out_name,
        "window": {"start": START, "end": END},
        "n_bins": 4,
        "thresholds": [0.6, 0.7],
        "fusions": [
            {"name": "left30to70",
             "columns": ["left30", "left40", "left50", "left60", "left70"],
             "k": 4, "seed": 11, "restarts": 20},
        ],
        "responses": [
            {"response": "region",
             "candidates": ["left30to70", "left80", "right50", "peakvalue"],
             "order": 2, "replicates": 50, "seed": 5, "top": 3, "bottom": 1},
        ],
        "clusterings": [
            {"name": "left",
             "columns": ["left90", "left80", "left70", "left60",
                         "left50", "left40", "left30", "left20"]},
        ],
    }


def random_merge_tree(n_leaves: int, rng: np.random.Generator):
    """Random agglomeration respecting the smaller-min-leaf-left rule."""
    from epicurve.cluster_fuse import HCTree

    active = list(range(n_leaves))
    min_leaf = {i: i for i in range(n_leaves)}
    merges = []
    height = 0.0
    node = n_leaves
    while len(active) > 1:
        i, j = rng.choice(len(active), size=2, replace=False)
        a, b = active[int(i)], active[int(j)]
        height += float(rng.random())
        left, right = (a, b) if min_leaf[a] <= min_leaf[b] else (b, a)
        merges.append((node, left, right, height))
        min_leaf[node] = min(min_leaf[a], min_leaf[b])
        active = [x for x in active if x not in (a, b)] + [node]
        node += 1
    labels = tuple(f"L{i}" for i in range(n_leaves))
    return HCTree(leaf_labels=labels, merges=tuple(merges))


def naive_ward_reference(x: np.ndarray):
    """Centroid-formula Ward.D2: merge distances computed directly as
    2|A||B|/(|A|+|B|) * ||centroid_A - centroid_B||^2, no Lance-Williams
    recursion. Same tie-break key as the production implementation."""
    n = x.shape[0]
    members = {i: [i] for i in range(n)}
    min_leaf = {i: i for i in range(n)}
    active = set(range(n))
    merges = []
    node = n
    while len(active) > 1:
        best_key, best = None, None
        for a in sorted(active):
            for b in sorted(active):
                if b <= a:
                    continue
                ca = x[members[a]].mean(axis=0)
                cb = x[members[b]].mean(axis=0)
                na, nb = len(members[a]), len(members[b])
                d2 = 2.0 * na * nb / (na + nb) * float(((ca - cb) ** 2).sum())
                lo, hi = sorted((min_leaf[a], min_leaf[b]))
                key = (d2, lo, hi)
                if best_key is None or key < best_key:
                    best_key, best = key, (a, b)
        a, b = best
        left, right = (a, b) if min_leaf[a] <= min_leaf[b] else (b, a)
        merges.append((node, left, right, float(np.sqrt(best_key[0]))))
        members[node] = members[a] + members[b]
        min_leaf[node] = min(min_leaf[a], min_leaf[b])
        active -= {a, b}
        active.add(node)
        node += 1
    return merges
