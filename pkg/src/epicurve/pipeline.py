"""End-to-end pipeline: raw CSVs -> features -> associations -> scans ->
fusion -> clustering artifacts.

Every stage reads its inputs from the raw files or the previous stage's
artifacts in the output directory, so running stages individually in
order is byte-identical to running everything at once. All randomness
flows from seeds in the config; rerunning with identical inputs and
config reproduces every artifact bit for bit.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import cluster_fuse, curve_features, infotheory, major_factor
from .curve_features import FEATURE_COLUMNS, SHAPE_FEATURES
from .errors import ConfigError, DataError
from .ingest import (
    DEFAULT_RATE_SCALE,
    compute_daily_rates,
    parse_case_series,
    parse_unit_metadata,
    window_clip,
)

#: Default study window (configurable).
DEFAULT_WINDOW = (dt.date(2022, 3, 25), dt.date(2022, 8, 19))

#: Metadata-derived binary response columns and their category coding.
META_RESPONSES = {
    "region": ("North", "South"),
    "status": ("Urban", "Suburban"),
}

NUMERIC_FEATURES = tuple(c for c in FEATURE_COLUMNS if c != "peakdate")


@dataclass(frozen=True)
class FusionSpec:
    name: str
    columns: tuple[str, ...]
    k: int = 4
    seed: int = 0
    restarts: int = 100


@dataclass(frozen=True)
class ResponseSpec:
    response: str
    candidates: tuple[str, ...]
    order: int = 2
    replicates: int = 200
    seed: int = 0
    top: int = 5
    bottom: int = 1


@dataclass(frozen=True)
class ClusteringSpec:
    name: str
    columns: tuple[str, ...]


@dataclass(frozen=True)
class PipelineConfig:
    cases: str
    metadata: str
    output: str
    window_start: dt.date = DEFAULT_WINDOW[0]
    window_end: dt.date = DEFAULT_WINDOW[1]
    rate_scale: float = DEFAULT_RATE_SCALE
    n_bins: int = 4
    thresholds: tuple[float, ...] = (0.6, 0.7)
    fusions: tuple[FusionSpec, ...] = ()
    responses: tuple[ResponseSpec, ...] = ()
    clusterings: tuple[ClusteringSpec, ...] = ()

    def to_dict(self) -> dict:
        return {
            "cases": self.cases,
            "metadata": self.metadata,
            "output": self.output,
            "window": {"start": self.window_start, "end": self.window_end},
            "rate_scale": self.rate_scale,
            "n_bins": self.n_bins,
            "thresholds": list(self.thresholds),
            "fusions": [
                {"name": f.name, "columns": list(f.columns), "k": f.k,
                 "seed": f.seed, "restarts": f.restarts}
                for f in self.fusions
            ],
            "responses": [
                {"response": r.response, "candidates": list(r.candidates),
                 "order": r.order, "replicates": r.replicates, "seed": r.seed,
                 "top": r.top, "bottom": r.bottom}
                for r in self.responses
            ],
            "clusterings": [
                {"name": c.name, "columns": list(c.columns)}
                for c in self.clusterings
            ],
        }


def _as_date(value, what: str) -> dt.date:
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError as exc:
        raise ConfigError(f"bad {what} date: {value!r}") from exc


def config_from_dict(data: dict, base_dir: str = ".") -> PipelineConfig:
    """Build and validate a PipelineConfig from a plain mapping.

    Relative input/output paths are resolved against ``base_dir``.
    Column references are checked here, before any computation.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    for key in ("cases", "metadata", "output"):
        if key not in data:
            raise ConfigError(f"config is missing {key!r}")

    def resolve(p):
        p = str(p)
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    window = data.get("window", {}) or {}
    start = _as_date(window.get("start", DEFAULT_WINDOW[0]), "window start")
    end = _as_date(window.get("end", DEFAULT_WINDOW[1]), "window end")
    if start >= end:
        raise ConfigError(f"window start {start} must precede end {end}")

    thresholds = tuple(float(t) for t in data.get("thresholds", [0.6, 0.7]))
    for t in thresholds:
        if not 0.0 <= t <= 1.0:
            raise ConfigError(f"threshold {t} outside [0, 1]")

    n_bins = int(data.get("n_bins", 4))
    if n_bins < 2:
        raise ConfigError("n_bins must be >= 2")

    fusions = []
    for f in data.get("fusions", []) or []:
        spec = FusionSpec(
            name=str(f["name"]),
            columns=tuple(str(c) for c in f["columns"]),
            k=int(f.get("k", 4)),
            seed=int(f.get("seed", 0)),
            restarts=int(f.get("restarts", 100)),
        )
        if spec.k < 1:
            raise ConfigError(f"fusion {spec.name}: k must be >= 1")
        for c in spec.columns:
            if c not in NUMERIC_FEATURES:
                raise ConfigError(f"fusion {spec.name}: unknown column {c!r}")
        fusions.append(spec)
    fusion_names = {f.name for f in fusions}

    categorical_names = set(("peakdate",) + SHAPE_FEATURES) | fusion_names
    responses = []
    for r in data.get("responses", []) or []:
        spec = ResponseSpec(
            response=str(r["response"]),
            candidates=tuple(str(c) for c in r["candidates"]),
            order=int(r.get("order", 2)),
            replicates=int(r.get("replicates", 200)),
            seed=int(r.get("seed", 0)),
            top=int(r.get("top", 5)),
            bottom=int(r.get("bottom", 1)),
        )
        if spec.order not in (1, 2, 3):
            raise ConfigError(
                f"response {spec.response}: scan order must be 1, 2 or 3"
            )
        if spec.response not in categorical_names | set(META_RESPONSES):
            raise ConfigError(f"unknown response column {spec.response!r}")
        for c in spec.candidates:
            if c not in categorical_names:
                raise ConfigError(
                    f"response {spec.response}: unknown candidate column {c!r}"
                )
        responses.append(spec)

    clusterings = []
    for c in data.get("clusterings", []) or []:
        spec = ClusteringSpec(
            name=str(c["name"]), columns=tuple(str(x) for x in c["columns"])
        )
        for col in spec.columns:
            if col not in NUMERIC_FEATURES:
                raise ConfigError(f"clustering {spec.name}: unknown column {col!r}")
        clusterings.append(spec)

    return PipelineConfig(
        cases=resolve(data["cases"]),
        metadata=resolve(data["metadata"]),
        output=resolve(data["output"]),
        window_start=start,
        window_end=end,
        rate_scale=float(data.get("rate_scale", DEFAULT_RATE_SCALE)),
        n_bins=n_bins,
        thresholds=thresholds,
        fusions=tuple(fusions),
        responses=tuple(responses),
        clusterings=tuple(clusterings),
    )


def load_config(path: str) -> PipelineConfig:
    """Load and validate a YAML pipeline config."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return config_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# artifact helpers

def _out(cfg: PipelineConfig, name: str) -> str:
    os.makedirs(cfg.output, exist_ok=True)
    return os.path.join(cfg.output, name)


def _require(cfg: PipelineConfig, name: str, stage: str) -> str:
    path = os.path.join(cfg.output, name)
    if not os.path.exists(path):
        raise DataError(f"missing {name}; run `{stage}` first")
    return path


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _fmt(v: Optional[float]) -> str:
    if v is None:
        return ""
    if isinstance(v, int) or (isinstance(v, float) and v == int(v)):
        return str(int(v))
    return f"{v:.6f}"


# ---------------------------------------------------------------------------
# stage: features

def stage_features(cfg: PipelineConfig) -> str:
    """Parse raw inputs and write the per-unit feature CSV."""
    series = parse_case_series(cfg.cases)
    meta = parse_unit_metadata(cfg.metadata)
    rows = []
    for unit in sorted(series):
        if unit not in meta:
            raise DataError(f"{unit}: case data without metadata")
        rates = compute_daily_rates(series[unit], meta[unit], cfg.rate_scale)
        rates = window_clip(rates, cfg.window_start, cfg.window_end)
        smoothed = curve_features.smooth(rates)
        feats = curve_features.extract_features(smoothed)
        rows.append(feats.as_row())

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["unit_id"] + list(FEATURE_COLUMNS))
    for row in rows:
        out = [row["unit_id"], row["peakdate"]]
        for col in FEATURE_COLUMNS[1:]:
            out.append(_fmt(row[col]))
        writer.writerow(out)
    path = _out(cfg, "features.csv")
    _write_text(path, buf.getvalue())
    return path


def read_features_csv(path: str):
    """Read features.csv into (unit_ids, {column: list of float or None})."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        units = []
        columns: dict[str, list] = {c: [] for c in FEATURE_COLUMNS}
        for row in reader:
            units.append(row["unit_id"])
            for c in FEATURE_COLUMNS:
                raw = row.get(c, "")
                if c == "peakdate":
                    columns[c].append(dt.date.fromisoformat(raw))
                else:
                    columns[c].append(float(raw) if raw else None)
    return units, columns


# ---------------------------------------------------------------------------
# stage: associate

def build_categorical(cfg: PipelineConfig, units, columns) -> infotheory.CategoricalMatrix:
    """Discretize peakdate plus the 18 shape features into categories."""
    names = ("peakdate",) + SHAPE_FEATURES
    cats = []
    edges: dict[str, Optional[np.ndarray]] = {}
    for name in names:
        if name == "peakdate":
            vals = [float(d.toordinal()) for d in columns[name]]
        else:
            vals = columns[name]
        col, e = infotheory.discretize(vals, cfg.n_bins)
        cats.append(col)
        edges[name] = e
    return infotheory.CategoricalMatrix(
        unit_ids=tuple(units),
        feature_names=names,
        cells=np.column_stack(cats),
        bin_edges=edges,
    )


def stage_associate(cfg: PipelineConfig) -> list[str]:
    """Discretize features and write association matrices and networks."""
    features_path = _require(cfg, "features.csv", "features")
    units, columns = read_features_csv(features_path)
    m = build_categorical(cfg, units, columns)

    written = []

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["unit_id"] + list(m.feature_names))
    for i, unit in enumerate(m.unit_ids):
        writer.writerow([unit] + [int(v) for v in m.cells[i]])
    path = _out(cfg, "categorical.csv")
    _write_text(path, buf.getvalue())
    written.append(path)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["feature"] + [f"edge{i}" for i in range(1, cfg.n_bins)])
    for name in m.feature_names:
        e = m.bin_edges.get(name)
        if e is None:
            writer.writerow([name] + [""] * (cfg.n_bins - 1))
        else:
            writer.writerow([name] + [f"{v:.6f}" for v in e])
    path = _out(cfg, "bin_edges.csv")
    _write_text(path, buf.getvalue())
    written.append(path)

    assoc = infotheory.association_matrices(m)
    for kind, mat in (("directed", assoc.directed), ("mutual", assoc.mutual)):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["feature"] + list(assoc.feature_names))
        for i, name in enumerate(assoc.feature_names):
            writer.writerow([name] + [f"{v:.6f}" for v in mat[i]])
        path = _out(cfg, f"association_{kind}.csv")
        _write_text(path, buf.getvalue())
        written.append(path)

    for tau in cfg.thresholds:
        for kind in ("directed", "mutual"):
            g = infotheory.threshold_network(assoc, kind, tau)
            path = _out(cfg, f"network_{kind}_{tau:g}.dot")
            _write_text(path, g.to_dot(name=f"{kind}_{str(tau).replace('.', '_')}"))
            written.append(path)
    return written


def read_categorical_csv(path: str):
    """Read categorical.csv into (unit_ids, {column: int array})."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        names = [c for c in reader.fieldnames if c != "unit_id"]
        units = []
        columns: dict[str, list[int]] = {c: [] for c in names}
        for row in reader:
            units.append(row["unit_id"])
            for c in names:
                columns[c].append(int(row[c]))
    return units, {c: np.array(v) for c, v in columns.items()}


# ---------------------------------------------------------------------------
# stage: fuse

def stage_fuse(cfg: PipelineConfig) -> list[str]:
    """K-means fuse feature blocks and write the fused label columns."""
    features_path = _require(cfg, "features.csv", "features")
    units, columns = read_features_csv(features_path)
    written = []
    fused_cols: dict[str, np.ndarray] = {}
    for spec in cfg.fusions:
        matrix = np.column_stack([
            [np.nan if v is None else v for v in columns[c]] for c in spec.columns
        ])
        fused = cluster_fuse.kmeans_fuse(
            matrix, spec.columns, spec.name,
            k=spec.k, seed=spec.seed, restarts=spec.restarts,
        )
        fused_cols[spec.name] = fused.labels

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cluster"] + list(spec.columns))
        for i, c in enumerate(fused.centroids):
            writer.writerow([i + 1] + [f"{v:.6f}" for v in c])
        path = _out(cfg, f"fusion_{spec.name}_centroids.csv")
        _write_text(path, buf.getvalue())
        written.append(path)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = [s.name for s in cfg.fusions]
    writer.writerow(["unit_id"] + names)
    for i, unit in enumerate(units):
        writer.writerow([unit] + [int(fused_cols[n][i]) for n in names])
    path = _out(cfg, "fused.csv")
    _write_text(path, buf.getvalue())
    written.append(path)
    return written


# ---------------------------------------------------------------------------
# stage: select

def _response_column(cfg: PipelineConfig, name, units, cat_columns) -> np.ndarray:
    if name in META_RESPONSES:
        meta = parse_unit_metadata(cfg.metadata)
        first, second = META_RESPONSES[name]
        out = []
        for unit in units:
            if unit not in meta:
                raise DataError(f"{unit}: no metadata for response {name!r}")
            value = getattr(meta[unit], name)
            out.append(1 if value == first else 2)
        return np.array(out)
    if name not in cat_columns:
        raise ConfigError(f"unknown response column {name!r}")
    return cat_columns[name]


def _scan_response(cfg: PipelineConfig, spec: ResponseSpec, units, cat_columns):
    """Run the order-1/2/3 scans plus nulls and classification for one response."""
    y = _response_column(cfg, spec.response, units, cat_columns)
    candidates = {}
    for c in spec.candidates:
        if c not in cat_columns:
            raise DataError(f"candidate {c!r} not found; run `associate`/`fuse` first")
        candidates[c] = cat_columns[c]

    scan1 = major_factor.scan_order1(y, candidates)
    names = sorted(candidates)
    nulls = {
        name: major_factor.noise_threshold(
            y, [], candidates[name],
            replicates=spec.replicates, seed=spec.seed + idx,
        )
        for idx, name in enumerate(names)
    }
    annotated1 = []
    for r in scan1:
        null = nulls[r.feature_names[0]]
        sig = r.ce_drop > null.q95 + major_factor.EPS
        annotated1.append(
            major_factor.FeatureSetResult(
                feature_names=r.feature_names,
                ce=r.ce, rescaled_ce=r.rescaled_ce,
                ce_drop=r.ce_drop, sce_drop=r.sce_drop,
                significant=sig,
                classification=major_factor.ORDER1 if sig
                else major_factor.INSIGNIFICANT,
            )
        )

    annotated2 = []
    if spec.order >= 2 and len(candidates) >= 2:
        by_name = {r.feature_names[0]: r for r in annotated1}
        for r in major_factor.scan_order2(y, candidates):
            a, b = r.feature_names
            cls = major_factor.classify_pair(
                r, by_name[a], by_name[b], nulls[a], nulls[b]
            )
            sig = r.sce_drop > max(nulls[a].q95, nulls[b].q95) + major_factor.EPS
            annotated2.append(
                major_factor.FeatureSetResult(
                    feature_names=r.feature_names,
                    ce=r.ce, rescaled_ce=r.rescaled_ce,
                    ce_drop=r.ce_drop, sce_drop=r.sce_drop,
                    significant=sig, classification=cls,
                )
            )

    annotated3 = []
    if spec.order >= 3 and len(candidates) >= 3:
        h_y = major_factor._marginal_entropy(y)
        for i, a in enumerate(names):
            for j in range(i + 1, len(names)):
                for k in range(j + 1, len(names)):
                    trip = (a, names[j], names[k])
                    cols = [candidates[t] for t in trip]
                    ce = major_factor.joint_conditional_entropy(y, cols)
                    sce = min(
                        major_factor.joint_conditional_entropy(
                            y, [c for t, c in zip(trip, cols) if t != drop_name]
                        ) - ce
                        for drop_name in trip
                    )
                    annotated3.append(
                        major_factor.FeatureSetResult(
                            feature_names=trip,
                            ce=ce,
                            rescaled_ce=ce / h_y if h_y > 0 else 0.0,
                            ce_drop=h_y - ce,
                            sce_drop=sce,
                        )
                    )
        annotated3.sort(key=lambda r: (r.ce, r.feature_names))

    return annotated1, annotated2, annotated3, nulls


def _write_scan_csv(path, scan1, scan2, scan3, nulls):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([
        "features", "ce", "rescaled_ce", "ce_drop", "sce_drop",
        "null_mean", "null_q95", "significant", "classification",
    ])
    for r in list(scan1) + list(scan2) + list(scan3):
        if len(r.feature_names) == 1:
            null = nulls[r.feature_names[0]]
            null_mean, null_q95 = f"{null.mean:.6f}", f"{null.q95:.6f}"
        else:
            null_mean = null_q95 = ""
        writer.writerow([
            "_".join(r.feature_names),
            f"{r.ce:.6f}", f"{r.rescaled_ce:.6f}",
            f"{r.ce_drop:.6f}", f"{r.sce_drop:.6f}",
            null_mean, null_q95,
            "" if r.significant is None else str(bool(r.significant)).lower(),
            r.classification or "",
        ])
    _write_text(path, buf.getvalue())


def stage_select(cfg: PipelineConfig) -> list[str]:
    """Run major-factor scans for each configured response."""
    cat_path = _require(cfg, "categorical.csv", "associate")
    units, cat_columns = read_categorical_csv(cat_path)
    if cfg.fusions:
        fused_path = _require(cfg, "fused.csv", "fuse")
        f_units, f_columns = read_categorical_csv(fused_path)
        if f_units != units:
            raise DataError("fused.csv and categorical.csv disagree on units")
        cat_columns.update(f_columns)

    written = []
    for spec in cfg.responses:
        scan1, scan2, scan3, nulls = _scan_response(cfg, spec, units, cat_columns)
        path = _out(cfg, f"scan_{spec.response}.csv")
        _write_scan_csv(path, scan1, scan2, scan3, nulls)
        written.append(path)
        written.extend(_write_reports(cfg, spec.response, scan1, scan2,
                                      spec.top, spec.bottom))
    return written


def _write_reports(cfg, response, scan1, scan2, top, bottom) -> list[str]:
    written = []
    if scan1 and scan2:
        for ext, md in (("txt", False), ("md", True)):
            text = major_factor.factor_report(scan1, scan2, top, bottom, markdown=md)
            path = _out(cfg, f"report_{response}.{ext}")
            _write_text(path, text)
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# stage: cluster

def stage_cluster(cfg: PipelineConfig) -> list[str]:
    """Build Ward.D2 trees, leaf codes, similarity matrices, and heatmaps."""
    features_path = _require(cfg, "features.csv", "features")
    units, columns = read_features_csv(features_path)
    written = []
    for spec in cfg.clusterings:
        matrix = np.column_stack([
            [np.nan if v is None else v for v in columns[c]] for c in spec.columns
        ])
        tree, excluded = cluster_fuse.hcluster_ward(matrix, units)
        codes = cluster_fuse.leaf_codes(tree)

        path = _out(cfg, f"tree_{spec.name}.csv")
        _write_text(path, cluster_fuse.tree_csv(tree))
        written.append(path)

        path = _out(cfg, f"similarity_{spec.name}.csv")
        _write_text(path, cluster_fuse.similarity_csv(codes))
        written.append(path)

        path = _out(cfg, f"heatmap_{spec.name}.svg")
        _write_text(path, cluster_fuse.similarity_svg(codes))
        written.append(path)

        if excluded:
            path = _out(cfg, f"excluded_{spec.name}.txt")
            _write_text(path, "\n".join(excluded) + "\n")
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# stage: report

def read_scan_csv(path: str):
    """Read a scan CSV back into (order-1 results, order-2 results)."""
    scan1, scan2 = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            names = tuple(row["features"].split("_"))
            r = major_factor.FeatureSetResult(
                feature_names=names,
                ce=float(row["ce"]),
                rescaled_ce=float(row["rescaled_ce"]),
                ce_drop=float(row["ce_drop"]),
                sce_drop=float(row["sce_drop"]),
                significant=(row["significant"] == "true")
                if row["significant"] else None,
                classification=row["classification"] or None,
            )
            if len(names) == 1:
                scan1.append(r)
            elif len(names) == 2:
                scan2.append(r)
    return scan1, scan2


def stage_report(cfg: PipelineConfig, top: Optional[int] = None,
                 bottom: Optional[int] = None) -> list[str]:
    """Re-render ranked reports from existing scan CSVs."""
    written = []
    for spec in cfg.responses:
        path = _require(cfg, f"scan_{spec.response}.csv", "select")
        scan1, scan2 = read_scan_csv(path)
        written.extend(_write_reports(
            cfg, spec.response, scan1, scan2,
            spec.top if top is None else top,
            spec.bottom if bottom is None else bottom,
        ))
    return written


# ---------------------------------------------------------------------------
# full run + manifest

def write_manifest(cfg: PipelineConfig) -> str:
    """Digest every artifact in the output directory into manifest.txt."""
    entries = []
    for root, _dirs, files in os.walk(cfg.output):
        for fname in files:
            if fname == "manifest.txt":
                continue
            full = os.path.join(root, fname)
            rel = os.path.relpath(full, cfg.output)
            digest = hashlib.sha256(open(full, "rb").read()).hexdigest()
            entries.append(f"{digest}  {rel}")
    path = _out(cfg, "manifest.txt")
    _write_text(path, "\n".join(sorted(entries)) + "\n")
    return path


def run_pipeline(cfg: PipelineConfig) -> str:
    """Run every stage in order and write the artifact manifest."""
    stage_features(cfg)
    stage_associate(cfg)
    if cfg.fusions:
        stage_fuse(cfg)
    if cfg.responses:
        stage_select(cfg)
    if cfg.clusterings:
        stage_cluster(cfg)
    return write_manifest(cfg)
