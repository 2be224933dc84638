"""Cluster description: classical statistics and modality test values.

Clusters are characterized from two sides: summary statistics of the
continuous variables (over observed entries only) and, per categorical
modality, the share inside the cluster next to the share in the whole
population.  The test value is the ratio of the two; values well above 1
mark modalities that are over-represented in a cluster.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dataset import CategoricalTable, Dataset, Schema


@dataclass(frozen=True)
class ClusterProfile:
    """Per-cluster summary; undefined statistics are NaN (empty clusters,
    unobserved variables, modalities absent from the population)."""

    cluster: int
    size: int
    cont_count: np.ndarray
    cont_mean: np.ndarray
    cont_variance: np.ndarray
    cont_q1: np.ndarray
    cont_median: np.ndarray
    cont_q3: np.ndarray
    within_pct: tuple[np.ndarray, ...]
    global_pct: tuple[np.ndarray, ...]
    test_value: tuple[np.ndarray, ...]


def _global_pct(codes: np.ndarray, counts: tuple[int, ...]) -> list[np.ndarray]:
    n = codes.shape[0]
    out = []
    for j, m in enumerate(counts):
        tally = np.bincount(codes[:, j], minlength=m).astype(float)
        out.append(100.0 * tally / n if n else np.full(m, np.nan))
    return out


def test_values(
    categorical: CategoricalTable,
    labels: np.ndarray,
    k: int,
    modality_counts: tuple[int, ...] | None = None,
) -> list[np.ndarray]:
    """Per variable, a (k, m_j) table of within-share / global-share ratios.

    Undefined entries (empty cluster, or modality absent globally) are NaN
    rather than 0/0.  Without explicit modality_counts the modality range is
    inferred from the data.
    """
    codes = categorical.codes
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != codes.shape[0]:
        raise ValueError("labels length must match table rows")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    if modality_counts is None:
        counts = tuple(
            int(codes[:, j].max()) + 1 if codes.shape[0] else 1
            for j in range(codes.shape[1])
        )
    else:
        counts = tuple(modality_counts)
    glob = _global_pct(codes, counts)
    sizes = np.bincount(labels, minlength=k)
    tables = []
    for j, m in enumerate(counts):
        table = np.full((k, m), np.nan)
        for c in range(k):
            if sizes[c] == 0:
                continue
            tally = np.bincount(codes[labels == c, j], minlength=m).astype(float)
            within = 100.0 * tally / sizes[c]
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = within / glob[j]
            ratio[glob[j] == 0.0] = np.nan
            table[c] = ratio
        tables.append(table)
    return tables


def describe_clusters(d: Dataset, labels: np.ndarray, k: int) -> tuple[ClusterProfile, ...]:
    """Summary statistics and modality test values for every cluster.

    Quartiles use linear interpolation between order statistics; variance
    uses the n-1 denominator.  Missing continuous entries are excluded per
    statistic, not per row.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != d.n_rows:
        raise ValueError("labels length must match dataset rows")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    p = d.schema.p
    counts = d.schema.modality_counts
    codes = d.categorical.codes
    glob = _global_pct(codes, counts)
    tv_tables = test_values(d.categorical, labels, k, modality_counts=counts)

    profiles = []
    for c in range(k):
        mask = labels == c
        size = int(mask.sum())
        cont_count = np.zeros(p, dtype=np.int64)
        mean = np.full(p, np.nan)
        variance = np.full(p, np.nan)
        q1 = np.full(p, np.nan)
        median = np.full(p, np.nan)
        q3 = np.full(p, np.nan)
        for j in range(p):
            obs = mask & d.continuous.observed[:, j]
            vals = d.continuous.values[obs, j]
            cont_count[j] = vals.size
            if vals.size:
                mean[j] = vals.mean()
                q1[j], median[j], q3[j] = np.percentile(vals, [25.0, 50.0, 75.0])
                if vals.size > 1:
                    variance[j] = vals.var(ddof=1)
        within = []
        for j, m in enumerate(counts):
            if size:
                tally = np.bincount(codes[mask, j], minlength=m).astype(float)
                within.append(100.0 * tally / size)
            else:
                within.append(np.full(m, np.nan))
        profiles.append(
            ClusterProfile(
                cluster=c,
                size=size,
                cont_count=cont_count,
                cont_mean=mean,
                cont_variance=variance,
                cont_q1=q1,
                cont_median=median,
                cont_q3=q3,
                within_pct=tuple(within),
                global_pct=tuple(np.array(g) for g in glob),
                test_value=tuple(t[c] for t in tv_tables),
            )
        )
    return tuple(profiles)


def _cell(x: float) -> str:
    return "" if np.isnan(x) else repr(float(x))


def save_continuous_stats_csv(
    profiles: tuple[ClusterProfile, ...], schema: Schema, path
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["cluster", "size", "variable", "count", "mean", "variance", "q1", "median", "q3"]
        )
        for prof in profiles:
            for j, name in enumerate(schema.continuous_names):
                writer.writerow(
                    [
                        prof.cluster,
                        prof.size,
                        name,
                        int(prof.cont_count[j]),
                        _cell(prof.cont_mean[j]),
                        _cell(prof.cont_variance[j]),
                        _cell(prof.cont_q1[j]),
                        _cell(prof.cont_median[j]),
                        _cell(prof.cont_q3[j]),
                    ]
                )


def save_modality_csv(
    profiles: tuple[ClusterProfile, ...], schema: Schema, path
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["cluster", "variable", "modality", "within_pct", "global_pct", "test_value"]
        )
        for prof in profiles:
            for j, (name, mods) in enumerate(schema.categorical_vars):
                for m, label in enumerate(mods):
                    writer.writerow(
                        [
                            prof.cluster,
                            name,
                            label,
                            _cell(prof.within_pct[j][m]),
                            _cell(prof.global_pct[j][m]),
                            _cell(prof.test_value[j][m]),
                        ]
                    )


def mean_profile_svg(profiles: tuple[ClusterProfile, ...], schema: Schema) -> str:
    """Hand-rolled SVG bar chart of each cluster's mean continuous profile.

    One panel per cluster, one horizontal bar per variable, all panels on a
    shared scale.  Deterministic output (no timestamps or library metadata).
    """
    names = schema.continuous_names
    p = len(names)
    finite = [
        v
        for prof in profiles
        for v in prof.cont_mean
        if not np.isnan(v)
    ]
    vmax = max(finite) if finite else 1.0
    vmax = vmax if vmax > 0 else 1.0

    bar_h, gap, label_w, bar_w = 14, 4, 130, 320
    panel_h = 28 + p * (bar_h + gap) + 12
    width = label_w + bar_w + 80
    height = panel_h * len(profiles) + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">'
    ]
    for idx, prof in enumerate(profiles):
        top = 10 + idx * panel_h
        parts.append(
            f'<text x="10" y="{top + 12}" font-weight="bold">'
            f"cluster {prof.cluster} (n={prof.size})</text>"
        )
        for j, name in enumerate(names):
            y = top + 24 + j * (bar_h + gap)
            val = prof.cont_mean[j]
            parts.append(
                f'<text x="{label_w - 6}" y="{y + bar_h - 3}" text-anchor="end">{name}</text>'
            )
            if np.isnan(val):
                parts.append(
                    f'<text x="{label_w + 4}" y="{y + bar_h - 3}" fill="#999">n/a</text>'
                )
                continue
            w = max(0.0, val / vmax) * bar_w
            parts.append(
                f'<rect x="{label_w}" y="{y}" width="{w:.2f}" height="{bar_h}" '
                'fill="#4878a8"/>'
            )
            parts.append(
                f'<text x="{label_w + w + 4:.2f}" y="{y + bar_h - 3}">{val:.2f}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts)
