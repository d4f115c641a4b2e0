"""Static figure rendering from the result CSVs.

All figures are written as SVG (vector) files next to the delimited output.
Each renderer takes parsed CSV rows and is tolerant of missing optional
tables: only figures whose inputs exist are produced.
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .data import DataError
from .summaries import gaussian_kde_curve, lowess

__all__ = ["emit_plots"]

ESTIMATOR_ORDER = ["true_grid", "naive_cv10", "llo_10", "lolo",
                   "buffered_small", "buffered_medium", "buffered_large"]


def _read_csv(path):
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        return header, [row for row in r if row]


def _col(header, rows, name):
    i = header.index(name)
    return [row[i] for row in rows]


def _est_sort_key(label):
    try:
        return (0, ESTIMATOR_ORDER.index(label))
    except ValueError:
        return (1, label)


def _plot_boxplots(header, rows, scenario, out_path):
    rows = [r for r in rows if r[header.index("scenario")] == str(scenario)
            and r[header.index("estimate")] != ""]
    models = sorted({r[header.index("model")] for r in rows})
    fig, axes = plt.subplots(1, len(models), figsize=(4.5 * len(models), 4.0),
                             squeeze=False, sharey=False)
    for ax, model in zip(axes[0], models):
        groups = defaultdict(list)
        for r in rows:
            if r[header.index("model")] == model:
                groups[r[header.index("estimator")]].append(float(r[header.index("estimate")]))
        labels = sorted(groups, key=_est_sort_key)
        ax.boxplot([groups[l] for l in labels], tick_labels=labels)
        ax.set_title(model)
        ax.set_ylabel("estimated MSE")
        ax.tick_params(axis="x", rotation=60)
    fig.suptitle(f"scenario {scenario}")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _plot_scatter(header, rows, scenario, out_path):
    rows = [r for r in rows if r[header.index("scenario")] == str(scenario)
            and r[header.index("estimate")] != ""]
    truth = {}
    for r in rows:
        if r[header.index("estimator")] == "true_grid":
            truth[(r[header.index("model")], r[header.index("replicate")])] = float(
                r[header.index("estimate")]
            )
    models = sorted({r[header.index("model")] for r in rows})
    fig, axes = plt.subplots(1, len(models), figsize=(4.5 * len(models), 4.2), squeeze=False)
    for ax, model in zip(axes[0], models):
        pts = defaultdict(list)
        for r in rows:
            est = r[header.index("estimator")]
            key = (model, r[header.index("replicate")])
            if est != "true_grid" and r[header.index("model")] == model and key in truth:
                pts[est].append((truth[key], float(r[header.index("estimate")])))
        lims = [0.0, 0.0]
        for est in sorted(pts, key=_est_sort_key):
            xy = np.array(pts[est])
            ax.scatter(xy[:, 0], xy[:, 1], s=12, label=est, alpha=0.7)
            lims[1] = max(lims[1], xy.max())
        ax.plot(lims, lims, color="grey", lw=1)
        ax.set_xlabel("true MSE")
        ax.set_ylabel("CV estimate")
        ax.set_title(model)
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _plot_condvar_density(header, rows, out_path):
    groups = defaultdict(list)
    for r in rows:
        groups[r[header.index("scheme")]].append(float(r[header.index("cond_var")]))
    fig, ax = plt.subplots(figsize=(7, 4))
    for scheme in sorted(groups, key=_est_sort_key):
        grid, dens = gaussian_kde_curve(np.array(groups[scheme]))
        ax.plot(grid, dens, label=scheme)
    ax.set_xlabel("conditional variance of test cells")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _plot_condvar_mse(header, rows, out_path, fraction=0.3, B=300, seed=0):
    groups = defaultdict(list)
    for r in rows:
        groups[r[header.index("scheme")]].append(
            (float(r[header.index("cond_var")]), float(r[header.index("sq_error")]))
        )
    fig, ax = plt.subplots(figsize=(7, 4))
    for scheme in sorted(groups, key=_est_sort_key):
        xy = np.array(groups[scheme])
        if len(xy) < 3 or len(np.unique(xy[:, 0])) < 2:
            continue
        grid, smooth = lowess(xy[:, 0], xy[:, 1], fraction=fraction)
        ax.plot(grid, smooth, label=scheme)
        # pointwise bands from resampling the cells
        rng = np.random.default_rng(seed)
        curves = []
        for _ in range(min(B, 60)):  # capped: band rendering only
            rows_b = rng.integers(0, len(xy), len(xy))
            sub = xy[rows_b]
            if len(np.unique(sub[:, 0])) < 2:
                continue
            g, s = lowess(sub[:, 0], sub[:, 1], fraction=fraction)
            curves.append(np.interp(grid, g, s))
        if curves:
            lo, hi = np.percentile(np.array(curves), [2.5, 97.5], axis=0)
            ax.fill_between(grid, lo, hi, alpha=0.15)
    ax.set_xlabel("conditional variance")
    ax.set_ylabel("squared error (LOWESS)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _plot_case_intervals(header, rows, out_path):
    rows = [r for r in rows if r[header.index("estimate")] != ""]
    groups = defaultdict(lambda: defaultdict(list))
    for r in rows:
        groups[r[header.index("model")]][r[header.index("estimator")]].append(
            (int(r[header.index("interval_weeks")]), float(r[header.index("estimate")]))
        )
    models = sorted(groups)
    fig, axes = plt.subplots(1, len(models), figsize=(4.5 * len(models), 4.0), squeeze=False)
    for ax, model in zip(axes[0], models):
        for est in sorted(groups[model], key=_est_sort_key):
            pts = sorted(groups[model][est])
            ws = sorted({w for w, _ in pts})
            med = [float(np.median([e for w2, e in pts if w2 == w])) for w in ws]
            ax.plot(ws, med, marker="o", label=est)
        ax.set_xlabel("interval length (weeks)")
        ax.set_ylabel("estimated MSE")
        ax.set_title(model)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _plot_case_weekly(header, rows, out_path):
    rows = [r for r in rows if r[header.index("estimate")] != ""]
    groups = defaultdict(lambda: defaultdict(list))
    for r in rows:
        groups[r[header.index("model")]][r[header.index("estimator")]].append(
            (int(r[header.index("week")]), float(r[header.index("estimate")]))
        )
    models = sorted(groups)
    fig, axes = plt.subplots(1, len(models), figsize=(4.5 * len(models), 4.0), squeeze=False)
    for ax, model in zip(axes[0], models):
        for est in sorted(groups[model], key=_est_sort_key):
            pts = sorted(groups[model][est])
            ax.plot([w for w, _ in pts], [e for _, e in pts], marker=".", label=est)
        ax.set_xlabel("week")
        ax.set_ylabel("estimated MSE")
        ax.set_title(model)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def emit_plots(results_dir, out_dir):
    """Render every figure whose source CSV is present in ``results_dir``.

    Returns the list of files written; raises DataError if no renderable
    results are found (no files are written in that case).
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    agg_path = os.path.join(results_dir, "aggregate.csv")
    if os.path.exists(agg_path):
        header, rows = _read_csv(agg_path)
        if header == ["scenario", "replicate", "model", "estimator", "estimate",
                      "n_folds", "n_test", "error"]:
            scenarios = sorted({r[0] for r in rows if r})
            for s in scenarios:
                box = os.path.join(out_dir, f"boxplot_s{s}.svg")
                _plot_boxplots(header, rows, s, box)
                written.append(box)
                if any(r[3] == "true_grid" and r[4] != "" for r in rows if r[0] == s):
                    sc = os.path.join(out_dir, f"scatter_s{s}.svg")
                    _plot_scatter(header, rows, s, sc)
                    written.append(sc)
        elif header[0] == "interval_weeks" and rows:
            p = os.path.join(out_dir, "casestudy_intervals.svg")
            _plot_case_intervals(header, rows, p)
            written.append(p)

    cv_path = os.path.join(results_dir, "condvar.csv")
    if os.path.exists(cv_path):
        header, rows = _read_csv(cv_path)
        if rows:
            p = os.path.join(out_dir, "condvar_density.svg")
            _plot_condvar_density(header, rows, p)
            written.append(p)
            p = os.path.join(out_dir, "condvar_mse.svg")
            _plot_condvar_mse(header, rows, p)
            written.append(p)

    wk_path = os.path.join(results_dir, "weekly.csv")
    if os.path.exists(wk_path):
        header, rows = _read_csv(wk_path)
        if rows:
            p = os.path.join(out_dir, "casestudy_weekly.svg")
            _plot_case_weekly(header, rows, p)
            written.append(p)

    if not written:
        raise DataError(f"no renderable results found in {results_dir}")
    return written
