"""Report rendering: metric tables plus matplotlib figures on disk.

Every figure lands next to the delimited output in the run's output
directory, so a detect/eval run is self-documenting.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .coassoc import CoassociationGraph
from .consensus import CommitRecord
from .filters import EdgeSignificance
from .metrics import MetricReport

__all__ = [
    "write_metrics",
    "plot_commit_trace",
    "plot_community_sizes",
    "plot_weight_histogram",
    "plot_significance",
]


def write_metrics(report: MetricReport, tsv_path: str, txt_path: str) -> None:
    """Emit the metric report as TSV and as human-readable text."""
    rows = [
        ("modularity", f"{report.modularity:.6f}"),
        ("silhouette", f"{report.silhouette:.6f}"),
        ("communities", str(report.n_communities)),
        ("largest_community", str(max(report.community_sizes, default=0))),
    ]
    if report.nmi_reference is not None:
        rows.append(("nmi_reference", f"{report.nmi_reference:.6f}"))
    if report.ensemble_nmi is not None:
        rows.append(("ensemble_avg_nmi", f"{report.ensemble_nmi:.6f}"))
    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write("metric\tvalue\n")
        for name, value in rows:
            fh.write(f"{name}\t{value}\n")
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write("Consensus evaluation\n")
        fh.write("====================\n")
        for name, value in rows:
            fh.write(f"{name:>20}: {value}\n")
        sizes = ", ".join(str(s) for s in report.community_sizes[:20])
        more = " ..." if len(report.community_sizes) > 20 else ""
        fh.write(f"{'community sizes':>20}: {sizes}{more}\n")


def plot_commit_trace(records: list[CommitRecord], path: str) -> None:
    """Modularity after each accepted optimizer step, colored by stage."""
    fig, ax = plt.subplots(figsize=(7, 4))
    if records:
        steps = range(1, len(records) + 1)
        ax.plot([0, *steps], [records[0].q_before] + [r.q_after for r in records],
                color="0.6", lw=1, zorder=1)
        colors = {"intra": "tab:blue", "inter": "tab:orange",
                  "relocate": "tab:green", "partition": "tab:red"}
        for stage, color in colors.items():
            xs = [i for i, r in zip(steps, records) if r.stage == stage]
            ys = [r.q_after for r in records if r.stage == stage]
            if xs:
                ax.scatter(xs, ys, s=18, color=color, label=stage, zorder=2)
        ax.legend(loc="lower right", fontsize=8)
    else:
        ax.text(0.5, 0.5, "no commits", ha="center", va="center",
                transform=ax.transAxes)
    ax.set_xlabel("commit")
    ax.set_ylabel("multilayer modularity")
    ax.set_title("Optimization trace")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_community_sizes(sizes: list[int], path: str) -> None:
    """Sorted community sizes as a bar chart."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ordered = sorted(sizes, reverse=True)
    ax.bar(range(1, len(ordered) + 1), ordered, color="tab:blue")
    ax.set_xlabel("community (sorted by size)")
    ax.set_ylabel("size")
    ax.set_title(f"{len(ordered)} consensus communities")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_weight_histogram(gm: CoassociationGraph, path: str) -> None:
    """Distribution of co-association edge weights."""
    weights = list(gm.graph.weights.values())
    fig, ax = plt.subplots(figsize=(7, 4))
    if weights:
        top = max(weights)
        counts = [weights.count(w) for w in range(1, top + 1)]
        ax.bar(range(1, top + 1), counts, color="tab:purple")
        ax.set_xticks(range(1, top + 1))
    ax.set_xlabel("co-association weight (agreeing layers)")
    ax.set_ylabel("edges")
    ax.set_title("Co-association weights")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_significance(gm: CoassociationGraph, sig: EdgeSignificance,
                      alpha: float, path: str) -> None:
    """Edge p-values against weights, with the significance level marked."""
    fig, ax = plt.subplots(figsize=(7, 4))
    kept_w, kept_p, drop_w, drop_p = [], [], [], []
    for pair, w in gm.graph.weights.items():
        p = sig.pvalues[pair]
        if p < alpha:
            kept_w.append(w)
            kept_p.append(p)
        else:
            drop_w.append(w)
            drop_p.append(p)
    floor = 1e-16
    ax.scatter(drop_w, [max(p, floor) for p in drop_p], s=14, alpha=0.5,
               color="0.6", label=f"dropped ({len(drop_w)})")
    ax.scatter(kept_w, [max(p, floor) for p in kept_p], s=14, alpha=0.7,
               color="tab:green", label=f"kept ({len(kept_w)})")
    ax.axhline(alpha, color="tab:red", lw=1, ls="--", label=f"alpha = {alpha:g}")
    ax.set_yscale("log")
    ax.set_xlabel("co-association weight")
    ax.set_ylabel("p-value")
    ax.set_title(f"Edge significance ({sig.model})")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
