"""Build and save the ROC, score-density and district-count figures."""

import warnings
from contextlib import contextmanager
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from reportplots.metricsio import QUADRANTS

# Stable ids and literal text keep repeated SVG renders byte-identical.
plt.rcParams["svg.hashsalt"] = "reportplots"
plt.rcParams["svg.fonttype"] = "none"


@contextmanager
def _quiet_missing_glyphs():
    # District labels may use scripts the installed fonts lack; SVG output
    # embeds the literal text anyway, so these warnings are pure noise.
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*missing from font.*")
        warnings.filterwarnings(
            "ignore", message="Matplotlib currently does not support.*"
        )
        yield


def roc_figure(metrics: dict) -> plt.Figure:
    points = metrics["roc"]["points"]
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.plot([0.0, 1.0], [0.0, 1.0], linestyle="--", color="0.6", label="chance")
    ax.plot(
        [p[0] for p in points],
        [p[1] for p in points],
        marker=".",
        color="tab:blue",
        label="model",
    )
    ax.text(0.58, 0.08, f"AUC = {metrics['roc']['auc']:.3f}")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("ROC curve")
    ax.legend(loc="lower right")
    return fig


def densities_figure(metrics: dict) -> plt.Figure:
    dens = metrics["densities"]
    bins = dens["bins"]
    centers = [(k + 0.5) / bins for k in range(bins)]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in QUADRANTS:
        series = dens[name]
        if not any(series):
            continue
        ax.plot(centers, series, marker=".", label=name.upper())
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("predicted probability")
    ax.set_ylabel("frequency")
    ax.set_title("Score densities by outcome")
    ax.legend(loc="upper center")
    return fig


def district_figure(rows: list[tuple[str, int]], top_n: int | None = None) -> plt.Figure:
    ordered = sorted(rows, key=lambda r: (-r[1], r[0]))
    if top_n is not None:
        if top_n < 1:
            raise ValueError("top_n must be >= 1")
        ordered = ordered[:top_n]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(ordered) + 2.0), 4.0))
    ax.bar(range(len(ordered)), [count for _, count in ordered], color="tab:blue")
    ax.set_xticks(range(len(ordered)))
    ax.set_xticklabels([district for district, _ in ordered], rotation=45, ha="right")
    ax.set_ylabel("documents")
    ax.set_title("Documents per district")
    with _quiet_missing_glyphs():
        fig.tight_layout()
    return fig


def save_figure(fig: plt.Figure, out_path: Path | str) -> Path:
    """Write the figure; SVG output omits the volatile date metadata."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    kwargs = {"metadata": {"Date": None}} if out_path.suffix == ".svg" else {}
    with _quiet_missing_glyphs():
        fig.savefig(out_path, **kwargs)
    plt.close(fig)
    return out_path


def plot_roc(metrics: dict, out_path: Path | str) -> Path:
    return save_figure(roc_figure(metrics), out_path)


def plot_densities(metrics: dict, out_path: Path | str) -> Path:
    return save_figure(densities_figure(metrics), out_path)


def plot_district_bars(
    rows: list[tuple[str, int]], out_path: Path | str, top_n: int | None = None
) -> Path:
    return save_figure(district_figure(rows, top_n), out_path)
