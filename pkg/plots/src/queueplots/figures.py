"""Render mean +- std band figures from the experiment CSV contracts.

These are pure views: nothing is recomputed, the CSVs carry the means and
standard deviations already aggregated across seeds. Output is PNG at a
fixed 150 DPI under the committed style file, so renders are comparable
across machines running the pinned matplotlib version.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

STYLE_FILE = Path(__file__).resolve().parent / "style.mplstyle"
DPI = 150

LEARNING_COLUMNS = ["algorithm", "representation", "sample_count", "mean_reward", "std_reward"]
REGRET_COLUMNS = ["algorithm", "representation", "epoch", "mean_regret_delta", "std"]

REPRESENTATION_TITLES = {
    "q": "state: current queue length",
    "qq": "state: queue length with one-step history",
}


class SchemaError(ValueError):
    """The input CSV does not match the harness contract."""


@dataclass(frozen=True)
class FigureSpec:
    """One rendering job: which CSV, where the image goes, which columns."""

    input_csv: Path
    out_path: Path
    x_column: str
    mean_column: str
    std_column: str
    x_label: str
    y_label: str
    log_x: bool = False


@dataclass
class Series:
    algorithm: str
    representation: str
    x: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.x.size < 2:
            raise ValueError(
                f"series {self.algorithm}/{self.representation} has fewer than 2 points"
            )
        if np.any(self.std < 0):
            raise ValueError(
                f"series {self.algorithm}/{self.representation} has negative std"
            )

    @property
    def band(self) -> tuple[np.ndarray, np.ndarray]:
        return self.mean - self.std, self.mean + self.std


def load_series(path: str | Path, columns: list[str]) -> list[Series]:
    """Group CSV rows into per (algorithm, representation) series."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for col in columns:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    x_col, mean_col, std_col = columns[2], columns[3], columns[4]
    grouped: dict[tuple[str, str], list[tuple[float, float, float]]] = {}
    for row in rows:
        key = (row["algorithm"], row["representation"])
        grouped.setdefault(key, []).append(
            (float(row[x_col]), float(row[mean_col]), float(row[std_col]))
        )
    series = []
    for (algo, rep), points in sorted(grouped.items()):
        arr = np.array(points)
        series.append(Series(algo, rep, x=arr[:, 0], mean=arr[:, 1], std=arr[:, 2]))
    return series


def _render(series: list[Series], spec: FigureSpec):
    reps = sorted({s.representation for s in series})
    with plt.style.context(str(STYLE_FILE)):
        fig, axes = plt.subplots(
            1, len(reps), figsize=(5.5 * len(reps), 4.0), sharey=True, squeeze=False
        )
        for ax, rep in zip(axes[0], reps):
            for s in (s for s in series if s.representation == rep):
                ax.plot(s.x, s.mean, label=s.algorithm)
                low, high = s.band
                ax.fill_between(s.x, low, high, alpha=0.25, linewidth=0)
            ax.set_title(REPRESENTATION_TITLES.get(rep, rep))
            ax.set_xlabel(spec.x_label)
            if spec.log_x:
                ax.set_xscale("log")
            ax.legend()
        axes[0][0].set_ylabel(spec.y_label)
        fig.tight_layout()
    return fig


def _save(fig, out_path: str | Path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=DPI)
    plt.close(fig)
    return out_path


def plot_learning_curves(input_csv: str | Path, out_path: str | Path) -> Path:
    """Moving-average reward vs sample count, one panel per representation,
    one line plus a +-1 std band per algorithm."""
    spec = FigureSpec(
        input_csv=Path(input_csv),
        out_path=Path(out_path),
        x_column="sample_count",
        mean_column="mean_reward",
        std_column="std_reward",
        x_label="decision epochs",
        y_label="moving-average reward per epoch",
    )
    series = load_series(spec.input_csv, LEARNING_COLUMNS)
    return _save(_render(series, spec), spec.out_path)


def plot_regret(input_csv: str | Path, out_path: str | Path) -> Path:
    """Per-episode excess queue length over the optimal policy vs epoch,
    with +-1 std bands."""
    spec = FigureSpec(
        input_csv=Path(input_csv),
        out_path=Path(out_path),
        x_column="epoch",
        mean_column="mean_regret_delta",
        std_column="std",
        x_label="decision epoch",
        y_label="excess queue length vs optimal policy",
    )
    series = load_series(spec.input_csv, REGRET_COLUMNS)
    return _save(_render(series, spec), spec.out_path)
