"""Static SVG rendering of figure CSV files.

Renderers read only the CSV they are handed, so every SVG can be rebuilt
from its data file.  Output is byte-stable: fixed hash salt, no date stamp.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import FileError, read_table_csv  # noqa: E402

__all__ = ["render_lines", "render_heatmap", "render_husimi", "render_figure", "FIGURE_STYLE"]

_RC = {"svg.hashsalt": "majorana-rand", "svg.fonttype": "none", "font.size": 9}

# per-figure axes: (x label, y label, log-scaled y)
FIGURE_STYLE = {
    1: ("K", "mean L_K", False),
    2: ("K", "L_K", False),
    3: ("K", "L_K", True),
    4: ("M", "A_M", False),
    5: ("K", "mean L_K", True),
    6: ("S", "mean E", False),
}


def _save(fig, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    except OSError as exc:
        raise FileError(f"{path}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)
    return path


def _numeric(rows):
    return np.array([[float(v) if v != "" else np.nan for v in row] for row in rows], dtype=float)


def render_lines(csv_path, svg_path, xlabel="x", ylabel="y", logy=False, title=None) -> Path:
    """Line chart: first CSV column is x, each further column one series."""
    header, rows = read_table_csv(csv_path)
    data = _numeric(rows)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for j, name in enumerate(header[1:], start=1):
            y = data[:, j]
            if logy:
                y = np.where(y > 0, y, np.nan)
            style = "--" if name.startswith(("bound", "cs")) else "-"
            ax.plot(data[:, 0], y, style, marker="." if len(y) < 40 else None, label=name, lw=1.2)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, svg_path)


def render_heatmap(csv_path, svg_path, lines_csv=None, title=None) -> Path:
    """Histogram heatmap from ``K,bin_lo,bin_hi,count`` rows, optionally overlaid with line data."""
    _, rows = read_table_csv(csv_path)
    data = _numeric(rows)
    Ks = np.unique(data[:, 0]).astype(int)
    edges = np.unique(np.concatenate([data[:, 1], data[:, 2]]))
    counts = np.zeros((edges.size - 1, Ks.size))
    col = {k: i for i, k in enumerate(Ks)}
    lo_index = {v: i for i, v in enumerate(edges[:-1])}
    for K, lo, _, c in data:
        counts[lo_index[lo], col[int(K)]] = c
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        kedges = np.concatenate([Ks - 0.5, [Ks[-1] + 0.5]])
        masked = np.ma.masked_where(counts <= 0, counts)
        mesh = ax.pcolormesh(kedges, edges, masked, cmap="viridis", norm=matplotlib.colors.LogNorm(), shading="flat")
        fig.colorbar(mesh, ax=ax, label="samples")
        if edges[0] > 0 and edges[-1] / edges[0] > 1e3:
            ax.set_yscale("log")
        if lines_csv is not None:
            header, lrows = read_table_csv(lines_csv)
            ldata = _numeric(lrows)
            for j, name in enumerate(header[1:], start=1):
                y = np.where(ldata[:, j] > 0, ldata[:, j], np.nan)
                ax.plot(ldata[:, 0], y, "w-" if j == 1 else "w--", lw=1.0, label=name)
            ax.legend(frameon=False, fontsize=7, labelcolor="black")
        ax.set_xlabel("K")
        ax.set_ylabel("L_K")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, svg_path)


def render_figure(fig_id: int, csv_path, svg_path, hist_csv=None) -> Path:
    xlabel, ylabel, logy = FIGURE_STYLE[fig_id]
    if fig_id == 2 and hist_csv is not None:
        return render_heatmap(hist_csv, svg_path, lines_csv=csv_path, title="figure 2")
    return render_lines(csv_path, svg_path, xlabel, ylabel, logy, title=f"figure {fig_id}")


def render_husimi(csv_path, svg_path, title=None) -> Path:
    """Equirectangular heatmap of a ``theta,phi,Q`` grid file."""
    _, rows = read_table_csv(csv_path)
    data = _numeric(rows)
    theta = np.unique(data[:, 0])
    phi = np.unique(data[:, 1])
    Q = data[:, 2].reshape(theta.size, phi.size)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.6, 3.0))
        mesh = ax.pcolormesh(phi, theta, Q, cmap="magma", shading="nearest")
        fig.colorbar(mesh, ax=ax, label="Q")
        ax.invert_yaxis()
        ax.set_xlabel("phi")
        ax.set_ylabel("theta")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, svg_path)
