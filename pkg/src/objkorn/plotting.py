"""Figures for sweep and Fourier-check reports (file output only)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import FixedLocator, NullFormatter, ScalarFormatter  # noqa: E402

# PNG metadata without a version string keeps files stable across installs
_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_PNG_META if path.suffix == ".png" else None)
    plt.close(fig)


def _period_axis(ax, Ns) -> None:
    ax.xaxis.set_major_locator(FixedLocator(sorted(set(Ns))))
    ax.xaxis.set_major_formatter(ScalarFormatter())
    ax.xaxis.set_minor_formatter(NullFormatter())


def _finite(xs, ys):
    pts = [(x, y) for x, y in zip(xs, ys) if y is not None and math.isfinite(y) and y > 0]
    return [p[0] for p in pts], [p[1] for p in pts]


def sweep_figure(result, path) -> None:
    """Log-log plot of ``c_min`` and ``c_max`` against the period."""
    Ns = [r.N for r in result.reports]
    fig, ax = plt.subplots(figsize=(5.0, 3.6), layout="constrained")
    for attr, marker in (("c_max", "o"), ("c_min", "s")):
        x, y = _finite(Ns, [getattr(r, attr) for r in result.reports])
        if x:
            ax.loglog(x, y, marker=marker, label=attr)
    _period_axis(ax, Ns)
    ax.set_xlabel("period N")
    ax.set_ylabel("equivalence constant")
    s = result.summary
    ax.set_title(f"{s['structure']}: {s['norm_a']} vs {s['norm_b']} ({result.diagnosis})", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    _save(fig, path)


def fourier_figure(checks, path) -> None:
    """Ratio spread ``max/min`` per assertion against the period."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6), layout="constrained")
    names = sorted({name for c in checks for name in c.assertions})
    for name in names:
        x, y = _finite([c.N for c in checks], [c.assertions[name]["spread"] for c in checks])
        ax.semilogx(x, y, marker="o", label=name)
    _period_axis(ax, [c.N for c in checks])
    ax.set_xlabel("period N")
    ax.set_ylabel("max ratio / min ratio")
    if checks:
        ax.set_title(f"{checks[0].structure}: spectral sum vs seminorm", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    if names:
        ax.legend()
    _save(fig, path)
