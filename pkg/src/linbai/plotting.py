"""Deterministic SVG plots from a result store.

Per instance: mean identification confidence vs t (with +/- 2 standard-error
bands when more than one repetition exists), mean cumulative rejection draws
vs t, and mean wall-clock milliseconds vs t.  SVG output is byte-stable for
identical input: fixed hash salt, no embedded creation date.
"""
from __future__ import annotations

import logging
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

from .errors import ConfigError  # noqa: E402
from .harness import ResultStore  # noqa: E402

logger = logging.getLogger(__name__)

matplotlib.rcParams["svg.hashsalt"] = "linbai"


def _save(fig, path: str) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _series(store: ResultStore, instance_id: str, strategy: str, attr: str):
    by_t: dict[int, list[float]] = {}
    for r in store.rows:
        if r.instance_id == instance_id and r.strategy == strategy:
            by_t.setdefault(r.t, []).append(float(getattr(r, attr)))
    ts = sorted(by_t)
    mean = np.array([np.mean(by_t[t]) for t in ts])
    se = np.array([
        np.std(by_t[t], ddof=1) / np.sqrt(len(by_t[t])) if len(by_t[t]) > 1 else 0.0
        for t in ts
    ])
    n = min((len(by_t[t]) for t in ts), default=0)
    return np.array(ts), mean, se, n


def emit_plots(store: ResultStore, out_dir) -> list[str]:
    if not store.rows:
        raise ConfigError("result store is empty; nothing to plot")
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []
    instance_ids = list(dict.fromkeys(r.instance_id for r in store.rows))
    strategies = store.strategies()
    panels = (
        ("posterior_confidence", "confidence", "posterior confidence of the true target"),
        ("rejections_cumulative", "rejections", "mean cumulative rejection draws"),
        ("wall_ms", "wall", "mean wall time (ms)"),
    )
    for inst in instance_ids:
        for attr, stem, ylabel in panels:
            fig, ax = plt.subplots(figsize=(6.4, 4.0))
            plotted = False
            for strat in strategies:
                ts, mean, se, n = _series(store, inst, strat, attr)
                if ts.size == 0:
                    logger.warning("no rows for strategy %r on instance %r; skipped", strat, inst)
                    continue
                (line,) = ax.plot(ts, mean, label=strat, linewidth=1.5)
                if n > 1:
                    ax.fill_between(ts, mean - 2 * se, mean + 2 * se,
                                    color=line.get_color(), alpha=0.2, linewidth=0)
                plotted = True
            if not plotted:
                plt.close(fig)
                continue
            ax.set_xlabel("t")
            ax.set_ylabel(ylabel)
            ax.set_title(inst)
            if attr == "posterior_confidence":
                ax.set_ylim(-0.02, 1.02)
            ax.legend()
            ax.grid(True, alpha=0.3)
            path = os.path.join(out_dir, f"{stem}_{_slug(inst)}.svg")
            _save(fig, path)
            written.append(path)
    return written


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)
