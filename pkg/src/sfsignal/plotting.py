"""Static figures for trajectories and social-cost comparisons."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.7),
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_trajectory(traj, path, title=None, components=None, normalize=True):
    """Edge-flow trajectories, normalized by total flow as f / |f|_1."""
    flows = traj.edge_flows
    if normalize:
        flows = flows / np.maximum(flows.sum(axis=1, keepdims=True), 1e-300)
    t = np.arange(1, len(flows) + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        cols = range(flows.shape[1]) if components is None else components
        for e in cols:
            ax.plot(t, flows[:, e], lw=1.0, marker="o" if len(t) <= 60 else None, ms=2.5)
        ax.set_xlabel("iteration")
        ax.set_ylabel("normalized edge flow" if normalize else "edge flow")
        label = f"{title} ({traj.classification})" if title else traj.classification
        ax.set_title(label, fontsize=10)
        return _save(fig, path)


def first_component(flows):
    """Projection of normalized flows on their first principal component.

    Returns (scores, explained variance ratio).
    """
    x = flows / np.maximum(flows.sum(axis=1, keepdims=True), 1e-300)
    x = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(x, full_matrices=False)
    total = float(np.sum(s**2))
    ratio = float(s[0] ** 2 / total) if total > 0 else 0.0
    return x @ vt[0], ratio


def plot_first_component(traj, path, title=None):
    scores, ratio = first_component(traj.edge_flows)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(np.arange(1, len(scores) + 1), scores, lw=1.0, marker="o", ms=2.5, color="k")
        ax.set_xlabel("iteration")
        ax.set_ylabel(f"first component ({100 * ratio:.1f}% of variance)")
        if title:
            ax.set_title(title, fontsize=10)
        return _save(fig, path)


def plot_social_costs(costs, path, title="Social cost"):
    """Bar chart of a {label: social cost} mapping, in insertion order."""
    labels = list(costs)
    vals = [costs[k] for k in labels]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(range(len(vals)), vals, color=["0.55", "tab:red", "tab:blue", "0.2"][:len(vals)])
        ax.set_xticks(range(len(vals)))
        ax.set_xticklabels(labels)
        ax.set_ylabel("social cost")
        ax.set_title(title, fontsize=10)
        return _save(fig, path)
