"""Figure rendering for the report paths. Optional: every figure sits next to a
CSV carrying the same numbers, which remains the machine interface."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_heatmap(path, matrix, title):
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(np.asarray(matrix), cmap="viridis")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_spectrum(path, eigenvalues, k=None):
    w = np.asarray(eigenvalues, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(np.arange(1, w.size + 1), w, "o-", ms=4)
    if k:
        ax.axvline(k + 0.5, color="crimson", ls="--", lw=1, label=f"k = {k}")
        ax.legend()
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_title("spectrum of the normalized adjacency")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_embedding_scatter(path, Z, labels=None):
    Z = np.asarray(Z, dtype=float)
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    y = Z[:, 1] if Z.shape[1] > 1 else np.zeros(Z.shape[0])
    if labels is None:
        ax.scatter(Z[:, 0], y, s=24)
    else:
        labels = np.asarray(labels)
        for c in np.unique(labels):
            pts = labels == c
            ax.scatter(Z[pts, 0], y[pts], s=24, label=str(c))
        ax.legend(fontsize=8)
    ax.set_xlabel("z1")
    ax.set_ylabel("z2")
    ax.set_title("embedding (first two coordinates)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trace(path, trace):
    it = [row[0] for row in trace]
    loss = [row[1] for row in trace]
    grad = [row[2] for row in trace]
    fig, axes = plt.subplots(1, 2, figsize=(8, 3))
    axes[0].plot(it, loss)
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("loss")
    axes[1].semilogy(it, grad)
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("gradient norm")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep(path, rows):
    d = [r["delta"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(d, [r["delta_kms"] for r in rows], "o-", ms=4, label="measured improvement")
    if all(r["leading_term"] is not None for r in rows):
        ax.plot(d, [r["leading_term"] for r in rows], "s--", ms=4, label="leading term")
    ax.axhline(0, color="gray", lw=0.6)
    ax.set_xlabel("delta")
    ax.set_ylabel("clustering measure change")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bound_curves(path, reports):
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    for regime, marker in (("labeled", "o"), ("unlabeled", "s")):
        rows = [r for r in reports if r["regime"] == regime]
        if not rows:
            continue
        x = [r["tau_c"] / r["tau1"] for r in rows]
        ax.scatter(x, [max(r["eig_gaps"]) for r in rows], s=18, marker=marker,
                   label=f"{regime}: eigenvalue gap")
        ax.plot(sorted(x), [r["eig_bound"] for r in sorted(rows, key=lambda q: q["tau_c"] / q["tau1"])],
                lw=1, ls="--")
    ax.set_xlabel("tau_c / tau1")
    ax.set_ylabel("|eigenvalue - closed form|")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
