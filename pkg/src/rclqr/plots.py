"""Headless figure rendering for the CLI report paths.

Figures are written next to the CSV data they visualize; the CSVs remain
the canonical record (the images carry no extra information).
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_convergence_figure(traces, path):
    """Optimality gap and constraint violation vs iteration, one curve per rule.

    ``traces`` maps a label to a dict with keys ``k``, ``opt_gap``,
    ``violation`` (already in relative units).
    """
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for label, data in traces.items():
        ax1.semilogy(data["k"], [max(v, 1e-16) for v in data["opt_gap"]], label=label)
        ax2.semilogy(data["k"], [max(abs(v), 1e-16) for v in data["violation"]], label=label)
    ax1.set_ylabel("relative optimality gap")
    ax2.set_ylabel("|relative constraint violation|")
    ax2.set_xlabel("iteration k")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trajectory_figure(labelled_states, indices, path, steps=200):
    """State-component evolution for a few trajectories.

    ``labelled_states`` maps a label to a (T+1, n) state array; one panel
    per index in ``indices``, truncated to the first ``steps`` samples.
    """
    fig, axes = plt.subplots(len(indices), 1, figsize=(7, 3 * len(indices)), sharex=True)
    if len(indices) == 1:
        axes = [axes]
    for ax, idx in zip(axes, indices):
        for label, states in labelled_states.items():
            upto = min(steps, states.shape[0])
            ax.plot(range(upto), states[:upto, idx], label=label, linewidth=1.2)
        ax.set_ylabel(f"x{idx + 1}")
        ax.grid(True, alpha=0.3)
        ax.legend()
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_dual_gap_figure(certificate, path):
    """Observed duality gap of the averaged multiplier vs the certified bound."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(certificate.ks, [max(g, 1e-16) for g in certificate.gaps],
                label="dual gap at averaged multiplier")
    ax.semilogy(certificate.ks, certificate.bounds, linestyle="--",
                label="guaranteed bound")
    ax.set_xlabel("iteration k")
    ax.set_ylabel("gap")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
