"""Plots selected columns of a trajectory CSV and, when present, the
macro step trace written next to it.

    python3 scripts/plot_trajectory.py out/trajectory.csv [column ...]
"""

import os
import sys

import matplotlib.pyplot as plt
import pandas as pd


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    path = sys.argv[1]
    df = pd.read_csv(path)
    columns = sys.argv[2:] or [c for c in df.columns if c not in ("time", "resolution")][:4]
    steps_path = os.path.join(os.path.dirname(path), "steps.csv")
    has_steps = os.path.exists(steps_path)
    fig, axes = plt.subplots(len(columns) + has_steps, 1, sharex=True, squeeze=False)
    axes = axes[:, 0]
    micro = df[df.resolution == "micro"]
    macro = df[df.resolution == "macro"]
    for ax, col in zip(axes, columns):
        ax.plot(micro.time, micro[col], ".", ms=1, label="micro")
        ax.plot(macro.time, macro[col], "o", ms=2, label="macro")
        ax.set_ylabel(col)
    if has_steps:
        steps = pd.read_csv(steps_path)
        axes[-1].step(steps.time, steps.mh, where="post")
        axes[-1].set_ylabel("Mh (s)")
    axes[0].legend(loc="upper right")
    axes[-1].set_xlabel("time (s)")
    fig.tight_layout()
    out = os.path.splitext(path)[0] + ".png"
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
