"""Plots measured speedup against H/eta from a sweep CSV.

    python3 scripts/plot_sweep.py out/sweep.csv
"""

import os
import sys

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def main():
    if len(sys.argv) != 2:
        sys.exit(__doc__)
    df = pd.read_csv(sys.argv[1])
    slope, intercept = np.polyfit(df.predicted, df.speedup, 1)
    x = np.linspace(df.predicted.min(), df.predicted.max(), 50)
    fig, ax = plt.subplots()
    ax.plot(df.predicted, df.speedup, "o", label="measured")
    ax.plot(x, slope * x + intercept, "--", label=f"fit {slope:.3f} H/eta + {intercept:.3f}")
    ax.set_xlabel("H / eta")
    ax.set_ylabel("speedup over micro-only")
    ax.legend()
    out = os.path.splitext(sys.argv[1])[0] + ".png"
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
