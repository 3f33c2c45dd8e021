"""Plot the mode curves written by ``bandgap sweep-dislocation``.

Usage: python docs/plot_sweep.py OUT_DIR [figure.png]

Needs matplotlib, which the package itself does not depend on.
"""

import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt


def main(argv):
    if not argv:
        sys.exit(__doc__)
    out = Path(argv[0])
    curves = defaultdict(list)
    with open(out / "sweep.csv") as fh:
        for row in csv.DictReader(fh):
            curves[row["curve_id"]].append((float(row["l"]), float(row["omega"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for pts in curves.values():
        pts.sort()
        ax.plot(*zip(*pts), lw=1.2)
    ax.set_xlabel("dislocation length l")
    ax.set_ylabel("mode frequency")
    fig.tight_layout()
    target = argv[1] if len(argv) > 1 else out / "sweep.png"
    fig.savefig(target, dpi=150)
    print(target)


if __name__ == "__main__":
    main(sys.argv[1:])
