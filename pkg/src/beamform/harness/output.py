"""CSV and plot-script writers for experiment rows."""
from __future__ import annotations

import csv
import os

HEADER = ("experiment", "algorithm", "x_value", "sinr_db_mean", "sinr_db_std", "trials")


def _sorted(rows):
    if not rows:
        raise ValueError("no result rows to write")
    return sorted(rows, key=lambda r: (r.algorithm, r.x_value))


def write_csv(rows, fh) -> None:
    """Write rows sorted by algorithm then x to an open text stream; floats keep full precision."""
    rows = _sorted(rows)
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(HEADER)
    for r in rows:
        wr.writerow([r.experiment, r.algorithm, repr(float(r.x_value)), repr(float(r.sinr_db_mean)),
                     repr(float(r.sinr_db_std)), int(r.trials)])


def emit_csv(rows, path: str | os.PathLike) -> None:
    _sorted(rows)  # fail before touching the file
    with open(path, "w", newline="") as fh:
        write_csv(rows, fh)


_XLABEL = {"sinr-vs-snapshots": "snapshots", "sinr-vs-snr": "SNR (dB)",
           "sinr-vs-epsilon": "epsilon", "gamma-sweep": "gamma"}

_SCRIPT = '''"""Plot {title}: one SINR curve per algorithm. Needs matplotlib."""
import csv
import sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

src = sys.argv[1] if len(sys.argv) > 1 else {csv_path!r}
dst = sys.argv[2] if len(sys.argv) > 2 else {png_path!r}
curves = defaultdict(list)
with open(src) as fh:
    for row in csv.DictReader(fh):
        curves[row["algorithm"]].append((float(row["x_value"]), float(row["sinr_db_mean"])))
fig, ax = plt.subplots(figsize=(6, 4))
for name, pts in sorted(curves.items()):
    pts.sort()
    ax.plot([p[0] for p in pts], [p[1] for p in pts], label=name)
ax.set_xlabel({xlabel!r})
ax.set_ylabel("SINR (dB)")
ax.set_title({title!r})
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(dst, dpi=150)
print("wrote", dst)
'''


def emit_plot_script(rows, path: str | os.PathLike, csv_path: str | os.PathLike = "results.csv",
                     kind: str | None = None) -> None:
    """Write a standalone matplotlib script that renders ``csv_path``.

    The script takes optional ``[csv] [png]`` arguments overriding the
    embedded paths.
    """
    rows = _sorted(rows)
    title = rows[0].experiment
    png = os.path.splitext(os.fspath(path))[0] + ".png"
    text = _SCRIPT.format(title=title, csv_path=os.fspath(csv_path), png_path=png,
                          xlabel=_XLABEL.get(kind or title, "x"))
    with open(path, "w") as fh:
        fh.write(text)
