"""Figure rendering for obstacle-control CSV files.

One entry point, `plot_counterexample(csv_path, out_path)`, dispatches on
the CSV header:

* counterexample verdict CSV (``t, control_dist, gap_numeric, ...``):
  log-log plot of |gap| against t, the closed-form values overlaid where
  present, plus a reference t^2 slope line;
* sweep CSV (``value, objective, ...``): objective against the sweep value
  with markers, so a single-row file still renders;
* solution/optimizer CSV (coordinate column plus ``u, psi, y, ...``):
  state/obstacle/control profiles with the contact set shaded when a
  ``contact`` column is present.

All numbers come from the CSV; nothing is recomputed.
"""

from __future__ import annotations

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class PlotDataError(ValueError):
    """Malformed or empty CSV input."""


def load_csv(csv_path: str) -> dict:
    """Read a CSV into {column_name: list of raw string cells}.

    Raises PlotDataError for a missing file, an empty file, or a file with
    a header but no data rows.
    """
    try:
        with open(csv_path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as exc:
        raise PlotDataError(f"cannot read {csv_path!r}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise PlotDataError(f"{csv_path!r} is empty")
    header, body = rows[0], rows[1:]
    if not body:
        raise PlotDataError(f"{csv_path!r} has a header but no data rows")
    if any(len(r) != len(header) for r in body):
        raise PlotDataError(f"{csv_path!r} has ragged rows")
    return {name: [r[i] for r in body] for i, name in enumerate(header)}


def _floats(cells) -> np.ndarray:
    try:
        return np.array([float(c) for c in cells])
    except ValueError as exc:
        raise PlotDataError(f"non-numeric cell: {exc}") from exc


def _plot_gap_curves(data: dict, ax) -> None:
    t = _floats(data["t"])
    gap = _floats(data["gap_numeric"])
    ax.loglog(t, np.abs(gap), "o-", label="|gap| (numeric)")
    closed_cells = data.get("gap_closed_form", [])
    if any(c.strip() for c in closed_cells):
        closed = _floats(closed_cells)
        ax.loglog(t, np.abs(closed), "s--", label="|gap| (closed form)")
    ref = np.abs(gap[0]) * (t / t[0]) ** 2
    ax.loglog(t, ref, ":", color="gray", label="t^2 slope")
    ax.set_xlabel("t")
    ax.set_ylabel("|objective gap|")
    ax.legend()


def _plot_sweep(data: dict, ax) -> None:
    v = _floats(data["value"])
    ax.plot(v, _floats(data["objective"]), "o-", label="objective")
    ax.set_xlabel("sweep value")
    ax.set_ylabel("objective")
    ax2 = ax.twinx()
    ax2.plot(v, _floats(data["active_nodes"]), "s--", color="tab:red",
             label="active nodes")
    ax2.set_ylabel("active nodes")
    ax.legend(loc="upper left")
    ax2.legend(loc="upper right")


def _plot_profiles(data: dict, ax) -> None:
    coord = "x" if "x" in data else "r"
    x = _floats(data[coord])
    for col, style in (("y", "-"), ("psi", "--"), ("u", ":")):
        if col in data:
            ax.plot(x, _floats(data[col]), style, label=col)
    if "contact" in data:
        active = np.array([c != "inactive" for c in data["contact"]])
        if active.any():
            ax.fill_between(x, *ax.get_ylim(), where=active, alpha=0.15,
                            color="tab:orange", label="contact set")
    ax.set_xlabel(coord)
    ax.legend()


def plot_counterexample(csv_path: str, out_path: str) -> str:
    """Render one CSV produced by the obstacle-control CLI to a figure file.

    Returns out_path.  Raises PlotDataError on malformed input.
    """
    data = load_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        if "t" in data and "gap_numeric" in data:
            _plot_gap_curves(data, ax)
        elif "value" in data and "objective" in data:
            _plot_sweep(data, ax)
        elif ("x" in data or "r" in data) and ("y" in data or "u" in data):
            _plot_profiles(data, ax)
        else:
            raise PlotDataError(
                f"unrecognized CSV header: {sorted(data)}")
        fig.tight_layout()
        fig.savefig(out_path)
    finally:
        plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="obstacle-plots",
        description="render an obstacle-control CSV into a figure")
    parser.add_argument("csv_path")
    parser.add_argument("out_path")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        plot_counterexample(args.csv_path, args.out_path)
    except PlotDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
