import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import LinearSegmentedColormap


class PlotkitError(Exception):
    pass


class MalformedCsv(PlotkitError):
    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class ColumnMismatch(PlotkitError):
    def __init__(self, kind, found):
        expected = 2 if kind == "tied2d" else 3
        super().__init__(f"{kind} needs a {expected}-column CSV, found {found} columns")


@dataclass(frozen=True)
class Band:
    label: str
    lo: float
    hi: float
    color: str


@dataclass(frozen=True)
class PlotJob:
    input: str
    kind: str                   # "tied2d" | "surface3d"
    output: str                 # base path; .png and .svg are both written
    bands: tuple = ()

    def __post_init__(self):
        if self.kind not in ("tied2d", "surface3d"):
            raise PlotkitError(f"unknown plot kind {self.kind!r}")


def load_job(path) -> PlotJob:
    with open(path) as f:
        raw = json.load(f)
    try:
        bands = tuple(
            Band(b["label"], float(b["range"][0]), float(b["range"][1]), b["color"])
            for b in raw.get("bands", ()))
        return PlotJob(input=raw["input"], kind=raw["kind"].lower(),
                       output=raw["output"], bands=bands)
    except (KeyError, TypeError, ValueError) as exc:
        raise PlotkitError(f"bad job file {path}: {exc}") from exc


def read_sweep_csv(path):
    """(column names, float array of shape (rows, columns)).

    Accepts only the documented sweep format: a header line, then rows of
    2 or 3 comma-separated floats with the value last.
    """
    with open(path) as f:
        lines = [line for line in f.read().splitlines() if line.strip()]
    if not lines:
        raise MalformedCsv(0, "empty file")
    header = lines[0].split(",")
    if header[-1] != "value" or len(header) not in (2, 3):
        raise MalformedCsv(1, "header must be 'p1[,p2],value'")
    if len(lines) == 1:
        raise MalformedCsv(1, "no data rows")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise MalformedCsv(i, f"expected {len(header)} columns, found {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise MalformedCsv(i, str(exc)) from exc
    return header, np.asarray(rows)


def value_colormap():
    """Red at 0, yellow midway, green at 1: low values flag likely incidents."""
    return LinearSegmentedColormap.from_list("satisfaction", ["red", "yellow", "green"])


VALUE_LABEL = "Probability of satisfaction"


def make_figure(job: PlotJob, header, data):
    """Build the matplotlib figure for a parsed sweep table."""
    if job.kind == "tied2d":
        if data.shape[1] != 2:
            raise ColumnMismatch(job.kind, data.shape[1])
        return _tied2d(job, header, data)
    if data.shape[1] != 3:
        raise ColumnMismatch(job.kind, data.shape[1])
    return _surface3d(header, data)


def _tied2d(job, header, data):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for b in job.bands:
        ax.axvspan(b.lo, b.hi, color=b.color, alpha=0.4, label=b.label)
    ax.scatter(data[:, 0], data[:, 1], s=14, color="tab:green", zorder=3)
    ax.set_xlabel(header[0].replace("=", " = "))
    ax.set_ylabel(VALUE_LABEL)
    ax.set_ylim(0.0, 1.0)
    if job.bands:
        ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


def _surface3d(header, data):
    fig = plt.figure(figsize=(6.4, 5.0))
    ax = fig.add_subplot(projection="3d")
    ax.scatter(data[:, 0], data[:, 1], data[:, 2],
               c=data[:, 2], cmap=value_colormap(), vmin=0.0, vmax=1.0,
               s=16, depthshade=False)
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])
    ax.set_zlabel(VALUE_LABEL)
    ax.set_zlim(0.0, 1.0)
    return fig


def render(job: PlotJob):
    """File-to-file rendering; writes both PNG and SVG, deterministically.

    Returns the (png, svg) paths written.
    """
    header, data = read_sweep_csv(job.input)
    plt.rcParams["svg.hashsalt"] = "plotkit"
    fig = make_figure(job, header, data)
    base, ext = os.path.splitext(job.output)
    if ext.lower() not in ("", ".png", ".svg"):
        base = job.output
    png, svg = base + ".png", base + ".svg"
    try:
        fig.savefig(png, metadata={"Software": None})
        fig.savefig(svg, metadata={"Date": None})
    finally:
        plt.close(fig)
    return png, svg
