"""Figure rendering for parameter-sweep CSV files.

Consumes only the documented sweep CSV format (header `p1[,p2],value`, one
sample per line) plus a small job JSON, and writes PNG and SVG scatter
figures: a 2-D view for tied sweeps with shaded parameter bands, and a 3-D
view for two-parameter sweeps colored red-to-green by satisfaction
probability. Output is deterministic for identical inputs.
"""

from .render import (
    Band,
    ColumnMismatch,
    MalformedCsv,
    PlotJob,
    PlotkitError,
    load_job,
    read_sweep_csv,
    render,
    value_colormap,
)

__version__ = "0.1.0"
