"""Figure rendering for hmc-sysid run artifacts.

Five plot kinds, all driven by the files a run leaves behind: traces with
autocorrelation, posterior marginals, Nyquist overlays, smoothed states,
and pairwise scatter matrices.
"""

from .artifacts import (
    ArtifactError,
    ChainTable,
    DataTable,
    EmptyArtifact,
    FreqResponseTable,
    MissingColumn,
    Space,
    StatesTable,
    read_chain,
    read_data,
    read_freqresp,
    read_space,
    read_states,
    read_transfer_truth,
    transfer_response,
)
from .plots import (
    KINDS,
    PlotJob,
    acf,
    plot_marginals,
    plot_nyquist,
    plot_pairs,
    plot_states,
    plot_trace_acf,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "ChainTable",
    "DataTable",
    "EmptyArtifact",
    "FreqResponseTable",
    "KINDS",
    "MissingColumn",
    "PlotJob",
    "Space",
    "StatesTable",
    "acf",
    "plot_marginals",
    "plot_nyquist",
    "plot_pairs",
    "plot_states",
    "plot_trace_acf",
    "read_chain",
    "read_data",
    "read_freqresp",
    "read_space",
    "read_states",
    "read_transfer_truth",
    "transfer_response",
    "__version__",
]
