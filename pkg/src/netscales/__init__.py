"""Change points and timescale spectra of temporal networks by minimum description length."""

from .graph import (
    CsvSchema,
    NodeMapping,
    ParseError,
    TemporalGraph,
    WindowAggregate,
    WindowPartition,
    aggregate,
    ingest_csv,
    read_csv,
    rebin,
    slice_graph,
    write_csv,
)
from .hcm import ActivityVectors, expected_degree, log_prob_hcm, mle_activities
from .mcmc import ChainConfig, ChainResult, run
from .spectrum import Spectrum, SpectrumPoint, build_fixed_partition, rolling_dominant, spectrogram
from .htcm import (
    DLReport,
    Join,
    Move,
    Split,
    WindowCoder,
    description_length,
    dl_delta,
)

__version__ = "0.1.0"
