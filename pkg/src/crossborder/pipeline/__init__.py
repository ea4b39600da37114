from .config import ConfigError, DataError, RunConfig
from .ingest import Datasets, ingest, read_labels, read_register, read_tax_returns
from .run import STAGES, RunResult, StageError, run
from .sampling import HistogramBin, histogram, histogram_export, label_sample_select, log_bins
from .synth import REFERENCE_P, SyntheticSpec, channel_rates, synthesize, write_synthetic
