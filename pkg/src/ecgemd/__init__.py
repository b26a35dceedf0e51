"""ECG arrhythmia screening by empirical mode decomposition and the Hurst
exponent of the first intrinsic mode function."""

from .classify import (ClassifierConfig, CohortReport, RecordReport, classify_h,
                       load_fixture, run_cohort, run_fixture, run_record)
from .emd import Decomposition, Imf, SiftConfig, decompose
from .hurst import RsConfig, RsCurve, hurst_exponent, interpret_h, rs_curve
from .ingest import (CohortManifest, RecordMeta, TimeSeries, load_manifest, load_record,
                     synth_signal, write_record)
from .sgolay import SgParams, sg_coefficients, sg_smooth
from .significance import SignificanceReport, select_significant

__version__ = "0.1.0"
