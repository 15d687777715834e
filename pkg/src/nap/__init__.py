"""Hypernasality estimation from aligned speech recordings.

Phone-level nasalization likelihood ratios and articulatory-precision
scores from healthy-speech GMM acoustic models, combined with ridge
regression into clinician-style hypernasality ratings.
"""

__version__ = "0.1.0"

from .articulation import ArticulationScorer, train_articulation
from .audio import Waveform, frame_signal, read_wav, resample, write_wav
from .corpus import (
    CorpusManifest,
    Disease,
    RatingsTable,
    load_manifest,
    load_ratings,
)
from .features import (
    PAPER_TOP6,
    SpeakerFeatureVector,
    aggregate,
    to_design_matrix,
)
from .frontend import FrameMatrix, Frontend, compute_mfcc39, compute_plp13
from .gmm import DiagonalGmm, load_gmm, save_gmm
from .nasalization import NasalizationScorer, train_nasalization
from .regression import (
    EvalReport,
    RidgeRater,
    forward_select,
    lodo_evaluate,
    loso_evaluate,
    metrics,
)
from .scores import PhoneScore
from .textgrid import (
    AlignedUtterance,
    NasalClass,
    PhoneSegment,
    alignment_error,
    assign_nasal_classes,
    audit_alignment,
    frames_for_segment,
    parse_textgrid,
)

__all__ = [
    "__version__",
    "ArticulationScorer",
    "AlignedUtterance",
    "CorpusManifest",
    "DiagonalGmm",
    "Disease",
    "EvalReport",
    "FrameMatrix",
    "Frontend",
    "NasalClass",
    "NasalizationScorer",
    "PAPER_TOP6",
    "PhoneScore",
    "PhoneSegment",
    "RatingsTable",
    "RidgeRater",
    "SpeakerFeatureVector",
    "Waveform",
    "aggregate",
    "alignment_error",
    "assign_nasal_classes",
    "audit_alignment",
    "compute_mfcc39",
    "compute_plp13",
    "forward_select",
    "frame_signal",
    "frames_for_segment",
    "load_gmm",
    "load_manifest",
    "load_ratings",
    "lodo_evaluate",
    "loso_evaluate",
    "metrics",
    "parse_textgrid",
    "read_wav",
    "resample",
    "save_gmm",
    "to_design_matrix",
    "train_articulation",
    "train_nasalization",
    "write_wav",
]
