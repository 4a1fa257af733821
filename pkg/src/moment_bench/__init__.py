"""Benchmark construction and evaluation toolkit for temporal sentence
grounding in videos: dataset re-splitting under changing distributions,
recall metrics with boundary discounting, bias-probing baselines, and
annotation-bias diagnostics."""

__version__ = "0.1.0"

from .annotations import (  # noqa: F401
    DatasetTable,
    MomentAnnotation,
    parse_activitynet_captions,
    parse_charades_sta,
    read_canonical,
    sanitize_pair,
    tokenize,
    write_canonical,
)
from .baselines import bias_based, predict_all  # noqa: F401
from .kde import KdeModel, density, fit_kde, sample_moments  # noqa: F401
from .metrics import (  # noqa: F401
    PredictionSet,
    ScoreReport,
    evaluate,
    hit_and_discount,
    iou,
    read_predictions,
    write_predictions,
)
from .resplit import ResplitConfig, SplitAssignment, resplit  # noqa: F401
from .stats import (  # noqa: F401
    DEFAULT_VERB_LEXICON,
    DensityGrid,
    VerbTable,
    action_conditioned_grid,
    duration_histogram,
    duration_share_over,
    joint_density_grid,
    verb_frequencies,
)
