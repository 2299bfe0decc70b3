"""Multi-metric AutoRec: four Lp-norm AutoRec variants and their
self-adaptive exponentially weighted ensemble, in numpy."""

from .dataset import (
    RatingDataset,
    RatingTriple,
    SplitDataset,
    item_column,
    parse_double_colon_separated,
    parse_tab_separated,
    read_ratings,
    split_dataset,
)
from .ensemble import (
    EnsembleState,
    accumulate,
    ensemble_predict,
    ensemble_weights,
    run_joint_training,
    separate_loss,
)
from .metrics import EvalReport, mae, rmse
from .model import (
    VARIANTS,
    BaseModelConfig,
    ModelParams,
    Norm,
    backward,
    forward,
    init_params,
    masked_loss,
    predict_full,
    regularization_term,
    variant_config,
)
from .tuning import TuningResult, tune

__version__ = "0.1.0"
