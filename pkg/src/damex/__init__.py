"""Sparse representation of multivariate extremes and extreme-region anomaly scoring.

Typical use::

    from damex import fit_damex, score_batch, DamexParams
    model = fit_damex(train, DamexParams(k=100, epsilon=0.01))
    scores = score_batch(model, test)   # smaller = more abnormal
"""

from .cones import assign_cone, census, estimate_cone_masses, fit_damex, threshold_masses
from .core import (
    AUTO,
    ConeMassMap,
    DamexModel,
    DamexParams,
    DataError,
    Dataset,
    EmpiricalMarginals,
    FeatureSubset,
    validate_dataset,
)
from .evaluation import (
    CombinedDetector,
    RankedScores,
    combined_score,
    pr_auc,
    repeated_evaluation,
    roc_auc,
    stability_scan,
)
from .iforest import IsolationForest, fit_iforest, iforest_score
from .io import load_model, prepare_dataset, read_csv, save_model
from .ranks import ecdf_eval, fit_marginals, transform_batch, transform_point
from .scoring import is_extreme, level_set_grid, score_batch, score_point
from .simulation import (
    LogisticSpec,
    random_support,
    recovery_errors,
    sample_asymmetric_logistic,
    sample_positive_stable,
    support_recovery_experiment,
)

__version__ = "0.1.0"
