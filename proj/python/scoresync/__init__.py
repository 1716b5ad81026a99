"""Performance-to-score alignment toolkit.

Feature extraction, classic and structure-aware (jump) DTW, soft-DTW losses,
alignment metrics and the toy neural regressors, backed by a C++ core.
"""

from ._scoresync import (
    InputError,
    InvariantError,
    __version__,
    accuracy_at_margins,
    chromagram,
    cross_similarity,
    diebold_mariano,
    dtw_align,
    dtw_brute_force,
    effective_kernel_size,
    gradient_suite,
    jump_dtw_align,
    load_features_csv,
    soft_dtw,
    soft_dtw_divergence,
    soft_dtw_divergence_grad,
    soft_dtw_grad,
    synth_perturb,
    train_toy,
)

__all__ = [
    "InputError",
    "InvariantError",
    "__version__",
    "accuracy_at_margins",
    "chromagram",
    "cross_similarity",
    "diebold_mariano",
    "dtw_align",
    "dtw_brute_force",
    "effective_kernel_size",
    "gradient_suite",
    "jump_dtw_align",
    "load_features_csv",
    "soft_dtw",
    "soft_dtw_divergence",
    "soft_dtw_divergence_grad",
    "soft_dtw_grad",
    "synth_perturb",
    "train_toy",
]
