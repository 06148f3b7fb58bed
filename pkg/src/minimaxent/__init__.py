"""Minimax learning through maximum conditional entropy.

Closed-form conjugates for the log, 0-1 and quadratic losses, a regularized
dual solver, the randomized maximum entropy machine, robust feature
selection, and brute-force oracles for checking all of it on tiny problems.
"""

from .core import (
    CapabilityError,
    ConfigurationError,
    DataFormatError,
    Dataset,
    DistributionError,
    DivergenceError,
    InvalidLabelError,
    LinearModel,
    LossSpec,
    MinimaxError,
    ModeError,
    NumericInputError,
    StandardizationRecord,
    TargetEncoding,
    UncertaintyBudget,
    encode_target,
)
from .data import GammaSpec, SplitSpec, load_csv, load_sparse, split, standardize, synth_bernoulli
from .decide import k_max, mem_label_distribution, predict
from .evaluation import Method, Protocol, default_methods, error_rate, monte_carlo_eval, tune_lambda
from .losses import (
    conditional_entropy,
    divergence,
    entropy,
    f_theta,
    grad_f_theta,
    information,
    minimax_hinge,
    pointwise_dual_loss,
)
from .persist import ModelFile
from .selection import select_features, support
from .solve import FitOptions, FitTrace, dual_objective, fit, subgradient

__version__ = "0.1.0"
