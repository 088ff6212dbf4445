"""Differentiable Mamdani fuzzy inference with a small reverse-mode autodiff engine."""

from .autodiff import (
    Graph,
    Mask,
    Value,
    backward,
    binary_op,
    compare_mask,
    grad_of,
    make_value,
    reduce,
    stack_rows,
    unary_op,
    unbind_rows,
    where_select,
    zero_grads,
)
from .config import load_fis, save_fis
from .data import Dataset, load_iris, load_table, range_normalize
from .errors import FuzzyGradError
from .fis import Fis, addmf, addrule, addvar, defuzz_centroid, evalfis, gensurf, newfis
from .membership import MembershipFunction, evalmf, gaussmf, gbellmf, genmf, trapmf
from .training import (
    IRIS_TEMPLATE,
    TrainConfig,
    TrainResult,
    build_iris_fis,
    classify,
    count_misclassified,
    get_psi,
    get_theta,
    rmse,
    train,
)

__version__ = "0.1.0"
