"""Online nonnegative CP-dictionary learning."""
from .kernels import BACKEND
from .tensor_core import (
    cp_eval, cp_out, hadamard, khatri_rao, khatri_rao_list, mode_product, read_dtf,
    refold, rel_error, unfold, vectorize, devectorize, write_dtf,
)
from .sparse_coding import CodingSettings, code_gram, code_rhs, loss, sparse_code
from .dict_update import (
    FactorSettings, IntermediateAggregates, intermediate_aggregation, surrogate_g, update_factor,
)
from .online import AggregateState, RunConfig, TraceRecord, fit, init, step, weight
from .baselines import als_sweep, mu_sweep, refit_last_mode

__version__ = "0.1.0"
