"""Infer 3VSL opinions (evidence counts plus trustor bias) from ordinal trust ratings."""
from .errors import (
    DataError,
    DegenerateOpinionError,
    EmptySupportError,
    InstanceTooLargeError,
    InvalidCutpointsError,
    NumericalAbort,
    OpinionForgeError,
    ParameterDomainError,
    PreconditionError,
    ZeroNormalizerError,
)
from .model import (
    Behavior,
    LogitParams,
    Opinion,
    RatingMatrix,
    dirichlet_log_pdf,
    enumerate_compositions,
    expected_belief,
    multinomial_log_pmf,
    ordered_logit_pmf,
)
from .inference import (
    GibbsState,
    SamplerConfig,
    Trace,
    gibbs_run,
    gibbs_step,
    summarize_posterior,
)
from .kernels import BACKEND

__version__ = "0.1.0"
