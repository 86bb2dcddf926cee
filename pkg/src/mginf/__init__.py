"""Busy-cycle renewal function of the M|G|inf queue."""

from .classbounds import (
    TailEnvelope,
    dfr_upper,
    envelope_premise_check,
    imrl_lower,
    nbue_upper,
    nwue_lower,
    renewal_from_envelope,
)
from .dist import (
    Deterministic,
    Empirical,
    Erlang,
    Exponential,
    Ferreira,
    HyperExponential,
    Power,
    QueueModel,
    ServiceDistribution,
    parse_dist,
)
from .errors import (
    AccuracyError,
    ConsistencyError,
    DomainError,
    MGInfError,
    NumericError,
    ParseError,
    RangeError,
    UnsupportedOperationError,
)
from .mc import SimulationEstimate, estimate_curve, estimate_cycle_moments
from .renewal import (
    CycleMoments,
    RenewalCurve,
    asymptotic_intercept,
    cycle_mean,
    cycle_moments,
    cycle_second_moment,
    cycle_transform,
    elementary_bounds,
    emptiness_probability,
    renewal_curve,
    renewal_derivative,
    renewal_value,
)

__version__ = "0.1.0"
