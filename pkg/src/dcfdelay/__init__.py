"""Mean-delay modelling and simulation for single-hop 802.11 DCF networks under light load."""

from .delay import (
    DelayReport,
    TrafficSpec,
    UnstableLoadError,
    analyze,
    empty_probability,
    mean_delay_homogeneous,
    mean_delay_per_node,
    service_rate_bound_homogeneous,
    solve_service_rate_nonhomogeneous,
    stability_check,
)
from .macmodel import (
    ConvergenceError,
    SlotModel,
    beta_backoff,
    beta_collision,
    saturation_capacity,
    saturation_throughput,
    slot_durations,
    slot_model,
    slot_probabilities,
    solve_attempt_probability,
)
from .params import InvalidParameterError, MacPhyParams, bundled_profile, load_profile

__version__ = "0.1.0"
