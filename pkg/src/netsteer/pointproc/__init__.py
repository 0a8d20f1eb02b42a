"""Ground-truth environment: Hawkes simulation, binning, count distributions."""

from .backend import active_backend, get_backend
from .counts import FAMILIES, CountDistribution
from .hawkes import (
    EventSequence,
    HawkesModel,
    SpikeCountMatrix,
    StabilityError,
    ThinningState,
    bin_events,
    counts_from_csv,
    counts_to_csv,
    events_from_csv,
    events_to_csv,
    rescale_to_stable,
    simulate_thinning,
    spectral_radius,
    stationary_intensity,
)

__all__ = [
    "active_backend",
    "get_backend",
    "CountDistribution",
    "FAMILIES",
    "EventSequence",
    "HawkesModel",
    "SpikeCountMatrix",
    "StabilityError",
    "ThinningState",
    "bin_events",
    "counts_from_csv",
    "counts_to_csv",
    "events_from_csv",
    "events_to_csv",
    "rescale_to_stable",
    "simulate_thinning",
    "spectral_radius",
    "stationary_intensity",
]
