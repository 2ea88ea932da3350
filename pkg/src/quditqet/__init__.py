"""Energy teleportation with qudit probes coupled to a massless chiral scalar field."""

from .engine import (DensityCurve, EnergyReport, NumericalContractError, ProtocolConfig,
                     SupportOverlapError, delta_e, energy_density_a, energy_density_b, energy_invested)
from .profiles import SmearingProfile, make_profile, sampled_profile
from .weyl import QuditOperator, QuditState, optimal_initial_state

__version__ = "0.1.0"

__all__ = [
    "DensityCurve",
    "EnergyReport",
    "NumericalContractError",
    "ProtocolConfig",
    "QuditOperator",
    "QuditState",
    "SmearingProfile",
    "SupportOverlapError",
    "delta_e",
    "energy_density_a",
    "energy_density_b",
    "energy_invested",
    "make_profile",
    "optimal_initial_state",
    "sampled_profile",
]
