"""Photon collection from a trapped ion in an optical cavity.

Analytic collection bounds, full master-equation simulation of the
cavity-mediated Raman transition, measurement analysis (wavepackets,
photon trains) and two-qubit ion-photon tomography.
"""

__version__ = "0.1.0"

from . import constants
from .atom import (EmitterModel, SchemeRates, decay_channel_table,
                   motional_rabi_scaling, scheme_rates, zeeman_splitting)
from .bounds import (BoundInput, BoundResult, beta_parameter, bound_for_scheme,
                     p_bound, p_escape, p_opt, t2_optimal)
from .cavity import (CavityModel, CouplingContext, cooperativity,
                     coupling_strength, derive_geometry, derive_rates)
from .explorer import (DesignPoint, SweepCurve, evaluate_future,
                       evaluate_point, scheme_ladder, sweep_t2)
from .simulator import (DriveConfig, EntanglementResult, SimResult,
                        SystemModel, build_system, effective_rates, evolve,
                        evolve_thermal, reduced_model_evolve,
                        simulate_entanglement)

__all__ = [
    "constants",
    "EmitterModel", "SchemeRates", "decay_channel_table",
    "motional_rabi_scaling", "scheme_rates", "zeeman_splitting",
    "BoundInput", "BoundResult", "beta_parameter", "bound_for_scheme",
    "p_bound", "p_escape", "p_opt", "t2_optimal",
    "CavityModel", "CouplingContext", "cooperativity", "coupling_strength",
    "derive_geometry", "derive_rates",
    "DesignPoint", "SweepCurve", "evaluate_future", "evaluate_point",
    "scheme_ladder", "sweep_t2",
    "DriveConfig", "EntanglementResult", "SimResult", "SystemModel",
    "build_system", "effective_rates", "evolve", "evolve_thermal",
    "reduced_model_evolve", "simulate_entanglement",
]
