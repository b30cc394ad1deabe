"""Joint precoder and RIS phase-shift optimization for large-scale MU-MIMO
downlink systems, with instrumented baselines and a seeded experiment harness.
"""

from .ao import AlgorithmVariant, SolveResult, solve
from .channel import (GeometryConfig, SteeringAngles, composite_channel,
                      generate_channels, load_channels, path_loss_db,
                      save_channels, stack_channels, steering_vector)
from .metrics import OpCounter, count_matmul, predicted_outer_cost
from .model import (AuxPrecoderSet, ChannelSet, PhaseVector, PrecoderSet,
                    SolveTrace, SystemConfig, UnsupportedConfigError,
                    dbm_to_watts, validate_config, watts_to_dbm)
from .precoder_sca import (ScaIntermediates, build_intermediates,
                           matched_filter_init, minorant_value, sca_update,
                           solve_precoder)
from .rates import equivalent_rate, recover_precoder, user_rate, wsr
from .ris_spgm import (estimate_lipschitz, grad_equiv_theta_miso,
                       grad_wsr_theta, line_search_armijo,
                       line_search_proposed, project_unit_modulus,
                       scaling_matrix, spg_step)

__version__ = "0.1.0"

__all__ = [
    "AlgorithmVariant", "AuxPrecoderSet", "ChannelSet", "GeometryConfig",
    "OpCounter", "PhaseVector", "PrecoderSet", "ScaIntermediates",
    "SolveResult", "SolveTrace", "SteeringAngles", "SystemConfig",
    "UnsupportedConfigError", "build_intermediates", "composite_channel",
    "count_matmul", "dbm_to_watts", "equivalent_rate", "estimate_lipschitz",
    "generate_channels", "grad_equiv_theta_miso", "grad_wsr_theta",
    "line_search_armijo", "line_search_proposed", "load_channels",
    "matched_filter_init", "minorant_value", "path_loss_db",
    "predicted_outer_cost", "project_unit_modulus", "recover_precoder",
    "save_channels", "sca_update", "scaling_matrix", "solve",
    "solve_precoder", "spg_step", "stack_channels", "steering_vector",
    "user_rate", "validate_config", "watts_to_dbm", "wsr",
]
