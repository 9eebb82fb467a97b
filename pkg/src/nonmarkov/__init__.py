"""Qubit distinguishability quantifiers and revival-based non-Markovianity measures."""

from .domains import (
    domain_section,
    find_noncontractive_pair,
    is_positive,
    max_image_norm,
    ncd_membership,
    pd_membership,
    unital_noncontractive_pair,
)
from .dynamics import (
    DephasingModel,
    PhaseCovariantFamily,
    compose_families,
    constant_rate_family,
    counterexample_family,
    cp_check,
    dephasing_as_family,
    dephasing_decoherence,
    eval_map,
    intermediate_map,
    p_div_check,
    rates,
    reconstruct_from_rates,
)
from .measure import (
    DELTA_REV,
    ZERO_MEASURE,
    SearchConfig,
    nm_measure,
    nm_measures,
    pair_trajectory,
    revival_integral,
    robustness_map,
    unital_entropy_measure,
    unital_jsd_td_identity,
)
from .quantifiers import (
    Kind,
    QuantifierId,
    discrimination_probability,
    helstrom_norm,
    holevo_skew,
    jsd,
    quantum_skew,
    relative_entropy,
    sqrt_jsd,
    trace_distance,
    triangle_constants,
)
from .qubit import AffineMap, bloch_from_state, state_from_bloch

__version__ = "0.1.0"
