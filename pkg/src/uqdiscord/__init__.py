"""Unlocalizable quantum discord and companion correlation measures."""
from .qcore import (
    CompositeSpace,
    DensityOperator,
    PureState,
    conditional_entropy,
    coherent_information,
    entropy,
    mutual_information,
    partial_trace,
    purify,
    tensor,
)
from .optimizer import OptimizerConfig
from .measures import (
    MeasureResult,
    classical_correlation,
    eof_convex_roof,
    eof_two_qubit,
    entanglement_of_assistance,
    quantum_discord,
    unlocalizable_discord,
    unlocalizable_entanglement,
    uqd_info_gain_bound,
    uqd_via_disturbance,
)

__version__ = "0.1.0"
