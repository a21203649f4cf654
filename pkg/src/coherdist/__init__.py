"""One-shot coherence distillation of pure qudit states, the SIO channels that
realize it, and a path/polarization optics simulator that implements them."""

from .distillation import (
    DistillationReport,
    NormBreakdown,
    distillation_fidelity,
    embed_target,
    fidelity_regions,
    k_star,
    m_distillation_norm,
    norm_oracle,
    one_shot_distillable_coherence,
    optimal_target,
)
from .errors import (
    CircuitError,
    CoherdistError,
    InfeasibleConversionError,
    InvalidArgumentError,
    InvalidChannelError,
    InvalidStateError,
    LeakageError,
    UnsupportedInputError,
)
from .sio import (
    Channel,
    ConversionPlan,
    OperationClass,
    SioStep,
    angles_for_3to2,
    apply_channel,
    channel_distance,
    classify_operation,
    embed_step,
    kraus_3to2,
    plan_conversion,
    two_mode_kraus,
)
from .states import (
    PureState,
    basis_state,
    family_state,
    majorizes,
    make_pure_state,
    maximally_coherent,
    psi3,
    psi4,
)

__version__ = "0.1.0"
