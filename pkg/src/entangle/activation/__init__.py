"""Activation of E_d by an entangled partner state, with certificates and probes."""

from .core import (
    PreconditionError,
    WitnessOperator,
    activation_condition,
    activation_filter,
    activation_filter_fidelity,
    contraction_identity_check,
    joint_state,
    threshold_operator,
    witness_from_rho,
)
from .families import (
    EBoundCertificate,
    certify_decomposition,
    certify_separable_floor,
    choi_flagged_state,
    separable_floor_state,
)
from .runner import (
    ActivationBudget,
    ActivationInstance,
    NotFoundReport,
    demo_instance,
    run_activation_experiment,
)
from .probes import (
    threshold_probe,
    threshold_suite,
    werner_mu_monotonicity_probe,
    werner_suite,
)
