"""Complex-regularized multisymplectic geometry on the flat torus.

Linear CRMS-form validation and Darboux frames, polar-decomposition
construction of compatible metric / almost-complex pairs, a discretized
multisymplectic action with exact discrete gradient, principal-symbol
diagnostics, and a Fueter gradient-flow integrator.
"""

from .linalg import (
    AlternatingThreeForm,
    ConditionCheck,
    LinearComplexStructure,
    SpdMatrix,
    SplitSpace,
    ValidationReport,
    antisymmetrize,
    evaluate_form,
    matrix_sqrt_spd,
    pull_back,
    standard_complex_structure,
    standard_crms_form,
    standard_fiber_forms,
    fiber_complex_matrix,
    validate_crms,
    wedge3,
)
from .darboux import (
    CrpsPair,
    DarbouxFrame,
    crms_darboux,
    crps_darboux,
    darboux_reconstruction_error,
    standard_crps_pair,
)
from .compatible import CompatibleTriple, build_compatible, j_of_direction, standard_triple
from .fields import (
    BUILTIN_HAMILTONIANS,
    FieldState,
    HamiltonianSpec,
    TorusGrid,
    action,
    bridges_residual,
    ddw_residual,
    diff,
    diff_state,
    l2_gradient,
    make_hamiltonian,
    momenta_from_positions,
    read_state,
    read_state_csv,
    write_state,
    write_state_csv,
)
from .flow import (
    FlowConfig,
    FlowTrace,
    flow_step,
    fueter_residual,
    run_flow,
    write_trace_csv,
)
from .symbols import SymbolReport, principal_symbol, symbol_kernel
from .transition import PatchSamples, cauchy_riemann_defect, sample_patch, transition_check
from .errors import (
    ConfigError,
    CrmsError,
    CrmsValidationError,
    DegenerateFormError,
    DimensionMismatchError,
    FlowDivergenceError,
)

__version__ = "0.1.0"
