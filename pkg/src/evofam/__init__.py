"""Evolution families of non-autonomous forms on finite-dimensional Gelfand triples."""

__version__ = "0.1.0"

from .forms import (
    DiniReport,
    FormError,
    Modulus,
    NonautonomousForm,
    NotCoerciveError,
    adjoint_form,
    boundedness_constant,
    check_dini,
    coercivity_constant,
    dini_deviation,
    kato_constants,
    returned_adjoint_form,
    shift,
    verify_uniformity,
)
from .gelfand import GelfandError, GelfandTriple
from .propagator import (
    ConvergenceError,
    Propagator,
    PropagatorEval,
    Subdivision,
    averaged_generator,
    convergence_study,
    propagate,
    reference_propagator,
    step,
)
from .properties import (
    check_axioms,
    check_duality,
    check_rescaling,
    continuity_modulus,
    modulus_tables,
    vprime_extension_bound,
)
