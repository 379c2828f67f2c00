"""Lane-packed ensemble ODE integration on CPUs.

Solves large numbers of independent low-dimensional non-stiff ODE systems
simultaneously: instances are packed into SIMD-style lanes, several packs
advance together with their Runge-Kutta stages interleaved, and each lane
keeps its own time and step size under embedded error control.  Event
handling (seat impacts with a restitution map, section detection via local
maxima) and per-step observer hooks cover the non-smooth use cases, and a
benchmark CLI reproduces the bundled runtime/work/precision experiments.
"""

from .control import StepControl, Tolerances, adapt_dt, advance_adaptive, advance_fixed, error_norm
from .events import (
    ACTION_APPLY_MAP,
    ACTION_RECORD,
    ACTION_TERMINATE,
    DIRECTION_ANY,
    DIRECTION_NEG_TO_POS,
    DIRECTION_POS_TO_NEG,
    EventSpec,
    ImpactLaw,
    Observer,
    apply_impact,
    detect_crossing,
    refine_bisection,
)
from .lanes import (
    BatchGroup,
    LaneState,
    linspace,
    logspace,
    pack_parameters,
    select,
    STATUS_NAMES,
    STATUS_OK,
)
from .models import (
    KMPhysical,
    SYSTEMS,
    SystemSpec,
    intro_div_rhs,
    intro_rhs,
    intro_sin_rhs,
    km_coefficients,
    km_rhs,
    lorenz_rhs,
    valve_rhs,
)
from .runner import (
    EnsembleResult,
    merge_results,
    run_km_frequency_response,
    run_km_work_precision,
    run_lorenz_benchmark,
    run_micro_benchmark,
    run_valve_bifurcation,
)
from .steppers import StepResult, attempt_step, cash_karp_step, dormand_prince_step, rk4_step
from .tableaus import CASH_KARP, DORMAND_PRINCE, RK4, ButcherTableau, TABLEAUS

__version__ = "0.1.0"
