"""curvq: operator-ordering quantization on Riemannian configuration spaces.

A numerical laboratory for canonical quantization of geodesic motion:
symbolic metric definitions with exact derivative jets, differential
geometry (curvature, geodesics, normal coordinates, Van Vleck factors),
ordering-dependent quantum potentials and curvature coefficients, kernel
quantization on periodic grids, Hamiltonian discretization and unitary
evolution, and WKB plus time-sliced propagators.
"""

from .expressions import ParseError, expr_to_string, parse_expression
from .geodesics import (
    ChartError,
    GeodesicError,
    NormalChart,
    exponential_map,
    geodesic_distance,
    normal_coordinates,
    van_vleck,
)
from .geometry import (
    ChristoffelData,
    CurvatureData,
    MetricEvaluationError,
    MetricValue,
    christoffel,
    curvature,
    laplace_beltrami_apply,
    metric_at,
)
from .grid_ops import (
    Grid,
    GridError,
    GridOperator,
    build_grid,
    eigen_spectrum,
    evolve,
    hamiltonian_matrix,
)
from .jets import EvaluationError, Jet, eval_jet
from .metrics import (
    CoordinateRange,
    MetricConfigError,
    MetricSpec,
    load_metric,
    parse_metric_config,
    resolve_preset,
)
from .ordering import (
    NEW,
    RIVIER,
    WEYL,
    CoefficientResult,
    OrderingRule,
    QuantumPotentialBreakdown,
    curvature_coefficient,
    hamiltonian_symbolic,
    momentum_operator_apply,
    parse_rule,
    quantum_potential,
)
from .propagator import (
    PropagatorKernel,
    compose_propagator,
    midpoint_eval,
    short_time_kernel,
    wkb_apply,
    wkb_propagator,
)
from .quantize import (
    PhaseSpaceSymbol,
    SymbolTerm,
    kinetic_symbol,
    momentum_matrix,
    momentum_symbol,
    position_symbol,
    quantize_symbol,
)

__version__ = "0.1.0"
