"""One-phase melting with a power-law memory flux.

A conservative enthalpy solver for the moving-boundary heat problem whose
diffusive flux carries a fractional time memory, together with the discrete
fractional-calculus operators it is built on and an audit suite that checks
the identities, limits, and regularity monitors the model is expected to
satisfy.
"""

from .domain import (
    EnthalpyField,
    FluxField,
    InterfacePath,
    ModelParams,
    TemperatureField,
    enthalpy_from_temperature,
    interface_inverse,
    temperature_from_enthalpy,
)
from .fracops import (
    KernelWeights,
    SampledHistory,
    TimeGrid,
    caputo_l1,
    delayed_caputo,
    delayed_rl,
    frac_integral,
    gamma_fn,
    rl_derivative,
)
from .solver import (
    ClosureError,
    NeumannReference,
    SolutionRecord,
    SolverState,
    assemble_flux,
    neumann_reference,
    run,
    step,
)

__all__ = [
    "ClosureError",
    "EnthalpyField",
    "FluxField",
    "InterfacePath",
    "KernelWeights",
    "ModelParams",
    "NeumannReference",
    "SampledHistory",
    "SolutionRecord",
    "SolverState",
    "TemperatureField",
    "TimeGrid",
    "assemble_flux",
    "caputo_l1",
    "delayed_caputo",
    "delayed_rl",
    "enthalpy_from_temperature",
    "frac_integral",
    "gamma_fn",
    "interface_inverse",
    "neumann_reference",
    "rl_derivative",
    "run",
    "step",
    "temperature_from_enthalpy",
]

__version__ = "0.1.0"
