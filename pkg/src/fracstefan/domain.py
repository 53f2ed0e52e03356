"""Model data: parameters, space-time fields, enthalpy closure, front path.

The melting state is carried by the enthalpy per cell.  Temperature and the
front location are derived quantities: ``T = max(E - 1, 0)``, the front sits
in the single cell with ``E`` strictly between 0 and 1, and its melt fraction
equals that cell's enthalpy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fracops import TimeGrid

__all__ = [
    "ModelParams",
    "InterfacePath",
    "TemperatureField",
    "EnthalpyField",
    "FluxField",
    "FrontState",
    "interface_inverse",
    "enthalpy_from_temperature",
    "temperature_from_enthalpy",
]

_BC_KINDS = ("dirichlet", "neumann")
_T0_KINDS = ("zero", "constant", "linear", "custom")


@dataclass(frozen=True)
class ModelParams:
    """Problem data for one melting run.

    ``bc_value`` is a nonnegative constant wall temperature (Dirichlet) or a
    nonpositive constant wall gradient (Neumann); a callable of time is
    accepted for library use.  ``t0_kind`` describes the initial temperature
    on the liquid part ``(0, x0)``: identically zero, a constant, a linear
    ramp down to zero at ``x0``, or a custom profile callable.  Temperature is
    identically zero right of ``x0`` either way.
    """

    beta: float
    length: float
    x0: float
    t_star: float
    nx: int
    nt: int
    bc_kind: str = "dirichlet"
    bc_value: float | Callable[[float], float] = 0.0
    t0_kind: str = "zero"
    t0_value: float = 0.0
    t0_profile: Callable[[np.ndarray], np.ndarray] | None = None
    time_grading: str = "uniform"
    grading_exponent: float | None = None
    pinned_front: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0,1)")
        if self.length <= 0.0:
            raise ValueError("length must be positive")
        if not 0.0 <= self.x0 < self.length:
            raise ValueError("x0 must lie in [0, length)")
        if self.t_star <= 0.0:
            raise ValueError("t_end must be positive")
        if self.nx < 3:
            raise ValueError("nx must be at least 3")
        if self.nt < 1:
            raise ValueError("nt must be at least 1")
        if self.bc_kind not in _BC_KINDS:
            raise ValueError(f"bc_kind must be one of {_BC_KINDS}")
        if not callable(self.bc_value):
            if self.bc_kind == "dirichlet" and self.bc_value < 0.0:
                raise ValueError("bc_value must be >= 0 for a Dirichlet wall")
            if self.bc_kind == "neumann" and self.bc_value > 0.0:
                raise ValueError("bc_value must be <= 0 for a Neumann wall")
        if self.t0_kind not in _T0_KINDS:
            raise ValueError(f"t0_kind must be one of {_T0_KINDS}")
        if self.t0_value < 0.0:
            raise ValueError("t0_value must be >= 0")
        if self.t0_kind == "custom" and self.t0_profile is None:
            raise ValueError("t0_kind=custom needs a t0_profile callable")
        if self.time_grading not in ("uniform", "graded"):
            raise ValueError("time_grading must be 'uniform' or 'graded'")
        if self.time_grading == "graded":
            r = self.grading_exponent
            if r is not None and r < 1.0:
                raise ValueError("grading exponent must be >= 1")

    @property
    def dx(self) -> float:
        return self.length / self.nx

    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    def x_faces(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.dx

    def time_grid(self) -> TimeGrid:
        if self.time_grading == "graded":
            r = self.grading_exponent if self.grading_exponent is not None else 2.0 / self.beta
            return TimeGrid.graded(self.t_star, self.nt, r)
        return TimeGrid.uniform(self.t_star, self.nt)

    def wall_value(self, t: float) -> float:
        return float(self.bc_value(t)) if callable(self.bc_value) else float(self.bc_value)

    def initial_profile(self, x: np.ndarray) -> np.ndarray:
        """Initial temperature at positions ``x`` (zero right of ``x0``)."""
        x = np.asarray(x, dtype=float)
        if self.t0_kind == "zero":
            out = np.zeros_like(x)
        elif self.t0_kind == "constant":
            out = np.full_like(x, self.t0_value)
        elif self.t0_kind == "linear":
            if self.x0 <= 0.0:
                out = np.zeros_like(x)
            else:
                out = self.t0_value * (1.0 - x / self.x0)
        else:
            out = np.asarray(self.t0_profile(x), dtype=float)
        out = np.where(x < self.x0, out, 0.0)
        if np.any(out < 0.0):
            raise ValueError("initial temperature must be nonnegative on the liquid part")
        return out


@dataclass
class InterfacePath:
    """Monotone front positions sampled on time nodes.

    ``fractions`` optionally stores the melt fraction of the front cell at
    each node (purely diagnostic; positions already encode it).
    """

    times: np.ndarray
    positions: np.ndarray
    fractions: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.times.shape != self.positions.shape:
            raise ValueError("times and positions must align")
        if np.any(np.diff(self.positions) < 0.0):
            raise ValueError("front positions must be nondecreasing")

    def trimmed(self, n: int) -> "InterfacePath":
        return InterfacePath(self.times[: n + 1], self.positions[: n + 1])

    def at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.positions))


def interface_inverse(path: InterfacePath, x: float) -> float:
    """First time the front reaches position ``x``.

    The path is interpolated piecewise-linearly; within the crossing segment
    the inverse is solved in closed form, so the result is a right inverse of
    the interpolated path to well below ``1e-12 * t_star``.  ``x`` must lie in
    ``(s(0), s(t_last)]``.
    """
    s = path.positions
    if not s[0] < x <= s[-1]:
        raise ValueError(f"position {x} outside the swept range ({s[0]}, {s[-1]}]")
    # leftmost segment [k, k+1] with s[k] < x <= s[k+1]: first crossing
    k = int(np.searchsorted(s, x, side="left")) - 1
    t0, t1 = path.times[k], path.times[k + 1]
    s0, s1 = s[k], s[k + 1]
    if s1 == s0:  # plateau exactly at x: first time is the left node
        return float(t0)
    return float(t0 + (x - s0) / (s1 - s0) * (t1 - t0))


@dataclass
class TemperatureField:
    """Cell-centered temperature history ``history[n, i] = T(x_i, t_n)``."""

    x_nodes: np.ndarray
    history: np.ndarray

    def slice_at(self, n: int) -> np.ndarray:
        return self.history[n]


@dataclass
class EnthalpyField:
    """Cell-centered enthalpy history, same layout as the temperature."""

    x_nodes: np.ndarray
    history: np.ndarray

    def slice_at(self, n: int) -> np.ndarray:
        return self.history[n]


@dataclass
class FluxField:
    """Face-centered flux history ``history[n, j]`` at face ``x_faces[j]``."""

    x_faces: np.ndarray
    history: np.ndarray


@dataclass(frozen=True)
class FrontState:
    """Front reconstruction for one time slice: front-cell index, melt
    fraction of that cell, and the front position in units of cells (multiply
    by the cell width for the physical position)."""

    cell: int
    fraction: float
    position_cells: float


def enthalpy_from_temperature(T: np.ndarray, path: InterfacePath, n: int, dx: float) -> np.ndarray:
    """Enthalpy slice for a temperature slice consistent with the front path.

    Liquid cells carry ``T + 1``, solid cells 0, and the front cell its melt
    fraction.  Nonzero temperature in the solid is rejected.
    """
    T = np.asarray(T, dtype=float)
    s = float(path.positions[n])
    cell = min(int(np.floor(s / dx + 1e-12)), T.size - 1)
    fraction = min(max(s / dx - cell, 0.0), 1.0)
    E = np.zeros_like(T)
    E[:cell] = T[:cell] + 1.0
    if np.any(T[cell:] != 0.0):
        raise ValueError("temperature must vanish from the front cell rightward")
    if cell < T.size:
        E[cell] = fraction
    return E


def temperature_from_enthalpy(E: np.ndarray) -> tuple[np.ndarray, FrontState]:
    """Invert the enthalpy closure for one slice.

    Returns ``T = max(E - 1, 0)`` and the front reconstruction.  The slice
    must be nonnegative and laid out liquid | front cell | solid; liquid found
    right of a non-liquid cell is rejected.
    """
    E = np.asarray(E, dtype=float)
    if np.any(E < 0.0):
        raise ValueError("enthalpy must be nonnegative")
    liquid = E >= 1.0
    n_liquid = int(np.argmin(liquid)) if not liquid.all() else E.size
    if np.any(liquid[n_liquid:]):
        raise ValueError("liquid cells appear right of a solid cell (multiple fronts)")
    T = np.maximum(E - 1.0, 0.0)
    if n_liquid == E.size:
        return T, FrontState(E.size - 1, 1.0, E.size * 1.0)
    fraction = float(E[n_liquid])
    if np.any(E[n_liquid + 1 :] != 0.0):
        raise ValueError("cells right of the front cell must have zero enthalpy")
    return T, FrontState(n_liquid, fraction, n_liquid + fraction)


def front_position(E: np.ndarray, dx: float) -> float:
    """Front position implied by an enthalpy slice."""
    _, front = temperature_from_enthalpy(E)
    return front.position_cells * dx
