"""Conservative enthalpy march for one-phase melting with memory flux.

Each face carries the history of the discrete temperature gradient across it.
The flux of step ``n`` is the backward difference of the exact power-law
integral of that piecewise-linear trace,

    qbar_n = -[I(t_n) - I(t_{n-1})] / dt_n,

so the cumulative flux through any face equals the fractional integral of its
gradient trace to machine precision and the integrated balance over any cell
window holds by construction.  The current-step gradient enters implicitly
through the weight of the newest interval; everything older is an explicit
history sum.

Faces to the right of the initial front carry delayed traces: their history
starts at the moment the front swept past them (found by inverting the
recorded path), begins at value zero, and the leading partial interval is
integrated exactly from that origin time rather than snapped to a node.

The nonlinear enthalpy/temperature closure per step is resolved by a
lagged-front sweep: the set of active faces is frozen at the previous front
position, and the liquid-cell pattern is iterated around an exact banded
solve until the update stalls below tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import erf

from .domain import (
    InterfacePath,
    ModelParams,
    interface_inverse,
    temperature_from_enthalpy,
)
from .fracops import TimeGrid, _interval_moments, frac_integral_from_time, gamma_fn

__all__ = [
    "ClosureError",
    "NeumannReference",
    "SolutionRecord",
    "SolverState",
    "assemble_flux",
    "neumann_reference",
    "run",
    "step",
    "gradient_trace",
]

CLOSURE_TOL = 1e-12
MAX_CLOSURE_ITER = 200


class ClosureError(RuntimeError):
    """The enthalpy/temperature closure failed to settle within the sweep cap."""

    def __init__(self, step_index: int, residual: float):
        super().__init__(
            f"closure sweep did not converge at step {step_index} (residual {residual:.3e})"
        )
        self.step_index = step_index
        self.residual = residual


# ---------------------------------------------------------------------------
# classical similarity reference (the beta -> 1 oracle)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NeumannReference:
    """Classical similarity solution for melting with a hot wall.

    The front follows ``s(t) = 2 lam sqrt(t)`` where ``lam`` solves
    ``sqrt(pi) lam exp(lam^2) erf(lam) = St``; the liquid profile is
    ``T = St (1 - erf(x / (2 sqrt(t))) / erf(lam))``.
    """

    stefan_number: float
    lam: float

    def residual(self) -> float:
        lam = self.lam
        return float(
            math.sqrt(math.pi) * lam * math.exp(lam * lam) * erf(lam) - self.stefan_number
        )

    def front(self, t):
        return 2.0 * self.lam * np.sqrt(np.asarray(t, dtype=float))

    def temperature(self, x, t: float):
        x = np.asarray(x, dtype=float)
        prof = self.stefan_number * (
            1.0 - erf(x / (2.0 * math.sqrt(t))) / erf(self.lam)
        )
        return np.where(x < self.front(t), prof, 0.0)


def neumann_reference(stefan_number: float) -> NeumannReference:
    """Solve the transcendental front-speed equation by bisection."""
    if stefan_number <= 0.0:
        raise ValueError("the Stefan number must be positive")

    def f(lam: float) -> float:
        return math.sqrt(math.pi) * lam * math.exp(lam * lam) * erf(lam) - stefan_number

    lo, hi = 0.0, 1.0
    while f(hi) < 0.0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    ref = NeumannReference(stefan_number, 0.5 * (lo + hi))
    assert abs(ref.residual()) <= 1e-12
    return ref


# ---------------------------------------------------------------------------
# state and record
# ---------------------------------------------------------------------------


@dataclass
class SolutionRecord:
    """Immutable-by-convention result of a run: full field history, face flux
    history, front path, and per-step balance residuals."""

    params: ModelParams
    grid: TimeGrid
    x_centers: np.ndarray
    x_faces: np.ndarray
    dx: float
    T: np.ndarray
    E: np.ndarray
    qbar: np.ndarray
    path: InterfacePath
    balance_rel: np.ndarray
    closure_iters: np.ndarray
    halted: bool = False
    case: object | None = None

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    def subsample(self, stride: int) -> "SolutionRecord":
        """Field history restricted to every ``stride``-th step (first and
        last always kept).  The front path keeps full resolution."""
        if stride < 1:
            raise ValueError("stride must be >= 1")
        idx = snapshot_indices(self.n_steps, stride)
        times = self.grid.nodes[idx]
        grid = TimeGrid(times, self.grid.grading, self.grid.exponent)
        return SolutionRecord(
            params=self.params,
            grid=grid,
            x_centers=self.x_centers,
            x_faces=self.x_faces,
            dx=self.dx,
            T=self.T[idx],
            E=self.E[idx],
            qbar=self.qbar[idx],
            path=self.path,
            balance_rel=self.balance_rel,
            closure_iters=self.closure_iters,
            halted=self.halted,
            case=self.case,
        )


def snapshot_indices(n_steps: int, stride: int) -> np.ndarray:
    idx = list(range(0, n_steps + 1, stride))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return np.asarray(idx, dtype=int)


def gradient_trace(record, face: int, upto: int) -> tuple[np.ndarray, float, int]:
    """Gradient-trace samples at one face, with the trace's origin.

    Returns ``(values, t0, m)``: samples ``values[k]`` at the record's field
    times for ``k = 0..upto`` (zero before the front reached the face), the
    real origin time ``t0``, and the index ``m`` of the first live sample.
    Face 0 carries the wall trace: for a Dirichlet wall the half-cell
    gradient against the boundary data, for a Neumann wall the data itself.
    Faces the front never reached return an all-zero trace with
    ``m > upto``.
    """
    nodes = record.grid.nodes
    params = record.params
    dx = record.dx
    values = np.zeros(upto + 1)
    if face == 0:
        if params.bc_kind == "neumann":
            values[:] = [params.wall_value(t) for t in nodes[: upto + 1]]
        else:
            wall0 = float(params.initial_profile(np.array([0.0]))[0])
            values[0] = (record.T[0, 0] - wall0) * 2.0 / dx
            for k in range(1, upto + 1):
                values[k] = (record.T[k, 0] - params.wall_value(nodes[k])) * 2.0 / dx
        return values, 0.0, 0
    x_f = record.x_faces[face]
    s0 = record.path.positions[0]
    if x_f <= s0 + 1e-12 * params.length:
        t0, m = 0.0, 0
    elif x_f <= record.path.at(nodes[upto]):
        t0 = interface_inverse(record.path, x_f)
        m = int(np.searchsorted(nodes[: upto + 1], t0, side="left"))
    else:
        return values, math.inf, upto + 1
    if face < record.T.shape[1]:
        values[m:] = (record.T[m : upto + 1, face] - record.T[m : upto + 1, face - 1]) / dx
    return values, t0, m


class SolverState:
    """Mutable state advanced by :func:`step`; one logical writer.

    Field histories, the face gradient traces, and the path are preallocated
    for the full horizon and filled in place as the index advances.
    """

    def __init__(self, params: ModelParams, claw_forcing: Callable | None = None):
        self.params = params
        self.grid = params.time_grid()
        self.nodes = self.grid.nodes
        self.dx = params.dx
        self.x_centers = params.x_centers()
        self.x_faces = params.x_faces()
        self.claw_forcing = claw_forcing
        nx, nt = params.nx, params.nt
        nf = nx + 1

        self.T = np.zeros((nt + 1, nx))
        self.E = np.zeros((nt + 1, nx))
        self.G = np.zeros((nt + 1, nf))
        self.qbar = np.zeros((nt + 1, nf))
        self.s = np.zeros(nt + 1)
        self.fractions = np.zeros(nt + 1)
        self.balance_rel = np.zeros(nt + 1)
        self.closure_iters = np.zeros(nt + 1, dtype=int)

        # per-face trace bookkeeping: first live sample index and real origin
        self.face_m = np.full(nf, -1, dtype=int)
        self.face_u0 = np.full(nf, np.nan)
        self.halted = False

        # initial fields: liquid cells carry T0 + 1, the front cell its fraction
        t0_prof = params.initial_profile(self.x_centers)
        front_cell = min(int(np.floor(params.x0 / self.dx + 1e-12)), nx - 1)
        fraction = min(max(params.x0 / self.dx - front_cell, 0.0), 1.0)
        self.T[0, :front_cell] = t0_prof[:front_cell]
        self.E[0, :front_cell] = t0_prof[:front_cell] + 1.0
        if front_cell < nx:
            self.E[0, front_cell] = fraction
        _, front = temperature_from_enthalpy(self.E[0])
        self.front_cell = front.cell
        self.nliq = front.cell
        self.s[0] = front.position_cells * self.dx
        self.fractions[0] = front.fraction

        # faces inside the initial liquid (and the wall) integrate from t = 0
        initially_wet = self.x_faces <= self.s[0] + 1e-12 * params.length
        initially_wet[0] = True
        initially_wet[nx] = False
        self.face_m[initially_wet] = 0
        self.face_u0[initially_wet] = 0.0
        self._record_gradients(0)
        self.n = 0

    # -- trace upkeep ------------------------------------------------------

    def _wall_trace_value(self, k: int) -> float:
        p = self.params
        if p.bc_kind == "neumann":
            return p.wall_value(self.nodes[k])
        if k == 0:
            wall0 = float(p.initial_profile(np.array([0.0]))[0])
            return (self.T[0, 0] - wall0) * 2.0 / self.dx
        return (self.T[k, 0] - p.wall_value(self.nodes[k])) * 2.0 / self.dx

    def _record_gradients(self, k: int) -> None:
        live = (self.face_m >= 0) & (self.face_m <= k)
        interior = live.copy()
        interior[0] = False
        interior[self.params.nx] = False
        f = np.flatnonzero(interior)
        self.G[k, f] = (self.T[k, f] - self.T[k, f - 1]) / self.dx
        if live[0]:
            self.G[k, 0] = self._wall_trace_value(k)

    def path_so_far(self) -> InterfacePath:
        return InterfacePath(self.nodes[: self.n + 1], self.s[: self.n + 1])

    def record(self) -> SolutionRecord:
        n = self.n
        grid = TimeGrid(self.nodes[: n + 1], self.grid.grading, self.grid.exponent)
        return SolutionRecord(
            params=self.params,
            grid=grid,
            x_centers=self.x_centers,
            x_faces=self.x_faces,
            dx=self.dx,
            T=self.T[: n + 1].copy(),
            E=self.E[: n + 1].copy(),
            qbar=self.qbar[: n + 1].copy(),
            path=InterfacePath(
                self.nodes[: n + 1], self.s[: n + 1], self.fractions[: n + 1]
            ),
            balance_rel=self.balance_rel[: n + 1].copy(),
            closure_iters=self.closure_iters[: n + 1].copy(),
            halted=self.halted,
        )


# ---------------------------------------------------------------------------
# flux assembly
# ---------------------------------------------------------------------------


def _kernel_mass(t: float, u: np.ndarray, v: np.ndarray, beta: float) -> np.ndarray:
    """Integral of the kernel (t - tau)**(beta-1) over intervals [u, v]."""
    m0, _ = _interval_moments(t, u, v, beta)
    return m0


def _step_weights(nodes: np.ndarray, beta: float, n: int):
    """Explicit-history weights and the implicit current-step coefficient for
    the per-step flux difference at step ``n``.

    The flux trace is reconstructed piecewise-constant and right-continuous
    (interval ``(t_k, t_{k+1}]`` carries the sample at ``t_{k+1}``), so the
    newest sample is fully implicit: the scheme degenerates to backward Euler
    as the memory order approaches one and stays monotone when the front
    uncovers a steep gradient.  Returns ``(w_hist, c_imp)`` with the explicit
    history sum of a trace ``g`` given by ``w_hist @ g[1:n]`` and the implicit
    part ``c_imp * g[n]`` (all divided by the step and the gamma factor, so
    the flux is minus their sum).
    """
    t_n, t_p = nodes[n], nodes[n - 1]
    dt_n = t_n - t_p
    u = nodes[:n]
    v = nodes[1 : n + 1]
    mass_n = _kernel_mass(t_n, u, v, beta)
    w_hist = mass_n[: n - 1].copy()
    if n > 1:
        w_hist -= _kernel_mass(t_p, u[: n - 1], v[: n - 1], beta)
    scale = gamma_fn(beta) * dt_n
    return w_hist / scale, float(mass_n[n - 1]) / scale


def _delayed_corrections(state: SolverState, n: int) -> np.ndarray:
    """Per-face additive corrections to the explicit history sum that replace
    the nodal interval preceding each delayed face's origin with the exact
    partial interval from the true origin time.

    At a face's first active step the correction also charges the integral
    accumulated up to its first sample, so cumulative fluxes telescope to the
    exact fractional integral of the trace.
    """
    nodes = state.nodes
    beta = state.params.beta
    t_n, t_p = nodes[n], nodes[n - 1]
    dt_n = t_n - t_p
    out = np.zeros(state.x_faces.size)
    delayed = np.flatnonzero((state.face_m >= 1) & (state.face_m <= n - 1))
    if delayed.size == 0:
        return out
    m = state.face_m[delayed]
    u0 = state.face_u0[delayed]
    t_m = nodes[m]
    width = t_m - u0
    g_m = state.G[m, delayed]

    def spurious_at(t_eval: float, sel: np.ndarray) -> np.ndarray:
        # nodal interval [t_{m-1}, t_m] the vectorized pass counted on the
        # right-endpoint sample, which the delayed trace does not own
        return _kernel_mass(t_eval, nodes[m[sel] - 1], t_m[sel], beta)

    def partial_at(t_eval: float, sel: np.ndarray) -> np.ndarray:
        vals = np.zeros(int(np.count_nonzero(sel)))
        hw = width[sel] > 0.0
        if np.any(hw):
            vals[hw] = _kernel_mass(t_eval, u0[sel][hw], t_m[sel][hw], beta)
        return vals

    everything = np.ones(delayed.size, dtype=bool)
    corr_now = (partial_at(t_n, everything) - spurious_at(t_n, everything)) * g_m

    corr_prev = np.zeros(delayed.size)
    first_step = m == n - 1
    older = ~first_step
    if np.any(older):
        corr_prev[older] = (partial_at(t_p, older) - spurious_at(t_p, older)) * g_m[older]
    if np.any(first_step):
        # before activation the face contributed nothing, so its accounting
        # starts from zero: cancel the nodal pass's value at its first sample,
        # which sits at t_m = t_{n-1} for these faces
        corr_prev[first_step] = -spurious_at(t_p, first_step) * g_m[first_step]
    out[delayed] = (corr_now - corr_prev) / (gamma_fn(beta) * dt_n)
    return out


def _flux_parts(state: SolverState, n: int) -> tuple[float, np.ndarray]:
    """Implicit current-step weight and explicit per-face history sums for the
    flux of step ``n`` (the flux is ``-(c_imp * g_n + history)`` at active
    faces and zero elsewhere)."""
    w_left, w_right, c_imp = _step_weights(state.nodes, state.params.beta, n)
    history = w_left @ state.G[:n]
    if n > 1:
        history = history + w_right @ state.G[1:n]
    history = history + _delayed_corrections(state, n)
    return c_imp, history


def _active_faces(state: SolverState, n: int) -> np.ndarray:
    return (state.face_m >= 0) & (state.face_m <= n - 1)


def step(state: SolverState) -> SolverState:
    """Advance the state by one step (single writer; returns its argument).

    The enthalpy update is conservative: every interior face flux is shared
    by its two cells, the wall flux enters cell 0, and the far wall carries
    none.  The current-step gradient is implicit; the closure
    ``T = max(E - 1, 0)`` is resolved by iterating the liquid-cell pattern
    around an exact tridiagonal solve with the active-face set lagged at the
    previous front position.
    """
    if state.halted:
        raise RuntimeError("cannot step a halted state")
    p = state.params
    n = state.n + 1
    if n > p.nt:
        raise RuntimeError("horizon already reached")
    nx, dx = p.nx, state.dx
    nodes = state.nodes
    dt = nodes[n] - nodes[n - 1]

    c_imp, history = _flux_parts(state, n)
    active = _active_faces(state, n)

    # face coefficients of the implicit gradient; the Dirichlet wall uses the
    # half-cell gradient against the boundary value
    cface = np.where(active, c_imp, 0.0)
    known_flux0 = None
    if p.bc_kind == "neumann":
        cface[0] = 0.0
        known_flux0 = -(c_imp * p.wall_value(nodes[n]) + history[0])
    else:
        cface[0] = 2.0 * c_imp if active[0] else 0.0
    cface[nx] = 0.0

    # inactive faces carry no flux at all; zero their history contribution
    h_eff = np.where(active, history, 0.0)
    b = state.E[n - 1] + (dt / dx) * (h_eff[1:] - h_eff[:-1])
    if known_flux0 is not None:
        b[0] = state.E[n - 1, 0] + (dt / dx) * h_eff[1] + (dt / dx) * known_flux0
    elif active[0]:
        b[0] += (dt / dx) * (2.0 * c_imp / dx) * p.wall_value(nodes[n])
    if state.claw_forcing is not None:
        b = b + dt * np.asarray(state.claw_forcing(state.x_centers, nodes[n]), dtype=float)

    r = dt / (dx * dx)
    diag = r * (cface[:-1] + cface[1:])
    lower = -r * cface[1:-1]  # coupling of cell i to T_{i-1} via face i
    upper = -r * cface[1:-1]  # coupling of cell i to T_{i+1} via face i+1

    def apply_a(temp: np.ndarray) -> np.ndarray:
        out = diag * temp
        out[1:] += lower * temp[:-1]
        out[:-1] += upper * temp[1:]
        return out

    nliq = state.nliq
    T = np.zeros(nx)
    E = b.copy()
    prev_E = None
    converged = False
    iters = 0
    for iters in range(1, MAX_CLOSURE_ITER + 1):
        T = np.zeros(nx)
        if nliq > 0:
            ab = np.zeros((3, nliq))
            ab[1, :] = 1.0 + diag[:nliq]
            if nliq > 1:
                ab[0, 1:] = upper[: nliq - 1]
                ab[2, :-1] = lower[: nliq - 1]
            T[:nliq] = solve_banded((1, 1), ab, b[:nliq] - 1.0)
        E = b - apply_a(T)
        if p.pinned_front:
            new_nliq = nliq
        else:
            new_nliq = nliq
            if np.any(T[:nliq] <= 0.0):
                new_nliq = int(np.argmax(T[:nliq] <= 0.0))
            elif nliq < nx and E[nliq] > 1.0:
                new_nliq = nliq + 1
        settled = prev_E is not None and float(np.max(np.abs(E - prev_E))) <= CLOSURE_TOL
        if new_nliq == nliq and settled:
            converged = True
            break
        prev_E = E
        nliq = new_nliq
    if not converged:
        resid = float(np.max(np.abs(E - prev_E))) if prev_E is not None else math.inf
        raise ClosureError(n, resid)

    # commit: enthalpy is the conserved quantity; temperature and the front
    # are re-derived from it so the closure round trip is exact
    E = np.where((E < 0.0) & (E > -1e-13), 0.0, E)
    state.E[n] = E
    if p.pinned_front:
        # latent-heat-to-infinity surrogate: the front cell absorbs enthalpy
        # without converting, the phase layout never changes
        T_commit = np.zeros(nx)
        T_commit[:nliq] = np.maximum(E[:nliq] - 1.0, 0.0)
        state.T[n] = T_commit
        s_n = state.s[n - 1]
        state.fractions[n] = state.fractions[n - 1]
    else:
        T_commit, front = temperature_from_enthalpy(E)
        state.T[n] = T_commit
        state.nliq = front.cell
        state.front_cell = front.cell
        s_n = front.position_cells * dx
        if s_n < state.s[n - 1]:
            if state.s[n - 1] - s_n > 1e-12 * p.length:
                raise RuntimeError(f"front receded at step {n}: {s_n} < {state.s[n - 1]}")
            s_n = state.s[n - 1]
        state.fractions[n] = front.fraction
    state.s[n] = s_n
    state.closure_iters[n] = iters
    state.n = n

    # newly swept faces pick up their origin from the recorded path
    newly = np.flatnonzero(
        (state.face_m < 0) & (state.x_faces <= s_n) & (np.arange(nx + 1) < nx)
    )
    if newly.size:
        path = state.path_so_far()
        for f in newly:
            state.face_m[f] = n
            state.face_u0[f] = interface_inverse(path, state.x_faces[f])
    state._record_gradients(n)

    # committed face fluxes and the global balance line (the wall trace
    # already holds the half-cell gradient for a Dirichlet boundary)
    g_now = state.G[n]
    q_row = np.where(active, -(c_imp * g_now + history), 0.0)
    if known_flux0 is not None:
        q_row[0] = known_flux0
    state.qbar[n] = q_row

    total_now = float(E.sum()) * dx
    total_prev = float(state.E[n - 1].sum()) * dx
    boundary_work = dt * (q_row[0] - q_row[nx])
    forcing_work = 0.0
    if state.claw_forcing is not None:
        forcing_work = dt * float(
            np.sum(state.claw_forcing(state.x_centers, nodes[n]))
        ) * dx
    resid = abs(total_now - total_prev - boundary_work - forcing_work)
    state.balance_rel[n] = resid / max(1.0, abs(total_now))

    if state.front_cell >= nx - 1:
        state.halted = True
    return state


def assemble_flux(state: SolverState, n: int) -> np.ndarray:
    """Face fluxes of a completed step (zero at faces the front has not
    activated).  Step ``n``'s flux is the average memory flux over
    ``(t_{n-1}, t_n]``; within the march its current-step part is implicit in
    the step-``n`` gradient."""
    if n == 0:
        return np.zeros(state.x_faces.size)
    if n > state.n:
        raise ValueError(f"step {n} has not been computed yet (at {state.n})")
    return state.qbar[n].copy()


def run(
    params: ModelParams,
    claw_forcing: Callable | None = None,
    case: object | None = None,
) -> SolutionRecord:
    """March to the horizon (or until the front nears the far wall) and
    return the full record.  Identical inputs produce bit-identical records."""
    state = SolverState(params, claw_forcing=claw_forcing)
    while state.n < params.nt and not state.halted:
        step(state)
    record = state.record()
    record.case = case
    return record
