"""Time stepper for the transformed shear equation on the (xi, eta) strip.

The normalized shear w(tau, xi, eta) obeys

    dw/dtau + eta U_e dw/dxi + A dw/deta + B w = w^2 d2w/deta2

with the degenerate diffusion coefficient w^2, a Dirichlet zero at eta = 1,
and the nonlinear wall condition w dw/deta = (dP/dx)/U_e at eta = 0.

The march works in the conservative variable v = w^2, for which the same
equation reads (exact identity)

    dv/dtau + eta U_e dv/dxi + (A + dv/deta / 2) dv/deta + 2 B v
        = v d2v/deta2,

because a retarded wall develops the flux layer w ~ sqrt(w0^2 + 2 g eta):
a square-root cusp in w that defeats polynomial stencils, but exactly
linear in v.  In v the wall condition is a plain Neumann row,
v(deta) - v(0) = 2 deta g, whose ghost elimination is the conservative
closure d(w^2)/deta = 2 g; the wall value w(0) = sqrt(v(0)) exists while
the radicand v(0) stays positive, and its sign change is the back-flow
signal.  Scheme: diffusion implicit with the coefficient v frozen at the
previous level (one tridiagonal solve per xi column), both advection terms
upwinded explicit (the quadratic part by Picard-freezing its effective
speed), reaction explicit.

This is the second, independent route to the wall shear; it shares nothing
with the physical-variable solver beyond the tridiagonal kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crocco import CroccoGrid, ShearField, coefficients
from .errors import ConfigError, DataError, InstabilityError
from .outer_flow import OuterFlowModel
from .records import BackFlowEvent, DiagnosticSeries, RunResult, StepReport, bisect_crossing
from .tridiag import solve_batch

# Interior v below this floor counts as an undershoot (w below -1e-10) and
# clears the monotone flag; milder negatives are clamped silently.
UNDERSHOOT_FLOOR_V = -1e-20


@dataclass
class CroccoRunState:
    """One time level of the transformed problem plus its fixed ingredients.

    ``w1(tau, eta)`` is the inflow shear profile; None leaves the first
    column uncoupled (x-independent scenarios).
    """

    field: ShearField
    grid: CroccoGrid
    model: OuterFlowModel
    dt: float
    w1: object = None

    @property
    def t(self) -> float:
        return self.field.tau

    def copy(self) -> "CroccoRunState":
        return CroccoRunState(self.field.copy(), self.grid, self.model, self.dt, self.w1)


def init_crocco(w0, grid: CroccoGrid, model: OuterFlowModel, dt: float,
                w1=None) -> CroccoRunState:
    """Sample and validate initial shear data w0(xi, eta).

    w0 must be positive below eta = 1 and vanish on the eta = 1 row.
    """
    xi = grid.xi
    eta = grid.eta
    w = np.asarray(w0(xi[:, None], eta[None, :]), dtype=float)
    if w.shape != (grid.n_xi, grid.n_eta):
        raise ConfigError("w0 must evaluate on the (xi, eta) tensor grid")
    if np.any(np.abs(w[:, -1]) > 1e-12 * max(1.0, float(np.max(np.abs(w))))):
        i = int(np.argmax(np.abs(w[:, -1])))
        raise DataError(f"w0 must vanish at eta = 1; w0({xi[i]:g}, 1) = {w[i, -1]:g}")
    interior = w[:, :-1]
    if np.any(interior <= 0.0):
        i, j = np.unravel_index(int(np.argmin(interior)), interior.shape)
        raise DataError(
            f"w0 must be positive below eta = 1; worst sample "
            f"w0({xi[i]:g}, {eta[j]:g}) = {interior[i, j]:g}"
        )
    w[:, -1] = 0.0
    state = CroccoRunState(ShearField(0.0, w, grid), grid, model, dt, w1)
    check_cfl(state)
    return state


def check_cfl(state: CroccoRunState):
    """Advective step-size limits at the initial state.

    The eta bound only counts cells where advection actually dominates the
    (implicit, unconditionally stable) diffusion, i.e. cell Peclet > 2; on
    wall-clustered grids the tiny near-wall cells are diffusion-dominated
    and must not drive the bound.
    """
    grid, model = state.grid, state.model
    ue_max = float(np.max(model.ue(0.0, grid.xi)))
    bound_xi = 0.5 * grid.dxi / ue_max
    eta = grid.eta
    h = np.diff(eta)
    a, _ = coefficients(model, 0.0, grid.xi[:, None], eta[None, 1:])
    a = np.abs(a)
    v = np.maximum(state.field.values[:, 1:] ** 2, 1e-300)
    peclet = a * h[None, :] / v
    active = peclet > 2.0
    with np.errstate(divide="ignore"):
        local = np.where(active & (a > 0.0), h[None, :] / np.where(a > 0.0, a, 1.0), np.inf)
    bound_eta = 0.5 * float(np.min(local))
    bound = min(bound_xi, bound_eta)
    if state.dt > bound * (1.0 + 1e-12):
        raise ConfigError(
            f"dt = {state.dt:g} violates the advective limits "
            f"(xi: {bound_xi:g}, eta: {bound_eta:g})"
        )


def wall_closure(column, grad_p_over_ue: float, deta: float):
    """Close the wall value from the first interior node.

    One-sided discretization of d(w^2)/deta = 2 (dP/dx)/U_e gives

        w(0)^2 = w(deta)^2 - 2 deta (dP/dx)/U_e.

    Returns (value, signaled): a nonpositive radicand yields value 0 with the
    back-flow signal raised — a normal outcome, not an error.
    """
    w1 = float(np.asarray(column)[1])
    radicand = w1 * w1 - 2.0 * deta * grad_p_over_ue
    if radicand <= 0.0:
        return 0.0, True
    return float(np.sqrt(radicand)), False


def _wall_radicand(w: np.ndarray, g: np.ndarray, deta: float) -> np.ndarray:
    return w[:, 1] ** 2 - 2.0 * deta * g


def step_crocco(state: CroccoRunState) -> tuple[CroccoRunState, StepReport]:
    """Advance one step of size state.dt (see module docstring for the scheme)."""
    if state.dt == 0.0:
        new = state.copy()
        shear = wall_shear_crocco(new)
        return new, StepReport(new.t, 0.0, float(np.min(shear)), bool(np.min(shear) > 0.0))
    return _step_dt(state, state.dt)


def _step_dt(state: CroccoRunState, dt: float) -> tuple[CroccoRunState, StepReport]:
    grid, model = state.grid, state.model
    t = state.field.tau
    t_new = t + dt
    xi = grid.xi
    eta = grid.eta
    w = state.field.values
    v = w**2
    h = np.diff(eta)
    hm, hp = h[:-1], h[1:]

    a, b = coefficients(model, t, xi[:, None], eta[None, :])
    ue = np.asarray(model.ue(t, xi), dtype=float)

    adv_xi = np.zeros_like(v)
    adv_xi[1:] = (eta[None, :] * ue[1:, None]) * (v[1:] - v[:-1]) / grid.dxi

    # Effective eta speed A + (dv/deta)/2, Picard-frozen, upwinded per node.
    dv_c = (hm**2 * v[:, 2:] - hp**2 * v[:, :-2]
            + (hp**2 - hm**2) * v[:, 1:-1]) / (hm * hp * (hm + hp))
    q = a[:, 1:-1] + 0.5 * dv_c
    back = (v[:, 1:-1] - v[:, :-2]) / hm
    fwd = (v[:, 2:] - v[:, 1:-1]) / hp
    adv_eta = np.where(q >= 0.0, q * back, q * fwd)

    rhs = v[:, 1:-1] - dt * (adv_xi[:, 1:-1] + adv_eta + 2.0 * b[:, 1:-1] * v[:, 1:-1])

    # Implicit degenerate diffusion v * d2v/deta2, coefficient frozen; the
    # wall row is eliminated through the Neumann ghost v0 = v1 - 2 deta g.
    cl = 2.0 / ((hm + hp) * hm)
    cu = 2.0 / ((hm + hp) * hp)
    v_in = v[:, 1:-1]
    lower = -dt * v_in * cl
    upper = -dt * v_in * cu
    diag = 1.0 + dt * v_in * (cl + cu)
    g_new = np.asarray(model.dpdx(t_new, xi) / model.ue(t_new, xi), dtype=float)
    deta0 = eta[1]
    diag[:, 0] = 1.0 + dt * v_in[:, 0] * cu[0]
    rhs[:, 0] -= dt * v_in[:, 0] * cl[0] * 2.0 * deta0 * g_new
    lower[:, 0] = 0.0
    upper[:, -1] = 0.0

    v_new = np.empty_like(v)
    v_new[:, 1:-1] = solve_batch(lower, diag, upper, rhs)
    v_new[:, -1] = 0.0
    v_new[:, 0] = v_new[:, 1] - 2.0 * deta0 * g_new  # the wall radicand

    lo = 0
    if state.w1 is not None:
        w1_col = np.asarray(state.w1(t_new, eta), dtype=float)
        v_new[0, :] = w1_col**2
        v_new[0, -1] = 0.0
        lo = 1

    undershoot = bool(np.min(v_new[lo:, 1:-1]) < UNDERSHOOT_FLOOR_V)
    np.clip(v_new[:, 1:-1], 0.0, None, out=v_new[:, 1:-1])

    w_new = np.sqrt(np.maximum(v_new, 0.0))
    if state.w1 is not None:
        w_new[0, :] = np.abs(w1_col)
        w_new[0, -1] = 0.0

    if not np.all(np.isfinite(w_new)):
        i, j = np.unravel_index(int(np.argmin(np.isfinite(w_new))), w_new.shape)
        raise InstabilityError(f"non-finite w at (xi, eta) = ({xi[i]:g}, {eta[j]:g}), tau = {t_new:g}")

    new_state = CroccoRunState(ShearField(t_new, w_new, grid), grid, model, state.dt, state.w1)
    shear = wall_shear_crocco(new_state)
    report = StepReport(
        t_new=t_new,
        max_residual=float(np.max(np.abs(w_new - w))) / dt,
        min_wall_shear=float(np.min(shear)),
        monotone_flag=bool(np.min(shear) > 0.0) and not undershoot,
    )
    return new_state, report


def wall_shear_crocco(state: CroccoRunState) -> np.ndarray:
    """Physical wall shear carried by the transformed field: U_e * w(., 0)."""
    ue = np.asarray(state.model.ue(state.field.tau, state.grid.xi), dtype=float)
    return ue * state.field.values[:, 0]


def min_radicand(state: CroccoRunState) -> float:
    """Most negative wall-closure radicand over the inflow-free columns."""
    grid, model = state.grid, state.model
    t = state.field.tau
    g = np.asarray(model.dpdx(t, grid.xi) / model.ue(t, grid.xi), dtype=float)
    rad = _wall_radicand(state.field.values, g, grid.deta)
    lo = 1 if state.w1 is not None else 0
    return float(np.min(rad[lo:]))


def pde_residual(old: CroccoRunState, new: CroccoRunState) -> np.ndarray:
    """A-posteriori residual of the shear equation between two levels.

    Time derivative by forward difference, spatial terms at the new level on
    interior nodes; for a consistent step this is O(dt + h^2).
    """
    grid, model = new.grid, new.model
    dt = new.field.tau - old.field.tau
    w_old = old.field.values
    w = new.field.values
    eta = grid.eta
    h = np.diff(eta)
    hm, hp = h[:-1], h[1:]
    a, b = coefficients(model, new.field.tau, grid.xi[:, None], eta[None, :])
    ue = np.asarray(model.ue(new.field.tau, grid.xi), dtype=float)
    dwdt = (w - w_old) / dt
    dwdxi = np.zeros_like(w)
    dwdxi[1:] = (w[1:] - w[:-1]) / grid.dxi
    dwdeta = np.zeros_like(w)
    dwdeta[:, 1:-1] = (hm**2 * w[:, 2:] - hp**2 * w[:, :-2]
                       + (hp**2 - hm**2) * w[:, 1:-1]) / (hm * hp * (hm + hp))
    d2w = np.zeros_like(w)
    d2w[:, 1:-1] = 2.0 * ((w[:, 2:] - w[:, 1:-1]) / hp
                          - (w[:, 1:-1] - w[:, :-2]) / hm) / (hm + hp)
    res = dwdt + (eta[None, :] * ue[:, None]) * dwdxi + a * dwdeta + b * w - w**2 * d2w
    return res[1:-1, 1:-1]


def _sup_w_sq(state: CroccoRunState) -> float:
    return float(np.max(state.field.values ** 2))


def run_crocco(state: CroccoRunState, *, t_end: float, detect_backflow: bool = True,
               n_bisect: int = 20, record_g: bool = True, observer=None) -> RunResult:
    """March to t_end or to the first wall-closure signal.

    The crossing metric is the most negative wall radicand; its sign change
    is refined by re-stepping with halved steps, and the event position is
    the first signaling column at the refined state.  ``observer(state)``
    is called after every recorded step.
    """
    from .diagnostics import lyapunov_functional  # local import, no cycle at module load

    check_cfl(state)
    if t_end > state.model.T * (1.0 + 1e-12):
        raise ConfigError(f"t_end = {t_end:g} exceeds the model horizon T = {state.model.T:g}")
    series = DiagnosticSeries()

    def record(st):
        shear = wall_shear_crocco(st)
        k = int(np.argmin(shear))
        series.append(
            t=st.field.tau,
            min_wall_shear=float(shear[k]),
            argmin_x=float(st.grid.xi[k]),
            g_value=lyapunov_functional(st.field, st.grid.L) if record_g else float("nan"),
            sup_w_sq=_sup_w_sq(st),
            radicand_min=min_radicand(st),
        )
        if observer is not None:
            observer(st)

    record(state)
    event = None
    guard = 1e-12 * max(1.0, abs(t_end))
    while state.field.tau < t_end - guard:
        dt_step = min(state.dt, t_end - state.field.tau)
        new_state, _report = _step_dt(state, dt_step)
        if detect_backflow and min_radicand(new_state) <= 0.0:
            def step_once(st, dt_loc):
                return _step_dt(st, dt_loc)[0]

            event_state, t_star = bisect_crossing(state, dt_step, step_once,
                                                  min_radicand, n_bisect)
            g = np.asarray(state.model.dpdx(event_state.field.tau, state.grid.xi)
                           / state.model.ue(event_state.field.tau, state.grid.xi), dtype=float)
            rad = _wall_radicand(event_state.field.values, g, state.grid.deta)
            lo = 1 if state.w1 is not None else 0
            # Neighbouring columns separate near-simultaneously; take the
            # first signaling column rather than an ulp-level argmin tie.
            signaled = rad[lo:] <= 0.0
            k = lo + (int(np.argmax(signaled)) if np.any(signaled) else int(np.argmin(rad[lo:])))
            ue_k = float(state.model.ue(event_state.field.tau, state.grid.xi[k]))
            w_col = event_state.field.values[k]
            curvature = ue_k * (w_col[1] ** 2 - w_col[0] ** 2) / (2.0 * state.grid.deta)
            event = BackFlowEvent(
                t_star=t_star,
                x_star=float(state.grid.xi[k]),
                wall_curvature=float(curvature),
                source="crocco",
            )
            record(event_state)
            state = event_state
            break
        state = new_state
        record(state)
    return RunResult(series=series, event=event, state=state)
