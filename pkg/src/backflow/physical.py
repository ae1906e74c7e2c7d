"""Time stepper for the boundary-layer momentum equation in (t, x, y).

The tangential momentum balance

    du/dt + u du/dx + v du/dy = d2u/dy2 - dP/dx,   du/dx + dv/dy = 0

is advanced on a truncated strip [0, L] x [0, Y_max] with no-slip at the
wall, the outer trace U_e imposed at the top, prescribed inflow at x = 0,
and v recovered from continuity.  The scheme is first-order semi-implicit:
wall-normal diffusion implicit (one tridiagonal solve per column), both
advection terms upwinded explicit, forcing explicit.  The y grid is
algebraically stretched towards the wall because the payload of every run
is the wall shear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, InstabilityError, TruncationError
from .outer_flow import OuterFlowModel
from .records import BackFlowEvent, DiagnosticSeries, RunResult, StepReport, bisect_crossing
from .tridiag import solve_batch

DEFAULT_FARFIELD_TOL = 5e-3


@dataclass(frozen=True)
class PhysicalGrid:
    """Tensor grid: uniform in x, algebraically stretched in y.

    y_j = y_max * s^2 / (stretch + (1 - stretch) * s) with s uniform on
    [0, 1]; stretch = 1 puts half the nodes below y_max / 4, stretch -> 0
    degenerates to a uniform grid.
    """

    n_x: int
    n_y: int
    L: float
    y_max: float
    dt: float
    stretch: float = 1.0

    def __post_init__(self):
        if self.n_x < 2 or self.n_y < 4:
            raise ConfigError("PhysicalGrid needs n_x >= 2 and n_y >= 4")
        if not (0.0 < self.stretch <= 1.0):
            raise ConfigError("stretch must lie in (0, 1]")
        if self.L <= 0 or self.y_max <= 0 or self.dt < 0:
            raise ConfigError("PhysicalGrid needs L, y_max > 0 and dt >= 0")

    @property
    def dx(self) -> float:
        return self.L / (self.n_x - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n_x)

    @property
    def y(self) -> np.ndarray:
        s = np.linspace(0.0, 1.0, self.n_y)
        return self.y_max * s**2 / (self.stretch + (1.0 - self.stretch) * s)

    def check_cfl(self, model: OuterFlowModel):
        ue_max = float(np.max(model.ue(0.0, self.x)))
        bound = 0.5 * self.dx / ue_max
        if self.dt > bound * (1.0 + 1e-12):
            raise ConfigError(
                f"dt = {self.dt:g} violates the advective limit 0.5*dx/max(U_e) = {bound:g}"
            )


@dataclass
class VelocityField:
    """Discrete (u, v) at one time level; u[i, j] = u(t, x_i, y_j)."""

    t: float
    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "VelocityField":
        return VelocityField(self.t, self.u.copy(), self.v.copy())


def compute_v(u: np.ndarray, grid: PhysicalGrid) -> np.ndarray:
    """Normal velocity from continuity: v = -int_0^y du/dx dy'."""
    dx = grid.dx
    dudx = np.empty_like(u)
    dudx[1:-1] = (u[2:] - u[:-2]) / (2.0 * dx)
    dudx[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx)
    dudx[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dx)
    h = np.diff(grid.y)
    v = np.zeros_like(u)
    v[:, 1:] = -np.cumsum(0.5 * h * (dudx[:, 1:] + dudx[:, :-1]), axis=1)
    return v


def wall_shear(state: VelocityField, grid: PhysicalGrid) -> np.ndarray:
    """Discrete du/dy at the wall, one x value per column.

    Second-order one-sided stencil on the stretched grid; exact for profiles
    quadratic in y, which is what the near-wall momentum balance produces.
    """
    y = grid.y
    y1, y2 = y[1], y[2]
    u0, u1, u2 = state.u[:, 0], state.u[:, 1], state.u[:, 2]
    return (u1 * y2**2 - u2 * y1**2 - u0 * (y2**2 - y1**2)) / (y1 * y2 * (y2 - y1))


def wall_curvature(state: VelocityField, grid: PhysicalGrid) -> np.ndarray:
    """Discrete d2u/dy2 at the wall (same stencil family as wall_shear)."""
    y = grid.y
    y1, y2 = y[1], y[2]
    u0, u1, u2 = state.u[:, 0], state.u[:, 1], state.u[:, 2]
    return 2.0 * (u2 * y1 - u1 * y2 + u0 * (y2 - y1)) / (y1 * y2 * (y2 - y1))


def shear_profile(state: VelocityField, grid: PhysicalGrid) -> np.ndarray:
    """du/dy at every node (second order on the nonuniform grid)."""
    u = state.u
    y = grid.y
    s = np.empty_like(u)
    hm = np.diff(y)[:-1]
    hp = np.diff(y)[1:]
    s[:, 1:-1] = (hm**2 * u[:, 2:] - hp**2 * u[:, :-2]
                  + (hp**2 - hm**2) * u[:, 1:-1]) / (hm * hp * (hm + hp))
    s[:, 0] = wall_shear(state, grid)
    d1 = y[-1] - y[-2]
    d2 = y[-1] - y[-3]
    s[:, -1] = (u[:, -1] * (d1 + d2) / (d1 * d2)
                - u[:, -2] * d2 / (d1 * (d2 - d1))
                + u[:, -3] * d1 / (d2 * (d2 - d1)))
    return s


def init(grid: PhysicalGrid, u0, model: OuterFlowModel, *,
         farfield_tol: float = DEFAULT_FARFIELD_TOL) -> VelocityField:
    """Sample and validate initial data, then derive v from continuity.

    ``u0(x, y)`` must vanish at the wall, be positive above it, be
    non-decreasing in y (strictly, up to roundoff saturation of the outer
    plateau), and reach U_e(0, x) at y_max within ``farfield_tol`` relative.
    """
    x = grid.x
    y = grid.y
    u = np.asarray(u0(x[:, None], y[None, :]), dtype=float)
    if u.shape != (grid.n_x, grid.n_y):
        raise ConfigError("u0 must evaluate on the (x, y) tensor grid")
    scale = float(np.max(np.abs(u)))
    if scale == 0.0:
        raise DataError("u0 is identically zero; positive data required")
    if np.any(np.abs(u[:, 0]) > 1e-10 * scale):
        i = int(np.argmax(np.abs(u[:, 0])))
        raise DataError(f"u0 must vanish at the wall; u0({x[i]:g}, 0) = {u[i, 0]:g}")
    interior = u[:, 1:]
    if np.any(interior <= 0.0):
        i, j = np.unravel_index(int(np.argmin(interior)), interior.shape)
        raise DataError(
            f"u0 must be positive above the wall; worst node "
            f"u0({x[i]:g}, {y[j + 1]:g}) = {interior[i, j]:g}"
        )
    du = np.diff(u, axis=1)
    if np.any(du < -1e-12 * scale):
        i, j = np.unravel_index(int(np.argmin(du)), du.shape)
        raise DataError(
            f"u0 must not decrease in y; worst cell at "
            f"(x, y) = ({x[i]:g}, {y[j]:g})"
        )
    ue0 = np.asarray(model.ue(0.0, x), dtype=float)
    mismatch = np.abs(u[:, -1] - ue0) / ue0
    if np.any(mismatch > farfield_tol):
        i = int(np.argmax(mismatch))
        raise TruncationError(
            f"u0(x, y_max) misses U_e by {mismatch[i]:.3g} relative at x = {x[i]:g}; "
            f"raise y_max or farfield_tol"
        )
    u[:, 0] = 0.0
    u[:, -1] = ue0
    return VelocityField(t=0.0, u=u, v=compute_v(u, grid))


def step(state: VelocityField, grid: PhysicalGrid, model: OuterFlowModel,
         u1=None) -> tuple[VelocityField, StepReport]:
    """Advance one time step of size grid.dt.

    Diffusion is implicit; u du/dx uses a backward difference (the layer
    moves downstream), v du/dy upwinds on the sign of v, and the pressure
    forcing is explicit.  When ``u1(t, y)`` is given the inflow column is
    held at it; otherwise the first column evolves with no x coupling.
    """
    dt = grid.dt
    if dt == 0.0:
        return state.copy(), StepReport(state.t, 0.0, float(np.min(wall_shear(state, grid))),
                                        bool(np.min(wall_shear(state, grid)) > 0.0))
    return _step_dt(state, grid, model, u1, dt)


def _step_dt(state, grid, model, u1, dt):
    t = state.t
    t_new = t + dt
    x = grid.x
    y = grid.y
    u = state.u
    v = state.v
    h = np.diff(y)

    dpdx = np.asarray(model.dpdx(t, x), dtype=float)
    ue_new = np.asarray(model.ue(t_new, x), dtype=float)

    adv_x = np.zeros_like(u)
    adv_x[1:] = u[1:] * (u[1:] - u[:-1]) / grid.dx

    back = (u[:, 1:-1] - u[:, :-2]) / h[:-1]
    fwd = (u[:, 2:] - u[:, 1:-1]) / h[1:]
    vin = v[:, 1:-1]
    adv_y = np.where(vin >= 0.0, vin * back, vin * fwd)

    rhs = u[:, 1:-1] - dt * (adv_x[:, 1:-1] + adv_y + dpdx[:, None])

    # Implicit diffusion on the nonuniform grid: rows j = 1 .. n_y-2.
    cl = 2.0 / ((h[:-1] + h[1:]) * h[:-1])
    cu = 2.0 / ((h[:-1] + h[1:]) * h[1:])
    lower = np.broadcast_to(-dt * cl, rhs.shape).copy()
    upper = np.broadcast_to(-dt * cu, rhs.shape).copy()
    diag = np.broadcast_to(1.0 + dt * (cl + cu), rhs.shape).copy()
    # Boundary values move to the right-hand side (wall value is zero).
    rhs[:, -1] -= upper[:, -1] * ue_new
    lower[:, 0] = 0.0
    upper[:, -1] = 0.0

    u_new = np.empty_like(u)
    u_new[:, 1:-1] = solve_batch(lower, diag, upper, rhs)
    u_new[:, 0] = 0.0
    u_new[:, -1] = ue_new
    if u1 is not None:
        u_new[0, :] = u1(t_new, y)
        u_new[0, 0] = 0.0
        u_new[0, -1] = ue_new[0]

    if not np.all(np.isfinite(u_new)):
        i, j = np.unravel_index(int(np.argmin(np.isfinite(u_new))), u_new.shape)
        raise InstabilityError(f"non-finite u at (x, y) = ({x[i]:g}, {y[j]:g}), t = {t_new:g}")

    new_state = VelocityField(t=t_new, u=u_new, v=compute_v(u_new, grid))
    shear = wall_shear(new_state, grid)
    report = StepReport(
        t_new=t_new,
        max_residual=float(np.max(np.abs(u_new - u))) / dt,
        min_wall_shear=float(np.min(shear)),
        monotone_flag=bool(np.min(shear) > 0.0),
    )
    return new_state, report


def lyapunov_value(state: VelocityField, grid: PhysicalGrid) -> float:
    """Blow-up functional evaluated directly in physical coordinates.

    Equals the weighted integral of the singular shear density under the
    normalized-height change of variables, so it can be tracked on physical
    runs without transforming the field.
    """
    s = shear_profile(state, grid)
    denom = np.hypot(s, state.u)
    ratio = np.where(denom > 0.0, s / np.where(denom > 0.0, denom, 1.0), 1.0)
    x = grid.x
    inner = np.trapezoid(ratio, grid.y, axis=1)
    return float(np.trapezoid((grid.L - x) ** 1.5 * inner, x))


def sup_w_sq(state: VelocityField, grid: PhysicalGrid, model: OuterFlowModel) -> float:
    """Supremum of the squared normalized shear (du/dy / U_e)^2."""
    s = shear_profile(state, grid)
    ue = np.asarray(model.ue(state.t, grid.x), dtype=float)
    return float(np.max((s / ue[:, None]) ** 2))


def _compat_rel(state, grid, model):
    dpdx = np.asarray(model.dpdx(state.t, grid.x), dtype=float)
    scale = float(np.max(np.abs(dpdx)))
    if scale < 1e-12:
        return None
    curv = wall_curvature(state, grid)
    return float(np.max(np.abs(curv - dpdx)) / scale)


def run(state: VelocityField, grid: PhysicalGrid, model: OuterFlowModel, *,
        u1=None, t_end: float, detect_backflow: bool = True,
        n_bisect: int = 20, record_g: bool = True, observer=None) -> RunResult:
    """March to t_end or to the first wall-shear zero crossing.

    On a crossing the event time is refined by re-stepping from the last
    positive state with halved steps (n_bisect levels); the event position
    is the argmin of the wall shear at the refined crossing state.  The run
    makes no claim past the event.  ``observer(state)`` is called after
    every recorded step (snapshot hooks and the like).
    """
    grid.check_cfl(model)
    if t_end > model.T * (1.0 + 1e-12):
        raise ConfigError(f"t_end = {t_end:g} exceeds the model horizon T = {model.T:g}")
    series = DiagnosticSeries()
    shear0 = wall_shear(state, grid)
    if detect_backflow and np.min(shear0) <= 0.0:
        raise DataError("wall shear not positive at the initial state")

    def record(st, shear):
        k = int(np.argmin(shear))
        series.append(
            t=st.t,
            min_wall_shear=shear[k],
            argmin_x=grid.x[k],
            g_value=lyapunov_value(st, grid) if record_g else float("nan"),
            sup_w_sq=sup_w_sq(st, grid, model),
            wall_compat_rel=_compat_rel(st, grid, model),
        )
        if observer is not None:
            observer(st)

    record(state, shear0)
    event = None
    guard = 1e-12 * max(1.0, abs(t_end))
    while state.t < t_end - guard:
        dt_step = min(grid.dt, t_end - state.t)
        new_state, report = _step_dt(state, grid, model, u1, dt_step)
        if detect_backflow and report.min_wall_shear <= 0.0:
            def step_once(st, dt_loc):
                return _step_dt(st, grid, model, u1, dt_loc)[0]

            def metric(st):
                return float(np.min(wall_shear(st, grid)))

            event_state, t_star = bisect_crossing(state, dt_step, step_once, metric, n_bisect)
            shear_ev = wall_shear(event_state, grid)
            k = int(np.argmin(shear_ev))
            event = BackFlowEvent(
                t_star=t_star,
                x_star=float(grid.x[k]),
                wall_curvature=float(wall_curvature(event_state, grid)[k]),
                source="physical",
            )
            record(event_state, shear_ev)
            state = event_state
            break
        state = new_state
        record(state, wall_shear(state, grid))
    return RunResult(series=series, event=event, state=state)
