"""Blow-up functional, comparison ODE, and runtime theorem checks.

The central object is the weighted integral

    G(tau) = int_0^1 int_0^L (w^2 + eta^2)^(-1/2) (L - xi)^(3/2) dxi deta,

finite while the wall shear is positive and divergent exactly when it
reaches zero somewhere.  Its time derivative dominates a cubic comparison
ODE whose coefficients depend only on the outer flow; integrating that ODE
turns largeness of G(0) into a constructive back-flow prediction with a
critical threshold obtained by bisection on the initial value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .crocco import ShearField
from .errors import ConfigError, DataError
from .outer_flow import OuterFlowModel
from .records import BackFlowEvent  # re-exported: events are diagnostic payloads

__all__ = [
    "BackFlowEvent",
    "BoundsReport",
    "ConditionIntegral",
    "InequalityReport",
    "LyapunovConstants",
    "OdeBound",
    "PositivityReport",
    "check_interior_positivity",
    "check_shear_sup_bound",
    "comparison_ode",
    "constants",
    "critical_threshold",
    "discrete_lyapunov_inequality",
    "initial_lyapunov_value",
    "lyapunov_functional",
    "richardson",
]

BLOWUP_THRESHOLD = 1e6


def richardson(fine: float, coarse: float, order: int = 2) -> float:
    """Extrapolate a pair of nested composite-rule values."""
    f = 2**order
    return fine + (fine - coarse) / (f - 1)


def _trapezoid_refined(values: np.ndarray, x: np.ndarray) -> float:
    """Composite trapezoid with one Richardson refinement on nested nodes."""
    fine = float(np.trapezoid(values, x))
    if values.shape[-1] % 2 == 1 and values.shape[-1] >= 3:
        coarse = float(np.trapezoid(values[..., ::2], x[::2]))
        return richardson(fine, coarse)
    return fine


def lyapunov_functional(w: ShearField, L: float) -> float:
    """Evaluate G for a sampled shear field.

    The eta integral uses the composite trapezoid rule except on the first
    cell, where the integrand is steepest near the event; there the wall
    value is frozen and the cell integrated in closed form,
    int_0^deta (w0^2 + eta^2)^(-1/2) deta = asinh(deta / w0).  A zero wall
    value makes G = +inf, which is the event marker, not an error.
    """
    if L <= 0.0:
        return 0.0
    vals = w.values
    grid = w.grid
    eta = grid.eta
    deta = grid.deta
    wall = vals[:, 0]
    if np.any(wall < 0.0):
        raise DataError("negative wall shear handed to the functional")
    integrand = 1.0 / np.hypot(vals[:, 1:], eta[None, 1:])
    inner = np.trapezoid(integrand, eta[1:], axis=1)
    with np.errstate(divide="ignore"):
        first_cell = np.where(wall > 0.0, np.arcsinh(deta / np.where(wall > 0.0, wall, 1.0)), np.inf)
    inner = inner + first_cell
    xi = grid.xi
    weights = (L - xi) ** 1.5
    with np.errstate(invalid="ignore"):
        contrib = weights * inner
    # 0 * inf at the downstream edge is a vanishing-weight limit, not a NaN.
    contrib[np.isnan(contrib) & (weights == 0.0)] = 0.0
    if np.any(np.isinf(contrib)):
        return float("inf")
    return float(np.trapezoid(contrib, xi))


@dataclass(frozen=True)
class LyapunovConstants:
    """Sampled coefficient curves of the comparison inequality and their bounds.

    lambda0 / lambda2 are infima of the additive and cubic coefficients,
    lambda1 the supremum of the subtractive one, over the sampled horizon.
    """

    tau: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    lambda0: float
    lambda1: float
    lambda2: float

    @staticmethod
    def from_bounds(lambda0: float, lambda1: float, lambda2: float) -> "LyapunovConstants":
        """Bounds-only constants (no sampled curves), e.g. analytic values."""
        e = np.empty(0)
        return LyapunovConstants(e, e, e, e, lambda0, lambda1, lambda2)

    @property
    def drift(self) -> float:
        return self.lambda0 - self.lambda1


def _c0_integrand(w1_vals: np.ndarray, eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    denom = np.hypot(w1_vals, eta)
    pos = denom > 0.0
    out[pos] = eta[pos] / denom[pos]
    out[~pos] = 1.0  # limit of eta / |eta| as eta -> 0 with w1(0) = 0
    return out


def constants(model: OuterFlowModel, w1, n_samples: int = 33,
              n_quad: int = 1025) -> LyapunovConstants:
    """Quadrature evaluation of the comparison-ODE coefficients.

    ``w1`` is the inflow shear profile: either a callable (tau, eta) -> array
    or a 1-D array on a uniform eta grid.  Requires a strictly adverse
    pressure gradient; a nonpositive dP/dx sample is a precondition error.
    """
    taus = np.linspace(0.0, model.T, n_samples)
    xi = np.linspace(0.0, model.L, n_quad)
    eta = np.linspace(0.0, 1.0, n_quad)
    if callable(w1):
        w1_fn = w1
    else:
        arr = np.asarray(w1, dtype=float)
        nodes = np.linspace(0.0, 1.0, arr.size)
        w1_fn = lambda tau, e: np.interp(e, nodes, arr)  # noqa: E731
    phi = (model.L - xi) ** 1.5
    c0 = np.empty(n_samples)
    c1 = np.empty(n_samples)
    c2 = np.empty(n_samples)
    for k, tau in enumerate(taus):
        dpdx = np.asarray(model.dpdx(tau, xi), dtype=float)
        if np.any(dpdx <= 0.0):
            j = int(np.argmin(dpdx))
            raise DataError(
                f"adverse classification required: dP/dx({tau:g}, {xi[j]:g}) = {dpdx[j]:g}"
            )
        ue = np.asarray(model.ue(tau, xi), dtype=float)
        w1_vals = np.asarray(w1_fn(tau, eta), dtype=float)
        c0[k] = model.L**1.5 * float(model.ue(tau, 0.0)) \
            * _trapezoid_refined(_c0_integrand(w1_vals, eta), eta)
        c1[k] = 0.5 * _trapezoid_refined(np.sqrt(ue**4 / dpdx), xi)
        c2[k] = 0.5 * (2.0 * _trapezoid_refined(np.sqrt(ue / dpdx) * phi, xi)) ** (-2)
    return LyapunovConstants(
        tau=taus, c0=c0, c1=c1, c2=c2,
        lambda0=float(np.min(c0)), lambda1=float(np.max(c1)), lambda2=float(np.min(c2)),
    )


@dataclass
class OdeBound:
    """Trajectory of the comparison ODE from a given initial value."""

    g0: float
    blowup_time: float | None
    tau: np.ndarray
    g: np.ndarray
    c_star: float | None = None


def comparison_ode(g0: float, k: LyapunovConstants, T: float, *,
                   linear_coeff: float = 0.75,
                   blowup_threshold: float = BLOWUP_THRESHOLD) -> OdeBound:
    """Integrate G' = lambda2 G^3 - linear_coeff G + (lambda0 - lambda1).

    Adaptive explicit integration (RK45) with automatic step shrink near the
    blow-up; the trajectory is declared blown up once it reaches
    ``blowup_threshold``.  ``linear_coeff`` exists so closed-form test
    variants can drop the damping term.

    The march actually integrates z = G^(-2), in which the cubic blow-up is
    a plain linear zero crossing (z' -> -2 lambda2); integrating G itself
    stalls on step underflow just below the threshold once lambda2 is large.
    """
    if g0 <= 0.0:
        raise DataError("comparison_ode needs a positive initial value")
    lam2, drift = k.lambda2, k.drift
    z0 = g0**-2
    z_blow = blowup_threshold**-2
    z_floor = 1e18 * z0  # G fell by 1e9: decayed for good (terminal)

    def rhs(_t, y):
        z = max(y[0], 0.0)
        return (-2.0 * lam2 + 2.0 * linear_coeff * z - 2.0 * drift * z**1.5,)

    def blow(_t, y):
        return y[0] - z_blow

    blow.terminal = True
    blow.direction = -1.0

    def decayed(_t, y):
        return y[0] - z_floor

    decayed.terminal = True
    decayed.direction = 1.0

    sol = solve_ivp(
        rhs, (0.0, T), (z0,), method="RK45",
        rtol=1e-10, atol=1e-8 * z_blow,
        max_step=T / 64.0, events=(blow, decayed), dense_output=False,
    )
    blowup_time = float(sol.t_events[0][0]) if sol.t_events[0].size else None
    with np.errstate(divide="ignore"):
        g = np.where(sol.y[0] > 0.0, np.where(sol.y[0] > 0.0, sol.y[0], 1.0) ** -0.5, np.inf)
    return OdeBound(g0=g0, blowup_time=blowup_time, tau=sol.t, g=g)


def critical_threshold(k: LyapunovConstants, T: float, *,
                       linear_coeff: float = 0.75, n_bisect: int = 60) -> float:
    """Minimal initial value whose comparison trajectory blows up before T.

    Blow-up time is monotone nonincreasing in the initial value, so bisection
    between the largest equilibrium (never blows) and a blowing upper bracket
    is justified.  The upper bracket starts at ten times the equilibrium and
    doubles until it blows; if that never happens the threshold is
    unreachable and +inf is returned.
    """
    if not (k.lambda2 > 0.0 and np.isfinite(k.drift)):
        raise ConfigError("critical_threshold needs lambda2 > 0 and finite drift")

    def blows(g0: float) -> bool:
        return comparison_ode(g0, k, T, linear_coeff=linear_coeff).blowup_time is not None

    roots = np.roots([k.lambda2, 0.0, -linear_coeff, k.drift])
    real = roots[np.abs(roots.imag) < 1e-12 * np.maximum(1.0, np.abs(roots.real))].real
    positive = real[real > 0.0]
    lo = float(np.max(positive)) if positive.size else 0.0
    hi = 10.0 * max(lo, 1.0)
    for _ in range(70):
        if blows(hi):
            break
        hi *= 2.0
    else:
        return float("inf")
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if blows(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class ConditionIntegral:
    """Value of the admission integral plus an estimate of the cut tail."""

    value: float
    tail_estimate: float


def initial_lyapunov_value(u0, u0_dy, L: float, y_cut: float, *,
                           nx: int = 513, ny: int = 2049) -> ConditionIntegral:
    """G(0) evaluated directly from initial data in physical coordinates:

        int_0^y_cut int_0^L (L - x)^(3/2) u0_y / sqrt(u0_y^2 + u0^2) dx dy.

    Nested trapezoid with one Richardson refinement; the integrand beyond
    y_cut is estimated from the decay of the last rows and reported, not
    added.  A negative u0_y sample is a data error.
    """
    x = np.linspace(0.0, L, nx)
    y = np.linspace(0.0, y_cut, ny)
    uy = np.asarray(u0_dy(x[:, None], y[None, :]), dtype=float)
    if np.any(uy < 0.0):
        i, j = np.unravel_index(int(np.argmin(uy)), uy.shape)
        raise DataError(f"u0_dy must be nonnegative; u0_dy({x[i]:g}, {y[j]:g}) = {uy[i, j]:g}")
    u = np.asarray(u0(x[:, None], y[None, :]), dtype=float)
    denom = np.hypot(uy, u)
    ratio = np.where(denom > 0.0, uy / np.where(denom > 0.0, denom, 1.0), 1.0)

    def value_on(step: int) -> float:
        xs = x[::step]
        ys = y[::step]
        inner = np.trapezoid(ratio[::step, ::step], ys, axis=1)
        return float(np.trapezoid((L - xs) ** 1.5 * inner, xs))

    fine = value_on(1)
    coarse = value_on(2)
    value = richardson(fine, coarse)

    f_rows = np.trapezoid((L - x)[:, None] ** 1.5 * ratio, x, axis=0)
    dy = y[-1] - y[-2]
    f_end, f_prev = f_rows[-1], f_rows[-2]
    if 0.0 < f_end < f_prev:
        q = f_end / f_prev
        tail = f_end * dy * q / (1.0 - q)
    else:
        tail = float("nan")
    return ConditionIntegral(value=value, tail_estimate=tail)


@dataclass(frozen=True)
class BoundsReport:
    """Outcome of the exponential sup bound on the squared shear."""

    passed: bool
    margin: float  # bound / worst observed value (>= 1 passes)
    n_factor: float
    bound: float
    sup_observed: float
    worst_tau: float


def check_shear_sup_bound(taus, sup_w_sq, model: OuterFlowModel, *,
                          w0_sup_sq: float, w1_sup_sq: float,
                          allowance: float = 0.05,
                          n_grid: int = 65) -> BoundsReport:
    """Check sup exp(-N tau) w^2 <= (1 + allowance) max(sup w0^2, sup w1^2).

    N is the smallest nonnegative constant with N + 2B >= 0, realized
    discretely as the grid supremum of -2B over the sampled horizon.
    """
    taus = np.asarray(taus, dtype=float)
    sup_w_sq = np.asarray(sup_w_sq, dtype=float)
    if taus.size == 0:
        raise DataError("empty history")
    t_grid = np.linspace(0.0, max(float(taus[-1]), 1e-300), n_grid)
    xi = np.linspace(0.0, model.L, n_grid)
    eta = np.linspace(0.0, 1.0, n_grid)
    b = (eta[None, None, :] * model.ue_x(t_grid[:, None, None], xi[None, :, None])
         + model.ue_t(t_grid[:, None, None], xi[None, :, None])
         / model.ue(t_grid[:, None, None], xi[None, :, None]))
    n_factor = max(0.0, float(np.max(-2.0 * b)))
    observed = np.exp(-n_factor * taus) * sup_w_sq
    k = int(np.argmax(observed))
    sup_obs = float(observed[k])
    data_sup = max(w0_sup_sq, w1_sup_sq)
    bound = (1.0 + allowance) * data_sup
    return BoundsReport(
        passed=bool(sup_obs <= bound),
        margin=bound / sup_obs if sup_obs > 0 else float("inf"),
        n_factor=n_factor,
        bound=bound,
        sup_observed=sup_obs,
        worst_tau=float(taus[k]),
    )


@dataclass(frozen=True)
class PositivityReport:
    """Where the shear profile attains its minimum, and whether that is legal."""

    passed: bool
    phase: str  # "pre-retardation" | "retarded"
    wall_value: float
    interior_min: float
    interior_argmin_y: float
    global_min_is_wall: bool
    reason: str = ""


def check_interior_positivity(state, grid, *, initial_wall_shear,
                              column: int | None = None,
                              at_event: bool = False) -> PositivityReport:
    """Verify that the shear minimum can only sit at the wall.

    On the selected column (default: smallest wall shear), the shear profile
    must stay strictly positive on the interior band 0 < y <= y_max / 2; once
    the wall value has fallen below half its initial level the interior must
    exceed the wall value, and at the event the global minimizer over y must
    be the wall node.  An interior zero while the wall is positive fails the
    check — it contradicts the wall-first mechanism and indicates a numerical
    fault.
    """
    from .physical import shear_profile, wall_shear  # local import avoids a cycle

    shear_wall = wall_shear(state, grid)
    if column is None:
        column = int(np.argmin(shear_wall))
    prof = shear_profile(state, grid)[column]
    y = grid.y
    band = (y > 0.0) & (y <= 0.5 * grid.y_max)
    interior = prof[band]
    j_rel = int(np.argmin(interior))
    interior_min = float(interior[j_rel])
    interior_y = float(y[band][j_rel])
    wall_value = float(prof[0])
    init_wall = float(np.asarray(initial_wall_shear)[column])
    retarded = wall_value < 0.5 * init_wall
    global_min_is_wall = bool(int(np.argmin(prof)) == 0)

    passed = True
    reason = ""
    if interior_min <= 0.0 and wall_value > 0.0:
        passed = False
        reason = f"interior shear zero at y = {interior_y:g} before a wall zero"
    elif interior_min <= 0.0 and not at_event:
        passed = False
        reason = f"nonpositive interior shear at y = {interior_y:g}"
    if retarded and interior_min <= wall_value:
        passed = False
        reason = reason or "retarded wall is not the profile minimum"
    if at_event and not global_min_is_wall:
        passed = False
        reason = reason or "global shear minimizer is not the wall node at the event"
    return PositivityReport(
        passed=passed,
        phase="retarded" if retarded else "pre-retardation",
        wall_value=wall_value,
        interior_min=interior_min,
        interior_argmin_y=interior_y,
        global_min_is_wall=global_min_is_wall,
        reason=reason,
    )


@dataclass(frozen=True)
class InequalityReport:
    """Stepwise verdicts of the discrete comparison inequality."""

    passed: bool
    fraction_passed: float
    n_checked: int
    worst_margin: float
    worst_index: int
    margins: np.ndarray = field(repr=False)


def discrete_lyapunov_inequality(taus, g_values, k: LyapunovConstants, *,
                                 tol=None, linear_coeff: float = 0.75,
                                 required_fraction: float = 1.0) -> InequalityReport:
    """Check (G(t+dt) - G(t))/dt >= lambda2 G^3 - 3/4 G + drift - tol stepwise.

    ``tol`` defaults to 5% of max(1, lambda2 G^3) per step.  Steps whose G is
    non-finite (the event marker) are skipped; fewer than two finite samples
    pass vacuously.
    """
    taus = np.asarray(taus, dtype=float)
    g = np.asarray(g_values, dtype=float)
    ok = np.isfinite(g)
    taus, g = taus[ok], g[ok]
    if g.size < 2:
        return InequalityReport(True, 1.0, 0, float("inf"), -1, np.empty(0))
    dts = np.diff(taus)
    lhs = np.diff(g) / dts
    gi = g[:-1]
    rhs = k.lambda2 * gi**3 - linear_coeff * gi + k.drift
    if tol is None:
        tol = 0.05 * np.maximum(1.0, k.lambda2 * gi**3)
    margins = lhs - (rhs - tol)
    passed_steps = margins >= 0.0
    frac = float(np.mean(passed_steps))
    worst = int(np.argmin(margins))
    return InequalityReport(
        passed=bool(frac >= required_fraction),
        fraction_passed=frac,
        n_checked=int(margins.size),
        worst_margin=float(margins[worst]),
        worst_index=worst,
        margins=margins,
    )
