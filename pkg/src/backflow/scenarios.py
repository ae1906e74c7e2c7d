"""Ready-to-run configurations: two back-flow cases and two controls.

Each scenario bundles an outer-flow model, initial and inflow data in both
variable sets, grid/step defaults tuned to its stiffness, and (for the
adverse cases) the admission-integral value and critical threshold that
drive the back-flow prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, erfinv

from . import diagnostics
from .errors import ConfigError
from .outer_flow import OuterFlowModel, affine_model, constant_model, decaying_linear_model

BACKFLOW_EXPECTED = "backflow-expected"
NO_BACKFLOW_EXPECTED = "no-backflow-expected"
ORACLE = "oracle"

#: CLI-addressable scenario names.
SCENARIO_NAMES = ("heat-oracle", "example4.1", "example4.2", "favourable")


@dataclass
class Scenario:
    """A runnable problem setup.

    u0/u0_dy/u1 are physical-variable callables (vectorized over numpy
    arrays); w0/w1 their transformed counterparts.  grid_defaults feed the
    run configuration; notes are echoed into run metadata.
    """

    name: str
    model: OuterFlowModel
    u0: object
    u0_dy: object
    u1: object
    w0: object
    w1: object
    expected_outcome: str
    grid_defaults: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    condition_lower: float | None = None
    c_star: float | None = None
    oracle: dict | None = None


def profile_admission_integrand(u, u_dy):
    """Pointwise integrand u_y / sqrt(u_y^2 + u^2) of the admission integral."""
    denom = np.hypot(u_dy, u)
    return np.where(denom > 0.0, u_dy / np.where(denom > 0.0, denom, 1.0), 1.0)


def example_4_1(L: float, *, evaluate: bool = True) -> Scenario:
    """Decaying linear outer flow on a long interval.

    U_e = exp(-L^5 t)(2L - x) with the shear-layer initial profile
    u0 = U_e(0, x)(1 - e^-y).  The admission integral scales like L^(5/2),
    so back flow is predicted for long enough intervals.  The inflow keeps
    the initial shape but rescales with U_e(t, 0): a time-frozen inflow
    would contradict the decaying far field at the inflow top corner and
    leave the normalized height above one.
    """
    if L <= 0:
        raise ConfigError("example 4.1 needs L > 0")
    model = decaying_linear_model(L)

    def u0(x, y):
        return (2.0 * L - x) * (1.0 - np.exp(-y))

    def u0_dy(x, y):
        return (2.0 * L - x) * np.exp(-y) + 0.0 * y

    def u1(t, y):
        return 2.0 * L * np.exp(-model.rate * t) * (1.0 - np.exp(-y))

    def w0(xi, eta):
        return 1.0 - eta + 0.0 * xi

    def w1(tau, eta):
        return 1.0 - eta + 0.0 * tau

    # Wall-retardation time of the near-wall momentum balance; sets the
    # default step so the event is resolved by a few hundred steps.
    t_scale = math.pi / (4.0 * (L**5 + 1.0) ** 2)

    condition_lower = None
    c_star = None
    expected = NO_BACKFLOW_EXPECTED
    if evaluate:
        y = np.linspace(0.0, 40.0, 8193)
        f = np.exp(-y) / np.hypot(np.exp(-y), 1.0 - np.exp(-y))
        c0 = diagnostics.richardson(float(np.trapezoid(f, y)),
                                    float(np.trapezoid(f[::2], y[::2])))
        condition_lower = 0.4 * c0 * L**2.5
        k = diagnostics.constants(model, w1, n_samples=33, n_quad=1025)
        c_star = diagnostics.critical_threshold(k, model.T)
        expected = BACKFLOW_EXPECTED if condition_lower >= c_star else NO_BACKFLOW_EXPECTED

    cfl_dt = 0.5 * (L / 63.0) / (2.0 * L)
    return Scenario(
        name="example4.1",
        model=model,
        u0=u0, u0_dy=u0_dy, u1=u1, w0=w0, w1=w1,
        expected_outcome=expected,
        condition_lower=condition_lower,
        c_star=c_star,
        grid_defaults=dict(
            n_x=64, n_y=513, n_xi=64, n_eta=2049, y_max=10.0, stretch=1.0,
            eta_mapping="wall",
            dt=min(t_scale / 256.0, 0.9 * cfl_dt),
            dt_crocco=t_scale / 512.0,
            t_end=model.T,
        ),
        notes=dict(
            scenario_parameters=dict(L=L),
            inflow="initial shape rescaled by U_e(t,0)",
            horizon="three decay times of the outer flow",
        ),
    )


def example_4_2(M: float, alpha: float, *, evaluate: bool = True) -> Scenario:
    """Steady outer flow with a slowly growing initial profile.

    U_e = 2 - x on [0, 1]; u0 = U_e(x) phi(y) with phi = alpha y up to
    y = M, continued by the C1 saturating blend
    phi = 1 - (1 - alpha M) exp(-alpha (y - M)/(1 - alpha M)).  The
    admission integral grows like asinh(M), so slow growth over a large
    near-wall region predicts back flow; the prediction uses the analytic
    coefficient bounds of this outer flow (cubic 25/32, linear 3/4, drift
    -(4 sqrt 2 - 1)/5).
    """
    if not (M >= 1.0):
        raise ConfigError("example 4.2 needs M >= 1")
    if not (0.0 < alpha < 1.0 / M):
        raise ConfigError("example 4.2 needs 0 < alpha < 1/M")
    T = 5.0
    model = affine_model(2.0, -1.0, L=1.0, T=T)
    am = alpha * M
    ell = (1.0 - am) / alpha  # decay length of the blend

    def phi(y):
        y = np.asarray(y, dtype=float)
        tail = 1.0 - (1.0 - am) * np.exp(-(y - M) / ell)
        return np.where(y <= M, alpha * y, tail)

    def phi_dy(y):
        y = np.asarray(y, dtype=float)
        tail = alpha * np.exp(-(y - M) / ell)
        return np.where(y <= M, alpha + 0.0 * y, tail)

    def u0(x, y):
        return model.ue(0.0, x) * phi(y)

    def u0_dy(x, y):
        return model.ue(0.0, x) * phi_dy(y)

    def u1(t, y):
        return 2.0 * phi(y) + 0.0 * np.asarray(t, dtype=float)

    # In transformed variables eta = phi(y), so the shear profile is
    # closed-form on both branches of the blend.
    def w_profile(eta):
        eta = np.asarray(eta, dtype=float)
        tail = alpha * (1.0 - eta) / (1.0 - am)
        return np.where(eta <= am, alpha + 0.0 * eta, tail)

    def w0(xi, eta):
        return w_profile(eta) + 0.0 * xi

    def w1(tau, eta):
        return w_profile(eta) + 0.0 * np.asarray(tau, dtype=float)

    condition_lower = None
    c_star = None
    expected = NO_BACKFLOW_EXPECTED
    if evaluate:
        condition_lower = 0.4 * math.asinh(M)
        k = diagnostics.LyapunovConstants.from_bounds(
            0.0, (4.0 * math.sqrt(2.0) - 1.0) / 5.0, 25.0 / 32.0)
        c_star = diagnostics.critical_threshold(k, T)
        expected = BACKFLOW_EXPECTED if condition_lower >= c_star else NO_BACKFLOW_EXPECTED

    t_scale = math.pi * alpha**2 / 4.0  # wall-retardation time of the thin shear
    y_max = M + 6.5 * ell
    return Scenario(
        name="example4.2",
        model=model,
        u0=u0, u0_dy=u0_dy, u1=u1, w0=w0, w1=w1,
        expected_outcome=expected,
        condition_lower=condition_lower,
        c_star=c_star,
        grid_defaults=dict(
            n_x=64, n_y=513, n_xi=64, n_eta=513, y_max=y_max, stretch=1.0,
            eta_mapping="wall",
            dt=t_scale / 128.0,
            dt_crocco=t_scale / 256.0,
            t_end=T,
        ),
        notes=dict(
            scenario_parameters=dict(M=M, alpha=alpha),
            profile_blend="C1 exponential saturation above y = M",
            prediction_constants="analytic bounds of this outer flow",
        ),
    )


def favourable_control() -> Scenario:
    """Accelerating outer flow U_e = 2 + x: dP/dx <= 0, no back flow."""
    model = affine_model(2.0, 1.0, L=1.0, T=2.0)

    def u0(x, y):
        return (2.0 + x) * (1.0 - np.exp(-y))

    def u0_dy(x, y):
        return (2.0 + x) * np.exp(-y) + 0.0 * y

    def u1(t, y):
        return 2.0 * (1.0 - np.exp(-y)) + 0.0 * np.asarray(t, dtype=float)

    def w0(xi, eta):
        return 1.0 - eta + 0.0 * xi

    def w1(tau, eta):
        return 1.0 - eta + 0.0 * np.asarray(tau, dtype=float)

    return Scenario(
        name="favourable",
        model=model,
        u0=u0, u0_dy=u0_dy, u1=u1, w0=w0, w1=w1,
        expected_outcome=NO_BACKFLOW_EXPECTED,
        grid_defaults=dict(
            n_x=64, n_y=129, n_xi=64, n_eta=129, y_max=10.0, stretch=1.0,
            eta_mapping="uniform",
            dt=2e-3,
            dt_crocco=2e-3,
            t_end=1.0,
        ),
        notes=dict(inflow="frozen initial profile (steady outer flow)"),
    )


def heat_oracle(t0: float) -> Scenario:
    """x-independent validation case with a closed-form solution.

    Constant outer flow makes the momentum equation a pure wall-normal
    diffusion whose solution is the self-similar error-function profile;
    the transformed field decays by a known amplitude factor at fixed eta.
    """
    if t0 <= 0:
        raise ConfigError("heat oracle needs t0 > 0")
    model = constant_model(1.0, L=1.0, T=1.0)

    def u_exact(t, y):
        return erf(y / (2.0 * np.sqrt(t + t0)))

    def u0(x, y):
        return u_exact(0.0, y) + 0.0 * x

    def u0_dy(x, y):
        return np.exp(-(y / (2.0 * np.sqrt(t0))) ** 2) / np.sqrt(np.pi * t0) + 0.0 * x

    def u1(t, y):
        return u_exact(t, y)

    def w_exact(tau, eta):
        z = erfinv(np.clip(eta, 0.0, 1.0))
        out = np.exp(-z**2) / np.sqrt(np.pi * (tau + t0))
        return np.where(np.asarray(eta) >= 1.0, 0.0, out)

    def w0(xi, eta):
        return w_exact(0.0, eta) + 0.0 * xi

    def w1(tau, eta):
        return w_exact(tau, eta)

    def wall_shear_exact(t):
        return 1.0 / np.sqrt(np.pi * (t + t0))

    return Scenario(
        name="heat-oracle",
        model=model,
        u0=u0, u0_dy=u0_dy, u1=u1, w0=w0, w1=w1,
        expected_outcome=ORACLE,
        grid_defaults=dict(
            n_x=16, n_y=257, n_xi=16, n_eta=257, y_max=8.0, stretch=1.0,
            eta_mapping="both",
            dt=1e-4,
            dt_crocco=5e-5,
            t_end=0.2,
        ),
        notes=dict(inflow="exact similarity profile", t0=t0),
        oracle=dict(u=u_exact, w=w_exact, wall_shear=wall_shear_exact, t0=t0),
    )


def build(name: str, **params) -> Scenario:
    """Construct a scenario by CLI name with its keyword parameters."""
    if name == "heat-oracle":
        return heat_oracle(params.pop("t0", 0.05))
    if name == "example4.1":
        return example_4_1(params.pop("L", 3.0), evaluate=params.pop("evaluate", True))
    if name == "example4.2":
        return example_4_2(params.pop("M", 50.0), params.pop("alpha", 0.01),
                           evaluate=params.pop("evaluate", True))
    if name == "favourable":
        return favourable_control()
    raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIO_NAMES)}")
