"""Outer-flow traces and the pressure gradient they impose.

The outer Euler flow enters the boundary-layer problem only through its slip
velocity ``U_e(t, x)`` on the wall and the pressure gradient obtained from it
by the momentum balance of the outer flow,

    dP/dx = -(dU_e/dt + U_e dU_e/dx).

Models are restricted to a closed set of analytic forms with hand-coded
derivatives, so every downstream coefficient (advection speeds, reaction
terms, wall flux) is exact to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

#: Supported analytic forms of U_e(t, x).
KINDS = ("decaying_linear", "affine", "constant")

_DOMAIN_SLACK = 1e-9


@dataclass(frozen=True)
class OuterFlowModel:
    """Analytic slip-velocity trace on ``[0, T] x [0, L]``.

    kind
        ``"decaying_linear"``: U_e = exp(-rate*t) * (c0 + c1*x)
        ``"affine"``:          U_e = c0 + c1*x           (steady)
        ``"constant"``:        U_e = c0
    Positivity of U_e is checked on a sampling grid at construction.
    """

    kind: str
    L: float
    T: float
    c0: float
    c1: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown outer-flow kind {self.kind!r}")
        if not (self.L > 0.0 and self.T > 0.0):
            raise ConfigError("outer-flow model needs L > 0 and T > 0")
        ts = np.linspace(0.0, self.T, 101)
        xs = np.linspace(0.0, self.L, 101)
        ue = self.ue(ts[:, None], xs[None, :])
        if not np.all(ue > 0.0):
            k = np.unravel_index(np.argmin(ue), ue.shape)
            raise ConfigError(
                f"U_e must be positive on the domain; worst sample "
                f"U_e({ts[k[0]]:g}, {xs[k[1]]:g}) = {ue[k]:g}"
            )

    # Evaluators accept scalars or broadcastable arrays.  They do not check
    # the domain; use eval_Ue / pressure_gradient for checked access.
    def ue(self, t, x):
        spatial = self.c0 + self.c1 * np.asarray(x, dtype=float)
        if self.kind == "constant":
            spatial = self.c0 + 0.0 * np.asarray(x, dtype=float)
        if self.kind == "decaying_linear":
            return np.exp(-self.rate * np.asarray(t, dtype=float)) * spatial
        return spatial + 0.0 * np.asarray(t, dtype=float)

    def ue_t(self, t, x):
        if self.kind == "decaying_linear":
            return -self.rate * self.ue(t, x)
        return 0.0 * (np.asarray(t, dtype=float) + np.asarray(x, dtype=float))

    def ue_x(self, t, x):
        if self.kind == "constant":
            return 0.0 * (np.asarray(t, dtype=float) + np.asarray(x, dtype=float))
        if self.kind == "decaying_linear":
            return self.c1 * np.exp(-self.rate * np.asarray(t, dtype=float)) \
                + 0.0 * np.asarray(x, dtype=float)
        return self.c1 + 0.0 * (np.asarray(t, dtype=float) + np.asarray(x, dtype=float))

    def dpdx(self, t, x):
        """Streamwise pressure gradient from the outer momentum balance."""
        return -(self.ue_t(t, x) + self.ue(t, x) * self.ue_x(t, x))

    def check_domain(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        tol_t = _DOMAIN_SLACK * max(1.0, self.T)
        tol_x = _DOMAIN_SLACK * max(1.0, self.L)
        if np.any(t < -tol_t) or np.any(t > self.T + tol_t):
            raise DomainError(f"t outside [0, {self.T}]")
        if np.any(x < -tol_x) or np.any(x > self.L + tol_x):
            raise DomainError(f"x outside [0, {self.L}]")


@dataclass(frozen=True)
class GradientReport:
    """Sign summary of dP/dx sampled on a uniform (t, x) grid."""

    classification: str  # "adverse" | "favourable" | "mixed"
    min_grad: float
    max_grad: float
    nt: int
    nx: int
    worst_t: float
    worst_x: float


def decaying_linear_model(L: float, *, T: float | None = None,
                          rate: float | None = None) -> OuterFlowModel:
    """Slip velocity ``exp(-L^5 t) (2L - x)``: linear in x, decaying in time.

    The decay rate ``L**5`` ties the time scale to the domain length so the
    induced adverse gradient stays uniformly positive for every ``L``.  The
    default horizon is three decay times.
    """
    r = L**5 if rate is None else rate
    if T is None:
        T = 3.0 / r
    return OuterFlowModel(kind="decaying_linear", L=L, T=T, c0=2.0 * L, c1=-1.0, rate=r)


def affine_model(c0: float, c1: float, L: float, T: float) -> OuterFlowModel:
    return OuterFlowModel(kind="affine", L=L, T=T, c0=c0, c1=c1)


def constant_model(value: float, L: float, T: float) -> OuterFlowModel:
    return OuterFlowModel(kind="constant", L=L, T=T, c0=value)


def eval_Ue(model: OuterFlowModel, t, x):
    """Checked evaluation of U_e(t, x)."""
    model.check_domain(t, x)
    return model.ue(t, x)


def pressure_gradient(model: OuterFlowModel, t, x):
    """Checked evaluation of dP/dx at (t, x)."""
    model.check_domain(t, x)
    return model.dpdx(t, x)


def classify_gradient(model: OuterFlowModel, nt: int = 101, nx: int = 101) -> GradientReport:
    """Sample dP/dx on an nt-by-nx grid and classify its sign.

    "adverse" means every sample is strictly positive, "favourable" that no
    sample is positive; anything else is "mixed".
    """
    if nt < 2 or nx < 2:
        raise ConfigError("classify_gradient needs nt, nx >= 2")
    ts = np.linspace(0.0, model.T, nt)
    xs = np.linspace(0.0, model.L, nx)
    g = model.dpdx(ts[:, None], xs[None, :])
    g = np.broadcast_to(g, (nt, nx))
    gmin = float(np.min(g))
    gmax = float(np.max(g))
    if gmin > 0.0:
        cls = "adverse"
        k = np.unravel_index(np.argmin(g), g.shape)
    elif gmax <= 0.0:
        cls = "favourable"
        k = np.unravel_index(np.argmax(g), g.shape)
    else:
        cls = "mixed"
        k = np.unravel_index(np.argmin(g), g.shape)
    return GradientReport(classification=cls, min_grad=gmin, max_grad=gmax,
                          nt=nt, nx=nx, worst_t=float(ts[k[0]]), worst_x=float(xs[k[1]]))
