"""Change of variables between velocity profiles and shear profiles.

For a profile u(y) that increases strictly from u(0) = 0 towards the outer
value U_e, the normalized height eta = u/U_e is an invertible coordinate and
the normalized shear

    w(eta) = (du/dy) / U_e

is a single scalar unknown on the strip eta in [0, 1].  This module maps
monotone profiles to w and back, provides the advection/reaction coefficients
of the transformed momentum equation, and the singular density whose weighted
integral serves as the blow-up functional.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, InvertibilityError, MonotonicityError, TruncationError
from .outer_flow import OuterFlowModel

_DEFAULT_MATCH_TOL = 1e-3


#: eta-grid node distributions: uniform, clustered at the wall (quadratic
#: map, resolves the wall flux layer of strongly adverse scenarios), or
#: clustered at both ends (cosine map, adds resolution where the diffusion
#: degenerates at eta = 1).
ETA_MAPPINGS = ("uniform", "wall", "both")


@dataclass(frozen=True)
class CroccoGrid:
    """Grid on [0, L] x [0, 1] for the transformed problem; xi is uniform."""

    n_xi: int
    n_eta: int
    L: float
    mapping: str = "uniform"

    def __post_init__(self):
        if self.n_xi < 2 or self.n_eta < 3:
            raise ConfigError("CroccoGrid needs n_xi >= 2 and n_eta >= 3")
        if self.L <= 0:
            raise ConfigError("CroccoGrid needs L > 0")
        if self.mapping not in ETA_MAPPINGS:
            raise ConfigError(f"unknown eta mapping {self.mapping!r}")

    @property
    def dxi(self) -> float:
        return self.L / (self.n_xi - 1)

    @property
    def deta(self) -> float:
        """First eta spacing (the wall-closure step size)."""
        return float(self.eta[1] - self.eta[0])

    @property
    def xi(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n_xi)

    @property
    def eta(self) -> np.ndarray:
        s = np.linspace(0.0, 1.0, self.n_eta)
        if self.mapping == "wall":
            return s**2
        if self.mapping == "both":
            return 0.5 * (1.0 - np.cos(np.pi * s))
        return s


@dataclass
class ShearField:
    """Normalized shear w on a CroccoGrid at one time level.

    values[i, j] holds w(tau, xi_i, eta_j); the eta = 1 row is identically
    zero (far-field matching).
    """

    tau: float
    values: np.ndarray
    grid: CroccoGrid = field(repr=False)

    def copy(self) -> "ShearField":
        return ShearField(self.tau, self.values.copy(), self.grid)


def forward(u_profile, ue_val, dudy_profile, eta_grid, *, match_tol=_DEFAULT_MATCH_TOL):
    """Map a monotone velocity profile to shear samples on an eta grid.

    ``u_profile`` and ``dudy_profile`` are samples of u and du/dy on a common
    y grid with u(0) = 0.  The profile must increase strictly and reach
    ``ue_val`` at the last node to within ``match_tol`` (relative), otherwise
    the transform would silently drop part of the layer.  Interpolation onto
    ``eta_grid`` is shape-preserving piecewise cubic in eta = u/ue_val, and
    w(1) = 0 is imposed as the far-field value.
    """
    u = np.asarray(u_profile, dtype=float)
    dudy = np.asarray(dudy_profile, dtype=float)
    eta_grid = np.asarray(eta_grid, dtype=float)
    if u.ndim != 1 or u.shape != dudy.shape:
        raise ConfigError("u_profile and dudy_profile must be 1-D and congruent")
    if abs(u[0]) > 1e-12 * max(1.0, abs(ue_val)):
        raise MonotonicityError("profile must start from u(0) = 0")
    du = np.diff(u)
    scale = abs(ue_val)
    if np.any(du < -1e-13 * scale):
        k = int(np.argmin(du))
        raise MonotonicityError(f"profile not increasing at sample {k}")
    if np.any(dudy <= 0.0):
        k = int(np.argmax(dudy <= 0.0))
        raise MonotonicityError(f"du/dy not positive at sample {k}")
    # Drop samples where the outer plateau has saturated to roundoff; strict
    # increase is required only up to there.
    keep = np.concatenate([[True], du > 1e-15 * scale])
    u, dudy = u[keep], dudy[keep]
    eta_samples = u / ue_val
    if eta_samples[-1] < 1.0 - match_tol:
        raise TruncationError(
            f"profile reaches only u/U_e = {eta_samples[-1]:.6g}; "
            f"extend the y range or raise match_tol"
        )
    w_samples = dudy / ue_val
    # Far-field closure: w -> 0 as eta -> 1.
    if eta_samples[-1] < 1.0:
        eta_samples = np.append(eta_samples, 1.0)
        w_samples = np.append(w_samples, 0.0)
    else:
        w_samples = w_samples.copy()
        w_samples[-1] = 0.0
    interp = PchipInterpolator(eta_samples, w_samples, extrapolate=False)
    w = interp(np.clip(eta_grid, 0.0, eta_samples[-1]))
    w[np.isclose(eta_grid, 1.0)] = 0.0
    return w


@dataclass(frozen=True)
class InverseProfile:
    """Velocity profile recovered from shear samples.

    The integration stops at eta_cut = 1 - deta: w vanishes at eta = 1 and
    the height integral diverges there, which is the genuine semi-infinite
    extent of the layer rather than a numerical defect.
    """

    y: np.ndarray
    u: np.ndarray
    eta_cut: float


def inverse(w_profile, ue_val, eta_grid=None) -> InverseProfile:
    """Recover (y, u) from shear samples on a uniform eta grid.

    Heights follow from dy = d(eta)/w.  Each cell is integrated with the
    rule that is exact when w varies linearly across the cell,

        dy = deta * log(w_i / w_{i+1}) / (w_i - w_{i+1}),

    which keeps the strongly curved near-cutoff cells accurate where the
    plain trapezoid rule loses several digits.
    """
    w = np.asarray(w_profile, dtype=float)
    if eta_grid is None:
        eta_grid = np.linspace(0.0, 1.0, w.size)
    eta_grid = np.asarray(eta_grid, dtype=float)
    if np.any(w[:-1] <= 0.0):
        k = int(np.argmax(w[:-1] <= 0.0))
        raise InvertibilityError(f"w must be positive below the cutoff; w[{k}] = {w[k]:g}")
    n_cells = w.size - 2  # integrate up to eta_cut = eta[-2]
    wl = w[0:n_cells]
    wr = w[1:n_cells + 1]
    h = np.diff(eta_grid)[:n_cells]
    diff = wl - wr
    tiny = 1e-12 * np.maximum(wl, wr)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope_rule = np.log(wl / wr) / diff
    mean_rule = 2.0 / (wl + wr)
    dy = h * np.where(np.abs(diff) > tiny, slope_rule, mean_rule)
    y = np.concatenate([[0.0], np.cumsum(dy)])
    u = eta_grid[:n_cells + 1] * ue_val
    return InverseProfile(y=y, u=u, eta_cut=float(eta_grid[n_cells]))


def coefficients(model: OuterFlowModel, t, xi, eta):
    """Advection and reaction coefficients of the transformed equation.

    Returns (A, B) with
        A = (1 - eta^2) dU_e/dx + (1 - eta) (dU_e/dt)/U_e
        B = eta dU_e/dx + (dU_e/dt)/U_e
    Inputs broadcast; (t, xi) must lie in the model domain.
    """
    model.check_domain(t, xi)
    eta = np.asarray(eta, dtype=float)
    ue = model.ue(t, xi)
    uex = model.ue_x(t, xi)
    uet_over_ue = model.ue_t(t, xi) / ue
    A = (1.0 - eta**2) * uex + (1.0 - eta) * uet_over_ue
    B = eta * uex + uet_over_ue
    return A, B


def lyapunov_density(w, eta):
    """Singular density (w^2 + eta^2)^(-1/2).

    Finite whenever (w, eta) != (0, 0); the double zero is exactly the
    back-flow signature at the wall and maps to +inf.
    """
    scalar = np.isscalar(w) and np.isscalar(eta)
    s = np.hypot(np.asarray(w, dtype=float), np.asarray(eta, dtype=float))
    out = np.where(s > 0.0, 1.0 / np.where(s > 0.0, s, 1.0), np.inf)
    return float(out) if scalar else out
