import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backflow.crocco import (
    CroccoGrid,
    coefficients,
    forward,
    inverse,
    lyapunov_density,
)
from backflow.errors import ConfigError, InvertibilityError, MonotonicityError, TruncationError
from backflow.outer_flow import affine_model, constant_model, decaying_linear_model


def shear_layer_samples(ue=1.0, y_max=40.0, n=4097):
    y = np.linspace(0.0, y_max, n)
    return y, ue * (1.0 - np.exp(-y)), ue * np.exp(-y)


def test_forward_shear_layer_is_linear():
    eta = np.linspace(0.0, 1.0, 257)
    _, u, dudy = shear_layer_samples()
    w = forward(u, 1.0, dudy, eta)
    assert np.max(np.abs(w - (1.0 - eta))) < 1e-8


def test_forward_regularized_ramp():
    # u/U_e = y up to the knee, then a saturating C1 tail: unit shear inside.
    delta = 0.05
    y = np.linspace(0.0, 3.0, 6001)
    knee = 1.0 - delta
    u = np.where(y <= knee, y, 1.0 - delta * np.exp(-(y - knee) / delta))
    dudy = np.where(y <= knee, 1.0, np.exp(-(y - knee) / delta))
    eta = np.linspace(0.0, 1.0, 129)
    w = forward(u, 1.0, dudy, eta)
    inside = eta <= 0.9
    assert np.max(np.abs(w[inside] - 1.0)) < 1e-6


def test_forward_far_field_row_is_zero():
    eta = np.linspace(0.0, 1.0, 65)
    _, u, dudy = shear_layer_samples()
    assert forward(u, 1.0, dudy, eta)[-1] == 0.0


def test_forward_rejects_nonmonotone():
    y = np.linspace(0.0, 5.0, 101)
    u = 1.0 - np.exp(-y)
    u[40] = u[43]  # genuine decrease afterwards
    with pytest.raises(MonotonicityError):
        forward(u, 1.0, np.exp(-y), np.linspace(0, 1, 33))


def test_forward_rejects_truncated_profile():
    y = np.linspace(0.0, 1.5, 101)  # reaches only 78% of the outer value
    with pytest.raises(TruncationError):
        forward(1.0 - np.exp(-y), 1.0, np.exp(-y), np.linspace(0, 1, 33))


def test_inverse_linear_shear_closed_form():
    eta = np.linspace(0.0, 1.0, 257)
    prof = inverse(1.0 - eta, 2.0, eta)
    keep = slice(0, prof.y.size)
    assert np.max(np.abs(prof.y - (-np.log(1.0 - eta[keep])))) < 1e-12
    assert prof.u == pytest.approx(2.0 * eta[: prof.u.size])
    assert prof.eta_cut == pytest.approx(eta[-2])


def test_inverse_unit_shear():
    eta = np.linspace(0.0, 1.0, 65)
    prof = inverse(np.ones_like(eta), 3.0, eta)
    assert prof.y == pytest.approx(eta[: prof.y.size])
    assert prof.u == pytest.approx(3.0 * prof.y)


def test_inverse_rejects_interior_zero():
    eta = np.linspace(0.0, 1.0, 65)
    w = 1.0 - eta
    w[30] = 0.0
    with pytest.raises(InvertibilityError):
        inverse(w, 1.0, eta)


def test_round_trip_shear_layer():
    # acceptance-grade: forward then inverse reproduces u to 1e-4 at 256 nodes
    eta = np.linspace(0.0, 1.0, 256)
    _, u, dudy = shear_layer_samples(ue=1.0)
    w = forward(u, 1.0, dudy, eta)
    prof = inverse(w, 1.0, eta)
    err = np.max(np.abs(prof.u - (1.0 - np.exp(-prof.y))))
    assert err < 1e-4


def test_round_trip_second_order_in_eta():
    # tanh profile: w(eta) = 1 - eta^2, y(eta) = atanh(eta); the cell rule is
    # not exact here, so the error must shrink ~4x per grid halving.
    def rt_err(n):
        eta = np.linspace(0.0, 1.0, n)
        y = np.linspace(0.0, 20.0, 80001)
        u = np.tanh(y)
        w = forward(u, 1.0, 1.0 / np.cosh(y) ** 2, eta)
        prof = inverse(w, 1.0, eta)
        return np.max(np.abs(prof.u - np.tanh(prof.y)))

    e1, e2 = rt_err(65), rt_err(129)
    assert e1 / e2 > 3.0


def test_coefficients_affine():
    m = affine_model(2.0, -1.0, L=1.0, T=1.0)
    eta = np.linspace(0.0, 1.0, 11)
    a, b = coefficients(m, 0.2, 0.5, eta)
    assert a == pytest.approx(-(1.0 - eta**2))
    assert b == pytest.approx(-eta)


def test_coefficients_vanish_at_top_and_for_constant():
    m = decaying_linear_model(1.0)
    a, _ = coefficients(m, 0.1 * m.T, 0.3, 1.0)
    assert a == pytest.approx(0.0, abs=1e-14)
    mc = constant_model(1.0, L=1.0, T=1.0)
    a, b = coefficients(mc, 0.5, 0.5, 0.5)
    assert a == 0.0 and b == 0.0


@settings(max_examples=60, derandomize=True, deadline=None)
@given(t=st.floats(0.0, 1.0), xi=st.floats(0.0, 1.0), eta=st.floats(0.0, 1.0))
def test_coefficients_factored_identity(t, xi, eta):
    # A == (1 - eta) [(1 + eta) dUe/dx + (dUe/dt)/Ue] to roundoff
    m = decaying_linear_model(1.0, T=1.0)
    a, _ = coefficients(m, t, xi, eta)
    factored = (1.0 - eta) * ((1.0 + eta) * m.ue_x(t, xi) + m.ue_t(t, xi) / m.ue(t, xi))
    assert a == pytest.approx(factored, abs=1e-12)


def test_lyapunov_density_values():
    assert lyapunov_density(1.0, 0.0) == pytest.approx(1.0)
    assert lyapunov_density(0.0, 1.0) == pytest.approx(1.0)
    assert lyapunov_density(3.0, 4.0) == pytest.approx(0.2)
    assert lyapunov_density(0.0, 0.0) == np.inf


@settings(max_examples=100, derandomize=True, deadline=None)
@given(w=st.floats(1e-12, 1e6), eta=st.floats(1e-12, 1.0))
def test_lyapunov_density_bounds(w, eta):
    d = lyapunov_density(w, eta)
    assert d <= 1.0 / eta + 1e-12
    assert d <= 1.0 / w * (1.0 + 1e-12)


def test_grid_mappings():
    for mapping in ("uniform", "wall", "both"):
        g = CroccoGrid(n_xi=8, n_eta=33, L=2.0, mapping=mapping)
        eta = g.eta
        assert eta[0] == 0.0 and eta[-1] == pytest.approx(1.0)
        assert np.all(np.diff(eta) > 0.0)
    with pytest.raises(ConfigError):
        CroccoGrid(n_xi=8, n_eta=33, L=2.0, mapping="sideways")
