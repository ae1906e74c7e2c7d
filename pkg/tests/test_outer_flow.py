import numpy as np
import pytest

from backflow.errors import ConfigError, DomainError
from backflow.outer_flow import (
    affine_model,
    classify_gradient,
    constant_model,
    decaying_linear_model,
    eval_Ue,
    pressure_gradient,
)


def test_decaying_linear_at_origin():
    m = decaying_linear_model(1.0)
    assert eval_Ue(m, 0.0, 0.0) == pytest.approx(2.0)


def test_affine_value():
    m = affine_model(2.0, -1.0, L=1.0, T=1.0)
    assert eval_Ue(m, 0.37, 1.0) == pytest.approx(1.0)


def test_constant_value():
    m = constant_model(1.0, L=1.0, T=1.0)
    assert eval_Ue(m, 0.5, 0.25) == pytest.approx(1.0)


def test_pressure_gradient_affine():
    m = affine_model(2.0, -1.0, L=1.0, T=1.0)
    x = np.linspace(0.0, 1.0, 11)
    assert pressure_gradient(m, 0.3, x) == pytest.approx(2.0 - x)


def test_pressure_gradient_decaying_linear():
    L = 1.3
    m = decaying_linear_model(L)
    r = L**5
    t, x = 0.21 * m.T, 0.4
    expected = r * np.exp(-r * t) * (2 * L - x) + np.exp(-2 * r * t) * (2 * L - x)
    assert pressure_gradient(m, t, x) == pytest.approx(expected, rel=1e-13)


def test_pressure_gradient_constant_zero():
    m = constant_model(3.0, L=2.0, T=1.0)
    assert pressure_gradient(m, 0.1, 1.7) == 0.0


def test_domain_checks():
    m = affine_model(2.0, -1.0, L=1.0, T=1.0)
    with pytest.raises(DomainError):
        eval_Ue(m, -0.5, 0.5)
    with pytest.raises(DomainError):
        pressure_gradient(m, 0.5, 2.0)


def test_positivity_enforced_at_construction():
    with pytest.raises(ConfigError):
        affine_model(1.0, -1.0, L=2.0, T=1.0)  # hits zero at x = 1


def test_classification_adverse():
    rep = classify_gradient(decaying_linear_model(2.0))
    assert rep.classification == "adverse"
    assert rep.min_grad > 0.0


def test_classification_constant_favourable():
    rep = classify_gradient(constant_model(1.0, L=1.0, T=1.0))
    assert rep.classification == "favourable"
    assert rep.min_grad == rep.max_grad == 0.0


def test_classification_accelerating_favourable():
    rep = classify_gradient(affine_model(2.0, 1.0, L=1.0, T=1.0))
    assert rep.classification == "favourable"
    assert rep.max_grad <= 0.0


def test_classify_rejects_tiny_grids():
    with pytest.raises(ConfigError):
        classify_gradient(constant_model(1.0, L=1.0, T=1.0), nt=1, nx=5)


@pytest.mark.parametrize("model", [
    decaying_linear_model(1.7),
    affine_model(2.0, -1.0, L=1.0, T=1.0),
    affine_model(2.0, 1.0, L=1.0, T=2.0),
    constant_model(2.5, L=1.0, T=1.0),
])
def test_momentum_balance_identity(model):
    # dP/dx + dUe/dt + Ue dUe/dx = 0 holds exactly for every built-in form.
    ts = np.linspace(0.0, model.T, 13)[:, None]
    xs = np.linspace(0.0, model.L, 17)[None, :]
    res = model.dpdx(ts, xs) + model.ue_t(ts, xs) + model.ue(ts, xs) * model.ue_x(ts, xs)
    assert np.max(np.abs(res)) < 1e-12 * max(1.0, np.max(np.abs(model.dpdx(ts, xs))))


@pytest.mark.parametrize("model", [
    decaying_linear_model(1.7),
    affine_model(2.0, -1.0, L=1.0, T=1.0),
])
def test_derivatives_match_finite_differences(model):
    # centered differences of ue converge at second order to the hand-coded
    # derivatives: halving h cuts the error by ~4.
    t0, x0 = 0.4 * model.T, 0.6 * model.L

    def errs(h):
        dt_fd = (model.ue(t0 + h, x0) - model.ue(t0 - h, x0)) / (2 * h)
        dx_fd = (model.ue(t0, x0 + h) - model.ue(t0, x0 - h)) / (2 * h)
        return (abs(dt_fd - model.ue_t(t0, x0)), abs(dx_fd - model.ue_x(t0, x0)))

    h = 1e-3 * min(model.T, model.L)
    e1 = errs(h)
    e2 = errs(h / 2)
    scale = abs(model.ue(t0, x0))
    for c, f in zip(e1, e2):
        if c > 1e-9 * scale:  # below that the FD error is roundoff noise
            assert 4.0 * 0.8 <= c / f <= 4.0 * 1.2
