import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backflow.crocco import CroccoGrid
from backflow.crocco_solver import (
    CroccoRunState,
    check_cfl,
    init_crocco,
    min_radicand,
    pde_residual,
    run_crocco,
    step_crocco,
    wall_closure,
    wall_shear_crocco,
)
from backflow.errors import ConfigError, DataError
from backflow.outer_flow import affine_model, constant_model
from backflow.scenarios import example_4_2, heat_oracle


def test_init_accepts_linear_shear():
    g = CroccoGrid(n_xi=16, n_eta=65, L=1.0)
    m = affine_model(2.0, -1.0, L=1.0, T=1.0)
    st = init_crocco(lambda xi, eta: 1.0 - eta + 0 * xi, g, m, 1e-5)
    assert st.field.values[:, -1] == pytest.approx(0.0)


def test_init_rejects_zero_data():
    g = CroccoGrid(n_xi=16, n_eta=65, L=1.0)
    m = constant_model(1.0, L=1.0, T=1.0)
    with pytest.raises(DataError):
        init_crocco(lambda xi, eta: 0.0 * xi * eta, g, m, 1e-5)


def test_init_rejects_nonzero_top_row():
    g = CroccoGrid(n_xi=16, n_eta=65, L=1.0)
    m = constant_model(1.0, L=1.0, T=1.0)
    with pytest.raises(DataError):
        init_crocco(lambda xi, eta: 1.0 - 0.9 * eta + 0 * xi, g, m, 1e-5)


def test_cfl_guard():
    g = CroccoGrid(n_xi=16, n_eta=65, L=1.0)
    m = constant_model(1.0, L=1.0, T=10.0)
    with pytest.raises(ConfigError):
        init_crocco(lambda xi, eta: 1.0 - eta + 0 * xi, g, m, dt=1.0)


def test_wall_closure_values():
    assert wall_closure([0.9, 1.0, 1.1], 0.0, 0.25) == (1.0, False)
    value, signaled = wall_closure([0.0, 1.0, 1.2], 1.0, 0.5)
    assert value == 0.0 and signaled
    value, signaled = wall_closure([0.0, 0.2, 0.3], 1.0, 0.01)
    assert not signaled
    assert value == pytest.approx(np.sqrt(0.02), rel=1e-12)


@settings(max_examples=80, derandomize=True, deadline=None)
@given(w1=st.floats(1e-6, 10.0), g=st.floats(-10.0, 10.0), deta=st.floats(1e-6, 0.5))
def test_wall_closure_consistency(w1, g, deta):
    value, signaled = wall_closure([0.0, w1], g, deta)
    radicand = w1 * w1 - 2.0 * deta * g
    if radicand <= 0.0:
        assert signaled and value == 0.0
    else:
        assert not signaled
        assert value == pytest.approx(np.sqrt(radicand))


def test_step_zero_dt_is_identity():
    g = CroccoGrid(n_xi=16, n_eta=65, L=1.0)
    m = constant_model(1.0, L=1.0, T=1.0)
    st = init_crocco(lambda xi, eta: 1.0 - eta + 0 * xi, g, m, 0.0)
    new, rep = step_crocco(st)
    assert np.array_equal(new.field.values, st.field.values)
    assert rep.max_residual == 0.0


def test_heat_march_matches_exact_decay():
    sc = heat_oracle(0.05)
    g = CroccoGrid(n_xi=16, n_eta=257, L=1.0, mapping="both")
    st = init_crocco(sc.w0, g, sc.model, 5e-5, w1=sc.w1)
    res = run_crocco(st, t_end=0.1, record_g=False)
    exact = sc.oracle["w"](res.state.field.tau, g.eta[None, :]) + 0.0 * g.xi[:, None]
    assert np.max(np.abs(res.state.field.values - exact)) < 5e-3
    assert res.event is None


def test_posteriori_residual_is_small():
    # One step of the steady affine model from the linear shear profile.
    # The linear profile violates the wall flux condition, so the corner
    # rows legitimately carry the O(1) incompatibility transient; away from
    # them the residual is set by the upwind truncation, O(dt + h).
    m = affine_model(2.0, -1.0, L=1.0, T=1.0)

    def residual_away_from_corner(n_eta, dt):
        g = CroccoGrid(n_xi=33, n_eta=n_eta, L=1.0)
        st = init_crocco(lambda xi, eta: 1.0 - eta + 0 * xi, g, m, dt)
        new, _ = step_crocco(st)
        res = np.abs(pde_residual(st, new))
        body = res[:, g.eta[1:-1] >= 0.03]  # res[:, j] sits at eta index j+1
        return float(np.max(body)), g.deta

    r1, h1 = residual_away_from_corner(129, 1e-5)
    r2, h2 = residual_away_from_corner(513, 2.5e-6)
    assert r1 < 5.0 * (1e-5 + h1)
    assert r2 < 5.0 * (2.5e-6 + h2)
    assert r2 < r1  # refining shrinks it


def test_wall_shear_and_radicand():
    m = affine_model(2.0, -1.0, L=1.0, T=1.0)
    g = CroccoGrid(n_xi=16, n_eta=65, L=1.0)
    st = init_crocco(lambda xi, eta: 1.0 - eta + 0 * xi, g, m, 1e-5)
    shear = wall_shear_crocco(st)
    assert shear == pytest.approx(m.ue(0.0, g.xi) * 1.0)
    # radicand of the initial data: w(deta)^2 - 2 deta g with g = 1
    expected = (1.0 - g.deta) ** 2 - 2.0 * g.deta
    assert min_radicand(st) == pytest.approx(expected)


def test_zero_flux_run_has_no_event():
    # constant outer flow: no wall flux, the radicand stays positive
    m = constant_model(1.0, L=1.0, T=1.0)
    g = CroccoGrid(n_xi=16, n_eta=129, L=1.0)
    st = init_crocco(lambda xi, eta: 1.0 - eta + 0 * xi, g, m, 1e-4)
    res = run_crocco(st, t_end=0.05, record_g=False)
    assert res.event is None
    assert min_radicand(res.state) > 0.0


def test_slow_growth_case_reaches_event_quickly():
    sc = example_4_2(50.0, 0.01, evaluate=False)
    d = sc.grid_defaults
    g = CroccoGrid(n_xi=32, n_eta=d["n_eta"], L=1.0, mapping=d["eta_mapping"])
    st = init_crocco(sc.w0, g, sc.model, d["dt_crocco"], w1=sc.w1)
    res = run_crocco(st, t_end=d["t_end"], record_g=False)
    assert res.event is not None
    assert 0.0 < res.event.t_star < d["t_end"]
    # thin initial shear separates on the scale of its retardation time
    t_scale = np.pi * 0.01**2 / 4.0
    assert res.event.t_star < 4.0 * t_scale


def test_positivity_maintained_on_shipped_runs(long_domain_runs):
    vals = long_domain_runs["cres"].state.field.values
    assert np.min(vals) >= 0.0


def test_monotone_flag_reflects_interior(long_domain_runs):
    # pre-event march on the stiff case never undershoots below the floor
    sc = long_domain_runs["scenario"]
    g = long_domain_runs["cgrid"]
    st = init_crocco(sc.w0, g, sc.model, sc.grid_defaults["dt_crocco"], w1=sc.w1)
    for _ in range(5):
        st, rep = step_crocco(st)
        assert rep.monotone_flag
