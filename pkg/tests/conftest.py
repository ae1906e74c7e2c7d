import time

import numpy as np
import pytest

from backflow import scenarios
from backflow.crocco import CroccoGrid
from backflow.crocco_solver import init_crocco, run_crocco
from backflow.physical import PhysicalGrid, init, run


@pytest.fixture(scope="session")
def heat_scenario():
    return scenarios.heat_oracle(0.05)


@pytest.fixture(scope="session")
def heat_runs(heat_scenario):
    """Both solvers on the heat oracle at the stated acceptance resolution."""
    sc = heat_scenario
    d = sc.grid_defaults
    tic = time.perf_counter()
    pgrid = PhysicalGrid(n_x=d["n_x"], n_y=d["n_y"], L=sc.model.L,
                         y_max=d["y_max"], dt=d["dt"], stretch=d["stretch"])
    pres = run(init(pgrid, sc.u0, sc.model), pgrid, sc.model,
               u1=sc.u1, t_end=d["t_end"])
    t_phys = time.perf_counter() - tic
    tic = time.perf_counter()
    cgrid = CroccoGrid(n_xi=d["n_xi"], n_eta=d["n_eta"], L=sc.model.L,
                       mapping=d["eta_mapping"])
    cres = run_crocco(init_crocco(sc.w0, cgrid, sc.model, d["dt_crocco"], w1=sc.w1),
                      t_end=d["t_end"])
    t_croc = time.perf_counter() - tic
    return dict(scenario=sc, pgrid=pgrid, pres=pres, cgrid=cgrid, cres=cres,
                elapsed_physical=t_phys, elapsed_crocco=t_croc)


@pytest.fixture(scope="session")
def long_domain_scenario():
    return scenarios.example_4_1(3.0)


@pytest.fixture(scope="session")
def long_domain_runs(long_domain_scenario):
    """Both solvers on the L = 3 back-flow case at acceptance resolution.

    Several acceptance criteria interrogate the same pair of runs; doing it
    once keeps the suite fast.
    """
    sc = long_domain_scenario
    d = sc.grid_defaults
    tic = time.perf_counter()
    pgrid = PhysicalGrid(n_x=d["n_x"], n_y=d["n_y"], L=sc.model.L,
                         y_max=d["y_max"], dt=d["dt"], stretch=d["stretch"])
    pstate = init(pgrid, sc.u0, sc.model)
    initial_shear = np.asarray(sc.model.ue(0.0, pgrid.x))
    pres = run(pstate, pgrid, sc.model, u1=sc.u1, t_end=d["t_end"])

    cgrid = CroccoGrid(n_xi=d["n_xi"], n_eta=d["n_eta"], L=sc.model.L,
                       mapping=d["eta_mapping"])
    cstate = init_crocco(sc.w0, cgrid, sc.model, d["dt_crocco"], w1=sc.w1)
    cres = run_crocco(cstate, t_end=d["t_end"])
    elapsed = time.perf_counter() - tic
    return dict(scenario=sc, pgrid=pgrid, pres=pres, cgrid=cgrid, cres=cres,
                initial_shear=initial_shear, elapsed=elapsed)
