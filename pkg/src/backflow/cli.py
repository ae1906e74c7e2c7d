"""Command-line front end: config parsing, run orchestration, output writing.

Subcommands:
    run           march the selected solver(s), write diagnostics/snapshots
    blowup-bound  evaluate the admission integral and critical threshold
    validate      run the built-in oracle suite
    scenarios     list the shipped scenario names

Configs are flat ``key=value`` text files (UTF-8, ``#`` comments); unknown
keys are errors.  Outputs are bit-stable across repeated runs: fixed field
order, shortest-roundtrip float formatting, no timestamps.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, crocco_solver, diagnostics, physical, scenarios
from .crocco import CroccoGrid, ShearField, forward, inverse
from .errors import BackflowError, ConfigError
from .outer_flow import classify_gradient
from .physical import PhysicalGrid

_UNSET = None


@dataclass
class RunConfig:
    """Validated run settings; None fields fall back to scenario defaults."""

    scenario: str = "heat-oracle"
    L: float = _UNSET
    M: float = _UNSET
    alpha: float = _UNSET
    t0: float = _UNSET
    n_x: int = _UNSET
    n_y: int = _UNSET
    n_xi: int = _UNSET
    n_eta: int = _UNSET
    y_max: float = _UNSET
    stretch: float = _UNSET
    eta_mapping: str = _UNSET
    dt: float = _UNSET
    dt_crocco: float = _UNSET
    cfl: float = 1.0
    t_end: float = _UNSET
    solver: str = "both"
    snapshot_every: int = 0
    farfield_tol: float = physical.DEFAULT_FARFIELD_TOL
    bound_allowance: float = 0.05
    inequality_pass_fraction: float = 0.95
    crosscheck_tol: float = 0.02
    n_bisect: int = 20

    def __post_init__(self):
        for name in ("n_x", "n_y", "n_xi", "n_eta"):
            v = getattr(self, name)
            if v is not None and v < 8:
                raise ConfigError(f"{name} = {v} violates the minimum count 8")
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigError(f"cfl = {self.cfl} must lie in (0, 1]")
        for name in ("farfield_tol", "bound_allowance", "crosscheck_tol"):
            v = getattr(self, name)
            if v is not None and v <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.solver not in ("physical", "crocco", "both"):
            raise ConfigError(f"solver = {self.solver!r} (physical | crocco | both)")
        if self.scenario not in scenarios.SCENARIO_NAMES:
            raise ConfigError(
                f"scenario = {self.scenario!r}; choose from {', '.join(scenarios.SCENARIO_NAMES)}"
            )
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        if self.n_bisect < 1:
            raise ConfigError("n_bisect must be >= 1")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {"n_x", "n_y", "n_xi", "n_eta", "snapshot_every", "n_bisect"}
_STR_KEYS = {"scenario", "eta_mapping", "solver"}


def _parse_value(key: str, raw: str):
    if key in _STR_KEYS:
        return raw
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        kind = "integer" if key in _INT_KEYS else "number"
        raise ConfigError(f"key {key!r}: expected a {kind}, got {raw!r}") from exc


def parse_config(path, overrides=()) -> RunConfig:
    """Read a flat key=value config file and apply key=value overrides."""
    entries = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            entries[key] = raw
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        entries[key] = raw
    kwargs = {}
    for key, raw in entries.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _parse_value(key, raw)
    return RunConfig(**kwargs)


def _scenario_from_config(config: RunConfig):
    params = {}
    if config.scenario == "example4.1" and config.L is not None:
        params["L"] = config.L
    if config.scenario == "example4.2":
        if config.M is not None:
            params["M"] = config.M
        if config.alpha is not None:
            params["alpha"] = config.alpha
    if config.scenario == "heat-oracle" and config.t0 is not None:
        params["t0"] = config.t0
    return scenarios.build(config.scenario, **params)


def _resolved(config: RunConfig, scenario) -> dict:
    """Merge explicit config values over the scenario's grid defaults."""
    merged = dict(scenario.grid_defaults)
    for key in ("n_x", "n_y", "n_xi", "n_eta", "y_max", "stretch", "eta_mapping",
                "dt", "dt_crocco", "t_end"):
        v = getattr(config, key)
        if v is not None:
            merged[key] = v
    merged["dt"] = merged["dt"] * config.cfl
    merged["dt_crocco"] = merged["dt_crocco"] * config.cfl
    merged["t_end"] = min(merged["t_end"], scenario.model.T)
    return merged


def _threads() -> int:
    raw = os.environ.get("PRANDTL_THREADS", "")
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"PRANDTL_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _write_ndjson(path: Path, series, lemma_margin, ineq_margin):
    rows = []
    n = len(series)
    for i in range(n):
        rows.append(json.dumps({
            "t": _json_float(series.t[i]),
            "min_wall_shear": _json_float(series.min_wall_shear[i]),
            "argmin_x": _json_float(series.argmin_x[i]),
            "G_value": _json_float(series.g_value[i]),
            "lemma21_margin": _json_float(lemma_margin[i]) if lemma_margin is not None else None,
            "inequality_margin": _json_float(ineq_margin[i]) if ineq_margin is not None else None,
        }))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def _write_snapshot(path: Path, row_coords, col_coords, values, corner):
    table = np.empty((len(row_coords) + 1, len(col_coords) + 1))
    table[0, 0] = np.nan
    table[0, 1:] = col_coords
    table[1:, 0] = row_coords
    table[1:, 1:] = values
    header = corner + "," + ",".join(f"{c:.17g}" for c in col_coords)
    body = "\n".join(
        f"{row_coords[i]:.17g}," + ",".join(f"{v:.17g}" for v in values[i])
        for i in range(len(row_coords))
    )
    path.write_text(header + "\n" + body + "\n", encoding="utf-8")


def _sup_sq_of_inflow(fn, t_end, grid_eta) -> float:
    taus = np.linspace(0.0, t_end, 33)
    worst = 0.0
    for tau in taus:
        worst = max(worst, float(np.max(np.asarray(fn(tau, grid_eta)) ** 2)))
    return worst


class _SnapshotWriter:
    def __init__(self, out_dir: Path, every: int, kind: str, grid):
        self.dir = out_dir / "snapshots"
        self.every = every
        self.kind = kind
        self.grid = grid
        self.count = 0

    def __call__(self, state):
        if self.every == 0:
            return
        if self.count % self.every == 0:
            self.dir.mkdir(parents=True, exist_ok=True)
            if self.kind == "u":
                t = state.t
                self._write(f"u_{t:.12g}.csv", self.grid.x, self.grid.y, state.u, "x\\y")
            else:
                t = state.field.tau
                self._write(f"w_{t:.12g}.csv", self.grid.xi, self.grid.eta,
                            state.field.values, "xi\\eta")
        self.count += 1

    def _write(self, name, rows, cols, values, corner):
        _write_snapshot(self.dir / name, rows, cols, values, corner)


def _run_physical(scenario, res, config, out_dir):
    grid = PhysicalGrid(n_x=res["n_x"], n_y=res["n_y"], L=scenario.model.L,
                        y_max=res["y_max"], dt=res["dt"], stretch=res["stretch"])
    state = physical.init(grid, scenario.u0, scenario.model, farfield_tol=config.farfield_tol)
    observer = _SnapshotWriter(out_dir, config.snapshot_every, "u", grid)
    result = physical.run(state, grid, scenario.model, u1=scenario.u1,
                          t_end=res["t_end"], n_bisect=config.n_bisect, observer=observer)
    w_vals = physical.shear_profile(state, grid) / np.asarray(
        scenario.model.ue(0.0, grid.x))[:, None]
    result.w0_sup_sq = float(np.max(w_vals**2))
    result.w1_sup_sq = _phys_inflow_sup(scenario, grid, res["t_end"])
    return grid, result


def _phys_inflow_sup(scenario, grid, t_end) -> float:
    """Sup of the squared normalized inflow shear over the horizon."""
    taus = np.linspace(0.0, t_end, 33)
    worst = 0.0
    y = grid.y
    for tau in taus:
        u1 = np.asarray(scenario.u1(tau, y), dtype=float)
        ue = float(scenario.model.ue(tau, 0.0))
        y1, y2 = y[1], y[2]
        s_wall = (u1[1] * y2**2 - u1[2] * y1**2) / (y1 * y2 * (y2 - y1))
        hm = np.diff(y)[:-1]
        hp = np.diff(y)[1:]
        s_int = (hm**2 * u1[2:] - hp**2 * u1[:-2] + (hp**2 - hm**2) * u1[1:-1]) \
            / (hm * hp * (hm + hp))
        worst = max(worst, float(np.max(np.concatenate([[s_wall], s_int])**2)) / ue**2)
    return worst


def _run_crocco(scenario, res, config, out_dir):
    grid = CroccoGrid(n_xi=res["n_xi"], n_eta=res["n_eta"], L=scenario.model.L,
                      mapping=res["eta_mapping"])
    state = crocco_solver.init_crocco(scenario.w0, grid, scenario.model,
                                      res["dt_crocco"], w1=scenario.w1)
    observer = _SnapshotWriter(out_dir, config.snapshot_every, "w", grid)
    result = crocco_solver.run_crocco(state, t_end=res["t_end"],
                                      n_bisect=config.n_bisect, observer=observer)
    result.w0_sup_sq = float(np.max(np.asarray(
        scenario.w0(grid.xi[:, None], grid.eta[None, :]))**2))
    result.w1_sup_sq = _sup_sq_of_inflow(scenario.w1, res["t_end"], grid.eta)
    return grid, result


def _checks_for_run(scenario, config, result, adverse, kind):
    """Post-run theorem checks; returns (check dict, per-step margin arrays)."""
    series = result.series
    taus = np.asarray(series.t)
    sup_w = np.asarray(series.sup_w_sq)
    bound_report = diagnostics.check_shear_sup_bound(
        taus, sup_w, scenario.model,
        w0_sup_sq=result.w0_sup_sq, w1_sup_sq=result.w1_sup_sq,
        allowance=config.bound_allowance)
    lemma_margin = bound_report.bound - np.exp(-bound_report.n_factor * taus) * sup_w
    checks = {
        "shear_sup_bound": {
            "passed": bound_report.passed,
            "margin": bound_report.margin,
            "n_factor": bound_report.n_factor,
        },
    }
    ineq_margin = None
    if adverse:
        k = diagnostics.constants(scenario.model, scenario.w1, n_samples=17, n_quad=513)
        report = diagnostics.discrete_lyapunov_inequality(taus, np.asarray(series.g_value), k)
        margins = np.full(len(series), np.nan)
        n_m = report.margins.size
        if n_m:
            margins[:n_m] = report.margins
        ineq_margin = margins
        n_skip = min(10, report.n_checked)
        body = report.margins[:-n_skip] if n_skip else report.margins
        frac = float(np.mean(body >= 0.0)) if body.size else 1.0
        checks["lyapunov_inequality"] = {
            "passed": bool(frac >= config.inequality_pass_fraction),
            "fraction_passed_pre_event": frac,
            "n_checked": report.n_checked,
        }
    return checks, lemma_margin, ineq_margin


def cmd_run(config: RunConfig, out_dir) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = _scenario_from_config(config)
    res = _resolved(config, scenario)
    adverse = classify_gradient(scenario.model).classification == "adverse"

    jobs = []
    if config.solver in ("physical", "both"):
        jobs.append(("physical", _run_physical))
    if config.solver in ("crocco", "both"):
        jobs.append(("crocco", _run_crocco))
    results = {}
    if len(jobs) == 2 and _threads() >= 2:
        with ThreadPoolExecutor(max_workers=2) as pool:
            futs = {name: pool.submit(fn, scenario, res, config, out_dir) for name, fn in jobs}
            for name, fut in futs.items():
                results[name] = fut.result()
    else:
        for name, fn in jobs:
            results[name] = fn(scenario, res, config, out_dir)

    primary_kind = "physical" if "physical" in results else "crocco"
    grid, primary = results[primary_kind]

    all_checks = {}
    failed = False
    for name, (g, r) in results.items():
        checks, lemma_margin, ineq_margin = _checks_for_run(scenario, config, r, adverse, name)
        if adverse and name == "physical" and r.event is not None:
            shear0 = physical.wall_shear(
                physical.VelocityField(0.0, _initial_u(scenario, g), None), g)
            pos = diagnostics.check_interior_positivity(
                r.state, g, initial_wall_shear=shear0, at_event=True)
            checks["interior_positivity"] = {"passed": pos.passed, "phase": pos.phase,
                                             "reason": pos.reason}
        all_checks[name] = checks
        failed = failed or any(not c["passed"] for c in checks.values())
        if name == primary_kind:
            _write_ndjson(out_dir / "diagnostics.ndjson", r.series, lemma_margin, ineq_margin)

    cross = None
    if len(results) == 2:
        cross = _cross_validate(results["physical"], results["crocco"], config)
        if cross["checked"] and not cross["passed"]:
            failed = True

    event = primary.event
    if event is None and len(results) == 2 and results["crocco"][1].event is not None:
        event = results["crocco"][1].event
    if event is not None:
        (out_dir / "event.json").write_text(json.dumps({
            "t_star": _json_float(event.t_star),
            "x_star": _json_float(event.x_star),
            "wall_curvature": _json_float(event.wall_curvature),
            "source": event.source,
        }, indent=2) + "\n", encoding="utf-8")

    meta = {
        "config": _config_echo(config),
        "resolved": {k: (v if not isinstance(v, float) else _json_float(v))
                     for k, v in res.items()},
        "scenario": {"name": scenario.name,
                     "expected_outcome": scenario.expected_outcome,
                     "condition_lower": _json_float(scenario.condition_lower),
                     "c_star": _json_float(scenario.c_star),
                     "notes": scenario.notes},
        "events": {name: (None if r.event is None else {
            "t_star": _json_float(r.event.t_star),
            "x_star": _json_float(r.event.x_star),
            "wall_curvature": _json_float(r.event.wall_curvature),
            "source": r.event.source}) for name, (g, r) in results.items()},
        "checks": all_checks,
        "cross_validation": cross,
        "versions": {"backflow": __version__,
                     "numpy": np.__version__,
                     "python": ".".join(str(v) for v in sys.version_info[:3])},
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=False) + "\n",
                                       encoding="utf-8")
    return 1 if failed else 0


def _initial_u(scenario, grid):
    u = np.asarray(scenario.u0(grid.x[:, None], grid.y[None, :]), dtype=float)
    u[:, 0] = 0.0
    return u


def _config_echo(config: RunConfig) -> dict:
    out = {}
    for f in fields(RunConfig):
        v = getattr(config, f.name)
        out[f.name] = _json_float(v) if isinstance(v, float) else v
    return out


def _cross_validate(phys, croc, config) -> dict:
    pg, pr = phys
    cg, cr = croc
    tp = np.asarray(pr.series.t)
    tc = np.asarray(cr.series.t)
    t_events = [r.event.t_star for r in (pr, cr) if r.event is not None]
    window = 0.9 * min(t_events) if t_events else min(tp[-1], tc[-1])
    keep = tp <= window
    out = {"checked": False, "passed": True, "max_rel_diff": None,
           "t_star_rel_diff": None, "x_star_diff": None}
    if np.any(keep):
        idx = np.clip(np.searchsorted(tc, tp[keep]), 0, tc.size - 1)
        close = np.abs(tc[idx] - tp[keep]) <= 1e-6 * max(window, 1e-300)
        if np.any(close):
            sp = np.asarray(pr.series.min_wall_shear)[keep][close]
            sc = np.asarray(cr.series.min_wall_shear)[idx][close]
            scale = float(np.max(np.abs(sp)))
            if scale > 0:
                out["checked"] = True
                out["max_rel_diff"] = float(np.max(np.abs(sp - sc)) / scale)
                out["passed"] = out["max_rel_diff"] <= config.crosscheck_tol
    if pr.event is not None and cr.event is not None:
        out["t_star_rel_diff"] = abs(pr.event.t_star - cr.event.t_star) / pr.event.t_star
        out["x_star_diff"] = abs(pr.event.x_star - cr.event.x_star)
    return out


def cmd_blowup_bound(config: RunConfig, out_dir) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario = _scenario_from_config(config)
    res = _resolved(config, scenario)
    report = classify_gradient(scenario.model)
    if report.classification != "adverse":
        print(f"blowup-bound: adverse classification required "
              f"(model is {report.classification})")
        return 2
    k = diagnostics.constants(scenario.model, scenario.w1)
    cond = diagnostics.initial_lyapunov_value(
        scenario.u0, scenario.u0_dy, scenario.model.L, res["y_max"])
    c_star = diagnostics.critical_threshold(k, res["t_end"])
    ode = diagnostics.comparison_ode(cond.value, k, res["t_end"])
    verdict = "backflow-expected" if cond.value >= c_star else "condition not met"
    payload = {
        "scenario": scenario.name,
        "classification": report.classification,
        "lambda0": _json_float(k.lambda0),
        "lambda1": _json_float(k.lambda1),
        "lambda2": _json_float(k.lambda2),
        "condition_value": _json_float(cond.value),
        "condition_tail_estimate": _json_float(cond.tail_estimate),
        "condition_lower_bound": _json_float(scenario.condition_lower),
        "c_star": _json_float(c_star),
        "ode_blowup_time": _json_float(ode.blowup_time),
        "horizon": _json_float(res["t_end"]),
        "verdict": verdict,
    }
    (out_dir / "bound.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"scenario          {scenario.name}")
    print(f"classification    {report.classification}")
    print(f"lambda0/1/2       {k.lambda0:.6g} / {k.lambda1:.6g} / {k.lambda2:.6g}")
    print(f"G(0)              {cond.value:.6g}  (tail ~ {cond.tail_estimate:.2g})")
    print(f"C* (T={res['t_end']:g})    {c_star:.6g}")
    if ode.blowup_time is not None:
        print(f"bound blow-up at  {ode.blowup_time:.6g}")
    else:
        print("bound blow-up at  - (no blow-up before horizon)")
    print(f"verdict           {verdict}")
    return 0


def cmd_validate() -> int:
    """Built-in oracle suite; prints one pass/fail line per check."""
    failures = 0

    def check(name, value, tol):
        nonlocal failures
        ok = value < tol
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.3e} (tol {tol:g})")

    sc = scenarios.heat_oracle(0.05)
    grid = PhysicalGrid(n_x=16, n_y=257, L=1.0, y_max=8.0, dt=2e-4)
    state = physical.init(grid, sc.u0, sc.model)
    out = physical.run(state, grid, sc.model, u1=sc.u1, t_end=0.1, record_g=False)
    exact = sc.oracle["u"](out.state.t, grid.y[None, :])
    check("physical heat-oracle field error", float(np.max(np.abs(out.state.u - exact))), 2e-3)
    shear = physical.wall_shear(out.state, grid)
    exact_shear = sc.oracle["wall_shear"](out.state.t)
    check("physical heat-oracle wall shear error",
          float(np.max(np.abs(shear - exact_shear))), 2e-3)

    cg = CroccoGrid(n_xi=16, n_eta=257, L=1.0, mapping="both")
    cstate = crocco_solver.init_crocco(sc.w0, cg, sc.model, 1e-4, w1=sc.w1)
    cres = crocco_solver.run_crocco(cstate, t_end=0.1, record_g=False)
    cexact = sc.oracle["w"](cres.state.field.tau, cg.eta[None, :]) + 0.0 * cg.xi[:, None]
    check("crocco heat-oracle field error",
          float(np.max(np.abs(cres.state.field.values - cexact))), 1e-2)

    y = np.linspace(0.0, 40.0, 4097)
    u_prof = 1.0 - np.exp(-y)
    eta_nodes = np.linspace(0.0, 1.0, 257)
    w = forward(u_prof, 1.0, np.exp(-y), eta_nodes)
    prof = inverse(w, 1.0, eta_nodes)
    check("transform round trip", float(np.max(np.abs(prof.u - (1.0 - np.exp(-prof.y))))), 1e-4)

    g513 = CroccoGrid(n_xi=513, n_eta=513, L=1.0)
    gval = diagnostics.lyapunov_functional(ShearField(0.0, np.ones((513, 513)), g513), 1.0)
    check("functional closed form", abs(gval - 0.4 * math.log(1.0 + math.sqrt(2.0))), 1e-5)

    k = diagnostics.LyapunovConstants.from_bounds(0.0, 0.0, 1.0)
    ob = diagnostics.comparison_ode(1.0, k, 1.0, linear_coeff=0.0)
    check("comparison-ODE closed form", abs((ob.blowup_time or math.inf) - 0.5), 1e-4)

    if failures:
        print(f"{failures} check(s) failed")
        return 1
    print("all checks passed")
    return 0


def cmd_scenarios() -> int:
    lines = {
        "heat-oracle": "x-independent diffusion with exact similarity solution (t0=...)",
        "example4.1": "decaying linear outer flow, long interval (L=...)",
        "example4.2": "steady outer flow, slowly growing initial shear (M=..., alpha=...)",
        "favourable": "accelerating outer flow, no back flow expected",
    }
    for name in scenarios.SCENARIO_NAMES:
        print(f"{name:12s}  {lines[name]}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="backflow",
                                     description="boundary-layer back-flow simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "blowup-bound"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--scenario", default=None, help="scenario name")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="config override (repeatable)")
    sub.add_parser("validate")
    sub.add_parser("scenarios")
    args = parser.parse_args(argv)

    if args.command == "validate":
        return cmd_validate()
    if args.command == "scenarios":
        return cmd_scenarios()

    try:
        overrides = list(args.override)
        if args.scenario is not None:
            overrides.insert(0, f"scenario={args.scenario}")
        config = parse_config(args.config, overrides)
        if args.command == "run":
            return cmd_run(config, args.out)
        return cmd_blowup_bound(config, args.out)
    except BackflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
