"""Record types shared by the two solvers and the diagnostics layer."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class StepReport:
    """Cheap per-step summary returned alongside the advanced state."""

    t_new: float
    max_residual: float  # max |update| / dt (0 for a zero-length step)
    min_wall_shear: float
    monotone_flag: bool


@dataclass
class DiagnosticSeries:
    """Per-step time series recorded during a run."""

    t: list = field(default_factory=list)
    min_wall_shear: list = field(default_factory=list)
    argmin_x: list = field(default_factory=list)
    g_value: list = field(default_factory=list)
    sup_w_sq: list = field(default_factory=list)
    # max_x |wall curvature - dP/dx| / scale(dP/dx); None when dP/dx ~ 0
    wall_compat_rel: list = field(default_factory=list)
    # min_x of the wall-closure radicand; None for physical-variable runs
    radicand_min: list = field(default_factory=list)

    def append(self, t, min_wall_shear, argmin_x, g_value, sup_w_sq,
               wall_compat_rel=None, radicand_min=None):
        self.t.append(float(t))
        self.min_wall_shear.append(float(min_wall_shear))
        self.argmin_x.append(float(argmin_x))
        self.g_value.append(float(g_value))
        self.sup_w_sq.append(float(sup_w_sq))
        self.wall_compat_rel.append(wall_compat_rel)
        self.radicand_min.append(radicand_min)

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class BackFlowEvent:
    """First wall point where the shear reaches zero.

    wall_curvature is the discrete second normal derivative of u at the
    event; for an honest event it stays positive and close to dP/dx there.
    """

    t_star: float
    x_star: float
    wall_curvature: float
    source: str  # "physical" | "crocco"


@dataclass
class RunResult:
    """Everything a run produces: series, optional event, final state."""

    series: DiagnosticSeries
    event: BackFlowEvent | None
    state: object
    # Suprema of the squared initial / inflow shear, for the bound check.
    w0_sup_sq: float = float("nan")
    w1_sup_sq: float = float("nan")


def bisect_crossing(state, dt, step_once, metric, n_bisect=20):
    """Refine the first crossing of ``metric <= 0`` inside (state.t, state.t+dt].

    Re-steps from ``state`` with halved steps, keeping the sub-interval that
    contains the sign change; after ``n_bisect`` halvings the upper bracket
    end is returned as the event state.
    """
    lo = state
    width = dt
    for _ in range(n_bisect):
        half = width / 2.0
        trial = step_once(lo, half)
        if metric(trial) <= 0.0:
            width = half
        else:
            lo = trial
            width = half
    event_state = step_once(lo, width)
    return event_state, lo.t + width
