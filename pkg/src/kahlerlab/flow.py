"""Calabi flow ``d phi / ds = R - R_bar`` and the first variation of length under it."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import FlowInvariantError, PositivityError, StepError
from .geodesic import SolveOptions, length_from_energy, measure_distance, time_derivative
from .grid import integrate, laplacian, solve_biharmonic_shift
from .kahler import (
    POSITIVITY_MARGIN,
    MetricState,
    calabi_energy,
    k_energy,
    lichnerowicz_norm_sq,
    make_metric,
)
from .report import ExperimentReport

E_FLOOR = 1e-14
FLOW_MONO_TOL = 1e-9

# R = -lap(log rho)/rho is twice the Kaehler-normalized scalar curvature, so the
# flow runs at twice Kaehler speed and dL/ds carries this factor.
CURVATURE_SCALE = 2.0


def flow_rhs(m: MetricState):
    return m.R - m.R_bar


def stabilization(min_rho: float) -> float:
    """Coefficient of the implicit bi-Laplacian.

    Frozen-coefficient analysis: the flow linearizes to ``-lap^2 / (2 rho^2)``,
    and the extrapolated step damps stiff modes only while that coefficient
    stays below 1.5 times the implicit one. Equals 1/2 (the flat value)
    whenever ``min_rho >= sqrt(2/3)``.
    """
    return max(0.5, 1.0 / (3.0 * min_rho**2))


def imex_euler_step(phi, ds: float, positivity_margin: float = POSITIVITY_MARGIN, a: float = 0.5):
    """Implicit ``a * lap^2``, explicit nonlinear remainder, first order."""
    m = make_metric(phi, positivity_margin)
    explicit = flow_rhs(m) + a * laplacian(laplacian(phi))
    return solve_biharmonic_shift(phi + ds * explicit, a * ds)


def flow_step(phi, ds: float, positivity_margin: float = POSITIVITY_MARGIN):
    """One step of the flow: two half IMEX-Euler steps extrapolated against one full step.

    Second order in ``ds``; the implicit coefficient is ``stabilization(min rho)``
    evaluated once at the start of the step.
    """
    if not ds > 0:
        raise ValueError("ds must be positive")
    phi = np.asarray(phi, dtype=float)
    a = stabilization(make_metric(phi, positivity_margin).min_rho)
    try:
        full = imex_euler_step(phi, ds, positivity_margin, a)
        half = imex_euler_step(imex_euler_step(phi, 0.5 * ds, positivity_margin, a), 0.5 * ds, positivity_margin, a)
    except PositivityError as exc:
        raise PositivityError(f"flow substep left H (ds={ds:g} too large?)", iterate=phi) from exc
    out = 2.0 * half - full
    if not np.all(np.isfinite(out)):
        raise StepError("flow step produced non-finite values")
    make_metric(out, positivity_margin)
    return out


def scheme_symbol(ds: float, sigma):
    """Amplification of a flat Laplacian eigenmode (eigenvalue ``-sigma``) per ``flow_step``."""
    x = ds * 0.5 * np.asarray(sigma) ** 2
    return 2.0 / (1.0 + 0.5 * x) ** 2 - 1.0 / (1.0 + x)


@dataclass
class FlowTrajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    k_energy: list = field(default_factory=list)
    calabi_energy: list = field(default_factory=list)
    min_rho: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "k_energy", "calabi_energy", "min_rho"])
            for row in zip(self.times, self.k_energy, self.calabi_energy, self.min_rho):
                w.writerow([repr(float(v)) for v in row])


def run_flow(phi, ds: float, steps: int, sample_every: int = 1, flow_mono_tol: float = FLOW_MONO_TOL,
             quad_steps: int = 64, with_k_energy: bool = True) -> FlowTrajectory:
    """Integrate ``steps`` flow steps, recording diagnostics every ``sample_every`` steps.

    Raises ``FlowInvariantError`` if the Calabi energy or the K-energy rises by
    more than ``flow_mono_tol`` between samples.
    """
    if steps < 0 or sample_every < 1:
        raise ValueError("steps >= 0 and sample_every >= 1 required")
    traj = FlowTrajectory()
    phi = np.asarray(phi, dtype=float).copy()

    def record(s, state):
        m = make_metric(state)
        traj.times.append(s)
        traj.states.append(state)
        traj.calabi_energy.append(calabi_energy(m))
        traj.min_rho.append(m.min_rho)
        traj.k_energy.append(k_energy(state, quad_steps) if with_k_energy else float("nan"))
        if len(traj.times) > 1:
            if traj.calabi_energy[-1] > traj.calabi_energy[-2] + flow_mono_tol:
                raise FlowInvariantError(f"Calabi energy increased at s={s:g}")
            if with_k_energy and traj.k_energy[-1] > traj.k_energy[-2] + flow_mono_tol:
                raise FlowInvariantError(f"K-energy increased at s={s:g}")

    record(0.0, phi)
    for n in range(1, steps + 1):
        try:
            phi = flow_step(phi, ds)
        except (PositivityError, StepError) as exc:
            exc.args = (f"{exc.args[0]} [at s={n * ds:g}]",)
            raise
        if n % sample_every == 0 or n == steps:
            record(n * ds, phi)
    return traj


# ------------------------------------------------------------------ curves under the flow

def curve_energy(curve):
    """Energy element ``E(t_k)`` and discrete length of a curve of potentials."""
    curve = np.asarray(curve, dtype=float)
    phi_t = time_derivative(curve)
    rho = 1.0 + 0.5 * laplacian(curve)
    h2 = (1.0 / curve.shape[-1]) ** 2
    E = np.maximum(h2 * np.sum(phi_t**2 * rho, axis=(1, 2)), 0.0)
    return E, length_from_energy(E)


def curve_length(curve) -> float:
    return curve_energy(curve)[1]


def length_derivative(curve, e_floor: float = E_FLOOR) -> float:
    """Analytic ``dL/ds`` of a curve under the flow.

    ``-c * int_0^1 ||D phi_t||^2 / sqrt(E(t)) dt`` with ``c = CURVATURE_SCALE``;
    slices with ``E < e_floor`` contribute zero.
    """
    curve = np.asarray(curve, dtype=float)
    K = curve.shape[0] - 1
    if K < 2:
        raise ValueError("need at least 3 slices")
    phi_t = time_derivative(curve)
    E, _ = curve_energy(curve)
    vals = np.zeros(K + 1)
    for k in range(K + 1):
        if E[k] < e_floor:
            continue
        m = make_metric(curve[k])
        vals[k] = lichnerowicz_norm_sq(phi_t[k], m) / np.sqrt(E[k])
    return float(-CURVATURE_SCALE * 0.5 * np.sum(vals[:-1] + vals[1:]) / K)


@dataclass
class CurveUnderFlow:
    s_values: list
    curves: list
    lengths: list
    derivatives: list


def flow_curve(curve, ds: float, steps: int, sample_every: int = 1, flow_mono_tol: float = FLOW_MONO_TOL,
               keep_curves: bool = True) -> CurveUnderFlow:
    curve = np.array(curve, dtype=float)
    out = CurveUnderFlow([], [], [], [])

    def record(s, c):
        out.s_values.append(s)
        out.curves.append(c.copy() if keep_curves else None)
        out.lengths.append(curve_length(c))
        out.derivatives.append(length_derivative(c))
        if len(out.lengths) > 1 and out.lengths[-1] > out.lengths[-2] + flow_mono_tol:
            raise FlowInvariantError(f"curve length increased at s={s:g}")

    record(0.0, curve)
    for n in range(1, steps + 1):
        curve = np.stack([flow_step(c, ds) for c in curve])
        if n % sample_every == 0 or n == steps:
            record(n * ds, curve)
    return out


def contraction_experiment(phi0, phi1, ds: float, steps: int, sample_every: int,
                           opts: SolveOptions | None = None, inputs: dict | None = None) -> ExperimentReport:
    """Flow both endpoints and track their distance at every sample."""
    opts = opts or SolveOptions()
    a = np.asarray(phi0, dtype=float)
    b = np.asarray(phi1, dtype=float)
    s_list, d_list, bars = [], [], []
    init = None
    res, last = None, None
    for n in range(steps + 1):
        if n:
            a = flow_step(a, ds)
            b = flow_step(b, ds)
        if n % sample_every == 0:
            if res is not None and np.array_equal(a, last[0]) and np.array_equal(b, last[1]):
                pass  # endpoints did not move: the distance is the same number
            else:
                res = measure_distance(a, b, opts, init=init)
                last = (a, b)
            if res.length > 0:
                init = res.path
            s_list.append(n * ds)
            d_list.append(res.length)
            bars.append(res.error_bar)
    increases = [d_list[i] - d_list[i - 1] for i in range(1, len(d_list))]
    # a rise counts against the check only beyond the larger of the two bars
    excess = [inc - max(bars[i], bars[i + 1]) for i, inc in enumerate(increases)]
    budget_floor = 1e-6
    worst = max(excess, default=-np.inf)
    margin = -worst if np.isfinite(worst) else 0.0
    return ExperimentReport(
        experiment="contract",
        inputs={"ds": ds, "steps": steps, "sample_every": sample_every, "N": int(a.shape[-1]),
                "M": opts.time_steps(a.shape[-1]), "eps": opts.eps_target, **(inputs or {})},
        quantities={"s": s_list, "distance": d_list, "error_bar": bars,
                    "max_increase": max(increases, default=0.0)},
        budget=budget_floor,
        margin=margin,
    )


def volume(phi) -> float:
    return integrate(1.0 + 0.5 * laplacian(phi))
