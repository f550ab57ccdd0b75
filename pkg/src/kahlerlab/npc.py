"""Comparison-geometry experiments: CAT(0) triangles, minimizing sequences,
Jacobi-field convexity and the first variation of distance.

Every check reports an explicit error budget; it passes when
``margin >= -budget``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, FlagDegenerate, PositivityError
from .flow import E_FLOOR, curve_energy
from .geodesic import (
    DistanceResult,
    PathGrid,
    SolveOptions,
    arc_fraction,
    continuation_solve,
    covariant_t_derivative,
    interpolate,
    measure_distance,
    solve_epsilon_geodesic,
    time_derivative,
)
from .grid import GridSpec, integrate, laplacian
from .kahler import density
from .report import ExperimentReport

CAT0_TOL = 5e-4
BUDGET_FLOOR = 1e-9
JACOBI_REL_TOL = 1e-6
END_PAIRING_REL_TOL = 1e-3

_MASK = (1 << 64) - 1


def splitmix64(state: int):
    """One step of the splitmix64 generator: returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _uniforms(seed: int, n: int):
    state = seed & _MASK
    out = np.empty(n)
    for i in range(n):
        state, z = splitmix64(state)
        out[i] = (z >> 11) * 2.0**-53 * 2.0 - 1.0
    return out


def random_potential(seed: int, amplitude: float, max_wavenumber: int, N: int = 32):
    """Seeded band-limited mean-zero potential with ``min(rho) >= 1/2``.

    The trigonometric sum is scaled to ``max|phi| = amplitude`` and then
    halved until the density bound holds.
    """
    grid = GridSpec(N)
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if not 1 <= max_wavenumber <= N // 4:
        raise ValueError(f"max_wavenumber must lie in [1, {N // 4}]")
    if amplitude == 0:
        return grid.zeros()
    K = max_wavenumber
    modes = [(kx, ky) for ky in range(K + 1) for kx in range(-K, K + 1) if ky > 0 or kx > 0]
    coef = _uniforms(seed, 2 * len(modes)).reshape(-1, 2)
    x, y = grid.coords()
    phi = grid.zeros()
    for (kx, ky), (a, b) in zip(modes, coef):
        arg = 2 * np.pi * (kx * x + ky * y)
        phi += a * np.cos(arg) + b * np.sin(arg)
    phi -= phi.mean()
    phi *= amplitude / np.abs(phi).max()
    while density(phi).min() < 0.5:
        phi *= 0.5
    return phi


# ------------------------------------------------------------------ CAT(0) triangles

@dataclass
class TriangleReport:
    dAB: float
    dAC: float
    dBC: float
    dAP: float
    barAB: float
    barAC: float
    barBC: float
    barAP: float
    lam: float
    arc_lambda: float  # arc-length fraction of the t = lambda point on the BC path
    budget: float
    provenance: dict = field(default_factory=dict)

    @property
    def lhs(self) -> float:
        return self.dAP**2

    @property
    def rhs(self) -> float:
        lam = self.lam
        return (1 - lam) * self.dAB**2 + lam * self.dAC**2 - lam * (1 - lam) * self.dBC**2

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= -self.budget

    def to_report(self, inputs=None) -> ExperimentReport:
        q = {k: getattr(self, k) for k in ("dAB", "dAC", "dBC", "dAP", "barAB", "barAC", "barBC", "barAP",
                                           "arc_lambda", "lhs", "rhs")}
        inputs = {"lambda": self.lam, **self.provenance, **(inputs or {})}
        return ExperimentReport("triangle", inputs, q, self.budget, self.margin)


def triangle_budget(d: dict, bars: dict, lam: float, arc_lambda: float, eps: float) -> float:
    """First-order propagation of the distance error bars into the margin, plus
    the offset of the t = lambda point from the arc-length lambda point, plus
    the sup-norm gap eps/8 between the eps-geodesic and its limit at P."""
    prop = (2 * d["AP"] * bars["AP"] + 2 * (1 - lam) * d["AB"] * bars["AB"]
            + 2 * lam * d["AC"] * bars["AC"] + 2 * lam * (1 - lam) * d["BC"] * bars["BC"])
    param = 2 * d["AP"] * abs(arc_lambda - lam) * d["BC"]
    vertex = 2 * d["AP"] * eps / 8.0
    return prop + param + vertex + BUDGET_FLOOR


def _leg(name, a, b, opts, init=None) -> DistanceResult:
    try:
        return measure_distance(a, b, opts, init=init)
    except (PositivityError, ConvergenceError) as exc:
        exc.args = (f"leg {name}: {exc.args[0]}",) + exc.args[1:]
        raise


def cat0_sweep(A, B, C, lams, opts: SolveOptions | None = None):
    """Comparison check for several interpolation parameters sharing the three sides."""
    opts = opts or SolveOptions()
    bc = _leg("BC", B, C, opts)
    ab = _leg("AB", A, B, opts)
    ac = _leg("AC", A, C, opts)
    N = GridSpec.of(np.asarray(A)).N
    prov = {"N": N, "M": opts.time_steps(N), "eps": opts.eps_target, "cat0_tol": CAT0_TOL}
    out = []
    for lam in lams:
        P = interpolate(bc.path, lam)
        near = ab if lam <= 0.5 else ac
        ap = _leg("AP", A, P, opts, init=near.path if near.length > 0 else None)
        arc = arc_fraction(bc.path, lam, bc.diagnostics) if bc.length > 0 else lam
        d = {"AB": ab.length, "AC": ac.length, "BC": bc.length, "AP": ap.length}
        bars = {"AB": ab.error_bar, "AC": ac.error_bar, "BC": bc.error_bar, "AP": ap.error_bar}
        out.append(TriangleReport(
            dAB=ab.length, dAC=ac.length, dBC=bc.length, dAP=ap.length,
            barAB=ab.error_bar, barAC=ac.error_bar, barBC=bc.error_bar, barAP=ap.error_bar,
            lam=float(lam), arc_lambda=arc, budget=triangle_budget(d, bars, lam, arc, opts.eps_target),
            provenance=prov,
        ))
    return out


def cat0_check(A, B, C, lam: float, opts: SolveOptions | None = None) -> TriangleReport:
    return cat0_sweep(A, B, C, [lam], opts)[0]


# ------------------------------------------------------------------ minimizing sequences

def _arc_point(curve, frac: float):
    """Point at a given fraction of the discrete length along a sampled curve."""
    E, L = curve_energy(curve)
    K = curve.shape[0] - 1
    if L == 0.0:
        return curve[0].copy()
    root = np.sqrt(E)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (root[:-1] + root[1:]) / K)]) / L
    tau = float(np.interp(frac, cum, np.linspace(0.0, 1.0, K + 1)))
    x = tau * K
    k = min(int(np.floor(x)), K - 1)
    w = x - k
    return (1 - w) * curve[k] + w * curve[k + 1]


def minimizing_sequence_check(phi0, phi1, perturbation_scale: float, seed: int,
                              opts: SolveOptions | None = None, max_wavenumber: int = 1) -> ExperimentReport:
    """Perturb the geodesic, then compare the midpoint deviation with ``sqrt((l_i^2 - l^2)/4)``.

    Midpoints are taken at half the discrete arc length, which is what a
    constant-speed reparametrization would put at ``t = 1/2``.
    """
    opts = opts or SolveOptions()
    geo = measure_distance(phi0, phi1, opts)
    path = geo.path
    N = path.grid.N
    l = geo.length
    noise = random_potential(seed, perturbation_scale, max_wavenumber, N)
    t = path.t[:, None, None]
    curve = path.slices + np.sin(np.pi * t) * noise[None]
    if density(curve).min() <= opts.positivity_margin:
        raise ValueError("perturbed curve leaves H; lower the perturbation scale")
    _, l_i = curve_energy(curve)
    mid_i = _arc_point(curve, 0.5)
    mid = _arc_point(path.slices, 0.5)
    md = measure_distance(mid_i, mid, opts)
    bound = float(np.sqrt(max(l_i**2 - l**2, 0.0) / 4.0))
    # bars of the two distances, carried through the square root, plus the
    # sup-norm offset eps/8 of the eps-geodesic midpoint from the limiting one
    budget = md.error_bar + float(np.sqrt(l * geo.error_bar / 2.0)) + path.eps / 8.0 + BUDGET_FLOOR
    return ExperimentReport(
        experiment="minseq",
        inputs={"perturbation_scale": perturbation_scale, "seed": seed, "max_wavenumber": max_wavenumber,
                "N": N, "M": path.M, "eps": path.eps},
        quantities={"l": l, "l_bar": geo.error_bar, "l_i": l_i, "midpoint_distance": md.length,
                    "midpoint_bar": md.error_bar, "bound": bound,
                    "length_excess": l_i - l, "length_ok": bool(l_i >= l - geo.error_bar)},
        budget=budget,
        margin=bound - md.length,
    )


# ------------------------------------------------------------------ Jacobi fields

@dataclass
class JacobiReport:
    t: np.ndarray
    norm: np.ndarray  # |Y|(t_k)
    second_diff: np.ndarray  # undivided second differences of |Y| at interior nodes
    end_pairing: float  # <Y, D_t Y> at t = 1
    end_norm: float  # <Y, Y> at t = 1
    jacobi_tol: float

    @property
    def convexity_margin(self) -> float:
        return float(self.second_diff.min())

    @property
    def end_ratio(self) -> float:
        return self.end_pairing / self.end_norm

    @property
    def convex(self) -> bool:
        return self.convexity_margin >= -self.jacobi_tol

    @property
    def end_ok(self) -> bool:
        return self.end_pairing >= self.end_norm * (1 - END_PAIRING_REL_TOL)

    @property
    def passed(self) -> bool:
        return self.convex and self.end_ok

    def to_report(self, inputs=None) -> ExperimentReport:
        # margin in units of each check's own tolerance, budget 1
        m_conv = self.convexity_margin / self.jacobi_tol
        m_end = (self.end_ratio - 1.0) / END_PAIRING_REL_TOL
        return ExperimentReport(
            "jacobi", inputs or {},
            {"t": self.t, "norm": self.norm, "second_diff": self.second_diff,
             "end_pairing": self.end_pairing, "end_norm": self.end_norm, "jacobi_tol": self.jacobi_tol,
             "convexity_margin": self.convexity_margin, "end_ratio": self.end_ratio},
            budget=1.0, margin=min(m_conv, m_end),
        )


def jacobi_experiment(P, Q_curve, s_index: int, delta_s_index: int, eps: float,
                      opts: SolveOptions | None = None, s_step: float | None = None,
                      e_floor: float = E_FLOOR) -> JacobiReport:
    """Jacobi field of the family of eps-geodesics from ``P`` to ``Q(s)`` by central differences in s."""
    opts = replace(opts or SolveOptions(), eps_target=eps, eps_start=max(eps, (opts or SolveOptions()).eps_start))
    Q = [np.asarray(q, dtype=float) for q in Q_curve]
    if len(Q) < 3:
        raise ValueError("Q_curve needs at least 3 entries")
    lo, hi = s_index - delta_s_index, s_index + delta_s_index
    if delta_s_index < 1 or lo < 0 or hi >= len(Q):
        raise ValueError("s_index +- delta_s_index out of range")
    s_step = s_step if s_step is not None else 1.0 / (len(Q) - 1)
    mid, _ = continuation_solve(P, Q[s_index], opts)
    minus, _ = solve_epsilon_geodesic(P, Q[lo], eps, opts, init=mid)
    plus, _ = solve_epsilon_geodesic(P, Q[hi], eps, opts, init=mid)
    Y = (plus.slices - minus.slices) / (2 * delta_s_index * s_step)
    Yp = covariant_t_derivative(Y, mid)
    rho = density(mid.slices)
    h2 = (1.0 / mid.grid.N) ** 2
    norm_sq = h2 * np.sum(Y * Y * rho, axis=(1, 2))
    norm = np.sqrt(np.maximum(norm_sq, 0.0))
    if norm[-1] ** 2 < e_floor:
        raise FlagDegenerate(f"|Y|(1)^2 = {norm[-1] ** 2:.2e} below floor {e_floor:g}")
    second = norm[2:] - 2 * norm[1:-1] + norm[:-2]
    return JacobiReport(
        t=mid.t, norm=norm, second_diff=second,
        end_pairing=float(h2 * np.sum(Y[-1] * Yp[-1] * rho[-1])),
        end_norm=float(norm_sq[-1]),
        jacobi_tol=JACOBI_REL_TOL * float(norm.max()),
    )


# ------------------------------------------------------------------ first variation of distance

def first_variation(path: PathGrid, energy, Y0, Y1) -> tuple[float, float]:
    """Endpoint terms ``<X, Y> / sqrt(E)`` at t = 0 and t = 1 of a solved path."""
    X = time_derivative(path.slices)
    term0 = integrate(X[0] * Y0, density(path.slices[0])) / np.sqrt(energy[0])
    term1 = integrate(X[-1] * Y1, density(path.slices[-1])) / np.sqrt(energy[-1])
    return float(term0), float(term1)


def distance_derivative_check(phi0_curve, phi1_curve, eps: float, delta_s: float,
                              opts: SolveOptions | None = None, rel_tol: float = 1e-2) -> ExperimentReport:
    """Analytic first variation of the distance against a centered difference of re-solved lengths.

    The curves are sampled at ``s = (j - c) * delta_s`` with ``c`` the middle index.
    On an eps-geodesic the endpoint formula carries an O(eps) bias, so the
    compared value is its extrapolation to eps -> 0 from the levels eps, 2 eps
    and 4 eps (quadratic in eps); the raw value is reported alongside.
    """
    base = opts or SolveOptions()
    opts = replace(base, eps_target=eps, eps_start=max(eps, base.eps_start))
    c0 = [np.asarray(q, dtype=float) for q in phi0_curve]
    c1 = [np.asarray(q, dtype=float) for q in phi1_curve]
    if len(c0) < 3 or len(c1) < 3 or len(c0) != len(c1):
        raise ValueError("need two curves of equal length >= 3")
    c = len(c0) // 2
    Y0 = (c0[c + 1] - c0[c - 1]) / (2 * delta_s)
    Y1 = (c1[c + 1] - c1[c - 1]) / (2 * delta_s)

    if np.array_equal(c0[c], c1[c]):
        raise ValueError("endpoints coincide at s = 0; the distance is not differentiable there")
    path, diag = continuation_solve(c0[c], c1[c], opts)
    term0, term1 = first_variation(path, diag.energy, Y0, Y1)
    raw = term1 - term0
    levels = [raw]
    for k in (2, 4):
        pk, dk = solve_epsilon_geodesic(c0[c], c1[c], k * eps, opts, init=path)
        a0, a1 = first_variation(pk, dk.energy, Y0, Y1)
        levels.append(a1 - a0)
    analytic = (8 * levels[0] - 6 * levels[1] + levels[2]) / 3

    def length_at(j):
        if np.array_equal(c0[j], c1[j]):
            return 0.0
        _, d = solve_epsilon_geodesic(c0[j], c1[j], eps, opts, init=path)
        return d.length

    fd = (length_at(c + 1) - length_at(c - 1)) / (2 * delta_s)
    scale = max(abs(fd), abs(analytic))
    gap = abs(analytic - fd) / scale if scale > 1e-12 else abs(analytic - fd)
    return ExperimentReport(
        experiment="derivcheck",
        inputs={"eps": eps, "delta_s": delta_s, "N": path.grid.N, "M": path.M, "rel_tol": rel_tol},
        quantities={"analytic": analytic, "analytic_raw": raw, "analytic_levels": levels, "finite_difference": fd,
                    "term_t1": term1, "term_t0": term0, "relative_gap": gap, "length": diag.length},
        budget=rel_tol,
        margin=-gap,
    )
