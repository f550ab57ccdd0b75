"""Acceptance criteria as runnable checks, shared by the CLI ``verify`` tiers and the test suite."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .flow import contraction_experiment, flow_curve, flow_step, run_flow, scheme_symbol
from .geodesic import SolveOptions, continuation_solve, measure_distance, solve_epsilon_geodesic
from .grid import GridSpec, integrate, laplacian, laplacian_symbol
from .kahler import (
    curvature_pairing,
    lichnerowicz,
    make_metric,
)
from .npc import (
    CAT0_TOL,
    cat0_check,
    cat0_sweep,
    distance_derivative_check,
    jacobi_experiment,
    minimizing_sequence_check,
    random_potential,
)


@dataclass
class CheckResult:
    criterion: str
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.criterion} {self.name} ({self.seconds:.1f}s)"


def _timed(criterion, name, fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return CheckResult(criterion, name, bool(passed), detail, time.perf_counter() - t0)


# ------------------------------------------------------------------ seeded inputs

def triangle_vertices(seed: int, amplitude: float = 0.01, max_wavenumber: int = 2, N: int = 32):
    return tuple(random_potential(3 * seed + k, amplitude, max_wavenumber, N) for k in (1, 2, 3))


def random_curve(seed: int, K: int = 16, amplitude: float = 0.004, N: int = 32):
    """``A + t (B - A) + t (1 - t) C`` sampled at K + 1 points."""
    A, B, C = (random_potential(7 * seed + k, amplitude, 1, N) for k in (1, 2, 3))
    t = np.linspace(0.0, 1.0, K + 1)[:, None, None]
    return A + t * (B - A) + t * (1 - t) * C


def jacobi_family(seed: int, N: int = 32, n_s: int = 5):
    """Base point P and a straight line of far endpoints ``Q(s)``, s in [-1, 1]."""
    P = random_potential(100 + seed, 0.01, 2, N)
    base = random_potential(200 + seed, 0.01, 2, N)
    direction = random_potential(300 + seed, 0.01, 2, N)
    s = np.linspace(-1.0, 1.0, n_s)
    return P, [base + si * direction for si in s], float(s[1] - s[0])


def endpoint_motion(seed: int, delta_s: float, N: int = 32):
    """Two well-separated wavenumber-1 endpoints, each moving along a small random direction."""
    a = random_potential(10 + seed, 1.0, 1, N)
    b = random_potential(20 + seed, 1.0, 1, N)
    va = random_potential(30 + seed, 0.01, 1, N)
    vb = random_potential(40 + seed, 0.01, 1, N)
    s = (-delta_s, 0.0, delta_s)
    return [a + x * va for x in s], [b + x * vb for x in s]


# ------------------------------------------------------------------ criteria

def closed_form_geodesics(N: int = 16, M: int = 16):
    """Flat and constant endpoints reproduce the closed-form eps-geodesics; distance(0, c) = |c|."""
    g = GridSpec(N)
    opts = SolveOptions(M=M)
    t = np.linspace(0.0, 1.0, M + 1)[:, None, None]
    errs = {}
    for eps in (0.5, 0.1, 1e-3):
        p, _ = solve_epsilon_geodesic(g.zeros(), g.zeros(), eps, opts)
        errs[f"flat eps={eps:g}"] = float(np.abs(p.slices - 0.5 * eps * t * (t - 1)).max())
        for c in (0.3, -0.2):
            p, _ = solve_epsilon_geodesic(g.zeros(), g.zeros() + c, eps, opts)
            exact = c * t + 0.5 * eps * t * (t - 1)
            errs[f"const c={c:g} eps={eps:g}"] = float(np.abs(p.slices - exact).max())
    dist = {}
    for c in (0.3, -0.2, 1e-2):
        res = measure_distance(g.zeros(), g.zeros() + c, opts)
        dist[c] = abs(res.length - abs(c))
    ok = max(errs.values()) <= 1e-8 and max(dist.values()) <= 1e-6
    return ok, {"max_path_error": max(errs.values()), "max_distance_error": max(dist.values())}


def energy_spread_order(N: int = 32, M: int = 32, levels=(8e-3, 4e-3, 2e-3, 1e-3)):
    """Energy-element spread shrinks at least like eps^0.8 as eps halves."""
    g = GridSpec(N)
    x, _ = g.coords()
    phi1 = 0.01 * np.cos(2 * np.pi * x)
    opts = SolveOptions(M=M, eps_target=levels[0])
    path, diag = continuation_solve(g.zeros(), phi1, opts)
    spreads = [diag.energy_spread]
    for eps in levels[1:]:
        path, diag = solve_epsilon_geodesic(g.zeros(), phi1, eps, opts, init=path)
        spreads.append(diag.energy_spread)
    ratios = [b / a for a, b in zip(spreads, spreads[1:])]
    return max(ratios) <= 0.6, {"levels": list(levels), "spreads": spreads, "ratios": ratios}


def cat0_triangles(n_triangles: int = 20, lams=(0.25, 0.5, 0.75), N: int = 32, M: int = 32, eps: float = 1e-3,
                   cat0_tol: float = CAT0_TOL):
    opts = SolveOptions(M=M, eps_target=eps)
    worst, max_budget, failures = np.inf, 0.0, []
    for seed in range(n_triangles):
        A, B, C = triangle_vertices(seed, N=N)
        for r in cat0_sweep(A, B, C, lams, opts):
            worst = min(worst, r.margin + r.budget)
            max_budget = max(max_budget, r.budget)
            if not r.passed or r.budget > cat0_tol:
                failures.append((seed, r.lam, r.margin, r.budget))
    # equality cases
    A, B, _ = triangle_vertices(n_triangles, N=N)
    g = GridSpec(N)
    eq = [cat0_check(A, B, B, 0.5, opts), cat0_check(g.zeros(), g.zeros() + 0.1, g.zeros() + 0.3, 0.5, opts)]
    eq_ok = all(abs(r.margin) <= r.budget <= cat0_tol for r in eq)
    return not failures and eq_ok, {
        "worst_slack": worst, "max_budget": max_budget, "failures": failures,
        "equality_margins": [r.margin for r in eq], "equality_budgets": [r.budget for r in eq],
    }


def minimizing_sequences(seeds=range(5), scales=(1e-3, 1e-2), N: int = 32):
    opts = SolveOptions()
    A = random_potential(11, 0.01, 2, N)
    B = random_potential(12, 0.01, 2, N)
    rows, ok = [], True
    for seed in seeds:
        for scale in scales:
            r = minimizing_sequence_check(A, B, scale, seed, opts)
            q = r.quantities
            good = r.passed and q["length_ok"]
            ok &= good
            rows.append((seed, scale, q["midpoint_distance"], q["bound"], r.budget, good))
    zero = minimizing_sequence_check(A, B, 0.0, 0, opts)
    zero_ok = zero.quantities["midpoint_distance"] <= zero.budget and zero.quantities["bound"] <= zero.budget
    return ok and zero_ok, {"rows": rows, "zero_scale": zero.quantities}


def jacobi_convexity(seeds=range(5), N: int = 32, eps: float = 1e-3):
    opts = SolveOptions()
    rows, ok = [], True
    for seed in seeds:
        P, Q, step = jacobi_family(seed, N)
        r = jacobi_experiment(P, Q, 2, 1, eps, opts, s_step=step)
        ok &= r.passed
        rows.append((seed, r.convexity_margin, r.jacobi_tol, r.end_ratio, r.passed))
    g = GridSpec(N)
    s = np.linspace(-1.0, 1.0, 5)
    Qc = [g.zeros() + 0.1 + 0.05 * si for si in s]
    rc = jacobi_experiment(g.zeros(), Qc, 2, 1, eps, opts, s_step=float(s[1] - s[0]))
    const_ok = (abs(rc.end_pairing - rc.end_norm) <= 1e-8 and np.abs(rc.second_diff).max() <= 1e-8)
    return ok and const_ok, {"rows": rows, "constant_end_gap": rc.end_pairing - rc.end_norm,
                             "constant_max_second_diff": float(np.abs(rc.second_diff).max())}


def length_derivative_lock(seeds=range(3), N: int = 32, K: int = 16, ds: float = 1e-5):
    """Analytic dL/ds against the centered difference of L over two flow steps."""
    rows, ok = [], True
    for seed in seeds:
        out = flow_curve(random_curve(seed, K, N=N), ds, 2, keep_curves=False)
        fd = (out.lengths[2] - out.lengths[0]) / (2 * ds)
        an = out.derivatives[1]
        rel = abs(an - fd) / abs(fd)
        good = rel <= 1e-3 and all(d <= 0 for d in out.derivatives)
        ok &= good
        rows.append((seed, an, fd, rel))
    g = GridSpec(N)
    t = np.linspace(0.0, 1.0, K + 1)[:, None, None]
    shift = g.zeros()[None] + 0.05 * t
    zero = flow_curve(shift, ds, 1, keep_curves=False).derivatives
    return ok and all(d == 0.0 for d in zero), {"rows": rows, "constant_shift_derivatives": zero}


def contraction(seeds=range(5), samples: int = 50, ds: float = 1e-5, N: int = 32):
    opts = SolveOptions()
    rows, ok = [], True
    for seed in seeds:
        a = random_potential(500 + seed, 1.0, 1, N)
        b = random_potential(600 + seed, 1.0, 1, N)
        r = contraction_experiment(a, b, ds, samples - 1, 1, opts, inputs={"seed": seed})
        ok &= r.passed
        rows.append((seed, r.quantities["distance"][0], r.quantities["distance"][-1], r.margin))
    g = GridSpec(N)
    rc = contraction_experiment(g.zeros() + 0.1, g.zeros() - 0.2, ds, samples - 1, 1, opts)
    d = rc.quantities["distance"]
    const_ok = all(x == d[0] for x in d)
    return ok and const_ok, {"rows": rows, "constant_distances": sorted(set(d))}


def distance_derivative(seeds=range(3), N: int = 32, eps: float = 1e-3, delta_s: float = 1e-3):
    opts = SolveOptions()
    rows, ok = [], True
    for seed in seeds:
        c0, c1 = endpoint_motion(seed, delta_s, N)
        r = distance_derivative_check(c0, c1, eps, delta_s, opts)
        ok &= r.passed
        q = r.quantities
        rows.append((seed, q["analytic"], q["analytic_raw"], q["finite_difference"], q["relative_gap"]))
    g = GridSpec(N)
    closed = []
    for c, cp in ((0.3, 0.7), (-0.25, 0.4)):
        c1 = [g.zeros() + c + x * cp for x in (-delta_s, 0.0, delta_s)]
        r = distance_derivative_check([g.zeros()] * 3, c1, eps, delta_s, opts)
        err = max(abs(r.quantities["analytic"] - np.sign(c) * cp), abs(r.quantities["finite_difference"] - np.sign(c) * cp))
        closed.append(err)
    return ok and max(closed) <= 1e-6, {"rows": rows, "closed_form_errors": closed}


def flow_linear_physics(N: int = 32):
    g = GridSpec(N)
    x, _ = g.coords()
    ds, a = 1e-4, 1e-7
    phi = a * np.cos(2 * np.pi * x)
    nxt = flow_step(phi, ds)
    mode = np.cos(2 * np.pi * x)
    rate = -np.log(np.sum(nxt * mode) / np.sum(phi * mode)) / ds
    sigma = laplacian_symbol(N, 1)
    scheme_rate = -np.log(scheme_symbol(ds, sigma)) / ds
    continuum = 0.5 * (2 * np.pi) ** 4
    rel_scheme = abs(rate - scheme_rate) / scheme_rate
    rel_cont = abs(rate - continuum) / continuum

    # dM/ds = -Calabi along a seeded trajectory (centered in s)
    h = 2e-6
    phi0 = random_potential(3, 1.0, 1, N) * 0.1
    traj = run_flow(phi0, h, 4, with_k_energy=True)
    dM = (traj.k_energy[3] - traj.k_energy[1]) / (2 * h)
    cal = traj.calabi_energy[2]
    rel_dM = abs(dM + cal) / cal

    small = random_potential(4, 1e-4, 1, N)
    decay = run_flow(small, 1e-4, 150, sample_every=150, with_k_energy=False)
    final = decay.calabi_energy[-1]
    ok = rel_scheme <= 1e-10 and rel_cont <= 1e-2 and rel_dM <= 1e-4 and final < 1e-12
    return ok, {"rate": rate, "scheme_rel": rel_scheme, "continuum_rel": rel_cont, "dM_rel": rel_dM,
                "final_calabi": final}


def structural_invariants(N: int = 32, seeds=range(5)):
    worst = {"gauss_bonnet": 0.0, "volume": 0.0, "pairing_max": -np.inf}
    for seed in seeds:
        m = make_metric(random_potential(seed, 1.0, 2, N))
        worst["gauss_bonnet"] = max(worst["gauss_bonnet"], abs(integrate(m.R, m.rho)))
        worst["volume"] = max(worst["volume"], abs(integrate(m.rho) - 1.0))
        X = random_potential(seed + 50, 0.1, 2, N)
        Y = random_potential(seed + 60, 0.1, 2, N)
        worst["pairing_max"] = max(worst["pairing_max"], curvature_pairing(X, Y, m))
    kernel = lichnerowicz_kernel_scan(N)
    ok = (worst["gauss_bonnet"] <= 1e-8 and worst["volume"] <= 1e-10 and worst["pairing_max"] <= 0.0
          and kernel["nonconstant_min"] > 1e-8 and kernel["constant_max"] <= 1e-12)
    return ok, {**worst, **kernel}


def lichnerowicz_kernel_scan(N: int = 16, kmax: int = 4):
    """At the flat metric D annihilates constants and no other Fourier mode."""
    g = GridSpec(N)
    m = make_metric(g.zeros())
    x, y = g.coords()
    const = float(np.abs(lichnerowicz(g.ones(), m)).max())
    smallest = np.inf
    for k in range(-kmax, kmax + 1):
        for l in range(0, kmax + 1):
            if (k, l) == (0, 0):
                continue
            for f in (np.cos(2 * np.pi * (k * x + l * y)), np.sin(2 * np.pi * (k * x + l * y))):
                smallest = min(smallest, float(np.abs(lichnerowicz(f, m)).max()))
    return {"constant_max": const, "nonconstant_min": smallest}


CRITERIA = {
    "1": ("closed-form eps-geodesics", closed_form_geodesics),
    "2": ("energy-spread order", energy_spread_order),
    "3": ("CAT(0) comparison", cat0_triangles),
    "4": ("minimizing-sequence bound", minimizing_sequences),
    "5": ("Jacobi convexity", jacobi_convexity),
    "6": ("length-derivative convention", length_derivative_lock),
    "7": ("distance contraction", contraction),
    "8": ("distance first variation", distance_derivative),
    "9": ("flow linear physics", flow_linear_physics),
    "10": ("structural invariants", structural_invariants),
}


def run_criterion(key: str, **kw) -> CheckResult:
    name, fn = CRITERIA[key]
    return _timed(key, name, lambda: fn(**kw))


# ------------------------------------------------------------------ tiers

def _quick_triangles(N):
    g = GridSpec(N)
    opts = SolveOptions()
    B = random_potential(2, 0.01, 1, N)
    eq = [cat0_check(random_potential(1, 0.01, 1, N), B, B, 0.5, opts),
          cat0_check(g.zeros(), g.zeros() + 0.1, g.zeros() + 0.3, 0.5, opts)]
    return all(abs(r.margin) <= r.budget for r in eq), {"margins": [r.margin for r in eq],
                                                         "budgets": [r.budget for r in eq]}


def _quick_jacobi(N):
    g = GridSpec(N)
    s = np.linspace(-1.0, 1.0, 3)
    r = jacobi_experiment(g.zeros(), [g.zeros() + 0.1 + 0.05 * x for x in s], 1, 1, 1e-3, SolveOptions(), s_step=1.0)
    return abs(r.end_pairing - r.end_norm) <= 1e-8, {"end_gap": r.end_pairing - r.end_norm}


def _quick_derivative(N):
    g = GridSpec(N)
    c1 = [g.zeros() + 0.3 + x * 0.7 for x in (-1e-3, 0.0, 1e-3)]
    r = distance_derivative_check([g.zeros()] * 3, c1, 1e-3, 1e-3, SolveOptions())
    err = abs(r.quantities["analytic"] - 0.7)
    return err <= 1e-6 and r.quantities["term_t0"] == 0.0, {"error": err}


def _quick_minseq(N):
    A, B = random_potential(11, 0.01, 1, N), random_potential(12, 0.01, 1, N)
    r = minimizing_sequence_check(A, B, 0.0, 0, SolveOptions())
    q = r.quantities
    return q["midpoint_distance"] <= r.budget and q["bound"] <= r.budget, q


def _quick_flow(N):
    g = GridSpec(N)
    t = np.linspace(0.0, 1.0, 9)[:, None, None]
    d = flow_curve(g.zeros()[None] + 0.05 * t, 1e-5, 1, keep_curves=False).derivatives
    rc = contraction_experiment(g.zeros() + 0.1, g.zeros() - 0.2, 1e-5, 4, 1, SolveOptions())
    dist = rc.quantities["distance"]
    return all(x == 0.0 for x in d) and len(set(dist)) == 1, {"derivatives": d, "distances": dist}


def _quick_random(N):
    a = random_potential(7, 1.0, 2, N)
    b = random_potential(7, 1.0, 2, N)
    z = random_potential(7, 0.0, 2, N)
    rho_min = float((1.0 + 0.5 * laplacian(a)).min())
    ok = np.array_equal(a, b) and not np.any(z) and rho_min >= 0.5 and abs(a.mean()) < 1e-15
    return ok, {"min_rho": rho_min}


def quick_tier(N: int = 16):
    items = [
        ("1", "closed-form eps-geodesics", lambda: closed_form_geodesics(N, N)),
        ("3*", "triangle equality cases", lambda: _quick_triangles(N)),
        ("4*", "zero perturbation", lambda: _quick_minseq(N)),
        ("5*", "Jacobi equality on constants", lambda: _quick_jacobi(N)),
        ("6*/7*", "constant-shift curve and constant pair", lambda: _quick_flow(N)),
        ("8*", "closed-form distance derivative", lambda: _quick_derivative(N)),
        ("10", "structural invariants", lambda: structural_invariants(N)),
        ("rp", "random_potential contract", lambda: _quick_random(N)),
    ]
    return [(lambda c=c, n=n, f=f: _timed(c, n, f)) for c, n, f in items]


def full_tier(N: int = 32):
    return [(lambda k=k: run_criterion(k, **({"N": N} if k != "1" else {}))) for k in CRITERIA]


def _extended_spread(N):
    return energy_spread_order(N=N, M=N)


def _extended_rate(N):
    """Continuum-rate error of mode (1, 0) shrinks like h^2 between N/2 and N."""
    errs = []
    for n in (N // 2, N):
        g = GridSpec(n)
        x, _ = g.coords()
        phi = 1e-7 * np.cos(2 * np.pi * x)
        mode = np.cos(2 * np.pi * x)
        nxt = flow_step(phi, 1e-5)
        rate = -np.log(np.sum(nxt * mode) / np.sum(phi * mode)) / 1e-5
        errs.append(abs(rate - 0.5 * (2 * np.pi) ** 4) / (0.5 * (2 * np.pi) ** 4))
    order = float(np.log2(errs[0] / errs[1]))
    return 1.8 <= order <= 2.2, {"relative_errors": errs, "order": order}


def extended_tier(N: int = 64):
    items = [
        ("2@64", "energy-spread order", lambda: _extended_spread(N)),
        ("6@64", "length-derivative convention", lambda: length_derivative_lock(N=N)),
        ("9@64", "continuum rate convergence", lambda: _extended_rate(N)),
        ("10@64", "structural invariants", lambda: structural_invariants(N)),
    ]
    return [(lambda c=c, n=n, f=f: _timed(c, n, f)) for c, n, f in items]


TIERS = {"quick": quick_tier, "full": full_tier, "extended": extended_tier}
