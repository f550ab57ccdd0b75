import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kahlerlab.errors import ConvergenceError, PositivityError
from kahlerlab.geodesic import (
    PathGrid,
    SolveOptions,
    continuation_solve,
    covariant_t_derivative,
    distance,
    eps_ladder,
    geodesic_residual,
    interpolate,
    measure_distance,
    path_energy_length,
    solve_epsilon_geodesic,
)
from kahlerlab.grid import GridSpec, integrate
from kahlerlab.kahler import make_metric
from kahlerlab.npc import random_potential

N = 16


def cos_pot(a, N=N):
    x, _ = GridSpec(N).coords()
    return a * np.cos(2 * np.pi * x)


def lift(N, M, c, eps):
    t = np.linspace(0, 1, M + 1)[:, None, None]
    return np.broadcast_to(c * t + 0.5 * eps * t * (t - 1), (M + 1, N, N)).copy()


def test_residual_examples():
    M, eps = 16, 0.1
    assert np.abs(geodesic_residual(PathGrid(lift(N, M, 0.0, eps), eps))).max() <= 1e-15
    # c t is exact in binary for c = 0.25, M = 16
    lin = PathGrid(lift(N, M, 0.25, 0.0), eps)
    assert np.all(geodesic_residual(lin) == -eps)
    lin = PathGrid(lift(N, M, 0.3, 0.0), eps)
    assert np.abs(geodesic_residual(lin) + eps).max() <= 1e-12
    for c in (0.25, 0.3):
        assert np.abs(geodesic_residual(PathGrid(lift(N, M, c, eps), eps))).max() <= 1e-12


def test_residual_needs_interior():
    with pytest.raises(ValueError):
        geodesic_residual(PathGrid(np.zeros((2, 8, 8)), 0.1))


def test_solve_flat_closed_form():
    eps = 0.1
    p, d = solve_epsilon_geodesic(np.zeros((N, N)), np.zeros((N, N)), eps, SolveOptions(M=16))
    assert np.abs(p.slices - lift(N, 16, 0.0, eps)).max() <= 1e-8
    assert np.allclose(d.energy, (eps * (p.t - 0.5)) ** 2, atol=1e-8)


def test_solve_constant_closed_form():
    eps, c = 1e-3, 0.3
    p, d = solve_epsilon_geodesic(np.zeros((N, N)), np.full((N, N), c), eps, SolveOptions(M=16))
    assert np.abs(p.slices - lift(N, 16, c, eps)).max() <= 1e-8
    assert abs(d.length - c) <= 1e-6


@pytest.fixture(scope="module")
def cos_solve():
    opts = SolveOptions(M=N)
    return continuation_solve(np.zeros((N, N)), cos_pot(0.01), opts), opts


def test_certificates(cos_solve):
    (p, d), opts = cos_solve
    # re-check independently of the Newton loop
    assert np.abs(geodesic_residual(p)).max() <= opts.newton_tol
    assert d.min_phitt > 0 and d.min_rho > opts.positivity_margin
    assert np.array_equal(p.start, np.zeros((N, N))) and np.array_equal(p.end, cos_pot(0.01))
    assert all(make_metric(s).min_rho > 0 for s in p.slices)


def test_ladder_reaches_target(cos_solve):
    (_, d), opts = cos_solve
    eps = [e for e, _ in d.ladder]
    assert eps[0] == opts.eps_start and eps[-1] == opts.eps_target
    assert eps[-2] == 2 * opts.eps_target


def test_length_monotone_and_stable(cos_solve):
    (_, d), opts = cos_solve
    L = np.array([l for _, l in d.ladder])
    assert np.all(np.diff(L) <= 1e-9)  # decreasing eps shortens the path
    # Richardson with the O(eps) error: extrapolated limits of the last two pairs
    ext = 2 * L[1:] - L[:-1]
    assert abs(ext[-1] - ext[-2]) <= 1e-4


def test_uniform_bounds(cos_solve):
    (_, d), opts = cos_solve
    start, _ = solve_epsilon_geodesic(np.zeros((N, N)), cos_pot(0.01), opts.eps_start, opts)
    end, _ = cos_solve[0]

    def bound(p):
        s = p.slices
        phi_t = np.gradient(s, 1 / p.M, axis=0)
        phi_tt = (s[2:] - 2 * s[1:-1] + s[:-2]) * p.M**2
        return np.array([np.abs(s).max(), np.abs(phi_t).max(), phi_tt.max()])

    assert np.all(bound(end) <= 4 * bound(start))


def test_distance_positive(cos_solve):
    L, bar = distance(np.zeros((N, N)), cos_pot(0.01), SolveOptions(M=N))
    assert L > 10 * bar


def test_constant_ladder_exact():
    # the speed c + eps (t - 1/2) keeps one sign only while |c| >= eps / 2
    c = 0.6
    _, d = continuation_solve(np.zeros((N, N)), np.full((N, N), c), SolveOptions(M=N))
    assert all(abs(l - c) <= 1e-8 for _, l in d.ladder)


def test_distance_constant():
    L, bar = distance(np.zeros((N, N)), np.full((N, N), -0.3), SolveOptions(M=N))
    assert abs(L - 0.3) <= 1e-6


def test_distance_diagonal_exact():
    phi = random_potential(4, 0.01, 2, N=N)
    assert distance(phi, phi.copy()) == (0.0, 0.0)


def test_bad_endpoint_fails_before_newton(monkeypatch):
    from kahlerlab import geodesic

    def boom(*a, **k):
        raise AssertionError("Newton should not run")

    monkeypatch.setattr(geodesic, "_newton_direction", boom)
    with pytest.raises(PositivityError):
        continuation_solve(np.zeros((32, 32)), cos_pot(0.2, 32))
    with pytest.raises(PositivityError):
        solve_epsilon_geodesic(cos_pot(0.2, 32), np.zeros((32, 32)), 0.1)


def test_convergence_error_carries_iterate():
    with pytest.raises(ConvergenceError) as info:
        solve_epsilon_geodesic(np.zeros((N, N)), cos_pot(0.01), 1e-3, SolveOptions(M=N, max_newton=1))
    assert isinstance(info.value.iterate, PathGrid)


@pytest.mark.parametrize(
    "kw", [dict(newton_tol=0), dict(eps_target=2.0), dict(max_newton=0), dict(M=1), dict(damping_min=-1)]
)
def test_solve_options_validation(kw):
    with pytest.raises(ValueError):
        SolveOptions(**kw)


def test_eps_ladder():
    ladder = eps_ladder(1.0, 1e-3)
    assert ladder[0] == 1.0 and ladder[-1] == 1e-3 and ladder[-2] == 2e-3
    assert all(a > b for a, b in zip(ladder, ladder[1:]))


@settings(max_examples=5)
@given(st.integers(0, 1000))
def test_distance_symmetric(seed):
    a = random_potential(seed, 0.005, 1, N=N)
    b = random_potential(seed + 5000, 0.005, 1, N=N)
    opts = SolveOptions(M=N)
    r1, r2 = measure_distance(a, b, opts), measure_distance(b, a, opts)
    assert abs(r1.length - r2.length) <= r1.error_bar + r2.error_bar


def test_energy_length_examples():
    s = np.repeat(cos_pot(0.01)[None], 9, axis=0)
    d = path_energy_length(PathGrid(s, 0.0))
    assert d.length == 0 and not np.any(d.energy)
    c = 0.4
    d = path_energy_length(PathGrid(lift(N, 8, c, 0.0), 0.0))
    assert np.allclose(d.energy, c**2, rtol=1e-14) and d.length == pytest.approx(c, rel=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_length_reversal_exact(seed):
    rng = np.random.default_rng(seed)
    s = 1e-3 * rng.standard_normal((9, 8, 8))
    p = PathGrid(s, 0.0)
    assert path_energy_length(p).length == path_energy_length(p.reversed()).length


def test_interpolate_examples():
    c, eps = 0.3, 1e-3
    p, _ = solve_epsilon_geodesic(np.zeros((N, N)), np.full((N, N), c), eps, SolveOptions(M=16))
    assert np.array_equal(interpolate(p, 0.0), p.start)
    assert np.array_equal(interpolate(p, 1.0), p.end)
    assert np.abs(interpolate(p, 0.5) - c / 2).max() <= eps
    with pytest.raises(ValueError):
        interpolate(p, 1.5)


def test_covariant_derivative_of_constant(cos_solve):
    (p, _), _ = cos_solve
    assert not np.any(covariant_t_derivative(np.full(p.slices.shape, 2.0), p))


def _compat_defect(M):
    a, b = np.zeros((N, N)), cos_pot(0.01)
    p, _ = solve_epsilon_geodesic(a, b, 1e-2, SolveOptions(M=M))
    t = p.t[:, None, None]
    x, y = GridSpec(N).coords()
    psi = np.sin(2 * np.pi * (x + t)) + np.cos(2 * np.pi * y) * t**2
    dt = covariant_t_derivative(psi, p)
    k = M // 2
    metric = [make_metric(p.slices[j]) for j in (k - 1, k, k + 1)]
    lhs = (integrate(psi[k + 1] ** 2, metric[2].rho) - integrate(psi[k - 1] ** 2, metric[0].rho)) * M / 2
    return abs(lhs - 2 * integrate(dt[k] * psi[k], metric[1].rho))


def test_covariant_derivative_metric_compatible():
    d = np.array([_compat_defect(M) for M in (8, 16, 32, 64)])
    assert np.all(np.log2(d[:-1] / d[1:]) > 1.9)
