import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kahlerlab.errors import FlagDegenerate
from kahlerlab.geodesic import SolveOptions
from kahlerlab.kahler import density
from kahlerlab.npc import (
    _uniforms,
    cat0_check,
    cat0_sweep,
    distance_derivative_check,
    jacobi_experiment,
    minimizing_sequence_check,
    random_potential,
    splitmix64,
)

N = 16
OPTS = SolveOptions(M=N)


def const(c, n=N):
    return np.full((n, n), float(c))


def test_splitmix64_reference_values():
    # published first outputs for seed 0
    state, out = 0, []
    for _ in range(3):
        state, z = splitmix64(state)
        out.append(z)
    assert out == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_uniform_range():
    u = _uniforms(7, 2000)
    assert u.min() >= -1 and u.max() < 1 and abs(u.mean()) < 0.1


def test_random_potential_zero_amplitude():
    assert not np.any(random_potential(3, 0.0, 2, N=N))


def test_random_potential_deterministic():
    a = random_potential(11, 0.01, 2)
    assert a.tobytes() == random_potential(11, 0.01, 2).tobytes()
    assert not np.array_equal(a, random_potential(12, 0.01, 2))


@given(st.integers(0, 2**64 - 1), st.integers(1, 4), st.sampled_from([16, 32]))
def test_random_potential_valid_at_unit_amplitude(seed, K, n):
    phi = random_potential(seed, 1.0, K, N=n)
    assert density(phi).min() >= 0.5
    assert abs(phi.mean()) <= 1e-15
    assert np.abs(phi).max() <= 1.0 + 1e-15


def test_random_potential_band_limited():
    phi = random_potential(5, 0.01, 2, N=32)
    power = np.abs(np.fft.fft2(phi))
    k = np.fft.fftfreq(32, d=1 / 32)
    outside = (np.abs(k)[:, None] > 2) | (np.abs(k)[None, :] > 2)
    assert power[outside].max() <= 1e-15 * power.max()


@pytest.mark.parametrize("kw", [dict(amplitude=-1.0, max_wavenumber=1), dict(amplitude=0.1, max_wavenumber=0),
                                dict(amplitude=0.1, max_wavenumber=9)])
def test_random_potential_rejects(kw):
    with pytest.raises(ValueError):
        random_potential(0, N=32, **kw)


def test_triangle_degenerate_side():
    A = random_potential(1, 0.01, 1, N=N)
    B = random_potential(2, 0.01, 1, N=N)
    r = cat0_check(A, B, B.copy(), 0.5, OPTS)
    assert r.dBC == 0 and r.passed
    assert abs(r.margin) <= r.budget


def test_triangle_constants_equality():
    r = cat0_check(const(0), const(0.1), const(-0.2), 0.5, OPTS)
    assert abs(r.margin) <= r.budget
    # P sits eps/8 below the limiting midpoint -0.05
    assert r.dAP == pytest.approx(0.05 + 1e-3 / 8, abs=1e-9)


def test_triangle_swap_invariance():
    A = random_potential(3, 0.01, 1, N=N)
    B = random_potential(4, 0.01, 1, N=N)
    C = random_potential(5, 0.01, 1, N=N)
    r1 = cat0_check(A, B, C, 0.25, OPTS)
    r2 = cat0_check(A, C, B, 0.75, OPTS)
    assert abs(r1.margin - r2.margin) <= r1.budget + r2.budget
    assert r1.passed and r2.passed


def test_triangle_report_provenance():
    A, B, C = (random_potential(s, 0.01, 1, N=N) for s in (6, 7, 8))
    reps = cat0_sweep(A, B, C, [0.25, 0.5], OPTS)
    d = reps[1].to_report({"seed": 2}).to_dict()
    assert set(d) == {"experiment", "inputs", "quantities", "budget", "margin", "pass"}
    assert d["experiment"] == "triangle"
    assert d["inputs"] == {"lambda": 0.5, "N": N, "M": N, "eps": 1e-3, "cat0_tol": 5e-4, "seed": 2}
    assert reps[0].dBC == reps[1].dBC
    json.dumps(d)


def test_minseq_zero_perturbation():
    A = random_potential(11, 0.01, 1, N=N)
    B = random_potential(12, 0.01, 1, N=N)
    rep = minimizing_sequence_check(A, B, 0.0, 0, OPTS)
    q = rep.quantities
    assert q["bound"] <= rep.budget and q["midpoint_distance"] <= rep.budget
    assert rep.passed and q["length_ok"]


@pytest.mark.parametrize("scale", [1e-3, 1e-2])
def test_minseq_bound(scale):
    A = random_potential(11, 0.01, 1, N=N)
    B = random_potential(12, 0.01, 1, N=N)
    rep = minimizing_sequence_check(A, B, scale, 3, OPTS)
    assert rep.passed and rep.quantities["length_ok"]
    assert rep.to_dict()["inputs"]["seed"] == 3


def test_jacobi_constant_family_equality():
    s = np.linspace(-1, 1, 5)
    Q = [const(0.1 + 0.05 * v) for v in s]
    r = jacobi_experiment(const(0), Q, 2, 1, 1e-3, OPTS, s_step=s[1] - s[0])
    assert abs(r.end_pairing - r.end_norm) <= 1e-8 * r.end_norm
    assert np.abs(r.second_diff).max() <= 1e-10
    assert np.allclose(r.norm, 0.05 * r.t, atol=1e-10)
    assert r.passed


def test_jacobi_random_family():
    P = random_potential(100, 0.01, 1, N=N)
    base = random_potential(200, 0.01, 1, N=N)
    dirn = random_potential(300, 0.01, 1, N=N)
    s = np.linspace(-1, 1, 5)
    r = jacobi_experiment(P, [base + v * dirn for v in s], 2, 1, 1e-3, OPTS, s_step=0.5)
    assert r.norm[0] == 0
    assert r.convex and r.end_ok
    rep = r.to_report({"seed": 0})
    assert rep.passed and rep.budget == 1.0


def test_jacobi_degenerate_flag():
    P = random_potential(1, 0.01, 1, N=N)
    with pytest.raises(FlagDegenerate):
        jacobi_experiment(P, [P.copy() for _ in range(3)], 1, 1, 1e-3, OPTS)


@pytest.mark.parametrize("args", [(2, 0), (0, 1), (4, 1)])
def test_jacobi_index_checks(args):
    with pytest.raises(ValueError):
        jacobi_experiment(const(0), [const(0.1 * k) for k in range(5)], *args, 1e-3, OPTS)


def test_derivcheck_constant_curves():
    a = [const(0.0)] * 3
    b = [const(0.3)] * 3
    rep = distance_derivative_check(a, b, 1e-3, 1e-3, OPTS)
    assert abs(rep.quantities["analytic"]) <= 1e-10
    assert abs(rep.quantities["finite_difference"]) <= 1e-10
    assert rep.passed


@pytest.mark.parametrize("c,cp", [(0.3, 0.7), (-0.25, 0.4)])
def test_derivcheck_constant_closed_form(c, cp):
    ds = 1e-3
    b = [const(c + k * ds * cp) for k in (-1, 0, 1)]
    rep = distance_derivative_check([const(0.0)] * 3, b, 1e-3, ds, OPTS)
    q = rep.quantities
    assert q["analytic"] == pytest.approx(np.sign(c) * cp, rel=1e-6)
    assert q["finite_difference"] == pytest.approx(np.sign(c) * cp, rel=1e-6)


def test_derivcheck_t0_term_exactly_zero():
    ds = 1e-3
    a = random_potential(10, 1, 1, N=N)
    b = random_potential(20, 1, 1, N=N)
    v = random_potential(40, 0.01, 1, N=N)
    rep = distance_derivative_check([a] * 3, [b + k * ds * v for k in (-1, 0, 1)], 1e-3, ds, OPTS)
    assert rep.quantities["term_t0"] == 0.0
    assert rep.passed


def test_derivcheck_rejects_coincident():
    with pytest.raises(ValueError):
        distance_derivative_check([const(0)] * 3, [const(0)] * 3, 1e-3, 1e-3, OPTS)
