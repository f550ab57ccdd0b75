import numpy as np
import pytest
from hypothesis import given, strategies as st

from kahlerlab import _kernels_py, kernels

try:
    from kahlerlab import _kernels as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def sample_path(seed, N=12, M=9, scale=0.01):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, M + 1)[:, None, None]
    x = np.arange(N) / N
    base = scale * np.cos(2 * np.pi * x)[None, :, None] * t + 0.05 * t * (t - 1)
    return np.ascontiguousarray(base + 1e-4 * rng.standard_normal((M + 1, N, N)))


@needs_compiled
@given(st.integers(0, 2**32 - 1))
def test_backends_agree(seed):
    phi = sample_path(seed)
    for a, b in zip(compiled.geodesic_coefficients(phi), _kernels_py.geodesic_coefficients(phi)):
        assert np.allclose(a, b, rtol=1e-13, atol=1e-12)
    assert np.allclose(compiled.geodesic_residual(phi, 1e-3), _kernels_py.geodesic_residual(phi, 1e-3),
                       rtol=1e-13, atol=1e-12)
    psi = np.random.default_rng(seed + 1).standard_normal(phi.shape)
    psi[0] = psi[-1] = 0
    coef = _kernels_py.geodesic_coefficients(phi)
    assert np.allclose(compiled.geodesic_matvec(psi, *coef), _kernels_py.geodesic_matvec(psi, *coef),
                       rtol=1e-12, atol=1e-9)


def test_backend_name():
    assert kernels.BACKEND in ("python", "cython")


@pytest.mark.parametrize("seed", [0, 1])
def test_matvec_is_jacobian_of_residual(seed):
    # directional finite difference oracle, central in the step
    phi = sample_path(seed)
    psi = np.random.default_rng(seed + 7).standard_normal(phi.shape)
    psi[0] = psi[-1] = 0
    coef = kernels.geodesic_coefficients(phi)
    jv = kernels.geodesic_matvec(psi, *coef)
    h = 1e-6
    fd = (kernels.geodesic_residual(phi + h * psi, 0.0) - kernels.geodesic_residual(phi - h * psi, 0.0)) / (2 * h)
    assert np.abs(jv - fd).max() <= 1e-6 * np.abs(jv).max()


def test_residual_quadratic_lift_is_exact():
    eps = 0.1
    t = np.linspace(0, 1, 17)[:, None, None]
    phi = np.broadcast_to(0.5 * eps * t * (t - 1), (17, 8, 8)).copy()
    assert np.abs(kernels.geodesic_residual(phi, eps)).max() <= 1e-15
