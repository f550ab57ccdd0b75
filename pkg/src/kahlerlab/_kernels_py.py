"""Pure-numpy kernels for the eps-geodesic Newton solver.

Paths are ``(M+1, N, N)`` arrays of time slices; interior quantities are
``(M-1, N, N)`` arrays for slices ``1..M-1``. The compiled module
``_kernels`` implements the same functions with fused loops.
"""

import numpy as np


def _dx(f, h):
    return (np.roll(f, -1, axis=-2) - np.roll(f, 1, axis=-2)) * (0.5 / h)


def _dy(f, h):
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) * (0.5 / h)


def _lap(f, h):
    return (
        np.roll(f, -1, axis=-2) + np.roll(f, 1, axis=-2)
        + np.roll(f, -1, axis=-1) + np.roll(f, 1, axis=-1) - 4.0 * f
    ) / (h * h)


def geodesic_coefficients(phi):
    """Return ``(rho, phi_tt, dx phi_t, dy phi_t)`` on the interior slices."""
    M = phi.shape[0] - 1
    h = 1.0 / phi.shape[-1]
    inner = phi[1:-1]
    rho = 1.0 + 0.5 * _lap(inner, h)
    phi_tt = (phi[2:] - 2.0 * inner + phi[:-2]) * (M * M)
    phi_t = (phi[2:] - phi[:-2]) * (0.5 * M)
    return rho, phi_tt, _dx(phi_t, h), _dy(phi_t, h)


def geodesic_residual(phi, eps):
    rho, phi_tt, gx, gy = geodesic_coefficients(phi)
    return rho * phi_tt - 0.5 * (gx * gx + gy * gy) - eps


def geodesic_matvec(psi, rho, phi_tt, gx, gy):
    """Linearized eps-geodesic operator applied to ``psi`` (full path, zero end slices)."""
    M = psi.shape[0] - 1
    h = 1.0 / psi.shape[-1]
    inner = psi[1:-1]
    psi_tt = (psi[2:] - 2.0 * inner + psi[:-2]) * (M * M)
    psi_t = (psi[2:] - psi[:-2]) * (0.5 * M)
    return (
        0.5 * _lap(inner, h) * phi_tt
        + rho * psi_tt
        - gx * _dx(psi_t, h)
        - gy * _dy(psi_t, h)
    )
