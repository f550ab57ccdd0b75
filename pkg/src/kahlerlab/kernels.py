"""Backend selection for the geodesic kernels.

The compiled extension is used when it imports; ``KAHLERLAB_PURE=1`` forces
the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("KAHLERLAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def _contig(a):
    return np.ascontiguousarray(a, dtype=float)


def geodesic_coefficients(phi):
    return _impl.geodesic_coefficients(_contig(phi))


def geodesic_residual(phi, eps):
    return _impl.geodesic_residual(_contig(phi), float(eps))


def geodesic_matvec(psi, rho, phi_tt, gx, gy):
    return _impl.geodesic_matvec(_contig(psi), rho, phi_tt, gx, gy)
