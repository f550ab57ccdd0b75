"""Periodic uniform grid on the unit torus and its discrete operators.

A scalar field is a plain ``(N, N)`` float array; index ``(i, j)`` is the
point ``(i*h, j*h)`` with ``h = 1/N``. Periodicity lives in the index
arithmetic (``np.roll``), never in ghost cells.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FIELD_MAGIC = b"MNPL1"


@dataclass(frozen=True)
class GridSpec:
    N: int

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or isinstance(self.N, bool):
            raise TypeError("N must be an integer")
        if self.N < 8 or self.N % 2:
            raise ValueError(f"N must be even and >= 8, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    def coords(self):
        """Meshgrid ``(x, y)`` with ``x`` varying along axis 0."""
        s = np.arange(self.N) * self.h
        return np.meshgrid(s, s, indexing="ij")

    def zeros(self):
        return np.zeros((self.N, self.N))

    def ones(self):
        return np.ones((self.N, self.N))

    @classmethod
    def of(cls, f) -> "GridSpec":
        n0, n1 = np.shape(f)[-2:]
        if n0 != n1:
            raise ValueError(f"field is not square: {np.shape(f)}")
        return cls(int(n0))


def _h(f):
    return 1.0 / f.shape[-1]


def partial_x(f):
    """Centered difference along axis -2 (the x direction)."""
    return (np.roll(f, -1, axis=-2) - np.roll(f, 1, axis=-2)) * (0.5 / _h(f))


def partial_y(f):
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) * (0.5 / _h(f))


def second_x(f):
    """Compact three-point second difference in x."""
    return (np.roll(f, -1, axis=-2) - 2.0 * f + np.roll(f, 1, axis=-2)) / _h(f) ** 2


def second_y(f):
    return (np.roll(f, -1, axis=-1) - 2.0 * f + np.roll(f, 1, axis=-1)) / _h(f) ** 2


def laplacian(f):
    """Five-point Laplacian; works on any stack of fields (last two axes)."""
    h2 = _h(f) ** 2
    return (
        np.roll(f, -1, axis=-2) + np.roll(f, 1, axis=-2)
        + np.roll(f, -1, axis=-1) + np.roll(f, 1, axis=-1)
        - 4.0 * f
    ) / h2


def integrate(f, weight=None) -> float:
    """``h^2 * sum(f * weight)``; ``weight=None`` means the flat measure."""
    h2 = _h(f) ** 2
    if weight is None:
        return float(h2 * np.sum(f))
    return float(h2 * np.sum(f * weight))


def mean(f) -> float:
    return float(np.mean(f))


# Discrete symbols of the stencils on the sampled mode exp(2 pi i k x).

def centered_symbol(N: int, k):
    """Magnitude of the centered-difference symbol, ``sin(2 pi k h)/h``."""
    h = 1.0 / N
    return np.sin(2 * np.pi * np.asarray(k) * h) / h


def laplacian_symbol(N: int, k, l=0):
    """Positive eigenvalue ``sigma`` with ``laplacian(mode) = -sigma * mode``."""
    h = 1.0 / N
    k = np.asarray(k)
    l = np.asarray(l)
    return (2.0 / h**2) * (2.0 - np.cos(2 * np.pi * k * h) - np.cos(2 * np.pi * l * h))


def _laplacian_symbol_grid(N: int):
    k = np.fft.fftfreq(N, d=1.0 / N)
    return laplacian_symbol(N, k[:, None], k[None, :])


def solve_biharmonic_shift(b, c: float):
    """Solve ``(Id + c * lap^2) u = b`` exactly in the Fourier basis of the 5-point Laplacian.

    The mean is carried through untouched so that constants are reproduced
    bit-for-bit.
    """
    if not c > 0:
        raise ValueError(f"shift coefficient must be positive, got {c}")
    N = b.shape[-1]
    b = np.asarray(b, dtype=float)
    if np.all(b == b.flat[0]):
        return b.copy()  # np.mean of a constant need not reproduce it
    m = np.mean(b)
    fluct = b - m
    sigma = _laplacian_symbol_grid(N)
    u_hat = np.fft.fft2(fluct) / (1.0 + c * sigma**2)
    u = np.real(np.fft.ifft2(u_hat))
    return u - np.mean(u) + m


# ---------------------------------------------------------------- serialization

def field_to_bytes(f) -> bytes:
    f = np.ascontiguousarray(f, dtype="<f8")
    N = GridSpec.of(f).N
    return FIELD_MAGIC + struct.pack("<I", N) + f.tobytes(order="C")


def _read_field(buf) -> np.ndarray:
    magic = buf.read(len(FIELD_MAGIC))
    if magic != FIELD_MAGIC:
        raise ValueError(f"bad field magic {magic!r}")
    (N,) = struct.unpack("<I", buf.read(4))
    raw = buf.read(8 * N * N)
    if len(raw) != 8 * N * N:
        raise ValueError("truncated field record")
    return np.frombuffer(raw, dtype="<f8").reshape(N, N).astype(float)


def field_from_bytes(data: bytes) -> np.ndarray:
    return _read_field(io.BytesIO(data))


def write_field(path, f) -> None:
    Path(path).write_bytes(field_to_bytes(f))


def read_field(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return _read_field(fh)


def write_field_csv(path, f) -> None:
    np.savetxt(path, np.asarray(f), delimiter=",", fmt="%.17g")
