"""eps-approximate geodesics between Kaehler potentials.

A path is stored as an ``(M+1, N, N)`` array of time slices at ``t = k/M``.
The discrete eps-geodesic equation on interior slices is

    rho * phi_tt - (dx phi_t)^2 / 2 - (dy phi_t)^2 / 2 = eps

(centered differences in t and x, y), solved by damped Newton with
preconditioned GMRES inner solves and continuation in eps.
"""

from __future__ import annotations

import io
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import kernels
from .errors import ConvergenceError, PositivityError
from .grid import GridSpec, _read_field, field_to_bytes, partial_x, partial_y
from .kahler import POSITIVITY_MARGIN, density, make_metric

log = logging.getLogger(__name__)

PATH_MAGIC = b"MNPL-PATH1"


@dataclass
class SolveOptions:
    newton_tol: float = 1e-9
    max_newton: int = 50
    damping_min: float = 1.0 / 64
    eps_start: float = 1.0
    eps_target: float = 1e-3
    M: int | None = None  # time intervals; None means M = N
    positivity_margin: float = POSITIVITY_MARGIN
    linear_rtol: float = 1e-10

    def __post_init__(self):
        for name in ("newton_tol", "damping_min", "eps_start", "eps_target", "positivity_margin", "linear_rtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eps_target > self.eps_start:
            raise ValueError("eps_target must not exceed eps_start")
        if self.max_newton < 1:
            raise ValueError("max_newton must be >= 1")
        if self.M is not None and self.M < 2:
            raise ValueError("M must be >= 2")

    def time_steps(self, N: int) -> int:
        return self.M if self.M is not None else N


@dataclass
class PathGrid:
    slices: np.ndarray  # (M+1, N, N)
    eps: float

    @property
    def M(self) -> int:
        return self.slices.shape[0] - 1

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.slices.shape[-1])

    @property
    def t(self):
        return np.linspace(0.0, 1.0, self.M + 1)

    @property
    def start(self):
        return self.slices[0]

    @property
    def end(self):
        return self.slices[-1]

    def reversed(self) -> "PathGrid":
        return PathGrid(self.slices[::-1].copy(), self.eps)


@dataclass
class PathDiagnostics:
    energy: np.ndarray
    length: float
    energy_spread: float
    min_rho: float
    min_phitt: float
    ladder: list = field(default_factory=list)  # (eps, length) per continuation level
    newton_iterations: int = 0

    @property
    def energy_length_gap(self) -> float:
        """``sqrt(int E dt) - L``, nonnegative by Cauchy-Schwarz; zero at constant speed."""
        t = np.linspace(0.0, 1.0, len(self.energy))
        return abs(float(np.sqrt(np.trapezoid(self.energy, t))) - self.length)


class DistanceResult(NamedTuple):
    length: float
    error_bar: float
    path: PathGrid | None
    diagnostics: PathDiagnostics | None


# ------------------------------------------------------------------ path calculus

def time_derivative(slices):
    """Centered first difference in t; one-sided second order at both ends."""
    f = np.asarray(slices, dtype=float)
    M = f.shape[0] - 1
    out = np.empty_like(f)
    # written in differences so constant paths give exact zeros and reversal
    # gives the exact negative
    out[1:-1] = (f[2:] - f[:-2]) * (0.5 * M)
    out[0] = (4.0 * (f[1] - f[0]) - (f[2] - f[0])) * (0.5 * M)
    out[-1] = (4.0 * (f[-1] - f[-2]) - (f[-1] - f[-3])) * (0.5 * M)
    return out


def geodesic_residual(p: PathGrid):
    if p.M < 2:
        raise ValueError("need M >= 2")
    return kernels.geodesic_residual(p.slices, p.eps)


def length_from_energy(energy) -> float:
    """Trapezoid of ``sqrt(E)`` on a uniform grid in [0, 1]."""
    # summed over the palindrome root + reversed(root), so reversal is exact
    root = np.sqrt(energy)
    u = root + root[::-1]
    return float(0.25 * np.sum(u[:-1] + u[1:]) / (len(root) - 1))


def path_energy_length(p: PathGrid) -> PathDiagnostics:
    s = p.slices
    phi_t = time_derivative(s)
    rho = density(s)
    h2 = (1.0 / s.shape[-1]) ** 2
    energy = h2 * np.sum(phi_t**2 * rho, axis=(1, 2))
    energy = np.maximum(energy, 0.0)
    length = length_from_energy(energy)
    spread = float(np.max(np.abs(energy - energy.mean())))
    if p.M >= 2:
        min_phitt = float(((s[2:] - 2 * s[1:-1] + s[:-2]) * p.M**2).min())
    else:
        min_phitt = float("inf")
    return PathDiagnostics(
        energy=energy, length=length, energy_spread=spread,
        min_rho=float(rho.min()), min_phitt=min_phitt,
    )


def covariant_t_derivative(psi_slices, p: PathGrid):
    """``D_t psi = psi_t - (grad psi, grad phi_t)_phi / 2`` slice by slice."""
    psi = np.asarray(psi_slices, dtype=float)
    if psi.shape != p.slices.shape:
        raise ValueError("psi must have one slice per path slice")
    psi_t = time_derivative(psi)
    phi_t = time_derivative(p.slices)
    rho = density(p.slices)
    cross = partial_x(psi) * partial_x(phi_t) + partial_y(psi) * partial_y(phi_t)
    return psi_t - 0.5 * cross / rho


def interpolate(p: PathGrid, lam: float):
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    x = lam * p.M
    k = min(int(np.floor(x)), p.M - 1)
    w = x - k
    if w == 0.0:
        return p.slices[k].copy()
    if w == 1.0:
        return p.slices[k + 1].copy()
    return (1.0 - w) * p.slices[k] + w * p.slices[k + 1]


def arc_fraction(p: PathGrid, lam: float, diag: PathDiagnostics | None = None) -> float:
    """Fraction of the discrete length covered up to ``t = lam``."""
    diag = diag or path_energy_length(p)
    if diag.length == 0.0:
        return lam
    root = np.sqrt(diag.energy)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (root[:-1] + root[1:]) / p.M)])
    return float(np.interp(lam, p.t, cum) / diag.length)


# ------------------------------------------------------------------ linear algebra

class _SlicePreconditioner:
    """Inverse of ``rho_k psi_tt + (a_k / 2) lap psi`` with slice-mean coefficients.

    Diagonal in the Fourier basis of the 5-point Laplacian; each mode is a
    tridiagonal system in t, solved by a batched Thomas sweep.
    """

    def __init__(self, rho, phi_tt, N: int, M: int):
        K = M - 1
        r = rho.reshape(K, -1).mean(axis=1)
        a = phi_tt.reshape(K, -1).mean(axis=1)
        ky = np.fft.rfftfreq(N, d=1.0 / N)
        kx = np.fft.fftfreq(N, d=1.0 / N)
        h = 1.0 / N
        lam = (2.0 / h**2) * (2.0 - np.cos(2 * np.pi * kx[:, None] * h) - np.cos(2 * np.pi * ky[None, :] * h))
        off = (r * M * M)[:, None, None]
        diag = -2.0 * off - 0.5 * a[:, None, None] * lam[None]
        self.N = N
        self.K = K
        self.off = off
        cp = np.empty_like(diag)
        den = np.empty_like(diag)
        den[0] = diag[0]
        cp[0] = off[0] / den[0]
        for k in range(1, K):
            den[k] = diag[k] - off[k] * cp[k - 1]
            cp[k] = off[k] / den[k]
        self.cp = cp
        self.den = den

    def solve(self, rhs):
        rhs = rhs.reshape(self.K, self.N, self.N)
        d = np.fft.rfft2(rhs)
        off = self.off
        for k in range(self.K):
            if k:
                d[k] -= off[k] * d[k - 1]
            d[k] /= self.den[k]
        for k in range(self.K - 2, -1, -1):
            d[k] -= self.cp[k] * d[k + 1]
        return np.fft.irfft2(d, s=(self.N, self.N)).ravel()


def _newton_direction(slices, F, rtol: float):
    M = slices.shape[0] - 1
    N = slices.shape[-1]
    rho, a, gx, gy = kernels.geodesic_coefficients(slices)
    shape = (M - 1, N, N)
    n = (M - 1) * N * N
    full = np.zeros((M + 1, N, N))

    def matvec(v):
        full[1:-1] = v.reshape(shape)
        return kernels.geodesic_matvec(full, rho, a, gx, gy).ravel()

    pre = _SlicePreconditioner(rho, a, N, M)
    A = LinearOperator((n, n), matvec=matvec, dtype=float)
    P = LinearOperator((n, n), matvec=pre.solve, dtype=float)
    b = F.ravel()
    x0 = pre.solve(b)
    bnorm = np.linalg.norm(b)
    x = x0
    for _ in range(4):
        x, info = gmres(A, b, x0=x, rtol=rtol, atol=0.0, restart=60, maxiter=20, M=P)
        res = np.linalg.norm(b - A @ x)
        if res <= 10 * rtol * bnorm:
            break
    else:
        if res > 1e-6 * bnorm:
            raise ConvergenceError(f"inner linear solve stalled at relative residual {res / bnorm:.2e}")
    return x.reshape(shape)


def _admissible(slices, margin):
    rho, a, _, _ = kernels.geodesic_coefficients(slices)
    return rho.min() > margin and a.min() > 0.0


def _check_endpoint(phi, margin, label):
    try:
        make_metric(phi, margin)
    except PositivityError as exc:
        raise PositivityError(f"endpoint {label} is not a valid potential: {exc}", iterate=phi, where=label) from exc


def initial_path(phi0, phi1, eps: float, M: int):
    t = np.linspace(0.0, 1.0, M + 1)[:, None, None]
    return (1.0 - t) * phi0[None] + t * phi1[None] + 0.5 * eps * t * (t - 1.0)


def _retarget(init: PathGrid, phi0, phi1, eps: float):
    """Move a nearby path onto new endpoints and a new eps (warm start)."""
    t = init.t[:, None, None]
    s = init.slices + (1.0 - t) * (phi0 - init.start) + t * (phi1 - init.end)
    s = s + 0.5 * (eps - init.eps) * t * (t - 1.0)
    s[0] = phi0
    s[-1] = phi1
    return s


def solve_epsilon_geodesic(phi0, phi1, eps: float, opts: SolveOptions | None = None,
                           init: PathGrid | None = None):
    """Damped Newton solve of the discrete eps-geodesic problem.

    Returns ``(PathGrid, PathDiagnostics)``; the residual max-norm of the
    returned path is at most ``opts.newton_tol``.
    """
    opts = opts or SolveOptions()
    phi0 = np.asarray(phi0, dtype=float)
    phi1 = np.asarray(phi1, dtype=float)
    if not eps > 0:
        raise ValueError("eps must be positive")
    margin = opts.positivity_margin
    _check_endpoint(phi0, margin, "phi0")
    _check_endpoint(phi1, margin, "phi1")
    N = GridSpec.of(phi0).N
    M = opts.time_steps(N)

    slices = None
    if init is not None and init.M == M and init.slices.shape[-1] == N:
        slices = _retarget(init, phi0, phi1, eps)
        if not _admissible(slices, margin):
            s2 = init.slices.copy()
            s2 += _retarget(init, phi0, phi1, init.eps) - init.slices
            slices = s2 if _admissible(s2, margin) else None
    if slices is None:
        slices = initial_path(phi0, phi1, eps, M)
    slices[0] = phi0
    slices[-1] = phi1

    F = kernels.geodesic_residual(slices, eps)
    r = float(np.abs(F).max())
    it = 0
    while r > opts.newton_tol:
        if it >= opts.max_newton:
            raise ConvergenceError(
                f"Newton did not reach {opts.newton_tol:g} in {opts.max_newton} steps (residual {r:.2e})",
                iterate=PathGrid(slices, eps), where=eps,
            )
        delta = _newton_direction(slices, F, opts.linear_rtol)
        norm0 = np.linalg.norm(F)
        theta = 1.0
        accepted = None
        fallback = None
        while theta >= opts.damping_min:
            trial = slices.copy()
            trial[1:-1] -= theta * delta
            if _admissible(trial, margin):
                Ft = kernels.geodesic_residual(trial, eps)
                if np.linalg.norm(Ft) < norm0:
                    accepted = (trial, Ft)
                    break
                if fallback is None:
                    fallback = (trial, Ft)
            theta *= 0.5
        if accepted is None:
            if fallback is None:
                raise PositivityError(
                    f"Newton iterate leaves the convex cone at eps={eps:g} (damping exhausted)",
                    iterate=PathGrid(slices, eps), where=eps,
                )
            accepted = fallback
        slices, F = accepted
        r = float(np.abs(F).max())
        it += 1
        log.debug("eps=%g newton %d theta=%g residual=%.3e", eps, it, theta, r)

    p = PathGrid(slices, float(eps))
    diag = path_energy_length(p)
    diag.newton_iterations = it
    if diag.min_phitt <= 0.0 or diag.min_rho <= margin:
        raise PositivityError(f"converged path is not convex at eps={eps:g}", iterate=p, where=eps)
    return p, diag


def eps_ladder(eps_start: float, eps_target: float):
    """``[eps_start, ..., 4 eps_target, 2 eps_target, eps_target]`` (halving toward the target)."""
    ladder = [eps_target]
    while ladder[-1] * 2.0 <= eps_start * (1 + 1e-12):
        ladder.append(ladder[-1] * 2.0)
    if ladder[-1] < eps_start:
        ladder.append(eps_start)
    return ladder[::-1]


def continuation_solve(phi0, phi1, opts: SolveOptions | None = None, init: PathGrid | None = None):
    """Solve at ``eps_start`` then halve eps down to ``eps_target`` with warm starts."""
    opts = opts or SolveOptions()
    phi0 = np.asarray(phi0, dtype=float)
    phi1 = np.asarray(phi1, dtype=float)
    _check_endpoint(phi0, opts.positivity_margin, "phi0")
    _check_endpoint(phi1, opts.positivity_margin, "phi1")
    path = init
    ladder = []
    total = 0
    for eps in eps_ladder(opts.eps_start, opts.eps_target):
        try:
            path, diag = solve_epsilon_geodesic(phi0, phi1, eps, opts, init=path)
        except (PositivityError, ConvergenceError) as exc:
            exc.where = eps
            exc.args = (f"{exc.args[0]} [continuation level eps={eps:g}]",)
            raise
        total += diag.newton_iterations
        ladder.append((eps, diag.length))
    diag.ladder = ladder
    diag.newton_iterations = total
    return path, diag


def _constant_path(phi, M):
    return PathGrid(np.repeat(np.asarray(phi, dtype=float)[None], M + 1, axis=0), 0.0)


def measure_distance(phi0, phi1, opts: SolveOptions | None = None, init: PathGrid | None = None) -> DistanceResult:
    """Distance estimate with error bar and the final path.

    With ``init`` (a solved path between nearby endpoints) only the last two
    ladder levels are solved; on failure the full continuation runs.
    """
    opts = opts or SolveOptions()
    phi0 = np.asarray(phi0, dtype=float)
    phi1 = np.asarray(phi1, dtype=float)
    if np.array_equal(phi0, phi1):
        _check_endpoint(phi0, opts.positivity_margin, "phi0")
        p = _constant_path(phi0, opts.time_steps(phi0.shape[-1]))
        return DistanceResult(0.0, 0.0, p, path_energy_length(p))
    eps_t = opts.eps_target
    path = diag = None
    if init is not None and opts.eps_start >= 2 * eps_t:
        try:
            coarse, cdiag = solve_epsilon_geodesic(phi0, phi1, 2 * eps_t, opts, init=init)
            path, diag = solve_epsilon_geodesic(phi0, phi1, eps_t, opts, init=coarse)
            diag.ladder = [(2 * eps_t, cdiag.length), (eps_t, diag.length)]
        except (PositivityError, ConvergenceError):
            path = None
    if path is None:
        path, diag = continuation_solve(phi0, phi1, opts)
    return DistanceResult(diag.length, distance_error_bar(diag), path, diag)


def distance_error_bar(diag: PathDiagnostics) -> float:
    """Continuation gap between the last two eps levels plus the speed-nonuniformity gap."""
    gap = 0.0
    if len(diag.ladder) >= 2:
        gap = abs(diag.ladder[-1][1] - diag.ladder[-2][1])
    return gap + diag.energy_length_gap


def distance(phi0, phi1, opts: SolveOptions | None = None):
    """``(length at eps_target, error bar)``; exactly ``(0, 0)`` on the diagonal."""
    res = measure_distance(phi0, phi1, opts)
    return res.length, res.error_bar


# ------------------------------------------------------------------ serialization

def path_to_bytes(p: PathGrid) -> bytes:
    out = io.BytesIO()
    out.write(PATH_MAGIC)
    out.write(struct.pack("<IId", p.grid.N, p.M, float(p.eps)))
    for s in p.slices:
        out.write(field_to_bytes(s))
    return out.getvalue()


def path_from_bytes(data: bytes) -> PathGrid:
    buf = io.BytesIO(data)
    if buf.read(len(PATH_MAGIC)) != PATH_MAGIC:
        raise ValueError("bad path magic")
    N, M, eps = struct.unpack("<IId", buf.read(16))
    slices = np.stack([_read_field(buf) for _ in range(M + 1)])
    if slices.shape[-1] != N:
        raise ValueError("field size does not match path header")
    return PathGrid(slices, eps)


def write_path(path, p: PathGrid) -> None:
    Path(path).write_bytes(path_to_bytes(p))


def read_path(path) -> PathGrid:
    return path_from_bytes(Path(path).read_bytes())
