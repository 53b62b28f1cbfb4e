"""Static capacitance matrices and leading-order resonant frequencies.

Finite chains give a real symmetric N x N matrix, the periodic dimer
chain a Hermitian 2 x 2 matrix per quasimomentum. Order 0 solves the
monopole system C = 4 pi A^-1 directly; higher orders solve the static
single-layer system in a solid-harmonic basis (only m = 0 couples to the
constant boundary data on a collinear chain).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from .chains import ChainGeometry, DimerCell
from .lattice import (
    QuasiMomentum,
    dimer_sum_f,
    harmonic_quasi_sum,
    static_image_sum,
)
from .specfun import translation_coeff_C

FOUR_PI = 4.0 * math.pi
SQRT_FOUR_PI = math.sqrt(FOUR_PI)
DEGENERACY_TOL = 1e-10
STRUCTURE_TOL = 1e-10


class CapacitanceError(ValueError):
    """Invalid input or broken structural invariant of a capacitance matrix."""


@dataclass(frozen=True)
class CapacitanceMatrix:
    entries: np.ndarray
    alpha: QuasiMomentum | None = None
    method: str = "multipole-static"
    order: int = 0
    epsilon_scale: float | None = None
    diagonal_scale: float | None = None
    validate: bool = True
    # Hermitian defect and diagonal spread of the solve before symmetrisation
    solve_defect: float = 0.0

    def __post_init__(self) -> None:
        entries = np.array(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise CapacitanceError("capacitance matrix must be square")
        if self.method not in ("multipole-static", "dilute-asymptotic", "nearest-neighbour"):
            raise CapacitanceError(f"unknown method {self.method!r}")
        if self.alpha is None and np.iscomplexobj(entries):
            if np.max(np.abs(entries.imag), initial=0.0) > STRUCTURE_TOL * np.max(np.abs(entries)):
                raise CapacitanceError("finite capacitance matrix must be real")
            entries = entries.real.copy()
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if self.validate:
            self._check_structure()

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_quasiperiodic(self) -> bool:
        return self.alpha is not None

    def hermitian_defect(self) -> float:
        e = self.entries
        scale = max(float(np.max(np.abs(e))), 1e-300)
        return float(np.max(np.abs(e - e.conj().T)) / scale)

    def diagonal_spread(self) -> float:
        diag = np.diag(self.entries)
        scale = max(float(np.max(np.abs(diag))), 1e-300)
        return float(np.max(np.abs(diag - diag[0])) / scale)

    def _check_structure(self) -> None:
        if self.solve_defect > STRUCTURE_TOL:
            raise CapacitanceError(f"solve broke the Hermitian structure (defect {self.solve_defect:.3g})")
        if self.hermitian_defect() > STRUCTURE_TOL:
            raise CapacitanceError(f"matrix not Hermitian (defect {self.hermitian_defect():.3g})")
        if self.is_quasiperiodic and self.n == 2 and self.diagonal_spread() > STRUCTURE_TOL:
            raise CapacitanceError(f"unequal diagonal (spread {self.diagonal_spread():.3g})")


# ---------------------------------------------------------------------------
# Static solid-harmonic translation (m = 0 sector)
# ---------------------------------------------------------------------------


def _structure_defect(C: np.ndarray, constant_diagonal: bool) -> float:
    scale = max(float(np.max(np.abs(C))), 1e-300)
    defect = float(np.max(np.abs(C - C.conj().T))) / scale
    if constant_diagonal:
        diag = np.diag(C)
        defect = max(defect, float(np.max(np.abs(diag - diag[0]))) / scale)
    return defect


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def static_translation_factor(l: int, lp: int) -> float:
    """Coefficient K with r^-(l+1) Y_l^0 = sum_l' K Y_{l+l'}^0(b) |b|^-(l+l'+1) r'^l' Y_l'^0.

    Shift convention x = x' + b as in the Helmholtz addition theorem; this
    is its k -> 0 limit, where only lambda = l + l' survives.
    """
    lam = l + lp
    c = translation_coeff_C(l, 0, lp, 0, lam, 0).real
    return c * _double_factorial(2 * lam - 1) / (_double_factorial(2 * l - 1) * _double_factorial(2 * lp + 1))


def static_translation_coeff(l: int, lp: int, shift: float) -> float:
    """Axial solid-harmonic translation coefficient for a signed shift b along the axis."""
    lam = l + lp
    y = math.sqrt((2 * lam + 1) / FOUR_PI) * (1.0 if shift > 0 or lam % 2 == 0 else -1.0)
    return static_translation_factor(l, lp) * y / abs(shift) ** (lam + 1)


def _solve_static_system(system: np.ndarray, radii: np.ndarray, nl: int) -> np.ndarray:
    n = radii.size
    rhs = np.zeros((n * nl, n), dtype=system.dtype)
    rhs[np.arange(n) * nl, np.arange(n)] = SQRT_FOUR_PI
    density = np.linalg.solve(system, rhs)
    return -(radii**2)[:, None] * SQRT_FOUR_PI * density[np.arange(n) * nl, :]


def _finite_static_system(centers: np.ndarray, radii: np.ndarray, order: int) -> np.ndarray:
    nl = order + 1
    n = centers.size
    ls = np.arange(nl)
    system = np.zeros((n * nl, n * nl))
    for i in range(n):
        system[i * nl + ls, i * nl + ls] = -radii[i] / (2 * ls + 1)
        for j in range(n):
            if i == j:
                continue
            shift = centers[i] - centers[j]
            for l in range(nl):
                src = -radii[j] ** (l + 2) / (2 * l + 1)
                for lp in range(nl):
                    system[i * nl + lp, j * nl + l] = src * static_translation_coeff(l, lp, shift) * radii[i] ** lp
    return system


def finite_capacitance(geom: ChainGeometry, order: int = 0) -> CapacitanceMatrix:
    """Capacitance matrix of a finite collinear chain of spheres."""
    if order < 0:
        raise CapacitanceError("order must be >= 0")
    centers, radii = geom.centers, geom.radii
    if order == 0:
        dist = np.abs(centers[:, None] - centers[None, :])
        np.fill_diagonal(dist, 1.0)
        A = 1.0 / dist
        np.fill_diagonal(A, 1.0 / radii)
        C = FOUR_PI * np.linalg.inv(A)
    else:
        C = _solve_static_system(_finite_static_system(centers, radii, order), radii, order + 1)
    defect = _structure_defect(C, constant_diagonal=False)
    C = 0.5 * (C + C.T)
    return CapacitanceMatrix(entries=C, method="multipole-static", order=order, solve_defect=defect)


# ---------------------------------------------------------------------------
# Quasiperiodic dimer cell
# ---------------------------------------------------------------------------


def _check_cell(q: QuasiMomentum, cell: DimerCell) -> None:
    if not math.isclose(q.L, cell.L, rel_tol=1e-12):
        raise CapacitanceError(f"quasimomentum period {q.L} does not match cell length {cell.L}")


def _quasi_static_system(q: QuasiMomentum, cell: DimerCell, order: int) -> np.ndarray:
    nl = order + 1
    centers, radii = cell.centers, cell.radii
    system = np.zeros((2 * nl, 2 * nl), dtype=complex)
    image = {}
    for i in range(2):
        for j in range(2):
            shift = centers[i] - centers[j]
            for l in range(nl):
                src = -radii[j] ** (l + 2) / (2 * l + 1)
                for lp in range(nl):
                    lam = l + lp
                    key = (lam, shift)
                    if key not in image:
                        image[key] = static_image_sum(lam, shift, q)
                    coupling = static_translation_factor(l, lp) * math.sqrt((2 * lam + 1) / FOUR_PI) * image[key]
                    system[i * nl + lp, j * nl + l] = src * coupling * radii[i] ** lp
        for l in range(nl):
            system[i * nl + l, i * nl + l] += -radii[i] / (2 * l + 1)
    return system


def quasi_capacitance(q: QuasiMomentum, cell: DimerCell, order: int = 0) -> CapacitanceMatrix:
    """2 x 2 quasiperiodic capacitance matrix of the dimer cell, alpha != 0."""
    if q.is_zero():
        raise CapacitanceError("the quasiperiodic static problem is singular at alpha = 0")
    if order < 0:
        raise CapacitanceError("order must be >= 0")
    _check_cell(q, cell)
    if order == 0:
        L, R = cell.L, cell.R
        diag = 1.0 / R + harmonic_quasi_sum(q) / L
        off = dimer_sum_f(q, cell.d) / L
        A = np.array([[diag, off], [np.conj(off), diag]], dtype=complex)
        C = FOUR_PI * np.linalg.inv(A)
    else:
        C = _solve_static_system(_quasi_static_system(q, cell, order), cell.radii, order + 1)
    defect = _structure_defect(C, constant_diagonal=True)
    C = 0.5 * (C + C.conj().T)
    C[1, 1] = C[0, 0] = 0.5 * (C[0, 0] + C[1, 1]).real
    return CapacitanceMatrix(entries=C, alpha=q, method="multipole-static", order=order, solve_defect=defect)


def zero_momentum_limit(cell: DimerCell) -> CapacitanceMatrix:
    """Order-0 limit of the quasiperiodic matrix as alpha -> 0.

    The divergent image sum is common to all entries of A, so C tends to
    c (1, -1; -1, 1) with c = 2 pi / (1/R - g/L) and g the finite part of
    f(alpha, d) minus the harmonic sum, g = -psi(a) - psi(1 - a) - 2 gamma.
    """
    a = cell.d / cell.L
    g = -digamma(a) - digamma(1.0 - a) - 2.0 * np.euler_gamma
    c = 2.0 * math.pi / (1.0 / cell.R - g / cell.L)
    entries = np.array([[c, -c], [-c, c]], dtype=complex)
    return CapacitanceMatrix(entries=entries, alpha=QuasiMomentum(0.0, cell.L), method="multipole-static", order=0)


# ---------------------------------------------------------------------------
# Dilute asymptotics
# ---------------------------------------------------------------------------


def dilute_quasi_capacitance(
    q: QuasiMomentum, epsilon: float, CapB: float, d: float, L: float
) -> CapacitanceMatrix:
    """Dilute expansion of the quasiperiodic matrix, truncated before O(epsilon^3)."""
    if q.is_zero():
        raise CapacitanceError("the diagonal dilute expansion diverges at alpha = 0")
    if not math.isclose(q.L, L, rel_tol=1e-12):
        raise CapacitanceError("quasimomentum period does not match L")
    cap = epsilon * CapB
    coupling = cap**2 / FOUR_PI
    c11 = cap - coupling * harmonic_quasi_sum(q) / L
    c12 = -coupling * dimer_sum_f(q, d) / L
    entries = np.array([[c11, c12], [np.conj(c12), c11]], dtype=complex)
    return CapacitanceMatrix(
        entries=entries, alpha=q, method="dilute-asymptotic", epsilon_scale=epsilon, diagonal_scale=cap
    )


def dilute_finite_capacitance(positions, epsilon: float, CapB: float) -> CapacitanceMatrix:
    """Dilute expansion of the finite matrix: eps CapB on the diagonal, point couplings off it."""
    z = np.asarray(positions, dtype=float)
    dist = np.abs(z[:, None] - z[None, :])
    off = ~np.eye(z.size, dtype=bool)
    if np.any(dist[off] == 0.0):
        raise CapacitanceError("positions must be distinct")
    cap = epsilon * CapB
    with np.errstate(divide="ignore"):
        entries = np.where(off, -(cap**2) / (FOUR_PI * np.where(off, dist, 1.0)), cap)
    return CapacitanceMatrix(
        entries=entries, method="dilute-asymptotic", epsilon_scale=epsilon, diagonal_scale=cap
    )


# ---------------------------------------------------------------------------
# Frequencies and modes
# ---------------------------------------------------------------------------


def sphere_volume(R: float) -> float:
    return 4.0 / 3.0 * math.pi * R**3


@dataclass(frozen=True)
class BandPoint:
    alpha: QuasiMomentum
    omega1: float
    omega2: float
    lambda1: float
    lambda2: float
    c12: complex
    theta_alpha: float
    coeffs: np.ndarray
    degenerate: bool


def band_point(q: QuasiMomentum, C: CapacitanceMatrix, delta: float, R: float) -> BandPoint:
    """Bloch frequencies and coefficient vectors from the closed-form 2 x 2 eigenpairs.

    lambda_{1,2} = C11 -/+ |C12| with vectors (-/+ e^{i theta}, 1)/sqrt2,
    e^{i theta} = C12/|C12|. The volume is that of a sphere of radius R.
    """
    if C.n != 2:
        raise CapacitanceError("band_point needs a 2 x 2 matrix")
    c11 = float(np.real(C.entries[0, 0]))
    c12 = complex(C.entries[0, 1])
    mod = abs(c12)
    lam1, lam2 = c11 - mod, c11 + mod
    vol = sphere_volume(R)
    omega = [math.sqrt(max(delta * lam, 0.0) / vol) for lam in (lam1, lam2)]
    degenerate = mod < DEGENERACY_TOL * abs(c11)
    if degenerate:
        theta = math.nan
        coeffs = np.eye(2, dtype=complex)
    else:
        theta = math.atan2(c12.imag, c12.real) % (2.0 * math.pi)
        phase = c12 / mod
        coeffs = np.array([[-phase, phase], [1.0, 1.0]], dtype=complex) / math.sqrt(2.0)
    return BandPoint(q, omega[0], omega[1], lam1, lam2, c12, theta, coeffs, degenerate)


@dataclass(frozen=True)
class Spectrum:
    """Ascending frequencies, volume-weighted eigenvalues and mode vectors (columns)."""

    frequencies: np.ndarray
    eigenvalues: np.ndarray
    modes: np.ndarray
    delta: float

    @property
    def n(self) -> int:
        return int(self.frequencies.size)


def finite_frequencies(C: CapacitanceMatrix, delta: float, radii) -> Spectrum:
    """omega_j = sqrt(delta * mu_j) with mu_j the eigenvalues of V^-1/2 C V^-1/2.

    For equal radii this is sqrt(delta lambda_j / |D|) with lambda_j the
    eigenvalues of C, and the modes are its orthonormal eigenvectors.
    """
    if C.is_quasiperiodic:
        raise CapacitanceError("finite_frequencies needs a finite matrix")
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (C.n,))
    scale = 1.0 / np.sqrt(sphere_volume(1.0) * radii**3)
    weighted = scale[:, None] * np.asarray(C.entries) * scale[None, :]
    mu, vecs = np.linalg.eigh(0.5 * (weighted + weighted.T))
    if np.allclose(radii, radii[0], rtol=0, atol=0):
        modes = vecs
    else:
        modes = scale[:, None] * vecs
        modes /= np.linalg.norm(modes, axis=0)
    # fixed sign: largest-modulus entry positive
    pivot = np.argmax(np.abs(modes), axis=0)
    modes = modes * np.sign(modes[pivot, np.arange(C.n)])[None, :]
    freq = np.sqrt(np.clip(delta * mu, 0.0, None))
    return Spectrum(frequencies=freq, eigenvalues=mu, modes=modes, delta=delta)
