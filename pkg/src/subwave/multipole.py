"""Helmholtz single-layer potentials on collinear spheres in a multipole basis.

Densities on each sphere are expanded in orthonormal Y_l^m (l <= lmax).
The single layer of Y_l^m on a sphere of radius R is
c j_l(kR) F_l(kr) Y_l^m outside and c F_l(kR) j_l(kr) Y_l^m inside, with
c = -i k R^2 and F the radiating Hankel function h^(1) ("outgoing" kernel)
or i y ("standing" kernel, the real part of the Green's function). Fields of
other spheres, and of periodic images, are re-expanded about each sphere
with the addition theorem.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .chains import ChainGeometry, DimerCell
from .lattice import LatticeSumConfig, QuasiMomentum, helmholtz_image_sums
from .specfun import radial_all, radial_deriv_all, spherical_jn_all, spherical_jn_deriv_all, translation_coeff_C

_KERNEL_RADIAL = {"outgoing": "h", "standing": "iy"}


class CharacteristicValueError(RuntimeError):
    """Wrong number of characteristic values found in a window."""

    def __init__(self, message: str, found: list[float]):
        super().__init__(message)
        self.found = found


@dataclass(frozen=True)
class MultipoleBasis:
    """Per-resonator (l, m) layout, l-major with m = -l..l."""

    order_lmax: int

    def __post_init__(self) -> None:
        if self.order_lmax < 0:
            raise ValueError("order_lmax must be >= 0")

    @property
    def block_size(self) -> int:
        return (self.order_lmax + 1) ** 2

    @property
    def indices(self) -> list[tuple[int, int]]:
        return [(l, m) for l in range(self.order_lmax + 1) for m in range(-l, l + 1)]

    @property
    def degrees(self) -> np.ndarray:
        return np.array([l for l, _ in self.indices])

    @property
    def orders(self) -> np.ndarray:
        return np.array([m for _, m in self.indices])


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    omega: float
    basis: MultipoleBasis
    n_resonators: int
    alpha: QuasiMomentum | None = None
    delta: float | None = None
    kernel: str = "outgoing"

    def __post_init__(self) -> None:
        size = self.n_resonators * self.basis.block_size
        if self.matrix.shape != (size, size):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match layout {size}")

    def smallest_singular_value(self) -> float:
        return float(np.linalg.svd(self.matrix, compute_uv=False)[-1])


@dataclass(frozen=True)
class SingleLayerData:
    """Boundary values and normal derivatives of the single layer on every sphere."""

    value_interior: OperatorMatrix
    value_exterior: OperatorMatrix
    deriv_interior: OperatorMatrix
    deriv_exterior: OperatorMatrix


@lru_cache(maxsize=32)
def _coupling_table(lmax: int) -> np.ndarray:
    """T[row, col, lam] = C(l, m, l', m, lam, 0) sqrt((2 lam + 1)/4pi), rows (l', m), cols (l, m)."""
    basis = MultipoleBasis(lmax)
    idx = basis.indices
    table = np.zeros((len(idx), len(idx), 2 * lmax + 1), dtype=complex)
    for r, (lp, mp) in enumerate(idx):
        for c, (l, m) in enumerate(idx):
            if m != mp:
                continue
            for lam in range(abs(l - lp), l + lp + 1):
                table[r, c, lam] = translation_coeff_C(l, m, lp, m, lam, 0) * math.sqrt((2 * lam + 1) / (4.0 * math.pi))
    table.setflags(write=False)
    return table


def single_layer_sphere_coeff(l: int, k: float, R: float, side: str, kernel: str = "outgoing") -> tuple[complex, complex]:
    """Radial coefficient and boundary value of the single layer of Y_l^m on one sphere.

    side "exterior": field = coefficient * F_l(k r) Y, coefficient c j_l(kR).
    side "interior": field = coefficient * j_l(k r) Y, coefficient c F_l(kR).
    """
    if not (k > 0 and R > 0):
        raise ValueError("k and R must be positive")
    kind = _KERNEL_RADIAL[kernel]
    c = -1j * k * R**2
    j = spherical_jn_all(l, k * R)[l]
    f = radial_all(kind, l, k * R)[l]
    if side == "exterior":
        coeff = c * j
        return coeff, coeff * f
    if side == "interior":
        coeff = c * f
        return coeff, coeff * j
    raise ValueError(f"side must be interior or exterior, got {side!r}")


def _blocks(
    centers: np.ndarray,
    radii: np.ndarray,
    k: float,
    basis: MultipoleBasis,
    kernel: str,
    couplings: dict[tuple[int, int], np.ndarray],
) -> SingleLayerData:
    """Assemble the four matrices from per-pair radial coupling vectors."""
    kind = _KERNEL_RADIAL[kernel]
    lmax = basis.order_lmax
    deg = basis.degrees
    nb = basis.block_size
    n = centers.size
    table = _coupling_table(lmax)
    size = n * nb
    val_in = np.zeros((size, size), dtype=complex)
    val_out = np.zeros((size, size), dtype=complex)
    der_in = np.zeros((size, size), dtype=complex)
    der_out = np.zeros((size, size), dtype=complex)
    jr, jd, fr, fd, cs = [], [], [], [], []
    for R in radii:
        x = k * R
        jr.append(spherical_jn_all(lmax, x)[deg])
        jd.append(spherical_jn_deriv_all(lmax, x)[deg])
        fr.append(radial_all(kind, lmax, x)[deg])
        fd.append(radial_deriv_all(kind, lmax, x)[deg])
        cs.append(-1j * k * R**2)
    for i in range(n):
        si = slice(i * nb, (i + 1) * nb)
        c = cs[i]
        val_out[si, si] = np.diag((c * jr[i]) * fr[i])
        val_in[si, si] = np.diag((c * fr[i]) * jr[i])
        der_out[si, si] = np.diag((c * jr[i]) * k * fd[i])
        der_in[si, si] = np.diag((c * fr[i]) * k * jd[i])
    for (i, j), radial in couplings.items():
        si = slice(i * nb, (i + 1) * nb)
        sj = slice(j * nb, (j + 1) * nb)
        trans = table[:, :, : radial.size] @ radial
        src = (cs[j] * jr[j])[None, :]
        value = jr[i][:, None] * trans * src
        deriv = (k * jd[i])[:, None] * trans * src
        val_out[si, sj] += value
        val_in[si, sj] += value
        der_out[si, sj] += deriv
        der_in[si, sj] += deriv
    meta = dict(omega=k, basis=basis, n_resonators=n, kernel=kernel)
    return SingleLayerData(
        value_interior=OperatorMatrix(val_in, **meta),
        value_exterior=OperatorMatrix(val_out, **meta),
        deriv_interior=OperatorMatrix(der_in, **meta),
        deriv_exterior=OperatorMatrix(der_out, **meta),
    )


def assemble_finite_single_layer(
    geom: ChainGeometry, k: float, basis: MultipoleBasis, kernel: str = "outgoing"
) -> SingleLayerData:
    """Single-layer data of a finite chain; off-diagonal blocks via the addition theorem."""
    if not k > 0:
        raise ValueError("wavenumber must be positive")
    kind = _KERNEL_RADIAL[kernel]
    lam_max = 2 * basis.order_lmax
    centers = geom.centers
    couplings = {}
    for i in range(geom.n):
        for j in range(geom.n):
            if i == j:
                continue
            b = centers[i] - centers[j]
            radial = radial_all(kind, lam_max, k * abs(b))
            sign = 1.0 if b > 0 else -1.0
            couplings[(i, j)] = radial * sign ** np.arange(lam_max + 1)
    return _blocks(centers, geom.radii, k, basis, kernel, couplings)


def assemble_quasi_single_layer(
    cell: DimerCell,
    k: float,
    q: QuasiMomentum,
    basis: MultipoleBasis,
    cfg: LatticeSumConfig | None = None,
    kernel: str = "outgoing",
) -> SingleLayerData:
    """Single-layer data of the periodic dimer chain at quasimomentum q.

    Same-cell coupling, lattice sums over the images of each sphere, and
    cross-resonator lattice sums over the shifted image rows.
    """
    if q.is_zero():
        raise ValueError("alpha = 0 is not supported")
    if not math.isclose(q.L, cell.L, rel_tol=1e-12):
        raise ValueError("quasimomentum period does not match the cell")
    cfg = cfg or LatticeSumConfig()
    kind = _KERNEL_RADIAL[kernel]
    lam_max = 2 * basis.order_lmax
    centers = cell.centers
    couplings = {}
    cache: dict[float, np.ndarray] = {}
    for i in range(2):
        for j in range(2):
            offset = float(centers[i] - centers[j])
            if offset not in cache:
                cache[offset] = helmholtz_image_sums(kind, lam_max, k, q, offset, cfg)[0]
            couplings[(i, j)] = cache[offset]
    data = _blocks(centers, cell.radii, k, basis, kernel, couplings)
    return SingleLayerData(*(
        OperatorMatrix(m.matrix, m.omega, m.basis, m.n_resonators, alpha=q, kernel=kernel)
        for m in (data.value_interior, data.value_exterior, data.deriv_interior, data.deriv_exterior)
    ))


def boundary_operator(S: SingleLayerData, omega: float, delta: float) -> OperatorMatrix:
    """A = dS/dnu|_- - delta dS/dnu|_+ on the assembled single-layer data."""
    if not math.isclose(S.deriv_interior.omega, omega, rel_tol=1e-14):
        raise ValueError("single-layer data was assembled at a different frequency")
    ref = S.deriv_interior
    matrix = ref.matrix - delta * S.deriv_exterior.matrix
    return OperatorMatrix(matrix, omega, ref.basis, ref.n_resonators, ref.alpha, delta, ref.kernel)


def _operator(geom, q, omega, delta, basis, cfg, kernel) -> OperatorMatrix:
    if isinstance(geom, DimerCell):
        if q is None:
            raise ValueError("a periodic cell needs a quasimomentum")
        S = assemble_quasi_single_layer(geom, omega, q, basis, cfg, kernel)
    else:
        S = assemble_finite_single_layer(geom, omega, basis, kernel)
    return boundary_operator(S, omega, delta)


def _hermitian_form(A: OperatorMatrix, radii: np.ndarray) -> np.ndarray:
    """-i diag(1/(k j_l'(kR_i))) A diag(1/(c_j j_l(kR_j))): Hermitian for the standing kernel."""
    k = A.omega
    deg = A.basis.degrees
    lmax = A.basis.order_lmax
    left, right = [], []
    for R in radii:
        left.append(1.0 / (k * spherical_jn_deriv_all(lmax, k * R)[deg]))
        right.append(1.0 / (-1j * k * R**2 * spherical_jn_all(lmax, k * R)[deg]))
    left = np.concatenate(left)
    right = np.concatenate(right)
    H = -1j * left[:, None] * A.matrix * right[None, :]
    return 0.5 * (H + H.conj().T)


def _workers() -> int:
    env = os.environ.get("SUBWAVE_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _parallel_map(fn, items):
    items = list(items)
    if _workers() == 1 or len(items) < 8:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        return list(pool.map(fn, items))


def find_characteristic_values(
    geom: ChainGeometry | DimerCell,
    q: QuasiMomentum | None,
    delta: float,
    window: tuple[float, float],
    n_expected: int,
    basis: MultipoleBasis | None = None,
    cfg: LatticeSumConfig | None = None,
    kernel: str = "standing",
    scan_points: int = 200,
    rtol: float = 1e-10,
) -> list[float]:
    """Real resonant frequencies in a window.

    kernel "standing": the Hermitian form of the standing-wave operator has
    real zero crossings; roots are bracketed by changes in the number of
    positive eigenvalues over the scan and refined with Brent's method.
    kernel "outgoing": local minima of the smallest singular value of the
    radiating operator, refined by golden-section search.
    Raises CharacteristicValueError unless exactly n_expected values are found.
    """
    basis = basis or MultipoleBasis(0)
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    grid = np.linspace(lo, hi, scan_points)
    radii = np.asarray(geom.radii, dtype=float)

    if kernel == "standing":
        def spectrum(w: float) -> np.ndarray:
            return np.linalg.eigvalsh(_hermitian_form(_operator(geom, q, w, delta, basis, cfg, kernel), radii))

        eigs = _parallel_map(spectrum, grid)
        positive = [int(np.sum(e > 0)) for e in eigs]
        roots: list[float] = []

        def refine(a: float, b: float, pos_a: int, pos_b: int, depth: int = 0) -> None:
            drops = abs(pos_a - pos_b)
            if drops == 0:
                return
            if drops == 1:
                size = eigs[0].size
                index = size - max(pos_a, pos_b)
                g = lambda w: spectrum(w)[index]
                roots.append(brentq(g, a, b, xtol=rtol * a, rtol=4 * np.finfo(float).eps))
                return
            if depth > 50:
                roots.extend([0.5 * (a + b)] * drops)
                return
            mid = 0.5 * (a + b)
            pos_mid = int(np.sum(spectrum(mid) > 0))
            refine(a, mid, pos_a, pos_mid, depth + 1)
            refine(mid, b, pos_mid, pos_b, depth + 1)

        for t in range(scan_points - 1):
            refine(grid[t], grid[t + 1], positive[t], positive[t + 1])
    elif kernel == "outgoing":
        def sigma(w: float) -> float:
            return _operator(geom, q, w, delta, basis, cfg, kernel).smallest_singular_value()

        values = _parallel_map(sigma, grid)
        roots = []
        for t in range(1, scan_points - 1):
            if values[t] < values[t - 1] and values[t] <= values[t + 1]:
                res = minimize_scalar(
                    sigma, bracket=(grid[t - 1], grid[t], grid[t + 1]), method="golden", tol=rtol
                )
                roots.append(float(res.x))
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    roots = sorted(float(r) for r in roots)
    if len(roots) != n_expected:
        raise CharacteristicValueError(
            f"expected {n_expected} characteristic values in [{lo:.6g}, {hi:.6g}], found {len(roots)}: "
            + ", ".join(f"{r:.10g}" for r in roots),
            roots,
        )
    return roots
