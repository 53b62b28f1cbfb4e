"""Band structure of the periodic dimer chain and its topological diagnostics.

The Zak phase is read off the winding of the off-diagonal capacitance
entry C12 around the origin as alpha runs over the Brillouin zone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .capacitance import BandPoint, band_point, quasi_capacitance, zero_momentum_limit
from .chains import DimerCell
from .lattice import QuasiMomentum

MIN_GRID = 16
SNAP_TOL = 0.1
STEP_LIMIT = math.pi / 2
# quasimomentum phase used in place of alpha = 0 for multipole orders >= 1
ZERO_NUDGE = 1e-8


class TopologyError(ValueError):
    """Base class for failed topological diagnostics."""


class DegeneratePointError(TopologyError):
    def __init__(self, alpha: float):
        super().__init__(f"C12 vanishes at alpha = {alpha:.17g}; the phase is undefined")
        self.alpha = alpha


class UnderResolvedError(TopologyError):
    def __init__(self, alpha: float, step: float):
        super().__init__(f"phase step {step:.3g} rad at alpha = {alpha:.6g} exceeds pi/2; refine the grid")
        self.alpha = alpha
        self.step = step


class AmbiguousError(TopologyError):
    pass


class OriginProximityError(TopologyError):
    pass


@dataclass(frozen=True)
class BandStructure:
    points: tuple[BandPoint, ...]
    grid_n: int
    cell: DimerCell
    delta: float
    order: int

    @property
    def alphas(self) -> np.ndarray:
        return np.array([p.alpha.alpha for p in self.points])

    @property
    def omega1(self) -> np.ndarray:
        return np.array([p.omega1 for p in self.points])

    @property
    def omega2(self) -> np.ndarray:
        return np.array([p.omega2 for p in self.points])

    @property
    def c12(self) -> np.ndarray:
        return np.array([p.c12 for p in self.points])


def alpha_grid(L: float, grid_n: int) -> np.ndarray:
    """Uniform grid alpha_j = (-pi + 2 pi j / n)/L, j = 1..n; ends at pi/L."""
    j = np.arange(1, grid_n + 1)
    return (-math.pi + 2.0 * math.pi * j / grid_n) / L


def compute_band_structure(cell: DimerCell, delta: float, grid_n: int = 128, order: int = 0) -> BandStructure:
    if grid_n < MIN_GRID:
        raise ValueError(f"grid_n must be >= {MIN_GRID}")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    points = []
    for a in alpha_grid(cell.L, grid_n):
        q = QuasiMomentum(float(a), cell.L)
        if q.is_zero() or abs(q.phase) < 1e-14:
            q = QuasiMomentum(0.0, cell.L)
            C = zero_momentum_limit(cell) if order == 0 else quasi_capacitance(
                QuasiMomentum.from_phase(ZERO_NUDGE, cell.L), cell, order
            )
        else:
            C = quasi_capacitance(q, cell, order)
        points.append(band_point(q, C, delta, cell.R))
    return BandStructure(tuple(points), grid_n, cell, delta, order)


@dataclass(frozen=True)
class UnwrappedPhase:
    alphas: np.ndarray
    theta: np.ndarray
    net_change: float
    total_variation: float


def _wrapped_steps(values: np.ndarray) -> np.ndarray:
    steps = np.diff(values)
    return (steps + math.pi) % (2.0 * math.pi) - math.pi


def unwrap_theta(bs: BandStructure) -> UnwrappedPhase:
    """Continuous theta(alpha) over the closed zone, starting at -pi/L (same point as pi/L)."""
    for p in bs.points:
        if p.degenerate:
            raise DegeneratePointError(p.alpha.alpha)
    raw = np.array([p.theta_alpha for p in bs.points])
    # prepend the zone-edge point so the curve is closed
    closed = np.concatenate([[raw[-1]], raw])
    steps = _wrapped_steps(closed)
    big = np.nonzero(np.abs(steps) >= STEP_LIMIT)[0]
    if big.size:
        t = int(big[0])
        raise UnderResolvedError(bs.points[t].alpha.alpha, float(steps[t]))
    theta = closed[0] + np.concatenate([[0.0], np.cumsum(steps)])
    alphas = np.concatenate([[-math.pi / bs.cell.L], bs.alphas])
    return UnwrappedPhase(alphas, theta, float(theta[-1] - theta[0]), float(np.sum(np.abs(steps))))


@dataclass(frozen=True)
class ZakPhase:
    value: float
    snap_distance: float
    net_change: float
    winding: int


def zak_phase(bs: BandStructure) -> ZakPhase:
    """-(1/2) times the net theta change, reduced mod 2 pi and snapped to 0 or pi."""
    unwrapped = unwrap_theta(bs)
    raw = (-0.5 * unwrapped.net_change) % (2.0 * math.pi)
    candidates = np.array([0.0, math.pi, 2.0 * math.pi])
    dist = np.abs(raw - candidates)
    best = int(np.argmin(dist))
    if dist[best] >= SNAP_TOL:
        raise AmbiguousError(f"Zak phase {raw:.4f} is {dist[best]:.3g} rad from 0 and pi")
    value = 0.0 if best != 1 else math.pi
    winding = int(round(unwrapped.net_change / (2.0 * math.pi)))
    return ZakPhase(value, float(dist[best]), unwrapped.net_change, winding)


@dataclass(frozen=True)
class GapReport:
    alpha0: float
    max_omega1: float
    min_omega2: float
    width: float
    has_gap: bool


def band_gap_check(bs: BandStructure, alpha0: float) -> GapReport:
    """Extremes of the two bands over |alpha| > alpha0."""
    if not 0 < alpha0 < math.pi / bs.cell.L:
        raise ValueError("alpha0 must lie strictly inside the zone")
    mask = np.abs(bs.alphas) > alpha0
    top = float(np.max(bs.omega1[mask]))
    bottom = float(np.min(bs.omega2[mask]))
    return GapReport(alpha0, top, bottom, bottom - top, bottom > top)


@dataclass(frozen=True)
class InversionReport:
    labels_a: tuple[str, str]
    labels_b: tuple[str, str]
    inverted: bool
    moduli_defect: float


_PATTERNS = {
    "monopole": np.array([1.0, 1.0]) / math.sqrt(2.0),
    "dipole": np.array([1.0, -1.0]) / math.sqrt(2.0),
}


def classify_bloch_vector(v: np.ndarray, tol: float = 0.1) -> str:
    """monopole or dipole, by the phase-optimal distance to (1, +-1)/sqrt2."""
    best, best_dist = None, math.inf
    for name, pattern in _PATTERNS.items():
        overlap = abs(np.vdot(pattern, v))
        dist = math.sqrt(max(2.0 - 2.0 * overlap, 0.0))
        if dist < best_dist:
            best, best_dist = name, dist
    if best_dist >= tol:
        raise AmbiguousError(f"vector {v} matches neither pattern (distance {best_dist:.3g})")
    return best


def _edge_labels(cell: DimerCell, delta: float, order: int) -> tuple[tuple[str, str], float]:
    q = QuasiMomentum.from_phase(math.pi, cell.L)
    bp = band_point(q, quasi_capacitance(q, cell, order), delta, cell.R)
    if bp.degenerate:
        raise DegeneratePointError(q.alpha)
    moduli = float(np.max(np.abs(np.abs(bp.coeffs) - 1.0 / math.sqrt(2.0))))
    return (classify_bloch_vector(bp.coeffs[:, 0]), classify_bloch_vector(bp.coeffs[:, 1])), moduli


def band_inversion_check(cell_a: DimerCell, cell_b: DimerCell, delta: float = 1e-3, order: int = 0) -> InversionReport:
    """Monopole/dipole character of both bands at alpha L = pi for two cells."""
    labels_a, mod_a = _edge_labels(cell_a, delta, order)
    labels_b, mod_b = _edge_labels(cell_b, delta, order)
    inverted = labels_a == labels_b[::-1] and labels_a[0] != labels_a[1]
    return InversionReport(labels_a, labels_b, inverted, max(mod_a, mod_b))


def winding_number(samples) -> int:
    """Winding of a closed sampled curve about the origin (closing segment included)."""
    z = np.asarray(samples, dtype=complex)
    if np.min(np.abs(z)) < 1e-12:
        raise OriginProximityError("curve passes within 1e-12 of the origin")
    angles = np.angle(z)
    steps = _wrapped_steps(np.concatenate([angles, angles[:1]]))
    return int(round(np.sum(steps) / (2.0 * math.pi)))
