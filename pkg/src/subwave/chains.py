"""Resonator chain geometries and matrix transformations.

Finite dimer chains mirrored about a central resonator, point-defect
chains, seeded Gaussian position perturbations, nearest-neighbour
truncation, the translated matrix and the chiral-symmetry test.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .capacitance import CapacitanceMatrix

MAX_REDRAWS = 100


class GeometryError(ValueError):
    """Invalid or overlapping resonator geometry."""


@dataclass(frozen=True)
class Perturbation:
    sigma_pct: float
    sigma_abs: float
    seed: int | tuple[int, ...]
    redraws: int


@dataclass(frozen=True)
class ChainGeometry:
    """Collinear spheres: axial centers (increasing) and radii."""

    centers: np.ndarray
    radii: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    perturbation: Perturbation | None = None

    def __post_init__(self) -> None:
        centers = np.asarray(self.centers, dtype=float).copy()
        radii = np.asarray(self.radii, dtype=float).copy()
        if centers.ndim != 1 or centers.shape != radii.shape:
            raise GeometryError("centers and radii must be 1-D arrays of equal length")
        if centers.size == 0:
            raise GeometryError("a chain needs at least one resonator")
        if np.any(radii <= 0):
            raise GeometryError("radii must be positive")
        centers.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)
        if self.kind not in ("dimer", "point_defect", "custom"):
            raise GeometryError(f"unknown chain kind {self.kind!r}")
        bad = overlap_index(centers, radii)
        if bad is not None:
            raise GeometryError(
                f"resonators {bad} and {bad + 1} overlap or are out of order "
                f"(gap {centers[bad + 1] - centers[bad]:.6g})"
            )

    @property
    def n(self) -> int:
        return int(self.centers.size)

    @property
    def center_index(self) -> int:
        return self.n // 2

    @property
    def volumes(self) -> np.ndarray:
        return 4.0 / 3.0 * math.pi * self.radii**3

    def mean_gap(self) -> float:
        if self.n < 2:
            return 0.0
        return float(np.mean(np.diff(self.centers)))

    def to_text(self) -> str:
        """One resonator per line: index, center, radius (17 significant digits)."""
        buf = io.StringIO()
        buf.write("# index center radius\n")
        for i, (c, r) in enumerate(zip(self.centers, self.radii)):
            buf.write(f"{i} {c:.17g} {r:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, kind: str = "custom") -> "ChainGeometry":
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
        rows.sort(key=lambda r: int(r[0]))
        return cls(
            centers=np.array([float(r[1]) for r in rows]),
            radii=np.array([float(r[2]) for r in rows]),
            kind=kind,
        )


@dataclass(frozen=True)
class DimerCell:
    """Unit cell of the infinite dimer chain: spheres at -d/2 and +d/2, period d + d'."""

    d: float
    d_prime: float
    R: float = 1.0

    def __post_init__(self) -> None:
        if not (self.d > 0 and self.d_prime > 0 and self.R > 0):
            raise GeometryError("d, d' and R must be positive")
        if self.d <= 2 * self.R or self.d_prime <= 2 * self.R:
            raise GeometryError("separations must exceed the sphere diameter")

    @property
    def L(self) -> float:
        return self.d + self.d_prime

    @property
    def centers(self) -> np.ndarray:
        return np.array([-self.d / 2.0, self.d / 2.0])

    @property
    def radii(self) -> np.ndarray:
        return np.array([self.R, self.R])

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.R**3

    def swapped(self) -> "DimerCell":
        return DimerCell(self.d_prime, self.d, self.R)

    def scaled_radius(self, factor: float) -> "DimerCell":
        return DimerCell(self.d, self.d_prime, self.R * factor)


def overlap_index(centers: np.ndarray, radii: np.ndarray) -> int | None:
    """Index i of the first neighbour pair (i, i+1) that touches or is unordered."""
    if centers.size < 2:
        return None
    gaps = np.diff(centers)
    bad = np.nonzero(gaps <= radii[:-1] + radii[1:])[0]
    return int(bad[0]) if bad.size else None


def build_dimer_chain(M: int, d: float, d_prime: float, R: float = 1.0) -> ChainGeometry:
    """Dimer chain of 4M+1 spheres, mirrored about the central resonator.

    Reading from the left end the gaps are d, d', d, d', ... up to the
    center and the mirror image afterwards, so that d' neighbours the
    central resonator on both sides.
    """
    if M < 1:
        raise GeometryError("M must be >= 1")
    if d <= 2 * R or d_prime <= 2 * R:
        raise GeometryError("separations must exceed the sphere diameter")
    left = [d, d_prime] * M
    gaps = left + left[::-1]
    centers = np.concatenate([[0.0], np.cumsum(gaps)])
    centers -= centers[2 * M]
    # exact mirror symmetry about the center
    centers = 0.5 * (centers - centers[::-1])
    n = 4 * M + 1
    return ChainGeometry(
        centers=centers,
        radii=np.full(n, float(R)),
        kind="dimer",
        params={"N": n, "M": M, "d": d, "d_prime": d_prime, "L": d + d_prime, "R": R},
    )


def build_point_defect_chain(N: int, d: float, R: float = 1.0, R_defect: float = 0.99) -> ChainGeometry:
    """N equally spaced spheres (center spacing d) whose central radius is R_defect."""
    if N < 1 or N % 2 == 0:
        raise GeometryError("N must be a positive odd integer")
    if not (R > 0 and R_defect > 0):
        raise GeometryError("radii must be positive")
    if d <= 2 * max(R, R_defect):
        raise GeometryError("spacing must exceed the largest diameter")
    centers = (np.arange(N) - N // 2) * float(d)
    radii = np.full(N, float(R))
    radii[N // 2] = R_defect
    return ChainGeometry(
        centers=centers,
        radii=radii,
        kind="point_defect",
        params={"N": N, "d": d, "R": R, "R_defect": R_defect},
    )


def perturb_positions(geom: ChainGeometry, sigma_pct: float, seed: int | tuple[int, ...]) -> ChainGeometry:
    """Shift each center by an i.i.d. Gaussian with std sigma_pct% of the mean gap.

    ``seed`` is an integer or a tuple of integers such as (run seed, trial).
    Draws that produce overlapping spheres are discarded and redrawn from
    the same stream, at most MAX_REDRAWS times.
    """
    if sigma_pct < 0:
        raise ValueError("sigma_pct must be non-negative")
    sigma = sigma_pct / 100.0 * geom.mean_gap()
    if sigma == 0.0:
        return replace(geom, perturbation=Perturbation(sigma_pct, 0.0, seed, 0))
    rng = np.random.default_rng(seed)
    for attempt in range(MAX_REDRAWS + 1):
        shifted = geom.centers + rng.normal(0.0, sigma, size=geom.n)
        if overlap_index(shifted, geom.radii) is None:
            return ChainGeometry(
                centers=shifted,
                radii=geom.radii,
                kind=geom.kind,
                params=dict(geom.params),
                perturbation=Perturbation(sigma_pct, sigma, seed, attempt),
            )
    raise GeometryError(
        f"overlap persisted after {MAX_REDRAWS} redraws (sigma={sigma:.4g}, seed={seed})"
    )


def nearest_neighbour_truncate(
    C: "CapacitanceMatrix", mode: str = "raw", diagonal: float | None = None
) -> "CapacitanceMatrix":
    """Keep only the diagonal and first off-diagonals of a finite matrix.

    mode "dilute-constant-diagonal" replaces the diagonal by one constant,
    ``diagonal`` if given, else the scale epsilon*CapB recorded on C, else
    the mean diagonal.
    """
    from .capacitance import CapacitanceMatrix

    entries = np.asarray(C.entries)
    n = entries.shape[0]
    i, j = np.indices((n, n))
    out = np.where(np.abs(i - j) <= 1, entries, 0.0)
    if mode == "dilute-constant-diagonal":
        if diagonal is None:
            diagonal = C.diagonal_scale if C.diagonal_scale is not None else float(np.mean(np.diag(entries)))
        out = out.copy()
        np.fill_diagonal(out, diagonal)
    elif mode != "raw":
        raise ValueError(f"unknown truncation mode {mode!r}")
    return CapacitanceMatrix(
        entries=out,
        alpha=C.alpha,
        method="nearest-neighbour",
        order=C.order,
        epsilon_scale=C.epsilon_scale,
        diagonal_scale=C.diagonal_scale,
    )


@dataclass(frozen=True)
class TranslatedMatrix:
    matrix: "CapacitanceMatrix"
    shift: float
    diagonal_residual: float


def translated_matrix(C: "CapacitanceMatrix") -> TranslatedMatrix:
    """Subtract the mean diagonal: C~ = C - mean(diag C) I."""
    from .capacitance import CapacitanceMatrix

    entries = np.asarray(C.entries)
    shift = float(np.mean(np.real(np.diag(entries))))
    out = entries - shift * np.eye(entries.shape[0])
    residual = float(np.max(np.abs(np.diag(out))))
    return TranslatedMatrix(
        matrix=CapacitanceMatrix(
            entries=out,
            alpha=C.alpha,
            method=C.method,
            order=C.order,
            epsilon_scale=C.epsilon_scale,
            diagonal_scale=C.diagonal_scale,
            validate=False,
        ),
        shift=shift,
        diagonal_residual=residual,
    )


@dataclass(frozen=True)
class ChiralReport:
    is_chiral: bool
    defect: float


def chiral_symmetry_check(Ct, tol: float = 1e-10) -> ChiralReport:
    """Relative defect ||S Ct S + Ct||_F / ||Ct||_F with S = diag(+1, -1, +1, ...)."""
    entries = np.asarray(getattr(Ct, "entries", Ct))
    n = entries.shape[0]
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    conj = signs[:, None] * entries * signs[None, :]
    norm = np.linalg.norm(entries)
    if norm == 0.0:
        return ChiralReport(True, 0.0)
    defect = float(np.linalg.norm(conj + entries) / norm)
    return ChiralReport(defect < tol, defect)
