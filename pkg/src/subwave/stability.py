"""Monte Carlo robustness of midgap and bulk frequencies under position errors."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .capacitance import (
    FOUR_PI,
    CapacitanceMatrix,
    Spectrum,
    dilute_finite_capacitance,
    finite_capacitance,
    finite_frequencies,
)
from .chains import (
    ChainGeometry,
    DimerCell,
    GeometryError,
    build_point_defect_chain,
    nearest_neighbour_truncate,
    perturb_positions,
)
from .topology import compute_band_structure

MODELS = ("full", "nearest-neighbour", "point-defect")
SKIP_BUDGET = 0.01
# in-gap candidates must keep this fraction of the unperturbed mode's center weight
LOCALIZATION_FRACTION = 0.5


class StabilityError(RuntimeError):
    """Ill-posed experiment: too many skipped trials or mismatched reports."""

    def __init__(self, message: str, report: "StabilityReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class MidgapClassification:
    frequency: float | None
    index: int | None
    candidates: int
    in_gap: int

    @property
    def unique(self) -> bool:
        return self.candidates == 1


@dataclass(frozen=True)
class LocalizationMetric:
    mode_index: int
    center_weight: float
    decay_ratio: float


def center_weights(spectrum: Spectrum, center: int) -> np.ndarray:
    """Fraction of each mode's squared mass on the central resonator."""
    modes = spectrum.modes
    return modes[center, :] ** 2 / np.sum(modes**2, axis=0)


def classify_midgap(
    spectrum: Spectrum,
    gap: tuple[float, float],
    center: int | None = None,
    min_center_weight: float = 0.0,
) -> MidgapClassification:
    """Frequency strictly inside the reference gap, tie-broken by center weight.

    Candidates are in-gap modes whose center weight is at least
    ``min_center_weight``; ``in_gap`` counts all in-gap frequencies.
    """
    lo, hi = gap
    freq = spectrum.frequencies
    c = spectrum.n // 2 if center is None else center
    weights = center_weights(spectrum, c)
    inside = np.nonzero((freq > lo) & (freq < hi))[0]
    chosen = inside[weights[inside] >= min_center_weight]
    if chosen.size == 0:
        return MidgapClassification(None, None, 0, int(inside.size))
    pick = int(chosen[np.argmax(weights[chosen])])
    return MidgapClassification(float(freq[pick]), pick, int(chosen.size), int(inside.size))


def localization_metric(spectrum: Spectrum, mode_index: int, center: int | None = None) -> LocalizationMetric:
    """Center weight and mean amplitude falloff per two sites (one dimer) away from the center."""
    n = spectrum.n
    c = n // 2 if center is None else center
    v = spectrum.modes[:, mode_index]
    v = v / np.linalg.norm(v)
    weight = float(v[c] ** 2)
    reach = min(c, n - 1 - c)
    profile = np.array([max(abs(v[c - k]), abs(v[c + k])) for k in range(reach + 1)])
    steps = max(1, min(3, reach // 2))
    if reach < 2 or profile[0] == 0.0:
        return LocalizationMetric(mode_index, weight, math.nan)
    ratio = float((profile[2 * steps] / profile[0]) ** (1.0 / steps))
    return LocalizationMetric(mode_index, weight, ratio)


def model_capacitance(geom: ChainGeometry, model: str, order: int = 0) -> CapacitanceMatrix:
    if model in ("full", "point-defect"):
        return finite_capacitance(geom, order)
    if model == "nearest-neighbour":
        if not np.all(geom.radii == geom.radii[0]):
            raise StabilityError("the nearest-neighbour model needs equal radii")
        dilute = dilute_finite_capacitance(geom.centers, float(geom.radii[0]), FOUR_PI)
        return nearest_neighbour_truncate(dilute, mode="dilute-constant-diagonal")
    raise StabilityError(f"unknown model {model!r}")


def model_spectrum(geom: ChainGeometry, model: str, delta: float, order: int = 0) -> Spectrum:
    return finite_frequencies(model_capacitance(geom, model, order), delta, geom.radii)


@dataclass(frozen=True)
class ReferenceGap:
    """Bulk gap of the unperturbed design and the mode it hosts."""

    lower: float
    upper: float
    mode_index: int
    center_weight: float


def bulk_gap(geom: ChainGeometry, model: str, delta: float, order: int = 0, grid_n: int = 128) -> tuple[float, float]:
    """Frequency interval free of bulk states for the unperturbed design.

    dimer: gap of the periodic dimer chain with the same d, d', R (full
    zone, alpha = 0 excluded) or, for the nearest-neighbour model, the
    bulk frequencies adjacent to the middle of its spectrum.
    point_defect: above the highest frequency of the same chain without
    the defect. custom: the largest internal gap of the chain's own spectrum.
    """
    if geom.kind == "dimer" and model != "nearest-neighbour":
        p = geom.params
        cell = DimerCell(p["d"], p["d_prime"], p["R"])
        bs = compute_band_structure(cell, delta, grid_n, order)
        mask = np.abs(bs.alphas) > 0.5 * math.pi / (cell.L * grid_n)
        return float(np.max(bs.omega1[mask])), float(np.min(bs.omega2[mask]))
    if geom.kind == "dimer":
        freq = model_spectrum(geom, model, delta, order).frequencies
        m = freq.size // 2
        return float(freq[m - 1]), float(freq[m + 1])
    if geom.kind == "point_defect":
        p = geom.params
        plain = build_point_defect_chain(p["N"], p["d"], p["R"], p["R"])
        top = float(model_spectrum(plain, model, delta, order).frequencies[-1])
        return top, math.inf
    freq = model_spectrum(geom, model, delta, order).frequencies
    if freq.size < 2:
        return 0.0, math.inf
    k = int(np.argmax(np.diff(freq)))
    return float(freq[k]), float(freq[k + 1])


def reference_gap(geom: ChainGeometry, model: str, delta: float, order: int = 0, grid_n: int = 128) -> ReferenceGap:
    """Bulk gap plus the index and center weight of the unperturbed localized mode.

    The dimer chain's mode is the middle one of its spectrum; otherwise the
    mode with the largest center weight.
    """
    lower, upper = bulk_gap(geom, model, delta, order, grid_n)
    spectrum = model_spectrum(geom, model, delta, order)
    weights = center_weights(spectrum, geom.center_index)
    m = spectrum.n // 2 if geom.kind == "dimer" else int(np.argmax(weights))
    return ReferenceGap(lower, upper, m, float(weights[m]))


@dataclass
class StabilityReport:
    model: str
    sigma_pct: float
    trials: int
    seed: int
    delta: float
    n_resonators: int
    gap: ReferenceGap
    frequencies: np.ndarray
    midgap: list
    midgap_index: list
    candidates: list
    in_gap: list
    lower_edge: np.ndarray
    upper_edge: np.ndarray
    localized: np.ndarray
    skipped: list = field(default_factory=list)

    @property
    def completed(self) -> int:
        return int(self.frequencies.shape[0])

    @property
    def retention(self) -> float:
        if self.completed == 0:
            return 0.0
        return sum(1 for c in self.candidates if c == 1) / self.completed

    @property
    def variances(self) -> dict[str, float]:
        mid = np.array([m for m in self.midgap if m is not None])
        return {
            "upper_band": _variance(self.upper_edge),
            "midgap": _variance(mid),
            "lower_band": _variance(self.lower_edge),
            "localized": _variance(self.localized),
        }

    @property
    def band_ratio(self) -> float:
        """min(band edge variances) / midgap variance."""
        v = self.variances
        bands = [x for x in (v["upper_band"], v["lower_band"]) if not math.isnan(x)]
        if not bands or math.isnan(v["midgap"]):
            return math.nan
        return min(bands) / v["midgap"] if v["midgap"] > 0 else math.inf

    def to_dict(self) -> dict:
        v = self.variances
        return {
            "schema_version": 1,
            "model": self.model,
            "sigma_pct": self.sigma_pct,
            "trials": self.trials,
            "completed": self.completed,
            "seed": self.seed,
            "delta": self.delta,
            "n_resonators": self.n_resonators,
            "reference_gap": {
                "lower": _num(self.gap.lower),
                "upper": _num(self.gap.upper),
                "mode_index": self.gap.mode_index,
                "center_weight": self.gap.center_weight,
            },
            "variance_table": [
                {"row": "upper band", "variance": _num(v["upper_band"])},
                {"row": "midgap", "variance": _num(v["midgap"])},
                {"row": "lower band", "variance": _num(v["lower_band"])},
            ],
            "localized_variance": _num(v["localized"]),
            "retention": self.retention,
            "midgap": [_num(m) for m in self.midgap],
            "candidates": self.candidates,
            "in_gap": self.in_gap,
            "lower_edge": [_num(x) for x in self.lower_edge],
            "upper_edge": [_num(x) for x in self.upper_edge],
            "skipped": self.skipped,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["trial", "index", "frequency", "is_midgap"])
        for t, row in enumerate(self.frequencies):
            mid = self.midgap_index[t]
            for i, w in enumerate(row):
                writer.writerow([t, i, f"{w:.17g}", int(mid == i)])
        return buf.getvalue()


def _variance(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < 2:
        return math.nan
    # shifting by a sample keeps identical samples at exactly zero variance
    return float(np.var(x - x[0], ddof=1))


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialise {type(obj)}")


def _workers() -> int:
    env = os.environ.get("SUBWAVE_THREADS")
    return max(1, int(env)) if env else min(8, os.cpu_count() or 1)


def run_stability_experiment(
    base: ChainGeometry,
    model: str,
    sigma_pct: float,
    trials: int = 100,
    seed: int = 0,
    delta: float = 1e-3,
    order: int = 0,
) -> StabilityReport:
    """Spectra of `trials` perturbed copies of `base`; trial t draws from the stream (seed, t)."""
    if model not in MODELS:
        raise StabilityError(f"unknown model {model!r}")
    if trials < 2:
        raise StabilityError("at least two trials are needed for a variance")
    gap = reference_gap(base, model, delta, order)
    m0 = gap.mode_index
    center = base.center_index

    def one(t: int):
        try:
            geom = perturb_positions(base, sigma_pct, (seed, t))
        except GeometryError as exc:
            return t, None, str(exc)
        return t, model_spectrum(geom, model, delta, order), None

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        results = list(pool.map(one, range(trials)))

    skipped = [{"trial": t, "reason": msg} for t, spectrum, msg in results if spectrum is None]
    rows, midgap, mid_idx, cands, in_gap, lower, upper, localized = ([] for _ in range(8))
    n = base.n
    for t, spectrum, _ in results:
        if spectrum is None:
            continue
        freq = spectrum.frequencies
        rows.append(freq)
        cls = classify_midgap(spectrum, (gap.lower, gap.upper), center, LOCALIZATION_FRACTION * gap.center_weight)
        midgap.append(cls.frequency)
        mid_idx.append(cls.index)
        cands.append(cls.candidates)
        in_gap.append(cls.in_gap)
        lower.append(freq[m0 - 1] if m0 >= 1 else math.nan)
        upper.append(freq[m0 + 1] if m0 + 1 < n else math.nan)
        localized.append(freq[int(np.argmax(center_weights(spectrum, center)))])
    report = StabilityReport(
        model=model,
        sigma_pct=sigma_pct,
        trials=trials,
        seed=seed,
        delta=delta,
        n_resonators=n,
        gap=gap,
        frequencies=np.array(rows).reshape(len(rows), n),
        midgap=midgap,
        midgap_index=mid_idx,
        candidates=cands,
        in_gap=in_gap,
        lower_edge=np.array(lower),
        upper_edge=np.array(upper),
        localized=np.array(localized),
        skipped=skipped,
    )
    if len(skipped) > SKIP_BUDGET * trials:
        raise StabilityError(
            f"{len(skipped)} of {trials} trials skipped for overlap (budget {SKIP_BUDGET:.0%})", report
        )
    return report


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    var_upper: float
    var_midgap: float
    var_lower: float
    var_localized: float
    band_ratio: float
    retention: float


def compare_models(reports: list[StabilityReport]) -> list[ComparisonRow]:
    """Variance ratios and midgap retention side by side; reports must share sigma and trials."""
    if not reports:
        return []
    ref = reports[0]
    for r in reports[1:]:
        if r.sigma_pct != ref.sigma_pct or r.trials != ref.trials:
            raise StabilityError("reports differ in sigma or trial count")
    rows = []
    for r in reports:
        v = r.variances
        rows.append(ComparisonRow(r.model, v["upper_band"], v["midgap"], v["lower_band"], v["localized"], r.band_ratio, r.retention))
    return rows
