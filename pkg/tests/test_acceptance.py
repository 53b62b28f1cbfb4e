"""Acceptance suite: fourteen criteria at their stated tolerances and runtime budgets.

Each criterion prints one PASS/FAIL line. Run directly with
``python3 tests/test_acceptance.py`` or through pytest, where the lines
are repeated in the terminal summary.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

sys.path.insert(0, str(Path(__file__).parent))

from test_capacitance import surface_quadrature_capacitance  # noqa: E402

from subwave.capacitance import (  # noqa: E402
    FOUR_PI,
    dilute_finite_capacitance,
    dilute_quasi_capacitance,
    finite_capacitance,
    finite_frequencies,
    quasi_capacitance,
    zero_momentum_limit,
)
from subwave.chains import (  # noqa: E402
    ChainGeometry,
    DimerCell,
    build_dimer_chain,
    build_point_defect_chain,
    chiral_symmetry_check,
    nearest_neighbour_truncate,
    translated_matrix,
)
from subwave.lattice import QuasiMomentum, dimer_sum_f, harmonic_quasi_sum  # noqa: E402
from subwave.multipole import MultipoleBasis, find_characteristic_values  # noqa: E402
from subwave.stability import (  # noqa: E402
    center_weights,
    reference_gap,
    run_stability_experiment,
)
from subwave.topology import (  # noqa: E402
    alpha_grid,
    band_gap_check,
    band_inversion_check,
    compute_band_structure,
    zak_phase,
)

DELTA = 1e-3
DILUTE = DimerCell(12.0, 42.0)
NON_DILUTE = DimerCell(3.0, 6.0)
SIGMA_PCT = 8.0
TRIALS = 100
SEED = 0

RESULTS: list[str] = []


def grid_momenta(cell: DimerCell, n: int = 64) -> list[QuasiMomentum]:
    return [QuasiMomentum(float(a), cell.L) for a in alpha_grid(cell.L, n)]


def criterion_1():
    sphere = ChainGeometry([0.0], [1.0])
    err = abs(finite_capacitance(sphere).entries[0, 0] - FOUR_PI)
    quad_err = abs(surface_quadrature_capacitance(1.0) - FOUR_PI)
    return err < 1e-10 and quad_err < 1e-6, f"|C - 4pi| = {err:.1e}, quadrature {quad_err:.1e}"


def criterion_2():
    value = harmonic_quasi_sum(QuasiMomentum.from_phase(math.pi, 1.0))
    err = abs(value - (-2.0 * math.log(2.0)))
    return err < 1e-12, f"value {value:.17g}, error {err:.1e}"


def criterion_3():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        q = QuasiMomentum.from_phase(rng.uniform(-math.pi, math.pi), 1.0)
        a = rng.uniform(0.05, 0.95)
        v = [dimer_sum_f(q, a, m) for m in ("series", "lerch", "integral")]
        worst = max(worst, abs(v[0] - v[1]), abs(v[0] - v[2]), abs(v[1] - v[2]))
    mid = abs(dimer_sum_f(QuasiMomentum.from_phase(math.pi, 54.0), 27.0))
    return worst < 1e-7 and mid < 1e-10, f"max pairwise gap {worst:.1e}, |f(pi/L, L/2)| = {mid:.1e}"


def criterion_4():
    # solve_defect is measured on the linear solve before any symmetrisation
    worst_solve = worst_final = 0.0
    for cell in (DILUTE, NON_DILUTE):
        for order in (0, 2):
            for q in grid_momenta(cell):
                C = zero_momentum_limit(cell) if q.is_zero() else quasi_capacitance(q, cell, order)
                worst_solve = max(worst_solve, C.solve_defect)
                worst_final = max(worst_final, C.hermitian_defect(), C.diagonal_spread())
    ok = worst_solve <= 1e-10 and worst_final <= 1e-10
    return ok, f"raw solve defect {worst_solve:.1e}, returned matrix defect {worst_final:.1e}"


def criterion_5():
    worst = 0.0
    for cell in (DILUTE, NON_DILUTE):
        for q in grid_momenta(cell):
            if q.is_zero():
                continue
            c12 = quasi_capacitance(q, cell).entries[0, 1]
            swapped = quasi_capacitance(q, cell.swapped()).entries[0, 1]
            worst = max(worst, abs(swapped - np.exp(-1j * q.phase) * np.conj(c12)))
    return worst < 1e-8, f"max deviation {worst:.1e}"


def criterion_6():
    parts = []
    ok = True
    for n in (64, 128, 256):
        z_a = zak_phase(compute_band_structure(DILUTE, DELTA, n)).value
        z_b = zak_phase(compute_band_structure(DILUTE.swapped(), DELTA, n)).value
        z_c = zak_phase(compute_band_structure(NON_DILUTE, DELTA, n)).value
        z_d = zak_phase(compute_band_structure(NON_DILUTE.swapped(), DELTA, n)).value
        ok &= z_a == 0.0 and math.isclose(z_b, math.pi) and math.isclose(abs(z_c - z_d), math.pi)
        parts.append(f"n={n}: {z_a:.3g}/{z_b:.3g}, non-dilute diff {abs(z_c - z_d):.3g}")
    return ok, "; ".join(parts)


def criterion_7():
    ok = True
    widths = []
    for cell in (DILUTE, DILUTE.swapped(), NON_DILUTE, NON_DILUTE.swapped()):
        bs = compute_band_structure(cell, DELTA, 128)
        gap = band_gap_check(bs, 0.05 * math.pi / cell.L)
        ok &= gap.max_omega1 < gap.min_omega2
        widths.append(gap.width)
    inversion = band_inversion_check(DILUTE, DILUTE.swapped(), DELTA)
    ok &= inversion.inverted
    return ok, f"gap widths {', '.join(f'{w:.3g}' for w in widths)}; edge labels {inversion.labels_a} vs {inversion.labels_b}"


def criterion_8():
    ratios = []
    for phase in (0.3, 1.5, 3.0):
        q = QuasiMomentum.from_phase(phase, DILUTE.L)
        errs = []
        for eps in (1.0, 0.5, 0.25):
            full = quasi_capacitance(q, DimerCell(DILUTE.d, DILUTE.d_prime, eps), order=2).entries
            dilute = dilute_quasi_capacitance(q, eps, FOUR_PI, DILUTE.d, DILUTE.L).entries
            errs.append(np.linalg.norm(full - dilute))
        ratios += [errs[0] / errs[1], errs[1] / errs[2]]
    ok = all(abs(r / 8.0 - 1.0) <= 0.3 for r in ratios)
    return ok, "halving ratios " + ", ".join(f"{r:.2f}" for r in ratios)


def criterion_9():
    geom = build_dimer_chain(10, 12.0, 42.0)
    spectrum = finite_frequencies(finite_capacitance(geom), DELTA, geom.radii)
    gap = reference_gap(geom, "full", DELTA)
    freq = spectrum.frequencies
    inside = np.nonzero((freq > gap.lower) & (freq < gap.upper))[0]
    weights = center_weights(spectrum, geom.center_index)
    ok = inside.size == 1 and bool(np.all(np.delete(weights, inside[0]) < weights[inside[0]]))
    return ok, f"{inside.size} in-gap mode(s) at index {inside.tolist()}, center weight {weights[inside].round(3).tolist()}"


def criterion_10():
    ok = True
    worst_zero = 0.0
    for M in range(1, 11):
        geom = build_dimer_chain(M, 12.0, 42.0)
        C = dilute_finite_capacitance(geom.centers, 1.0, FOUR_PI)
        t = translated_matrix(nearest_neighbour_truncate(C, "dilute-constant-diagonal"))
        ok &= chiral_symmetry_check(t.matrix).is_chiral
        worst_zero = max(worst_zero, float(np.min(np.abs(np.linalg.eigvalsh(t.matrix.entries)))))
    ok &= worst_zero < 1e-12
    report = run_stability_experiment(build_dimer_chain(10, 12.0, 42.0), "nearest-neighbour", SIGMA_PCT, TRIALS, SEED)
    mid = report.variances["midgap"]
    # machine zero: spread of a few ulps of the midgap frequency
    floor = (16 * np.finfo(float).eps * report.gap.upper) ** 2
    ok &= mid <= floor and report.retention == 1.0
    return ok, f"max |zero eigenvalue| {worst_zero:.1e}; MC midgap variance {mid:.1e} (floor {floor:.1e})"


def criterion_11():
    parts = []
    ok = True
    for name, d, d_prime in (("dilute", 12.0, 42.0), ("non-dilute", 3.0, 6.0)):
        report = run_stability_experiment(build_dimer_chain(10, d, d_prime), "full", SIGMA_PCT, TRIALS, SEED, DELTA)
        v = report.variances
        passed = v["midgap"] <= 0.2 * min(v["upper_band"], v["lower_band"])
        ok &= passed
        parts.append(
            f"{name}: midgap {v['midgap']:.2e}, upper {v['upper_band']:.2e}, lower {v['lower_band']:.2e}, "
            f"ratio {report.band_ratio:.2f} ({'ok' if passed else 'below 5'})"
        )
    return ok, "; ".join(parts)


def criterion_12():
    dimer = run_stability_experiment(build_dimer_chain(10, 12.0, 42.0), "full", SIGMA_PCT, TRIALS, SEED, DELTA)
    defect = run_stability_experiment(
        build_point_defect_chain(41, 12.0, 1.0, 0.99), "point-defect", SIGMA_PCT, TRIALS, SEED, DELTA
    )
    # distance from the defect frequency to the top of the same trial's bulk spectrum
    distances = []
    for row, loc in zip(defect.frequencies, defect.localized):
        distances.append(loc - np.max(row[row != loc]))
    gap_var = float(np.var(distances, ddof=1))
    ratio = gap_var / dimer.variances["midgap"]
    ok = defect.retention < dimer.retention and ratio >= 5
    return ok, f"retention {defect.retention:.2f} vs {dimer.retention:.2f}; gap-distance variance ratio {ratio:.1f}"


def criterion_13():
    sphere = ChainGeometry([0.0], [1.0])
    ref_sphere = finite_frequencies(finite_capacitance(sphere), DELTA, sphere.radii).frequencies[0]
    w_sphere = find_characteristic_values(sphere, None, DELTA, (0.8 * ref_sphere, 1.2 * ref_sphere), 1)[0]
    chain = build_dimer_chain(1, 12.0, 42.0)
    ref_chain = finite_frequencies(finite_capacitance(chain, 4), DELTA, chain.radii).frequencies
    w_chain = np.array(
        find_characteristic_values(chain, None, DELTA, (0.8 * ref_chain[0], 1.2 * ref_chain[-1]), 5, MultipoleBasis(2))
    )
    dev = max(abs(w_sphere / ref_sphere - 1.0), float(np.max(np.abs(w_chain / ref_chain - 1.0))))
    return dev < 0.05, f"max relative deviation {dev:.2%} (sphere {abs(w_sphere / ref_sphere - 1):.2%})"


def _inequality_lhs(a: float, b: float) -> float:
    def f(t):
        e = math.exp(-t)
        return (math.exp((b - 1) * t) - math.exp(-(b + 1) * t)) / (1 + e * e - 2 * a * e)

    return integrate.quad(f, 0, math.inf, epsabs=1e-13, epsrel=1e-12, limit=400)[0]


def _inequality_rhs(a: float, b: float) -> float:
    if a == -1.0:
        return b
    return -(2 * b / (1 + a)) * math.log(0.5 * (1 - a))


def criterion_14():
    points = [(a, b) for a in np.linspace(-1.0, 1.0, 21)[:-1] for b in np.linspace(0.0, 1.0, 22)[1:-1]]
    holds = sum(_inequality_lhs(a, b) > _inequality_rhs(a, b) for a, b in points)
    worst = 0.0
    for b in (0.25, 0.5, 1.0, 2.0):
        val = integrate.quad(lambda t: b * t / (math.cosh(t) + 1), 0, 60, epsabs=1e-14, epsrel=1e-13)[0]
        worst = max(worst, abs(val - 2 * b * math.log(2)))
    return holds == len(points) == 400 and worst < 1e-10, f"{holds}/{len(points)} grid points; integral error {worst:.1e}"


CRITERIA = [
    (1, "single-sphere capacitance", criterion_1, 1),
    (2, "closed-form harmonic lattice sum", criterion_2, 1),
    (3, "dimer-sum triple agreement", criterion_3, 10),
    (4, "quasiperiodic capacitance structure", criterion_4, 30),
    (5, "swap identity for C12", criterion_5, 30),
    (6, "Zak phase", criterion_6, 60),
    (7, "band gap and inversion", criterion_7, 60),
    (8, "dilute cubic remainder", criterion_8, 60),
    (9, "finite-chain edge mode", criterion_9, 10),
    (10, "chiral nearest-neighbour exactness", criterion_10, 30),
    (11, "stability variance ratios", criterion_11, 600),
    (12, "point-defect contrast", criterion_12, 600),
    (13, "multipole and capacitance consistency", criterion_13, 300),
    (14, "integral inequality suite", criterion_14, 30),
]


def evaluate(number: int, title: str, fn, budget: float) -> tuple[bool, str]:
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure of the criterion, reported like one
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - start
    within = elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    line = f"{status} criterion {number:2d} ({title}): {detail}; {elapsed:.2f} s of {budget} s"
    print(line)
    RESULTS.append(line)
    return ok and within, line


@pytest.mark.parametrize("number, title, fn, budget", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number, title, fn, budget):
    ok, line = evaluate(number, title, fn, budget)
    assert ok, line


if __name__ == "__main__":
    outcomes = [evaluate(*c)[0] for c in CRITERIA]
    print(f"{sum(outcomes)}/{len(outcomes)} criteria pass")
    sys.exit(0 if all(outcomes) else 1)
