import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subwave.capacitance import Spectrum, finite_capacitance, finite_frequencies
from subwave.chains import ChainGeometry, build_dimer_chain, build_point_defect_chain
from subwave.stability import (
    StabilityError,
    _variance,
    center_weights,
    classify_midgap,
    compare_models,
    localization_metric,
    reference_gap,
    run_stability_experiment,
)

DELTA = 1e-3
DIMER = build_dimer_chain(10, 12.0, 42.0)
DEFECT = build_point_defect_chain(41, 12.0, 1.0, 0.99)


def spectrum_of(geom):
    return finite_frequencies(finite_capacitance(geom), DELTA, geom.radii)


def synthetic(freqs, modes):
    return Spectrum(np.asarray(freqs, float), np.asarray(freqs, float) ** 2, np.asarray(modes, float), DELTA)


class TestClassification:
    def test_picks_in_gap_mode_with_largest_center_weight(self):
        modes = np.eye(3)[:, [0, 2, 1]]
        s = synthetic([1.0, 2.0, 2.5], modes)
        cls = classify_midgap(s, (1.5, 3.0), center=1)
        assert cls.index == 2 and cls.frequency == 2.5
        assert cls.in_gap == 2 and cls.candidates == 2

    def test_gap_is_open(self):
        s = synthetic([1.0, 2.0, 3.0], np.eye(3))
        assert classify_midgap(s, (2.0, 3.0), center=1).in_gap == 0

    def test_weight_filter(self):
        s = synthetic([1.0, 2.0, 3.0], np.eye(3))
        cls = classify_midgap(s, (1.5, 3.5), center=1, min_center_weight=0.5)
        assert cls.index == 1 and cls.candidates == 1 and cls.in_gap == 2

    def test_no_candidate(self):
        s = synthetic([1.0, 2.0, 3.0], np.eye(3))
        cls = classify_midgap(s, (4.0, 5.0))
        assert cls.index is None and cls.frequency is None and not cls.unique

    def test_center_weights_sum_over_modes(self):
        s = spectrum_of(DIMER)
        w = center_weights(s, DIMER.center_index)
        # rows of an orthogonal matrix have unit norm
        assert np.sum(w) == pytest.approx(1.0, rel=1e-12)


class TestUnperturbedDesigns:
    def test_dimer_edge_mode(self):
        gap = reference_gap(DIMER, "full", DELTA)
        s = spectrum_of(DIMER)
        cls = classify_midgap(s, (gap.lower, gap.upper), DIMER.center_index)
        assert cls.index == gap.mode_index == 20 and cls.in_gap == 1
        assert cls.frequency == pytest.approx(0.0551825, rel=1e-5)
        metric = localization_metric(s, cls.index)
        assert metric.center_weight == pytest.approx(0.888, abs=1e-3)
        assert metric.decay_ratio < 0.5

    def test_point_defect_mode_above_bulk(self):
        gap = reference_gap(DEFECT, "point-defect", DELTA)
        assert math.isinf(gap.upper)
        s = spectrum_of(DEFECT)
        assert gap.mode_index == s.n - 1
        assert s.frequencies[-1] > gap.lower
        assert gap.center_weight == pytest.approx(0.31, abs=0.01)

    def test_nearest_neighbour_gap_brackets_zero_mode(self):
        gap = reference_gap(DIMER, "nearest-neighbour", DELTA)
        assert gap.lower < gap.upper and gap.mode_index == 20

    def test_delocalized_mode_has_flat_profile(self):
        s = spectrum_of(DIMER)
        assert localization_metric(s, 0).decay_ratio > 0.5


class TestExperiment:
    def test_reproducible_and_seed_sensitive(self):
        a = run_stability_experiment(DIMER, "full", 8.0, 10, 7)
        b = run_stability_experiment(DIMER, "full", 8.0, 10, 7)
        c = run_stability_experiment(DIMER, "full", 8.0, 10, 8)
        assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()
        assert not np.array_equal(a.frequencies, c.frequencies)

    def test_trial_streams_do_not_depend_on_trial_count(self):
        short = run_stability_experiment(DIMER, "full", 8.0, 5, 3)
        long = run_stability_experiment(DIMER, "full", 8.0, 12, 3)
        assert np.array_equal(short.frequencies, long.frequencies[:5])

    def test_zero_sigma(self):
        r = run_stability_experiment(DIMER, "full", 0.0, 4, 0)
        v = r.variances
        assert v["midgap"] == v["upper_band"] == v["lower_band"] == 0.0
        assert r.retention == 1.0 and math.isinf(r.band_ratio)

    def test_dilute_midgap_more_stable_than_band_edges(self):
        r = run_stability_experiment(DIMER, "full", 8.0, 40, 0)
        assert r.band_ratio > 5 and r.retention > 0.9

    def test_nearest_neighbour_midgap_is_pinned(self):
        r = run_stability_experiment(DIMER, "nearest-neighbour", 8.0, 20, 0)
        v = r.variances
        assert v["midgap"] < 1e-30 * v["upper_band"] + 1e-30
        assert r.retention == 1.0

    def test_nearest_neighbour_rejects_unequal_radii(self):
        with pytest.raises(StabilityError):
            run_stability_experiment(DEFECT, "nearest-neighbour", 8.0, 4, 0)

    def test_point_defect_less_robust_than_dimer(self):
        dimer = run_stability_experiment(DIMER, "full", 8.0, 30, 0)
        defect = run_stability_experiment(DEFECT, "point-defect", 8.0, 30, 0)
        assert defect.retention < dimer.retention
        assert defect.variances["localized"] > 5 * dimer.variances["midgap"]

    @pytest.mark.parametrize("kwargs", [{"model": "tight"}, {"trials": 1}])
    def test_bad_arguments(self, kwargs):
        args = {"model": "full", "trials": 4} | kwargs
        with pytest.raises(StabilityError):
            run_stability_experiment(DIMER, args["model"], 8.0, args["trials"], 0)

    def test_skip_budget_attaches_report(self):
        tight = ChainGeometry(2.05 * np.arange(41), np.ones(41), kind="custom")
        with pytest.raises(StabilityError) as info:
            run_stability_experiment(tight, "full", 8.0, 10, 0)
        report = info.value.report
        assert report is not None and len(report.skipped) > 0
        assert report.completed + len(report.skipped) == 10

    def test_serialisation(self):
        r = run_stability_experiment(DIMER, "full", 8.0, 6, 0)
        doc = json.loads(r.to_json())
        assert [row["row"] for row in doc["variance_table"]] == ["upper band", "midgap", "lower band"]
        assert doc["completed"] == 6 and len(doc["midgap"]) == 6
        lines = r.to_csv().strip().split("\n")
        assert len(lines) == 1 + 6 * 41
        assert sum(int(line.split(",")[3]) for line in lines[1:]) == sum(1 for m in r.midgap_index if m is not None)


class TestComparison:
    def test_rows_and_mismatch(self):
        a = run_stability_experiment(DIMER, "full", 8.0, 6, 0)
        b = run_stability_experiment(DIMER, "nearest-neighbour", 8.0, 6, 0)
        rows = compare_models([a, b])
        assert [r.model for r in rows] == ["full", "nearest-neighbour"]
        assert rows[1].var_midgap < rows[0].var_midgap
        c = run_stability_experiment(DIMER, "full", 4.0, 6, 0)
        with pytest.raises(StabilityError):
            compare_models([a, c])
        assert compare_models([]) == []


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30))
@settings(max_examples=50, deadline=None)
def test_variance_matches_numpy(xs):
    x = np.array(xs)
    assert _variance(x) == pytest.approx(np.var(x, ddof=1), rel=1e-9, abs=1e-9)
