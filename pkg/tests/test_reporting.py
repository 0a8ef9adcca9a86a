import io

import numpy as np
import pytest

from streamdeg.linkstream import build_stream
from streamdeg.pipeline import IdentifiedSet, PipelineParams
from streamdeg.reporting import (
    build_report,
    jaccard,
    label_overlap,
    run_pipeline_once,
    smallest_identifiable_degree,
    sweep,
    validate_removal,
    write_report,
    write_series_csv,
)
from streamdeg.trace_io import (
    GroundTruth,
    ScanInjection,
    ScenarioSpec,
    SpikeInjection,
    TruthEntry,
    generate_synthetic,
)


@pytest.fixture(scope="module")
def spiky_run():
    spec = ScenarioSpec(
        duration=200, background_nodes=80, background_degree=4,
        injections=[
            SpikeInjection("burst1", 120, (40.0, 42.0)),
            SpikeInjection("burst2", 150, (90.0, 92.0)),
            SpikeInjection("burst3", 200, (150.0, 152.0)),
        ],
    )
    triplets, meta, truth = generate_synthetic(spec, seed=14)
    stream = build_stream(triplets, meta.node_names, 1.0)
    result = run_pipeline_once(stream, 2.0, 0.1, PipelineParams())
    return stream, result, meta, truth


class TestValidateRemoval:
    def test_no_removal_is_identity(self):
        spec = ScenarioSpec(duration=60, background_nodes=30, background_degree=4)
        triplets, meta, _ = generate_synthetic(spec, seed=2)
        stream = build_stream(triplets, meta.node_names, 1.0)
        result = run_pipeline_once(stream, 2.0, 0.1, PipelineParams())
        report = validate_removal(stream, result.final_stream, result)
        assert report.removed_share == 0.0
        assert report.relative_mean_change == 0.0
        np.testing.assert_array_equal(report.before.series.values, report.after.series.values)

    def test_three_spikes_cleaned(self, spiky_run):
        stream, result, meta, truth = spiky_run
        report = validate_removal(stream, result.final_stream, result)
        assert report.before.outlying_seconds >= 3
        assert report.after.outlying_seconds == 0
        assert report.relative_mean_change < 0.05

    def test_removed_share_exact(self, spiky_run):
        stream, result, meta, truth = spiky_run
        report = validate_removal(stream, result.final_stream, result)
        expected = 1.0 - result.final_stream.total_link_seconds() / stream.total_link_seconds()
        assert report.removed_share == expected

    def test_mean_never_increases(self, spiky_run):
        stream, result, meta, truth = spiky_run
        report = validate_removal(stream, result.final_stream, result)
        assert report.after.mean_of_means <= report.before.mean_of_means

    def test_removing_everything_flagged_degenerate(self):
        spec = ScenarioSpec(duration=30, background_nodes=10, background_degree=2)
        triplets, meta, _ = generate_synthetic(spec, seed=3)
        stream = build_stream(triplets, meta.node_names, 1.0)
        empty = stream.remove_interactions([(n, (0.0, 30.0)) for n in range(stream.num_nodes)])
        result = run_pipeline_once(stream, 2.0, 0.1, PipelineParams())
        report = validate_removal(stream, empty, result)
        assert report.degenerate_after
        assert (report.after.series.values == 0).all()

    def test_node_universe_must_match(self, spiky_run):
        stream, result, meta, truth = spiky_run
        other = build_stream([], ["x"], 1.0)
        with pytest.raises(ValueError):
            validate_removal(stream, other, result)

    def test_series_csv(self, spiky_run):
        stream, result, meta, truth = spiky_run
        report = validate_removal(stream, result.final_stream, result)
        buf = io.StringIO()
        write_series_csv(report.before.series, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "second,mean_degree"
        assert len(lines) == len(report.before.series.values) + 1


class TestJaccard:
    def test_equal_sets(self):
        a = IdentifiedSet({0: [(0.0, 2.0)], 3: [(1.0, 4.0)]})
        assert jaccard(a, a) == 1.0

    def test_disjoint_nodes(self):
        a = IdentifiedSet({0: [(0.0, 2.0)]})
        b = IdentifiedSet({1: [(0.0, 2.0)]})
        assert jaccard(a, b) == 0.0

    def test_partial_overlap_interval_arithmetic(self):
        a = IdentifiedSet({0: [(0.0, 2.0)]})
        b = IdentifiedSet({0: [(1.0, 3.0)]})
        assert jaccard(a, b) == pytest.approx(1.0 / 3.0)

    def test_both_empty_is_one(self):
        assert jaccard(IdentifiedSet(), IdentifiedSet()) == 1.0

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            def rand_set():
                return IdentifiedSet({
                    int(n): [(float(s), float(s) + float(d))]
                    for n, s, d in zip(
                        rng.integers(0, 5, 3), rng.uniform(0, 10, 3), rng.uniform(0.1, 5, 3)
                    )
                })
            a, b = rand_set(), rand_set()
            assert jaccard(a, b) == jaccard(b, a)
            assert 0.0 <= jaccard(a, b) <= 1.0


class TestLabelOverlap:
    def test_exact_match(self):
        ident = IdentifiedSet({0: [(10.0, 12.0)]})
        truth = GroundTruth([TruthEntry("a", 10.0, 12.0, "scan")])
        rep = label_overlap(ident, ["a"], truth, slack=0.0)
        assert rep.precision == 1.0
        assert rep.recall == 1.0
        assert rep.matched[0].identified_covered == 1.0
        assert rep.matched[0].truth_covered == 1.0

    def test_empty_identified_convention(self):
        truth = GroundTruth([TruthEntry("a", 0.0, 1.0, "scan")])
        rep = label_overlap(IdentifiedSet(), ["a"], truth, slack=1.0)
        assert rep.recall == 0.0
        assert rep.precision == 1.0
        assert rep.flagged_empty

    def test_slack_dilation_matches_shifted_interval(self):
        ident = IdentifiedSet({0: [(11.5, 13.5)]})
        truth = GroundTruth([TruthEntry("a", 10.0, 11.0, "scan")])
        missed = label_overlap(ident, ["a"], truth, slack=0.0)
        assert missed.recall == 0.0
        hit = label_overlap(ident, ["a"], truth, slack=1.0)
        assert hit.recall == 1.0

    def test_per_kind_recall(self):
        ident = IdentifiedSet({0: [(0.0, 1.0)]})
        truth = GroundTruth([
            TruthEntry("a", 0.0, 1.0, "scan"),
            TruthEntry("b", 5.0, 6.0, "fanin"),
        ])
        rep = label_overlap(ident, ["a", "b"], truth, slack=0.5)
        assert rep.per_kind_recall == {"fanin": 0.0, "scan": 1.0}

    def test_negative_slack_rejected(self):
        with pytest.raises(ValueError):
            label_overlap(IdentifiedSet(), [], GroundTruth([]), slack=-1.0)

    def test_end_to_end_scan_recalled(self):
        spec = ScenarioSpec(
            duration=120, background_nodes=60, background_degree=4,
            injections=[ScanInjection("scanner", 600, (60.0, 62.0))],
        )
        triplets, meta, truth = generate_synthetic(spec, seed=4)
        stream = build_stream(triplets, meta.node_names, 1.0)
        result = run_pipeline_once(stream, 2.0, 0.1, PipelineParams())
        rep = label_overlap(result.identified_set, meta.node_names, truth, slack=1.0)
        assert rep.recall == 1.0
        assert rep.matched[0].identified_covered >= 0.95
        assert rep.matched[0].truth_covered >= 0.95


class TestSweep:
    def test_tau_stability(self, spiky_run):
        stream, result, meta, truth = spiky_run
        report = sweep(stream, "tau", [1.0, 2.0, 4.0], 2.0, 2.0, 0.1, PipelineParams())
        assert [p.value for p in report.points] == [1.0, 2.0, 4.0]
        for p in report.points:
            assert p.jaccard_vs_reference >= 0.8
            assert p.error is None

    def test_single_value_is_one_run(self, spiky_run):
        stream, result, meta, truth = spiky_run
        report = sweep(stream, "tau", [2.0], 2.0, 2.0, 0.1, PipelineParams())
        point = report.points[0]
        assert point.jaccard_vs_reference == 1.0
        assert point.identified_measure == result.identified_set.measure
        assert point.class_counts == {
            "AN": sum(1 for l in result.initial.labels if l.verdict == "AN"),
            "A": sum(1 for l in result.initial.labels if l.verdict == "A"),
            "R": sum(1 for l in result.initial.labels if l.verdict == "R"),
        }

    def test_degenerate_r_single_class(self, spiky_run):
        stream, result, meta, truth = spiky_run
        report = sweep(stream, "r", [0.1, 10.0], 0.1, 2.0, 0.1, PipelineParams())
        degenerate = report.points[1]
        assert degenerate.identified_measure == 0.0
        assert degenerate.jaccard_vs_reference == 0.0
        assert degenerate.k_id is None

    def test_threads_do_not_change_results(self, spiky_run):
        stream, result, meta, truth = spiky_run
        serial = sweep(stream, "tau", [1.0, 2.0], 2.0, 2.0, 0.1, PipelineParams(), threads=1)
        parallel = sweep(stream, "tau", [1.0, 2.0], 2.0, 2.0, 0.1, PipelineParams(), threads=4)
        for a, b in zip(serial.points, parallel.points):
            assert (a.value, a.jaccard_vs_reference, a.identified_measure) == (
                b.value, b.jaccard_vs_reference, b.identified_measure
            )

    def test_reference_must_be_in_values(self, spiky_run):
        stream, result, meta, truth = spiky_run
        with pytest.raises(ValueError):
            sweep(stream, "tau", [1.0], 2.0, 2.0, 0.1, PipelineParams())

    def test_point_failure_recorded_and_sweep_continues(self, spiky_run):
        stream, result, meta, truth = spiky_run
        report = sweep(stream, "r", [-1.0, 0.1], 0.1, 2.0, 0.1, PipelineParams())
        failed, good = report.points
        assert failed.error is not None
        assert failed.jaccard_vs_reference == 0.0
        assert good.error is None
        assert good.jaccard_vs_reference == 1.0

    def test_csv_format(self, spiky_run):
        stream, result, meta, truth = spiky_run
        report = sweep(stream, "tau", [2.0], 2.0, 2.0, 0.1, PipelineParams())
        buf = io.StringIO()
        report.write_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "value,jaccard,identified_measure,an,a,r,k_id,runtime_s"
        assert len(lines) == 2


def test_smallest_identifiable_degree(spiky_run):
    stream, result, meta, truth = spiky_run
    k_id = smallest_identifiable_degree(result)
    # the regular background occupies one AN class around degree 4; every
    # class outside it is empty in most slices, so identification starts at 1
    assert k_id == 1.0


def test_report_round_trip(tmp_path):
    import json

    report = build_report({"tau": 2.0}, {"block": {"x": 1}})
    path = tmp_path / "report.json"
    with open(path, "w") as fh:
        write_report(report, fh)
    loaded = json.loads(path.read_text())
    assert loaded["schema_version"] == 1
    assert loaded["config"]["tau"] == 2.0
    assert loaded["block"] == {"x": 1}
