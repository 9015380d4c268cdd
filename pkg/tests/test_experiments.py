"""Tests for the experiment runners: configs, seeds, rows, verdicts.

The batched kernels used inside the runners are required to agree
elementwise with the scalar point-process operations they vectorise;
those comparisons are the load-bearing checks here.  End-to-end runs use
deliberately small grids so the whole module stays fast.
"""

import csv
import io
import math

import numpy as np
import pytest

from subortrim import levy
from subortrim.experiments import (
    CSV_HEADER,
    DEFAULT_MASTER_SEED,
    ExperimentConfig,
    ExperimentReport,
    ReportRow,
    Verdict,
    _batched_ratio,
    _batched_z_trimmed,
    _downsample,
    _family_tail,
    _weakly_nonincreasing,
    run_edge_bottom,
    run_edge_left,
    run_edge_right,
    run_experiment,
    run_fidi_validation,
)
from subortrim.pointproc import (
    ArrivalSeries,
    ordered_jumps,
    ratio_diagnostic,
    restrict_to,
    sample_arrivals,
    z_statistic_trimmed,
)


def _tiny(edge, **kw):
    base = dict(replicates=1000, n_terms=1000, seed_blocks=1)
    if edge in ("bottom", "fidi", "diagnostics"):
        base["replicates"] = 5
    base.update(kw)
    return ExperimentConfig(edge=edge, **base)


class TestConfig:
    def test_default_tail_per_edge(self):
        expected = {
            "left": "stable",
            "right": "log",
            "bottom": "cauchy",
            "fidi": "cauchy",
            "diagnostics": "log",
        }
        for edge, tail in expected.items():
            assert _tiny(edge).tail == tail

    def test_echo_round_trips_grids_as_lists(self):
        cfg = _tiny("fidi")
        echo = cfg.echo()
        assert echo["edge"] == "fidi"
        assert echo["alpha_grid"] == list(cfg.alpha_grid)
        assert echo["master_seed"] == DEFAULT_MASTER_SEED
        assert isinstance(echo["lambda_grid"], list)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(edge="top"),
            dict(edge="left", alpha_grid=()),
            dict(edge="left", alpha_grid=(1.0,)),
            dict(edge="left", alpha_grid=(0.0,)),
            dict(edge="left", t_grid=(0.0,)),
            dict(edge="left", lambda_grid=(0.5, 0.5)),
            dict(edge="left", lambda_grid=(0.5, 1.5)),
            dict(edge="left", lambda_grid=(0.0, 0.5)),
            dict(edge="left", r_grid=(-1,)),
            dict(edge="left", replicates=999),
            dict(edge="right", replicates=999),
            dict(edge="left", replicates=1000, n_terms=999),
            dict(edge="left", replicates=1000, seed_blocks=0),
            dict(edge="left", replicates=1000, jobs=0),
            dict(edge="right", replicates=1000, level_grid=(1.0,)),
            dict(
                edge="right",
                replicates=1000,
                lambda_grid=(0.5, 1.0),
                level_grid=(1.0, -2.0),
            ),
            dict(edge="right", replicates=1000, tail="stable"),
            dict(edge="left", replicates=1000, tail="log"),
            dict(edge="left", replicates=1000, tail="fancy(3)"),
        ],
    )
    def test_rejected_configs(self, kw):
        with pytest.raises(ValueError):
            ExperimentConfig(**kw)

    def test_low_replicates_fine_off_the_ks_edges(self):
        for edge in ("bottom", "fidi", "diagnostics"):
            assert ExperimentConfig(edge=edge, replicates=1).replicates == 1

    def test_frozen(self):
        cfg = _tiny("left")
        with pytest.raises(AttributeError):
            cfg.jobs = 2


class TestFamilyTail:
    def test_alpha_supersedes_embedded_index(self):
        assert _family_tail("stable(0.9)", 0.25) == levy.stable_tail(0.25)
        assert _family_tail("rational(0.9)", 0.25) == levy.rational_tail(0.25)
        assert _family_tail("const(3.0, 0.9)", 0.25) == levy.constant_tail(3.0, 0.25)

    def test_cauchy_alias(self):
        assert _family_tail("cauchy", 0.5) == levy.stable_tail(0.5)

    def test_zero_index_families_ignore_alpha(self):
        assert _family_tail("log", 0.5) == levy.log_power_tail()
        assert _family_tail("logpow(2.0)", 0.5) == levy.log_power_tail(2.0)

    def test_unknown_family(self):
        with pytest.raises(ValueError, match="unknown tail family"):
            _family_tail("gauss", 0.5)


class TestCsvShape:
    def test_header_pinned(self):
        assert (
            CSV_HEADER
            == "edge,tail,alpha,t,lambda,r,n,ks_stat,p_value,aux1,aux2,seed,ms_elapsed"
        )

    def test_csv_line_repr_floats_and_zero_ms(self):
        row = ReportRow(
            edge="left",
            tail="stable",
            alpha=0.5,
            t=1e-4,
            lam=1.0,
            r=2,
            n=1000,
            ks_stat=0.012345678901234567,
            p_value=0.5,
            aux1=1.25,
            aux2=float("nan"),
            seed=42,
        )
        line = row.csv_line()
        fields = line.split(",")
        assert fields[0] == "left"
        assert fields[2] == "0.5"
        assert fields[3] == "0.0001"
        assert fields[7] == repr(0.012345678901234567)
        assert fields[9] == "1.25"
        assert fields[10] == "nan"
        assert fields[-1] == "0"
        # repr round-trips doubles exactly
        assert float(fields[7]) == 0.012345678901234567

    def test_report_csv_text(self):
        cfg = _tiny("fidi")
        report = ExperimentReport(edge="fidi", config=cfg)
        assert report.csv_text() == CSV_HEADER + "\n"
        assert report.all_pass  # vacuous until verdicts land
        report.verdicts.append(Verdict(name="x", passed=False, detail=""))
        assert not report.all_pass


class TestBatchedKernels:
    @property
    def rng(self):
        return np.random.default_rng(777)

    def _matrix(self, rows=8, depth=1500):
        arrivals = np.empty((rows, depth))
        marks = np.empty_like(arrivals)
        for i in range(rows):
            series = sample_arrivals(7000 + i, depth)
            arrivals[i] = series.arrivals
            marks[i] = series.marks
        return arrivals, marks

    @pytest.mark.parametrize("tail_spec", ["log", "stable(0.5)"])
    @pytest.mark.parametrize("lam, r", [(1.0, 0), (0.5, 1), (0.75, 2)])
    def test_z_matches_scalar_route(self, tail_spec, lam, r):
        tail = levy.parse_tail(tail_spec)
        t = 1e-3
        arrivals, marks = self._matrix()
        batched = _batched_z_trimmed(tail, t, arrivals, marks, lam, r)
        assert batched.shape == (arrivals.shape[0],)
        for i in range(arrivals.shape[0]):
            series = ArrivalSeries(
                arrivals=arrivals[i].copy(), marks=marks[i].copy(), seed=0
            )
            ladder = ordered_jumps(tail, t, series)
            scalar = z_statistic_trimmed(ladder, lam, r)
            assert batched[i] == pytest.approx(scalar, rel=1e-12)

    def test_ratio_matches_scalar_route(self):
        arrivals, marks = self._matrix(rows=6, depth=1200)
        tail = levy.log_power_tail()
        for r in (0, 1, 3):
            log_j = np.empty_like(arrivals)
            ladders = []
            for i in range(arrivals.shape[0]):
                series = ArrivalSeries(
                    arrivals=arrivals[i].copy(), marks=marks[i].copy(), seed=0
                )
                ladder = ordered_jumps(tail, 1.0, series)
                log_j[i] = ladder.log_jumps
                ladders.append(ladder)
            batched = _batched_ratio(log_j, r)
            for i, ladder in enumerate(ladders):
                assert batched[i] == pytest.approx(
                    ratio_diagnostic(ladder, r), rel=1e-13
                )
                assert batched[i] >= 1.0

    def test_z_respects_restriction(self):
        # lam = 1 keeps everything; a tiny lam thins the ladder, which can
        # only shrink the trimmed statistic on shared randomness.
        tail = levy.stable_tail(0.5)
        arrivals, marks = self._matrix(rows=5)
        full = _batched_z_trimmed(tail, 1e-2, arrivals, marks, 1.0, 1)
        thin = _batched_z_trimmed(tail, 1e-2, arrivals, marks, 0.05, 1)
        assert np.all(thin <= full + 1e-15)


class TestHelpers:
    def test_weakly_nonincreasing(self):
        assert _weakly_nonincreasing([3.0, 2.0, 2.0, 1.0])
        assert not _weakly_nonincreasing([1.0, 2.0])
        assert _weakly_nonincreasing([1.0, 1.05], tol=0.1)
        assert not _weakly_nonincreasing([1.0, 1.2], tol=0.1)
        assert _weakly_nonincreasing([])
        assert _weakly_nonincreasing([1.0])

    def test_downsample_sorts_and_caps(self):
        vals = [3.0, 1.0, 2.0]
        assert _downsample(vals) == (1.0, 2.0, 3.0)
        big = np.random.default_rng(5).uniform(size=2000)
        down = _downsample(big, cap=128)
        assert len(down) == 128
        assert down[0] == min(big) and down[-1] == max(big)
        assert all(b >= a for a, b in zip(down, down[1:]))


class TestEdgeLeft:
    def test_small_run_shape_and_verdicts(self):
        cfg = ExperimentConfig(
            edge="left",
            tail="stable",
            alpha_grid=(0.5,),
            t_grid=(1.0, 1e-3),
            lambda_grid=(1.0,),
            r_grid=(0,),
            replicates=1000,
            n_terms=1000,
            seed_blocks=1,
            plot=True,
        )
        report = run_edge_left(cfg)
        assert report.edge == "left"
        # one row per (alpha, r, lam, block, t)
        assert len(report.rows) == 2
        for row in report.rows:
            assert row.edge == "left"
            assert row.n == 1000
            assert 0.0 <= row.p_value <= 1.0
            assert row.ks_stat > 0.0
        names = [v.name for v in report.verdicts]
        assert "self_similarity a=0.5 r=0 lam=1" in names
        assert any(n.startswith("ks_trend_nonincreasing") for n in names)
        assert report.plots and report.plots[0].name == "left_a0.5_r0_lam1"
        assert len(report.plots[0].curve_x) > 0

    def test_wrong_edge_guard(self):
        with pytest.raises(ValueError, match="expected 'left'"):
            run_edge_left(_tiny("fidi"))


@pytest.fixture(scope="module")
def right_report():
    cfg = ExperimentConfig(
        edge="right",
        t_grid=(1e-2, 1e-4),
        lambda_grid=(0.5, 1.0),
        level_grid=(1.0, 2.0),
        r_grid=(0,),
        replicates=1000,
        n_terms=1000,
        seed_blocks=1,
    )
    return run_edge_right(cfg)


class TestEdgeRight:
    def test_row_inventory(self, right_report):
        report = right_report
        # per (r, lam): one row per t; plus ratio rows per t for the least
        # trimmed index and one joint-event check row per eligible r.
        by_kind = {}
        for row in report.rows:
            by_kind.setdefault(row.edge, []).append(row)
        assert set(by_kind) == {"right", "right:ratio", "right:fidi"}
        assert len(by_kind["right"]) == 4  # 1 r x 2 lam x 2 t
        assert len(by_kind["right:ratio"]) == 2  # r = 0 only, per t
        assert len(by_kind["right:fidi"]) == 1
        for row in by_kind["right"]:
            assert 0.0 <= row.aux2 <= 1.0  # P(z <= level)
            assert 0.0 <= row.p_value <= 1.0
        for row in by_kind["right:ratio"]:
            assert row.lam == 1.0
            assert row.aux1 >= 1.0  # median ratio
            assert row.aux2 >= row.aux1  # max dominates median
            assert math.isnan(row.ks_stat)
        for row in by_kind["right:fidi"]:
            assert row.ks_stat == pytest.approx(abs(row.aux1 - row.aux2), rel=1e-15)
            assert row.n == 1000

    def test_verdict_inventory(self, right_report):
        names = [v.name for v in right_report.verdicts]
        assert "ks_trend_nonincreasing r=0 lam=0.5" in names
        assert any(n.startswith("ks_terminal_floor") for n in names)
        assert "ratio_trend_to_one" in names
        assert any(n.startswith("fidi_joint") for n in names)

    def test_wrong_edge_guard(self):
        with pytest.raises(ValueError, match="expected 'right'"):
            run_edge_right(_tiny("fidi"))


class TestEdgeBottom:
    def test_small_run(self):
        cfg = ExperimentConfig(
            edge="bottom",
            alpha_grid=(0.4, 0.2, 0.1),
            lambda_grid=(1.0,),
            r_grid=(0, 1),
            replicates=3,
            n_terms=1000,
            seed_blocks=1,
            plot=True,
        )
        report = run_edge_bottom(cfg)
        # one aggregated row per (r, lam, alpha): 2 * 1 * 3
        assert len(report.rows) == 6
        for row in report.rows:
            assert math.isnan(row.t)
            assert row.n == 3
            assert 0.0 <= row.aux2 <= 1.0
        names = [v.name for v in report.verdicts]
        assert "per_seed_monotone r=0 lam=1" in names
        assert "pathwise_r_decreasing" in names
        assert any(n.startswith("terminal_2pct") for n in names)
        assert report.plots
        for sl in report.plots:
            assert sl.curve_x == () and sl.curve_y == ()
            assert len(sl.samples) > 0

    def test_needs_decreasing_alpha(self):
        cfg = ExperimentConfig(
            edge="bottom",
            alpha_grid=(0.1, 0.2, 0.4),
            replicates=3,
            n_terms=1000,
        )
        with pytest.raises(ValueError, match="decreasing"):
            run_edge_bottom(cfg)


class TestFidiEdge:
    def test_small_run(self):
        cfg = ExperimentConfig(edge="fidi", replicates=300, n_terms=1000)
        report = run_fidi_validation(cfg)
        # 12 grid queries x 2 ranks
        assert len(report.rows) == 24
        for row in report.rows:
            assert row.alpha == 1.0
            assert float(row.t).is_integer() and 1 <= row.t <= 12
            assert row.ks_stat == pytest.approx(abs(row.aux1 - row.aux2), abs=1e-15)
            assert 0.0 <= row.aux1 <= 1.0
        names = [v.name for v in report.verdicts]
        assert "n1_reduction_exact" in names
        assert sum(n.startswith("fidi_query") for n in names) == 24
        n1 = next(v for v in report.verdicts if v.name == "n1_reduction_exact")
        assert n1.passed


class TestDeterminismAndParallel:
    def test_rerun_is_bitwise_identical(self):
        cfg = ExperimentConfig(edge="fidi", replicates=100, n_terms=1000)
        a = run_fidi_validation(cfg)
        b = run_fidi_validation(cfg)
        assert a.csv_text() == b.csv_text()
        assert [v.name for v in a.verdicts] == [v.name for v in b.verdicts]

    def test_jobs_do_not_change_bytes(self):
        base = dict(
            edge="bottom",
            alpha_grid=(0.4, 0.2),
            lambda_grid=(1.0,),
            r_grid=(0,),
            replicates=4,
            n_terms=1000,
            seed_blocks=1,
        )
        serial = run_edge_bottom(ExperimentConfig(**base, jobs=1))
        parallel = run_edge_bottom(ExperimentConfig(**base, jobs=2))
        assert serial.csv_text() == parallel.csv_text()

    def test_csv_parses_back(self):
        cfg = ExperimentConfig(edge="fidi", replicates=50, n_terms=1000)
        report = run_fidi_validation(cfg)
        reader = csv.DictReader(io.StringIO(report.csv_text()))
        rows = list(reader)
        assert reader.fieldnames == CSV_HEADER.split(",")
        assert len(rows) == len(report.rows)
        assert all(r["ms_elapsed"] == "0" for r in rows)
        assert float(rows[0]["ks_stat"]) == report.rows[0].ks_stat
        assert math.isnan(float(rows[0]["p_value"]))  # analytic rows carry no KS p


class TestDispatch:
    def test_run_experiment_routes_by_edge(self):
        cfg = ExperimentConfig(edge="fidi", replicates=60, n_terms=1000)
        direct = run_fidi_validation(cfg)
        routed = run_experiment(cfg)
        assert routed.edge == "fidi"
        assert routed.csv_text() == direct.csv_text()


class TestRestrictConsistency:
    def test_batched_kernel_honours_mark_filter(self):
        # The batched z at lam must match the scalar z on the explicitly
        # restricted ladder; spot-checks the mark-filter semantics.
        tail = levy.stable_tail(0.5)
        series = sample_arrivals(4242, 1500)
        lam = 0.3
        ladder = ordered_jumps(tail, 1e-2, series)
        kept = restrict_to(ladder, lam)
        assert kept.log_jumps.size < ladder.log_jumps.size
        batched = _batched_z_trimmed(
            tail,
            1e-2,
            series.arrivals[None, :],
            series.marks[None, :],
            lam,
            0,
        )
        assert batched[0] == pytest.approx(
            z_statistic_trimmed(ladder, lam, 0), rel=1e-12
        )
