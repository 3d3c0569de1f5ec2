import math

import numpy as np
import pytest

from beamfactory.beams import SsbId, make_config
from beamfactory.layout import OutOfLayoutError, RouteSpec
from beamfactory.link import (LinkBudget, MeasurementTrace, SsbTiming, doppler_shift,
                              extract_path_gain, run_campaign, synthesize_rsrp,
                              trace_from_csv, trace_to_csv, tx_power_per_re)
from beamfactory.propagation import ModelPreset, ShadowingField, path_gain_mean
from conftest import make_trace, single_hall_layout


class TestLinkBudget:
    def test_tx_power_per_re_defaults(self):
        expected = 21.2 - 10.0 * math.log10(792)
        assert tx_power_per_re(LinkBudget()) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-7.79, abs=0.01)

    def test_single_resource_element(self):
        budget = LinkBudget(n_rb=1, n_re=12)
        assert tx_power_per_re(budget) == pytest.approx(budget.p_c - 10 * math.log10(12))

    def test_default_re_count(self):
        assert LinkBudget().n_re == 792 == 12 * 66

    def test_re_consistency_enforced(self):
        with pytest.raises(ValueError):
            LinkBudget(n_rb=66, n_re=791)

    def test_scs_must_be_valid_numerology(self):
        LinkBudget(scs=15e3)
        LinkBudget(scs=240e3)
        with pytest.raises(ValueError):
            LinkBudget(scs=100e3)

    def test_timing_validation(self):
        SsbTiming()
        with pytest.raises(ValueError):
            SsbTiming(burst_periodicity=0.004, burst_duration=0.005)


class TestDoppler:
    def test_platform_maximum(self):
        assert doppler_shift(2.0, 26.0e9) == pytest.approx(173.4, abs=0.1)

    def test_zero_speed(self):
        assert doppler_shift(0.0, 26.0e9) == 0.0

    def test_average_speed(self):
        assert doppler_shift(1.5, 26.0e9) == pytest.approx(130.1, abs=0.1)

    def test_negligible_against_scs(self):
        budget = LinkBudget()
        assert doppler_shift(2.0, budget.carrier_freq) / budget.scs < 0.002

    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            doppler_shift(-1.0, 26e9)


def los_setup(sigma=0.0):
    layout = single_hall_layout(width=80.0, height=20.0, tx=(0.0, 10.0, 3.0), los=True)
    cfg = make_config("B")
    fld = ShadowingField.generate(layout.bounding_box(), sigma=sigma, seed=5)
    return layout, cfg, fld, LinkBudget()


class TestSynthesize:
    def test_boresight_budget_sum(self):
        # point on the exact boresight of B-3-4: G_TX = 27 dBi, LoS, no shadowing
        layout, cfg, fld, budget = los_setup()
        d_h = 1.5 / math.tan(math.radians(8.0))
        p = (d_h, 10.0)
        d3 = math.hypot(d_h, 1.5)
        entries = dict(synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                                       ModelPreset.MEASFIT_NLOS.model, fld, budget, p))
        expected = (path_gain_mean(ModelPreset.MEASFIT_LOS.model, d3)
                    + tx_power_per_re(budget) + (27.0 - 1.0) + 0.0)
        assert entries[SsbId("B", 3, 4)] == pytest.approx(expected, abs=1e-9)

    def test_example_arithmetic(self):
        # budget identity on round numbers: PG -81.7, P/RE -7.79, G 27, corr 1
        total = -81.7 + (21.2 - 10 * math.log10(792)) + (27.0 - 1.0) + 0.0
        assert total == pytest.approx(-63.49, abs=0.01)

    def test_floor_boundary(self):
        # MeasFit-LoS gives PG = -100 dB at d3 = 10**(41.2/22.9); the weakest
        # (pattern-floored) beam then sits at -111.79 dBm: detected at the
        # -120 floor, dropped when the floor is raised to -110
        layout, cfg, fld, budget = los_setup()
        d3 = 10.0 ** (41.2 / 22.9)
        d_h = math.sqrt(d3 ** 2 - 1.5 ** 2)
        p = (d_h, 10.0)
        entries = dict(synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                                       ModelPreset.MEASFIT_NLOS.model, fld, budget, p,
                                       noise_floor_dbm=-120.0))
        weakest = min(entries.values())
        assert len(entries) == 27
        assert weakest == pytest.approx(-100.0 - 10 * math.log10(792) + 21.2
                                        + (27.0 - 30.0) - 1.0, abs=1e-6)
        trimmed = dict(synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                                       ModelPreset.MEASFIT_NLOS.model, fld, budget, p,
                                       noise_floor_dbm=-110.0))
        assert len(trimmed) < 27
        assert min(trimmed.values()) >= -110.0

    def test_out_of_layout_propagates(self):
        layout, cfg, fld, budget = los_setup()
        with pytest.raises(OutOfLayoutError):
            synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                            ModelPreset.MEASFIT_NLOS.model, fld, budget, (100.0, 10.0))

    def test_shared_shadowing_across_beams(self):
        # one realization per position: subtracting the deterministic part
        # leaves the same offset on every beam
        layout, cfg, _fld, budget = los_setup()
        noisy = ShadowingField.white(layout.bounding_box(), sigma=6.0, seed=9)
        p = (22.3, 7.7)
        with_noise = dict(synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                                          ModelPreset.MEASFIT_NLOS.model, noisy,
                                          budget, p, noise_floor_dbm=-300.0))
        clean = dict(synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                                     ModelPreset.MEASFIT_NLOS.model, None, budget, p,
                                     noise_floor_dbm=-300.0))
        offsets = {ssb: with_noise[ssb] - clean[ssb] for ssb in clean}
        assert len(set(round(v, 12) for v in offsets.values())) == 1

    def test_rsrp_equals_pg_when_budget_degenerate(self):
        # P_c chosen so P/RE = 0 dBm, RX gain 0; remaining offset is the
        # TX pattern term, checked against its known value
        layout, cfg, fld, _ = los_setup()
        budget = LinkBudget(p_c=10 * math.log10(792))
        d_h = 1.5 / math.tan(math.radians(8.0))
        p = (d_h, 10.0)
        entries = dict(synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                                       ModelPreset.MEASFIT_NLOS.model, fld, budget, p))
        pg = path_gain_mean(ModelPreset.MEASFIT_LOS.model, math.hypot(d_h, 1.5))
        assert entries[SsbId("B", 3, 4)] == pytest.approx(pg + 26.0, abs=1e-9)


class TestExtractPathGain:
    def test_round_trip_identity(self):
        layout, cfg, _fld, budget = los_setup()
        fld = ShadowingField.generate(layout.bounding_box(), sigma=4.6,
                                      decorrelation_distance=8.0, seed=2)
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = (rng.uniform(2, 78), rng.uniform(1, 19))
            entries = synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                                      ModelPreset.MEASFIT_NLOS.model, fld, budget, p,
                                      noise_floor_dbm=-300.0)
            sample = _one_sample(p, entries)
            truth = (path_gain_mean(ModelPreset.MEASFIT_LOS.model,
                                    _d3(layout, p)) + fld.sample_many([p])[0])
            for ssb, _v in entries[::7]:
                got = extract_path_gain(sample, ssb, cfg, layout, budget)
                assert got == pytest.approx(truth, abs=1e-9)

    def test_rx_gain_not_ignored(self):
        layout, cfg, fld, _ = los_setup()
        p = (15.0, 10.0)
        results = {}
        for g_rx in (0.0, 2.0):
            budget = LinkBudget(g_rx=g_rx)
            entries = synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                                      ModelPreset.MEASFIT_NLOS.model, fld, budget, p)
            sample = _one_sample(p, entries)
            ssb = entries[0][0]
            results[g_rx] = (entries[0][1],
                             extract_path_gain(sample, ssb, cfg, layout, budget))
        assert results[2.0][0] - results[0.0][0] == pytest.approx(2.0, abs=1e-9)
        assert results[2.0][1] == pytest.approx(results[0.0][1], abs=1e-9)

    def test_unknown_beam_rejected(self):
        layout, cfg, fld, budget = los_setup()
        p = (15.0, 10.0)
        entries = synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                                  ModelPreset.MEASFIT_NLOS.model, fld, budget, p)
        sample = _one_sample(p, entries)
        with pytest.raises(KeyError):
            extract_path_gain(sample, SsbId("A", 1, 1), cfg, layout, budget)


def _one_sample(p, entries):
    from beamfactory.link import MeasurementSample
    return MeasurementSample(0.0, p, tuple(entries))


def _d3(layout, p):
    dx = p[0] - layout.tx_position[0]
    dy = p[1] - layout.tx_position[1]
    return math.sqrt(dx * dx + dy * dy + (layout.tx_height - layout.rx_height) ** 2)


class TestRunCampaign:
    def setup_method(self):
        self.layout, self.cfg, self.fld, self.budget = los_setup()
        self.models = (ModelPreset.MEASFIT_LOS.model, ModelPreset.MEASFIT_NLOS.model)

    def run(self, routes, **kw):
        return run_campaign(self.layout, self.cfg, *self.models, self.fld, self.budget,
                            routes, **kw)

    def test_sample_count(self):
        trace = self.run([RouteSpec(((2.0, 10.0), (5.0, 10.0)), speed=1.5)], seed=1)
        assert trace.n_samples == 101

    def test_timestamps_are_burst_multiples(self):
        trace = self.run([RouteSpec(((2.0, 10.0), (5.0, 10.0)), speed=1.5)], seed=1)
        assert np.array_equal(trace.times, np.arange(101) * 0.020)

    def test_same_seed_identical(self):
        routes = [RouteSpec(((2.0, 4.0), (30.0, 4.0), (30.0, 16.0)), speed=1.5)]
        a = self.run(routes, seed=7, fast_fading_sigma=3.0)
        b = self.run(routes, seed=7, fast_fading_sigma=3.0)
        assert np.array_equal(a.rsrp, b.rsrp, equal_nan=True)
        assert np.array_equal(a.positions, b.positions)

    def test_workers_do_not_change_output(self):
        routes = [RouteSpec(((2.0, 4.0), (40.0, 4.0), (40.0, 16.0)), speed=1.5)]
        one = self.run(routes, seed=3, fast_fading_sigma=2.0, workers=1)
        four = self.run(routes, seed=3, fast_fading_sigma=2.0, workers=4)
        assert np.array_equal(one.rsrp, four.rsrp, equal_nan=True)

    def test_route_leaving_layout_names_sample(self):
        routes = [RouteSpec(((70.0, 10.0), (90.0, 10.0)), speed=1.5, name="ghost")]
        with pytest.raises(OutOfLayoutError, match=r"ghost"):
            self.run(routes, seed=0)

    def test_deterministic_without_noise(self):
        # sigma = 0: every sample equals the deterministic budget sum
        route = RouteSpec(((10.0, 10.0), (10.3, 10.0)), speed=1.5)
        trace = self.run([route], seed=0)
        p = trace.positions[0]
        expected = dict(synthesize_rsrp(self.layout, self.cfg, *self.models, self.fld,
                                        self.budget, tuple(p)))
        cols = {b: k for k, b in enumerate(trace.beam_ids)}
        for ssb, value in expected.items():
            assert trace.rsrp[0, cols[ssb]] == pytest.approx(value, abs=1e-12)

    def test_multiple_routes_concatenate(self):
        routes = [RouteSpec(((2.0, 10.0), (3.5, 10.0)), speed=1.5, name="r0"),
                  RouteSpec(((5.0, 10.0), (6.5, 10.0)), speed=1.5, name="r1")]
        trace = self.run(routes, seed=0)
        assert trace.n_samples == 102
        assert np.array_equal(trace.times, np.arange(102) * 0.020)
        assert trace.metadata["routes"] == ["r0", "r1"]
        r1 = trace.route_slice("r1")
        assert r1.n_samples == 51

    def test_empty_routes_rejected(self):
        with pytest.raises(ValueError):
            self.run([], seed=0)


class TestMonotoneAlongBoresight:
    def test_rsrp_nonincreasing_with_distance(self):
        # RX at TX height on the horizontal boresight ray of B-2-6: angles
        # stay constant, so with sigma = 0 RSRP must fall with distance
        layout = single_hall_layout(width=80.0, height=40.0, tx=(0.0, 20.0, 3.0),
                                    rx_height=3.0)
        cfg = make_config("B")
        beam = cfg.beam(SsbId("B", 2, 6))
        budget = LinkBudget()
        theta = math.radians(beam.boresight_az)
        values = []
        for d in np.linspace(2.0, 38.0, 60):
            p = (d * math.cos(theta), 20.0 + d * math.sin(theta))
            entries = dict(synthesize_rsrp(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                                           ModelPreset.MEASFIT_NLOS.model, None,
                                           budget, p))
            values.append(entries[beam.id])
        assert np.all(np.diff(values) < 0)


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        layout, cfg, fld, budget = los_setup()
        trace = run_campaign(layout, cfg, ModelPreset.MEASFIT_LOS.model,
                             ModelPreset.MEASFIT_NLOS.model, fld, budget,
                             [RouteSpec(((2.0, 10.0), (6.0, 10.0)), speed=1.5)], seed=4)
        path = tmp_path / "trace.csv"
        trace_to_csv(trace, path)
        back = trace_from_csv(path)
        assert back.config == trace.config
        assert back.n_samples == trace.n_samples
        assert np.allclose(back.times, trace.times, atol=1e-6)
        assert np.allclose(back.positions, trace.positions, atol=5e-4)
        assert np.allclose(np.round(trace.rsrp, 2), back.rsrp, atol=5e-3, equal_nan=True)

    def test_schema_header_and_formatting(self, tmp_path):
        trace = make_trace("B", [(1.2345, 2.5)], [{SsbId("B", 3, 4): -63.4867}])
        path = tmp_path / "t.csv"
        trace_to_csv(trace, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "time_s,x_m,y_m,config,row,col,rsrp_dbm"
        assert lines[1] == "0.000000,1.234,2.500,B,3,4,-63.49"

    def test_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(ValueError, match="header"):
            trace_from_csv(path)

    def test_rejects_mixed_configs(self, tmp_path):
        path = tmp_path / "mixed.csv"
        path.write_text("time_s,x_m,y_m,config,row,col,rsrp_dbm\n"
                        "0.000000,1.000,1.000,A,1,1,-70.00\n"
                        "0.020000,1.000,1.000,B,1,1,-70.00\n")
        with pytest.raises(ValueError, match="mixes"):
            trace_from_csv(path)


class TestTraceInvariants:
    def test_strictly_increasing_required(self):
        with pytest.raises(ValueError):
            make_trace("B", [(0, 0), (1, 0)], [{}, {}], periodicity=0.0)

    def test_uniform_spacing_required(self):
        cfg = make_config("B")
        beam_ids = tuple(b.id for b in cfg.beams)
        rsrp = np.full((3, 27), np.nan)
        with pytest.raises(ValueError, match="uniform"):
            MeasurementTrace("B", [0.0, 0.02, 0.05], [(0, 0)] * 3, rsrp, beam_ids)

    def test_wrong_config_beams_rejected(self):
        cfg = make_config("A")
        beam_ids = tuple(b.id for b in cfg.beams)
        rsrp = np.full((1, 32), np.nan)
        with pytest.raises(ValueError):
            MeasurementTrace("B", [0.0], [(0, 0)], rsrp, beam_ids)


class TestTraceCsvDuplicates:
    def test_duplicate_entry_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("time_s,x_m,y_m,config,row,col,rsrp_dbm\n"
                        "0.000000,1.000,1.000,B,3,4,-70.00\n"
                        "0.000000,1.000,1.000,B,3,4,-71.00\n")
        with pytest.raises(ValueError, match="duplicate"):
            trace_from_csv(path)
