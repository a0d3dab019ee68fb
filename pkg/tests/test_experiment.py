import numpy as np
import pytest

from ssblpd import access_control as ac
from ssblpd import experiment as ex
from ssblpd.detection import CorrelationSearch
from ssblpd.propagation import (CellGeometry, add_noise, apply_channel, dft_codebook, flat_channel, gen_channel,
                                sample_drop)

# one burst, one period: about a second per unit
SMALL = ex.CampaignConfig(n_drops=2, n_realizations=1, observation_time_s=0.006, seed=3)


@pytest.fixture(scope="module")
def unit():
    return ex.run_unit(SMALL, 0, 0)


def rec(arm="proposed", drop=0, realization=0, dist=50.0, h1=1.0, h0=0.0):
    return ex.TrialRecord(drop, realization, arm, dist, 30.0, h1, h1, h1, h0, h0, h0, 0.0)


class TestConfig:
    def test_defaults_are_desk_scale(self):
        c = ex.CampaignConfig()
        assert (c.n_drops, c.n_realizations, c.access.s_target_db) == (200, 10, 0.0)
        assert c.n_samples == 384_000

    @pytest.mark.parametrize("kw", [{"n_drops": 0}, {"n_realizations": 0}, {"arms": ("both",)}, {"arms": ()}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ex.CampaignConfig(**kw)

    def test_noise_levels(self):
        c = ex.CampaignConfig()
        assert c.ssb_noise_dbm == pytest.approx(-174 + 10 * np.log10(7.2e6) + 9, abs=1e-9)
        assert c.noise_dbm == pytest.approx(-174 + 10 * np.log10(15.36e6) + 9, abs=1e-9)


class TestRunUnit:
    def test_both_arms_recorded(self, unit):
        assert [r.arm for r in unit] == ["baseline", "proposed"]

    def test_proposed_single_beam_within_cap(self, unit):
        p = unit[1]
        assert p.p_tx_dbm <= 28.0
        assert p.selected_beam is not None and 0 <= p.selected_beam < 24
        assert len(p.pcis) == ac.n_periods(window_s=SMALL.observation_time_s)
        assert p.p_tx_dbm == pytest.approx(min(SMALL.ssb_noise_dbm - p.gamma_ue_db, 28.0), abs=1e-9)

    def test_baseline_full_power_fixed_id(self, unit):
        b = unit[0]
        assert b.p_tx_dbm == 28.0 and b.selected_beam is None
        assert b.pcis == [ex.baseline_pci(SMALL).cell_id()]

    def test_eavesdropper_h0_shared_across_arms(self, unit):
        b, p = unit
        assert (b.eve_energy_h0, b.eve_corr_h0) == (p.eve_energy_h0, p.eve_corr_h0)
        assert (b.eve_distance_m, b.ue_distance_m) == (p.eve_distance_m, p.ue_distance_m)

    def test_deterministic(self, unit):
        assert ex.run_unit(SMALL, 0, 0) == unit

    def test_run_trial_matches_unit(self, unit):
        assert ex.run_trial(SMALL, 0, 0, "proposed") == unit[1]

    def test_proposed_plan_ignores_eavesdropper_channel(self, unit, monkeypatch):
        real = ex.gen_channel

        def fake(rng, drop, link, **kw):
            if link == "eve":
                return flat_channel(-60.0, 10.0, -20.0)
            return real(rng, drop, link, **kw)

        monkeypatch.setattr(ex, "gen_channel", fake)
        p = ex.run_unit(SMALL, 0, 0)[1]
        assert (p.selected_beam, p.p_tx_dbm, p.pcis, p.gamma_ue_db, p.ue_stat) == (
            unit[1].selected_beam, unit[1].p_tx_dbm, unit[1].pcis, unit[1].gamma_ue_db, unit[1].ue_stat)
        assert p.eve_corr_stat != unit[1].eve_corr_stat


class TestBaselineCapture:
    def test_contains_every_beam(self):
        rng = np.random.default_rng(2)
        ch = gen_channel(rng, sample_drop(rng), "eve")
        plan = ac.baseline_schedule(ac.random_pci(rng))
        tx = ac.render_plan(plan, rng, window_s=0.006)
        assert sorted(tx) == list(range(24))
        beams = {b.beam_id: b for b in dft_codebook()}
        n = 92160
        total = apply_channel(tx, ch, beams, n_samples=n)
        parts = [apply_channel({k: tx[k]}, ch, beams, n_samples=n) for k in tx]
        assert all(np.any(p) for p in parts)
        np.testing.assert_allclose(sum(parts), total, atol=1e-15)


class TestReceiverRescan:
    def test_h1_rescan_equals_full_scan(self):
        cfg = SMALL
        search = CorrelationSearch(cfg.ofdm, cfg.correlator)
        noise = add_noise(np.random.default_rng(0), np.zeros((4, cfg.n_samples)), cfg.noise_dbm, np.complex64)
        receiver = ex._Receiver(cfg, noise, search)
        rng = np.random.default_rng(1)
        ch = gen_channel(rng, sample_drop(rng), "eve")
        tx = ac.render_plan(ac.baseline_schedule(ac.random_pci(rng)), rng, window_s=cfg.observation_time_s)
        rx = apply_channel(tx, ch, {b.beam_id: b for b in dft_codebook()}, n_samples=cfg.n_samples)
        spans = ex._touched(tx, int(ch.delay_samples.max()), cfg.n_samples)
        cap, scan = receiver.h1(rx, spans)
        a, b = scan.candidates(), search.scan(cap.normalized()).candidates()
        for name in ("nid2", "time", "freq", "pss", "sss"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


class TestCampaign:
    def test_workers_do_not_change_results(self):
        one = ex.run_campaign(SMALL, workers=1)
        two = ex.run_campaign(SMALL, workers=2)
        assert one.records == two.records
        assert one.summary == two.summary

    def test_roc_per_arm_and_detector(self):
        recs = [rec(arm=a, h1=float(i), h0=float(-i)) for a in ("baseline", "proposed") for i in range(5)]
        rocs = ex.build_rocs(recs, ("baseline", "proposed"))
        assert set(rocs) == {(a, d) for a in ("baseline", "proposed") for d in ex.DETECTORS}

    def test_substreams_independent_of_order(self):
        a = ex.substream(1, 3, 4, "channel").random(3)
        ex.substream(1, 0, 0, "channel").random(10)
        assert np.array_equal(a, ex.substream(1, 3, 4, "channel").random(3))
        assert not np.array_equal(a, ex.substream(1, 3, 4, "drop").random(3))

    def test_summary_reductions(self):
        recs = ([rec("baseline", h1=5.0, h0=0.0) for _ in range(10)]
                + [rec("proposed", h1=-5.0, h0=0.0) for _ in range(10)])
        s = ex.summarize(ex.build_rocs(recs, ("baseline", "proposed")), 0.1)
        assert s["eve_corr_pd_reduction_pp"] == pytest.approx(100.0)
        assert s["eve_corr_pd_reduction_rel_pct"] == pytest.approx(100.0)


class TestDistanceBins:
    def test_all_below_threshold_gives_zero(self):
        rng = np.random.default_rng(0)
        recs = [rec(dist=d, h1=-1.0, h0=h) for d, h in zip(rng.uniform(10, 116, 200), rng.uniform(0, 1, 200))]
        rows = ex.distance_binned_pd(recs, "proposed", 0.1)
        assert all(r["eve_corr"] == 0.0 and r["eve_energy"] == 0.0 for r in rows if r["n"])

    def test_empty_bin_is_null_and_flagged(self):
        recs = [rec(dist=15.0) for _ in range(30)]
        rows = ex.distance_binned_pd(recs, "proposed", 0.1)
        assert rows[0]["n"] == 30 and not rows[0]["low_confidence"]
        assert rows[-1]["n"] == 0 and rows[-1]["eve_corr"] is None and rows[-1]["low_confidence"]

    def test_edges_to_circumradius_cover_all_drops(self):
        g = CellGeometry()
        assert g.r_m == pytest.approx(115.47, abs=0.005)
        rng = np.random.default_rng(1)
        recs = []
        for _ in range(2000):
            d = sample_drop(rng)
            recs.append(rec(dist=float(np.hypot(*d.eve_pos))))
        rows = ex.distance_binned_pd(recs, "proposed", 0.1, np.linspace(0.0, g.r_m, 11))
        assert sum(r["n"] for r in rows) == 2000

    def test_threshold_from_pooled_h0(self):
        # h0 uniform 0..99: threshold at pfa 0.1 is 89, so h1 = 89.5 is detected and 89 is not
        recs = [rec(dist=50.0, h1=89.5 if i % 2 else 89.0, h0=float(i)) for i in range(100)]
        rows = ex.distance_binned_pd(recs, "proposed", 0.1)
        assert [r["eve_corr"] for r in rows if r["n"]] == [0.5]

    def test_records_round_trip(self, unit):
        for r in unit:
            assert ex.TrialRecord.from_dict(r.to_dict()) == r
