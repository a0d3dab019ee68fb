import pytest
from hypothesis import given, settings, strategies as st

from ssblpd import config
from ssblpd.experiment import CampaignConfig


class TestDefaults:
    def test_match_parameter_table(self):
        c = config.from_dict({})
        assert c.geometry.isd_m == 200.0
        assert c.geometry.n_sectors == 3 and c.geometry.sector_width_deg == 120.0
        assert c.channel.fc_ghz == 3.5
        assert c.access.gnb_power_dbm == 28.0
        assert c.ssb_period_s == 0.020
        assert c.ofdm.sample_rate_hz == 15.36e6
        assert c.observation_time_s == 0.025
        assert c.access.s_target_db == 0.0
        assert (c.gnb_array.rows, c.gnb_array.cols, c.gnb_array.pols) == (4, 2, 2)
        assert (c.ue_array.rows, c.ue_array.cols, c.ue_array.pols) == (2, 1, 2)

    def test_empty_document(self):
        assert config.parse("") == CampaignConfig()


class TestRoundTrip:
    def test_defaults(self):
        c = CampaignConfig()
        assert config.parse(config.emit(c)) == c

    @given(st.integers(1, 5000), st.integers(1, 100), st.integers(0, 2**63 - 1), st.floats(-20, 20),
           st.booleans(), st.sampled_from([("baseline",), ("proposed",), ("baseline", "proposed")]),
           st.one_of(st.none(), st.floats(-40, 10)))
    @settings(max_examples=40)
    def test_emit_parse(self, drops, reals, seed, target, silent, arms, floor):
        c = config.apply_overrides(CampaignConfig(), [
            f"n_drops={drops}", f"n_realizations={reals}", f"seed={seed}", f"s_target_db={target!r}",
            f"silent={str(silent).lower()}", f"min_power_dbm={'null' if floor is None else repr(floor)}"])
        c = config.from_dict({**config.to_dict(c), "arms": list(arms)})
        assert config.parse(config.emit(c)) == c


class TestErrors:
    def test_unknown_top_level_key_names_line(self):
        with pytest.raises(config.ConfigError, match=r"n_dorps \(line 2\)"):
            config.parse("n_drops: 3\nn_dorps: 4\n")

    def test_unknown_nested_key_names_path_and_line(self):
        text = "seed: 1\naccess:\n  s_target_db: 0\n  power_cpa: true\n"
        with pytest.raises(config.ConfigError, match=r"access\.power_cpa \(line 4\)"):
            config.parse(text)

    def test_wrong_type(self):
        with pytest.raises(config.ConfigError, match=r"n_drops \(line 1\).*integer"):
            config.parse("n_drops: many\n")

    def test_invalid_value(self):
        with pytest.raises(config.ConfigError, match="n_drops"):
            config.parse("n_drops: 0\n")

    def test_yaml_syntax_error_line(self):
        with pytest.raises(config.ConfigError, match="line 3"):
            config.parse("seed: 1\nn_drops: 2\n- stray\nsilent: true\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(config.ConfigError, match="cannot read"):
            config.load(tmp_path / "nope.yaml")


class TestOverrides:
    def test_dotted_and_leaf(self):
        c = config.apply_overrides(CampaignConfig(), ["correlator.coarse_step=2", "s_target_db=3.5"])
        assert c.correlator.coarse_step == 2 and c.access.s_target_db == 3.5

    def test_tuple_value(self):
        c = config.apply_overrides(CampaignConfig(), ["arms=[proposed]"])
        assert c.arms == ("proposed",)

    @pytest.mark.parametrize("item,msg", [("bogus=1", "unknown"), ("n_drops", "key=value"),
                                          ("rows=3", "ambiguous")])
    def test_bad(self, item, msg):
        with pytest.raises(config.ConfigError, match=msg):
            config.apply_overrides(CampaignConfig(), [item])
