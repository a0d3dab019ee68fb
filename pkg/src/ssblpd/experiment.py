"""Monte Carlo campaign: drops, channel realizations, paired H0/H1 trials, ROCs.

One work unit is a (drop, realization) pair. It draws one noise capture for
the eavesdropper and one for the UE; both scenario arms and the signal-absent
hypothesis reuse them, so every H1 statistic has an H0 partner with the same
geometry and noise, and the arms differ only in what the gNB transmits.
"""
from __future__ import annotations

import logging
import multiprocessing as mp
from dataclasses import asdict, dataclass, field

import numpy as np

from . import access_control as ac
from .detection import (CaptureWindow, CorrelationSearch, CorrelatorConfig, RocCurve, SlidingWindowSpec,
                        energy_detect, roc_from_stats, statistic_from_candidates, threshold_at_pfa)
from .nr_phy import N_SC_SSB, OfdmParams, PhysCellId
from .propagation import (GNB_ARRAY, UE_ARRAY, CellGeometry, ChannelConfig, UpaConfig, add_noise, apply_channel,
                          dft_codebook, gen_channel, sample_drop, thermal_noise_dbm)

log = logging.getLogger(__name__)

DETECTORS = ("ue", "eve_energy", "eve_corr")

# substream purposes; never renumber, results depend on them
_STREAM = {"pci": 0, "drop": 1, "channel": 2, "eve_noise": 3, "ue_noise": 4, "tx": 5, "access": 6,
           "silent_eve": 7, "silent_ue": 8}
_ARM_KEY = {"baseline": 0, "proposed": 1}


@dataclass(frozen=True)
class CampaignConfig:
    n_drops: int = 200
    n_realizations: int = 10
    arms: tuple[str, ...] = ("baseline", "proposed")
    seed: int = 42
    observation_time_s: float = 0.025
    ssb_period_s: float = 0.02
    noise_figure_db: float = 9.0
    silent: bool = False
    pfa_target: float = 0.10
    distance_bins: int = 10
    distance_range_m: tuple[float, float] = (10.0, 116.0)
    min_bin_trials: int = 20
    ofdm: OfdmParams = OfdmParams()
    geometry: CellGeometry = CellGeometry()
    gnb_array: UpaConfig = GNB_ARRAY
    ue_array: UpaConfig = UE_ARRAY
    channel: ChannelConfig = ChannelConfig()
    access: ac.AccessConfig = ac.AccessConfig()
    energy: SlidingWindowSpec = SlidingWindowSpec()
    correlator: CorrelatorConfig = CorrelatorConfig()

    def __post_init__(self):
        if self.n_drops < 1 or self.n_realizations < 1:
            raise ValueError("n_drops and n_realizations must be >= 1")
        bad = [a for a in self.arms if a not in {k.value for k in ac.ScenarioKind}]
        if bad or not self.arms:
            raise ValueError(f"unknown arms {bad}; choose from baseline, proposed")

    @property
    def n_samples(self) -> int:
        return int(round(self.observation_time_s * self.ofdm.sample_rate_hz))

    @property
    def noise_dbm(self) -> float:
        """Per-sample noise power over the full sampled band."""
        return thermal_noise_dbm(self.ofdm.sample_rate_hz, self.noise_figure_db)

    @property
    def ssb_noise_dbm(self) -> float:
        return thermal_noise_dbm(N_SC_SSB * self.ofdm.scs_hz, self.noise_figure_db)


@dataclass
class TrialRecord:
    drop: int
    realization: int
    arm: str
    eve_distance_m: float
    ue_distance_m: float
    ue_stat: float
    eve_energy_stat: float
    eve_corr_stat: float
    ue_h0: float
    eve_energy_h0: float
    eve_corr_h0: float
    p_tx_dbm: float
    selected_beam: int | None = None
    gamma_ue_db: float | None = None
    pcis: list = field(default_factory=list)

    def h1(self, detector: str) -> float:
        return {"ue": self.ue_stat, "eve_energy": self.eve_energy_stat, "eve_corr": self.eve_corr_stat}[detector]

    def h0(self, detector: str) -> float:
        return {"ue": self.ue_h0, "eve_energy": self.eve_energy_h0, "eve_corr": self.eve_corr_h0}[detector]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(**d)


@dataclass
class CampaignResults:
    config: CampaignConfig
    records: list[TrialRecord]
    rocs: dict
    distance: dict
    summary: dict


def substream(seed: int, *key) -> np.random.Generator:
    """Independent generator for a (seed, indices..., purpose) key."""
    *idx, purpose = key
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(*idx, _STREAM[purpose])))


def baseline_pci(cfg: CampaignConfig) -> PhysCellId:
    return ac.random_pci(substream(cfg.seed, "pci"))


def _touched(waveforms: dict, max_delay: int, n: int) -> list[tuple[int, int]]:
    spans = [(a, min(z + max_delay, n)) for wf in waveforms.values() for a, z in wf.spans]
    return sorted(spans)


class _Receiver:
    """One receiver's noise capture and its signal-absent scan, reused across arms."""

    def __init__(self, cfg: CampaignConfig, noise: np.ndarray, search: CorrelationSearch):
        self.cfg, self.noise, self.search = cfg, noise, search
        self.noise_mw = 10 ** (cfg.noise_dbm / 10)
        self.h0_capture = CaptureWindow(noise, self.noise_mw, cfg.ofdm.sample_rate_hz)
        self.h0_scan = search.scan(self.h0_capture.normalized())

    def h1(self, rx: np.ndarray, spans) -> tuple[CaptureWindow, object]:
        cap = CaptureWindow(self.noise + rx, self.noise_mw, self.cfg.ofdm.sample_rate_hz)
        blocks = self.search.blocks_touching(spans, self.noise.shape[-1])
        scan = self.search.scan(cap.normalized(), blocks, base=self.h0_scan)
        return cap, scan

    def fresh(self, noise: np.ndarray):
        cap = CaptureWindow(noise, self.noise_mw, self.cfg.ofdm.sample_rate_hz)
        return cap, self.search.scan(cap.normalized())


def run_unit(cfg: CampaignConfig, d: int, r: int) -> list[TrialRecord]:
    """All arms of one (drop, realization) work unit."""
    n = cfg.n_samples
    drop = sample_drop(substream(cfg.seed, d, "drop"), cfg.geometry)
    ch_rng = substream(cfg.seed, d, r, "channel")
    kw = dict(geometry=cfg.geometry, cfg=cfg.channel, tx_array=cfg.gnb_array, rx_array=cfg.ue_array,
              sample_rate_hz=cfg.ofdm.sample_rate_hz, cp_samples=cfg.ofdm.cp_samples)
    ch = {link: gen_channel(ch_rng, drop, link, **kw) for link in ("ue", "eve")}
    n_rx = cfg.ue_array.n_elements
    search = CorrelationSearch(cfg.ofdm, cfg.correlator)
    rx_state = {
        link: _Receiver(cfg, add_noise(substream(cfg.seed, d, r, f"{link}_noise"), np.zeros((n_rx, n)),
                                       cfg.noise_dbm, np.complex64), search)
        for link in ("ue", "eve")
    }
    eve_energy_h0 = energy_detect(rx_state["eve"].h0_capture, cfg.ofdm, cfg.energy).value
    eve_corr_h0 = statistic_from_candidates(rx_state["eve"].h0_scan.candidates(),
                                            use_sss=cfg.correlator.use_sss).value
    ue_h0_cands = rx_state["ue"].h0_scan.candidates()

    codebook = dft_codebook(cfg.gnb_array, cfg.access.beams_per_sector, cfg.geometry)
    beams = {b.beam_id: b for b in codebook}
    periods = ac.n_periods(cfg.ofdm, cfg.observation_time_s, cfg.ssb_period_s)
    dist = {link: float(np.hypot(*drop.position(link))) for link in ("ue", "eve")}

    out = []
    for arm in cfg.arms:
        arm_key = _ARM_KEY[arm]
        genie = None
        if arm == ac.ScenarioKind.BASELINE:
            plan = ac.baseline_schedule(baseline_pci(cfg), cfg.access)
            known = None  # the baseline UE searches blind
        else:
            genie = ac.genie_beam_select(ch["ue"], codebook,
                                         ac.sss_frequencies_hz(cfg.ofdm, cfg.access.freq_offset_prb))
            p_tx = ac.power_control(ac.PowerControlInputs(cfg.ssb_noise_dbm, genie.gamma_db, cfg.access.s_target_db),
                                    cfg.access.power_cap, cfg.access.max_power_dbm, cfg.access.min_power_dbm)
            plan = ac.proposed_schedule(substream(cfg.seed, d, r, arm_key, "access"), genie, p_tx, cfg.access,
                                        periods)
            known = plan.pcis()
        tx = ac.render_plan(plan, substream(cfg.seed, d, r, arm_key, "tx"), cfg.ofdm, cfg.observation_time_s,
                            cfg.ssb_period_s)

        stats = {}
        for link in ("ue", "eve"):
            st = rx_state[link]
            if cfg.silent:
                noise = add_noise(substream(cfg.seed, d, r, arm_key, f"silent_{link}"), np.zeros((n_rx, n)),
                                  cfg.noise_dbm, np.complex64)
                cap, scan = st.fresh(noise)
            else:
                rx = apply_channel(tx, ch[link], beams, n_samples=n)
                spans = _touched(tx, int(ch[link].delay_samples.max()), n)
                cap, scan = st.h1(rx, spans)
            cands = scan.candidates()
            if link == "eve":
                stats["eve_energy"] = energy_detect(cap, cfg.ofdm, cfg.energy).value
                stats["eve_corr"] = statistic_from_candidates(cands, use_sss=cfg.correlator.use_sss).value
            else:
                stats["ue"] = statistic_from_candidates(cands, known, cfg.correlator.use_sss).value
        ue_h0 = statistic_from_candidates(ue_h0_cands, known, cfg.correlator.use_sss).value
        out.append(TrialRecord(
            drop=d, realization=r, arm=str(ac.ScenarioKind(arm).value),
            eve_distance_m=dist["eve"], ue_distance_m=dist["ue"],
            ue_stat=stats["ue"], eve_energy_stat=stats["eve_energy"], eve_corr_stat=stats["eve_corr"],
            ue_h0=ue_h0, eve_energy_h0=eve_energy_h0, eve_corr_h0=eve_corr_h0,
            p_tx_dbm=float(plan.entries[0].power_dbm),
            selected_beam=None if genie is None else genie.beam_id,
            gamma_ue_db=None if genie is None else genie.gamma_db,
            pcis=[p.cell_id() for p in plan.pcis()],
        ))
    return out


def run_trial(cfg: CampaignConfig, d: int, r: int, arm: str) -> TrialRecord:
    """Single-arm convenience wrapper around :func:`run_unit`."""
    sub = CampaignConfig(**{**cfg.__dict__, "arms": (arm,)})
    return run_unit(sub, d, r)[0]


def _unit(args):
    cfg, d, r = args
    return run_unit(cfg, d, r)


def iter_units(cfg: CampaignConfig, workers: int = 1):
    """Yield each work unit's records in (drop, realization) order."""
    jobs = [(cfg, d, r) for d in range(cfg.n_drops) for r in range(cfg.n_realizations)]
    if workers <= 1:
        yield from map(_unit, jobs)
        return
    with mp.get_context("spawn").Pool(workers) as pool:
        yield from pool.imap(_unit, jobs, chunksize=1)


def run_campaign(cfg: CampaignConfig, workers: int = 1, on_unit=None) -> CampaignResults:
    """Run every work unit and aggregate; the result depends only on ``cfg``."""
    records: list[TrialRecord] = []
    total = cfg.n_drops * cfg.n_realizations
    for i, recs in enumerate(iter_units(cfg, workers), 1):
        records.extend(recs)
        if on_unit is not None:
            on_unit(recs)
        if i % 10 == 0 or i == total:
            log.info("unit %d/%d", i, total)
    return aggregate(cfg, records)


def build_rocs(records: list[TrialRecord], arms) -> dict:
    rocs = {}
    for arm in arms:
        rs = [t for t in records if t.arm == arm]
        if not rs:
            continue
        for det in DETECTORS:
            rocs[(arm, det)] = roc_from_stats([t.h1(det) for t in rs], [t.h0(det) for t in rs])
    return rocs


def distance_edges(cfg: CampaignConfig) -> np.ndarray:
    return np.linspace(*cfg.distance_range_m, cfg.distance_bins + 1)


def distance_binned_pd(records: list[TrialRecord], arm: str, pfa: float = 0.10, bin_edges=None,
                       min_trials: int = 20, detectors=("eve_energy", "eve_corr")) -> list[dict]:
    """pd per eavesdropper-distance bin with thresholds fixed on the pooled H0 of the arm."""
    rs = [t for t in records if t.arm == arm]
    edges = np.linspace(10.0, 116.0, 11) if bin_edges is None else np.asarray(bin_edges, dtype=float)
    if not rs:
        return []
    thr = {det: threshold_at_pfa([t.h0(det) for t in rs], pfa) for det in detectors}
    dist = np.array([t.eve_distance_m for t in rs])
    # the last edge is inclusive
    idx = np.clip(np.searchsorted(edges, dist, side="right") - 1, 0, len(edges) - 2)
    idx[(dist < edges[0]) | (dist > edges[-1])] = -1
    rows = []
    for b in range(len(edges) - 1):
        sel = [t for t, i in zip(rs, idx) if i == b]
        row = {"lo_m": float(edges[b]), "hi_m": float(edges[b + 1]), "n": len(sel),
               "low_confidence": len(sel) < min_trials}
        for det in detectors:
            row[det] = float(np.mean([t.h1(det) > thr[det] for t in sel])) if sel else None
        rows.append(row)
    return rows


def pd_table(rocs: dict, pfa: float) -> dict:
    from .detection import pd_at_pfa
    return {f"{arm}/{det}": pd_at_pfa(roc, pfa) for (arm, det), roc in rocs.items()}


def summarize(rocs: dict, pfa: float) -> dict:
    pds = pd_table(rocs, pfa)
    out = {"pfa": pfa, "pd": pds}
    for det in ("eve_corr", "eve_energy", "ue"):
        b, p = pds.get(f"baseline/{det}"), pds.get(f"proposed/{det}")
        if b is not None and p is not None:
            out[f"{det}_pd_reduction_pp"] = 100.0 * (b - p)
            out[f"{det}_pd_reduction_rel_pct"] = 100.0 * (b - p) / b if b > 0 else None
    return out


def aggregate(cfg: CampaignConfig, records: list[TrialRecord]) -> CampaignResults:
    rocs = build_rocs(records, cfg.arms)
    edges = distance_edges(cfg)
    dist = {arm: distance_binned_pd(records, arm, cfg.pfa_target, edges, cfg.min_bin_trials) for arm in cfg.arms}
    return CampaignResults(cfg, records, rocs, dist, summarize(rocs, cfg.pfa_target))


__all__ = ["CampaignConfig", "TrialRecord", "CampaignResults", "RocCurve", "run_unit", "run_trial",
           "run_campaign", "aggregate", "build_rocs", "distance_binned_pd", "summarize", "substream", "DETECTORS"]
