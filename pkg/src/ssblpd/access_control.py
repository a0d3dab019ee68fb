"""Downlink SSB scheduling for the two access scenarios.

Baseline: every sector sweeps all its beams each burst at full power under a
fixed cell id. Proposed: an auxiliary transmitter next to the UE asks the gNB
for access; the gNB answers with one SSB on the best beam, at the lowest
power that still meets the UE's target SNR, under a fresh cell id per burst.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .nr_phy import (N_NID1, N_NID2, PSS_SSS_FIRST_SC, SEQ_LEN, OfdmParams, PhysCellId, SsbTransmission,
                     Waveform, assemble_ssb_grid, compose_tx_window, gen_pbch_placeholder)
from .propagation import Beam, ChannelRealization


class ScenarioKind(str, enum.Enum):
    BASELINE = "baseline"
    PROPOSED = "proposed"


@dataclass(frozen=True)
class AccessConfig:
    gnb_power_dbm: float = 28.0
    n_sectors: int = 3
    beams_per_sector: int = 8
    s_target_db: float = 0.0
    power_cap: bool = True
    max_power_dbm: float = 28.0
    min_power_dbm: float | None = None
    aux_power_dbm: float = 23.0
    freq_offset_prb: int = 11
    proposed_burst_position: int = 0


@dataclass(frozen=True)
class PowerControlInputs:
    eta_tue_dbm: float
    gamma_tue_db: float
    s_target_db: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.s_target_db):
            raise ValueError("s_target_db must be finite")
        if self.gamma_tue_db > 0:
            warnings.warn(f"path gain {self.gamma_tue_db:.2f} dB is positive", RuntimeWarning, stacklevel=2)


@dataclass(frozen=True)
class TxEntry:
    sector: int
    beam_id: int
    power_dbm: float
    burst_position: int
    pci: PhysCellId
    freq_offset_prb: int = 11


@dataclass(frozen=True)
class TxPlan:
    """Scheduled SSBs. ``period_pcis[p]``, when given, overrides the cell id of period ``p``."""

    entries: tuple[TxEntry, ...]
    period_pcis: tuple[PhysCellId, ...] | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def pcis(self) -> list[PhysCellId]:
        """Every cell id the plan transmits under."""
        if self.period_pcis is not None:
            return list(dict.fromkeys(self.period_pcis))
        return list(dict.fromkeys(e.pci for e in self.entries))


@dataclass(frozen=True)
class AuxUeMessage:
    requested_pci: PhysCellId
    aux_tx_power_dbm: float
    nonce: int


@dataclass(frozen=True)
class GenieSelection:
    sector: int
    beam_id: int
    gamma_db: float
    all_gains_db: np.ndarray


def random_pci(rng: np.random.Generator) -> PhysCellId:
    return PhysCellId.from_cell_id(int(rng.integers(0, N_NID1 * N_NID2)))


def baseline_schedule(pci_fixed: PhysCellId, cfg: AccessConfig = AccessConfig()) -> TxPlan:
    """Full beam sweep: beam ``i`` of each sector goes out at burst position ``i``."""
    entries = tuple(
        TxEntry(s, s * cfg.beams_per_sector + i, cfg.gnb_power_dbm, i, pci_fixed, cfg.freq_offset_prb)
        for s in range(cfg.n_sectors) for i in range(cfg.beams_per_sector)
    )
    return TxPlan(entries)


# --------------------------------------------------------------------------
# uplink access request

ZC_LEN = 139
ZC_ROOT = 1
AUX_N_SC = 144  # 12 PRBs
PAYLOAD_BITS = 10 + 8 + 64


def zadoff_chu(root: int = ZC_ROOT, length: int = ZC_LEN) -> np.ndarray:
    n = np.arange(length)
    return np.exp(-1j * np.pi * root * n * (n + 1) / length)


def _to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.int8)


def _from_bits(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def encode_payload(msg: AuxUeMessage) -> np.ndarray:
    pwr = int(round(msg.aux_tx_power_dbm))
    if not -128 <= pwr <= 127:
        raise ValueError("aux power does not fit 8 signed bits")
    return np.concatenate([_to_bits(msg.requested_pci.cell_id(), 10), _to_bits(pwr & 0xFF, 8),
                           _to_bits(msg.nonce, 64)])


def decode_payload(bits) -> AuxUeMessage:
    bits = np.asarray(bits)
    if bits.size != PAYLOAD_BITS:
        raise ValueError(f"expected {PAYLOAD_BITS} bits, got {bits.size}")
    pwr = _from_bits(bits[10:18])
    pwr = pwr - 256 if pwr >= 128 else pwr
    return AuxUeMessage(PhysCellId.from_cell_id(_from_bits(bits[:10])), float(pwr), _from_bits(bits[18:]))


def _aux_bins(params: OfdmParams) -> np.ndarray:
    first = (params.fft_size - AUX_N_SC) // 2
    return (first + np.arange(AUX_N_SC) - params.fft_size // 2) % params.fft_size


def aux_access_request(rng: np.random.Generator, cfg: AccessConfig = AccessConfig(),
                       params: OfdmParams = OfdmParams()) -> tuple[AuxUeMessage, Waveform]:
    """Draw a fresh cell id and nonce and build the uplink request.

    Two centered OFDM symbols over 12 PRBs: a ZC preamble, then the message
    bits in BPSK (the preamble doubles as the equalizer reference).
    """
    msg = AuxUeMessage(random_pci(rng), cfg.aux_power_dbm, int(rng.integers(0, 2**64, dtype=np.uint64)))
    n = params.fft_size
    bins = _aux_bins(params)
    spec = np.zeros((2, n), dtype=complex)
    spec[0, bins[:ZC_LEN]] = zadoff_chu()
    spec[1, bins[:PAYLOAD_BITS]] = 1.0 - 2.0 * encode_payload(msg)
    body = np.fft.ifft(spec, axis=1, norm="ortho")
    samples = np.concatenate([body[:, n - params.cp_samples:], body], axis=1).ravel()
    samples *= np.sqrt(10 ** (cfg.aux_power_dbm / 10) / np.mean(np.abs(samples) ** 2))
    return msg, Waveform(samples, params.sample_rate_hz, spans=[(0, samples.size)])


def decode_access_request(samples, params: OfdmParams = OfdmParams()) -> AuxUeMessage:
    """Demodulate a time-aligned request, equalizing on the preamble."""
    x = np.asarray(samples)[: 2 * params.symbol_samples].reshape(2, params.symbol_samples)
    y = np.fft.fft(x[:, params.cp_samples:], axis=1, norm="ortho")
    bins = _aux_bins(params)
    h = y[0, bins[:ZC_LEN]] / zadoff_chu()
    z = y[1, bins[:PAYLOAD_BITS]] * np.conj(h[:PAYLOAD_BITS])
    return decode_payload((z.real < 0).astype(np.int8))


# --------------------------------------------------------------------------
# beam selection and power control


def sss_frequencies_hz(params: OfdmParams = OfdmParams(), freq_offset_prb: int = 11) -> np.ndarray:
    """Baseband frequency of each SSS subcarrier."""
    j = 12 * freq_offset_prb + PSS_SSS_FIRST_SC + np.arange(SEQ_LEN)
    return (j - params.fft_size // 2) * params.scs_hz


def genie_beam_select(channel: ChannelRealization, codebook: list[Beam], freqs_hz=None) -> GenieSelection:
    """Beam with the highest end-to-end gain over the SSS subcarriers; lowest id wins ties."""
    freqs_hz = sss_frequencies_hz() if freqs_hz is None else freqs_hz
    gains = np.array([channel.path_gain_db(b.sector, b.weights, freqs_hz) for b in codebook])
    i = int(np.argmax(gains))
    return GenieSelection(codebook[i].sector, codebook[i].beam_id, float(gains[i]), gains)


def power_control(inputs: PowerControlInputs, cap: bool = True, max_dbm: float = 28.0,
                  min_dbm: float | None = None) -> float:
    """SSB power that lands the UE exactly at its target SNR, optionally clamped."""
    p = inputs.eta_tue_dbm - inputs.gamma_tue_db + inputs.s_target_db
    if cap:
        p = min(p, max_dbm)
    if min_dbm is not None:
        p = max(p, min_dbm)
    return float(p)


def proposed_schedule(rng: np.random.Generator, genie: GenieSelection, power_dbm: float,
                      cfg: AccessConfig = AccessConfig(), n_periods: int = 2) -> TxPlan:
    """One SSB per period on the selected beam, with a new random cell id every period."""
    pcis = tuple(random_pci(rng) for _ in range(n_periods))
    entry = TxEntry(genie.sector, genie.beam_id, power_dbm, cfg.proposed_burst_position, pcis[0],
                    cfg.freq_offset_prb)
    return TxPlan((entry,), pcis)


def render_plan(plan: TxPlan, rng: np.random.Generator, params: OfdmParams = OfdmParams(),
                window_s: float = 0.025, period_s: float = 0.02) -> dict[int, Waveform]:
    """Per-beam transmit waveforms for the observation window.

    The PBCH filler is drawn once per entry and reused across periods.
    """
    txs, pbch = [], {}
    for e in plan:
        pbch[e.beam_id] = gen_pbch_placeholder(rng)
        txs.append(SsbTransmission(assemble_ssb_grid(e.pci, pbch[e.beam_id]), e.beam_id, e.power_dbm,
                                   e.burst_position, e.freq_offset_prb))

    def for_period(tx: SsbTransmission, p: int) -> SsbTransmission:
        if plan.period_pcis is None:
            return tx
        grid = assemble_ssb_grid(plan.period_pcis[p], pbch[tx.beam_id])
        return SsbTransmission(grid, tx.beam_id, tx.power_dbm, tx.burst_position, tx.freq_offset_prb)

    return compose_tx_window(txs, params, window_s, period_s, grid_for_period=for_period)


def n_periods(params: OfdmParams = OfdmParams(), window_s: float = 0.025, period_s: float = 0.02) -> int:
    return int(np.ceil(window_s / period_s - 1e-12))
