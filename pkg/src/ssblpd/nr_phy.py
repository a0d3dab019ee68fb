"""SS/PBCH block generation and CP-OFDM (de)modulation.

Sequences follow TS 38.211 7.4.2. The PBCH is random QPSK filler: only
its occupied energy matters to the detectors in this package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

N_SC_SSB = 240
N_SYM_SSB = 4
SEQ_LEN = 127
PSS_SSS_FIRST_SC = 56
N_NID1 = 336
N_NID2 = 3

# PBCH subcarriers on symbol 2 (either side of the SSS plus guard)
_SYM2_PBCH_SC = np.r_[0:48, 192:240]
N_PBCH = N_SC_SSB + _SYM2_PBCH_SC.size + N_SC_SSB  # 576

# First symbol of each candidate SSB within a burst (Case-C-like)
BURST_SYMBOLS = (2, 8, 16, 22, 30, 36, 44, 50)


@dataclass(frozen=True)
class PhysCellId:
    nid1: int
    nid2: int

    def __post_init__(self):
        if not 0 <= self.nid1 < N_NID1:
            raise ValueError(f"nid1 must be in [0, 335], got {self.nid1}")
        if not 0 <= self.nid2 < N_NID2:
            raise ValueError(f"nid2 must be in [0, 2], got {self.nid2}")

    def cell_id(self) -> int:
        return 3 * self.nid1 + self.nid2

    @classmethod
    def from_cell_id(cls, cell_id: int) -> "PhysCellId":
        if not 0 <= cell_id < N_NID1 * N_NID2:
            raise ValueError(f"cell id must be in [0, 1007], got {cell_id}")
        return cls(cell_id // 3, cell_id % 3)


@dataclass(frozen=True)
class OfdmParams:
    scs_hz: float = 30e3
    fft_size: int = 512
    cp_samples: int = 36

    @property
    def sample_rate_hz(self) -> float:
        return self.scs_hz * self.fft_size

    @property
    def symbol_samples(self) -> int:
        return self.fft_size + self.cp_samples

    @property
    def ssb_samples(self) -> int:
        return N_SYM_SSB * self.symbol_samples

    def max_freq_offset_prb(self) -> int:
        return (self.fft_size - N_SC_SSB) // 12


@dataclass
class Waveform:
    """Complex baseband samples.

    ``spans`` optionally lists the half-open ``(start, stop)`` sample ranges
    that may be nonzero; consumers use it to skip silent stretches.
    """

    samples: np.ndarray
    sample_rate_hz: float
    start_time_s: float = 0.0
    spans: list[tuple[int, int]] | None = field(default=None)

    @property
    def duration_s(self) -> float:
        return self.samples.shape[-1] / self.sample_rate_hz


@dataclass(frozen=True)
class SsbGrid:
    grid: np.ndarray  # (240, 4) complex, subcarrier-major
    pci: PhysCellId


def _m_sequence(init, taps):
    """Length-127 binary sequence x(i+7) = sum(x(i+t) for t in taps) mod 2."""
    x = np.zeros(SEQ_LEN, dtype=np.int8)
    x[:7] = init
    for i in range(SEQ_LEN - 7):
        x[i + 7] = sum(x[i + t] for t in taps) % 2
    return x


_X_PSS = _m_sequence((0, 1, 1, 0, 1, 1, 1), (4, 0))
_X0_SSS = _m_sequence((1, 0, 0, 0, 0, 0, 0), (4, 0))
_X1_SSS = _m_sequence((1, 0, 0, 0, 0, 0, 0), (1, 0))
_N = np.arange(SEQ_LEN)


def gen_pss(nid2: int) -> np.ndarray:
    """Primary synchronization sequence, 127 values in {-1, +1}."""
    if nid2 not in (0, 1, 2):
        raise ValueError(f"nid2 must be 0, 1 or 2, got {nid2}")
    return (1 - 2 * _X_PSS[(_N + 43 * nid2) % SEQ_LEN]).astype(np.int8)


def gen_sss(nid1: int, nid2: int) -> np.ndarray:
    """Secondary synchronization sequence, 127 values in {-1, +1}."""
    PhysCellId(nid1, nid2)
    m0 = 15 * (nid1 // 112) + 5 * nid2
    m1 = nid1 % 112
    d = (1 - 2 * _X0_SSS[(_N + m0) % SEQ_LEN]) * (1 - 2 * _X1_SSS[(_N + m1) % SEQ_LEN])
    return d.astype(np.int8)


@lru_cache(maxsize=None)
def sss_table(nid2: int) -> np.ndarray:
    """All 336 SSS sequences for one nid2 as a (336, 127) float array."""
    tab = np.stack([gen_sss(n1, nid2) for n1 in range(N_NID1)]).astype(np.float32)
    tab.setflags(write=False)
    return tab


def gen_pbch_placeholder(rng: np.random.Generator) -> np.ndarray:
    """Unit-magnitude QPSK filler for every PBCH resource element."""
    bits = rng.integers(0, 2, size=(N_PBCH, 2))
    return ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / np.sqrt(2)


def assemble_ssb_grid(pci: PhysCellId, pbch: np.ndarray) -> SsbGrid:
    pbch = np.asarray(pbch)
    if pbch.shape != (N_PBCH,):
        raise ValueError(f"pbch must hold {N_PBCH} values, got shape {pbch.shape}")
    grid = np.zeros((N_SC_SSB, N_SYM_SSB), dtype=complex)
    seq = slice(PSS_SSS_FIRST_SC, PSS_SSS_FIRST_SC + SEQ_LEN)
    grid[seq, 0] = gen_pss(pci.nid2)
    grid[seq, 2] = gen_sss(pci.nid1, pci.nid2)
    n_edge = _SYM2_PBCH_SC.size
    grid[:, 1] = pbch[:N_SC_SSB]
    grid[_SYM2_PBCH_SC, 2] = pbch[N_SC_SSB:N_SC_SSB + n_edge]
    grid[:, 3] = pbch[N_SC_SSB + n_edge:]
    return SsbGrid(grid, pci)


def fft_bins(params: OfdmParams, freq_offset_prb: int) -> np.ndarray:
    """FFT bin of each SSB subcarrier (DC-centered, band edge at -N/2)."""
    first = 12 * freq_offset_prb
    if freq_offset_prb < 0 or first + N_SC_SSB > params.fft_size:
        raise ValueError(f"freq_offset_prb={freq_offset_prb} puts the SSB outside the band")
    j = first + np.arange(N_SC_SSB)
    return (j - params.fft_size // 2) % params.fft_size


def ofdm_modulate(grid, params: OfdmParams, freq_offset_prb: int, symbol_offset: int = 0,
                  re_power_mw: float | None = None) -> Waveform:
    """CP-OFDM modulate a 240x4 SSB grid with a unitary IFFT.

    ``symbol_offset`` leading silent symbols are prepended. With
    ``re_power_mw`` the grid is scaled so that a unit-power RE carries that
    much physical power once the waveform is sampled at the full rate.
    """
    g = grid.grid if isinstance(grid, SsbGrid) else np.asarray(grid)
    if symbol_offset < 0:
        raise ValueError("symbol_offset must be >= 0")
    bins = fft_bins(params, freq_offset_prb)
    n = params.fft_size
    spec = np.zeros((N_SYM_SSB, n), dtype=complex)
    spec[:, bins] = g.T
    if re_power_mw is not None:
        spec *= np.sqrt(n * re_power_mw)
    body = np.fft.ifft(spec, axis=1, norm="ortho")
    sym = np.concatenate([body[:, n - params.cp_samples:], body], axis=1).ravel()
    lead = symbol_offset * params.symbol_samples
    samples = np.concatenate([np.zeros(lead, dtype=complex), sym])
    return Waveform(samples, params.sample_rate_hz, spans=[(lead, lead + sym.size)])


def ofdm_demodulate(wf, params: OfdmParams, freq_offset_prb: int, symbol_offset: int = 0) -> np.ndarray:
    """Inverse of :func:`ofdm_modulate`; returns a (240, 4) grid."""
    x = wf.samples if isinstance(wf, Waveform) else np.asarray(wf)
    start = symbol_offset * params.symbol_samples
    if x.shape[-1] < start + params.ssb_samples:
        raise ValueError("waveform too short for 4 SSB symbols at this offset")
    bins = fft_bins(params, freq_offset_prb)
    sym = x[..., start:start + params.ssb_samples].reshape(*x.shape[:-1], N_SYM_SSB, params.symbol_samples)
    spec = np.fft.fft(sym[..., params.cp_samples:], axis=-1, norm="ortho")
    return np.swapaxes(spec[..., bins], -1, -2)


@dataclass(frozen=True)
class SsbTransmission:
    grid: SsbGrid
    beam_id: int
    power_dbm: float
    burst_position: int
    freq_offset_prb: int = 11


def ssb_start_sample(params: OfdmParams, burst_position: int, period_index: int = 0,
                     period_s: float = 0.02, burst_symbols=BURST_SYMBOLS) -> int:
    """Sample index where an SSB at ``burst_position`` begins."""
    period = int(round(period_s * params.sample_rate_hz))
    return period_index * period + burst_symbols[burst_position] * params.symbol_samples


def ssb_waveform(tx: SsbTransmission, params: OfdmParams) -> np.ndarray:
    """Time-domain samples of one SSB at the transmission's total power."""
    re_mw = 10 ** (tx.power_dbm / 10) / N_SC_SSB
    return ofdm_modulate(tx.grid, params, tx.freq_offset_prb, 0, re_mw).samples


def compose_tx_window(transmissions, params: OfdmParams, window_s: float = 0.025,
                      period_s: float = 0.02, burst_symbols=BURST_SYMBOLS,
                      grid_for_period=None) -> dict[int, Waveform]:
    """Lay SSB transmissions into one observation window per beam.

    Every transmission repeats each SSB period; repeats that start past the
    window end are dropped and a repeat that runs over it is truncated.
    ``grid_for_period(tx, period_index)`` may substitute the grid of later
    repeats (e.g. a per-burst cell id).
    """
    n_win = int(round(window_s * params.sample_rate_hz))
    n_ssb = params.ssb_samples
    out: dict[int, Waveform] = {}
    for tx in transmissions:
        if tx.burst_position >= len(burst_symbols):
            raise ValueError(f"burst position {tx.burst_position} outside the burst")
        wf = out.get(tx.beam_id)
        if wf is None:
            wf = out[tx.beam_id] = Waveform(np.zeros(n_win, dtype=complex), params.sample_rate_hz, spans=[])
        p = 0
        while (start := ssb_start_sample(params, tx.burst_position, p, period_s, burst_symbols)) < n_win:
            stop = min(start + n_ssb, n_win)
            if any(a < stop and start < b for a, b in wf.spans):
                raise ValueError(f"overlapping SSBs on beam {tx.beam_id}")
            this = tx if grid_for_period is None or p == 0 else grid_for_period(tx, p)
            wf.samples[start:stop] = ssb_waveform(this, params)[:stop - start]
            wf.spans.append((start, stop))
            p += 1
    for wf in out.values():
        wf.spans.sort()
    return out
