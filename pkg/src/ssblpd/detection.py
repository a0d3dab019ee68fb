"""Eavesdropper and UE synchronization detectors, RSRP and ROC construction.

Detector statistics are normalized by the (known) per-sample noise power,
so a capture and its noise reference can be scaled together freely.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft

from ._kernels import accumulate_power

from .nr_phy import (N_NID1, N_SC_SSB, N_SYM_SSB, PSS_SSS_FIRST_SC, SEQ_LEN, OfdmParams, PhysCellId,
                     gen_pss, sss_table)


@dataclass
class CaptureWindow:
    """Per-element complex samples with the per-sample noise power (mW)."""

    samples: np.ndarray
    noise_power: float
    sample_rate_hz: float = 15.36e6

    def __post_init__(self):
        self.samples = np.atleast_2d(self.samples)

    def normalized(self) -> np.ndarray:
        # always divide in double precision so a capture normalizes identically whatever its dtype
        return (self.samples.astype(np.complex128) / np.sqrt(self.noise_power)).astype(np.complex64)


@dataclass(frozen=True)
class SlidingWindowSpec:
    freq_width_prb: int = 20
    time_width_symbols: int = 4
    freq_step_prb: int = 1
    half_symbols_per_step: int = 1


@dataclass(frozen=True)
class DetectorStatistic:
    value: float
    time_index: int = -1
    freq_index: int = -1
    pci: PhysCellId | None = None


def rsrp(res) -> float:
    """Mean per-RE power of SSS resource elements in dBm (REs in sqrt(mW))."""
    res = np.asarray(res)
    if res.size == 0:
        raise ValueError("no resource elements")
    return float(10 * np.log10(np.mean(np.abs(res) ** 2)))


# --------------------------------------------------------------------------
# energy detector


def energy_map(x: np.ndarray, params: OfdmParams, hop: int) -> np.ndarray:
    """(frames, fft_size) energy summed over elements, band-edge ordered."""
    n = params.fft_size
    frames = sliding_window_view(x, n, axis=-1)[..., ::hop, :]
    spec = np.fft.fft(frames, axis=-1, norm="ortho")
    p = (spec.real**2 + spec.imag**2).sum(axis=0)
    return np.fft.fftshift(p, axes=-1)


def energy_detect(capture: CaptureWindow, params: OfdmParams = OfdmParams(),
                  spec: SlidingWindowSpec = SlidingWindowSpec()) -> DetectorStatistic:
    """Max windowed energy over all positions, relative to expected noise energy."""
    x = capture.normalized()
    if not np.any(x):
        return DetectorStatistic(0.0, 0, 0)
    half = params.symbol_samples // 2
    hop = half * spec.half_symbols_per_step
    p = energy_map(x, params, hop)
    width = 12 * spec.freq_width_prb
    cs = np.concatenate([np.zeros((p.shape[0], 1)), np.cumsum(p, axis=1, dtype=np.float64)], axis=1)
    starts = np.arange(0, params.fft_size - width + 1, 12 * spec.freq_step_prb)
    band = cs[:, starts + width] - cs[:, starts]
    stride = params.symbol_samples // hop
    span = stride * (spec.time_width_symbols - 1)
    if band.shape[0] <= span:
        raise ValueError("capture shorter than one detection window")
    win = sum(band[i * stride: band.shape[0] - span + i * stride] for i in range(spec.time_width_symbols))
    expected = width * spec.time_width_symbols * x.shape[0]
    f, q = np.unravel_index(np.argmax(win), win.shape)
    return DetectorStatistic(float(win[f, q] / expected), int(f * hop), int(starts[q]))


# --------------------------------------------------------------------------
# PSS/SSS correlator


@dataclass(frozen=True)
class CorrelatorConfig:
    """Search settings for the PSS/SSS correlator.

    The time axis is scanned on a ``coarse_step`` grid (4 samples keeps the
    127-subcarrier PSS at Nyquist), then refined to one sample around the
    ``candidates_per_block`` best cells of every block and template.
    ``coarse_step=1`` gives the exhaustive search.
    """

    coarse_step: int = 4
    refine_radius: int = 3
    block_size: int = 4096
    candidates_per_block: int = 4
    freq_step: int = 1
    use_sss: bool = True


@dataclass
class Candidates:
    nid2: np.ndarray
    time: np.ndarray
    freq: np.ndarray
    pss: np.ndarray
    sss: np.ndarray  # (n, 336) SSS energy per nid1

    @classmethod
    def concat(cls, items) -> "Candidates":
        items = list(items)
        if not items:
            return cls(*(np.zeros(0, int),) * 3, np.zeros(0), np.zeros((0, N_NID1)))
        return cls(*(np.concatenate([getattr(c, f) for c in items]) for f in ("nid2", "time", "freq", "pss", "sss")))


@dataclass
class BlockScan:
    """Per-block candidates of one capture; blocks are independent work units."""

    n_samples: int
    blocks: dict = field(default_factory=dict)

    def candidates(self) -> Candidates:
        return Candidates.concat(self.blocks[b] for b in sorted(self.blocks))


class CorrelationSearch:
    """Block-local PSS search with SSS evaluation at the PSS candidates.

    A block's result depends only on the samples in
    :meth:`block_dependency`, so a capture that differs from an already
    scanned one in a few places can be rescanned block by block.
    """

    def __init__(self, params: OfdmParams = OfdmParams(), cfg: CorrelatorConfig = CorrelatorConfig(),
                 nid2s=(0, 1, 2)):
        if cfg.block_size % cfg.coarse_step:
            raise ValueError("block_size must be a multiple of coarse_step")
        self.params, self.cfg, self.nid2s = params, cfg, tuple(nid2s)
        n = params.fft_size
        self.sss_lag = 2 * params.symbol_samples
        self.span = self.sss_lag + n
        self.freqs = np.arange(0, n - N_SC_SSB + 1, cfg.freq_step)
        j = PSS_SSS_FIRST_SC + np.arange(SEQ_LEN)
        self._seq_bins = (j[None, :] + self.freqs[:, None] - n // 2) % n
        base = np.zeros((len(self.nid2s), n), dtype=complex)
        base[:, (j - n // 2) % n] = [gen_pss(v) for v in self.nid2s]
        t0 = np.fft.ifft(base, axis=1, norm="ortho") / np.sqrt(SEQ_LEN)
        self._t0 = t0
        self._q = np.conj(t0).astype(np.complex64)
        self._ramp = np.exp(2j * np.pi * np.outer(self.freqs, np.arange(n)) / n)

    def n_hypotheses(self, n_samples: int) -> int:
        return max(n_samples - self.span + 1, 0)

    def n_blocks(self, n_samples: int) -> int:
        return -(-self.n_hypotheses(n_samples) // self.cfg.block_size)

    def block_dependency(self, b: int) -> tuple[int, int]:
        r = self.cfg.refine_radius
        lo = b * self.cfg.block_size
        return max(lo - r, 0), lo + self.cfg.block_size + r + self.span

    def blocks_touching(self, spans, n_samples: int) -> list[int]:
        out = []
        for b in range(self.n_blocks(n_samples)):
            lo, hi = self.block_dependency(b)
            if any(a < hi and lo < z for a, z in spans):
                out.append(b)
        return out

    def scan(self, x: np.ndarray, blocks=None, base: BlockScan | None = None) -> BlockScan:
        """Scan noise-normalized samples ``x`` of shape (n_elem, n).

        With ``base`` given, only ``blocks`` are recomputed and the rest are
        taken from ``base``.
        """
        x = np.atleast_2d(x)
        n = x.shape[-1]
        todo = range(self.n_blocks(n)) if blocks is None else blocks
        out = BlockScan(n, dict(base.blocks) if base is not None else {})
        for b in todo:
            out.blocks[b] = self._scan_block(x, b)
        return out

    def _scan_block(self, x, b) -> Candidates:
        cfg, n = self.cfg, self.params.fft_size
        m_max = self.n_hypotheses(x.shape[-1])
        lo = b * cfg.block_size
        hi = min(lo + cfg.block_size, m_max)
        n_frames = -(-(hi - lo) // cfg.coarse_step)
        buf = np.empty((n_frames, n), dtype=np.complex64)
        acc = np.empty((n_frames, self.freqs.size), dtype=np.float32)
        found = []
        for t, nid2 in enumerate(self.nid2s):
            for e in range(x.shape[0]):
                frames = sliding_window_view(x[e, lo:lo + (n_frames - 1) * cfg.coarse_step + n], n)
                np.multiply(frames[:: cfg.coarse_step], self._q[t], out=buf)
                y = sp_fft.fft(buf, axis=1, overwrite_x=True)
                accumulate_power(y, self.freqs, acc, e == 0)
            # best cell of each of the top-scoring coarse frames
            row_best = acc.argmax(axis=1)
            row_max = acc[np.arange(n_frames), row_best]
            k = min(cfg.candidates_per_block, n_frames)
            for f in np.argpartition(row_max, n_frames - k)[n_frames - k:]:
                found.append(self._refine(x, t, lo + f * cfg.coarse_step, row_best[f], m_max) + (nid2,))
        # distinct (time, freq, nid2) only
        uniq = {(m, q, v): e for m, q, e, v in found}
        keys = sorted(uniq)
        times = np.array([k[0] for k in keys], dtype=int)
        freqs = np.array([k[1] for k in keys], dtype=int)
        nid2 = np.array([k[2] for k in keys], dtype=int)
        pss = np.array([uniq[k] for k in keys])
        sss = self._sss_energy(x, times, freqs, nid2) if self.cfg.use_sss else np.zeros((len(keys), N_NID1))
        return Candidates(nid2, times, self.freqs[freqs], pss, sss)

    def _refine(self, x, t, m0, q, m_max):
        r, n = self.cfg.refine_radius, self.params.fft_size
        ms = np.arange(max(m0 - r, 0), min(m0 + r, m_max - 1) + 1)
        tmpl = np.conj(self._t0[t] * self._ramp[q])
        win = np.stack([x[:, m:m + n] for m in ms], axis=1)  # (e, len(ms), n)
        c = win @ tmpl
        e = (np.abs(c) ** 2).sum(axis=0)
        i = int(np.argmax(e))
        return int(ms[i]), int(q), float(e[i])

    def _sss_energy(self, x, times, fidx, nid2):
        n = self.params.fft_size
        if times.size == 0:
            return np.zeros((0, N_NID1))
        win = np.stack([x[:, m + self.sss_lag: m + self.sss_lag + n] for m in times], axis=1)
        spec = np.fft.fft(win, axis=-1, norm="ortho")  # (e, c, n)
        out = np.empty((times.size, N_NID1))
        for i in range(times.size):
            re = spec[:, i, self._seq_bins[fidx[i]]]  # (e, 127)
            corr = re @ sss_table(int(nid2[i])).T / np.sqrt(SEQ_LEN)
            out[i] = (np.abs(corr) ** 2).sum(axis=0)
        return out


def statistic_from_candidates(c: Candidates, pcis=None, use_sss: bool = True) -> DetectorStatistic:
    """Reduce candidates to one statistic, optionally for known cell ids only."""
    if c.pss.size == 0:
        return DetectorStatistic(0.0)
    if pcis is None:
        nid1 = np.argmax(c.sss, axis=1) if use_sss else np.zeros(c.pss.size, int)
        total = c.pss + (c.sss[np.arange(c.pss.size), nid1] if use_sss else 0.0)
    else:
        pcis = list(pcis)
        total = np.full(c.pss.size, -np.inf)
        nid1 = np.zeros(c.pss.size, int)
        for p in pcis:
            sel = c.nid2 == p.nid2
            val = c.pss[sel] + (c.sss[sel, p.nid1] if use_sss else 0.0)
            better = val > total[sel]
            idx = np.flatnonzero(sel)[better]
            total[idx] = val[better]
            nid1[idx] = p.nid1
        if not np.isfinite(total).any():
            return DetectorStatistic(0.0)
    i = int(np.argmax(total))
    return DetectorStatistic(float(total[i]), int(c.time[i]), int(c.freq[i]),
                             PhysCellId(int(nid1[i]), int(c.nid2[i])))


def corr_detect(capture: CaptureWindow, params: OfdmParams = OfdmParams(),
                cfg: CorrelatorConfig = CorrelatorConfig()) -> DetectorStatistic:
    """Blind PSS/SSS search over all time/frequency offsets and all 1008 cell ids."""
    x = capture.normalized()
    scan = CorrelationSearch(params, cfg).scan(x)
    return statistic_from_candidates(scan.candidates(), use_sss=cfg.use_sss)


def ue_detect(capture: CaptureWindow, known_pci, params: OfdmParams = OfdmParams(),
              cfg: CorrelatorConfig = CorrelatorConfig()) -> DetectorStatistic:
    """Same search as :func:`corr_detect` restricted to the known cell id(s)."""
    pcis = [known_pci] if isinstance(known_pci, PhysCellId) else list(known_pci)
    nid2s = sorted({p.nid2 for p in pcis})
    x = capture.normalized()
    scan = CorrelationSearch(params, cfg, nid2s).scan(x)
    return statistic_from_candidates(scan.candidates(), pcis, use_sss=cfg.use_sss)


# --------------------------------------------------------------------------
# ROC


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    pfa: np.ndarray
    pd: np.ndarray

    def __iter__(self):
        return iter(zip(self.pfa, self.pd))

    def envelope(self) -> tuple[np.ndarray, np.ndarray]:
        """(pfa, pd) with strictly increasing pfa, keeping the best pd at each pfa."""
        order = np.lexsort((self.pd, self.pfa))
        pfa, pd = self.pfa[order], self.pd[order]
        last = np.r_[pfa[1:] != pfa[:-1], True]
        return pfa[last], pd[last]


def roc_from_stats(h1_stats, h0_stats) -> RocCurve:
    """Empirical ROC: detection declared when a statistic exceeds the threshold."""
    h1 = np.sort(np.asarray(h1_stats, dtype=float))
    h0 = np.sort(np.asarray(h0_stats, dtype=float))
    if h1.size == 0 or h0.size == 0:
        raise ValueError("both statistic lists must be nonempty")
    values = np.unique(np.concatenate([h1, h0]))
    thr = np.r_[values[0] - 1.0, values]
    pd = (h1.size - np.searchsorted(h1, thr, side="right")) / h1.size
    pfa = (h0.size - np.searchsorted(h0, thr, side="right")) / h0.size
    keep = np.r_[True, (np.diff(pd) != 0) | (np.diff(pfa) != 0)]
    return RocCurve(thr[keep], pfa[keep], pd[keep])


def threshold_at_pfa(h0_stats, pfa: float) -> float:
    """Smallest threshold whose empirical false-alarm rate is <= ``pfa``."""
    h0 = np.sort(np.asarray(h0_stats, dtype=float))
    if pfa >= 1.0:
        return float(h0[0] - 1.0)
    k = int(np.floor(pfa * h0.size + 1e-9))
    return float(h0[h0.size - 1 - k])


def pd_at_pfa(roc: RocCurve, target_pfa: float = 0.10) -> float:
    """pd at ``target_pfa``, interpolating linearly between curve points."""
    pfa, pd = np.asarray(roc.pfa), np.asarray(roc.pd)
    if pfa.size == 0:
        raise ValueError("empty ROC")
    exact = np.isclose(pfa, target_pfa, rtol=0, atol=1e-12)
    if exact.any():
        return float(pd[exact].max())
    below, above = pfa < target_pfa, pfa > target_pfa
    if not below.any():
        return float(pd[above].min()) if target_pfa <= 0 else float(pd[pfa == pfa.min()].min())
    if not above.any():
        return float(pd[below].max())
    a = pfa[below].max()
    b = pfa[above].min()
    pa = pd[below & (pfa == a)].max()
    pb = pd[above & (pfa == b)].min()
    return float(pa + (pb - pa) * (target_pfa - a) / (b - a))
