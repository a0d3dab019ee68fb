"""Single-site UMi geometry, antenna arrays, clustered channels and noise.

The channel is a reduced clustered model: UMi pathloss, LOS probability and
shadowing from TR 38.901, with six clusters per link instead of the full
geometry-based stochastic model.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

C_LIGHT = 299_792_458.0
THERMAL_DBM_HZ = -174.0


@dataclass(frozen=True)
class CellGeometry:
    isd_m: float = 200.0
    n_sectors: int = 3
    sector_width_deg: float = 120.0
    gnb_height_m: float = 10.0
    ue_height_m: float = 1.5
    min_d2d_m: float = 10.0

    @property
    def r_m(self) -> float:
        return self.isd_m / np.sqrt(3.0)

    def contains(self, xy) -> np.ndarray:
        """True where points lie inside the hexagon (vertices at 0, 60, ... deg)."""
        xy = np.asarray(xy, dtype=float)
        x, y = np.abs(xy[..., 0]), np.abs(xy[..., 1])
        r = self.r_m
        return (y <= np.sqrt(3) / 2 * r) & (np.sqrt(3) * x + y <= np.sqrt(3) * r)

    def boresight_deg(self, sector: int) -> float:
        return (sector + 0.5) * self.sector_width_deg

    def sector_of(self, xy) -> int:
        az = np.degrees(np.arctan2(xy[1], xy[0])) % 360.0
        return int(az // self.sector_width_deg) % self.n_sectors


@dataclass(frozen=True)
class UpaConfig:
    rows: int
    cols: int
    pols: int = 2
    spacing: float = 0.5

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols * self.pols

    @property
    def n_spatial(self) -> int:
        return self.rows * self.cols


GNB_ARRAY = UpaConfig(4, 2, 2)
UE_ARRAY = UpaConfig(2, 1, 2)


@dataclass(frozen=True)
class Drop:
    ue_pos: np.ndarray
    eve_pos: np.ndarray
    ue_sector: int
    eve_sector: int
    shadowing_db: dict
    los: dict

    def position(self, link: str) -> np.ndarray:
        return self.ue_pos if link == "ue" else self.eve_pos


@dataclass(frozen=True)
class Beam:
    weights: np.ndarray
    az_deg: float
    el_deg: float
    beam_id: int
    sector: int


def _uniform_in_hexagon(rng, geometry: CellGeometry, n: int | None = None):
    r = geometry.r_m
    want = 1 if n is None else n
    out = np.empty((0, 2))
    while out.shape[0] < want:
        pts = rng.uniform([-r, -np.sqrt(3) / 2 * r], [r, np.sqrt(3) / 2 * r], size=(2 * want + 8, 2))
        keep = geometry.contains(pts) & (np.hypot(pts[:, 0], pts[:, 1]) >= geometry.min_d2d_m)
        out = np.vstack([out, pts[keep]])
    return out[0] if n is None else out[:n]


def los_probability(d2d_m):
    """UMi street-canyon LOS probability."""
    d = np.asarray(d2d_m, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        p = 18.0 / d + np.exp(-d / 36.0) * (1.0 - 18.0 / d)
    p = np.where(d <= 18.0, 1.0, p)
    return float(p) if p.ndim == 0 else p


def pathloss_umi(d3d_m, fc_ghz: float, los: bool, h_bs: float = 10.0, h_ut: float = 1.5,
                 d2d_m=None) -> float:
    """UMi street-canyon pathloss in dB (TR 38.901 Table 7.4.1-1)."""
    d3d = np.asarray(d3d_m, dtype=float)
    d2d = d3d if d2d_m is None else np.asarray(d2d_m, dtype=float)
    d_bp = 4 * (h_bs - 1.0) * (h_ut - 1.0) * fc_ghz * 1e9 / C_LIGHT
    pl1 = 32.4 + 21 * np.log10(d3d) + 20 * np.log10(fc_ghz)
    pl2 = 32.4 + 40 * np.log10(d3d) + 20 * np.log10(fc_ghz) - 9.5 * np.log10(d_bp**2 + (h_bs - h_ut) ** 2)
    pl_los = np.where(d2d <= d_bp, pl1, pl2)
    if los:
        out = pl_los
    else:
        pl_n = 35.3 * np.log10(d3d) + 22.4 + 21.3 * np.log10(fc_ghz) - 0.3 * (h_ut - 1.5)
        out = np.maximum(pl_los, pl_n)
    return float(out) if out.ndim == 0 else out


SHADOWING_DB = {True: 4.0, False: 7.82}


def sample_drop(rng: np.random.Generator, geometry: CellGeometry = CellGeometry(),
                los_override: bool | None = None) -> Drop:
    pts = _uniform_in_hexagon(rng, geometry, 2)
    ue, eve = pts[0], pts[1]
    los, sf = {}, {}
    for link, pos in (("ue", ue), ("eve", eve)):
        d2d = float(np.hypot(*pos))
        los[link] = bool(rng.random() < los_probability(d2d)) if los_override is None else los_override
        sf[link] = float(rng.normal(0.0, SHADOWING_DB[los[link]]))
    return Drop(ue, eve, geometry.sector_of(ue), geometry.sector_of(eve), sf, los)


def steering_vector(array: UpaConfig, az_deg, el_deg) -> np.ndarray:
    """Unit-norm planar-array response, identical across polarizations.

    Element order is (pol, row, col) with col fastest. Accepts array-valued
    angles and returns shape ``angles.shape + (n_elements,)``.
    """
    az = np.radians(np.asarray(az_deg, dtype=float))[..., None]
    el = np.radians(np.asarray(el_deg, dtype=float))[..., None]
    n = np.repeat(np.arange(array.rows), array.cols)
    m = np.tile(np.arange(array.cols), array.rows)
    phase = 2 * np.pi * array.spacing * (m * np.sin(az) * np.cos(el) + n * np.sin(el))
    v = np.exp(1j * phase)
    v = np.concatenate([v] * array.pols, axis=-1)
    return v / np.sqrt(array.n_elements)


# Downtilted elevation grid for the 4-row panel (degrees below horizon).
CODEBOOK_EL_DEG = (-4.0, -12.0, -22.0, -40.0)
CODEBOOK_AZ_DEG = (-30.0, 30.0)


def dft_codebook(array: UpaConfig = GNB_ARRAY, beams_per_sector: int = 8,
                 geometry: CellGeometry = CellGeometry()) -> list[Beam]:
    """2 azimuth x 4 elevation beams per sector, ordered sector-major.

    Azimuths are the two orthogonal DFT directions of the 2-column panel
    (+-30 deg off boresight); elevations span the downtilt range that covers
    the cell from 10 m height.
    """
    if beams_per_sector != len(CODEBOOK_AZ_DEG) * len(CODEBOOK_EL_DEG):
        raise ValueError("only the 2x4 codebook (8 beams per sector) is provided")
    beams = []
    for s in range(geometry.n_sectors):
        for i, (el, az) in enumerate((e, a) for e in CODEBOOK_EL_DEG for a in CODEBOOK_AZ_DEG):
            w = steering_vector(array, az, el)
            beams.append(Beam(w, az, el, s * beams_per_sector + i, s))
    return beams


def element_gain_db(az_deg, el_deg):
    """Sector element pattern (TR 38.901 Table 7.3-1) normalized to 0 dB peak."""
    az = (np.asarray(az_deg) + 180.0) % 360.0 - 180.0
    a_h = -np.minimum(12 * (az / 65.0) ** 2, 30.0)
    a_v = -np.minimum(12 * (np.asarray(el_deg) / 65.0) ** 2, 30.0)
    return -np.minimum(-(a_h + a_v), 30.0)


@dataclass(frozen=True)
class ChannelConfig:
    fc_ghz: float = 3.5
    n_clusters: int = 6
    k_factor_db: float = 9.0
    delay_spread_s: float = 100e-9
    az_spread_deg: float = 15.0
    el_spread_deg: float = 5.0
    xpr_db: float = 9.0
    element_pattern: bool = True


@dataclass(frozen=True)
class ChannelRealization:
    """Clustered MIMO channel between the gNB site and one receiver.

    ``gains[c, a, b]`` couples transmit polarization ``b`` to receive
    polarization ``a`` on cluster ``c``. Angles are global (gNB azimuth,
    elevation above horizon). Per-sector panel orientation and element
    pattern are applied in :meth:`tx_response`.
    """

    delays_s: np.ndarray
    delay_samples: np.ndarray
    aod_deg: np.ndarray
    zod_deg: np.ndarray
    aoa_deg: np.ndarray
    zoa_deg: np.ndarray
    gains: np.ndarray
    large_scale_gain_db: float
    tx_array: UpaConfig = GNB_ARRAY
    rx_array: UpaConfig = UE_ARRAY
    boresights_deg: tuple = (60.0, 180.0, 300.0)
    element_pattern: bool = True
    los: bool = False
    sample_rate_hz: float = 15.36e6

    @property
    def n_clusters(self) -> int:
        return self.delays_s.size

    def cluster_powers(self) -> np.ndarray:
        """Per-cluster power averaged over polarization pairs."""
        return np.mean(np.abs(self.gains) ** 2, axis=(1, 2))

    def tx_response(self, sector: int) -> np.ndarray:
        """(n_clusters, n_tx) unit-modulus panel response incl. element gain."""
        rel_az = self.aod_deg - self.boresights_deg[sector]
        a = steering_vector(self.tx_array, rel_az, self.zod_deg) * np.sqrt(self.tx_array.n_elements)
        if self.element_pattern:
            a = a * 10 ** (element_gain_db(rel_az, self.zod_deg) / 20)[:, None]
        return a

    def rx_response(self) -> np.ndarray:
        return steering_vector(self.rx_array, self.aoa_deg, self.zoa_deg) * np.sqrt(self.rx_array.n_elements)

    def element_channel(self, sector: int) -> np.ndarray:
        """Full per-cluster coefficients, shape (n_clusters, n_rx, n_tx)."""
        at = self.tx_response(sector)
        ar = self.rx_response()
        prx = np.repeat(np.arange(self.rx_array.pols), self.rx_array.n_spatial)
        ptx = np.repeat(np.arange(self.tx_array.pols), self.tx_array.n_spatial)
        pol = self.gains[:, prx][:, :, ptx]
        return pol * ar[:, :, None] * at[:, None, :]

    def beam_taps(self, sector: int, weights) -> np.ndarray:
        """Small-scale taps (n_rx, n_clusters) after projecting on ``weights``."""
        return np.einsum("crt,t->rc", self.element_channel(sector), np.conj(weights))

    def frequency_response(self, sector: int, weights, freqs_hz) -> np.ndarray:
        """(n_rx, n_freqs) small-scale response, using the sample-rounded delays."""
        taps = self.beam_taps(sector, weights)
        ph = np.exp(-2j * np.pi * np.outer(self.delays_rounded_s, np.asarray(freqs_hz)))
        return taps @ ph

    @property
    def delays_rounded_s(self) -> np.ndarray:
        return self.delay_samples / self.sample_rate_hz

    def path_gain_db(self, sector: int, weights, freqs_hz) -> float:
        """End-to-end gain: large-scale x mean |H|^2 over rx elements and freqs."""
        h = self.frequency_response(sector, weights, freqs_hz)
        return self.large_scale_gain_db + 10 * np.log10(np.mean(np.abs(h) ** 2))


def _laplacian(rng, scale_deg, size):
    return rng.laplace(0.0, scale_deg / np.sqrt(2.0), size)


def geometric_angles(drop: Drop, link: str, geometry: CellGeometry):
    pos = drop.position(link)
    d2d = float(np.hypot(*pos))
    az = float(np.degrees(np.arctan2(pos[1], pos[0])))
    el = float(np.degrees(np.arctan2(geometry.ue_height_m - geometry.gnb_height_m, d2d)))
    return d2d, az, el


def gen_channel(rng: np.random.Generator, drop: Drop, link: str,
                geometry: CellGeometry = CellGeometry(), cfg: ChannelConfig = ChannelConfig(),
                tx_array: UpaConfig = GNB_ARRAY, rx_array: UpaConfig = UE_ARRAY,
                sample_rate_hz: float = 15.36e6, cp_samples: int = 36) -> ChannelRealization:
    """Draw the gNB -> ``link`` ("ue" or "eve") channel for this drop."""
    d2d, az, el = geometric_angles(drop, link, geometry)
    d3d = float(np.hypot(d2d, geometry.gnb_height_m - geometry.ue_height_m))
    los = drop.los[link]
    pl = pathloss_umi(d3d, cfg.fc_ghz, los, geometry.gnb_height_m, geometry.ue_height_m, d2d)
    ls_db = -(pl + drop.shadowing_db[link])

    n = cfg.n_clusters
    n_sc = n - 1 if los else n
    tau = rng.exponential(cfg.delay_spread_s, n_sc)
    # cluster delays stay inside the cyclic prefix
    tau = np.minimum(tau, (cp_samples - 1) / sample_rate_hz)
    zeta = rng.normal(0.0, 3.0, n_sc)
    p = np.exp(-tau / cfg.delay_spread_s) * 10 ** (-zeta / 10)
    p /= p.sum()
    aod = az + _laplacian(rng, cfg.az_spread_deg, n_sc)
    zod = el + _laplacian(rng, cfg.el_spread_deg, n_sc)
    aoa = az + 180.0 + _laplacian(rng, cfg.az_spread_deg, n_sc)
    zoa = -el + _laplacian(rng, cfg.el_spread_deg, n_sc)

    xpr = 10 ** (cfg.xpr_db / 10)
    npol = (rx_array.pols, tx_array.pols)
    var = np.where(np.eye(*npol, dtype=bool), 2 * xpr / (xpr + 1), 2 / (xpr + 1)) if npol == (2, 2) else np.ones(npol)
    g = (rng.standard_normal((n_sc, *npol)) + 1j * rng.standard_normal((n_sc, *npol))) / np.sqrt(2)
    g *= np.sqrt(p[:, None, None] * var[None])

    if los:
        k = 10 ** (cfg.k_factor_db / 10)
        g *= np.sqrt(1 / (k + 1))
        ray = np.diag([1.0, -1.0])[: npol[0], : npol[1]] if npol == (2, 2) else np.ones(npol)
        ray = ray * np.sqrt(k / (k + 1) / np.mean(np.abs(ray) ** 2)) * np.exp(2j * np.pi * rng.random())
        g = np.concatenate([ray[None], g])
        tau = np.concatenate([[0.0], tau])
        aod, zod = np.r_[az, aod], np.r_[el, zod]
        aoa, zoa = np.r_[az + 180.0, aoa], np.r_[-el, zoa]
    else:
        tau = tau - tau.min()

    return ChannelRealization(
        delays_s=tau,
        delay_samples=np.rint(tau * sample_rate_hz).astype(int),
        aod_deg=aod, zod_deg=zod, aoa_deg=aoa, zoa_deg=zoa,
        gains=g, large_scale_gain_db=float(ls_db),
        tx_array=tx_array, rx_array=rx_array,
        boresights_deg=tuple(geometry.boresight_deg(s) for s in range(geometry.n_sectors)),
        element_pattern=cfg.element_pattern, los=los, sample_rate_hz=sample_rate_hz,
    )


def flat_channel(gain_db: float, az_deg: float = 60.0, el_deg: float = -10.0,
                 tx_array: UpaConfig = GNB_ARRAY, rx_array: UpaConfig = UE_ARRAY,
                 sample_rate_hz: float = 15.36e6, element_pattern: bool = False) -> ChannelRealization:
    """Single zero-delay co-polarized ray; useful for link-budget checks."""
    g = np.eye(rx_array.pols, tx_array.pols, dtype=complex)[None] * np.sqrt(2.0 if rx_array.pols == 2 else 1.0)
    return ChannelRealization(
        delays_s=np.zeros(1), delay_samples=np.zeros(1, dtype=int),
        aod_deg=np.array([az_deg]), zod_deg=np.array([el_deg]),
        aoa_deg=np.array([az_deg + 180.0]), zoa_deg=np.array([-el_deg]),
        gains=g, large_scale_gain_db=float(gain_db), tx_array=tx_array, rx_array=rx_array,
        element_pattern=element_pattern, los=True, sample_rate_hz=sample_rate_hz,
    )


def apply_channel(tx: dict, channel: ChannelRealization, beams: dict, large_scale_gain_db=None,
                  n_samples: int | None = None, out: np.ndarray | None = None) -> np.ndarray:
    """Pass per-beam transmit waveforms through the channel.

    ``tx`` maps beam_id to :class:`~ssblpd.nr_phy.Waveform`, ``beams`` maps
    beam_id to :class:`Beam`. Returns (n_rx, n_samples) received samples.
    Delays are integer samples; only each waveform's ``spans`` are touched.
    """
    gain_db = channel.large_scale_gain_db if large_scale_gain_db is None else large_scale_gain_db
    n = n_samples or max(wf.samples.shape[-1] for wf in tx.values())
    n_rx = channel.rx_array.n_elements
    if out is None:
        out = np.zeros((n_rx, n), dtype=complex)
    if not np.isfinite(gain_db):
        return out
    amp = 10 ** (gain_db / 20)
    for beam_id, wf in tx.items():
        b = beams[beam_id]
        taps = channel.beam_taps(b.sector, b.weights) * amp
        spans = wf.spans if wf.spans is not None else [(0, wf.samples.shape[-1])]
        for a, z in spans:
            seg = wf.samples[a:z]
            for c, d in enumerate(channel.delay_samples):
                lo, hi = a + d, min(z + d, n)
                if lo >= n:
                    continue
                out[:, lo:hi] += taps[:, c:c + 1] * seg[None, : hi - lo]
    return out


def thermal_noise_dbm(bandwidth_hz: float, nf_db: float) -> float:
    return THERMAL_DBM_HZ + 10 * np.log10(bandwidth_hz) + nf_db


def add_noise(rng: np.random.Generator, samples, noise_power_dbm: float, dtype=np.complex128) -> np.ndarray:
    """Add circular complex Gaussian noise of the given per-sample power."""
    x = np.asarray(samples)
    sigma = np.sqrt(10 ** (noise_power_dbm / 10) / 2)
    noise = rng.standard_normal((*x.shape, 2), dtype=np.float64 if dtype == np.complex128 else np.float32)
    noise = (noise[..., 0] + 1j * noise[..., 1]).astype(dtype) * dtype(sigma)
    return noise + x.astype(dtype)
