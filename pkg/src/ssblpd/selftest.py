"""Built-in consistency checks run by ``ssblpd selftest``."""
from __future__ import annotations

import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import nr_phy
from .access_control import PowerControlInputs, power_control
from .detection import roc_from_stats
from .propagation import add_noise


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def lfsr127(init, taps) -> list[int]:
    """Shift-register form of x(i+7) = sum(x(i+t)) mod 2; bit 0 holds x(i)."""
    state = sum(b << i for i, b in enumerate(init))
    out = []
    for _ in range(127):
        out.append(state & 1)
        fb = 0
        for t in taps:
            fb ^= (state >> t) & 1
        state = (state >> 1) | (fb << 6)
    return out


def oracle_pss(nid2: int) -> list[int]:
    x = lfsr127((0, 1, 1, 0, 1, 1, 1), (4, 0))
    return [1 - 2 * x[(n + 43 * nid2) % 127] for n in range(127)]


def oracle_sss(nid1: int, nid2: int) -> list[int]:
    x0 = lfsr127((1, 0, 0, 0, 0, 0, 0), (4, 0))
    x1 = lfsr127((1, 0, 0, 0, 0, 0, 0), (1, 0))
    m0 = 15 * (nid1 // 112) + 5 * nid2
    m1 = nid1 % 112
    return [(1 - 2 * x0[(n + m0) % 127]) * (1 - 2 * x1[(n + m1) % 127]) for n in range(127)]


GOLDEN_SSS = ((0, 0), (1, 0), (111, 1), (112, 2), (335, 2))


def golden(name: str) -> list[int]:
    text = resources.files("ssblpd").joinpath("data", name).read_text()
    return [int(v) for v in text.split()]


def check_pss():
    for nid2 in range(3):
        got = nr_phy.gen_pss(nid2).tolist()
        if got != oracle_pss(nid2) or got != golden(f"pss_{nid2}.txt"):
            return False, f"PSS nid2={nid2} differs from the reference sequence"
    return True, "3 PSS sequences match"


def check_sss():
    for nid2 in range(3):
        for nid1 in range(336):
            if nr_phy.gen_sss(nid1, nid2).tolist() != oracle_sss(nid1, nid2):
                return False, f"SSS ({nid1},{nid2}) differs from the shift-register reference"
    for nid1, nid2 in GOLDEN_SSS:
        if nr_phy.gen_sss(nid1, nid2).tolist() != golden(f"sss_{nid1}_{nid2}.txt"):
            return False, f"SSS ({nid1},{nid2}) differs from the stored vector"
    return True, "1008 SSS sequences match"


def check_ofdm():
    rng = np.random.default_rng(7)
    p = nr_phy.OfdmParams()
    g = nr_phy.assemble_ssb_grid(nr_phy.PhysCellId(17, 2), nr_phy.gen_pbch_placeholder(rng))
    wf = nr_phy.ofdm_modulate(g, p, 11)
    back = nr_phy.ofdm_demodulate(wf, p, 11)
    err = float(np.max(np.abs(back - g.grid)))
    body = wf.samples.reshape(4, -1)[:, p.cp_samples:]
    parseval = abs(np.sum(np.abs(body) ** 2) / np.sum(np.abs(g.grid) ** 2) - 1)
    ok = err < 1e-9 and parseval < 1e-9
    return ok, f"round-trip error {err:.1e}, energy mismatch {parseval:.1e}"


def check_noise():
    rng = np.random.default_rng(11)
    target = -93.14
    x = add_noise(rng, np.zeros(1_000_000), target)
    p = np.mean(np.abs(x) ** 2)
    ratio = p / 10 ** (target / 10)
    circ = abs(np.mean(x**2)) / p
    mean = abs(np.mean(x)) / np.sqrt(p)
    ok = abs(ratio - 1) < 0.01 and circ < 0.01 and mean < 0.01
    return ok, f"variance ratio {ratio:.4f}, |E[x^2]|/P {circ:.1e}, |mean|/rms {mean:.1e}"


def check_power_control():
    cases = (((-96.42, -100.0, 0.0), 3.58), ((-96.42, -124.42, 0.0), 28.0), ((-90.0, -90.0, 0.0), 0.0))
    for args, want in cases:
        got = power_control(PowerControlInputs(*args))
        if abs(got - want) > 1e-9:
            return False, f"power_control{args} = {got}, expected {want}"
    return True, "3 examples exact"


def check_diagonal(n_drops: int = 6, n_realizations: int = 2):
    from .experiment import CampaignConfig, DETECTORS, run_campaign
    cfg = CampaignConfig(n_drops=n_drops, n_realizations=n_realizations, arms=("baseline",), seed=3,
                         silent=True, observation_time_s=0.002)
    res = run_campaign(cfg)
    n = len(res.records)
    tol = 2 / np.sqrt(n)
    worst = 0.0
    grid = np.linspace(0.05, 0.95, 19)
    for det in DETECTORS:
        roc = roc_from_stats([t.h1(det) for t in res.records], [t.h0(det) for t in res.records])
        for a in grid:
            # largest pd reached at pfa <= a vs. the diagonal
            worst = max(worst, abs(float(roc.pd[roc.pfa <= a + 1e-12].max()) - a))
    return worst <= tol, f"max |pd - pfa| = {worst:.3f} over {n} silent trials (tolerance {tol:.3f})"


CHECKS = {
    "pss_sequences": check_pss,
    "sss_sequences": check_sss,
    "ofdm_roundtrip": check_ofdm,
    "noise_statistics": check_noise,
    "power_control": check_power_control,
    "diagonal_sanity": check_diagonal,
}


def run_checks(names=None) -> list[CheckResult]:
    out = []
    for name in names or CHECKS:
        t = time.perf_counter()
        try:
            ok, detail = CHECKS[name]()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t))
    return out
