"""Command-line entry point: ``ssblpd run | report | selftest``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure,
3 selftest failure. ``SSBLPD_WORKERS`` sets the default worker count.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_SELFTEST = 0, 1, 2, 3
WORKERS_ENV = "SSBLPD_WORKERS"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise _UsageError(f"{WORKERS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise _UsageError(f"{WORKERS_ENV} must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ssblpd", description="SSB detection-probability Monte Carlo campaigns.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a campaign and write a results bundle")
    r.add_argument("-c", "--config", type=Path, help="YAML config (defaults apply to missing keys)")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. --set n_drops=1 --set correlator.coarse_step=1")
    r.add_argument("--seed", type=int)
    r.add_argument("-w", "--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    r.add_argument("-o", "--out", type=Path, required=True, help="bundle directory to create")

    rep = sub.add_parser("report", help="summarize a bundle and write plot data and figures")
    rep.add_argument("bundle", type=Path)
    rep.add_argument("--pfa", type=float, default=None, help="false-alarm rate (default: bundle's target)")
    rep.add_argument("--plots-dir", type=Path, help="where to write plot files (default <bundle>/plots)")
    rep.add_argument("--no-figures", action="store_true", help="write plot-data files only")

    st = sub.add_parser("selftest", help="run built-in consistency checks")
    st.add_argument("--only", action="append", help="run just the named check(s)")
    return p


def cmd_run(args) -> int:
    from . import bundle, config
    from .experiment import run_campaign

    cfg = config.load(args.config) if args.config else config.from_dict({})
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = config.apply_overrides(cfg, overrides)
    workers = args.workers if args.workers is not None else _default_workers()
    if workers < 1:
        raise _UsageError("--workers must be >= 1")
    results = run_campaign(cfg, workers)
    out = bundle.write_bundle(results, args.out)
    print(f"wrote {out} ({len(results.records)} trials)")
    return EXIT_OK


def _plot_data(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write("\t".join(repr(float(v)) for v in row) + "\n")


def cmd_report(args) -> int:
    from . import bundle
    from .detection import pd_at_pfa
    from .experiment import DETECTORS, build_rocs, distance_binned_pd, distance_edges

    cfg = bundle.read_config(args.bundle)
    records = bundle.read_trials(args.bundle)
    for path in bundle.roc_files(args.bundle, cfg.arms).values():
        if path.exists():
            bundle.read_roc(path)  # validates the file
    pfa = cfg.pfa_target if args.pfa is None else args.pfa
    if not 0.0 <= pfa <= 1.0:
        raise _UsageError("--pfa must lie in [0, 1]")
    rocs = build_rocs(records, cfg.arms)

    pd = {key: pd_at_pfa(roc, pfa) for key, roc in rocs.items()}
    print(f"pd at pfa = {pfa:g}")
    for arm in cfg.arms:
        n = sum(t.arm == arm for t in records)
        print(f"  {arm} ({n} trials): " + "  ".join(f"{det} {pd[(arm, det)]:.3f}" for det in DETECTORS
                                                   if (arm, det) in pd))
    if ("baseline", "eve_corr") in pd and ("proposed", "eve_corr") in pd:
        for det in ("eve_corr", "eve_energy", "ue"):
            b, p = pd[("baseline", det)], pd[("proposed", det)]
            rel = f", {100 * (b - p) / b:.1f}% relative" if b > 0 else ""
            print(f"{det.replace('_', ' ')} pd reduction: {100 * (b - p):.1f} percentage points{rel}")

    plots = args.plots_dir or args.bundle / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    curves = {}
    for (arm, det), roc in rocs.items():
        x, y = roc.envelope()
        curves[(arm, det)] = (x, y)
        _plot_data(plots / f"roc_{arm}_{det}.dat", "pfa\tpd", zip(x, y))
    dist = {arm: distance_binned_pd(records, arm, pfa, distance_edges(cfg), cfg.min_bin_trials)
            for arm in cfg.arms}
    for arm, rows in dist.items():
        for det in ("eve_energy", "eve_corr"):
            pts = [((r["lo_m"] + r["hi_m"]) / 2, r[det]) for r in rows if r[det] is not None]
            _plot_data(plots / f"distance_{arm}_{det}.dat", "distance_m\tpd", pts)
        low = [f"{r['lo_m']:.0f}-{r['hi_m']:.0f} m" for r in rows if r["low_confidence"]]
        if low:
            print(f"  {arm}: low-confidence distance bins (< {cfg.min_bin_trials} trials): {', '.join(low)}")
    if not args.no_figures:
        from .plotting import plot_distance, plot_rocs
        plot_rocs(curves, plots / "roc.png", pfa)
        plot_distance(dist, plots / "distance.png", pfa)
    print(f"plot files in {plots}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import CHECKS, run_checks

    names = args.only or list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise _UsageError(f"unknown check(s): {', '.join(unknown)}; available: {', '.join(CHECKS)}")
    results = run_checks(names)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name:<18} {r.detail}  [{r.seconds:.1f}s]")
    failed = [r.name for r in results if not r.ok]
    if failed:
        print(f"failed: {', '.join(failed)}")
        return EXIT_SELFTEST
    print("all checks passed")
    return EXIT_OK


def main(argv=None) -> int:
    from .bundle import BundleError
    from .config import ConfigError

    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    handler = {"run": cmd_run, "report": cmd_report, "selftest": cmd_selftest}[args.cmd]
    try:
        return handler(args)
    except (_UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BundleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
