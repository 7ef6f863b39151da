"""Command-line interface: run / sweep / calibrate / eye / defaults."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import harness
from .harness import ConfigError, LinkConfig, SweepSpec
from .linkmodel import calibrate_rx_bw
from .sigcore import SigError


def _add_common(p):
    p.add_argument("--config", default=None, help="YAML config file")
    p.add_argument("--out", default=None, help="output path")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="override config seed")


def _load(args) -> LinkConfig:
    cfg = harness.load_config(args.config) if args.config else harness.validate(LinkConfig())
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="vcsellink",
                                 description="Directly-modulated VCSEL IM-DD link simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    for name, hlp in [("run", "run a single configured link"),
                      ("sweep", "run a sweep spec file"),
                      ("calibrate", "solve and report the receiver bandwidth"),
                      ("eye", "emit an equalizer-output eye matrix"),
                      ("defaults", "dump the full default config")]:
        p = sub.add_parser(name, help=hlp)
        _add_common(p)
        if name == "sweep":
            p.add_argument("spec", help="sweep spec YAML")

    args = ap.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, SigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.cmd == "defaults":
        text = harness.dump_config(harness.validate(LinkConfig()))
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            print(text, end="")
        return 0

    if args.cmd == "calibrate":
        cfg = _load(args)
        rx = calibrate_rx_bw(cfg.bandwidths)
        f = np.linspace(1e8, cfg.bandwidths.target_e2e_3db_hz * 2, 200)
        h = np.abs(cfg.bandwidths.cascade_response(f, rx))
        cross = f[np.argmin(np.abs(20 * np.log10(h) + 3.0103))]
        print(f"rx_3db_ghz: {rx / 1e9:.4f}")
        print(f"measured_e2e_3db_ghz: {cross / 1e9:.4f}")
        return 0

    if args.cmd == "run":
        cfg = _load(args)
        rows = harness.run_sweep(SweepSpec(base=harness.to_dict(cfg),
                                           base_seed=cfg.seed),
                                 parallelism=1)
        out = args.out or "result." + args.format
        harness.emit(rows, args.format, out)
        r = rows[0]
        if "error" in r:
            print(f"error: {r['error']}", file=sys.stderr)
            return 1
        print(f"BER {r['pre_fec_ber']:.3e}  KP4 {'pass' if r['kp4_pass'] else 'fail'}  "
              f"net {r['net_gbps_kp4']:.2f} Gb/s  AIR {r['air_gbps']:.2f} Gb/s")
        print(f"wrote {out}")
        return 0

    if args.cmd == "sweep":
        spec = harness.load_sweep(args.spec)
        rows = harness.run_sweep(spec, parallelism=args.parallel)
        out = args.out or "sweep." + args.format
        harness.emit(rows, args.format, out)
        nerr = sum("error" in r for r in rows)
        print(f"wrote {out} ({len(rows)} points, {nerr} failed)")
        return 0

    if args.cmd == "eye":
        cfg = _load(args)
        m = harness.eye_matrix(cfg)
        out = args.out or "eye.csv"
        np.savetxt(out, m, delimiter=",", fmt="%.12g")
        print(f"wrote {out}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
