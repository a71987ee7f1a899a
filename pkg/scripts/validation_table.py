"""Simulated vs CTMN throughput for the three-WLAN layouts and an isolated link.

    python3 scripts/validation_table.py --time 30 --seeds 1,2,3 > validation.csv
"""
import argparse
import statistics
import sys

from wlansim import layouts
from wlansim.cli import parse_range
from wlansim.network import simulate
from wlansim.oracles import ctmn_for_scenario
from wlansim.phy import PhyMacParams


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--time", type=float, default=30.0)
    ap.add_argument("--seeds", type=parse_range, default=[1, 2, 3])
    ap.add_argument("--mcs", type=int, default=8)
    ap.add_argument("--n-agg", type=int, default=1)
    args = ap.parse_args(argv)

    params = PhyMacParams(mcs=args.mcs, n_agg=args.n_agg)
    cases = [("isolated", layouts.isolated(1, params))]
    cases += [(v, layouts.three_wlans(v, params)) for v in ("2a", "2b", "2c", "2d")]
    out = sys.stdout
    out.write("layout,wlan,sim_mbps,sim_std,ctmn_mbps,rel_error,collision_prob\n")
    for name, cfg in cases:
        _, ctmn = ctmn_for_scenario(cfg)
        reports = [simulate(cfg, args.time, seed=s) for s in args.seeds]
        for code in cfg.wlan_codes:
            thr = [r.by_code()[code].throughput / 1e6 for r in reports]
            col = statistics.fmean(r.by_code()[code].collision_prob for r in reports)
            mean = statistics.fmean(thr)
            std = statistics.stdev(thr) if len(thr) > 1 else 0.0
            ref = ctmn[code] / 1e6
            out.write(f"{name},{code},{mean:.4f},{std:.4f},{ref:.4f},"
                      f"{(mean - ref) / ref:+.4f},{col:.4f}\n")
        out.flush()


if __name__ == "__main__":
    main()
