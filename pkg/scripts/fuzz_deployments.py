"""Strict-mode runs over random deployments.

Every MAC transition is checked against the transition table and each AP's
packet ledger is balanced at the end. Stops after ``--events`` dispatches.
"""
import argparse

from wlansim import layouts
from wlansim.network import Simulation


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=10 ** 6)
    ap.add_argument("--wlans", type=int, default=8)
    ap.add_argument("--time", type=float, default=1.0)
    ap.add_argument("--first-seed", type=int, default=1)
    args = ap.parse_args(argv)

    total, seed = 0, args.first_seed
    while total < args.events:
        cfg = layouts.random_deployment(args.wlans, seed)
        sim = Simulation(cfg, seed=seed, strict=True)
        rep = sim.run(args.time)
        total += rep.events_dispatched
        for code, (gen, done, dropped, queued) in sim.conservation().items():
            if gen != done + dropped + queued:
                raise SystemExit(f"seed {seed}: {code} ledger off ({gen} != "
                                 f"{done}+{dropped}+{queued})")
        idle = [w.wlan_code for w in rep.wlans if w.throughput == 0]
        print(f"seed={seed} events={rep.events_dispatched} zero_throughput={idle}")
        seed += 1
    print(f"ok: {total} events over {seed - args.first_seed} deployments")


if __name__ == "__main__":
    main()
