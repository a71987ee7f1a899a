"""End-to-end checks of the simulator against the analytical models.

Each test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary. Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import functools
import statistics
import sys
import time

import pytest

from wlansim import layouts
from wlansim.engine import EventEngine, EventKind
from wlansim.network import Simulation
from wlansim.oracles import bianchi_throughput, ctmn_for_scenario
from wlansim.phy import PhyMacParams, exchange_duration
from wlansim.scenario import write_outputs

MCS = 8
SEEDS = (1, 2, 3, 4, 5)
THREE_WLAN_TIME = 30.0
DENSITY = (2, 5, 10, 20, 50)


def params(n_agg=1):
    return PhyMacParams(mcs=MCS, n_agg=n_agg)


def closed_form(n_agg):
    """Saturated isolated throughput: one A-MPDU per backoff+DIFS+exchange cycle."""
    p = params(n_agg)
    cycle_us = p.cw / 2 * p.t_empty + p.t_difs + exchange_duration(p, n_agg, MCS)
    return n_agg * p.l_data / (cycle_us * 1e-6)


SCENARIOS = {
    "isolated": lambda: layouts.isolated(1, params()),
    "isolated_agg40": lambda: layouts.isolated(1, params(40)),
    "two_stas": lambda: layouts.isolated(2, params()),
    **{v: functools.partial(layouts.three_wlans, v, params()) for v in ("2a", "2b", "2c", "2d")},
    **{f"dense_{n}": functools.partial(layouts.fully_overlapping, n, params()) for n in DENSITY},
}


@functools.cache
def run(name, seed, sim_time):
    sim = Simulation(SCENARIOS[name](), seed=seed)
    report = sim.run(sim_time)
    return sim, report


def mean_by_wlan(name, seeds, sim_time):
    reports = [run(name, s, sim_time)[1] for s in seeds]
    codes = [w.wlan_code for w in reports[0].wlans]
    return {c: statistics.fmean(r.by_code()[c].throughput for r in reports) for c in codes}


def verdict(lines, number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    lines.append(line)
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


def rel(a, b):
    return (a - b) / b


def test_isolated_closed_form(verdicts):
    parts, ok = [], True
    for name, n_agg in (("isolated", 1), ("isolated_agg40", 40)):
        target = closed_form(n_agg)
        for s in SEEDS:
            sim, rep = run(name, s, 60.0)
            err = rel(rep.wlans[0].throughput, target)
            ok &= abs(err) <= 0.02 and rep.wall_clock < 10.0
            parts.append(f"n_agg={n_agg} seed={s} {rep.wlans[0].throughput / 1e6:.3f}Mbps "
                         f"err={err:+.4f} {rep.wall_clock:.1f}s")
    verdict(verdicts, 1, ok, f"closed form {closed_form(1) / 1e6:.3f}/"
                             f"{closed_form(40) / 1e6:.3f} Mbps; " + "; ".join(parts))


def test_two_station_fairness(verdicts):
    _, one = run("isolated", 1, 60.0)
    _, two = run("two_stas", 1, 60.0)
    agg_err = rel(two.wlans[0].throughput, one.wlans[0].throughput)
    per = list(two.wlans[0].per_sta_throughput.values())
    share = per[0] / sum(per)
    ok = abs(agg_err) <= 0.02 and abs(share - 0.5) <= 0.02
    verdict(verdicts, 2, ok, f"aggregate err={agg_err:+.4f}, first STA share={share:.4f}")


def test_flow_starvation(verdicts):
    sim_thr = mean_by_wlan("2b", SEEDS[:3], THREE_WLAN_TIME)
    _, ctmn = ctmn_for_scenario(SCENARIOS["2b"]())
    err_a, err_c = rel(sim_thr["A"], ctmn["A"]), rel(sim_thr["C"], ctmn["C"])
    ratio = sim_thr["B"] / sim_thr["A"]
    graph = set()
    for s in SEEDS[:3]:
        graph |= run("2b", s, THREE_WLAN_TIME)[0].realized_contention()
    expected = {frozenset("AB"), frozenset("BC")}
    ok = abs(err_a) <= 0.10 and abs(err_c) <= 0.10 and ratio < 0.15 and graph == expected
    edges = sorted("-".join(sorted(e)) for e in graph)
    verdict(verdicts, 3, ok, f"A err={err_a:+.3f} C err={err_c:+.3f} B/A={ratio:.3f} "
                             f"graph={edges}")


def test_no_overlap_isolation(verdicts):
    sim_thr = mean_by_wlan("2d", SEEDS[:3], THREE_WLAN_TIME)
    target = closed_form(1)
    errs = {c: rel(v, target) for c, v in sim_thr.items()}
    ok = all(abs(e) <= 0.03 for e in errs.values())
    verdict(verdicts, 4, ok, " ".join(f"{c} err={e:+.4f}" for c, e in errs.items()))


def test_full_overlap_symmetry(verdicts):
    sim_thr = mean_by_wlan("2a", SEEDS[:3], THREE_WLAN_TIME)
    vals = list(sim_thr.values())
    spread = (max(vals) - min(vals)) / min(vals)
    total = sum(vals)
    ok = spread <= 0.05 and total <= 1.10 * closed_form(1)
    verdict(verdicts, 5, ok, f"spread={spread:.4f} sum={total / 1e6:.3f}Mbps "
                             f"(isolated {closed_form(1) / 1e6:.3f})")


def test_potential_overlap_ordering(verdicts):
    b_2c = mean_by_wlan("2c", SEEDS[:3], THREE_WLAN_TIME)["B"]
    b_2b = mean_by_wlan("2b", SEEDS[:3], THREE_WLAN_TIME)["B"]
    _, ctmn = ctmn_for_scenario(SCENARIOS["2c"]())
    gap = rel(b_2c, ctmn["B"])
    ok = b_2b < b_2c < closed_form(1)
    verdict(verdicts, 6, ok, f"B: 2b {b_2b / 1e6:.3f} < 2c {b_2c / 1e6:.3f} < isolated "
                             f"{closed_form(1) / 1e6:.3f} Mbps; 2c gap vs CTMN {gap:+.3f}")


def _dense(n, sim_time=100.0):
    return run(f"dense_{n}", 1, sim_time)


def test_bianchi_density_sweep(verdicts):
    parts, ok = [], True
    for n in DENSITY:
        sim, rep = _dense(n)
        attempts = sum(w.attempts for w in rep.wlans)
        p_sim = sum(w.collision_prob * w.attempts for w in rep.wlans) / attempts
        per = statistics.fmean(w.throughput for w in rep.wlans)
        b = bianchi_throughput(n, params(), MCS, 1)
        dp, dt = p_sim - b.p, rel(per, b.per_wlan_throughput)
        ok &= abs(dp) <= 0.05 and abs(dt) <= 0.10
        parts.append(f"n={n} p={p_sim:.4f}/{b.p:.4f} thr err={dt:+.4f}")
    verdict(verdicts, 7, ok, "; ".join(parts))


def test_determinism(verdicts, tmp_path):
    outs = []
    for k in range(2):
        sim = Simulation(SCENARIOS["2b"](), seed=7, trace=True)
        rep = sim.run(2.0)
        d = tmp_path / f"run{k}"
        write_outputs(rep, d, sim.trace)
        outs.append(((d / "stats.csv").read_bytes(), (d / "trace.csv").read_bytes()))
    same = outs[0] == outs[1]

    order = []
    eng = EventEngine()
    eng.schedule(5000, EventKind.FRAME_START, 3, "late node")
    eng.schedule(5000, EventKind.TRAFFIC_ARRIVAL, 0, "arrival")
    eng.schedule(5000, EventKind.FRAME_START, 1, "early node")
    eng.schedule(5000, EventKind.FRAME_END, 2, "end")
    eng.run_until(6000, lambda t, k, n, p: order.append(p))
    expected = ["end", "early node", "late node", "arrival"]
    ok = same and order == expected
    verdict(verdicts, 8, ok, f"identical outputs={same}, same-time order={order}")


def test_conservation_and_closure(verdicts):
    bad = []
    checked = 0
    for name, seed, t in [("isolated", 1, 60.0), ("isolated_agg40", 1, 60.0),
                          ("two_stas", 1, 60.0), *[(v, 1, THREE_WLAN_TIME)
                                                   for v in ("2a", "2b", "2c", "2d")],
                          *[(f"dense_{n}", 1, 100.0) for n in DENSITY]]:
        sim, _ = run(name, seed, t)
        for code, (gen, delivered, dropped, buffered) in sim.conservation().items():
            checked += 1
            if gen != delivered + dropped + buffered:
                bad.append(f"{name}:{code}")
    events, seed = 0, 0
    while events < 10 ** 6:
        seed += 1
        sim = Simulation(layouts.random_deployment(8, seed), seed=seed, strict=True)
        rep = sim.run(1.0)
        events += rep.events_dispatched
        for code, (gen, delivered, dropped, buffered) in sim.conservation().items():
            checked += 1
            if gen != delivered + dropped + buffered:
                bad.append(f"fuzz{seed}:{code}")
    ok = not bad
    verdict(verdicts, 9, ok, f"{checked} node ledgers balanced (bad={bad}); strict fuzz "
                             f"{events} events over {seed} deployments, no undefined transition")


def test_performance(verdicts):
    sim = Simulation(SCENARIOS["dense_50"](), seed=1)
    t0 = time.perf_counter()
    rep = sim.run(10.0)
    wall = time.perf_counter() - t0
    counts = [_dense(n)[1].events_dispatched for n in DENSITY]
    monotone = all(a < b for a, b in zip(counts, counts[1:]))
    ok = wall < 60.0 and monotone
    verdict(verdicts, 10, ok, f"n=50 10s run {wall:.1f}s wall ({rep.events_dispatched} events); "
                              f"events at 100s for n={list(DENSITY)}: {counts}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
