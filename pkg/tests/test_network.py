import pytest

from wlansim import layouts
from wlansim.engine import EventKind, NS_PER_US, RandomStream
from wlansim.mac import DcbPolicy
from wlansim.network import Simulation, simulate
from wlansim.oracles import isolated_throughput
from wlansim.phy import PhyMacParams
from wlansim.scenario import NodeConfig, ScenarioConfig, format_stats
from wlansim.traffic import TrafficKind

P8 = PhyMacParams(mcs=8)


class Fixed(RandomStream):
    """Stream whose first ``uniform_int`` returns ``first``."""

    def __init__(self, seed, first):
        super().__init__(seed)
        self.first = first

    def uniform_int(self, lo, hi):
        if self.first is not None:
            v, self.first = self.first, None
            return v
        return super().uniform_int(lo, hi)


def events(trace, kind):
    return [line.split(",") for line in trace if line.split(",")[1] == kind]


def test_full_exchange_airtime():
    sim = Simulation(layouts.isolated(1, P8), seed=3, trace=True)
    sim.run(0.002)
    starts = events(sim.trace, "frame_start")
    ends = events(sim.trace, "frame_end")
    assert [s[3].split()[0] for s in starts[:4]] == ["RTS", "CTS", "DATA", "BACK"]
    assert float(ends[3][0]) - float(starts[0][0]) == pytest.approx(420.0)
    # the first access waits DIFS plus the drawn slots
    assert (float(starts[0][0]) - 34) % 9 == 0


def test_equal_backoffs_collide_and_time_out():
    sim = Simulation(layouts.fully_overlapping(2, P8), seed=1, trace=True)
    aps = [i for i in range(4) if sim.is_ap[i]]
    for i in aps:
        sim.rng[i] = Fixed(i, 3)
    sim.run(0.001)
    rts = [s for s in events(sim.trace, "frame_start") if s[3].startswith("RTS")]
    assert rts[0][0] == rts[1][0] == f"{34 + 27:.3f}"
    timeouts = events(sim.trace, "timeout_expiry")
    assert sorted(int(t[2]) for t in timeouts[:2]) == aps
    assert float(timeouts[0][0]) == pytest.approx(61 + 52 + 25)
    later = events(sim.trace, "backoff_expiry")[2:]
    assert later and float(later[0][0]) > float(timeouts[0][0])
    assert sum(sim.collision_failures) >= 2


def _hidden():
    def node(code, kind, wlan, x):
        return NodeConfig(code, kind, wlan, x, 0.0, 0.0, 0, 0, 0, 20.0, -50.0)

    nodes = [node("AP_A", "AP", "A", 0), node("STA_A", "STA", "A", 8),
             node("AP_B", "AP", "B", 16), node("STA_B", "STA", "B", 18)]
    return ScenarioConfig(nodes, PhyMacParams(capture_threshold_db=10.0))


def test_hidden_node_losses_show_up_as_timeouts():
    sim = Simulation(_hidden(), seed=2, trace=True, strict=True)
    rep = sim.run(0.5)
    a = rep.by_code()["A"]
    assert a.collision_prob > 0.05
    assert sim.collision_failures[0] > 0
    timed_out = {int(t[2]) for t in events(sim.trace, "timeout_expiry")}
    assert 0 in timed_out
    # the two APs are below each other's CCA level
    assert sim.rx_dbm[0][2] < -50 and sim.rx_dbm[2][0] < -50


def test_same_seed_is_byte_identical(tmp_path):
    cfg = layouts.three_wlans("2b")
    a = Simulation(cfg, seed=5, trace=True)
    b = Simulation(cfg, seed=5, trace=True)
    assert format_stats(a.run(0.3)) == format_stats(b.run(0.3))
    assert a.trace == b.trace
    c = Simulation(cfg, seed=6, trace=True)
    c.run(0.3)
    assert c.trace != a.trace


def test_conservation_with_finite_traffic():
    cfg = layouts.random_deployment(6, seed=4)
    sim = Simulation(cfg, seed=1, strict=True)
    sim.run(0.5)
    for code, (gen, delivered, dropped, buffered) in sim.conservation().items():
        assert gen == delivered + dropped + buffered, code


def test_poisson_light_load_delivers_everything_offered():
    nodes = [NodeConfig("AP", "AP", "A", 0, 0, 0, 0, 0, 0, traffic_model=TrafficKind.POISSON,
                        traffic_load=200.0),
             NodeConfig("STA", "STA", "A", 2, 0, 0, 0, 0, 0)]
    sim = Simulation(ScenarioConfig(nodes, P8), seed=3)
    rep = sim.run(2.0)
    gen, delivered, dropped, buffered = sim.conservation()["AP"]
    assert dropped == 0 and buffered <= 2
    assert abs(gen / 2.0 - 200) < 30
    w = rep.wlans[0]
    assert w.throughput == pytest.approx(delivered * 11728 / 2.0)
    assert 0 < w.mean_delay < 1e-3


def test_two_stations_share_evenly():
    rep = simulate(layouts.isolated(2, P8), 5.0, seed=1)
    per = list(rep.wlans[0].per_sta_throughput.values())
    assert abs(per[0] / sum(per) - 0.5) < 0.02


def test_channel_bonding_widens_isolated_link():
    def run(policy):
        nodes = [NodeConfig("AP", "AP", "A", 0, 0, 0, 0, 0, 3, dcb_policy=policy),
                 NodeConfig("STA", "STA", "A", 2, 0, 0, 0, 0, 3, dcb_policy=policy)]
        return simulate(ScenarioConfig(nodes, P8.with_overrides(n_agg=40)), 0.5).wlans[0].throughput

    assert run(DcbPolicy.AM) > 2.5 * run(DcbPolicy.OP)
    assert run(DcbPolicy.SCB) == pytest.approx(run(DcbPolicy.AM), rel=0.02)


def test_agent_sees_every_exchange():
    class Count:
        def __init__(self):
            self.ok = self.bad = 0

        def on_exchange_end(self, sim, node, success, t):
            if success:
                self.ok += 1
            else:
                self.bad += 1

    agent = Count()
    sim = Simulation(layouts.fully_overlapping(3, P8), seed=1, agent=agent)
    rep = sim.run(0.5)
    attempts = sum(w.attempts for w in rep.wlans)
    assert agent.ok + agent.bad == pytest.approx(attempts, abs=3)
    assert agent.ok == sum(w.throughput for w in rep.wlans) * 0.5 / 11728


def test_isolated_short_run_close_to_closed_form():
    rep = simulate(layouts.isolated(1, P8), 2.0, seed=9)
    assert rep.wlans[0].throughput == pytest.approx(isolated_throughput(P8, 8, 1), rel=0.02)


def test_node_logs_record_transitions():
    sim = Simulation(layouts.isolated(1, P8), seed=1, node_logs=True)
    sim.run(0.01)
    lines = sim.logs["AP_A"]
    assert any("SENSING→TRANSMIT" in line for line in lines)
    assert sim.logs["STA_A1"]


def test_run_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        Simulation(layouts.isolated()).run(0)


def test_same_time_frame_starts_follow_node_order():
    sim = Simulation(layouts.fully_overlapping(2, P8), seed=1)
    order = []
    sim._handlers[EventKind.FRAME_START] = lambda t, node, n: order.append(node)
    eng = sim.engine
    eng.schedule(100 * NS_PER_US, EventKind.FRAME_START, 2, None)
    eng.schedule(100 * NS_PER_US, EventKind.FRAME_START, 0, None)
    eng.schedule(100 * NS_PER_US, EventKind.FRAME_END, 3, None)
    sim._handlers[EventKind.FRAME_END] = lambda t, node, n: order.append(("end", node))
    eng.run_until(200 * NS_PER_US, sim._handlers)
    assert order == [("end", 3), 0, 2]
