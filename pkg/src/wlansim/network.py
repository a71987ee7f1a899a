"""Event-driven WLAN simulation: medium, per-node MAC handlers and statistics."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Protocol

from .engine import NS_PER_US, EventEngine, EventKind, RandomStream, seconds
from .mac import (AWAITED, WAIT_AFTER, ContractViolation, DcbPolicy, MacInput, Mode, NodeState,
                  WlanDescriptor, check_transition, dcb_select_channels, draw_backoff,
                  nav_update, next_cw, response_timeout_us)
from .phy import (ChannelSet, FrameDurations, FrameKind, LinkBudget, Notification,
                  capture_threshold_db, cts_duration, frame_durations, max_feasible_n_agg,
                  path_loss_db, received_power_dbm, select_mcs)
from .scenario import ScenarioConfig, StatsReport, WlanAccumulator, finalize_stats
from .traffic import Buffer, TrafficKind, dequeue_aggregate, next_arrival


class Agent(Protocol):
    """Extension point notified after every completed or failed exchange."""

    def on_exchange_end(self, sim: "Simulation", node: int, success: bool, t: int) -> None: ...


@dataclass(slots=True)
class Exchange:
    dest: int
    channels: ChannelSet
    mcs: int
    n_agg: int
    t_rts: int
    t_cts: int
    t_data: int


class Simulation:
    """One run of a scenario; build, call :meth:`run`, read the report."""

    def __init__(self, cfg: ScenarioConfig, seed: int = 1, trace: bool = False,
                 node_logs: bool = False, strict: bool = False, agent: Agent | None = None):
        self.cfg = cfg
        p = self.params = cfg.params
        self.seed = seed
        self.strict = strict
        self.agent = agent
        self.trace: list[str] | None = [] if trace else None
        self.engine = EventEngine(self.trace)
        nodes = cfg.nodes
        n_nodes = len(nodes)
        self.codes = [n.node_code for n in nodes]
        self.logs: dict[str, list[str]] | None = (
            {c: [] for c in self.codes} if node_logs else None)

        wlan_codes = cfg.wlan_codes
        index = {c: i for i, c in enumerate(self.codes)}
        self.wlan_of = [wlan_codes.index(n.wlan_code) for n in nodes]
        self.wlans: list[WlanDescriptor] = []
        for w, code in enumerate(wlan_codes):
            ap = cfg.ap_of(code)
            self.wlans.append(WlanDescriptor(
                w, code, index[ap.node_code], [index[s.node_code] for s in cfg.stas_of(code)],
                ap.allocated, ap.primary_channel, ap.dcb_policy))
        self.is_ap = [n.is_ap for n in nodes]
        self.primary = [self.wlans[self.wlan_of[i]].primary for i in range(n_nodes)]
        self.tx_power = [n.tx_power_dbm for n in nodes]
        self.cca_mw = [10 ** (n.cca_dbm / 10) for n in nodes]
        self.noise_mw = 10 ** (p.noise_dbm / 10)

        self.rx_dbm = [[-math.inf] * n_nodes for _ in range(n_nodes)]
        self.rx_mw = [[0.0] * n_nodes for _ in range(n_nodes)]
        for j, a in enumerate(nodes):
            for i, b in enumerate(nodes):
                if i == j:
                    continue
                walls, floors = cfg.obstacles_between(a.node_code, b.node_code)
                pl = path_loss_db(LinkBudget(math.dist(a.position, b.position), walls, floors), p)
                dbm = received_power_dbm(a.tx_power_dbm, pl, p)
                self.rx_dbm[j][i] = dbm
                self.rx_mw[j][i] = 10 ** (dbm / 10)
        self.capture_lin = [10 ** (capture_threshold_db(m, p) / 10)
                            for m in range(len(p.sensitivity_dbm))]

        # contending nodes (downlink: the APs) track their primary channel power
        self.sensing = [i for i in range(n_nodes) if self.is_ap[i]]
        self.listeners = [[(i, self.primary[i], self.rx_mw[j][i]) for i in self.sensing if i != j]
                          for j in range(n_nodes)]
        self.prim_mw = [0.0] * n_nodes
        self.prim_count = [0] * n_nodes
        self.busy = [False] * n_nodes
        self.quiet_since = [0] * n_nodes
        # control frame each sensing node is decoding (for its NAV) and its power
        self.overheard: list[Notification | None] = [None] * n_nodes
        self.ov_sig = [0.0] * n_nodes
        self.busy_causes: list[set[int]] = [set() for _ in range(n_nodes)]

        self.states = [NodeState(cw_current=p.cw) for _ in range(n_nodes)]
        self.rng = [RandomStream.child(seed, f"node:{c}") for c in self.codes]
        self.scenario_rng = RandomStream.child(seed, "scenario")
        self.buffers: dict[int, Buffer] = {}
        self.traffic = {}
        for i, n in enumerate(nodes):
            if n.is_ap:
                self.buffers[i] = Buffer(p.buffer_capacity, p.l_data,
                                         full_buffer=n.traffic_model is TrafficKind.FULL_BUFFER)
                self.traffic[i] = n.traffic
        # full-buffer APs never run dry, which skips a length check per resume
        self.saturated = [i in self.buffers and self.buffers[i].full_buffer
                          for i in range(n_nodes)]
        self.exchange: dict[int, Exchange] = {}
        self.active: dict[int, Notification] = {}
        self._mcs_cache: dict[tuple[int, int, int], int] = {}
        self._dur_cache: dict[tuple[int, int, int], FrameDurations] = {}
        self._feasible_cache: dict[tuple[int, int], int] = {}
        self._heard_cache: dict[tuple[int, int, int], list[tuple[int, float]]] = {}

        self.T_e = p.t_empty * NS_PER_US
        self.T_sifs = p.t_sifs * NS_PER_US
        self.T_difs = p.t_difs * NS_PER_US
        self.T_back = p.t_back * NS_PER_US
        self.T_cts = cts_duration(p) * NS_PER_US
        self.T_resp = response_timeout_us(p) * NS_PER_US

        self.acc = {w.code: WlanAccumulator(per_sta_bits={self.codes[s]: 0 for s in w.stas})
                    for w in self.wlans}
        self.acc_of = [self.acc[self.wlans[self.wlan_of[i]].code] for i in range(n_nodes)]
        self.collision_failures = [0] * n_nodes
        self.data_failures = [0] * n_nodes
        self.sim_end = 0
        self.report: StatsReport | None = None
        # event handlers take (time, node, payload), indexed by EventKind
        self._handlers = [None] * len(EventKind)
        for kind, h in ((EventKind.FRAME_END, self.on_frame_end),
                        (EventKind.NAV_EXPIRY, self.on_nav_expiry),
                        (EventKind.BACKOFF_EXPIRY, self.on_backoff_expiry),
                        (EventKind.TIMEOUT_EXPIRY, self.on_timeout),
                        (EventKind.FRAME_START, self.on_frame_start),
                        (EventKind.TRAFFIC_ARRIVAL, self.on_traffic_arrival),
                        (EventKind.SIM_END, self._on_sim_end)):
            self._handlers[kind] = h

    # ------------------------------------------------------------------ run

    def run(self, sim_time: float) -> StatsReport:
        if not sim_time > 0:
            raise ValueError("sim_time must be positive")
        started = time.perf_counter()
        t_end = seconds(sim_time)
        self.sim_end = t_end
        eng = self.engine
        for i in self.sensing:
            first = next_arrival(self.traffic[i], self.rng[i], 0)
            if first is not None:
                eng.schedule(first, EventKind.TRAFFIC_ARRIVAL, i)
            self._resume(i, 0)
        eng.schedule(t_end, EventKind.SIM_END, -1)
        eng.run_until(t_end, self._handlers)
        report = finalize_stats(self.acc, sim_time)
        report.events_dispatched = eng.dispatched
        report.wall_clock = time.perf_counter() - started
        report.seed = self.seed
        self.report = report
        return report

    def _dispatch(self, t: int, kind: EventKind, node: int, payload) -> None:
        self._handlers[kind](t, node, payload)

    def _on_sim_end(self, t: int, node: int, payload=None) -> None:
        pass

    # -------------------------------------------------------------- helpers

    def _log(self, i: int, old: Mode, new: Mode, t: int, reason: str) -> None:
        self.logs[self.codes[i]].append(
            f"{t / NS_PER_US:.3f} {self.codes[i]} {old.value}→{new.value} {reason}")

    def _set_mode(self, i: int, mode: Mode, t: int, reason: str) -> None:
        st = self.states[i]
        if self.logs is not None and st.mode is not mode:
            self._log(i, st.mode, mode, t, reason)
        st.mode = mode

    def _note(self, i: int, before: Mode, inp: MacInput) -> None:
        check_transition(before, inp, self.states[i].mode)

    def has_backlog(self, i: int) -> bool:
        return len(self.buffers[i]) > 0

    def heard_by(self, j: int, chans: ChannelSet) -> list[tuple[int, float, bool]]:
        """Sensing nodes whose primary lies in ``chans``: ``(node, per-channel power of j,
        whether that power alone reaches the node's CCA level)``."""
        key = (j, chans.first, chans.last)
        out = self._heard_cache.get(key)
        if out is None:
            w = chans.width
            cca = self.cca_mw
            out = self._heard_cache[key] = [(i, mw / w, mw / w >= cca[i])
                                            for i, prim, mw in self.listeners[j]
                                            if chans.first <= prim <= chans.last]
        return out

    def durations(self, n_agg: int, mcs: int, width: int) -> FrameDurations:
        key = (n_agg, mcs, width)
        d = self._dur_cache.get(key)
        if d is None:
            d = self._dur_cache[key] = frame_durations(self.params, n_agg, mcs, width)
        return d

    def feasible_n_agg(self, mcs: int, width: int) -> int:
        key = (mcs, width)
        m = self._feasible_cache.get(key)
        if m is None:
            m = self._feasible_cache[key] = max_feasible_n_agg(self.params, mcs, width)
        return m

    def link_mcs(self, ap: int, sta: int, width: int) -> int:
        if self.params.mcs is not None:
            return self.params.mcs
        key = (ap, sta, width)
        m = self._mcs_cache.get(key)
        if m is None:
            m = self._mcs_cache[key] = select_mcs(self.rx_dbm[ap][sta], width, self.params)
        return m

    def free_channels(self, i: int, allocated: ChannelSet) -> set[int]:
        """Channels of ``allocated`` whose sensed power at ``i`` is below CCA."""
        free = set()
        cca = self.cca_mw[i]
        for ch in allocated.channels():
            if ch == self.primary[i]:
                if not self.busy[i]:
                    free.add(ch)
                continue
            total = 0.0
            for k in self.active.values():
                if k.tx_node != i and ch in k.channels:
                    total += self.rx_mw[k.tx_node][i] / k.channels.width
            if total < cca:
                free.add(ch)
        return free

    def _sinr_ok(self, n: Notification, r: int) -> bool:
        """Whether ``n`` clears its capture threshold at ``r`` on every channel."""
        c0, c1 = n.channels
        rx_mw = self.rx_mw
        sig = rx_mw[n.tx_node][r] / (c1 - c0 + 1)
        need = self.capture_lin[n.mcs]
        active = self.active.values()
        for ch in range(c0, c1 + 1):
            interf = self.noise_mw
            for k in active:
                if k is not n and k.tx_node != r:
                    k0, k1 = k.channels
                    if k0 <= ch <= k1:
                        interf += rx_mw[k.tx_node][r] / (k1 - k0 + 1)
            if sig < need * interf:
                return False
        return True

    def _can_lock(self, r: int, n: Notification) -> bool:
        st = self.states[r]
        if st.mode is Mode.TRANSMIT or st.current_rx is not None:
            return False
        kind = n.frame_kind
        if self.is_ap[r]:
            ex = self.exchange.get(r)
            if ex is None or n.tx_node != ex.dest:
                return False
            return (kind is FrameKind.CTS and st.mode is Mode.WAIT_CTS) or (
                kind in (FrameKind.BACK, FrameKind.ACK) and st.mode is Mode.WAIT_ACK)
        if kind is FrameKind.RTS:
            return st.mode is Mode.SENSING
        if kind is FrameKind.DATA:
            return st.mode is Mode.WAIT_DATA
        return False

    # ------------------------------------------------------- backoff / CCA

    def _freeze(self, i: int, t: int) -> None:
        self._freeze_many((i,), t)

    def _freeze_many(self, nodes, t: int) -> None:
        """Stop the running countdowns of ``nodes``, keeping what is left."""
        states = self.states
        cancel = self.engine.cancel
        credit = self.params.busy_slot_decrement
        for i in nodes:
            st = states[i]
            h = st.backoff_handle
            if h is not None:
                cancel(h)
                st.backoff_handle = None
                elapsed = t - st.countdown_start
                if elapsed >= 0:
                    left = st.backoff_remaining - elapsed
                    st.backoff_remaining = left if left > 0 else 0
                    st.slot_credit = credit
            if st.backoff_remaining is not None:
                st.backoff_frozen = True

    def _resume(self, i: int, t: int) -> None:
        """Return ``i`` to contention: NAV, idle, frozen or counting down."""
        self._resume_many((i,), t)

    def _resume_many(self, nodes, t: int) -> None:
        states, busy, quiet = self.states, self.busy, self.quiet_since
        saturated, buffers, rng = self.saturated, self.buffers, self.rng
        T_e, T_difs = self.T_e, self.T_difs
        SENSING, NAV = Mode.SENSING, Mode.NAV
        due, counting = [], []
        for i in nodes:
            st = states[i]
            if st.nav_until > t:
                if st.mode is not NAV:
                    self._set_mode(i, NAV, t, "nav")
                continue
            if st.mode is not SENSING:
                self._set_mode(i, SENSING, t, "contend")
            if not saturated[i] and not len(buffers[i]):
                continue
            if st.backoff_remaining is None:
                st.backoff_remaining = draw_backoff(rng[i], st.cw_current) * T_e
                st.slot_credit = False
            if busy[i]:
                st.backoff_frozen = True
                continue
            if st.backoff_handle is not None:
                continue
            start = quiet[i] + T_difs
            if start < t:
                start = t
            if st.slot_credit:
                st.slot_credit = False
                left = st.backoff_remaining - T_e
                st.backoff_remaining = left if left > 0 else 0
            st.countdown_start = start
            st.backoff_frozen = False
            due.append((start + st.backoff_remaining, i))
            counting.append(st)
        if due:
            handles = self.engine.schedule_batch(EventKind.BACKOFF_EXPIRY, due)
            for st, h in zip(counting, handles):
                st.backoff_handle = h

    def on_channel_state_change(self, i: int, primary_busy: bool, t: int) -> None:
        st = self.states[i]
        if st.mode is Mode.SENSING:
            if primary_busy:
                self._freeze(i, t)
            else:
                self._resume(i, t)

    def nav_set(self, i: int, until: int, t: int) -> None:
        st = self.states[i]
        before = st.mode
        if until <= st.nav_until:
            if self.strict:
                self._note(i, before, MacInput.OVERHEARD_RESERVATION)
            return
        if st.mode is Mode.SENSING:
            self._freeze(i, t)
        nav_update(st, until, t)
        if st.mode is not before and self.logs is not None:
            self._log(i, before, st.mode, t, "nav set")
        self.engine.cancel(st.nav_handle)
        st.nav_handle = self.engine.schedule(until, EventKind.NAV_EXPIRY, i)
        if self.strict:
            self._note(i, before, MacInput.OVERHEARD_RESERVATION)

    def on_nav_expiry(self, t: int, i: int, payload=None) -> None:
        st = self.states[i]
        before = st.mode
        st.nav_handle = None
        if st.nav_until > t:
            return
        if st.mode is Mode.NAV:
            if t > self.quiet_since[i] and not self.busy[i]:
                self.quiet_since[i] = t
            self._resume(i, t)
        if self.strict:
            self._note(i, before, MacInput.NAV_EXPIRY)

    def on_traffic_arrival(self, t: int, i: int, payload=None) -> None:
        st = self.states[i]
        before = st.mode
        self.buffers[i].push(t)
        nxt = next_arrival(self.traffic[i], self.rng[i], t)
        if nxt is not None and nxt <= self.sim_end:
            self.engine.schedule(nxt, EventKind.TRAFFIC_ARRIVAL, i)
        if st.mode is Mode.SENSING and st.backoff_handle is None and not st.backoff_frozen:
            self._resume(i, t)
        if self.strict:
            self._note(i, before, MacInput.TRAFFIC_ARRIVAL)

    # ------------------------------------------------------- transmissions

    def on_backoff_expiry(self, t: int, i: int, payload=None) -> None:
        st = self.states[i]
        st.backoff_handle = None
        if st.mode is not Mode.SENSING or self.busy[i]:
            raise ContractViolation(
                f"backoff expired at node {self.codes[i]} in {st.mode.value} "
                f"(primary busy={self.busy[i]})")
        st.backoff_remaining = None
        st.backoff_frozen = False
        if not self.has_backlog(i):
            raise ContractViolation(f"backoff expired at {self.codes[i]} with empty buffer")
        self.begin_transmission(i, t)
        if self.strict:
            self._note(i, Mode.SENSING, MacInput.BACKOFF_EXPIRY)

    def begin_transmission(self, i: int, t: int) -> Notification | None:
        p = self.params
        w = self.wlans[self.wlan_of[i]]
        if w.dcb_policy is DcbPolicy.OP:
            chans = ChannelSet(w.primary, w.primary)
        else:
            chans = dcb_select_channels(w.dcb_policy, self.free_channels(i, w.allocated),
                                        w.allocated, w.primary, self.rng[i])
            if chans is None:
                # static bonding found a busy secondary: new attempt after DIFS
                st = self.states[i]
                st.backoff_remaining = draw_backoff(self.rng[i], st.cw_current) * self.T_e
                st.slot_credit = False
                st.countdown_start = t + self.T_difs
                st.backoff_handle = self.engine.schedule(
                    st.countdown_start + st.backoff_remaining, EventKind.BACKOFF_EXPIRY, i)
                return None
        stas = w.stas
        dest = stas[self.rng[i].uniform_int(0, len(stas) - 1)] if len(stas) > 1 else stas[0]
        width = chans.width
        mcs = self.link_mcs(i, dest, width)
        batch = dequeue_aggregate(self.buffers[i], p.n_agg, mcs, width, p,
                                  self.feasible_n_agg(mcs, width))
        d = self.durations(len(batch), mcs, width)
        ex = Exchange(dest, chans, mcs, len(batch), d.rts * NS_PER_US, d.cts * NS_PER_US,
                      d.data * NS_PER_US)
        self.exchange[i] = ex
        rts = Notification(i, dest, FrameKind.RTS, chans, self.tx_power[i], ex.t_rts,
                           nav_reservation=3 * self.T_sifs + ex.t_cts + ex.t_data + self.T_back,
                           mcs=0, n_agg=ex.n_agg)
        self.overheard[i] = None
        self._set_mode(i, Mode.TRANSMIT, t, "backoff expired")
        self.acc[w.code].attempts += 1
        self.engine.schedule(t, EventKind.FRAME_START, i, rts)
        return rts

    def _respond(self, i: int, to: Notification, kind: FrameKind, duration: int,
                 nav: int, mcs: int, t: int) -> None:
        n = Notification(i, to.tx_node, kind, to.channels, self.tx_power[i], duration,
                         nav_reservation=nav, mcs=mcs, n_agg=to.n_agg)
        self._set_mode(i, Mode.TRANSMIT, t, "frame received")
        self.engine.schedule(t + self.T_sifs, EventKind.FRAME_START, i, n)

    def on_frame_start(self, t: int, node: int, n: Notification) -> None:
        j = n.tx_node
        n.start = t
        states = self.states
        strict = self.strict
        st_j = states[j]
        if strict:
            self._note(j, st_j.mode, MacInput.OWN_FRAME_START)
        if st_j.current_rx is not None:  # half duplex: our own reception is lost
            st_j.current_rx.rx_ok = False
            st_j.current_rx = None
        overheard = self.overheard
        overheard[j] = None
        chans = n.channels
        active = self.active
        active[j] = n
        if len(active) > 1:
            for k in active.values():
                if (k is not n and k.rx_ok and k.channels.overlaps(chans)
                        and not self._sinr_ok(k, k.rx_target)):
                    k.rx_ok = False
        self.acc_of[j].tx_airtime += n.duration

        r = n.rx_target
        st_r = states[r]
        before_r = st_r.mode
        if (self._can_lock(r, n) and self.rx_mw[j][r] / chans.width >= self.cca_mw[r]
                and self._sinr_ok(n, r)):
            n.rx_ok = True
            st_r.current_rx = n
            st_r.timeout_at = None
            if st_r.pending_timeout is not None:
                self.engine.cancel(st_r.pending_timeout)
                st_r.pending_timeout = None
            if n.frame_kind is FrameKind.RTS:
                self._set_mode(r, Mode.RECEIVE, t, "rts detected")
        elif st_r.timeout_at is not None and st_r.timeout_from == j:
            # the awaited answer is unreadable: let the wait run out
            self._arm_timeout(r)
        if strict:
            self._note(r, before_r, MacInput.ADDRESSED_FRAME_START)

        heard = self.heard_by(j, chans)
        if not heard:
            self.engine.schedule(t + n.duration, EventKind.FRAME_END, j, n)
            return
        prim_mw, prim_count, busy, cca_mw = self.prim_mw, self.prim_count, self.busy, self.cca_mw
        noise = self.noise_mw
        ctrl = n.frame_kind is FrameKind.RTS or n.frame_kind is FrameKind.CTS
        SENSING = Mode.SENSING
        sense_modes = (SENSING, Mode.NAV)
        thr = self.capture_lin[0]
        ov_sig = self.ov_sig
        wlan_j = self.wlan_of[j]
        busy_causes = self.busy_causes
        to_freeze = []
        for i, pw, loud in heard:
            total = prim_mw[i] + pw
            prim_mw[i] = total
            prim_count[i] += 1
            if not busy[i] and total >= cca_mw[i]:
                busy[i] = True
                busy_causes[i].add(wlan_j)
                st = states[i]
                if st.mode is SENSING and (st.backoff_handle is not None
                                           or st.backoff_remaining is not None):
                    to_freeze.append(i)
                if strict:
                    # freezing never changes the mode
                    self._note(i, st.mode, MacInput.CHANNEL_BUSY)
            if overheard[i] is not None:
                # the new frame may drown a control frame being overheard
                sig = ov_sig[i]
                if sig < thr * (total - sig + noise):
                    overheard[i] = None
            elif (ctrl and loud and i != r and pw >= thr * (total - pw + noise)
                  and states[i].mode in sense_modes):
                overheard[i] = n
                ov_sig[i] = pw
        if to_freeze:
            self._freeze_many(to_freeze, t)

        self.engine.schedule(t + n.duration, EventKind.FRAME_END, j, n)

    def on_frame_end(self, t: int, node: int, n: Notification) -> None:
        j = n.tx_node
        del self.active[j]
        states = self.states
        strict = self.strict
        busy = self.busy
        heard = self.heard_by(j, n.channels)
        if heard:
            prim_mw, prim_count, cca_mw = self.prim_mw, self.prim_count, self.cca_mw
            overheard, quiet = self.overheard, self.quiet_since
            freed = []
            for i, pw, _ in heard:
                cnt = prim_count[i] - 1
                prim_count[i] = cnt
                total = prim_mw[i] - pw if cnt else 0.0
                prim_mw[i] = total
                if overheard[i] is n:
                    overheard[i] = None
                    self.nav_set(i, t + n.nav_reservation, t)
                if busy[i] and total < cca_mw[i]:
                    busy[i] = False
                    quiet[i] = t
                    freed.append(i)
            if freed:
                SENSING = Mode.SENSING
                if strict:
                    for i in freed:
                        before = states[i].mode
                        if before is SENSING:
                            self._resume(i, t)
                        self._note(i, before, MacInput.CHANNEL_FREE)
                else:
                    self._resume_many([i for i in freed if states[i].mode is SENSING], t)

        # transmitter side; the response timeout is armed below once we know
        # whether an answer is on its way
        st_j = states[j]
        before_j = st_j.mode
        if t > self.quiet_since[j] and not busy[j]:
            self.quiet_since[j] = t
        kind = n.frame_kind
        waits = kind is not FrameKind.BACK and kind is not FrameKind.ACK
        if waits:
            self._set_mode(j, WAIT_AFTER[kind], t, "awaiting response")
            st_j.timeout_at = t + self.T_resp
            st_j.timeout_from = n.rx_target
        else:
            self._set_mode(j, Mode.SENSING, t, "response sent")
        if strict:
            self._note(j, before_j, MacInput.OWN_FRAME_END)

        # receiver side
        r = n.rx_target
        st_r = states[r]
        if st_r.current_rx is not n:
            if waits:
                self._arm_timeout(j)
            return
        before_r = st_r.mode
        st_r.current_rx = None
        ok = n.rx_ok
        if not ok and waits:
            self._arm_timeout(j)
        if kind is FrameKind.RTS:
            if ok:
                self._respond(r, n, FrameKind.CTS, self.T_cts,
                              n.nav_reservation - self.T_sifs - self.T_cts, 0, t)
            else:
                self._set_mode(r, Mode.SENSING, t, "rts lost")
        elif kind is FrameKind.CTS:
            ex = self.exchange[r]
            if ok:
                data = Notification(r, ex.dest, FrameKind.DATA, ex.channels, self.tx_power[r],
                                    ex.t_data, nav_reservation=self.T_sifs + self.T_back,
                                    mcs=ex.mcs, n_agg=ex.n_agg)
                self._set_mode(r, Mode.TRANSMIT, t, "cts received")
                self.engine.schedule(t + self.T_sifs, EventKind.FRAME_START, r, data)
            else:
                self._exchange_failed(r, t, collision=True)
        elif kind is FrameKind.DATA:
            if ok:
                self._respond(r, n, FrameKind.BACK, self.T_back, 0, 0, t)
            else:
                self._set_mode(r, Mode.SENSING, t, "data lost")
        else:
            if ok:
                self._exchange_succeeded(r, t)
            else:
                self._exchange_failed(r, t, collision=False)
        if strict:
            self._note(r, before_r, MacInput.ADDRESSED_FRAME_END)

    def _arm_timeout(self, i: int) -> None:
        st = self.states[i]
        st.pending_timeout = self.engine.schedule(st.timeout_at, EventKind.TIMEOUT_EXPIRY,
                                                  i, AWAITED[st.mode])
        st.timeout_at = None

    def on_timeout(self, t: int, i: int, awaited: FrameKind) -> None:
        st = self.states[i]
        before = st.mode
        st.pending_timeout = None
        st.timeout_from = -1
        if AWAITED.get(before) is not awaited:
            raise ContractViolation(f"{awaited.value} timeout at {self.codes[i]} "
                                    f"in {before.value}")
        if before is Mode.WAIT_DATA:
            self._set_mode(i, Mode.SENSING, t, "data timeout")
        else:
            self._exchange_failed(i, t, collision=before is Mode.WAIT_CTS)
        if self.strict:
            self._note(i, before, MacInput.TIMEOUT)

    def _exchange_failed(self, i: int, t: int, collision: bool) -> None:
        p = self.params
        st = self.states[i]
        code = self.wlans[self.wlan_of[i]].code
        if collision:
            self.acc[code].failed_attempts += 1
            self.collision_failures[i] += 1
        else:
            self.data_failures[i] += 1
        if p.cw_adaptation:
            st.cw_current = next_cw(st.cw_current, p.cw, p.cw_stages, success=False)
        self.exchange.pop(i, None)
        st.backoff_remaining = None
        self._set_mode(i, Mode.SENSING, t, "exchange failed")
        if self.agent is not None:
            self.agent.on_exchange_end(self, i, False, t)
        self._resume(i, t)

    def _exchange_succeeded(self, i: int, t: int) -> None:
        p = self.params
        st = self.states[i]
        ex = self.exchange.pop(i)
        acc = self.acc[self.wlans[self.wlan_of[i]].code]
        gen_times = self.buffers[i].commit(ex.n_agg, t)
        bits = ex.n_agg * p.l_data
        acc.acked_bits += bits
        acc.delivered_mpdus += ex.n_agg
        acc.delay_sum += t * len(gen_times) - sum(gen_times)
        acc.per_sta_bits[self.codes[ex.dest]] += bits
        if p.cw_adaptation:
            st.cw_current = next_cw(st.cw_current, p.cw, p.cw_stages, success=True)
        st.backoff_remaining = None
        self._set_mode(i, Mode.SENSING, t, "block ack received")
        if self.agent is not None:
            self.agent.on_exchange_end(self, i, True, t)
        self._resume(i, t)

    # ------------------------------------------------------------ analysis

    def conservation(self) -> dict[str, tuple[int, int, int, int]]:
        """Per AP: (generated, delivered, dropped, buffered)."""
        return {self.codes[i]: (b.generated, b.delivered, b.dropped, len(b))
                for i, b in self.buffers.items()}

    def realized_contention(self) -> set[frozenset[str]]:
        """WLAN pairs where one AP's primary went busy because of the other's frames."""
        edges = set()
        for i in self.sensing:
            for w in self.busy_causes[i]:
                if w != self.wlan_of[i]:
                    edges.add(frozenset((self.wlans[self.wlan_of[i]].code, self.wlans[w].code)))
        return edges


def simulate(cfg: ScenarioConfig, sim_time: float, seed: int = 1, **kw) -> StatsReport:
    return Simulation(cfg, seed=seed, **kw).run(sim_time)
