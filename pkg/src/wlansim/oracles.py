"""Analytical throughput models used to cross-check the simulator.

* Bianchi's saturated-DCF fixed point for fully overlapping networks.
* A continuous-time Markov network (CTMN) over sets of simultaneously
  active WLANs, for spatially distributed layouts.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .phy import (LinkBudget, PhyMacParams, dbm_to_mw, exchange_duration, frame_durations,
                  mw_to_dbm, path_loss_db, received_power_dbm, select_mcs)
from .scenario import ScenarioConfig

MAX_CTMN_WLANS = 20


class ConvergenceError(RuntimeError):
    pass


# --------------------------------------------------------------------- Bianchi


def bianchi_fixed_point(n: int, cw: int, stages: int | None = None,
                        tol: float = 1e-12, max_iter: int = 10_000) -> tuple[float, float]:
    """Per-slot attempt probability ``tau`` and conditional collision probability ``p``.

    The backoff is uniform on ``[0, cw]`` so the window holds ``W = cw + 1``
    values. Without ``stages`` the window is fixed and the solution is
    closed-form; with ``stages = m`` the window doubles on every failure up
    to ``2^m W`` and the pair is found by damped iteration.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    W = cw + 1
    if not stages:
        tau = 2.0 / (W + 1)
        return tau, 1.0 - (1.0 - tau) ** (n - 1)

    def tau_of(p: float) -> float:
        # sum_{i=0}^{m-1} (2p)^i written without the 1/(1-2p) pole
        geo = sum((2 * p) ** i for i in range(stages))
        return 2.0 / (1 + W + p * W * geo)

    p = 0.0
    for _ in range(max_iter):
        tau = tau_of(p)
        p_new = 1.0 - (1.0 - tau) ** (n - 1)
        residual = abs(p_new - p)
        p = 0.5 * p + 0.5 * p_new
        if residual < tol:
            tau = tau_of(p)
            return tau, 1.0 - (1.0 - tau) ** (n - 1)
    raise ConvergenceError(f"no fixed point after {max_iter} iterations (n={n})")


@dataclass(frozen=True)
class BianchiResult:
    tau: float
    p: float
    per_wlan_throughput: float  # bits/s
    aggregate_throughput: float
    collision_prob: float


def bianchi_slot_times(params: PhyMacParams, mcs: int, n_agg: int,
                       width: int = 1) -> tuple[float, float]:
    """Busy-period lengths (s) after a success and after an RTS collision.

    Both end once DIFS has elapsed; the first backoff slot is counted with
    the idle slots, matching a countdown that may expire right at DIFS end.
    """
    d = frame_durations(params, n_agg, mcs, width)
    t_s = exchange_duration(params, n_agg, mcs, width) + params.t_difs
    t_c = d.rts + params.t_difs
    return t_s * 1e-6, t_c * 1e-6


def bianchi_throughput(n: int, params: PhyMacParams, mcs: int, n_agg: int,
                       width: int = 1, stages: int | None = None) -> BianchiResult:
    tau, p = bianchi_fixed_point(n, params.cw, stages)
    t_s, t_c = bianchi_slot_times(params, mcs, n_agg, width)
    slot = params.t_empty * 1e-6
    p_tr = 1.0 - (1.0 - tau) ** n
    p_s = n * tau * (1.0 - tau) ** (n - 1) / p_tr
    payload = n_agg * params.l_data
    mean_slot = (1 - p_tr) * slot + p_tr * p_s * t_s + p_tr * (1 - p_s) * t_c
    total = p_s * p_tr * payload / mean_slot
    return BianchiResult(tau, p, total / n, total, p)


def isolated_throughput(params: PhyMacParams, mcs: int, n_agg: int, width: int = 1) -> float:
    """Saturated single-WLAN throughput from the deterministic renewal cycle (bits/s)."""
    cycle = (params.cw / 2 * params.t_empty + params.t_difs
             + exchange_duration(params, n_agg, mcs, width))
    return n_agg * params.l_data / (cycle * 1e-6)


# ------------------------------------------------------------------------ CTMN


@dataclass
class ContentionGraph:
    """Symmetric, irreflexive "cannot transmit together" relation between WLANs."""

    wlans: list[str]
    edges: set[frozenset[int]] = field(default_factory=set)

    def __post_init__(self):
        for e in self.edges:
            if len(e) != 2:
                raise ValueError(f"self-loop or malformed edge {set(e)}")
            if not all(0 <= v < len(self.wlans) for v in e):
                raise ValueError(f"edge {set(e)} out of range")

    @classmethod
    def from_pairs(cls, wlans: Sequence[str], pairs: Iterable[tuple[str, str]]) -> "ContentionGraph":
        idx = {w: i for i, w in enumerate(wlans)}
        return cls(list(wlans), {frozenset((idx[a], idx[b])) for a, b in pairs})

    def neighbours(self, v: int) -> set[int]:
        return {u for e in self.edges if v in e for u in e if u != v}

    def is_independent(self, state: Iterable[int]) -> bool:
        s = set(state)
        return not any(e <= s for e in self.edges)


def _canonical(states: Iterable[tuple[int, ...]]) -> list[tuple[int, ...]]:
    return sorted(states, key=lambda s: (len(s), s))


def ctmn_enumerate(g: ContentionGraph) -> list[tuple[int, ...]]:
    """All independent sets of ``g`` (including the empty set), by size then lexicographically."""
    n = len(g.wlans)
    if n > MAX_CTMN_WLANS:
        raise ValueError(f"CTMN limited to {MAX_CTMN_WLANS} WLANs, got {n}")
    nbr = [0] * n
    for e in g.edges:
        a, b = tuple(e)
        nbr[a] |= 1 << b
        nbr[b] |= 1 << a
    out = []

    def grow(start: int, chosen: list[int], blocked: int) -> None:
        out.append(tuple(chosen))
        for v in range(start, n):
            if not blocked >> v & 1:
                chosen.append(v)
                grow(v + 1, chosen, blocked | nbr[v] | 1 << v)
                chosen.pop()

    grow(0, [], 0)
    return _canonical(out)


@dataclass
class CtmnModel:
    wlans: list[str]
    states: list[tuple[int, ...]]
    lam: list[float]  # activation rate per WLAN (1/s)
    mu: list[float]  # departure rate per WLAN (1/s)
    Q: np.ndarray
    pi: np.ndarray | None = None

    @classmethod
    def build(cls, wlans: Sequence[str], lam: Sequence[float], mu: Sequence[float],
              can_activate: Callable[[int, frozenset[int]], bool]) -> "CtmnModel":
        """States reachable from the empty set when ``w`` may join ``s`` iff
        ``can_activate(w, s)``."""
        n = len(wlans)
        if n > MAX_CTMN_WLANS:
            raise ValueError(f"CTMN limited to {MAX_CTMN_WLANS} WLANs, got {n}")
        if any(x <= 0 for x in list(lam) + list(mu)):
            raise ValueError("rates must be positive")
        seen = {frozenset()}
        frontier = [frozenset()]
        while frontier:
            s = frontier.pop()
            for w in range(n):
                if w not in s and can_activate(w, s):
                    t = s | {w}
                    if t not in seen:
                        seen.add(t)
                        frontier.append(t)
        states = _canonical(tuple(sorted(s)) for s in seen)
        index = {frozenset(s): k for k, s in enumerate(states)}
        Q = np.zeros((len(states), len(states)))
        for k, s in enumerate(states):
            fs = frozenset(s)
            for w in range(n):
                if w in fs:
                    Q[k, index[fs - {w}]] += mu[w]
                elif can_activate(w, fs):
                    Q[k, index[fs | {w}]] += lam[w]
            Q[k, k] = -Q[k].sum()
        return cls(list(wlans), states, list(lam), list(mu), Q)

    @classmethod
    def from_graph(cls, g: ContentionGraph, lam: Sequence[float],
                   mu: Sequence[float]) -> "CtmnModel":
        nbr = [g.neighbours(v) for v in range(len(g.wlans))]
        return cls.build(g.wlans, lam, mu, lambda w, s: not (nbr[w] & s))

    def active_probability(self) -> list[float]:
        pi = self.pi if self.pi is not None else ctmn_stationary(self)
        out = [0.0] * len(self.wlans)
        for prob, s in zip(pi, self.states):
            for w in s:
                out[w] += prob
        return out


class SingularChain(RuntimeError):
    pass


def ctmn_stationary(model: CtmnModel, tol: float = 1e-10) -> np.ndarray:
    """Solve ``pi Q = 0`` with ``sum(pi) = 1`` (one balance row replaced)."""
    Q = model.Q
    k = Q.shape[0]
    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularChain(str(exc)) from exc
    residual = np.abs(pi @ Q).max() if k else 0.0
    scale = max(1.0, np.abs(Q).max())
    if residual > tol * scale or (pi < -1e-12).any():
        raise SingularChain(f"stationary solve residual {residual:.3g}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    model.pi = pi
    return pi


def ctmn_rates(params: PhyMacParams, mcs: int, n_agg: int, width: int = 1) -> tuple[float, float]:
    """Activation rate (mean backoff plus DIFS) and departure rate (one
    RTS/CTS/DATA/BACK exchange), both per second."""
    lam = 1.0 / ((params.cw / 2 * params.t_empty + params.t_difs) * 1e-6)
    mu = 1.0 / (exchange_duration(params, n_agg, mcs, width) * 1e-6)
    return lam, mu


def ctmn_throughput(model: CtmnModel, params: PhyMacParams, n_agg: int) -> list[float]:
    """Per-WLAN throughput (bits/s): active share times completion rate times payload."""
    share = model.active_probability()
    return [share[w] * model.mu[w] * n_agg * params.l_data for w in range(len(model.wlans))]


def ctmn_for_graph(g: ContentionGraph, params: PhyMacParams, mcs: int,
                   n_agg: int) -> tuple[CtmnModel, list[float]]:
    lam, mu = ctmn_rates(params, mcs, n_agg)
    n = len(g.wlans)
    model = CtmnModel.from_graph(g, [lam] * n, [mu] * n)
    ctmn_stationary(model)
    return model, ctmn_throughput(model, params, n_agg)


def brute_force_independent_sets(g: ContentionGraph) -> list[tuple[int, ...]]:
    n = len(g.wlans)
    subsets = (c for r in range(n + 1) for c in itertools.combinations(range(n), r))
    return _canonical(s for s in subsets if g.is_independent(s))


# ------------------------------------------------------- scenario-driven CTMN


def _rx_mw(cfg, a, b) -> float:
    walls, floors = cfg.obstacles_between(a.node_code, b.node_code)
    lb = LinkBudget(math.dist(a.position, b.position), walls, floors)
    return dbm_to_mw(received_power_dbm(a.tx_power_dbm, path_loss_db(lb, cfg.params), cfg.params))


def ap_sensing(cfg: ScenarioConfig) -> tuple[list[str], np.ndarray, np.ndarray]:
    """WLAN codes, ``rx[k, w]`` power (mW) of AP k at AP w, and each AP's CCA (mW).

    Only WLANs whose primary channels coincide interact.
    """
    codes = cfg.wlan_codes
    aps = [cfg.ap_of(c) for c in codes]
    n = len(aps)
    rx = np.zeros((n, n))
    for k, a in enumerate(aps):
        for w, b in enumerate(aps):
            if k != w and a.primary_channel == b.primary_channel:
                rx[k, w] = _rx_mw(cfg, a, b)
    cca = np.array([dbm_to_mw(a.cca_dbm) for a in aps])
    return codes, rx, cca


def contention_graph(cfg: ScenarioConfig) -> ContentionGraph:
    """Pairwise graph: an edge where either AP alone pushes the other past CCA."""
    codes, rx, cca = ap_sensing(cfg)
    n = len(codes)
    edges = {frozenset((a, b)) for a in range(n) for b in range(a + 1, n)
             if rx[a, b] >= cca[b] or rx[b, a] >= cca[a]}
    return ContentionGraph(codes, edges)


def wlan_mcs(cfg: ScenarioConfig) -> list[int]:
    """MCS of each WLAN's downlink (the weakest of its STAs when adaptive)."""
    p = cfg.params
    out = []
    for code in cfg.wlan_codes:
        if p.mcs is not None:
            out.append(p.mcs)
            continue
        ap = cfg.ap_of(code)
        out.append(min(select_mcs(mw_to_dbm(_rx_mw(cfg, ap, s)), 1, p) for s in cfg.stas_of(code)))
    return out


def ctmn_for_scenario(cfg: ScenarioConfig, additive: bool = True
                      ) -> tuple[CtmnModel, dict[str, float]]:
    """CTMN of a single-channel deployment; returns the solved model and
    per-WLAN throughput (bits/s).

    With ``additive`` a WLAN may start only while the summed power of the
    active APs at its AP stays below CCA, otherwise the pairwise graph is used.
    """
    p = cfg.params
    codes, rx, cca = ap_sensing(cfg)
    mcs = wlan_mcs(cfg)
    rates = [ctmn_rates(p, m, p.n_agg) for m in mcs]
    lam = [r[0] for r in rates]
    mu = [r[1] for r in rates]
    if additive:
        def can(w: int, s: frozenset[int]) -> bool:
            return sum(rx[k, w] for k in s) < cca[w]
        model = CtmnModel.build(codes, lam, mu, can)
    else:
        model = CtmnModel.from_graph(contention_graph(cfg), lam, mu)
    ctmn_stationary(model)
    thr = ctmn_throughput(model, p, p.n_agg)
    return model, dict(zip(codes, thr))
