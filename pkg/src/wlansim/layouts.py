"""Built-in deployments used by the validation runs and the density sweep.

Geometry is in metres. Per-layout CCA levels are chosen so that the sensing
relations between the three WLANs come out as intended with 20 dBm
transmitters under the residential path-loss model.
"""
from __future__ import annotations

import math
import random

from .mac import DcbPolicy
from .phy import PhyMacParams
from .scenario import NodeConfig, ScenarioConfig
from .traffic import TrafficKind

# capture margin used in the three-WLAN layouts; the MCS-derived default
# (36 dB at MCS 8) would make every concurrent pair of links fail
SPATIAL_CAPTURE_DB = 10.0

# margin no pair of concurrent frames can reach in the dense ring (own links
# run at ~62 dB SNR), so collisions are never resolved by capture
NO_CAPTURE_DB = 50.0


def _node(code, kind, wlan, x, y, cca=-82.0, tx=20.0, channels=(0, 0, 0),
          policy=DcbPolicy.OP, traffic=TrafficKind.FULL_BUFFER, load=0.0) -> NodeConfig:
    prim, lo, hi = channels
    return NodeConfig(code, kind, wlan, float(x), float(y), 0.0, prim, lo, hi, tx, cca,
                      traffic, load, policy)


def isolated(n_stas: int = 1, params: PhyMacParams | None = None) -> ScenarioConfig:
    """One AP with ``n_stas`` stations 2 m away."""
    nodes = [_node("AP_A", "AP", "A", 0, 0)]
    for k in range(n_stas):
        ang = 2 * math.pi * k / n_stas
        nodes.append(_node(f"STA_A{k + 1}", "STA", "A", 2 * math.cos(ang), 2 * math.sin(ang)))
    return ScenarioConfig(nodes, params or PhyMacParams())


def _no_capture(params):
    p = params or PhyMacParams()
    return p if p.capture_threshold_db is not None else p.with_overrides(
        capture_threshold_db=NO_CAPTURE_DB)


def three_wlans(variant: str, params: PhyMacParams | None = None) -> ScenarioConfig:
    """Three WLANs in a row: ``"2a"`` fully overlapping, ``"2b"`` flow
    starvation, ``"2c"`` potential overlap, ``"2d"`` no overlap."""
    base = params or PhyMacParams()
    if variant == "2a":
        # APs 2 m apart, STAs 2 m above their AP; everything within CCA range
        layout = [("A", 0, 0, 0, 2), ("B", 2, 0, 2, 2), ("C", 4, 0, 4, 2)]
        cca, p = -82.0, base
    elif variant == "2b":
        # APs 4 m apart; A/C stations on the outside, B's station 2 m above.
        # -45 dBm senses B at 4-6 m but not the 8-10 m between A and C
        layout = [("A", 0, 0, -2, 0), ("B", 4, 0, 4, 2), ("C", 8, 0, 10, 0)]
        cca, p = -45.0, base.with_overrides(capture_threshold_db=SPATIAL_CAPTURE_DB)
    elif variant == "2c":
        # APs 6 m apart, STAs 1 m out: every link keeps >= 13.7 dB SINR with
        # both neighbours on air. AP_B hears each neighbour at -43.2 dBm and
        # both at -40.2 dBm, so -42 dBm makes it defer only to the pair;
        # A and C (at -39 dBm) never defer
        layout = [("A", 0, 0, -1, 0, -39.0), ("B", 6, 0, 6, 1, -42.0),
                  ("C", 12, 0, 13, 0, -39.0)]
        cca, p = None, base.with_overrides(capture_threshold_db=SPATIAL_CAPTURE_DB)
    elif variant == "2d":
        layout = [("A", 0, 0, 0, 2), ("B", 10, 0, 10, 2), ("C", 20, 0, 20, 2)]
        cca, p = -45.0, base.with_overrides(capture_threshold_db=SPATIAL_CAPTURE_DB)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    nodes = []
    for wlan, ax, ay, sx, sy, *own_cca in layout:
        level = own_cca[0] if own_cca else cca
        nodes.append(_node(f"AP_{wlan}", "AP", wlan, ax, ay, level))
        nodes.append(_node(f"STA_{wlan}", "STA", wlan, sx, sy, level))
    return ScenarioConfig(nodes, p)


def fully_overlapping(n_wlans: int, params: PhyMacParams | None = None) -> ScenarioConfig:
    """``n_wlans`` co-located AP/STA pairs (deterministic, seedless).

    APs sit on a 0.5 m circle and each STA 2 m further out along the same
    ray, so every node hears every other well above CCA and any two
    concurrent frames destroy each other. Capture is disabled unless the
    caller sets a margin: otherwise the closest neighbours on the ring could
    lock onto one of two colliding RTS and set a NAV from it.
    """
    if n_wlans < 1:
        raise ValueError("need at least one WLAN")
    nodes = []
    width = len(str(n_wlans))
    for k in range(n_wlans):
        ang = 2 * math.pi * k / n_wlans
        c, s = math.cos(ang), math.sin(ang)
        code = f"W{k + 1:0{width}d}"
        r_ap = 0.5 if n_wlans > 1 else 0.0
        nodes.append(_node(f"AP_{code}", "AP", code, round(r_ap * c, 9), round(r_ap * s, 9)))
        nodes.append(_node(f"STA_{code}", "STA", code, round((r_ap + 2) * c, 9),
                           round((r_ap + 2) * s, 9)))
    return ScenarioConfig(nodes, _no_capture(params))


def random_deployment(n_wlans: int, seed: int, area: float = 30.0,
                      params: PhyMacParams | None = None) -> ScenarioConfig:
    """Randomly placed WLANs with mixed traffic, bonding policies and CCA levels.

    Meant for stress runs: hidden and exposed nodes, partial channel overlap
    and idle periods all occur.
    """
    rnd = random.Random(seed)
    nodes = []
    for k in range(n_wlans):
        code = f"R{k + 1}"
        ax, ay = rnd.uniform(0, area), rnd.uniform(0, area)
        width = rnd.choice((1, 2, 4, 8))
        first = rnd.randrange(0, 8 // width) * width
        prim = first + rnd.randrange(width)
        policy = rnd.choice(list(DcbPolicy))
        cca = rnd.choice((-82.0, -72.0, -62.0))
        tx = rnd.choice((14.0, 17.0, 20.0))
        kind = rnd.choice(list(TrafficKind))
        load = 0.0 if kind is TrafficKind.FULL_BUFFER else rnd.uniform(100.0, 3000.0)
        chans = (prim, first, first + width - 1)
        nodes.append(_node(f"AP_{code}", "AP", code, ax, ay, cca, tx, chans, policy, kind, load))
        for s in range(rnd.randint(1, 3)):
            ang, r = rnd.uniform(0, 2 * math.pi), rnd.uniform(1.0, 5.0)
            nodes.append(_node(f"STA_{code}_{s + 1}", "STA", code, ax + r * math.cos(ang),
                               ay + r * math.sin(ang), cca, tx, chans, policy, kind, load))
    p = params or PhyMacParams(n_agg=rnd.choice((1, 8, 64)))
    return ScenarioConfig(nodes, p)
