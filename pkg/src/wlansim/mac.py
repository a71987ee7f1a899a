"""MAC state, backoff and channel-bonding rules.

The event handlers that drive these states live in :mod:`wlansim.network`;
this module holds the per-node record and the pure decision functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .engine import EventHandle, RandomStream
from .phy import ChannelSet, FrameKind, Notification, VALID_WIDTHS


class Mode(Enum):
    SENSING = "SENSING"
    TRANSMIT = "TRANSMIT"
    RECEIVE = "RECEIVE"
    WAIT_CTS = "WAIT_CTS"
    WAIT_DATA = "WAIT_DATA"
    WAIT_ACK = "WAIT_ACK"
    NAV = "NAV"


WAIT_MODES = frozenset({Mode.WAIT_CTS, Mode.WAIT_DATA, Mode.WAIT_ACK})

# frame each wait state is expecting
AWAITED = {Mode.WAIT_CTS: FrameKind.CTS, Mode.WAIT_DATA: FrameKind.DATA,
           Mode.WAIT_ACK: FrameKind.BACK}

# wait state entered after sending each frame that expects an answer
WAIT_AFTER = {FrameKind.RTS: Mode.WAIT_CTS, FrameKind.CTS: Mode.WAIT_DATA,
              FrameKind.DATA: Mode.WAIT_ACK}


class DcbPolicy(Enum):
    OP = "OP"    # only primary
    SCB = "SCB"  # static: whole allocation or nothing
    AM = "AM"    # always-max free bond
    PU = "PU"    # uniform over free bonds


class ContractViolation(RuntimeError):
    """A MAC precondition was broken; indicates an engine or handler bug."""


@dataclass(slots=True)
class NodeState:
    mode: Mode = Mode.SENSING
    backoff_remaining: int | None = None  # ticks left in the countdown
    backoff_frozen: bool = False
    countdown_start: int = 0  # tick the current countdown (re)started
    nav_until: int = 0
    current_rx: Notification | None = None
    pending_timeout: EventHandle | None = None
    timeout_at: int | None = None  # deadline of a wait whose timer is not armed yet
    timeout_from: int = -1  # node expected to answer
    backoff_handle: EventHandle | None = None
    nav_handle: EventHandle | None = None
    cw_current: int = 15
    retries: int = 0
    slot_credit: bool = False  # a busy period interrupted the running countdown

    def backoff_slots(self, slot: int) -> float:
        """Remaining backoff in (possibly fractional) slots."""
        return 0.0 if self.backoff_remaining is None else self.backoff_remaining / slot


@dataclass
class WlanDescriptor:
    wlan_id: int
    code: str
    ap: int
    stas: list[int]
    allocated: ChannelSet
    primary: int
    dcb_policy: DcbPolicy = DcbPolicy.OP

    def __post_init__(self):
        if not self.stas:
            raise ValueError(f"WLAN {self.code} has no STA")
        if self.primary not in self.allocated:
            raise ValueError(f"WLAN {self.code}: primary {self.primary} outside "
                             f"allocation {self.allocated}")


def draw_backoff(s: RandomStream, cw: int) -> int:
    if cw < 0:
        raise ValueError("cw must be non-negative")
    return s.uniform_int(0, cw)


def next_cw(cw: int, base_cw: int, stages: int, success: bool) -> int:
    """Binary-exponential window update; reset on success."""
    if success:
        return base_cw
    return min(2 * (cw + 1) - 1, (base_cw + 1) * 2 ** stages - 1)


def valid_bonds(allocated: ChannelSet, primary: int) -> list[ChannelSet]:
    """Aligned power-of-two bonds inside ``allocated`` that contain ``primary``."""
    out = []
    for w in VALID_WIDTHS:
        first = primary - primary % w
        cs = ChannelSet(first, first + w - 1)
        if cs.first >= allocated.first and cs.last <= allocated.last:
            out.append(cs)
    return out


def dcb_select_channels(policy: DcbPolicy, free: set[int] | frozenset[int],
                        allocated: ChannelSet, primary: int,
                        rng: RandomStream | None = None) -> ChannelSet | None:
    """Channels to transmit on at backoff expiry, or None to skip the attempt."""
    if primary not in free:
        raise ContractViolation("backoff expired with the primary channel busy")
    if policy is DcbPolicy.OP:
        return ChannelSet(primary, primary)
    if policy is DcbPolicy.SCB:
        return allocated if all(c in free for c in allocated.channels()) else None
    candidates = [cs for cs in valid_bonds(allocated, primary)
                  if all(c in free for c in cs.channels())]
    if policy is DcbPolicy.AM:
        return candidates[-1]
    if rng is None:
        raise ValueError("PU policy needs a random stream")
    return candidates[rng.uniform_int(0, len(candidates) - 1)]


def nav_update(n: NodeState, reservation_until: int, now: int) -> bool:
    """Extend the NAV timer; returns True when it moved forward."""
    if reservation_until <= n.nav_until:
        return False
    n.nav_until = reservation_until
    if n.mode is Mode.SENSING and reservation_until > now:
        n.mode = Mode.NAV
    return True


def response_timeout_us(params) -> int:
    """Time after our frame ends within which the response must begin.

    Mirrors the PHY-RXSTART rule: a SIFS plus one slot.
    """
    return params.t_sifs + params.t_empty


class MacInput(Enum):
    BACKOFF_EXPIRY = "backoff_expiry"
    TIMEOUT = "timeout"
    NAV_EXPIRY = "nav_expiry"
    TRAFFIC_ARRIVAL = "traffic_arrival"
    OWN_FRAME_START = "own_frame_start"
    OWN_FRAME_END = "own_frame_end"
    ADDRESSED_FRAME_START = "addressed_frame_start"
    ADDRESSED_FRAME_END = "addressed_frame_end"
    CHANNEL_BUSY = "channel_busy"
    CHANNEL_FREE = "channel_free"
    OVERHEARD_RESERVATION = "overheard_reservation"


def _t(*modes: Mode) -> frozenset[Mode]:
    return frozenset(modes)


_S, _T, _R, _N = Mode.SENSING, Mode.TRANSMIT, Mode.RECEIVE, Mode.NAV
_WC, _WD, _WA = Mode.WAIT_CTS, Mode.WAIT_DATA, Mode.WAIT_ACK
_I = MacInput

# (mode before, input) -> modes the node may be in afterwards.
# Pairs missing from the table are undefined and indicate a handler bug.
TRANSITIONS: dict[tuple[Mode, MacInput], frozenset[Mode]] = {}


def _fill():
    passive = (_I.CHANNEL_BUSY, _I.CHANNEL_FREE, _I.TRAFFIC_ARRIVAL, _I.NAV_EXPIRY)
    for mode in Mode:
        for inp in passive:
            TRANSITIONS[(mode, inp)] = _t(mode)
        # a frame addressed to a node that cannot take it leaves it unchanged
        TRANSITIONS[(mode, _I.ADDRESSED_FRAME_START)] = _t(mode)
    TRANSITIONS[(_S, _I.ADDRESSED_FRAME_START)] = _t(_S, _R)
    TRANSITIONS[(_N, _I.NAV_EXPIRY)] = _t(_S, _N)
    TRANSITIONS[(_S, _I.BACKOFF_EXPIRY)] = _t(_T, _S)
    TRANSITIONS[(_S, _I.OVERHEARD_RESERVATION)] = _t(_S, _N)
    TRANSITIONS[(_N, _I.OVERHEARD_RESERVATION)] = _t(_N)
    TRANSITIONS[(_T, _I.OWN_FRAME_START)] = _t(_T)
    TRANSITIONS[(_T, _I.OWN_FRAME_END)] = _t(_WC, _WD, _WA, _S, _N)
    TRANSITIONS[(_R, _I.ADDRESSED_FRAME_END)] = _t(_T, _S)
    TRANSITIONS[(_WC, _I.ADDRESSED_FRAME_END)] = _t(_T, _S, _N)
    TRANSITIONS[(_WD, _I.ADDRESSED_FRAME_END)] = _t(_T, _S)
    TRANSITIONS[(_WA, _I.ADDRESSED_FRAME_END)] = _t(_S, _N)
    TRANSITIONS[(_WC, _I.TIMEOUT)] = _t(_S, _N)
    TRANSITIONS[(_WD, _I.TIMEOUT)] = _t(_S)
    TRANSITIONS[(_WA, _I.TIMEOUT)] = _t(_S, _N)


_fill()


class UndefinedTransition(ContractViolation):
    pass


def check_transition(before: Mode, inp: MacInput, after: Mode) -> None:
    allowed = TRANSITIONS.get((before, inp))
    if allowed is None or after not in allowed:
        raise UndefinedTransition(f"{before.value} --{inp.value}--> {after.value}")
