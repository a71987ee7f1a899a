"""PHY arithmetic: propagation, power sums, SINR, CCA, MCS and frame timing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

NEG_INF = float("-inf")

# (bits per subcarrier symbol, coding rate) per 11ax MCS index
MCS_LADDER: tuple[tuple[int, Fraction], ...] = (
    (1, Fraction(1, 2)),
    (2, Fraction(1, 2)),
    (2, Fraction(3, 4)),
    (4, Fraction(1, 2)),
    (4, Fraction(3, 4)),
    (6, Fraction(2, 3)),
    (6, Fraction(3, 4)),
    (6, Fraction(5, 6)),
    (8, Fraction(3, 4)),
    (8, Fraction(5, 6)),
    (10, Fraction(3, 4)),
    (10, Fraction(5, 6)),
)

# minimum 20 MHz receiver sensitivity per MCS, dBm
DEFAULT_SENSITIVITY_DBM = (-82.0, -79.0, -77.0, -74.0, -70.0, -66.0,
                           -65.0, -64.0, -59.0, -57.0, -54.0, -52.0)

VALID_WIDTHS = (1, 2, 4, 8)


@dataclass(frozen=True)
class PhyMacParams:
    # 802.11ax timing and frame sizes; durations in microseconds, lengths in bits
    fc_hz: float = 5e9
    channel_width_hz: float = 20e6
    gain_tx_db: float = 0.0
    gain_rx_db: float = 0.0
    noise_dbm: float = -95.0
    sigma_leg: int = 4
    sigma: int = 16
    n_sc: int = 234
    n_ss: int = 1
    t_empty: int = 9
    t_sifs: int = 16
    t_difs: int = 34
    t_pifs: int = 25
    t_phy_leg: int = 20
    t_he_su: int = 100
    t_ack: int = 28
    t_back: int = 32
    t_ppdu_max: int = 5484
    l_sl: int = 24
    l_data: int = 11728
    l_rts: int = 160
    l_cts: int = 112
    l_sf: int = 16
    l_mh: int = 320
    cw: int = 15
    # run-level knobs not fixed by the table
    n_agg: int = 1
    mcs: int | None = None  # None: pick per link from received power
    capture_threshold_db: float | None = None  # None: sensitivity(mcs) - noise
    cw_adaptation: bool = False
    cw_stages: int = 6
    # a countdown interrupted by a busy period loses one slot when it resumes
    # (the slot boundary at DIFS end), so each busy period counts as a slot
    busy_slot_decrement: bool = True
    buffer_capacity: int = 1000
    sensitivity_dbm: tuple[float, ...] = field(default=DEFAULT_SENSITIVITY_DBM)

    def __post_init__(self):
        for name in ("sigma_leg", "sigma", "t_empty", "t_sifs", "t_difs", "t_pifs",
                     "t_phy_leg", "t_he_su", "t_ack", "t_back", "t_ppdu_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("l_sl", "l_data", "l_rts", "l_cts", "l_sf", "l_mh", "n_sc",
                     "n_ss", "n_agg", "buffer_capacity"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"{name} must be a positive integer")
        if self.cw < 0:
            raise ValueError("cw must be non-negative")
        if self.mcs is not None and not 0 <= self.mcs < len(MCS_LADDER):
            raise ValueError(f"mcs {self.mcs} out of range")
        if len(self.sensitivity_dbm) != len(MCS_LADDER):
            raise ValueError("need one sensitivity per MCS index")

    def with_overrides(self, **kw) -> "PhyMacParams":
        return replace(self, **kw)

    @classmethod
    def field_types(cls) -> dict[str, str]:
        return {f.name: str(f.type) for f in fields(cls)}


class ChannelSet(NamedTuple):
    """Contiguous run of basic 20 MHz channels, ``first..last`` inclusive."""

    first: int
    last: int

    @property
    def width(self) -> int:
        return self.last - self.first + 1

    @property
    def mask(self) -> int:
        return ((1 << self.width) - 1) << self.first

    def __contains__(self, ch: object) -> bool:
        return isinstance(ch, int) and self.first <= ch <= self.last

    def channels(self) -> range:
        return range(self.first, self.last + 1)

    def overlaps(self, other: "ChannelSet") -> bool:
        return self.first <= other.last and other.first <= self.last

    def is_valid_bond(self, primary: int) -> bool:
        w = self.width
        return (w in VALID_WIDTHS and self.first % w == 0 and primary in self)


class FrameKind(Enum):
    RTS = "RTS"
    CTS = "CTS"
    DATA = "DATA"
    ACK = "ACK"
    BACK = "BACK"


@dataclass(slots=True, eq=False)
class Notification:
    """A frame on the air; durations in engine ticks (ns)."""

    tx_node: int
    rx_target: int
    frame_kind: FrameKind
    channels: ChannelSet
    tx_power: float
    duration: int
    nav_reservation: int = 0
    mcs: int = 0
    n_agg: int = 1
    start: int = 0
    rx_ok: bool = False  # target locked on and not yet corrupted

    @property
    def end(self) -> int:
        return self.start + self.duration

    def describe(self) -> str:
        return (f"{self.frame_kind.value} {self.tx_node}->{self.rx_target} "
                f"ch{self.channels.first}-{self.channels.last} mcs{self.mcs} agg{self.n_agg}")


@dataclass(frozen=True)
class LinkBudget:
    distance: float
    walls: int = 0
    floors: int = 0


class LinkInfeasible(ValueError):
    pass


class AggregationOverflow(ValueError):
    def __init__(self, n_agg: int, max_n_agg: int, duration_us: int):
        super().__init__(f"A-MPDU of {n_agg} lasts {duration_us} us; at most "
                         f"{max_n_agg} MPDUs fit in the maximum PPDU")
        self.n_agg = n_agg
        self.max_n_agg = max_n_agg
        self.duration_us = duration_us


def path_loss_db(lb: LinkBudget, p: PhyMacParams = PhyMacParams()) -> float:
    """802.11ax residential path loss."""
    d = lb.distance
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    f = lb.floors
    pl = 40.05 + 20 * math.log10(p.fc_hz / 2.4e9) + 20 * math.log10(min(d, 5.0))
    if d > 5:
        pl += 35 * math.log10(d / 5)
    if f > 0:
        pl += 18.3 * f ** ((f + 2) / (f + 1) - 0.46)
    return pl + 5 * lb.walls


def received_power_dbm(tx_power: float, pl: float,
                       p: PhyMacParams = PhyMacParams()) -> float:
    return tx_power + p.gain_tx_db + p.gain_rx_db - pl


def dbm_to_mw(dbm: float) -> float:
    return 0.0 if dbm == NEG_INF else 10 ** (dbm / 10)


def mw_to_dbm(mw: float) -> float:
    return NEG_INF if mw <= 0 else 10 * math.log10(mw)


def aggregate_interference(active: Iterable[tuple[ChannelSet, float]],
                           target: ChannelSet) -> dict[int, float]:
    """Per-channel interference (dBm) from ``(channels, rx_power_dbm)`` pairs."""
    totals = {ch: 0.0 for ch in target.channels()}
    for chans, power in active:
        mw = dbm_to_mw(power)
        for ch in target.channels():
            if ch in chans:
                totals[ch] += mw
    return {ch: mw_to_dbm(v) for ch, v in totals.items()}


def sinr_db(signal: float, interference: float,
            p: PhyMacParams = PhyMacParams()) -> float:
    if not math.isfinite(signal):
        raise ValueError("signal power must be finite")
    if interference == NEG_INF:
        return signal - p.noise_dbm
    return signal - 10 * math.log10(10 ** (interference / 10) + 10 ** (p.noise_dbm / 10))


def width_shift_db(width: int) -> float:
    if width not in VALID_WIDTHS:
        raise ValueError(f"width {width} not in {VALID_WIDTHS}")
    return 3.0 * (width.bit_length() - 1)


def sensitivity_dbm(mcs: int, width: int = 1, p: PhyMacParams = PhyMacParams()) -> float:
    return p.sensitivity_dbm[mcs] + width_shift_db(width)


def select_mcs(rx_power: float, width: int = 1, p: PhyMacParams = PhyMacParams()) -> int:
    shift = width_shift_db(width)
    best = -1
    for idx, s in enumerate(p.sensitivity_dbm):
        if s + shift <= rx_power:
            best = idx
    if best < 0:
        raise LinkInfeasible(f"received power {rx_power:.2f} dBm below MCS 0 "
                             f"sensitivity {p.sensitivity_dbm[0] + shift:.2f} dBm")
    return best


def capture_threshold_db(mcs: int, p: PhyMacParams = PhyMacParams()) -> float:
    """SINR a reception must keep to survive interference."""
    if p.capture_threshold_db is not None:
        return p.capture_threshold_db
    return p.sensitivity_dbm[mcs] - p.noise_dbm


def bits_per_symbol(mcs: int, width: int = 1, p: PhyMacParams = PhyMacParams()) -> int:
    if width not in VALID_WIDTHS:
        raise ValueError(f"width {width} not in {VALID_WIDTHS}")
    bits, rate = MCS_LADDER[mcs]
    value = p.n_sc * width * p.n_ss * bits * rate
    if value.denominator != 1:
        raise ValueError(f"non-integer symbol capacity {value}")
    return int(value)


class FrameDurations(NamedTuple):
    rts: int
    cts: int
    data: int


def rts_duration(p: PhyMacParams) -> int:
    return p.t_phy_leg + -(-(p.l_sf + p.l_rts) // p.l_sl) * p.sigma_leg


def cts_duration(p: PhyMacParams) -> int:
    return p.t_phy_leg + -(-(p.l_sf + p.l_cts) // p.l_sl) * p.sigma_leg


def data_duration_unchecked(p: PhyMacParams, n_agg: int, mcs: int, width: int = 1) -> int:
    bps = bits_per_symbol(mcs, width, p)
    return p.t_he_su + -(-(p.l_sf + p.l_mh + n_agg * p.l_data) // bps) * p.sigma


def max_feasible_n_agg(p: PhyMacParams, mcs: int, width: int = 1) -> int:
    """Largest A-MPDU size whose data PPDU fits in ``t_ppdu_max``."""
    symbols = (p.t_ppdu_max - p.t_he_su) // p.sigma
    capacity = symbols * bits_per_symbol(mcs, width, p) - p.l_sf - p.l_mh
    return max(0, capacity // p.l_data)


def frame_durations(p: PhyMacParams, n_agg: int, mcs: int, width: int = 1) -> FrameDurations:
    """RTS, CTS and data PPDU durations in microseconds."""
    if n_agg < 1:
        raise ValueError("n_agg must be >= 1")
    t_d = data_duration_unchecked(p, n_agg, mcs, width)
    if t_d > p.t_ppdu_max:
        raise AggregationOverflow(n_agg, max_feasible_n_agg(p, mcs, width), t_d)
    return FrameDurations(rts_duration(p), cts_duration(p), t_d)


def exchange_duration(p: PhyMacParams, n_agg: int, mcs: int, width: int = 1) -> int:
    """Airtime of RTS, CTS, DATA and Block ACK plus the three SIFS gaps (us)."""
    d = frame_durations(p, n_agg, mcs, width)
    return d.rts + 3 * p.t_sifs + d.cts + d.data + p.t_back


def cca_busy(per_channel_power: Sequence[float], cca_threshold: float) -> list[bool]:
    return [pw >= cca_threshold for pw in per_channel_power]
