"""Downlink traffic sources and the AP transmit buffer."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .engine import NS_PER_S, RandomStream
from .phy import PhyMacParams, max_feasible_n_agg


class TrafficKind(Enum):
    FULL_BUFFER = "full_buffer"
    POISSON = "poisson"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class TrafficModel:
    kind: TrafficKind = TrafficKind.FULL_BUFFER
    load: float = 0.0  # packets per second

    def __post_init__(self):
        if self.kind is not TrafficKind.FULL_BUFFER and not self.load > 0:
            raise ValueError(f"{self.kind.value} traffic needs a positive load")


def next_arrival(m: TrafficModel, s: RandomStream, now: int) -> int | None:
    """Tick of the next packet arrival, or None for full-buffer sources."""
    if m.kind is TrafficKind.FULL_BUFFER:
        return None
    if m.kind is TrafficKind.DETERMINISTIC:
        gap = 1.0 / m.load
    else:
        gap = s.exponential(m.load)
    # at least one tick so the clock always advances
    return now + max(1, round(gap * NS_PER_S))


class EmptyBuffer(RuntimeError):
    pass


class Buffer:
    """FIFO of MPDU generation times with drop-tail admission.

    Batches are peeked at transmission start and only removed by
    :meth:`commit` once the block ACK arrives, so a failed exchange
    retransmits the same MPDUs.
    """

    def __init__(self, capacity: int, mpdu_bits: int, full_buffer: bool = False):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.mpdu_bits = mpdu_bits
        self.full_buffer = full_buffer
        self._queue: deque[int] = deque()
        self.generated = 0
        self.dropped = 0
        self.delivered = 0
        if full_buffer:
            self.refill(0)

    def __len__(self) -> int:
        return len(self._queue)

    def push(self, t: int) -> bool:
        self.generated += 1
        if len(self._queue) >= self.capacity:
            self.dropped += 1
            return False
        self._queue.append(t)
        return True

    def refill(self, t: int) -> None:
        missing = self.capacity - len(self._queue)
        if missing > 0:
            self._queue.extend([t] * missing)
            self.generated += missing

    def peek(self, n: int) -> list[int]:
        return [self._queue[i] for i in range(min(n, len(self._queue)))]

    def commit(self, n: int, t: int) -> list[int]:
        """Remove the ``n`` head MPDUs; returns their generation times."""
        if n > len(self._queue):
            raise EmptyBuffer(f"cannot commit {n} of {len(self._queue)} MPDUs")
        out = [self._queue.popleft() for _ in range(n)]
        self.delivered += n
        if self.full_buffer:
            self.refill(t)
        return out


def dequeue_aggregate(b: Buffer, n_agg_max: int, mcs: int, width: int,
                      params: PhyMacParams, feasible: int | None = None) -> list[int]:
    """Head-of-line batch for the next A-MPDU (not removed; see ``Buffer.commit``).

    ``feasible`` is a precomputed PPDU limit for ``(mcs, width)``.
    """
    if len(b) == 0:
        raise EmptyBuffer("transmission started with an empty buffer")
    if feasible is None:
        feasible = max_feasible_n_agg(params, mcs, width)
    n = min(len(b), n_agg_max, feasible)
    if n < 1:
        raise ValueError(f"one MPDU does not fit a PPDU at MCS {mcs}, width {width}")
    return b.peek(n)
