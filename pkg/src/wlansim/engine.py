"""Future-event-set engine with a fixed tie-break order.

Time is kept as integer nanoseconds so that sums of microsecond-granular
durations compare exactly; two events at the same instant are ordered by
``(kind priority, origin node, insertion sequence)``.
"""
from __future__ import annotations

import hashlib
import heapq
import random
from enum import IntEnum
from typing import Any, NamedTuple

NS_PER_US = 1_000
NS_PER_S = 1_000_000_000


def us(value: float) -> int:
    """Microseconds to engine ticks."""
    return int(round(value * NS_PER_US))


def seconds(value: float) -> int:
    """Seconds to engine ticks."""
    return int(round(value * NS_PER_S))


class EventKind(IntEnum):
    # value doubles as the dispatch priority for simultaneous events
    FRAME_END = 0
    NAV_EXPIRY = 1
    BACKOFF_EXPIRY = 2
    TIMEOUT_EXPIRY = 3
    FRAME_START = 4
    TRAFFIC_ARRIVAL = 5
    SIM_END = 6


_PENDING, _FIRED, _CANCELLED, _GROUP = 0, 1, 2, 3


class Event(NamedTuple):
    fire_time: int
    kind: EventKind
    origin_node: int
    seq: int
    payload: Any = None

    def sort_key(self) -> tuple[int, int, int, int]:
        return (self.fire_time, int(self.kind), self.origin_node, self.seq)


# A handle is the live heap entry: [time, kind, node, seq, payload, status].
# schedule_batch pushes one group entry instead,
# [time, kind, node, seq, members, _GROUP, pos], whose key is copied from its
# first pending member; members are ordinary handles sorted by key.
EventHandle = list


class SchedulingError(RuntimeError):
    pass


class SimulationError(RuntimeError):
    """Raised when a dispatcher fails; carries the offending event."""

    def __init__(self, message: str, time: int, event: Event):
        super().__init__(f"{message} (t={time / NS_PER_US:.3f} us, event={event})")
        self.time = time
        self.event = event


class EventEngine:
    def __init__(self, trace: list[str] | None = None):
        self.now = 0
        self._heap: list[list] = []
        self._seq = 0
        self.dispatched = 0
        self.trace = trace

    def __len__(self) -> int:
        n = 0
        for e in self._heap:
            if e[5] == _PENDING:
                n += 1
            elif e[5] == _GROUP:
                n += sum(1 for m in e[4][e[6]:] if m[5] == _PENDING)
        return n

    def schedule(self, fire_time: int, kind: EventKind, node: int = -1,
                 payload: Any = None) -> EventHandle:
        if fire_time < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.name} at {fire_time} ns, clock is {self.now} ns")
        entry = [fire_time, kind, node, self._seq, payload, _PENDING]
        self._seq += 1
        heapq.heappush(self._heap, entry)
        return entry

    def schedule_batch(self, kind: EventKind, items) -> list[EventHandle]:
        """Schedule ``kind`` for each ``(fire_time, node)``; handles in input order.

        The batch occupies a single heap slot, so cancelling most of it (a
        channel going busy freezes every countdown at once) costs no heap work.
        """
        now = self.now
        seq = self._seq
        out = []
        for fire_time, node in items:
            if fire_time < now:
                raise SchedulingError(
                    f"cannot schedule {kind.name} at {fire_time} ns, clock is {now} ns")
            out.append([fire_time, kind, node, seq, None, _PENDING])
            seq += 1
        self._seq = seq
        if len(out) == 1:
            heapq.heappush(self._heap, out[0])
        elif out:
            members = sorted(out)
            head = members[0]
            heapq.heappush(self._heap, [head[0], kind, head[2], head[3], members, _GROUP, 0])
        return out

    def schedule_event(self, e: Event) -> EventHandle:
        return self.schedule(e.fire_time, e.kind, e.origin_node, e.payload)

    @staticmethod
    def cancel(handle: EventHandle | None) -> bool:
        if handle is None or handle[5] != _PENDING:
            return False
        handle[5] = _CANCELLED
        return True

    @staticmethod
    def is_pending(handle: EventHandle | None) -> bool:
        return handle is not None and handle[5] == _PENDING

    def run_until(self, t_end: int, dispatcher) -> int:
        """Dispatch events with ``fire_time <= t_end``; returns the final clock.

        ``dispatcher`` is either ``f(t, kind, node, payload)`` or a sequence
        of ``f(t, node, payload)`` handlers indexed by event kind. The clock
        is left at ``t_end`` once the horizon is reached or the queue drains.
        """
        if t_end < self.now:
            raise SchedulingError(f"t_end {t_end} is before clock {self.now}")
        table = None if callable(dispatcher) else dispatcher
        heap = self._heap
        pop, push = heapq.heappop, heapq.heappush
        trace = self.trace
        dispatched = 0
        try:
            while heap:
                entry = pop(heap)
                status = entry[5]
                if status:  # fired entries are never in the heap
                    if status == _CANCELLED:
                        continue
                    entry = self._group_head(entry)
                    if entry is None:
                        continue
                t = entry[0]
                if t > t_end:
                    push(heap, entry)
                    break
                entry[5] = _FIRED
                self.now = t
                dispatched += 1
                if trace is not None:
                    trace.append(f"{t / NS_PER_US:.3f},{entry[1].name.lower()},{entry[2]},"
                                 f"{_detail(entry[4])}")
                try:
                    if table is not None:
                        table[entry[1]](t, entry[2], entry[4])
                    else:
                        dispatcher(t, entry[1], entry[2], entry[4])
                except SimulationError:
                    raise
                except Exception as exc:
                    ev = Event(t, entry[1], entry[2], entry[3], entry[4])
                    raise SimulationError(f"{type(exc).__name__}: {exc}", t, ev) from exc
        finally:
            self.dispatched += dispatched
        self.now = t_end
        return self.now


    def _group_head(self, group: list) -> EventHandle | None:
        """Next pending member of a popped group, re-queueing the rest.

        Returns None when the head changed (the group went back under its new
        key) or when every member is gone. A returned member is no longer
        covered by the group, so it can be pushed back on its own.
        """
        members, pos = group[4], group[6]
        end = len(members)
        while pos < end and members[pos][5] != _PENDING:
            pos += 1
        if pos == end:
            return None
        head = members[pos]
        if head[3] != group[3]:
            group[0], group[2], group[3], group[6] = head[0], head[2], head[3], pos
            heapq.heappush(self._heap, group)
            return None
        pos += 1
        if pos < end:
            nxt = members[pos]
            group[0], group[2], group[3], group[6] = nxt[0], nxt[2], nxt[3], pos
            heapq.heappush(self._heap, group)
        return head


def _detail(payload: Any) -> str:
    if payload is None:
        return ""
    describe = getattr(payload, "describe", None)
    return describe() if describe else str(payload)


def derive_seed(master: int, stream: str | int) -> int:
    """64-bit child seed: first 8 bytes of sha256("<master>/<stream>")."""
    digest = hashlib.sha256(f"{master}/{stream}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class RandomStream:
    """Seeded draw source; one per node plus one scenario-level stream."""

    __slots__ = ("seed", "_rng")

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = random.Random(seed)

    @classmethod
    def child(cls, master: int, stream: str | int) -> "RandomStream":
        return cls(derive_seed(master, stream))

    def uniform_int(self, lo: int, hi: int) -> int:
        if lo > hi:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return self._rng.randint(lo, hi)

    def exponential(self, rate: float) -> float:
        if not rate > 0:
            raise ValueError(f"rate must be positive, got {rate}")
        return self._rng.expovariate(rate)

    def random(self) -> float:
        return self._rng.random()
