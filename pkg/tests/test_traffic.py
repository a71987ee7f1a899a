import pytest
from hypothesis import given, strategies as st

from wlansim.engine import NS_PER_S, RandomStream
from wlansim.phy import PhyMacParams
from wlansim.traffic import (Buffer, EmptyBuffer, TrafficKind, TrafficModel, dequeue_aggregate,
                             next_arrival)

P = PhyMacParams()


def test_arrivals():
    s = RandomStream(1)
    assert next_arrival(TrafficModel(), s, 0) is None
    assert next_arrival(TrafficModel(TrafficKind.DETERMINISTIC, 1000), s, 0) == NS_PER_S // 1000
    m = TrafficModel(TrafficKind.POISSON, 1000)
    t, n = 0, 10 ** 5
    for _ in range(n):
        t = next_arrival(m, s, t)
    assert abs(t / n / 1e6 - 1.0) < 0.01


def test_traffic_model_needs_load():
    with pytest.raises(ValueError):
        TrafficModel(TrafficKind.POISSON, 0)


def _filled(k):
    b = Buffer(1000, P.l_data)
    for t in range(k):
        b.push(t)
    return b


def test_batch_sizes():
    assert len(dequeue_aggregate(_filled(100), 64, 8, 1, P)) == 40
    assert len(dequeue_aggregate(_filled(3), 64, 8, 1, P)) == 3
    assert len(dequeue_aggregate(_filled(100), 1, 8, 1, P)) == 1
    with pytest.raises(EmptyBuffer):
        dequeue_aggregate(_filled(0), 1, 8, 1, P)


def test_batch_stays_until_commit():
    b = _filled(5)
    batch = dequeue_aggregate(b, 3, 8, 1, P)
    assert batch == [0, 1, 2] and len(b) == 5
    assert b.commit(3, 10) == [0, 1, 2]
    assert len(b) == 2 and b.delivered == 3
    with pytest.raises(EmptyBuffer):
        b.commit(3, 11)


def test_drop_tail():
    b = Buffer(2, P.l_data)
    assert b.push(0) and b.push(1)
    assert not b.push(2)
    assert b.dropped == 1 and b.peek(5) == [0, 1]


def test_full_buffer_never_empties():
    b = Buffer(10, P.l_data, full_buffer=True)
    for t in range(50):
        b.commit(min(len(b), 7), t)
        assert len(b) == 10


@given(st.integers(1, 20), st.lists(st.tuples(st.booleans(), st.integers(1, 8)), max_size=80))
def test_conservation(capacity, ops):
    b = Buffer(capacity, P.l_data)
    for t, (push, k) in enumerate(ops):
        if push:
            b.push(t)
        else:
            b.commit(min(k, len(b)), t)
        assert b.generated == b.delivered + b.dropped + len(b)
        assert len(b) <= capacity
