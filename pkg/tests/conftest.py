import pytest

from srpsim import KeyTable, NodeState, SimConfig


@pytest.fixture
def cfg():
    return SimConfig(tau=1.0, tx_time=1.0, end_time=100.0, seed=1,
                     reply_wait_min=8.0, reply_wait_max=64.0)


def make_table(*pairs):
    table = KeyTable()
    for a, b in pairs:
        table.grant(a, b)
    return table


def make_state(node, table=None):
    table = table or make_table(("S", "T"))
    return NodeState(self_id=node, keys=table.ring(node))


@pytest.fixture
def st_table():
    return make_table(("S", "T"))
