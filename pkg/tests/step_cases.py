"""Minimal counterexample messages for every numbered protocol check.

Each case builds the smallest state/message pair that makes exactly one rule
fire and records the rule id the discard must carry.  The acceptance suite
re-runs this table, so keep cases self-contained.
"""

from srpsim import (KeyTable, LinkMetricModel, NodeState, QosRuntime, Rrep,
                    Rreq, SimConfig, GKind, initiate_discovery, observe_relay,
                    rreq_verdict, rrep_verdict, to_scaled)

CFG = SimConfig(tau=1.0, tx_time=1.0, end_time=100.0, seed=1,
                reply_wait_min=8.0, reply_wait_max=64.0)


def _table():
    t = KeyTable()
    t.grant("S", "T")
    return t


def _state(node, table):
    return NodeState(self_id=node, keys=table.ring(node))


def _qos(epsilon=0.1, delta_tilde=0.0, actual=None):
    model = LinkMetricModel(kind=GKind.ADD, epsilon=epsilon,
                            delta_tilde=delta_tilde, actual=actual or {}, seed=1)
    return QosRuntime(model)


def _signed_rreq(table, node_list=(), metric_list=None, qid=1):
    auth = table.ring("S").mac("T", ("S", "T", qid))
    return Rreq("S", "T", qid, auth, tuple(node_list), metric_list)


def _source_state_with_discovery(table, qos=None):
    """A querying node that just issued qid=1 at t=1."""
    state = _state("S", table)
    initiate_discovery(state, "T", 1.0, CFG, qos)
    return state


def _signed_rrep(table, route, metric_list=None, qid=1):
    fields = ("S", "T", qid, tuple(route))
    if metric_list is not None:
        fields = fields + (tuple(metric_list),)
    auth = table.ring("T").mac("S", fields)
    return Rrep("S", "T", qid, tuple(route), auth, metric_list)


# --- request-side counterexamples ------------------------------------------

def case_2_2_1():
    table = _table()
    state = _state("m", table)
    state.seen.add(("S", 1))
    return rreq_verdict(state, _signed_rreq(table, ("a",)), "a", None), "2.2.1"


def case_2_2_2():
    table = _table()
    state = _state("m", table)
    return rreq_verdict(state, _signed_rreq(table, ("a", "b")), "c", None), "2.2.2"


def case_2_2_3():
    table = _table()
    state = _state("m", table)
    return rreq_verdict(state, _signed_rreq(table, ("a", "b", "a")), "a", None), "2.2.3"


def case_2_2_3_self_present():
    table = _table()
    state = _state("m", table)
    return rreq_verdict(state, _signed_rreq(table, ("m", "b")), "b", None), "2.2.3"


def case_2_2_4_a():
    table = _table()
    state = _state("m", table)
    rreq = _signed_rreq(table, ("a",), metric_list=(to_scaled(1.0), to_scaled(2.0)))
    return rreq_verdict(state, rreq, "a", _qos()), "2.2.4.a"


def case_2_3_1():
    table = _table()
    state = _state("T", table)
    state.seen.add(("S", 1))
    return rreq_verdict(state, _signed_rreq(table, ("a",)), "a", None), "2.3.1"


def case_2_3_2():
    table = _table()
    state = _state("T", table)
    return rreq_verdict(state, _signed_rreq(table, ("a",)), "b", None), "2.3.2"


def case_2_3_3():
    table = _table()
    state = _state("T", table)
    return rreq_verdict(state, _signed_rreq(table, ("a", "b", "a")), "a", None), "2.3.3"


def case_2_3_4_a():
    table = _table()
    state = _state("T", table)
    rreq = _signed_rreq(table, ("a",), metric_list=())
    return rreq_verdict(state, rreq, "a", _qos()), "2.3.4.a"


def case_2_3_4_auth():
    table = _table()
    state = _state("T", table)
    good = _signed_rreq(table, ("a",))
    bad = Rreq("S", "T", 1, good.auth ^ 1, good.node_list, None)
    return rreq_verdict(state, bad, "a", None), "2.3.4"


# --- reply-side counterexamples ---------------------------------------------

def case_4_1():
    table = _table()
    state = _state("m", table)
    rrep = _signed_rrep(table, ("b", "m", "a"))
    # m's successor along the route is b, but c forwards it
    return rrep_verdict(state, rrep, "c", None), "4.1"


def case_4_2():
    table = _table()
    state = _state("m", table)
    rrep = _signed_rrep(table, ("b", "m", "a"))
    # right forwarder, but b was never overheard relaying our query
    return rrep_verdict(state, rrep, "b", None), "4.2"


def case_4_3():
    table = _table()
    state = _state("m", table)
    state.fwd[("S", 1)] = {"b": None}
    rrep = _signed_rrep(table, ("b", "m", "a", "b"))
    return rrep_verdict(state, rrep, "b", None), "4.3"


def case_4_2_1():
    table = _table()
    qos = _qos(actual={("m", "T"): 1.0})
    state = _state("m", table)
    # T reports 2.0 for the shared link, our own reading is 1.0
    rrep = _signed_rrep(table, ("m", "a"),
                        metric_list=(to_scaled(2.0), to_scaled(1.0), to_scaled(1.0)))
    return rrep_verdict(state, rrep, "T", qos), "4.2.1"


def case_4_2_2():
    table = _table()
    qos = _qos(actual={("m", "T"): 1.0})
    state = _state("m", table)
    state.fwd[("S", 1)] = {"T": None}
    # our stored prefix covers the two links behind us and disagrees with
    # what the reply reports for them
    state.prefix_metric[("S", 1)] = to_scaled(2.0)
    rrep = _signed_rrep(
        table, ("m", "b", "a"),
        metric_list=(to_scaled(1.0), to_scaled(1.0), to_scaled(1.0), to_scaled(1.5)))
    return rrep_verdict(state, rrep, "T", qos), "4.2.2"


def case_4_5():
    table = _table()
    state = _source_state_with_discovery(table)
    observe_relay(state, _signed_rreq(table, ("a",)), "a", None)
    good = _signed_rrep(table, ("a",))
    bad = Rrep("S", "T", 1, good.route, good.auth ^ 1, None)
    return rrep_verdict(state, bad, "a", None), "4.5"


def case_4_5_stale_qid():
    # a reply for another query id fails the authenticator recomputed with
    # the current one
    table = _table()
    state = _source_state_with_discovery(table)
    observe_relay(state, _signed_rreq(table, ("a",)), "a", None)
    stale = _signed_rrep(table, ("a",), qid=7)
    return rrep_verdict(state, stale, "a", None), "4.5"


def case_5_2():
    table = _table()
    state = _state("S", table)  # no discovery under way
    rrep = _signed_rrep(table, ("a",))
    return rrep_verdict(state, rrep, "a", None), "5.2"


DISCARD_CASES = [
    case_2_2_1, case_2_2_2, case_2_2_3, case_2_2_3_self_present, case_2_2_4_a,
    case_2_3_1, case_2_3_2, case_2_3_3, case_2_3_4_a, case_2_3_4_auth,
    case_4_1, case_4_2, case_4_3, case_4_2_1, case_4_2_2,
    case_4_5, case_4_5_stale_qid, case_5_2,
]
