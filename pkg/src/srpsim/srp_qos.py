"""Metric-carrying route discovery: per-link measurements, the endpoint
consistency tolerance, route-metric aggregation, and the accuracy bounds.

Metric values travel on the wire as fixed-point scaled integers (micro
units), so equality checks on recomputed aggregates are exact and the
authenticator covers a bit-stable encoding.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from . import srp
from .simcore import edge_key

SCALE = 10 ** 6


def to_scaled(x: float) -> int:
    return round(x * SCALE)


def from_scaled(i: int) -> float:
    return i / SCALE


class GKind(str, Enum):
    """Route-metric aggregate: sum, max, min, or product (the product runs as
    a sum after a log transform, so its bounds are the additive ones in the
    log domain)."""

    ADD = "add"
    MAX = "max"
    MIN = "min"
    MUL = "mul"


def route_metric(kind: GKind, metrics: Sequence[float]) -> float:
    """Aggregate per-link metrics into the route metric."""
    if not metrics:
        raise ValueError("route metric over an empty metric list")
    if kind == GKind.ADD:
        return float(sum(metrics))
    if kind == GKind.MAX:
        return float(max(metrics))
    if kind == GKind.MIN:
        return float(min(metrics))
    if kind == GKind.MUL:
        if any(m <= 0 for m in metrics):
            raise ValueError("product route metric requires strictly positive metrics")
        return math.exp(sum(math.log(m) for m in metrics))
    raise ValueError(f"unknown aggregate {kind}")


def delta_good(kind: GKind, n: int, epsilon: float, delta_tilde: float) -> float:
    """Accuracy tolerance for a route of n links.

    Additive: n^2*eps + n*dtil.  Max and min: n*eps + dtil.  Product uses the
    additive bound, interpreted in the log domain.
    """
    if n < 1:
        raise ValueError("a route has at least one link")
    if epsilon < 0 or delta_tilde < 0:
        raise ValueError("tolerances must be nonnegative")
    if kind in (GKind.ADD, GKind.MUL):
        return n * n * epsilon + n * delta_tilde
    return n * epsilon + delta_tilde


def check_metric_consistency(m_own: float, m_reported: float, epsilon: float,
                             administrative: bool = False) -> bool:
    """Endpoint agreement test for one link's two measurements."""
    if administrative:
        return m_own == m_reported
    return abs(m_own - m_reported) < epsilon


@dataclass
class LinkMetricModel:
    """Ground-truth link values plus the per-node measurement behavior.

    Correct nodes see the actual value plus a deterministic, seeded offset
    bounded by delta_tilde.  A node listed in `biases` (an adversary that
    skews its apparatus) sees the actual value plus its bias on every
    incident link, for reporting and for its own consistency checks alike.
    """

    kind: GKind
    epsilon: float
    delta_tilde: float = 0.0
    administrative: bool = False
    actual: dict = field(default_factory=dict)   # edge_key -> float
    seed: int = 0
    biases: dict = field(default_factory=dict)   # node -> scaled-int bias

    def __post_init__(self):
        if self.epsilon <= 0 and not self.administrative:
            raise ValueError("epsilon must be > 0 outside administrative mode")
        if self.delta_tilde < 0:
            raise ValueError("delta_tilde must be >= 0")
        if self.administrative and self.delta_tilde != 0:
            raise ValueError("administrative metrics admit no measurement error")
        self.actual = {edge_key(*e): float(v) for e, v in self.actual.items()}
        if self.kind == GKind.MUL and any(v <= 0 for v in self.actual.values()):
            raise ValueError("product metrics must be strictly positive")

    def actual_scaled(self, edge) -> Optional[int]:
        v = self.actual.get(edge_key(*edge))
        return None if v is None else to_scaled(v)

    def _noise_scaled(self, node: str, edge) -> int:
        if self.administrative or self.delta_tilde == 0:
            return 0
        e = edge_key(*edge)
        h = hashlib.blake2b(f"noise|{self.seed}|{node}|{e[0]}|{e[1]}".encode(),
                            digest_size=8).digest()
        u = int.from_bytes(h, "big") / 2 ** 64  # uniform [0, 1)
        return round((2.0 * u - 1.0) * self.delta_tilde * SCALE)

    def measure_scaled(self, node: str, edge) -> Optional[int]:
        e = edge_key(*edge)
        if node not in e:
            raise ValueError(f"{node} is not incident to edge {e}")
        base = self.actual_scaled(e)
        if base is None:
            return None
        bias = self.biases.get(node)
        if bias is not None:
            return base + bias
        if self.kind == GKind.MUL:
            # Multiplicative noise keeps values positive and makes the
            # tolerance meaningful in the log domain.
            if self.delta_tilde == 0:
                return base
            h = hashlib.blake2b(f"noise|{self.seed}|{node}|{e[0]}|{e[1]}".encode(),
                                digest_size=8).digest()
            u = int.from_bytes(h, "big") / 2 ** 64
            return to_scaled(from_scaled(base) * math.exp((2.0 * u - 1.0) * self.delta_tilde))
        return base + self._noise_scaled(node, e)


def measure_metric(node: str, edge, model: LinkMetricModel) -> Optional[float]:
    """One node's measurement of an incident link, in metric units."""
    v = model.measure_scaled(node, edge)
    return None if v is None else from_scaled(v)


class QosRuntime:
    """Protocol-facing adapter: scaled-integer measurements, consistency
    checks, and prefix aggregation, bound to one scenario's metric model."""

    def __init__(self, model: LinkMetricModel):
        self.model = model
        self.kind = model.kind
        self.epsilon_scaled = to_scaled(model.epsilon)
        self.delta_scaled = to_scaled(model.delta_tilde)

    def measure_scaled(self, node: str, edge) -> Optional[int]:
        return self.model.measure_scaled(node, edge)

    def consistent(self, own: Optional[int], reported: Optional[int]) -> bool:
        if own is None or reported is None:
            return False
        if self.model.administrative:
            return own == reported
        if self.kind == GKind.MUL:
            if own <= 0 or reported <= 0:
                return False
            return abs(math.log(from_scaled(own)) - math.log(from_scaled(reported))) \
                < self.model.epsilon
        return abs(own - reported) < self.epsilon_scaled

    def aggregate_scaled(self, metrics_scaled: Sequence[int]) -> int:
        if not metrics_scaled:
            raise ValueError("aggregate over an empty metric list")
        if self.kind == GKind.ADD:
            return sum(metrics_scaled)
        if self.kind == GKind.MAX:
            return max(metrics_scaled)
        if self.kind == GKind.MIN:
            return min(metrics_scaled)
        prod = 1.0
        for m in metrics_scaled:
            prod *= from_scaled(m)
        return to_scaled(prod)


def process_rreq_augmented(state, rreq, transmitter, now, qos: QosRuntime):
    """Metric-carrying request processing at a non-source node."""
    if rreq.dst == state.self_id:
        return srp.process_rreq_destination(state, rreq, transmitter, now, qos)
    return srp.process_rreq_intermediate(state, rreq, transmitter, now, qos)


def process_rrep_augmented(state, rrep, forwarder, now, cfg, qos: QosRuntime):
    """Metric-carrying reply processing (adds the endpoint tolerance check and
    the stored-prefix equality check to the basic reply rules)."""
    return srp.process_rrep(state, rrep, forwarder, now, cfg, qos)
