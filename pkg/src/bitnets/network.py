"""Exact semantics of feedforward DAG networks.

A network is a DAG whose non-source vertices carry an activation; every
edge carries a trainable (weight, bias) pair.  Inputs are vectors over
*all* vertices and inject additively: a source vertex returns its input
coordinate, every other vertex v computes

    f_v = act_v( x_v + sum over in-edges (u,v) of (w_uv * f_u + b_uv) )

All arithmetic is exact over rationals, every pass records bit-lengths,
and reverse-mode differentiation returns exact partial derivatives.
Evaluation order is the cached topological order (ties broken by vertex
id) so traces are bit-for-bit reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

from .product_identity import RationalPoly
from .rationals import DEFAULT_MAX_BITS, bit_extract, bit_length, check_bits

ROLE_SOURCE = "source"
ROLE_HIDDEN = "hidden"
ROLE_TARGET = "target"
ROLES = (ROLE_SOURCE, ROLE_HIDDEN, ROLE_TARGET)

LOSS_KINDS = ("square", "hinge", "bit01", "vector-equality")


class NetworkError(ValueError):
    """Structurally invalid network, parameters or dataset."""


class NonDifferentiableLoss(NetworkError):
    """Gradient requested for a loss with no derivative in the prediction."""


@dataclass(frozen=True)
class IdentityActivation:
    kind = "identity"

    def eval(self, z: Fraction) -> Fraction:
        return z

    def derivative(self, z: Fraction) -> Fraction:
        return Fraction(1)


@dataclass(frozen=True)
class PolyActivation:
    """Polynomial activation with rational coefficients."""

    poly: RationalPoly
    kind = "poly"

    def eval(self, z: Fraction) -> Fraction:
        return self.poly.evaluate(z)

    def derivative(self, z: Fraction) -> Fraction:
        return self._deriv.evaluate(z)

    @cached_property
    def _deriv(self) -> RationalPoly:
        return self.poly.derivative()


@dataclass(frozen=True)
class Vertex:
    id: str
    role: str
    activation: object | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise NetworkError(f"vertex {self.id}: unknown role {self.role!r}")
        if self.role == ROLE_SOURCE:
            if self.activation is not None:
                raise NetworkError(f"source {self.id} must not carry an activation")
        elif self.activation is None:
            raise NetworkError(f"vertex {self.id}: missing activation")


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str


class Network:
    """Immutable DAG; vertices and edges are normalized to id order."""

    def __init__(self, vertices: Sequence[Vertex], edges: Sequence[Edge]) -> None:
        by_id = {}
        for v in vertices:
            if v.id in by_id:
                raise NetworkError(f"duplicate vertex id {v.id!r}")
            by_id[v.id] = v
        self.vertices: tuple[Vertex, ...] = tuple(
            sorted(by_id.values(), key=lambda v: v.id)
        )
        self.vertex_map: dict[str, Vertex] = {v.id: v for v in self.vertices}

        edge_ids = set()
        for e in edges:
            if e.id in edge_ids:
                raise NetworkError(f"duplicate edge id {e.id!r}")
            edge_ids.add(e.id)
            for endpoint in (e.tail, e.head):
                if endpoint not in by_id:
                    raise NetworkError(
                        f"edge {e.id!r} references unknown vertex {endpoint!r}"
                    )
            if by_id[e.head].role == ROLE_SOURCE:
                raise NetworkError(f"edge {e.id!r} points into source {e.head!r}")
        self.edges: tuple[Edge, ...] = tuple(sorted(edges, key=lambda e: e.id))
        self.edge_map: dict[str, Edge] = {e.id: e for e in self.edges}

        self.in_edges: dict[str, tuple[Edge, ...]] = {v.id: () for v in self.vertices}
        grouped: dict[str, list[Edge]] = {v.id: [] for v in self.vertices}
        for e in self.edges:
            grouped[e.head].append(e)
        for vid, es in grouped.items():
            self.in_edges[vid] = tuple(es)

        self.topo_order: tuple[str, ...] = self._toposort()
        self.sources: tuple[str, ...] = tuple(
            v.id for v in self.vertices if v.role == ROLE_SOURCE
        )
        self.targets: tuple[str, ...] = tuple(
            v.id for v in self.vertices if v.role == ROLE_TARGET
        )

    def _toposort(self) -> tuple[str, ...]:
        pending = {v.id: len(self.in_edges[v.id]) for v in self.vertices}
        out: dict[str, list[str]] = {v.id: [] for v in self.vertices}
        for e in self.edges:
            out[e.tail].append(e.head)
        ready = sorted(vid for vid, deg in pending.items() if deg == 0)
        order: list[str] = []
        while ready:
            vid = ready.pop(0)
            order.append(vid)
            changed = False
            for succ in out[vid]:
                pending[succ] -= 1
                if pending[succ] == 0:
                    ready.append(succ)
                    changed = True
            if changed:
                ready.sort()
        if len(order) != len(self.vertices):
            raise NetworkError("network graph contains a cycle")
        return tuple(order)

    @property
    def single_target(self) -> str:
        if len(self.targets) != 1:
            raise NetworkError(f"expected one target vertex, have {self.targets}")
        return self.targets[0]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Network)
            and self.vertices == other.vertices
            and self.edges == other.edges
        )

    def __hash__(self) -> int:
        return hash((self.vertices, self.edges))


@dataclass(frozen=True)
class Theta:
    """Per-edge (weight, bias) assignment, keyed by edge id."""

    params: Mapping[str, tuple[Fraction, Fraction]]

    def weight(self, edge_id: str) -> Fraction:
        return self.params[edge_id][0]

    def bias(self, edge_id: str) -> Fraction:
        return self.params[edge_id][1]

    def with_param(
        self,
        edge_id: str,
        weight: Fraction | None = None,
        bias: Fraction | None = None,
    ) -> "Theta":
        w, b = self.params[edge_id]
        updated = dict(self.params)
        updated[edge_id] = (
            w if weight is None else Fraction(weight),
            b if bias is None else Fraction(bias),
        )
        return Theta(updated)

    def check_against(self, net: Network) -> None:
        missing = [e.id for e in net.edges if e.id not in self.params]
        extra = sorted(set(self.params) - set(net.edge_map))
        if missing or extra:
            raise NetworkError(
                f"theta does not match network edges (missing {missing}, extra {extra})"
            )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Theta) and dict(self.params) == dict(other.params)

    @classmethod
    def from_node_biases(
        cls,
        net: Network,
        weights: Mapping[str, Fraction],
        node_biases: Mapping[str, Fraction] | None = None,
    ) -> "Theta":
        """Build edge parameters from per-edge weights and per-node biases.

        Only bias sums per head vertex are observable, so a node bias is
        carried by that vertex's first incoming edge (id order) with
        zeros elsewhere.  Vertices with a bias but no incoming edge are
        rejected.
        """
        node_biases = dict(node_biases or {})
        params: dict[str, tuple[Fraction, Fraction]] = {}
        for e in net.edges:
            params[e.id] = (Fraction(weights[e.id]), Fraction(0))
        for vid, bias in node_biases.items():
            if vid not in net.vertex_map:
                raise NetworkError(f"unknown vertex {vid!r}")
            incoming = net.in_edges[vid]
            if not incoming:
                raise NetworkError(f"vertex {vid!r} has no incoming edge to carry a bias")
            eid = incoming[0].id
            w, _ = params[eid]
            params[eid] = (w, Fraction(bias))
        return cls(params)


@dataclass(frozen=True)
class Sample:
    """One dataset entry; ``count`` encodes replicated copies.

    ``label`` is a scalar for square/hinge main samples and a sparse
    vector (vertex id -> value, zeros omitted) for equality-checked
    samples.  ``flag`` 1 marks a main sample, 0 an auxiliary one.
    """

    x: Mapping[str, Fraction]
    label: Fraction | Mapping[str, Fraction]
    flag: int = 1
    count: int = 1
    note: str = ""


@dataclass(frozen=True)
class LossSpec:
    """Per-sample loss semantics.

    Auxiliary samples (flag 0) are always scored by exact equality of
    the full output vector against the label vector.  Main samples
    (flag 1) use ``kind``: ``square`` is (pred - y)^2 / 2, ``hinge`` is
    max(0, 1 - y*pred), ``bit01`` is the indicator that bit ``bit_index``
    of the target's value is not 1, and ``vector-equality`` scores main
    samples like auxiliary ones.  A negative ``bit_index`` queries a
    fractional binary position (scaled instances shift bits below the
    binary point).
    """

    kind: str
    target: str | None = None
    bit_index: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise NetworkError(f"unknown loss kind {self.kind!r}")
        if self.kind in ("square", "hinge", "bit01") and self.target is None:
            raise NetworkError(f"loss {self.kind!r} needs a target vertex")
        if self.kind == "bit01" and self.bit_index is None:
            raise NetworkError("bit01 loss needs a bit index")


@dataclass(frozen=True)
class EvalTrace:
    """Forward pass record: exact node values plus size instrumentation."""

    values: dict[str, Fraction]
    preactivations: dict[str, Fraction]
    node_bits: dict[str, int]
    max_bits: int
    ops: int


def forward(
    net: Network,
    theta: Theta,
    x: Mapping[str, Fraction],
    max_bits: int = DEFAULT_MAX_BITS,
) -> EvalTrace:
    """Exact forward evaluation in topological order."""
    values: dict[str, Fraction] = {}
    pre: dict[str, Fraction] = {}
    bits: dict[str, int] = {}
    ops = 0
    for vid in net.topo_order:
        vertex = net.vertex_map[vid]
        xv = Fraction(x.get(vid, 0))
        if vertex.role == ROLE_SOURCE:
            z = xv
            val = xv
        else:
            z = xv
            for e in net.in_edges[vid]:
                w, b = theta.params[e.id]
                z += w * values[e.tail] + b
                ops += 3
            check_bits(z, max_bits, f"preactivation {vid}")
            val = vertex.activation.eval(z)
            ops += 1
        values[vid] = val
        pre[vid] = z
        bits[vid] = check_bits(val, max_bits, f"vertex {vid}")
    return EvalTrace(values, pre, bits, max(bits.values(), default=1), ops)


def _vector_matches(
    net: Network, values: Mapping[str, Fraction], label: Mapping[str, Fraction]
) -> bool:
    for v in net.vertices:
        if values[v.id] != Fraction(label.get(v.id, 0)):
            return False
    return True


def sample_loss(
    net: Network,
    spec: LossSpec,
    values: Mapping[str, Fraction],
    sample: Sample,
) -> Fraction:
    """Exact per-sample loss (one copy, ignoring ``count``)."""
    if sample.flag == 0 or spec.kind == "vector-equality":
        if not isinstance(sample.label, Mapping):
            raise NetworkError("equality-checked sample needs a vector label")
        return Fraction(0 if _vector_matches(net, values, sample.label) else 1)
    if spec.kind in ("square", "hinge") and isinstance(sample.label, Mapping):
        raise NetworkError(f"{spec.kind} loss needs a scalar label")
    pred = values[spec.target]
    if spec.kind == "square":
        diff = pred - Fraction(sample.label)
        return diff * diff / 2
    if spec.kind == "hinge":
        margin = 1 - Fraction(sample.label) * pred
        return margin if margin > 0 else Fraction(0)
    # bit01: zero loss exactly when the queried bit is 1
    return Fraction(0 if bit_extract(pred, spec.bit_index) == 1 else 1)


def loss_total(
    net: Network,
    theta: Theta,
    dataset: Sequence[Sample],
    spec: LossSpec,
    max_bits: int = DEFAULT_MAX_BITS,
) -> Fraction:
    """Exact empirical loss, summed in dataset order."""
    total = Fraction(0)
    for sample in dataset:
        trace = forward(net, theta, sample.x, max_bits)
        total += sample.count * sample_loss(net, spec, trace.values, sample)
    return total


@dataclass(frozen=True)
class GradientReport:
    """Exact per-edge gradients of the empirical loss.

    ``hinge_kinks`` counts samples whose margin sat exactly on the hinge
    kink; those contribute the subgradient value 0.
    """

    weight_grad: dict[str, Fraction]
    bias_grad: dict[str, Fraction]
    hinge_kinks: int
    max_bits: int
    ops: int


def gradients(
    net: Network,
    theta: Theta,
    dataset: Sequence[Sample],
    spec: LossSpec,
    max_bits: int = DEFAULT_MAX_BITS,
) -> GradientReport:
    """Exact reverse-mode gradients of the total loss for every edge.

    Only square and hinge losses are differentiable in the prediction;
    bit01 / vector-equality specs and auxiliary (flag 0) samples are
    rejected.  Adjoints propagate in reverse topological order;
    accumulation order is fixed for reproducibility.
    """
    if spec.kind not in ("square", "hinge"):
        raise NonDifferentiableLoss(f"loss {spec.kind!r} has no gradient")
    wgrad = {e.id: Fraction(0) for e in net.edges}
    bgrad = {e.id: Fraction(0) for e in net.edges}
    kinks = 0
    peak = 1
    ops = 0
    for sample in dataset:
        if sample.flag == 0:
            raise NonDifferentiableLoss(
                "auxiliary (flag 0) samples use the equality loss and have no gradient"
            )
        trace = forward(net, theta, sample.x, max_bits)
        ops += trace.ops
        peak = max(peak, trace.max_bits)

        target = spec.target
        pred = trace.values[target]
        y = Fraction(sample.label)
        if spec.kind == "square":
            seed = pred - y
            ops += 1
        else:
            margin = 1 - y * pred
            ops += 2
            if margin > 0:
                seed = -y
            else:
                if margin == 0:
                    kinks += 1
                seed = Fraction(0)

        scale = Fraction(sample.count)
        adjoint: dict[str, Fraction] = {vid: Fraction(0) for vid in net.topo_order}
        adjoint[target] = seed
        for vid in reversed(net.topo_order):
            a = adjoint[vid]
            if a == 0:
                continue
            vertex = net.vertex_map[vid]
            if vertex.role == ROLE_SOURCE:
                continue
            delta = a * vertex.activation.derivative(trace.preactivations[vid])
            ops += 2
            peak = max(peak, check_bits(delta, max_bits, f"adjoint {vid}"))
            for e in net.in_edges[vid]:
                w = theta.params[e.id][0]
                wgrad[e.id] += scale * delta * trace.values[e.tail]
                bgrad[e.id] += scale * delta
                adjoint[e.tail] += delta * w
                ops += 6
    for g in wgrad.values():
        peak = max(peak, bit_length(g))
    return GradientReport(wgrad, bgrad, kinks, peak, ops)


@dataclass(frozen=True)
class GradResult:
    value: Fraction
    hinge_kinks: int


def grad_coordinate(
    net: Network,
    theta: Theta,
    dataset: Sequence[Sample],
    spec: LossSpec,
    edge_id: str,
    wrt: str = "weight",
    max_bits: int = DEFAULT_MAX_BITS,
) -> GradResult:
    """One exact partial derivative of the empirical loss.

    ``wrt`` selects the edge's weight or bias coordinate.  Hinge samples
    that land exactly on the kink take subgradient 0 and are counted in
    the result metadata rather than raised.
    """
    if wrt not in ("weight", "bias"):
        raise NetworkError(f"wrt must be 'weight' or 'bias', got {wrt!r}")
    if edge_id not in net.edge_map:
        raise NetworkError(f"unknown edge {edge_id!r}")
    report = gradients(net, theta, dataset, spec, max_bits)
    table = report.weight_grad if wrt == "weight" else report.bias_grad
    return GradResult(table[edge_id], report.hinge_kinks)
