"""Compilers from straight-line programs to training-problem instances.

An SLP is turned into a network that simulates it gate by gate under a
distinguished parameter vector theta*: addition and subtraction gates
become identity vertices with unit weights, and each multiplication
gate becomes a gadget that recovers the product x*y from shifted
evaluations of the polynomial activation via the lambda coefficients of
:mod:`bitnets.product_identity`.  Auxiliary samples with an exact
equality loss force any zero-auxiliary-loss parameter vector to agree
with theta* up to activation symmetries, so the instance's optimum
value reflects a bit (or the sign) of the program's output.

Three instance families are emitted: bit-query ERM instances, gradient
(backprop sign / bit) instances with a single free distinguished edge,
and hinge-loss sign instances for the derived value 2*n_P - 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from .network import (
    Edge,
    IdentityActivation,
    LossSpec,
    Network,
    PolyActivation,
    ROLE_HIDDEN,
    ROLE_SOURCE,
    ROLE_TARGET,
    Sample,
    Theta,
    Vertex,
    forward,
    grad_coordinate,
    loss_total,
)
from .product_identity import LambdaCoeffs, RationalPoly, solve_lambda
from .rationals import DEFAULT_MAX_BITS, bit_length, format_rational
from .slp import Gate, NormalizedSlp, Slp, normalize_bn

_IDENTITY = IdentityActivation()


class CompileError(ValueError):
    """Invalid compiler input (degree, gap, variant or program shape)."""


@dataclass(frozen=True)
class ErmInstance:
    network: Network
    theta_star: Theta
    dataset: tuple[Sample, ...]
    loss: LossSpec
    gap: tuple[int, int]
    provenance: dict


@dataclass(frozen=True)
class BackpropInstance:
    """Gradient-query instance: all parameters pinned except edge_star's weight.

    For the bit variant, ``bit_index`` is the index to query in the
    exact gradient; under bounded-norm compilation it is the requested
    bit of n_P shifted by the scale exponent and may be negative
    (a fractional position).
    """

    network: Network
    theta_star: Theta
    dataset: tuple[Sample, ...]
    loss: LossSpec
    variant: str
    edge_star: str
    promise: int | None
    bit_index: int | None
    provenance: dict


class _CircuitBuilder:
    """Accumulates vertices, edges and theta* for the gate-by-gate simulation."""

    def __init__(self, sigma: RationalPoly, lam: LambdaCoeffs) -> None:
        self.sigma = sigma
        self.lam = lam
        self.vertices: list[Vertex] = []
        self.edges: list[Edge] = []
        self.theta: dict[str, tuple[Fraction, Fraction]] = {}
        self._edge_ids: set[str] = set()

    def vertex(self, vid: str, role: str, activation) -> str:
        self.vertices.append(Vertex(vid, role, activation))
        return vid

    def edge(self, tail: str, head: str, w: Fraction, b: Fraction) -> str:
        eid = f"{tail}->{head}"
        n = 2
        while eid in self._edge_ids:
            eid = f"{tail}->{head}#{n}"
            n += 1
        self._edge_ids.add(eid)
        self.edges.append(Edge(eid, tail, head))
        self.theta[eid] = (Fraction(w), Fraction(b))
        return eid

    def build(self, p: Slp) -> list[str]:
        """Emit the simulation core; returns the vertex id per SLP gate."""
        mu = self.sigma.degree
        lam_prime = self.lam.integer_lambdas
        inv_d = Fraction(1, self.lam.common_denominator)
        gate_vertex = [self.vertex("v0", ROLE_SOURCE, None)]
        for i, g in enumerate(p.gates, start=1):
            vid = f"v{i}"
            vj, vk = gate_vertex[g.left], gate_vertex[g.right]
            if g.op in ("add", "sub"):
                self.vertex(vid, ROLE_HIDDEN, _IDENTITY)
                self.edge(vj, vid, Fraction(1), Fraction(0))
                self.edge(vk, vid, Fraction(1) if g.op == "add" else Fraction(-1), Fraction(0))
            else:
                zid = self.vertex(f"z{i}", ROLE_HIDDEN, _IDENTITY)
                sigma_act = PolyActivation(self.sigma)
                for r in range(mu + 1):
                    l1 = self.vertex(f"L1_{i}_{r}", ROLE_HIDDEN, _IDENTITY)
                    l2 = self.vertex(f"L2_{i}_{r}", ROLE_HIDDEN, _IDENTITY)
                    l3 = self.vertex(f"L3_{i}_{r}", ROLE_HIDDEN, _IDENTITY)
                    u1 = self.vertex(f"U1_{i}_{r}", ROLE_HIDDEN, sigma_act)
                    u2 = self.vertex(f"U2_{i}_{r}", ROLE_HIDDEN, sigma_act)
                    u3 = self.vertex(f"U3_{i}_{r}", ROLE_HIDDEN, sigma_act)
                    # Shift bias r rides on the left-operand edge.
                    self.edge(vj, l1, Fraction(1), Fraction(r))
                    self.edge(vk, l1, Fraction(1), Fraction(0))
                    self.edge(vj, l2, Fraction(1), Fraction(r))
                    self.edge(vk, l3, Fraction(1), Fraction(r))
                    for l, u in ((l1, u1), (l2, u2), (l3, u3)):
                        self.edge(l, u, Fraction(1), Fraction(0))
                    self.edge(u1, zid, Fraction(lam_prime[r]), Fraction(0))
                    self.edge(u2, zid, Fraction(-lam_prime[r]), Fraction(0))
                    self.edge(u3, zid, Fraction(-lam_prime[r]), Fraction(0))
                self.vertex(vid, ROLE_HIDDEN, _IDENTITY)
                self.edge(zid, vid, inv_d, Fraction(0))
            gate_vertex.append(vid)
        return gate_vertex

    def retag(self, vid: str, role: str) -> None:
        for idx, v in enumerate(self.vertices):
            if v.id == vid:
                self.vertices[idx] = Vertex(vid, role, v.activation)
                return
        raise KeyError(vid)


def _sparse(vec: dict[str, Fraction]) -> dict[str, Fraction]:
    return {k: v for k, v in vec.items() if v != 0}


def _aux_samples(
    net: Network,
    theta_star: Theta,
    sigma: RationalPoly,
    alpha1: int,
    replication: int,
) -> list[Sample]:
    """The forcing samples: baseline, one per identity-head edge, and one
    per sigma-edge and shift value.  Each appears ``replication`` times
    (encoded as the sample count)."""
    mu = sigma.degree
    sigma_zero = sigma.evaluate(Fraction(0))
    sigma_alpha1 = sigma.evaluate(Fraction(alpha1))

    def is_sigma(vid: str) -> bool:
        return isinstance(net.vertex_map[vid].activation, PolyActivation)

    base_y = {
        v.id: sigma_zero if is_sigma(v.id) else Fraction(0) for v in net.vertices
    }
    base_pre = {v.id: Fraction(0) for v in net.vertices}

    def make(y, pre, note) -> Sample:
        x = {}
        for v in net.vertices:
            acc = pre[v.id]
            for e in net.in_edges[v.id]:
                w, b = theta_star.params[e.id]
                acc -= w * y[e.tail] + b
            x[v.id] = acc
        return Sample(_sparse(x), _sparse(y), flag=0, count=replication, note=note)

    samples = [make(base_y, base_pre, "baseline")]
    for e in net.edges:
        if is_sigma(e.head):
            # sigma-edge: pin sigma(w z + b) == sigma(z) at mu+1 points
            for tau in range(mu + 1):
                y = dict(base_y)
                y[e.tail] = Fraction(tau)
                y[e.head] = sigma.evaluate(Fraction(tau))
                pre = dict(base_pre)
                pre[e.tail] = Fraction(tau)
                pre[e.head] = Fraction(tau)
                samples.append(make(y, pre, f"sigma-edge {e.id} tau={tau}"))
        else:
            # identity-head edge: pin the edge weight (and bias sums)
            y = dict(base_y)
            bump = sigma_alpha1 if is_sigma(e.tail) else Fraction(1)
            y[e.tail] = bump
            y[e.head] = theta_star.weight(e.id) * (bump - base_y[e.tail])
            pre = {
                v.id: (Fraction(alpha1) if v.id == e.tail else Fraction(0))
                if is_sigma(v.id)
                else y[v.id]
                for v in net.vertices
            }
            samples.append(make(y, pre, f"id-edge {e.id}"))
    return samples


def compile_erm(
    p: Slp,
    sigma: RationalPoly,
    j: int,
    gap: tuple[int, int] = (0, 1),
) -> ErmInstance:
    """Compile a bit-query instance: optimum <= gap[0] iff bit j of n_P is 1.

    Auxiliary samples are replicated gap[1]+1 times and the main sample
    gap[1] times, so any parameter vector within the gap has zero
    auxiliary loss and therefore reproduces the program exactly.
    """
    a, b = gap
    if not (0 <= a < b):
        raise CompileError(f"need naturals a < b, got gap {gap}")
    if j < 0:
        raise CompileError(f"bit index must be non-negative, got {j}")
    if p.n_gates == 0:
        raise CompileError("program must have at least one gate")
    lam = solve_lambda(sigma)
    builder = _CircuitBuilder(sigma, lam)
    gate_vertex = builder.build(p)
    builder.retag(gate_vertex[-1], ROLE_TARGET)
    net = Network(builder.vertices, builder.edges)
    theta_star = Theta(builder.theta)

    alpha1 = _pick_alpha1(sigma)
    dataset = _aux_samples(net, theta_star, sigma, alpha1, b + 1)
    dataset.append(
        Sample(
            _sparse({"v0": p.constant}), {}, flag=1, count=b, note="main"
        )
    )
    loss = LossSpec("bit01", target=gate_vertex[-1], bit_index=j)
    provenance = _provenance(p, sigma, lam, alpha1)
    provenance["bit_index"] = j
    return ErmInstance(net, theta_star, tuple(dataset), loss, (a, b), provenance)


def _pick_alpha1(sigma: RationalPoly) -> int:
    sigma_zero = sigma.evaluate(Fraction(0))
    for candidate in range(1, sigma.degree + 2):
        if sigma.evaluate(Fraction(candidate)) != sigma_zero:
            return candidate
    raise CompileError("no shift separates sigma from sigma(0); sigma is constant?")


def _provenance(p: Slp, sigma: RationalPoly, lam: LambdaCoeffs, alpha1: int | None) -> dict:
    prov = {
        "slp": p.to_text(),
        "sigma": sigma.to_text(),
        "lambdas": [format_rational(x) for x in lam.lambdas],
        "lambda_prime": list(lam.integer_lambdas),
        "common_denominator": lam.common_denominator,
        "mul_gates": sum(1 for g in p.gates if g.op == "mul"),
    }
    if alpha1 is not None:
        prov["alpha1"] = alpha1
    return prov


def check_zero_aux_loss(
    inst: ErmInstance, theta: Theta, max_bits: int = DEFAULT_MAX_BITS
) -> tuple[bool, Sample | None]:
    """True iff every auxiliary sample reproduces its label exactly under theta.

    On failure, the first violated sample (with its identifying note) is
    returned alongside False.
    """
    theta.check_against(inst.network)
    for sample in inst.dataset:
        if sample.flag != 0:
            continue
        trace = forward(inst.network, theta, sample.x, max_bits)
        for v in inst.network.vertices:
            if trace.values[v.id] != Fraction(sample.label.get(v.id, 0)):
                return False, sample
    return True, None


def decide_at_theta_star(inst: ErmInstance, max_bits: int = DEFAULT_MAX_BITS) -> bool:
    """Evaluate the total loss at theta*; YES (True) iff it is at most gap[0]."""
    value = loss_total(inst.network, inst.theta_star, inst.dataset, inst.loss, max_bits)
    return value <= inst.gap[0]


def compile_backprop(
    p: Slp,
    sigma: RationalPoly,
    variant: str,
    promise: int | None = None,
    bit_index: int | None = None,
    copies: int | None = None,
    a0_mode: str = "unit",
) -> BackpropInstance:
    """Compile a gradient-query instance around the simulation core.

    A fresh identity target is appended behind the distinguished edge
    e*, whose weight is the only coordinate queried; at theta* (where
    w_e* = 0) the exact partial derivative equals copies * a0 * n_P for
    the compiled program's constant a0 and output n_P.

    Variant ``sign`` asks for the derivative's sign under a promise gap
    ``promise`` (requires copies == promise and unit constant 1);
    variant ``bit`` asks for one bit (requires copies == 1).  With
    ``a0_mode="bn-normalized"`` the program is rewritten in bounded-norm
    form first and the queried bit index shifts down by the scale
    exponent (fractional positions are negative indices).
    """
    if p.constant != 1:
        raise CompileError("backprop compilation expects a constant-1 program")
    if p.n_gates == 0:
        raise CompileError("program must have at least one gate")
    if a0_mode not in ("unit", "bn-normalized"):
        raise CompileError(f"unknown a0 mode {a0_mode!r}")

    if variant == "sign":
        if promise is None or promise < 1:
            raise CompileError("sign variant needs a promise gap b >= 1")
        if bit_index is not None:
            raise CompileError("sign variant takes no bit index")
        if a0_mode != "unit":
            raise CompileError("sign promise gap requires the unit constant")
        b_copies = promise if copies is None else copies
        if b_copies != promise:
            raise CompileError("sign variant requires copies == promise")
    elif variant == "bit":
        if bit_index is None:
            raise CompileError("bit variant needs a bit index")
        if promise is not None:
            raise CompileError("bit variant takes no promise gap")
        b_copies = 1 if copies is None else copies
        if b_copies != 1:
            raise CompileError("bit variant requires copies == 1")
    else:
        raise CompileError(f"unknown variant {variant!r}")

    shift = 0
    prog = p
    norm: NormalizedSlp | None = None
    if a0_mode == "bn-normalized":
        norm = normalize_bn(p)
        prog = norm.program
        shift = norm.gate_count + norm.scale_exponent

    lam = solve_lambda(sigma)
    builder = _CircuitBuilder(sigma, lam)
    gate_vertex = builder.build(prog)
    out = builder.vertex("out", ROLE_TARGET, _IDENTITY)
    edge_star = builder.edge(gate_vertex[-1], out, Fraction(0), Fraction(0))
    net = Network(builder.vertices, builder.edges)
    theta_star = Theta(builder.theta)

    a0 = prog.constant
    dataset = (
        Sample(_sparse({"v0": a0}), -a0, flag=1, count=b_copies, note="main"),
    )
    provenance = _provenance(prog, sigma, lam, None)
    provenance["a0_mode"] = a0_mode
    provenance["copies"] = b_copies
    if norm is not None:
        provenance["source_slp"] = p.to_text()
        provenance["bn_gate_count"] = norm.gate_count
        provenance["bn_scale_exponent"] = norm.scale_exponent
    if variant == "bit":
        provenance["requested_bit"] = bit_index
    return BackpropInstance(
        network=net,
        theta_star=theta_star,
        dataset=dataset,
        loss=LossSpec("square", target=out),
        variant=variant,
        edge_star=edge_star,
        promise=promise,
        bit_index=None if variant == "sign" else bit_index - shift,
        provenance=provenance,
    )


def backprop_gradient(
    inst: BackpropInstance, max_bits: int = DEFAULT_MAX_BITS
) -> Fraction:
    """The exact distinguished partial derivative at the instance's theta*."""
    return grad_coordinate(
        inst.network,
        inst.theta_star,
        inst.dataset,
        inst.loss,
        inst.edge_star,
        "weight",
        max_bits,
    ).value


def compile_hinge_posslp(
    p: Slp,
    sigma: RationalPoly,
    copies: int = 1,
    low: int = 0,
) -> ErmInstance:
    """Sign-query instance under the standard hinge loss.

    The compiled network evaluates the derived value 2*n_P - 1, which is
    never zero for integer outputs; with labels +1 the per-sample hinge
    loss at theta* is 0 when n_P > 0 and at least 2 otherwise.  The
    instance's promise gap is (low, copies): the positive side costs 0
    and the other side at least 2*copies.
    """
    if p.constant != 1:
        raise CompileError("hinge compilation expects a constant-1 program")
    if copies < 1:
        raise CompileError("need at least one main sample")
    if not (0 <= low < copies):
        raise CompileError(f"need naturals low < copies, got ({low}, {copies})")
    n = p.n_gates
    doubled = Slp(
        p.constant,
        p.gates + (Gate("add", n, n), Gate("sub", n + 1, 0)),
    )
    lam = solve_lambda(sigma)
    builder = _CircuitBuilder(sigma, lam)
    gate_vertex = builder.build(doubled)
    builder.retag(gate_vertex[-1], ROLE_TARGET)
    net = Network(builder.vertices, builder.edges)
    theta_star = Theta(builder.theta)

    alpha1 = _pick_alpha1(sigma)
    dataset = _aux_samples(net, theta_star, sigma, alpha1, copies + 1)
    dataset.append(
        Sample(_sparse({"v0": p.constant}), Fraction(1), flag=1, count=copies, note="main")
    )
    provenance = _provenance(doubled, sigma, lam, alpha1)
    provenance["derived_output"] = "2*n_P-1"
    provenance["source_slp"] = p.to_text()
    return ErmInstance(
        net,
        theta_star,
        tuple(dataset),
        LossSpec("hinge", target=gate_vertex[-1]),
        (low, copies),
        provenance,
    )


@dataclass(frozen=True)
class GadgetReport:
    """Size accounting for a compiled instance."""

    add_gates: int
    sub_gates: int
    mul_gates: int
    vertices: int
    edges: int
    aux_vertices_per_mul: int
    distinct_samples: int
    sample_entries: int
    theta_entry_bits: tuple[int, ...]

    @property
    def max_theta_bits(self) -> int:
        return max(self.theta_entry_bits)


def gadget_report(inst: ErmInstance | BackpropInstance) -> GadgetReport:
    from .slp import parse_slp

    p = parse_slp(inst.provenance["slp"])
    mu = RationalPoly.from_text(inst.provenance["sigma"]).degree
    ops = [g.op for g in p.gates]
    theta_bits = tuple(
        bit_length(value)
        for eid in sorted(inst.theta_star.params)
        for value in inst.theta_star.params[eid]
    )
    return GadgetReport(
        add_gates=ops.count("add"),
        sub_gates=ops.count("sub"),
        mul_gates=ops.count("mul"),
        vertices=len(inst.network.vertices),
        edges=len(inst.network.edges),
        aux_vertices_per_mul=6 * (mu + 1) + 1,
        distinct_samples=len(inst.dataset),
        sample_entries=sum(s.count for s in inst.dataset),
        theta_entry_bits=theta_bits,
    )
