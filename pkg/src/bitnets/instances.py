"""Canonical JSON encoding of compiled instances and parameter vectors.

The canonical form fixes everything a byte-level size measure needs:
keys sorted, no insignificant whitespace, vertices and edges sorted by
id, every rational rendered as a reduced ``p`` / ``p/q`` string.  The
instance size |I| used by encoding-length bounds is the byte length of
this serialization.  Parsing validates the schema and reports the JSON
path of the first violation; non-reduced rationals and dangling edge
endpoints are rejected.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Mapping

from .network import (
    Edge,
    IdentityActivation,
    LossSpec,
    Network,
    PolyActivation,
    ROLE_SOURCE,
    ROLES,
    Sample,
    Theta,
    Vertex,
)
from .product_identity import RationalPoly
from .pwl import BitBoundedActivation, PwlActivation
from .rationals import format_rational, parse_rational
from .reductions import BackpropInstance, ErmInstance


class SchemaError(ValueError):
    """Schema violation; carries the JSON path of the offending element."""

    def __init__(self, path: str, message: str) -> None:
        self.path = path
        super().__init__(f"{path}: {message}")


def canonical_bytes(doc: Any) -> bytes:
    return json.dumps(
        doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


# ---------------------------------------------------------------------------
# activations


def activation_to_doc(act) -> dict:
    if isinstance(act, IdentityActivation):
        return {"kind": "identity"}
    if isinstance(act, PolyActivation):
        return {
            "kind": "poly",
            "coeffs": [format_rational(c) for c in act.poly.coefficients],
        }
    if isinstance(act, PwlActivation):
        return {
            "kind": "pwl",
            "breakpoints": [format_rational(b) for b in act.breakpoints],
            "pieces": [[format_rational(a), format_rational(c)] for a, c in act.pieces],
            "kink_slope": act.kink_slope,
        }
    if isinstance(act, BitBoundedActivation):
        doc = {
            "kind": "bitbounded",
            "base": activation_to_doc(act.base),
            "bits": act.bits,
        }
        if act.clip is not None:
            doc["clip"] = [format_rational(act.clip[0]), format_rational(act.clip[1])]
        return doc
    raise SchemaError("activation", f"unserializable activation {act!r}")


def activation_from_doc(doc: Any, path: str):
    kind = _get(doc, "kind", path, str)
    if kind == "identity":
        return IdentityActivation()
    if kind == "poly":
        coeffs = _get(doc, "coeffs", path, list)
        return PolyActivation(
            RationalPoly(
                tuple(
                    _rational(c, f"{path}.coeffs[{i}]") for i, c in enumerate(coeffs)
                )
            )
        )
    if kind == "pwl":
        bps = _get(doc, "breakpoints", path, list)
        pieces = _get(doc, "pieces", path, list)
        parsed_pieces = []
        for i, pair in enumerate(pieces):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise SchemaError(f"{path}.pieces[{i}]", "expected [slope, intercept]")
            parsed_pieces.append(
                (
                    _rational(pair[0], f"{path}.pieces[{i}][0]"),
                    _rational(pair[1], f"{path}.pieces[{i}][1]"),
                )
            )
        return PwlActivation(
            tuple(_rational(b, f"{path}.breakpoints[{i}]") for i, b in enumerate(bps)),
            tuple(parsed_pieces),
            doc.get("kink_slope", "right"),
        )
    if kind == "bitbounded":
        clip = doc.get("clip")
        parsed_clip = None
        if clip is not None:
            if not (isinstance(clip, list) and len(clip) == 2):
                raise SchemaError(f"{path}.clip", "expected [lo, hi]")
            parsed_clip = (
                _rational(clip[0], f"{path}.clip[0]"),
                _rational(clip[1], f"{path}.clip[1]"),
            )
        return BitBoundedActivation(
            base=activation_from_doc(_get(doc, "base", path, dict), f"{path}.base"),
            bits=_get(doc, "bits", path, int),
            clip=parsed_clip,
        )
    raise SchemaError(path, f"unknown activation kind {kind!r}")


# ---------------------------------------------------------------------------
# helpers


def _get(doc: Any, key: str, path: str, expected: type) -> Any:
    if not isinstance(doc, dict):
        raise SchemaError(path, f"expected an object, got {type(doc).__name__}")
    if key not in doc:
        raise SchemaError(path, f"missing key {key!r}")
    value = doc[key]
    if expected is int and isinstance(value, bool):
        raise SchemaError(f"{path}.{key}", "expected an integer")
    if not isinstance(value, expected):
        raise SchemaError(
            f"{path}.{key}", f"expected {expected.__name__}, got {type(value).__name__}"
        )
    return value


def _rational(value: Any, path: str) -> Fraction:
    if not isinstance(value, str):
        raise SchemaError(path, "rationals are encoded as strings")
    try:
        return parse_rational(value)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from None


def _sparse_vector(doc: Any, path: str, known: set[str]) -> dict[str, Fraction]:
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object mapping vertex ids to rationals")
    out = {}
    for vid in sorted(doc):
        if vid not in known:
            raise SchemaError(f"{path}.{vid}", f"unknown vertex {vid!r}")
        out[vid] = _rational(doc[vid], f"{path}.{vid}")
    return out


# ---------------------------------------------------------------------------
# theta


def theta_to_doc(theta: Theta) -> dict:
    return {
        eid: {"w": format_rational(w), "b": format_rational(b)}
        for eid, (w, b) in theta.params.items()
    }


def theta_from_doc(doc: Any, path: str = "theta") -> Theta:
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object keyed by edge id")
    params = {}
    for eid in sorted(doc):
        entry = doc[eid]
        params[eid] = (
            _rational(_get(entry, "w", f"{path}.{eid}", str), f"{path}.{eid}.w"),
            _rational(_get(entry, "b", f"{path}.{eid}", str), f"{path}.{eid}.b"),
        )
    return Theta(params)


def serialize_theta(theta: Theta) -> bytes:
    return canonical_bytes(theta_to_doc(theta))


def parse_theta(data: bytes | str) -> Theta:
    return theta_from_doc(_load(data))


# ---------------------------------------------------------------------------
# instances


def instance_to_doc(inst: ErmInstance | BackpropInstance) -> dict:
    doc: dict[str, Any] = {
        "kind": "backprop" if isinstance(inst, BackpropInstance) else "erm",
        "vertices": [
            {
                "id": v.id,
                "role": v.role,
                "activation": None if v.activation is None else activation_to_doc(v.activation),
            }
            for v in inst.network.vertices
        ],
        "edges": [
            {"id": e.id, "u": e.tail, "v": e.head} for e in inst.network.edges
        ],
        "theta": theta_to_doc(inst.theta_star),
        "dataset": [_sample_to_doc(s) for s in inst.dataset],
        "loss": _loss_to_doc(inst.loss),
        "provenance": inst.provenance,
    }
    if isinstance(inst, BackpropInstance):
        doc["variant"] = inst.variant
        doc["edge_star"] = inst.edge_star
        if inst.promise is not None:
            doc["promise"] = inst.promise
        if inst.bit_index is not None:
            doc["bit_index"] = inst.bit_index
    else:
        doc["gap"] = list(inst.gap)
    return doc


def _sample_to_doc(s: Sample) -> dict:
    doc: dict[str, Any] = {
        "x": {vid: format_rational(val) for vid, val in s.x.items()},
        "flag": s.flag,
        "count": s.count,
    }
    if isinstance(s.label, Mapping):
        doc["y"] = {vid: format_rational(val) for vid, val in s.label.items()}
    else:
        doc["y"] = format_rational(s.label)
    if s.note:
        doc["note"] = s.note
    return doc


def _loss_to_doc(loss: LossSpec) -> dict:
    doc: dict[str, Any] = {"kind": loss.kind}
    if loss.target is not None:
        doc["target"] = loss.target
    if loss.bit_index is not None:
        doc["j"] = loss.bit_index
    return doc


def doc_to_instance(doc: Any) -> ErmInstance | BackpropInstance:
    kind = _get(doc, "kind", "$", str)
    if kind not in ("erm", "backprop"):
        raise SchemaError("$.kind", f"unknown instance kind {kind!r}")

    vertices = []
    vertex_ids: set[str] = set()
    for i, vdoc in enumerate(_get(doc, "vertices", "$", list)):
        path = f"$.vertices[{i}]"
        vid = _get(vdoc, "id", path, str)
        role = _get(vdoc, "role", path, str)
        if role not in ROLES:
            raise SchemaError(f"{path}.role", f"unknown role {role!r}")
        act_doc = vdoc.get("activation")
        act = None
        if role == ROLE_SOURCE:
            if act_doc is not None:
                raise SchemaError(f"{path}.activation", "sources carry no activation")
        else:
            if act_doc is None:
                raise SchemaError(f"{path}.activation", "missing activation")
            act = activation_from_doc(act_doc, f"{path}.activation")
        if vid in vertex_ids:
            raise SchemaError(f"{path}.id", f"duplicate vertex id {vid!r}")
        vertex_ids.add(vid)
        vertices.append(Vertex(vid, role, act))

    edges = []
    edge_ids: set[str] = set()
    for i, edoc in enumerate(_get(doc, "edges", "$", list)):
        path = f"$.edges[{i}]"
        eid = _get(edoc, "id", path, str)
        tail = _get(edoc, "u", path, str)
        head = _get(edoc, "v", path, str)
        for endpoint, key in ((tail, "u"), (head, "v")):
            if endpoint not in vertex_ids:
                raise SchemaError(
                    f"{path}.{key}", f"edge {eid!r} references unknown vertex {endpoint!r}"
                )
        if eid in edge_ids:
            raise SchemaError(f"{path}.id", f"duplicate edge id {eid!r}")
        edge_ids.add(eid)
        edges.append(Edge(eid, tail, head))

    net = Network(vertices, edges)

    theta = theta_from_doc(_get(doc, "theta", "$", dict), "$.theta")
    missing = sorted(edge_ids - set(theta.params))
    extra = sorted(set(theta.params) - edge_ids)
    if missing:
        raise SchemaError("$.theta", f"missing parameters for edges {missing}")
    if extra:
        raise SchemaError("$.theta", f"parameters for unknown edges {extra}")

    samples = []
    for i, sdoc in enumerate(_get(doc, "dataset", "$", list)):
        path = f"$.dataset[{i}]"
        x = _sparse_vector(_get(sdoc, "x", path, dict), f"{path}.x", vertex_ids)
        ydoc = sdoc.get("y")
        label: Fraction | dict[str, Fraction]
        if isinstance(ydoc, dict):
            label = _sparse_vector(ydoc, f"{path}.y", vertex_ids)
        elif isinstance(ydoc, str):
            label = _rational(ydoc, f"{path}.y")
        else:
            raise SchemaError(f"{path}.y", "label must be a rational or a sparse vector")
        flag = _get(sdoc, "flag", path, int)
        if flag not in (0, 1):
            raise SchemaError(f"{path}.flag", f"flag must be 0 or 1, got {flag}")
        count = _get(sdoc, "count", path, int)
        if count < 1:
            raise SchemaError(f"{path}.count", f"count must be >= 1, got {count}")
        samples.append(Sample(x, label, flag, count, sdoc.get("note", "")))

    loss_doc = _get(doc, "loss", "$", dict)
    loss_kind = _get(loss_doc, "kind", "$.loss", str)
    target = loss_doc.get("target")
    if target is not None and target not in vertex_ids:
        raise SchemaError("$.loss.target", f"unknown vertex {target!r}")
    loss = LossSpec(loss_kind, target=target, bit_index=loss_doc.get("j"))

    provenance = doc.get("provenance", {})
    if kind == "erm":
        gap_doc = _get(doc, "gap", "$", list)
        if len(gap_doc) != 2 or not all(
            isinstance(g, int) and not isinstance(g, bool) for g in gap_doc
        ):
            raise SchemaError("$.gap", "expected [a, b] with integer thresholds")
        a, b = gap_doc
        if not (0 <= a < b):
            raise SchemaError("$.gap", f"need naturals a < b, got {gap_doc}")
        return ErmInstance(net, theta, tuple(samples), loss, (a, b), provenance)

    edge_star = _get(doc, "edge_star", "$", str)
    if edge_star not in edge_ids:
        raise SchemaError("$.edge_star", f"unknown edge {edge_star!r}")
    variant = _get(doc, "variant", "$", str)
    if variant not in ("sign", "bit"):
        raise SchemaError("$.variant", f"unknown variant {variant!r}")
    return BackpropInstance(
        network=net,
        theta_star=theta,
        dataset=tuple(samples),
        loss=loss,
        variant=variant,
        edge_star=edge_star,
        promise=doc.get("promise"),
        bit_index=doc.get("bit_index"),
        provenance=provenance,
    )


def serialize_instance(inst: ErmInstance | BackpropInstance) -> bytes:
    return canonical_bytes(instance_to_doc(inst))


def parse_instance(data: bytes | str) -> ErmInstance | BackpropInstance:
    return doc_to_instance(_load(data))


def instance_size(inst: ErmInstance | BackpropInstance) -> int:
    """|I|: the byte length of the canonical serialization."""
    return len(serialize_instance(inst))


def _load(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from None
