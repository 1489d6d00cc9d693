"""Neural-network workload description: layer shapes and the producer/consumer graph.

Layers carry the seven loop bounds (B, K, C, OX, OY, FX, FY) plus stride.
Input spatial extents are always derived, never stored:
IX = (OX-1)*stride + FX (valid-padding arithmetic), IY analogous.
"""

import json
from dataclasses import dataclass

LAYER_KINDS = ("conv", "pointwise", "depthwise", "fully_connected")

_LAYER_FIELDS = ("id", "kind", "B", "K", "C", "OX", "OY", "FX", "FY", "stride")


class NetworkError(ValueError):
    """Raised for malformed or semantically invalid network descriptions."""


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class LayerDims:
    b: int
    k: int
    c: int
    ox: int
    oy: int
    fx: int
    fy: int
    stride: int = 1
    word_bits: int = 8

    def __post_init__(self):
        for name in ("b", "k", "c", "ox", "oy", "fx", "fy", "stride"):
            if getattr(self, name) < 1:
                raise NetworkError("dimension %s must be >= 1, got %d"
                                   % (name.upper(), getattr(self, name)))
        if not _is_pow2(self.word_bits):
            raise NetworkError("word_bits must be a power of two, got %d" % self.word_bits)

    @property
    def ix(self):
        return (self.ox - 1) * self.stride + self.fx

    @property
    def iy(self):
        return (self.oy - 1) * self.stride + self.fy


@dataclass(frozen=True)
class Layer:
    id: str
    kind: str
    dims: LayerDims

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise NetworkError("layer %r: unknown kind %r (expected one of %s)"
                               % (self.id, self.kind, ", ".join(LAYER_KINDS)))
        d = self.dims
        if self.kind == "pointwise" and (d.fx != 1 or d.fy != 1):
            raise NetworkError("layer %r: pointwise requires FX=FY=1" % self.id)
        if self.kind == "depthwise" and d.k != d.c:
            raise NetworkError("layer %r: depthwise requires K=C" % self.id)
        if self.kind == "fully_connected" and (d.ox, d.oy, d.fx, d.fy) != (1, 1, 1, 1):
            raise NetworkError("layer %r: fully_connected requires OX=OY=FX=FY=1" % self.id)


class NetworkGraph:
    """Validated DAG of layers. Immutable after construction; safe to share
    read-only across parallel search workers."""

    def __init__(self, layers, edges):
        self.layers = tuple(layers)
        self.edges = tuple((p, c) for p, c in edges)
        self._by_id = {}
        for layer in self.layers:
            if layer.id in self._by_id:
                raise NetworkError("duplicate layer id %r" % layer.id)
            self._by_id[layer.id] = layer
        self._consumers = {layer.id: [] for layer in self.layers}
        self._producers = {layer.id: [] for layer in self.layers}
        seen = set()
        for p, c in self.edges:
            if p not in self._by_id:
                raise NetworkError("edge (%s, %s): unknown producer %r" % (p, c, p))
            if c not in self._by_id:
                raise NetworkError("edge (%s, %s): unknown consumer %r" % (p, c, c))
            if (p, c) in seen:
                raise NetworkError("edge (%s, %s): duplicate edge" % (p, c))
            seen.add((p, c))
            self._consumers[p].append(c)
            self._producers[c].append(p)
        self._topo = self._toposort()
        self._check_edge_dims()

    def _toposort(self):
        order = {layer.id: i for i, layer in enumerate(self.layers)}
        indeg = {lid: len(ps) for lid, ps in self._producers.items()}
        ready = sorted((lid for lid, d in indeg.items() if d == 0), key=order.get)
        out = []
        while ready:
            lid = ready.pop(0)
            out.append(lid)
            changed = False
            for c in self._consumers[lid]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
                    changed = True
            if changed:
                ready.sort(key=order.get)
        if len(out) != len(self.layers):
            stuck = sorted(lid for lid, d in indeg.items() if d > 0)
            raise NetworkError("graph has a cycle through layers %s" % ", ".join(stuck))
        return tuple(out)

    def _check_edge_dims(self):
        for p, c in self.edges:
            prod, cons = self._by_id[p].dims, self._by_id[c].dims
            if prod.k != cons.c:
                raise NetworkError(
                    "edge (%s, %s): producer K=%d does not match consumer C=%d"
                    % (p, c, prod.k, cons.c))
            if prod.ox != cons.ix or prod.oy != cons.iy:
                raise NetworkError(
                    "edge (%s, %s): producer output %dx%d does not match consumer "
                    "input extent %dx%d" % (p, c, prod.ox, prod.oy, cons.ix, cons.iy))

    def layer(self, lid):
        return self._by_id[lid]

    def consumers(self, lid):
        return tuple(self._consumers[lid])

    def producers(self, lid):
        return tuple(self._producers[lid])

    def topological_order(self):
        return self._topo

    def __eq__(self, other):
        return (isinstance(other, NetworkGraph)
                and self.layers == other.layers and self.edges == other.edges)


def parse_network(text):
    """Parse a network-description JSON document into a validated NetworkGraph."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError("syntax error in network document: %s" % exc) from exc
    if not isinstance(doc, dict) or set(doc) - {"layers", "edges"}:
        raise NetworkError("network document must contain only 'layers' and 'edges'")
    layers = []
    for entry in doc.get("layers", []):
        unknown = set(entry) - set(_LAYER_FIELDS)
        if unknown:
            raise NetworkError("layer %r: unknown fields %s"
                               % (entry.get("id", "?"), sorted(unknown)))
        missing = {"id", "kind", "B", "K", "C", "OX", "OY", "FX", "FY"} - set(entry)
        if missing:
            raise NetworkError("layer %r: missing fields %s"
                               % (entry.get("id", "?"), sorted(missing)))
        dims = LayerDims(b=entry["B"], k=entry["K"], c=entry["C"],
                         ox=entry["OX"], oy=entry["OY"],
                         fx=entry["FX"], fy=entry["FY"],
                         stride=entry.get("stride", 1))
        layers.append(Layer(id=entry["id"], kind=entry["kind"], dims=dims))
    edges = []
    for pair in doc.get("edges", []):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise NetworkError("edge %r: expected [producer, consumer]" % (pair,))
        edges.append((pair[0], pair[1]))
    return NetworkGraph(layers, edges)


def serialize_network(g):
    """Inverse of parse_network; parse(serialize(g)) == g for valid graphs."""
    doc = {
        "layers": [
            {"id": l.id, "kind": l.kind, "B": l.dims.b, "K": l.dims.k, "C": l.dims.c,
             "OX": l.dims.ox, "OY": l.dims.oy, "FX": l.dims.fx, "FY": l.dims.fy,
             "stride": l.dims.stride}
            for l in g.layers
        ],
        "edges": [[p, c] for p, c in g.edges],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def load_network(path):
    with open(path, "r") as fh:
        return parse_network(fh.read())


def dependency_pairs(g):
    """(producer Layer, [consumer Layers]) for every layer with out-degree >= 1.

    Producers appear in topological order and each consumer list is itself
    topologically ordered, so the output is deterministic.
    """
    topo_pos = {lid: i for i, lid in enumerate(g.topological_order())}
    out = []
    for lid in g.topological_order():
        cons = sorted(g.consumers(lid), key=topo_pos.get)
        if cons:
            out.append((g.layer(lid), [g.layer(c) for c in cons]))
    return out
