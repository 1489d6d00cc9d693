"""Per-layer spatial-unrolling enumeration, costing and pool pruning.

Each layer gets a pool of candidate spatial unrollings (SUs), costed either by
the built-in layer-wise model below or by an imported cost table, then pruned:
an SU survives when

    (P_SU - P_SU_min) / P_ideal_network <= theta

with P_ideal_network the sum of the per-layer optima. Normalizing to the whole
network lets dominant layers keep their optimum while non-dominant layers
retain many near-optimal alternatives for the layout search to exploit.
"""

import json
import math
from dataclasses import dataclass

from .workload import NetworkError

METRICS = ("energy", "latency", "edp")

SU_DIMS = ("ox", "oy", "k", "c", "fx", "fy")


def next_pow2(n):
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


def pow2_range(limit):
    """All powers of two from 1 up to next_pow2(limit), inclusive."""
    cap = next_pow2(limit)
    out = []
    f = 1
    while f <= cap:
        out.append(f)
        f <<= 1
    return out


@dataclass(frozen=True, order=True)
class SpatialUnrolling:
    """Per-cycle parallelization factors, one per loop dimension."""
    ox: int = 1
    oy: int = 1
    k: int = 1
    c: int = 1
    fx: int = 1
    fy: int = 1

    def pe_usage(self, layer):
        # depthwise couples the K and C loops into a single channel loop
        chan = self.k if layer.kind == "depthwise" else self.k * self.c
        return self.ox * self.oy * chan * self.fx * self.fy

    def output_parallelism(self):
        """Words of the output tensor produced in parallel, per layout dim."""
        return {"OX": self.ox, "OY": self.oy, "K": self.k}

    def input_demand(self, layer):
        """Parallel demand on the producer tensor's layout dims.

        The consumer's C maps onto the producer's K; spatial demand uses the
        output-pixel anchor, i.e. a dilated span of OXu*stride along OX.
        """
        s = layer.dims.stride
        return {"OX": self.ox * s, "OY": self.oy * s, "K": self.c}

    def factors(self):
        return {d.upper(): getattr(self, d) for d in SU_DIMS}

    def render(self):
        parts = ["%su:%d" % (d.upper(), getattr(self, d))
                 for d in ("oy", "ox", "k", "c", "fx", "fy") if getattr(self, d) > 1]
        return "[" + ", ".join(parts) + "]" if parts else "[unit]"


# Baseline tie-break: prefer larger OYu, then OXu, Ku, Cu, FXu, FYu. Makes the
# memory-unaware baseline deterministic where a random pick would do.
def su_tiebreak_key(su):
    return (-su.oy, -su.ox, -su.k, -su.c, -su.fx, -su.fy)


@dataclass(frozen=True)
class LayerwiseResult:
    su: SpatialUnrolling
    energy_pj: float
    latency_cycles: int

    @property
    def edp(self):
        return self.energy_pj * self.latency_cycles


def metric_value(result, metric):
    if metric == "energy":
        return result.energy_pj
    if metric == "latency":
        return result.latency_cycles
    if metric == "edp":
        return result.edp
    raise ValueError("unknown metric %r" % metric)


@dataclass(frozen=True)
class SUPool:
    layer_id: str
    results: tuple          # LayerwiseResult, ascending by the active metric
    metric: str

    @property
    def p_su_min(self):
        return metric_value(self.results[0], self.metric)

    def sus(self):
        return [r.su for r in self.results]


def build_pool(layer_id, results, metric):
    ordered = sorted(results, key=lambda r: (metric_value(r, metric),
                                             su_tiebreak_key(r.su)))
    return SUPool(layer_id=layer_id, results=tuple(ordered), metric=metric)


@dataclass(frozen=True)
class PruningConfig:
    theta: float
    metric: str
    p_ideal_network: float

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be >= 0")


def make_pruning_config(pools, theta, metric):
    return PruningConfig(theta=theta, metric=metric,
                         p_ideal_network=sum(p.p_su_min for p in pools.values()))


def enumerate_su(layer, pe):
    """All power-of-two factor assignments whose PE usage fits the array.

    Every factor is bounded by its layer bound rounded up to the next power of
    two; depthwise layers enumerate a single coupled channel factor.
    """
    d = layer.dims
    out = []
    if layer.kind == "depthwise":
        for ox in pow2_range(d.ox):
            for oy in pow2_range(d.oy):
                for ch in pow2_range(d.k):
                    for fx in pow2_range(d.fx):
                        for fy in pow2_range(d.fy):
                            if ox * oy * ch * fx * fy <= pe.pe_count:
                                out.append(SpatialUnrolling(ox=ox, oy=oy, k=ch,
                                                            c=ch, fx=fx, fy=fy))
    else:
        for ox in pow2_range(d.ox):
            for oy in pow2_range(d.oy):
                for k in pow2_range(d.k):
                    for c in pow2_range(d.c):
                        for fx in pow2_range(d.fx):
                            for fy in pow2_range(d.fy):
                                if ox * oy * k * c * fx * fy <= pe.pe_count:
                                    out.append(SpatialUnrolling(ox=ox, oy=oy, k=k,
                                                                c=c, fx=fx, fy=fy))
    return out


def evaluate_layer(layer, su, hw, pd_override=None, pd_read=None, pd_write=None):
    """Cost one layer under one SU with a fixed output-stationary loop order.

    latency = max(compute cycles, activation-memory cycles). Memory cycles
    count full-port transactions: total activation words over the effective
    port width (pd_override, else the physical port). pd_read/pd_write split
    the override between the input and output streams when the two directions
    have different effectiveness.
    """
    d = layer.dims
    pd_words = hw.act_mem.pd_words
    eff_read = pd_read if pd_read is not None else (pd_override or pd_words)
    eff_write = pd_write if pd_write is not None else (pd_override or pd_words)

    chan_trips = (math.ceil(d.k / su.k) if layer.kind == "depthwise"
                  else math.ceil(d.k / su.k) * math.ceil(d.c / su.c))
    compute_cycles = (d.b * chan_trips
                      * math.ceil(d.ox / su.ox) * math.ceil(d.oy / su.oy)
                      * math.ceil(d.fx / su.fx) * math.ceil(d.fy / su.fy))

    in_words = d.b * d.c * d.ix * d.iy
    out_words = d.b * d.k * d.ox * d.oy
    read_tx = math.ceil(in_words / eff_read)
    write_tx = math.ceil(out_words / eff_write)
    memory_cycles = read_tx + write_tx

    macs = d.b * d.k * d.ox * d.oy * d.fx * d.fy
    weight_words = d.k * d.fx * d.fy
    if layer.kind != "depthwise":
        macs *= d.c
        weight_words *= d.c

    e = hw.energy
    energy = (macs * e.mac_pj
              + (read_tx + write_tx) * e.activation_mem_access_pj
              + weight_words * e.weight_mem_access_pj)
    return LayerwiseResult(su=su, energy_pj=energy,
                           latency_cycles=max(compute_cycles, memory_cycles))


def build_pools(graph, hw, metric="edp", jobs=1):
    """Enumerate and cost the full SU pool of every layer."""
    if jobs > 1:
        from multiprocessing import Pool as ProcPool
        args = [(layer, hw, metric) for layer in graph.layers]
        with ProcPool(processes=jobs) as pool:
            evaluated = pool.map(_eval_one_layer, args)
        return {layer.id: p for layer, p in zip(graph.layers, evaluated)}
    return {layer.id: _eval_one_layer((layer, hw, metric)) for layer in graph.layers}


def _eval_one_layer(args):
    layer, hw, metric = args
    results = [evaluate_layer(layer, su, hw) for su in enumerate_su(layer, hw.pe)]
    return build_pool(layer.id, results, metric)


def import_layerwise_results(text, graph, pe, metric="edp"):
    """Build pools from an external per-SU cost table, bypassing the built-in
    model. Rows are (layer_id, factor map, energy_pj, latency_cycles)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError("syntax error in cost table: %s" % exc) from exc
    by_layer = {}
    seen = set()
    for row in doc.get("results", []):
        lid = row["layer"]
        if lid not in {l.id for l in graph.layers}:
            raise NetworkError("cost table: unknown layer id %r" % lid)
        factors = {str(k).lower(): int(v) for k, v in row["su"].items()}
        su = SpatialUnrolling(**{d: factors.get(d, 1) for d in SU_DIMS})
        if su.pe_usage(graph.layer(lid)) > pe.pe_count:
            raise NetworkError("cost table: SU %s of layer %r exceeds %d PEs"
                               % (su.render(), lid, pe.pe_count))
        if (lid, su) in seen:
            raise NetworkError("cost table: duplicate SU %s for layer %r"
                               % (su.render(), lid))
        seen.add((lid, su))
        by_layer.setdefault(lid, []).append(
            LayerwiseResult(su=su, energy_pj=float(row["energy_pj"]),
                            latency_cycles=int(row["latency_cycles"])))
    return {lid: build_pool(lid, results, metric) for lid, results in by_layer.items()}


def prune_su_pool(pools, cfg):
    """Keep the SUs whose metric degradation, normalized to the ideal network
    cost, stays within theta. The per-layer optimum always survives."""
    pruned = {}
    for lid, pool in pools.items():
        p_min = pool.p_su_min
        kept = []
        for r in pool.results:
            val = metric_value(r, cfg.metric)
            if val == p_min:
                kept.append(r)
            elif cfg.p_ideal_network > 0 and (val - p_min) / cfg.p_ideal_network <= cfg.theta:
                kept.append(r)
        pruned[lid] = SUPool(layer_id=lid, results=tuple(kept), metric=pool.metric)
    return pruned


def combination_count(pools):
    n = 1
    for pool in pools.values():
        n *= len(pool.results)
    return n
