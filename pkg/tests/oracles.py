"""Independent checkers used by the test suite.

Nothing here reuses the search internals: feasibility is re-derived by brute
force over raw port routes, and delivered spectrum is re-derived through the
observation flood, so the two implementations can disagree loudly.
"""
from __future__ import annotations

from itertools import combinations, product
from typing import Dict, List, Optional, Sequence, Set, Tuple

from eonsurv.fabric import (
    ADD,
    DROP,
    BVReceiver,
    BVTransmitter,
    Combiner,
    Crossbar,
    CrossConnectDemand,
    FabricConfig,
    FixedSplitter,
    FlexWSS,
    NodeFabric,
    Port,
    Signal,
    SignalId,
    VOS,
    interference_events,
    propagate,
)

Route = List[Tuple[str, Optional[int], Optional[int]]]


def enumerate_routes(fabric: NodeFabric, demand: CrossConnectDemand) -> List[Route]:
    """Every structural route for one demand, with no pruning at all."""
    routes: List[Route] = []
    if demand.dest == DROP:
        exit_port = None
    else:
        exit_port = fabric.egress_ports.get(demand.dest)
        if exit_port is None:
            return []

    def dfs(in_port: Port, steps: Route) -> None:
        comp = in_port.comp
        kind = fabric.kind(comp)
        if isinstance(kind, BVReceiver):
            if demand.dest == DROP:
                routes.append(steps + [(comp, in_port.idx, None)])
            return
        if isinstance(kind, BVTransmitter):
            return
        if isinstance(kind, FlexWSS):
            outs = range(kind.branch_ports) if kind.mode == "demux" else (0,)
            in_idx = 0 if kind.mode == "demux" else in_port.idx
        elif isinstance(kind, FixedSplitter):
            outs = range(kind.fanout)
            in_idx = 0
        elif isinstance(kind, VOS):
            outs = (0, 1)
            in_idx = 0
        elif isinstance(kind, Crossbar):
            outs = range(kind.ports)
            in_idx = in_port.idx
        elif isinstance(kind, Combiner):
            outs = (0,)
            in_idx = in_port.idx
        else:
            return
        for j in outs:
            out = Port(comp, "out", j)
            step = (comp, in_idx, j)
            if out == exit_port:
                routes.append(steps + [step])
                continue
            target = fabric.edges.get(out)
            if target is not None:
                dfs(target, steps + [step])

    if demand.source == ADD:
        for t in fabric.transmitters():
            kind = fabric.kind(t)
            for o in range(kind.out_ports):
                target = fabric.edges.get(Port(t, "out", o))
                if target is not None:
                    dfs(target, [(t, None, o)])
    else:
        start = fabric.ingress_ports.get(demand.source)
        if start is not None:
            dfs(start, [])
    return routes


def naive_apply(
    fabric: NodeFabric,
    demands: Sequence[CrossConnectDemand],
    routes: Sequence[Route],
) -> Optional[FabricConfig]:
    """Turn one route per demand into a config, or None on any clash."""
    config = FabricConfig(fabric)
    for demand, route in zip(demands, routes):
        sid = demand.sid
        for comp, i, j in route:
            kind = fabric.kind(comp)
            if isinstance(kind, FlexWSS):
                key = j if kind.mode == "demux" else i
                m = config.wss.setdefault(comp, {})
                if any(m.get(s, key) != key for s in demand.slots):
                    return None
                refs = config.wss_refs.setdefault(comp, {})
                for s in demand.slots:
                    m[s] = key
                    refs.setdefault(s, set()).add(sid)
            elif isinstance(kind, Crossbar):
                m = config.xbar.setdefault(comp, {})
                if m.get(i, j) != j:
                    return None
                if i not in m and j in m.values():
                    return None
                m[i] = j
                config.xbar_refs.setdefault(comp, {}).setdefault(i, set()).add(sid)
            elif isinstance(kind, VOS):
                config.vos_refs.setdefault(comp, {}).setdefault(j, set()).add(sid)
            elif isinstance(kind, BVTransmitter):
                taken = config.bvt_refs.get(comp, set())
                if (taken and sid not in taken) or config.bvt.get(comp, j) != j:
                    return None
                config.bvt[comp] = j
                config.bvt_refs.setdefault(comp, set()).add(sid)
            elif isinstance(kind, BVReceiver):
                taken = config.bvr_refs.get(comp, set())
                if taken and sid not in taken:
                    return None
                config.bvr_refs.setdefault(comp, set()).add(sid)
    return config


def _drop_label(fabric: NodeFabric, config: FabricConfig, sid: SignalId) -> Optional[str]:
    for comp, refs in config.bvr_refs.items():
        if sid in refs:
            return fabric.drop_labels.get(comp)
    return None


def _dest_label(fabric: NodeFabric, config: FabricConfig, d: CrossConnectDemand) -> Optional[str]:
    return _drop_label(fabric, config, d.sid) if d.dest == DROP else d.dest


def _inject(d: CrossConnectDemand):
    sig = Signal(d.sid, d.slots)
    if d.source == ADD:
        return {}, [sig]
    return {d.source: [sig]}, []


def propagate_ok(
    fabric: NodeFabric,
    config: FabricConfig,
    demands: Sequence[CrossConnectDemand],
    exclusive: Sequence = (),
) -> bool:
    """Does the config deliver every demand and keep non-exclusive pairs clean?"""
    excl = {frozenset(p) for p in exclusive}
    labels: Dict[SignalId, Optional[str]] = {}
    for d in demands:
        labels[d.sid] = _dest_label(fabric, config, d)
        if labels[d.sid] is None:
            return False
    # alone, each signal must arrive intact at its destination
    for d in demands:
        ingress, adds = _inject(d)
        trace = propagate(fabric, config, ingress=ingress, adds=adds)
        spot = trace.egress if d.dest != DROP else trace.drops
        got = [i for i in spot.get(labels[d.sid], []) if i.sid == d.sid]
        delivered = frozenset().union(*[frozenset(i.slots) for i in got]) if got else frozenset()
        if not frozenset(d.slots) <= delivered:
            return False
    # in non-exclusive pairs, neither may corrupt the other's assigned slots
    assignments: Dict[str, Dict[SignalId, object]] = {}
    for d in demands:
        assignments.setdefault(labels[d.sid], {})[d.sid] = d.slots
    for da, db in combinations(demands, 2):
        if frozenset((da.sid, db.sid)) in excl:
            continue
        ia, aa = _inject(da)
        ib, ab = _inject(db)
        merged_ingress: Dict[str, list] = {}
        for src, sigs in list(ia.items()) + list(ib.items()):
            merged_ingress.setdefault(src, []).extend(sigs)
        trace = propagate(fabric, config, ingress=merged_ingress, adds=list(aa) + list(ab))
        if interference_events(trace, {da.sid, db.sid}, assignments):
            return False
    return True


def brute_force_feasible(
    fabric: NodeFabric,
    demands: Sequence[CrossConnectDemand],
    exclusive: Sequence = (),
) -> bool:
    """Exhaustively try every combination of structural routes."""
    per_demand = [enumerate_routes(fabric, d) for d in demands]
    if any(not rs for rs in per_demand):
        return False
    for combo in product(*per_demand):
        config = naive_apply(fabric, demands, combo)
        if config is None:
            continue
        if propagate_ok(fabric, config, demands, exclusive):
            return True
    return False
