"""Search for a fabric configuration realizing a set of cross-connects."""
from __future__ import annotations

import weakref
from collections import deque
from dataclasses import dataclass
from typing import (
    Collection,
    Deque,
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
)

from ..spectrum import SlotSet
from .components import (
    ADD,
    DROP,
    BVReceiver,
    BVTransmitter,
    Combiner,
    Crossbar,
    FabricConfig,
    FabricMismatch,
    FixedSplitter,
    FlexWSS,
    NodeFabric,
    Port,
    SignalId,
    VOS,
    n_outputs,
)

NO_PATH = "NoPath"
SLOT_CONFLICT_AT_WSS = "SlotConflictAtWSS"
NO_FREE_SPLITTER_OUTPUT = "NoFreeSplitterOutput"
NO_FREE_COMBINER = "NoFreeCombiner"
NO_COMBINING = "NoCombining"

# When several causes block a demand, report the most architectural one.
CAUSE_RANK = {
    NO_PATH: 1,
    SLOT_CONFLICT_AT_WSS: 2,
    NO_FREE_SPLITTER_OUTPUT: 3,
    NO_FREE_COMBINER: 4,
    NO_COMBINING: 5,
}


class Infeasible(Exception):
    """No configuration realizes the requested cross-connects."""

    def __init__(self, cause: str, node: str, detail: str = ""):
        self.cause = cause
        self.node = node
        self.detail = detail
        msg = f"{node}: {cause}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


@dataclass(frozen=True)
class CrossConnectDemand:
    """One signal through one node: where it enters, leaves, and on what slots.

    source is an ingress label or ADD; dest is an egress label or DROP.
    """

    sid: SignalId
    source: str
    dest: str
    slots: SlotSet

    def __post_init__(self) -> None:
        if not self.slots:
            raise ValueError(f"demand {self.sid} has no slots")


Route = List[Tuple[str, Optional[int], Optional[int]]]  # (comp, in idx, out idx)
ExclusivePairs = Set[FrozenSet[SignalId]]


def find_config(
    fabric: NodeFabric,
    demands: Sequence[CrossConnectDemand],
    base: Optional[FabricConfig] = None,
    exclusive: Collection[Collection[SignalId]] = (),
    harm_check: bool = True,
) -> FabricConfig:
    """Extend base (or an empty config) to realize every demand.

    Demands whose signal already has entries in base keep them untouched;
    only the remaining ones are routed, by exhaustive backtracking over the
    structural alternatives the fabric offers. exclusive lists pairs of
    signals that are never active at the same time, so their overlap at a
    combiner is not counted as harmful. Raises Infeasible with the
    highest-ranked blocking cause when no complete extension exists.
    """
    if base is not None and base.fabric.name != fabric.name:
        raise FabricMismatch(f"{base.fabric.name} vs {fabric.name}")
    config = base.clone() if base is not None else FabricConfig(fabric)
    by_sid: Dict[SignalId, CrossConnectDemand] = {}
    for d in demands:
        if d.sid in by_sid:
            raise ValueError(f"duplicate demand for {d.sid}")
        by_sid[d.sid] = d
    have = config.all_signals()
    new = [d for d in demands if d.sid not in have]
    excl: ExclusivePairs = {frozenset(p) for p in exclusive}
    harm_scope = _suspects(by_sid, excl) if harm_check else {}
    causes: Set[str] = set()
    if _assign(fabric, config, new, 0, harm_scope, excl, causes):
        return config
    cause = max(causes, key=lambda c: CAUSE_RANK[c]) if causes else NO_PATH
    blocked = ", ".join(str(d.sid) for d in new)
    raise Infeasible(cause, fabric.name, f"cannot realize {blocked}")


def _suspects(
    by_sid: Mapping[SignalId, CrossConnectDemand], excl: ExclusivePairs
) -> Dict[SignalId, CrossConnectDemand]:
    """Demands that could take part in a harmful merge.

    A signal's copies never carry slots outside its own demand, and one
    signal's presence never changes another's delivered content, so only
    members of a non-exclusive slot-overlapping pair need walking.
    """
    ds = [(sid, d.slots.mask) for sid, d in by_sid.items()]
    keep: Set[SignalId] = set()
    for i, (sa, fa) in enumerate(ds):
        for sb, fb in ds[i + 1 :]:
            if fa & fb and frozenset((sa, sb)) not in excl:
                keep.add(sa)
                keep.add(sb)
    if len(keep) == len(by_sid):
        return dict(by_sid)
    return {sid: by_sid[sid] for sid in by_sid if sid in keep}


def _assign(
    fabric: NodeFabric,
    config: FabricConfig,
    new: List[CrossConnectDemand],
    i: int,
    harm_scope: Mapping[SignalId, CrossConnectDemand],
    excl: ExclusivePairs,
    causes: Set[str],
) -> bool:
    if i == len(new):
        return True
    d = new[i]
    before = len(causes)
    for route in _routes(fabric, config, d, causes, excl):
        if _apply(fabric, config, d, route, causes, harm_scope, excl):
            if _assign(fabric, config, new, i + 1, harm_scope, excl, causes):
                return True
            config.remove_signal(d.sid)
    if len(causes) == before:
        causes.add(NO_PATH)
    return False


_PREDS_CACHE: "weakref.WeakKeyDictionary[NodeFabric, Dict[str, Set[str]]]" = (
    weakref.WeakKeyDictionary()
)


def _preds(fabric: NodeFabric) -> Dict[str, Set[str]]:
    # Wiring never changes after build, so the predecessor map is cached
    # per fabric instance.
    preds = _PREDS_CACHE.get(fabric)
    if preds is None:
        preds = {}
        for out_p, in_p in fabric.edges.items():
            preds.setdefault(in_p.comp, set()).add(out_p.comp)
        _PREDS_CACHE[fabric] = preds
    return preds


_REACH_CACHE: "weakref.WeakKeyDictionary[NodeFabric, Dict[FrozenSet[str], Set[str]]]" = (
    weakref.WeakKeyDictionary()
)


def _reverse_reach(fabric: NodeFabric, exit_comps: Set[str]) -> Set[str]:
    per_fabric = _REACH_CACHE.get(fabric)
    if per_fabric is None:
        per_fabric = {}
        _REACH_CACHE[fabric] = per_fabric
    key = frozenset(exit_comps)
    hit = per_fabric.get(key)
    if hit is not None:
        return hit
    preds = _preds(fabric)
    reach = set(exit_comps)
    work = list(exit_comps)
    while work:
        comp = work.pop()
        for p in preds.get(comp, ()):
            if p not in reach:
                reach.add(p)
                work.append(p)
    per_fabric[key] = reach
    return reach


def _shareable(refs: Iterable[SignalId], sid: SignalId, excl: ExclusivePairs) -> bool:
    """A transceiver can host signals that are never active together."""
    return all(s == sid or frozenset((s, sid)) in excl for s in refs)


_SuccEntry = Tuple[Port, Optional[Port], Optional[str], bool, bool, bool]
_SUCC_CACHE: "weakref.WeakKeyDictionary[NodeFabric, Dict[str, Tuple[_SuccEntry, ...]]]" = (
    weakref.WeakKeyDictionary()
)


def _succs(fabric: NodeFabric) -> Dict[str, Tuple[_SuccEntry, ...]]:
    """Static per-component output table: wiring never changes after build.

    Entry: (out port, fed input or None, fed component or None, and whether
    that component is a crossbar / combiner / flex WSS).
    """
    table = _SUCC_CACHE.get(fabric)
    if table is None:
        table = {}
        for comp in fabric.components:
            kind = fabric.kind(comp)
            entries = []
            for j in range(n_outputs(kind)):
                out = Port(comp, "out", j)
                tgt = fabric.edges.get(out)
                if tgt is None:
                    entries.append((out, None, None, False, False, False))
                else:
                    tk = fabric.kind(tgt.comp)
                    entries.append(
                        (
                            out,
                            tgt,
                            tgt.comp,
                            isinstance(tk, Crossbar),
                            isinstance(tk, Combiner),
                            isinstance(tk, FlexWSS),
                        )
                    )
            table[comp] = tuple(entries)
        _SUCC_CACHE[fabric] = table
    return table


def _routes(
    fabric: NodeFabric,
    config: FabricConfig,
    demand: CrossConnectDemand,
    causes: Set[str],
    excl: ExclusivePairs,
) -> Iterator[Route]:
    """Enumerate structural routes for one demand, most promising first.

    Alternatives that differ only in which interchangeable resource they use
    (splitter output, combiner input) are collapsed to one representative.
    """
    caps = fabric.capabilities
    slots = list(demand.slots)
    succ = _succs(fabric)

    if demand.dest == DROP:
        allowed_receivers = {
            r for r in config.bvr_refs if _shareable(config.bvr_refs[r], demand.sid, excl)
        }
        free = [r for r in fabric.receivers() if r not in config.bvr_refs]
        if free:
            allowed_receivers.add(free[0])
        if not allowed_receivers:
            causes.add(NO_PATH)
            return
        exit_port: Optional[Port] = None
        exit_comps = set(allowed_receivers)
    else:
        boundary = fabric.egress_ports.get(demand.dest)
        if boundary is None:
            causes.add(NO_PATH)
            return
        exit_port = boundary
        exit_comps = {boundary.comp}
    reach = _reverse_reach(fabric, exit_comps)

    def go(entry: _SuccEntry, step, steps: Route) -> Iterator[Route]:
        if exit_port is not None and entry[0] == exit_port:
            yield steps + [step]
            return
        target = entry[1]
        if target is None or entry[2] not in reach:
            return
        yield from dfs(target, steps + [step])

    def dfs(in_port: Port, steps: Route) -> Iterator[Route]:
        comp = in_port.comp
        kind = fabric.kind(comp)
        if isinstance(kind, BVReceiver):
            if demand.dest == DROP and comp in exit_comps:
                yield steps + [(comp, in_port.idx, None)]
            return
        outs = succ[comp]
        if isinstance(kind, FlexWSS):
            m = config.wss.get(comp)
            # branch j is usable iff no demand slot is already picked
            # toward a different branch, i.e. the picked-key set is {} or {j}
            if m:
                ks = {m.get(s) for s in slots}
                ks.discard(None)
            else:
                ks = set()
            many = len(ks) > 1
            if kind.mode == "demux":
                for j in range(kind.branch_ports):
                    if ks and (many or j not in ks):
                        causes.add(SLOT_CONFLICT_AT_WSS)
                        continue
                    yield from go(outs[j], (comp, 0, j), steps)
            else:
                j = in_port.idx
                if ks and (many or j not in ks):
                    causes.add(
                        SLOT_CONFLICT_AT_WSS if caps.supports_combining else NO_COMBINING
                    )
                    return
                yield from go(outs[0], (comp, j, 0), steps)
            return
        if isinstance(kind, FixedSplitter):
            mapped: List[_SuccEntry] = []
            fresh: Optional[_SuccEntry] = None
            others: List[_SuccEntry] = []
            for entry in outs:
                target = entry[1]
                if target is None or entry[2] not in reach:
                    continue
                if entry[3]:
                    if target.idx in config.xbar.get(entry[2], {}):
                        mapped.append(entry)
                    elif fresh is None:
                        fresh = entry
                else:
                    others.append(entry)
            for entry in mapped + ([fresh] if fresh is not None else []) + others:
                yield from go(entry, (comp, 0, entry[0].idx), steps)
            return
        if isinstance(kind, VOS):
            for j in (0, 1):
                yield from go(outs[j], (comp, 0, j), steps)
            return
        if isinstance(kind, Crossbar):
            m = config.xbar.get(comp, {})
            i = in_port.idx
            if i in m:
                o = m[i]
                entry = outs[o]
                if entry[1] is not None and entry[2] in reach:
                    yield from go(entry, (comp, i, o), steps)
                else:
                    # this trunk copy is already committed elsewhere
                    causes.add(NO_FREE_SPLITTER_OUTPUT)
                return
            used = set(m.values())
            chosen: Dict[str, _SuccEntry] = {}
            order: List[str] = []
            sighted: Set[str] = set()
            for o, entry in enumerate(outs):
                tc = entry[2]
                if tc is None or tc not in reach:
                    continue
                sighted.add(tc)
                if o in used:
                    continue
                if tc not in chosen:
                    chosen[tc] = entry
                    order.append(tc)
            for tc in sorted(sighted - set(chosen)):
                if isinstance(fabric.kind(tc), Combiner):
                    causes.add(NO_FREE_COMBINER)
            for tc in order:
                entry = chosen[tc]
                yield from go(entry, (comp, i, entry[0].idx), steps)
            return
        if isinstance(kind, Combiner):
            yield from go(outs[0], (comp, in_port.idx, 0), steps)
            return
        return  # a transmitter is never in the middle of a route

    if demand.source == ADD:
        shared = [
            t for t in sorted(config.bvt_refs)
            if _shareable(config.bvt_refs[t], demand.sid, excl)
        ]
        free = [t for t in fabric.transmitters() if t not in config.bvt]
        candidates = shared + free[:1]
        if not candidates:
            causes.add(NO_PATH)
            return
        backup = demand.sid.role == "backup"
        for t in candidates:
            branches: List[Tuple[bool, int, Port]] = []
            for o, entry in enumerate(succ[t]):
                if entry[1] is None or entry[2] not in reach:
                    continue
                branches.append((entry[5], o, entry[1]))
            # a protection path heads for a combiner so it can share spectrum;
            # a working path takes the single-source input when one exists
            branches.sort(key=lambda x: ((x[0] if backup else not x[0]), x[1]))
            for _, o, target in branches:
                yield from dfs(target, [(t, None, o)])
        return
    start = fabric.ingress_ports.get(demand.source)
    if start is None or start.comp not in reach:
        causes.add(NO_PATH)
        return
    yield from dfs(start, [])


def _apply(
    fabric: NodeFabric,
    config: FabricConfig,
    demand: CrossConnectDemand,
    route: Route,
    causes: Set[str],
    harm_scope: Mapping[SignalId, CrossConnectDemand],
    excl: ExclusivePairs,
) -> bool:
    """Commit one route. On any rejection, roll back and record the cause."""
    sid = demand.sid
    slots = list(demand.slots)
    caps = fabric.capabilities
    jn = config._journal.setdefault(sid, [])
    fail: Optional[str] = None
    for comp, in_idx, out_idx in route:
        kind = fabric.kind(comp)
        if isinstance(kind, FlexWSS):
            key = out_idx if kind.mode == "demux" else in_idx
            m = config.wss.setdefault(comp, {})
            refs = config.wss_refs.setdefault(comp, {})
            if any(m.get(s) not in (None, key) for s in slots):
                fail = (
                    SLOT_CONFLICT_AT_WSS
                    if caps.supports_combining or kind.mode == "demux"
                    else NO_COMBINING
                )
                break
            for s in slots:
                m[s] = key
                refs.setdefault(s, set()).add(sid)
                jn.append(("wss", comp, s))
        elif isinstance(kind, Crossbar):
            m = config.xbar.setdefault(comp, {})
            refs = config.xbar_refs.setdefault(comp, {})
            cur = m.get(in_idx)
            if cur == out_idx:
                refs.setdefault(in_idx, set()).add(sid)
                jn.append(("xbar", comp, in_idx))
            elif cur is not None:
                fail = NO_FREE_SPLITTER_OUTPUT
                break
            elif out_idx in m.values():
                fail = NO_FREE_COMBINER
                break
            else:
                m[in_idx] = out_idx
                refs.setdefault(in_idx, set()).add(sid)
                jn.append(("xbar", comp, in_idx))
        elif isinstance(kind, VOS):
            config.vos_refs.setdefault(comp, {}).setdefault(out_idx, set()).add(sid)
            jn.append(("vos", comp, out_idx))
        elif isinstance(kind, BVTransmitter):
            if comp in config.bvt and config.bvt[comp] != out_idx:
                fail = NO_PATH
                break
            if not _shareable(config.bvt_refs.get(comp, ()), sid, excl):
                fail = NO_PATH
                break
            config.bvt[comp] = out_idx
            config.bvt_refs.setdefault(comp, set()).add(sid)
            jn.append(("bvt", comp, 0))
        elif isinstance(kind, BVReceiver):
            if not _shareable(config.bvr_refs.get(comp, ()), sid, excl):
                fail = NO_PATH
                break
            config.bvr_refs.setdefault(comp, set()).add(sid)
            jn.append(("bvr", comp, 0))
        elif isinstance(kind, Combiner):
            config.comb_refs.setdefault(comp, {}).setdefault(in_idx, set()).add(sid)
            jn.append(("comb", comp, in_idx))
        # splitters are passive: presence needs no entry
    # Light reaches a combiner input only along some routed signal's steps
    # (selective components block everything unrouted), so a fabric whose
    # combiners each feed from at most one input cannot merge anything.
    if (
        fail is None
        and harm_scope
        and any(len(per) > 1 for per in config.comb_refs.values())
        and _has_harm(fabric, config, harm_scope, excl)
    ):
        fail = NO_FREE_COMBINER
    if fail is not None:
        config.remove_signal(sid)
        causes.add(fail)
        return False
    return True


_OP_NONE, _OP_WSS_DEMUX, _OP_WSS_MUX, _OP_SPLIT, _OP_VOS, _OP_XBAR, _OP_COMB = range(7)


class _Machine:
    """Dense integer view of one fabric for the propagation walk.

    Wiring never changes after build, so ports get dense ids, slot sets
    become bit masks, and crossing history becomes a mask over combiners.
    Compiled once per fabric and cached.
    """

    __slots__ = (
        "ports",
        "port_id",
        "edge_to",
        "sink",
        "comp_of",
        "in_side",
        "ops",
        "comb_bit",
        "comb_names",
        "in_pids",
        "n_comps",
        "topo",
    )

    def __init__(self, fabric: NodeFabric) -> None:
        comps = list(fabric.components)
        cid_of = {c: i for i, c in enumerate(comps)}
        self.ports: List[Port] = []
        self.port_id: Dict[Port, int] = {}
        self.comp_of: List[int] = []
        self.in_side: List[bool] = []
        self.in_pids: Dict[str, Tuple[int, ...]] = {}
        out_pids: Dict[str, Tuple[int, ...]] = {}
        for comp in comps:
            cid = cid_of[comp]
            self.in_pids[comp] = tuple(
                self._add(p, cid, True) for p in fabric.in_ports(comp)
            )
            out_pids[comp] = tuple(
                self._add(p, cid, False) for p in fabric.out_ports(comp)
            )
        self.edge_to = [-1] * len(self.ports)
        for out_p, in_p in fabric.edges.items():
            self.edge_to[self.port_id[out_p]] = self.port_id[in_p]
        # One write per emission: wired outputs forward to the fed input,
        # unwired egress outputs hold their own row, anything else is void.
        self.sink = list(self.edge_to)
        for p, _label in fabric.egress_labels.items():
            pid = self.port_id[p]
            if self.sink[pid] < 0:
                self.sink[pid] = pid
        self.comb_bit: Dict[str, int] = {}
        self.comb_names: List[str] = []
        self.ops: List[Tuple] = []
        for comp in comps:
            kind = fabric.kind(comp)
            ins = self.in_pids[comp]
            outs = out_pids[comp]
            if isinstance(kind, FlexWSS):
                if kind.mode == "demux":
                    self.ops.append((_OP_WSS_DEMUX, comp, ins[0], outs))
                else:
                    self.ops.append((_OP_WSS_MUX, comp, ins, outs[0]))
            elif isinstance(kind, FixedSplitter):
                self.ops.append((_OP_SPLIT, comp, ins[0], outs))
            elif isinstance(kind, VOS):
                self.ops.append((_OP_VOS, comp, ins[0], outs))
            elif isinstance(kind, Crossbar):
                self.ops.append((_OP_XBAR, comp, ins, outs))
            elif isinstance(kind, Combiner):
                bit = 1 << len(self.comb_names)
                self.comb_bit[comp] = bit
                self.comb_names.append(comp)
                self.ops.append((_OP_COMB, comp, ins, outs[0], bit))
            else:
                # transmitters are seeded, receivers just hold arrivals
                self.ops.append((_OP_NONE, comp))
        self.n_comps = len(comps)
        # wiring is a checked DAG, so processing components in topological
        # order settles every row in a single pass
        edges_out: List[Set[int]] = [set() for _ in comps]
        indeg = [0] * self.n_comps
        for cid, op in enumerate(self.ops):
            tag = op[0]
            if tag in (_OP_WSS_DEMUX, _OP_SPLIT, _OP_VOS):
                op_outs: Iterable[int] = op[3]
            elif tag == _OP_XBAR:
                op_outs = op[3]
            elif tag in (_OP_WSS_MUX, _OP_COMB):
                op_outs = (op[3],)
            else:
                continue
            for out_pid in op_outs:
                t = self.sink[out_pid]
                if t < 0:
                    continue
                tc = self.comp_of[t]
                if tc != cid and tc not in edges_out[cid]:
                    edges_out[cid].add(tc)
                    indeg[tc] += 1
        ready = [cid for cid in range(self.n_comps) if indeg[cid] == 0]
        order: List[int] = []
        while ready:
            cid = ready.pop()
            order.append(cid)
            for tc in edges_out[cid]:
                indeg[tc] -= 1
                if indeg[tc] == 0:
                    ready.append(tc)
        if len(order) != self.n_comps:
            raise ValueError(f"cycle in fabric wiring of {fabric.name}")
        self.topo = tuple(order)

    def _add(self, p: Port, cid: int, is_in: bool) -> int:
        pid = len(self.ports)
        self.ports.append(p)
        self.port_id[p] = pid
        self.comp_of.append(cid)
        self.in_side.append(is_in)
        return pid


_MACHINES: "weakref.WeakKeyDictionary[NodeFabric, _Machine]" = (
    weakref.WeakKeyDictionary()
)


def _machine(fabric: NodeFabric) -> _Machine:
    m = _MACHINES.get(fabric)
    if m is None:
        m = _Machine(fabric)
        _MACHINES[fabric] = m
    return m


def _bits(mask: int) -> FrozenSet[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return frozenset(out)


_Rows = List[Optional[Dict[int, Tuple[int, int]]]]
_RawEvents = Dict[Tuple[str, int, int], int]


def _machine_walk(
    fabric: NodeFabric,
    config: FabricConfig,
    by_sid: Mapping[SignalId, CrossConnectDemand],
) -> Tuple[_Rows, _RawEvents, List[SignalId], _Machine]:
    """Single pass over (port, signal) -> (slots, combiners crossed).

    Deliberately a different formulation from the batch flood used for
    observation, so the two can check each other. Copies of one signal that
    meet at a port are folded together, which can only overstate the slots
    and combiner history a copy carries; the harm test therefore errs toward
    rejecting, never toward accepting. The fabric is a checked DAG and
    components are visited in topological order, so by the time one is
    processed all its input rows are final. Rows are kept for input ports
    and unwired egress outputs, the only places read back.
    """
    mach = _machine(fabric)
    sink = mach.sink
    ops = mach.ops
    sids = list(by_sid)
    rows: _Rows = [None] * len(mach.ports)
    events: _RawEvents = {}

    def put(pid: int, isid: int, m: int, via: int) -> None:
        row = rows[pid]
        if row is None:
            rows[pid] = {isid: (m, via)}
            return
        cur = row.get(isid)
        row[isid] = (m, via) if cur is None else (cur[0] | m, cur[1] | via)

    for isid, (sid, d) in enumerate(by_sid.items()):
        m = d.slots.mask
        if not m:
            continue
        if d.source == ADD:
            comp = config.transmitter_of(sid)
            if comp is not None and comp in config.bvt:
                pid = mach.port_id.get(Port(comp, "out", config.bvt[comp]))
                if pid is not None:
                    t = sink[pid]
                    if t >= 0:
                        put(t, isid, m, 0)
        else:
            p = fabric.ingress_ports.get(d.source)
            if p is not None:
                put(mach.port_id[p], isid, m, 0)

    for cid in mach.topo:
        op = ops[cid]
        tag = op[0]
        if tag == _OP_WSS_DEMUX:
            _, comp, in_pid, outs = op
            row = rows[in_pid]
            if not row:
                continue
            m_wss = config.wss.get(comp)
            if not m_wss:
                continue
            picks = [0] * len(outs)
            for s, b in m_wss.items():
                picks[b] |= 1 << s
            for j, out_pid in enumerate(outs):
                pk = picks[j]
                if not pk:
                    continue
                t = sink[out_pid]
                if t < 0:
                    continue
                for isid, (m, via) in row.items():
                    mm = m & pk
                    if mm:
                        put(t, isid, mm, via)
        elif tag == _OP_WSS_MUX:
            _, comp, ins, out_pid = op
            t = sink[out_pid]
            if t < 0:
                continue
            m_wss = config.wss.get(comp)
            if not m_wss:
                continue
            picks = [0] * len(ins)
            for s, b in m_wss.items():
                picks[b] |= 1 << s
            for j, in_pid in enumerate(ins):
                row = rows[in_pid]
                if not row:
                    continue
                pk = picks[j]
                if not pk:
                    continue
                for isid, (m, via) in row.items():
                    mm = m & pk
                    if mm:
                        put(t, isid, mm, via)
        elif tag == _OP_SPLIT:
            _, comp, in_pid, outs = op
            row = rows[in_pid]
            if not row:
                continue
            for out_pid in outs:
                t = sink[out_pid]
                if t < 0:
                    continue
                for isid, (m, via) in row.items():
                    put(t, isid, m, via)
        elif tag == _OP_VOS:
            _, comp, in_pid, outs = op
            row = rows[in_pid]
            if not row:
                continue
            state = config.vos_state(comp)
            if state is None:
                continue
            for j in (0, 1):
                if state[j]:
                    t = sink[outs[j]]
                    if t < 0:
                        continue
                    for isid, (m, via) in row.items():
                        put(t, isid, m, via)
        elif tag == _OP_XBAR:
            _, comp, ins, outs = op
            xm = config.xbar.get(comp)
            if not xm:
                continue
            for i, o in xm.items():
                t = sink[outs[o]]
                if t < 0:
                    continue
                row = rows[ins[i]]
                if not row:
                    continue
                for isid, (m, via) in row.items():
                    put(t, isid, m, via)
        elif tag == _OP_COMB:
            _, comp, ins, out_pid, bit = op
            rows_in = [r for r in (rows[p] for p in ins) if r]
            if not rows_in:
                continue
            n = len(rows_in)
            if n > 1:
                # skip input pairs whose total spectra are disjoint
                unions = [0] * n
                for x in range(n):
                    u = 0
                    for m, _v in rows_in[x].values():
                        u |= m
                    unions[x] = u
                for x in range(n):
                    rx = rows_in[x]
                    ux = unions[x]
                    for y in range(x + 1, n):
                        if not (ux & unions[y]):
                            continue
                        for sa, (sla, _va) in rx.items():
                            for sb, (slb, _vb) in rows_in[y].items():
                                if sa == sb:
                                    continue
                                ov = sla & slb
                                if ov:
                                    key = (
                                        (comp, sa, sb)
                                        if sa < sb
                                        else (comp, sb, sa)
                                    )
                                    events[key] = events.get(key, 0) | ov
            t = sink[out_pid]
            if t < 0:
                continue
            merged: Dict[int, Tuple[int, int]] = {}
            for r in rows_in:
                for isid, (m, via) in r.items():
                    cur = merged.get(isid)
                    if cur is None:
                        merged[isid] = (m, via)
                    else:
                        merged[isid] = (cur[0] | m, cur[1] | via)
            for isid, (m, via) in merged.items():
                put(t, isid, m, via | bit)
    return rows, events, sids, mach


def _walk(
    fabric: NodeFabric,
    config: FabricConfig,
    by_sid: Mapping[SignalId, CrossConnectDemand],
) -> Tuple[
    Dict[Port, Dict[SignalId, Tuple[FrozenSet[int], FrozenSet[str]]]],
    Dict[Tuple[str, SignalId, SignalId], FrozenSet[int]],
]:
    """Readable view of the machine walk, keyed by ports and signal ids.

    Covers input ports and egress outputs; interior output ports forward
    without holding a row of their own.
    """
    rows, raw, sids, mach = _machine_walk(fabric, config, by_sid)
    ports = mach.ports
    names = mach.comb_names
    content: Dict[Port, Dict[SignalId, Tuple[FrozenSet[int], FrozenSet[str]]]] = {}
    for pid, row in enumerate(rows):
        if not row:
            continue
        content[ports[pid]] = {
            sids[isid]: (_bits(m), frozenset(names[b] for b in _bits(via)))
            for isid, (m, via) in row.items()
        }
    events: Dict[Tuple[str, SignalId, SignalId], FrozenSet[int]] = {}
    for (comp, ia, ib), mk in raw.items():
        a, b = sorted((sids[ia], sids[ib]))
        events[(comp, a, b)] = _bits(mk)
    return content, events


def _has_harm(
    fabric: NodeFabric,
    config: FabricConfig,
    by_sid: Mapping[SignalId, CrossConnectDemand],
    excl: ExclusivePairs,
) -> bool:
    """Would any non-exclusive overlap corrupt slots a signal is owed?

    Checks every delivery point, egress and receiver alike, so a node never
    accepts a cross-connect that poisons what it hands off or terminates.
    """
    rows, events, sids, mach = _machine_walk(fabric, config, by_sid)
    if not events:
        return False
    ix = {s: i for i, s in enumerate(sids)}
    excl_ix: Set[Tuple[int, int]] = set()
    for pair in excl:
        got = [ix[s] for s in pair if s in ix]
        if len(got) == 2:
            a, b = got
            excl_ix.add((a, b) if a < b else (b, a))
    spots_cache: Dict[int, List[int]] = {}
    owned_cache: Dict[int, int] = {}
    for (comp, ia, ib), overlap in events.items():
        if (ia, ib) in excl_ix:
            continue
        bit = mach.comb_bit[comp]
        for vic in (ia, ib):
            d = by_sid.get(sids[vic])
            if d is None:
                continue
            om = owned_cache.get(vic)
            if om is None:
                om = d.slots.mask
                owned_cache[vic] = om
            spots = spots_cache.get(vic)
            if spots is None:
                spots = []
                if d.dest == DROP:
                    svic = sids[vic]
                    for c, refs in config.bvr_refs.items():
                        if svic in refs:
                            spots.extend(mach.in_pids[c])
                else:
                    p = fabric.egress_ports.get(d.dest)
                    if p is not None:
                        pid = mach.port_id.get(p)
                        if pid is not None:
                            spots.append(pid)
                spots_cache[vic] = spots
            for pid in spots:
                row = rows[pid]
                if not row:
                    continue
                e = row.get(vic)
                if e and (e[1] & bit) and (overlap & e[0] & om):
                    return True
    return False


def egress_delivery(
    fabric: NodeFabric,
    config: FabricConfig,
    demands: Sequence[CrossConnectDemand],
    sid: SignalId,
    label: str,
) -> FrozenSet[int]:
    """Slots one egress carries on this signal's account, co-riders included.

    Whatever merged with the signal's copies at a shared combiner rides the
    same egress, so slots of other signals whose crossing history meets this
    signal's are counted in.
    """
    port = fabric.egress_ports.get(label)
    if port is None:
        return frozenset()
    by_sid = {d.sid: d for d in demands}
    rows, _events, sids, mach = _machine_walk(fabric, config, by_sid)
    row = rows[mach.port_id[port]]
    if not row:
        return frozenset()
    try:
        me = sids.index(sid)
    except ValueError:
        return frozenset()
    mine = row.get(me)
    if mine is None:
        return frozenset()
    total, via = mine
    if via:
        for isid, (m, v) in row.items():
            if v & via:
                total |= m
    return _bits(total)
