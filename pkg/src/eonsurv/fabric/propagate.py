"""Flood a configured fabric with signals and observe what comes out where."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from ..spectrum import SlotSet
from .components import (
    BVReceiver,
    BVTransmitter,
    Combiner,
    Crossbar,
    FabricConfig,
    FixedSplitter,
    FlexWSS,
    NodeFabric,
    Port,
    Signal,
    SignalId,
    VOS,
)


@dataclass(frozen=True)
class Instance:
    """One copy of a signal at a specific point in the fabric."""

    sid: SignalId
    slots: SlotSet
    power: float = 1.0
    via: frozenset = frozenset()  # combiner components this copy has crossed


@dataclass(frozen=True)
class InterferenceEvent:
    """Two distinct signals overlapped while merging at a combiner."""

    combiner: str
    a: SignalId
    b: SignalId
    overlap: SlotSet


@dataclass(frozen=True)
class HarmfulInterference:
    """An interference event that corrupts slots a signal is assigned."""

    combiner: str
    a: SignalId
    b: SignalId
    overlap: SlotSet
    victim: SignalId
    where: str  # egress or drop label the corruption reaches
    affected: SlotSet


class SignalTrace:
    """Everything propagate observed: per-port copies, boundary output, events."""

    def __init__(self) -> None:
        self.ports: Dict[Port, List[Instance]] = {}
        self.egress: Dict[str, List[Instance]] = {}
        self.drops: Dict[str, List[Instance]] = {}
        self.events: List[InterferenceEvent] = []

    def at_egress(self, label: str) -> List[Instance]:
        return list(self.egress.get(label, []))

    def at_drop(self, label: str) -> List[Instance]:
        return list(self.drops.get(label, []))


def _merged(instances: Iterable[Instance]) -> List[Instance]:
    """Collapse copies of the same signal into one instance."""
    by_sid: Dict[SignalId, Instance] = {}
    for inst in instances:
        prev = by_sid.get(inst.sid)
        if prev is None:
            by_sid[inst.sid] = inst
        else:
            by_sid[inst.sid] = Instance(
                inst.sid,
                prev.slots | inst.slots,
                max(prev.power, inst.power),
                prev.via | inst.via,
            )
    return [by_sid[s] for s in sorted(by_sid)]


def propagate(
    fabric: NodeFabric,
    config: FabricConfig,
    ingress: Optional[Mapping[str, Sequence[Signal]]] = None,
    adds: Sequence[Signal] = (),
) -> SignalTrace:
    """Push signals through the configured fabric in topological order.

    ingress maps boundary labels to the signals arriving on those links.
    adds are signals sourced at this node; each is emitted by the
    transmitter whose config references its id, or not at all.
    """
    trace = SignalTrace()
    arrivals: Dict[Port, List[Instance]] = {}

    def deliver(out_port: Port, instances: List[Instance]) -> None:
        if not instances:
            return
        trace.ports.setdefault(out_port, []).extend(instances)
        label = fabric.egress_labels.get(out_port)
        if label is not None:
            trace.egress.setdefault(label, []).extend(instances)
            return
        target = fabric.edges.get(out_port)
        if target is not None:
            arrivals.setdefault(target, []).extend(instances)
        # an unwired non-boundary output just loses the copy

    for label, signals in (ingress or {}).items():
        port = fabric.ingress_ports[label]
        arrivals.setdefault(port, []).extend(
            Instance(s.sid, s.slots, s.power_fraction) for s in signals
        )
    add_by_bvt: Dict[str, List[Signal]] = {}
    for s in adds:
        comp = config.transmitter_of(s.sid)
        if comp is not None:
            add_by_bvt.setdefault(comp, []).append(s)

    for comp in fabric.topo:
        kind = fabric.kind(comp)
        if isinstance(kind, FlexWSS):
            slot_map = config.wss.get(comp, {})
            if kind.mode == "demux":
                here = _merged(arrivals.get(Port(comp, "in", 0), []))
                for j in range(kind.branch_ports):
                    allowed = SlotSet(s for s, p in slot_map.items() if p == j)
                    out = [
                        Instance(i.sid, i.slots & allowed, i.power, i.via)
                        for i in here
                        if i.slots & allowed
                    ]
                    deliver(Port(comp, "out", j), out)
            else:
                gathered: List[Instance] = []
                for j in range(kind.branch_ports):
                    allowed = SlotSet(s for s, p in slot_map.items() if p == j)
                    for i in _merged(arrivals.get(Port(comp, "in", j), [])):
                        kept = i.slots & allowed
                        if kept:
                            gathered.append(Instance(i.sid, kept, i.power, i.via))
                deliver(Port(comp, "out", 0), _merged(gathered))
        elif isinstance(kind, FixedSplitter):
            here = _merged(arrivals.get(Port(comp, "in", 0), []))
            share = 1.0 / kind.fanout
            for j in range(kind.fanout):
                deliver(
                    Port(comp, "out", j),
                    [Instance(i.sid, i.slots, i.power * share, i.via) for i in here],
                )
        elif isinstance(kind, VOS):
            here = _merged(arrivals.get(Port(comp, "in", 0), []))
            state = config.vos_state(comp)
            if state is not None and here:
                for j in (0, 1):
                    if state[j]:
                        frac = state[j] / 100.0
                        deliver(
                            Port(comp, "out", j),
                            [Instance(i.sid, i.slots, i.power * frac, i.via) for i in here],
                        )
        elif isinstance(kind, Crossbar):
            mapping = config.xbar.get(comp, {})
            for in_idx, out_idx in sorted(mapping.items()):
                here = _merged(arrivals.get(Port(comp, "in", in_idx), []))
                deliver(Port(comp, "out", out_idx), here)
        elif isinstance(kind, Combiner):
            per_input = [
                _merged(arrivals.get(Port(comp, "in", j), [])) for j in range(kind.fanin)
            ]
            # merging is where distinct signals can collide; copies that
            # arrived overlapped on one input already collided upstream
            for x in range(len(per_input)):
                for y in range(x + 1, len(per_input)):
                    for ia in per_input[x]:
                        for ib in per_input[y]:
                            if ia.sid == ib.sid:
                                continue
                            overlap = ia.slots & ib.slots
                            if overlap:
                                a, b = sorted((ia.sid, ib.sid))
                                trace.events.append(
                                    InterferenceEvent(comp, a, b, overlap)
                                )
            gathered = _merged(i for insts in per_input for i in insts)
            out = [
                Instance(i.sid, i.slots, i.power, i.via | {comp}) for i in gathered
            ]
            deliver(Port(comp, "out", 0), out)
        elif isinstance(kind, BVTransmitter):
            port_idx = config.bvt.get(comp)
            if port_idx is not None:
                out = [
                    Instance(s.sid, s.slots, s.power_fraction)
                    for s in add_by_bvt.get(comp, [])
                ]
                deliver(Port(comp, "out", port_idx), out)
        elif isinstance(kind, BVReceiver):
            collected: List[Instance] = []
            for j in range(kind.in_ports):
                collected.extend(arrivals.get(Port(comp, "in", j), []))
            if collected:
                label = fabric.drop_labels.get(comp, comp)
                trace.drops.setdefault(label, []).extend(_merged(collected))
    return trace


def interference_events(
    trace: SignalTrace,
    active: Iterable[SignalId],
    assignments: Mapping[str, Mapping[SignalId, SlotSet]],
) -> List[HarmfulInterference]:
    """Filter trace events down to the ones that corrupt assigned spectrum.

    assignments maps an egress or drop label to the slots each signal owns
    there. An event is harmful when both parties are active and the victim's
    copy at such a label passed through the event's combiner still carrying
    overlap slots it is assigned.
    """
    live = set(active)
    harmful: List[HarmfulInterference] = []
    seen: Set[Tuple[str, SignalId, SignalId, SignalId, str]] = set()
    spots: List[Tuple[str, List[Instance]]] = [
        *trace.egress.items(),
        *trace.drops.items(),
    ]
    for ev in trace.events:
        if ev.a not in live or ev.b not in live:
            continue
        for victim in (ev.a, ev.b):
            for label, instances in spots:
                owned = assignments.get(label, {}).get(victim)
                if owned is None:
                    continue
                for inst in instances:
                    if inst.sid != victim or ev.combiner not in inst.via:
                        continue
                    affected = ev.overlap & inst.slots & owned
                    if not affected:
                        continue
                    key = (ev.combiner, ev.a, ev.b, victim, label)
                    if key in seen:
                        continue
                    seen.add(key)
                    harmful.append(
                        HarmfulInterference(
                            ev.combiner, ev.a, ev.b, ev.overlap, victim, label, affected
                        )
                    )
    return harmful
