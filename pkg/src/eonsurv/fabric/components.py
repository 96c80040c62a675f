"""Component kinds, fabric graphs and configuration state."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Set, Tuple, Union

from ..spectrum import SlotSet

# Endpoint markers used by cross-connect demands.
ADD = "add"
DROP = "drop"

# Switching and loss figures for the component technologies involved.
WSS_SWITCH_MS = 300.0
VOS_SWITCH_MS = 0.25
CROSSBAR_SWITCH_MS = 10.0
VOS_LOSS_DIRECT_DB = 0.6   # (100,0) or (0,100) state
VOS_LOSS_SPLIT_DB = 4.0    # (50,50) state
VOS_PDL_DB = 0.1           # polarization-dependent loss, recorded but not budgeted
VOS_SWITCH_ENERGY_UJ = 120.0

VOS_DIRECT_A = (100, 0)
VOS_SPLIT = (50, 50)
VOS_DIRECT_B = (0, 100)


class UnknownArchitecture(ValueError):
    """Architecture tag not in the catalog."""


class InvalidParams(ValueError):
    """Fabric build parameters out of range or inconsistent wiring."""


class DanglingPort(ValueError):
    """An edge or config entry references a port that does not exist."""


class FabricMismatch(ValueError):
    """Two configs (or a config and fabric) belong to different fabrics."""


class DisconnectedRoute(ValueError):
    """A loss-budget route is not a connected, lit path."""


class Port(NamedTuple):
    # NamedTuple rather than a frozen dataclass: ports key every content
    # dict in the propagation walks, so hashing must be tuple-speed.
    comp: str
    side: str  # "in" | "out"
    idx: int

    def __str__(self) -> str:
        return f"{self.comp}.{self.side}{self.idx}"


@dataclass(frozen=True)
class FlexWSS:
    """Flexgrid wavelength-selective switch.

    demux mode: one input, per-slot routing to one of `branch_ports` outputs.
    mux mode: `branch_ports` inputs, per-slot selection of one input feeding
    the single output. A slot maps to at most one branch port either way.
    """

    mode: str  # "demux" | "mux"
    branch_ports: int
    switching_time_ms: float = WSS_SWITCH_MS

    def __post_init__(self) -> None:
        if self.mode not in ("demux", "mux"):
            raise InvalidParams(f"bad WSS mode {self.mode!r}")
        if self.branch_ports < 1:
            raise InvalidParams("WSS needs at least one branch port")


@dataclass(frozen=True)
class FixedSplitter:
    """Passive power splitter: copies the input to every output."""

    fanout: int

    def __post_init__(self) -> None:
        if self.fanout < 2:
            raise InvalidParams("splitter fanout must be at least 2")


@dataclass(frozen=True)
class VOS:
    """Variable optical splitter, 1x2.

    States: (100,0) and (0,100) direct the full signal to one output;
    (50,50) copies to both at half power. Unset means dark (blocks).
    """

    switching_time_ms: float = VOS_SWITCH_MS


@dataclass(frozen=True)
class Combiner:
    """Passive merge of `fanin` inputs onto one output.

    Cannot filter: overlapping slots from different inputs interfere here.
    """

    fanin: int

    def __post_init__(self) -> None:
        if self.fanin < 1:
            raise InvalidParams("combiner fanin must be at least 1")


@dataclass(frozen=True)
class Crossbar:
    """Space switch: injective partial mapping of inputs to outputs."""

    ports: int
    switching_time_ms: float = CROSSBAR_SWITCH_MS

    def __post_init__(self) -> None:
        if self.ports < 1:
            raise InvalidParams("crossbar needs at least one port")


@dataclass(frozen=True)
class BVTransmitter:
    """Tunable transmitter; emits on the single config-selected output."""

    out_ports: int = 1
    switching_time_ms: float = 0.0


@dataclass(frozen=True)
class BVReceiver:
    """Terminal sink; records whatever arrives on its inputs."""

    in_ports: int = 1


ComponentKind = Union[
    FlexWSS, FixedSplitter, VOS, Combiner, Crossbar, BVTransmitter, BVReceiver
]


def n_inputs(kind: ComponentKind) -> int:
    if isinstance(kind, FlexWSS):
        return 1 if kind.mode == "demux" else kind.branch_ports
    if isinstance(kind, FixedSplitter):
        return 1
    if isinstance(kind, VOS):
        return 1
    if isinstance(kind, Combiner):
        return kind.fanin
    if isinstance(kind, Crossbar):
        return kind.ports
    if isinstance(kind, BVTransmitter):
        return 1  # virtual injection point
    if isinstance(kind, BVReceiver):
        return kind.in_ports
    raise TypeError(kind)


def n_outputs(kind: ComponentKind) -> int:
    if isinstance(kind, FlexWSS):
        return kind.branch_ports if kind.mode == "demux" else 1
    if isinstance(kind, FixedSplitter):
        return kind.fanout
    if isinstance(kind, VOS):
        return 2
    if isinstance(kind, Combiner):
        return 1
    if isinstance(kind, Crossbar):
        return kind.ports
    if isinstance(kind, BVTransmitter):
        return kind.out_ports
    if isinstance(kind, BVReceiver):
        return 0
    raise TypeError(kind)


def switching_time_ms(kind: ComponentKind) -> float:
    return getattr(kind, "switching_time_ms", 0.0)


class SignalId(NamedTuple):
    # NamedTuple for the same reason as Port: signal ids key the per-port
    # content maps inside the propagation walks.
    conn: str
    role: str  # "primary" | "backup"

    def __str__(self) -> str:
        return f"{self.conn}/{self.role}"

    @classmethod
    def parse(cls, text: str) -> "SignalId":
        conn, _, role = text.partition("/")
        if not conn or role not in ("primary", "backup"):
            raise ValueError(f"bad signal id {text!r}")
        return cls(conn, role)


@dataclass(frozen=True)
class Signal:
    sid: SignalId
    slots: SlotSet
    power_fraction: float = 1.0


@dataclass(frozen=True)
class Capabilities:
    supports_combining: bool
    supports_splitting: bool
    supports_bursts: bool


class NodeFabric:
    """Immutable component graph for one optical node.

    Edges map each output port to the single input port it feeds. Ingress and
    egress labels name the fabric-boundary ports that attach to network links;
    add/drop labels name transceiver components.
    """

    def __init__(
        self,
        name: str,
        arch: str,
        components: Dict[str, ComponentKind],
        edges: Dict[Port, Port],
        ingress_ports: Dict[str, Port],
        egress_ports: Dict[str, Port],
        add_ports: Dict[str, str],
        drop_ports: Dict[str, str],
        capabilities: Capabilities,
    ):
        self.name = name
        self.arch = arch
        self.components = dict(components)
        self.edges = dict(edges)
        self.ingress_ports = dict(ingress_ports)
        self.egress_ports = dict(egress_ports)
        self.add_ports = dict(add_ports)
        self.drop_ports = dict(drop_ports)
        self.capabilities = capabilities
        self.rev_edges: Dict[Port, Port] = {}
        for out_p, in_p in self.edges.items():
            if in_p in self.rev_edges:
                raise InvalidParams(f"two edges feed {in_p}")
            self.rev_edges[in_p] = out_p
        self.egress_labels: Dict[Port, str] = {p: l for l, p in self.egress_ports.items()}
        self.drop_labels: Dict[str, str] = {c: l for l, c in self.drop_ports.items()}
        self._validate()
        self.topo = self._topo_sort()

    # -- structure ----------------------------------------------------

    def kind(self, comp: str) -> ComponentKind:
        try:
            return self.components[comp]
        except KeyError:
            raise DanglingPort(f"unknown component {comp!r}") from None

    def in_ports(self, comp: str) -> List[Port]:
        return [Port(comp, "in", i) for i in range(n_inputs(self.kind(comp)))]

    def out_ports(self, comp: str) -> List[Port]:
        return [Port(comp, "out", i) for i in range(n_outputs(self.kind(comp)))]

    def _check_port(self, p: Port) -> None:
        kind = self.kind(p.comp)
        limit = n_inputs(kind) if p.side == "in" else n_outputs(kind)
        if p.side not in ("in", "out") or not (0 <= p.idx < limit):
            raise DanglingPort(f"port {p} does not exist")

    def _validate(self) -> None:
        for out_p, in_p in self.edges.items():
            self._check_port(out_p)
            self._check_port(in_p)
            if out_p.side != "out" or in_p.side != "in":
                raise InvalidParams(f"edge {out_p}->{in_p} has wrong port sides")
        for label, p in self.ingress_ports.items():
            self._check_port(p)
            if p.side != "in" or p in self.rev_edges:
                raise InvalidParams(f"ingress {label} must be an unfed input port")
        for label, p in self.egress_ports.items():
            self._check_port(p)
            if p.side != "out" or p in self.edges:
                raise InvalidParams(f"egress {label} must be an unwired output port")
        for label, comp in list(self.add_ports.items()):
            if not isinstance(self.kind(comp), BVTransmitter):
                raise InvalidParams(f"add port {label} must name a transmitter")
        for label, comp in list(self.drop_ports.items()):
            if not isinstance(self.kind(comp), BVReceiver):
                raise InvalidParams(f"drop port {label} must name a receiver")
        # port arities per kind
        out_counts: Dict[str, int] = {}
        in_counts: Dict[str, int] = {}
        for out_p, in_p in self.edges.items():
            out_counts[out_p.comp] = out_counts.get(out_p.comp, 0) + 1
            in_counts[in_p.comp] = in_counts.get(in_p.comp, 0) + 1
        for comp, kind in self.components.items():
            outs = out_counts.get(comp, 0)
            ins = in_counts.get(comp, 0)
            if isinstance(kind, FixedSplitter) and outs != kind.fanout:
                raise InvalidParams(f"splitter {comp} wires {outs}/{kind.fanout} outputs")
            if isinstance(kind, VOS) and outs != 2:
                raise InvalidParams(f"VOS {comp} wires {outs}/2 outputs")
            if isinstance(kind, Combiner) and ins != kind.fanin:
                raise InvalidParams(f"combiner {comp} wires {ins}/{kind.fanin} inputs")
            if isinstance(kind, BVTransmitter) and outs != kind.out_ports:
                raise InvalidParams(f"transmitter {comp} wires {outs}/{kind.out_ports} outputs")
            if isinstance(kind, Crossbar) and (ins > kind.ports or outs > kind.ports):
                raise InvalidParams(f"crossbar {comp} over-wired")

    def _topo_sort(self) -> List[str]:
        succ: Dict[str, Set[str]] = {c: set() for c in self.components}
        indeg: Dict[str, int] = {c: 0 for c in self.components}
        for out_p, in_p in self.edges.items():
            if in_p.comp not in succ[out_p.comp]:
                succ[out_p.comp].add(in_p.comp)
                indeg[in_p.comp] += 1
        ready = sorted(c for c, d in indeg.items() if d == 0)
        order: List[str] = []
        while ready:
            comp = ready.pop(0)
            order.append(comp)
            for nxt in sorted(succ[comp]):
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
            ready.sort()
        if len(order) != len(self.components):
            raise InvalidParams("fabric graph has a cycle")
        return order

    def transmitters(self) -> List[str]:
        return sorted(c for c, k in self.components.items() if isinstance(k, BVTransmitter))

    def receivers(self) -> List[str]:
        return sorted(c for c, k in self.components.items() if isinstance(k, BVReceiver))


class FabricConfig:
    """Settings for every active component of one fabric.

    Every entry carries the set of signal ids that require it, so removing a
    connection peels away exactly the entries it contributed. Extension is
    strictly additive: an existing slot map or crossbar entry is never
    rewired, and a VOS can only grow its set of lit outputs.
    """

    def __init__(self, fabric: NodeFabric):
        self.fabric = fabric
        self.wss: Dict[str, Dict[int, int]] = {}
        self.wss_refs: Dict[str, Dict[int, Set[SignalId]]] = {}
        self.xbar: Dict[str, Dict[int, int]] = {}
        self.xbar_refs: Dict[str, Dict[int, Set[SignalId]]] = {}
        self.vos_refs: Dict[str, Dict[int, Set[SignalId]]] = {}
        self.bvt: Dict[str, int] = {}
        self.bvt_refs: Dict[str, Set[SignalId]] = {}
        self.bvr_refs: Dict[str, Set[SignalId]] = {}
        # combiners are passive, but knowing which inputs carry routed
        # signals lets interference checks skip fabrics with no real merge
        self.comb_refs: Dict[str, Dict[int, Set[SignalId]]] = {}
        # exact entries each signal contributed, so backtracking can peel
        # one signal off without scanning every structure; configs built
        # by other means fall back to the scan in remove_signal
        self._journal: Dict[SignalId, List[Tuple[str, str, int]]] = {}

    @classmethod
    def empty(cls, fabric: NodeFabric) -> "FabricConfig":
        return cls(fabric)

    def clone(self) -> "FabricConfig":
        c = FabricConfig(self.fabric)
        c.wss = {k: dict(v) for k, v in self.wss.items()}
        c.wss_refs = {k: {s: set(r) for s, r in v.items()} for k, v in self.wss_refs.items()}
        c.xbar = {k: dict(v) for k, v in self.xbar.items()}
        c.xbar_refs = {k: {i: set(r) for i, r in v.items()} for k, v in self.xbar_refs.items()}
        c.vos_refs = {k: {o: set(r) for o, r in v.items()} for k, v in self.vos_refs.items()}
        c.bvt = dict(self.bvt)
        c.bvt_refs = {k: set(v) for k, v in self.bvt_refs.items()}
        c.bvr_refs = {k: set(v) for k, v in self.bvr_refs.items()}
        c.comb_refs = {k: {i: set(r) for i, r in v.items()} for k, v in self.comb_refs.items()}
        c._journal = {s: list(v) for s, v in self._journal.items()}
        return c

    # -- derived settings ----------------------------------------------

    def vos_state(self, comp: str) -> Optional[Tuple[int, int]]:
        refs = self.vos_refs.get(comp)
        if not refs:
            return None
        lit = {o for o, r in refs.items() if r}
        if lit == {0}:
            return VOS_DIRECT_A
        if lit == {1}:
            return VOS_DIRECT_B
        if lit == {0, 1}:
            return VOS_SPLIT
        return None

    def settings(self) -> Dict[str, Tuple]:
        """Canonical per-component setting values, for equality and deltas."""
        out: Dict[str, Tuple] = {}
        for comp, m in self.wss.items():
            if m:
                out[comp] = ("wss", tuple(sorted(m.items())))
        for comp, m in self.xbar.items():
            if m:
                out[comp] = ("xbar", tuple(sorted(m.items())))
        for comp in self.vos_refs:
            state = self.vos_state(comp)
            if state is not None:
                out[comp] = ("vos", state)
        for comp, port in self.bvt.items():
            out[comp] = ("bvt", port)
        return out

    def all_signals(self) -> Set[SignalId]:
        sids: Set[SignalId] = set()
        for per in self.wss_refs.values():
            for refs in per.values():
                sids |= refs
        for per in self.xbar_refs.values():
            for refs in per.values():
                sids |= refs
        for per in self.vos_refs.values():
            for refs in per.values():
                sids |= refs
        for refs in self.bvt_refs.values():
            sids |= refs
        for refs in self.bvr_refs.values():
            sids |= refs
        for per in self.comb_refs.values():
            for refs in per.values():
                sids |= refs
        return sids

    def transmitter_of(self, sid: SignalId) -> Optional[str]:
        for comp in sorted(self.bvt_refs):
            if sid in self.bvt_refs[comp]:
                return comp
        return None

    def remove_signal(self, sid: SignalId) -> None:
        """Peel away every entry this signal contributed."""
        entries = self._journal.pop(sid, None)
        if entries is None:
            self._scan_remove(sid)
            return
        for kind, comp, key in entries:
            if kind == "wss":
                per = self.wss_refs.get(comp)
                refs = per.get(key) if per else None
                if refs is None:
                    continue
                refs.discard(sid)
                if not refs:
                    del per[key]
                    del self.wss[comp][key]
                    if not per:
                        del self.wss_refs[comp]
                        self.wss.pop(comp, None)
            elif kind == "xbar":
                per = self.xbar_refs.get(comp)
                refs = per.get(key) if per else None
                if refs is None:
                    continue
                refs.discard(sid)
                if not refs:
                    del per[key]
                    del self.xbar[comp][key]
                    if not per:
                        del self.xbar_refs[comp]
                        self.xbar.pop(comp, None)
            elif kind == "vos":
                per = self.vos_refs.get(comp)
                refs = per.get(key) if per else None
                if refs is None:
                    continue
                refs.discard(sid)
                if not refs:
                    del per[key]
                    if not per:
                        del self.vos_refs[comp]
            elif kind == "bvt":
                refs = self.bvt_refs.get(comp)
                if refs is None:
                    continue
                refs.discard(sid)
                if not refs:
                    del self.bvt_refs[comp]
                    self.bvt.pop(comp, None)
            elif kind == "bvr":
                refs = self.bvr_refs.get(comp)
                if refs is None:
                    continue
                refs.discard(sid)
                if not refs:
                    del self.bvr_refs[comp]
            else:
                per = self.comb_refs.get(comp)
                refs = per.get(key) if per else None
                if refs is None:
                    continue
                refs.discard(sid)
                if not refs:
                    del per[key]
                    if not per:
                        del self.comb_refs[comp]

    def _scan_remove(self, sid: SignalId) -> None:
        for comp in list(self.wss_refs):
            per = self.wss_refs[comp]
            for slot in list(per):
                per[slot].discard(sid)
                if not per[slot]:
                    del per[slot]
                    del self.wss[comp][slot]
            if not per:
                del self.wss_refs[comp]
                self.wss.pop(comp, None)
        for comp in list(self.xbar_refs):
            per = self.xbar_refs[comp]
            for idx in list(per):
                per[idx].discard(sid)
                if not per[idx]:
                    del per[idx]
                    del self.xbar[comp][idx]
            if not per:
                del self.xbar_refs[comp]
                self.xbar.pop(comp, None)
        for comp in list(self.vos_refs):
            per = self.vos_refs[comp]
            for out in list(per):
                per[out].discard(sid)
                if not per[out]:
                    del per[out]
            if not per:
                del self.vos_refs[comp]
        for comp in list(self.bvt_refs):
            self.bvt_refs[comp].discard(sid)
            if not self.bvt_refs[comp]:
                del self.bvt_refs[comp]
                self.bvt.pop(comp, None)
        for comp in list(self.bvr_refs):
            self.bvr_refs[comp].discard(sid)
            if not self.bvr_refs[comp]:
                del self.bvr_refs[comp]
        for comp in list(self.comb_refs):
            per = self.comb_refs[comp]
            for idx in list(per):
                per[idx].discard(sid)
                if not per[idx]:
                    del per[idx]
            if not per:
                del self.comb_refs[comp]

    def __eq__(self, other) -> bool:
        if not isinstance(other, FabricConfig):
            return NotImplemented
        return (
            self.fabric.name == other.fabric.name
            and self.wss == other.wss
            and self.wss_refs == other.wss_refs
            and self.xbar == other.xbar
            and self.xbar_refs == other.xbar_refs
            and self.vos_refs == other.vos_refs
            and self.bvt == other.bvt
            and self.bvt_refs == other.bvt_refs
            and self.bvr_refs == other.bvr_refs
            and self.comb_refs == other.comb_refs
        )

    def __repr__(self) -> str:
        return f"FabricConfig({self.fabric.name}, {len(self.settings())} active components)"


@dataclass(frozen=True)
class ReconfigDelta:
    changed_components: int
    time_ms: float
    changed: Tuple[str, ...] = ()


def reconfig_delta(old: FabricConfig, new: FabricConfig) -> ReconfigDelta:
    """Components whose setting differs, and the slowest switching time among them."""
    if old.fabric.name != new.fabric.name:
        raise FabricMismatch(f"{old.fabric.name} vs {new.fabric.name}")
    a, b = old.settings(), new.settings()
    changed = sorted(set(k for k in a.keys() | b.keys() if a.get(k) != b.get(k)))
    time = 0.0
    for comp in changed:
        time = max(time, switching_time_ms(new.fabric.kind(comp)))
    return ReconfigDelta(len(changed), time, tuple(changed))


def loss_budget(
    fabric: NodeFabric,
    config: FabricConfig,
    route: Sequence[str],
    extra_db: Optional[Mapping[str, float]] = None,
) -> float:
    """Total insertion loss along a lit component path, in dB.

    Splitters contribute 10*log10(fanout) from the power-division model; a
    VOS contributes its state-dependent insertion loss and must be lit on
    the output the route takes.
    """
    if config.fabric.name != fabric.name:
        raise FabricMismatch(f"{config.fabric.name} vs {fabric.name}")
    if not route:
        raise DisconnectedRoute("empty route")
    hops: List[Tuple[str, Optional[int]]] = []  # (comp, out idx toward next)
    for i, comp in enumerate(route):
        if comp not in fabric.components:
            raise DanglingPort(f"unknown component {comp!r}")
        if i + 1 < len(route):
            nxt = route[i + 1]
            out_idx = None
            for p in fabric.out_ports(comp):
                target = fabric.edges.get(p)
                if target is not None and target.comp == nxt:
                    out_idx = p.idx
                    break
            if out_idx is None:
                raise DisconnectedRoute(f"no edge {comp} -> {nxt}")
            hops.append((comp, out_idx))
        else:
            hops.append((comp, None))
    total = 0.0
    for comp, out_idx in hops:
        kind = fabric.kind(comp)
        if isinstance(kind, VOS):
            state = config.vos_state(comp)
            if state is None:
                raise DisconnectedRoute(f"VOS {comp} is dark")
            if out_idx is not None:
                share = state[out_idx] if out_idx in (0, 1) else 0
                if share == 0:
                    raise DisconnectedRoute(f"VOS {comp} does not light output {out_idx}")
            total += VOS_LOSS_SPLIT_DB if state == VOS_SPLIT else VOS_LOSS_DIRECT_DB
        elif isinstance(kind, FixedSplitter):
            total += 10.0 * math.log10(kind.fanout)
        if extra_db:
            total += extra_db.get(comp, extra_db.get(type(kind).__name__, 0.0))
    return total
