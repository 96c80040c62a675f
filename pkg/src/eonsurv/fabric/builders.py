"""Switch fabric wiring for the five node architectures."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from .components import (
    BVReceiver,
    BVTransmitter,
    Capabilities,
    Combiner,
    Crossbar,
    FixedSplitter,
    FlexWSS,
    InvalidParams,
    NodeFabric,
    Port,
    UnknownArchitecture,
    VOS,
)

GRIDLESS_MG = "gridless-mg"
GRIDLESS_MG_EXTRA = "gridless-mg-extra"
BROADCAST_SELECT = "broadcast-select"
PROPOSED_TRADITIONAL = "proposed-traditional"
PROPOSED_VOS = "proposed-vos"


@dataclass(frozen=True)
class FabricParams:
    """Degree and sizing knobs shared by all builders.

    splitter_pool: how many ingress trunks of the plain gridless node get a
    splitter (the rest connect straight to the crossbar).
    egress_filtering: gridless family only; inserts a slot-selective WSS
    behind each egress coupler.
    """

    in_links: int
    out_links: int
    transceivers: int = 8
    splitter_pool: int = 1
    egress_filtering: bool = False
    combiners_per_egress: int = 2
    vos_layers: int = 2

    def __post_init__(self) -> None:
        if self.in_links < 1 or self.out_links < 1:
            raise InvalidParams("node needs at least one ingress and one egress")
        if self.transceivers < 0:
            raise InvalidParams("negative transceiver count")
        if self.combiners_per_egress < 1:
            raise InvalidParams("need at least one combiner per egress")
        if self.vos_layers < 1:
            raise InvalidParams("need at least one layer")


def _build_gridless(name: str, params: FabricParams, arch: str, every_ingress_split: bool) -> NodeFabric:
    """Single-trunk ingress WSS, optional splitter, crossbar, egress coupler.

    The ingress WSS has one branch port, so a slot either enters the trunk or
    is blocked; the trunk content cannot be divided per slot downstream. The
    egress coupler merges without filtering unless egress_filtering adds a
    slot-selective WSS behind it.
    """
    I, O, T = params.in_links, params.out_links, params.transceivers
    comps: Dict[str, object] = {}
    edges: Dict[Port, Port] = {}
    ingress: Dict[str, Port] = {}
    egress: Dict[str, Port] = {}
    adds: Dict[str, str] = {}
    drops: Dict[str, str] = {}
    xin: List[Port] = []
    xout: List[Port] = []
    fan = O + T
    for i in range(I):
        w = f"iwss{i}"
        comps[w] = FlexWSS("demux", 1)
        ingress[f"in{i}"] = Port(w, "in", 0)
        split = every_ingress_split or (i < params.splitter_pool and O >= 2)
        if split and fan >= 2:
            s = f"split{i}"
            comps[s] = FixedSplitter(fan)
            edges[Port(w, "out", 0)] = Port(s, "in", 0)
            for j in range(fan):
                xin.append(Port(s, "out", j))
        else:
            xin.append(Port(w, "out", 0))
    for k in range(T):
        t = f"bvt{k}"
        comps[t] = BVTransmitter(1)
        adds[f"add{k}"] = t
        xin.append(Port(t, "out", 0))
    for e in range(O):
        c = f"comb{e}"
        comps[c] = Combiner(I + T)
        for j in range(I + T):
            xout.append(Port(c, "in", j))
        if params.egress_filtering:
            w = f"ewss{e}"
            comps[w] = FlexWSS("mux", 1)
            edges[Port(c, "out", 0)] = Port(w, "in", 0)
            egress[f"out{e}"] = Port(w, "out", 0)
        else:
            egress[f"out{e}"] = Port(c, "out", 0)
    for k in range(T):
        r = f"bvr{k}"
        comps[r] = BVReceiver(1)
        drops[f"drop{k}"] = r
        xout.append(Port(r, "in", 0))
    comps["xbar"] = Crossbar(max(len(xin), len(xout)))
    for idx, src in enumerate(xin):
        edges[src] = Port("xbar", "in", idx)
    for idx, dst in enumerate(xout):
        edges[Port("xbar", "out", idx)] = dst
    caps = Capabilities(supports_combining=True, supports_splitting=True, supports_bursts=False)
    return NodeFabric(name, arch, comps, edges, ingress, egress, adds, drops, caps)


def build_gridless_mg(name: str, params: FabricParams) -> NodeFabric:
    return _build_gridless(name, params, GRIDLESS_MG, every_ingress_split=False)


def build_gridless_mg_extra(name: str, params: FabricParams) -> NodeFabric:
    return _build_gridless(name, params, GRIDLESS_MG_EXTRA, every_ingress_split=True)


def build_broadcast_select(name: str, params: FabricParams) -> NodeFabric:
    """Passive splitter per ingress, slot-selective WSS per egress and drop.

    Every egress WSS picks one input per slot, so two signals can never be
    merged onto the same egress: path-level combining is unsupported.
    """
    I, O, T = params.in_links, params.out_links, params.transceivers
    comps: Dict[str, object] = {}
    edges: Dict[Port, Port] = {}
    ingress: Dict[str, Port] = {}
    egress: Dict[str, Port] = {}
    adds: Dict[str, str] = {}
    drops: Dict[str, str] = {}
    for e in range(O):
        comps[f"ewss{e}"] = FlexWSS("mux", I + T)
        egress[f"out{e}"] = Port(f"ewss{e}", "out", 0)
    for r in range(T):
        comps[f"dwss{r}"] = FlexWSS("mux", I)
        comps[f"bvr{r}"] = BVReceiver(1)
        drops[f"drop{r}"] = f"bvr{r}"
        edges[Port(f"dwss{r}", "out", 0)] = Port(f"bvr{r}", "in", 0)
    for i in range(I):
        fan = O + T
        if fan >= 2:
            s = f"split{i}"
            comps[s] = FixedSplitter(fan)
            ingress[f"in{i}"] = Port(s, "in", 0)
            for e in range(O):
                edges[Port(s, "out", e)] = Port(f"ewss{e}", "in", i)
            for r in range(T):
                edges[Port(s, "out", O + r)] = Port(f"dwss{r}", "in", i)
        else:
            # degenerate degree-1 node: trunk straight to the one target
            if O == 1:
                ingress[f"in{i}"] = Port("ewss0", "in", i)
            else:
                ingress[f"in{i}"] = Port("dwss0", "in", i)
    for k in range(T):
        t = f"bvt{k}"
        comps[t] = BVTransmitter(1)
        adds[f"add{k}"] = t
        if O >= 2:
            s = f"tsplit{k}"
            comps[s] = FixedSplitter(O)
            edges[Port(t, "out", 0)] = Port(s, "in", 0)
            for e in range(O):
                edges[Port(s, "out", e)] = Port(f"ewss{e}", "in", I + k)
        else:
            edges[Port(t, "out", 0)] = Port("ewss0", "in", I + k)
    caps = Capabilities(supports_combining=False, supports_splitting=True, supports_bursts=False)
    return NodeFabric(name, BROADCAST_SELECT, comps, edges, ingress, egress, adds, drops, caps)


def build_proposed_traditional(name: str, params: FabricParams) -> NodeFabric:
    """Gridless core plus per-egress coupler bank and slot-selective egress WSS.

    Several couplers per egress keep unrelated signals apart, and the egress
    WSS passes only assigned slots, so stray copies die at the node edge.
    Transmitters reach each egress WSS directly for single-source paths and
    reach the couplers through the crossbar when merging is required.
    """
    I, O, T = params.in_links, params.out_links, params.transceivers
    C = params.combiners_per_egress
    comps: Dict[str, object] = {}
    edges: Dict[Port, Port] = {}
    ingress: Dict[str, Port] = {}
    egress: Dict[str, Port] = {}
    adds: Dict[str, str] = {}
    drops: Dict[str, str] = {}
    xin: List[Port] = []
    xout: List[Port] = []
    fan = O + T
    for i in range(I):
        w = f"iwss{i}"
        comps[w] = FlexWSS("demux", 1)
        ingress[f"in{i}"] = Port(w, "in", 0)
        if fan >= 2:
            s = f"split{i}"
            comps[s] = FixedSplitter(fan)
            edges[Port(w, "out", 0)] = Port(s, "in", 0)
            for j in range(fan):
                xin.append(Port(s, "out", j))
        else:
            xin.append(Port(w, "out", 0))
    for k in range(T):
        t = f"bvt{k}"
        comps[t] = BVTransmitter(1 + O)
        adds[f"add{k}"] = t
        xin.append(Port(t, "out", 0))
    for e in range(O):
        w = f"ewss{e}"
        comps[w] = FlexWSS("mux", C + T)
        egress[f"out{e}"] = Port(w, "out", 0)
        for c in range(C):
            comb = f"comb{e}_{c}"
            comps[comb] = Combiner(I + T)
            for j in range(I + T):
                xout.append(Port(comb, "in", j))
            edges[Port(comb, "out", 0)] = Port(w, "in", c)
        for k in range(T):
            edges[Port(f"bvt{k}", "out", 1 + e)] = Port(w, "in", C + k)
    for k in range(T):
        r = f"bvr{k}"
        comps[r] = BVReceiver(1)
        drops[f"drop{k}"] = r
        xout.append(Port(r, "in", 0))
    comps["xbar"] = Crossbar(max(len(xin), len(xout)))
    for idx, src in enumerate(xin):
        edges[src] = Port("xbar", "in", idx)
    for idx, dst in enumerate(xout):
        edges[Port("xbar", "out", idx)] = dst
    caps = Capabilities(supports_combining=True, supports_splitting=True, supports_bursts=False)
    return NodeFabric(name, PROPOSED_TRADITIONAL, comps, edges, ingress, egress, adds, drops, caps)


def _vos_tree(
    comps: Dict[str, object],
    edges: Dict[Port, Port],
    prefix: str,
    src: Port,
    targets: List[Port],
) -> None:
    """Binary tree of 1x2 variable splitters from src to every target."""
    counter = [0]

    def build(src_port: Port, tg: List[Port]) -> None:
        if len(tg) == 1:
            edges[src_port] = tg[0]
            return
        v = f"{prefix}v{counter[0]}"
        counter[0] += 1
        comps[v] = VOS()
        edges[src_port] = Port(v, "in", 0)
        mid = (len(tg) + 1) // 2
        build(Port(v, "out", 0), tg[:mid])
        build(Port(v, "out", 1), tg[mid:])

    build(src, targets)


def build_proposed_vos(name: str, params: FabricParams) -> NodeFabric:
    """Layered node switched by variable-splitter trees instead of a crossbar.

    The ingress WSS spreads slots over vos_layers layer ports; each layer has
    its own coupler per egress and per receiver, fed by a binary tree of 1x2
    variable splitters. A tree node either directs its input to one side or
    copies it to both, which is what lets one trunk feed two egresses when
    backups share spectrum. Egress WSS filtering still applies per slot.
    """
    I, O, T = params.in_links, params.out_links, params.transceivers
    L = params.vos_layers
    comps: Dict[str, object] = {}
    edges: Dict[Port, Port] = {}
    ingress: Dict[str, Port] = {}
    egress: Dict[str, Port] = {}
    adds: Dict[str, str] = {}
    drops: Dict[str, str] = {}
    for e in range(O):
        w = f"ewss{e}"
        comps[w] = FlexWSS("mux", L + T)
        egress[f"out{e}"] = Port(w, "out", 0)
        for l in range(L):
            comb = f"comb{e}_{l}"
            comps[comb] = Combiner(I + T)
            edges[Port(comb, "out", 0)] = Port(w, "in", l)
    for r in range(T):
        comps[f"bvr{r}"] = BVReceiver(L)
        drops[f"drop{r}"] = f"bvr{r}"
        for l in range(L):
            dc = f"dcomb{r}_{l}"
            comps[dc] = Combiner(I)
            edges[Port(dc, "out", 0)] = Port(f"bvr{r}", "in", l)
    for i in range(I):
        w = f"iwss{i}"
        comps[w] = FlexWSS("demux", L)
        ingress[f"in{i}"] = Port(w, "in", 0)
        for l in range(L):
            targets = [Port(f"comb{e}_{l}", "in", i) for e in range(O)]
            targets += [Port(f"dcomb{r}_{l}", "in", i) for r in range(T)]
            _vos_tree(comps, edges, f"i{i}l{l}", Port(w, "out", l), targets)
    for k in range(T):
        t = f"bvt{k}"
        comps[t] = BVTransmitter(O + L * O)
        adds[f"add{k}"] = t
        for e in range(O):
            edges[Port(t, "out", e)] = Port(f"ewss{e}", "in", L + k)
        for l in range(L):
            for e in range(O):
                edges[Port(t, "out", O + l * O + e)] = Port(f"comb{e}_{l}", "in", I + k)
    caps = Capabilities(supports_combining=True, supports_splitting=True, supports_bursts=True)
    return NodeFabric(name, PROPOSED_VOS, comps, edges, ingress, egress, adds, drops, caps)


ARCHITECTURES: Dict[str, Callable[[str, FabricParams], NodeFabric]] = {
    GRIDLESS_MG: build_gridless_mg,
    GRIDLESS_MG_EXTRA: build_gridless_mg_extra,
    BROADCAST_SELECT: build_broadcast_select,
    PROPOSED_TRADITIONAL: build_proposed_traditional,
    PROPOSED_VOS: build_proposed_vos,
}


def build_fabric(
    arch: str,
    params: Optional[FabricParams] = None,
    name: str = "node",
    **kwargs,
) -> NodeFabric:
    """Construct the node fabric for an architecture tag.

    Pass a FabricParams or the equivalent keyword arguments.
    """
    if arch not in ARCHITECTURES:
        raise UnknownArchitecture(
            f"unknown architecture {arch!r}; choose from {', '.join(sorted(ARCHITECTURES))}"
        )
    if params is None:
        params = FabricParams(**kwargs)
    elif kwargs:
        raise TypeError("pass FabricParams or keyword arguments, not both")
    return ARCHITECTURES[arch](name, params)
