"""Request admission: routing, spectrum assignment, and fabric validation.

provision() is all-or-nothing. It stages per-node fabric configurations
against copies, computes any stray spectrum the staged trees would leak
onto links, and only then commits allocations, demands, and configs in one
pass. A rejected request returns a Blocked value and leaves the state
bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .fabric import (
    ADD,
    DROP,
    Combiner,
    CrossConnectDemand,
    FabricConfig,
    Infeasible,
    NodeFabric,
    Signal,
    SignalId,
    egress_delivery,
    find_config,
    propagate,
)
from .network import (
    Connection,
    Link,
    MODE_DEDICATED,
    MODE_PBPS,
    MODE_SHARED,
    MODE_UNPROTECTED,
    MODES,
    NetworkState,
    NodeSite,
    ROLE_BACKUP,
    ROLE_PRIMARY,
    ShareIneligible,
    Topology,
    UnknownConnection,
    link_disjoint,
    path_links,
)
from .spectrum import SlotRange, SlotSet, first_fit

BLOCK_NO_ROUTE = "NoRoute"
BLOCK_NO_SPECTRUM = "NoSpectrum"
BLOCK_NO_DISJOINT_BACKUP = "NoDisjointBackup"
BLOCK_SHARE_CONFLICT = "ShareConflict"
BLOCK_FABRIC_INFEASIBLE = "FabricInfeasible"

# when several route attempts fail differently, report the most specific
_REASON_RANK = {
    BLOCK_NO_ROUTE: 0,
    BLOCK_NO_SPECTRUM: 1,
    BLOCK_NO_DISJOINT_BACKUP: 2,
    BLOCK_SHARE_CONFLICT: 3,
    BLOCK_FABRIC_INFEASIBLE: 4,
}

# windows tried per (primary, backup) route pair before giving up
_MAX_BACKUP_WINDOWS = 8


class NotOnPath(ValueError):
    pass


@dataclass(frozen=True)
class Request:
    id: str
    source: str
    destination: str
    demand: int
    mode: str

    def __post_init__(self) -> None:
        if self.demand < 1:
            raise ValueError(f"{self.id}: demand {self.demand} < 1")
        if self.source == self.destination:
            raise ValueError(f"{self.id}: source equals destination")
        if self.mode not in MODES:
            raise ValueError(f"{self.id}: unknown mode {self.mode!r}")


@dataclass(frozen=True)
class BlockReason:
    kind: str
    node: Optional[str] = None
    cause: Optional[str] = None

    def __str__(self) -> str:
        if self.kind == BLOCK_FABRIC_INFEASIBLE:
            return f"{self.kind}({self.node}, {self.cause})"
        return self.kind


@dataclass(frozen=True)
class Blocked:
    reason: BlockReason


def k_shortest_paths(
    topology: Topology, source: str, destination: str, k: int = 3
) -> List[Tuple[str, ...]]:
    """Up to k loop-free paths, shortest first, ties in node-sequence order."""
    if k < 1:
        raise ValueError(f"k {k} < 1")
    if source not in topology.nodes or destination not in topology.nodes:
        return []
    out_links: Dict[str, List[str]] = {}
    for u, v in topology.links:
        out_links.setdefault(u, []).append(v)
    found: List[Tuple[str, ...]] = []
    stack: List[str] = [source]
    seen: Set[str] = {source}

    def walk(node: str) -> None:
        if node == destination:
            found.append(tuple(stack))
            return
        for nxt in sorted(out_links.get(node, [])):
            if nxt in seen:
                continue
            seen.add(nxt)
            stack.append(nxt)
            walk(nxt)
            stack.pop()
            seen.remove(nxt)

    walk(source)
    found.sort(key=lambda p: (len(p), p))
    return found[:k]


def share_eligible(candidate: Connection, incumbent: Connection) -> bool:
    """May these two backups hold the same slot? Link-disjoint primaries only."""
    if candidate.backup_path is None or incumbent.backup_path is None:
        raise ValueError("share eligibility needs two protected connections")
    if candidate.id == incumbent.id:
        return False
    return link_disjoint(candidate.primary_path, incumbent.primary_path)


# -- per-node demand plumbing -------------------------------------------------


def route_demands(
    site_of: Mapping[str, NodeSite],
    sid: SignalId,
    path: Sequence[str],
    slots: SlotSet,
) -> Dict[str, CrossConnectDemand]:
    """One cross-connect demand per node a path touches."""
    out: Dict[str, CrossConnectDemand] = {}
    for i, node in enumerate(path):
        site = site_of[node]
        source = ADD if i == 0 else site.in_map[(path[i - 1], node)]
        dest = DROP if i == len(path) - 1 else site.out_map[(node, path[i + 1])]
        out[node] = CrossConnectDemand(sid, source, dest, slots)
    return out


def node_seeds(
    demands: Iterable[CrossConnectDemand],
) -> Tuple[Dict[str, List[Signal]], List[Signal]]:
    ingress: Dict[str, List[Signal]] = {}
    adds: List[Signal] = []
    for d in sorted(demands, key=lambda d: d.sid):
        sig = Signal(d.sid, d.slots)
        if d.source == ADD:
            adds.append(sig)
        else:
            ingress.setdefault(d.source, []).append(sig)
    return ingress, adds


def node_assignments(
    site: NodeSite,
    demands: Iterable[CrossConnectDemand],
    config: FabricConfig,
) -> Dict[str, Dict[SignalId, SlotSet]]:
    """Map each egress or drop label to the slots each signal owns there."""
    out: Dict[str, Dict[SignalId, SlotSet]] = {}
    for d in demands:
        if d.dest == DROP:
            comp = next(
                (c for c, refs in config.bvr_refs.items() if d.sid in refs), None
            )
            if comp is None:
                continue
            label = site.fabric.drop_labels[comp]
        else:
            label = d.dest
        out.setdefault(label, {})[d.sid] = d.slots
    return out


def exclusive_pairs(
    sids: Iterable[SignalId], primaries: Mapping[str, Sequence[str]]
) -> Set[frozenset]:
    """Signal pairs that a single link failure can never light simultaneously.

    A connection's own primary and backup alternate; two backups whose
    primaries are link-disjoint cannot both be rerouted by one failure.
    """
    ordered = sorted(set(sids))
    pairs: Set[frozenset] = set()
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            if a.conn == b.conn:
                pairs.add(frozenset((a, b)))
            elif a.role == ROLE_BACKUP and b.role == ROLE_BACKUP:
                pa = primaries.get(a.conn)
                pb = primaries.get(b.conn)
                if pa is not None and pb is not None and link_disjoint(pa, pb):
                    pairs.add(frozenset((a, b)))
    return pairs


def registry_primaries(state: NetworkState) -> Dict[str, Tuple[str, ...]]:
    return {cid: c.primary_path for cid, c in state.connections.items()}


# -- staging ------------------------------------------------------------------


class _Stage:
    """Tentative per-node configs and demands for one admission attempt."""

    def __init__(self, state: NetworkState, primaries: Dict[str, Tuple[str, ...]]):
        self.state = state
        self.primaries = primaries
        self.configs: Dict[str, FabricConfig] = {}
        self.added: Dict[str, List[CrossConnectDemand]] = {}
        # exclusive pairs per (node, staged sids); valid while primaries
        # holds one fixed path per connection, so forks may share it
        self.pair_cache: Dict[Tuple, Set[frozenset]] = {}

    def fork(self) -> "_Stage":
        """Branch point: staged work so far is shared, later adds are not.

        find_config never mutates its base, so forks can hold the same
        config objects until they stage something on top.
        """
        twin = _Stage.__new__(_Stage)
        twin.state = self.state
        twin.primaries = self.primaries
        twin.configs = dict(self.configs)
        twin.added = {node: list(ds) for node, ds in self.added.items()}
        twin.pair_cache = self.pair_cache
        return twin

    def demands_at(self, node: str) -> List[CrossConnectDemand]:
        site = self.state.sites[node]
        return list(site.demands.values()) + self.added.get(node, [])

    def config_at(self, node: str) -> FabricConfig:
        if node in self.configs:
            return self.configs[node]
        return self.state.sites[node].config

    def add(self, node: str, demand: CrossConnectDemand, harm_check: bool) -> None:
        site = self.state.sites[node]
        demands = self.demands_at(node) + [demand]
        key = (node, tuple(d.sid for d in self.added.get(node, ())), demand.sid)
        pairs = self.pair_cache.get(key)
        if pairs is None:
            pairs = exclusive_pairs([d.sid for d in demands], self.primaries)
            self.pair_cache[key] = pairs
        # a lone signal cannot interfere with anything, skip the harm walk
        check = harm_check and len(demands) > 1
        config = find_config(
            site.fabric,
            demands,
            base=self.config_at(node),
            exclusive=pairs,
            harm_check=check,
        )
        self.configs[node] = config
        self.added.setdefault(node, []).append(demand)


def _stage_route(
    stage: _Stage,
    sid: SignalId,
    path: Sequence[str],
    slots: SlotSet,
    harm_check: bool,
) -> Dict[str, CrossConnectDemand]:
    demands = route_demands(stage.state.sites, sid, path, slots)
    for node in path:
        stage.add(node, demands[node], harm_check)
    return demands


# -- stray spectrum -----------------------------------------------------------


def _unfiltered_egress(fabric: NodeFabric, label: str) -> bool:
    # a raw coupler at the boundary cannot narrow what it forwards
    port = fabric.egress_ports[label]
    return isinstance(fabric.components[port.comp], Combiner)


def delivered_slots(
    site: NodeSite,
    config: FabricConfig,
    demands: Sequence[CrossConnectDemand],
    sid: SignalId,
    label: str,
) -> SlotSet:
    """Slots the node pushes onto an egress on this signal's account.

    Everything merged with the signal's copies at a shared combiner rides
    the same egress, so the union over those co-travellers is what the
    link downstream actually carries for it.
    """
    return SlotSet(egress_delivery(site.fabric, config, demands, sid, label))


def _stray_cells(
    stage: _Stage,
    sid: SignalId,
    path: Sequence[str],
    assigned: SlotSet,
) -> Dict[Link, SlotSet]:
    """Per-link spectrum beyond the assignment that the staged trees leak."""
    state = stage.state
    out: Dict[Link, SlotSet] = {}
    for link in path_links(path):
        node = link[0]
        site = state.sites[node]
        label = site.out_map[link]
        if not _unfiltered_egress(site.fabric, label):
            continue
        delivered = delivered_slots(
            site, stage.config_at(node), stage.demands_at(node), sid, label
        )
        stray = (
            delivered - assigned - state.link_states[link].occupied_slots()
        )
        if stray:
            out[link] = stray
    return out


# -- backup slot search -------------------------------------------------------


def _window_ok(
    state: NetworkState,
    links: Sequence[Link],
    slots: SlotSet,
    conn: str,
    mode: str,
    prim: Sequence[str],
) -> Optional[int]:
    """None if some slot is untakeable, else the count of shared cells."""
    overlap = 0
    for link in links:
        ls = state.link_states[link]
        for slot in slots:
            held = ls.holders_of(slot)
            if not held:
                continue
            for holder in held:
                if not state._eligible(holder, conn, mode, prim):
                    return None
            overlap += 1
    return overlap


def _link_profile(
    state: NetworkState, link: Link, conn: str, mode: str, prim: Sequence[str]
) -> Tuple[List[int], List[int]]:
    """Prefix counts over slots: (untakeable cells, held cells)."""
    ls = state.link_states[link]
    cap = ls.capacity
    blocked = bytearray(cap + 1)
    held = bytearray(cap + 1)
    for slot, holders in ls.holders.items():
        held[slot] = 1
        for holder in holders:
            if not state._eligible(holder, conn, mode, prim):
                blocked[slot] = 1
                break
    pb = [0] * (cap + 1)
    ph = [0] * (cap + 1)
    b = h = 0
    for s in range(1, cap + 1):
        b += blocked[s]
        h += held[s]
        pb[s] = b
        ph[s] = h
    return pb, ph


def _backup_windows(
    state: NetworkState,
    links: Sequence[Link],
    width: int,
    conn: str,
    mode: str,
    prim: Sequence[str],
    forced: Optional[SlotRange],
    profiles: Optional[Dict[Link, Tuple[List[int], List[int]]]] = None,
) -> List[SlotRange]:
    if forced is not None:
        slots = SlotSet(forced)
        if _window_ok(state, links, slots, conn, mode, prim) is None:
            raise ShareIneligible(f"{conn}: forced backup range {forced} untakeable")
        return [forced]
    cap = state.min_capacity(links)
    per_link = []
    for link in links:
        prof = profiles.get(link) if profiles is not None else None
        if prof is None:
            prof = _link_profile(state, link, conn, mode, prim)
            if profiles is not None:
                profiles[link] = prof
        per_link.append(prof)
    scored: List[Tuple[int, int]] = []
    for lo in range(1, cap - width + 2):
        hi = lo + width - 1
        overlap = 0
        for pb, ph in per_link:
            if pb[hi] - pb[lo - 1]:
                overlap = -1
                break
            overlap += ph[hi] - ph[lo - 1]
        if overlap >= 0:
            scored.append((-overlap, lo))
    scored.sort()
    return [
        SlotRange(lo, lo + width - 1) for _, lo in scored[:_MAX_BACKUP_WINDOWS]
    ]


# -- admission ----------------------------------------------------------------


def provision(
    state: NetworkState,
    request: Request,
    k: int = 3,
    backup_slots: Optional[SlotRange] = None,
    harm_check: bool = True,
    route_cache: Optional[dict] = None,
):
    """Admit a request or return Blocked; never leaves partial state.

    backup_slots pins the backup range instead of searching (scenario
    replays). harm_check=False drops the fabric interference guard, for
    reproducing architectures that admit physically conflicting setups.
    """
    if request.id in state.connections:
        raise ValueError(f"duplicate connection id {request.id}")
    topo = state.topology

    def routes_for(src: str, dst: str) -> List[Tuple[str, ...]]:
        if route_cache is not None:
            key = (src, dst, k)
            if key not in route_cache:
                route_cache[key] = k_shortest_paths(topo, src, dst, k)
            return route_cache[key]
        return k_shortest_paths(topo, src, dst, k)

    usable = [
        p
        for p in routes_for(request.source, request.destination)
        if not (set(path_links(p)) & state.failed)
    ]
    if not usable:
        return Blocked(BlockReason(BLOCK_NO_ROUTE))

    primaries = registry_primaries(state)
    reasons: List[BlockReason] = []
    protected = request.mode != MODE_UNPROTECTED

    for prim in usable:
        prim_links = path_links(prim)
        fit = first_fit(
            state.occupied_on(prim_links),
            request.demand,
            state.min_capacity(prim_links),
        )
        if fit is None:
            reasons.append(BlockReason(BLOCK_NO_SPECTRUM))
            continue
        prim_set = SlotSet(fit)
        primaries[request.id] = prim

        backups: List[Tuple[Optional[Tuple[str, ...]], Optional[SlotRange]]]
        if not protected:
            backups = [(None, None)]
        else:
            routes = [b for b in usable if b != prim and link_disjoint(prim, b)]
            if not routes:
                reasons.append(BlockReason(BLOCK_NO_DISJOINT_BACKUP))
                primaries.pop(request.id, None)
                continue
            backups = []
            profiles: Dict[Link, Tuple[List[int], List[int]]] = {}
            try:
                for back in routes:
                    windows = _backup_windows(
                        state,
                        path_links(back),
                        request.demand,
                        request.id,
                        request.mode,
                        prim,
                        backup_slots,
                        profiles,
                    )
                    backups.extend((back, w) for w in windows)
            except ShareIneligible:
                reasons.append(BlockReason(BLOCK_SHARE_CONFLICT))
                primaries.pop(request.id, None)
                continue
            if not backups:
                reasons.append(
                    BlockReason(
                        BLOCK_SHARE_CONFLICT
                        if backup_slots is None
                        else BLOCK_NO_SPECTRUM
                    )
                )
                primaries.pop(request.id, None)
                continue

        admitted = None
        psid = SignalId(request.id, ROLE_PRIMARY)
        bsid = SignalId(request.id, ROLE_BACKUP)
        configure_backup = request.mode in (MODE_DEDICATED, MODE_PBPS)
        # the primary staging is the same for every backup candidate, so
        # stage it once and fork per candidate
        base_stage = _Stage(state, primaries)
        try:
            pdemands = _stage_route(base_stage, psid, prim, prim_set, harm_check)
        except Infeasible as exc:
            reasons.append(BlockReason(BLOCK_FABRIC_INFEASIBLE, exc.node, exc.cause))
            primaries.pop(request.id, None)
            continue
        for back, bwin in backups:
            stage = base_stage.fork()
            try:
                bdemands: Dict[str, CrossConnectDemand] = {}
                if back is not None:
                    bset = SlotSet(bwin)
                    if configure_backup:
                        bdemands = _stage_route(
                            stage, bsid, back, bset, harm_check
                        )
                    else:
                        bdemands = route_demands(state.sites, bsid, back, bset)
            except Infeasible as exc:
                reasons.append(
                    BlockReason(BLOCK_FABRIC_INFEASIBLE, exc.node, exc.cause)
                )
                continue
            extra = _stray_cells(stage, psid, prim, prim_set)
            if back is not None and configure_backup:
                for link, cells in _stray_cells(
                    stage, bsid, back, SlotSet(bwin)
                ).items():
                    extra[link] = extra.get(link, SlotSet()) | cells
            admitted = (prim, fit, back, bwin, stage, pdemands, bdemands, extra)
            break

        primaries.pop(request.id, None)
        if admitted is None:
            continue

        prim, fit, back, bwin, stage, pdemands, bdemands, extra = admitted
        conn = Connection(
            id=request.id,
            source=request.source,
            destination=request.destination,
            demand=request.demand,
            mode=request.mode,
            primary_path=prim,
            primary_slots=fit,
            backup_path=back,
            backup_slots=bwin,
            extra=extra,
        )
        _commit(state, conn, stage, pdemands, bdemands)
        return conn

    best = max(reasons, key=lambda r: _REASON_RANK[r.kind])
    return Blocked(best)


def _commit(
    state: NetworkState,
    conn: Connection,
    stage: _Stage,
    pdemands: Dict[str, CrossConnectDemand],
    bdemands: Dict[str, CrossConnectDemand],
) -> None:
    for link in path_links(conn.primary_path):
        state.allocate(
            link,
            SlotSet(conn.primary_slots),
            conn.id,
            ROLE_PRIMARY,
            primary_path=conn.primary_path,
            mode=conn.mode,
        )
    if conn.backup_path is not None:
        for link in path_links(conn.backup_path):
            state.allocate(
                link,
                SlotSet(conn.backup_slots),
                conn.id,
                ROLE_BACKUP,
                primary_path=conn.primary_path,
                mode=conn.mode,
            )
    for link, cells in conn.extra.items():
        state.allocate(
            link,
            cells,
            conn.id,
            ROLE_BACKUP,
            primary_path=conn.primary_path,
            mode=conn.mode,
        )
    for node, config in stage.configs.items():
        state.sites[node].config = config
    for node, demand in pdemands.items():
        state.sites[node].demands[demand.sid] = demand
    latent = conn.mode == MODE_SHARED
    for node, demand in bdemands.items():
        site = state.sites[node]
        if latent:
            site.latent[demand.sid] = demand
        else:
            site.demands[demand.sid] = demand
    state.connections[conn.id] = conn


def teardown(state: NetworkState, conn_id: str) -> None:
    """Release every slot and fabric setting the connection holds.

    Removal is exact: remaining signals keep their settings bit-for-bit,
    and slots co-held by surviving backups stay allocated to them.
    """
    conn = state.connections.get(conn_id)
    if conn is None:
        raise UnknownConnection(conn_id)
    for link in path_links(conn.primary_path):
        state.release(link, SlotSet(conn.primary_slots), conn.id, ROLE_PRIMARY)
    if conn.backup_path is not None:
        for link in path_links(conn.backup_path):
            state.release(link, SlotSet(conn.backup_slots), conn.id, ROLE_BACKUP)
    for link, cells in conn.extra.items():
        state.release(link, cells, conn.id, ROLE_BACKUP)
    psid = conn.sid(ROLE_PRIMARY)
    bsid = conn.sid(ROLE_BACKUP)
    for node in conn.primary_path:
        site = state.sites[node]
        site.demands.pop(psid, None)
        site.config.remove_signal(psid)
    if conn.backup_path is not None:
        for node in conn.backup_path:
            site = state.sites[node]
            site.demands.pop(bsid, None)
            site.latent.pop(bsid, None)
            site.config.remove_signal(bsid)
    del state.connections[conn_id]


def egress_slots(state: NetworkState, conn_id: str, link: Link) -> SlotSet:
    """Slots the connection's backup actually consumes on the link right now."""
    conn = state.connections.get(conn_id)
    if conn is None:
        raise UnknownConnection(conn_id)
    link = tuple(link)
    if conn.backup_path is None or link not in path_links(conn.backup_path):
        raise NotOnPath(f"{conn_id} has no backup over {link}")
    node = link[0]
    site = state.sites[node]
    bsid = conn.sid(ROLE_BACKUP)
    if bsid in site.latent:
        # unconfigured backups reserve exactly their assigned range
        return SlotSet(conn.backup_slots)
    label = site.out_map[link]
    return delivered_slots(
        site, site.config, list(site.demands.values()), bsid, label
    )
