"""Topology, per-link spectrum occupancy, and the network-wide state.

A NetworkState ties three layers together: the directed link graph, one
LinkState per link tracking which connection holds each frequency slot,
and one NodeSite per node holding the switch fabric plus its current
configuration. Occupancy is self-defending: allocate() re-checks backup
share-eligibility instead of trusting the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .fabric import (
    CrossConnectDemand,
    FabricConfig,
    FabricParams,
    NodeFabric,
    SignalId,
    build_fabric,
)
from .spectrum import SlotRange, SlotSet

Link = Tuple[str, str]

ROLE_PRIMARY = "primary"
ROLE_BACKUP = "backup"

MODE_UNPROTECTED = "unprotected"
MODE_DEDICATED = "dedicated"
MODE_SHARED = "shared"
MODE_PBPS = "pbps"
MODES = (MODE_UNPROTECTED, MODE_DEDICATED, MODE_SHARED, MODE_PBPS)
# modes whose backups may co-hold slots with other eligible backups
SHARING_MODES = (MODE_SHARED, MODE_PBPS)

ON_PRIMARY = "on-primary"
ON_BACKUP = "on-backup"
FAILED = "failed"


class ParseError(ValueError):
    def __init__(self, line: int, cause: str) -> None:
        super().__init__(f"line {line}: {cause}")
        self.line = line
        self.cause = cause


class DuplicateLink(ValueError):
    pass


class UnknownNode(ValueError):
    pass


class UnknownLink(KeyError):
    pass


class SlotOccupied(Exception):
    pass


class ShareIneligible(Exception):
    pass


class UnknownConnection(KeyError):
    pass


@dataclass(frozen=True)
class Topology:
    nodes: frozenset
    links: Dict[Link, int]  # (from, to) -> capacity in slots

    def __post_init__(self) -> None:
        for (u, v), cap in self.links.items():
            if u == v:
                raise ValueError(f"self loop {u}")
            if u not in self.nodes or v not in self.nodes:
                raise UnknownNode(f"link {u}-{v} references undeclared node")
            if cap < 1:
                raise ValueError(f"link {u}-{v} capacity {cap}")

    def out_links(self, node: str) -> List[Link]:
        return sorted(l for l in self.links if l[0] == node)

    def in_links(self, node: str) -> List[Link]:
        return sorted(l for l in self.links if l[1] == node)

    def has_link(self, link: Link) -> bool:
        return tuple(link) in self.links


def load_topology(text: str) -> Topology:
    """Parse the line-oriented topology format.

    node <id>
    link <from> <to> <capacity> [bidi]
    '#' starts a comment; blank lines are skipped. A bidi link expands to
    the two directed links.
    """
    nodes: Set[str] = set()
    links: Dict[Link, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "node":
            if len(parts) != 2:
                raise ParseError(lineno, "node takes one id")
            if parts[1] in nodes:
                raise ParseError(lineno, f"duplicate node {parts[1]}")
            nodes.add(parts[1])
        elif parts[0] == "link":
            if len(parts) not in (4, 5) or (len(parts) == 5 and parts[4] != "bidi"):
                raise ParseError(lineno, "link takes <from> <to> <capacity> [bidi]")
            u, v = parts[1], parts[2]
            try:
                cap = int(parts[3])
            except ValueError:
                raise ParseError(lineno, f"bad capacity {parts[3]!r}") from None
            if cap < 1:
                raise ParseError(lineno, f"capacity {cap} < 1")
            if u not in nodes or v not in nodes:
                raise UnknownNode(f"line {lineno}: link {u}-{v} uses undeclared node")
            pairs = [(u, v), (v, u)] if len(parts) == 5 else [(u, v)]
            for pair in pairs:
                if pair in links:
                    raise DuplicateLink(f"line {lineno}: {pair[0]}-{pair[1]}")
                links[pair] = cap
        else:
            raise ParseError(lineno, f"unknown directive {parts[0]!r}")
    if not nodes:
        raise ParseError(0, "no nodes declared")
    return Topology(frozenset(nodes), links)


@lru_cache(maxsize=4096)
def _path_links(path: Tuple[str, ...]) -> Tuple[Link, ...]:
    return tuple((path[i], path[i + 1]) for i in range(len(path) - 1))


@lru_cache(maxsize=4096)
def _link_set(path: Tuple[str, ...]) -> frozenset:
    return frozenset(_path_links(path))


def path_links(path: Sequence[str]) -> Tuple[Link, ...]:
    return _path_links(tuple(path))


def link_disjoint(path_a: Sequence[str], path_b: Sequence[str]) -> bool:
    """True iff the two paths have no directed link in common."""
    return not (_link_set(tuple(path_a)) & _link_set(tuple(path_b)))


@dataclass(frozen=True)
class Connection:
    """An admitted request with its routes, spectrum, and live status.

    extra records stray backup spectrum per link: slots the node fabrics
    physically deliver beyond the assigned range (leaky splitter/coupler
    trees), reserved so later requests cannot collide with them.
    """

    id: str
    source: str
    destination: str
    demand: int
    mode: str
    primary_path: Tuple[str, ...]
    primary_slots: SlotRange
    backup_path: Optional[Tuple[str, ...]] = None
    backup_slots: Optional[SlotRange] = None
    status: str = ON_PRIMARY
    extra: Dict[Link, SlotSet] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if (self.backup_path is None) != (self.backup_slots is None):
            raise ValueError(f"{self.id}: backup path and slots must pair up")
        if self.backup_path is not None and not link_disjoint(
            self.primary_path, self.backup_path
        ):
            raise ValueError(f"{self.id}: backup shares a primary link")
        if (
            self.backup_slots is not None
            and self.backup_slots.width != self.primary_slots.width
        ):
            raise ValueError(f"{self.id}: backup width differs from primary")

    def sid(self, role: str) -> SignalId:
        return SignalId(self.id, role)

    def active_path(self) -> Optional[Tuple[str, ...]]:
        if self.status == ON_PRIMARY:
            return self.primary_path
        if self.status == ON_BACKUP:
            return self.backup_path
        return None


class LinkState:
    """Per-slot holder sets for one directed link, with running counters."""

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.holders: Dict[int, Set[Tuple[str, str]]] = {}
        self.occupied = 0  # slots with at least one holder
        self.backup_cells = 0  # slots with at least one backup holder
        self.shared_backup_cells = 0  # slots with two or more backup holders

    def holders_of(self, slot: int) -> Set[Tuple[str, str]]:
        return self.holders.get(slot, set())

    def occupied_slots(self) -> SlotSet:
        return SlotSet(self.holders)

    def add(self, slot: int, conn: str, role: str) -> None:
        held = self.holders.setdefault(slot, set())
        backups_before = sum(1 for _, r in held if r == ROLE_BACKUP)
        if not held:
            self.occupied += 1
        held.add((conn, role))
        if role == ROLE_BACKUP:
            if backups_before == 0:
                self.backup_cells += 1
            elif backups_before == 1:
                self.shared_backup_cells += 1

    def remove(self, slot: int, conn: str, role: str) -> None:
        held = self.holders.get(slot, set())
        held.discard((conn, role))
        if role == ROLE_BACKUP:
            backups_after = sum(1 for _, r in held if r == ROLE_BACKUP)
            if backups_after == 0:
                self.backup_cells -= 1
            elif backups_after == 1:
                self.shared_backup_cells -= 1
        if not held:
            self.holders.pop(slot, None)
            self.occupied -= 1

    def clone(self) -> "LinkState":
        other = LinkState(self.capacity)
        other.holders = {s: set(h) for s, h in self.holders.items()}
        other.occupied = self.occupied
        other.backup_cells = self.backup_cells
        other.shared_backup_cells = self.shared_backup_cells
        return other

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinkState):
            return NotImplemented
        return self.capacity == other.capacity and self.holders == other.holders

    def __repr__(self) -> str:
        return f"LinkState(capacity={self.capacity}, occupied={self.occupied})"


class NodeSite:
    """One node's fabric, its live configuration, and the demands behind it.

    in_map/out_map translate directed links to the fabric's boundary labels.
    demands are committed (reflected in config); latent holds shared-mode
    backup demands that are only configured when a failure materializes them.
    """

    def __init__(
        self,
        fabric: NodeFabric,
        in_map: Dict[Link, str],
        out_map: Dict[Link, str],
    ) -> None:
        self.fabric = fabric
        self.config = FabricConfig(fabric)
        self.in_map = dict(in_map)
        self.out_map = dict(out_map)
        self.demands: Dict[SignalId, CrossConnectDemand] = {}
        self.latent: Dict[SignalId, CrossConnectDemand] = {}

    def clone(self) -> "NodeSite":
        other = NodeSite.__new__(NodeSite)
        other.fabric = self.fabric
        other.config = self.config.clone()
        other.in_map = dict(self.in_map)
        other.out_map = dict(self.out_map)
        other.demands = dict(self.demands)
        other.latent = dict(self.latent)
        return other

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NodeSite):
            return NotImplemented
        return (
            self.fabric.name == other.fabric.name
            and self.config == other.config
            and self.demands == other.demands
            and self.latent == other.latent
        )


def _site_params(topology: Topology, node: str, base: FabricParams) -> FabricParams:
    # degree-0 sides still need one boundary port for the builders
    return FabricParams(
        in_links=max(1, len(topology.in_links(node))),
        out_links=max(1, len(topology.out_links(node))),
        transceivers=base.transceivers,
        splitter_pool=base.splitter_pool,
        egress_filtering=base.egress_filtering,
        combiners_per_egress=base.combiners_per_egress,
        vos_layers=base.vos_layers,
    )


def build_network(
    topology: Topology,
    arch: str,
    transceivers: int = 8,
    splitter_pool: int = 1,
    egress_filtering: bool = False,
    combiners_per_egress: int = 2,
    vos_layers: int = 2,
) -> "NetworkState":
    """Stand up one fabric per node, sized to the node's degree.

    Link-to-label maps follow sorted link order, so identical topologies
    always wire identically.
    """
    base = FabricParams(
        in_links=1,
        out_links=1,
        transceivers=transceivers,
        splitter_pool=splitter_pool,
        egress_filtering=egress_filtering,
        combiners_per_egress=combiners_per_egress,
        vos_layers=vos_layers,
    )
    sites: Dict[str, NodeSite] = {}
    for node in sorted(topology.nodes):
        params = _site_params(topology, node, base)
        fabric = build_fabric(arch, params=params, name=node)
        in_map = {l: f"in{i}" for i, l in enumerate(topology.in_links(node))}
        out_map = {l: f"out{e}" for e, l in enumerate(topology.out_links(node))}
        sites[node] = NodeSite(fabric, in_map, out_map)
    return NetworkState(topology, arch, sites)


class NetworkState:
    """Single-owner mutable network snapshot; one simulation run owns one."""

    def __init__(self, topology: Topology, arch: str, sites: Dict[str, NodeSite]) -> None:
        self.topology = topology
        self.arch = arch
        self.sites = sites
        self.link_states: Dict[Link, LinkState] = {
            l: LinkState(cap) for l, cap in topology.links.items()
        }
        self.connections: Dict[str, Connection] = {}
        self.failed: Set[Link] = set()

    # -- occupancy ---------------------------------------------------------

    def _eligible(
        self,
        holder: Tuple[str, str],
        conn: str,
        mode: str,
        primary_path: Sequence[str],
    ) -> bool:
        held_conn, held_role = holder
        if held_role != ROLE_BACKUP or held_conn == conn:
            return False
        if mode not in SHARING_MODES:
            return False
        incumbent = self.connections.get(held_conn)
        if incumbent is None or incumbent.mode not in SHARING_MODES:
            return False
        return link_disjoint(primary_path, incumbent.primary_path)

    def allocate(
        self,
        link: Link,
        slots: SlotSet,
        conn: str,
        role: str,
        primary_path: Optional[Sequence[str]] = None,
        mode: Optional[str] = None,
    ) -> None:
        """Reserve slots atomically; backups may join eligible backups only.

        primary_path/mode describe the candidate when it is not registered
        yet; for a registered connection they come from the registry.
        """
        link = tuple(link)
        state = self.link_states.get(link)
        if state is None:
            raise UnknownLink(link)
        if primary_path is None or mode is None:
            existing = self.connections.get(conn)
            if existing is None:
                raise ValueError(f"{conn} not registered and no primary/mode given")
            primary_path = existing.primary_path
            mode = existing.mode
        for slot in slots:
            if slot < 1 or slot > state.capacity:
                raise SlotOccupied(f"slot {slot} outside 1-{state.capacity} on {link}")
            held = state.holders_of(slot)
            if not held:
                continue
            if role == ROLE_PRIMARY:
                raise SlotOccupied(f"slot {slot} on {link} held by {sorted(held)}")
            for holder in held:
                if not self._eligible(holder, conn, mode, primary_path):
                    if holder[1] == ROLE_PRIMARY:
                        raise SlotOccupied(
                            f"slot {slot} on {link} carries primary {holder[0]}"
                        )
                    raise ShareIneligible(
                        f"slot {slot} on {link}: {conn} cannot share with {holder[0]}"
                    )
        for slot in slots:
            state.add(slot, conn, role)

    def release(self, link: Link, slots: SlotSet, conn: str, role: str) -> None:
        state = self.link_states[tuple(link)]
        for slot in slots:
            state.remove(slot, conn, role)

    def occupied_on(self, links: Iterable[Link]) -> SlotSet:
        out: SlotSet = SlotSet()
        for link in links:
            out = out | self.link_states[tuple(link)].occupied_slots()
        return out

    # -- aggregate counters --------------------------------------------------

    def occupied_cells(self) -> int:
        return sum(s.occupied for s in self.link_states.values())

    def backup_cells(self) -> int:
        return sum(s.backup_cells for s in self.link_states.values())

    def shared_backup_cells(self) -> int:
        return sum(s.shared_backup_cells for s in self.link_states.values())

    def total_cells(self) -> int:
        return sum(s.capacity for s in self.link_states.values())

    # -- plumbing ------------------------------------------------------------

    def min_capacity(self, links: Iterable[Link]) -> int:
        return min(self.link_states[tuple(l)].capacity for l in links)

    def clone(self) -> "NetworkState":
        other = NetworkState.__new__(NetworkState)
        other.topology = self.topology
        other.arch = self.arch
        other.sites = {n: s.clone() for n, s in self.sites.items()}
        other.link_states = {l: s.clone() for l, s in self.link_states.items()}
        other.connections = dict(self.connections)
        other.failed = set(self.failed)
        return other

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NetworkState):
            return NotImplemented
        return (
            self.arch == other.arch
            and self.topology == other.topology
            and self.link_states == other.link_states
            and self.sites == other.sites
            and self.connections == other.connections
            and self.failed == other.failed
        )


BUILTIN_TOPOLOGIES = ("fig2", "fig4", "fig8", "sim6")


def builtin_topology(name: str) -> Topology:
    """Load one of the packaged topology files by bare name."""
    if name not in BUILTIN_TOPOLOGIES:
        raise ValueError(f"unknown builtin topology {name!r}; have {BUILTIN_TOPOLOGIES}")
    text = resources.files("eonsurv").joinpath(f"data/{name}.topo").read_text("utf-8")
    return load_topology(text)
