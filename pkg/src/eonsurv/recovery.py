"""Single-link failure injection, rerouting onto backups, and verification.

Pre-configured backups (dedicated, pbps) switch over without touching any
intermediate fabric; shared backups must materialize their deferred
configurations first and pay the component switching time. After every
failure the whole network is re-propagated and live signals are checked
for harmful interference.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Set, Tuple

from .fabric import (
    FabricConfig,
    HarmfulInterference,
    Infeasible,
    SignalId,
    find_config,
    interference_events,
    propagate,
    reconfig_delta,
)
from .network import (
    FAILED,
    Link,
    MODE_SHARED,
    NetworkState,
    ON_BACKUP,
    ON_PRIMARY,
    ROLE_BACKUP,
    ROLE_PRIMARY,
    UnknownLink,
    path_links,
)
from .provisioning import (
    exclusive_pairs,
    node_assignments,
    node_seeds,
    registry_primaries,
)

RECOVERED = "recovered"
UNRECOVERABLE = "unrecoverable"
RECOVERY_BLOCKED = "recovery-blocked"


class AlreadyFailed(ValueError):
    pass


class NotFailed(ValueError):
    pass


@dataclass
class RecoveryReport:
    """What one link failure did: per-connection outcome and reconfig cost.

    changed_components counts fabric settings touched per node; absent
    nodes changed nothing. recovery_time_ms is per recovered connection,
    the slowest component reconfiguration on its backup path (endpoint
    transceiver switchover is modeled as instantaneous).
    """

    failed_link: Link
    outcomes: Dict[str, str]
    changed_components: Dict[str, int]
    recovery_time_ms: Dict[str, float]
    harmful: Tuple[Tuple[str, HarmfulInterference], ...]

    def changed_at(self, node: str) -> int:
        return self.changed_components.get(node, 0)

    def recovered(self) -> List[str]:
        return sorted(c for c, o in self.outcomes.items() if o == RECOVERED)

    def to_json(self) -> dict:
        return {
            "failed_link": list(self.failed_link),
            "outcomes": dict(sorted(self.outcomes.items())),
            "changed_components": dict(sorted(self.changed_components.items())),
            "recovery_time_ms": dict(sorted(self.recovery_time_ms.items())),
            "harmful_interference": [
                {
                    "node": node,
                    "combiner": ev.combiner,
                    "signals": [str(ev.a), str(ev.b)],
                    "victim": str(ev.victim),
                    "where": ev.where,
                    "overlap": sorted(ev.overlap),
                    "affected": sorted(ev.affected),
                }
                for node, ev in self.harmful
            ],
        }


def active_signals(state: NetworkState) -> Set[SignalId]:
    live: Set[SignalId] = set()
    for conn in state.connections.values():
        if conn.status == ON_PRIMARY:
            live.add(conn.sid(ROLE_PRIMARY))
        elif conn.status == ON_BACKUP:
            live.add(conn.sid(ROLE_BACKUP))
    return live


def verify_interference(
    state: NetworkState,
) -> List[Tuple[str, HarmfulInterference]]:
    """Re-propagate every node and collect corruption of live spectrum."""
    live = active_signals(state)
    out: List[Tuple[str, HarmfulInterference]] = []
    for node in sorted(state.sites):
        site = state.sites[node]
        if not site.demands:
            continue
        demands = list(site.demands.values())
        ingress, adds = node_seeds(demands)
        trace = propagate(site.fabric, site.config, ingress=ingress, adds=adds)
        assignments = node_assignments(site, demands, site.config)
        for ev in interference_events(trace, live, assignments):
            out.append((node, ev))
    return out


def _materialize(
    state: NetworkState, conn_id: str
) -> Optional[Tuple[Dict[str, int], float]]:
    """Configure a shared backup now; None if some fabric refuses."""
    conn = state.connections[conn_id]
    bsid = conn.sid(ROLE_BACKUP)
    primaries = registry_primaries(state)
    staged: Dict[str, FabricConfig] = {}
    changed: Dict[str, int] = {}
    worst = 0.0
    for node in conn.backup_path:
        site = state.sites[node]
        demand = site.latent[bsid]
        demands = list(site.demands.values()) + [demand]
        pairs = exclusive_pairs([d.sid for d in demands], primaries)
        try:
            new = find_config(
                site.fabric,
                demands,
                base=site.config,
                exclusive=pairs,
                harm_check=len(demands) > 1,
            )
        except Infeasible:
            return None
        delta = reconfig_delta(site.config, new)
        if delta.changed_components:
            changed[node] = delta.changed_components
            worst = max(worst, delta.time_ms)
        staged[node] = new
    for node in conn.backup_path:
        site = state.sites[node]
        site.config = staged[node]
        site.demands[bsid] = site.latent.pop(bsid)
    return changed, worst


def fail_link(state: NetworkState, link: Link) -> RecoveryReport:
    """Take a link down and reroute everything riding it.

    Raises UnknownLink/AlreadyFailed. Connections without a usable backup
    are unrecoverable; shared connections whose deferred configuration no
    longer fits any fabric are recovery-blocked. Both stay down until a
    repair restores their primary.
    """
    link = tuple(link)
    if link not in state.topology.links:
        raise UnknownLink(link)
    if link in state.failed:
        raise AlreadyFailed(f"{link} is already down")
    state.failed.add(link)

    outcomes: Dict[str, str] = {}
    changed: Dict[str, int] = {}
    times: Dict[str, float] = {}
    for cid in sorted(state.connections):
        conn = state.connections[cid]
        if conn.status == ON_PRIMARY and link in path_links(conn.primary_path):
            usable = (
                conn.backup_path is not None
                and not (set(path_links(conn.backup_path)) & state.failed)
            )
            if not usable:
                outcomes[cid] = UNRECOVERABLE
                state.connections[cid] = replace(conn, status=FAILED)
            elif conn.mode == MODE_SHARED:
                result = _materialize(state, cid)
                if result is None:
                    outcomes[cid] = RECOVERY_BLOCKED
                    state.connections[cid] = replace(conn, status=FAILED)
                else:
                    node_changes, worst = result
                    for node, count in node_changes.items():
                        changed[node] = changed.get(node, 0) + count
                    times[cid] = worst
                    outcomes[cid] = RECOVERED
                    state.connections[cid] = replace(conn, status=ON_BACKUP)
            else:
                # pre-configured: endpoints switch, intermediates do nothing
                times[cid] = 0.0
                outcomes[cid] = RECOVERED
                state.connections[cid] = replace(conn, status=ON_BACKUP)
        elif conn.status == ON_BACKUP and link in path_links(conn.backup_path):
            outcomes[cid] = UNRECOVERABLE
            state.connections[cid] = replace(conn, status=FAILED)

    harmful = tuple(verify_interference(state))
    return RecoveryReport(link, outcomes, changed, times, harmful)


def repair_link(state: NetworkState, link: Link) -> None:
    """Bring a link back; traffic reverts to whole primaries.

    Shared-mode configurations materialized for the failure are rolled
    back to latent, restoring the pre-failure fabric state exactly.
    """
    link = tuple(link)
    if link not in state.failed:
        raise NotFailed(f"{link} is not down")
    state.failed.discard(link)
    for cid in sorted(state.connections):
        conn = state.connections[cid]
        if conn.status == ON_PRIMARY:
            continue
        on_primary = link in path_links(conn.primary_path)
        still_broken = set(path_links(conn.primary_path)) & state.failed
        if not on_primary or still_broken:
            continue
        if conn.status == ON_BACKUP and conn.mode == MODE_SHARED:
            bsid = conn.sid(ROLE_BACKUP)
            for node in conn.backup_path:
                site = state.sites[node]
                demand = site.demands.pop(bsid)
                site.config.remove_signal(bsid)
                site.latent[bsid] = demand
        state.connections[cid] = replace(conn, status=ON_PRIMARY)
