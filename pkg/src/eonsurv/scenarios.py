"""Named reproduction scenarios with self-checking reports.

Each scenario stands up a small network, drives a fixed admission (and
sometimes failure) sequence, and records every claim it makes as an
expected/observed pair. A scenario passes only if every check matches,
so these double as executable documentation of the architecture
comparisons the package exists to make.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .fabric import (
    NO_COMBINING,
    NO_FREE_COMBINER,
    CrossConnectDemand,
    FabricParams,
    Infeasible,
    SignalId,
    build_fabric,
    find_config,
)
from .network import (
    MODE_DEDICATED,
    MODE_PBPS,
    MODE_SHARED,
    MODE_UNPROTECTED,
    Connection,
    NetworkState,
    build_network,
    builtin_topology,
)
from .provisioning import (
    BLOCK_FABRIC_INFEASIBLE,
    Blocked,
    Request,
    egress_slots,
    provision,
)
from .recovery import RECOVERED, fail_link, repair_link
from .spectrum import SlotRange, SlotSet

BASELINE = "gridless-mg-extra"
PROPOSED = "proposed-traditional"
PROPOSED_VOS = "proposed-vos"


class UnknownScenario(ValueError):
    pass


@dataclass(frozen=True)
class Check:
    """One verified claim: a description and the expected/observed pair."""

    description: str
    expected: object
    observed: object

    @property
    def ok(self) -> bool:
        return self.expected == self.observed


@dataclass
class ScenarioReport:
    scenario: str
    checks: List[Check] = field(default_factory=list)

    def add(self, description: str, expected: object, observed: object) -> None:
        self.checks.append(Check(description, expected, observed))

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.ok]

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "checks": [
                {
                    "description": c.description,
                    "expected": _plain(c.expected),
                    "observed": _plain(c.observed),
                    "ok": c.ok,
                }
                for c in self.checks
            ],
        }


def _plain(value: object) -> object:
    if isinstance(value, (SlotSet, SlotRange)):
        return str(value)
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)


def _accepted(report: ScenarioReport, label: str, result: object) -> Optional[Connection]:
    """Record whether a provisioning result is an admission; pass it through."""
    if isinstance(result, Connection):
        report.add(f"{label} admitted", True, True)
        return result
    report.add(f"{label} admitted", True, f"blocked: {result.reason}")
    return None


def _doubly_held(state: NetworkState, link: Tuple[str, str]) -> int:
    return state.link_states[link].shared_backup_cells


# -- protection method comparison -------------------------------------------


def _fig2(name: str, mode: str) -> ScenarioReport:
    rep = ScenarioReport(name)
    state = build_network(builtin_topology("fig2"), PROPOSED)
    c1 = _accepted(rep, "P1 A->B", provision(state, Request("P1", "A", "B", 1, mode)))
    c2 = _accepted(rep, "P2 E->F", provision(state, Request("P2", "E", "F", 1, mode)))
    if c1 is None or c2 is None:
        return rep
    rep.add("B1 detours through C-D", ("A", "C", "D", "B"), c1.backup_path)
    rep.add("B2 detours through C-D", ("E", "C", "D", "F"), c2.backup_path)
    if mode == MODE_DEDICATED:
        # B1 owns slot 1 end to end; continuity pushes B2 to slot 2.
        rep.add("B2 backup slot avoids B1 on C-D", "2-2", str(c2.backup_slots))
        rep.add("backup cells consumed", 6, state.backup_cells())
        rep.add("cells held by two backups", 0, state.shared_backup_cells())
    else:
        rep.add("B2 backup slot co-held with B1", "1-1", str(c2.backup_slots))
        rep.add("backup cells consumed", 5, state.backup_cells())
        rep.add("cells held by two backups", 1, state.shared_backup_cells())
    site_c = state.sites["C"]
    b2 = c2.sid("backup")
    if mode == MODE_SHARED:
        rep.add("B2 latent at C before failure", True, b2 in site_c.latent)
        rep.add("B2 not configured at C before failure", False, b2 in site_c.demands)
        report = fail_link(state, ("E", "F"))
        rep.add("P2 recovered after E-F failure", RECOVERED, report.outcomes["P2"])
        rep.add(
            "shared recovery waits on flexgrid reconfiguration (>= 300 ms)",
            True,
            report.recovery_time_ms.get("P2", 0.0) >= 300.0,
        )
        rep.add("intermediate node C reconfigured", True, report.changed_at("C") >= 1)
        repair_link(state, ("E", "F"))
        rep.add("repair rolls B2 back to latent", True, b2 in state.sites["C"].latent)
    elif mode == MODE_PBPS:
        rep.add("B2 pre-configured at C", True, b2 in site_c.demands)
        report = fail_link(state, ("E", "F"))
        rep.add("P2 recovered after E-F failure", RECOVERED, report.outcomes["P2"])
        rep.add("no component changed at C", 0, report.changed_at("C"))
        rep.add("no component changed at D", 0, report.changed_at("D"))
        rep.add("recovery time (ms)", 0.0, report.recovery_time_ms.get("P2"))
        rep.add("no harmful interference after switchover", 0, len(report.harmful))
        repair_link(state, ("E", "F"))
    return rep


# -- stray spectrum on the unfiltered baseline -------------------------------


def _fig4_pair(
    arch: str,
    egress_filtering: bool = False,
    backup_slots: Optional[SlotRange] = None,
) -> Tuple[NetworkState, object, object]:
    state = build_network(
        builtin_topology("fig4"), arch, egress_filtering=egress_filtering
    )
    c1 = provision(state, Request("P1", "A", "B", 10, MODE_PBPS))
    c2 = provision(
        state, Request("P2", "E", "F", 3, MODE_PBPS), backup_slots=backup_slots
    )
    return state, c1, c2


def _fig4a() -> ScenarioReport:
    rep = ScenarioReport("fig4a-problemA")
    state, r1, r2 = _fig4_pair(BASELINE)
    c1 = _accepted(rep, "P1 A->B (10 slots)", r1)
    c2 = _accepted(rep, "P2 E->F (3 slots)", r2)
    if c1 is None or c2 is None:
        return rep
    rep.add("B1 slots", "1-10", str(c1.backup_slots))
    rep.add("B2 slots", "1-3", str(c2.backup_slots))
    rep.add("B1/B2 co-held cells on C-D", 3, _doubly_held(state, ("C", "D")))
    # The D splitter copies B1's whole trunk into B2's coupler; nothing
    # downstream filters it, so B2's reservation on D-F balloons to 1-10.
    consumed = egress_slots(state, "P2", ("D", "F"))
    rep.add("slots B2 consumes on D-F", "1-10", str(consumed))
    rep.add("extra slots beyond the assigned range", 7, len(consumed - c2.backup_slots))
    rep.add(
        "stray cells reserved on D-F",
        "4-10",
        str(c2.extra.get(("D", "F"), SlotSet())),
    )
    rep.add("D-F occupancy", "1-10", str(state.link_states[("D", "F")].occupied_slots()))

    prop, p1, p2 = _fig4_pair(PROPOSED)
    g1 = _accepted(rep, "proposed: P1 A->B", p1)
    g2 = _accepted(rep, "proposed: P2 E->F", p2)
    if g1 is None or g2 is None:
        return rep
    clean = egress_slots(prop, "P2", ("D", "F"))
    rep.add("proposed: slots B2 consumes on D-F", "1-3", str(clean))
    rep.add("proposed: extra slots", 0, len(clean - g2.backup_slots))
    rep.add("proposed: D-F occupancy", "1-3", str(prop.link_states[("D", "F")].occupied_slots()))
    return rep


def _fig4b(name: str, pinned: Optional[SlotRange], co_held: int, consumed: str, extra: int) -> ScenarioReport:
    rep = ScenarioReport(name)
    state, r1, r2 = _fig4_pair(BASELINE, backup_slots=pinned)
    c1 = _accepted(rep, "P1 A->B (10 slots)", r1)
    c2 = _accepted(rep, "P2 E->F (3 slots)", r2)
    if c1 is None or c2 is None:
        return rep
    if pinned is not None:
        rep.add("B2 pinned slots", str(pinned), str(c2.backup_slots))
    rep.add("B1/B2 co-held cells on C-D", co_held, _doubly_held(state, ("C", "D")))
    seen = egress_slots(state, "P2", ("D", "F"))
    rep.add("slots B2 consumes on D-F", consumed, str(seen))
    rep.add("extra slots beyond the assigned range", extra, len(seen - c2.backup_slots))
    return rep


# -- in-band interference and blocked admission at node D --------------------


def _patched_pair(arch: str) -> Tuple[NetworkState, object, object]:
    # Baseline with the obvious patch applied: an egress WSS behind each
    # coupler strips spectrum nobody is assigned. In-band overlap survives it.
    if arch == BASELINE:
        return _fig4_pair(arch, egress_filtering=True)
    return _fig4_pair(arch)


def _fig5_problem_b() -> ScenarioReport:
    rep = ScenarioReport("fig5-problemB")
    state, r1, r2 = _patched_pair(BASELINE)
    c1 = _accepted(rep, "P1 A->B (10 slots)", r1)
    c2 = _accepted(rep, "P2 E->F (3 slots)", r2)
    if c1 is None or c2 is None:
        return rep
    rep.add(
        "egress filtering pins B2 to its assigned range on D-F",
        "1-3",
        str(egress_slots(state, "P2", ("D", "F"))),
    )
    # Slots 4-10 on D-F look free, but any signal placed there would share
    # B2's coupler with B1's in-band stray copy, so admission refuses it.
    attempt = provision(state, Request("P3", "D", "F", 7, MODE_UNPROTECTED))
    blocked = isinstance(attempt, Blocked)
    rep.add("P3 D->F (7 slots) refused despite free spectrum", True, blocked)
    if blocked:
        rep.add("refusal names the fabric", BLOCK_FABRIC_INFEASIBLE, attempt.reason.kind)
        rep.add("refusal names node D", "D", attempt.reason.node)
        rep.add("refusal cause", NO_FREE_COMBINER, attempt.reason.cause)
    forced = provision(
        state, Request("P3", "D", "F", 7, MODE_UNPROTECTED), harm_check=False
    )
    c3 = _accepted(rep, "P3 forced in without the interference check", forced)
    if c3 is None:
        return rep
    rep.add("P3 slots", "4-10", str(c3.primary_slots))
    report = fail_link(state, ("A", "B"))
    rep.add("P1 recovered onto B1", RECOVERED, report.outcomes["P1"])
    rep.add("harmful interference events", 1, len(report.harmful))
    if report.harmful:
        node, ev = report.harmful[0]
        rep.add("interference is at node D", "D", node)
        rep.add("interference overlap", "4-10", str(SlotSet(ev.overlap)))
        rep.add("victim is P3's working signal", "P3/primary", str(ev.victim))
        rep.add("corrupted slots", "4-10", str(SlotSet(ev.affected)))
    return rep


def _fig5_problem_c() -> ScenarioReport:
    rep = ScenarioReport("fig5-problemC")
    outcomes: Dict[str, object] = {}
    for arch in (BASELINE, PROPOSED, PROPOSED_VOS):
        state = build_network(
            builtin_topology("fig4"),
            arch,
            egress_filtering=(arch == BASELINE),
        )
        label = "baseline" if arch == BASELINE else arch
        c3 = _accepted(
            rep,
            f"{label}: P3 D->F first",
            provision(state, Request("P3", "D", "F", 7, MODE_UNPROTECTED)),
        )
        c1 = _accepted(
            rep,
            f"{label}: P1 A->B second",
            provision(state, Request("P1", "A", "B", 10, MODE_PBPS)),
        )
        if c3 is None or c1 is None:
            return rep
        outcomes[label] = provision(state, Request("P2", "E", "F", 3, MODE_PBPS))
        if isinstance(outcomes[label], Connection):
            rep.add(
                f"{label}: B1/B2 co-held cells on C-D",
                3,
                _doubly_held(state, ("C", "D")),
            )
    # Same arrival order, opposite outcomes: the single shared coupler at D
    # cannot take B2 without hitting P3, the proposed fabrics can.
    base = outcomes["baseline"]
    rep.add("baseline: P2 refused", True, isinstance(base, Blocked))
    if isinstance(base, Blocked):
        rep.add("baseline: refusal names the fabric", BLOCK_FABRIC_INFEASIBLE, base.reason.kind)
        rep.add("baseline: refusal names node D", "D", base.reason.node)
    for arch in (PROPOSED, PROPOSED_VOS):
        rep.add(f"{arch}: P2 admitted with sharing", True, isinstance(outcomes[arch], Connection))
    return rep


# -- full walkthrough on the proposed fabrics --------------------------------


def _fig8(name: str, arch: str) -> ScenarioReport:
    rep = ScenarioReport(name)
    state = build_network(builtin_topology("fig8"), arch)
    c1 = _accepted(rep, "P1 A->B (10 slots, pbps)", provision(state, Request("P1", "A", "B", 10, MODE_PBPS)))
    c2 = _accepted(rep, "P2 E->F (3 slots, pbps)", provision(state, Request("P2", "E", "F", 3, MODE_PBPS)))
    c3 = _accepted(rep, "P3 D->F (4 slots)", provision(state, Request("P3", "D", "F", 4, MODE_UNPROTECTED)))
    c4 = _accepted(rep, "P4 B->F (3 slots)", provision(state, Request("P4", "B", "F", 3, MODE_UNPROTECTED)))
    if None in (c1, c2, c3, c4):
        return rep
    rep.add("P1 rides A-N-B", ("A", "N", "B"), c1.primary_path)
    rep.add("B1 detours A-C-D-B", ("A", "C", "D", "B"), c1.backup_path)
    rep.add("B1 slots", "1-10", str(c1.backup_slots))
    rep.add("B2 detours E-C-D-F", ("E", "C", "D", "F"), c2.backup_path)
    rep.add("B2 slots", "1-3", str(c2.backup_slots))
    rep.add("B1/B2 co-held cells on C-D", 3, _doubly_held(state, ("C", "D")))
    rep.add("P3 slots above B2", "4-7", str(c3.primary_slots))
    rep.add("P4 rides B-D-F", ("B", "D", "F"), c4.primary_path)
    rep.add("P4 slots above P3", "8-10", str(c4.primary_slots))
    rep.add("B2 consumes exactly its range on D-F", "1-3", str(egress_slots(state, "P2", ("D", "F"))))
    rep.add("D-F occupancy", "1-10", str(state.link_states[("D", "F")].occupied_slots()))

    before = state.clone()
    report = fail_link(state, ("A", "N"))
    rep.add("P1 recovered after A-N failure", RECOVERED, report.outcomes["P1"])
    rep.add("no component changed at C", 0, report.changed_at("C"))
    rep.add("no component changed at D", 0, report.changed_at("D"))
    rep.add("recovery time (ms)", 0.0, report.recovery_time_ms.get("P1"))
    rep.add("no harmful interference with P3/P4 live", 0, len(report.harmful))
    repair_link(state, ("A", "N"))
    rep.add("repair restores the pre-failure state", True, state == before)

    report2 = fail_link(state, ("E", "F"))
    rep.add("P2 recovered after E-F failure", RECOVERED, report2.outcomes["P2"])
    rep.add("P2 recovery time (ms)", 0.0, report2.recovery_time_ms.get("P2"))
    rep.add("no harmful interference on the shared segment", 0, len(report2.harmful))
    repair_link(state, ("E", "F"))
    return rep


# -- what a fabric without combining cannot do --------------------------------


def _broadcast_select() -> ScenarioReport:
    rep = ScenarioReport("broadcast-select-no-combine")
    fabric = build_fabric(
        "broadcast-select",
        params=FabricParams(in_links=2, out_links=1, transceivers=2),
        name="X",
    )
    b1 = CrossConnectDemand(SignalId("c1", "backup"), "in0", "out0", SlotRange(1, 10).to_set())
    b2 = CrossConnectDemand(SignalId("c2", "backup"), "in1", "out0", SlotRange(1, 3).to_set())
    try:
        find_config(fabric, [b1, b2], exclusive=[(b1.sid, b2.sid)])
        rep.add("two ingresses cannot merge onto one egress", NO_COMBINING, "configured")
    except Infeasible as exc:
        rep.add("two ingresses cannot merge onto one egress", NO_COMBINING, exc.cause)

    state = build_network(builtin_topology("fig4"), "broadcast-select")
    c1 = _accepted(rep, "P1 A->B (10 slots, pbps)", provision(state, Request("P1", "A", "B", 10, MODE_PBPS)))
    c2 = _accepted(rep, "P2 E->F (3 slots, pbps)", provision(state, Request("P2", "E", "F", 3, MODE_PBPS)))
    if c1 is None or c2 is None:
        return rep
    # The egress WSS at C cannot select the same slots from two inputs, so
    # every co-holding window is infeasible and P2 lands without sharing.
    rep.add("no cell is co-held by two backups", 0, state.shared_backup_cells())
    rep.add(
        "B2 does not join B1 on C-D",
        False,
        c2.backup_path is not None and ("C", "D") in _links_of(c2.backup_path),
    )
    return rep


def _links_of(path: Tuple[str, ...]) -> List[Tuple[str, str]]:
    return [(path[i], path[i + 1]) for i in range(len(path) - 1)]


_SCENARIOS: Dict[str, Callable[[], ScenarioReport]] = {
    "fig2-dedicated": lambda: _fig2("fig2-dedicated", MODE_DEDICATED),
    "fig2-shared": lambda: _fig2("fig2-shared", MODE_SHARED),
    "fig2-pbps": lambda: _fig2("fig2-pbps", MODE_PBPS),
    "fig4a-problemA": _fig4a,
    "fig4b-i": lambda: _fig4b("fig4b-i", None, 3, "1-10", 7),
    "fig4b-ii": lambda: _fig4b("fig4b-ii", SlotRange(4, 6), 3, "1-10", 7),
    "fig4b-iii": lambda: _fig4b("fig4b-iii", SlotRange(9, 11), 2, "1-11", 8),
    "fig5-problemB": _fig5_problem_b,
    "fig5-problemC": _fig5_problem_c,
    "fig8-proposed-traditional": lambda: _fig8("fig8-proposed-traditional", PROPOSED),
    "fig8-proposed-vos": lambda: _fig8("fig8-proposed-vos", PROPOSED_VOS),
    "broadcast-select-no-combine": _broadcast_select,
}

SCENARIO_NAMES: Tuple[str, ...] = tuple(_SCENARIOS)


def scenario_names() -> List[str]:
    return list(SCENARIO_NAMES)


def run_scenario(name: str) -> ScenarioReport:
    try:
        fn = _SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(
            f"unknown scenario {name!r}; run list-scenarios for the catalog"
        ) from None
    return fn()
