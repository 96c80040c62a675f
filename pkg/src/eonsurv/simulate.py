"""Seeded Monte Carlo traffic engine and cross-architecture comparison.

A run is a pure function of (config, seed): arrivals are Poisson, holding
times exponential, endpoints uniform over reachable node pairs, demands
uniform integers. compare() replays the identical trace against several
architecture/mode combinations so differences come from the fabrics, not
the traffic.
"""

from __future__ import annotations

import heapq
import os
import random
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .fabric import ARCHITECTURES
from .network import (
    BUILTIN_TOPOLOGIES,
    MODES,
    MODE_UNPROTECTED,
    NetworkState,
    Topology,
    build_network,
    builtin_topology,
    load_topology,
)
from .provisioning import Blocked, Request, provision, teardown
from .recovery import RECOVERED, RECOVERY_BLOCKED, UNRECOVERABLE, fail_link, repair_link

FAILURES_NONE = "none"
FAILURES_RANDOM = "random"
FAILURES_SWEEP = "sweep"
FAILURE_POLICIES = (FAILURES_NONE, FAILURES_RANDOM, FAILURES_SWEEP)


class ConfigError(ValueError):
    pass


class IncomparableConfigs(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """One experiment point; everything a run needs to be reproducible."""

    topology: str
    arch: str
    mode: str
    arrival_rate: float
    holding_time: float = 1.0
    demand_lo: int = 1
    demand_hi: int = 8
    requests: int = 10_000
    seed: int = 0
    failures: str = FAILURES_NONE
    failure_rate: float = 0.0
    transceivers: int = 8
    k: int = 3
    egress_filtering: bool = False

    def __post_init__(self) -> None:
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.arch!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown protection mode {self.mode!r}")
        if self.arrival_rate <= 0 or self.holding_time <= 0:
            raise ConfigError("rates must be positive")
        if self.demand_lo < 1 or self.demand_hi < self.demand_lo:
            raise ConfigError("demand range must satisfy 1 <= lo <= hi")
        if self.requests < 1:
            raise ConfigError("request count must be at least 1")
        if self.failures not in FAILURE_POLICIES:
            raise ConfigError(f"unknown failure policy {self.failures!r}")
        if self.failures == FAILURES_RANDOM and self.failure_rate <= 0:
            raise ConfigError("random failures need failure_rate > 0")
        if self.k < 1:
            raise ConfigError("k must be at least 1")

    def traffic_key(self) -> tuple:
        """Everything that shapes the request trace; arch/mode excluded."""
        return (
            self.topology,
            self.arrival_rate,
            self.holding_time,
            self.demand_lo,
            self.demand_hi,
            self.requests,
            self.seed,
            self.failures,
            self.failure_rate,
        )


METRIC_FIELDS = (
    "requests",
    "accepted",
    "blocked",
    "blocking_probability",
    "block_reasons",
    "utilization",
    "sharing_ratio",
    "mean_extra_backup_slots",
    "backup_cells_allocated",
    "recovery_attempts",
    "recovery_success_rate",
    "mean_recovery_time_ms",
    "recovery_blocked",
    "unrecoverable",
    "harmful_events",
)


@dataclass(frozen=True)
class Metrics:
    """Aggregates of one run; utilization and sharing are time-averaged."""

    requests: int
    accepted: int
    blocked: int
    blocking_probability: float
    block_reasons: Dict[str, int]
    utilization: float
    sharing_ratio: float
    mean_extra_backup_slots: Optional[float]
    backup_cells_allocated: int
    recovery_attempts: int
    recovery_success_rate: Optional[float]
    mean_recovery_time_ms: Optional[float]
    recovery_blocked: int
    unrecoverable: int
    harmful_events: int

    def to_json(self) -> dict:
        out = asdict(self)
        out["block_reasons"] = dict(sorted(self.block_reasons.items()))
        return out


@dataclass(frozen=True)
class RequestOutcome:
    """Per-request admission record, for common-subset comparisons."""

    rid: str
    accepted: bool
    reason: Optional[str]
    new_backup_cells: int


@dataclass(frozen=True)
class _Arrival:
    time: float
    rid: str
    source: str
    destination: str
    demand: int
    hold: float


@dataclass(frozen=True)
class _Failure:
    time: float
    link: Tuple[str, str]
    repair_at: float


def load_sim_topology(name_or_path: str) -> Topology:
    """Resolve a builtin topology name or read a topology file."""
    if name_or_path in BUILTIN_TOPOLOGIES:
        return builtin_topology(name_or_path)
    if os.path.exists(name_or_path):
        with open(name_or_path, "r", encoding="utf-8") as fh:
            return load_topology(fh.read())
    raise ConfigError(
        f"topology {name_or_path!r} is neither a builtin name {BUILTIN_TOPOLOGIES} nor a file"
    )


def _reachable_pairs(topology: Topology) -> List[Tuple[str, str]]:
    pairs: List[Tuple[str, str]] = []
    for src in sorted(topology.nodes):
        seen = {src}
        frontier = [src]
        while frontier:
            node = frontier.pop()
            for link in topology.out_links(node):
                if link[1] not in seen:
                    seen.add(link[1])
                    frontier.append(link[1])
        pairs.extend((src, dst) for dst in sorted(seen) if dst != src)
    return pairs


def traffic_trace(config: SimConfig, topology: Topology) -> List[_Arrival]:
    """The deterministic request sequence for a config's traffic parameters."""
    pairs = _reachable_pairs(topology)
    if not pairs:
        raise ConfigError("topology has no connected node pair")
    rng = random.Random(config.seed)
    out: List[_Arrival] = []
    t = 0.0
    for i in range(config.requests):
        t += rng.expovariate(config.arrival_rate)
        source, destination = pairs[rng.randrange(len(pairs))]
        demand = rng.randint(config.demand_lo, config.demand_hi)
        hold = rng.expovariate(1.0 / config.holding_time)
        out.append(_Arrival(t, f"r{i}", source, destination, demand, hold))
    return out


def failure_trace(config: SimConfig, topology: Topology, horizon: float) -> List[_Failure]:
    """Deterministic failure schedule under the configured policy.

    random: Poisson failure epochs at failure_rate, link uniform, repaired
    one mean holding time later (an epoch hitting a still-failed link is
    dropped at execution time). sweep: each link fails once, evenly spaced
    across the arrival horizon, so recovery is exercised mid-traffic.
    """
    links = sorted(topology.links)
    if config.failures == FAILURES_NONE:
        return []
    if config.failures == FAILURES_RANDOM:
        rng = random.Random(f"{config.seed}/failures")
        out: List[_Failure] = []
        t = 0.0
        while True:
            t += rng.expovariate(config.failure_rate)
            if t >= horizon:
                return out
            link = links[rng.randrange(len(links))]
            out.append(_Failure(t, link, t + config.holding_time))
        return out
    step = horizon / len(links)
    return [
        _Failure((j + 0.5) * step, link, (j + 0.5) * step + config.holding_time)
        for j, link in enumerate(links)
    ]


# Event kinds ordered so simultaneous timestamps resolve deterministically:
# repairs land before arrivals, departures after, failures last.
_REPAIR, _ARRIVE, _DEPART, _FAIL = 0, 1, 2, 3


def run(config: SimConfig) -> Metrics:
    metrics, _ = run_detail(config)
    return metrics


def run_detail(config: SimConfig) -> Tuple[Metrics, Tuple[RequestOutcome, ...]]:
    """Execute one run and keep the per-request admission log."""
    topology = load_sim_topology(config.topology)
    if config.demand_hi > min(topology.links.values()):
        # legal but hopeless demands are allowed; they just block.
        pass
    state = build_network(
        topology,
        config.arch,
        transceivers=config.transceivers,
        egress_filtering=config.egress_filtering,
    )
    arrivals = traffic_trace(config, topology)
    horizon = arrivals[-1].time if arrivals else 0.0
    failures = failure_trace(config, topology, horizon)

    heap: List[tuple] = []
    seq = 0
    for a in arrivals:
        heapq.heappush(heap, (a.time, _ARRIVE, seq, a))
        seq += 1
    for f in failures:
        heapq.heappush(heap, (f.time, _FAIL, seq, f))
        seq += 1

    route_cache: dict = {}
    outcomes: List[RequestOutcome] = []
    reasons: Dict[str, int] = {}
    accepted = blocked = 0
    extra_total = 0
    protected_accepted = 0
    backup_cells_allocated = 0
    rec_attempts = rec_ok = rec_blocked = unrecoverable = 0
    rec_times: List[float] = []
    harmful_events = 0

    now = 0.0
    util_area = 0.0
    backup_area = 0.0
    shared_area = 0.0
    total_cells = state.total_cells()

    def advance(t: float) -> None:
        nonlocal now, util_area, backup_area, shared_area
        dt = t - now
        if dt > 0:
            util_area += state.occupied_cells() * dt
            backup_area += state.backup_cells() * dt
            shared_area += state.shared_backup_cells() * dt
            now = t

    while heap:
        t, kind, _, payload = heapq.heappop(heap)
        advance(t)
        if kind == _ARRIVE:
            request = Request(
                payload.rid, payload.source, payload.destination, payload.demand, config.mode
            )
            before = state.backup_cells()
            result = provision(state, request, k=config.k, route_cache=route_cache)
            if isinstance(result, Blocked):
                blocked += 1
                reasons[result.reason.kind] = reasons.get(result.reason.kind, 0) + 1
                outcomes.append(RequestOutcome(payload.rid, False, result.reason.kind, 0))
                continue
            accepted += 1
            new_cells = state.backup_cells() - before
            backup_cells_allocated += new_cells
            if result.backup_path is not None:
                protected_accepted += 1
                extra_total += sum(len(s) for s in result.extra.values())
            outcomes.append(RequestOutcome(payload.rid, True, None, new_cells))
            heapq.heappush(heap, (t + payload.hold, _DEPART, seq, payload.rid))
            seq += 1
        elif kind == _DEPART:
            if payload in state.connections:
                teardown(state, payload)
        elif kind == _FAIL:
            if payload.link in state.failed or payload.link not in state.topology.links:
                continue
            report = fail_link(state, payload.link)
            for outcome in report.outcomes.values():
                rec_attempts += 1
                if outcome == RECOVERED:
                    rec_ok += 1
                elif outcome == RECOVERY_BLOCKED:
                    rec_blocked += 1
                elif outcome == UNRECOVERABLE:
                    unrecoverable += 1
            rec_times.extend(
                report.recovery_time_ms[c]
                for c, o in report.outcomes.items()
                if o == RECOVERED
            )
            harmful_events += len(report.harmful)
            heapq.heappush(heap, (payload.repair_at, _REPAIR, seq, payload.link))
            seq += 1
        else:
            if payload in state.failed:
                repair_link(state, payload)

    duration = now
    total = len(arrivals)
    metrics = Metrics(
        requests=total,
        accepted=accepted,
        blocked=blocked,
        blocking_probability=blocked / total,
        block_reasons=reasons,
        utilization=(util_area / (total_cells * duration)) if duration > 0 else 0.0,
        sharing_ratio=(shared_area / backup_area) if backup_area > 0 else 0.0,
        mean_extra_backup_slots=(
            extra_total / protected_accepted if protected_accepted else None
        ),
        backup_cells_allocated=backup_cells_allocated,
        recovery_attempts=rec_attempts,
        recovery_success_rate=(rec_ok / rec_attempts) if rec_attempts else None,
        mean_recovery_time_ms=(sum(rec_times) / len(rec_times)) if rec_times else None,
        recovery_blocked=rec_blocked,
        unrecoverable=unrecoverable,
        harmful_events=harmful_events,
    )
    return metrics, tuple(outcomes)


# -- comparison ----------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    """Same traffic trace, one column per architecture/mode combination."""

    configs: Tuple[SimConfig, ...]
    metrics: Tuple[Metrics, ...]
    outcomes: Tuple[Tuple[RequestOutcome, ...], ...] = field(repr=False, default=())

    def column_names(self) -> List[str]:
        return [f"{c.arch}/{c.mode}" for c in self.configs]

    def to_json(self) -> dict:
        return {
            "columns": self.column_names(),
            "metrics": {
                name: [getattr(m, name) if name != "block_reasons" else dict(sorted(m.block_reasons.items())) for m in self.metrics]
                for name in METRIC_FIELDS
            },
        }


def compare(configs: Sequence[SimConfig]) -> Comparison:
    """Replay one traffic trace against every config; columns stay aligned.

    Configs must differ only in architecture and protection mode, so the
    trace (and therefore every admission opportunity) is byte-identical.
    """
    if not configs:
        raise IncomparableConfigs("need at least one config")
    key = configs[0].traffic_key()
    for cfg in configs[1:]:
        if cfg.traffic_key() != key:
            raise IncomparableConfigs(
                "configs must differ only in architecture/protection mode"
            )
    results = [run_detail(cfg) for cfg in configs]
    return Comparison(
        configs=tuple(configs),
        metrics=tuple(m for m, _ in results),
        outcomes=tuple(o for _, o in results),
    )


def common_accepted(comparison: Comparison) -> List[str]:
    """Request ids accepted in every column of a comparison."""
    if not comparison.outcomes:
        return []
    common = None
    for col in comparison.outcomes:
        ids = {o.rid for o in col if o.accepted}
        common = ids if common is None else (common & ids)
    order = [o.rid for o in comparison.outcomes[0]]
    return [rid for rid in order if rid in (common or set())]


def backup_cells_over(outcomes: Sequence[RequestOutcome], ids: Sequence[str]) -> int:
    """Distinct new backup cells consumed by the given accepted requests."""
    wanted = set(ids)
    return sum(o.new_backup_cells for o in outcomes if o.rid in wanted)


def arrival_rate_for_load(
    load: float,
    topology: Topology,
    holding_time: float = 1.0,
    demand_lo: int = 1,
    demand_hi: int = 8,
) -> float:
    """Arrival rate offering `load` of one bottleneck link's cells per unit time.

    load 1.0 means the mean demand arriving per holding time equals the
    smallest link capacity. A convention, not a physical claim: it gives
    comparable pressure across topologies.
    """
    if load <= 0:
        raise ConfigError("load must be positive")
    capacity = min(topology.links.values())
    mean_demand = (demand_lo + demand_hi) / 2.0
    return load * capacity / (mean_demand * holding_time)


# -- serialization --------------------------------------------------------------

CSV_CONFIG_FIELDS = (
    "topology",
    "arch",
    "mode",
    "arrival_rate",
    "holding_time",
    "demand_lo",
    "demand_hi",
    "requests",
    "seed",
    "failures",
    "failure_rate",
)

_REASON_COLUMNS = (
    "NoRoute",
    "NoSpectrum",
    "NoDisjointBackup",
    "ShareConflict",
    "FabricInfeasible",
)


def csv_header() -> str:
    reason_cols = [f"blocked_{r}" for r in _REASON_COLUMNS]
    metric_cols = [f for f in METRIC_FIELDS if f != "block_reasons"]
    return ",".join([*CSV_CONFIG_FIELDS, *metric_cols, *reason_cols])


def _csv_cell(value: object) -> str:
    if value is None:
        return ""
    text = str(value)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def csv_row(config: SimConfig, metrics: Metrics) -> str:
    cells = [getattr(config, f) for f in CSV_CONFIG_FIELDS]
    cells += [
        getattr(metrics, f) for f in METRIC_FIELDS if f != "block_reasons"
    ]
    cells += [metrics.block_reasons.get(r, 0) for r in _REASON_COLUMNS]
    return ",".join(_csv_cell(c) for c in cells)
