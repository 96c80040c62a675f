"""JSON forms for fabric checks: demand files in, configurations out."""
from __future__ import annotations

import dataclasses
import json
from typing import Dict, List, Optional, Sequence, Tuple

from ..spectrum import SlotSet
from .builders import FabricParams
from .components import FabricConfig, NodeFabric, SignalId
from .search import CrossConnectDemand


def params_to_json(params: FabricParams) -> dict:
    return dataclasses.asdict(params)


def params_from_json(data: dict) -> FabricParams:
    fields = {f.name for f in dataclasses.fields(FabricParams)}
    unknown = set(data) - fields
    if unknown:
        raise ValueError(f"unknown fabric parameters: {', '.join(sorted(unknown))}")
    return FabricParams(**data)


def demand_to_json(demand: CrossConnectDemand) -> dict:
    return {
        "signal": str(demand.sid),
        "source": demand.source,
        "dest": demand.dest,
        "slots": str(demand.slots),
    }


def demand_from_json(data: dict) -> CrossConnectDemand:
    return CrossConnectDemand(
        sid=SignalId.parse(data["signal"]),
        source=data["source"],
        dest=data["dest"],
        slots=SlotSet.parse(data["slots"]),
    )


def check_spec_to_json(
    arch: str,
    params: FabricParams,
    demands: Sequence[CrossConnectDemand],
    exclusive: Sequence[Sequence[SignalId]] = (),
) -> dict:
    return {
        "arch": arch,
        "params": params_to_json(params),
        "demands": [demand_to_json(d) for d in demands],
        "exclusive": [[str(s) for s in pair] for pair in exclusive],
    }


def check_spec_from_json(
    data: dict,
) -> Tuple[str, FabricParams, List[CrossConnectDemand], List[Tuple[SignalId, ...]]]:
    arch = data["arch"]
    params = params_from_json(data.get("params", {}))
    demands = [demand_from_json(d) for d in data.get("demands", [])]
    exclusive = [
        tuple(SignalId.parse(s) for s in pair) for pair in data.get("exclusive", [])
    ]
    return arch, params, demands, exclusive


def load_check_spec(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return check_spec_from_json(json.load(fh))


def _refs_out(refs: Dict[int, set]) -> Dict[str, List[str]]:
    return {str(k): sorted(str(s) for s in v) for k, v in sorted(refs.items())}


def _refs_in(data: Dict[str, list]) -> Dict[int, set]:
    return {int(k): {SignalId.parse(s) for s in v} for k, v in data.items()}


def config_to_json(config: FabricConfig) -> dict:
    """Full serialization, including which signal holds each entry."""
    return {
        "fabric": config.fabric.name,
        "arch": config.fabric.arch,
        "wss": {
            c: {str(s): p for s, p in sorted(m.items())} for c, m in sorted(config.wss.items())
        },
        "wss_refs": {c: _refs_out(m) for c, m in sorted(config.wss_refs.items())},
        "xbar": {
            c: {str(i): o for i, o in sorted(m.items())} for c, m in sorted(config.xbar.items())
        },
        "xbar_refs": {c: _refs_out(m) for c, m in sorted(config.xbar_refs.items())},
        "vos_refs": {c: _refs_out(m) for c, m in sorted(config.vos_refs.items())},
        "vos_states": {
            c: list(config.vos_state(c))
            for c in sorted(config.vos_refs)
            if config.vos_state(c) is not None
        },
        "bvt": dict(sorted(config.bvt.items())),
        "bvt_refs": {c: sorted(str(s) for s in v) for c, v in sorted(config.bvt_refs.items())},
        "bvr_refs": {c: sorted(str(s) for s in v) for c, v in sorted(config.bvr_refs.items())},
        "comb_refs": {c: _refs_out(m) for c, m in sorted(config.comb_refs.items())},
    }


def config_from_json(fabric: NodeFabric, data: dict) -> FabricConfig:
    if data.get("fabric") != fabric.name:
        raise ValueError(f"config is for {data.get('fabric')!r}, not {fabric.name!r}")
    config = FabricConfig(fabric)
    config.wss = {c: {int(s): p for s, p in m.items()} for c, m in data.get("wss", {}).items()}
    config.wss_refs = {c: _refs_in(m) for c, m in data.get("wss_refs", {}).items()}
    config.xbar = {c: {int(i): o for i, o in m.items()} for c, m in data.get("xbar", {}).items()}
    config.xbar_refs = {c: _refs_in(m) for c, m in data.get("xbar_refs", {}).items()}
    config.vos_refs = {c: _refs_in(m) for c, m in data.get("vos_refs", {}).items()}
    config.bvt = {c: int(p) for c, p in data.get("bvt", {}).items()}
    config.bvt_refs = {
        c: {SignalId.parse(s) for s in v} for c, v in data.get("bvt_refs", {}).items()
    }
    config.bvr_refs = {
        c: {SignalId.parse(s) for s in v} for c, v in data.get("bvr_refs", {}).items()
    }
    config.comb_refs = {c: _refs_in(m) for c, m in data.get("comb_refs", {}).items()}
    return config


def save_config(config: FabricConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_json(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
