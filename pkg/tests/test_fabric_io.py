"""JSON round-trips for fabric checks and configurations."""
from __future__ import annotations

import json

import pytest

from eonsurv.fabric import (
    ADD,
    CrossConnectDemand,
    FabricParams,
    SignalId,
    build_fabric,
    find_config,
)
from eonsurv.fabric.io import (
    check_spec_from_json,
    check_spec_to_json,
    config_from_json,
    config_to_json,
    demand_from_json,
    demand_to_json,
    params_from_json,
    params_to_json,
)
from eonsurv.spectrum import SlotSet, make_range


def rng(lo, hi):
    return SlotSet(make_range(lo, hi))


def test_params_roundtrip():
    p = FabricParams(in_links=3, out_links=2, transceivers=4, egress_filtering=True)
    assert params_from_json(params_to_json(p)) == p


def test_params_rejects_unknown_keys():
    with pytest.raises(ValueError):
        params_from_json({"in_links": 1, "out_links": 1, "wavelengths": 80})


def test_demand_roundtrip():
    d = CrossConnectDemand(SignalId("c7", "backup"), ADD, "out1", rng(4, 9))
    back = demand_from_json(demand_to_json(d))
    assert back == d


def test_check_spec_roundtrip():
    params = FabricParams(in_links=2, out_links=2)
    demands = [
        CrossConnectDemand(SignalId("c1", "backup"), "in0", "out0", rng(1, 10)),
        CrossConnectDemand(SignalId("c2", "backup"), "in0", "out1", rng(1, 3)),
    ]
    excl = [(demands[0].sid, demands[1].sid)]
    blob = json.dumps(check_spec_to_json("proposed-vos", params, demands, excl))
    arch, p2, d2, e2 = check_spec_from_json(json.loads(blob))
    assert arch == "proposed-vos"
    assert p2 == params
    assert d2 == demands
    assert list(e2[0]) == list(excl[0])


def test_config_roundtrip_is_exact():
    f = build_fabric("proposed-vos", in_links=1, out_links=2, transceivers=2, name="D")
    b1 = SignalId("c1", "backup")
    b2 = SignalId("c2", "backup")
    cfg = find_config(
        f,
        [
            CrossConnectDemand(b1, "in0", "out0", rng(1, 10)),
            CrossConnectDemand(b2, "in0", "out1", rng(1, 3)),
        ],
        exclusive=[(b1, b2)],
    )
    data = json.loads(json.dumps(config_to_json(cfg)))
    back = config_from_json(f, data)
    assert back == cfg
    # remove and re-serialize: references stay consistent
    back.remove_signal(b2)
    again = config_from_json(f, json.loads(json.dumps(config_to_json(back))))
    assert again == back


def test_config_rejects_wrong_fabric():
    f1 = build_fabric("proposed-vos", in_links=1, out_links=1, name="A")
    f2 = build_fabric("proposed-vos", in_links=1, out_links=1, name="B")
    data = config_to_json(find_config(f1, []))
    with pytest.raises(ValueError):
        config_from_json(f2, data)
