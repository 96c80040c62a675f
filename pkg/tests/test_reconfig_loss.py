"""Switching-time deltas and insertion-loss budgets."""
from __future__ import annotations

import math

import pytest

from eonsurv.fabric import (
    CrossConnectDemand,
    DisconnectedRoute,
    FabricMismatch,
    Port,
    SignalId,
    build_fabric,
    find_config,
    loss_budget,
    reconfig_delta,
)
from eonsurv.spectrum import SlotSet, make_range


def rng(lo, hi):
    return SlotSet(make_range(lo, hi))


B1 = SignalId("c1", "backup")
B2 = SignalId("c2", "backup")


def shared_vos_config():
    f = build_fabric("proposed-vos", in_links=1, out_links=2, transceivers=2, name="D")
    demands = [
        CrossConnectDemand(B1, "in0", "out0", rng(1, 10)),
        CrossConnectDemand(B2, "in0", "out1", rng(1, 3)),
    ]
    return f, find_config(f, demands, exclusive=[(B1, B2)])


def test_no_change_is_zero():
    f, cfg = shared_vos_config()
    d = reconfig_delta(cfg, cfg.clone())
    assert d.changed_components == 0
    assert d.time_ms == 0.0


def test_vos_flip_is_fast():
    f, cfg = shared_vos_config()
    # flip one variable splitter from directing to copying: sub-ms change
    flipped = cfg.clone()
    target = next(c for c in cfg.vos_refs if cfg.vos_state(c) == (100, 0))
    flipped.vos_refs[target].setdefault(1, set()).add(SignalId("x", "backup"))
    assert flipped.vos_state(target) == (50, 50)
    d = reconfig_delta(cfg, flipped)
    assert d.changed_components == 1
    assert d.time_ms == pytest.approx(0.25)
    assert d.changed == (target,)


def test_wss_map_change_costs_300ms():
    f, cfg = shared_vos_config()
    changed = cfg.clone()
    m = changed.wss.setdefault("ewss1", {})
    refs = changed.wss_refs.setdefault("ewss1", {})
    m[20] = 0
    refs[20] = {SignalId("x", "backup")}
    d = reconfig_delta(cfg, changed)
    assert d.changed_components == 1
    assert d.time_ms == pytest.approx(300.0)


def test_crossbar_change_costs_10ms():
    f = build_fabric("gridless-mg-extra", in_links=1, out_links=2, transceivers=1, name="D")
    a = find_config(f, [CrossConnectDemand(B1, "in0", "out0", rng(1, 4))])
    b = a.clone()
    m = b.xbar.setdefault("xbar", {})
    free_in = max(m) + 1 if m else 0
    free_out = max(m.values()) + 1 if m else 0
    m[free_in] = free_out
    b.xbar_refs.setdefault("xbar", {})[free_in] = {SignalId("x", "primary")}
    d = reconfig_delta(a, b)
    assert d.changed_components == 1
    assert d.time_ms == pytest.approx(10.0)


def test_delta_requires_same_fabric():
    f1 = build_fabric("proposed-vos", in_links=1, out_links=1, name="A")
    f2 = build_fabric("proposed-vos", in_links=1, out_links=1, name="B")
    with pytest.raises(FabricMismatch):
        reconfig_delta(find_config(f1, []), find_config(f2, []))


def test_direct_and_split_losses():
    f, cfg = shared_vos_config()
    # sharing stage: root directs (0.6 dB), inner splitter copies (4.0 dB)
    route_b1 = ["iwss0", "i0l0v0", "i0l0v1", "comb0_0", "ewss0"]
    assert loss_budget(f, cfg, route_b1) == pytest.approx(0.6 + 4.0)
    solo = build_fabric("proposed-vos", in_links=1, out_links=2, transceivers=2, name="S")
    cfg_solo = find_config(solo, [CrossConnectDemand(B1, "in0", "out0", rng(1, 10))])
    lit = [c for c in cfg_solo.vos_refs if cfg_solo.vos_state(c) is not None]
    route = ["iwss0"] + sorted(lit) + ["comb0_0", "ewss0"]
    assert loss_budget(solo, cfg_solo, route) == pytest.approx(0.6 * len(lit))


def test_fixed_splitter_loss_follows_fanout():
    f = build_fabric("gridless-mg-extra", in_links=1, out_links=2, transceivers=2, name="D")
    cfg = find_config(f, [CrossConnectDemand(B1, "in0", "out0", rng(1, 10))])
    got = loss_budget(f, cfg, ["iwss0", "split0", "xbar", "comb0"])
    assert got == pytest.approx(10 * math.log10(4))


def test_dark_vos_route_rejected():
    f, cfg = shared_vos_config()
    # the drop-side branch of the root is unlit: routing through it fails
    root = "i0l0v0"
    assert cfg.vos_state(root) == (100, 0)
    dark_target = f.edges[Port(root, "out", 1)].comp
    with pytest.raises(DisconnectedRoute):
        loss_budget(f, cfg, ["iwss0", root, dark_target])


def test_unconfigured_vos_is_disconnected():
    f = build_fabric("proposed-vos", in_links=1, out_links=1, transceivers=2, name="A")
    cfg = find_config(f, [])
    with pytest.raises(DisconnectedRoute):
        loss_budget(f, cfg, ["iwss0", "i0l0v0"])
