"""Construction and validation of the five node architectures."""
from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eonsurv.fabric import (
    ARCHITECTURES,
    BROADCAST_SELECT,
    GRIDLESS_MG,
    GRIDLESS_MG_EXTRA,
    PROPOSED_TRADITIONAL,
    PROPOSED_VOS,
    BVReceiver,
    BVTransmitter,
    Combiner,
    Crossbar,
    FabricParams,
    FixedSplitter,
    FlexWSS,
    InvalidParams,
    NodeFabric,
    Port,
    UnknownArchitecture,
    VOS,
    build_fabric,
)

ALL_ARCHS = sorted(ARCHITECTURES)


def test_unknown_architecture():
    with pytest.raises(UnknownArchitecture):
        build_fabric("ring-modulator", in_links=1, out_links=1)


def test_bad_params():
    with pytest.raises(InvalidParams):
        FabricParams(in_links=0, out_links=1)
    with pytest.raises(InvalidParams):
        FabricParams(in_links=1, out_links=1, transceivers=-1)
    with pytest.raises(InvalidParams):
        FabricParams(in_links=1, out_links=1, vos_layers=0)


@pytest.mark.parametrize("arch", ALL_ARCHS)
def test_boundary_labels(arch):
    f = build_fabric(arch, in_links=3, out_links=2, transceivers=2)
    assert sorted(f.ingress_ports) == ["in0", "in1", "in2"]
    assert sorted(f.egress_ports) == ["out0", "out1"]
    assert sorted(f.add_ports) == ["add0", "add1"]
    assert sorted(f.drop_ports) == ["drop0", "drop1"]
    # boundary ports are unwired fabric edges
    for p in f.ingress_ports.values():
        assert p.side == "in" and p not in f.rev_edges
    for p in f.egress_ports.values():
        assert p.side == "out" and p not in f.edges


def test_combining_capability_flags():
    caps = {a: build_fabric(a, in_links=2, out_links=2).capabilities for a in ALL_ARCHS}
    assert not caps[BROADCAST_SELECT].supports_combining
    for a in ALL_ARCHS:
        if a != BROADCAST_SELECT:
            assert caps[a].supports_combining
    assert caps[PROPOSED_VOS].supports_bursts
    assert not caps[PROPOSED_TRADITIONAL].supports_bursts


def test_gridless_splitter_pool():
    # plain gridless: one splitter; extra-split variant: one per ingress
    plain = build_fabric(GRIDLESS_MG, in_links=3, out_links=2, transceivers=1)
    extra = build_fabric(GRIDLESS_MG_EXTRA, in_links=3, out_links=2, transceivers=1)
    n_split = lambda f: sum(isinstance(k, FixedSplitter) for k in f.components.values())
    assert n_split(plain) == 1
    assert n_split(extra) == 3


def test_egress_filtering_adds_wss():
    bare = build_fabric(GRIDLESS_MG_EXTRA, in_links=2, out_links=2, transceivers=1)
    patched = build_fabric(
        GRIDLESS_MG_EXTRA, in_links=2, out_links=2, transceivers=1, egress_filtering=True
    )
    assert all(isinstance(bare.kind(p.comp), Combiner) for p in bare.egress_ports.values())
    assert all(isinstance(patched.kind(p.comp), FlexWSS) for p in patched.egress_ports.values())


def test_traditional_has_combiner_bank():
    f = build_fabric(PROPOSED_TRADITIONAL, in_links=2, out_links=2, combiners_per_egress=2)
    combs = [c for c, k in f.components.items() if isinstance(k, Combiner)]
    assert len(combs) == 4  # two per egress
    # every egress is a slot-selective WSS fed by the bank
    for p in f.egress_ports.values():
        assert isinstance(f.kind(p.comp), FlexWSS)


def test_vos_trees_cover_targets():
    f = build_fabric(PROPOSED_VOS, in_links=2, out_links=2, transceivers=2, vos_layers=2)
    n_vos = sum(isinstance(k, VOS) for k in f.components.values())
    # each (ingress, layer) tree spans out_links + transceivers targets
    assert n_vos == 2 * 2 * (2 + 2 - 1)
    assert not any(isinstance(k, Crossbar) for k in f.components.values())


def test_vos_layer_count_on_ingress_wss():
    f = build_fabric(PROPOSED_VOS, in_links=1, out_links=1, vos_layers=3)
    kind = f.kind(f.ingress_ports["in0"].comp)
    assert isinstance(kind, FlexWSS) and kind.mode == "demux"
    assert kind.branch_ports == 3


def test_cycle_rejected():
    a = Port("w0", "out", 0)
    with pytest.raises(InvalidParams):
        NodeFabric(
            "bad",
            "test",
            {"w0": FlexWSS("demux", 1), "w1": FlexWSS("mux", 1)},
            {a: Port("w1", "in", 0), Port("w1", "out", 0): Port("w0", "in", 0)},
            {},
            {},
            {},
            {},
            build_fabric(GRIDLESS_MG, in_links=1, out_links=1).capabilities,
        )


@settings(max_examples=40, deadline=None)
@given(
    arch=st.sampled_from(ALL_ARCHS),
    in_links=st.integers(1, 4),
    out_links=st.integers(1, 4),
    transceivers=st.integers(1, 3),
)
def test_random_degrees_build_clean(arch, in_links, out_links, transceivers):
    f = build_fabric(arch, in_links=in_links, out_links=out_links, transceivers=transceivers)
    # the validated graph is acyclic and fully ordered
    assert len(f.topo) == len(f.components)
    assert len(f.ingress_ports) == in_links
    assert len(f.egress_ports) == out_links
    assert len(f.transmitters()) == transceivers
    assert len(f.receivers()) == transceivers
    # no two edges share a source output port by construction; assert targets too
    targets = list(f.edges.values())
    assert len(targets) == len(set(targets))
