"""Component-level optical switch fabric models.

A NodeFabric is a directed acyclic graph of optical components (flexgrid
WSSs, splitters, variable optical splitters, combiners, a crossbar and
transceivers) wired per architecture. A FabricConfig holds the mutable
component settings; propagation and configuration search are deliberately
separate implementations so one can serve as an oracle for the other.
"""
from .components import (
    ADD,
    DROP,
    BVReceiver,
    BVTransmitter,
    Capabilities,
    Combiner,
    Crossbar,
    DanglingPort,
    DisconnectedRoute,
    FabricConfig,
    FabricMismatch,
    FixedSplitter,
    FlexWSS,
    InvalidParams,
    NodeFabric,
    Port,
    ReconfigDelta,
    Signal,
    SignalId,
    UnknownArchitecture,
    VOS,
    loss_budget,
    reconfig_delta,
)
from .builders import (
    ARCHITECTURES,
    BROADCAST_SELECT,
    GRIDLESS_MG,
    GRIDLESS_MG_EXTRA,
    PROPOSED_TRADITIONAL,
    PROPOSED_VOS,
    FabricParams,
    build_fabric,
)
from .propagate import (
    HarmfulInterference,
    Instance,
    InterferenceEvent,
    SignalTrace,
    interference_events,
    propagate,
)
from .search import (
    NO_COMBINING,
    NO_FREE_COMBINER,
    NO_FREE_SPLITTER_OUTPUT,
    NO_PATH,
    SLOT_CONFLICT_AT_WSS,
    CrossConnectDemand,
    Infeasible,
    egress_delivery,
    find_config,
)
from . import io  # noqa: F401

__all__ = [name for name in dir() if not name.startswith("_")]
