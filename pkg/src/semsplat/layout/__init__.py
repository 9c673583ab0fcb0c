from semsplat.layout.program import LayoutProgram, execute_program
from semsplat.layout.regions import RegionTree, decompose
from semsplat.layout.planfile import LayoutPlan, PlannedObject, load_plan, save_plan
from semsplat.layout.planner import CannedPlannerClient, RemotePlannerClient
from semsplat.layout.validate import (
    LayoutReport,
    OrientedBox,
    obb_gap_distance,
    obb_overlap_volume,
    validate_layout,
)

__all__ = [
    "CannedPlannerClient",
    "LayoutPlan",
    "LayoutProgram",
    "LayoutReport",
    "OrientedBox",
    "PlannedObject",
    "RegionTree",
    "RemotePlannerClient",
    "decompose",
    "execute_program",
    "load_plan",
    "obb_gap_distance",
    "obb_overlap_volume",
    "save_plan",
    "validate_layout",
]
