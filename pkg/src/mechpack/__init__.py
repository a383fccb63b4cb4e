"""Disassemble articulated mechanisms into part groups and pack them into a box."""
from .disassembly import (
    Group,
    HierarchyNode,
    OptimizerSettings,
    SearchCriteria,
    bfs_disassemble,
    expand_node,
    joint_cost,
    minimize_group_obb,
)
from .mechanism import (
    Configuration,
    Joint,
    JointKind,
    Mechanism,
    Part,
    check_slippable,
    forward_kinematics,
    load_mechanism,
    split_by_joints,
    validate_mechanism,
)
from .packing import BoxSpec, PackingLayout, find_holes, pack_all, place_group, sort_groups, utilization

__version__ = "0.1.0"

__all__ = [
    "BoxSpec", "Configuration", "Group", "HierarchyNode", "Joint", "JointKind", "Mechanism", "OptimizerSettings",
    "PackingLayout", "Part", "SearchCriteria", "bfs_disassemble", "check_slippable", "expand_node", "find_holes",
    "forward_kinematics", "joint_cost", "load_mechanism", "minimize_group_obb", "pack_all", "place_group",
    "sort_groups", "split_by_joints", "utilization", "validate_mechanism",
]
