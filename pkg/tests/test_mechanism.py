import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mechpack import fixtures
from mechpack.errors import InvalidMechanism, LoopClosureViolation, UnknownJoint
from mechpack.geometry.mesh import box_mesh
from mechpack.mechanism import (
    Configuration,
    Joint,
    JointKind,
    Mechanism,
    Part,
    check_slippable,
    forward_kinematics,
    load_mechanism,
    mechanism_from_dict,
    save_mechanism,
    split_by_joints,
    validate_mechanism,
)
from builders import angle_about, gear_pair, random_chain
from oracles import homogeneous, joint_matrix, quat_matrix, rodrigues


def rules(violations):
    return [v.rule for v in violations]


def chain3(kinds=(JointKind.REVOLUTE, JointKind.REVOLUTE)):
    parts = [Part(n, box_mesh(origin=(k * 1.0, 0, 0))) for k, n in enumerate("ABC")]
    joints = [Joint("j1", kinds[0], "A", "B", (1, 0, 0), (0, 0, 1), (-1, 1)),
              Joint("j2", kinds[1], "B", "C", (2, 0, 0), (0, 0, 1), (-1, 1))]
    return Mechanism(parts, joints, "A")


# ------------------------------------------------------------ validation


def test_single_part_is_valid():
    assert validate_mechanism(fixtures.single_cube()) == []


def test_two_parts_without_joints_are_disconnected():
    m = Mechanism([Part("a", box_mesh()), Part("b", box_mesh(origin=(2, 0, 0)))], [], "a")
    assert rules(validate_mechanism(m)) == ["disconnected graph"]


def test_non_unit_axis_reported_once():
    m = Mechanism([Part("a", box_mesh()), Part("b", box_mesh(origin=(1, 0, 0)))],
                  [Joint("j", JointKind.REVOLUTE, "a", "b", (1, 0, 0), (0, 0, 0.5), (0, 1))], "a")
    assert rules(validate_mechanism(m)) == ["non-unit axis"]


def test_other_joint_rules():
    a, b = Part("a", box_mesh()), Part("b", box_mesh(origin=(1, 0, 0)))
    cases = [
        (Joint("j", JointKind.REVOLUTE, "a", "a", (0, 0, 0), (0, 0, 1), (0, 1)), "self joint"),
        (Joint("j", JointKind.REVOLUTE, "a", "b", (0, 0, 0), (0, 0, 1), (1, 0)), "bad limits"),
        (Joint("j", JointKind.REVOLUTE, "a", "b", (0, 0, 0), (0, 0, 1)), "missing limits"),
        (Joint("j", JointKind.FIXED, "a", "b", limits=(0, 1)), "fixed joint parameter"),
        (Joint("j", JointKind.GEAR, "a", "b", (0, 0, 0), (0, 0, 1), (0, 1), ratio=0.0, axis_b=(0, 0, 1)),
         "zero gear ratio"),
        (Joint("j", JointKind.REVOLUTE, "a", "b", (0, 0, 0), (0, 0, 1), (0.5, 1)), "rest outside limits"),
    ]
    for joint, rule in cases:
        assert rule in rules(validate_mechanism(Mechanism([a, b], [joint], "a"))), rule
    m = Mechanism([a, b], [Joint("j", JointKind.FIXED, "a", "zz")], "q")
    got = rules(validate_mechanism(m))
    assert "unknown joint endpoint" in got and "unknown driving part" in got


def test_fixtures_are_valid():
    for name, build in fixtures.ALL.items():
        assert validate_mechanism(build()) == [], name


# ------------------------------------------------------------ kinematics


def test_zero_configuration_is_rest_pose_exactly():
    m = fixtures.gear_chain4()
    poses = forward_kinematics(m, Configuration.zero(m))
    for p in m.parts:
        assert np.array_equal(poses[p.id].rotation, p.rest_pose.rotation)
        assert np.array_equal(poses[p.id].translation, p.rest_pose.translation)


def test_quarter_turn_revolute_maps_x_to_y():
    m = Mechanism([Part("a", box_mesh()), Part("b", box_mesh((1, 0.2, 0.2)))],
                  [Joint("j", JointKind.REVOLUTE, "a", "b", (0, 0, 0), (0, 0, 1), (-math.pi, math.pi))], "a")
    pose = forward_kinematics(m, Configuration({"j": math.pi / 2}))["b"]
    assert np.allclose(pose.apply([1, 0, 0]), [0, 1, 0], atol=1e-12)
    # far corner (1, 0.2, 0.2) goes to (-0.2, 1, 0.2) by hand
    assert np.allclose(pose.apply([1, 0.2, 0.2]), [-0.2, 1, 0.2], atol=1e-12)
    assert np.array_equal(forward_kinematics(m, Configuration({"j": math.pi / 2}))["a"].rotation, [1, 0, 0, 0])


def test_gear_ratio_two():
    pose = forward_kinematics(gear_pair(2.0), Configuration({"g": 0.3}))["fol"]
    assert angle_about(pose.matrix, (0, 0, 1)) == pytest.approx(-0.6, abs=1e-12)
    # the follower turns about its own axis through the anchor
    assert np.allclose(pose.apply([3.5, 0.5, 0]), [3.5, 0.5, 0], atol=1e-12)


def test_gear_angle_twenty_pairs():
    r = np.random.default_rng(3)
    for ratio, theta in zip(r.uniform(0.2, 4.0, 20), r.uniform(-1.5, 1.5, 20)):
        pose = forward_kinematics(gear_pair(ratio), Configuration({"g": theta}))["fol"]
        got = angle_about(pose.matrix, (0, 0, 1))
        assert math.remainder(got + ratio * theta, 2 * math.pi) == pytest.approx(0.0, abs=1e-12)


@given(st.integers(0, 100_000), st.integers(1, 5))
def test_fk_matches_matrix_oracle(seed, n):
    m, specs, values = random_chain(seed, n)
    poses = forward_kinematics(m, Configuration(values))
    acc = np.eye(4)
    for k, part in enumerate(m.parts):
        if k > 0:
            s = specs[k - 1]
            M = joint_matrix(s["kind"], values.get(f"j{k}", 0.0), s["anchor"], s["axis"], s.get("ratio"), s.get("axis_b"))
            acc = acc @ (np.linalg.inv(M) if s["flip"] else M)
        rest = homogeneous(quat_matrix(part.rest_pose.rotation), part.rest_pose.translation)
        assert np.allclose(poses[part.id].as_homogeneous(), acc @ rest, rtol=0, atol=1e-9)


def test_rodrigues_oracle_sanity():
    assert np.allclose(rodrigues((0, 0, 1), math.pi / 2) @ [1, 0, 0], [0, 1, 0])


def _triangle_loop():
    parts = [Part("A", box_mesh()), Part("B", box_mesh(origin=(1, 0, 0))), Part("C", box_mesh(origin=(0, 1, 0)))]
    joints = [
        Joint("jAB", JointKind.REVOLUTE, "A", "B", (1, 0, 0), (0, 0, 1), (-1, 1)),
        Joint("jAC", JointKind.FIXED, "A", "C", (0, 1, 0)),
        Joint("jBC", JointKind.FIXED, "B", "C", (1, 1, 0)),
    ]
    return Mechanism(parts, joints, "A")


def test_loop_closure_checked():
    m = _triangle_loop()
    forward_kinematics(m, Configuration({"jAB": 0.0}))
    with pytest.raises(LoopClosureViolation):
        forward_kinematics(m, Configuration({"jAB": 0.3}))


# ---------------------------------------------------------- slippability


def test_single_part_is_slippable():
    m = fixtures.single_cube()
    assert check_slippable(m, Configuration.zero(m), 1e-6) == []


def test_folded_bars_overlap_at_zero():
    m = fixtures.two_bar_folded()
    assert check_slippable(m, Configuration({"hinge": 0.0}), 1e-6) == [("a", "b")]


def test_folded_bars_clear_at_quarter_turn():
    m = fixtures.two_bar_folded()
    assert check_slippable(m, Configuration({"hinge": math.pi / 2}), 1e-6) == []


def test_hinged_bars_touching_at_rest():
    m = fixtures.two_bar_hinge()
    assert check_slippable(m, Configuration({"hinge": 0.0})) == []


@given(st.floats(0, math.pi), st.floats(1e-9, 0.05), st.floats(0, 1))
def test_slippability_monotone_in_eps(theta, eps1, frac):
    m = fixtures.two_bar_folded()
    c = Configuration({"hinge": theta})
    if check_slippable(m, c, eps1):
        assert check_slippable(m, c, eps1 * frac)


# --------------------------------------------------------------- splitting


def test_split_no_cut():
    m = chain3()
    (g,) = split_by_joints(m, set())
    assert g.part_ids == ("A", "B", "C") and g.joint_ids == ("j1", "j2")


def test_split_one_cut():
    got = split_by_joints(chain3(), {"j1"})
    assert [g.part_ids for g in got] == [("A",), ("B", "C")]
    assert [g.joint_ids for g in got] == [(), ("j2",)]


def test_split_all_cut():
    assert [g.part_ids for g in split_by_joints(chain3(), {"j1", "j2"})] == [("A",), ("B",), ("C",)]


def test_split_unknown_joint():
    with pytest.raises(UnknownJoint):
        split_by_joints(chain3(), {"nope"})


@given(st.integers(0, 10_000), st.integers(1, 5), st.data())
def test_split_partition_and_monotone(seed, n, data):
    m, _, _ = random_chain(seed, n)
    cut = data.draw(st.sets(st.sampled_from(m.joint_ids)))
    more = cut | data.draw(st.sets(st.sampled_from(m.joint_ids)))
    groups = split_by_joints(m, cut)
    ids = [p for g in groups for p in g.part_ids]
    assert sorted(ids) == sorted(m.part_ids) and len(ids) == len(set(ids))
    assert len(split_by_joints(m, more)) >= len(groups)
    for g in groups:
        assert not set(g.joint_ids) & cut


# -------------------------------------------------------------- documents


def test_document_round_trip(tmp_path):
    m = fixtures.gear_chain4()
    save_mechanism(m, tmp_path / "mech.json")
    back = load_mechanism(tmp_path / "mech.json")
    assert back.part_ids == m.part_ids and back.joint_ids == m.joint_ids
    c = Configuration({"j0": 0.2, "j1": -0.4, "j2": -0.3})
    for pid, pose in forward_kinematics(m, c).items():
        assert forward_kinematics(back, c)[pid].allclose(pose, 1e-9)


def _doc(tmp_path, **overrides):
    save_mechanism(fixtures.two_bar_hinge(), tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    for k, v in overrides.items():
        doc[k] = v
    return doc


def test_unknown_field_rejected(tmp_path):
    doc = _doc(tmp_path, extra=1)
    doc["joints"][0]["colour"] = "red"
    with pytest.raises(InvalidMechanism) as err:
        mechanism_from_dict(doc, tmp_path)
    assert rules(err.value.violations).count("unknown field") == 2


def test_quaternion_normalised_or_rejected(tmp_path):
    doc = _doc(tmp_path)
    doc["parts"][1]["rest_pose"]["quaternion"] = [1.0005, 0, 0, 0]
    m = mechanism_from_dict(doc, tmp_path)
    assert np.array_equal(m.part("b").rest_pose.rotation, [1, 0, 0, 0])
    doc["parts"][1]["rest_pose"]["quaternion"] = [1.01, 0, 0, 0]
    with pytest.raises(InvalidMechanism) as err:
        mechanism_from_dict(doc, tmp_path)
    assert rules(err.value.violations) == ["non-unit quaternion"]


def test_malformed_json_rejected(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(InvalidMechanism):
        load_mechanism(tmp_path / "bad.json")
