import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from mechpack.disassembly import GroupOptimizer  # noqa: E402
from mechpack.geometry.mesh import box_mesh  # noqa: E402
from mechpack.geometry.transform import RigidTransform  # noqa: E402
from mechpack.mechanism import Joint, JointKind, Mechanism, Part, split_by_joints  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


def make_group(meshes, poses=None, name="g"):
    """Rigid group of the given part meshes (Fixed joints in a chain)."""
    parts = []
    for k, m in enumerate(meshes):
        pose = RigidTransform.identity() if poses is None else poses[k]
        parts.append(Part(f"{name}{k}", m, pose))
    joints = [Joint(f"{name}f{k}", JointKind.FIXED, parts[k - 1].id, parts[k].id) for k in range(1, len(parts))]
    m = Mechanism(parts, joints, parts[0].id)
    return GroupOptimizer(m).optimize(split_by_joints(m, ())[0])


def box_group(size, name="g", origin=(0.0, 0.0, 0.0)):
    return make_group([box_mesh(size, origin)], name=name)


def l_tromino(name="L"):
    """Three unit cubes in an L: (0,0,0), (1,0,0), (0,1,0)."""
    return make_group([box_mesh(origin=o) for o in ((0, 0, 0), (1, 0, 0), (0, 1, 0))], name=name)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------- acceptance report

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        prev = _ACCEPTANCE.get(num, (title, True, 0.0))
        _ACCEPTANCE[num] = (title, prev[1] and rep.passed, prev[2] + rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, ok, dur = _ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}  ({dur:.1f} s)")
