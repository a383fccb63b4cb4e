"""Forward kinematics of the gear chain fixture.

The gear joint's value is the driver angle; the follower turns by
-ratio times that angle about its own axis.  The rod slides along x.
"""
import math

import numpy as np

from mechpack import fixtures
from mechpack.mechanism import Configuration, check_slippable, forward_kinematics


def z_angle(rot):
    return math.degrees(math.atan2(rot[1, 0], rot[0, 0]))


def main():
    m = fixtures.gear_chain4()
    for j in m.joints:
        extra = f", ratio {j.ratio}" if j.ratio is not None else ""
        print(f"{j.id}: {j.kind.value} {j.part_a} -> {j.part_b}, limits {np.round(j.limits, 3)}{extra}")
    for deg, slide in ((0, 0.0), (40, -0.2), (80, -0.6)):
        cfg = Configuration({"j0": 0.0, "j1": math.radians(deg), "j2": slide})
        poses = forward_kinematics(m, cfg)
        gear2 = z_angle(poses["gear2"].matrix)
        rod = poses["rod"].apply([[0.75, 0.0, 0.1]])[0]
        print(f"gear angle {deg:>3} deg: follower turns {gear2:7.2f} deg, "
              f"rod end at {np.round(rod, 3)}, slippable {not check_slippable(m, cfg)}")


if __name__ == "__main__":
    main()
