"""End to end: disassemble and pack the zig-zag chain, then compare with packing it whole.

Runs the same code path as ``mechpack pack`` and writes the artifacts to
a temporary directory.
"""
import json
import os
import tempfile

from mechpack import fixtures
from mechpack.cli import main
from mechpack.mechanism import save_mechanism


def main_demo():
    with tempfile.TemporaryDirectory() as tmp:
        mech = os.path.join(tmp, "zigzag3.json")
        save_mechanism(fixtures.zigzag3(), mech)
        out = os.path.join(tmp, "out")
        code = main(["pack", mech, "--box", "1x1", "--max-groups", "3", "--out", out])
        print(f"exit code {code}; artifacts: {sorted(os.listdir(out))}")
        with open(os.path.join(out, "metrics.json")) as fh:
            metrics = json.load(fh)
        print(f"disassembled: cut {metrics['cut_set']}, h {metrics['h']}, utilization {metrics['utilization']:.3f}")
        print(f"whole at rest: h {metrics['baseline_rest_pose_h']}, "
              f"utilization {metrics['baseline_rest_pose_utilization']:.3f}")


if __name__ == "__main__":
    main_demo()
