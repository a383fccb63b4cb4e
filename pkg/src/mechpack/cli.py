"""Command-line entry point: ``mechpack pack|disassemble|obb``.

Exit codes: 0 success, 2 invalid input (bad mechanism, mesh or config),
3 a part or group does not fit the box base, 4 no admissible
configuration, 1 anything unexpected.
"""
from __future__ import annotations

import argparse
from dataclasses import asdict, dataclass, fields, replace
import json
import math
import os
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .disassembly import (
    GroupOptimizer,
    OptimizerSettings,
    SearchCriteria,
    bfs_search,
    dump_hierarchy,
    rest_group,
)
from .errors import DoesNotFit, InvalidMechanism, MechpackError, NoAdmissibleConfiguration
from .geometry.mesh import format_obj, load_obj
from .geometry.obb import min_obb
from .mechanism import load_mechanism
from .packing import BoxSpec, box_wireframe_obj, pack_all, scene_meshes, utilization

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_DOES_NOT_FIT, EXIT_NO_CONFIG = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    mechanism_path: str
    box: tuple = None  # (W, D)
    max_groups: int = 3
    target_efficiency: float = 1.0
    beam_width: int = 4
    cell_size: float | None = None
    angular_step_deg: float = 6.0
    param_steps: int = 32
    out: str = "out"
    dump_hierarchy: bool = False
    threads: int = 0  # 0: machine parallelism

    def validate(self):
        if self.box is None:
            raise ConfigError("box base is required (--box WxD)")
        if len(self.box) != 2 or min(self.box) <= 0:
            raise ConfigError("box base dimensions must be positive")
        for name in ("max_groups", "beam_width", "param_steps", "angular_step_deg"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.cell_size is not None and self.cell_size <= 0:
            raise ConfigError("cell_size must be positive")
        if self.threads < 0:
            raise ConfigError("threads must be positive")
        if not 0.0 < self.target_efficiency <= 1.0:
            raise ConfigError("target_efficiency must lie in (0, 1]")
        if not 0.0 < math.radians(self.angular_step_deg) <= math.pi / 4:
            raise ConfigError("angular step must lie in (0, 45] degrees")
        return self

    @property
    def resolved_threads(self):
        return self.threads or os.cpu_count() or 1

    def criteria(self):
        opt = OptimizerSettings(angular_step=math.radians(self.angular_step_deg), param_steps=self.param_steps)
        return SearchCriteria(self.max_groups, self.target_efficiency, self.beam_width, opt)

    def final_box(self):
        return BoxSpec(self.box[0], self.box[1], self.cell_size)

    def to_dict(self):
        d = asdict(self)
        d["box"] = list(self.box)
        del d["threads"]  # must not change artifacts
        return d


def parse_box(text):
    parts = str(text).split("x")
    if len(parts) != 2:
        raise ConfigError(f"box must be WxD, got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise ConfigError(f"box must be WxD with decimal numbers, got {text!r}") from None


_FILE_KEYS = {
    "box": "box", "max_groups": "max_groups", "target_util": "target_efficiency",
    "target_efficiency": "target_efficiency", "beam": "beam_width", "beam_width": "beam_width",
    "cell": "cell_size", "cell_size": "cell_size", "angular_step": "angular_step_deg",
    "param_steps": "param_steps", "out": "out", "dump_hierarchy": "dump_hierarchy", "threads": "threads",
}


def _from_file(path):
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = {}
    for k, v in doc.items():
        if k not in _FILE_KEYS:
            raise ConfigError(f"unknown config key {k!r}")
        if k == "box":
            v = parse_box(v) if isinstance(v, str) else tuple(float(x) for x in v)
        out[_FILE_KEYS[k]] = v
    return out


def resolve_config(args) -> RunConfig:
    """Flags override the config file, which overrides defaults."""
    values = _from_file(args.config) if args.config else {}
    flags = {
        "box": None if args.box is None else parse_box(args.box),
        "max_groups": args.max_groups,
        "target_efficiency": args.target_util,
        "beam_width": args.beam,
        "cell_size": args.cell,
        "angular_step_deg": args.angular_step,
        "param_steps": args.param_steps,
        "out": args.out,
        "dump_hierarchy": True if args.dump_hierarchy else None,
        "threads": args.threads,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    names = {f.name for f in fields(RunConfig)}
    cfg = RunConfig(args.mechanism, **{k: v for k, v in values.items() if k in names})
    try:
        cfg = replace(cfg, max_groups=int(cfg.max_groups), beam_width=int(cfg.beam_width),
                      param_steps=int(cfg.param_steps), threads=int(cfg.threads),
                      target_efficiency=float(cfg.target_efficiency), angular_step_deg=float(cfg.angular_step_deg),
                      cell_size=None if cfg.cell_size is None else float(cfg.cell_size))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


# --------------------------------------------------------------- pipeline


@dataclass
class RunResult:
    search: object
    layout: object = None
    baseline: object = None
    timings: dict = None


def run_disassemble(cfg: RunConfig, mechanism=None):
    m = mechanism if mechanism is not None else load_mechanism(cfg.mechanism_path)
    timings = {}
    t0 = time.perf_counter()
    opt = GroupOptimizer(m, cfg.criteria().optimizer)
    search = bfs_search(m, cfg.box, cfg.criteria(), cfg.resolved_threads, opt)
    timings["disassembly_s"] = time.perf_counter() - t0
    return m, opt, RunResult(search, timings=timings)


def run_pack(cfg: RunConfig, mechanism=None):
    """Disassemble, re-pack the chosen node at full resolution, and pack the rest-pose baseline."""
    m, opt, res = run_disassemble(cfg, mechanism)
    box = cfg.final_box()
    t0 = time.perf_counter()
    res.layout = pack_all(res.search.node.groups, box)
    res.timings["packing_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    try:
        res.baseline = pack_all([rest_group(m, opt)], box)
    except DoesNotFit:
        res.baseline = None
    res.timings["baseline_s"] = time.perf_counter() - t0
    return m, res


def _node_summary(node):
    return {
        "cut_set": list(node.cut),
        "groups": len(node.groups),
        "total_obb_volume": node.total_volume,
        "trial_efficiency": node.efficiency,
        "trial_h": node.trial_h,
    }


def metrics_dict(cfg: RunConfig, res: RunResult):
    d = {"config": cfg.to_dict(), "explored_nodes": len(res.search.explored),
         "target_met": res.search.accepted, "timings_file": "timings.json"}
    d.update(_node_summary(res.search.node))
    if res.layout is not None:
        d["h"] = res.layout.h
        d["utilization"] = utilization(res.layout)
        d["baseline_rest_pose_h"] = None if res.baseline is None else res.baseline.h
        d["baseline_rest_pose_utilization"] = None if res.baseline is None else utilization(res.baseline)
    return d


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_artifacts(cfg: RunConfig, res: RunResult):
    os.makedirs(cfg.out, exist_ok=True)
    if res.layout is not None:
        _write(os.path.join(cfg.out, "layout.json"), res.layout.to_json() + "\n")
        names, meshes = scene_meshes(res.layout)
        _write(os.path.join(cfg.out, "scene.obj"), format_obj(meshes, names))
        _write(os.path.join(cfg.out, "box.obj"), box_wireframe_obj(res.layout))
    else:
        _write(os.path.join(cfg.out, "node.json"), _dumps(res.search.node.to_dict()))
    _write(os.path.join(cfg.out, "metrics.json"), _dumps(metrics_dict(cfg, res)))
    _write(os.path.join(cfg.out, "timings.json"), _dumps({k: round(v, 6) for k, v in res.timings.items()}))
    if cfg.dump_hierarchy:
        dump_hierarchy(res.search.explored, os.path.join(cfg.out, "hierarchy"))


# ---------------------------------------------------------------- commands


def cmd_pack(cfg: RunConfig):
    _, res = run_pack(cfg)
    write_artifacts(cfg, res)
    print(f"h={res.layout.h:.9g} utilization={utilization(res.layout):.9g} "
          f"groups={len(res.search.node.groups)} cut={list(res.search.node.cut)}")
    return EXIT_OK


def cmd_disassemble(cfg: RunConfig):
    _, _, res = run_disassemble(cfg)
    write_artifacts(cfg, res)
    n = res.search.node
    print(f"cut={list(n.cut)} groups={len(n.groups)} total_obb_volume={n.total_volume:.9g}")
    return EXIT_OK


def cmd_obb(mesh_path, angular_step_deg=6.0):
    obb = min_obb(load_obj(mesh_path), math.radians(angular_step_deg))
    fmt = lambda xs: " ".join(f"{x:.9g}" for x in xs)  # noqa: E731
    print(f"center {fmt(obb.center)}")
    print(f"half_extents {fmt(obb.half_extents)}")
    print(f"quaternion {fmt(obb.orientation)}")
    print(f"volume {obb.volume():.9g}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mechpack", description="Disassemble a mechanism and pack it into a box.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("pack", "disassemble, then pack into the box"),
                        ("disassemble", "run the disassembly search only")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("mechanism", help="mechanism JSON document")
        s.add_argument("--box", help="base size WxD in meters, e.g. 1.5x1")
        s.add_argument("--max-groups", type=int, help="maximum group count K")
        s.add_argument("--target-util", type=float, help="efficiency that ends the search early")
        s.add_argument("--beam", type=int, help="nodes kept per hierarchy level")
        s.add_argument("--cell", type=float, help="final packing cell size")
        s.add_argument("--angular-step", type=float, help="OBB orientation step in degrees")
        s.add_argument("--param-steps", type=int, help="grid points per joint line search")
        s.add_argument("--out", help="output directory")
        s.add_argument("--dump-hierarchy", action="store_true", help="write one JSON per explored node")
        s.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        s.add_argument("--config", help="TOML file with defaults for the flags above")
    s = sub.add_parser("obb", help="print the minimum oriented bounding box of an OBJ mesh")
    s.add_argument("mesh")
    s.add_argument("--angular-step", type=float, default=6.0, help="degrees")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "obb":
            if not 0 < args.angular_step <= 45:
                raise ConfigError("angular step must lie in (0, 45] degrees")
            return cmd_obb(args.mesh, args.angular_step)
        cfg = resolve_config(args)
        return cmd_pack(cfg) if args.command == "pack" else cmd_disassemble(cfg)
    except InvalidMechanism as exc:
        for v in exc.violations:
            print(v, file=sys.stderr)
        return EXIT_INVALID
    except DoesNotFit as exc:
        print(f"does not fit: {exc}", file=sys.stderr)
        return EXIT_DOES_NOT_FIT
    except NoAdmissibleConfiguration as exc:
        print(f"no admissible configuration: {exc}", file=sys.stderr)
        return EXIT_NO_CONFIG
    except (ConfigError, MechpackError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # keep the exit-code contract
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
