"""Hierarchical disassembly of the zig-zag chain into a 1 x 1 base.

Folded whole, the chain does not fit the base, so the search has to cut.
Each line below is one explored node of the hierarchy.
"""
from mechpack import fixtures
from mechpack.disassembly import GroupOptimizer, SearchCriteria, bfs_search


def main():
    m = fixtures.zigzag3()
    opt = GroupOptimizer(m)
    res = bfs_search(m, (1.0, 1.0), SearchCriteria(max_groups=3, beam_width=2), optimizer=opt)
    print("level  cut          groups  total OBB volume  trial efficiency")
    for n in res.explored:
        eff = "does not fit" if n.efficiency is None else f"{n.efficiency:.4f}"
        print(f"{n.level:>5}  {str(list(n.cut)):<12} {len(n.groups):>6}  {n.total_volume:>16.5f}  {eff:>16}")
    print(f"chosen: cut {list(res.node.cut)}")
    for g in res.node.groups:
        cfg = {k: round(v, 4) for k, v in g.config.items()}
        print(f"  group {list(g.part_ids)} config {cfg} OBB volume {g.obb.volume():.5f}")


if __name__ == "__main__":
    main()
