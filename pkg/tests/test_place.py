import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from nl2gds import place
from nl2gds.place import (AnnealConfig, Block, Net, PlaceConstraints, Placement,
                          PlacedBlock, PlacementError, SequencePair, Variant,
                          anneal, legalize_symmetry, packing_area,
                          sp_to_placement, verify_symmetry)


def blocks_of(sizes):
    return {b: Block(b, (Variant(w, h),)) for b, (w, h) in sizes.items()}


def exhaustive_min_area(sizes):
    ids = sorted(sizes)
    best = None
    for p in itertools.permutations(ids):
        for q in itertools.permutations(ids):
            area, _, _ = packing_area(SequencePair(p, q), sizes)
            best = area if best is None else min(best, area)
    return best


def exhaustive_min_cost(sizes, nets, blocks, w_area, w_wl):
    ids = sorted(sizes)
    best = None
    for p in itertools.permutations(ids):
        for q in itertools.permutations(ids):
            pos = sp_to_placement(SequencePair(p, q), sizes)
            pl = Placement(blocks={b: PlacedBlock(x, y, *sizes[b])
                                   for b, (x, y) in pos.items()})
            w, h = pl.bbox()
            cost = w_area * w * h + w_wl * place._hpwl_total(pl, blocks, nets, {}) // 2
            best = cost if best is None else min(best, cost)
    return best


class TestSequencePair:
    def test_left_of(self):
        pos = sp_to_placement(SequencePair(("a", "b"), ("a", "b")),
                              {"a": (10, 10), "b": (20, 10)})
        assert pos == {"a": (0, 0), "b": (10, 0)}

    def test_below(self):
        pos = sp_to_placement(SequencePair(("b", "a"), ("a", "b")),
                              {"a": (10, 10), "b": (20, 10)})
        assert pos["a"] == (0, 0)
        assert pos["b"] == (0, 10)

    def test_relations_hold_for_every_pair(self):
        rng = random.Random(5)
        ids = ["a", "b", "c", "d", "e"]
        sizes = {b: (rng.randint(1, 9), rng.randint(1, 9)) for b in ids}
        for _ in range(50):
            p = ids[:]
            q = ids[:]
            rng.shuffle(p)
            rng.shuffle(q)
            sp = SequencePair(tuple(p), tuple(q))
            pos = sp_to_placement(sp, sizes)
            pi = {b: i for i, b in enumerate(p)}
            qi = {b: i for i, b in enumerate(q)}
            for x, y in itertools.combinations(ids, 2):
                for a, b in ((x, y), (y, x)):
                    if pi[a] < pi[b] and qi[a] < qi[b]:
                        assert pos[a][0] + sizes[a][0] <= pos[b][0]
                    if pi[a] > pi[b] and qi[a] < qi[b]:
                        assert pos[a][1] + sizes[a][1] <= pos[b][1]

    def test_mismatched_sequences_rejected(self):
        with pytest.raises(PlacementError):
            SequencePair(("a", "b"), ("a", "c"))


class TestAnnealOptimality:
    def test_single_block(self):
        pl = anneal(blocks_of({"a": (7, 9)}), [], PlaceConstraints(), AnnealConfig())
        assert pl.blocks["a"].x == 0 and pl.blocks["a"].y == 0

    def test_two_equal_squares(self):
        sizes = {"a": (10, 10), "b": (10, 10)}
        cfg = AnnealConfig(seed=1, w_wl=0, restarts=2, moves_per_temp_scale=30)
        pl = anneal(blocks_of(sizes), [], PlaceConstraints(), cfg)
        w, h = pl.bbox()
        assert w * h == 200 == exhaustive_min_area(sizes)

    def test_matches_exhaustive_on_random_4_block(self):
        rng = random.Random(42)
        for trial in range(10):
            sizes = {f"b{i}": (rng.randint(2, 20), rng.randint(2, 20))
                     for i in range(4)}
            want = exhaustive_min_area(sizes)
            cfg = AnnealConfig(seed=trial, w_wl=0, restarts=4, moves_per_temp_scale=40)
            pl = anneal(blocks_of(sizes), [], PlaceConstraints(), cfg)
            w, h = pl.bbox()
            assert w * h == want, f"trial {trial}: {w * h} != {want}"

    def test_determinism(self):
        sizes = {f"b{i}": (5 + i, 7 + i) for i in range(6)}
        cfg = AnnealConfig(seed=11, restarts=2, moves_per_temp_scale=30)
        a = anneal(blocks_of(sizes), [], PlaceConstraints(), cfg)
        b = anneal(blocks_of(sizes), [], PlaceConstraints(), cfg)
        assert a.blocks == b.blocks and a.axes == b.axes


class TestSymmetry:
    def make(self):
        sizes = {"l": (10, 10), "r": (10, 10), "c": (20, 8), "f": (6, 6)}
        return blocks_of(sizes)

    def test_pair_equations_exact(self):
        blocks = self.make()
        cons = PlaceConstraints(pairs=(("l", "r"),), selfs=("c",))
        cfg = AnnealConfig(seed=2, grid=(2, 2), halo=(2, 2),
                           moves_per_temp_scale=20)
        pl = anneal(blocks, [], cons, cfg)
        axis = verify_symmetry(pl, [("l", "r")], ["c"])
        assert axis is not None
        assert pl.blocks["l"].cx2 + pl.blocks["r"].cx2 == 4 * axis
        assert pl.blocks["l"].y == pl.blocks["r"].y
        assert pl.blocks["r"].mirrored and not pl.blocks["l"].mirrored
        assert pl.blocks["c"].cx2 == 2 * axis
        assert not pl.overlapping_pairs()

    def test_legalize_from_scrambled(self):
        pl = Placement(blocks={
            "l": PlacedBlock(0, 0, 10, 10),
            "r": PlacedBlock(13, 4, 10, 10),
            "c": PlacedBlock(4, 9, 20, 8),
        })
        out = legalize_symmetry(pl, [("l", "r")], ["c"], grid=(1, 1), halo=(2, 2))
        axis = verify_symmetry(out, [("l", "r")], ["c"])
        assert axis is not None
        assert not out.overlapping_pairs()

    def test_legalize_spec_example(self):
        # pair of 10x10 blocks at y=0, axis 25: center sum must be 50 exactly
        pl = Placement(blocks={"a": PlacedBlock(0, 0, 10, 10),
                               "b": PlacedBlock(30, 0, 10, 10)})
        out = legalize_symmetry(pl, [("a", "b")], [], grid=(1, 1), halo=(0, 0),
                                axis_hint=25)
        assert (out.blocks["a"].cx2 + out.blocks["b"].cx2) == 4 * 25
        assert out.blocks["a"].y == out.blocks["b"].y

    def test_self_symmetric_centered(self):
        pl = Placement(blocks={"s": PlacedBlock(3, 0, 20, 10)})
        out = legalize_symmetry(pl, [], ["s"], grid=(1, 1), halo=(0, 0),
                                axis_hint=40)
        assert out.blocks["s"].cx2 == 80

    def test_pair_size_mismatch_rejected(self):
        pl = Placement(blocks={"a": PlacedBlock(0, 0, 10, 10),
                               "b": PlacedBlock(20, 0, 12, 10)})
        with pytest.raises(PlacementError):
            legalize_symmetry(pl, [("a", "b")], [], grid=(1, 1), halo=(0, 0))

    def test_irreparable_overlap_reports_pair(self):
        pl = Placement(blocks={"a": PlacedBlock(0, 0, 10, 10),
                               "b": PlacedBlock(30, 0, 10, 10),
                               "f": PlacedBlock(0, 0, 10, 10)})
        with pytest.raises(PlacementError, match="overlap"):
            legalize_symmetry(pl, [("a", "b")], [], grid=(1, 1), halo=(0, 0),
                              axis_hint=20, max_passes=0)


class TestCostTerms:
    def test_hpwl_pulls_connected_blocks_together(self):
        sizes = {f"b{i}": (10, 10) for i in range(4)}
        blocks = {b: Block(b, (Variant(10, 10, pins=(("p", (10, 10)),)),))
                  for b in sizes}
        nets = [Net("n1", (("b0", "p"), ("b3", "p")))]
        cfg = AnnealConfig(seed=3, w_area=0, w_wl=1, restarts=3,
                           moves_per_temp_scale=40)
        pl = anneal(blocks, nets, PlaceConstraints(), cfg)
        d = (abs(pl.blocks["b0"].x - pl.blocks["b3"].x)
             + abs(pl.blocks["b0"].y - pl.blocks["b3"].y))
        assert d <= 10   # adjacent

    def test_three_block_area_plus_wl_matches_exhaustive(self):
        rng = random.Random(9)
        for trial in range(6):
            sizes = {f"b{i}": (rng.randint(3, 12), rng.randint(3, 12))
                     for i in range(3)}
            blocks = {b: Block(b, (Variant(w, h, pins=(("p", (w, h)),)),))
                      for b, (w, h) in sizes.items()}
            nets = [Net("n", (("b0", "p"), ("b1", "p"), ("b2", "p")))]
            want = exhaustive_min_cost(sizes, nets, blocks, 1, 2)
            cfg = AnnealConfig(seed=trial, w_area=1, w_wl=2, restarts=4,
                               moves_per_temp_scale=50)
            pl = anneal(blocks, nets, PlaceConstraints(), cfg)
            w, h = pl.bbox()
            got = w * h + 2 * place._hpwl_total(pl, blocks, nets, {b: b for b in blocks}) // 2
            assert got == want, f"trial {trial}"

    def test_no_overlap_property(self):
        rng = random.Random(17)
        for trial in range(10):
            n = rng.randint(2, 7)
            sizes = {f"b{i}": (rng.randint(2, 15), rng.randint(2, 15))
                     for i in range(n)}
            cfg = AnnealConfig(seed=trial, moves_per_temp_scale=15)
            pl = anneal(blocks_of(sizes), [], PlaceConstraints(), cfg)
            assert not pl.overlapping_pairs()


class TestAlignmentMatching:
    def test_alignment_row_order_and_edge(self):
        sizes = {f"t{i}": (8, 10) for i in range(4)}
        cons = PlaceConstraints(alignment=(("t0", "t1", "t2", "t3"),))
        cfg = AnnealConfig(seed=0, grid=(2, 2), halo=(2, 2), moves_per_temp_scale=15)
        pl = anneal(blocks_of(sizes), [], cons, cfg)
        xs = [pl.blocks[f"t{i}"].x for i in range(4)]
        ys = {pl.blocks[f"t{i}"].y for i in range(4)}
        assert xs == sorted(xs) and len(ys) == 1

    def test_matching_locks_variants(self):
        variants = (Variant(10, 10), Variant(20, 5))
        blocks = {"a": Block("a", variants), "b": Block("b", variants),
                  "c": Block("c", variants)}
        cons = PlaceConstraints(matching=(("a", "b"),))
        cfg = AnnealConfig(seed=4, restarts=3, moves_per_temp_scale=25)
        pl = anneal(blocks, [], cons, cfg)
        assert pl.blocks["a"].variant == pl.blocks["b"].variant
