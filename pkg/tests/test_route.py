import heapq
import random

import pytest

from nl2gds import geom, route
from nl2gds.layout import Rect
from nl2gds.route import (BlockedNetError, BudgetViolationError, NetSpec, Route,
                          RouteConfig, RoutingError, RoutingGrid, astar,
                          expand_state, resistance_of, route_module, route_net,
                          route_symmetric)


def dijkstra_cost(grid, net, sources, targets, cfg, soft=False, resistance=False):
    """Plain Dijkstra over the identical transition graph (no heuristic)."""
    heap = []
    best = {}
    counter = 0
    for cell in sorted(sources):
        st = (cell, grid.min_run[cell[0]], 0)
        best[st] = 0
        heapq.heappush(heap, (0, counter, st))
        counter += 1
    while heap:
        g, _, st = heapq.heappop(heap)
        if best.get(st, -1) != g:
            continue
        if st[0] in targets:
            return g
        for st2, step in expand_state(grid, cfg, net, st, soft=soft,
                                      resistance=resistance):
            g2 = g + step
            if st2 not in best or best[st2] > g2:
                best[st2] = g2
                heapq.heappush(heap, (g2, counter, st2))
                counter += 1
    return None


def grid_on(pdk, w_tracks=20, h_stops=12, layers=("m1", "m2", "m3")):
    region = Rect(0, 0, 64 * w_tracks, 64 * h_stops)
    return RoutingGrid(pdk, region, list(layers))


class TestRouteNet:
    def test_straight_shot_same_track(self, mock14):
        g = grid_on(mock14)
        g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 3, 1, 2))
        g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 3, 7, 8))
        r = route_net(g, "n")
        assert len(r.segments) == 1 and not r.vias
        lname, t, s0, s1 = r.segments[0]
        assert (lname, t) == ("m2", 3)
        assert s1 - s0 == 5     # five stop pitches between the facing pin ends

    def test_perpendicular_single_via_matches_dijkstra(self, mock14):
        cfg = RouteConfig()
        g = grid_on(mock14)
        p1 = g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 2, 1, 3))
        p2 = g.add_pin("n", "m3", geom.wire_rect(mock14, "m3", 9, 6, 8))
        want = dijkstra_cost(g, "n", set(p1), set(p2), cfg)
        got, _ = astar(g, "n", set(p1), set(p2), cfg, soft=False)
        assert got == want
        r = route_net(g, "n")
        assert len(r.vias) == 1

    def test_fully_blocked_cut_raises(self, mock14):
        g = grid_on(mock14, layers=("m1", "m2"))
        p1 = g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 2, 1, 2))
        p2 = g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 8, 1, 2))
        g.block_box("m1", Rect(0, 300, 64 * 20, 400))
        g.block_box("m2", Rect(0, 300, 64 * 20, 400))
        with pytest.raises(BlockedNetError):
            route_net(g, "n")

    def test_astar_equals_dijkstra_on_random_grids(self, mock14):
        rng = random.Random(123)
        cfg = RouteConfig()
        for trial in range(200):
            w = rng.randint(6, 30)
            h = rng.randint(6, 30)
            g = RoutingGrid(mock14, Rect(0, 0, 64 * w, 64 * h), ["m1", "m2", "m3"])
            for _ in range(rng.randint(0, 40)):
                lname = rng.choice(g.layers)
                t0, t1 = g.track_range[lname]
                s0, s1 = g.stop_range[lname]
                if t0 > t1 or s0 > s1:
                    continue
                g.blocked.add((lname, rng.randint(t0, t1), rng.randint(s0, s1)))
            lname = rng.choice(g.layers)
            t0, t1 = g.track_range[lname]
            s0, s1 = g.stop_range[lname]
            if s1 - s0 < 3 or t1 - t0 < 2:
                continue
            src = (lname, rng.randint(t0, t1), rng.randint(s0, s1))
            l2 = rng.choice(g.layers)
            u0, u1 = g.track_range[l2]
            v0, v1 = g.stop_range[l2]
            dst = (l2, rng.randint(u0, u1), rng.randint(v0, v1))
            if src == dst or src in g.blocked or dst in g.blocked:
                continue
            g._put("n", src, "wire")
            g._put("n", dst, "wire")
            want = dijkstra_cost(g, "n", {src}, {dst}, cfg)
            if want is None:
                with pytest.raises(BlockedNetError):
                    astar(g, "n", {src}, {dst}, cfg, soft=False)
                continue
            got, _ = astar(g, "n", {src}, {dst}, cfg, soft=False)
            assert got == want, f"trial {trial}"

    def test_multi_terminal_tree_connected(self, mock14):
        g = grid_on(mock14)
        pins = [g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", t, a, a + 1))
                for t, a in ((1, 1), (6, 8), (9, 2))]
        r = route_net(g, "n")
        # every pin group's cells must be reachable through committed cells
        cells = {c for c, k in g.net_cells["n"].items() if k == "wire"}
        seen = set()
        stack = [next(iter(pins[0]))]
        while stack:
            cell = stack.pop()
            if cell in seen or cell not in cells:
                continue
            seen.add(cell)
            lname, t, s = cell
            stack += [(lname, t, s - 1), (lname, t, s + 1)]
            x, y = g.cell_point(cell)
            for l2 in g.layers:
                if l2 == lname:
                    continue
                try:
                    r2 = g.pdk.layer(l2)
                    t2 = g.pdk.track_index(l2, x if r2.direction == "vertical" else y)
                    s2 = g.pdk.stop_index(l2, y if r2.direction == "vertical" else x)
                except Exception:
                    continue
                stack.append((l2, t2, s2))
        for group in pins:
            assert group & seen


class TestRunRules:
    def test_min_run_before_via(self, mock65):
        # mock65 m3 needs two stops before a via can leave it
        region = Rect(0, 0, 130 * 24, 140 * 24)
        g = RoutingGrid(mock65, region, ["m2", "m3", "m4"])
        g.add_pin("n", "m2", geom.wire_rect(mock65, "m2", 2, 2, 4))
        g.add_pin("n", "m4", geom.wire_rect(mock65, "m4", 9, 6, 8))
        r = route_net(g, "n")
        for lname, _t, s0, s1 in r.segments:
            span = (s1 - s0) * g.pdk.stop_pitch(lname)
            assert span >= g.pdk.layer(lname).min_l

    def test_maxl_forces_stitch(self, tmp_path):
        from conftest import tiny_pdk_doc, write_pdk
        doc = tiny_pdk_doc()
        for layer in doc["layers"]:
            layer["MaxL"] = 60          # six stops
        p = write_pdk(tmp_path, doc)
        g = RoutingGrid(p, Rect(0, 0, 10 * 30, 10 * 30), ["m1", "m2", "m3"])
        g.add_pin("n", "m2", geom.wire_rect(p, "m2", 2, 1, 2))
        g.add_pin("n", "m2", geom.wire_rect(p, "m2", 2, 20, 21))
        r = route_net(g, "n")
        assert r.vias, "long straight runs must stitch through vias"
        for lname, _t, s0, s1 in r.segments:
            assert (s1 - s0) * g.pdk.stop_pitch(lname) <= p.layer(lname).max_l


class TestSymmetric:
    def test_mirrored_routes_exact(self, mock14):
        g = grid_on(mock14, w_tracks=22)
        axis = 11 * 64          # x = 704, on the half-pitch grid
        assert mock14.axis_on_grid(axis)
        pa1 = geom.wire_rect(mock14, "m2", 2, 2, 3)
        pa2 = geom.wire_rect(mock14, "m2", 8, 6, 7)
        g.add_pin("a", "m2", pa1)
        g.add_pin("a", "m2", pa2)
        g.add_pin("b", "m2", pa1.mirrored_x(2 * axis))
        g.add_pin("b", "m2", pa2.mirrored_x(2 * axis))
        ra, rb = route_symmetric(g, "a", "b", axis)
        assert rb.segments == ra.mirrored(mock14, axis, "b").segments
        assert rb.vias == ra.mirrored(mock14, axis, "b").vias
        la = sum(s1 - s0 for _l, _t, s0, s1 in ra.segments)
        lb = sum(s1 - s0 for _l, _t, s0, s1 in rb.segments)
        assert la == lb

    def test_mirror_of_mirror_is_identity(self, mock14):
        r = Route(net="a", segments=[("m2", 3, 1, 5), ("m3", 4, 2, 6)],
                  vias=[("v2", 288, 224)])
        twice = r.mirrored(mock14, 640, "x").mirrored(mock14, 640, "a")
        assert twice.segments == r.segments and twice.vias == r.vias

    def test_off_grid_axis_rejected(self, mock14):
        g = grid_on(mock14)
        g.add_pin("a", "m2", geom.wire_rect(mock14, "m2", 2, 2, 3))
        g.add_pin("b", "m2", geom.wire_rect(mock14, "m2", 8, 2, 3))
        with pytest.raises(RoutingError, match="axis"):
            route_symmetric(g, "a", "b", 333)

    def test_bad_pin_mirror_rejected(self, mock14):
        g = grid_on(mock14, w_tracks=22)
        axis = 11 * 64
        g.add_pin("a", "m2", geom.wire_rect(mock14, "m2", 2, 2, 3))
        g.add_pin("b", "m2", geom.wire_rect(mock14, "m2", 3, 2, 3))
        with pytest.raises(RoutingError, match="mirror"):
            route_symmetric(g, "a", "b", axis)


class TestBudgets:
    def test_generous_budget_same_as_route_net(self, mock14):
        g1 = grid_on(mock14)
        g1.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 3, 1, 2))
        g1.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 3, 7, 8))
        plain = route_net(g1, "n")
        g2 = grid_on(mock14)
        g2.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 3, 1, 2))
        g2.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 3, 7, 8))
        routes = route_module(g2, [NetSpec("n", budget_mohm=10**9)])
        assert routes["n"].segments == plain.segments

    def test_budget_below_floor_reports_minimum(self, mock14):
        g = grid_on(mock14)
        p1 = g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 3, 1, 2))
        p2 = g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 3, 7, 8))
        floor = dijkstra_cost(g, "n", set(p1), set(p2), RouteConfig(),
                              resistance=True)
        with pytest.raises(BudgetViolationError) as err:
            route_module(g, [NetSpec("n", budget_mohm=floor - 1)])
        assert err.value.achieved_mohm == floor
        assert err.value.budget_mohm == floor - 1

    def test_budget_reroute_prefers_low_resistance(self, mock14):
        g = grid_on(mock14)
        p1 = g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 3, 1, 2))
        p2 = g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 3, 7, 8))
        floor = dijkstra_cost(g, "n", set(p1), set(p2), RouteConfig(),
                              resistance=True)
        routes = route_module(g, [NetSpec("n", budget_mohm=floor)])
        assert resistance_of(mock14, routes["n"]) <= floor

    def test_resistance_matches_recomputation(self, mock14):
        g = grid_on(mock14)
        g.add_pin("n", "m2", geom.wire_rect(mock14, "m2", 2, 1, 3))
        g.add_pin("n", "m3", geom.wire_rect(mock14, "m3", 9, 6, 8))
        r = route_net(g, "n")
        total = 0
        for lname, t, s0, s1 in r.segments:
            rect = geom.wire_rect(mock14, lname, t, s0, s1)
            rm, _ = mock14.wire_parasitics(lname, geom.wire_length(mock14, lname, rect))
            total += rm
        for name, _x, _y in r.vias:
            total += mock14.via_parasitics(name)
        assert total == resistance_of(mock14, r)


class TestOccupancy:
    def test_committed_routes_conflict_free(self, mock14):
        g = grid_on(mock14)
        for i, t in enumerate((1, 4, 7)):
            g.add_pin(f"n{i}", "m2", geom.wire_rect(mock14, "m2", t, 1, 2))
            g.add_pin(f"n{i}", "m2", geom.wire_rect(mock14, "m2", t, 8, 9))
        route_module(g, [NetSpec(f"n{i}") for i in range(3)])
        assert not g.conflict_cells()

    def test_e2e_margin_blocks_adjacent_commit(self, mock14):
        g = grid_on(mock14)
        g.add_pin("a", "m2", geom.wire_rect(mock14, "m2", 3, 1, 2))
        g.add_pin("a", "m2", geom.wire_rect(mock14, "m2", 3, 5, 6))
        route_net(g, "a")
        # cell adjacent to a committed span carries the margin marker
        assert any(k == "margin" for k in g.net_cells["a"].values())

    def test_shield_reserves_neighbor_tracks(self, mock14):
        g = grid_on(mock14)
        g.add_pin("sig", "m2", geom.wire_rect(mock14, "m2", 4, 1, 2))
        g.add_pin("sig", "m2", geom.wire_rect(mock14, "m2", 4, 8, 9))
        g.add_pin("gnd", "m2", geom.wire_rect(mock14, "m2", 8, 1, 2))
        routes = route_module(g, [NetSpec("sig", shield=True), NetSpec("gnd")],
                              ground="gnd")
        shield_tracks = {t for _l, t, _s0, _s1 in routes["gnd"].segments}
        assert {3, 5} <= shield_tracks

    def test_shield_without_ground_rejected(self, mock14):
        g = grid_on(mock14)
        g.add_pin("sig", "m2", geom.wire_rect(mock14, "m2", 4, 1, 2))
        g.add_pin("sig", "m2", geom.wire_rect(mock14, "m2", 4, 8, 9))
        with pytest.raises(RoutingError, match="ground"):
            route_module(g, [NetSpec("sig", shield=True)])

    def test_rip_up_resolves_crossing_contention(self, mock14):
        g = grid_on(mock14, w_tracks=16, h_stops=10, layers=("m1", "m2"))
        # two nets whose straight paths collide on the only shared column
        g.add_pin("a", "m2", geom.wire_rect(mock14, "m2", 2, 1, 2))
        g.add_pin("a", "m2", geom.wire_rect(mock14, "m2", 2, 12, 13))
        g.add_pin("b", "m2", geom.wire_rect(mock14, "m2", 2, 5, 6))
        g.add_pin("b", "m1", geom.wire_rect(mock14, "m1", 9, 1, 2))
        routes = route_module(g, [NetSpec("a"), NetSpec("b")])
        assert not g.conflict_cells()
        assert set(routes) == {"a", "b"}
