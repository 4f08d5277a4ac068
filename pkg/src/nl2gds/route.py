"""Grid router: multi-terminal A*, negotiated-congestion rip-up, symmetric
pairs, and net resistance budgets.

Search space: (layer, track, stop, run) where run counts lateral steps since
entering the current track. A via off a layer needs run >= ceil(MinL/stop)
unless standing on existing same-net metal (pins and committed wires provide
their own length and enclosure), which bans degenerate stacked-via hops; a
lateral step needs run < MaxL/stop, which makes the search insert stitch
vias instead of overlong segments. Costs are integer nanometers (or integer
milliohms in resistance mode), so A* against a Manhattan + remaining-via
heuristic is exact and comparable to a Dijkstra oracle.

Occupancy lives per (layer, track, stop) cell with end-to-end margin cells
around every committed span. Congestion rounds route through foreign cells
at a soft penalty, then rip up и reroute every net involved in a conflicted
cell with grown history costs (default 5 rounds).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .geom import via_cut, wire_rect
from .layout import Rect
from .pdk import Pdk, VERTICAL


class RoutingError(Exception):
    pass


class BlockedNetError(RoutingError):
    def __init__(self, net: str, msg: str, explored: int = 0, frontier: list | None = None):
        self.net = net
        self.explored = explored
        self.frontier = frontier or []
        super().__init__(f"net {net!r}: {msg} (explored {explored} states; "
                         f"frontier sample {self.frontier[:4]})")


class BudgetViolationError(RoutingError):
    def __init__(self, net: str, budget_mohm: int, achieved_mohm: int):
        self.net = net
        self.budget_mohm = budget_mohm
        self.achieved_mohm = achieved_mohm
        super().__init__(
            f"net {net!r}: resistance budget {budget_mohm} mohm, "
            f"minimum achievable {achieved_mohm} mohm")


@dataclass
class RouteConfig:
    via_cost: int = 120
    conflict_base: int = 4000
    history_scale: int = 2000
    rounds: int = 5
    max_expansions: int = 1_000_000


@dataclass
class Route:
    net: str
    segments: list[tuple[str, int, int, int]] = field(default_factory=list)  # layer, track, s0, s1
    vias: list[tuple[str, int, int]] = field(default_factory=list)           # via name, x, y

    def mirrored(self, pdk: Pdk, axis: int, net: str) -> "Route":
        segs = []
        for layer, t, s0, s1 in self.segments:
            if pdk.layer(layer).direction == VERTICAL:
                x2 = 2 * axis - pdk.track_coord(layer, t)
                segs.append((layer, pdk.track_index(layer, x2), s0, s1))
            else:
                a = pdk.stop_index(layer, 2 * axis - pdk.stop_coord(layer, s1))
                b = pdk.stop_index(layer, 2 * axis - pdk.stop_coord(layer, s0))
                segs.append((layer, t, a, b))
        vias = [(name, 2 * axis - x, y) for name, x, y in self.vias]
        return Route(net=net, segments=sorted(segs), vias=sorted(vias))


@dataclass
class NetSpec:
    name: str
    budget_mohm: int | None = None
    shield: bool = False
    symmetric_with: str | None = None     # partner net (this net is the primary)
    escape_layer: str | None = None       # boundary nets reach this layer for pin export


class RoutingGrid:
    """Occupancy and geometry bookkeeping for one module's routing region."""

    def __init__(self, pdk: Pdk, region: Rect, layers: list[str]):
        self.pdk = pdk
        self.region = region
        self.layers = list(layers)
        for a, b in zip(self.layers, self.layers[1:]):
            if pdk.layer_index(b) != pdk.layer_index(a) + 1:
                raise RoutingError("routing layers must be contiguous in the stack")
        self.track_range: dict[str, tuple[int, int]] = {}
        self.stop_range: dict[str, tuple[int, int]] = {}
        self.min_run: dict[str, int] = {}
        self.run_cap: dict[str, int] = {}
        self.maxl_active: dict[str, bool] = {}
        self.margin: dict[str, int] = {}
        for lname in self.layers:
            rules = pdk.layer(lname)
            ov = pdk.end_overhang(lname)
            if rules.direction == VERTICAL:
                alo, ahi = region.x0, region.x1
                blo, bhi = region.y0, region.y1
            else:
                alo, ahi = region.y0, region.y1
                blo, bhi = region.x0, region.x1
            half = rules.width // 2
            t0 = -(-(alo + half - rules.offset) // rules.pitch)
            t1 = (ahi - half - rules.offset) // rules.pitch
            stop = pdk.layer(pdk.stop_layer(lname))
            s0 = -(-(blo + ov - stop.offset) // stop.pitch)
            s1 = (bhi - ov - stop.offset) // stop.pitch
            if t0 > t1 or s0 > s1:
                raise RoutingError(f"region too small for any {lname} track")
            self.track_range[lname] = (t0, t1)
            self.stop_range[lname] = (s0, s1)
            self.min_run[lname] = pdk.min_run_stops(lname)
            extent = s1 - s0
            max_run = pdk.max_run_stops(lname)
            # when MaxL is unreachable within the region, run only needs to
            # track the MinL threshold
            self.maxl_active[lname] = extent > max_run
            self.run_cap[lname] = max_run if extent > max_run else self.min_run[lname]
            self.margin[lname] = pdk.e2e_margin_stops(lname) - 1
        # occupancy: cell -> {net: kind}; kind 'wire' or 'margin'
        self.occ: dict[tuple[str, int, int], dict[str, str]] = {}
        self.blocked: set[tuple[str, int, int]] = set()
        self.history: dict[tuple[str, int, int], int] = {}
        self.pin_groups: dict[str, list[frozenset]] = {}
        self.net_cells: dict[str, dict[tuple[str, int, int], str]] = {}

    # -- geometry <-> cells ------------------------------------------------

    def cell_point(self, cell: tuple[str, int, int]) -> tuple[int, int]:
        lname, t, s = cell
        c = self.pdk.track_coord(lname, t)
        d = self.pdk.stop_coord(lname, s)
        return (c, d) if self.pdk.layer(lname).direction == VERTICAL else (d, c)

    def in_bounds(self, cell: tuple[str, int, int]) -> bool:
        lname, t, s = cell
        if lname not in self.track_range:
            return False
        t0, t1 = self.track_range[lname]
        s0, s1 = self.stop_range[lname]
        return t0 <= t <= t1 and s0 <= s <= s1

    def block_box(self, lname: str, box: Rect, along_margin: int = 0) -> None:
        """Mark every cell whose wire metal could clash with `box` on a layer."""
        if lname not in self.track_range:
            return
        rules = self.pdk.layer(lname)
        half = rules.width // 2
        if rules.direction == VERTICAL:
            alo, ahi, blo, bhi = box.x0, box.x1, box.y0, box.y1
        else:
            alo, ahi, blo, bhi = box.y0, box.y1, box.x0, box.x1
        stop = self.pdk.layer(self.pdk.stop_layer(lname))
        t0 = -(-(alo - half + 1 - rules.offset) // rules.pitch)
        t1 = (ahi + half - 1 - rules.offset) // rules.pitch
        s0 = -(-(blo - along_margin + 1 - stop.offset) // stop.pitch)
        s1 = (bhi + along_margin - 1 - stop.offset) // stop.pitch
        r0, r1 = self.track_range[lname]
        q0, q1 = self.stop_range[lname]
        for t in range(max(t0, r0), min(t1, r1) + 1):
            for s in range(max(s0, q0), min(s1, q1) + 1):
                self.blocked.add((lname, t, s))

    def add_pin(self, net: str, lname: str, rect: Rect) -> frozenset:
        from .geom import wire_span
        t, s0, s1 = wire_span(self.pdk, lname, rect)
        cells = []
        for s in range(s0, s1 + 1):
            cell = (lname, t, s)
            self.blocked.discard(cell)
            self._put(net, cell, "wire")
            cells.append(cell)
        for s in list(range(s0 - self.margin[lname], s0)) \
                + list(range(s1 + 1, s1 + self.margin[lname] + 1)):
            if self.in_bounds((lname, t, s)):
                self._put(net, (lname, t, s), "margin")
        group = frozenset(cells)
        self.pin_groups.setdefault(net, []).append(group)
        return group

    def _put(self, net: str, cell, kind: str) -> None:
        slot = self.occ.setdefault(cell, {})
        if slot.get(net) == "wire":
            return
        slot[net] = kind if slot.get(net) != "wire" else "wire"
        mine = self.net_cells.setdefault(net, {})
        if mine.get(cell) != "wire":
            mine[cell] = kind

    def is_own_wire(self, net: str, cell) -> bool:
        return self.occ.get(cell, {}).get(net) == "wire"

    def foreign(self, net: str, cell) -> list[tuple[str, str]]:
        return [(n, k) for n, k in self.occ.get(cell, {}).items() if n != net]

    # -- committing and ripping up ------------------------------------------

    def commit(self, route: Route) -> Route:
        """Merge spans (filling sub-margin same-net gaps) and occupy cells.

        Returns the route with merged segments; this is the geometry of
        record for resistance accounting.
        """
        net = route.net
        spans: dict[tuple[str, int], list[list[int]]] = {}
        for lname, t, s0, s1 in route.segments:
            spans.setdefault((lname, t), []).append([min(s0, s1), max(s0, s1)])
        merged_route = Route(net=net, vias=sorted(set(route.vias)))
        for (lname, t), lst in sorted(spans.items()):
            lst.sort()
            gap_fill = self.margin[lname]
            merged: list[list[int]] = []
            for s0, s1 in lst:
                if merged and s0 - merged[-1][1] <= gap_fill:
                    merged[-1][1] = max(merged[-1][1], s1)
                else:
                    merged.append([s0, s1])
            for s0, s1 in merged:
                merged_route.segments.append((lname, t, s0, s1))
                for s in range(s0, s1 + 1):
                    self._put(net, (lname, t, s), "wire")
                for s in range(s0 - self.margin[lname], s0):
                    if self.in_bounds((lname, t, s)):
                        self._put(net, (lname, t, s), "margin")
                for s in range(s1 + 1, s1 + self.margin[lname] + 1):
                    if self.in_bounds((lname, t, s)):
                        self._put(net, (lname, t, s), "margin")
        merged_route.segments.sort()
        return merged_route

    def rip_up(self, net: str) -> None:
        keep = set()
        for group in self.pin_groups.get(net, ()):  # pins stay
            keep |= group
        for cell, kind in list(self.net_cells.get(net, {}).items()):
            if cell in keep:
                continue
            slot = self.occ.get(cell)
            if slot and net in slot:
                del slot[net]
                if not slot:
                    del self.occ[cell]
            del self.net_cells[net][cell]

    def conflict_cells(self) -> dict[tuple[str, int, int], set[str]]:
        out = {}
        for cell, slot in self.occ.items():
            if len(slot) < 2:
                continue
            wires = [n for n, k in slot.items() if k == "wire"]
            if wires and len(slot) >= 2:
                out[cell] = set(slot)
        return out


# ---------------------------------------------------------------------------
# search

def _lateral_cost(grid: RoutingGrid, lname: str, resistance: bool) -> int:
    pitch = grid.pdk.stop_pitch(lname)
    if resistance:
        return grid.pdk.layer(lname).unit_r * pitch
    return pitch


def _via_cost(grid: RoutingGrid, lower: str, cfg: RouteConfig, resistance: bool) -> int:
    if resistance:
        upper = grid.layers[grid.layers.index(lower) + 1]
        return grid.pdk.via_between(lower, upper).r
    return cfg.via_cost


def _penalty(grid: RoutingGrid, cfg: RouteConfig, net: str, cell, soft: bool) -> int | None:
    """None = impassable; else additive penalty."""
    if cell in grid.blocked:
        return None
    pen = grid.history.get(cell, 0) * cfg.history_scale
    for other, kind in grid.foreign(net, cell):
        if not soft:
            return None
        pen += cfg.conflict_base
    return pen


def _mirror_cell(grid: RoutingGrid, cell, axis: int):
    lname, t, s = cell
    pdk = grid.pdk
    try:
        if pdk.layer(lname).direction == VERTICAL:
            t2 = pdk.track_index(lname, 2 * axis - pdk.track_coord(lname, t))
            return (lname, t2, s)
        s2 = pdk.stop_index(lname, 2 * axis - pdk.stop_coord(lname, s))
        return (lname, t, s2)
    except Exception:
        return None


def expand_state(grid: RoutingGrid, cfg: RouteConfig, net: str, state,
                 soft: bool = True, resistance: bool = False,
                 mirror_axis: int | None = None, mirror_net: str | None = None):
    """Successors of one search state: ((cell, run, dir), step_cost) pairs.

    Shared by the A* searcher and any plain-Dijkstra checker so both walk
    the identical transition graph.
    """
    pdk = grid.pdk
    layer_idx = {l: i for i, l in enumerate(grid.layers)}
    cell, run, dirn = state
    lname, t, s = cell
    li = layer_idx[lname]

    def passable(c) -> int | None:
        if not grid.in_bounds(c):
            return None
        p = _penalty(grid, cfg, net, c, soft)
        if p is None:
            return None
        if mirror_axis is not None:
            m = _mirror_cell(grid, c, mirror_axis)
            if m is None or not grid.in_bounds(m):
                return None
            q = _penalty(grid, cfg, mirror_net or net, m, soft)
            if q is None:
                return None
            p += q
        return p

    moves = []
    # lateral steps: direction locked per run, so run equals the drawn span;
    # with MaxL inside the region a full run forces a via first
    lateral_ok = run < grid.run_cap[lname] or not grid.maxl_active[lname]
    if lateral_ok:
        for ds in (-1, 1):
            if dirn and ds != dirn:
                continue
            cell2 = (lname, t, s + ds)
            pen = passable(cell2)
            if pen is None:
                continue
            if grid.is_own_wire(net, cell2):
                run2, dir2 = grid.min_run[lname], 0
            else:
                run2, dir2 = min(run + 1, grid.run_cap[lname]), ds
            moves.append(((cell2, run2, dir2),
                          _lateral_cost(grid, lname, resistance) + pen))
    # vias: leaving a track needs a full-MinL run or existing own metal
    if run >= grid.min_run[lname] or grid.is_own_wire(net, cell):
        x, y = grid.cell_point(cell)
        for l2 in (grid.layers[li - 1] if li > 0 else None,
                   grid.layers[li + 1] if li + 1 < len(grid.layers) else None):
            if l2 is None:
                continue
            try:
                r2 = pdk.layer(l2)
                across = x if r2.direction == VERTICAL else y
                along = y if r2.direction == VERTICAL else x
                t2 = pdk.track_index(l2, across)
                s2 = pdk.stop_index(l2, along)
            except Exception:
                continue
            cell2 = (l2, t2, s2)
            pen = passable(cell2)
            if pen is None:
                continue
            lower = lname if layer_idx[l2] > li else l2
            run2 = grid.min_run[l2] if grid.is_own_wire(net, cell2) else 0
            moves.append(((cell2, run2, 0),
                          _via_cost(grid, lower, cfg, resistance) + pen))
    return moves


def astar(grid: RoutingGrid, net: str, sources: set, targets: set, cfg: RouteConfig,
          soft: bool = True, resistance: bool = False,
          goal_layer: str | None = None, mirror_axis: int | None = None,
          mirror_net: str | None = None):
    """A* from source cells to target cells (or to a run-complete segment on
    goal_layer). Returns (cost, moves) where moves is the cell/via trace."""
    pdk = grid.pdk
    lat_cost = {l: _lateral_cost(grid, l, resistance) for l in grid.layers}
    via_up_cost = {l: _via_cost(grid, l, cfg, resistance) for l in grid.layers[:-1]}
    min_via = min(via_up_cost.values()) if via_up_cost else 0
    layer_idx = {l: i for i, l in enumerate(grid.layers)}

    if goal_layer is None and not targets:
        raise RoutingError(f"net {net!r}: no targets")
    if goal_layer is None:
        tpts = [grid.cell_point(c) for c in targets]
        txlo = min(p[0] for p in tpts)
        txhi = max(p[0] for p in tpts)
        tylo = min(p[1] for p in tpts)
        tyhi = max(p[1] for p in tpts)
        tlayers = {layer_idx[c[0]] for c in targets}
    else:
        tlayers = {layer_idx[goal_layer]}

    def heuristic(cell) -> int:
        li = layer_idx[cell[0]]
        dvia = min(abs(li - tl) for tl in tlayers) * min_via
        if goal_layer is not None:
            return dvia
        x, y = grid.cell_point(cell)
        dx = max(txlo - x, x - txhi, 0)
        dy = max(tylo - y, y - tyhi, 0)
        if resistance:
            return (dx + dy) * min(r.unit_r for r in
                                   (pdk.layer(l) for l in grid.layers)) + dvia
        return dx + dy + dvia

    # state = (cell, run, dir): run is the monotonic displacement since the
    # track was entered (dir locks the direction), so run equals the drawn
    # segment span and MinL/MaxL checks are exact. Source cells sit on own
    # metal, which provides span and enclosure (run starts at min_run).
    heap: list = []
    best: dict = {}
    parent: dict = {}
    counter = 0
    for cell in sorted(sources):
        state = (cell, grid.min_run[cell[0]], 0)
        best[state] = 0
        parent[state] = None
        heapq.heappush(heap, (heuristic(cell), counter, 0, state))
        counter += 1

    expansions = 0
    goal_state = None
    while heap:
        f, _, g, state = heapq.heappop(heap)
        if best.get(state, -1) != g:
            continue
        cell, run, dirn = state
        lname, t, s = cell
        if goal_layer is None:
            if cell in targets:
                goal_state = state
                break
        elif lname == goal_layer and run >= grid.min_run[lname]:
            goal_state = state
            break
        expansions += 1
        if expansions > cfg.max_expansions:
            raise BlockedNetError(net, "search budget exceeded", expansions,
                                  [st[0] for st in list(best)[:4]])
        for st2, step in expand_state(grid, cfg, net, state, soft=soft,
                                      resistance=resistance,
                                      mirror_axis=mirror_axis,
                                      mirror_net=mirror_net):
            g2 = g + step
            if st2 in best and best[st2] <= g2:
                continue
            best[st2] = g2
            parent[st2] = state
            heapq.heappush(heap, (g2 + heuristic(st2[0]), counter, g2, st2))
            counter += 1

    if goal_state is None:
        frontier = sorted({st[0] for st in best})[:6]
        raise BlockedNetError(net, "no path", expansions, frontier)
    # reconstruct
    chain = []
    st = goal_state
    while st is not None:
        chain.append(st[0])
        st = parent[st]
    chain.reverse()
    return best[goal_state], chain


def _chain_to_route(grid: RoutingGrid, net: str, chain: list) -> Route:
    route = Route(net=net)
    pdk = grid.pdk
    i = 0
    while i < len(chain) - 1:
        (l1, t1, s1), (l2, t2, s2) = chain[i], chain[i + 1]
        if l1 == l2:
            j = i + 1
            while j + 1 < len(chain) and chain[j + 1][0] == l1 and chain[j + 1][1] == t1:
                j += 1
            s_end = chain[j][2]
            lo, hi = min(s1, s_end), max(s1, s_end)
            if hi > lo:
                route.segments.append((l1, t1, lo, hi))
            i = j
        else:
            lower = l1 if pdk.layer_index(l1) < pdk.layer_index(l2) else l2
            upper = l2 if lower == l1 else l1
            via = pdk.via_between(lower, upper)
            x, y = grid.cell_point(chain[i])
            route.vias.append((via.name, x, y))
            i += 1
    route.segments.sort()
    route.vias.sort()
    return route


def route_net(grid: RoutingGrid, net: str, cfg: RouteConfig | None = None,
              soft: bool = False, resistance: bool = False,
              mirror_axis: int | None = None, mirror_net: str | None = None,
              escape_layer: str | None = None) -> Route:
    """Connect all of a net's registered pin groups (nearest-unconnected
    first), optionally extend up to escape_layer, and commit."""
    cfg = cfg or RouteConfig()
    groups = grid.pin_groups.get(net, [])
    if not groups:
        return grid.commit(Route(net=net))
    if len(groups) < 2 and escape_layer is None:
        return grid.commit(Route(net=net))
    order = sorted(range(len(groups)),
                   key=lambda i: (min(grid.cell_point(c) for c in groups[i]), i))
    tree: set = set(groups[order[0]])
    pending = [groups[i] for i in order[1:]]
    all_route = Route(net=net)

    def bbox_dist(group) -> tuple:
        pts = [grid.cell_point(c) for c in tree]
        qts = [grid.cell_point(c) for c in group]
        dx = max(0, max(min(q[0] for q in qts) - max(p[0] for p in pts),
                        min(p[0] for p in pts) - max(q[0] for q in qts)))
        dy = max(0, max(min(q[1] for q in qts) - max(p[1] for p in pts),
                        min(p[1] for p in pts) - max(q[1] for q in qts)))
        return (dx + dy, min(qts))

    while pending:
        pending.sort(key=bbox_dist)
        group = pending.pop(0)
        _, chain = astar(grid, net, tree, set(group), cfg, soft=soft,
                         resistance=resistance, mirror_axis=mirror_axis,
                         mirror_net=mirror_net)
        part = _chain_to_route(grid, net, chain)
        all_route.segments.extend(part.segments)
        all_route.vias.extend(part.vias)
        tree |= set(group)
        tree |= set(chain)
        for cell in chain:
            grid._put(net, cell, "wire")
    if escape_layer is not None and not any(
            c[0] == escape_layer for c in tree if grid.is_own_wire(net, c)):
        _, chain = astar(grid, net, tree, set(), cfg, soft=soft,
                         resistance=resistance, goal_layer=escape_layer,
                         mirror_axis=mirror_axis, mirror_net=mirror_net)
        part = _chain_to_route(grid, net, chain)
        all_route.segments.extend(part.segments)
        all_route.vias.extend(part.vias)
        for cell in chain:
            grid._put(net, cell, "wire")
    return grid.commit(all_route)


def route_symmetric(grid: RoutingGrid, net_a: str, net_b: str, axis: int,
                    cfg: RouteConfig | None = None, soft: bool = True,
                    escape_layer: str | None = None) -> tuple[Route, Route]:
    """Route net_a with its mirror reserved atomically; net_b is the exact
    mirror. Pin mirror correspondence is a precondition."""
    cfg = cfg or RouteConfig()
    if not grid.pdk.axis_on_grid(axis):
        raise RoutingError(f"symmetry axis {axis} is off the half-pitch grid")
    for group in grid.pin_groups.get(net_a, []):
        for cell in group:
            m = _mirror_cell(grid, cell, axis)
            if m is None or not grid.is_own_wire(net_b, m):
                raise RoutingError(
                    f"pins of {net_b!r} are not the mirror of {net_a!r} at {cell}")
    route_a = route_net(grid, net_a, cfg, soft=soft, mirror_axis=axis,
                        mirror_net=net_b, escape_layer=escape_layer)
    route_b = route_a.mirrored(grid.pdk, axis, net_b)
    for lname, t, s0, s1 in route_b.segments:
        for s in range(s0, s1 + 1):
            grid._put(net_b, (lname, t, s), "wire")
    route_b = grid.commit(route_b)
    return route_a, route_b


def escape_to_layer(grid: RoutingGrid, net: str, lname: str,
                    cfg: RouteConfig | None = None) -> Route:
    """Extend a net up to a legal segment on `lname` (for pin export)."""
    cfg = cfg or RouteConfig()
    sources = {c for c, k in grid.net_cells.get(net, {}).items() if k == "wire"}
    if not sources:
        raise RoutingError(f"net {net!r} has no metal to escape from")
    _, chain = astar(grid, net, sources, set(), cfg, soft=False, goal_layer=lname)
    route = _chain_to_route(grid, net, chain)
    for cell in chain:
        grid._put(net, cell, "wire")
    return grid.commit(route)


def resistance_of(pdk: Pdk, route: Route) -> int:
    """Milliohms, recomputable from the serialized segments and vias."""
    total = 0
    for lname, _t, s0, s1 in route.segments:
        length = (s1 - s0) * pdk.stop_pitch(lname)
        total += pdk.layer(lname).unit_r * length
    for name, _x, _y in route.vias:
        total += pdk.via(name).r
    return total


def route_geometry(pdk: Pdk, route: Route) -> tuple[list, list]:
    """(wires, vias) as net-annotated rects for the layout database."""
    wires = [(route.net, lname, wire_rect(pdk, lname, t, s0, s1))
             for lname, t, s0, s1 in route.segments]
    vias = [(route.net, name, via_cut(pdk, name, x, y))
            for name, x, y in route.vias]
    return wires, vias


def route_module(grid: RoutingGrid, nets: list[NetSpec], cfg: RouteConfig | None = None,
                 axis: int | None = None, ground: str | None = None) -> dict[str, Route]:
    """Route a module's nets: symmetric pairs first, then budgeted nets by
    ascending budget, the rest by pin count; negotiated-congestion rip-up up
    to cfg.rounds; budget verification with resistance-mode rerouting."""
    cfg = cfg or RouteConfig()
    by_name = {n.name: n for n in nets}
    sym_primary = [n for n in nets if n.symmetric_with]
    sym_secondary = {n.symmetric_with for n in sym_primary}
    budgeted = [n for n in nets if n.budget_mohm is not None
                and not n.symmetric_with and n.name not in sym_secondary]
    rest = [n for n in nets if n.budget_mohm is None
            and not n.symmetric_with and n.name not in sym_secondary]
    order: list[NetSpec] = (
        sorted(sym_primary, key=lambda n: n.name)
        + sorted(budgeted, key=lambda n: (n.budget_mohm, n.name))
        + sorted(rest, key=lambda n: (-len(grid.pin_groups.get(n.name, ())), n.name)))
    if ground is not None and ground in by_name:
        order = [n for n in order if n.name != ground] + [by_name[ground]]

    routes: dict[str, Route] = {}
    shield_strips: list[Route] = []
    pending = list(order)
    for round_no in range(cfg.rounds):
        for spec in pending:
            if spec.symmetric_with:
                if axis is None:
                    raise RoutingError(f"net {spec.name!r} is symmetric but module has no axis")
                ra, rb = route_symmetric(grid, spec.name, spec.symmetric_with, axis,
                                         cfg, escape_layer=spec.escape_layer)
                routes[spec.name] = ra
                routes[spec.symmetric_with] = rb
            else:
                routes[spec.name] = route_net(grid, spec.name, cfg, soft=True,
                                              escape_layer=spec.escape_layer)
            if spec.shield:
                shield_strips += _reserve_shield(grid, routes[spec.name], ground)
        conflicts = grid.conflict_cells()
        if not conflicts:
            break
        if round_no == cfg.rounds - 1:
            cell = sorted(conflicts)[0]
            raise RoutingError(
                f"unroutable after {cfg.rounds} rounds; conflict at {cell} "
                f"between {sorted(conflicts[cell])}")
        guilty: set[str] = set()
        for cell, netset in conflicts.items():
            grid.history[cell] = grid.history.get(cell, 0) + 1
            guilty |= set(netset)
        expanded: set[str] = set()
        for name in guilty:
            for spec in order:
                if spec.name == name or spec.symmetric_with == name:
                    expanded.add(spec.name)
                    if spec.symmetric_with:
                        expanded.add(spec.symmetric_with)
        for name in sorted(expanded):
            grid.rip_up(name)
            routes.pop(name, None)
        pending = [s for s in order
                   if s.name in expanded
                   or (s.symmetric_with in expanded if s.symmetric_with else False)]

    if shield_strips:
        merged = routes.setdefault(ground, Route(net=ground))
        for strip in shield_strips:
            merged.segments.extend(strip.segments)
        merged.segments.sort()

    # budget verification (exact integer arithmetic)
    for spec in sorted([n for n in nets if n.budget_mohm is not None],
                       key=lambda n: (n.budget_mohm, n.name)):
        route = routes.get(spec.name)
        if route is None:
            continue
        r = resistance_of(grid.pdk, route)
        if r <= spec.budget_mohm:
            continue
        grid.rip_up(spec.name)
        retry = route_net(grid, spec.name, cfg, soft=False, resistance=True,
                          escape_layer=spec.escape_layer)
        r2 = resistance_of(grid.pdk, retry)
        if r2 > spec.budget_mohm:
            raise BudgetViolationError(spec.name, spec.budget_mohm, r2)
        routes[spec.name] = retry
    return routes


def _reserve_shield(grid: RoutingGrid, route: Route, ground: str | None) -> list[Route]:
    """Occupy both neighbor tracks of every segment with ground strips."""
    if ground is None:
        raise RoutingError(f"net {route.net!r} wants shielding but no ground net is designated")
    strips: list[Route] = []
    for lname, t, s0, s1 in route.segments:
        for dt in (-1, 1):
            cells = [(lname, t + dt, s) for s in range(s0, s1 + 1)]
            if all(grid.in_bounds(c) and not grid.foreign(ground, c)
                   and c not in grid.blocked for c in cells):
                seg = Route(net=ground, segments=[(lname, t + dt, s0, s1)])
                strips.append(grid.commit(seg))
                grid.pin_groups.setdefault(ground, []).append(frozenset(cells))
    return strips
