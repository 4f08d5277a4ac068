"""Hierarchical block assembly: post-order place-and-route per module.

Each subckt is assembled once (instances share the cell, which is what makes
matching constraints on instance arrays hold exactly) in reverse topological
order: primitive leaves become generated cells, child modules become their
assembled cells, the module's blocks are annealed under its constraints,
intra-module nets are routed on a grid over the placement, boundary nets are
escaped up to the module's pin layer and exported as pins.

Routing layers ladder upward with depth: a module routes on
[lowest child pin layer .. highest child pin layer + 1] and exports pins on
the top of that range.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

from . import place, primgen, route
from .annotate import Annotation, Leaf
from .layout import Cell, CellInst, Layout, Rect, cell_pin_rects
from .netlist import Netlist, instance_net_maps
from .pdk import Pdk

log = logging.getLogger(__name__)

GROUND_NAMES = ("vss", "gnd", "vssa", "avss", "0")


class AssembleError(Exception):
    pass


@dataclass
class FlowConfig:
    seed: int = 0
    variants: int = 3
    w_area: int = 1
    w_wl: int = 2
    w_penalty: int = 10**9
    restarts: int = 2
    moves_per_temp_scale: int = 60
    router: route.RouteConfig = field(default_factory=route.RouteConfig)


def _seed_for(base: int, name: str) -> int:
    digest = hashlib.sha1(name.encode()).digest()
    return base ^ int.from_bytes(digest[:4], "big")


def _snap_up(v: int, g: int) -> int:
    return -(-v // g) * g


def _leaf_spec(leaf: Leaf) -> primgen.PrimitiveSpec:
    return primgen.PrimitiveSpec(
        ptype=leaf.ptype, units=leaf.units, kind=leaf.kind, fins=leaf.fins,
        unit_value=leaf.unit_value, pattern=leaf.pattern_style)


def _variant_of(cell: Cell) -> place.Variant:
    pins = []
    for name in sorted(cell.pins):
        layer, r = cell.pins[name][0]
        pins.append((name, (r.x0 + r.x1, r.y0 + r.y1)))
    return place.Variant(w=cell.bbox.w, h=cell.bbox.h, pins=tuple(pins))


def _pin_layer(pdk: Pdk, cell: Cell) -> int:
    layers = {pdk.layer_index(layer) for shapes in cell.pins.values()
              for layer, _ in shapes}
    if not layers:
        raise AssembleError(f"cell {cell.name!r} exports no pins")
    return max(layers)


@dataclass
class _ModuleBlocks:
    blocks: dict[str, place.Block]
    variants: dict[str, list[Cell]]        # block id -> cells per variant index
    bindings: dict[str, dict[str, str]]    # block id -> pin -> local net


class Assembler:
    def __init__(self, netl: Netlist, annotation: Annotation, pdk: Pdk,
                 cfg: FlowConfig | None = None):
        self.netl = netl
        self.ann = annotation
        self.pdk = pdk
        self.cfg = cfg or FlowConfig()
        self.layout = Layout(top="")
        self.module_cells: dict[str, Cell] = {}    # subckt name -> cell
        self.rep_path: dict[str, str] = {}
        self.net_maps: dict[str, dict[str, str]] = {}
        top = annotation.tree.top
        for path, sub, net_map in instance_net_maps(netl, top):
            self.net_maps[path] = net_map
            if sub not in self.rep_path or path < self.rep_path[sub]:
                self.rep_path[sub] = path
    # -- cells ---------------------------------------------------------------

    def _primitive_cells(self, leaf: Leaf) -> list[Cell]:
        spec = _leaf_spec(leaf)
        cells = primgen.gen_variants(spec, self.pdk, self.cfg.variants)
        out = []
        for cell in cells:
            if cell.name not in self.layout.cells:
                self.layout.add_cell(cell)
            out.append(self.layout.cells[cell.name])
        return out

    def assemble(self) -> Layout:
        order = self._subckt_order()
        for sub in order:
            self.module_cells[sub] = self._assemble_module(sub)
        self.layout.top = self.module_cells[self.ann.tree.top].name
        prune_unreachable(self.layout)
        return self.layout

    def _subckt_order(self) -> list[str]:
        seen: set[str] = set()
        order: list[str] = []

        def visit(name: str):
            if name in seen:
                return
            seen.add(name)
            for inst in self.netl.subckt(name).instances:
                visit(inst.subckt)
            order.append(name)

        visit(self.ann.tree.top)
        return order

    # -- one module ------------------------------------------------------

    def _module_node(self, sub: str):
        path = self.rep_path[sub]
        return path, self.ann.tree.modules[path]

    def _local_net(self, path: str, flat_net: str) -> str:
        rev: dict[str, str] = {}
        for local in sorted(self.net_maps[path]):
            rev.setdefault(self.net_maps[path][local], local)
        if flat_net not in rev:
            raise AssembleError(f"net {flat_net!r} is not visible in module {path!r}")
        return rev[flat_net]

    def _gather_blocks(self, sub: str) -> _ModuleBlocks:
        path, node = self._module_node(sub)
        blocks: dict[str, place.Block] = {}
        variants: dict[str, list[Cell]] = {}
        bindings: dict[str, dict[str, str]] = {}
        for leaf in node.leaves:
            cells = self._primitive_cells(leaf)
            variants[leaf.id] = cells
            blocks[leaf.id] = place.Block(leaf.id, tuple(_variant_of(c) for c in cells))
            bindings[leaf.id] = {pin: self._local_net(path, net)
                                 for pin, net in leaf.bindings}
        subckt = self.netl.subckt(sub)
        for inst in subckt.instances:
            child_cell = self.module_cells[inst.subckt]
            variants[inst.name] = [child_cell]
            blocks[inst.name] = place.Block(inst.name, (_variant_of(child_cell),))
            ports = self.netl.subckt(inst.subckt).ports
            bindings[inst.name] = dict(zip(ports, inst.bindings))
        if not blocks:
            raise AssembleError(f"module {sub!r} has nothing to place")
        return _ModuleBlocks(blocks=blocks, variants=variants, bindings=bindings)

    def _module_nets(self, sub: str, mb: _ModuleBlocks) -> list[place.Net]:
        path, _ = self._module_node(sub)
        pins_by_net: dict[str, list[tuple[str, str]]] = {}
        for bid, binding in sorted(mb.bindings.items()):
            for pin, net in sorted(binding.items()):
                pins_by_net.setdefault(net, []).append((bid, pin))
        budgets_local: dict[str, int] = {}
        for flat_net, mohm in self.ann.constraints.net_budgets.items():
            try:
                budgets_local[self._local_net(path, flat_net)] = mohm
            except AssembleError:
                continue
        return [place.Net(name=n, pins=tuple(pins), budget_mohm=budgets_local.get(n))
                for n, pins in sorted(pins_by_net.items())]

    def _place_module(self, sub: str):
        path, node = self._module_node(sub)
        cs = self.ann.constraints
        mb = self._gather_blocks(sub)
        nets = self._module_nets(sub, mb)

        pairs = [(a, b) for a, b, axis in cs.module_pairs(path) if axis == "vertical"]
        selfs = [b for b in cs.module_selfs(path) if b in mb.blocks]
        pairs = [(a, b) for a, b in pairs if a in mb.blocks and b in mb.blocks]
        cons = place.PlaceConstraints(
            pairs=tuple(pairs), selfs=tuple(selfs),
            matching=tuple(tuple(g) for g in cs.module_matching(path)),
            alignment=tuple(tuple(g) for g, edge in cs.module_alignment(path)))

        grid_xy = self.pdk.placement_grid()
        halo = self.pdk.block_halo()
        acfg = place.AnnealConfig(
            seed=_seed_for(self.cfg.seed, sub), w_area=self.cfg.w_area,
            w_wl=self.cfg.w_wl, w_penalty=self.cfg.w_penalty,
            restarts=self.cfg.restarts,
            moves_per_temp_scale=self.cfg.moves_per_temp_scale,
            grid=grid_xy, halo=halo,
            min_r_per_nm=min(l.unit_r for l in self.pdk.layers))
        placement = place.anneal(mb.blocks, nets, cons, acfg)
        place.verify_symmetry(placement, pairs, selfs)
        return placement, mb, nets, pairs

    def _assemble_module(self, sub: str) -> Cell:
        placement, mb, nets, pairs = self._place_module(sub)
        return self._finish_module(sub, placement, mb, nets, pairs)

    def _finish_module(self, sub: str, placement: place.Placement,
                       mb: _ModuleBlocks, nets: list[place.Net],
                       pairs: list[tuple[str, str]],
                       route_top: bool = True) -> Cell:
        # a tightly packed placement can starve the router of crossing
        # corridors next to large children; widen the region and retry
        last_err: Exception | None = None
        for margin_mult in (1, 2, 3, 4, 6, 8):
            try:
                cell = self._route_module_once(sub, placement, mb, nets,
                                               margin_mult, route_top)
                self.layout.add_cell(cell)
                return cell
            except route.RoutingError as exc:
                last_err = exc
                log.info("module %s: routing failed with margin x%d (%s); widening",
                         sub, margin_mult, exc)
        raise AssembleError(f"module {sub!r}: routing failed at every region "
                            f"margin: {last_err}") from last_err

    def _route_module_once(self, sub: str, placement: place.Placement,
                           mb: _ModuleBlocks, nets: list[place.Net],
                           margin_mult: int, route_top: bool) -> Cell:
        pdk = self.pdk
        gx, gy = pdk.placement_grid()
        hx0, hy0 = pdk.block_halo()
        hx, hy = hx0 * margin_mult, hy0 * margin_mult
        wp, hp = placement.bbox()
        region = Rect(0, 0, _snap_up(wp + 2 * hx, 2 * gx), _snap_up(hp + 2 * hy, gy))

        cell = Cell(name=sub, bbox=region)
        pin_layers = []
        for bid, pb in sorted(placement.blocks.items()):
            child = mb.variants[bid][pb.variant]
            pin_layers.append(_pin_layer(pdk, child))
            cell.instances.append(CellInst(
                name=bid, cell=child.name, dx=pb.x + hx, dy=pb.y + hy,
                mirror=pb.mirrored,
                bindings=tuple(sorted(mb.bindings[bid].items()))))
        lo_idx = min(pin_layers)
        hi_idx = max(pin_layers) + 1
        if hi_idx >= len(pdk.layers):
            raise AssembleError(f"module {sub!r}: hierarchy exceeds the routing stack")
        layers = [pdk.layers[i].name for i in range(lo_idx, hi_idx + 1)]
        grid = route.RoutingGrid(pdk, region, layers)

        axis = placement.axes.get("sym0")
        axis = axis + hx if axis is not None else None

        # child interiors block everything up to their pin layer
        for inst in cell.instances:
            child = self.layout.cells[inst.cell]
            box = Rect(inst.dx, inst.dy, inst.dx + child.bbox.w, inst.dy + child.bbox.h)
            child_pin = _pin_layer(pdk, child)
            for li in range(lo_idx, child_pin + 1):
                lname = pdk.layers[li].name
                margin = pdk.layer(lname).end_to_end + pdk.end_overhang(lname)
                grid.block_box(lname, box, along_margin=margin)
        for inst in cell.instances:
            binding = dict(inst.bindings)
            for pin_name, shapes in cell_pin_rects(self.layout, inst).items():
                net = binding.get(pin_name)
                if net is None:
                    continue
                for layer, r in shapes:
                    grid.add_pin(net, layer, r)

        routes: dict[str, route.Route] = {}
        if route_top:
            specs = self._net_specs(sub, grid, nets, axis, layers[-1])
            ground = self._ground_net(sub)
            routes = route.route_module(grid, specs, self.cfg.router,
                                        axis=axis, ground=ground)
            self._export_pins(sub, cell, grid, routes, layers[-1])
        for name in sorted(routes):
            wires, vias = route.route_geometry(pdk, routes[name])
            cell.wires.extend(wires)
            cell.vias.extend(vias)
        return cell

    def _net_specs(self, sub: str, grid: route.RoutingGrid,
                   nets: list[place.Net], axis: int | None,
                   top_layer: str) -> list[route.NetSpec]:
        path, _ = self._module_node(sub)
        cs = self.ann.constraints
        ports = set(self.netl.subckt(sub).ports)
        shields_local: set[str] = set()
        for flat_net in cs.shielded_nets:
            try:
                shields_local.add(self._local_net(path, flat_net))
            except AssembleError:
                pass
        routable = [n for n in nets if len(grid.pin_groups.get(n.name, ())) >= 1]
        sym_partner = self._symmetric_net_pairs(grid, routable, axis)
        specs = []
        for n in routable:
            if n.name in sym_partner.values():
                continue     # secondary of a pair; emitted with its primary
            partner = sym_partner.get(n.name)
            wants_escape = n.name in ports or (partner in ports if partner else False)
            specs.append(route.NetSpec(
                name=n.name, budget_mohm=n.budget_mohm,
                shield=n.name in shields_local,
                symmetric_with=partner,
                escape_layer=top_layer if wants_escape else None))
        return specs

    def _symmetric_net_pairs(self, grid: route.RoutingGrid,
                             nets: list[place.Net], axis: int | None) -> dict[str, str]:
        if axis is None:
            return {}
        shapes: dict[str, tuple] = {}
        for n in nets:
            groups = grid.pin_groups.get(n.name, ())
            cells = sorted(c for g in groups for c in g)
            if not cells:
                continue
            shapes[n.name] = tuple(cells)
        out: dict[str, str] = {}
        names = sorted(shapes)
        for i, a in enumerate(names):
            if a in out or a in out.values():
                continue
            mirrored = []
            ok = True
            for c in shapes[a]:
                m = route._mirror_cell(grid, c, axis)
                if m is None:
                    ok = False
                    break
                mirrored.append(m)
            if not ok:
                continue
            mirrored_t = tuple(sorted(mirrored))
            if mirrored_t == shapes[a]:
                continue     # self-mirrored net; routed normally
            for b in names[i + 1:]:
                if b in out or b in out.values():
                    continue
                if shapes.get(b) == mirrored_t:
                    out[a] = b
                    break
        return out

    def _ground_net(self, sub: str) -> str | None:
        for port in self.netl.subckt(sub).ports:
            if port in GROUND_NAMES:
                return port
        return None

    def _export_pins(self, sub: str, cell: Cell, grid: route.RoutingGrid,
                     routes: dict[str, route.Route], top_layer: str) -> None:
        from .geom import wire_rect
        for port in self.netl.subckt(sub).ports:
            if port not in grid.pin_groups:
                log.warning("module %s: port %s has no connection; no pin exported",
                            sub, port)
                continue
            segs = [s for s in routes.get(port, route.Route(net=port)).segments
                    if s[0] == top_layer]
            if not segs:
                # the net's existing metal may already sit on the pin layer
                segs = [(lname, t, s, s) for (lname, t, s), kind
                        in sorted(grid.net_cells.get(port, {}).items())
                        if kind == "wire" and lname == top_layer]
                segs = _cells_to_spans(segs)
            if not segs:
                raise AssembleError(f"module {sub!r}: cannot export pin {port!r}")
            best = max(segs, key=lambda s: (s[3] - s[2], -s[1], -s[2]))
            lname, t, s0, s1 = best
            cell.add_pin(port, lname, wire_rect(self.pdk, lname, t, s0, s1))


def _cells_to_spans(cells: list[tuple[str, int, int, int]]) -> list[tuple[str, int, int, int]]:
    """Merge sorted single-cell spans into maximal contiguous spans."""
    out: list[list] = []
    for lname, t, s0, s1 in cells:
        if out and out[-1][0] == lname and out[-1][1] == t and s0 <= out[-1][3] + 1:
            out[-1][3] = max(out[-1][3], s1)
        else:
            out.append([lname, t, s0, s1])
    return [tuple(x) for x in out if x[3] > x[2]]


def assemble_design(netl: Netlist, annotation: Annotation, pdk: Pdk,
                    cfg: FlowConfig | None = None) -> Layout:
    return Assembler(netl, annotation, pdk, cfg).assemble()


# ---------------------------------------------------------------------------
# stage split: place (everything except top-module routing) / route (finish)

def place_design(netl: Netlist, annotation: Annotation, pdk: Pdk,
                 cfg: FlowConfig | None = None) -> tuple[Layout, dict]:
    """All modules below the top assembled fully; the top placed only.

    Returns the partial layout plus a resume document for route_design.
    """
    asm = Assembler(netl, annotation, pdk, cfg)
    order = asm._subckt_order()
    for sub in order[:-1]:
        asm.module_cells[sub] = asm._assemble_module(sub)
    top = order[-1]
    placement, mb, nets, pairs = asm._place_module(top)
    resume = {
        "top_sub": top,
        "blocks": {bid: [pb.x, pb.y, pb.w, pb.h, pb.variant, pb.mirrored]
                   for bid, pb in sorted(placement.blocks.items())},
        "axes": dict(sorted(placement.axes.items())),
        "block_cells": {bid: [c.name for c in mb.variants[bid]]
                        for bid in sorted(mb.variants)},
    }
    asm.layout.top = ""
    return asm.layout, resume


def route_design(netl: Netlist, annotation: Annotation, pdk: Pdk,
                 layout: Layout, resume: dict,
                 cfg: FlowConfig | None = None) -> Layout:
    """Finish a place_design result: route the top module and export pins."""
    asm = Assembler(netl, annotation, pdk, cfg)
    asm.layout = layout
    subckt_names = {s.name for s in netl.subckts}
    for name, cell in layout.cells.items():
        if name in subckt_names:
            asm.module_cells[name] = cell
    top = resume["top_sub"]
    placement = place.Placement(
        blocks={bid: place.PlacedBlock(x=v[0], y=v[1], w=v[2], h=v[3],
                                       variant=v[4], mirrored=bool(v[5]))
                for bid, v in resume["blocks"].items()},
        axes={k: int(v) for k, v in resume["axes"].items()})
    mb = asm._gather_blocks(top)
    nets = asm._module_nets(top, mb)
    path, _ = asm._module_node(top)
    pairs = [(a, b) for a, b, axis in asm.ann.constraints.module_pairs(path)
             if axis == "vertical" and a in mb.blocks and b in mb.blocks]
    cell = asm._finish_module(top, placement, mb, nets, pairs)
    asm.layout.top = cell.name
    prune_unreachable(asm.layout)
    return asm.layout


def prune_unreachable(layout: Layout) -> None:
    """Drop cells not reachable from the top (losing placement variants)."""
    keep: set[str] = set()

    def visit(name: str):
        if name in keep:
            return
        keep.add(name)
        for inst in layout.cells[name].instances:
            visit(inst.cell)

    if layout.top in layout.cells:
        visit(layout.top)
        for name in sorted(set(layout.cells) - keep):
            del layout.cells[name]
