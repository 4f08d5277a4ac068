"""Layout database: cells, instances, flattening, canonical JSON.

All coordinates are integer nanometers. A cell owns bare rects (FEOL and
other non-routed shapes), wires and via cuts produced by routing (drawn
geometry, net-annotated), named pins, and placed child instances. Mirroring
is only about a child's own vertical centerline, so an instance's bounding
box is independent of its mirror flag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple


class LayoutError(Exception):
    pass


class Rect(NamedTuple):
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def w(self) -> int:
        return self.x1 - self.x0

    @property
    def h(self) -> int:
        return self.y1 - self.y0

    def translated(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def mirrored_x(self, two_c: int) -> "Rect":
        """Reflect about the vertical line x = two_c / 2."""
        return Rect(two_c - self.x1, self.y0, two_c - self.x0, self.y1)

    def overlaps(self, other: "Rect") -> bool:
        return (self.x0 < other.x1 and other.x0 < self.x1 and
                self.y0 < other.y1 and other.y0 < self.y1)

    def contains(self, other: "Rect") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0 and
                self.x1 >= other.x1 and self.y1 >= other.y1)

    def union(self, other: "Rect") -> "Rect":
        return Rect(min(self.x0, other.x0), min(self.y0, other.y0),
                    max(self.x1, other.x1), max(self.y1, other.y1))


def rect(x0: int, y0: int, x1: int, y1: int) -> Rect:
    if x1 <= x0 or y1 <= y0:
        raise LayoutError(f"degenerate rect ({x0},{y0},{x1},{y1})")
    return Rect(x0, y0, x1, y1)


@dataclass(frozen=True)
class CellInst:
    name: str
    cell: str
    dx: int
    dy: int
    mirror: bool = False
    bindings: tuple[tuple[str, str], ...] = ()   # child net -> parent net

    def binding_map(self) -> dict[str, str]:
        return dict(self.bindings)


@dataclass
class Cell:
    name: str
    bbox: Rect
    rects: list[tuple[str, Rect, str | None]] = field(default_factory=list)
    wires: list[tuple[str, str, Rect]] = field(default_factory=list)   # (net, layer, rect)
    vias: list[tuple[str, str, Rect]] = field(default_factory=list)    # (net, via layer, cut)
    pins: dict[str, list[tuple[str, Rect]]] = field(default_factory=dict)
    instances: list[CellInst] = field(default_factory=list)

    def add_pin(self, name: str, layer: str, r: Rect) -> None:
        self.pins.setdefault(name, []).append((layer, r))

    def geometry_count(self) -> int:
        return len(self.rects) + len(self.wires) + len(self.vias)


@dataclass
class Layout:
    top: str
    cells: dict[str, Cell] = field(default_factory=dict)

    def cell(self, name: str | None = None) -> Cell:
        name = name or self.top
        if name not in self.cells:
            raise LayoutError(f"no cell named {name!r}")
        return self.cells[name]

    def add_cell(self, cell: Cell) -> Cell:
        if cell.name in self.cells:
            raise LayoutError(f"duplicate cell {cell.name!r}")
        self.cells[cell.name] = cell
        return cell


def flatten_layout(layout: Layout, top: str | None = None) -> list[tuple[str, Rect, str | None]]:
    """All drawn geometry of `top` with transforms applied and nets resolved.

    Child nets bound to a parent net take the parent name; unbound child nets
    get an instance-path prefix. Geometry count is conserved: one output rect
    per rect/wire/via in the expanded instance tree.
    """
    out: list[tuple[str, Rect, str | None]] = []

    def emit(cell: Cell, dx: int, dy: int, mirror: bool, two_c: int,
             net_map: dict[str, str], prefix: str):
        def xf(r: Rect) -> Rect:
            if mirror:
                r = r.mirrored_x(two_c)
            return r.translated(dx, dy)

        def resolve(net: str | None) -> str | None:
            if net is None:
                return None
            return net_map.get(net, prefix + net)

        for layer, r, net in cell.rects:
            out.append((layer, xf(r), resolve(net)))
        for net, layer, r in cell.wires:
            out.append((layer, xf(r), resolve(net)))
        for net, layer, r in cell.vias:
            out.append((layer, xf(r), resolve(net)))
        for inst in cell.instances:
            child = layout.cell(inst.cell)
            sub_map = {cnet: resolve(pnet) for cnet, pnet in inst.bindings}
            # compose the outer transform with the instance placement:
            # mirrored outer flips the instance's own mirror flag
            cb = child.bbox
            if mirror:
                child_dx = dx + two_c - inst.dx - (cb.x0 + cb.x1)
                c_mirror = not inst.mirror
            else:
                child_dx = dx + inst.dx
                c_mirror = inst.mirror
            emit(child, child_dx, dy + inst.dy, c_mirror, cb.x0 + cb.x1,
                 sub_map, prefix + inst.name + "/")

    root = layout.cell(top)
    emit(root, 0, 0, False, 0, {}, "")
    return out


def cell_pin_rects(layout: Layout, inst: CellInst) -> dict[str, list[tuple[str, Rect]]]:
    """Pin geometry of one placed instance, in parent coordinates."""
    child = layout.cell(inst.cell)
    two_c = child.bbox.x0 + child.bbox.x1
    out: dict[str, list[tuple[str, Rect]]] = {}
    for pin_name, shapes in child.pins.items():
        placed = []
        for layer, r in shapes:
            if inst.mirror:
                r = r.mirrored_x(two_c)
            placed.append((layer, r.translated(inst.dx, inst.dy)))
        out[pin_name] = placed
    return out


# ---------------------------------------------------------------------------
# canonical JSON

FORMAT = "nl2gds-layout-1"


def _rect_json(r: Rect) -> list[int]:
    return [r.x0, r.y0, r.x1, r.y1]


def emit_json(layout: Layout) -> str:
    """Canonical serialization: sorted keys and sorted geometry, byte-stable."""
    cells = {}
    for name in sorted(layout.cells):
        c = layout.cells[name]
        cells[name] = {
            "bbox": _rect_json(c.bbox),
            "rects": sorted([lay, _rect_json(r), net] for lay, r, net in c.rects),
            "wires": sorted([net, lay, _rect_json(r)] for net, lay, r in c.wires),
            "vias": sorted([net, lay, _rect_json(r)] for net, lay, r in c.vias),
            "pins": {p: sorted([lay, _rect_json(r)] for lay, r in shapes)
                     for p, shapes in sorted(c.pins.items())},
            "instances": sorted(
                ([i.name, i.cell, i.dx, i.dy, i.mirror, sorted(map(list, i.bindings))]
                 for i in c.instances)),
        }
    doc = {"format": FORMAT, "top": layout.top, "cells": cells}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def _load_rect(obj, path: str) -> Rect:
    if (not isinstance(obj, list) or len(obj) != 4
            or not all(isinstance(v, int) for v in obj)):
        raise LayoutError(f"{path}: expected [x0,y0,x1,y1] integers")
    return Rect(*obj)


def load_json(text: str, require_top: bool = True) -> Layout:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LayoutError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise LayoutError(f"format: expected {FORMAT!r}")
    if not isinstance(doc.get("top"), str):
        raise LayoutError("top: expected string")
    cells_obj = doc.get("cells")
    if not isinstance(cells_obj, dict):
        raise LayoutError("cells: expected object")
    layout = Layout(top=doc["top"])
    for name, cobj in cells_obj.items():
        path = f"cells[{name}]"
        if not isinstance(cobj, dict):
            raise LayoutError(f"{path}: expected object")
        cell = Cell(name=name, bbox=_load_rect(cobj.get("bbox"), f"{path}.bbox"))
        for i, item in enumerate(cobj.get("rects", [])):
            if not isinstance(item, list) or len(item) != 3:
                raise LayoutError(f"{path}.rects[{i}]: expected [layer, rect, net]")
            lay, robj, net = item
            if net is not None and not isinstance(net, str):
                raise LayoutError(f"{path}.rects[{i}]: net must be string or null")
            cell.rects.append((lay, _load_rect(robj, f"{path}.rects[{i}]"), net))
        for kind in ("wires", "vias"):
            for i, item in enumerate(cobj.get(kind, [])):
                if not isinstance(item, list) or len(item) != 3:
                    raise LayoutError(f"{path}.{kind}[{i}]: expected [net, layer, rect]")
                net, lay, robj = item
                getattr(cell, kind).append((net, lay, _load_rect(robj, f"{path}.{kind}[{i}]")))
        pins_obj = cobj.get("pins", {})
        if not isinstance(pins_obj, dict):
            raise LayoutError(f"{path}.pins: expected object")
        for pname, shapes in pins_obj.items():
            cell.pins[pname] = [(lay, _load_rect(robj, f"{path}.pins[{pname}]"))
                                for lay, robj in shapes]
        for i, item in enumerate(cobj.get("instances", [])):
            if not isinstance(item, list) or len(item) != 6:
                raise LayoutError(f"{path}.instances[{i}]: expected 6 fields")
            iname, ref, dx, dy, mirror, bindings = item
            cell.instances.append(CellInst(
                iname, ref, dx, dy, bool(mirror),
                tuple((a, b) for a, b in bindings)))
        layout.cells[name] = cell
    for cell in layout.cells.values():
        for inst in cell.instances:
            if inst.cell not in layout.cells:
                raise LayoutError(f"cells[{cell.name}]: instance {inst.name!r} "
                                  f"references missing cell {inst.cell!r}")
    if require_top and layout.top not in layout.cells:
        raise LayoutError(f"top cell {layout.top!r} not present")
    return layout
