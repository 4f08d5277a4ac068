"""GDSII stream emission and a small clean-room reader.

The writer emits HEADER/BGNLIB/LIBNAME/UNITS, one BGNSTR..ENDSTR per cell
(BOUNDARY elements for geometry, SREF for placed children), ENDLIB. Records
are big-endian with the standard 4-byte record headers; reals use the
excess-64 base-16 format. Database unit is 1 nm (user unit 1 um). Library
and structure timestamps are fixed constants so output is byte-deterministic.

The reader at the bottom is written independently against the public stream
format description (record walk, not a mirror of the writer's tables) and is
used as the re-import oracle where no third-party reader is installed.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

from .layout import Layout, LayoutError, Rect

# record types used by the writer
_HEADER = 0x00
_BGNLIB = 0x01
_LIBNAME = 0x02
_UNITS = 0x03
_ENDLIB = 0x04
_BGNSTR = 0x05
_STRNAME = 0x06
_ENDSTR = 0x07
_BOUNDARY = 0x08
_SREF = 0x0A
_LAYER = 0x0D
_DATATYPE = 0x0E
_XY = 0x10
_ENDEL = 0x11
_SNAME = 0x12
_STRANS = 0x1A
_ANGLE = 0x1C

_TIMESTAMP = (2020, 1, 1, 0, 0, 0)    # fixed: output must be reproducible

# (gds layer, datatype) for the abstract layers the generators draw
DEFAULT_LAYER_MAP: dict[str, tuple[int, int]] = {
    "active": (1, 0),
    "poly": (5, 0),
    "contact": (8, 0),
    "resbody": (20, 0),
    "capbody": (21, 0),
    "m1": (31, 0),
    "v1": (32, 0),
    "m2": (33, 0),
    "v2": (34, 0),
    "m3": (35, 0),
    "v3": (36, 0),
    "m4": (37, 0),
    "v4": (38, 0),
    "m5": (39, 0),
}


class GdsError(Exception):
    pass


def _real8(value: float) -> bytes:
    """IEEE float -> 8-byte excess-64 base-16 real."""
    if value == 0:
        return b"\x00" * 8
    sign = 0
    if value < 0:
        sign = 0x80
        value = -value
    exponent = 0
    while value >= 1:
        value /= 16.0
        exponent += 1
    while value < 1 / 16.0:
        value *= 16.0
        exponent -= 1
    mantissa = int(value * (1 << 56))
    return struct.pack(">B", sign | (exponent + 64)) + mantissa.to_bytes(7, "big")


def _record(rtype: int, dtype: int, payload: bytes = b"") -> bytes:
    return struct.pack(">HBB", len(payload) + 4, rtype, dtype) + payload


def _ascii(rtype: int, text: str) -> bytes:
    data = text.encode("ascii")
    if len(data) % 2:
        data += b"\x00"
    return _record(rtype, 0x06, data)


def _int2(rtype: int, *values: int) -> bytes:
    return _record(rtype, 0x02, struct.pack(f">{len(values)}h", *values))


def _int4(rtype: int, *values: int) -> bytes:
    return _record(rtype, 0x03, struct.pack(f">{len(values)}l", *values))


def gds_cell_name(name: str) -> str:
    """Sanitize to the GDS identifier alphabet."""
    return re.sub(r"[^A-Za-z0-9_$?]", "_", name)[:32] or "CELL"


def _emission_order(layout: Layout) -> list[str]:
    """Children before parents (SREF targets must exist), stable order."""
    order: list[str] = []
    seen: set[str] = set()

    def visit(name: str):
        if name in seen:
            return
        seen.add(name)
        for inst in layout.cell(name).instances:
            visit(inst.cell)
        order.append(name)

    for name in sorted(layout.cells):
        visit(name)
    return order


def emit_gdsii(layout: Layout, layer_map: dict[str, tuple[int, int]] | None = None,
               lib_name: str = "NL2GDS") -> bytes:
    """Serialize a layout to a GDSII stream. Raises GdsError on unmapped layers."""
    layer_map = dict(DEFAULT_LAYER_MAP if layer_map is None else layer_map)
    names: dict[str, str] = {}
    for cell_name in sorted(layout.cells):
        base = gds_cell_name(cell_name)
        candidate, k = base, 1
        while candidate in names.values():
            candidate, k = f"{base[:28]}_{k}", k + 1
        names[cell_name] = candidate

    def map_layer(layer: str) -> tuple[int, int]:
        if layer not in layer_map:
            raise GdsError(f"layer {layer!r} has no (gds layer, datatype) mapping")
        return layer_map[layer]

    out = bytearray()
    out += _int2(_HEADER, 600)
    out += _int2(_BGNLIB, *(_TIMESTAMP * 2))
    out += _ascii(_LIBNAME, lib_name)
    out += _record(_UNITS, 0x05, _real8(1e-3) + _real8(1e-9))

    for cell_name in _emission_order(layout):
        cell = layout.cell(cell_name)
        out += _int2(_BGNSTR, *(_TIMESTAMP * 2))
        out += _ascii(_STRNAME, names[cell_name])
        shapes = ([(lay, r) for lay, r, _ in cell.rects]
                  + [(lay, r) for _, lay, r in cell.wires]
                  + [(lay, r) for _, lay, r in cell.vias])
        for lay, r in sorted(shapes):
            gl, dt = map_layer(lay)
            out += _record(_BOUNDARY, 0x00)
            out += _int2(_LAYER, gl)
            out += _int2(_DATATYPE, dt)
            out += _int4(_XY, r.x0, r.y0, r.x1, r.y0, r.x1, r.y1, r.x0, r.y1, r.x0, r.y0)
            out += _record(_ENDEL, 0x00)
        for inst in sorted(cell.instances, key=lambda i: i.name):
            child = layout.cell(inst.cell)
            out += _record(_SREF, 0x00)
            out += _ascii(_SNAME, names[inst.cell])
            if inst.mirror:
                out += _record(_STRANS, 0x01, struct.pack(">H", 0x8000))
                out += _record(_ANGLE, 0x05, _real8(180.0))
                ox = inst.dx + child.bbox.x0 + child.bbox.x1
            else:
                ox = inst.dx
            out += _int4(_XY, ox, inst.dy)
            out += _record(_ENDEL, 0x00)
        out += _record(_ENDSTR, 0x00)
    out += _record(_ENDLIB, 0x00)
    return bytes(out)


def write_gds(layout: Layout, path, layer_map=None, lib_name: str = "NL2GDS") -> None:
    data = emit_gdsii(layout, layer_map, lib_name)
    with open(path, "wb") as fh:
        fh.write(data)


# ---------------------------------------------------------------------------
# independent reader


@dataclass
class GdsBoundary:
    layer: int
    datatype: int
    points: list[tuple[int, int]]


@dataclass
class GdsRef:
    target: str
    x: int
    y: int
    reflect: bool = False
    angle: float = 0.0


@dataclass
class GdsStruct:
    name: str
    boundaries: list[GdsBoundary] = field(default_factory=list)
    refs: list[GdsRef] = field(default_factory=list)


@dataclass
class GdsLib:
    name: str
    user_unit: float
    meter_unit: float
    structs: dict[str, GdsStruct] = field(default_factory=dict)

    def top_structs(self) -> list[str]:
        referenced = {r.target for s in self.structs.values() for r in s.refs}
        return [n for n in self.structs if n not in referenced]


def _read_real8(data: bytes) -> float:
    if data == b"\x00" * 8:
        return 0.0
    sign = -1.0 if data[0] & 0x80 else 1.0
    exponent = (data[0] & 0x7F) - 64
    mantissa = int.from_bytes(data[1:8], "big") / float(1 << 56)
    return sign * mantissa * (16.0 ** exponent)


def read_gds(data: bytes) -> GdsLib:
    """Walk the record stream and rebuild the structure table."""
    pos = 0
    lib: GdsLib | None = None
    cur: GdsStruct | None = None
    element: str | None = None
    el_layer = el_dtype = 0
    el_points: list[tuple[int, int]] = []
    el_sname = ""
    el_reflect = False
    el_angle = 0.0
    el_xy: tuple[int, int] = (0, 0)

    while pos + 4 <= len(data):
        size, rtype, dtype = struct.unpack(">HBB", data[pos:pos + 4])
        if size < 4:
            raise GdsError(f"record at byte {pos}: bad size {size}")
        payload = data[pos + 4:pos + size]
        pos += size

        if rtype == 0x02:       # LIBNAME
            lib = GdsLib(payload.rstrip(b"\x00").decode("ascii"), 0.0, 0.0)
        elif rtype == 0x03:     # UNITS
            if lib is None:
                raise GdsError("UNITS before LIBNAME")
            lib.user_unit = _read_real8(payload[:8])
            lib.meter_unit = _read_real8(payload[8:16])
        elif rtype == 0x06:     # STRNAME
            cur = GdsStruct(payload.rstrip(b"\x00").decode("ascii"))
            if lib is None:
                raise GdsError("STRNAME before LIBNAME")
            lib.structs[cur.name] = cur
        elif rtype == 0x07:     # ENDSTR
            cur = None
        elif rtype == 0x08:     # BOUNDARY
            element, el_points, el_layer, el_dtype = "boundary", [], 0, 0
        elif rtype == 0x0A:     # SREF
            element, el_sname, el_reflect, el_angle, el_xy = "sref", "", False, 0.0, (0, 0)
        elif rtype == 0x0D:     # LAYER
            el_layer = struct.unpack(">h", payload[:2])[0]
        elif rtype == 0x0E:     # DATATYPE
            el_dtype = struct.unpack(">h", payload[:2])[0]
        elif rtype == 0x10:     # XY
            count = len(payload) // 4
            vals = struct.unpack(f">{count}l", payload)
            pts = list(zip(vals[0::2], vals[1::2]))
            if element == "sref":
                el_xy = pts[0]
            else:
                el_points = pts
        elif rtype == 0x12:     # SNAME
            el_sname = payload.rstrip(b"\x00").decode("ascii")
        elif rtype == 0x1A:     # STRANS
            el_reflect = bool(struct.unpack(">H", payload[:2])[0] & 0x8000)
        elif rtype == 0x1C:     # ANGLE
            el_angle = _read_real8(payload[:8])
        elif rtype == 0x11:     # ENDEL
            if cur is None:
                raise GdsError("element outside a structure")
            if element == "boundary":
                cur.boundaries.append(GdsBoundary(el_layer, el_dtype, el_points))
            elif element == "sref":
                cur.refs.append(GdsRef(el_sname, el_xy[0], el_xy[1], el_reflect, el_angle))
            element = None
        elif rtype == 0x04:     # ENDLIB
            break
    if lib is None:
        raise GdsError("stream has no LIBNAME record")
    return lib


def _apply_ref(point: tuple[int, int], ref: GdsRef) -> tuple[int, int]:
    x, y = point
    if ref.reflect:
        y = -y
    quarter = int(round(ref.angle / 90.0)) % 4
    for _ in range(quarter):
        x, y = -y, x
    return x + ref.x, y + ref.y


def gds_rects(lib: GdsLib, top: str | None = None) -> list[tuple[int, int, Rect]]:
    """Flatten to (gds layer, datatype, rect); boundaries must be axis-aligned boxes."""
    tops = [top] if top else lib.top_structs()
    out: list[tuple[int, int, Rect]] = []

    def emit(name: str, transform: list[GdsRef]):
        if name not in lib.structs:
            raise GdsError(f"SREF target {name!r} missing")
        st = lib.structs[name]
        for b in st.boundaries:
            pts = b.points
            if len(pts) == 5 and pts[0] == pts[-1]:
                pts = pts[:-1]
            if len(pts) != 4:
                raise GdsError(f"{name}: boundary with {len(b.points)} points is not a box")
            moved = pts
            for ref in transform:
                moved = [_apply_ref(p, ref) for p in moved]
            xs = sorted(p[0] for p in moved)
            ys = sorted(p[1] for p in moved)
            if xs[0] == xs[1] and xs[2] == xs[3] and ys[0] == ys[1] and ys[2] == ys[3]:
                out.append((b.layer, b.datatype, Rect(xs[0], ys[0], xs[3], ys[3])))
            else:
                raise GdsError(f"{name}: boundary is not axis-aligned")
        for r in st.refs:
            emit(r.target, [r] + transform)

    for t in tops:
        emit(t, [])
    return out
