"""Parameterized primitive layout generation.

Five primitive types: single_mos, diff_pair, current_mirror, cap_array,
res_array. A primitive is a row (or two, for capacitor arrays) of unit
cells tiled per a placement pattern, with internal connections drawn on the
two lowest routing layers: one vertical stub per unit terminal spanning the
cell height, one horizontal strap row per net, and a via wherever a stub
crosses its net's strap. Pins are the strap rects.

Unit cells never share diffusion; an interdigitated pair tiles mirrored
units on the right half so the whole cell is mirror-symmetric about its
vertical centerline. All dimensions land on the Pdk grids by construction;
the DRC checker is still run on every emitted cell in the test suite rather
than trusted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .geom import via_cut, wire_rect
from .layout import Cell, Rect
from .netlist import DeviceKind, MOS_KINDS
from .pdk import Pdk, VERTICAL


class GeneratorError(Exception):
    pass


MOS_TYPES = ("single_mos", "diff_pair", "current_mirror")
PRIMITIVE_TYPES = MOS_TYPES + ("cap_array", "res_array")

INTERDIGITATED = "interdigitated"
COMMON_CENTROID = "common_centroid"
PLAIN = "plain"

# formal pin name per (primitive type, device, role)
_MOS_NETS = {
    ("single_mos", 0): {"source": "s", "gate": "g", "drain": "d", "bulk": "b"},
    ("diff_pair", 0): {"source": "com", "gate": "ga", "drain": "da", "bulk": "bk"},
    ("diff_pair", 1): {"source": "com", "gate": "gb", "drain": "db", "bulk": "bk"},
    ("current_mirror", 0): {"source": "com", "gate": "inref", "drain": "inref", "bulk": "bk"},
    ("current_mirror", 1): {"source": "com", "gate": "inref", "drain": "out", "bulk": "bk"},
}

_STRAP_ORDER = {
    "single_mos": ("s", "g", "d", "b"),
    "diff_pair": ("com", "ga", "gb", "da", "db", "bk"),
    "current_mirror": ("com", "inref", "out", "bk"),
}


@dataclass(frozen=True)
class PrimitiveSpec:
    ptype: str
    units: tuple[int, ...]                   # units per device
    kind: DeviceKind | None = None           # MOS flavor for mos types
    fins: int = 1                            # fins per unit (MOS)
    unit_value: Fraction | None = None       # unit C or R for arrays
    pattern: str = INTERDIGITATED
    aspect: float = 1.0

    def __post_init__(self):
        if self.ptype not in PRIMITIVE_TYPES:
            raise GeneratorError(f"unknown primitive type {self.ptype!r}")
        if not self.units or any(u < 1 for u in self.units):
            raise GeneratorError("every device needs n_units >= 1")
        if self.ptype in MOS_TYPES and self.kind not in MOS_KINDS:
            raise GeneratorError(f"{self.ptype} needs an NMOS/PMOS kind")
        want = {"single_mos": 1, "diff_pair": 2, "current_mirror": 2}.get(self.ptype)
        if want is not None and len(self.units) != want:
            raise GeneratorError(f"{self.ptype} takes {want} device(s), got {len(self.units)}")
        if self.pattern == COMMON_CENTROID and len(self.units) == 2 \
                and sum(self.units) % 2:
            raise GeneratorError("common_centroid needs an even total unit count")

    def pin_names(self) -> tuple[str, ...]:
        if self.ptype in MOS_TYPES:
            order = _STRAP_ORDER[self.ptype]
            return order
        if self.ptype == "cap_array":
            return ("top",) + tuple(f"b{i}" for i in range(len(self.units)))
        return tuple(x for i in range(len(self.units)) for x in (f"p{i}", f"m{i}"))


# ---------------------------------------------------------------------------
# placement patterns

def _interleave(n_a: int, n_b: int) -> str:
    """Proportional merge; exact-rational keys keep it deterministic."""
    keys = [(Fraction(2 * j + 1, 2 * n_a), 0, "A") for j in range(n_a)]
    keys += [(Fraction(2 * j + 1, 2 * n_b), 1, "B") for j in range(n_b)]
    return "".join(ch for _, _, ch in sorted(keys))


def gen_pattern(n_a: int, n_b: int, pattern: str):
    """Unit placement for a two-device primitive.

    interdigitated returns a string ('ABBA' for 2+2); common_centroid
    returns two rows with each device's unit centroid exactly at the cell
    center (row2 is row1 with roles swapped).
    """
    if n_a < 1 or n_b < 1:
        raise GeneratorError("pattern needs at least one unit per device")
    if pattern == INTERDIGITATED:
        if n_a == n_b:
            if n_a % 2 == 0:
                return "ABBA" * (n_a // 2)
            return "AB" * n_a
        return _interleave(n_a, n_b)
    if pattern == COMMON_CENTROID:
        if n_a != n_b:
            raise GeneratorError(
                f"common_centroid needs equal unit counts, got {n_a}/{n_b}")
        if n_a % 2:
            raise GeneratorError(
                f"common_centroid with {n_a} units per device cannot balance two rows")
        row1 = gen_pattern(n_a // 2, n_a // 2, INTERDIGITATED)
        swap = {"A": "B", "B": "A"}
        return [row1, "".join(swap[c] for c in row1)]
    if pattern == PLAIN:
        return "A" * n_a + "B" * n_b
    raise GeneratorError(f"unknown pattern {pattern!r}")


def cc_arrangement(units: tuple[int, ...]) -> list[list[int]]:
    """Two-row common-centroid arrangement for any device count.

    Cells are handed out in point-symmetric pairs ordered center-out, so any
    device with an even unit count lands with exactly zero centroid error;
    odd-count devices keep one near-center single (half-pitch error bound).
    -1 marks unused filler cells.
    """
    total = sum(units)
    cols = -(-total // 2)
    grid = [[-1] * cols for _ in range(2)]
    pair_order = sorted(range(cols), key=lambda c: (abs(2 * c - (cols - 1)), c))
    pairs = [((0, c), (1, cols - 1 - c)) for c in pair_order]
    nxt = 0

    odd_devs = [i for i, u in enumerate(units) if u % 2]
    for s1, s2 in zip(odd_devs[0::2], odd_devs[1::2]):
        (r1, c1), (r2, c2) = pairs[nxt]
        nxt += 1
        grid[r1][c1], grid[r2][c2] = s1, s2
    if len(odd_devs) % 2:
        (r1, c1), _ = pairs[nxt]
        nxt += 1
        grid[r1][c1] = odd_devs[-1]

    for dev in sorted(range(len(units)), key=lambda i: (-units[i], i)):
        for _ in range(units[dev] // 2):
            if nxt >= len(pairs):
                raise GeneratorError("arrangement overflow")
            (r1, c1), (r2, c2) = pairs[nxt]
            nxt += 1
            grid[r1][c1], grid[r2][c2] = dev, dev
    return grid


def centroid_error(grid: list[list[int]], device: int) -> tuple[Fraction, Fraction]:
    """Signed (x, y) centroid offset from the grid center, in unit pitches."""
    cells = [(c, r) for r, row in enumerate(grid) for c, d in enumerate(row) if d == device]
    if not cells:
        raise GeneratorError(f"device {device} absent from arrangement")
    cx = Fraction(sum(c for c, _ in cells), len(cells))
    cy = Fraction(sum(r for _, r in cells), len(cells))
    return cx - Fraction(len(grid[0]) - 1, 2), cy - Fraction(len(grid) - 1, 2)


# ---------------------------------------------------------------------------
# geometry scaffolding shared by the generators

class _Frame:
    """Tracks/rows bookkeeping for one primitive cell."""

    def __init__(self, pdk: Pdk, n_tracks: int, strap_nets: list[str]):
        lo, hi = pdk.layers[0], pdk.layers[1]
        self.v_layer, self.h_layer = (lo.name, hi.name) if lo.direction == VERTICAL \
            else (hi.name, lo.name)
        for lname in (self.v_layer, self.h_layer):
            rules = pdk.layer(lname)
            if rules.offset * 2 != rules.pitch:
                raise GeneratorError(
                    f"generator requires Offset == Pitch/2 on {lname} "
                    f"(got {rules.offset}/{rules.pitch})")
        self.pdk = pdk
        self.via = pdk.via_between(pdk.layers[0].name, pdk.layers[1].name).name
        # even track count keeps cell centers on whole placement-grid points,
        # which symmetric-group axes rely on
        self.n_tracks = n_tracks + (n_tracks & 1)
        self.strap_nets = strap_nets
        self.strap_row = {net: i for i, net in enumerate(strap_nets)}
        self.stubs: dict[int, str] = {}          # track -> net
        self.min_strap_run = pdk.min_run_stops(self.h_layer)

    def add_stub(self, track: int, net: str) -> None:
        if not 0 <= track < self.n_tracks:
            raise GeneratorError(f"stub track {track} outside cell")
        old = self.stubs.get(track)
        if old is not None and old != net:
            raise GeneratorError(f"track {track}: nets {old!r} and {net!r} collide")
        self.stubs[track] = net

    def strap_span(self, net: str) -> tuple[int, int]:
        tracks = sorted(t for t, n in self.stubs.items() if n == net)
        if not tracks:
            raise GeneratorError(f"net {net!r} has no stubs")
        t0, t1 = tracks[0], tracks[-1]
        need = self.min_strap_run - (t1 - t0)
        if need > 0:
            # extend toward the cell center so mirrored nets stay mirrored
            if t0 > (self.n_tracks - 1) - t1:
                t0 -= need
            else:
                t1 += need
            if t0 < 0 or t1 > self.n_tracks - 1:
                raise GeneratorError(f"cell too narrow for a legal strap on {net!r}")
        return t0, t1

    def emit(self, cell: Cell, body_rows: int) -> int:
        """Draw stubs, straps and vias; returns total row count."""
        pdk = self.pdk
        total_rows = len(self.strap_nets) + body_rows
        if total_rows - 1 > pdk.max_run_stops(self.v_layer):
            raise GeneratorError("cell taller than MaxL allows for one stub")
        for track in sorted(self.stubs):
            net = self.stubs[track]
            cell.wires.append((net, self.v_layer, wire_rect(pdk, self.v_layer, track,
                                                            0, total_rows - 1)))
        for net in self.strap_nets:
            row = self.strap_row[net]
            t0, t1 = self.strap_span(net)
            r = wire_rect(pdk, self.h_layer, row, t0, t1)
            cell.wires.append((net, self.h_layer, r))
            cell.add_pin(net, self.h_layer, r)
            for track in sorted(t for t, n in self.stubs.items() if n == net):
                x = pdk.track_coord(self.v_layer, track)
                y = pdk.track_coord(self.h_layer, row)
                cell.vias.append((net, self.via, via_cut(pdk, self.via, x, y)))
        return total_rows

    def cell_box(self, total_rows: int) -> Rect:
        w = self.n_tracks * self.pdk.layer(self.v_layer).pitch
        h = total_rows * self.pdk.layer(self.h_layer).pitch
        return Rect(0, 0, w, h)


def _body_rows(pdk: Pdk, fins: int) -> int:
    ph = pdk.layer(pdk.layers[1].name if pdk.layers[0].direction == VERTICAL
                   else pdk.layers[0].name).pitch
    body_h = max(pdk.feol.row_height, (fins + 2) * pdk.feol.fin_pitch)
    return -(-body_h // ph)


def _slot_assignments(spec: PrimitiveSpec) -> list[tuple[int, bool]]:
    """(device index, mirrored) per slot, left to right."""
    if spec.ptype == "single_mos":
        return [(0, False)] * spec.units[0]
    pat = gen_pattern(spec.units[0], spec.units[1], spec.pattern)
    if not isinstance(pat, str):
        raise GeneratorError(f"{spec.ptype} does not take a two-row pattern")
    half = len(pat) // 2
    return [({"A": 0, "B": 1}[ch], i >= half) for i, ch in enumerate(pat)]


def _mos_cell(spec: PrimitiveSpec, pdk: Pdk, rows: int, name: str) -> Cell:
    if rows > 1 and spec.ptype != "single_mos":
        raise GeneratorError(f"{spec.ptype} supports a single row only")
    if rows > 1 and spec.units[0] % rows:
        raise GeneratorError(f"{spec.units[0]} units do not fill {rows} rows")

    slots = _slot_assignments(spec)
    if rows > 1:
        per_row = spec.units[0] // rows
        slots = slots[:per_row]     # identical columns; stubs merge across rows
    n_tracks = 4 * len(slots)
    straps = list(_STRAP_ORDER[spec.ptype])
    frame = _Frame(pdk, n_tracks, straps)

    role_order = ("source", "gate", "drain", "bulk")
    for i, (dev, mirrored) in enumerate(slots):
        nets = _MOS_NETS[(spec.ptype, dev)]
        order = tuple(reversed(role_order)) if mirrored else role_order
        for k, role in enumerate(order):
            frame.add_stub(4 * i + k, nets[role])

    cell = Cell(name=name, bbox=Rect(0, 0, 0, 0))
    body = _body_rows(pdk, spec.fins)
    total_rows = frame.emit(cell, body * rows)
    cell.bbox = frame.cell_box(total_rows)

    # abstract FEOL: active across s..d, poly on the gate track, contacts
    vp = pdk.layer(frame.v_layer).pitch
    ph = pdk.layer(frame.h_layer).pitch
    w2 = pdk.layer(frame.v_layer).width // 2
    for r in range(rows):
        y0 = (len(straps) + r * body) * ph + ph // 2
        y1 = y0 + spec.fins * pdk.feol.fin_pitch
        for i, (dev, mirrored) in enumerate(slots):
            xs = [pdk.track_coord(frame.v_layer, 4 * i + k) for k in range(4)]
            s_x, g_x, d_x, b_x = (xs[::-1] if mirrored else xs)
            lo, hi = min(s_x, d_x), max(s_x, d_x)
            cell.rects.append(("active", Rect(lo - vp // 2, y0, hi + vp // 2, y1), None))
            cell.rects.append(("poly", Rect(g_x - w2, y0 - ph // 4, g_x + w2, y1 + ph // 4), None))
            for cx in (s_x, d_x, b_x):
                cell.rects.append(("contact", Rect(cx - w2, (y0 + y1) // 2 - w2,
                                                   cx + w2, (y0 + y1) // 2 + w2), None))
    _check_contained(cell)
    return cell


def _array_cell(spec: PrimitiveSpec, pdk: Pdk, name: str) -> Cell:
    k = len(spec.units)
    if spec.ptype == "cap_array":
        if spec.pattern == COMMON_CENTROID or k > 2:
            grid = cc_arrangement(spec.units)
        else:
            pat = gen_pattern(spec.units[0], spec.units[1] if k > 1 else 1,
                              spec.pattern if k > 1 else PLAIN)
            grid = [[{"A": 0, "B": 1}[c] for c in pat]]
        cols = len(grid[0])
        tracks_per_col = 1 + len(grid)      # shared top stub + one bottom per row
        straps = ["top"] + [f"b{i}" for i in range(k)]
        # dummy columns at both ends
        n_tracks = tracks_per_col * (cols + 2)
        frame = _Frame(pdk, n_tracks, straps)
        owner_of_track: dict[int, tuple[int, int]] = {}
        for c in range(cols):
            base = tracks_per_col * (c + 1)
            col_has_unit = any(grid[r][c] >= 0 for r in range(len(grid)))
            if col_has_unit:
                frame.add_stub(base, "top")
            for r in range(len(grid)):
                dev = grid[r][c]
                if dev >= 0:
                    frame.add_stub(base + 1 + r, f"b{dev}")
                    owner_of_track[base + 1 + r] = (r, c)
        cell = Cell(name=name, bbox=Rect(0, 0, 0, 0))
        body = _body_rows(pdk, 2)
        total_rows = frame.emit(cell, body * len(grid))
        cell.bbox = frame.cell_box(total_rows)
        ph = pdk.layer(frame.h_layer).pitch
        vp = pdk.layer(frame.v_layer).pitch
        for r in range(len(grid)):
            y0 = (len(straps) + r * body) * ph + ph // 2
            y1 = y0 + (body - 1) * ph
            for c in range(-1, cols + 1):
                base = tracks_per_col * (c + 1)
                x0 = base * vp + vp // 4
                x1 = (base + tracks_per_col) * vp - vp // 4
                cell.rects.append(("capbody", Rect(x0, y0, x1, y1), None))
        _check_contained(cell)
        return cell

    # res_array: one row, units in series per device
    if k == 2 and spec.pattern in (INTERDIGITATED, COMMON_CENTROID):
        pat = gen_pattern(spec.units[0], spec.units[1], INTERDIGITATED)
        order = [{"A": 0, "B": 1}[c] for c in pat]
    else:
        order = [i for i, u in enumerate(spec.units) for _ in range(u)]
    seen: dict[int, int] = {}
    unit_index = []                       # per slot: (device, ordinal within device)
    for dev in order:
        unit_index.append((dev, seen.get(dev, 0)))
        seen[dev] = seen.get(dev, 0) + 1

    straps: list[str] = []
    for i in range(k):
        straps += [f"p{i}", f"m{i}"]
    links: list[tuple[str, int, int]] = []    # (rowname, track_a, track_b)
    slot_of: dict[tuple[int, int], int] = {}
    for slot, (dev, ordn) in enumerate(unit_index):
        slot_of[(dev, ordn)] = slot
    for dev in range(k):
        for j in range(spec.units[dev] - 1):
            a = 2 * (slot_of[(dev, j)] + 1) + 1       # m of unit j
            b = 2 * (slot_of[(dev, j + 1)] + 1)       # p of unit j+1
            links.append((f"link{dev}_{j}", a, b))
            straps.append(f"link{dev}_{j}")

    n_tracks = 2 * (len(order) + 2)       # + dummy columns
    frame = _Frame(pdk, n_tracks, straps)
    for slot, (dev, ordn) in enumerate(unit_index):
        base = 2 * (slot + 1)
        if ordn == 0:
            frame.add_stub(base, f"p{dev}")
        else:
            frame.add_stub(base, f"link{dev}_{ordn - 1}")
        if ordn == spec.units[dev] - 1:
            frame.add_stub(base + 1, f"m{dev}")
        else:
            frame.add_stub(base + 1, f"link{dev}_{ordn}")

    cell = Cell(name=name, bbox=Rect(0, 0, 0, 0))
    body = _body_rows(pdk, 2)
    total_rows = frame.emit(cell, body)
    cell.bbox = frame.cell_box(total_rows)
    for pin in list(cell.pins):
        if pin.startswith("link"):
            del cell.pins[pin]            # internal series nodes are not pins
    ph = pdk.layer(frame.h_layer).pitch
    vp = pdk.layer(frame.v_layer).pitch
    y0 = len(straps) * ph + ph // 2
    y1 = y0 + (body - 1) * ph
    for c in range(-1, len(order) + 1):
        base = 2 * (c + 1)
        cell.rects.append(("resbody", Rect(base * vp + vp // 4, y0,
                                           (base + 2) * vp - vp // 4, y1), None))
    _check_contained(cell)
    return cell


def _check_contained(cell: Cell) -> None:
    for _, r, _ in cell.rects:
        if not cell.bbox.contains(r):
            raise GeneratorError(f"{cell.name}: rect {r} outside bbox {cell.bbox}")
    for _, _, r in cell.wires + cell.vias:
        if not cell.bbox.contains(r):
            raise GeneratorError(f"{cell.name}: wire {r} outside bbox {cell.bbox}")


def primitive_cell_name(spec: PrimitiveSpec, rows: int) -> str:
    units = "x".join(str(u) for u in spec.units)
    kind = spec.kind.value if spec.kind else spec.ptype.split("_")[0]
    return f"{spec.ptype}_{kind}_u{units}_f{spec.fins}_{spec.pattern[:2]}_r{rows}"


def row_options(spec: PrimitiveSpec) -> list[int]:
    if spec.ptype == "single_mos":
        return sorted(r for r in range(1, spec.units[0] + 1) if spec.units[0] % r == 0)
    return [1]


def gen_primitive(spec: PrimitiveSpec, pdk: Pdk, rows: int | None = None) -> Cell:
    """Generate one primitive cell; aspect hint picks the row count if unset."""
    if spec.ptype in MOS_TYPES:
        options = row_options(spec)
        if rows is None:
            def ratio(r):
                trial = _mos_cell(spec, pdk, r, "trial")
                got = trial.bbox.w / trial.bbox.h
                return abs(got - spec.aspect), r
            rows = min(options, key=ratio)
        elif rows not in options:
            raise GeneratorError(f"cannot tile {spec.units[0]} units in {rows} rows")
        return _mos_cell(spec, pdk, rows, primitive_cell_name(spec, rows))
    name = primitive_cell_name(spec, 2 if spec.ptype == "cap_array" else 1)
    return _array_cell(spec, pdk, name)


def gen_variants(spec: PrimitiveSpec, pdk: Pdk, k: int) -> list[Cell]:
    """Up to k distinct-aspect variants, sorted by area then aspect."""
    if k < 1:
        raise GeneratorError("k must be >= 1")
    cells = []
    for rows in row_options(spec):
        if spec.ptype in MOS_TYPES:
            cells.append(gen_primitive(spec, pdk, rows))
        else:
            cells.append(gen_primitive(spec, pdk))
            break
    cells.sort(key=lambda c: (c.bbox.w * c.bbox.h, Fraction(c.bbox.w, c.bbox.h)))
    return cells[:k]
