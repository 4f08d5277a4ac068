"""Sequence-pair placement under symmetry, matching and alignment constraints.

The annealer never repairs symmetry after the fact: every symmetry group is
fused into one super-block whose internal rows (mirrored pairs, centered
self-symmetric blocks) share a single vertical axis, so every state the
search visits is symmetry-feasible. Alignment groups fuse into a fixed-order
row. Packing inserts a halo between blocks (end-to-end clearance for wires
near cell edges); stored coordinates are the real ones.

All arithmetic is integer. Pin positions use doubled coordinates so centers
of odd-width rects stay exact.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace


class PlacementError(Exception):
    pass


@dataclass(frozen=True)
class SequencePair:
    pos: tuple[str, ...]
    neg: tuple[str, ...]

    def __post_init__(self):
        if sorted(self.pos) != sorted(self.neg):
            raise PlacementError("pos/neg sequences must permute the same ids")


def sp_to_placement(sp: SequencePair, sizes: dict[str, tuple[int, int]]) -> dict[str, tuple[int, int]]:
    """Classic decode: before/before = left-of, after/before = below.

    Returns the minimal packing (longest-path coordinates) for the given
    sequence pair.
    """
    pos_idx = {b: i for i, b in enumerate(sp.pos)}
    neg_idx = {b: i for i, b in enumerate(sp.neg)}
    if set(sizes) != set(pos_idx):
        raise PlacementError("sizes must cover exactly the sequence ids")
    xs: dict[str, int] = {}
    for b in sp.pos:     # topological for left-of edges
        xs[b] = max((xs[a] + sizes[a][0] for a in xs
                     if neg_idx[a] < neg_idx[b]), default=0)
    ys: dict[str, int] = {}
    for b in sp.neg:     # topological for below edges
        ys[b] = max((ys[a] + sizes[a][1] for a in ys
                     if pos_idx[a] > pos_idx[b]), default=0)
    return {b: (xs[b], ys[b]) for b in sp.pos}


def packing_area(sp: SequencePair, sizes: dict[str, tuple[int, int]]) -> tuple[int, int, int]:
    pos = sp_to_placement(sp, sizes)
    w = max((x + sizes[b][0] for b, (x, y) in pos.items()), default=0)
    h = max((y + sizes[b][1] for b, (x, y) in pos.items()), default=0)
    return w * h, w, h


@dataclass
class PlacedBlock:
    x: int
    y: int
    w: int
    h: int
    variant: int = 0
    mirrored: bool = False

    @property
    def cx2(self) -> int:
        return 2 * self.x + self.w

    @property
    def box(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.x + self.w, self.y + self.h)


@dataclass
class Placement:
    blocks: dict[str, PlacedBlock] = field(default_factory=dict)
    axes: dict[str, int] = field(default_factory=dict)   # symmetry group id -> x axis

    def bbox(self) -> tuple[int, int]:
        w = max((b.x + b.w for b in self.blocks.values()), default=0)
        h = max((b.y + b.h for b in self.blocks.values()), default=0)
        return w, h

    def overlapping_pairs(self) -> list[tuple[str, str]]:
        out = []
        ids = sorted(self.blocks)
        for i, a in enumerate(ids):
            ba = self.blocks[a]
            for b in ids[i + 1:]:
                bb = self.blocks[b]
                if (ba.x < bb.x + bb.w and bb.x < ba.x + ba.w and
                        ba.y < bb.y + bb.h and bb.y < ba.y + ba.h):
                    out.append((a, b))
        return out


# ---------------------------------------------------------------------------
# blocks, constraints, fused units

@dataclass(frozen=True)
class Variant:
    w: int
    h: int
    pins: tuple[tuple[str, tuple[int, int]], ...] = ()   # name -> doubled center

    def pin2(self, name: str) -> tuple[int, int]:
        for n, p in self.pins:
            if n == name:
                return p
        raise PlacementError(f"variant has no pin {name!r}")


@dataclass(frozen=True)
class Block:
    id: str
    variants: tuple[Variant, ...]


@dataclass(frozen=True)
class PlaceConstraints:
    pairs: tuple[tuple[str, str], ...] = ()        # vertical-axis symmetric pairs
    selfs: tuple[str, ...] = ()
    matching: tuple[tuple[str, ...], ...] = ()
    alignment: tuple[tuple[str, ...], ...] = ()    # bottom-aligned fixed-order rows


@dataclass(frozen=True)
class Net:
    name: str
    pins: tuple[tuple[str, str], ...]              # (block id, pin name)
    budget_mohm: int | None = None


@dataclass
class AnnealConfig:
    seed: int = 0
    w_area: int = 1
    w_wl: int = 2
    w_penalty: int = 10**9
    cooling_num: int = 95                          # T *= 95/100
    moves_per_temp_scale: int = 200
    min_accept_pct: int = 2
    t_stop_div: int = 1000                         # stop at T < T0/t_stop_div
    restarts: int = 1
    grid: tuple[int, int] = (1, 1)
    halo: tuple[int, int] = (0, 0)
    min_r_per_nm: int = 1                          # for budget feasibility bound


def _snap_up(v: int, g: int) -> int:
    return -(-v // g) * g


class _Unit:
    """One annealing unit: a free block, a symmetry group, or an aligned row."""

    def __init__(self, uid: str, kind: str, rows: list):
        self.id = uid
        self.kind = kind          # 'free' | 'sym' | 'align'
        self.rows = rows          # free/align: block ids; sym: ('pair',a,b)|('self',s)

    def members(self) -> list[str]:
        if self.kind == "free":
            return list(self.rows)
        if self.kind == "align":
            return list(self.rows)
        out = []
        for row in self.rows:
            out.extend(row[1:])
        return out

    def layout(self, bw: dict[str, tuple[int, int]], halo: tuple[int, int],
               grid: tuple[int, int], order: tuple[int, ...]):
        """(w, h, offsets {block: (dx, dy, mirrored)}, axis_dx or None)."""
        hx, hy = halo
        gx, gy = grid
        if self.kind == "free":
            b = self.rows[0]
            w, h = bw[b]
            return w, h, {b: (0, 0, False)}, None
        if self.kind == "align":
            x = 0
            offsets = {}
            height = 0
            for i, b in enumerate(self.rows):
                if i:
                    x += hx
                offsets[b] = (x, 0, False)
                x += bw[b][0]
                height = max(height, bw[b][1])
            return x, height, offsets, None
        # symmetric group: rows stacked in `order`, one shared vertical axis;
        # half-gap between pair members is a multiple of the x grid
        half_gap = _snap_up(max(hx, gx), gx)
        halves = []
        for row in self.rows:
            if row[0] == "pair":
                halves.append(bw[row[1]][0] + half_gap)
            else:
                halves.append(bw[row[1]][0] // 2)
        half_w = _snap_up(max(halves), gx)
        w = 2 * half_w
        offsets = {}
        y = 0
        for k, idx in enumerate(order):
            row = self.rows[idx]
            if k:
                y += hy
            if row[0] == "pair":
                _, a, b = row
                wa, ha = bw[a]
                offsets[a] = (half_w - half_gap - wa, y, False)
                offsets[b] = (half_w + half_gap, y, True)
                y += ha
            else:
                _, s = row
                ws, hs = bw[s]
                offsets[s] = (half_w - ws // 2, y, False)
                y += hs
        return w, y, offsets, half_w


def build_units(blocks: dict[str, Block], cons: PlaceConstraints) -> list[_Unit]:
    used: set[str] = set()
    units: list[_Unit] = []
    sym_rows: list = []
    for a, b in cons.pairs:
        sym_rows.append(("pair", a, b))
        used.update((a, b))
    for s in cons.selfs:
        if s not in used:
            sym_rows.append(("self", s))
            used.add(s)
    if sym_rows:
        sym_rows.sort(key=lambda r: r[1])
        units.append(_Unit("sym0", "sym", sym_rows))
    for group in cons.alignment:
        row = [b for b in group if b not in used]
        if len(row) >= 2:
            units.append(_Unit(f"align_{row[0]}", "align", row))
            used.update(row)
    for bid in sorted(blocks):
        if bid not in used:
            units.append(_Unit(bid, "free", [bid]))
    return units


# ---------------------------------------------------------------------------
# annealer

class _State:
    __slots__ = ("sp", "variant", "orders")

    def __init__(self, sp: SequencePair, variant: dict[str, int],
                 orders: dict[str, tuple[int, ...]]):
        self.sp = sp
        self.variant = variant
        self.orders = orders


def anneal(blocks: dict[str, Block], nets: list[Net], cons: PlaceConstraints,
           cfg: AnnealConfig) -> Placement:
    """Simulated annealing over sequence pairs of fused units.

    Moves: swap in pos, swap in neg, swap in both, variant rotation
    (matching groups rotate together), symmetry-group row-order swap.
    Deterministic for a given seed; returns the best state seen.
    """
    if not blocks:
        raise PlacementError("no blocks to place")
    units = build_units(blocks, cons)
    unit_of: dict[str, _Unit] = {u.id: u for u in units}
    leader: dict[str, str] = {}
    for group in cons.matching:
        head = sorted(group)[0]
        for b in group:
            leader[b] = head
    for b in blocks:
        leader.setdefault(b, b)
    group_len: dict[str, int] = {}
    for b, head in leader.items():
        n = len(blocks[b].variants)
        group_len[head] = min(group_len.get(head, n), n)

    def block_sizes(state: _State) -> dict[str, tuple[int, int]]:
        return {b: (blocks[b].variants[state.variant[leader[b]]].w,
                    blocks[b].variants[state.variant[leader[b]]].h)
                for b in blocks}

    def decode(state: _State):
        bw = block_sizes(state)
        geo = {}
        for u in units:
            w, h, offsets, axis = u.layout(bw, cfg.halo, cfg.grid, state.orders[u.id])
            geo[u.id] = (w, h, offsets, axis)
        eff = {uid: (_snap_up(geo[uid][0] + cfg.halo[0], cfg.grid[0]),
                     _snap_up(geo[uid][1] + cfg.halo[1], cfg.grid[1]))
               for uid in geo}
        upos = sp_to_placement(state.sp, eff)
        placement = Placement()
        for uid, (ux, uy) in upos.items():
            w, h, offsets, axis = geo[uid]
            for bid, (dx, dy, mir) in offsets.items():
                bwid, bhei = bw[bid]
                placement.blocks[bid] = PlacedBlock(
                    x=ux + dx, y=uy + dy, w=bwid, h=bhei,
                    variant=state.variant[leader[bid]], mirrored=mir)
            if axis is not None:
                placement.axes[uid] = ux + axis
        return placement

    def cost(state: _State) -> int:
        placement = decode(state)
        w, h = placement.bbox()
        total = cfg.w_area * w * h
        if cfg.w_wl or cfg.w_penalty:
            total += cfg.w_wl * _hpwl_total(placement, blocks, nets, leader) // 2
            if cfg.w_penalty:
                total += cfg.w_penalty * _budget_infeasible(
                    placement, blocks, nets, leader, cfg.min_r_per_nm)
        return total

    best_overall: tuple[int, Placement] | None = None
    for restart in range(max(1, cfg.restarts)):
        rng = random.Random(cfg.seed * 1_000_003 + restart)
        ids = sorted(unit_of)
        state = _State(SequencePair(tuple(ids), tuple(ids)),
                       {head: 0 for head in set(leader.values())},
                       {u.id: tuple(range(len(u.rows))) if u.kind == "sym" else ()
                        for u in units})
        cur = cost(state)
        best, best_state = cur, state
        if len(ids) > 1 or any(group_len[h] > 1 for h in group_len):
            deltas = []
            probe = state
            for _ in range(24):
                nxt = _move(probe, rng, units, group_len)
                deltas.append(abs(cost(nxt) - cost(probe)))
                probe = nxt
            t0 = max(max(deltas, default=1), 1) * 2
            t = t0
            while t * cfg.t_stop_div >= t0:
                accepted = 0
                tried = 0
                for _ in range(cfg.moves_per_temp_scale * len(ids)):
                    tried += 1
                    nxt = _move(state, rng, units, group_len)
                    c2 = cost(nxt)
                    d = c2 - cur
                    if d <= 0 or rng.random() < math.exp(-d / t):
                        state, cur = nxt, c2
                        accepted += 1
                        if cur < best:
                            best, best_state = cur, state
                t = t * cfg.cooling_num // 100
                if t <= 0 or accepted * 100 < cfg.min_accept_pct * tried:
                    break
        if best_overall is None or best < best_overall[0]:
            best_overall = (best, decode(best_state))
    return best_overall[1]


def _move(state: _State, rng: random.Random, units: list, group_len: dict) -> _State:
    ids = list(state.sp.pos)
    n = len(ids)
    choices = ["pos", "neg", "both"] if n > 1 else []
    if any(v > 1 for v in group_len.values()):
        choices.append("variant")
    if any(u.kind == "sym" and len(u.rows) > 1 for u in units):
        choices.append("order")
    if not choices:
        return state
    kind = rng.choice(choices)
    if kind in ("pos", "neg", "both"):
        i, j = rng.sample(range(n), 2)
        pos, neg = list(state.sp.pos), list(state.sp.neg)
        if kind in ("pos", "both"):
            pos[i], pos[j] = pos[j], pos[i]
        if kind in ("neg", "both"):
            k, l = (i, j) if kind == "both" else rng.sample(range(n), 2)
            neg[k], neg[l] = neg[l], neg[k]
        return _State(SequencePair(tuple(pos), tuple(neg)), state.variant, state.orders)
    if kind == "variant":
        heads = sorted(h for h, g in group_len.items() if g > 1)
        head = rng.choice(heads)
        variant = dict(state.variant)
        variant[head] = (variant[head] + 1) % group_len[head]
        return _State(state.sp, variant, state.orders)
    sym_units = [u for u in units if u.kind == "sym" and len(u.rows) > 1]
    u = rng.choice(sym_units)
    order = list(state.orders[u.id])
    i, j = rng.sample(range(len(order)), 2)
    order[i], order[j] = order[j], order[i]
    orders = dict(state.orders)
    orders[u.id] = tuple(order)
    return _State(state.sp, state.variant, orders)


def _pin_abs2(placement: Placement, blocks: dict[str, Block], leader: dict,
              bid: str, pin: str) -> tuple[int, int]:
    pb = placement.blocks[bid]
    var = blocks[bid].variants[pb.variant]
    px2, py2 = var.pin2(pin)
    if pb.mirrored:
        px2 = 2 * var.w - px2
    return (2 * pb.x + px2, 2 * pb.y + py2)


def _hpwl_total(placement, blocks, nets, leader) -> int:
    total = 0
    for net in nets:
        xs, ys = [], []
        for bid, pin in net.pins:
            if bid not in placement.blocks:
                continue
            x2, y2 = _pin_abs2(placement, blocks, leader, bid, pin)
            xs.append(x2)
            ys.append(y2)
        if len(xs) >= 2:
            total += (max(xs) - min(xs)) + (max(ys) - min(ys))
    return total        # doubled units


def _budget_infeasible(placement, blocks, nets, leader, min_r_per_nm: int) -> int:
    bad = 0
    for net in nets:
        if net.budget_mohm is None:
            continue
        xs, ys = [], []
        for bid, pin in net.pins:
            if bid in placement.blocks:
                x2, y2 = _pin_abs2(placement, blocks, leader, bid, pin)
                xs.append(x2)
                ys.append(y2)
        if len(xs) >= 2:
            hpwl_nm = ((max(xs) - min(xs)) + (max(ys) - min(ys))) // 2
            if hpwl_nm * min_r_per_nm > net.budget_mohm:
                bad += 1
    return bad


# ---------------------------------------------------------------------------
# symmetry legalization / verification

def legalize_symmetry(placement: Placement, pairs: list[tuple[str, str]],
                      selfs: list[str], grid: tuple[int, int],
                      halo: tuple[int, int], axis_hint: int | None = None,
                      max_passes: int | None = None) -> Placement:
    """Force exact mirror equations (one shared vertical axis), then repair
    overlaps by upward shifts. Raises PlacementError if repair fails."""
    gx, gy = grid
    members = [b for p in pairs for b in p] + list(selfs)
    out = Placement(blocks={k: replace(v) for k, v in placement.blocks.items()},
                    axes=dict(placement.axes))
    if members:
        for a, b in pairs:
            if out.blocks[a].w != out.blocks[b].w or out.blocks[a].h != out.blocks[b].h:
                raise PlacementError(f"symmetric pair {a}/{b} members differ in size")
        if axis_hint is None:
            centers2 = [out.blocks[m].cx2 for m in members]
            axis = _snap_up(sum(centers2) // (2 * len(centers2)), gx)
        else:
            axis = axis_hint
        half_gap = _snap_up(max(halo[0], gx), gx)
        for a, b in pairs:
            pa, pb = out.blocks[a], out.blocks[b]
            d = max((abs(axis - pa.cx2 // 2) + abs(pb.cx2 // 2 - axis)) // 2,
                    pa.w // 2 + half_gap)
            d = _snap_up(d + pa.w // 2, gx) - pa.w // 2   # keep x on grid
            y = min(pa.y, pb.y)
            pa.x, pa.y, pa.mirrored = axis - d - pa.w // 2, y, False
            pb.x, pb.y, pb.mirrored = axis + d - pb.w // 2, y, True
        for s in selfs:
            ps = out.blocks[s]
            ps.x = axis - ps.w // 2
        out.axes["sym0"] = axis
    # repair units: a pair moves jointly in y (keeps y(A)=y(B)); everything
    # else moves alone. Vertical moves never disturb the mirror equations.
    unit_of: dict[str, tuple[str, ...]] = {b: (b,) for b in out.blocks}
    for a, b in pairs:
        unit_of[a] = unit_of[b] = (a, b)
    passes = 0
    limit = max_passes if max_passes is not None else 10 * max(1, len(out.blocks)) ** 2
    while True:
        overlaps = out.overlapping_pairs()
        if not overlaps:
            break
        passes += 1
        if passes > limit:
            raise PlacementError(f"cannot repair overlap between {overlaps[0]}")
        a, b = overlaps[0]
        mover = b if (out.blocks[b].y, out.blocks[b].x, b) >= (out.blocks[a].y, out.blocks[a].x, a) else a
        other = a if mover == b else b
        if unit_of[mover] == unit_of[other]:
            raise PlacementError(f"cannot repair overlap between {(a, b)}: "
                                 f"one symmetry row overlaps itself")
        delta = out.blocks[other].y + out.blocks[other].h - out.blocks[mover].y + halo[1]
        delta = _snap_up(max(delta, gy), gy)
        for m in unit_of[mover]:
            out.blocks[m].y += delta
    shift_x = min((b.x for b in out.blocks.values()), default=0)
    shift_y = min((b.y for b in out.blocks.values()), default=0)
    if shift_x < 0 or shift_y < 0:
        dx = _snap_up(-min(shift_x, 0), gx)
        dy = _snap_up(-min(shift_y, 0), gy)
        for b in out.blocks.values():
            b.x += dx
            b.y += dy
        out.axes = {k: v + dx for k, v in out.axes.items()}
    return out


def verify_symmetry(placement: Placement, pairs, selfs) -> int | None:
    """Exact integer check of the mirror equations; returns the shared axis."""
    axis2: int | None = None
    for a, b in pairs:
        pa, pb = placement.blocks[a], placement.blocks[b]
        s = pa.cx2 + pb.cx2
        if axis2 is None:
            axis2 = s // 2
        if s != 2 * axis2 or pa.y != pb.y:
            raise PlacementError(f"pair {a}/{b} violates mirror equations")
        if not pb.mirrored or pa.mirrored:
            raise PlacementError(f"pair {a}/{b} mirror flags wrong")
    for s in selfs:
        ps = placement.blocks[s]
        if axis2 is None:
            axis2 = ps.cx2
        if ps.cx2 != axis2:
            raise PlacementError(f"self-symmetric {s} off axis")
    return None if axis2 is None else axis2 // 2
