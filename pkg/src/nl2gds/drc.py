"""Grid design-rule checker.

Operates on flattened (layer, rect, net) geometry against the Pdk's rule
abstraction, checking exactly these rules:

    off_grid               wire not centered on a track / ends not on stops
    min_length, max_length centerline span bounds
    end_to_end             facing ends on one track too close (any nets)
    via_enclosure          cut not enclosed by same-net metal on both layers
    via_spacing            cut-to-cut window spacing
    overlap_distinct_nets  same-layer geometric overlap of different nets
    direction              wire drawn perpendicular to the layer direction

Wire rects are expected to be the centerline span extended by the layer's
end overhang at both ends (see pdk.end_overhang); the checker recovers
centerline endpoints by shrinking, which keeps all arithmetic in integers.
Enclosure is checked as single-rect containment: the cut plus its required
margins must sit inside one same-net rect per adjacent layer. Layers the Pdk
does not know (FEOL abstractions) are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .layout import Layout, Rect, flatten_layout
from .pdk import HORIZONTAL, Pdk, VERTICAL

RULE_IDS = ("off_grid", "min_length", "max_length", "end_to_end",
            "via_enclosure", "via_spacing", "overlap_distinct_nets", "direction")


@dataclass(frozen=True)
class Violation:
    rule: str
    layer: str
    rect: Rect
    detail: str


@dataclass
class DrcReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.violations

    def count(self, rule: str | None = None) -> int:
        if rule is None:
            return len(self.violations)
        return sum(1 for v in self.violations if v.rule == rule)

    def summary(self) -> str:
        if self.clean:
            return "clean"
        per = {}
        for v in self.violations:
            per[v.rule] = per.get(v.rule, 0) + 1
        return ", ".join(f"{k}={per[k]}" for k in sorted(per))


def _span(r: Rect, direction: str) -> tuple[int, int, int, int]:
    """(along_lo, along_hi, across_lo, across_hi) for a layer direction."""
    if direction == VERTICAL:
        return r.y0, r.y1, r.x0, r.x1
    return r.x0, r.x1, r.y0, r.y1


def drc(layout: Layout, pdk: Pdk, top: str | None = None) -> DrcReport:
    shapes = flatten_layout(layout, top)
    return drc_shapes(shapes, pdk)


def drc_shapes(shapes: list[tuple[str, Rect, str | None]], pdk: Pdk) -> DrcReport:
    viols: list[Violation] = []
    warnings: list[str] = []
    layer_names = set(pdk.routing_layer_names())
    via_names = {v.name for v in pdk.vias}

    by_layer: dict[str, list[tuple[Rect, str | None]]] = {}
    for layer, r, net in shapes:
        if layer in layer_names or layer in via_names:
            by_layer.setdefault(layer, []).append((r, net))

    # wire-shaped rects per (layer, track-center) for e2e/overlap/enclosure
    on_track: dict[str, dict[int, list[tuple[Rect, str | None]]]] = {}

    for lname in pdk.routing_layer_names():
        rules = pdk.layer(lname)
        ov = pdk.end_overhang(lname)
        stop = pdk.layer(pdk.stop_layer(lname))
        tracks: dict[int, list[tuple[Rect, str | None]]] = {}
        on_track[lname] = tracks
        for r, net in by_layer.get(lname, ()):
            lo, hi, a0, a1 = _span(r, rules.direction)
            across = a1 - a0
            along = hi - lo
            if across != rules.width:
                if along == rules.width and across > rules.width:
                    viols.append(Violation("direction", lname, r,
                                           f"wire runs {('horizontal' if rules.direction == VERTICAL else 'vertical')} "
                                           f"on a {rules.direction} layer"))
                else:
                    viols.append(Violation("off_grid", lname, r,
                                           f"width {across} != {rules.width}"))
                continue
            center2 = a0 + a1
            if (center2 - 2 * rules.offset) % (2 * rules.pitch):
                viols.append(Violation("off_grid", lname, r,
                                       f"centerline {center2}/2 not on track grid"))
                continue
            end_lo, end_hi = lo + ov, hi - ov
            if ((end_lo - stop.offset) % stop.pitch) or ((end_hi - stop.offset) % stop.pitch):
                viols.append(Violation("off_grid", lname, r,
                                       f"ends ({end_lo},{end_hi}) not on stop grid"))
                continue
            track = (center2 // 2 - rules.offset) // rules.pitch
            tracks.setdefault(track, []).append((r, net))
            span = end_hi - end_lo
            if span < rules.min_l:
                viols.append(Violation("min_length", lname, r,
                                       f"span {span} < MinL {rules.min_l}"))
            elif span > rules.max_l:
                viols.append(Violation("max_length", lname, r,
                                       f"span {span} > MaxL {rules.max_l}"))

        # end-to-end and same-track overlap (tracks hold few rects; full pairwise)
        for track, items in sorted(tracks.items()):
            items.sort(key=lambda it: _span(it[0], rules.direction)[:2])
            for i, (r1, n1) in enumerate(items):
                lo1, hi1, *_ = _span(r1, rules.direction)
                for r2, n2 in items[i + 1:]:
                    lo2, hi2, *_ = _span(r2, rules.direction)
                    gap = max(lo2 - hi1, lo1 - hi2)
                    if gap < 0:
                        if n1 != n2 and n1 is not None and n2 is not None:
                            viols.append(Violation("overlap_distinct_nets", lname, r2,
                                                   f"nets {n1!r} and {n2!r} overlap"))
                    elif gap < rules.end_to_end:
                        viols.append(Violation("end_to_end", lname, r2,
                                               f"gap {gap} < EndToEnd {rules.end_to_end} "
                                               f"(nets {n1!r}/{n2!r})"))
            if rules.colors:
                color = pdk.track_color(lname, track)
                nxt = track + 1
                if nxt in tracks and pdk.track_color(lname, nxt) == color:
                    for ra, _ in items:
                        for rb, _ in tracks[nxt]:
                            la, ha, *_ = _span(ra, rules.direction)
                            lb, hb, *_ = _span(rb, rules.direction)
                            if la < hb and lb < ha:
                                warnings.append(
                                    f"{lname}: same-color ({color}) wires on adjacent "
                                    f"tracks {track}/{nxt} near {ra}")
                                break

    # vias
    for v in pdk.vias:
        cuts = by_layer.get(v.name, [])
        lo_rules = pdk.layer(v.below)
        hi_rules = pdk.layer(v.above)
        for r, net in cuts:
            if r.w != v.width_x or r.h != v.width_y:
                viols.append(Violation("via_enclosure", v.name, r,
                                       f"cut size {r.w}x{r.h} != {v.width_x}x{v.width_y}"))
                continue
            for side_rules, venc_a, venc_p, side in (
                    (lo_rules, v.venc_a_l, v.venc_p_l, v.below),
                    (hi_rules, v.venc_a_h, v.venc_p_h, v.above)):
                if side_rules.direction == VERTICAL:
                    need = Rect(r.x0 - venc_p, r.y0 - venc_a, r.x1 + venc_p, r.y1 + venc_a)
                else:
                    need = Rect(r.x0 - venc_a, r.y0 - venc_p, r.x1 + venc_a, r.y1 + venc_p)
                covered = any(
                    mr.contains(need) and mnet == net
                    for mr, mnet in by_layer.get(side, ())
                )
                if not covered:
                    viols.append(Violation("via_enclosure", v.name, r,
                                           f"cut not enclosed on {side} (net {net!r})"))
        cuts_sorted = sorted(cuts, key=lambda it: (it[0].x0, it[0].y0))
        for i, (r1, n1) in enumerate(cuts_sorted):
            for r2, n2 in cuts_sorted[i + 1:]:
                if r2.x0 - r1.x1 >= v.space_x:
                    break
                gx = max(r1.x0 - r2.x1, r2.x0 - r1.x1)
                gy = max(r1.y0 - r2.y1, r2.y0 - r1.y1)
                if r1 == r2 and n1 == n2:
                    continue
                if gx < v.space_x and gy < v.space_y and not (gx < 0 and gy < 0):
                    viols.append(Violation("via_spacing", v.name, r2,
                                           f"cut gap ({gx},{gy}) < Space ({v.space_x},{v.space_y})"))

    viols.sort(key=lambda v: (v.layer, v.rect.x0, v.rect.y0, v.rule, v.detail))
    return DrcReport(violations=viols, warnings=sorted(set(warnings)))
