"""Wire/via rect construction on the Pdk grids.

A wire on (layer, track) spanning stop indices [s0, s1] is drawn as the
centerline segment extended by the layer's end overhang at both ends; the
DRC checker reverses exactly this construction.
"""

from __future__ import annotations

from .layout import Rect
from .pdk import Pdk, VERTICAL


def wire_rect(pdk: Pdk, layer: str, track: int, s0: int, s1: int) -> Rect:
    if s1 <= s0:
        raise ValueError(f"empty wire span [{s0},{s1}] on {layer}")
    rules = pdk.layer(layer)
    ov = pdk.end_overhang(layer)
    c = pdk.track_coord(layer, track)
    lo = pdk.stop_coord(layer, s0) - ov
    hi = pdk.stop_coord(layer, s1) + ov
    half = rules.width // 2
    if rules.direction == VERTICAL:
        return Rect(c - half, lo, c + half, hi)
    return Rect(lo, c - half, hi, c + half)


def wire_span(pdk: Pdk, layer: str, r: Rect) -> tuple[int, int, int]:
    """(track, s0, s1) recovered from a drawn wire rect; raises on off-grid."""
    rules = pdk.layer(layer)
    ov = pdk.end_overhang(layer)
    if rules.direction == VERTICAL:
        c2, lo, hi = r.x0 + r.x1, r.y0, r.y1
    else:
        c2, lo, hi = r.y0 + r.y1, r.x0, r.x1
    track = pdk.track_index(layer, c2 // 2)
    return track, pdk.stop_index(layer, lo + ov), pdk.stop_index(layer, hi - ov)


def via_cut(pdk: Pdk, via_name: str, x: int, y: int) -> Rect:
    v = pdk.via(via_name)
    return Rect(x - v.width_x // 2, y - v.width_y // 2,
                x + v.width_x // 2, y + v.width_y // 2)


def wire_length(pdk: Pdk, layer: str, r: Rect) -> int:
    """Centerline length of a drawn wire rect."""
    rules = pdk.layer(layer)
    ov = pdk.end_overhang(layer)
    along = (r.y1 - r.y0) if rules.direction == VERTICAL else (r.x1 - r.x0)
    return along - 2 * ov
