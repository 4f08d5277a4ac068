"""Gridded design-rule abstraction.

A process is described by a JSON file holding an ordered stack of routing
layers with per-layer grid rules, via rules between adjacent layers, and a
few FEOL unit-cell dimensions. Every routing layer runs wires in one
direction only; wire centerlines sit on the layer's major grid (tracks,
``Offset + i*Pitch``) and wire ends sit on its minor grid (stops), which is
the track grid of the perpendicular neighbor below it (the bottom layer uses
the neighbor above).

All geometry is integer nanometers. Parasitics are integer milliohms per nm
(UnitR), zeptofarads per nm (UnitC) and milliohms per via cut (R), so every
derived quantity stays exact under addition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path


class PdkError(Exception):
    """Schema or invariant violation in a rule file."""


VERTICAL = "vertical"
HORIZONTAL = "horizontal"


@dataclass(frozen=True)
class LayerRules:
    name: str
    direction: str
    pitch: int
    width: int
    min_l: int
    max_l: int
    end_to_end: int
    offset: int
    unit_r: int          # milliohm / nm
    unit_c: int          # zeptofarad / nm
    colors: tuple[str, ...] = ()


@dataclass(frozen=True)
class ViaRules:
    name: str
    below: str
    above: str
    width_x: int
    width_y: int
    space_x: int
    space_y: int
    venc_a_l: int
    venc_a_h: int
    venc_p_l: int
    venc_p_h: int
    r: int               # milliohm / cut


@dataclass(frozen=True)
class FeolRules:
    poly_pitch: int
    fin_pitch: int
    row_height: int


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise PdkError(msg)


def _get(obj: dict, key: str, path: str, typ=int):
    if key not in obj:
        raise PdkError(f"{path}.{key}: missing required field")
    val = obj[key]
    if typ is int and (not isinstance(val, int) or isinstance(val, bool)):
        raise PdkError(f"{path}.{key}: expected integer, got {val!r}")
    if typ is str and not isinstance(val, str):
        raise PdkError(f"{path}.{key}: expected string, got {val!r}")
    return val


@dataclass(frozen=True)
class Pdk:
    """Validated rule set for one technology."""

    name: str
    layers: tuple[LayerRules, ...]
    vias: tuple[ViaRules, ...]
    feol: FeolRules
    # via pairs that may not sit on adjacent sites (stands in for the rule
    # manual's Boolean via-pattern constraints)
    forbidden_adjacency: tuple[tuple[str, str], ...] = ()
    _by_name: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._by_name.update({l.name: i for i, l in enumerate(self.layers)})

    # -- lookups ---------------------------------------------------------

    def layer(self, name: str) -> LayerRules:
        try:
            return self.layers[self._by_name[name]]
        except KeyError:
            raise PdkError(f"unknown layer {name!r}") from None

    def layer_index(self, name: str) -> int:
        if name not in self._by_name:
            raise PdkError(f"unknown layer {name!r}")
        return self._by_name[name]

    def via_between(self, lower: str, upper: str) -> ViaRules:
        for v in self.vias:
            if v.below == lower and v.above == upper:
                return v
        raise PdkError(f"no via rules between {lower!r} and {upper!r}")

    def via(self, name: str) -> ViaRules:
        for v in self.vias:
            if v.name == name:
                return v
        raise PdkError(f"unknown via {name!r}")

    def routing_layer_names(self) -> list[str]:
        return [l.name for l in self.layers]

    # -- major grid ------------------------------------------------------

    def track_coord(self, layer: str, index: int) -> int:
        """Centerline coordinate of track `index` (x for vertical layers, y for horizontal)."""
        rules = self.layer(layer)
        return rules.offset + index * rules.pitch

    def track_index(self, layer: str, coord: int) -> int:
        rules = self.layer(layer)
        q, r = divmod(coord - rules.offset, rules.pitch)
        if r:
            raise PdkError(
                f"coordinate {coord} is off the {layer} track grid "
                f"(Offset={rules.offset}, Pitch={rules.pitch})")
        return q

    # -- minor grid ------------------------------------------------------

    def stop_layer(self, layer: str) -> str:
        """The perpendicular neighbor whose tracks are this layer's stopping points."""
        i = self.layer_index(layer)
        if len(self.layers) < 2:
            raise PdkError(f"layer {layer!r} has no perpendicular neighbor")
        return self.layers[i - 1].name if i > 0 else self.layers[1].name

    def stop_coord(self, layer: str, index: int) -> int:
        return self.track_coord(self.stop_layer(layer), index)

    def stop_index(self, layer: str, coord: int) -> int:
        return self.track_index(self.stop_layer(layer), coord)

    def stop_pitch(self, layer: str) -> int:
        return self.layer(self.stop_layer(layer)).pitch

    # -- parasitics ------------------------------------------------------

    def wire_parasitics(self, layer: str, length: int) -> tuple[int, int]:
        """(resistance in milliohm, capacitance in zeptofarad) of a wire of `length` nm."""
        if length < 0:
            raise PdkError(f"negative wire length {length}")
        rules = self.layer(layer)
        return rules.unit_r * length, rules.unit_c * length

    def via_parasitics(self, via_name: str) -> int:
        """Resistance of one cut, in milliohm."""
        return self.via(via_name).r

    # -- derived quantities used by the generators and the router --------

    def end_overhang(self, layer: str) -> int:
        """How far drawn metal extends past a wire's centerline endpoints.

        Uniform per layer: the worst via landing at an endpoint must stay
        enclosed, so the overhang is max(cut_along/2 + VencA) over the
        layer's adjacent via levels.
        """
        rules = self.layer(layer)
        i = self.layer_index(layer)
        ov = rules.width // 2
        for v in self.vias:
            if v.below == layer:
                cut = v.width_y if rules.direction == VERTICAL else v.width_x
                ov = max(ov, cut // 2 + v.venc_a_l)
            if v.above == layer:
                cut = v.width_y if rules.direction == VERTICAL else v.width_x
                ov = max(ov, cut // 2 + v.venc_a_h)
        return ov

    def min_run_stops(self, layer: str) -> int:
        rules = self.layer(layer)
        return max(1, -(-rules.min_l // self.stop_pitch(layer)))

    def max_run_stops(self, layer: str) -> int:
        rules = self.layer(layer)
        return max(1, rules.max_l // self.stop_pitch(layer))

    def e2e_margin_stops(self, layer: str) -> int:
        """Stop cells to keep clear between different-net spans on one track."""
        rules = self.layer(layer)
        gap = rules.end_to_end + 2 * self.end_overhang(layer)
        return max(1, -(-gap // self.stop_pitch(layer)))

    def placement_grid(self) -> tuple[int, int]:
        """(x, y) quantum that keeps every layer's tracks on-grid under translation."""
        gx = gy = 1
        for l in self.layers:
            if l.direction == VERTICAL:
                gx = math.lcm(gx, l.pitch)
            else:
                gy = math.lcm(gy, l.pitch)
        return gx, gy

    def block_halo(self) -> tuple[int, int]:
        """Packing margin between blocks so facing wire ends keep EndToEnd."""
        gx, gy = self.placement_grid()
        need_x = need_y = 0
        for l in self.layers:
            g = l.end_to_end - self.stop_pitch(l.name) + 2 * self.end_overhang(l.name)
            if l.direction == HORIZONTAL:   # horizontal wires face each other in x
                need_x = max(need_x, g)
            else:
                need_y = max(need_y, g)
        halo_x = -(-need_x // gx) * gx if need_x > 0 else gx
        halo_y = -(-need_y // gy) * gy if need_y > 0 else gy
        return halo_x, halo_y

    def axis_on_grid(self, x_axis: int) -> bool:
        """True if mirroring about vertical line x_axis maps every vertical track grid to itself."""
        for l in self.layers:
            if l.direction == VERTICAL and (2 * x_axis - 2 * l.offset) % l.pitch:
                return False
        return True

    def track_color(self, layer: str, index: int) -> str | None:
        rules = self.layer(layer)
        if not rules.colors:
            return None
        return rules.colors[index % len(rules.colors)]


def _parse_layer(obj: dict, path: str) -> LayerRules:
    direction = _get(obj, "Direction", path, str)
    if direction not in (VERTICAL, HORIZONTAL):
        raise PdkError(f"{path}.Direction: must be 'vertical' or 'horizontal', got {direction!r}")
    colors = obj.get("Color", [])
    if not isinstance(colors, list) or not all(isinstance(c, str) for c in colors):
        raise PdkError(f"{path}.Color: expected list of strings")
    return LayerRules(
        name=_get(obj, "name", path, str),
        direction=direction,
        pitch=_get(obj, "Pitch", path),
        width=_get(obj, "Width", path),
        min_l=_get(obj, "MinL", path),
        max_l=_get(obj, "MaxL", path),
        end_to_end=_get(obj, "EndToEnd", path),
        offset=_get(obj, "Offset", path),
        unit_r=_get(obj, "UnitR", path),
        unit_c=_get(obj, "UnitC", path),
        colors=tuple(colors),
    )


def _parse_via(obj: dict, path: str) -> ViaRules:
    return ViaRules(
        name=_get(obj, "name", path, str),
        below=_get(obj, "From", path, str),
        above=_get(obj, "To", path, str),
        width_x=_get(obj, "WidthX", path),
        width_y=_get(obj, "WidthY", path),
        space_x=_get(obj, "SpaceX", path),
        space_y=_get(obj, "SpaceY", path),
        venc_a_l=_get(obj, "VencA_L", path),
        venc_a_h=_get(obj, "VencA_H", path),
        venc_p_l=_get(obj, "VencP_L", path),
        venc_p_h=_get(obj, "VencP_H", path),
        r=_get(obj, "R", path),
    )


def validate(pdk: Pdk) -> None:
    """Check every structural invariant; raise PdkError naming the rule."""
    _require(len(pdk.layers) > 0, "layers: stack is empty")
    for l in pdk.layers:
        p = f"layers[{l.name}]"
        _require(l.width > 0, f"{p}.Width: must be > 0")
        _require(l.pitch > l.width, f"{p}.Pitch: must exceed Width ({l.pitch} <= {l.width})")
        _require(0 < l.min_l <= l.max_l, f"{p}.MinL/MaxL: need 0 < MinL <= MaxL")
        _require(l.end_to_end > 0, f"{p}.EndToEnd: must be > 0")
        _require(0 <= l.offset < l.pitch, f"{p}.Offset: must satisfy 0 <= Offset < Pitch")
        _require(l.unit_r >= 0 and l.unit_c >= 0, f"{p}.UnitR/UnitC: must be >= 0")
    for a, b in zip(pdk.layers, pdk.layers[1:]):
        _require(a.direction != b.direction,
                 f"layers[{a.name}]/[{b.name}]: adjacent layers must alternate Direction")
        via = None
        for v in pdk.vias:
            if v.below == a.name and v.above == b.name:
                via = v
        _require(via is not None, f"vias: no rules for adjacent pair {a.name}/{b.name}")
    # same-direction layers must nest so upper tracks land on lower stop grids
    for lo, hi in zip(pdk.layers, pdk.layers[2:]):
        _require(hi.pitch % lo.pitch == 0,
                 f"layers[{hi.name}].Pitch: must be a multiple of {lo.name}.Pitch for via landing")
        _require((hi.offset - lo.offset) % lo.pitch == 0,
                 f"layers[{hi.name}].Offset: must be congruent to {lo.name}.Offset mod {lo.name}.Pitch")
    for v in pdk.vias:
        p = f"vias[{v.name}]"
        for fname, val in (("WidthX", v.width_x), ("WidthY", v.width_y),
                           ("SpaceX", v.space_x), ("SpaceY", v.space_y)):
            _require(val > 0, f"{p}.{fname}: must be > 0")
        for fname, val in (("VencA_L", v.venc_a_l), ("VencA_H", v.venc_a_h),
                           ("VencP_L", v.venc_p_l), ("VencP_H", v.venc_p_h)):
            _require(val >= 0, f"{p}.{fname}: must be >= 0")
        _require(v.r >= 0, f"{p}.R: must be >= 0")
        ib, ia = pdk.layer_index(v.below), pdk.layer_index(v.above)
        _require(ia == ib + 1, f"{p}: layers {v.below}/{v.above} are not adjacent in the stack")
        lo, hi = pdk.layer(v.below), pdk.layer(v.above)
        cut_across_lo = v.width_x if lo.direction == VERTICAL else v.width_y
        cut_across_hi = v.width_x if hi.direction == VERTICAL else v.width_y
        _require(lo.width >= cut_across_lo + 2 * v.venc_p_l,
                 f"{p}: {v.below}.Width too small for cut + 2*VencP_L")
        _require(hi.width >= cut_across_hi + 2 * v.venc_p_h,
                 f"{p}: {v.above}.Width too small for cut + 2*VencP_H")


def load_pdk(path: str | Path) -> Pdk:
    """Load and validate a rule file; raises PdkError with a field path on bad input."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise PdkError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PdkError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise PdkError(f"{path}: top level must be an object")
    name = _get(doc, "name", "pdk", str)
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise PdkError("pdk.layers: expected non-empty list")
    layers = tuple(_parse_layer(o, f"layers[{i}]") for i, o in enumerate(raw_layers))
    raw_vias = doc.get("vias", [])
    if not isinstance(raw_vias, list):
        raise PdkError("pdk.vias: expected list")
    vias = tuple(_parse_via(o, f"vias[{i}]") for i, o in enumerate(raw_vias))
    feol_obj = doc.get("feol")
    if not isinstance(feol_obj, dict):
        raise PdkError("pdk.feol: expected object")
    feol = FeolRules(
        poly_pitch=_get(feol_obj, "PolyPitch", "feol"),
        fin_pitch=_get(feol_obj, "FinPitch", "feol"),
        row_height=_get(feol_obj, "RowHeight", "feol"),
    )
    names = [l.name for l in layers]
    if len(set(names)) != len(names):
        raise PdkError("pdk.layers: duplicate layer names")
    raw_forbidden = doc.get("ForbiddenAdjacency", [])
    if not isinstance(raw_forbidden, list):
        raise PdkError("pdk.ForbiddenAdjacency: expected list of via-name pairs")
    forbidden = []
    via_names = {v.name for v in vias}
    for i, pair in enumerate(raw_forbidden):
        if (not isinstance(pair, list) or len(pair) != 2
                or any(p not in via_names for p in pair)):
            raise PdkError(f"ForbiddenAdjacency[{i}]: expected a pair of via names")
        forbidden.append(tuple(pair))
    pdk = Pdk(name=name, layers=layers, vias=vias, feol=feol,
              forbidden_adjacency=tuple(forbidden))
    validate(pdk)
    return pdk


def builtin_pdk_path(name: str) -> Path:
    return Path(__file__).parent / "pdks" / f"{name}.json"


def load_builtin(name: str) -> Pdk:
    return load_pdk(builtin_pdk_path(name))
