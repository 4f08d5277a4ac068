"""Hierarchy recognition and constraint extraction.

Modules come from the netlist's own instance tree (flat device paths keep
the prefixes); inside each module, library patterns claim device groups
greedily (largest pattern first, lexicographic device-set tie-break) and
whatever remains becomes single-device leaves. Separately, array detection
groups three or more structurally identical elements hanging off a shared
net chain or star; groups of bare R/C devices fold into one array primitive,
groups of subcircuit instances emit matching and alignment constraints.

Symmetry extraction walks labeled paths from a designated differential input
net pair: two equal-signature blocks reachable by the same path-label sets
from opposite seeds (with a device-disjoint witness) form a vertical-axis
symmetric pair; blocks seeing both seeds identically are self-symmetric.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import graph as cgraph
from .netlist import Device, DeviceKind, FlatNetlist, MOS_KINDS, parse_spice
from .primgen import COMMON_CENTROID, INTERDIGITATED, PLAIN

log = logging.getLogger(__name__)


class AnnotateError(Exception):
    pass


# ---------------------------------------------------------------------------
# pattern library

@dataclass(frozen=True)
class LibraryEntry:
    pattern: cgraph.PatternGraph
    generator: str                        # primitive type
    kind: DeviceKind
    pin_map: tuple[tuple[str, str], ...]  # primitive pin -> pattern port

    @property
    def device_count(self) -> int:
        return self.pattern.device_count


def load_pattern_library(path: str | Path) -> list[LibraryEntry]:
    """Directory with one SPICE file per pattern and a manifest.json."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    entries: list[LibraryEntry] = []
    for item in manifest:
        netl = parse_spice((path / item["pattern"]).read_text())
        if len(netl.subckts) != 1:
            raise AnnotateError(f"{item['pattern']}: expected exactly one subckt")
        sub = netl.subckts[0]
        pat = cgraph.pattern_graph(sub)
        pins = item.get("pins")
        if pins is None:
            pins = {p: p for p in sub.ports}
        entries.append(LibraryEntry(
            pattern=pat, generator=item["generator"],
            kind=DeviceKind(item["kind"]),
            pin_map=tuple(sorted(pins.items()))))
    return entries


def builtin_library_path() -> Path:
    return Path(__file__).parent / "patterns"


# ---------------------------------------------------------------------------
# hierarchy tree

@dataclass
class Leaf:
    id: str
    module: str
    ptype: str
    devices: tuple[str, ...]              # flat paths; array order is meaningful
    units: tuple[int, ...]
    kind: DeviceKind | None = None
    fins: int = 1
    unit_value: Fraction | None = None
    pattern_style: str = INTERDIGITATED
    bindings: tuple[tuple[str, str], ...] = ()   # primitive pin -> flat net
    source: str = "device"

    def binding_map(self) -> dict[str, str]:
        return dict(self.bindings)


@dataclass
class ModuleNode:
    path: str
    subckt: str
    children: list[str] = field(default_factory=list)    # child module paths
    leaves: list[Leaf] = field(default_factory=list)

    def block_ids(self) -> list[str]:
        kids = [p.rsplit("/", 1)[-1] for p in self.children]
        return sorted(kids) + sorted(l.id for l in self.leaves)


@dataclass
class HierTree:
    top: str
    modules: dict[str, ModuleNode]

    def node(self, path: str) -> ModuleNode:
        return self.modules[path]

    def block_devices(self, module_path: str, block_id: str) -> tuple[str, ...]:
        node = self.modules[module_path]
        for leaf in node.leaves:
            if leaf.id == block_id:
                return leaf.devices
        child_path = f"{module_path}/{block_id}" if module_path else block_id
        if child_path in self.modules:
            out: list[str] = []
            for path, mod in self.modules.items():
                if path == child_path or path.startswith(child_path + "/"):
                    for leaf in mod.leaves:
                        out.extend(leaf.devices)
            return tuple(sorted(out))
        raise AnnotateError(f"no block {block_id!r} in module {module_path!r}")

    def leaf_partition_ok(self, flat: FlatNetlist) -> bool:
        owned: list[str] = []
        for mod in self.modules.values():
            for leaf in mod.leaves:
                owned.extend(leaf.devices)
        return sorted(owned) == sorted(d.name for d in flat.devices)


def _module_of(device_path: str) -> str:
    return device_path.rsplit("/", 1)[0] if "/" in device_path else ""


def _basename(path: str) -> str:
    return path.rsplit("/", 1)[-1]


def _mos_units(dev: Device) -> tuple[int, int]:
    """(units, fins) from the multiplier/finger/fin parameters."""
    m = dev.param("m", Fraction(1))
    nf = dev.param("nf", Fraction(1))
    fins = dev.param("nfin", Fraction(1))
    units = m * nf
    if units.denominator != 1 or fins.denominator != 1:
        raise AnnotateError(f"{dev.name}: non-integer m/nf/nfin")
    return int(units), int(fins)


def _device_leaf(dev: Device) -> Leaf:
    module = _module_of(dev.name)
    base = _basename(dev.name)
    if dev.kind in MOS_KINDS:
        units, fins = _mos_units(dev)
        roles = ("d", "g", "s", "b")
        return Leaf(id=base, module=module, ptype="single_mos",
                    devices=(dev.name,), units=(units,), kind=dev.kind, fins=fins,
                    bindings=tuple(zip(roles, dev.pins)), source="device")
    value = dev.param("value")
    m = dev.param("m", Fraction(1))
    units = int(m) if m.denominator == 1 else 1
    if dev.kind == DeviceKind.CAP:
        return Leaf(id=base, module=module, ptype="cap_array", devices=(dev.name,),
                    units=(units,), unit_value=value / units, pattern_style=PLAIN,
                    bindings=(("top", dev.pins[0]), ("b0", dev.pins[1])), source="device")
    return Leaf(id=base, module=module, ptype="res_array", devices=(dev.name,),
                units=(units,), unit_value=value / units, pattern_style=PLAIN,
                bindings=(("p0", dev.pins[0]), ("m0", dev.pins[1])), source="device")


# ---------------------------------------------------------------------------
# recognize

def recognize(flat: FlatNetlist, library: list[LibraryEntry],
              preclaimed: list[Leaf] | None = None) -> HierTree:
    """Greedy non-overlapping pattern cover inside every module.

    preclaimed leaves (e.g. folded arrays) own their devices before any
    pattern runs; unclaimed devices end up as single-device leaves.
    """
    if not library:
        raise AnnotateError("pattern library is empty")
    modules: dict[str, ModuleNode] = {}
    for path, sub in flat.instances:
        modules[path] = ModuleNode(path=path, subckt=sub)
    for path, node in modules.items():
        if path:
            parent = _module_of(path)
            modules[parent].children.append(path)
    for node in modules.values():
        node.children.sort()

    claimed: set[str] = set()
    for leaf in preclaimed or []:
        modules[leaf.module].leaves.append(leaf)
        claimed.update(leaf.devices)

    per_module: dict[str, list[Device]] = {}
    for dev in flat.devices:
        per_module.setdefault(_module_of(dev.name), []).append(dev)

    ordered_lib = sorted(library, key=lambda e: (-e.device_count, e.pattern.name))
    for path in sorted(modules):
        devs = [d for d in per_module.get(path, []) if d.name not in claimed]
        if not devs:
            continue
        local_graph = cgraph.graph_from_devices(devs)
        candidates: list[tuple[int, tuple[str, ...], LibraryEntry, cgraph.Match]] = []
        for entry in ordered_lib:
            for match in cgraph.find_matches(local_graph, entry.pattern):
                devset = tuple(sorted(match.target_devices()))
                candidates.append((-entry.device_count, devset, entry, match))
        candidates.sort(key=lambda c: (c[0], c[1]))
        for _, devset, entry, match in candidates:
            if any(d in claimed for d in devset):
                continue
            claimed.update(devset)
            modules[path].leaves.append(_pattern_leaf(path, entry, match, flat))
        for dev in devs:
            if dev.name not in claimed:
                claimed.add(dev.name)
                modules[path].leaves.append(_device_leaf(dev))
    for node in modules.values():
        node.leaves.sort(key=lambda l: l.id)
    return HierTree(top=flat.top, modules=modules)


def _pattern_leaf(module: str, entry: LibraryEntry, match: cgraph.Match,
                  flat: FlatNetlist) -> Leaf:
    dev_map = match.devices()           # pattern device -> flat device
    net_map = match.nets()
    ordered = [dev_map[p] for p in sorted(dev_map)]   # pattern order: m1 -> a, m2 -> b
    units: list[int] = []
    fins = 1
    kind = entry.kind
    for dname in ordered:
        u, f = _mos_units(flat.device(dname))
        units.append(u)
        fins = max(fins, f)
    bindings = tuple((pin, net_map[port]) for pin, port in entry.pin_map)
    leaf_id = "+".join(sorted(_basename(d) for d in ordered))
    return Leaf(id=leaf_id, module=module, ptype=entry.generator,
                devices=tuple(ordered), units=tuple(units), kind=kind, fins=fins,
                bindings=bindings, source=f"pattern:{entry.pattern.name}")


# ---------------------------------------------------------------------------
# array detection

@dataclass(frozen=True)
class ArrayGroup:
    module: str
    topology: str                          # 'chain' or 'star'
    elements: tuple[str, ...]              # element ids in order (basenames)
    element_devices: tuple[tuple[str, ...], ...]
    common_nets: tuple[str, ...]


def detect_arrays(flat: FlatNetlist, min_size: int = 3) -> list[ArrayGroup]:
    g = cgraph.build_graph(flat)
    module_paths = {path for path, _ in flat.instances}
    groups: list[ArrayGroup] = []

    for module in sorted(module_paths):
        elements: dict[str, tuple[str, ...]] = {}
        for dev in flat.devices:
            if _module_of(dev.name) == module:
                elements[_basename(dev.name)] = (dev.name,)
        for path in module_paths:
            if path and _module_of(path) == module:
                devs = tuple(sorted(d.name for d in flat.devices
                                    if d.name.startswith(path + "/")))
                if devs:
                    elements[_basename(path)] = devs

        external = frozenset(flat.ports)
        by_sig: dict[tuple, list[str]] = {}
        for eid in sorted(elements):
            devs = elements[eid]
            if len(devs) == 1:
                key = ("dev", cgraph.structural_signature(g, devs[0], 1))
            else:
                key = ("inst", cgraph.group_signature(g, devs, external=external))
            by_sig.setdefault(key, []).append(eid)

        for key in sorted(by_sig):
            members = by_sig[key]
            if len(members) < min_size:
                continue
            group = _classify_group(g, module, members, elements)
            if group is not None:
                groups.append(group)
    return groups


def _classify_group(g: cgraph.CircuitGraph, module: str, members: list[str],
                    elements: dict[str, tuple[str, ...]]) -> ArrayGroup | None:
    member_set = set(members)
    dev_owner: dict[str, str] = {}
    for eid in members:
        for d in elements[eid]:
            dev_owner[d] = eid

    net_elems: dict[str, set[str]] = {}
    net_outside: dict[str, bool] = {}
    for net, pins in g.net_pins.items():
        touched: set[str] = set()
        outside = False
        for dev, _ in pins:
            owner = dev_owner.get(dev)
            if owner is None:
                outside = True
            else:
                touched.add(owner)
        if touched:
            net_elems[net] = touched
            net_outside[net] = outside

    common = sorted(n for n, es in net_elems.items()
                    if es == member_set and not net_outside[n])
    links = {n: es for n, es in net_elems.items()
             if len(es) == 2 and not net_outside[n]
             and n not in common}

    # chain: link nets must form a simple path over all members
    adj: dict[str, list[tuple[str, str]]] = {m: [] for m in members}
    for net, es in sorted(links.items()):
        a, b = sorted(es)
        adj[a].append((b, net))
        adj[b].append((a, net))
    degrees = {m: len(adj[m]) for m in members}
    ends = sorted(m for m, d in degrees.items() if d == 1)
    if (len(ends) == 2 and all(d <= 2 for d in degrees.values())
            and sum(degrees.values()) == 2 * (len(members) - 1)):
        order = [ends[0]]
        seen = {ends[0]}
        while True:
            nxt = [b for b, _ in adj[order[-1]] if b not in seen]
            if not nxt:
                break
            order.append(nxt[0])
            seen.add(nxt[0])
        if len(order) == len(members):
            return ArrayGroup(module=module, topology="chain", elements=tuple(order),
                              element_devices=tuple(elements[e] for e in order),
                              common_nets=tuple(common))
    if common:
        # star: one shared net touching every element exactly once, through the
        # same device pin each time (rejects rails and shared bias nodes)
        star = []
        for n in common:
            if len(g.net_pins[n]) != len(members):
                continue
            if len({role for _, role in g.net_pins[n]}) == 1:
                star.append(n)
        if star:
            order = sorted(members)
            return ArrayGroup(module=module, topology="star", elements=tuple(order),
                              element_devices=tuple(elements[e] for e in order),
                              common_nets=tuple(star))
    return None


def fold_array_leaf(group: ArrayGroup, flat: FlatNetlist) -> Leaf | None:
    """Turn a group of bare R or C devices into one array-primitive leaf."""
    devs = [flat.device(d[0]) for d in group.element_devices]
    if any(len(d) != 1 for d in group.element_devices):
        return None
    kinds = {d.kind for d in devs}
    if kinds not in ({DeviceKind.CAP}, {DeviceKind.RES}):
        return None
    values = [d.param("value") for d in devs]
    unit = min(values)
    units = []
    for v in values:
        q = v / unit
        if q.denominator != 1:
            return None
        units.append(int(q))
    member_ids = tuple(d.name for d in devs)
    leaf_id = "+".join(_basename(d) for d in member_ids)
    if kinds == {DeviceKind.CAP}:
        if group.topology != "star":
            return None
        common = group.common_nets[0]
        bindings = [("top", common)]
        for i, d in enumerate(devs):
            other = d.pins[1] if d.pins[0] == common else d.pins[0]
            bindings.append((f"b{i}", other))
        return Leaf(id=leaf_id, module=group.module, ptype="cap_array",
                    devices=member_ids, units=tuple(units), unit_value=unit,
                    pattern_style=COMMON_CENTROID, bindings=tuple(bindings),
                    source="array")
    bindings = []
    for i, d in enumerate(devs):
        bindings += [(f"p{i}", d.pins[0]), (f"m{i}", d.pins[1])]
    return Leaf(id=leaf_id, module=group.module, ptype="res_array",
                devices=member_ids, units=tuple(units), unit_value=unit,
                pattern_style=INTERDIGITATED if len(devs) == 2 else PLAIN,
                bindings=tuple(bindings), source="array")


# ---------------------------------------------------------------------------
# constraints

@dataclass
class ConstraintSet:
    symmetric_pairs: list[tuple[str, str, str, str]] = field(default_factory=list)
    self_symmetric: list[tuple[str, str]] = field(default_factory=list)
    matching_groups: list[tuple[str, tuple[str, ...]]] = field(default_factory=list)
    alignment_groups: list[tuple[str, tuple[str, ...], str]] = field(default_factory=list)
    net_budgets: dict[str, int] = field(default_factory=dict)    # flat net -> milliohm
    input_pair: tuple[str, str] | None = None
    shielded_nets: tuple[str, ...] = ()
    diagnostics: list[str] = field(default_factory=list)

    def module_pairs(self, module: str):
        return [(a, b, ax) for m, a, b, ax in self.symmetric_pairs if m == module]

    def module_selfs(self, module: str):
        return [b for m, b in self.self_symmetric if m == module]

    def module_matching(self, module: str):
        return [blocks for m, blocks in self.matching_groups if m == module]

    def module_alignment(self, module: str):
        return [(blocks, edge) for m, blocks, edge in self.alignment_groups if m == module]


@dataclass(frozen=True)
class EngineerSpec:
    """Parsed constraint spec file (budgets, seed override, extras)."""
    budgets: tuple[tuple[str, int], ...] = ()     # (net, milliohm)
    input_pair: tuple[str, str] | None = None
    shields: tuple[str, ...] = ()
    symmetric: tuple[tuple[str, str, str, str], ...] = ()


def parse_espec(text: str) -> EngineerSpec:
    budgets: list[tuple[str, int]] = []
    pair = None
    shields: list[str] = []
    extra_sym: list[tuple[str, str, str, str]] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.lower().split()
        kw = toks[0]
        if kw == "budget" and len(toks) == 3:
            budgets.append((toks[1], round(float(toks[2]) * 1000)))
        elif kw == "input_pair" and len(toks) == 3:
            pair = (toks[1], toks[2])
        elif kw == "shield" and len(toks) == 2:
            shields.append(toks[1])
        elif kw == "symmetric" and len(toks) in (4, 5):
            module = "" if toks[1] == "." else toks[1]
            axis = toks[4] if len(toks) == 5 else "vertical"
            extra_sym.append((module, toks[2], toks[3], axis))
        else:
            raise AnnotateError(f"spec line {no}: cannot parse {raw.strip()!r}")
    return EngineerSpec(budgets=tuple(budgets), input_pair=pair,
                        shields=tuple(shields), symmetric=tuple(extra_sym))


def gen_electrical_constraints(flat: FlatNetlist, espec: EngineerSpec | None) -> dict[str, int]:
    if espec is None:
        return {}
    budgets: dict[str, int] = {}
    for net, mohm in espec.budgets:
        if net not in flat.nets:
            raise AnnotateError(f"budget names unknown net {net!r}")
        if mohm <= 0:
            raise AnnotateError(f"budget for {net!r} must be positive")
        budgets[net] = mohm
    return budgets


def _module_seed(tree: HierTree, module_path: str,
                 espec: EngineerSpec | None) -> tuple[str, str] | None:
    """Differential seed for one module: spec override at top, else the gate
    nets of the shallowest diff pair in the module's subtree."""
    if espec and espec.input_pair and module_path == "":
        return espec.input_pair
    best: tuple[int, str, str, Leaf] | None = None
    for path, node in tree.modules.items():
        in_subtree = (path == module_path
                      or not module_path
                      or path.startswith(module_path + "/"))
        if not in_subtree:
            continue
        depth = 0 if not path else path.count("/") + 1
        for leaf in node.leaves:
            if leaf.ptype == "diff_pair":
                key = (depth, path, leaf.id)
                if best is None or key < (best[0], best[1], best[2]):
                    best = (depth, path, leaf.id, leaf)
    if best is None:
        return None
    b = best[3].binding_map()
    return (b["ga"], b["gb"])


def _seed_paths(g: cgraph.CircuitGraph, seed: str, block_of: dict[str, str],
                max_devices: int = 5, step_cap: int = 20000):
    """Label-paths from a seed net to every block (device-hop bounded DFS).

    Bulk pins are not traversed: substrate ties would otherwise turn the
    supply rails into shortcuts between unrelated blocks.
    """
    out: dict[str, list[tuple[tuple, frozenset]]] = {}
    budget = [step_cap]

    def dfs(net: str, labels: tuple, used: frozenset):
        if budget[0] <= 0 or len(used) >= max_devices:
            return
        budget[0] -= 1
        for dev, role in g.net_pins[net]:
            if dev in used or role == "bulk":
                continue
            rc = cgraph.role_class(role)
            kind = g.device_kinds[dev].value
            blk = block_of.get(dev)
            if blk is not None:
                out.setdefault(blk, []).append((labels + ((kind, rc),), used | {dev}))
            for role2, net2 in g.device_pins[dev]:
                if net2 == net or role2 == "bulk":
                    continue
                dfs(net2, labels + ((kind, rc, cgraph.role_class(role2)),),
                    used | {dev})

    if seed in g.net_pins:
        dfs(seed, (), frozenset())
    return out


def gen_geometric_constraints(tree: HierTree, g: cgraph.CircuitGraph,
                              espec: EngineerSpec | None = None,
                              arrays: list[ArrayGroup] | None = None) -> ConstraintSet:
    cs = ConstraintSet()
    cs.input_pair = _module_seed(tree, "", espec)

    for group in arrays or []:
        all_devs = tuple(sorted(d for e in group.element_devices for d in e))
        folded = any(l.source == "array" and tuple(sorted(l.devices)) == all_devs
                     for l in tree.modules[group.module].leaves)
        if folded:
            continue    # became one primitive; its matching lives inside the cell
        cs.matching_groups.append((group.module, group.elements))
        cs.alignment_groups.append((group.module, group.elements, "bottom"))

    for module_path in sorted(tree.modules):
        node = tree.modules[module_path]
        blocks = node.block_ids()
        if not blocks:
            continue
        block_sig: dict[str, str] = {}
        block_devs: dict[str, tuple[str, ...]] = {}
        for bid in blocks:
            devs = tree.block_devices(module_path, bid)
            block_devs[bid] = devs
            block_sig[bid] = cgraph.group_signature(g, devs)

        # matching: equal structure and equal parameters
        by_match: dict[tuple, list[str]] = {}
        for leaf in node.leaves:
            key = (leaf.ptype, str(leaf.kind), leaf.units, leaf.fins,
                   str(leaf.unit_value), block_sig[leaf.id],
                   tuple(sorted(g.device_fingerprints[d] for d in leaf.devices)))
            by_match.setdefault(key, []).append(leaf.id)
        for key in sorted(by_match):
            ids = sorted(by_match[key])
            if len(ids) >= 2:
                cs.matching_groups.append((module_path, tuple(ids)))

        seed = _module_seed(tree, module_path, espec)
        if seed is None:
            continue
        block_of: dict[str, str] = {}
        for bid in blocks:
            for d in block_devs[bid]:
                block_of[d] = bid
        paths_a = _seed_paths(g, seed[0], block_of)
        paths_b = _seed_paths(g, seed[1], block_of)

        def min_paths(paths, bid):
            """Labels and witnesses of the shortest arrivals only."""
            lst = paths.get(bid, ())
            if not lst:
                return frozenset(), ()
            shortest = min(len(labels) for labels, _ in lst)
            sel = tuple((l, d) for l, d in lst if len(l) == shortest)
            return frozenset(l for l, _ in sel), sel

        paired: set[str] = set()
        for bid in blocks:
            la, _ = min_paths(paths_a, bid)
            lb, _ = min_paths(paths_b, bid)
            if la and la == lb:
                cs.self_symmetric.append((module_path, bid))
                paired.add(bid)
        for x in blocks:
            if x in paired:
                continue
            lax, wax = min_paths(paths_a, x)
            lbx, _ = min_paths(paths_b, x)
            if not lax and not lbx:
                continue
            partners = []
            for y in blocks:
                if y <= x or y in paired or block_sig[y] != block_sig[x]:
                    continue
                lay, _ = min_paths(paths_a, y)
                lby, wby = min_paths(paths_b, y)
                if lax == lby and lbx == lay and (lax or lbx):
                    if _disjoint_witness(wax, wby):
                        partners.append(y)
            if not partners:
                continue
            if len(partners) > 1:
                cs.diagnostics.append(
                    f"{module_path or '<top>'}: block {x!r} pairs ambiguously with "
                    f"{partners}; taking {sorted(partners)[0]!r}")
            y = sorted(partners)[0]
            cs.symmetric_pairs.append((module_path, x, y, "vertical"))
            paired.update({x, y})

    if espec:
        for module, a, b, axis in espec.symmetric:
            cs.symmetric_pairs.append((module, a, b, axis))
        cs.shielded_nets = espec.shields
    _check_constraints(cs)
    return cs


def _disjoint_witness(paths_x, paths_y) -> bool:
    for _, devs_x in paths_x:
        for _, devs_y in paths_y:
            if not (devs_x & devs_y):
                return True
    return False


def _check_constraints(cs: ConstraintSet) -> None:
    seen: set[tuple[str, str, str]] = set()
    for module, a, b, axis in cs.symmetric_pairs:
        for blk in (a, b):
            key = (module, blk, axis)
            if key in seen:
                raise AnnotateError(
                    f"block {blk!r} appears in two symmetric pairs on the {axis} axis")
            seen.add(key)


# ---------------------------------------------------------------------------
# full annotation stage

@dataclass
class Annotation:
    tree: HierTree
    constraints: ConstraintSet
    arrays: list[ArrayGroup]


def annotate_design(flat: FlatNetlist, library: list[LibraryEntry],
                    espec: EngineerSpec | None = None) -> Annotation:
    arrays = detect_arrays(flat)
    folded: list[Leaf] = []
    for group in arrays:
        leaf = fold_array_leaf(group, flat)
        if leaf is not None:
            folded.append(leaf)
    tree = recognize(flat, library, preclaimed=folded)
    g = cgraph.build_graph(flat)
    cs = gen_geometric_constraints(tree, g, espec, arrays)
    cs.net_budgets = gen_electrical_constraints(flat, espec)
    return Annotation(tree=tree, constraints=cs, arrays=arrays)


# ---------------------------------------------------------------------------
# stage serialization (annotation.json)

def _leaf_to_json(leaf: Leaf) -> dict:
    return {
        "id": leaf.id, "module": leaf.module, "ptype": leaf.ptype,
        "devices": list(leaf.devices), "units": list(leaf.units),
        "kind": leaf.kind.value if leaf.kind else None,
        "fins": leaf.fins,
        "unit_value": str(leaf.unit_value) if leaf.unit_value is not None else None,
        "pattern_style": leaf.pattern_style,
        "bindings": sorted(map(list, leaf.bindings)),
        "source": leaf.source,
    }


def _leaf_from_json(obj: dict) -> Leaf:
    return Leaf(
        id=obj["id"], module=obj["module"], ptype=obj["ptype"],
        devices=tuple(obj["devices"]), units=tuple(obj["units"]),
        kind=DeviceKind(obj["kind"]) if obj["kind"] else None,
        fins=obj["fins"],
        unit_value=Fraction(obj["unit_value"]) if obj["unit_value"] else None,
        pattern_style=obj["pattern_style"],
        bindings=tuple((a, b) for a, b in obj["bindings"]),
        source=obj["source"],
    )


def annotation_to_json(ann: Annotation) -> dict:
    return {
        "tree": {
            "top": ann.tree.top,
            "modules": {
                path: {"subckt": node.subckt,
                       "children": sorted(node.children),
                       "leaves": [_leaf_to_json(l) for l in
                                  sorted(node.leaves, key=lambda l: l.id)]}
                for path, node in sorted(ann.tree.modules.items())
            },
        },
        "constraints": {
            "symmetric_pairs": sorted(map(list, ann.constraints.symmetric_pairs)),
            "self_symmetric": sorted(map(list, ann.constraints.self_symmetric)),
            "matching_groups": sorted([m, list(g)] for m, g in ann.constraints.matching_groups),
            "alignment_groups": sorted([m, list(g), e] for m, g, e in ann.constraints.alignment_groups),
            "net_budgets": dict(sorted(ann.constraints.net_budgets.items())),
            "input_pair": list(ann.constraints.input_pair) if ann.constraints.input_pair else None,
            "shielded_nets": sorted(ann.constraints.shielded_nets),
            "diagnostics": list(ann.constraints.diagnostics),
        },
        "arrays": [{"module": a.module, "topology": a.topology,
                    "elements": list(a.elements),
                    "element_devices": [list(e) for e in a.element_devices],
                    "common_nets": list(a.common_nets)}
                   for a in ann.arrays],
    }


def annotation_from_json(doc: dict) -> Annotation:
    tree_obj = doc["tree"]
    modules = {}
    for path, mobj in tree_obj["modules"].items():
        modules[path] = ModuleNode(
            path=path, subckt=mobj["subckt"], children=list(mobj["children"]),
            leaves=[_leaf_from_json(o) for o in mobj["leaves"]])
    cobj = doc["constraints"]
    cs = ConstraintSet(
        symmetric_pairs=[tuple(x) for x in cobj["symmetric_pairs"]],
        self_symmetric=[tuple(x) for x in cobj["self_symmetric"]],
        matching_groups=[(m, tuple(g)) for m, g in cobj["matching_groups"]],
        alignment_groups=[(m, tuple(g), e) for m, g, e in cobj["alignment_groups"]],
        net_budgets=dict(cobj["net_budgets"]),
        input_pair=tuple(cobj["input_pair"]) if cobj["input_pair"] else None,
        shielded_nets=tuple(cobj["shielded_nets"]),
        diagnostics=list(cobj["diagnostics"]),
    )
    arrays = [ArrayGroup(module=a["module"], topology=a["topology"],
                         elements=tuple(a["elements"]),
                         element_devices=tuple(tuple(e) for e in a["element_devices"]),
                         common_nets=tuple(a["common_nets"]))
              for a in doc["arrays"]]
    return Annotation(tree=HierTree(top=tree_obj["top"], modules=modules),
                      constraints=cs, arrays=arrays)
