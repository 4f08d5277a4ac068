"""Bipartite circuit graph and exact labeled subgraph matching.

Devices and nets are the two vertex classes; each device pin contributes one
edge labeled with its role. MOS drain and source are an interchangeable role
pair during matching and in neighborhood signatures, so a mirrored device
matches without pattern duplication.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .netlist import Device, DeviceKind, FlatNetlist, MOS_KINDS, Subckt, pin_roles


class SearchBudgetExceeded(Exception):
    """The matcher hit its node-expansion cap; results would be incomplete."""


def role_class(role: str) -> str:
    return "ds" if role in ("drain", "source") else role


@dataclass(frozen=True)
class CircuitGraph:
    """Immutable bipartite graph; construction only through build_graph/pattern_graph."""

    device_kinds: dict[str, DeviceKind]
    device_fingerprints: dict[str, tuple]
    device_pins: dict[str, tuple[tuple[str, str], ...]]   # dev -> ((role, net), ...)
    net_pins: dict[str, tuple[tuple[str, str], ...]]      # net -> ((dev, role), ...)

    @property
    def devices(self) -> list[str]:
        return list(self.device_kinds)

    @property
    def nets(self) -> list[str]:
        return list(self.net_pins)

    def net_degree(self, net: str) -> int:
        return len(self.net_pins[net])

    def edges(self):
        for dev, pins in self.device_pins.items():
            for role, net in pins:
                yield dev, role, net


@dataclass(frozen=True)
class PatternGraph:
    name: str
    graph: CircuitGraph
    ports: tuple[str, ...]       # boundary nets: may map onto any target net

    @property
    def device_count(self) -> int:
        return len(self.graph.device_kinds)

    def internal_nets(self) -> set[str]:
        return set(self.graph.net_pins) - set(self.ports)


@dataclass(frozen=True)
class Match:
    device_map: tuple[tuple[str, str], ...]   # pattern dev -> target dev
    net_map: tuple[tuple[str, str], ...]      # pattern net -> target net

    def devices(self) -> dict[str, str]:
        return dict(self.device_map)

    def nets(self) -> dict[str, str]:
        return dict(self.net_map)

    def target_devices(self) -> frozenset[str]:
        return frozenset(t for _, t in self.device_map)


def graph_from_devices(devices) -> CircuitGraph:
    kinds: dict[str, DeviceKind] = {}
    fingerprints: dict[str, tuple] = {}
    dev_pins: dict[str, tuple] = {}
    net_pins: dict[str, list] = {}
    for d in devices:
        kinds[d.name] = d.kind
        fingerprints[d.name] = tuple(sorted(d.params))
        roles = pin_roles(d.kind)
        dev_pins[d.name] = tuple(zip(roles, d.pins))
        for role, net in zip(roles, d.pins):
            net_pins.setdefault(net, []).append((d.name, role))
    return CircuitGraph(
        device_kinds=kinds,
        device_fingerprints=fingerprints,
        device_pins=dev_pins,
        net_pins={n: tuple(p) for n, p in sorted(net_pins.items())},
    )


def build_graph(flat: FlatNetlist) -> CircuitGraph:
    return graph_from_devices(flat.devices)


def pattern_graph(subckt: Subckt, name: str | None = None) -> PatternGraph:
    if subckt.instances:
        raise ValueError(f"pattern {subckt.name!r} must be flat (no instances)")
    return PatternGraph(name=name or subckt.name,
                        graph=graph_from_devices(subckt.devices),
                        ports=subckt.ports)


def subgraph(g: CircuitGraph, device_ids) -> CircuitGraph:
    """Induced subgraph on a device subset (nets restricted to their edges inside)."""
    keep = set(device_ids)
    kinds = {d: k for d, k in g.device_kinds.items() if d in keep}
    fps = {d: f for d, f in g.device_fingerprints.items() if d in keep}
    dev_pins = {d: p for d, p in g.device_pins.items() if d in keep}
    net_pins: dict[str, list] = {}
    for d, pins in dev_pins.items():
        for role, net in pins:
            net_pins.setdefault(net, []).append((d, role))
    return CircuitGraph(kinds, fps, dev_pins, {n: tuple(p) for n, p in sorted(net_pins.items())})


# ---------------------------------------------------------------------------
# subgraph isomorphism

def find_matches(target: CircuitGraph, pattern: PatternGraph,
                 budget: int = 10**6) -> list[Match]:
    """All label-preserving embeddings of `pattern` in `target`.

    Injective on devices and nets; MOS drain/source may swap per device;
    internal pattern nets must map to target nets fully covered by the match
    (degree equality). Matches are deduplicated by target device set and
    returned sorted by that set.
    """
    if not pattern.graph.device_kinds:
        raise ValueError("empty pattern")
    pdevs = _search_order(pattern)
    internal = pattern.internal_nets()
    target_by_kind: dict[DeviceKind, list[str]] = {}
    for dev, kind in target.device_kinds.items():
        target_by_kind.setdefault(kind, []).append(dev)

    results: dict[frozenset, Match] = {}
    expansions = 0

    def orientations(dev_kind: DeviceKind):
        if dev_kind in MOS_KINDS:
            return (False, True)
        return (False,)

    def oriented_pins(g: CircuitGraph, dev: str, swap: bool):
        pins = g.device_pins[dev]
        if not swap:
            return pins
        flip = {"drain": "source", "source": "drain"}
        return tuple((flip.get(role, role), net) for role, net in pins)

    def extend(i: int, dmap: dict[str, str], nmap: dict[str, str],
               used_devs: set[str], used_nets: set[str]):
        nonlocal expansions
        if i == len(pdevs):
            key = frozenset(dmap.values())
            if key not in results:
                results[key] = Match(tuple(sorted(dmap.items())), tuple(sorted(nmap.items())))
            return
        pd = pdevs[i]
        pkind = pattern.graph.device_kinds[pd]
        for td in target_by_kind.get(pkind, ()):
            if td in used_devs:
                continue
            for swap in orientations(pkind):
                expansions += 1
                if expansions > budget:
                    raise SearchBudgetExceeded(
                        f"matching {pattern.name!r}: exceeded {budget} node expansions")
                trial_n: dict[str, str] = {}
                ok = True
                tpins = dict(oriented_pins(target, td, swap))
                for role, pnet in pattern.graph.device_pins[pd]:
                    tnet = tpins.get(role)
                    if tnet is None:
                        ok = False
                        break
                    have = nmap.get(pnet, trial_n.get(pnet))
                    if have is not None:
                        if have != tnet:
                            ok = False
                            break
                        continue
                    if tnet in used_nets or tnet in trial_n.values():
                        ok = False
                        break
                    if pnet in internal and target.net_degree(tnet) != pattern.graph.net_degree(pnet):
                        ok = False
                        break
                    trial_n[pnet] = tnet
                if not ok:
                    continue
                dmap[pd] = td
                used_devs.add(td)
                nmap.update(trial_n)
                used_nets.update(trial_n.values())
                extend(i + 1, dmap, nmap, used_devs, used_nets)
                del dmap[pd]
                used_devs.discard(td)
                for k, v in trial_n.items():
                    del nmap[k]
                    used_nets.discard(v)

    extend(0, {}, {}, set(), set())
    return [results[k] for k in sorted(results, key=lambda s: tuple(sorted(s)))]


def _search_order(pattern: PatternGraph) -> list[str]:
    """Connectivity-first ordering: each next device shares a net with a placed one."""
    g = pattern.graph
    remaining = sorted(g.device_kinds)
    order: list[str] = []
    placed_nets: set[str] = set()
    while remaining:
        adjacent = [d for d in remaining
                    if any(net in placed_nets for _, net in g.device_pins[d])]
        pick = adjacent[0] if adjacent else remaining[0]
        order.append(pick)
        remaining.remove(pick)
        placed_nets.update(net for _, net in g.device_pins[pick])
    return order


# ---------------------------------------------------------------------------
# neighborhood signatures

def structural_signature(g: CircuitGraph, vertex: str, radius: int) -> str:
    """Stable hash of the radius-r neighborhood unfolding around a vertex.

    Isomorphic neighborhoods hash equal (drain/source folded together, nets
    anonymous); collisions are possible and callers re-check with
    find_matches where it matters.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    memo: dict[tuple[str, int], tuple] = {}

    def key(v: str, r: int) -> tuple:
        if (v, r) in memo:
            return memo[(v, r)]
        if v in g.device_kinds:
            base: tuple = ("dev", g.device_kinds[v].value)
            neigh = [(role_class(role), net) for role, net in g.device_pins[v]]
        else:
            base = ("net",)
            neigh = [(role_class(role), dev) for dev, role in g.net_pins[v]]
        if r == 0:
            out = base
        else:
            out = (base, tuple(sorted((rc, key(u, r - 1)) for rc, u in neigh)))
        memo[(v, r)] = out
        return out

    digest = hashlib.sha1(repr(key(vertex, radius)).encode()).hexdigest()
    return digest


def group_signature(g: CircuitGraph, device_ids, rounds: int = 2,
                    external: frozenset[str] = frozenset()) -> str:
    """Signature of a device group as a unit: internal structure plus member kinds.

    Nets wholly inside the group keep their connectivity; boundary nets are
    anonymous. `external` nets (e.g. design ports) count as boundary even if
    no other device touches them. Equal for structurally identical groups
    regardless of naming.
    """
    sub = subgraph(g, device_ids)
    inside = {n for n, pins in sub.net_pins.items()
              if len(pins) == g.net_degree(n) and n not in external}
    labels: dict[str, tuple] = {}
    for d in sub.device_kinds:
        labels[d] = ("dev", sub.device_kinds[d].value)
    for n in sub.net_pins:
        labels[n] = ("net", "in" if n in inside else "out")
    for _ in range(rounds):
        nxt: dict[str, tuple] = {}
        for d, pins in sub.device_pins.items():
            nxt[d] = (labels[d], tuple(sorted((role_class(r), labels[n]) for r, n in pins)))
        for n, pins in sub.net_pins.items():
            nxt[n] = (labels[n], tuple(sorted((role_class(r), labels[d]) for d, r in pins)))
        labels = nxt
    canon = tuple(sorted(repr(labels[d]) for d in sub.device_kinds))
    return hashlib.sha1(repr(canon).encode()).hexdigest()


def to_dot(g: CircuitGraph, name: str = "circuit") -> str:
    """DOT-format dump for debugging."""
    lines = [f"graph {name} {{"]
    for dev, kind in g.device_kinds.items():
        lines.append(f'  "{dev}" [shape=box, label="{dev}\\n{kind.value}"];')
    for net in g.net_pins:
        lines.append(f'  "{net}" [shape=ellipse];')
    for dev, role, net in g.edges():
        lines.append(f'  "{dev}" -- "{net}" [label="{role}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
