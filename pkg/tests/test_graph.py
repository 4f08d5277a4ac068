import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from nl2gds import graph as cg
from nl2gds import netlist
from nl2gds.netlist import Device, DeviceKind, Subckt, pin_roles

from conftest import load_fixture


def make_flat(devices, ports=()):
    nets = {p for d in devices for p in d.pins} | set(ports)
    return netlist.FlatNetlist(top="t", devices=tuple(devices),
                               nets=frozenset(nets), ports=tuple(ports),
                               instances=(("", "t"),))


def pattern_from_text(text, name=None):
    netl = netlist.parse_spice(text)
    return cg.pattern_graph(netl.subckts[0], name)


DIFF_PAIR_N = pattern_from_text(
    ".subckt dp da ga db gb com bk\nm1 da ga com bk nmos\nm2 db gb com bk nmos\n.ends\n")
MIRROR_P_TB = pattern_from_text(
    ".subckt cm inref out com\nm1 inref inref com com pmos\nm2 out inref com com pmos\n.ends\n")
SINGLE_N = pattern_from_text(".subckt one d g s b\nm1 d g s b nmos\n.ends\n")


# ---------------------------------------------------------------------------
# brute-force oracle: all injective, label/role-compatible embeddings

def brute_force_matches(target: cg.CircuitGraph, pattern: cg.PatternGraph):
    pdevs = sorted(pattern.graph.device_kinds)
    tdevs = sorted(target.device_kinds)
    internal = pattern.internal_nets()
    found = {}
    flip = {"drain": "source", "source": "drain"}
    for combo in itertools.permutations(tdevs, len(pdevs)):
        for swaps in itertools.product((False, True), repeat=len(pdevs)):
            net_map = {}
            used = set()
            ok = True
            for pd, td, swap in zip(pdevs, combo, swaps):
                if pattern.graph.device_kinds[pd] != target.device_kinds[td]:
                    ok = False
                    break
                if swap and target.device_kinds[td] not in (DeviceKind.NMOS, DeviceKind.PMOS):
                    ok = False
                    break
                tpins = dict(target.device_pins[td])
                if swap:
                    tpins = {flip.get(r, r): n for r, n in tpins.items()}
                for role, pnet in pattern.graph.device_pins[pd]:
                    tnet = tpins.get(role)
                    if tnet is None:
                        ok = False
                        break
                    if pnet in net_map:
                        if net_map[pnet] != tnet:
                            ok = False
                            break
                    else:
                        if tnet in used:
                            ok = False
                            break
                        net_map[pnet] = tnet
                        used.add(tnet)
                if not ok:
                    break
            if not ok:
                continue
            if any(target.net_degree(net_map[pn]) != pattern.graph.net_degree(pn)
                   for pn in internal):
                continue
            found.setdefault(frozenset(combo), dict(zip(pdevs, combo)))
    return {k: v for k, v in found.items()}


def random_mos_netlist(rng: random.Random, n_devices: int):
    nets = [f"n{i}" for i in range(rng.randint(2, n_devices + 3))]
    devices = []
    for i in range(n_devices):
        kind = rng.choice([DeviceKind.NMOS, DeviceKind.PMOS])
        pins = tuple(rng.choice(nets) for _ in range(4))
        devices.append(Device(f"m{i}", kind, pins))
    return make_flat(devices)


class TestBuildGraph:
    def test_single_nmos(self):
        flat = make_flat([Device("m1", DeviceKind.NMOS, ("d", "g", "s", "b"))])
        g = cg.build_graph(flat)
        assert len(g.device_kinds) == 1
        assert len(g.net_pins) == 4
        assert sum(1 for _ in g.edges()) == 4

    def test_empty(self):
        g = cg.build_graph(make_flat([]))
        assert not g.device_kinds and not g.net_pins

    def test_ota_counts(self):
        _, _, flat = load_fixture("ota5t")
        g = cg.build_graph(flat)
        assert len(g.device_kinds) == 5
        assert len(g.net_pins) == 8      # hand-enumerated on the fixture


class TestFindMatches:
    def test_label_count(self):
        devices = [Device(f"m{i}", DeviceKind.NMOS,
                          (f"d{i}", f"g{i}", f"s{i}", f"b{i}")) for i in range(3)]
        g = cg.build_graph(make_flat(devices))
        assert len(cg.find_matches(g, SINGLE_N)) == 3

    def test_diff_pair_in_ota(self):
        _, _, flat = load_fixture("ota5t")
        g = cg.build_graph(flat)
        ms = cg.find_matches(g, DIFF_PAIR_N)
        assert [sorted(m.target_devices()) for m in ms] == [["m1", "m2"]]

    def test_mirror_in_ota(self):
        _, _, flat = load_fixture("ota5t")
        g = cg.build_graph(flat)
        ms = cg.find_matches(g, MIRROR_P_TB)
        assert [sorted(m.target_devices()) for m in ms] == [["m3", "m4"]]
        nets = ms[0].nets()
        assert nets["inref"] == "n1" and nets["out"] == "out"

    def test_absent_label_prunes(self):
        devices = [Device("m1", DeviceKind.PMOS, ("a", "b", "c", "d"))]
        g = cg.build_graph(make_flat(devices))
        assert cg.find_matches(g, SINGLE_N) == []

    def test_drain_source_swap_invariance(self):
        _, _, flat = load_fixture("ota5t")
        swapped = []
        for d in flat.devices:
            pins = (d.pins[2], d.pins[1], d.pins[0], d.pins[3])
            swapped.append(Device(d.name, d.kind, pins, d.params))
        g1 = cg.build_graph(flat)
        g2 = cg.build_graph(make_flat(swapped, flat.ports))
        for pat in (DIFF_PAIR_N, MIRROR_P_TB):
            a = [m.target_devices() for m in cg.find_matches(g1, pat)]
            b = [m.target_devices() for m in cg.find_matches(g2, pat)]
            assert a == b

    def test_matches_equal_brute_force_on_random_graphs(self):
        rng = random.Random(20260810)
        patterns = (SINGLE_N, DIFF_PAIR_N, MIRROR_P_TB)
        for trial in range(100):
            flat = random_mos_netlist(rng, rng.randint(1, 8))
            g = cg.build_graph(flat)
            for pat in patterns:
                got = {m.target_devices() for m in cg.find_matches(g, pat)}
                want = set(brute_force_matches(g, pat))
                assert got == want, f"trial {trial} pattern {pat.name}"

    def test_budget_error(self):
        devices = [Device(f"m{i}", DeviceKind.NMOS, ("x", "x", "x", "x"))
                   for i in range(8)]
        g = cg.build_graph(make_flat(devices))
        with pytest.raises(cg.SearchBudgetExceeded):
            cg.find_matches(g, DIFF_PAIR_N, budget=5)

    def test_deterministic_order(self):
        _, _, flat = load_fixture("ota_cm_bias")
        g = cg.build_graph(flat)
        ms = cg.find_matches(g, MIRROR_P_TB)
        keys = [tuple(sorted(m.target_devices())) for m in ms]
        assert keys == sorted(keys)


class TestSignatures:
    def test_mirrored_pair_equal_at_radius_one(self):
        _, _, flat = load_fixture("ota5t")
        g = cg.build_graph(flat)
        assert cg.structural_signature(g, "m1", 1) == cg.structural_signature(g, "m2", 1)

    def test_kind_differs_at_any_radius(self):
        devices = [Device("m1", DeviceKind.NMOS, ("a", "b", "c", "d")),
                   Device("m2", DeviceKind.PMOS, ("a", "b", "c", "d"))]
        g = cg.build_graph(make_flat(devices))
        for r in range(4):
            assert (cg.structural_signature(g, "m1", r)
                    != cg.structural_signature(g, "m2", r))

    def test_ladder_taps_equal_radius_one(self):
        _, _, flat = load_fixture("r2r")
        g = cg.build_graph(flat)
        shunts = [d.name for d in flat.devices if d.name.endswith("/r2")]
        assert len(shunts) == 8
        sigs = {cg.structural_signature(g, s, 1) for s in shunts}
        assert len(sigs) == 1
        # brute-force neighborhood comparison: all radius-1 balls pairwise
        # isomorphic (same kind, same multiset of role classes)
        def ball(dev):
            return (g.device_kinds[dev],
                    tuple(sorted(cg.role_class(r) for r, _ in g.device_pins[dev])))
        assert len({ball(s) for s in shunts}) == 1

    def test_vertex_order_independent(self):
        _, _, flat = load_fixture("ota5t")
        g1 = cg.build_graph(flat)
        g2 = cg.build_graph(make_flat(list(reversed(flat.devices)), flat.ports))
        for d in g1.device_kinds:
            for r in (0, 1, 2):
                assert (cg.structural_signature(g1, d, r)
                        == cg.structural_signature(g2, d, r))

    @given(st.integers(0, 3))
    def test_signature_stable_under_recompute(self, radius):
        _, _, flat = load_fixture("ota5t")
        g = cg.build_graph(flat)
        sigs = [cg.structural_signature(g, "m5", radius) for _ in range(3)]
        assert len(set(sigs)) == 1


class TestDot:
    def test_dot_dump_mentions_every_vertex(self):
        _, _, flat = load_fixture("ota5t")
        g = cg.build_graph(flat)
        dot = cg.to_dot(g)
        for d in g.device_kinds:
            assert f'"{d}"' in dot
        assert dot.startswith("graph")
