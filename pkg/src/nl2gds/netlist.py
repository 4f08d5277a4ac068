"""SPICE subset parser and hierarchy flattener.

Accepted grammar (line oriented, case-insensitive, identifiers normalized to
lower case):

    * comment                      full-line comment ('*' in column 1)
    anything $ trailing comment    '$' starts an inline comment
    + continuation                 joined to the previous card
    .subckt NAME port1 port2 ...
    .ends [NAME]
    .param ...                     ignored with a warning
    .end                           ignored
    Mname d g s [b] model k=v ...  MOS device; bulk defaults to source
    Rname p m VALUE [k=v ...]      resistor
    Cname p m VALUE [k=v ...]      capacitor
    Xname n1 n2 ... SUBCKT         subcircuit instance

Values use standard SPICE suffixes (f p n u m k meg g) and are kept as exact
rationals.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

log = logging.getLogger(__name__)


class NetlistError(Exception):
    pass


class SpiceSyntaxError(NetlistError):
    def __init__(self, line_no: int, msg: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {msg}")


class DeviceKind(Enum):
    NMOS = "nmos"
    PMOS = "pmos"
    RES = "res"
    CAP = "cap"


MOS_KINDS = (DeviceKind.NMOS, DeviceKind.PMOS)
MOS_ROLES = ("drain", "gate", "source", "bulk")
TWO_PIN_ROLES = ("plus", "minus")


def pin_roles(kind: DeviceKind) -> tuple[str, ...]:
    return MOS_ROLES if kind in MOS_KINDS else TWO_PIN_ROLES


@dataclass(frozen=True)
class Device:
    name: str
    kind: DeviceKind
    pins: tuple[str, ...]
    params: tuple[tuple[str, Fraction], ...] = ()

    def __post_init__(self):
        want = 4 if self.kind in MOS_KINDS else 2
        if len(self.pins) != want:
            raise NetlistError(f"device {self.name}: expected {want} pins, got {len(self.pins)}")
        for k, v in self.params:
            if v <= 0:
                raise NetlistError(f"device {self.name}: parameter {k} must be positive")

    def param(self, name: str, default: Fraction | None = None) -> Fraction | None:
        for k, v in self.params:
            if k == name:
                return v
        return default


@dataclass(frozen=True)
class Instance:
    name: str
    subckt: str
    bindings: tuple[str, ...]


@dataclass(frozen=True)
class Subckt:
    name: str
    ports: tuple[str, ...]
    devices: tuple[Device, ...]
    instances: tuple[Instance, ...]


@dataclass(frozen=True)
class Netlist:
    subckts: tuple[Subckt, ...]
    warnings: tuple[str, ...] = ()

    def subckt(self, name: str) -> Subckt:
        for s in self.subckts:
            if s.name == name:
                return s
        raise NetlistError(f"no subckt named {name!r}")

    def default_top(self) -> str:
        """The unique subckt no other subckt instantiates."""
        instantiated = {inst.subckt for s in self.subckts for inst in s.instances}
        roots = [s.name for s in self.subckts if s.name not in instantiated]
        if len(roots) != 1:
            raise NetlistError(f"cannot infer top cell: candidates {sorted(roots)}")
        return roots[0]


@dataclass(frozen=True)
class FlatNetlist:
    """Hierarchy expanded to devices with path names ('x1/m2')."""
    top: str
    devices: tuple[Device, ...]
    nets: frozenset[str]
    ports: tuple[str, ...]
    instances: tuple[tuple[str, str], ...] = ()   # (path prefix, subckt name); '' is top

    def device(self, name: str) -> Device:
        for d in self.devices:
            if d.name == name:
                return d
        raise NetlistError(f"no device named {name!r}")

    def subckt_of(self, module_path: str) -> str:
        for path, name in self.instances:
            if path == module_path:
                return name
        raise NetlistError(f"no module at path {module_path!r}")


_SUFFIXES = {
    "f": Fraction(1, 10**15),
    "p": Fraction(1, 10**12),
    "n": Fraction(1, 10**9),
    "u": Fraction(1, 10**6),
    "m": Fraction(1, 10**3),
    "k": Fraction(10**3),
    "meg": Fraction(10**6),
    "g": Fraction(10**9),
}

_VALUE_RE = re.compile(r"^([+-]?\d+(?:\.\d+)?(?:e[+-]?\d+)?)(meg|[fpnumkg])?$")


def parse_value(text: str) -> Fraction:
    """'4' -> 4, '2k' -> 2000, '1.5p' -> 3/2e12 ... exact rationals throughout."""
    m = _VALUE_RE.match(text.lower())
    if not m:
        raise NetlistError(f"cannot parse value {text!r}")
    num, suffix = m.groups()
    value = Fraction(num)
    if suffix:
        value *= _SUFFIXES[suffix]
    return value


def _logical_lines(text: str):
    """Yield (line_no_of_first_physical_line, joined_card_text)."""
    current: list[str] = []
    current_no = 0
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("$", 1)[0].rstrip()
        if line.lstrip().startswith("*"):
            continue
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("+"):
            if not current:
                raise SpiceSyntaxError(no, "continuation line with nothing to continue")
            current.append(stripped[1:].strip())
            continue
        if current:
            yield current_no, " ".join(current)
        current = [stripped]
        current_no = no
    if current:
        yield current_no, " ".join(current)


def _split_params(tokens: list[str], line_no: int):
    """Split trailing k=v tokens from positional tokens."""
    positional: list[str] = []
    params: list[tuple[str, Fraction]] = []
    for tok in tokens:
        if "=" in tok:
            key, _, val = tok.partition("=")
            if not key or not val:
                raise SpiceSyntaxError(line_no, f"malformed parameter {tok!r}")
            try:
                params.append((key, parse_value(val)))
            except NetlistError as exc:
                raise SpiceSyntaxError(line_no, str(exc)) from exc
        else:
            if params:
                raise SpiceSyntaxError(line_no, f"positional token {tok!r} after parameters")
            positional.append(tok)
    return positional, params


def _mos_kind(model: str, model_map: dict[str, str] | None) -> DeviceKind:
    if model_map and model in model_map:
        return DeviceKind(model_map[model])
    return DeviceKind.PMOS if "p" in model else DeviceKind.NMOS


def parse_spice(text: str, model_map: dict[str, str] | None = None) -> Netlist:
    """Parse the SPICE subset into a hierarchical netlist.

    model_map optionally overrides MOS model-name classification
    (model name -> 'nmos'|'pmos'); by default names containing 'p' are PMOS.
    """
    subckts: list[Subckt] = []
    warnings: list[str] = []
    cur_name: str | None = None
    cur_ports: tuple[str, ...] = ()
    cur_devices: list[Device] = []
    cur_instances: list[Instance] = []
    cur_line = 0

    def close_subckt():
        nonlocal cur_name
        if any(s.name == cur_name for s in subckts):
            raise SpiceSyntaxError(cur_line, f"duplicate subckt name {cur_name!r}")
        subckts.append(Subckt(cur_name, cur_ports, tuple(cur_devices), tuple(cur_instances)))
        cur_name = None

    for line_no, card in _logical_lines(text):
        tokens = card.lower().split()
        head = tokens[0]
        if head.startswith("."):
            if head == ".subckt":
                if cur_name is not None:
                    raise SpiceSyntaxError(line_no, "nested .subckt")
                if len(tokens) < 2:
                    raise SpiceSyntaxError(line_no, ".subckt needs a name")
                cur_name = tokens[1]
                cur_ports = tuple(tokens[2:])
                cur_devices, cur_instances = [], []
                cur_line = line_no
            elif head == ".ends":
                if cur_name is None:
                    raise SpiceSyntaxError(line_no, ".ends outside a subckt")
                if len(tokens) > 1 and tokens[1] != cur_name:
                    raise SpiceSyntaxError(line_no, f".ends name {tokens[1]!r} does not match {cur_name!r}")
                close_subckt()
            elif head == ".param":
                warnings.append(f"line {line_no}: .param ignored")
                log.warning(".param card ignored (line %d)", line_no)
            elif head == ".end":
                pass
            else:
                raise SpiceSyntaxError(line_no, f"unsupported card {head!r}")
            continue

        if cur_name is None:
            raise SpiceSyntaxError(line_no, f"device card {head!r} outside a subckt")
        positional, params = _split_params(tokens, line_no)
        name = positional[0]
        prefix = name[0]
        if any(d.name == name for d in cur_devices) or any(i.name == name for i in cur_instances):
            raise SpiceSyntaxError(line_no, f"duplicate device name {name!r}")
        if prefix == "m":
            rest = positional[1:]
            if len(rest) == 5:
                pins, model = rest[:4], rest[4]
            elif len(rest) == 4:
                pins, model = rest[:3] + [rest[2]], rest[3]   # bulk := source
            else:
                raise SpiceSyntaxError(line_no, f"MOS card {name!r}: expected 3 or 4 nets + model")
            kind = _mos_kind(model, model_map)
            cur_devices.append(Device(name, kind, tuple(pins), tuple(params)))
        elif prefix in ("r", "c"):
            rest = positional[1:]
            if len(rest) != 3:
                raise SpiceSyntaxError(line_no, f"{name!r}: expected 2 nets + value")
            try:
                value = parse_value(rest[2])
            except NetlistError as exc:
                raise SpiceSyntaxError(line_no, str(exc)) from exc
            kind = DeviceKind.RES if prefix == "r" else DeviceKind.CAP
            if value <= 0:
                raise SpiceSyntaxError(line_no, f"{name!r}: value must be positive")
            cur_devices.append(Device(name, kind, tuple(rest[:2]),
                                      (("value", value),) + tuple(params)))
        elif prefix == "x":
            rest = positional[1:]
            if len(rest) < 2:
                raise SpiceSyntaxError(line_no, f"instance {name!r}: expected nets + subckt name")
            cur_instances.append(Instance(name, rest[-1], tuple(rest[:-1])))
        else:
            raise SpiceSyntaxError(line_no, f"unknown device prefix {prefix!r} in {name!r}")

    if cur_name is not None:
        raise SpiceSyntaxError(cur_line, f".subckt {cur_name!r} never closed")

    netlist = Netlist(tuple(subckts), tuple(warnings))
    _check_references(netlist)
    return netlist


def _check_references(netlist: Netlist) -> None:
    names = {s.name for s in netlist.subckts}
    for s in netlist.subckts:
        for inst in s.instances:
            if inst.subckt not in names:
                raise NetlistError(
                    f"subckt {s.name!r}: instance {inst.name!r} references "
                    f"unknown subckt {inst.subckt!r}")
            target = netlist.subckt(inst.subckt)
            if len(inst.bindings) != len(target.ports):
                raise NetlistError(
                    f"subckt {s.name!r}: instance {inst.name!r} binds "
                    f"{len(inst.bindings)} nets, {inst.subckt!r} has {len(target.ports)} ports")
    _check_acyclic(netlist)


def _check_acyclic(netlist: Netlist) -> None:
    state: dict[str, int] = {}   # 0 visiting, 1 done

    def visit(name: str, chain: tuple[str, ...]):
        if state.get(name) == 1:
            return
        if state.get(name) == 0:
            raise NetlistError(f"cyclic instantiation: {' -> '.join(chain + (name,))}")
        state[name] = 0
        for inst in netlist.subckt(name).instances:
            visit(inst.subckt, chain + (name,))
        state[name] = 1

    for s in netlist.subckts:
        visit(s.name, ())


def _fmt_value(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    for suffix, mult in (("m", _SUFFIXES["m"]), ("u", _SUFFIXES["u"]), ("n", _SUFFIXES["n"]),
                         ("p", _SUFFIXES["p"]), ("f", _SUFFIXES["f"])):
        scaled = v / mult
        if scaled.denominator == 1:
            return f"{scaled.numerator}{suffix}"
    return f"{float(v):g}"


def unparse(netlist: Netlist) -> str:
    """Emit canonical SPICE text; parse(unparse(parse(t))) == parse(t)."""
    out: list[str] = []
    for s in netlist.subckts:
        out.append(f".subckt {s.name} {' '.join(s.ports)}".rstrip())
        for d in s.devices:
            params = " ".join(f"{k}={_fmt_value(v)}" for k, v in d.params if k != "value")
            if d.kind in MOS_KINDS:
                card = f"{d.name} {' '.join(d.pins)} {d.kind.value}"
            else:
                card = f"{d.name} {' '.join(d.pins)} {_fmt_value(d.param('value'))}"
            out.append((card + " " + params).rstrip())
        for inst in s.instances:
            out.append(f"{inst.name} {' '.join(inst.bindings)} {inst.subckt}")
        out.append(".ends")
    out.append(".end")
    return "\n".join(out) + "\n"


def flatten(netlist: Netlist, top: str) -> FlatNetlist:
    """Expand the instance tree under `top` into path-named devices.

    Internal nets get instance-path prefixes; nets bound to ports are unified
    with the parent's net names.
    """
    top_subckt = netlist.subckt(top)

    devices: list[Device] = []
    nets: set[str] = set()
    inst_table: list[tuple[str, str]] = []

    def expand(subckt: Subckt, prefix: str, net_map: dict[str, str]):
        inst_table.append((prefix[:-1] if prefix else "", subckt.name))
        def resolve(net: str) -> str:
            if net in net_map:
                return net_map[net]
            return prefix + net

        for d in subckt.devices:
            pins = tuple(resolve(p) for p in d.pins)
            devices.append(Device(prefix + d.name, d.kind, pins, d.params))
            nets.update(pins)
        for inst in subckt.instances:
            target = netlist.subckt(inst.subckt)
            if len(inst.bindings) != len(target.ports):
                raise NetlistError(
                    f"instance {prefix + inst.name!r}: unbound port on {inst.subckt!r} "
                    f"({len(inst.bindings)} bindings for {len(target.ports)} ports)")
            bound = {port: resolve(net) for port, net in zip(target.ports, inst.bindings)}
            expand(target, prefix + inst.name + "/", bound)

    expand(top_subckt, "", {p: p for p in top_subckt.ports})
    nets.update(top_subckt.ports)
    return FlatNetlist(top=top, devices=tuple(devices), nets=frozenset(nets),
                       ports=top_subckt.ports, instances=tuple(inst_table))


def instance_net_maps(netlist: Netlist, top: str) -> list[tuple[str, str, dict[str, str]]]:
    """(path, subckt, local net -> flat net) for every instance in the tree."""
    out: list[tuple[str, str, dict[str, str]]] = []

    def walk(subckt: Subckt, prefix: str, net_map: dict[str, str]):
        local_nets: set[str] = set(subckt.ports)
        for d in subckt.devices:
            local_nets.update(d.pins)
        for inst in subckt.instances:
            local_nets.update(inst.bindings)
        full = {n: net_map.get(n, prefix + n) for n in sorted(local_nets)}
        out.append((prefix[:-1] if prefix else "", subckt.name, full))
        for inst in subckt.instances:
            target = netlist.subckt(inst.subckt)
            bound = {p: full[b] for p, b in zip(target.ports, inst.bindings)}
            walk(target, prefix + inst.name + "/", bound)

    walk(netlist.subckt(top), "", {})
    return out
