"""Pipeline orchestration: one command from netlist + rules to layout.

    nl2gds run --netlist ota.sp --pdk mock14 --out build/

runs parse -> annotate -> place -> route -> drc and writes layout.json plus
reports. Every stage also exists as a subcommand consuming the previous
stage's serialized artifact from the same output directory, so any stage can
be replaced by hand-edited input; `run` itself round-trips each intermediate
through disk, which is what makes a split pipeline byte-identical to the
monolithic one.

Exit codes: 0 success (DRC-clean), 1 pipeline/DRC failure, 2 usage or input
errors. Log level via NL2GDS_LOG (DEBUG/INFO/WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import time
from pathlib import Path

from . import annotate, assemble, drc, gdsii, graph, netlist, pdk as pdk_mod, route
from .layout import Layout, emit_json, flatten_layout, load_json

log = logging.getLogger("nl2gds")


class StageError(Exception):
    def __init__(self, stage: str, msg: str):
        self.stage = stage
        super().__init__(f"[{stage}] {msg}")


def _setup_logging() -> None:
    level = os.environ.get("NL2GDS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _resolve_pdk(spec: str) -> pdk_mod.Pdk:
    path = Path(spec)
    if path.exists():
        return pdk_mod.load_pdk(path)
    builtin = pdk_mod.builtin_pdk_path(spec)
    if builtin.exists():
        return pdk_mod.load_pdk(builtin)
    raise StageError("pdk", f"no rule file at {spec!r} and no builtin of that name")


def _load_library(args) -> list[annotate.LibraryEntry]:
    path = Path(args.patterns) if args.patterns else annotate.builtin_library_path()
    return annotate.load_pattern_library(path)


def _flow_config(args) -> assemble.FlowConfig:
    return assemble.FlowConfig(seed=args.seed, variants=args.variants)


# ---------------------------------------------------------------------------
# stages (each reads/writes artifacts in the out directory)

def stage_parse(args, out: Path) -> None:
    text = Path(args.netlist).read_text()
    netl = netlist.parse_spice(text)
    top = args.top or netl.default_top()
    netl.subckt(top)
    flat = netlist.flatten(netl, top)
    doc = {"top": top, "spice": netlist.unparse(netl),
           "devices": len(flat.devices), "nets": len(flat.nets)}
    (out / "netlist.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    if args.emit_dot:
        (out / "graph.dot").write_text(graph.to_dot(graph.build_graph(flat), top))


def _read_netlist(out: Path):
    doc = json.loads((out / "netlist.json").read_text())
    netl = netlist.parse_spice(doc["spice"])
    return netl, doc["top"]


def stage_annotate(args, out: Path) -> None:
    netl, top = _read_netlist(out)
    flat = netlist.flatten(netl, top)
    espec = None
    if args.spec:
        espec = annotate.parse_espec(Path(args.spec).read_text())
    ann = annotate.annotate_design(flat, _load_library(args), espec)
    doc = annotate.annotation_to_json(ann)
    (out / "annotation.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _read_annotation(out: Path) -> annotate.Annotation:
    return annotate.annotation_from_json(json.loads((out / "annotation.json").read_text()))


def stage_place(args, out: Path) -> None:
    netl, top = _read_netlist(out)
    ann = _read_annotation(out)
    p = _resolve_pdk(args.pdk)
    layout, resume = assemble.place_design(netl, ann, p, _flow_config(args))
    doc = {"layout": json.loads(emit_json(layout)), "resume": resume}
    (out / "placed.json").write_text(json.dumps(doc, sort_keys=True,
                                                separators=(",", ":")) + "\n")


def stage_route(args, out: Path) -> None:
    netl, top = _read_netlist(out)
    ann = _read_annotation(out)
    p = _resolve_pdk(args.pdk)
    doc = json.loads((out / "placed.json").read_text())
    partial = load_json(json.dumps(doc["layout"]), require_top=False)
    layout = assemble.route_design(netl, ann, p, partial, doc["resume"],
                                   _flow_config(args))
    (out / "layout.json").write_text(emit_json(layout))
    if args.emit_gds:
        gdsii.write_gds(layout, out / "layout.gds")
    if args.report_parasitics:
        (out / "parasitics.csv").write_text(parasitic_report(layout, p))


def stage_drc(args, out: Path) -> int:
    p = _resolve_pdk(args.pdk)
    layout = load_json((out / "layout.json").read_text())
    report = drc.drc(layout, p)
    lines = [f"{v.rule} {v.layer} {tuple(v.rect)} {v.detail}" for v in report.violations]
    (out / "drc.txt").write_text("\n".join(lines) + ("\n" if lines else ""))
    for w in report.warnings:
        log.warning("drc: %s", w)
    if not report.clean:
        log.error("DRC: %d violations (%s)", report.count(), report.summary())
    return report.count()


def parasitic_report(layout: Layout, p: pdk_mod.Pdk) -> str:
    """CSV: net, resistance (ohm), capacitance (fF), wire length (nm), via count."""
    from .geom import wire_length
    shapes = flatten_layout(layout)
    layer_names = set(p.routing_layer_names())
    via_names = {v.name for v in p.vias}
    acc: dict[str, list[int]] = {}
    for lname, r, net in shapes:
        if net is None:
            continue
        row = acc.setdefault(net, [0, 0, 0, 0])   # r_mohm, c_zf, length, vias
        if lname in layer_names:
            length = wire_length(p, lname, r)
            rm, cz = p.wire_parasitics(lname, length)
            row[0] += rm
            row[1] += cz
            row[2] += length
        elif lname in via_names:
            row[0] += p.via_parasitics(lname)
            row[3] += 1
    out = ["net,r_ohm,c_ff,length_nm,vias"]
    for net in sorted(acc):
        rm, cz, length, vias = acc[net]
        out.append(f"{net},{rm / 1000:.3f},{cz / 1_000_000:.4f},{length},{vias}")
    return "\n".join(out) + "\n"


STAGES = ("parse", "annotate", "place", "route", "drc")


def run_pipeline(args, out: Path) -> int:
    summary = {"stages": [], "seed": args.seed}
    violations = None
    try:
        for name in STAGES:
            t0 = time.time()
            if name == "parse":
                stage_parse(args, out)
            elif name == "annotate":
                stage_annotate(args, out)
            elif name == "place":
                stage_place(args, out)
            elif name == "route":
                stage_route(args, out)
            else:
                violations = stage_drc(args, out)
            summary["stages"].append({"name": name,
                                      "seconds": round(time.time() - t0, 3)})
    except Exception as exc:
        summary["failed"] = f"{type(exc).__name__}: {exc}"
        _write_summary(out, summary)
        _move_to_failed(out)
        raise
    summary["drc_violations"] = violations
    summary["ok"] = violations == 0
    _write_summary(out, summary)
    return 0 if violations == 0 else 1


def _write_summary(out: Path, summary: dict) -> None:
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")


def _move_to_failed(out: Path) -> None:
    failed = out / "failed"
    failed.mkdir(exist_ok=True)
    for name in ("netlist.json", "annotation.json", "placed.json", "layout.json",
                 "summary.json"):
        src = out / name
        if src.exists():
            shutil.copy(src, failed / name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nl2gds",
        description="netlist-to-layout synthesis for small analog blocks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_netlist=True, need_pdk=True):
        if need_netlist:
            p.add_argument("--netlist", required=True, help="SPICE input file")
        else:
            p.add_argument("--netlist", help="SPICE input file (unused by this stage)")
        p.add_argument("--top", help="top subckt (default: the uninstantiated one)")
        p.add_argument("--pdk", required=need_pdk,
                       help="rule file path or builtin name (mock14, mock65)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--spec", help="constraint spec file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--variants", type=int, default=3)
        p.add_argument("--patterns", help="pattern library directory (default builtin)")
        p.add_argument("--emit-gds", action="store_true")
        p.add_argument("--emit-dot", action="store_true")
        p.add_argument("--report-parasitics", action="store_true")

    common(sub.add_parser("run", help="full pipeline"))
    common(sub.add_parser("parse-only", help="parse and normalize the netlist"),
           need_pdk=False)
    common(sub.add_parser("annotate-only", help="hierarchy + constraints from netlist.json"),
           need_netlist=False, need_pdk=False)
    common(sub.add_parser("place-only", help="assemble and place from annotation.json"),
           need_netlist=False)
    common(sub.add_parser("route-only", help="route the top module from placed.json"),
           need_netlist=False)
    common(sub.add_parser("drc-only", help="check layout.json"),
           need_netlist=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if getattr(args, "netlist", None) and not Path(args.netlist).exists():
        parser.error(f"netlist file {args.netlist!r} does not exist")
    if getattr(args, "spec", None) and not Path(args.spec).exists():
        parser.error(f"spec file {args.spec!r} does not exist")
    try:
        if args.command == "run":
            return run_pipeline(args, out)
        if args.command == "parse-only":
            stage_parse(args, out)
            return 0
        if args.command == "annotate-only":
            stage_annotate(args, out)
            return 0
        if args.command == "place-only":
            stage_place(args, out)
            return 0
        if args.command == "route-only":
            stage_route(args, out)
            return 0
        if args.command == "drc-only":
            return 0 if stage_drc(args, out) == 0 else 1
    except (netlist.SpiceSyntaxError, netlist.NetlistError, annotate.AnnotateError,
            pdk_mod.PdkError, StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
