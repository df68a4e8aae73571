"""Command-line interface: ``hermpio synth | moments | recover | verify | replay``.

Every subcommand that writes files also writes ``<stem>.manifest.json`` next
to its main output.  The manifest holds the argument vector, the resolved
configuration and a SHA-256 digest of every output, so ``hermpio replay``
can rerun the command and confirm the bytes match.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
from pathlib import Path

from . import __version__
from .basis import Box
from .detect import DetectConfig, coarse_grid, detect
from .filters import FILTER_KINDS, FilterSpec
from .group import group_gnuplot_script, group_report, group_report_csv, group_spikes, grid_of_groups
from .moments import (
    SIDES,
    GriddedDensity,
    MomentSet,
    PerturbationSpec,
    PointMass,
    Scenario,
    convert_side,
    moments_from_density,
    moments_from_masses,
    perturb,
)
from .verify import CHECKS, run_suite

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # let values such as -4..4 or -1,0.5:1 through as arguments, not flags
        self._negative_number_matcher = re.compile(r"^-\.?\d")

    def error(self, message):
        raise UsageError(message)


def _read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dumps(obj) -> str:
    # json uses repr for floats: shortest string that round-trips exactly
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def _write_manifest(subcommand: str, argv, out: Path, config: dict, inputs, outputs, seed=None) -> Path:
    manifest = {
        "subcommand": subcommand,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": {str(p): _sha256(Path(p)) for p in outputs},
        "seed": seed,
        "version": __version__,
    }
    path = manifest_path(out)
    _write_text(path, _dumps(manifest))
    return path


def parse_box(specs, q: int | None = None) -> Box:
    """``["-4..4"]`` (all axes) or one ``lo..hi`` per axis."""
    bounds = []
    for text in specs:
        try:
            lo, hi = text.split("..")
            bounds.append((float(lo), float(hi)))
        except ValueError:
            raise UsageError(f"box bounds must look like lo..hi, got {text!r}") from None
    if len(bounds) == 1 and q is not None:
        bounds = bounds * q
    if q is not None and len(bounds) != q:
        raise UsageError(f"got {len(bounds)} box axes for q={q}")
    return Box(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds))


def parse_mass(text: str) -> PointMass:
    """``x1,...,xq:re[,im]``, e.g. ``-1:1`` or ``0.5,-1:0.8,0.2``."""
    try:
        loc, amp = text.split(":")
        coords = tuple(float(v) for v in loc.split(","))
        parts = [float(v) for v in amp.split(",")]
        if len(parts) not in (1, 2):
            raise ValueError
    except ValueError:
        raise UsageError(f"mass must look like x1,...,xq:re[,im], got {text!r}") from None
    return PointMass(coords, complex(*parts))


def parse_grid(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise UsageError(f"--grid-of-groups must look like RxC, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hermpio", description="Point-mass recovery from Hermite moments.")
    parser.add_argument("--version", action="version", version=f"hermpio {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="write a ground-truth scenario")
    p.add_argument("--spec", help="JSON scene description (scenario fields and/or grid_of_groups)")
    p.add_argument("--q", type=int)
    p.add_argument("--box", action="append", help="lo..hi, once for all axes or once per axis")
    p.add_argument("--mass", action="append", default=[], help="x1,...,xq:re[,im]; repeatable")
    p.add_argument("--grid-of-groups", help="RxC pattern of spike groups (q=2)")
    p.add_argument("--group-size", type=int, default=3)
    p.add_argument("--group-pitch", type=float, default=4.0)
    p.add_argument("--group-spread", type=float, default=0.9)
    p.add_argument("--min-separation", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("moments", help="compute, perturb or convert Hermite moments")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="scenario JSON from synth")
    src.add_argument("--moments", help="existing moment JSON (converted and/or perturbed)")
    src.add_argument("--density", help="gridded density JSON")
    p.add_argument("--n", type=int, help="scale; moments of total degree < n^2 are produced")
    p.add_argument("--noise", default="none", help="none or uniform_disk:<eps>:<seed>")
    p.add_argument("--side", choices=SIDES, help="side of the written moments (default: spatial, or the input side)")
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("recover", help="detect point masses from a moment file")
    p.add_argument("--moments", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--box", action="append", required=True, help="lo..hi, once for all axes or once per axis")
    p.add_argument("--spacing", type=float, required=True, help="coarse lattice spacing")
    p.add_argument("--refine-factor", type=int, default=8)
    th = p.add_mutually_exclusive_group(required=True)
    th.add_argument("--threshold-abs", type=float)
    th.add_argument("--threshold-rel", type=float)
    p.add_argument("--linkage-radius", type=float)
    p.add_argument("--filter", choices=FILTER_KINDS, default="smooth_bump")
    p.add_argument("--group", type=float, metavar="RADIUS", help="also group spikes at this radius")
    p.add_argument("--plot", action="store_true", help="write grid CSV and gnuplot scripts")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("verify", help="run the kernel and identity checks")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--only", action="append", choices=CHECKS)
    p.add_argument("--tolerance", type=float, help="override the identity-check tolerance")
    p.add_argument("--out-dir", help="write one <check>.json per report")

    p = sub.add_parser("replay", help="rerun a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--check", action="store_true", help="exit 3 unless outputs match recorded digests")
    return parser


def _synth(args, argv) -> int:
    spec = _read_json(args.spec) if args.spec else {}
    q = args.q or spec.get("q")
    box = None
    if args.box:
        box = parse_box(args.box, q)
    elif "box" in spec:
        box = Box.from_json(spec["box"])
    q = q or (box.q if box is not None else None)

    masses = [
        PointMass(tuple(m["x"]), complex(m["a"][0], m["a"][1]) if isinstance(m["a"], list) else m["a"])
        for m in spec.get("masses", [])
    ]
    masses += [parse_mass(t) for t in args.mass]

    pattern = dict(spec.get("grid_of_groups", {}))
    if args.grid_of_groups:
        rows, cols = parse_grid(args.grid_of_groups)
        pattern.update(
            rows=rows,
            cols=cols,
            group_size=args.group_size,
            pitch=args.group_pitch,
            spread=args.group_spread,
            min_separation=args.min_separation,
            seed=args.seed,
        )
    labels = None
    if pattern:
        if q not in (None, 2):
            raise UsageError("--grid-of-groups builds q=2 scenes")
        scene, labels = grid_of_groups(box=box, **pattern)
        box = scene.box
        masses = list(scene.masses) + masses
        q = 2
    if q is None or box is None:
        raise UsageError("synth needs a box (and q) from --spec or --box")

    scenario = Scenario(q, tuple(masses), box)
    obj = scenario.to_json()
    if labels is not None:
        obj["groups"] = labels + [None] * (len(masses) - len(labels))
    out = Path(args.out)
    _write_text(out, _dumps(obj))
    config = {"q": q, "box": box.to_json(), "mass_count": len(masses), "grid_of_groups": pattern or None}
    _write_manifest("synth", argv, out, config, [args.spec] if args.spec else [], [out], pattern.get("seed"))
    return EXIT_OK


def _moments(args, argv) -> int:
    noise = PerturbationSpec.parse(args.noise)
    if args.scenario:
        if args.n is None:
            raise UsageError("--n is required with --scenario")
        scenario = Scenario.from_json(_read_json(args.scenario))
        m = moments_from_masses(scenario, args.n)
        source = ("scenario", args.scenario)
    elif args.density:
        if args.n is None:
            raise UsageError("--n is required with --density")
        m = moments_from_density(GriddedDensity.from_json(_read_json(args.density)), args.n)
        source = ("density", args.density)
    else:
        m = MomentSet.from_json(_read_json(args.moments))
        source = ("moments", args.moments)

    side = args.side or m.side
    if noise.kind != "none":
        m = perturb(m, noise)
    if m.side != side:
        m = convert_side(m)

    out = Path(args.out)
    _write_text(out, _dumps(m.to_json()))
    config = {
        "source": source[0],
        "n": args.n,
        "max_total_degree": m.max_total_degree,
        "side": side,
        "noise": noise.to_json(),
    }
    _write_manifest("moments", argv, out, config, [source[1]], [out], noise.seed if noise.kind != "none" else None)
    return EXIT_OK


def _recover(args, argv) -> int:
    m = MomentSet.from_json(_read_json(args.moments))
    box = parse_box(args.box, m.q)
    cfg = DetectConfig(
        n=args.n,
        box=box,
        coarse_spacing=args.spacing,
        refine_factor=args.refine_factor,
        threshold_abs=args.threshold_abs,
        threshold_rel=args.threshold_rel,
        linkage_radius=args.linkage_radius,
        filter=FilterSpec(args.filter),
        workers=args.workers,
    )
    if args.group is not None and not args.group > 0:
        raise UsageError("--group radius must be positive")
    if args.plot and m.q > 2:
        raise UsageError("--plot is only available for q = 1 or 2")

    grid = coarse_grid(cfg, m)
    result = detect(cfg, m, grid=grid)
    out = Path(args.out)
    outputs = [out, out.with_suffix(".csv")]
    payload = result.to_json()
    # the worker count never changes the numbers, so keep it out of the output bytes
    payload["config"] = {k: v for k, v in cfg.to_json().items() if k != "workers"}
    _write_text(out, _dumps(payload))
    _write_text(outputs[1], result.to_csv())

    if args.group is not None:
        groups = group_spikes(result.spikes, args.group)
        gjson = out.with_name(out.stem + ".groups.json")
        gcsv = out.with_name(out.stem + ".groups.csv")
        _write_text(gjson, _dumps({"grouping_radius": args.group, **group_report(groups)}))
        _write_text(gcsv, group_report_csv(groups))
        outputs += [gjson, gcsv]
        if args.plot and m.q == 2:
            gp = out.with_name(out.stem + ".groups.gp")
            _write_text(gp, group_gnuplot_script(gcsv.name))
            outputs.append(gp)

    if args.plot:
        gcsv = out.with_name(out.stem + ".grid.csv")
        gp = out.with_name(out.stem + ".grid.gp")
        _write_text(gcsv, grid.to_csv())
        _write_text(gp, grid.gnuplot_script(gcsv.name))
        outputs += [gcsv, gp]

    config = {**cfg.to_json(), "group": args.group, "plot": args.plot}
    _write_manifest("recover", argv, out, config, [args.moments], outputs)
    print(f"recovered {result.count} point masses -> {out}")
    return EXIT_OK


def _verify(args, argv) -> int:
    if args.q < 1:
        raise UsageError("--q must be >= 1")
    reports = run_suite(q=args.q, only=args.only, tolerance=args.tolerance)
    for r in reports:
        print(json.dumps(r.to_json(), sort_keys=True))
        if args.out_dir:
            _write_text(Path(args.out_dir) / f"{r.name}.json", r.dumps() + "\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def _replay(args, argv) -> int:
    manifest = _read_json(args.manifest)
    here = os.getcwd()
    os.chdir(manifest["cwd"])
    try:
        code = main(manifest["argv"])
        if code != EXIT_OK or not args.check:
            return code
        bad = [p for p, digest in manifest["outputs"].items() if _sha256(Path(p)) != digest]
    finally:
        os.chdir(here)
    for p in bad:
        print(f"output differs from manifest: {p}", file=sys.stderr)
    return EXIT_VERIFY if bad else EXIT_OK


COMMANDS = {
    "synth": _synth,
    "moments": _moments,
    "recover": _recover,
    "verify": _verify,
    "replay": _replay,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"hermpio: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"hermpio: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
