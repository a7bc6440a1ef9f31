"""``omrkit`` command line: staff, pitch, eval, synth, anchors.

Exit codes: 0 success, 2 I/O failure, 3 invalid input or parameters.
Settings resolve as command-line flags, then ``--config`` file entries
(``key = value`` lines), then built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, detkit, evaluation, imaging, ingest, pitch, staffdet
from .errors import OmrError, SchemaError

log = logging.getLogger("omrkit")

EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 2, 3


class UsageError(OmrError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _write_text(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _dump(doc):
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _read_json(path):
    raw = Path(path).read_bytes()
    try:
        return json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None


# ---------------------------------------------------------------- staff

def _staff_params(args):
    return staffdet.StaffDetectParams(
        kernel_width_fraction=args.kernel_width_fraction,
        min_aspect=args.min_aspect,
        max_thickness_factor=args.max_thickness_factor,
        group_gap_tolerance=args.group_gap_tolerance,
    )


def _staff_one(path, params, out_json, out_overlay):
    gray = imaging.load_gray(path)
    line_set, staves = staffdet.detect_staff(gray, params)
    doc = staffdet.staff_document(Path(path).name, line_set, staves)
    _write_text(out_json, staffdet.dumps(doc))
    if out_overlay is not None:
        imaging.write_image(out_overlay, staffdet.render_overlay(gray, line_set))
    log.info("%s: %d staff lines, %d staves, %d non-staff", path, len(line_set.staff_lines),
             len(staves), len(line_set.non_staff))
    return doc


def cmd_staff(args):
    params = _staff_params(args)
    images = [Path(p) for p in args.images]
    if len(images) == 1:
        jobs = [(images[0], Path(args.out), Path(args.overlay) if args.overlay else None)]
    else:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        ov_dir = Path(args.overlay) if args.overlay else None
        if ov_dir is not None:
            ov_dir.mkdir(parents=True, exist_ok=True)
        stems = [p.stem for p in images]
        if len(set(stems)) != len(stems):
            raise UsageError("input images must have distinct file stems")
        jobs = [(p, out_dir / f"{p.stem}.staff.json", ov_dir / f"{p.stem}.overlay.png" if ov_dir else None)
                for p in images]
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = [pool.submit(_staff_one, src, params, dst, ov) for src, dst, ov in jobs]
        for f in futures:
            f.result()
    return EXIT_OK


# ---------------------------------------------------------------- pitch

def cmd_pitch(args):
    staves = staffdet.staves_from_document(_read_json(args.staff))
    page = ingest.read_detections(_read_json(args.detections))
    stream = pitch.build_semantic_stream(page.detections, staves, args.clef_policy)
    if stream.symbol_count() != len(page.detections):
        raise OmrError(f"symbol conservation violated: {stream.symbol_count()} out of {len(page.detections)}")
    _write_text(args.out, _dump(pitch.semantic_document(stream)))
    return EXIT_OK


# ---------------------------------------------------------------- eval

def _load_gt(paths, dialect, strict):
    pages = []
    for p in paths:
        data = Path(p).read_bytes()
        pages.extend(ingest.parse_annotation_pages(data, dialect, strict, page_id=Path(p).stem))
    return pages


def cmd_eval(args):
    cfg = evaluation.EvalConfig(
        iou_threshold=args.iou, iou_kind="mask" if args.masks else "box", ap_style=args.ap_style)
    gt_pages = _load_gt(args.gt, args.dialect, args.strict)
    if args.self_test:
        det_pages = [(g.page_id, ingest.gt_as_detections(g)) for g in gt_pages]
    else:
        if not args.det:
            raise UsageError("--det is required unless --self-test is given")
        det_pages = []
        for p in args.det:
            page = ingest.read_detections(_read_json(p))
            det_pages.append((page.page_id or Path(p).stem, page.detections))
    report = evaluation.evaluate(det_pages, gt_pages, cfg)
    if args.report:
        _write_text(args.report, evaluation.report_json(report))
    if args.csv:
        _write_text(args.csv, evaluation.report_csv(report))
    print("n/a" if report.mAP is None else f"{report.mAP:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------- synth / anchors

def cmd_synth(args):
    params = ingest.SynthParams(
        staves=args.staves, spacing=args.spacing, thickness=args.thickness, rotation=args.rotation,
        contrast=args.contrast, noise=args.noise, decoys=args.decoys, notes=args.notes,
        seed=args.seed, width=args.width, height=args.height)
    page = ingest.synth_score(params)
    imaging.write_image(args.out, page.image)
    if args.gt:
        _write_text(args.gt, _dump(ingest.ground_truth_document(page)))
    if args.detections:
        symbols = [pitch.DetectedSymbol("noteheadBlack", 1.0, n.bbox) for n in page.notes]
        symbols += [pitch.DetectedSymbol(c, 1.0, b) for c, b in zip(page.decoy_categories, page.decoys)]
        det = ingest.DetectionPage(Path(args.out).name, params.width, params.height, symbols)
        _write_text(args.detections, ingest.write_detections(det))
    return EXIT_OK


def cmd_anchors(args):
    cfg = detkit.AnchorConfig(scales=args.scales, ratios=args.ratios, stride=args.stride, grid=tuple(args.grid))
    text = _dump(detkit.anchors_document(cfg))
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", default=argparse.SUPPRESS,
                        help="key = value settings file; flags take precedence")
    common.add_argument("--jobs", type=int, metavar="N", default=argparse.SUPPRESS,
                        help="pages processed concurrently")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    parser = _Parser(prog="omrkit", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"omrkit {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    d = staffdet.StaffDetectParams()
    p = sub.add_parser("staff", parents=[common], help="detect staff lines and staves")
    p.add_argument("images", nargs="+")
    p.add_argument("--out", required=True, help="staff.json path (a directory for several images)")
    p.add_argument("--overlay", help="green/red overlay image path (a directory for several images)")
    p.add_argument("--kernel-width-fraction", type=float, default=d.kernel_width_fraction)
    p.add_argument("--min-aspect", type=float, default=d.min_aspect)
    p.add_argument("--max-thickness-factor", type=float, default=d.max_thickness_factor)
    p.add_argument("--group-gap-tolerance", type=float, default=d.group_gap_tolerance)
    p.set_defaults(func=cmd_staff)

    p = sub.add_parser("pitch", parents=[common], help="assign symbols to staves and name pitches")
    p.add_argument("--staff", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--clef-policy", default="treble", choices=["treble", "bass", "alto", "detect"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pitch)

    p = sub.add_parser("eval", parents=[common], help="mAP of detections against annotations")
    p.add_argument("--gt", action="append", required=True, help="annotation XML (repeatable)")
    p.add_argument("--det", action="append", help="detections JSON (repeatable)")
    p.add_argument("--dialect", default="doremi", choices=["doremi", "muscima"])
    p.add_argument("--strict", action="store_true", help="reject unknown annotation fields")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--masks", action="store_true", help="match on mask IoU instead of box IoU")
    p.add_argument("--ap-style", default="all-point", choices=["all-point", "11-point"])
    p.add_argument("--report")
    p.add_argument("--csv")
    p.add_argument("--self-test", action="store_true", help="evaluate the ground truth against itself")
    p.set_defaults(func=cmd_eval)

    s = ingest.SynthParams.__dataclass_fields__
    p = sub.add_parser("synth", parents=[common], help="render a synthetic score page")
    for name in ("staves", "spacing", "thickness", "decoys", "notes", "seed", "width", "height"):
        p.add_argument(f"--{name}", type=int, default=s[name].default)
    for name in ("rotation", "contrast", "noise"):
        p.add_argument(f"--{name}", type=float, default=s[name].default)
    p.add_argument("--out", required=True)
    p.add_argument("--gt")
    p.add_argument("--detections")
    p.set_defaults(func=cmd_synth)

    a = detkit.AnchorConfig()
    p = sub.add_parser("anchors", parents=[common], help="dump grid anchors as JSON")
    p.add_argument("--scales", type=_float_list, default=a.scales)
    p.add_argument("--ratios", type=_float_list, default=a.ratios)
    p.add_argument("--stride", type=float, default=a.stride)
    p.add_argument("--grid", type=int, nargs=2, metavar=("COLS", "ROWS"), default=list(a.grid))
    p.add_argument("--out")
    p.set_defaults(func=cmd_anchors)
    return parser


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(subparser, settings):
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in settings.items():
        if key in ("jobs", "verbose"):
            continue
        act = actions.get(key)
        if act is None or key in ("func", "help", "config"):
            raise UsageError(f"config key {key!r} is not a setting of this command")
        if isinstance(act, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            parts = raw.split() if act.nargs not in (None, "?") else [raw]
            conv = act.type or str
            try:
                vals = [conv(v) for v in parts]
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
            if act.choices is not None and any(v not in act.choices for v in vals):
                raise UsageError(f"config key {key!r}: must be one of {list(act.choices)}")
            value = vals if act.nargs not in (None, "?") else vals[0]
            if act.dest in ("gt", "det"):
                value = vals
        defaults[key] = value
    subparser.set_defaults(**defaults)
    for act in subparser._actions:
        if act.dest in defaults and act.required:
            act.required = False


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # find --config and the command without enforcing required flags yet
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, rest = pre.parse_known_args(argv)
        commands = parser._subparsers._group_actions[0].choices
        command = next((a for a in rest if a in commands), None)
        if known.config is not None and command is not None:
            settings = read_config(known.config)
            _apply_config(commands[command], settings)
            if "jobs" in settings and "--jobs" not in argv:
                argv = ["--jobs", settings["jobs"]] + argv
            if settings.get("verbose", "").lower() in ("1", "true", "yes", "on"):
                argv = ["--verbose"] + argv
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    except OSError as exc:
        print(f"omrkit: {exc}", file=sys.stderr)
        return EXIT_IO
    except OmrError as exc:
        print(f"omrkit: {exc}", file=sys.stderr)
        return EXIT_INVALID
    args.jobs = getattr(args, "jobs", 1)
    verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("omrkit: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except OSError as exc:
        print(f"omrkit: {exc}", file=sys.stderr)
        return EXIT_IO
    except OmrError as exc:
        print(f"omrkit: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
