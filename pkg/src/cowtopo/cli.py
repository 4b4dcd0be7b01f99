"""Command-line entry point: ``cowtopo <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 validation error.
Reports are JSON written with sorted keys so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .cal import total_loss, weight_map
from .config import RunConfig, load_run_config, override
from .kernels import component_stats
from .metrics import cohort_summary, evaluate_case
from .preprocess import Modality, preprocess_case
from .refine import refine_volume
from .tasks import derive_graph, roi_box_from_mask
from .volume import (
    ClassMap,
    CowClass,
    Volume,
    load_label,
    load_prob,
    load_volume,
    read_array,
    save_volume,
)

log = logging.getLogger("cowtopo")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _to_json(obj):
    if isinstance(obj, dict):
        return {str(k): _to_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_json(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(payload, path) -> None:
    text = json.dumps(_to_json(payload), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _triple(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return tuple(parts)


def _pair(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    return tuple(parts)


def _run_config(args) -> RunConfig:
    cfg = load_run_config(args.config)
    if getattr(args, "class_map", None):
        cfg = replace(cfg, class_map=ClassMap.from_json(args.class_map))
    return cfg


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_manifest(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    cases = payload["cases"] if isinstance(payload, dict) else payload
    base = Path(path).parent
    out = []
    for i, case in enumerate(cases):
        case = dict(case)
        case.setdefault("id", f"case{i:04d}")
        case["in"] = str(base / case["in"])
        if case.get("out"):
            case["out"] = str(base / case["out"])
        out.append(case)
    return out


def _case_output(case, out_dir, suffix=".nii.gz") -> str:
    if case.get("out"):
        return case["out"]
    if out_dir is None:
        raise UsageError("manifest cases without 'out' need --out-dir")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    return str(Path(out_dir) / f"{case['id']}{suffix}")


# --- subcommands ----------------------------------------------------------------

def cmd_preprocess(args) -> int:
    run = _run_config(args)
    cfg = override(run.preprocess, cta_window=args.cta_window, mra_window=args.mra_window,
                   target_spacing=args.target_spacing, intensity_order=args.order)
    if args.manifest:
        cases = _load_manifest(args.manifest)
    else:
        if not (args.input and args.output and args.modality):
            raise UsageError("preprocess needs --modality, --in and --out (or --manifest)")
        cases = [{"id": Path(args.input).name, "in": args.input, "out": args.output, "modality": args.modality}]

    def one(case):
        modality = Modality.parse(case.get("modality") or args.modality)
        v = load_volume(case["in"])
        out = preprocess_case(v, modality, cfg)
        path = _case_output(case, args.out_dir)
        save_volume(out, path)
        log.info("preprocessed %s -> %s shape=%s", case["in"], path, out.shape)
        return {"id": case["id"], "out": path, "modality": modality.value, "shape": list(out.shape),
                "spacing": list(out.spacing.as_tuple())}

    results = _map(one, cases, args.jobs)
    if args.report:
        write_json({"config": cfg.to_dict(), "cases": results}, args.report)
    return EXIT_OK


def cmd_weights(args) -> int:
    run = _run_config(args)
    cfg = override(run.cal, lambda_fg=args.lambda_fg, epsilon=args.epsilon, weight_floor=args.weight_floor)
    lbl = load_label(args.label, run.class_map)
    c = CowClass.parse(args.cls)
    wm = weight_map(lbl, c, cfg)
    save_volume(Volume(wm.raw if args.raw else wm.weights, lbl.spacing, lbl.affine), args.output)
    if args.json:
        mask = lbl.mask(c)
        write_json({
            "class": c.label,
            "foreground_voxels": int(mask.sum()),
            "dc_max_mm": wm.dc_max,
            "max_weight": float(wm.weights.max()),
            "min_foreground_weight": float(wm.weights[mask].min()) if mask.any() else None,
            "config": cfg.to_dict(),
        }, args.json)
    return EXIT_OK


def cmd_loss(args) -> int:
    run = _run_config(args)
    cfg = override(run.cal, alpha_t=args.alpha_t, beta_t=args.beta_t, lambda_fg=args.lambda_fg,
                   epsilon=args.epsilon)
    prob = load_prob(args.prob)
    lbl = load_label(args.label, run.class_map)
    report = total_loss(prob, lbl, cfg)
    log.info("L_total = %.6f", report.total)
    write_json({**report.to_dict(), "config": cfg.to_dict()}, args.json)
    return EXIT_OK


def _refine_config(args, run: RunConfig):
    classes = tuple(s for s in args.classes.split(",") if s) if args.classes else None
    return override(run.refine, t_com=args.tcom, t_dis=args.tdis, t_dis_unit=args.tdis_unit,
                    classes_to_refine=classes, bridge_mode=args.bridge_mode)


def cmd_refine(args) -> int:
    run = _run_config(args)
    cfg = _refine_config(args, run)
    if args.manifest:
        cases = _load_manifest(args.manifest)
    else:
        if not (args.input and args.output):
            raise UsageError("refine needs --in and --out (or --manifest)")
        cases = [{"id": Path(args.input).name, "in": args.input, "out": args.output}]

    def one(case):
        lbl = load_label(case["in"], run.class_map)
        out, report = refine_volume(lbl, cfg)
        path = _case_output(case, args.out_dir)
        save_volume(out, path)
        return {"id": case["id"], "out": path, "classes": report.to_dict()}

    results = _map(one, cases, args.jobs)
    if args.report:
        if args.manifest:
            payload = {"config": cfg.to_dict(), "cases": results}
        else:
            payload = {"config": cfg.to_dict(), "classes": results[0]["classes"]}
        write_json(payload, args.report)
    return EXIT_OK


def cmd_detect(args) -> int:
    data, _, affine = read_array(args.input)
    box = roi_box_from_mask(np.asarray(data) != 0, args.connectivity)
    lo, hi = box.world_corners(affine)
    write_json({**box.to_dict(), "world_min": lo, "world_max": hi}, args.json)
    return EXIT_OK


def cmd_classify_graph(args) -> int:
    run = _run_config(args)
    cfg = override(run.graph, presence_min_voxels=args.presence_min_voxels,
                   adjacency_radius_mm=args.adjacency_radius_mm)
    graph = derive_graph(load_label(args.input, run.class_map), cfg)
    write_json(graph.to_dict(), args.json)
    return EXIT_OK


def _pair_cases(pred: Path, gt: Path) -> list[tuple[str, Path, Path]]:
    if pred.is_file() and gt.is_file():
        return [(pred.name, pred, gt)]
    if not (pred.is_dir() and gt.is_dir()):
        raise FileNotFoundError(f"--pred and --gt must both be files or both be directories: {pred}, {gt}")
    pairs = []
    for p in sorted(pred.iterdir()):
        if p.suffix == ".bin" or not (p.name.endswith((".nii", ".nii.gz", ".json"))):
            continue
        g = gt / p.name
        if not g.exists():
            raise FileNotFoundError(f"no ground truth for {p.name} in {gt}")
        pairs.append((p.name, p, g))
    if not pairs:
        raise FileNotFoundError(f"no cases found in {pred}")
    return pairs


def cmd_evaluate(args) -> int:
    run = _run_config(args)
    mcfg = override(run.metrics, classes_mode=args.classes_mode)
    pairs = _pair_cases(Path(args.pred), Path(args.gt))

    def one(item):
        name, p, g = item
        return evaluate_case(load_label(p, run.class_map), load_label(g, run.class_map),
                             classes_mode=mcfg.classes_mode, conn=mcfg.connectivity,
                             hd95_penalty=mcfg.hd95_penalty, graph_cfg=run.graph, case_id=name)

    cases = _map(one, pairs, args.jobs)
    write_json({
        "classes_mode": mcfg.classes_mode,
        "cases": [c.to_dict() for c in cases],
        "cohort": cohort_summary(cases),
    }, args.json)
    return EXIT_OK


def cmd_topo(args) -> int:
    run = _run_config(args)
    if args.cls:
        lbl = load_label(args.input, run.class_map)
        mask = lbl.mask(args.cls)
    else:
        data, _, _ = read_array(args.input)
        mask = np.asarray(data) != 0
    write_json(component_stats(mask, args.connectivity), args.json)
    return EXIT_OK


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="RunConfig JSON file")
    common.add_argument("--class-map", dest="class_map", help="JSON mapping class names to label ids")
    common.add_argument("--jobs", type=int, default=1, help="cases processed concurrently")
    common.add_argument("--seed", type=int, default=None, help="reserved; no stage is stochastic")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="cowtopo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cowtopo {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="command")

    p = sub.add_parser("preprocess", parents=[common], help="window scans and resample them to the target grid")
    p.add_argument("--modality", choices=["cta", "mra"])
    p.add_argument("--in", dest="input")
    p.add_argument("--out", dest="output")
    p.add_argument("--manifest", help="JSON {cases: [{id, in, modality, out?}]}")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--report", help="JSON summary of processed cases")
    p.add_argument("--target-spacing", dest="target_spacing", type=_triple, help="dz,dy,dx in mm")
    p.add_argument("--cta-window", dest="cta_window", type=_pair)
    p.add_argument("--mra-window", dest="mra_window", type=_pair)
    p.add_argument("--order", type=int, help="intensity interpolation order")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("weights", parents=[common], help="centerline-distance weight map of one class")
    p.add_argument("--label", required=True)
    p.add_argument("--class", dest="cls", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--json")
    p.add_argument("--raw", action="store_true", help="write weights without the floor clamp")
    p.add_argument("--lambda-fg", dest="lambda_fg", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--weight-floor", dest="weight_floor", type=float)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("loss", parents=[common], help="loss breakdown of a probability volume")
    p.add_argument("--prob", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--json", required=True)
    p.add_argument("--alpha-t", dest="alpha_t", type=float)
    p.add_argument("--beta-t", dest="beta_t", type=float)
    p.add_argument("--lambda-fg", dest="lambda_fg", type=float)
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("refine", parents=[common], help="topological refinement of selected classes")
    p.add_argument("--in", dest="input")
    p.add_argument("--out", dest="output")
    p.add_argument("--report")
    p.add_argument("--manifest")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--classes", help="comma-separated, e.g. Acom,R-Pcom,L-Pcom")
    p.add_argument("--tcom", type=int)
    p.add_argument("--tdis", type=float)
    p.add_argument("--tdis-unit", dest="tdis_unit", choices=["voxel", "mm"])
    p.add_argument("--bridge-mode", dest="bridge_mode", choices=["line", "spline"])
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("detect", parents=[common], help="RoI bounding box from a binary RoI mask")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--json", required=True)
    p.add_argument("--connectivity", type=int, choices=[6, 18, 26], default=26)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("classify-graph", parents=[common], help="CoW edge lists from a segmentation")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--json", required=True)
    p.add_argument("--presence-min-voxels", dest="presence_min_voxels", type=int)
    p.add_argument("--adjacency-radius-mm", dest="adjacency_radius_mm", type=float)
    p.set_defaults(func=cmd_classify_graph)

    p = sub.add_parser("evaluate", parents=[common], help="segmentation metrics per case and per cohort")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--json", required=True)
    p.add_argument("--classes-mode", dest="classes_mode", choices=["present", "all13"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("topo", parents=[common], help=argparse.SUPPRESS)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--json", required=True)
    p.add_argument("--class", dest="cls")
    p.add_argument("--connectivity", type=int, choices=[6, 18, 26], default=26)
    p.set_defaults(func=cmd_topo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
