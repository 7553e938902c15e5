"""
Subcommands behind main.py. Each takes the parsed argparse namespace and
returns a process exit code: 0 on success, 2 on a usage or input error (one
"[ERROR] ..." line on stderr, no output file written).

Flags left unset fall back to the loaded Settings (``--settings PATH`` or
polarkit_settings.json next to the app).
"""

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from . import crash_reporter
from .annotations import SweepReport, format_sig, load_annotations, write_annotations, write_sweep_csv
from .codec import CENTER_MODES, PolarMask, UpperBoundRow, check_ray_count, upper_bound_sweep
from .config import Settings, load_settings
from .console import dprint, eprint
from .errors import MalformedJson, SchemaError
from .geometry import Polygon
from .loss import DescentTrace, descend, objectives
from .postprocess import Detection, assemble, min_bbox
from .synth import CANVAS_SIZE, synth_corpus

LOSSCHECK_HEADER = ["trial", "step", "objective", "loss", "polar_iou"]
SUCCESS_IOU = 0.99
DEFAULT_SWEEP_COUNT = 200


def _settings(args) -> Settings:
    return load_settings(getattr(args, "settings", None))


def _pick(value, default):
    return default if value is None else value


def _workers(args, settings: Settings) -> int:
    return max(1, int(_pick(getattr(args, "workers", None), settings.workers)))


def parse_n_list(text: str) -> List[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"--n-list must be comma separated integers, got {text!r}")
    if not values:
        raise ValueError("--n-list is empty")
    return [check_ray_count(n) for n in values]


def _write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


# ---------------------------------------------------------------- sweep

def _sweep_input(args, settings: Settings) -> Tuple[List[Polygon], str, int, int]:
    """Polygons, corpus name, skipped instances and skipped polygon parts."""
    if getattr(args, "annotations", None):
        aset = load_annotations(args.annotations)
        polys = aset.largest_polygons()
        extra = sum(len(inst.polygons) - 1 for inst in aset.instances)
        if extra:
            dprint("Sweep", f"encoding the largest polygon only; {extra} further part(s) ignored")
        return polys, Path(args.annotations).stem, aset.skipped, extra + aset.parts_dropped
    if getattr(args, "corpus", None):
        count = int(_pick(args.count, DEFAULT_SWEEP_COUNT))
        seed = int(_pick(args.seed, settings.seed))
        if count < 1:
            return [], args.corpus, 0, 0
        return synth_corpus(args.corpus, count, seed), f"{args.corpus}-{count}-s{seed}", 0, 0
    raise ValueError("sweep needs an annotation file or --corpus KIND")


def run_sweep(
    polygons: Sequence[Polygon],
    n_list: Sequence[int],
    modes: Sequence[str],
    settings: Settings,
    workers: int = 1,
    extra_skipped: int = 0,
) -> List[UpperBoundRow]:
    """Rows ordered by center mode, then by n as given."""
    rows: List[UpperBoundRow] = []
    for mode in modes:
        part = upper_bound_sweep(
            polygons,
            n_list,
            center_mode=mode,
            raster_size=settings.raster_size,
            inflate=settings.bbox_inflate,
            max_step=settings.max_step,
            workers=workers,
        )
        if not part:
            raise ValueError(f"no instance could be evaluated with the {mode} center")
        rows.extend(replace(r, skipped=r.skipped + extra_skipped) for r in part)
    return rows


def cmd_sweep(args) -> int:
    try:
        settings = _settings(args)
        n_list = parse_n_list(args.n_list) if args.n_list else list(settings.n_list)
        center = _pick(args.center, settings.center_mode)
        modes = list(CENTER_MODES) if center == "both" else [center]
        polys, name, ingest_skipped, parts_skipped = _sweep_input(args, settings)
        crash_reporter.note("corpus", name)
        crash_reporter.note("n_list", ",".join(str(n) for n in n_list))
        if not polys:
            eprint("empty corpus: no instances to sweep")
            return 2
        if args.raster_size is not None:
            settings.raster_size = int(args.raster_size)
        rows = run_sweep(polys, n_list, modes, settings, _workers(args, settings), ingest_skipped)
        report = SweepReport(rows, name, max(r.skipped for r in rows), parts_skipped)
        out = write_sweep_csv(args.out, report)
    except (ValueError, OSError) as ex:
        eprint(str(ex))
        return 2
    for r in rows:
        dprint("Sweep", f"n={r.n_rays:<4d} {r.center_mode:<4s} mean IoU {r.mean_iou:.4f} over {r.instance_count}")
    dprint(
        "Sweep",
        f"{name}: wrote {len(rows)} row(s) to {out}; "
        f"skipped {report.skipped} instance(s), {report.parts_skipped} polygon part(s)",
    )
    return 0


# ---------------------------------------------------------------- losscheck

@dataclass
class LosscheckResult:
    trials: int
    names: List[str]
    traces: List[List[DescentTrace]]

    def successes(self, threshold: float = SUCCESS_IOU) -> Dict[str, int]:
        out = {name: 0 for name in self.names}
        for per_trial in self.traces:
            for name, trace in zip(self.names, per_trial):
                if trace.final_iou >= threshold:
                    out[name] += 1
        return out


def draw_losscheck_pairs(n: int, trials: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Per trial a target ray vector and a nearby random start."""
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(trials):
        scale = rng.uniform(16.0, 128.0)
        target = scale * rng.uniform(0.5, 1.5, size=n)
        start = target * np.exp(rng.uniform(-0.4, 0.4, size=n))
        pairs.append((target, start))
    return pairs


def run_losscheck(
    n: int,
    trials: int,
    steps: int,
    lr: float,
    seed: int,
    beta: float = 1.0,
    alphas: Sequence[float] = (0.05, 0.30, 1.00),
    workers: int = 1,
) -> LosscheckResult:
    n = check_ray_count(n)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    if lr < 0:
        raise ValueError(f"step size must be >= 0, got {lr}")
    objs = objectives(beta, alphas)
    pairs = draw_losscheck_pairs(n, trials, seed)

    def _trial(pair) -> List[DescentTrace]:
        target, start = pair
        return [descend(target, start, obj, lr, steps) for _, obj in objs]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_trial, pairs))
    else:
        traces = [_trial(p) for p in pairs]
    return LosscheckResult(trials, [name for name, _ in objs], traces)


def losscheck_csv(result: LosscheckResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LOSSCHECK_HEADER)
    for t, per_trial in enumerate(result.traces):
        for name, trace in zip(result.names, per_trial):
            for step, (loss, iou) in enumerate(zip(trace.losses, trace.ious)):
                writer.writerow([t, step, name, format_sig(loss), format_sig(iou)])
    return buf.getvalue()


def cmd_losscheck(args) -> int:
    try:
        settings = _settings(args)
        crash_reporter.note("losscheck", f"n={_pick(args.n, settings.losscheck_n)} seed={_pick(args.seed, settings.seed)}")
        result = run_losscheck(
            n=int(_pick(args.n, settings.losscheck_n)),
            trials=int(_pick(args.trials, settings.losscheck_trials)),
            steps=int(_pick(args.steps, settings.losscheck_steps)),
            lr=float(_pick(args.lr, settings.losscheck_lr)),
            seed=int(_pick(args.seed, settings.seed)),
            beta=settings.smooth_l1_beta,
            alphas=settings.smooth_l1_alphas,
            workers=_workers(args, settings),
        )
        out = _write_text(Path(args.out), losscheck_csv(result))
    except (ValueError, OSError) as ex:
        eprint(str(ex))
        return 2
    for name, ok in result.successes().items():
        dprint("Loss", f"{name}: {ok}/{result.trials} trial(s) reached polar IoU >= {SUCCESS_IOU}")
    dprint("Loss", f"wrote {out}")
    return 0


# ---------------------------------------------------------------- pipeline

def _detection_from(item: Any, i: int) -> Detection:
    where = f"[{i}]"
    if not isinstance(item, dict):
        raise SchemaError(where, f"detection {where} must be an object")
    for key in ("center", "rays", "score"):
        if key not in item:
            raise SchemaError(f"{where}.{key}")
    center = item["center"]
    if not isinstance(center, list) or len(center) != 2:
        raise SchemaError(f"{where}.center", f"detection {where}: center must be [x, y]")
    try:
        mask = PolarMask(tuple(float(v) for v in center), item["rays"])
        return Detection(mask, float(item["score"]), item.get("class_id", 0))
    except (TypeError, ValueError) as ex:
        raise SchemaError(where, f"detection {where}: {ex}")


def read_detections(path) -> List[Detection]:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"Detections file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as ex:
        raise MalformedJson(str(p), ex.msg, ex.lineno, ex.colno)
    except UnicodeDecodeError as ex:
        raise MalformedJson(str(p), f"not UTF-8 ({ex.reason})", 1, ex.start + 1)
    if not isinstance(data, list):
        raise SchemaError("detections", "detections file must hold a JSON array")
    return [_detection_from(item, i) for i, item in enumerate(data)]


def _r4(values) -> List[float]:
    return [round(float(v), 4) for v in np.asarray(values, dtype=np.float64).reshape(-1)]


def pipeline_document(dets: Sequence[Detection], kept: Sequence[Tuple[Detection, Polygon]]) -> Dict[str, Any]:
    index = {id(d): i for i, d in enumerate(dets)}
    out = []
    for det, contour in kept:
        out.append(
            {
                "index": index[id(det)],
                "score": det.score,
                "class_id": det.class_id,
                "center": _r4([det.mask.center.x, det.mask.center.y]),
                "rays": _r4(det.mask.rays),
                "bbox": _r4(min_bbox(det.mask).as_list()),
                "contour": [_r4(v) for v in contour.vertices],
            }
        )
    return {"input_count": len(dets), "kept_count": len(out), "detections": out}


def cmd_pipeline(args) -> int:
    try:
        settings = _settings(args)
        crash_reporter.note("detections", args.detections)
        dets = read_detections(args.detections)
        kept = assemble(
            dets,
            score_threshold=float(_pick(args.score_thresh, settings.score_threshold)),
            k=int(_pick(args.top_k, settings.top_k)),
            iou_threshold=float(_pick(args.iou_thresh, settings.nms_iou_threshold)),
            class_aware=settings.class_aware and not args.class_agnostic,
        )
        doc = pipeline_document(dets, kept)
        out = _write_text(Path(args.out), json.dumps(doc, indent=2, sort_keys=True) + "\n")
    except (ValueError, OSError) as ex:
        eprint(str(ex))
        return 2
    dprint("Pipeline", f"kept {doc['kept_count']} of {doc['input_count']} detection(s); wrote {out}")
    return 0


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    try:
        settings = _settings(args)
        seed = int(_pick(args.seed, settings.seed))
        crash_reporter.note("corpus", f"{args.kind}-{args.count}-s{seed}")
        polys = synth_corpus(args.kind, int(args.count), seed)
        out = write_annotations(args.out or f"{args.kind}.json", polys, (CANVAS_SIZE, CANVAS_SIZE))
    except (ValueError, OSError) as ex:
        eprint(str(ex))
        return 2
    dprint("Synth", f"wrote {len(polys)} instance(s) to {out}")
    return 0
