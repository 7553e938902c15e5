import argparse
import sys
from typing import List, Optional

from polarkit import commands, crash_reporter
from polarkit.codec import CENTER_MODES
from polarkit.synth import KINDS


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--settings", type=str, help="Settings JSON (default: polarkit_settings.json next to the app).")
    p.add_argument("--workers", type=int, help="Worker threads for per-instance work (default from settings).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarkit",
        description="Polar mask encoding, upper-bound sweeps, loss checks and mask assembly.",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("sweep", help="Mean encode/decode IoU per ray count (CSV).")
    src = p.add_mutually_exclusive_group()
    src.add_argument("annotations", nargs="?", help="COCO-style polygon annotation JSON.")
    src.add_argument("--corpus", choices=KINDS, help="Use a synthetic corpus instead of a file.")
    p.add_argument("--count", type=int, help="Synthetic corpus size (default: 200).")
    p.add_argument("--seed", type=int, help="Synthetic corpus seed.")
    p.add_argument("--n-list", dest="n_list", type=str, help="Comma separated ray counts, e.g. 18,36,72.")
    p.add_argument("--center", choices=CENTER_MODES + ("both",), help="Center mode(s) to evaluate.")
    p.add_argument("--raster-size", dest="raster_size", type=int, help="Raster side for mask IoU (pixels).")
    p.add_argument("--out", type=str, default="sweep.csv", help="Output CSV (default: sweep.csv).")
    _common(p)
    p.set_defaults(func=commands.cmd_sweep)

    p = sub.add_parser("losscheck", help="Descent with the polar IoU loss vs smooth-L1 (CSV).")
    p.add_argument("--n", type=int, help="Rays per vector.")
    p.add_argument("--trials", type=int, help="Number of random target/start pairs.")
    p.add_argument("--steps", type=int, help="Descent steps per objective.")
    p.add_argument("--lr", type=float, help="Step size (log-space).")
    p.add_argument("--seed", type=int, help="Random seed.")
    p.add_argument("--out", type=str, default="losscheck.csv", help="Output CSV (default: losscheck.csv).")
    _common(p)
    p.set_defaults(func=commands.cmd_losscheck)

    p = sub.add_parser("pipeline", help="Score filter, top-k and NMS over a detections JSON.")
    p.add_argument("detections", help="JSON array of {center, rays, score, class_id}.")
    p.add_argument("--iou-thresh", dest="iou_thresh", type=float, help="NMS IoU threshold (default: 0.3).")
    p.add_argument("--score-thresh", dest="score_thresh", type=float, help="Score threshold (default: 0.25).")
    p.add_argument("--top-k", dest="top_k", type=int, help="Candidates kept before NMS (default: 1000).")
    p.add_argument("--class-agnostic", dest="class_agnostic", action="store_true", help="Suppress across classes.")
    p.add_argument("--out", type=str, default="pipeline.json", help="Output JSON (default: pipeline.json).")
    _common(p)
    p.set_defaults(func=commands.cmd_pipeline)

    p = sub.add_parser("synth", help="Write a synthetic corpus as annotation JSON.")
    p.add_argument("--kind", choices=KINDS, default="mixed")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, help="Random seed.")
    p.add_argument("--out", type=str, help="Output JSON (default: <kind>.json).")
    _common(p)
    p.set_defaults(func=commands.cmd_synth)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    # Install crash logging as early as possible so silent exits are captured.
    try:
        crash_reporter.install(argv)
    except Exception:
        pass

    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
