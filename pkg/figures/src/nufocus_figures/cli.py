"""render_figures: turn simulator CSV outputs into PNG+SVG panels.

Accepts a run manifest (renders every CSV it lists, inferring the panel
kind and taking the repetition period from the manifest) or explicit CSV
paths.  Exit code 0 on success, 1 on any input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .render import (
    DEFAULT_T_REP_S,
    FigureSpec,
    PANEL_KINDS,
    RenderError,
    infer_kind,
    render,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render simulator CSV tables as static figures",
    )
    parser.add_argument("inputs", nargs="+", metavar="manifest.json|table.csv",
                        help="a run manifest or individual CSV files")
    parser.add_argument("--out", required=True, metavar="DIR",
                        help="output directory for the images")
    parser.add_argument("--panel", choices=PANEL_KINDS, default=None,
                        help="force the panel kind (default: infer per file)")
    parser.add_argument("--t-rep", type=float, default=None, metavar="SECONDS",
                        help="pulse repetition period for PSC guides "
                             f"(default: manifest value or {DEFAULT_T_REP_S})")
    return parser


def _jobs_from_manifest(path: str, t_rep: float | None):
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    period = t_rep if t_rep is not None else float(
        manifest.get("T_R_s", DEFAULT_T_REP_S)
    )
    for name in manifest.get("files", []):
        if name.endswith(".csv"):
            yield os.path.join(base, name), period


def _special_kind(csv_path: str) -> str | None:
    # the fine drift table shares the rates columns; pick the drift panel
    if os.path.basename(csv_path).startswith("drift"):
        return "drift"
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    jobs = []
    for item in args.inputs:
        if item.endswith(".json"):
            jobs.extend(_jobs_from_manifest(item, args.t_rep))
        else:
            jobs.append((item, args.t_rep or DEFAULT_T_REP_S))
    os.makedirs(args.out, exist_ok=True)
    written = []
    try:
        for csv_path, period in jobs:
            kind = args.panel or _special_kind(csv_path) or infer_kind(csv_path)
            if kind is None:
                print(f"render_figures: skipping {csv_path} "
                      "(unrecognized columns)", file=sys.stderr)
                continue
            stem = os.path.splitext(os.path.basename(csv_path))[0]
            spec = FigureSpec(
                csv_path=csv_path, kind=kind,
                out_path=os.path.join(args.out, stem), t_rep_s=period,
            )
            written.extend(render(spec))
    except (RenderError, OSError) as exc:
        print(f"render_figures: error: {exc}", file=sys.stderr)
        return 1
    if not written:
        print("render_figures: error: no renderable inputs", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
