"""Command-line front end: render figures from pipeline artifact files."""

import argparse
import sys
from pathlib import Path

from reportplots import plots
from reportplots.metricsio import MetricsError, load_district_counts, load_metrics


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reportplots",
        description=(
            "Render ROC, score-density and district-count figures from a "
            "pipeline metrics JSON file and/or a district-count CSV."
        ),
    )
    parser.add_argument("--metrics", type=Path, help="evaluator metrics JSON file")
    parser.add_argument(
        "--district-csv", type=Path, help="district,count CSV from the lexstats stage"
    )
    parser.add_argument(
        "--out", type=Path, required=True, help="directory for the rendered images"
    )
    parser.add_argument("--format", choices=("png", "svg"), default="png")
    parser.add_argument(
        "--force", action="store_true", help="overwrite existing image files"
    )
    parser.add_argument(
        "--top-n", type=int, default=None, help="limit the district chart to N bars"
    )
    return parser


def _target(out_dir: Path, name: str, fmt: str, force: bool) -> Path:
    path = out_dir / f"{name}.{fmt}"
    if path.exists() and not force:
        raise MetricsError(f"refusing to overwrite {path} (pass --force)")
    return path


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.metrics is None and args.district_csv is None:
        print("nothing to do: pass --metrics and/or --district-csv", file=sys.stderr)
        return 1
    if args.top_n is not None and args.top_n < 1:
        print("error: --top-n must be >= 1", file=sys.stderr)
        return 1
    written = []
    try:
        if args.metrics is not None:
            metrics = load_metrics(args.metrics)
            roc_path = _target(args.out, "roc", args.format, args.force)
            density_path = _target(args.out, "densities", args.format, args.force)
            written.append(plots.plot_roc(metrics, roc_path))
            written.append(plots.plot_densities(metrics, density_path))
        if args.district_csv is not None:
            rows = load_district_counts(args.district_csv)
            bar_path = _target(args.out, "districts", args.format, args.force)
            written.append(plots.plot_district_bars(rows, bar_path, top_n=args.top_n))
    except MetricsError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
