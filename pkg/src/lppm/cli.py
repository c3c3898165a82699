"""Command-line interface.

Subcommands:
  ingest  parse a check-in file, filter to a region, write a POI/prior CSV
  sweep   run the metric sweep described by an experiment spec
  grid    run a sweep on the synthetic tagged grid scenario
"""

from __future__ import annotations

import argparse
import sys

from . import bench, ingest, report


def _region(text: str) -> ingest.Region:
    try:
        lat0, lat1, lon0, lon1 = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            "region must be lat0,lat1,lon0,lon1"
        ) from None
    return ingest.Region(lat0, lat1, lon0, lon1)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lppm",
                                description="location privacy mechanism toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("ingest", help="build a POI/prior CSV from check-ins")
    pi.add_argument("--dataset", required=True, help="SNAP check-in file (.gz ok)")
    pi.add_argument("--region", type=_region, default=ingest.SF_REGION,
                    help="lat0,lat1,lon0,lon1 (default: San Francisco region)")
    pi.add_argument("--count-mode", choices=("events", "users"), default="events")
    pi.add_argument("--out", required=True)
    pi.add_argument("--seed", type=int, default=0, help="unused; for uniformity")

    for name in ("sweep", "grid"):
        ps = sub.add_parser(name, help=f"run a {name} experiment")
        ps.add_argument("--config", required=True, help="experiment spec (INI)")
        ps.add_argument("--out", required=True, help="output CSV path")
        ps.add_argument("--seed", type=int, default=None,
                        help="override the spec's seed")
        ps.add_argument("--no-figures", action="store_true",
                        help="skip rendering PNG figures next to the CSV")
    return p


def cmd_ingest(args) -> int:
    with ingest.open_checkin_file(args.dataset) as fh:
        records, malformed = ingest.parse_checkins(fh)
    poi, prior = ingest.build_poi_and_prior(records, args.region,
                                            count_mode=args.count_mode)
    ingest.write_poi_csv(poi, prior, args.out)
    print(f"{poi.n} POIs, {malformed} malformed lines -> {args.out}")
    return 0


def cmd_sweep(args, force_grid: bool) -> int:
    spec = bench.load_spec(args.config)
    if args.seed is not None:
        spec.seed = args.seed
    if force_grid:
        spec.scenario = "grid"
    rows = bench.run_sweep(spec)
    bench.write_csv(rows, args.out, spec)
    if not args.no_figures:
        for path in report.render_figures(rows, args.out):
            print(f"figure: {path}")
    failures = [r for r in rows if r.error is not None]
    for r in failures:
        print(f"error: {r.mechanism} @ {r.param}: {r.error}", file=sys.stderr)
    print(f"{len(rows) - len(failures)}/{len(rows)} rows -> {args.out}")
    return 1 if failures else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "ingest":
            return cmd_ingest(args)
        return cmd_sweep(args, force_grid=args.command == "grid")
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"lppm: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
