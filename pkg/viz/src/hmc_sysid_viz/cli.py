"""Command line entry: render one figure from run artifacts.

Exit codes: 0 success, 2 bad arguments or unreadable artifacts, 3 anything
unexpected while rendering.
"""

from __future__ import annotations

import argparse
import sys

from .artifacts import ArtifactError
from .plots import KINDS, PlotJob

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hmc-sysid-plot",
        description="Render figures from hmc-sysid run artifacts.",
    )
    p.add_argument("--kind", required=True, choices=KINDS,
                   help="figure type to render")
    p.add_argument("--out", required=True, help="output image (.png or .svg)")
    p.add_argument("--chain", help="chain.csv with kept draws")
    p.add_argument("--space", help="space.json describing the coordinates")
    p.add_argument("--data", help="data.csv with the measured record")
    p.add_argument("--freqresp", help="freqresp.json with response draws")
    p.add_argument("--truth",
                   help="overlay: states_true.csv (states) or a JSON file "
                        "with num/den arrays (nyquist)")
    p.add_argument("--columns",
                   help="comma separated column names (trace_acf, pairs, "
                        "and optionally marginals)")
    p.add_argument("--max-lag", type=int, default=50,
                   help="ACF horizon for trace_acf (default 50)")
    p.add_argument("--bins", type=int, default=40,
                   help="histogram bins for marginals (default 40)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    columns = tuple(
        c.strip() for c in args.columns.split(",") if c.strip()
    ) if args.columns else ()
    job = PlotJob(
        kind=args.kind,
        out=args.out,
        chain=args.chain,
        space=args.space,
        data=args.data,
        freqresp=args.freqresp,
        truth=args.truth,
        columns=columns,
        max_lag=args.max_lag,
        bins=args.bins,
    )
    try:
        meta = job.run()
    except (ArtifactError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - safety net
        print(f"unexpected failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    rows, cols = meta.get("panels", (1, 1))
    print(f"wrote {meta['out']} ({args.kind}, {rows}x{cols} panels)")
    return EXIT_OK


def entry() -> None:
    sys.exit(main())
