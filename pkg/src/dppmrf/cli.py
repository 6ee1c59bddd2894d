"""Command-line driver: phantom generation, segmentation, verification, benchmarks.

Exit status is 0 on success, 2 for usage or input errors (bad flags, missing
or malformed files, unsupported options) and 1 for anything unexpected.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .estimator import MRFSegmenter
from .graph import LabelMapError, grid_oversegment
from .io import FormatError, read_pgm, read_rlm, write_pgm, write_rlm
from .metrics import confusion, metrics, porosity
from .synth import PhantomSpec, make_dataset

VERIFY_HEADER = ["precision", "recall", "accuracy", "porosity_pred", "porosity_truth"]
BENCH_HEADER = ["dataset", "backend", "threads", "chunk_size", "rep", "wall_s",
                "graph_s", "cliques_s", "hoods_s", "optimize_s", "speedup"]

BENCH_EPILOG = """\
CSV schema (one header row, comma separated, one row per timed run):
  dataset     image file stem
  backend     "reference" for the serial baseline row, else the DPP backend
  threads     worker threads (1 for the baseline)
  chunk_size  elements per task, or "auto"
  rep         repetition index, starting at 0
  wall_s      timed wall time in seconds; only the optimisation stage is timed
  graph_s, cliques_s, hoods_s, optimize_s
              per-stage wall times in seconds
  speedup     baseline wall_s / this row's wall_s
The first data row is the baseline; then threads x repeat rows follow in
flag order.  Mean optimisation time and speedup per thread count go to stdout.
"""

VERIFY_EPILOG = """\
CSV schema: header "precision,recall,accuracy,porosity_pred,porosity_truth"
then one row with 6 decimals.  Nonzero pixels count as pore.  A metric whose
denominator is zero is written as "nan".
"""


class UsageError(Exception):
    """Bad flags or input files; maps to exit status 2."""


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _fraction(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return value


def _thread_list(text):
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad thread list {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"bad thread list {text!r}")
    return values


def _binary_from_pgm(path):
    return (read_pgm(path) > 0).astype(np.uint8)


def _overseg(args, image):
    if args.overseg is not None:
        regions = read_rlm(args.overseg)
        if regions.shape != image.shape:
            raise UsageError(f"oversegmentation {regions.shape} does not match image {image.shape}")
        return regions.astype(np.int64)
    return grid_oversegment(image, args.block)


def cmd_gen_synth(args):
    spec = PhantomSpec(width=args.size, height=args.size, pore_fraction=args.pore,
                       seed=args.seed, sp_rate=args.sp, gauss_sigma=args.gauss,
                       ringing=args.ringing)
    truth, noisy = make_dataset(spec)
    write_pgm(args.out, noisy)
    if args.truth:
        write_pgm(args.truth, truth * np.uint8(255))
    print(f"wrote {args.out}" + (f" and {args.truth}" if args.truth else "")
          + f" porosity={porosity(truth):.6f}")
    return 0


def cmd_oversegment(args):
    image = read_pgm(args.image)
    regions = grid_oversegment(image, args.block)
    write_rlm(args.out, regions)
    print(f"wrote {args.out} regions={int(regions.max()) + 1}")
    return 0


def cmd_segment(args):
    if args.labels != 2:
        raise UsageError(f"--labels {args.labels} is not supported, only 2")
    image = read_pgm(args.image)
    regions = _overseg(args, image)
    model = MRFSegmenter(block_size=args.block, beta=args.beta, em_max_iter=args.em_iters,
                         map_max_iter=args.map_iters, method=args.method,
                         backend=args.backend, n_threads=args.threads,
                         chunk_size=args.chunk, n_init=args.n_init, random_state=args.seed)
    t0 = time.perf_counter()
    model.fit(image, oversegmentation=regions)
    total = time.perf_counter() - t0
    write_pgm(args.out, model.labels_ * np.uint8(255))

    t = model.timings_
    summary = {
        "image": os.fspath(args.image), "out": os.fspath(args.out),
        "regions": int(model.graph_.n_vertices), "edges": int(model.graph_.n_edges),
        "cliques": len(model.cliques_), "hoods": len(model.hoods_),
        "backend": args.backend, "threads": args.threads, "seed": args.seed,
        "em_iterations": model.n_iter_, "final_energy": model.trace_.final_energy,
        "mu": model.mu_.tolist(), "sigma": model.sigma_.tolist(),
        "porosity": porosity(model.labels_),
        "graph_s": t["graph"], "cliques_s": t["cliques"], "hoods_s": t["hoods"],
        "optimize_s": t["optimize"], "total_s": total,
    }
    print("segment regions={regions} hoods={hoods} em_iter={em_iterations} "
          "energy={final_energy:.4f} porosity={porosity:.6f} graph_s={graph_s:.4f} "
          "cliques_s={cliques_s:.4f} hoods_s={hoods_s:.4f} optimize_s={optimize_s:.4f} "
          "total_s={total_s:.4f}".format(**summary))
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    return 0


def _fmt(value):
    return "nan" if value is None else f"{value:.6f}"


def cmd_verify(args):
    pred, truth = _binary_from_pgm(args.pred), _binary_from_pgm(args.truth)
    if pred.shape != truth.shape:
        raise UsageError(f"shape mismatch: prediction {pred.shape} vs truth {truth.shape}")
    m = metrics(confusion(pred, truth))
    row = [m.precision, m.recall, m.accuracy, porosity(pred), porosity(truth)]
    out = sys.stdout
    out.write(",".join(VERIFY_HEADER) + "\n")
    out.write(",".join(_fmt(v) for v in row) + "\n")
    return 0


def _bench_row(dataset, backend, threads, chunk, rep, model, baseline):
    t = model.timings_
    wall = t["optimize"]
    return {
        "dataset": dataset, "backend": backend, "threads": threads,
        "chunk_size": "auto" if chunk is None else chunk, "rep": rep,
        "wall_s": f"{wall:.6f}", "graph_s": f"{t['graph']:.6f}",
        "cliques_s": f"{t['cliques']:.6f}", "hoods_s": f"{t['hoods']:.6f}",
        "optimize_s": f"{wall:.6f}", "speedup": f"{(baseline or wall) / wall:.6f}",
    }


def cmd_bench(args):
    image = read_pgm(args.image)
    regions = _overseg(args, image)
    dataset = os.path.splitext(os.path.basename(args.image))[0]
    common = dict(block_size=args.block, beta=args.beta, random_state=args.seed)

    base = MRFSegmenter(method="reference", **common).fit(image, oversegmentation=regions)
    t_star = base.timings_["optimize"]
    rows = [_bench_row(dataset, "reference", 1, None, 0, base, t_star)]
    means = {}
    for threads in args.threads:
        times = []
        for rep in range(args.repeat):
            model = MRFSegmenter(backend="threaded", n_threads=threads, chunk_size=args.chunk,
                                 **common).fit(image, oversegmentation=regions)
            rows.append(_bench_row(dataset, "threaded", threads, args.chunk, rep, model, t_star))
            times.append(model.timings_["optimize"])
        means[threads] = float(np.mean(times))

    with open(args.csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    print(f"baseline reference optimize_s={t_star:.6f}")
    for threads, mean in means.items():
        print(f"threads={threads} mean_optimize_s={mean:.6f} speedup={t_star / mean:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dppmrf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a corrupted disc phantom and its truth")
    p.add_argument("--size", type=_positive_int, default=128)
    p.add_argument("--pore", type=float, default=0.25, help="target pore fraction")
    p.add_argument("--sp", type=_fraction, default=0.0, help="salt-and-pepper pixel fraction")
    p.add_argument("--gauss", type=float, default=0.0, help="additive Gaussian noise std")
    p.add_argument("--ringing", action="store_true", help="add a radial ringing artefact")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="noisy image (PGM)")
    p.add_argument("--truth", help="ground truth (PGM, pore=255)")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("oversegment", help="write a grid oversegmentation as an RLM1 label map")
    p.add_argument("--image", required=True)
    p.add_argument("--block", type=_positive_int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oversegment)

    def pipeline_flags(p):
        p.add_argument("--image", required=True, help="input PGM")
        p.add_argument("--block", type=_positive_int, default=4,
                       help="grid block side when --overseg is absent")
        p.add_argument("--overseg", help="RLM1 region label map")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--beta", type=float, default=1.0, help="smoothness weight")
        p.add_argument("--chunk", type=_positive_int, default=None,
                       help="elements per task for the threaded backend")

    p = sub.add_parser("segment", help="segment an image into pore and solid")
    pipeline_flags(p)
    p.add_argument("--labels", type=int, default=2)
    p.add_argument("--backend", choices=["serial", "threaded"], default="serial")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--method", choices=["dpp", "reference"], default="dpp")
    p.add_argument("--n-init", type=_positive_int, default=1,
                   help="random restarts; the lowest-energy run is kept")
    p.add_argument("--em-iters", type=int, default=20)
    p.add_argument("--map-iters", type=int, default=10)
    p.add_argument("--out", required=True, help="segmentation (PGM, pore=255)")
    p.add_argument("--summary", help="also write the run summary as JSON")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("verify", help="score a segmentation against ground truth",
                       epilog=VERIFY_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="strong-scaling benchmark to CSV",
                       epilog=BENCH_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    pipeline_flags(p)
    p.add_argument("--threads", type=_thread_list, default=[1, 2, 4, 8],
                   help="comma separated thread counts")
    p.add_argument("--repeat", type=_positive_int, default=5)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FormatError, LabelMapError, OSError, ValueError) as exc:
        print(f"dppmrf {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"dppmrf {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
