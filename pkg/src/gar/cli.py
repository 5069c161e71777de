"""Command-line entry point: ``python -m gar <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import bench
from . import datasets as D
from .experiment import ExperimentConfig, emit_plot_data, run_ablation, run_experiment, run_sensitivity, write_report
from .metrics import evaluate
from .network import ParameterStore, predict


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def cmd_synth(args) -> int:
    data = D.SYNTHETIC[args.name]()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    D.write_csv(data, out)
    print(f"wrote {data.n} rows to {out}")
    return 0


def _finish(rep, out: Path) -> None:
    written = write_report(rep, out)
    plots = out / "plots"
    for kind in ("prediction_curve", "trace", "sensitivity_box"):
        try:
            written += emit_plot_data(rep, kind, plots)
        except ValueError:
            continue  # series not produced by this kind of run
    for s in rep.summaries:
        print(f"{s.method:>22} {s.metric:>8}  mean {s.mean:.4f}  std {s.std:.4f}")
    print(f"wrote {len(written)} files under {out}")


def cmd_run(args) -> int:
    cfg = _load_config(args)
    _finish(run_experiment(cfg), Path(args.out))
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    rep = run_ablation(cfg)
    _finish(rep, Path(args.out))
    for m, r in rep.ablation_ranks.items():
        print(f"{m:>22} mean rank {r:.3f}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    rep = run_sensitivity(cfg, _floats(args.alphas), _ints(args.batch_sizes))
    _finish(rep, Path(args.out))
    return 0


def cmd_bench(args) -> int:
    rows = bench.time_losses(_ints(args.sizes), args.repeats, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    bench.write_csv(rows, out)
    for r in rows:
        print(f"N={r.batch_size:>6} {r.loss_name:>28} median {r.median_ns / 1e6:10.3f} ms")
    return 0


def cmd_eval(args) -> int:
    params = ParameterStore.load(args.model)
    targets = args.targets.split(",") if args.targets else None
    if targets is None:
        # default: the trailing output_dim columns are targets
        with open(args.data, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        targets = header[-params.spec.output_dim :]
    data = D.load_csv(args.data, targets)
    stats = None
    if args.stats:
        stats = D.StandardizeStats.from_json(json.loads(Path(args.stats).read_text(encoding="utf-8")))
        data = replace(data, features=(data.features - stats.feature_mean) / stats.feature_std)
    pred = predict(params, data.features)
    if stats is not None:
        pred = stats.invert_targets(pred)
    rep = evaluate(pred, data.targets, data.target_names)
    print(json.dumps(rep.to_json(), sort_keys=True))
    return 0


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if getattr(args, "workers", None):
        cfg = replace(cfg, workers=args.workers)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gar", description="Gradient-aligned regression experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    s.add_argument("name", choices=["sine", "sqsine"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (("run", cmd_run, "run an experiment"), ("ablate", cmd_ablate, "run the seven-mask ablation")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--out", required=True)
        s.add_argument("--workers", type=int)
        s.set_defaults(func=func)

    s = sub.add_parser("sweep", help="alpha x batch-size sensitivity sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--alphas", required=True, help="comma or space separated")
    s.add_argument("--batch-sizes", required=True, help="comma or space separated")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("bench", help="time linear and quadratic loss forms")
    s.add_argument("--sizes", default="1024,2048,4096")
    s.add_argument("--repeats", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("eval", help="evaluate a saved model on a CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--targets", help="comma separated target columns (default: trailing columns)")
    s.add_argument("--stats", help="standardization JSON used at training time")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
