"""Command-line entry point: schedules, synthetic data, training,
evaluation, complexity, parameter counts, gradient checks, experiments.

Exit codes: 0 success, 1 verification or assertion failure, 2 usage error.
All outputs are reproducible byte-for-byte given identical inputs; the
results root comes from --out or the FDN_RESULTS_DIR environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _results_dir(args) -> Path:
    out = getattr(args, "out", None) or os.environ.get("FDN_RESULTS_DIR", "results")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_manifest(path):
    from .pipeline import DatasetManifest
    return DatasetManifest.load(path)


def _stage_plan(args):
    from .pipeline import Stage, StagePlan
    if args.stages:
        stages = []
        for part in args.stages.split(";"):
            e, p, b = (int(v) for v in part.split(","))
            stages.append(Stage(e, p, b))
        return StagePlan(stages)
    from .training import default_stage_plan
    return default_stage_plan(args.epochs, args.patch, args.batch)


# ---------------------------------------------------------------------------
# subcommands

def cmd_schedule(args) -> int:
    from .pipeline import Schedule, build_schedule, replay_verify, schedule_hash
    manifest = _load_manifest(args.manifest)
    plan = _stage_plan(args)
    if args.action == "build":
        sched = build_schedule(manifest, plan, args.epochs, args.data_seed)
        sched.save(args.schedule)
        print(f"wrote {len(sched.entries)} entries to {args.schedule}")
        print(f"schedule_hash {schedule_hash(sched).hex()}")
        return EXIT_OK
    if args.action == "hash":
        sched = build_schedule(manifest, plan, args.epochs, args.data_seed)
        print(schedule_hash(sched).hex())
        return EXIT_OK
    # verify
    sched = Schedule.load(args.schedule)
    report = replay_verify(sched, manifest, plan, sched.epochs, sched.data_seed)
    print(report)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_synth_data(args) -> int:
    from .synth import write_synth_corpus
    manifest = write_synth_corpus(args.out_dir, args.seed, args.count, args.size,
                                  channels=args.channels)
    print(f"wrote {len(manifest)} images and manifest.csv under {args.out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .models import load_model_config
    from .training import TrainConfig, train
    out = _results_dir(args)
    manifest = _load_manifest(args.manifest)
    plan = _stage_plan(args)
    tcfg = TrainConfig(epochs=args.epochs, stage_plan=plan, data_seed=args.data_seed,
                       init_seed=args.init_seed, base_lr=args.lr,
                       clip_norm=args.clip_norm)
    model, log = train(tcfg, load_model_config(args.model), manifest)
    ckpt = out / "checkpoint.fdnc"
    model.save(ckpt)
    log.checkpoint_path = str(ckpt)
    log.save(out / "trainlog.csv")
    print(f"final loss {log.rows[-1].loss!r}" if log.rows else "no iterations")
    print(f"checkpoint {ckpt}")
    print(f"trainlog {out / 'trainlog.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .metrics import evaluate_model, reports_to_csv
    from .models import Model
    out = _results_dir(args)
    model = Model.load(args.checkpoint)
    manifest = _load_manifest(args.manifest)
    sigmas = [float(s) for s in args.sigmas.split(",")]
    reports = evaluate_model(model, manifest, sigmas, args.eval_seed,
                             dataset_name=args.dataset_name)
    csv = reports_to_csv(reports)
    (out / "eval.csv").write_text(csv)
    print(csv, end="")
    return EXIT_OK


def cmd_complexity(args) -> int:
    from .attention import sa_complexity
    kind = {"local": "local_spatial", "local_spatial": "local_spatial",
            "channel": "channel"}.get(args.kind)
    if kind is None:
        print(f"unknown kind {args.kind!r}", file=sys.stderr)
        return EXIT_USAGE
    c = sa_complexity(kind, args.h, args.w, args.c, M=args.m, L=args.l)
    print("kind,H,W,C,M,L,projection,attention,total")
    print(f"{kind},{args.h},{args.w},{args.c},{args.m},{args.l},"
          f"{c.projection_flops},{c.attention_flops},{c.total}")
    return EXIT_OK


def cmd_params(args) -> int:
    from .models import build_model, count_params, load_model_config
    model = build_model(load_model_config(args.model), args.init_seed)
    print(count_params(model))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .verification import gradient_suite
    ok = True
    for name, report in gradient_suite(tol=args.tol):
        print(f"{name:32s} {report}")
        ok &= report.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_experiment(args) -> int:
    from .experiments import list_experiments, load_experiment_definition, run_experiment
    if args.name == "list":
        for n in list_experiments():
            print(n)
        return EXIT_OK
    defn = load_experiment_definition(args.name)
    out = _results_dir(args) / defn["study"]
    result = run_experiment(defn, out_dir=out)
    print(result.report_csv(), end="")
    for note in result.notes:
        print(f"# {note}")
    print(f"results under {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdn", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_schedule_args(p):
        p.add_argument("--manifest", required=True)
        p.add_argument("--epochs", type=int, default=30)
        p.add_argument("--data-seed", type=int, default=0, dest="data_seed")
        p.add_argument("--patch", type=int, default=24)
        p.add_argument("--batch", type=int, default=8)
        p.add_argument("--stages", default=None,
                       help="explicit plan 'epoch,patch,batch;epoch,patch,batch;...'")

    ps = sub.add_parser("schedule", help="build, verify, or hash a training schedule")
    ps.add_argument("action", choices=["build", "verify", "hash"])
    ps.add_argument("--schedule", default="schedule.fdnsched")
    add_schedule_args(ps)
    ps.set_defaults(fn=cmd_schedule)

    pd = sub.add_parser("synth-data", help="generate the procedural texture corpus")
    pd.add_argument("--out-dir", default="synth_data")
    pd.add_argument("--seed", type=int, default=100)
    pd.add_argument("--count", type=int, default=64)
    pd.add_argument("--size", type=int, default=96)
    pd.add_argument("--channels", type=int, default=3, choices=[1, 3])
    pd.set_defaults(fn=cmd_synth_data)

    pt = sub.add_parser("train", help="train a model on a manifest")
    pt.add_argument("--model", required=True)
    pt.add_argument("--init-seed", type=int, default=0, dest="init_seed")
    pt.add_argument("--lr", type=float, default=1.5e-3)
    pt.add_argument("--clip-norm", type=float, default=None, dest="clip_norm")
    pt.add_argument("--out", default=None)
    add_schedule_args(pt)
    pt.set_defaults(fn=cmd_train)

    pe = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    pe.add_argument("--checkpoint", required=True)
    pe.add_argument("--manifest", required=True)
    pe.add_argument("--sigmas", default="15,25,50")
    pe.add_argument("--eval-seed", type=int, default=7, dest="eval_seed")
    pe.add_argument("--dataset-name", default="test", dest="dataset_name")
    pe.add_argument("--out", default=None)
    pe.set_defaults(fn=cmd_eval)

    pc = sub.add_parser("complexity", help="attention complexity calculator")
    pc.add_argument("--kind", required=True)
    pc.add_argument("--h", type=int, required=True)
    pc.add_argument("--w", type=int, required=True)
    pc.add_argument("--c", type=int, required=True)
    pc.add_argument("--m", type=int, default=1)
    pc.add_argument("--l", type=int, default=1)
    pc.set_defaults(fn=cmd_complexity)

    pp = sub.add_parser("params", help="parameter count of a model config")
    pp.add_argument("--model", required=True)
    pp.add_argument("--init-seed", type=int, default=0, dest="init_seed")
    pp.set_defaults(fn=cmd_params)

    pg = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    pg.add_argument("--tol", type=float, default=1e-4)
    pg.set_defaults(fn=cmd_gradcheck)

    px = sub.add_parser("experiment", help="run a named study ('list' to enumerate)")
    px.add_argument("name")
    px.add_argument("--out", default=None)
    px.set_defaults(fn=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
