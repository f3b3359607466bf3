"""Command-line entry points: train, eval, infer, protocols, report.

Every run is driven by one YAML config (see ``vlfas.runconfig``); scalar
fields can be overridden with repeated ``--set section.field=value`` flags.
Artifacts embed the config hash, seed, and code version, so any reported
number traces back to one command.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys
import time

from . import __version__
from .checkpoints import CheckpointError, load_checkpoint
from .data.images import load_image01
from .data.protocols import enumerate_protocols
from .evaluation import (
    MetricReport,
    ScoreSet,
    aggregate_seeds,
    evaluate_scores,
    infer_scores,
    save_plots,
    score_image,
    summary_table,
)
from .prompts import PromptSet
from .runconfig import ConfigError, RunConfig
from .stats import paired_ttest
from .tokenizer import BpeTokenizer
from .training import build_bundle, bundle_from_checkpoint, run_training

logger = logging.getLogger(__name__)


def _load_config(args) -> RunConfig:
    return RunConfig.load(args.config, tuple(args.set or ()))


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out_root = cfg.output_dir
    os.makedirs(out_root, exist_ok=True)
    cfg.snapshot(os.path.join(out_root, "config.yaml"))

    registry = cfg.load_registry()
    model_cfg = cfg.model_config()
    tokenizer = cfg.tokenizer()
    prompt_set = cfg.prompt_set()
    pretrained = cfg.data["model"]["pretrained"]

    for seed in cfg.seeds:
        seed_dir = os.path.join(out_root, f"seed_{seed}")
        split = cfg.build_split(registry, seed)
        bundle = build_bundle(
            model_cfg, tokenizer=tokenizer, pretrained_path=pretrained, seed=seed
        )
        plan = cfg.plan(seed)
        resume = None
        if args.resume:
            candidate = os.path.join(seed_dir, "checkpoint_final.pt")
            rolling = sorted(glob.glob(os.path.join(seed_dir, "checkpoint_0*.pt")))
            resume = candidate if os.path.exists(candidate) else (rolling[-1] if rolling else None)
        started = time.perf_counter()
        checkpoint = run_training(
            plan, split, bundle,
            prompt_set=prompt_set, out_dir=seed_dir,
            resume_from=resume, run_hash=cfg.hash(),
        )
        print(
            f"[train] seed {seed}: {checkpoint.iteration} iterations of {plan.strategy} "
            f"on '{split.name}' in {time.perf_counter() - started:.1f}s -> "
            f"{os.path.join(seed_dir, 'checkpoint_final.pt')}"
        )
    print(f"[train] config hash {cfg.hash()}; artifacts under {out_root}")
    return 0


def _find_checkpoints(args, cfg: RunConfig) -> list[str]:
    if args.checkpoint:
        return list(args.checkpoint)
    run_dir = args.run_dir or cfg.output_dir
    paths = sorted(glob.glob(os.path.join(run_dir, "seed_*", "checkpoint_final.pt")))
    if not paths:
        raise FileNotFoundError(
            f"no seed_*/checkpoint_final.pt under {run_dir!r}; train first or pass --checkpoint"
        )
    return paths


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    opts = cfg.eval_options()
    registry = cfg.load_registry()
    tokenizer = cfg.tokenizer()
    prompt_set = cfg.prompt_set()
    eval_root = os.path.join(args.run_dir or cfg.output_dir, "eval")
    os.makedirs(eval_root, exist_ok=True)

    reports = []
    for path in _find_checkpoints(args, cfg):
        checkpoint = load_checkpoint(path)
        if checkpoint.strategy != cfg.strategy:
            raise CheckpointError(
                f"checkpoint {path} was trained with strategy {checkpoint.strategy!r} "
                f"but the config says {cfg.strategy!r}"
            )
        seed = checkpoint.manifest["seed"]
        split = cfg.build_split(registry, seed)
        bundle = bundle_from_checkpoint(checkpoint, tokenizer=tokenizer)
        scores = infer_scores(
            bundle, checkpoint.strategy, split.target,
            prompt_set=prompt_set, batch_size=opts["batch_size"],
        )
        report = evaluate_scores(
            scores,
            protocol=split.protocol,
            split_name=split.name,
            seed=seed,
            strategy=checkpoint.strategy,
            threshold_policy=opts["threshold_policy"],
            fixed_threshold=opts["fixed_threshold"],
            fpr_target=opts["fpr_target"],
            config_hash=cfg.hash(),
        )
        seed_dir = os.path.join(eval_root, f"seed_{seed}")
        os.makedirs(seed_dir, exist_ok=True)
        scores.save(
            os.path.join(seed_dir, "scores.csv"),
            meta={"config_hash": cfg.hash(), "seed": seed, "version": __version__},
        )
        report.save(os.path.join(seed_dir, "metrics.json"))
        if args.plots:
            save_plots(scores, os.path.join(seed_dir, "scores"))
        reports.append(report)
        print(
            f"[eval] seed {seed} '{report.split_name}': HTER {100 * report.hter:.2f}% "
            f"AUC {100 * report.auc:.2f}% TPR@FPR={report.fpr_target:.0%} "
            f"{100 * report.tpr_at_fpr:.2f}%"
        )

    if len(reports) >= 2:
        aggregate = aggregate_seeds(reports)
        aggregate.save(
            os.path.join(eval_root, "aggregate.json"),
            meta={"config_hash": cfg.hash(), "version": __version__},
        )
        table = summary_table([aggregate])
        with open(os.path.join(eval_root, "summary.txt"), "w", encoding="utf-8") as fh:
            fh.write(f"# config_hash={cfg.hash()} version={__version__}\n")
            fh.write(table + "\n")
        print(table)

    baseline = args.baseline or opts.get("baseline")
    if baseline:
        result = _ttest_against_baseline(reports, baseline)
        with open(os.path.join(eval_root, "ttest.json"), "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2)
        print(
            f"[ttest] HTER one-sided paired t-test vs baseline: t={result['statistic']:.4f} "
            f"p={result['p_value']:.4g} reject(0.05)={result['reject']}"
        )
    return 0


def _ttest_against_baseline(reports: list[MetricReport], baseline_dir: str) -> dict:
    """Pair per-seed HTERs with a baseline eval directory by seed."""
    if not os.path.isdir(baseline_dir):
        raise FileNotFoundError(
            f"baseline directory {baseline_dir!r} does not exist; it must hold "
            "seed_*/metrics.json from a previous eval"
        )
    baseline_paths = sorted(glob.glob(os.path.join(baseline_dir, "seed_*", "metrics.json")))
    if not baseline_paths:
        raise FileNotFoundError(f"no seed_*/metrics.json under {baseline_dir!r}")
    baseline_by_seed = {}
    for path in baseline_paths:
        report = MetricReport.load(path)
        baseline_by_seed[report.seed] = report.hter
    ours, theirs, seeds = [], [], []
    for report in sorted(reports, key=lambda r: r.seed):
        if report.seed not in baseline_by_seed:
            raise ValueError(f"baseline has no metrics for seed {report.seed}")
        ours.append(report.hter)
        theirs.append(baseline_by_seed[report.seed])
        seeds.append(report.seed)
    result = paired_ttest(ours, theirs, alternative="less")
    return {
        "metric": "hter",
        "alternative": "method HTER < baseline HTER",
        "seeds": seeds,
        "ours": ours,
        "baseline": theirs,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "reject": result.reject,
        "alpha": result.alpha,
        "df": result.df,
    }


def cmd_infer(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    tokenizer = BpeTokenizer(
        args.bpe_merges, context_length=checkpoint.model_config.context_length
    )
    bundle = bundle_from_checkpoint(checkpoint, tokenizer=tokenizer)
    prompt_set = PromptSet.from_file(args.prompts) if args.prompts else PromptSet.default()
    img01 = load_image01(args.image, size=checkpoint.model_config.image_size)
    p_real = score_image(bundle, checkpoint.strategy, img01, prompt_set=prompt_set)
    print(f"{p_real:.6f}")
    return 0


def cmd_protocols(args) -> int:
    rows = enumerate_protocols()
    if args.action == "list":
        if args.protocol:
            rows = [r for r in rows if r["protocol"] == _norm_protocol(args.protocol)]
            if not rows:
                raise ConfigError(f"unknown protocol {args.protocol!r}")
        print(f"{'protocol':<14} {'scenario':<16} {'sources':<22} target")
        print("-" * 70)
        for row in rows:
            sources = ", ".join(row["sources"])
            print(f"{row['protocol']:<14} {row['name']:<16} {sources:<22} {row['target']}")
        print(f"{len(rows)} scenario(s)")
        return 0
    # describe
    if not args.protocol:
        raise ConfigError("describe needs --protocol")
    protocol = _norm_protocol(args.protocol)
    rows = [r for r in rows if r["protocol"] == protocol]
    if not rows:
        raise ConfigError(f"unknown protocol {args.protocol!r}")
    if args.target:
        rows = [r for r in rows if r["target"] == args.target or r["name"] == args.target]
        if not rows:
            raise ConfigError(f"no scenario of protocol {protocol} matches target {args.target!r}")
    for row in rows:
        print(f"scenario   {row['name']}")
        print(f"  protocol {row['protocol']}")
        print(f"  sources  {', '.join(row['sources'])}")
        print(f"  target   {row['target']}")
        if "test_attack" in row:
            print(f"  train attack types: {', '.join(row['train_attacks'])}")
            print(f"  test attack type:   {row['test_attack']}")
    return 0


def _norm_protocol(p: str) -> str:
    return str(p).strip().lower().replace("-", "_")


def cmd_report(args) -> int:
    eval_root = os.path.join(args.run_dir, "eval")
    paths = sorted(glob.glob(os.path.join(eval_root, "seed_*", "metrics.json")))
    if not paths:
        raise FileNotFoundError(f"no seed_*/metrics.json under {eval_root!r}; run eval first")
    reports = [MetricReport.load(p) for p in paths]
    for report in reports:
        print(
            f"[report] seed {report.seed}: HTER {100 * report.hter:.2f}% "
            f"AUC {100 * report.auc:.2f}% TPR {100 * report.tpr_at_fpr:.2f}%"
        )
    if len(reports) >= 2:
        aggregate = aggregate_seeds(reports)
        print(summary_table([aggregate]))
        aggregate.save(
            os.path.join(eval_root, "aggregate.json"),
            meta={"config_hash": reports[0].config_hash, "version": __version__},
        )
    if args.baseline:
        result = _ttest_against_baseline(reports, args.baseline)
        print(
            f"[ttest] t={result['statistic']:.4f} p={result['p_value']:.4g} "
            f"reject(0.05)={result['reject']}"
        )
    if args.plots:
        for path in paths:
            seed_dir = os.path.dirname(path)
            scores_path = os.path.join(seed_dir, "scores.csv")
            if os.path.exists(scores_path):
                save_plots(ScoreSet.load(scores_path), os.path.join(seed_dir, "scores"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlfas",
        description="Cross-domain face anti-spoofing with a language-image dual encoder.",
    )
    parser.add_argument("--version", action="version", version=f"vlfas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the configured training per seed")
    p_train.add_argument("--config", required=True, help="YAML run config")
    p_train.add_argument("--set", action="append", metavar="FIELD=VALUE",
                         help="override a scalar config field (repeatable)")
    p_train.add_argument("--resume", action="store_true",
                         help="resume each seed from its latest checkpoint if present")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score checkpoints on the held-out target")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--set", action="append", metavar="FIELD=VALUE")
    p_eval.add_argument("--run-dir", help="directory with seed_*/ checkpoints "
                                          "(default: the config's output_dir)")
    p_eval.add_argument("--checkpoint", action="append",
                        help="explicit checkpoint file (repeatable)")
    p_eval.add_argument("--baseline", help="baseline eval directory for the paired t-test")
    p_eval.add_argument("--plots", action="store_true", help="write ROC/histogram PNGs")
    p_eval.set_defaults(func=cmd_eval)

    p_infer = sub.add_parser("infer", help="score one image: prints p_real")
    p_infer.add_argument("--checkpoint", required=True)
    p_infer.add_argument("--image", required=True)
    p_infer.add_argument("--prompts", help="prompt catalog YAML (default: built-in)")
    p_infer.add_argument("--bpe-merges", help="published BPE merges file")
    p_infer.set_defaults(func=cmd_infer)

    p_protocols = sub.add_parser("protocols", help="enumerate or describe protocol splits")
    p_protocols.add_argument("action", choices=["list", "describe"])
    p_protocols.add_argument("--protocol", help="1, 2, 3, or unseen-spoof")
    p_protocols.add_argument("--target", help="filter describe output by target domain")
    p_protocols.set_defaults(func=cmd_protocols)

    p_report = sub.add_parser("report", help="aggregate existing eval artifacts")
    p_report.add_argument("--run-dir", required=True)
    p_report.add_argument("--baseline", help="baseline eval directory for the paired t-test")
    p_report.add_argument("--plots", action="store_true")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
