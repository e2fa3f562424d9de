"""Command-line surface: convert, sample, train, decode, eval, experiment, report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import (
    SamplingPolicy,
    SourceCorpus,
    TrainingSetting,
    load_corpus,
    save_corpus,
    selective_sample,
)
from .embeddings import load_embedding_dir, pseudo_embed
from .errors import ArgLinkerError, ConfigError
from .experiment import (
    ExperimentConfig,
    run_experiment,
    write_report_tables,
)
from .linker.train import load_checkpoint, predict_trees
from .metrics import evaluate
from .tree import ArgTree


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arglinker",
        description="Tree-structured argumentative link prediction toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    convert = sub.add_parser(
        "convert", help="segment-level JSONL to sentence-level essay JSONL")
    convert.add_argument("--in", dest="input", required=True)
    convert.add_argument("--out", required=True)
    convert.add_argument("--corpus", choices=["in", "out"], default="out",
                         help="corpus tag written to the converted essays")

    sample = sub.add_parser(
        "sample", help="filter essays by length and non-AC thresholds")
    sample.add_argument("--in", dest="input", required=True)
    sample.add_argument("--out", required=True)
    sample.add_argument("--format", choices=["essay", "segment"], default="essay")
    sample.add_argument("--policy.max-sentences", dest="max_sentences",
                        type=int, default=17)
    sample.add_argument("--policy.max-non-acs", dest="max_non_acs",
                        type=int, default=2)

    train_cmd = sub.add_parser("train", help="single training run from a config file")
    train_cmd.add_argument("--config", required=True, help="experiment config JSON")
    train_cmd.add_argument("--seed", type=int, default=None)
    train_cmd.add_argument("--out", default=None, help="override output directory")

    decode_cmd = sub.add_parser(
        "decode", help="decode trees for a corpus with a trained checkpoint")
    decode_cmd.add_argument("--checkpoint", required=True)
    decode_cmd.add_argument("--corpus", required=True)
    decode_cmd.add_argument("--format", choices=["essay", "segment"], default="essay")
    decode_cmd.add_argument("--out", required=True, help="predictions JSONL")
    decode_cmd.add_argument("--embeddings", default=None,
                            help="directory of embedding files")
    decode_cmd.add_argument("--pseudo-dim", type=int, default=None)
    decode_cmd.add_argument("--pseudo-seed", type=int, default=0)

    eval_cmd = sub.add_parser("eval", help="score predictions against gold")
    eval_cmd.add_argument("--pred", required=True)
    eval_cmd.add_argument("--gold", required=True)
    eval_cmd.add_argument("--out", required=True,
                          help="output directory for report.json and CSV tables")

    experiment = sub.add_parser(
        "experiment", help="repeated train/decode/eval runs plus summary")
    experiment.add_argument("--config", required=True)
    experiment.add_argument("--setting", choices=["I", "P+I", "SS"], default=None)
    experiment.add_argument("--runs", type=int, default=None)
    experiment.add_argument("--seed", type=int, default=None,
                            help="base seed; run k uses seed + k")
    experiment.add_argument("--out", default=None)
    experiment.add_argument("--baseline-dir", default=None)

    report = sub.add_parser(
        "report", help="aggregate experiment directories into result tables",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "emitted tables (one row per experiment directory):\n"
            "  links.csv       model, accuracy, f1_macro, mar_dset, and\n"
            "                  p_accuracy/p_f1_macro/p_mar_dset permutation-test\n"
            "                  p-values when --baseline-dir is given\n"
            "  qact.csv        model, major_claim, ac_non_leaf, ac_leaf, non_ac,\n"
            "                  qact_macro (per-role F1 means over runs)\n"
            "  shape.csv       model, avg_depth, leaf_ratio\n"
            "  distance_f1.csv model, one column per distance bucket (mean F1)\n"
            "  depth_f1.csv    model, one column per depth category (mean F1)\n"
            "missing metrics leave blank cells rather than fabricated zeros."
        ))
    report.add_argument("dirs", nargs="+")
    report.add_argument("--out", required=True)
    report.add_argument("--baseline-dir", default=None)
    return parser


def _load_experiment_config(path: str, args: argparse.Namespace) -> ExperimentConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if getattr(args, "setting", None):
        data["setting"] = args.setting
    if getattr(args, "out", None):
        data["out_dir"] = args.out
    runs = getattr(args, "runs", None)
    seed = getattr(args, "seed", None)
    if runs is not None:
        data["runs"] = runs
        data.pop("seeds", None)
    if seed is not None:
        base_runs = data.get("runs", 20)
        data["seeds"] = [seed + k for k in range(base_runs)]
    return ExperimentConfig.from_dict(data)


def _cmd_convert(args: argparse.Namespace) -> None:
    corpus = SourceCorpus(args.corpus)
    essays = load_corpus(args.input, format="segment", default_corpus=corpus)
    save_corpus(essays, args.out)
    print(f"converted {len(essays)} essays -> {args.out}")


def _cmd_sample(args: argparse.Namespace) -> None:
    policy = SamplingPolicy(max_sentences=args.max_sentences,
                            max_non_acs=args.max_non_acs)
    essays = load_corpus(args.input, format=args.format)
    kept = selective_sample(essays, policy)
    save_corpus(kept, args.out)
    print(f"kept {len(kept)} of {len(essays)} essays -> {args.out}")


def _cmd_train(args: argparse.Namespace) -> None:
    data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    data["runs"] = 1
    data.pop("seeds", None)
    if args.seed is not None:
        data["seeds"] = [args.seed]
    if args.out:
        data["out_dir"] = args.out
    config = ExperimentConfig.from_dict(data)
    exp_dir = run_experiment(config)
    print(f"run complete -> {exp_dir}")


def _cmd_decode(args: argparse.Namespace) -> None:
    params, model_config = load_checkpoint(args.checkpoint)
    essays = load_corpus(args.corpus, format=args.format)
    if args.embeddings:
        embeddings = load_embedding_dir(args.embeddings)
    else:
        dim = args.pseudo_dim if args.pseudo_dim is not None else model_config.input_dim
        embeddings = {e.essay_id: pseudo_embed(e, dim=dim, seed=args.pseudo_seed)
                      for e in essays}
    trees = predict_trees(params, model_config, essays, embeddings)
    predicted = [
        type(essay)(essay_id=essay.essay_id, sentences=essay.sentences,
                    gold=ArgTree.from_heads(tree.head),
                    source_corpus=essay.source_corpus)
        for essay, tree in zip(essays, trees)
    ]
    save_corpus(predicted, args.out)
    print(f"decoded {len(trees)} essays -> {args.out}")


def _cmd_eval(args: argparse.Namespace) -> None:
    pred = load_corpus(args.pred)
    gold = load_corpus(args.gold)
    pred_by_id = {e.essay_id: e for e in pred}
    missing = [e.essay_id for e in gold if e.essay_id not in pred_by_id]
    if missing:
        raise ConfigError(f"predictions missing for essays: {missing[:5]}")
    aligned = [pred_by_id[e.essay_id] for e in gold]
    report = evaluate([e.gold for e in aligned], [e.gold for e in gold])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    dist_lines = ["bucket,f1"] + [
        f"{name},{value:.6f}" for name, value in report.per_distance_f1.items()]
    (out / "distance_f1.csv").write_text("\n".join(dist_lines) + "\n", encoding="utf-8")
    depth_lines = ["depth,f1"] + [
        f"{cat.value},{value:.6f}" for cat, value in report.per_depth_f1.items()]
    (out / "depth_f1.csv").write_text("\n".join(depth_lines) + "\n", encoding="utf-8")
    print(f"accuracy={report.accuracy:.4f} f1_macro={report.f1_macro:.4f} "
          f"mar_dset={report.mar_dset:.4f} -> {out}")


def _cmd_experiment(args: argparse.Namespace) -> None:
    config = _load_experiment_config(args.config, args)
    exp_dir = run_experiment(config, baseline_dir=args.baseline_dir)
    print(f"experiment complete -> {exp_dir}")


def _cmd_report(args: argparse.Namespace) -> None:
    out = write_report_tables(args.dirs, args.out, baseline_dir=args.baseline_dir)
    print(f"tables written -> {out}")


_HANDLERS = {
    "convert": _cmd_convert,
    "sample": _cmd_sample,
    "train": _cmd_train,
    "decode": _cmd_decode,
    "eval": _cmd_eval,
    "experiment": _cmd_experiment,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _HANDLERS[args.command](args)
    except (ArgLinkerError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
