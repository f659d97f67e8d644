"""Command-line entry point: train, predict, eval, convert, gen, bench.

Every command exits 0 on success and nonzero with a one-line diagnostic on
stderr otherwise.  Output paths given as relative resolve under
$PROSOTREE_OUT_DIR when that variable is set.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import configio, corpus, metrics, plots, trainer
from .core import (
    CharSequence,
    format_line,
    parse_line,
    sequence_to_tree,
    text_to_tree,
    tree_to_sequence,
    tree_to_text,
    validate_tree,
)
from .core import LabelVocabulary
from .decoder import decode
from .model import ModelConfig, ModelParams
from .scorer import random_chart

__all__ = ["main", "build_parser"]


def _out_path(path: str) -> Path:
    base = os.environ.get("PROSOTREE_OUT_DIR")
    p = Path(path)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _cmd_train(args) -> int:
    settings = configio.load_config(args.config)
    train_cfg = configio.dataclass_from_mapping(trainer.TrainConfig, settings)
    model_cfg = configio.dataclass_from_mapping(ModelConfig, settings)
    unknown = set(settings) - configio.known_keys(trainer.TrainConfig) - configio.known_keys(ModelConfig)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if args.seed is not None:
        train_cfg.seed = args.seed

    train_items, train_report = corpus.load_corpus(args.train)
    dev_items, dev_report = corpus.load_corpus(args.dev)
    for name, report in (("train", train_report), ("dev", dev_report)):
        if report.errors:
            print(f"{name}: {report.summary()}", file=sys.stderr)
    if not train_items:
        raise ValueError("no usable training sentences")

    result = trainer.train(train_items, dev_items, train_cfg, model_cfg)
    out_dir = _out_path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result.model.save(out_dir / "checkpoint.bin")
    trainer.write_training_log(result.log, out_dir / "training_log.txt")
    plots.save_training_curves(result.log, out_dir / "training_curves.png")
    final = result.log[result.best_epoch - 1] if result.log else None
    if final is not None:
        print(f"best epoch {result.best_epoch}: dev PW/PPH/IPH F1 = "
              f"{final.pw_f1:.4f}/{final.pph_f1:.4f}/{final.iph_f1:.4f}")
    print(f"checkpoint written to {out_dir / 'checkpoint.bin'}")
    return 0


def _cmd_predict(args) -> int:
    model = ModelParams.load(args.model)
    unknown_total = 0
    rejected = 0
    with open(args.input, "r", encoding="utf-8") as src, \
            open(_out_path(args.output), "w", encoding="utf-8") as dst:
        for lineno, raw in enumerate(src, start=1):
            text = "".join(ch for ch in raw if not ch.isspace())
            if not text:
                rejected += 1
                print(f"line {lineno}: empty sentence, skipped", file=sys.stderr)
                continue
            if "#" in text:
                rejected += 1
                print(f"line {lineno}: '#' collides with boundary tokens, skipped", file=sys.stderr)
                continue
            chars = CharSequence.from_text(text)
            if len(chars) + 2 > model.encoder_config.max_len:
                rejected += 1
                print(f"line {lineno}: longer than max_len {model.encoder_config.max_len}, skipped",
                      file=sys.stderr)
                continue
            unknown_total += model.char_vocab.count_unknown(chars)
            dst.write(format_line(model.predict_sequence(chars)) + "\n")
    if unknown_total:
        print(f"{unknown_total} unknown characters mapped to UNK", file=sys.stderr)
    if rejected:
        print(f"{rejected} lines rejected", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    pred_items, pred_report = corpus.load_corpus(args.pred)
    gold_items, gold_report = corpus.load_corpus(args.gold)
    if pred_report.errors or gold_report.errors:
        print(pred_report.summary(), file=sys.stderr)
        print(gold_report.summary(), file=sys.stderr)
        raise ValueError("eval inputs contain malformed lines")
    preds = [tree_to_sequence(tree, chars) for chars, tree in pred_items]
    golds = [tree_to_sequence(tree, chars) for chars, tree in gold_items]
    report = metrics.evaluate(preds, golds, exact_marks=args.exact_marks)
    print(metrics.render_report(report))
    if args.report_dir:
        out = _out_path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval_report.txt").write_text(metrics.render_report(report) + "\n", encoding="utf-8")
        (out / "eval_report.tsv").write_text(
            "\n".join(line.replace(" = ", "\t") for line in metrics.report_lines(report)) + "\n",
            encoding="utf-8")
        plots.save_eval_bars(report, out / "eval_scores.png")
        print(f"report written to {out}")
    return 0


def _cmd_convert(args) -> int:
    with open(args.input, "r", encoding="utf-8") as src, \
            open(_out_path(args.output), "w", encoding="utf-8") as dst:
        for lineno, raw in enumerate(src, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            try:
                if args.mode == "seq-to-tree":
                    seq = parse_line(line)
                    dst.write(tree_to_text(sequence_to_tree(seq), seq.chars) + "\n")
                else:
                    chars, tree = text_to_tree(line)
                    dst.write(format_line(tree_to_sequence(tree, chars)) + "\n")
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
    return 0


def _cmd_gen(args) -> int:
    settings = configio.load_config(args.config)
    unknown = set(settings) - configio.known_keys(corpus.SynthConfig)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = configio.dataclass_from_mapping(corpus.SynthConfig, settings)
    if args.seed is not None:
        cfg.seed = args.seed
    sentences = corpus.generate(cfg)
    out = _out_path(args.output)
    corpus.write_corpus(sentences, out)
    corpus.write_corpus(sentences, Path(str(out) + ".gold"))
    stats = corpus.corpus_stats(sentences)
    print(", ".join(f"{key}={value:.1f}" if isinstance(value, float) else f"{key}={value}"
                    for key, value in stats.items()))
    print(f"corpus written to {out} (gold sidecar alongside)")
    return 0


def _cmd_bench(args) -> int:
    lengths = sorted({int(part) for part in args.lengths.split(",") if part.strip()})
    if not lengths or min(lengths) < 2:
        raise ValueError("lengths must be integers >= 2")
    if args.trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    vocab = LabelVocabulary.default()
    model = ModelParams.load(args.model) if args.model else None
    medians: list[float] = []
    print(f"{'n':>6}  {'trials':>6}  {'median_ms':>10}  {'mean_ms':>10}")
    for n in lengths:
        times = []
        for _ in range(args.trials):
            if model is not None:
                ids = rng.integers(len(model.char_vocab.chars), size=n)
                chars = CharSequence([model.char_vocab.chars[int(k)] for k in ids])
                chart = model.score_chart(chars)
            else:
                chart = random_chart(n, vocab, rng)
            t0 = time.perf_counter()
            decode(chart)
            times.append(time.perf_counter() - t0)
        med = statistics.median(times)
        medians.append(med)
        print(f"{n:>6}  {args.trials:>6}  {med * 1e3:>10.3f}  {np.mean(times) * 1e3:>10.3f}")
    if 40 in lengths and 80 in lengths:
        ratio = medians[lengths.index(80)] / medians[lengths.index(40)]
        print(f"ratio median(80)/median(40) = {ratio:.2f} (cubic growth predicts 8)")
    if args.out:
        out = _out_path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        rows = ["n\tmedian_seconds"]
        rows.extend(f"{n}\t{m:.9f}" for n, m in zip(lengths, medians))
        (out / "bench.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        plots.save_bench_plot(lengths, medians, out / "bench_times.png")
        print(f"bench table and figure written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prosotree",
        description="Span-based prosodic structure prediction",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help="override the seed wherever a command uses randomness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from line-format corpora")
    p.add_argument("--config", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("predict", help="annotate raw sentences with boundary marks")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold boundaries")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--exact-marks", action="store_true", dest="exact_marks",
                   help="count each gap only for its literal mark instead of cumulatively")
    p.add_argument("--report-dir", dest="report_dir", default=None,
                   help="also write the report, a tsv and a figure here")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("convert", help="convert between boundary lines and tree text")
    p.add_argument("--mode", required=True, choices=("tree-to-seq", "seq-to-tree"))
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(fn=_cmd_convert)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("bench", help="time the decoder at several lengths")
    p.add_argument("--lengths", required=True, help="comma-separated lengths, e.g. 40,80")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--model", default=None, help="time charts from this checkpoint instead of random ones")
    p.add_argument("--out", default=None, help="write bench.tsv and a timing figure here")
    p.set_defaults(fn=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
