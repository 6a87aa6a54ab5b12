"""Command-line surface: embedding extraction, trial scoring, metric
evaluation, complexity reports, and the toy trainer.

Exit codes: 0 success, 1 domain error (one-line message on stderr),
2 usage error.  All outputs use fixed 6-decimal formatting so CI diffs
are stable.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .features import compute_fbank, read_wav
from .model import SpeakerEmbedder
from .scoring import (cosine_score, evaluate_scores, format_score_line,
                      parse_score_dump, parse_trials)
from .training import TrainConfig, make_synthetic_dataset, train
from .weights import load_model, save_model
from . import complexity


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mgff-tdnn",
        description="Multi-granularity feature-fusion TDNN speaker embeddings.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("embed", help="extract one 192-dim embedding from a wav")
    p.add_argument("wav", help="16 kHz 16-bit mono wav file")
    p.add_argument("--model", required=True, help="weight file")
    p.add_argument("--out", required=True,
                   help="output path for the raw float32 little-endian vector")

    p = sub.add_parser("score-trials", help="score a trial list with a model")
    p.add_argument("trials", help="trial file: '<0|1> <enroll> <test>' per line")
    p.add_argument("--model", required=True, help="weight file")
    p.add_argument("--out", required=True, help="score dump output path")

    p = sub.add_parser("eval", help="compute EER/minDCF from a score dump")
    p.add_argument("scores", help="score dump produced by score-trials")

    p = sub.add_parser("count-params", help="analytic parameter count")
    p.add_argument("--ablation", choices=["dsm", "plp", "tdnn"],
                   help="drop one component before counting")
    p.add_argument("--json", dest="json_out",
                   help="also write the per-layer report as JSON")

    p = sub.add_parser("count-flops", help="analytic MAC/FLOP count")
    p.add_argument("--frames", type=int, required=True,
                   help="utterance length in feature frames")
    p.add_argument("--ablation", choices=["dsm", "plp", "tdnn"])
    p.add_argument("--json", dest="json_out",
                   help="also write the per-layer report as JSON")

    p = sub.add_parser("train-toy", help="train on a synthetic dataset")
    p.add_argument("--speakers", type=int, default=10)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--log", help="optional 'step lr loss' log path")

    return parser


def _config_for(ablation: str | None) -> ModelConfig:
    if ablation == "dsm":
        return ModelConfig.without_dsm()
    if ablation == "plp":
        return ModelConfig.without_plp()
    if ablation == "tdnn":
        return ModelConfig.without_tdnn()
    return ModelConfig.full()


def _cmd_embed(args) -> int:
    model, _ = load_model(args.model)
    embedding = model.embed(compute_fbank(read_wav(args.wav)))
    Path(args.out).write_bytes(np.asarray(embedding, dtype="<f4").tobytes())
    print(f"wrote {embedding.size}-dim embedding to {args.out}")
    return 0


def _cmd_score_trials(args) -> int:
    trials = parse_trials(Path(args.trials).read_text())
    model, _ = load_model(args.model)
    cache: dict[str, np.ndarray] = {}

    def embedding_of(path: str) -> np.ndarray:
        if path not in cache:
            cache[path] = model.embed(compute_fbank(read_wav(path)))
        return cache[path]

    lines = []
    for trial in trials:
        score = cosine_score(embedding_of(trial.enroll_id),
                             embedding_of(trial.test_id))
        lines.append(format_score_line(trial, score))
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"scored {len(trials)} trials to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    targets, nontargets = parse_score_dump(Path(args.scores).read_text())
    report = evaluate_scores(targets, nontargets)
    print(f"EER {100.0 * report.eer:.3f}%")
    print(f"minDCF(p=0.01) {report.min_dcf:.6f}")
    print(f"threshold {report.threshold_at_eer:.6f}")
    print(f"trials {report.num_target} target / {report.num_nontarget} nontarget")
    return 0


def _cmd_count_params(args) -> int:
    report = complexity.count_params(_config_for(args.ablation))
    print(report.format_table())
    print(f"total params {report.total_params / 1e6:.6f} M")
    if args.json_out:
        Path(args.json_out).write_text(report.to_json())
    return 0


def _cmd_count_flops(args) -> int:
    report = complexity.count_flops(_config_for(args.ablation), args.frames)
    print(report.format_table())
    print(f"total macs {report.total_macs / 1e9:.6f} G")
    print(f"total flops {report.total_flops / 1e9:.6f} G")
    if args.json_out:
        Path(args.json_out).write_text(report.to_json())
    return 0


def _cmd_train_toy(args) -> int:
    cfg = TrainConfig(total_steps=args.steps, seed=args.seed)
    dataset = make_synthetic_dataset(args.speakers, 12, seed=args.seed)
    model = SpeakerEmbedder(ModelConfig.desk_scale(),
                            rng=np.random.default_rng(args.seed))
    log_fh = open(args.log, "w") if args.log else None
    try:
        records = train(model, dataset, cfg, log_file=log_fh)
    finally:
        if log_fh:
            log_fh.close()
    save_model(args.out, model)
    print(f"final loss {records[-1].loss:.6f} after {len(records)} steps")
    print(f"checkpoint written to {args.out}")
    return 0


_COMMANDS = {
    "embed": _cmd_embed,
    "score-trials": _cmd_score_trials,
    "eval": _cmd_eval,
    "count-params": _cmd_count_params,
    "count-flops": _cmd_count_flops,
    "train-toy": _cmd_train_toy,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
