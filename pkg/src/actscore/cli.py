"""Command-line entry point: ``actscore <command> [options]``.

Commands: synth, featurize, train, score, evaluate, gradcheck.
Exit codes: 0 success, 1 failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

log = logging.getLogger("actscore")


class UsageError(Exception):
    """Bad arguments or configuration (exit code 2)."""


class CommandError(Exception):
    """A command could not complete (exit code 1)."""


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    seed: int = 0
    # paths
    dataset: str | None = None
    checkpoint: str | None = None
    match_file: str | None = None
    in_dir: str | None = None
    # training
    variant: int = 1
    epochs: int = 10
    lr: float = 1e-4
    train_fraction: float = 0.76
    val_fraction: float = 0.04
    test_fraction: float = 0.20
    # generator
    n_matches: int = 2000
    events_min: int = 40
    events_max: int = 120
    flip_probability: float = 0.05
    skill_spread: float = 1.0
    quality_noise: float = 0.0
    # featurizer and evaluation
    constants_version: str = "synthetic"
    threshold: int = 5


_PATH_KEYS = ("dataset", "checkpoint", "match_file", "in_dir")


def _coerce(name: str, raw: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise UsageError(f"config key {name!r}: cannot parse {raw!r}") from None
    return raw


def read_config(path: str | Path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment.

    Unknown keys are rejected. Relative paths resolve against the file's directory.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        value = _coerce(key, raw)
        if key in _PATH_KEYS:
            value = str((path.parent / value).resolve())
        values[key] = value
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = replace(cfg, **read_config(args.config))
    overrides = {}
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = str(Path(value).resolve()) if f.name in _PATH_KEYS else value
    return replace(cfg, **overrides)


def split_indices(n: int, seed: int, fractions=(0.76, 0.04, 0.20)) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded shuffle into train/validation/test index arrays.

    Validation and test sizes are rounded; training gets the remainder.
    """
    train_f, val_f, test_f = fractions
    if min(fractions) < 0 or abs(train_f + val_f + test_f - 1.0) > 1e-9:
        raise UsageError("split fractions must be non-negative and sum to 1")
    n_test = int(round(n * test_f))
    n_val = int(round(n * val_f))
    n_train = n - n_test - n_val
    if n_train < 1 or n_val < 1:
        raise CommandError(f"dataset too small to split: {n} matches")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train : n_train + n_val]), np.sort(perm[n_train + n_val :])


# --------------------------------------------------------------------------
# commands


def _write_lines(path: Path, lines) -> None:
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line + "\n")


def cmd_synth(cfg: RunConfig, out: Path) -> int:
    from .featurizer import sample_to_json
    from .match_data import serialize_match
    from .synth import GenConfig, generate_matches

    try:
        gen = GenConfig(
            seed=cfg.seed,
            n_matches=cfg.n_matches,
            events_per_player=(cfg.events_min, cfg.events_max),
            label_flip_probability=cfg.flip_probability,
            skill_spread=cfg.skill_spread,
            quality_noise=cfg.quality_noise,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    match_dir = out / "matches"
    match_dir.mkdir(parents=True, exist_ok=True)
    n_actions = n_flipped = 0
    with open(out / "featurized.jsonl", "w") as feat, open(out / "latent.csv", "w", newline="") as side:
        writer = csv.writer(side, lineterminator="\n")
        writer.writerow(("match_id", "participant_id", "action_index", "value"))
        for gm in generate_matches(gen):
            (match_dir / f"{gm.meta.match_id}.json").write_bytes(serialize_match(gm.meta, gm.events, gm.frames))
            feat.write(sample_to_json(gm.sample) + "\n")
            for p, values in enumerate(gm.latent, 1):
                for i, v in enumerate(values):
                    writer.writerow((gm.meta.match_id, p, i, repr(float(v))))
            n_actions += gm.sample.n_actions
            n_flipped += gm.flipped
    print(f"wrote {gen.n_matches} matches, {n_actions} actions ({n_flipped} labels flipped) to {out}")
    return 0


def cmd_featurize(cfg: RunConfig, out: Path, strict: bool, output: str | None) -> int:
    from .featurizer import MatchConstants, build_match_sample, sample_to_json
    from .match_data import ChampionRoleTable, parse_match

    if cfg.in_dir is None:
        raise UsageError("featurize needs an input directory")
    in_dir = Path(cfg.in_dir)
    if not in_dir.is_dir():
        raise CommandError(f"input directory not found: {in_dir}")
    table = ChampionRoleTable.from_csv()
    consts = MatchConstants.for_version(cfg.constants_version)
    files = sorted(in_dir.glob("*.json"))
    if not files:
        print(f"warning: no match files in {in_dir}", file=sys.stderr)
    out.mkdir(parents=True, exist_ok=True)
    target = out / (output or "featurized.jsonl")
    written, skipped = 0, []
    lines = []
    for path in files:
        try:
            meta, events, frames = parse_match(path.read_bytes(), table)
            sample = build_match_sample(meta, events, frames, table, consts)
        except (ValueError, KeyError) as exc:
            if strict:
                raise CommandError(f"{path.name}: {exc}") from None
            skipped.append((path.name, str(exc)))
            continue
        lines.append(sample_to_json(sample))
        written += 1
    _write_lines(target, lines)
    for name, msg in skipped:
        print(f"skipped {name}: {msg}", file=sys.stderr)
    print(f"featurized {written} matches, skipped {len(skipped)}, wrote {target}")
    return 0


def _load_dataset(cfg: RunConfig):
    from .featurizer import read_samples

    if cfg.dataset is None:
        raise UsageError("a featurized dataset path is required")
    if not Path(cfg.dataset).is_file():
        raise CommandError(f"dataset not found: {cfg.dataset}")
    try:
        return read_samples(cfg.dataset)
    except (ValueError, KeyError) as exc:
        raise CommandError(f"{cfg.dataset}: {exc}") from None


def _fractions(cfg: RunConfig):
    return cfg.train_fraction, cfg.val_fraction, cfg.test_fraction


def cmd_train(cfg: RunConfig, out: Path) -> int:
    from .scoring_model import VARIANTS, Ensemble, save_checkpoint, train

    if cfg.variant not in VARIANTS:
        raise UsageError(f"unknown variant {cfg.variant}; choose 1-7")
    if cfg.epochs < 0 or cfg.lr <= 0:
        raise UsageError("epochs must be >= 0 and lr > 0")
    samples = _load_dataset(cfg)
    tr, va, _ = split_indices(len(samples), cfg.seed, _fractions(cfg))
    ens = Ensemble.initialize(cfg.variant, cfg.seed, lr=cfg.lr, epochs=cfg.epochs)
    if cfg.epochs == 0:
        best, history = ens, []
    else:
        best, history = train(ens, [samples[i] for i in tr], [samples[i] for i in va], seed=cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(best, out / "checkpoint.bin")
    with open(out / "history.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epoch", "train_loss", "val_accuracy"))
        for h in history:
            w.writerow((h["epoch"], repr(h["train_loss"]), repr(h["val_accuracy"])))
    print(f"trained variant {cfg.variant} on {len(tr)} matches ({len(va)} validation); wrote {out / 'checkpoint.bin'}")
    return 0


def _load_checkpoint(path: str | None):
    from .scoring_model import CheckpointError, load_checkpoint

    if path is None:
        raise UsageError("a checkpoint path is required")
    if not Path(path).is_file():
        raise CommandError(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path)
    except CheckpointError as exc:
        raise CommandError(f"{path}: {exc}") from None


def cmd_score(cfg: RunConfig, as_csv: bool, outcome: str | None) -> int:
    from .featurizer import MatchConstants, build_match_sample
    from .match_data import ChampionRoleTable, parse_match
    from .scoring_model import score_match

    ens = _load_checkpoint(cfg.checkpoint)
    if ens.variant.needs_outcome and outcome is None:
        raise CommandError(
            f"variant {ens.variant.variant_id} encodes the match outcome in its initial state; "
            "pass --outcome blue|red"
        )
    if cfg.match_file is None:
        raise UsageError("a match file is required")
    if not Path(cfg.match_file).is_file():
        raise CommandError(f"match file not found: {cfg.match_file}")
    table = ChampionRoleTable.from_csv()
    try:
        meta, events, frames = parse_match(Path(cfg.match_file).read_bytes(), table)
        sample = build_match_sample(meta, events, frames, table, MatchConstants.for_version(cfg.constants_version))
    except (ValueError, KeyError) as exc:
        raise CommandError(f"{cfg.match_file}: {exc}") from None
    rep = score_match(ens, sample, outcome if ens.variant.needs_outcome else None)

    rows = []
    for p in range(10):
        for (ts, kind), s in zip(sample.actions[p], rep.scores[p]):
            rows.append((ts, p + 1, kind, float(s)))
    rows.sort(key=lambda r: (r[0], r[1]))
    if as_csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("row", "participant_id", "timestamp_ms", "kind", "score"))
        for ts, pid, kind, s in rows:
            w.writerow(("action", pid, ts, kind, repr(s)))
        for p in range(10):
            w.writerow(("player_total", p + 1, "", "", repr(float(rep.totals[p]))))
        w.writerow(("team_total", "blue", "", "", repr(rep.s_blue)))
        w.writerow(("team_total", "red", "", "", repr(rep.s_red)))
    else:
        print(f"{'participant':>11}  {'timestamp_ms':>12}  {'kind':<26}  score")
        for ts, pid, kind, s in rows:
            print(f"{pid:>11}  {ts:>12}  {kind:<26}  {s:+.6f}")
        for p in range(10):
            print(f"player {p + 1:>2} total {rep.totals[p]:+.6f}")
        print(f"blue total {rep.s_blue:+.6f}")
        print(f"red total  {rep.s_red:+.6f}")
    return 0


def cmd_evaluate(cfg: RunConfig, out: Path, checkpoints: list[str], split: str) -> int:
    from .evaluation import emit_report, evaluate

    paths = checkpoints or ([cfg.checkpoint] if cfg.checkpoint else [])
    if not paths:
        raise UsageError("at least one checkpoint is required")
    models = [(Path(p), _load_checkpoint(p)) for p in paths]
    samples = _load_dataset(cfg)
    if split != "all":
        tr, va, te = split_indices(len(samples), cfg.seed, _fractions(cfg))
        samples = [samples[i] for i in {"train": tr, "val": va, "test": te}[split]]
    if not samples:
        raise CommandError("no matches to evaluate")
    for path, ens in models:
        target = out if len(models) == 1 else out / path.stem
        results = evaluate(ens, samples, cfg.threshold)
        emit_report(results, target)
        acc = next(iter(results.discernment.values())).accuracy
        print(f"{path.name}: variant {ens.variant.variant_id} accuracy {acc:.4f} on {len(samples)} matches; report in {target}")
    return 0


def cmd_gradcheck(cfg: RunConfig, perturb: float) -> int:
    from .gradcheck import TOLERANCE, check_all

    results = check_all(cfg.seed, perturb=perturb)
    for r in results:
        print(f"variant {r.variant_id}: {'PASS' if r.passed else 'FAIL'} max_rel_err={r.max_rel_err:.3e}")
    worst = max(r.max_rel_err for r in results)
    ok = worst < TOLERANCE
    print(f"{'PASS' if ok else 'FAIL'} max_rel_err={worst:.3e}")
    return 0 if ok else 1


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand's copy of a global flag from erasing the value given before it
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--strict", action="store_true", help="abort on the first invalid input")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = _Parser(prog="actscore", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus with latent values")
    p.add_argument("--n", dest="n_matches", type=int, default=None, help="number of matches (default 2000)")
    p.add_argument("--flip-probability", dest="flip_probability", type=float, default=None)
    p.add_argument("--skill-spread", dest="skill_spread", type=float, default=None)

    p = sub.add_parser("featurize", parents=[common], help="turn match files into a featurized dataset")
    p.add_argument("in_dir", nargs="?", default=None, help="directory of match JSON files")
    p.add_argument("--output", default=None, help="file name inside --out (default featurized.jsonl)")

    p = sub.add_parser("train", parents=[common], help="train one variant")
    p.add_argument("dataset", nargs="?", default=None, help="featurized JSONL dataset")
    p.add_argument("--variant", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)

    p = sub.add_parser("score", parents=[common], help="per-action scores for one match")
    p.add_argument("checkpoint", nargs="?", default=None)
    p.add_argument("match_file", nargs="?", default=None)
    p.add_argument("--csv", action="store_true", help="machine-readable output")
    p.add_argument("--outcome", choices=("blue", "red"), default=None, help="known winner (variants 2 and 5)")

    p = sub.add_parser("evaluate", parents=[common], help="evaluation report for trained checkpoints")
    p.add_argument("dataset", nargs="?", default=None, help="featurized JSONL dataset")
    p.add_argument("--checkpoint", dest="checkpoints", action="append", default=[], help="repeatable")
    p.add_argument("--split", choices=("all", "train", "val", "test"), default="all")
    p.add_argument("--threshold", type=int, default=None, help="rank-gap threshold for misestimates")

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of every variant")
    p.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
    cfg = build_config(args)
    out = Path(getattr(args, "out", "out")).resolve()
    if args.command == "synth":
        return cmd_synth(cfg, out)
    if args.command == "featurize":
        return cmd_featurize(cfg, out, getattr(args, "strict", False), args.output)
    if args.command == "train":
        return cmd_train(cfg, out)
    if args.command == "score":
        return cmd_score(cfg, args.csv, args.outcome)
    if args.command == "evaluate":
        return cmd_evaluate(cfg, out, [str(Path(p).resolve()) for p in args.checkpoints], args.split)
    return cmd_gradcheck(cfg, args.perturb)


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
