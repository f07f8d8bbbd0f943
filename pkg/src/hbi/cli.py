"""Command-line interface.

Subcommands: ``banzhaf``, ``hierarchy``, ``loss`` and ``fixtures``. Exit codes:
0 on success, 2 for configuration or input errors, 3 for numeric-domain
errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import fixtures as fixture_gen
from .alignment import SimilarityGame, run_hierarchy
from .config import RunConfig, load_config
from .errors import HBIError, InvalidConfig, MissingLevel, ShapeMismatch
from .features import LEVELS, Level, Modality
from .game import (
    AdditiveGame,
    CharacteristicFn,
    PlayerSet,
    TabularGame,
    UnanimityGame,
    exact_interaction,
    sampled_interaction,
)
from .io import read_matrix, write_csv
from .objectives import (
    banzhaf_loss,
    contrastive_loss,
    distillation_loss,
    total_loss,
)

__all__ = [
    "build_game",
    "cmd_banzhaf",
    "cmd_hierarchy",
    "cmd_loss",
    "compute_losses",
    "dumps",
    "main",
]


def _finite_or_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    return obj


def dumps(obj) -> str:
    """Deterministic UTF-8 JSON (insertion key order, non-finite -> null)."""
    return json.dumps(_finite_or_none(obj), indent=2, ensure_ascii=False) + "\n"


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def build_game(cfg: RunConfig) -> tuple[CharacteristicFn, PlayerSet]:
    spec = cfg.game or {"type": "similarity"}
    kind = spec.get("type", "similarity")
    if kind == "similarity":
        level = Level.ENTITY
        game = SimilarityGame(
            cfg.load_video(),
            cfg.load_text(),
            cfg.hierarchy.similarity_weights.get((level, Modality.VIDEO)),
            cfg.hierarchy.similarity_weights.get((level, Modality.TEXT)),
        )
        return game, game.players
    if kind == "additive":
        game = AdditiveGame(spec.get("weights", []))
    elif kind == "unanimity":
        if "n" not in spec or "carrier" not in spec:
            raise InvalidConfig("config fields 'game.n' and 'game.carrier' are required")
        game = UnanimityGame(int(spec["n"]), spec["carrier"])
    elif kind == "table":
        game = TabularGame(np.asarray(spec.get("values", []), dtype=float))
    else:
        raise InvalidConfig(f"config field 'game.type': unknown game {kind!r}")
    if "split" not in spec:
        raise InvalidConfig("config field 'game.split' is required for synthetic games")
    split = spec["split"]
    if not isinstance(split, int) or not 0 <= split <= game.n_players:
        raise InvalidConfig(f"config field 'game.split' must be in [0, {game.n_players}]")
    return game, PlayerSet(game.n_players, split)


def cmd_banzhaf(
    cfg: RunConfig,
    pair: tuple[int, int],
    mode: str | None = None,
    samples: int | None = None,
    seed: int | None = None,
    workers: int | None = None,
) -> dict:
    """Interaction of video token ``pair[0]`` with text token ``pair[1]``."""
    h = cfg.hierarchy
    mode = mode or h.mode
    fn, players = build_game(cfg)
    a, b = pair
    if not 0 <= a < players.n_video:
        raise InvalidConfig(f"pair video index {a} out of range [0, {players.n_video})")
    if not 0 <= b < players.n_text:
        raise InvalidConfig(f"pair text index {b} out of range [0, {players.n_text})")
    i, j = a, players.text_player(b)
    if mode == "exact":
        est = exact_interaction(fn, players, i, j, cap=h.enumeration_cap)
    elif mode == "sampled":
        est = sampled_interaction(
            fn, players, i, j,
            samples=h.samples if samples is None else samples,
            seed=h.seed if seed is None else seed,
            workers=h.workers if workers is None else workers,
        )
    else:
        raise InvalidConfig(f"mode must be 'exact' or 'sampled', got {mode!r}")
    return est.to_dict()


def _level_matrices(paths: dict) -> dict:
    return {lv: read_matrix(p).astype(float) for lv, p in paths.items()}


def compute_losses(targets: dict, preds: dict, scores: dict, weights, task: float = 0.0) -> dict:
    """Loss terms for every level from interaction targets, predictions R and
    batch similarity matrices. Returns a LossReport dict, or only the
    interaction terms when no batch scores are supplied."""
    interaction = {}
    for lv in LEVELS:
        if lv not in preds:
            raise MissingLevel(f"MissingLevel: no prediction matrix for level {lv.value}")
        if lv not in targets:
            raise MissingLevel(f"MissingLevel: no interaction target for level {lv.value}")
        interaction[lv] = banzhaf_loss(preds[lv], targets[lv])
    if not scores:
        return {"interaction": {lv.value: interaction[lv] for lv in LEVELS}}
    for lv in LEVELS:
        if lv not in scores:
            raise MissingLevel(f"MissingLevel: no batch scores for level {lv.value}")
    contrastive = {lv: contrastive_loss(scores[lv], weights.tau) for lv in LEVELS}
    shapes = {np.shape(scores[lv]) for lv in LEVELS}
    if len(shapes) != 1:
        raise ShapeMismatch(f"ShapeMismatch: batch score shapes differ across levels: {sorted(shapes)}")
    e2a = distillation_loss(scores[Level.ENTITY], scores[Level.ACTION])
    e2v = distillation_loss(scores[Level.ENTITY], scores[Level.EVENT])
    report = total_loss(contrastive, interaction, e2a, e2v, task, weights)
    return report.to_dict()


def _apply_overrides(cfg: RunConfig, mode=None, samples=None, seed=None, workers=None) -> None:
    h = cfg.hierarchy
    if mode is not None:
        h.mode = mode
    if samples is not None:
        h.samples = samples
    if seed is not None:
        h.seed = seed
    if workers is not None:
        h.workers = workers


def cmd_hierarchy(cfg: RunConfig, out_dir: str | Path, timings: bool = False) -> dict:
    """Run the three-level pipeline and write maps, clusters and a report.

    Outputs are byte-identical for identical inputs and seed; wall-clock
    timings are only written when ``timings`` is set.
    """
    t0 = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hierarchy
    result = run_hierarchy(cfg.load_video(), cfg.load_text(), h)
    t_run = time.perf_counter() - t0

    paths = {}
    for lv in LEVELS:
        p = out / f"{lv.value}.map.csv"
        write_csv(p, result[lv].interaction.values)
        paths[f"{lv.value}.map.csv"] = str(p)

    clusters = {}
    for lv in (Level.ACTION, Level.EVENT):
        r = result[lv]
        clusters[lv.value] = {"video": r.video_clusters.to_dict(), "text": r.text_clusters.to_dict()}
    _write_json(out / "clusters.json", clusters)
    paths["clusters.json"] = str(out / "clusters.json")

    report = {
        "levels": {},
        "interaction": {"mode": h.mode, "samples": h.samples if h.mode == "sampled" else 0, "seed": h.seed},
        "clusters": {
            "video_action": h.video_action,
            "video_event": h.video_event,
            "text_action": h.text_action,
            "text_event": h.text_event,
        },
        "gates": {},
    }
    for lv in LEVELS:
        r = result[lv]
        report["levels"][lv.value] = {
            "similarity": r.similarity,
            "video_tokens": r.video.rows,
            "text_tokens": r.text.rows,
            "map_shape": list(r.interaction.shape),
            "gamma": r.gamma.tolist(),
            "delta": r.delta.tolist(),
        }
        video_gate, text_gate = h.gates[lv]
        report["gates"][lv.value] = {"video": video_gate.describe(), "text": text_gate.describe()}
    if cfg.pred:
        targets = {lv: result[lv].interaction.values for lv in LEVELS}
        scores = _level_matrices(cfg.scores)
        report["losses"] = compute_losses(targets, _level_matrices(cfg.pred), scores, cfg.loss)
    if timings:
        report["timings"] = {"pipeline_seconds": t_run, "total_seconds": time.perf_counter() - t0}
    _write_json(out / "report.json", report)
    paths["report.json"] = str(out / "report.json")
    return paths


def cmd_loss(
    cfg: RunConfig,
    pred: dict | None = None,
    scores: dict | None = None,
    target: dict | None = None,
    task: float = 0.0,
) -> dict:
    """Full loss report. Interaction targets come from ``target`` files when
    given, otherwise from running the pipeline on the configured inputs."""
    preds = _level_matrices({**cfg.pred, **(pred or {})})
    score_mats = _level_matrices({**cfg.scores, **(scores or {})})
    target_paths = {**cfg.target, **(target or {})}
    if all(lv in target_paths for lv in LEVELS):
        targets = _level_matrices(target_paths)
    else:
        result = run_hierarchy(cfg.load_video(), cfg.load_text(), cfg.hierarchy)
        targets = {lv: result[lv].interaction.values for lv in LEVELS}
        targets.update(_level_matrices(target_paths))
    if not score_mats:
        raise MissingLevel("MissingLevel: batch scores are required (--scores)")
    return compute_losses(targets, preds, score_mats, cfg.loss, task)


def _level_path_args(values: list[str] | None, flag: str) -> dict:
    """Parse ``level=path`` items; a bare path applies to every level."""
    out = {}
    for item in values or []:
        if "=" in item:
            key, path = item.split("=", 1)
            try:
                out[Level(key)] = Path(path)
            except ValueError:
                raise InvalidConfig(f"{flag}: unknown level {key!r}") from None
        else:
            out.update({lv: Path(item) for lv in LEVELS})
    return out


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("pair must be 'video_index,text_index'") from None
    return a, b


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--mode", choices=("exact", "sampled"))
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)

    p = sub.add_parser("banzhaf", help="interaction of one cross-modal pair")
    run_flags(p)
    p.add_argument("--pair", type=_pair, required=True, help="video_index,text_index")
    p.add_argument("--out", help="also write the JSON result to this file")

    p = sub.add_parser("hierarchy", help="three-level interaction maps")
    run_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timings", action="store_true", help="record wall-clock timings in report.json")

    p = sub.add_parser("loss", help="loss report from predictions and batch scores")
    run_flags(p)
    p.add_argument("--pred", action="append", help="LEVEL=PATH prediction matrix R")
    p.add_argument("--scores", action="append", help="LEVEL=PATH or PATH batch similarity matrix")
    p.add_argument("--target", action="append", help="LEVEL=PATH interaction map (skips the pipeline)")
    p.add_argument("--task-loss", type=float, default=0.0)
    p.add_argument("--out", help="also write the JSON report to this file")

    p = sub.add_parser("fixtures", help="write synthetic test inputs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _emit(text: str, out: str | None) -> None:
    sys.stdout.write(text)
    if out:
        Path(out).write_text(text, encoding="utf-8")


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "fixtures":
            written = fixture_gen.write_fixtures(args.out, seed=args.seed)
            sys.stdout.write(dumps({"written": [str(p) for p in written]}))
            return 0
        if args.samples is not None and args.samples < 1:
            raise InvalidConfig("--samples must be >= 1")
        cfg = load_config(args.config)
        _apply_overrides(cfg, args.mode, args.samples, args.seed, args.workers)
        if args.command == "banzhaf":
            _emit(dumps(cmd_banzhaf(cfg, args.pair)), args.out)
        elif args.command == "hierarchy":
            paths = cmd_hierarchy(cfg, args.out, timings=args.timings)
            sys.stdout.write(dumps({"written": list(paths.values())}))
        elif args.command == "loss":
            report = cmd_loss(
                cfg,
                pred=_level_path_args(args.pred, "--pred"),
                scores=_level_path_args(args.scores, "--scores"),
                target=_level_path_args(args.target, "--target"),
                task=args.task_loss,
            )
            _emit(dumps(report), args.out)
    except HBIError as exc:
        name = type(exc).__name__
        msg = str(exc)
        if not msg.startswith(name):
            msg = f"{name}: {msg}"
        sys.stderr.write(f"hbi: error: {msg}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
