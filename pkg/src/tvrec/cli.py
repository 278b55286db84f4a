"""Command-line pipeline: synth -> prep -> build -> recommend -> evaluate ->
bench -> tune, driven by one JSON config file with flag overrides.

Every artifact embeds the effective config hash and seed. Output files are
written atomically (temp file + rename) and no subcommand mutates its inputs.
Exit codes: 0 success, 2 usage or config error, 3 data error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import pickle
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import behavior as behavior_mod
from . import evaluate as evaluate_mod
from . import preference as preference_mod
from . import ranker as ranker_mod
from . import synth as synth_mod
from . import textenc as textenc_mod
from .datamodel import (
    InteractionTensor,
    Prepared,
    ProgramMeta,
    SplitSpec,
    parse_logs,
    parse_programs,
    prepare,
)
from .errors import ConfigError, DataError
from .timegrid import TimeGrid

METHODS = ("behavior", "preference", "two-stage", "rrf", "rrf-weighted")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

_CONFIG_SECTIONS = {
    "grid": ("n_slots", "utc_offset"),
    "preprocessing": ("min_duration_secs", "t_split", "train_days", "test_days", "binarize"),
    "encoder": ("tokenizer", "min_df", "max_vocab", "l2_normalize"),
    "ranking": ("k", "method", "mode", "eta", "xi"),
    "evaluation": ("cutoffs",),
    "paths": ("logs", "programs", "out_dir", "model"),
}


@dataclass
class EngineConfig:
    """Effective engine configuration; defaults mirror the experimental setup
    (15-minute slots, 15-minute flip threshold, 90/7-day split, k=30)."""

    n_slots: int = 672
    utc_offset: int = 0
    min_duration_secs: int = 900
    t_split: int | None = None
    train_days: float = 90.0
    test_days: float = 7.0
    binarize: bool = False
    tokenizer: str = "default"
    min_df: int = 1
    max_vocab: int | None = None
    l2_normalize: bool = True
    k: int = 30
    method: str = "two-stage"
    mode: str = "time-aware"
    eta: float = 60.0
    xi: float = 0.5
    cutoffs: tuple[int, ...] = (10, 20, 30)
    seed: int = 0
    logs: str = "data/logs.jsonl"
    programs: str = "data/programs.jsonl"
    out_dir: str = "out"
    model: str | None = None

    def validate(self) -> None:
        try:
            TimeGrid(n=self.n_slots, utc_offset=self.utc_offset)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.min_duration_secs < 0:
            raise ConfigError("min_duration_secs must be non-negative")
        if self.train_days <= 0 or self.test_days <= 0:
            raise ConfigError("train_days and test_days must be positive")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.mode not in preference_mod.MODES:
            raise ConfigError(f"mode must be one of {preference_mod.MODES}, got {self.mode!r}")
        if self.tokenizer not in textenc_mod.TOKENIZERS:
            raise ConfigError(f"unknown tokenizer {self.tokenizer!r}")
        if self.min_df < 1:
            raise ConfigError("min_df must be >= 1")
        if self.max_vocab is not None and self.max_vocab < 1:
            raise ConfigError("max_vocab must be >= 1 when set")
        if not self.cutoffs or any(n < 1 for n in self.cutoffs):
            raise ConfigError("cutoffs must be positive integers")
        if self.k < max(self.cutoffs):
            raise ConfigError(f"k={self.k} must be >= the largest cutoff {max(self.cutoffs)}")
        if self.eta < 0:
            raise ConfigError("eta must be non-negative")
        if not 0.0 <= self.xi <= 1.0:
            raise ConfigError("xi must lie in [0, 1]")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(n=self.n_slots, utc_offset=self.utc_offset)

    @property
    def split_spec(self) -> SplitSpec:
        if self.t_split is None:
            raise ConfigError("t_split is required (set preprocessing.t_split or --t-split)")
        return SplitSpec(
            t_split=self.t_split,
            dt_train=int(self.train_days * 86_400),
            dt_test=int(self.test_days * 86_400),
        )

    @property
    def model_path(self) -> str:
        return self.model or str(Path(self.out_dir) / "model.pkl")

    def config_hash(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def provenance(self) -> dict:
        return {"config_hash": self.config_hash(), "seed": self.seed}


def load_config(path: str | None, overrides: Mapping[str, object]) -> EngineConfig:
    """Build the effective config: file values first, then flag overrides."""
    cfg = EngineConfig()
    if path is not None:
        if not Path(path).exists():
            raise DataError(f"config file {path!r} does not exist")
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        for section, value in raw.items():
            if section == "seed":
                cfg.seed = value
                continue
            fields = _CONFIG_SECTIONS.get(section)
            if fields is None:
                raise ConfigError(f"unknown config section {section!r}")
            if not isinstance(value, dict):
                raise ConfigError(f"config section {section!r} must be an object")
            for key, v in value.items():
                if key not in fields:
                    raise ConfigError(f"unknown key {key!r} in config section {section!r}")
                setattr(cfg, key, tuple(v) if key == "cutoffs" else v)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


@dataclass
class ModelBundle:
    """Binary model index produced by `build` and consumed by the inference
    commands; everything derivable ahead of per-user inference lives here."""

    provenance: dict
    grid: TimeGrid
    tensor: InteractionTensor
    truths: Mapping[str, frozenset[str]]
    test_metas: tuple[ProgramMeta, ...]
    vocab: textenc_mod.Vocabulary
    prefs: Mapping[str, preference_mod.PreferenceModel]
    summary: dict


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, payload: dict, provenance: dict) -> None:
    doc = {"provenance": provenance, **payload}
    _atomic_write(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())


def _write_jsonl(path: Path, rows: Sequence[dict], provenance: dict | None = None) -> None:
    lines = []
    if provenance is not None:
        lines.append(json.dumps({"_meta": provenance}))
    lines.extend(json.dumps(row) for row in rows)
    _atomic_write(path, ("\n".join(lines) + "\n").encode() if lines else b"")


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        raise DataError(f"input file {path} does not exist")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if isinstance(rec, dict) and "_meta" in rec:
                continue
            rows.append(rec)
    return rows


def _require_inputs(*paths: str) -> None:
    missing = [p for p in paths if not Path(p).exists()]
    if missing:
        raise DataError(f"missing input file(s): {', '.join(missing)}")


def _summary_line(command: str, **payload) -> None:
    print(json.dumps({"command": command, "status": "ok", **payload}, sort_keys=True))


def _prepare_from_config(cfg: EngineConfig) -> tuple[Prepared, int, int]:
    _require_inputs(cfg.logs, cfg.programs)
    with open(cfg.logs, encoding="utf-8") as fh:
        logs, skipped_logs = parse_logs(fh)
    with open(cfg.programs, encoding="utf-8") as fh:
        metas, skipped_programs = parse_programs(fh)
    prepared = prepare(
        logs, metas, cfg.grid, cfg.split_spec, dt_min=cfg.min_duration_secs, binarize=cfg.binarize
    )
    return prepared, skipped_logs, skipped_programs


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args: argparse.Namespace) -> None:
    overrides = {}
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.config is not None:
        if not Path(args.config).exists():
            raise DataError(f"synth config {args.config!r} does not exist")
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("synth config root must be a JSON object")
        raw.update(overrides)
        try:
            cfg = synth_mod.SynthConfig(**raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid synth config: {exc}") from None
    else:
        cfg = synth_mod.SynthConfig(**overrides)

    world = synth_mod.gen_world(cfg)
    logs = synth_mod.gen_logs(world)
    out = Path(args.out_dir)
    _write_jsonl(
        out / "logs.jsonl",
        [
            {"user": g.user, "program": g.program, "channel": g.channel, "t": g.t, "dt": g.dt}
            for g in logs
        ],
    )
    _write_jsonl(
        out / "programs.jsonl",
        [
            {"program": m.program, "channel": m.channel, "start": m.start, "end": m.end, "text": m.text}
            for m in sorted(world.metas, key=lambda m: (m.channel, m.start))
        ],
    )
    manifest = synth_mod.manifest(world, logs)
    manifest["config_hash"] = hashlib.sha256(
        json.dumps(manifest["config"], sort_keys=True).encode()
    ).hexdigest()[:16]
    _atomic_write(out / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    _summary_line(
        "synth",
        out_dir=str(out),
        seed=cfg.rng_seed,
        t_split=cfg.t_split,
        programs=len(world.metas),
        logs=len(logs),
        accounts=len(world.accounts),
    )


def _cmd_prep(args: argparse.Namespace) -> None:
    cfg = _config_from_args(args)
    prepared, skipped_logs, skipped_programs = _prepare_from_config(cfg)
    out = Path(cfg.out_dir)
    _write_json(
        out / "prep_summary.json",
        {
            "summary": prepared.summary,
            "skipped_logs": skipped_logs,
            "skipped_programs": skipped_programs,
        },
        cfg.provenance(),
    )
    truth_rows = [
        {"user": u, "items": sorted(items)} for u, items in sorted(prepared.truths.items())
    ]
    _write_jsonl(out / "truth.jsonl", truth_rows, cfg.provenance())
    _summary_line("prep", **prepared.summary, skipped_logs=skipped_logs, skipped_programs=skipped_programs)


def _cmd_build(args: argparse.Namespace) -> None:
    cfg = _config_from_args(args)
    modes = (cfg.mode,) if args.mode != "both" else preference_mod.MODES
    prepared, _, _ = _prepare_from_config(cfg)
    sp = prepared.split

    tokenizer = textenc_mod.TOKENIZERS[cfg.tokenizer]
    # The encoder is fitted on train + test metadata: program text is known
    # before broadcast, so this leaks no interaction labels.
    corpus_ids = sorted(sp.i_train | sp.i_test)
    corpus = [(pid, prepared.metas[pid].text) for pid in corpus_ids]
    vocab = textenc_mod.fit(
        corpus, min_df=cfg.min_df, max_vocab=cfg.max_vocab, tokenizer=tokenizer
    )
    embeddings = {
        pid: textenc_mod.encode(vocab, prepared.metas[pid].text, l2_normalize=cfg.l2_normalize, tokenizer=tokenizer)
        for pid in corpus_ids
    }
    prefs = {m: preference_mod.build(prepared.tensor, embeddings, mode=m) for m in modes}

    test_metas = tuple(
        sorted((prepared.metas[pid] for pid in sp.i_test), key=lambda m: (m.start, m.program))
    )
    bundle = ModelBundle(
        provenance=cfg.provenance(),
        grid=cfg.grid,
        tensor=prepared.tensor,
        truths=prepared.truths,
        test_metas=test_metas,
        vocab=vocab,
        prefs=prefs,
        summary=prepared.summary,
    )
    path = Path(cfg.model_path)
    _atomic_write(path, pickle.dumps(bundle, protocol=pickle.HIGHEST_PROTOCOL))
    vocab_path = Path(cfg.out_dir) / "vocab.json"
    _write_json(vocab_path, {"vocabulary": vocab.to_dict()}, cfg.provenance())
    _summary_line(
        "build",
        model=str(path),
        modes=list(modes),
        vocab_size=vocab.size,
        users=len(prepared.tensor.users),
        test_items=len(test_metas),
    )


def _load_bundle(cfg: EngineConfig) -> ModelBundle:
    path = Path(cfg.model_path)
    if not path.exists():
        raise DataError(f"model file {path} does not exist; run `build` first")
    with open(path, "rb") as fh:
        bundle = pickle.load(fh)
    if not isinstance(bundle, ModelBundle):
        raise DataError(f"{path} is not a model bundle")
    return bundle


def _pref_model(bundle: ModelBundle, mode: str) -> preference_mod.PreferenceModel:
    model = bundle.prefs.get(mode)
    if model is None:
        raise DataError(
            f"model bundle was built without {mode!r} preferences; rebuild with --mode {mode} or both"
        )
    return model


def _rank_user_fn(cfg: EngineConfig, bundle: ModelBundle, cand: ranker_mod.Candidates, method: str):
    """Per-user inference closure for one method; models resolved up front."""
    tensor = bundle.tensor
    k = cfg.k
    matrices: dict[str, behavior_mod.BehaviorMatrix] = {}

    def bm_of(user: str) -> behavior_mod.BehaviorMatrix:
        bm = matrices.get(user)
        if bm is None:
            bm = behavior_mod.behavior_matrix(tensor, user)
            matrices[user] = bm
        return bm

    if method == "behavior":
        return lambda u: ranker_mod.rank_behavior(bm_of(u), cand)[:k]
    if method == "preference":
        model = _pref_model(bundle, cfg.mode)
        index = ranker_mod.build_item_index(model.item_embeddings, cand)
        return lambda u: ranker_mod.rank_preference(model, u, cand, index)[:k]
    if method == "two-stage":
        model = _pref_model(bundle, cfg.mode)
        return lambda u: ranker_mod.two_stage(bm_of(u), model, cand, k)
    if method == "rrf":
        model = _pref_model(bundle, cfg.mode)
        index = ranker_mod.build_item_index(model.item_embeddings, cand)

        def run_rrf(u: str):
            kb = ranker_mod.rank_behavior(bm_of(u), cand)
            kp = ranker_mod.rank_preference(model, u, cand, index)
            return ranker_mod.rrf(kb, kp, cand, eta=cfg.eta)[:k]

        return run_rrf
    if method == "rrf-weighted":
        model = _pref_model(bundle, cfg.mode)
        index = ranker_mod.build_item_index(model.item_embeddings, cand)

        def run_rrfw(u: str):
            kb = ranker_mod.rank_behavior(bm_of(u), cand)
            kp = ranker_mod.rank_preference(model, u, cand, index)
            return ranker_mod.rrf_weighted(kb, kp, cand, eta=cfg.eta, xi=cfg.xi)[:k]

        return run_rrfw
    raise ConfigError(f"unknown method {method!r}")


def _cmd_recommend(args: argparse.Namespace) -> None:
    cfg = _config_from_args(args)
    bundle = _load_bundle(cfg)
    cand = ranker_mod.build_candidates(bundle.test_metas, bundle.grid, bundle.tensor.channels)
    rank_user = _rank_user_fn(cfg, bundle, cand, cfg.method)
    rows = []
    for user in sorted(bundle.tensor.users):
        ranked = rank_user(user)
        rows.append(
            {
                "user": user,
                "items": [pid for pid, _ in ranked],
                "scores": [score for _, score in ranked],
            }
        )
    out = Path(args.out) if args.out else Path(cfg.out_dir) / f"recs_{cfg.method}.jsonl"
    _write_jsonl(out, rows, cfg.provenance())
    _summary_line("recommend", method=cfg.method, mode=cfg.mode, k=cfg.k, users=len(rows), out=str(out))


def _cmd_evaluate(args: argparse.Namespace) -> None:
    cfg = _config_from_args(args)
    rec_path = Path(args.rec) if args.rec else Path(cfg.out_dir) / f"recs_{cfg.method}.jsonl"
    truth_path = Path(args.truth) if args.truth else Path(cfg.out_dir) / "truth.jsonl"
    recs = {
        row["user"]: list(zip(row["items"], row["scores"]))
        for row in _read_jsonl(rec_path)
    }
    truths = {row["user"]: frozenset(row["items"]) for row in _read_jsonl(truth_path)}
    report = evaluate_mod.evaluate_rankings(recs, truths, cutoffs=cfg.cutoffs, method=cfg.method)
    print(evaluate_mod.format_table([report]))
    out = Path(args.out) if args.out else Path(cfg.out_dir) / f"metrics_{cfg.method}.json"
    _write_json(out, {"report": report.to_dict()}, cfg.provenance())
    _summary_line(
        "evaluate",
        method=cfg.method,
        users=report.n_users,
        skipped=report.n_skipped,
        out=str(out),
        **{f"ndcg@{n}": report.ndcg[n] for n in cfg.cutoffs},
    )


def _cmd_bench(args: argparse.Namespace) -> None:
    cfg = _config_from_args(args)
    bundle = _load_bundle(cfg)
    cand = ranker_mod.build_candidates(bundle.test_metas, bundle.grid, bundle.tensor.channels)
    users = sorted(bundle.tensor.users)
    rng = np.random.default_rng(cfg.seed)
    size = min(args.users_sample, len(users))
    sample = [users[i] for i in sorted(rng.choice(len(users), size=size, replace=False))]
    methods = args.bench_methods.split(",") if args.bench_methods else ["behavior", "two-stage", "rrf"]
    results = {}
    for method in methods:
        method = method.strip()
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}")
        rank_user = _rank_user_fn(cfg, bundle, cand, method)
        rank_user(sample[0])  # warm per-user caches outside the timed region
        results[method] = evaluate_mod.bench(rank_user, sample, repetitions=args.reps)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / "bench.json"
    _write_json(
        out,
        {"seconds_per_user": results, "users_sampled": size, "repetitions": args.reps},
        cfg.provenance(),
    )
    _summary_line("bench", users=size, reps=args.reps, **{f"sec_per_user_{m}": v for m, v in results.items()})


def _parse_grid_spec(spec: str) -> list[float]:
    if "," in spec or (":" not in spec):
        values = [float(x) for x in spec.split(",") if x.strip()]
    else:
        parts = [float(x) for x in spec.split(":")]
        if len(parts) == 2:
            lo, hi, step = parts[0], parts[1], 1.0
        elif len(parts) == 3:
            lo, hi, step = parts
        else:
            raise ConfigError(f"bad grid spec {spec!r}; use lo:hi[:step] or comma list")
        if step <= 0 or hi < lo:
            raise ConfigError(f"bad grid spec {spec!r}")
        n = int(round((hi - lo) / step))
        values = [lo + i * step for i in range(n + 1) if lo + i * step <= hi + 1e-9]
    if not values:
        raise ConfigError(f"grid spec {spec!r} is empty")
    return values


def _cmd_tune(args: argparse.Namespace) -> None:
    cfg = _config_from_args(args)
    bundle = _load_bundle(cfg)
    cand = ranker_mod.build_candidates(bundle.test_metas, bundle.grid, bundle.tensor.channels)
    model = _pref_model(bundle, cfg.mode)
    users = sorted(bundle.tensor.users)
    rng = np.random.default_rng(cfg.seed)
    n_dev = max(1, int(len(users) * args.dev_frac))
    dev = [users[i] for i in sorted(rng.choice(len(users), size=n_dev, replace=False))]

    index = ranker_mod.build_item_index(model.item_embeddings, cand)
    rankings = {}
    for user in dev:
        bm = behavior_mod.behavior_matrix(bundle.tensor, user)
        rankings[user] = (
            ranker_mod.rank_behavior(bm, cand),
            ranker_mod.rank_preference(model, user, cand, index),
        )
    etas = _parse_grid_spec(args.eta_grid)
    xis = _parse_grid_spec(args.xi_grid)
    eta, xi = ranker_mod.tune_rrf(rankings, bundle.truths, cand, etas, xis, cutoff=args.cutoff)

    recalls = []
    for user in dev:
        truth = bundle.truths.get(user)
        if not truth:
            continue
        fused = ranker_mod.rrf_weighted(*rankings[user], cand, eta=eta, xi=xi)
        recalls.append(evaluate_mod.recall_at(fused, truth, args.cutoff))
    best_recall = sum(recalls) / len(recalls) if recalls else 0.0
    out = Path(args.out) if args.out else Path(cfg.out_dir) / "tuned.json"
    _write_json(
        out,
        {"eta": eta, "xi": xi, "cutoff": args.cutoff, "dev_users": len(dev), "recall": best_recall},
        cfg.provenance(),
    )
    _summary_line("tune", eta=eta, xi=xi, recall=best_recall, dev_users=len(dev))


def _cmd_inspect_user(args: argparse.Namespace) -> None:
    cfg = _config_from_args(args)
    bundle = _load_bundle(cfg)
    bm = behavior_mod.behavior_matrix(bundle.tensor, args.user)
    entries = [[slot, channel, p] for (slot, channel), p in sorted(bm.probs.items())]
    print(json.dumps({"user": args.user, "entries": entries}, sort_keys=True))


# ---------------------------------------------------------------------------
# argument parsing


_OVERRIDE_KEYS = (
    "logs",
    "programs",
    "out_dir",
    "model",
    "t_split",
    "train_days",
    "test_days",
    "min_duration_secs",
    "k",
    "method",
    "mode",
    "eta",
    "xi",
    "seed",
    "cutoffs",
)


def _config_from_args(args: argparse.Namespace) -> EngineConfig:
    overrides = {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}
    if getattr(args, "mode", None) == "both":
        overrides["mode"] = None  # `build --mode both` keeps the config's scoring mode
    if overrides.get("cutoffs") is not None:
        try:
            overrides["cutoffs"] = tuple(int(x) for x in str(overrides["cutoffs"]).split(","))
        except ValueError:
            raise ConfigError(f"bad cutoffs {overrides['cutoffs']!r}; use e.g. 10,20,30") from None
    return load_config(getattr(args, "config", None), overrides)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="engine config JSON file")
    parser.add_argument("--logs", help="viewing logs JSONL")
    parser.add_argument("--programs", help="program metadata JSONL")
    parser.add_argument("--out-dir", dest="out_dir", help="artifact output directory")
    parser.add_argument("--model", help="model bundle path (default <out-dir>/model.pkl)")
    parser.add_argument("--seed", type=int, help="seed for sampling decisions")


def _add_prep_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--t-split", dest="t_split", type=int, help="split timestamp (UTC seconds)")
    parser.add_argument("--train-days", dest="train_days", type=float, help="training window length")
    parser.add_argument("--test-days", dest="test_days", type=float, help="test window length")
    parser.add_argument(
        "--min-duration-secs", dest="min_duration_secs", type=int, help="channel-flip threshold"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvrec", description="Linear-TV recommendation pipeline")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="synth config JSON file")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--seed", type=int, help="override the generator seed")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("prep", help="filter, split, and report dataset statistics")
    _add_common(p)
    _add_prep_flags(p)
    p.set_defaults(handler=_cmd_prep)

    p = sub.add_parser("build", help="build and persist the model index")
    _add_common(p)
    _add_prep_flags(p)
    p.add_argument("--mode", choices=("global", "time-aware", "both"), default="both")
    p.set_defaults(handler=_cmd_build)

    p = sub.add_parser("recommend", help="write top-k recommendations per user")
    _add_common(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--mode", choices=preference_mod.MODES)
    p.add_argument("--k", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--out", help="recommendations JSONL path")
    p.set_defaults(handler=_cmd_recommend)

    p = sub.add_parser("evaluate", help="score recommendations against ground truth")
    _add_common(p)
    p.add_argument("--rec", help="recommendations JSONL")
    p.add_argument("--truth", help="ground-truth JSONL")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--cutoffs", help="comma-separated cutoffs, e.g. 10,20,30")
    p.add_argument("--out", help="metrics JSON path")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("bench", help="measure per-user inference latency")
    _add_common(p)
    p.add_argument(
        "--method",
        dest="bench_methods",
        help="comma-separated methods (default behavior,two-stage,rrf)",
    )
    p.add_argument("--mode", choices=preference_mod.MODES)
    p.add_argument("--users-sample", dest="users_sample", type=int, default=1000)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--eta", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--out", help="bench JSON path")
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("tune", help="grid-search RRF hyperparameters on a dev split")
    _add_common(p)
    p.add_argument("--mode", choices=preference_mod.MODES)
    p.add_argument("--dev-frac", dest="dev_frac", type=float, default=0.1)
    p.add_argument("--eta-grid", dest="eta_grid", default="1:100")
    p.add_argument("--xi-grid", dest="xi_grid", default="0:1:0.1")
    p.add_argument("--cutoff", type=int, default=30)
    p.add_argument("--out", help="tuned parameters JSON path")
    p.set_defaults(handler=_cmd_tune)

    p = sub.add_parser("inspect-user", help="dump one user's behavior matrix")
    _add_common(p)
    p.add_argument("--user", required=True)
    p.set_defaults(handler=_cmd_inspect_user)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "handler", None) is None:
        parser.print_help()
        return EXIT_OK
    try:
        args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
