"""Command-line entry point: ``kdr <command> [options]``.

Every command writes a run manifest next to its main output (``<out>.manifest.json``,
or ``manifest.json`` inside an output directory). ``kdr rerun MANIFEST --check``
re-executes a manifest and verifies the outputs are byte-identical.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import subprocess
import sys
from pathlib import Path

from . import __version__
from .corpus import (
    SplitSpec,
    assemble_dataset,
    build_tfidf_index,
    coverage_stats,
    make_synthetic,
    read_claims,
    read_corpus,
    read_dataset,
    split_claims,
    write_claims,
    write_corpus,
    write_dataset,
)
from .corpus.io import iter_jsonl, write_jsonl
from .distillation import (
    LossConfig,
    TeacherLogitCache,
    TokenStore,
    TrainConfig,
    model_scores,
    run_sweep,
    score_teacher,
    sweep_grid,
    train,
)
from .exceptions import CheckpointError, KDRError
from .index_runtime import DocIndex, benchmark, build_index, retrieve
from .metrics import evaluate, format_table
from .models import EncoderConfig, StudentModel, TeacherConfig, TeacherModel, load_model

logger = logging.getLogger("kdretrieval")

EXIT_USAGE = 2
EXIT_DATA = 1


class UsageError(Exception):
    pass


class ReproducibilityError(KDRError):
    pass


# -- manifests -----------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _git_commit():
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None if out.returncode == 0 else None


class Run:
    """Collects what a command read and wrote, then writes the manifest."""

    def __init__(self, command: str, argv: list, manifest_path):
        self.command = command
        self.argv = list(argv)
        self.manifest_path = Path(manifest_path)
        self.config = {}
        self.inputs = {}
        self.outputs = {}
        self.checkpoints = {}
        self.extra = {}
        self.seed = None
        self.started = _now()

    def read(self, *paths):
        for p in paths:
            if p is not None:
                self.inputs[str(p)] = sha256_file(p)

    def wrote(self, *paths):
        for p in paths:
            self.outputs[str(p)] = sha256_file(p)

    def finish(self) -> dict:
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "cwd": os.getcwd(),
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "checkpoints": self.checkpoints,
            "git_commit": _git_commit(),
            "version": __version__,
            "started_at": self.started,
            "finished_at": _now(),
        }
        manifest.update(self.extra)
        self.manifest_path.parent.mkdir(parents=True, exist_ok=True)
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return manifest


def _manifest_for(out) -> Path:
    out = Path(out)
    return Path(str(out) + ".manifest.json")


# -- config resolution ---------------------------------------------------------

STUDENT_DEFAULTS = {
    "alpha": 0.0, "temperature": 1.0, "soft_loss": "mse", "student": "lstm", "epochs": 10, "lr": 1e-3,
    "batch_size": 8, "seed": 0, "data_fraction": 1.0, "embed_dim": 64, "hidden_dim": 64, "filters": 32,
    "kernel_widths": [2, 3, 4],
}
TEACHER_DEFAULTS = {
    "epochs": 10, "lr": 1e-3, "batch_size": 8, "seed": 0, "data_fraction": 1.0, "embed_dim": 64,
    "hidden_dim": 200,
}


def resolve_config(defaults: dict, config_path, args) -> dict:
    """defaults < config file < explicit flags."""
    cfg = dict(defaults)
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {config_path}: {exc}") from None
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise UsageError(f"config file {config_path}: unknown keys {unknown}")
        cfg.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _store(args, run: Run) -> TokenStore:
    run.read(args.corpus, args.claims)
    return TokenStore(read_corpus(args.corpus), read_claims(args.claims))


def _sets(paths, run: Run) -> list:
    out = []
    for p in paths:
        run.read(p)
        out.extend(read_dataset(p))
    return out


def _load(path, run: Run, kind=None):
    run.read(path)
    model = load_model(path)
    if kind is not None and model.kind != kind:
        raise CheckpointError(f"{path} holds a {model.kind} checkpoint, expected {kind}")
    run.checkpoints[str(path)] = model.fingerprint()
    return model


def _cache(path, run: Run):
    if path is None:
        return None
    run.read(path)
    return TeacherLogitCache.load(path, provenance=sha256_file(path))


# -- commands ------------------------------------------------------------------

def cmd_synth(args, run: Run):
    docs, claims = make_synthetic(n_docs=args.n_docs, n_claims=args.n_claims, vocab_size=args.vocab_size,
                                  n_topics=args.n_topics, doc_len=args.doc_len, claim_len=args.claim_len,
                                  overlap=args.overlap, seed=args.seed)
    run.seed = args.seed
    run.config = {k: getattr(args, k) for k in ("n_docs", "n_claims", "vocab_size", "n_topics", "doc_len",
                                                 "claim_len", "overlap")}
    out = Path(args.out_dir)
    write_corpus(out / "corpus.jsonl", docs)
    write_claims(out / "claims.jsonl", claims)
    run.wrote(out / "corpus.jsonl", out / "claims.jsonl")
    print(f"wrote {len(docs)} documents and {len(claims)} claims to {out}")


def cmd_build_dataset(args, run: Run):
    run.read(args.corpus, args.claims)
    docs, claims = read_corpus(args.corpus), read_claims(args.claims)
    index = build_tfidf_index(docs)
    spec = SplitSpec(args.train_size, args.dev_size, args.test_size)
    split = split_claims(claims, spec, args.seed)
    run.seed = args.seed
    run.config = {"candidates": args.candidates, "split": list(spec.sizes(len(claims))),
                  "coverage_c": args.coverage_c}
    out = Path(args.out_dir)
    for name in ("train", "dev", "test"):
        path = out / f"{name}.jsonl"
        write_dataset(path, assemble_dataset(getattr(split, name), index, args.candidates))
        run.wrote(path)
    cs = sorted(set(c for c in args.coverage_c if c <= len(docs)) | {args.candidates})
    coverage = coverage_stats(claims, index, cs)
    (out / "coverage.json").write_text(json.dumps({str(k): v for k, v in coverage.items()}, indent=2) + "\n")
    run.wrote(out / "coverage.json")
    print("C      coverage(%)")
    for c, v in coverage.items():
        print(f"{c:<6} {v:.2f}")


def cmd_train_teacher(args, run: Run):
    cfg = resolve_config(TEACHER_DEFAULTS, args.config, args)
    run.config, run.seed = cfg, cfg["seed"]
    store = _store(args, run)
    train_sets, dev_sets = _sets(args.train, run), _sets(args.dev or [], run)
    model = TeacherModel(TeacherConfig(len(store.vocab), embed_dim=cfg["embed_dim"], hidden_dim=cfg["hidden_dim"],
                                       seed=cfg["seed"]))
    tc = TrainConfig(lr=cfg["lr"], epochs=cfg["epochs"], batch_size=cfg["batch_size"], seed=cfg["seed"],
                     data_fraction=cfg["data_fraction"])
    result = train(model, train_sets, store, LossConfig(0.0), tc, dev_sets=dev_sets or None)
    result.model.save(args.out)
    run.wrote(args.out)
    run.extra["history"] = result.history
    run.extra["best_epoch"] = result.best_epoch
    print(f"teacher: {result.model.count_params()} parameters, best epoch {result.best_epoch} -> {args.out}")


def cmd_score_teacher(args, run: Run):
    teacher = _load(args.teacher, run, "teacher")
    store = _store(args, run)
    sets = _sets(args.sets, run)
    cache = score_teacher(teacher, sets, store, batch_size=args.batch_size)
    cache.save(args.out)
    run.wrote(args.out)
    run.config = {"batch_size": args.batch_size}
    print(f"cached teacher logits for {len(cache)} claims -> {args.out}")


def _student_parts(cfg, store):
    enc = EncoderConfig(len(store.vocab), embed_dim=cfg["embed_dim"], hidden_dim=cfg["hidden_dim"],
                        filters=cfg["filters"], kernel_widths=tuple(cfg["kernel_widths"]), seed=cfg["seed"])
    tc = TrainConfig(lr=cfg["lr"], epochs=cfg["epochs"], batch_size=cfg["batch_size"], seed=cfg["seed"],
                     data_fraction=cfg["data_fraction"])
    return enc, tc


def cmd_train_student(args, run: Run):
    cfg = resolve_config(STUDENT_DEFAULTS, args.config, args)
    run.config, run.seed = cfg, cfg["seed"]
    store = _store(args, run)
    train_sets, dev_sets = _sets(args.train, run), _sets(args.dev or [], run)
    enc, tc = _student_parts(cfg, store)
    loss = LossConfig(cfg["alpha"], cfg["temperature"], cfg["soft_loss"])
    # the cache is only opened when the objective actually uses it
    cache = _cache(args.cache, run) if loss.alpha > 0 else None
    result = train(StudentModel(enc, cfg["student"]), train_sets, store, loss, tc, cache=cache,
                   dev_sets=dev_sets or None)
    result.model.save(args.out)
    run.wrote(args.out)
    run.extra["history"] = result.history
    run.extra["best_epoch"] = result.best_epoch
    print(f"student ({cfg['student']}, {loss.label}): best epoch {result.best_epoch} -> {args.out}")


def cmd_evaluate(args, run: Run):
    sets = _sets(args.sets, run)
    if args.model is not None:
        if args.corpus is None or args.claims is None:
            raise UsageError("--model needs --corpus and --claims")
        model = _load(args.model, run)
        scores = model_scores(model, sets, _store(args, run))
    else:
        run.read(args.scores)
        scores = {}
        for o in iter_jsonl(args.scores):
            scores[str(o["claim_id"])] = o["logits"] if "logits" in o else o["scores"]
    rep = evaluate(scores, sets)
    print(format_table([(args.label, rep)]))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(rep.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    run.wrote(args.out)


def cmd_index(args, run: Run):
    student = _load(args.student, run, "student")
    run.read(args.corpus)
    store = TokenStore(read_corpus(args.corpus))
    index = build_index(student, store)
    index.save(args.out)
    run.wrote(args.out)
    print(f"indexed {len(index)} documents (dim {index.dim}) -> {args.out}")


def cmd_retrieve(args, run: Run):
    student = _load(args.student, run, "student")
    run.read(args.index, args.corpus)
    index = DocIndex.load(args.index)
    if index.provenance != student.fingerprint():
        raise CheckpointError("index was built with a different student checkpoint")
    store = TokenStore(read_corpus(args.corpus))
    queries = []
    if args.text is not None:
        queries.append(("query", store.vocab.encode(args.text)))
    if args.claims is not None:
        run.read(args.claims)
        wanted = set(args.claim_id or [])
        for c in read_claims(args.claims):
            if not wanted or c.id in wanted:
                queries.append((c.id, store.vocab.encode(c.text)))
    if not queries:
        raise UsageError("give --text or --claims")
    rows = [{"claim_id": cid, "results": [[d, s] for d, s in retrieve(student, index, toks, min(args.k, len(index)))]}
            for cid, toks in queries]
    write_jsonl(args.out, rows)
    run.wrote(args.out)
    run.config = {"k": args.k}
    for r in rows[:5]:
        print(r["claim_id"], " ".join(d for d, _ in r["results"]))


def cmd_benchmark(args, run: Run):
    student = _load(args.student, run, "student")
    teacher = _load(args.teacher, run, "teacher")
    store = _store(args, run)
    claim_ids = sorted(store.claims)[: args.n_claims] if args.n_claims else sorted(store.claims)
    rep = benchmark(student, teacher, store, claim_ids, batch_size=args.batch_size)
    ledger = rep.ledger_json()
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(ledger, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    run.wrote(args.out)
    # wall-clock numbers are not reproducible, so they stay out of the artifact
    run.extra["timing"] = rep.timing_json()
    run.config = {"n_claims": len(claim_ids), "batch_size": args.batch_size}
    print(f"N={rep.n_claims} D={rep.n_docs}")
    print(f"student: {ledger['student_encoder_calls']} encoder calls, {rep.student_seconds:.2f}s")
    print(f"teacher: {ledger['teacher_joint_calls']} joint calls, {rep.teacher_seconds:.2f}s")
    print(f"speedup: {rep.speedup:.1f}x  params: {rep.teacher_params} vs {rep.student_params}")


def cmd_sweep(args, run: Run):
    cfg = resolve_config(STUDENT_DEFAULTS, args.config, args)
    cfg = {k: v for k, v in cfg.items() if k not in ("alpha", "temperature", "soft_loss")}
    cfg.update(alphas=args.alphas, temperatures=args.temperatures, soft_losses=args.soft_losses,
               seeds=args.seeds or [cfg["seed"]], baseline=not args.no_baseline)
    run.config, run.seed = cfg, cfg["seeds"][0]
    store = _store(args, run)
    train_sets, dev_sets = _sets(args.train, run), _sets(args.dev, run)
    grid = sweep_grid(args.alphas, args.temperatures, args.soft_losses, baseline=not args.no_baseline)
    cache = _cache(args.cache, run) if any(lc.alpha > 0 for lc in grid) else None
    enc, tc = _student_parts(cfg, store)

    def make(seed):
        return StudentModel(EncoderConfig.from_dict({**enc.__dict__, "seed": seed}), cfg["student"])

    rows = run_sweep(make, train_sets, store, grid, tc, cache=cache, dev_sets=dev_sets, seeds=cfg["seeds"])
    multi = len(cfg["seeds"]) > 1
    table = [(r.label + (f" [seed {r.seed}]" if multi else ""), r.result.best_report) for r in rows]
    print(format_table(table, title=f"Teacher/student training with {cfg['student']} (dev)"))
    out = [{"label": r.label, "alpha": r.loss.alpha, "temperature": r.loss.temperature, "soft_loss": r.loss.soft_loss,
            "seed": r.seed, "best_epoch": r.result.best_epoch, "report": r.result.best_report.to_json()}
           for r in rows]
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    run.wrote(args.out)


def cmd_rerun(args, _run=None):
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    previous = manifest["outputs"]
    cwd = os.getcwd()
    try:
        os.chdir(manifest.get("cwd", cwd))
        status = main(manifest["argv"])
        if status != 0:
            return status
        if args.check:
            bad = [p for p, h in previous.items() if not Path(p).exists() or sha256_file(p) != h]
            if bad:
                raise ReproducibilityError(f"outputs differ from the manifest: {bad}")
            print(f"reproduced {len(previous)} output(s) byte-identically")
    finally:
        os.chdir(cwd)
    return 0


# -- parser ----------------------------------------------------------------------

def _add_data(p, required=True):
    p.add_argument("--corpus", required=required, help="documents JSON-lines file")
    p.add_argument("--claims", required=required, help="claims JSON-lines file")


def _add_train(p, student: bool):
    p.add_argument("--config", help="JSON experiment config; flags override its values")
    p.add_argument("--train", nargs="+", required=True, help="training candidate-set file(s)")
    p.add_argument("--dev", nargs="+", help="dev candidate-set file(s) for best-epoch selection")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--data-fraction", dest="data_fraction", type=float)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    if student:
        p.add_argument("--student", choices=("lstm", "cnn"))
        p.add_argument("--filters", type=int)
        p.add_argument("--kernel-widths", dest="kernel_widths", type=int, nargs="+")
        p.add_argument("--cache", help="teacher logit cache (read only when alpha > 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kdr", description="Teacher/student document retrieval toolkit")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus and claims")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-docs", type=int, default=200)
    p.add_argument("--n-claims", type=int, default=500)
    p.add_argument("--vocab-size", type=int, default=500)
    p.add_argument("--n-topics", type=int, default=10)
    p.add_argument("--doc-len", type=int, default=20)
    p.add_argument("--claim-len", type=int, default=8)
    p.add_argument("--overlap", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth, manifest=lambda a: Path(a.out_dir) / "manifest.json")

    p = sub.add_parser("build-dataset", help="mine TF-IDF candidates and split claims")
    _add_data(p)
    p.add_argument("--candidates", "-C", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-size", type=int)
    p.add_argument("--dev-size", type=int)
    p.add_argument("--test-size", type=int)
    p.add_argument("--coverage-c", type=int, nargs="+", default=[1, 3, 5, 10, 20])
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_build_dataset, manifest=lambda a: Path(a.out_dir) / "manifest.json")

    p = sub.add_parser("train-teacher", help="train the coattention teacher")
    _add_data(p)
    _add_train(p, student=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("score-teacher", help="cache teacher logits for candidate sets")
    _add_data(p)
    p.add_argument("--teacher", required=True)
    p.add_argument("--sets", nargs="+", required=True)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score_teacher)

    p = sub.add_parser("train-student", help="train a dual-encoder student")
    _add_data(p)
    _add_train(p, student=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--temperature", type=float)
    p.add_argument("--soft-loss", dest="soft_loss", choices=("ce", "mse"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_student)

    p = sub.add_parser("evaluate", help="ranking report for a model or a score file")
    _add_data(p, required=False)
    p.add_argument("--sets", nargs="+", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="student or teacher checkpoint")
    src.add_argument("--scores", help='JSON-lines {"claim_id", "logits"|"scores"}')
    p.add_argument("--label", default="model")
    p.add_argument("--out", required=True, help="report JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("index", help="pre-encode every document with a student")
    p.add_argument("--student", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("retrieve", help="top-k documents from a pre-built index")
    p.add_argument("--student", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--claims")
    p.add_argument("--claim-id", nargs="+")
    p.add_argument("--text")
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("benchmark", help="student index vs teacher joint scoring cost")
    _add_data(p)
    p.add_argument("--student", required=True)
    p.add_argument("--teacher", required=True)
    p.add_argument("--n-claims", type=int)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sweep", help="grid over soft loss, alpha and temperature")
    _add_data(p)
    _add_train(p, student=True)
    p.add_argument("--alphas", type=float, nargs="+", default=[0.2, 0.5, 1.0])
    p.add_argument("--temperatures", type=float, nargs="+", default=[1.0, 3.0, 6.0])
    p.add_argument("--soft-losses", choices=("ce", "mse"), nargs="+", default=["ce", "mse"])
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--no-baseline", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rerun", help="re-execute the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--check", action="store_true", help="fail unless outputs are byte-identical")
    p.set_defaults(func=cmd_rerun, manifest=None)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "rerun":
            return cmd_rerun(args)
        where = args.manifest(args) if getattr(args, "manifest", None) else _manifest_for(args.out)
        run = Run(args.command, argv, where)
        args.func(args, run)
        run.finish()
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        if isinstance(exc, KDRError):
            print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KDRError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
