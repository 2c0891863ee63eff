"""Experiment runner: ``nnlm train``, ``nnlm eval``, and ``nnlm reproduce``.

Exit codes: 0 success, 1 runtime failure, 2 configuration/usage error,
3 acceptance-band failure in ``reproduce``.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from pathlib import Path

from . import evaluation, training
from .artifact import ArtifactError, build_model, load_artifact, save_artifact
from .caching import CacheConfig
from .config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from .corpus import build_vocabulary, load_documents, split_corpus
from .evaluation import reverse_sentences

CORPUS_ROOT_ENV = "NNLM_CORPUS_ROOT"


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _provenance(cfg: RunConfig, corpus_path: Path) -> str:
    lines = [f"# corpus_sha256: {_sha256_file(corpus_path)}",
             f"# seed: {cfg.seed}"]
    lines += [f"# {line}" for line in serialize_config(cfg).splitlines()]
    return "\n".join(lines) + "\n"


def _load_split(cfg: RunConfig):
    path = Path(cfg.corpus_path)
    docs = load_documents(path, lowercase=cfg.lowercase)
    sentences = [s for doc in docs for s in doc]
    split = split_corpus(sentences, cfg.n_train, cfg.n_valid)
    # document id per test sentence, for carryover resets
    doc_ids = [i for i, doc in enumerate(docs) for _ in doc]
    n_head = len(split.train) + len(split.validation)
    test_doc_ids = doc_ids[n_head:]
    return split, test_doc_ids


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if not cfg.corpus_path:
        raise ConfigError("corpus.path is required for training")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    split, _ = _load_split(cfg)
    if cfg.reverse:
        split.train = reverse_sentences(split.train)
        split.validation = reverse_sentences(split.validation)
    vocab = build_vocabulary(split.train, min_count=cfg.min_count)
    core, strategy, partition = build_model(cfg, vocab)

    epochs_path = outdir / "epochs.tsv"
    epochs_path.write_text(
        _provenance(cfg, Path(cfg.corpus_path)) + training.TSV_HEADER,
        encoding="utf-8")
    (outdir / "vocab.tsv").write_text(vocab.to_tsv(), encoding="utf-8")

    def echo(rep):
        print(f"epoch {rep.epoch}: train_nll={rep.train_nll:.4f} "
              f"valid_ppl={rep.valid_ppl:.2f} words/s={rep.words_per_s:.0f} "
              f"lr={rep.alpha:.4g}")

    training.train(core, strategy, split, vocab, cfg.training_config(),
                   log_path=epochs_path, echo=echo if not args.quiet else None)
    save_artifact(outdir / "model.nnlm", cfg, vocab, core, strategy, partition)
    print(f"saved {outdir / 'model.nnlm'}")
    return 0


def _eval_once(core, strategy, sentences, vocab, cfg: RunConfig, mode: str,
               cache: CacheConfig | None, carryover: bool, doc_ids):
    if mode == "dynamic":
        return training.dynamic_evaluate(core, strategy, sentences, vocab,
                                         cfg.alpha_dyn, cfg.beta_dyn, cfg.clip)
    if mode == "reversed":
        sentences = reverse_sentences(sentences)
    return evaluation.perplexity(core, strategy, sentences, vocab, cache=cache,
                                 carryover=carryover, doc_ids=doc_ids)


def cmd_eval(args) -> int:
    cfg, vocab, core, strategy, _ = load_artifact(args.artifact)
    docs = load_documents(args.corpus, lowercase=cfg.lowercase)
    sentences = [s for doc in docs for s in doc]
    doc_ids = [i for i, doc in enumerate(docs) for _ in doc]
    cache = None
    if args.cache_lambda is not None and args.cache_lambda < 1.0:
        cache = CacheConfig(lam=args.cache_lambda, length=args.cache_length,
                            decay=args.cache_decay, gamma=args.gamma,
                            mode=args.cache_mode)
    if args.alpha_dyn is not None:
        cfg.alpha_dyn = args.alpha_dyn
    if args.beta_dyn is not None:
        cfg.beta_dyn = args.beta_dyn
    rep = _eval_once(core, strategy, sentences, vocab, cfg, args.mode, cache,
                     args.carryover, doc_ids)
    out = _provenance(cfg, Path(args.corpus)) + rep.to_tsv()
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    wps = "-" if rep.words_per_s is None else f"{rep.words_per_s:.0f}"
    print(f"tokens={rep.tokens}  PPL={rep.ppl:.2f}  words/s={wps}  mode={args.mode}")
    return 0


# ---------------------------------------------------------------------------
# Reference-table reproduction recipes
# ---------------------------------------------------------------------------

def _base_config(args) -> RunConfig:
    cfg = RunConfig()
    cfg.corpus_path = str(_corpus_file(args))
    cfg.m = args.m
    cfg.n_h = args.n_h
    cfg.n_train = args.n_train
    cfg.n_valid = args.n_valid
    cfg.max_epochs = args.max_epochs
    cfg.min_count = args.min_count
    cfg.seed = args.seed
    cfg.validate()
    return cfg


def _corpus_file(args) -> Path:
    root = args.corpus_root or os.environ.get(CORPUS_ROOT_ENV)
    if not root:
        raise ConfigError(
            f"no corpus available: pass --corpus-root or set {CORPUS_ROOT_ENV} "
            "to a directory containing brown.txt (newline-delimited sentences)")
    path = Path(root) / "brown.txt"
    if not path.exists():
        raise ConfigError(f"corpus file not found: {path}")
    return path


def _run_cached(name: str, cfg: RunConfig, args):
    """Train (or reuse) one configuration; returns (test PPL report, words/s)."""
    outdir = Path(args.outdir) / name
    artifact = outdir / "model.nnlm"
    if not artifact.exists():
        outdir.mkdir(parents=True, exist_ok=True)
        split, _ = _load_split(cfg)
        if cfg.reverse:
            split.train = reverse_sentences(split.train)
            split.validation = reverse_sentences(split.validation)
        vocab = build_vocabulary(split.train, min_count=cfg.min_count)
        core, strategy, partition = build_model(cfg, vocab)
        t0 = time.perf_counter()
        reports = training.train(core, strategy, split, vocab,
                                 cfg.training_config(),
                                 log_path=outdir / "epochs.tsv")
        print(f"[{name}] trained {len(reports)} epochs in "
              f"{time.perf_counter() - t0:.0f}s")
        save_artifact(artifact, cfg, vocab, core, strategy, partition)
    cfg2, vocab, core, strategy, _ = load_artifact(artifact)
    split, doc_ids = _load_split(cfg2)
    test = reverse_sentences(split.test) if cfg2.reverse else split.test
    rep = evaluation.perplexity(core, strategy, test, vocab)
    # training throughput from the epoch log
    wps = None
    log = outdir / "epochs.tsv"
    if log.exists():
        rows = [l for l in log.read_text().splitlines()
                if l and not l.startswith(("#", "epoch\t"))]
        if rows:
            wps = float(rows[-1].split("\t")[3])
    return rep, wps, (core, strategy, vocab, split, doc_ids)


def _band_row(label, reference, measured, lo, hi):
    ok = lo <= measured <= hi
    return ok, (f"| {label} | {reference} | {measured:.2f} | "
                f"[{lo:.2f}, {hi:.2f}] | {'pass' if ok else 'FAIL'} |")


def cmd_reproduce(args) -> int:
    table = args.table
    rows = ["| run | reference | measured | band | status |",
            "|---|---|---|---|---|"]
    failures = 0

    def record(ok_row):
        nonlocal failures
        ok, row = ok_row
        rows.append(row)
        if not ok:
            failures += 1

    base = _base_config(args)
    if table == "1":
        for arch, ref, band in (("fnn", 223.85, (223.85 * 0.8, 223.85 * 1.2)),
                                  ("rnn", 221.10, (221.10 * 0.8, 221.10 * 1.2)),
                                  ("lstm", 237.93, (200.0, 280.0))):
            cfg = parse_config(serialize_config(base))
            cfg.arch = arch
            rep, _, _ = _run_cached(f"t1_{arch}", cfg, args)
            record(_band_row(arch.upper(), ref, rep.ppl, *band))
    elif table == "2":
        ppl = {}
        wps = {}
        for levels, ref in ((1, 227.51), (3, 312.82), (5, 438.58)):
            cfg = parse_config(serialize_config(base))
            cfg.strategy, cfg.assign, cfg.levels = "hier", "uniform", levels
            rep, w, _ = _run_cached(f"t2_uniform_l{levels}", cfg, args)
            ppl[levels] = rep.ppl
            wps[levels] = w
            rows.append(f"| uniform l={levels} | {ref} | {rep.ppl:.2f} | trend | - |")
        mono = ppl[1] < ppl[3] < ppl[5]
        record((mono, f"| PPL monotone in depth | yes | {mono} | l1<l3<l5 | "
                f"{'pass' if mono else 'FAIL'} |"))
        for rule, ref in (("freq", 248.99), ("sqrt_freq", 237.93)):
            cfg = parse_config(serialize_config(base))
            cfg.strategy, cfg.assign = "class", rule
            rep, w, _ = _run_cached(f"t2_{rule}", cfg, args)
            ppl[rule] = rep.ppl
            wps[rule] = w
            rows.append(f"| {rule} l=1 | {ref} | {rep.ppl:.2f} | trend | - |")
        ok = ppl["sqrt_freq"] <= ppl["freq"]
        record((ok, f"| sqrt-freq <= freq | yes | {ok} | - | "
                f"{'pass' if ok else 'FAIL'} |"))
        cfg = parse_config(serialize_config(base))
        cfg.strategy = "full"
        _, w_full, _ = _run_cached("t2_full", cfg, args)
        if w_full and wps.get("sqrt_freq"):
            ratio = wps["sqrt_freq"] / w_full
            record((ratio >= 1.5, f"| class/full train speed | >1 | {ratio:.2f}x "
                    f"| >=1.5x | {'pass' if ratio >= 1.5 else 'FAIL'} |"))
    elif table == "3":
        rep, _, extras = _run_cached("baseline", base, args)
        core, strategy, vocab, split, doc_ids = extras
        carry = evaluation.perplexity(core, strategy, split.test, vocab,
                                      carryover=True, doc_ids=doc_ids)
        record(_band_row("carryover", 241.45, carry.ppl,
                         rep.ppl * 0.95, rep.ppl * 1.05))
        rows.append(f"| baseline | 237.93 | {rep.ppl:.2f} | - | - |")
    elif table == "4":
        rep, _, _ = _run_cached("baseline", base, args)
        cfg = parse_config(serialize_config(base))
        cfg.reverse = True
        rrep, _, _ = _run_cached("t4_reversed", cfg, args)
        record(_band_row("reversed", 240.48, rrep.ppl,
                         rep.ppl * 0.95, rep.ppl * 1.05))
    elif table == "dynamic":
        rep, _, extras = _run_cached("baseline", base, args)
        core, strategy, vocab, split, _ = extras
        dyn = training.dynamic_evaluate(core, strategy, split.test, vocab,
                                        base.alpha_dyn, base.beta_dyn, base.clip)
        record(_band_row("dynamic", 174.57, dyn.ppl, 1.0, rep.ppl * 0.90))
        rows.append(f"| static | 237.93 | {rep.ppl:.2f} | - | - |")
    else:
        raise ConfigError(f"unknown table id {table!r}; use 1, 2, 3, 4 or dynamic")

    report = "\n".join(rows) + "\n"
    print(report)
    out = Path(args.outdir) / f"table_{table}.md"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report, encoding="utf-8")
    return 3 if failures else 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnlm",
                                     description="Neural language-model lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("config")
    p.add_argument("--outdir", default="run")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on a corpus")
    p.add_argument("artifact")
    p.add_argument("corpus")
    p.add_argument("--mode", choices=("static", "dynamic", "reversed"),
                   default="static")
    p.add_argument("--cache-lambda", type=float, default=None)
    p.add_argument("--cache-length", type=int, default=100)
    p.add_argument("--cache-decay", choices=("constant", "linear", "exponential"),
                   default="constant")
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--cache-mode", choices=("word", "class"), default="word")
    p.add_argument("--carryover", action="store_true")
    p.add_argument("--alpha-dyn", type=float, default=None)
    p.add_argument("--beta-dyn", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reproduce", help="rerun a reference experiment table and check bands")
    p.add_argument("table", help="1, 2, 3, 4 or dynamic")
    p.add_argument("--corpus-root", default=None)
    p.add_argument("--outdir", default="reproduce")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--n-h", type=int, default=200)
    p.add_argument("--n-train", type=int, default=800000)
    p.add_argument("--n-valid", type=int, default=200000)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ArtifactError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
