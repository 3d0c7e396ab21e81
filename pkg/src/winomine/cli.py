"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 scorer/transport error.
Every output is written atomically and gets a sidecar manifest recording the
config, seeds, input digests, and scorer digest.
"""

import argparse
import hashlib
import json
import os
import sys
import tempfile

from . import corpus, evaluator, filtering, generator, protocol, scoring, wordpiece

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SCORER = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path, write_fn):
    """write_fn(file) runs against a temp file that replaces path on success."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            write_fn(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(out_path, args, inputs, scorer_digest=None):
    manifest = {
        "subcommand": args.subcommand,
        "config": {
            k: v for k, v in sorted(vars(args).items()) if k not in ("subcommand", "func") and v is not None
        },
        "inputs": {p: _file_digest(p) for p in inputs if p and os.path.exists(p)},
        "scorer_digest": scorer_digest,
    }
    atomic_write(out_path + ".manifest.json", lambda f: json.dump(manifest, f, indent=2))


def _load_vocab(args):
    return wordpiece.load_vocab(args.vocab)


def _load_records(path, fmt):
    errors = []
    records = list(corpus.load_corpus(path, fmt, on_error=errors.append))
    for err in errors:
        print("warning: %s" % err, file=sys.stderr)
    return records


def make_scorer(args):
    """--scorer baseline fits the unigram scorer on --corpus; otherwise the
    descriptor names an external endpoint (exec:... or tcp:host:port)."""
    vocab = _load_vocab(args)
    if args.scorer == "baseline":
        if not args.corpus:
            raise UsageError("--scorer baseline requires --corpus")
        records = _load_records(args.corpus, args.format)
        return scoring.fit_baseline_scorer(records, vocab, args.smoothing)
    return protocol.remote_scorer(
        args.scorer, vocab, timeout=args.timeout, max_in_flight=args.max_in_flight,
        cache_path=args.replay_cache,
    )


def _close_scorer(scorer):
    close = getattr(scorer, "close", None)
    if close is not None:
        close()


def _add_scorer_flags(p):
    p.add_argument("--scorer", default="baseline", help="'baseline' or endpoint descriptor")
    p.add_argument("--vocab", required=True)
    p.add_argument("--corpus", help="corpus for fitting the baseline scorer")
    p.add_argument("--format", default="pretagged", choices=["plain", "pretagged"])
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--timeout", type=float, default=protocol.DEFAULT_TIMEOUT)
    p.add_argument("--max-in-flight", type=int, default=protocol.DEFAULT_MAX_IN_FLIGHT)
    p.add_argument("--replay-cache", help="response cache enabling byte-identical re-runs")


def cmd_generate(args):
    records = _load_records(args.corpus, args.format)
    examples = []
    for record in records:
        examples.extend(generator.generate_examples(record))
    atomic_write(args.out, lambda f: [f.write(ex.to_json() + "\n") for ex in examples])
    write_manifest(args.out, args, [args.corpus])
    print("generated %d examples from %d sentences" % (len(examples), len(records)))
    return EXIT_OK


def cmd_downsample(args):
    kept = list(generator.downsample(generator.read_dataset(args.dataset), args.rate, args.seed))
    atomic_write(args.out, lambda f: [f.write(ex.to_json() + "\n") for ex in kept])
    write_manifest(args.out, args, [args.dataset])
    print("kept %d examples" % len(kept))
    return EXIT_OK


def cmd_split_pairs(args):
    examples = list(generator.read_dataset(args.dataset))
    out = generator.split_pairs(examples, args.mode, args.seed)
    atomic_write(args.out, lambda f: [f.write(ex.to_json() + "\n") for ex in out])
    write_manifest(args.out, args, [args.dataset])
    print("kept %d of %d examples" % (len(out), len(examples)))
    return EXIT_OK


def cmd_dedup(args):
    train = list(generator.read_dataset(args.train))
    eval_set = list(generator.read_dataset(args.eval))
    kept, removed = generator.remove_overlap(train, eval_set)
    atomic_write(args.out, lambda f: [f.write(ex.to_json() + "\n") for ex in kept])
    write_manifest(args.out, args, [args.train, args.eval])
    print("removed %d overlapping examples" % removed)
    return EXIT_OK


def _filter_config(args):
    return filtering.FilterConfig(
        v_min=args.v_min,
        v_max=args.v_max,
        min_whole_word_frac=args.min_whole_word_frac,
        pair_mode=args.pair_mode,
        whole_word_scope=args.whole_word_scope,
        whole_word_denominator=args.whole_word_denominator,
    )


def cmd_filter(args):
    scorer = make_scorer(args)
    try:
        examples = generator.read_dataset(args.dataset)
        kept, stats = filtering.filter_dataset(scorer, examples, _filter_config(args))
    finally:
        _close_scorer(scorer)
    atomic_write(args.out, lambda f: [f.write(ex.to_json() + "\n") for ex in kept])
    atomic_write(args.stats, lambda f: f.write(stats.to_json() + "\n"))
    write_manifest(args.out, args, [args.dataset], scorer.vocab_digest)
    print(stats.to_json())
    return EXIT_OK


def cmd_score(args):
    scorer = make_scorer(args)
    rows = []
    try:
        for ex in generator.read_dataset(args.dataset):
            scores = scoring.score_candidates(scorer, ex)
            pred = scoring.argmax_with_shuffle([s.avg_log_prob for s in scores], args.seed, ex.id)
            rows.append(
                json.dumps(
                    {
                        "id": ex.id,
                        "scores": protocol.encode_log_probs([s.avg_log_prob for s in scores]),
                        "piece_counts": [s.piece_count for s in scores],
                        "predicted_idx": pred,
                        "correct": pred == ex.answer_idx,
                    }
                )
            )
    finally:
        _close_scorer(scorer)
    atomic_write(args.out, lambda f: [f.write(r + "\n") for r in rows])
    write_manifest(args.out, args, [args.dataset], scorer.vocab_digest)
    print("scored %d examples" % len(rows))
    return EXIT_OK


def cmd_eval_wsc(args):
    scorer = make_scorer(args)
    try:
        examples = list(generator.read_dataset(args.dataset))
        annotations = evaluator.load_annotations(args.annotations)
        report = evaluator.evaluate_wsc(
            scorer, examples, annotations, shuffle_seed=args.seed, consistency_mode=args.consistency_mode
        )
    finally:
        _close_scorer(scorer)
    table = evaluator.render_report(report, name=args.name)
    if args.out:
        atomic_write(args.out, lambda f: f.write(report.to_json() + "\n"))
        write_manifest(args.out, args, [args.dataset, args.annotations], scorer.vocab_digest)
    print(table, end="")
    return EXIT_OK


def cmd_eval_wnli(args):
    scorer = make_scorer(args)
    try:
        with open(args.tsv, encoding="utf-8") as f:
            rows = evaluator.parse_wnli_rows(f)
        accuracy, skipped = evaluator.evaluate_wnli(scorer, rows, shuffle_seed=args.seed)
    finally:
        _close_scorer(scorer)
    result = {"accuracy": accuracy, "total": len(rows), "skipped": [list(s) for s in skipped]}
    if args.out:
        atomic_write(args.out, lambda f: f.write(json.dumps(result) + "\n"))
        write_manifest(args.out, args, [args.tsv], scorer.vocab_digest)
    print(json.dumps(result))
    return EXIT_OK


def cmd_audit_sample(args):
    examples = list(generator.read_dataset(args.dataset))
    sample = filtering.audit_sample(examples, args.n, args.seed)
    atomic_write(args.out, lambda f: [f.write(ex.to_json() + "\n") for ex in sample])
    write_manifest(args.out, args, [args.dataset])
    print("sampled %d examples" % len(sample))
    return EXIT_OK


def cmd_audit_tally(args):
    with open(args.labels, encoding="utf-8") as f:
        tally = filtering.tally_audit(f)
    out = {"counts": tally.counts, "sample_size": tally.sample_size, "percentages": tally.percentages()}
    print(json.dumps(out))
    return EXIT_OK


def cmd_serve_baseline(args):
    vocab = _load_vocab(args)
    records = _load_records(args.corpus, args.format)
    scorer = scoring.fit_baseline_scorer(records, vocab, args.smoothing)
    if args.tcp_port is not None:
        import socket

        srv = socket.create_server(("127.0.0.1", args.tcp_port))
        print("listening on %d" % srv.getsockname()[1], flush=True)
        conn, _ = srv.accept()
        with conn, conn.makefile("r", encoding="utf-8") as rf, conn.makefile("w", encoding="utf-8") as wf:
            protocol.serve(scorer, rf, wf)
    else:
        protocol.serve(scorer, sys.stdin, sys.stdout)
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="winomine", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("generate", help="mine masked examples from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", default="pretagged", choices=["plain", "pretagged"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("downsample", help="seeded uniform Bernoulli thinning")
    p.add_argument("--dataset", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("split-pairs", help="halve a paired dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", required=True, choices=["no_pairs", "half_pairs"])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split_pairs)

    p = sub.add_parser("dedup", help="remove train examples that reappear in eval")
    p.add_argument("--train", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("filter", help="difficulty-band filter")
    _add_scorer_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--v-min", type=float, default=-0.075)
    p.add_argument("--v-max", type=float, default=0.30)
    p.add_argument("--min-whole-word-frac", type=float, default=0.90)
    p.add_argument("--pair-mode", default="all", choices=["all", "any"])
    p.add_argument("--whole-word-scope", default="sentence", choices=["sentence", "candidates"])
    p.add_argument("--whole-word-denominator", default="pieces", choices=["pieces", "words"])
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("score", help="score candidates and predict")
    _add_scorer_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval-wsc", help="subset metrics on an annotated dataset")
    _add_scorer_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--consistency-mode", default="flip", choices=["flip", "flip_correct"])
    p.add_argument("--name", default="model")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_wsc)

    p = sub.add_parser("eval-wnli", help="entailment accuracy via mask conversion")
    _add_scorer_flags(p)
    p.add_argument("--tsv", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_wnli)

    p = sub.add_parser("audit-sample", help="seeded sample for manual labeling")
    p.add_argument("--dataset", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit_sample)

    p = sub.add_parser("audit-tally", help="tally manual quality labels")
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_audit_tally)

    p = sub.add_parser("serve-baseline", help="serve the unigram scorer over the wire protocol")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", default="pretagged", choices=["plain", "pretagged"])
    p.add_argument("--vocab", required=True)
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--tcp-port", type=int, help="serve on TCP instead of stdio")
    p.set_defaults(func=cmd_serve_baseline)

    return parser


def _apply_config_file(argv):
    """--config FILE supplies defaults; explicit flags win."""
    if "--config" not in argv:
        return argv, None
    i = argv.index("--config")
    path = argv[i + 1]
    with open(path, encoding="utf-8") as f:
        cfg = json.load(f)
    argv = argv[:i] + argv[i + 2:]
    return argv, cfg


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv, cfg = _apply_config_file(argv)
        if cfg:
            extra = []
            present = set(argv)
            for key, value in cfg.items():
                flag = "--" + key.replace("_", "-")
                if flag not in present:
                    extra.extend([flag, str(value)])
            argv = argv + extra
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, generator.DatasetError, corpus.CorpusFormatError,
            evaluator.AnnotationError, wordpiece.VocabError, ValueError) as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    except scoring.ScorerError as exc:
        print("scorer error: %s" % exc, file=sys.stderr)
        return EXIT_SCORER


if __name__ == "__main__":
    sys.exit(main())
