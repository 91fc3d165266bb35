"""``factqa`` command line: ingest, synth, splits, train, classify, answer, evaluate, pipeline.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant failure.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import synth
from .answer import AnswerFrequencyTable, UnknownImageError, answer
from .classifier import QueryClassifier, QueryType, TrainingConfig, train
from .concepts import ingest_annotations
from .evaluation import SplitSpec, Taxonomy, evaluate, load_dataset, load_predictions, make_splits
from .kb import DataError, ingest_kb
from .pipeline import RunConfig, StageError, run_pipeline

log = logging.getLogger("factqa")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
OUT_DIR_ENV = "FACTQA_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path):
    """``key = value`` lines; ``#`` starts a comment. Returns a dict of strings."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def training_config(values, seed=None):
    """TrainingConfig from config keys (``epochs`` or ``train.epochs``)."""
    names = {f.name: f.type for f in fields(TrainingConfig)}
    picked = {}
    for key, value in values.items():
        name = key[len("train.") :] if key.startswith("train.") else key
        if name in names:
            picked[name] = value
    try:
        cfg = TrainingConfig.from_dict(picked)
        if seed is not None:
            cfg.seed = seed
        return cfg
    except ValueError as exc:
        raise UsageError(f"bad training config: {exc}") from None


def run_config(values, overrides):
    run_fields = {f.name for f in fields(RunConfig)} - {"training"}
    unknown = [k for k in values if k not in run_fields and not k.startswith("train.")]
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    merged = {k: v for k, v in values.items() if k in run_fields}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    casts = {"k": int, "n_splits": int, "seed": int, "strict": _bool}
    try:
        kwargs = {k: casts.get(k, str)(v) if isinstance(v, str) else v for k, v in merged.items()}
        seed = kwargs.get("seed")
        cfg = RunConfig(**kwargs, training=training_config(values))
        if seed is not None and "train.seed" not in values:
            cfg.training.seed = seed
        return cfg
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _out_dir(flag, fallback):
    return flag or os.environ.get(OUT_DIR_ENV) or fallback


def _print_json(obj):
    print(json.dumps(obj, indent=1, sort_keys=True))


# -- commands ---------------------------------------------------------------


def cmd_ingest(args):
    if not args.kb and not args.annotations:
        raise UsageError("ingest needs --kb and/or --annotations")
    out = {}
    if args.kb:
        store, rep = ingest_kb(args.kb, strict=args.strict)
        out["kb"] = {"facts": len(store), "ingested": rep.ingested, "skipped": rep.skipped, "errors": rep.errors}
    if args.annotations:
        anns, rep = ingest_annotations(args.annotations, strict=args.strict)
        out["annotations"] = {"images": len(anns), "ingested": rep.ingested, "skipped": rep.skipped, "errors": rep.errors}
    _print_json(out)


def cmd_synth(args):
    spec = synth.SyntheticSpec(
        images=args.images,
        questions_per_type=args.questions_per_type,
        facts_per_kind=args.facts_per_kind,
        seed=args.seed,
    )
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    paths = synth.write(synth.generate(spec), _out_dir(args.out, "synthetic"))
    _print_json({k: str(p) for k, p in paths.items()})


def cmd_splits(args):
    if args.annotations:
        anns, _ = ingest_annotations(args.annotations, strict=args.strict)
        ids = list(anns)
    elif args.data:
        rows, _ = load_dataset(args.data, strict=args.strict)
        ids = [qa.image_id for qa in rows]
    else:
        raise UsageError("splits needs --annotations or --data")
    spec = make_splits(ids, n=args.n, seed=args.seed)
    spec.save(args.out)
    _print_json({"splits": len(spec.splits), "train": len(spec.splits[0][0]), "test": len(spec.splits[0][1])})


def cmd_train(args):
    values = read_config(args.config) if args.config else {}
    cfg = training_config(values, seed=args.seed)
    if args.epochs is not None:
        cfg.epochs = args.epochs
    rows, _ = load_dataset(args.data, strict=args.strict)
    if args.splits:
        spec = SplitSpec.load(args.splits)
        if not 0 <= args.split < len(spec.splits):
            raise UsageError(f"--split must be in [0, {len(spec.splits) - 1}]")
        keep = set(spec.splits[args.split][0])
        rows = [qa for qa in rows if qa.image_id in keep]
    clf = train([(qa.question, qa.query_type) for qa in rows], cfg)
    clf.save(args.out)
    _print_json({"checkpoint": args.out, "questions": len(rows), "classes": len(clf.registry), "final_loss": clf.losses[-1]})


def cmd_classify(args):
    clf = QueryClassifier.load(args.ckpt)
    k = min(args.k, len(clf.registry))
    _print_json([
        {"rank": n + 1, "query_type": str(qt), "probability": p}
        for n, (qt, p) in enumerate(clf.predict_topk(args.question, k))
    ])


def cmd_answer(args):
    gt = None
    if args.gt_query_type:
        try:
            gt = QueryType.parse(args.gt_query_type)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    elif not args.ckpt:
        raise UsageError("answer needs --ckpt or --gt-query-type")
    store, _ = ingest_kb(args.kb, strict=args.strict)
    anns, _ = ingest_annotations(args.annotations, strict=args.strict)
    freq = AnswerFrequencyTable()
    if args.data:
        rows, _ = load_dataset(args.data, strict=args.strict)
        freq = AnswerFrequencyTable(qa.answer for qa in rows)
    clf = QueryClassifier.load(args.ckpt) if args.ckpt and gt is None else None
    res = answer(args.question, args.image, store, anns, freq, classifier=clf, k=args.k, gt_query_type=gt)
    _print_json(res.to_dict())


def cmd_evaluate(args):
    rows, _ = load_dataset(args.data, strict=args.strict)
    preds = load_predictions(args.pred)
    human = None
    if args.human:
        from .pipeline import _load_human

        human = _load_human(args.human)
    report = evaluate(preds, rows, Taxonomy.load(args.taxonomy), SplitSpec.load(args.splits), human)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.save(out / "report.json")
        (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    print(report.to_text(), end="")


def cmd_pipeline(args):
    values = read_config(args.config) if args.config else {}
    overrides = {
        "kb": args.kb,
        "annotations": args.annotations,
        "dataset": args.data,
        "taxonomy": args.taxonomy,
        "splits": args.splits,
        "checkpoint": args.ckpt,
        "human": args.human,
        "qq": args.qq,
        "k": args.k,
        "seed": args.seed,
        "strict": True if args.strict else None,
        "out_dir": _out_dir(args.out, None),
    }
    cfg = run_config(values, overrides)
    if args.epochs is not None:
        cfg.training.epochs = args.epochs
    result = run_pipeline(cfg)
    print(result.report.to_text(), end="")
    print(f"wrote {', '.join(str(p) for p in result.paths.values())}", file=sys.stderr)


def build_parser():
    p = _Parser(prog="factqa", description="Fact-based visual question answering over a commonsense KB.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="validate and count a fact file and/or annotation file")
    s.add_argument("--kb", help="JSON Lines fact file")
    s.add_argument("--annotations", help="JSON Lines image annotation file")
    s.add_argument("--strict", action="store_true", help="abort on the first malformed record")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synth", help="write a seeded synthetic KB, annotations, dataset and taxonomy")
    s.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./synthetic)")
    s.add_argument("--images", type=int, default=200, help="number of images")
    s.add_argument("--questions-per-type", type=int, default=13, help="questions per query type")
    s.add_argument("--facts-per-kind", type=int, default=80, help="background facts per predicate kind")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("splits", help="make seeded train/test image splits")
    s.add_argument("--annotations", help="take image ids from this annotation file")
    s.add_argument("--data", help="take image ids from this QA dataset")
    s.add_argument("--n", type=int, default=5, help="number of splits")
    s.add_argument("--seed", type=int, default=0, help="random seed")
    s.add_argument("--out", required=True, help="output JSON file")
    s.add_argument("--strict", action="store_true", help="abort on the first malformed record")
    s.set_defaults(func=cmd_splits)

    s = sub.add_parser("train", help="train the question -> query type classifier")
    s.add_argument("--data", required=True, help="QA dataset (JSON Lines)")
    s.add_argument("--config", help="key = value training config file")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--splits", help="train only on the training images of a split file")
    s.add_argument("--split", type=int, default=0, help="which split of --splits (default 0)")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--epochs", type=int, help="override the config epoch count")
    s.add_argument("--strict", action="store_true", help="abort on the first malformed record")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("classify", help="top-k query types for a question")
    s.add_argument("--ckpt", required=True, help="classifier checkpoint")
    s.add_argument("--question", required=True, help="question text")
    s.add_argument("-k", type=int, default=3, help="number of query types (default 3)")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("answer", help="answer one question about one image")
    s.add_argument("--ckpt", help="classifier checkpoint")
    s.add_argument("--kb", required=True, help="JSON Lines fact file")
    s.add_argument("--annotations", required=True, help="JSON Lines image annotation file")
    s.add_argument("--image", required=True, help="image id")
    s.add_argument("--question", required=True, help="question text")
    s.add_argument("-k", type=int, default=3, help="query types to try (default 3)")
    s.add_argument("--gt-query-type", help="use this query type, e.g. CapableOf,Object,Image")
    s.add_argument("--data", help="training QA dataset for answer frequencies")
    s.add_argument("--strict", action="store_true", help="abort on the first malformed record")
    s.set_defaults(func=cmd_answer)

    s = sub.add_parser("evaluate", help="score a predictions file")
    s.add_argument("--pred", required=True, help="predictions (JSON Lines)")
    s.add_argument("--data", required=True, help="QA dataset (JSON Lines)")
    s.add_argument("--splits", required=True, help="split file")
    s.add_argument("--taxonomy", required=True, help="taxonomy file (node<TAB>parent)")
    s.add_argument("--human", help="human answers (JSON Lines question_id, answer)")
    s.add_argument("--out", help="also write report.json and report.txt here")
    s.add_argument("--strict", action="store_true", help="abort on the first malformed record")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("pipeline", help="ingest, train, answer and evaluate over all splits")
    s.add_argument("--config", help="key = value run config file; flags override it")
    s.add_argument("--kb", help="JSON Lines fact file")
    s.add_argument("--annotations", help="JSON Lines image annotation file")
    s.add_argument("--data", help="QA dataset (JSON Lines)")
    s.add_argument("--taxonomy", help="taxonomy file")
    s.add_argument("--splits", help="split file (default: make splits from the annotations)")
    s.add_argument("--ckpt", help="use this classifier for every split instead of training")
    s.add_argument("--human", help="human answers (JSON Lines question_id, answer)")
    s.add_argument("--qq", choices=("gt", "predicted"), help="ground-truth or predicted query types")
    s.add_argument("-k", type=int, help="predicted query types to try")
    s.add_argument("--seed", type=int, help="seed for splits and training")
    s.add_argument("--epochs", type=int, help="override training epochs")
    s.add_argument("--strict", action="store_true", help="abort on the first malformed record")
    s.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or config out_dir)")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"factqa {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        if isinstance(exc.cause, AssertionError):
            print(f"factqa {args.command}: internal error in {exc.stage}: {exc.cause}", file=sys.stderr)
            return EXIT_INTERNAL
        print(f"factqa {args.command}: {exc.stage} failed: {exc.cause}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"factqa {args.command}: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, OSError, UnknownImageError, ValueError, KeyError, LookupError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"factqa {args.command}: {msg}", file=sys.stderr)
        return EXIT_DATA
    except AssertionError as exc:
        print(f"factqa {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
