"""Command-line interface for the chronotopics pipeline."""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from chronotopics.baselines import lda_fit, tot_fit
from chronotopics.config import RunConfig, coerce
from chronotopics.corpus import Corpus, run_pipeline
from chronotopics.errors import ChronotopicsError, ConfigError, ModelError
from chronotopics.metrics import activity_fit, coherence_report, sdt_report
from chronotopics.report import (
    format_coherence,
    format_fit_config,
    format_sdt_report,
    format_stats,
    format_summary,
    format_sweep_table,
)
from chronotopics.sampler import FitDiagnostics, NocConfig, Posterior, fit, run_chains
from chronotopics.store import (
    config_from_meta,
    load_corpus,
    load_model,
    load_topic_sizes,
    write_coherence,
    write_corpus,
    write_model,
    write_sdt,
    write_summaries,
    write_truth,
)
from chronotopics.summarizer import summarize
from chronotopics.synth import ModeStructure, SynthSpec, generate

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"
THREADS_ENV = "CHRONOTOPICS_THREADS"

Fitter = Callable[[Corpus, NocConfig], tuple[Posterior, FitDiagnostics]]
FITTERS: dict[str, Fitter] = {"noc": fit, "lda": lda_fit, "tot": tot_fit}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML file with run settings")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")

    model_opts = argparse.ArgumentParser(add_help=False)
    model_opts.add_argument("--model", choices=["noc", "lda", "tot"])
    model_opts.add_argument("--alpha", type=float)
    model_opts.add_argument("--beta", type=float)
    model_opts.add_argument("--psi-init", dest="psi_init", choices=["random", "activity"])
    model_opts.add_argument("--psi-smoothing", dest="psi_smoothing", type=float)
    model_opts.add_argument("--estimate", choices=["final", "average"])
    model_opts.add_argument("--seed", type=int)
    model_opts.add_argument("--sweeps", type=int)
    model_opts.add_argument("--burn-in", dest="burn_in", type=int)

    parser = argparse.ArgumentParser(
        prog="chronotopics",
        description="Topics with categorical time distributions over timestamped text.",
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    ingest_parser = subparsers.add_parser(
        "ingest", parents=[common], help="Build a corpus directory from JSON lines"
    )
    ingest_parser.add_argument("input", type=Path, help="JSON-lines file of records")
    ingest_parser.add_argument("out", type=Path, help="Corpus directory to write")
    ingest_parser.add_argument("--slice-days", dest="slice_width_days", type=int)
    ingest_parser.add_argument("--min-doc-tokens", dest="min_doc_tokens", type=int)
    ingest_parser.add_argument("--window-start", dest="window_start")
    ingest_parser.add_argument("--window-end", dest="window_end")
    ingest_parser.add_argument("--stopwords", dest="stopword_list", type=Path)
    ingest_parser.add_argument("--gazetteer", type=Path)
    ingest_parser.add_argument(
        "--no-entity-filter", dest="entity_filter", action="store_const", const=False
    )
    ingest_parser.add_argument(
        "--language-filter", dest="language_filter", action="store_const", const=True
    )
    ingest_parser.add_argument(
        "--strict",
        dest="on_error",
        action="store_const",
        const="raise",
        help="Fail on the first malformed record instead of skipping it",
    )

    synth_parser = subparsers.add_parser(
        "synth", parents=[common], help="Generate a synthetic corpus with known truth"
    )
    synth_parser.add_argument("out", type=Path, help="Corpus directory to write")
    synth_parser.add_argument("--topics", type=int, default=3)
    synth_parser.add_argument("--vocab", type=int, default=300)
    synth_parser.add_argument("--docs", type=int, default=600)
    synth_parser.add_argument("--tokens", type=int, default=40)
    synth_parser.add_argument("--slices", type=int, default=6)
    synth_parser.add_argument("--modes", type=int, default=1)
    synth_parser.add_argument("--mode-width", type=int, default=1)
    synth_parser.add_argument("--alpha", type=float, default=0.1)
    synth_parser.add_argument("--beta", type=float, default=0.1)
    synth_parser.add_argument("--markers", type=float, default=0.0)
    synth_parser.add_argument("--seed", type=int, default=0)

    train_parser = subparsers.add_parser(
        "train", parents=[common, model_opts], help="Fit a model on a corpus directory"
    )
    train_parser.add_argument("corpus", type=Path, help="Corpus directory")
    train_parser.add_argument("out", type=Path, help="Model directory to write")
    train_parser.add_argument("--topics", type=int)

    sweep_parser = subparsers.add_parser(
        "sweep", parents=[common, model_opts], help="Mean coherence for a range of topic counts"
    )
    sweep_parser.add_argument("corpus", type=Path, help="Corpus directory")
    sweep_parser.add_argument("--min-topics", type=int, default=4)
    sweep_parser.add_argument("--max-topics", type=int, default=20)
    sweep_parser.add_argument("--k-words", dest="k_words", type=int)
    sweep_parser.add_argument("--out", type=Path, help="Write the table as CSV here")

    eval_parser = subparsers.add_parser(
        "eval", parents=[common], help="Coherence and time-entropy scores of a model"
    )
    eval_parser.add_argument("corpus", type=Path, help="Corpus directory")
    eval_parser.add_argument("model_dir", type=Path, help="Model directory")
    eval_parser.add_argument("--k-words", dest="k_words", type=int)
    eval_parser.add_argument("--gammas", help="Comma separated, e.g. 0,0.4,0.7,1")
    eval_parser.add_argument("--out", type=Path, help="Directory for the CSV files")

    summarize_parser = subparsers.add_parser(
        "summarize", parents=[common], help="Time-ordered extractive summaries per topic"
    )
    summarize_parser.add_argument("corpus", type=Path, help="Corpus directory")
    summarize_parser.add_argument("model_dir", type=Path, help="Model directory")
    summarize_parser.add_argument("--docs-per-topic", dest="docs_per_topic", type=int)
    summarize_parser.add_argument("--sentences", dest="sentences_per_topic", type=int)
    summarize_parser.add_argument("--threshold", dest="similarity_threshold", type=float)
    summarize_parser.add_argument(
        "--length-normalize", dest="length_normalize", action="store_const", const=True
    )
    summarize_parser.add_argument("--seed", type=int)
    summarize_parser.add_argument("--out", type=Path, help="Directory for summary files")

    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file values, then command-line flags on top."""
    config = RunConfig.from_yaml(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        key: coerce(key, getattr(args, key))
        for key in RunConfig.keys()
        if getattr(args, key, None) is not None
    }
    config = config.with_overrides(**overrides)
    config.validate()
    return config


def thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError as e:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
    if cap < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1, got {cap}")
    return cap


def check_model_matches(posterior: Posterior, corpus: Corpus) -> None:
    if posterior.phi.shape[1] != corpus.V or posterior.theta.shape[0] != corpus.D:
        raise ModelError(
            f"Model ({posterior.theta.shape[0]} docs, V={posterior.phi.shape[1]}) does not "
            f"match corpus ({corpus.D} docs, V={corpus.V})"
        )
    if posterior.psi is not None and posterior.psi.shape[1] != corpus.K:
        raise ModelError(f"Model has {posterior.psi.shape[1]} time categories, corpus {corpus.K}")


def cmd_ingest(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    corpus, stats = run_pipeline(
        args.input,
        config.ingest_config(),
        config.clean_config(),
        slice_width_days=config.slice_width_days,
        min_doc_tokens=config.min_doc_tokens,
    )
    write_corpus(corpus, args.out)
    print(format_stats(stats))
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        T=args.topics,
        V=args.vocab,
        D=args.docs,
        tokens_per_doc=args.tokens,
        alpha=args.alpha,
        beta=args.beta,
        K=args.slices,
        mode_structure=ModeStructure(modes=args.modes, width=args.mode_width),
        marker_fraction=args.markers,
        seed=args.seed,
    )
    corpus, truth = generate(spec)
    write_corpus(corpus, args.out)
    write_truth(truth, args.out)
    print(f"docs={corpus.D} V={corpus.V} K={corpus.K} tokens={corpus.num_tokens}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    corpus = load_corpus(args.corpus)
    noc_config = config.noc_config()
    posterior, diagnostics = FITTERS[config.model](corpus, noc_config)
    write_model(posterior, diagnostics, noc_config, corpus, args.out)

    print(
        f"model={posterior.model} T={posterior.T} sweeps={noc_config.sweeps} "
        f"log_joint={diagnostics.log_joint[-1]:.4f}"
    )
    for z in range(posterior.T):
        words = [corpus.vocabulary.term(int(v)) for v in posterior.top_words(z, 10)]
        print(f"  topic {z}: {' '.join(words)}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.min_topics > args.max_topics:
        raise ConfigError(f"Empty topic range {args.min_topics}..{args.max_topics}")
    if args.min_topics < 2:
        raise ConfigError(f"Topic counts start at 2, got {args.min_topics}")
    config = load_run_config(args)
    corpus = load_corpus(args.corpus)
    counts = list(range(args.min_topics, args.max_topics + 1))
    configs = [config.noc_config(topics=T) for T in counts]
    workers = min(len(configs), thread_cap())
    logger.info("sweeping T=%d..%d with %d workers", counts[0], counts[-1], workers)

    fitted = run_chains(corpus, configs, fitter=FITTERS[config.model], workers=workers)
    rows = [
        (T, coherence_report(posterior, corpus, config.k_words).mean)
        for T, (posterior, _) in zip(counts, fitted)
    ]
    selected = counts[int(np.argmax([score for _, score in rows]))]
    print(format_sweep_table(rows, selected))
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        lines = ["topics,coherence"] + [f"{T},{score:.9g}" for T, score in rows]
        args.out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    corpus = load_corpus(args.corpus)
    posterior, meta = load_model(args.model_dir)
    check_model_matches(posterior, corpus)
    out = args.out or args.model_dir
    print(format_fit_config(posterior.model, config_from_meta(meta)))
    out.mkdir(parents=True, exist_ok=True)
    metrics = config.metrics_config()

    coherence = coherence_report(posterior, corpus, metrics.k_words)
    write_coherence(coherence, out)
    print(format_coherence(coherence))

    if posterior.psi is None:
        logger.warning("%s model has no time distributions; skipping SDT", posterior.model)
        return 0
    sdt = sdt_report(posterior.psi, metrics.gammas)
    write_sdt(sdt, out)
    print(format_sdt_report(sdt))

    sizes = load_topic_sizes(args.model_dir, posterior.T)
    if sizes is not None:
        fit_tv = activity_fit(posterior.psi, sizes, corpus.category_histogram())
        print(f"activity_fit_tv={fit_tv:.4f}")
    return 0


def cmd_summarize(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    corpus = load_corpus(args.corpus)
    posterior, meta = load_model(args.model_dir)
    check_model_matches(posterior, corpus)
    logger.info("summarizing %s", format_fit_config(posterior.model, config_from_meta(meta)))
    summaries = summarize(posterior, corpus, config.summary_config())
    write_summaries(summaries, args.out or args.model_dir)
    for summary in summaries:
        print(format_summary(summary))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 0

    configure_logging(args.verbose, args.quiet)
    commands = {
        "ingest": cmd_ingest,
        "synth": cmd_synth,
        "train": cmd_train,
        "sweep": cmd_sweep,
        "eval": cmd_eval,
        "summarize": cmd_summarize,
    }

    handler = commands.get(args.command)
    if not handler:
        parser.print_help()
        return 0
    try:
        return handler(args)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except ChronotopicsError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
