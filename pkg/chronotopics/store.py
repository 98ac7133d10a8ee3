"""Corpus and model directories on disk.

Corpus directory: vocab.txt, docs.txt, sentences.txt, grid.meta.
Model directory: phi.csv, theta.csv, psi.csv (not for LDA), beta_params.csv
(TOT only), assignments.txt and fit.meta. Matrices are comma separated with
9 significant digits. Nothing time-dependent is written, so identical inputs
give byte-identical directories.
"""

import csv
import json
import logging
from dataclasses import asdict, fields
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from chronotopics.corpus import Corpus, Document, Sentence, TimeGrid, Vocabulary
from chronotopics.errors import CorpusError, ModelError
from chronotopics.metrics import CoherenceReport, SdtReport
from chronotopics.sampler import FitDiagnostics, NocConfig, Posterior
from chronotopics.summarizer import NarrativeSummary
from chronotopics.synth import GroundTruth

logger = logging.getLogger(__name__)

MATRIX_FORMAT = "%.9g"
ROW_ORDER = {
    "phi": "topic x word",
    "theta": "document x topic",
    "psi": "topic x time category",
    "beta_params": "topic x (a, b)",
}


def _flat(text: str) -> str:
    return " ".join(text.split())


def _ids(values: Sequence[int]) -> str:
    return " ".join(str(v) for v in values)


def _parse_ids(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split())


def write_meta(path: Path, entries: dict[str, object]) -> None:
    path.write_text("".join(f"{k}={v}\n" for k, v in entries.items()), encoding="utf-8")


def read_meta(path: Path) -> dict[str, str]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise CorpusError(f"Cannot read {path}: {e}") from e
    meta = {}
    for line in lines:
        if "=" in line:
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


def write_matrix(path: Path, matrix: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(matrix), fmt=MATRIX_FORMAT, delimiter=",")


def read_matrix(path: Path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as e:
        raise ModelError(f"Cannot read matrix {path}: {e}") from e


def _renormalize(matrix: np.ndarray) -> np.ndarray:
    # rows were rounded on write
    return matrix / matrix.sum(axis=1, keepdims=True)


def write_corpus(corpus: Corpus, directory: str | Path) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "vocab.txt").write_text(
        "".join(f"{term}\n" for term in corpus.vocabulary.terms), encoding="utf-8"
    )
    with open(out / "docs.txt", "w", encoding="utf-8") as f:
        for d in corpus.documents:
            f.write(
                f"{d.doc_id}\t{d.time_category}\t{d.timestamp.isoformat()}\t"
                f"{_flat(d.cascade_id)}\t{_ids(d.tokens)}\n"
            )
    with open(out / "sentences.txt", "w", encoding="utf-8") as f:
        for d in corpus.documents:
            for j, s in enumerate(d.sentences):
                f.write(
                    f"{d.doc_id}\t{j}\t{s.timestamp.isoformat()}\t{s.start}\t{s.end}\t"
                    f"{_ids(s.tokens)}\t{_flat(s.text)}\n"
                )
    write_meta(
        out / "grid.meta",
        {
            "origin": corpus.grid.origin.isoformat(),
            "slice_width_seconds": int(corpus.grid.slice_width.total_seconds()),
            "K": corpus.grid.K,
        },
    )
    logger.info("wrote corpus of %d documents to %s", corpus.D, out)
    return out


def load_corpus(directory: str | Path) -> Corpus:
    src = Path(directory)
    if not src.is_dir():
        raise CorpusError(f"Corpus directory {src} does not exist")
    meta = read_meta(src / "grid.meta")
    try:
        grid = TimeGrid(
            origin=datetime.fromisoformat(meta["origin"]),
            slice_width=timedelta(seconds=int(meta["slice_width_seconds"])),
            K=int(meta["K"]),
        )
        terms = tuple((src / "vocab.txt").read_text(encoding="utf-8").splitlines())
        sentences: dict[int, list[Sentence]] = {}
        with open(src / "sentences.txt", encoding="utf-8") as f:
            for line in f:
                doc_id, _, stamp, start, end, ids, text = line.rstrip("\n").split("\t", 6)
                sentences.setdefault(int(doc_id), []).append(
                    Sentence(
                        text=text,
                        start=int(start),
                        end=int(end),
                        timestamp=datetime.fromisoformat(stamp),
                        tokens=_parse_ids(ids),
                    )
                )
        documents = []
        with open(src / "docs.txt", encoding="utf-8") as f:
            for line in f:
                doc_id, k, stamp, cascade_id, ids = line.rstrip("\n").split("\t", 4)
                documents.append(
                    Document(
                        doc_id=int(doc_id),
                        tokens=_parse_ids(ids),
                        sentences=tuple(sentences.get(int(doc_id), ())),
                        timestamp=datetime.fromisoformat(stamp),
                        time_category=int(k),
                        cascade_id=cascade_id,
                    )
                )
    except (OSError, KeyError, ValueError) as e:
        raise CorpusError(f"Malformed corpus directory {src}: {e}") from e

    df = np.zeros(len(terms), dtype=np.int64)
    for d in documents:
        df[list(set(d.tokens))] += 1
    vocabulary = Vocabulary(terms=terms, doc_frequency=tuple(int(x) for x in df))
    if not documents:
        raise CorpusError(f"empty corpus in {src}")
    return Corpus(documents=tuple(documents), vocabulary=vocabulary, grid=grid)


def write_model(
    posterior: Posterior,
    diagnostics: FitDiagnostics,
    config: NocConfig,
    corpus: Corpus,
    directory: str | Path,
) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "phi.csv", posterior.phi)
    write_matrix(out / "theta.csv", posterior.theta)
    for name in ("psi", "beta_params"):
        path = out / f"{name}.csv"
        value = getattr(posterior, name)
        if value is not None:
            write_matrix(path, value)
        elif path.exists():
            path.unlink()

    if diagnostics.final_state is not None:
        z = diagnostics.final_state.z
        positions = np.arange(corpus.num_tokens) - np.repeat(
            np.cumsum(corpus.doc_lengths) - corpus.doc_lengths, corpus.doc_lengths
        )
        with open(out / "assignments.txt", "w", encoding="utf-8") as f:
            for d, i, t in zip(corpus.doc_of, positions, z):
                f.write(f"{d} {i} {t}\n")

    entries: dict[str, object] = {"model": posterior.model}
    entries.update(asdict(config))
    entries.update({f"rows.{name}": order for name, order in ROW_ORDER.items()})
    entries["D"], entries["V"], entries["K"] = corpus.D, corpus.V, corpus.K
    entries["log_joint"] = ",".join(f"{x:.9g}" for x in diagnostics.log_joint)
    write_meta(out / "fit.meta", entries)
    logger.info("wrote %s model with T=%d to %s", posterior.model, posterior.T, out)
    return out


def load_model(directory: str | Path) -> tuple[Posterior, dict[str, str]]:
    src = Path(directory)
    if not (src / "fit.meta").exists():
        raise ModelError(f"{src} is not a model directory (no fit.meta)")
    meta = read_meta(src / "fit.meta")
    optional = {
        name: read_matrix(src / f"{name}.csv") if (src / f"{name}.csv").exists() else None
        for name in ("psi", "beta_params")
    }
    psi = optional["psi"]
    posterior = Posterior(
        theta=_renormalize(read_matrix(src / "theta.csv")),
        phi=_renormalize(read_matrix(src / "phi.csv")),
        psi=None if psi is None else _renormalize(psi),
        beta_params=optional["beta_params"],
        model=meta.get("model", "noc"),
    )
    return posterior, meta


def load_topic_sizes(directory: str | Path, T: int) -> np.ndarray | None:
    """Token count per topic from assignments.txt, or None when absent."""
    path = Path(directory) / "assignments.txt"
    if not path.exists():
        return None
    topics = np.loadtxt(path, dtype=np.int64, ndmin=2)[:, 2]
    return np.bincount(topics, minlength=T)


def _meta_number(kind: type, key: str, raw: str) -> int | float:
    try:
        return kind(raw)
    except ValueError as e:
        raise ModelError(f"Malformed fit.meta value for {key}: {raw!r}") from e


def config_from_meta(meta: dict[str, str]) -> NocConfig:
    values: dict[str, object] = {}
    for f in fields(NocConfig):
        if f.name not in meta:
            continue
        raw = meta[f.name]
        if raw == "None":
            values[f.name] = None
        elif raw in ("True", "False"):
            values[f.name] = raw == "True"
        elif f.name in ("T", "sweeps", "burn_in", "seed"):
            values[f.name] = _meta_number(int, f.name, raw)
        elif f.name in ("alpha", "beta", "psi_smoothing"):
            values[f.name] = _meta_number(float, f.name, raw)
        else:
            values[f.name] = raw
    try:
        return NocConfig(**values)
    except TypeError as e:
        raise ModelError(f"Malformed fit.meta: {e}") from e


def write_truth(truth: GroundTruth, directory: str | Path) -> Path:
    out = Path(directory) / "truth"
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "theta.csv", truth.theta)
    write_matrix(out / "phi.csv", truth.phi)
    write_matrix(out / "psi.csv", truth.psi)
    (out / "z.txt").write_text("".join(f"{t}\n" for t in truth.z), encoding="utf-8")
    return out


def write_coherence(report: CoherenceReport, directory: str | Path) -> Path:
    path = Path(directory) / "coherence.csv"
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["topic", "coherence"])
        for z, score in enumerate(report.per_topic):
            writer.writerow([z, f"{score:.9g}"])
        writer.writerow(["mean", f"{report.mean:.9g}"])
    return path


def write_sdt(report: SdtReport, directory: str | Path) -> Path:
    path = Path(directory) / "sdt.csv"
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["topic", "entropy", "h_max"] + [f"sdt_{g:g}" for g in report.gammas])
        for z, h in enumerate(report.entropy):
            writer.writerow(
                [z, f"{h:.9g}", f"{report.h_max:.9g}"] + [f"{s:.9g}" for s in report.scores[z]]
            )
    return path


def write_summaries(summaries: Sequence[NarrativeSummary], directory: str | Path) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summaries.jsonl", "w", encoding="utf-8") as records:
        for summary in summaries:
            lines = [f"keywords: {', '.join(summary.keywords)}"]
            for entry in summary.entries:
                lines.append(f"{entry.timestamp.isoformat()}\t{_flat(entry.text)}")
                record = {
                    "topic": summary.topic,
                    "score": round(entry.score, 9),
                    "timestamp": entry.timestamp.isoformat(),
                    "doc_id": entry.doc_id,
                    "sentence_index": entry.index,
                    "text": entry.text,
                }
                records.write(json.dumps(record, sort_keys=True) + "\n")
            if summary.short:
                lines.append(f"# short: {len(summary.entries)} of {summary.requested} sentences")
            (out / f"summary_{summary.topic}.txt").write_text(
                "\n".join(lines) + "\n", encoding="utf-8"
            )
    return out
