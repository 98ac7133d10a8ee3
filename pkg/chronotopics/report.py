"""Plain-text reports printed by the command line."""

from typing import Sequence

from chronotopics.corpus import CorpusStats
from chronotopics.metrics import CoherenceReport, SdtReport
from chronotopics.sampler import NocConfig
from chronotopics.summarizer import NarrativeSummary


def format_stats(stats: CorpusStats) -> str:
    return (
        f"records={stats.records_read} skipped={stats.records_skipped} "
        f"pseudo_docs={stats.pseudo_documents} dropped_language={stats.dropped_language} "
        f"dropped_entity={stats.dropped_entity} dropped_short={stats.dropped_short} "
        f"docs={stats.documents} V={stats.vocabulary} K={stats.time_categories}"
    )


def format_fit_config(model: str, config: NocConfig) -> str:
    return (
        f"fitted model={model} T={config.T} alpha={config.alpha:g} beta={config.beta:g} "
        f"sweeps={config.sweeps} burn_in={config.burn_in} seed={config.seed}"
    )


def format_sweep_table(rows: Sequence[tuple[int, float]], selected: int) -> str:
    """Mean coherence per topic count; the selected count is starred."""
    header = f"{'T':>4}  {'coherence':>12}"
    lines = [header, "-" * len(header)]
    for T, score in rows:
        marker = "  *" if T == selected else ""
        lines.append(f"{T:>4}  {score:>12.4f}{marker}")
    lines.append(f"selected T={selected}")
    return "\n".join(lines)


def format_coherence(report: CoherenceReport) -> str:
    lines = [f"PMI coherence over the top {report.k_words} words"]
    for z, score in enumerate(report.per_topic):
        lines.append(f"  topic {z:<3} {score:>10.4f}")
    lines.append(f"  mean      {report.mean:>10.4f}")
    return "\n".join(lines)


def format_sdt_report(report: SdtReport) -> str:
    gamma_headers = "".join(f"{'g=' + format(g, 'g'):>10}" for g in report.gammas)
    header = f"{'topic':<7}{'H':>10}{gamma_headers}"
    lines = [f"time entropy in bits, H_max={report.h_max:.4f}", header, "-" * len(header)]
    for z, h in enumerate(report.entropy):
        cells = "".join(f"{s:>10.2f}" for s in report.scores[z])
        lines.append(f"{z:<7}{h:>10.4f}{cells}")
    for i, g in enumerate(report.gammas):
        winners = ", ".join(str(z) for z in report.winners(i))
        lines.append(f"best at gamma={g:g}: topic {winners}")
    return "\n".join(lines)


def format_summary(summary: NarrativeSummary) -> str:
    lines = [
        f"{'=' * 60}",
        f"  Topic {summary.topic}: {', '.join(summary.keywords)}",
        f"{'=' * 60}",
    ]
    for entry in summary.entries:
        lines.append(f"  [{entry.timestamp:%Y-%m-%d}] {entry.text}")
    if summary.short:
        lines.append(
            f"  (only {len(summary.entries)} of {summary.requested} sentences available)"
        )
    return "\n".join(lines)
