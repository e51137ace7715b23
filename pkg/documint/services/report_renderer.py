"""
レポート描画

RunScore の一覧または ComparisonReport を Markdown 表か CSV に変換する。
値の表示桁は accuracy / conciseness が小数3桁、clarity が小数2桁（偶数丸め）。
各列の最良値（表示後の値で最大のもの、同値はすべて）を Markdown では太字、CSV では best 列で示す。
"""
import csv
import io
import logging
from collections.abc import Sequence
from decimal import Decimal, ROUND_HALF_EVEN
from enum import Enum

from documint.exceptions import EmptyRun
from documint.models.bench import ComparisonReport, MetricDeltas, RunScore

logger = logging.getLogger(__name__)

COLUMNS = ("accuracy", "conciseness", "clarity")
COLUMN_TITLES = {"accuracy": "Accuracy", "conciseness": "Conciseness", "clarity": "Clarity"}
PRECISION = {
    "accuracy": Decimal("0.001"),
    "conciseness": Decimal("0.001"),
    "clarity": Decimal("0.01"),
}
DELTA_LABEL = "delta"


class ReportFormat(str, Enum):
    MARKDOWN = "md"
    CSV = "csv"


def format_value(value: float, column: str) -> Decimal:
    """最短表現の10進数から偶数丸めで表示桁にそろえる"""
    return Decimal(repr(float(value))).quantize(PRECISION[column], rounding=ROUND_HALF_EVEN)


def _printed_rows(scores: Sequence[RunScore]) -> list[dict[str, Decimal]]:
    return [
        {column: format_value(getattr(s.aggregate, column), column) for column in COLUMNS}
        for s in scores
    ]


def best_cells(rows: Sequence[dict[str, Decimal]]) -> list[set[str]]:
    """行ごとに、その列で最大の表示値を持つ列名の集合を返す"""
    best = {column: max(row[column] for row in rows) for column in COLUMNS}
    return [{column for column in COLUMNS if row[column] == best[column]} for row in rows]


def _band_move(band_from: Enum, band_to: Enum) -> str:
    if band_from == band_to:
        return ""
    return f" ({band_from.value} -> {band_to.value})"


def delta_cells(deltas: MetricDeltas) -> dict[str, str]:
    clarity_diff = format_value(deltas.clarity_diff, "clarity")
    if clarity_diff == 0:
        clarity_diff = abs(clarity_diff)
    return {
        "accuracy": f"{deltas.accuracy_pct:+}%",
        "conciseness": (
            f"{deltas.conciseness_pct:+}%"
            + _band_move(deltas.conciseness_band_from, deltas.conciseness_band_to)
        ),
        "clarity": f"{clarity_diff:+}" + _band_move(deltas.clarity_band_from, deltas.clarity_band_to),
    }


def _escape_markdown(text: str) -> str:
    return text.replace("|", "\\|")


def _render_markdown(scores: Sequence[RunScore], deltas: MetricDeltas | None) -> str:
    rows = _printed_rows(scores)
    flags = best_cells(rows)
    lines = [
        "| Model | " + " | ".join(COLUMN_TITLES[c] for c in COLUMNS) + " |",
        "|---|" + "---:|" * len(COLUMNS),
    ]
    for score, row, best in zip(scores, rows, flags):
        cells = [f"**{row[c]}**" if c in best else str(row[c]) for c in COLUMNS]
        lines.append(f"| {_escape_markdown(score.model_id)} | " + " | ".join(cells) + " |")
    if deltas is not None:
        cells = delta_cells(deltas)
        lines.append(f"| {DELTA_LABEL} | " + " | ".join(cells[c] for c in COLUMNS) + " |")
    return "\n".join(lines) + "\n"


def _render_csv(scores: Sequence[RunScore], deltas: MetricDeltas | None) -> str:
    rows = _printed_rows(scores)
    flags = best_cells(rows)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["model", *COLUMNS, "best"])
    for score, row, best in zip(scores, rows, flags):
        writer.writerow([
            score.model_id,
            *(str(row[c]) for c in COLUMNS),
            ";".join(c for c in COLUMNS if c in best),
        ])
    if deltas is not None:
        cells = delta_cells(deltas)
        writer.writerow([DELTA_LABEL, *(cells[c] for c in COLUMNS), ""])
    return buffer.getvalue()


def render_report(
    scores: Sequence[RunScore] | ComparisonReport,
    fmt: ReportFormat | str = ReportFormat.MARKDOWN,
) -> str:
    """
    スコアを表として描画する（行の順序は入力順）

    ComparisonReport の場合は base、tuned の2行に続けて差分行を加える。

    Raises:
        EmptyRun: 描画するスコアが1件も無い場合
    """
    report_format = ReportFormat(fmt)
    if isinstance(scores, ComparisonReport):
        runs: Sequence[RunScore] = [scores.base, scores.tuned]
        deltas = scores.deltas
    else:
        runs, deltas = scores, None
    if not runs:
        raise EmptyRun("nothing to render: no run scores given")

    logger.debug(f"Rendering {len(runs)} run(s) as {report_format.value}")
    if report_format is ReportFormat.CSV:
        return _render_csv(runs, deltas)
    return _render_markdown(runs, deltas)
