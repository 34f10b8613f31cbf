"""Rendering of metric reports as TSV or as an aligned terminal table."""

import logging
from pathlib import Path
from typing import Sequence

from jinja2 import Environment, FileSystemLoader, select_autoescape
from pydantic import BaseModel, ConfigDict

from xmodal.core.exceptions import MetricError
from xmodal.core.references import REFERENCE_ROWS, reference
from xmodal.schemas.metrics import MetricReport, ReportScale
from xmodal.schemas.retrieval import Direction

logger = logging.getLogger(__name__)

TSV_HEADER = "direction\tmetric\tK\tvalue"

METRIC_LABELS = {
    "recall": "R@K",
    "lambda": "λ@K",
    "lambda_excl": "λ@K excl. pairs",
}

env = Environment(
    loader=FileSystemLoader(Path(__file__).resolve().parent.parent / "templates"),
    autoescape=select_autoescape(["html", "xml"]),
    trim_blocks=True,
    lstrip_blocks=True,
)


class ReportRow(BaseModel):
    direction: Direction
    metric: str
    k: int
    value: float

    model_config = ConfigDict(frozen=True)


def report_rows(report: MetricReport) -> list[ReportRow]:
    families = [("recall", report.recall), ("lambda", report.semantic_map)]
    if report.semantic_map_excluded is not None:
        families.append(("lambda_excl", report.semantic_map_excluded))
    return [
        ReportRow(direction=report.direction, metric=metric, k=k, value=value)
        for metric, values in families
        for k, value in values.items()
    ]


def _render_tsv(reports: Sequence[MetricReport]) -> str:
    lines = [TSV_HEADER]
    for report in reports:
        for row in report_rows(report):
            lines.append(f"{row.direction.value}\t{row.metric}\t{row.k}\t{row.value:.6f}")
    return "\n".join(lines) + "\n"


def _render_table(reports: Sequence[MetricReport], references: bool) -> str:
    columns = [(r.direction, k) for r in reports for k in r.ks]
    header = ["metric"] + [f"{d.value}@{k}" for d, k in columns]

    values: dict[tuple[str, Direction, int], float] = {}
    for report in reports:
        for row in report_rows(report):
            values[(row.metric, row.direction, row.k)] = row.value

    rows = [["queries"] + [str(r.n_queries) for r in reports for _ in r.ks]]
    for metric, label in METRIC_LABELS.items():
        if not any((metric, d, k) in values for d, k in columns):
            continue
        rows.append(
            [label]
            + [
                f"{values[(metric, d, k)]:.2f}" if (metric, d, k) in values else "-"
                for d, k in columns
            ]
        )

    reference_rows = []
    if references:
        for ref in REFERENCE_ROWS:
            cells = []
            for direction, k in columns:
                try:
                    cells.append(f"{reference(ref.label, ref.metric, direction, k):.2f}")
                except KeyError:
                    cells.append("-")
            reference_rows.append([f"{METRIC_LABELS[ref.metric]} {ref.label}"] + cells)

    all_rows = [header] + rows + reference_rows
    widths = [max(len(row[i]) for row in all_rows) for i in range(len(header))]
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    template = env.get_template("report_table.txt.j2")
    return template.render(
        header=header,
        rows=rows,
        references=reference_rows,
        widths=widths,
        rule=rule,
    )


def render_report(
    reports: Sequence[MetricReport], style: str = "tsv", references: bool = False
) -> str:
    """Render reports deterministically.

    Args:
        reports: One report per direction, in display order.
        style: ``"tsv"`` (machine readable) or ``"aligned_table"``.
        references: Append the published reference scores to the table.

    Raises:
        MetricError: Unknown style, or reports at mixed scales.
    """
    if len({r.scale for r in reports}) > 1:
        raise MetricError("cannot render reports at different scales together")
    if style == "tsv":
        return _render_tsv(reports)
    if style == "aligned_table":
        if not reports:
            return "no metrics\n"
        scale = reports[0].scale
        note = "λ in percent" if scale == ReportScale.PERCENT else "λ in unit scale"
        return f"{_render_table(reports, references)}({note}, R@K in percent)\n"
    raise MetricError(f"unknown report style '{style}'")


def parse_report_tsv(text: str) -> list[ReportRow]:
    """Parse the output of ``render_report(..., style="tsv")``.

    Raises:
        MetricError: Missing header or a malformed row.
    """
    lines = text.splitlines()
    if not lines or lines[0] != TSV_HEADER:
        raise MetricError("missing report header")
    rows = []
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        try:
            rows.append(
                ReportRow(
                    direction=Direction(fields[0]),
                    metric=fields[1],
                    k=int(fields[2]),
                    value=float(fields[3]),
                )
            )
        except (IndexError, ValueError) as e:
            raise MetricError(f"line {number}: malformed report row ({e})")
    return rows
