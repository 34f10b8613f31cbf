"""Unit tests for metric report rendering."""

import pytest

from xmodal.core.exceptions import MetricError
from xmodal.core.metrics import evaluate
from xmodal.core.references import BASELINE, reference
from xmodal.core.report import TSV_HEADER, parse_report_tsv, render_report
from xmodal.schemas.metrics import MetricConfig, MetricReport, ReportScale
from xmodal.schemas.retrieval import Direction


def _report(direction="i2t", scale=ReportScale.UNIT, excluded=True) -> MetricReport:
    return MetricReport(
        direction=direction,
        n_queries=4,
        recall={1: 50.0, 5: 100.0},
        semantic_map={1: 0.792, 5: 0.716},
        semantic_map_excluded={1: 0.5, 5: 0.25} if excluded else None,
        scale=scale,
    )


def test_empty_reports():
    assert render_report([], "tsv") == TSV_HEADER + "\n"
    assert render_report([], "aligned_table") == "no metrics\n"


def test_tsv_rows_and_parse_back():
    text = render_report([_report(), _report("t2i", excluded=False)], "tsv")
    lines = text.splitlines()
    assert lines[0] == TSV_HEADER
    assert "i2t\tlambda\t1\t0.792000" in lines
    assert "i2t\tlambda_excl\t5\t0.250000" in lines
    assert not any(line.startswith("t2i\tlambda_excl") for line in lines)

    rows = parse_report_tsv(text)
    assert len(rows) == len(lines) - 1
    assert {round(r.value, 2) for r in rows if r.metric == "lambda"} == {0.79, 0.72}


def test_rendering_is_deterministic(caption_set):
    cfg = MetricConfig(ks=(1, 2), exclude_pairs=False)
    reports = list(evaluate(caption_set, cfg).values())
    for style in ("tsv", "aligned_table"):
        assert render_report(reports, style) == render_report(reports, style)


def test_aligned_table_layout():
    table = render_report([_report(), _report("t2i")], "aligned_table")
    lines = table.splitlines()
    assert lines[0].split() == ["metric", "i2t@1", "i2t@5", "t2i@1", "t2i@5"]
    assert set(lines[1]) == {"-"}
    assert lines[2].split() == ["queries", "4", "4", "4", "4"]
    assert "0.79" in table and "0.72" in table
    assert "λ@K excl. pairs" in table
    assert lines[-1] == "(λ in unit scale, R@K in percent)"
    assert len({len(line) for line in lines[:3]}) == 1


def test_percent_table_note():
    table = render_report([_report(scale=ReportScale.PERCENT)], "aligned_table")
    assert table.endswith("(λ in percent, R@K in percent)\n")
    assert "100.00" in table


def test_references_section():
    table = render_report(
        [_report(scale=ReportScale.PERCENT)], "aligned_table", references=True
    )
    assert "published COCO-1k references (percent)" in table
    assert f"λ@K {BASELINE}" in table
    assert "67.24" in table


def test_references_outside_published_ks():
    report = MetricReport(
        direction="i2t",
        n_queries=2,
        recall={1: 50.0, 2: 100.0},
        semantic_map={1: 80.0, 2: 70.0},
        scale=ReportScale.PERCENT,
    )
    table = render_report([report], "aligned_table", references=True)
    rows = [line for line in table.splitlines() if line.startswith(f"R@K {BASELINE}")]
    assert len(rows) == 1
    row = rows[0]
    assert row.split()[-2:] == ["50.10", "-"]


def test_reference_lookup():
    assert reference(BASELINE, "lambda", Direction.IMAGE_TO_TEXT, 1) == 67.24
    assert reference("single-stream cfg-3", "lambda", "i2t", 1) == 68.67
    with pytest.raises(KeyError):
        reference(BASELINE, "lambda", Direction.IMAGE_TO_TEXT, 2)
    with pytest.raises(KeyError):
        reference("nobody", "lambda", Direction.IMAGE_TO_TEXT, 1)


def test_render_report_errors():
    with pytest.raises(MetricError):
        render_report([_report(), _report("t2i", scale=ReportScale.PERCENT)])
    with pytest.raises(MetricError):
        render_report([_report()], "html")


@pytest.mark.parametrize(
    "text", ["", "direction\tmetric\n", f"{TSV_HEADER}\ni2t\tlambda\tone\t0.5\n"]
)
def test_parse_report_tsv_rejects_malformed_text(text):
    with pytest.raises(MetricError):
        parse_report_tsv(text)
