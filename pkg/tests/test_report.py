"""Tests for plot-ready reports"""

import json

import pytest
import yaml

from aelpn.errors import NumericalError
from aelpn.report import ROW_COLUMNS, Report, ReportRow, format_cell, read_csv, wide_report


def sweep_report():
    report = Report("noise-sweep", meta={"seed": 7})
    report.add(ReportRow("noise-sweep", "ae", "sigma", 0.1, "psnr", 28.5, 7))
    report.add(ReportRow("noise-sweep", "lpn", "sigma", 0.1, "psnr", 27.25, 7))
    return report


class TestReportRow:
    """Test long-format rows"""

    def test_columns(self):
        """Test the fixed column order"""
        assert ROW_COLUMNS == ("experiment", "model", "param_name", "param", "metric", "value", "seed")

    def test_non_finite_value(self):
        """Test NaN metrics are refused"""
        with pytest.raises(NumericalError):
            ReportRow("x", "m", "p", 0.0, "psnr", float("nan"), 0)


class TestFormatting:
    """Test cell formatting"""

    def test_cells(self):
        """Test reals keep 17 significant digits and missing values are empty"""
        assert format_cell(0.1) == "0.10000000000000001"
        assert format_cell(None) == ""
        assert format_cell(float("nan")) == ""
        assert format_cell(True) == "1"
        assert format_cell(3) == "3"

    def test_csv_text(self):
        """Test header line, LF endings and row order"""
        text = sweep_report().to_csv()
        lines = text.split("\n")
        assert lines[0] == ",".join(ROW_COLUMNS)
        assert lines[1] == "noise-sweep,ae,sigma,0.10000000000000001,psnr,28.5,7"
        assert text.endswith("\n") and "\r" not in text

    def test_quoting(self):
        """Test commas inside cells are quoted"""
        report = wide_report("w", ("label",))
        report.add_values(label="a,b")
        assert report.to_csv() == 'label\n"a,b"\n'

    def test_quote_characters_doubled(self):
        """Test embedded quotes are doubled and newlines quoted"""
        report = wide_report("w", ("label", "value"))
        report.add_values(label='say "hi"', value=1.0)
        report.add_values(label="two\nlines", value=2.0)
        text = report.to_csv()
        assert text.startswith('label,value\n"say ""hi""",1\n')
        assert text.endswith('"two\nlines",2\n')
        assert "\r" not in text


class TestReport:
    """Test report tables and files"""

    def test_select(self):
        """Test filtering records by cell values"""
        assert [r["value"] for r in sweep_report().select(model="lpn")] == [27.25]

    def test_column(self):
        """Test reading a column"""
        assert sweep_report().column("model") == ["ae", "lpn"]

    def test_wide_rows(self):
        """Test wide tables leave unspecified cells empty"""
        report = wide_report("split", ("x", "learned_prox", "oracle_prox"))
        report.add_values(x=0.5, oracle_prox=0.25)
        assert report.rows == [[0.5, None, 0.25]]

    def test_wide_rejects_unknown_column(self):
        """Test unknown columns are rejected"""
        with pytest.raises(ValueError):
            wide_report("split", ("x",)).add_values(y=1.0)

    def test_add_needs_long_format(self):
        """Test add() refuses wide tables"""
        with pytest.raises(ValueError):
            wide_report("split", ("x",)).add(ReportRow("e", "m", "p", 0.0, "v", 1.0, 0))

    def test_write_files(self, tmp_path):
        """Test CSV, JSON mirror and sidecar are written"""
        path = sweep_report().write(tmp_path, json_mirror=True)
        assert path == tmp_path / "noise-sweep.csv"
        records = read_csv(path)
        assert records[1]["model"] == "lpn"
        assert float(records[1]["value"]) == 27.25
        mirror = json.loads((tmp_path / "noise-sweep.json").read_text())
        assert mirror["columns"] == list(ROW_COLUMNS)
        assert mirror["rows"][0]["value"] == 28.5
        assert yaml.safe_load((tmp_path / "noise-sweep.meta.yaml").read_text()) == {"seed": 7}

    def test_json_null_for_missing(self, tmp_path):
        """Test missing and NaN cells become null in the mirror"""
        report = wide_report("w", ("x", "y"))
        report.add_values(x=float("nan"))
        report.write(tmp_path, json_mirror=True, sidecar=False)
        mirror = json.loads((tmp_path / "w.json").read_text())
        assert mirror["rows"] == [{"x": None, "y": None}]
        assert not (tmp_path / "w.meta.yaml").exists()

    def test_stable_output(self, tmp_path):
        """Test writing twice gives identical bytes"""
        sweep_report().write(tmp_path / "a")
        sweep_report().write(tmp_path / "b")
        assert (tmp_path / "a" / "noise-sweep.csv").read_bytes() == (
            tmp_path / "b" / "noise-sweep.csv"
        ).read_bytes()
