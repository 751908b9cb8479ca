import math

import pandas as pd
import pytest

from src.errors import BadHeaderError
from src.utils.report import PACE_REPORT_COLUMNS, PaceRecord, PaceReport, WorstCase


def sample_report():
    return PaceReport([
        PaceRecord(pace_index=1, lam=2.5, epsilon=0.001, selected_count=10, excluded_count=1,
                   train_mae=3.25, test_mae=2.5, test_cs={level: 10.0 * level for level in range(1, 11)},
                   seconds=0.5, worst_cases=[WorstCase(4, 30.0, 12.0, 18.0), WorstCase(9, 20.0, 25.0, 5.0)]),
        PaceRecord(pace_index=2, lam=math.inf, epsilon=0.001, selected_count=99, excluded_count=1,
                   train_mae=2.0, seconds=0.25),
    ])


def test_csv_header_is_exact(tmp_path):
    path = tmp_path / "report.csv"
    sample_report().write_csv(str(path))
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == ("pace_index,lambda,epsilon,selected_count,excluded_count,train_mae,test_mae,"
                      "cs_1,cs_2,cs_3,cs_4,cs_5,cs_6,cs_7,cs_8,cs_9,cs_10,seconds")


def test_csv_round_trip(tmp_path):
    path = str(tmp_path / "report.csv")
    sample_report().write_csv(path)
    report = PaceReport.read_csv(path)
    assert len(report) == 2
    assert report[0].lam == 2.5
    assert report[0].test_cs[7] == 70.0
    assert report[1].lam == math.inf
    assert math.isnan(report[1].test_mae)
    assert report[1].selected_count == 99


def test_read_rejects_foreign_csv(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(BadHeaderError):
        PaceReport.read_csv(str(path))


def test_format_table_lists_every_pace():
    table = sample_report().format_table()
    lines = table.splitlines()
    assert len(lines) == 3
    assert lines[0].split() == PACE_REPORT_COLUMNS


def test_worst_cases_csv(tmp_path):
    path = str(tmp_path / "worst.csv")
    sample_report().write_worst_cases(path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ['pace_index', 'rank', 'id', 'target', 'prediction', 'abs_error']
    assert frame['rank'].tolist() == [1, 2]
    assert frame['id'].tolist() == [4, 9]
