import logging

import numpy as np
import pytest

from nbfts.errors import DimensionError, InvalidInputError
from nbfts.panel import CountPanel, read_counts, read_offsets, write_counts, write_offsets


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_full_panel(tmp_path):
    rows = "".join(f"{y},{w},{y - 1940 + w}\n" for y in (1950, 1951) for w in (1, 2, 3))
    panel = read_counts(_write(tmp_path, "c.csv", "year,week,count\n" + rows))
    assert panel.shape == (2, 3)
    assert not panel.missing.any()
    assert panel.year_labels == [1950, 1951]
    assert panel.counts[1, 2] == 14


def test_blank_count_is_missing(tmp_path):
    panel = read_counts(_write(tmp_path, "c.csv", "year,week,count\n1950,4,2\n1950,5,\n"))
    assert panel.missing[0, 4] and not panel.missing[0, 3]
    # weeks never listed are missing too
    assert panel.missing[0, :3].all()


def test_duplicate_names_both_lines(tmp_path):
    path = _write(tmp_path, "c.csv", "year,week,count\n1950,1,2\n1950,2,3\n1950,1,4\n")
    with pytest.raises(InvalidInputError, match="lines 2 and 4"):
        read_counts(path)


@pytest.mark.parametrize("body", ["1950,1,-3\n", "1950,1,2.5\n", "1950,x,2\n", "1950,1\n", "1950,60,1\n"])
def test_bad_rows(tmp_path, body):
    with pytest.raises(InvalidInputError):
        read_counts(_write(tmp_path, "c.csv", "year,week,count\n" + body))


def test_bad_header(tmp_path):
    with pytest.raises(InvalidInputError, match="header"):
        read_counts(_write(tmp_path, "c.csv", "yr,wk,n\n1950,1,1\n"))


def test_week_53_folds_into_52(tmp_path):
    body = "".join(f"1950,{w},1\n" for w in range(1, 53)) + "1950,53,4\n"
    panel = read_counts(_write(tmp_path, "c.csv", "year,week,count\n" + body))
    assert panel.shape == (1, 52) and panel.counts[0, 51] == 5


def test_offsets_broadcast(tmp_path):
    body = "".join(f"{y},{w},1\n" for y in (1950, 1951) for w in range(1, 53))
    panel = read_counts(_write(tmp_path, "c.csv", "year,week,count\n" + body))
    panel = read_offsets(_write(tmp_path, "o.csv", "year,population\n1950,10000\n1951,12000\n"), panel)
    assert np.all(panel.offsets[0] == 10000) and np.all(panel.offsets[1] == 12000)


def test_absent_offsets_default_to_one(tmp_path, caplog):
    panel = read_counts(_write(tmp_path, "c.csv", "year,week,count\n1950,1,1\n1950,2,1\n"))
    with caplog.at_level(logging.INFO, logger="nbfts"):
        panel = read_offsets(None, panel)
    assert np.all(panel.offsets == 1.0)
    assert "unit offsets" in caplog.text


@pytest.mark.parametrize("pops", ["1950,0\n", "1950,-5\n", "1949,100\n"])
def test_bad_offsets(tmp_path, pops):
    panel = read_counts(_write(tmp_path, "c.csv", "year,week,count\n1950,1,1\n1950,2,1\n"))
    with pytest.raises(InvalidInputError):
        read_offsets(_write(tmp_path, "o.csv", "year,population\n" + pops), panel)


def test_round_trip(tmp_path):
    counts = np.array([[1, 0, 3], [4, 5, 6]])
    missing = np.array([[False, True, False], [False, False, False]])
    panel = CountPanel(counts, missing, np.array([[2.0] * 3, [3.5] * 3]), [2001, 2002])
    write_counts(panel, tmp_path / "c.csv")
    write_offsets(panel, tmp_path / "o.csv")
    back = read_offsets(tmp_path / "o.csv", read_counts(tmp_path / "c.csv"))
    np.testing.assert_array_equal(back.counts, panel.counts)
    np.testing.assert_array_equal(back.missing, panel.missing)
    np.testing.assert_array_equal(back.offsets, panel.offsets)


def test_panel_validation():
    with pytest.raises(DimensionError):
        CountPanel(np.zeros((2, 3)), np.zeros((2, 2), bool), np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        CountPanel(np.zeros((2, 3)), np.zeros((2, 3), bool), np.zeros((2, 3)))
    with pytest.raises(InvalidInputError):
        CountPanel(-np.ones((2, 3)), np.zeros((2, 3), bool), np.ones((2, 3)))
    p = CountPanel(np.full((2, 3), 9), np.eye(2, 3, dtype=bool), np.ones((2, 3)))
    assert p.counts[0, 0] == 0 and p.observed_values().size == 4
