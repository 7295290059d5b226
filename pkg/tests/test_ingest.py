import http.server
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occupant_personas import ingest
from occupant_personas.errors import (
    DataFormatError,
    HttpError,
    InputError,
    NetworkError,
    StorageError,
)
from occupant_personas.ingest import (
    AgeGroup,
    CleaningRules,
    Dataset,
    RawTable,
    bin_age,
    clean,
    fetch_recs,
    load_table,
    split,
)

# --- load_table ---------------------------------------------------------------


def test_load_table_fixture(fixture_csv):
    table = load_table(fixture_csv)
    assert table.n_rows == 200
    assert table.n_cols == 40
    assert table.column_names[0] == "EQUIPMUSE"


def test_load_table_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("A,B,C\n")
    table = load_table(path)
    assert table.n_rows == 0
    assert table.column_names == ("A", "B", "C")


def test_load_table_ragged_row_names_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("A,B,C\n1,2,3\n4,5\n")
    with pytest.raises(DataFormatError, match="row 1"):
        load_table(path)


def test_load_table_missing_file(tmp_path):
    with pytest.raises(DataFormatError, match="no such file"):
        load_table(tmp_path / "nope.csv")


def test_raw_table_rejects_duplicate_columns():
    with pytest.raises(DataFormatError, match="duplicate"):
        RawTable(("A", "A"), (("1", "2"),))


def test_raw_table_rejects_empty_header_name():
    with pytest.raises(DataFormatError, match="empty column name"):
        RawTable(("A", ""), ())


# --- clean --------------------------------------------------------------------


def _table(columns, rows):
    return RawTable(tuple(columns), tuple(tuple(r) for r in rows))


def test_clean_sentinel_substitution():
    table = _table(["A", "B", "C"], [["", "inf", "42.0"], ["7", "-1", "0.5"]])
    ds = clean(table, CleaningRules())
    assert ds.matrix[0, 0] == -1.0
    assert ds.matrix[0, 1] == 2147483647.0
    assert ds.matrix[0, 2] == 42.0
    assert ds.matrix[1].tolist() == [7.0, -1.0, 0.5]


def test_clean_preserves_shape(cleaned_fixture):
    assert cleaned_fixture.n_rows == 200
    assert cleaned_fixture.n_cols == 40


def test_clean_leaves_no_nonfinite_or_blank(cleaned_fixture):
    assert np.isfinite(cleaned_fixture.matrix).all()


def test_clean_parse_error_reports_row_and_column():
    table = _table(["A", "B"], [["1", "2"], ["x?", "3"]])
    with pytest.raises(DataFormatError, match=r"row 1.*'A'"):
        clean(table, CleaningRules())


def test_clean_textual_nan_becomes_missing():
    table = _table(["A"], [["NaN"], ["1e999"]])
    ds = clean(table, CleaningRules())
    assert ds.matrix[0, 0] == -1.0
    assert ds.matrix[1, 0] == 2147483647.0  # overflow parses to inf


def test_clean_bins_age_column():
    table = _table(["HHAGE", "X"], [["77", "1"], ["30", "2"], ["18", "3"], ["", "4"]])
    ds = clean(table, CleaningRules())
    assert ds.column("HHAGE").tolist() == [4.0, 1.0, 1.0, -1.0]
    assert ds.provenance["age_raw"] == [77.0, 30.0, 18.0, -1.0]


def test_clean_rejects_out_of_range_age():
    table = _table(["HHAGE"], [["140"]])
    with pytest.raises(DataFormatError, match="age"):
        clean(table, CleaningRules())


def test_fixture_age_column_is_five_group_ordinal(cleaned_fixture):
    ages = cleaned_fixture.column("HHAGE")
    assert set(np.unique(ages)) <= {0.0, 1.0, 2.0, 3.0, 4.0}


# --- text-coded columns ----------------------------------------------------------


def test_encode_text_columns_codes_all_text_column():
    table = _table(["METRO", "N"], [["METRO", "1"], ["NONE", "2"], ["MICRO", "3"], ["", "4"]])
    encoded, encodings = ingest.encode_text_columns(table)
    # sorted distinct values -> 1-based codes; the blank stays a missing cell
    assert encodings == {"METRO": {"METRO": 1, "MICRO": 2, "NONE": 3}}
    ds = clean(encoded, CleaningRules())
    assert ds.column("METRO").tolist() == [1.0, 3.0, 2.0, -1.0]
    assert ds.column("N").tolist() == [1.0, 2.0, 3.0, 4.0]


def test_encode_text_columns_leaves_mixed_column_for_clean_to_reject():
    table = _table(["A"], [["1"], ["oops"]])
    encoded, encodings = ingest.encode_text_columns(table)
    assert encodings == {}
    with pytest.raises(DataFormatError, match="oops"):
        clean(encoded, CleaningRules())


def test_encode_text_columns_is_deterministic():
    table = _table(["C"], [["b"], ["a"], ["c"], ["a"]])
    _, enc1 = ingest.encode_text_columns(table)
    _, enc2 = ingest.encode_text_columns(table)
    assert enc1 == enc2 == {"C": {"a": 1, "b": 2, "c": 3}}


# --- bin_age -------------------------------------------------------------------


@pytest.mark.parametrize(
    "years,group",
    [
        (0, AgeGroup.CHILDREN),
        (12, AgeGroup.CHILDREN),
        (13, AgeGroup.YOUNG_ADULT),
        (30, AgeGroup.YOUNG_ADULT),
        (31, AgeGroup.MIDDLE_ADULT),
        (50, AgeGroup.MIDDLE_ADULT),
        (51, AgeGroup.SENIOR_ADULT),
        (70, AgeGroup.SENIOR_ADULT),
        (71, AgeGroup.SENIOR),
        (77, AgeGroup.SENIOR),
        (110, AgeGroup.SENIOR),
    ],
)
def test_bin_age_boundaries(years, group):
    assert bin_age(years) is group


@pytest.mark.parametrize("years", [-1, 111, 1000])
def test_bin_age_out_of_range(years):
    with pytest.raises(InputError):
        bin_age(years)


def test_bin_age_rejects_fractional():
    with pytest.raises(InputError):
        bin_age(12.5)


@given(a=st.integers(0, 110), b=st.integers(0, 110))
def test_bin_age_monotone(a, b):
    if a <= b:
        assert bin_age(a) <= bin_age(b)


def test_cleaning_rules_validate_bins():
    with pytest.raises(InputError):
        CleaningRules(age_bins=((0, 12, AgeGroup.CHILDREN), (14, 110, AgeGroup.SENIOR)))


def test_cleaning_rules_digest_tracks_content():
    base = CleaningRules()
    assert base.digest() == CleaningRules().digest()
    assert base.digest() != CleaningRules(missing_sentinel=-99).digest()


# --- split ---------------------------------------------------------------------


def _numbered_dataset(n):
    return Dataset(("ID",), np.arange(n, dtype=np.float64).reshape(-1, 1))


def test_split_sizes_survey_scale():
    train, test = split(_numbered_dataset(5686), 0.8, seed=1)
    assert (train.n_rows, test.n_rows) == (4548, 1138)


def test_split_sizes_small():
    train, test = split(_numbered_dataset(10), 0.8, seed=1)
    assert (train.n_rows, test.n_rows) == (8, 2)


def test_split_deterministic():
    a1, b1 = split(_numbered_dataset(100), 0.8, seed=42)
    a2, b2 = split(_numbered_dataset(100), 0.8, seed=42)
    assert np.array_equal(a1.matrix, a2.matrix)
    assert np.array_equal(b1.matrix, b2.matrix)


def test_split_degenerate_fraction():
    # floor(0.01 * 3) = 0 leaves the training side empty
    with pytest.raises(InputError):
        split(_numbered_dataset(3), 0.01, seed=0)


@given(
    n=st.integers(2, 400),
    frac=st.floats(0.05, 0.95),
    seed=st.integers(0, 2**31 - 1),
)
@settings(max_examples=60)
def test_split_is_a_partition(n, frac, seed):
    import math

    n_train = int(math.floor(frac * n + 1e-9))
    if n_train in (0, n):
        return
    train, test = split(_numbered_dataset(n), frac, seed)
    ids = np.concatenate([train.column("ID"), test.column("ID")])
    assert train.n_rows == n_train
    assert sorted(ids.tolist()) == list(range(n))


# --- dataset persistence ---------------------------------------------------------


def test_dataset_csv_round_trip(tmp_path, cleaned_fixture):
    path = tmp_path / "ds.csv"
    cleaned_fixture.save_csv(path)
    loaded = Dataset.load_csv(path)
    assert loaded.columns == cleaned_fixture.columns
    assert np.array_equal(loaded.matrix, cleaned_fixture.matrix)
    assert loaded.provenance == cleaned_fixture.provenance


def test_dataset_load_csv_rejects_ragged_and_text(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("A,B\n1.0,2.0\n3.0\n")
    with pytest.raises(DataFormatError, match="row 1"):
        Dataset.load_csv(ragged)
    texty = tmp_path / "texty.csv"
    texty.write_text("A\nhello\n")
    with pytest.raises(DataFormatError, match="row 0"):
        Dataset.load_csv(texty)


def test_dataset_rejects_nonfinite():
    with pytest.raises(DataFormatError):
        Dataset(("A",), np.array([[np.nan]]))


def test_dataset_matrix_is_immutable(cleaned_fixture):
    with pytest.raises(ValueError):
        cleaned_fixture.matrix[0, 0] = 99.0


# --- fetch ------------------------------------------------------------------------


class _Handler(http.server.BaseHTTPRequestHandler):
    payload = b"A,B\n1,2\n3,4\n"

    def do_GET(self):
        if self.path == "/ok.csv":
            self.send_response(200)
            self.send_header("Content-Length", str(len(self.payload)))
            self.end_headers()
            self.wfile.write(self.payload)
        else:
            self.send_response(404)
            self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture()
def http_server():
    server = http.server.HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_fetch_downloads_file(http_server, tmp_path):
    dest = tmp_path / "data.csv"
    path = fetch_recs(f"{http_server}/ok.csv", dest)
    assert path == dest
    assert load_table(path).n_rows == 2


def test_fetch_existing_dest_skips_network(tmp_path):
    dest = tmp_path / "cached.csv"
    dest.write_text("A\n1\n")
    # host does not resolve; returning without touching the network is the point
    path = fetch_recs("https://no-such-host.invalid/x.csv", dest, overwrite=False)
    assert path == dest
    assert dest.read_text() == "A\n1\n"


def test_fetch_malformed_url(tmp_path):
    with pytest.raises(InputError):
        fetch_recs("not-a-url", tmp_path / "x.csv")
    assert not (tmp_path / "x.csv").exists()


def test_fetch_http_error(http_server, tmp_path):
    with pytest.raises(HttpError) as err:
        fetch_recs(f"{http_server}/missing.csv", tmp_path / "x.csv")
    assert err.value.status_code == 404


def test_fetch_network_error(tmp_path):
    with pytest.raises(NetworkError):
        fetch_recs("http://127.0.0.1:9/void.csv", tmp_path / "x.csv")


def test_fetch_storage_error(http_server, tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("file, not a directory")
    with pytest.raises(StorageError):
        fetch_recs(f"{http_server}/ok.csv", blocker / "sub" / "x.csv")
