import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from credit.embedding_io import (
    CLIP_REL_TOL,
    DTYPE_F64,
    FORMAT_VERSION,
    HEADER,
    MAGIC,
    EmbeddingMatrix,
    clip_embeddings,
    load_embeddings,
    save_embeddings,
)
from credit.errors import (
    DataError,
    FormatError,
    IoError,
    ParamError,
    SensitivityError,
    TruncationError,
)

finite_matrices = arrays(
    np.float64,
    st.tuples(st.integers(1, 12), st.integers(1, 6)),
    elements=st.floats(min_value=-1e12, max_value=1e12, allow_nan=False, width=64),
)


def test_header_layout():
    """Magic, version, dtype, n, d packed little-endian in 24 bytes."""
    assert MAGIC == b"CREM"
    assert HEADER.size == 24
    assert HEADER.format == "<4sHHQQ"


def test_binary_layout_bytes(tmp_path):
    m = EmbeddingMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
    path = tmp_path / "m.crem"
    save_embeddings(m, path)
    raw = path.read_bytes()
    magic, version, dtype, n, d = HEADER.unpack(raw[:24])
    assert (magic, version, dtype, n, d) == (MAGIC, FORMAT_VERSION, DTYPE_F64, 2, 2)
    assert raw[24:] == np.array([[1.0, 2.0], [3.0, 4.0]]).tobytes()


@settings(max_examples=60, deadline=None)
@given(finite_matrices)
def test_binary_round_trip_bit_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "m.crem"
    save_embeddings(EmbeddingMatrix(values), path, fmt="binary")
    back = load_embeddings(path)
    assert back.values.tobytes() == values.tobytes()
    assert back.n == values.shape[0] and back.d == values.shape[1]


@settings(max_examples=30, deadline=None)
@given(finite_matrices)
def test_csv_round_trip_exact(tmp_path_factory, values):
    """repr-formatted CSV reloads to the identical floats."""
    path = tmp_path_factory.mktemp("rt") / "m.csv"
    save_embeddings(EmbeddingMatrix(values), path, fmt="csv")
    back = load_embeddings(path)
    assert np.array_equal(back.values, values)


def test_format_autodetect(tmp_path):
    m = EmbeddingMatrix(np.array([[0.5, -1.5]]))
    b = tmp_path / "m.crem"
    c = tmp_path / "m.csv"
    save_embeddings(m, b, fmt="binary")
    save_embeddings(m, c, fmt="csv")
    assert np.array_equal(load_embeddings(b, fmt="auto").values, m.values)
    assert np.array_equal(load_embeddings(c, fmt="auto").values, m.values)


def test_csv_header_names(tmp_path):
    path = tmp_path / "m.csv"
    save_embeddings(EmbeddingMatrix(np.zeros((1, 3))), path, fmt="csv")
    header = path.read_text().splitlines()[0]
    assert header == "dim_0,dim_1,dim_2"


def test_values_are_read_only():
    m = EmbeddingMatrix(np.ones((2, 2)))
    with pytest.raises(ValueError):
        m.values[0, 0] = 5.0


def test_rejects_non_2d():
    with pytest.raises(ParamError):
        EmbeddingMatrix(np.ones(4))
    with pytest.raises(ParamError):
        EmbeddingMatrix(np.ones((2, 2, 2)))
    with pytest.raises(ParamError):
        EmbeddingMatrix(np.ones((0, 3)))


def test_rejects_non_finite():
    bad = np.ones((2, 2))
    bad[1, 1] = np.inf
    with pytest.raises(DataError):
        EmbeddingMatrix(bad)


def test_rejects_norms_beyond_declared_radius():
    with pytest.raises(SensitivityError):
        EmbeddingMatrix(np.array([[3.0, 4.0]]), clip_radius=1.0)


def test_clip_shrinks_and_records_radius(rng):
    raw = rng.standard_normal((50, 3)) * 4.0
    clipped = clip_embeddings(EmbeddingMatrix(raw), 1.0)
    norms = np.linalg.norm(clipped.values, axis=1)
    assert clipped.clip_radius == 1.0
    assert np.all(norms <= 1.0 * (1.0 + CLIP_REL_TOL))


def test_clip_idempotent_bit_exact(rng):
    """clip(clip(m, r), r) = clip(m, r) with no float drift."""
    raw = rng.standard_normal((100, 4)) * 3.0
    once = clip_embeddings(EmbeddingMatrix(raw), 0.7)
    twice = clip_embeddings(once, 0.7)
    assert twice.values.tobytes() == once.values.tobytes()


@settings(max_examples=40, deadline=None)
@given(finite_matrices, st.floats(min_value=1e-3, max_value=1e6))
def test_clip_idempotent_property(values, radius):
    once = clip_embeddings(EmbeddingMatrix(values), radius)
    twice = clip_embeddings(once, radius)
    assert twice.values.tobytes() == once.values.tobytes()


def test_clip_preserves_interior_rows_bitwise(rng):
    inside = rng.standard_normal((20, 3)) * 0.01
    clipped = clip_embeddings(EmbeddingMatrix(inside), 1.0)
    assert clipped.values.tobytes() == inside.tobytes()


def test_clip_pairwise_sensitivity(rng):
    # any two rows of a clipped matrix are within 2r of each other
    raw = rng.standard_normal((40, 5)) * 10.0
    clipped = clip_embeddings(EmbeddingMatrix(raw), 1.5)
    v = clipped.values
    for a in range(0, 40, 7):
        for b in range(a + 1, 40, 5):
            assert np.linalg.norm(v[a] - v[b]) <= 3.0 * (1.0 + 1e-9)


def test_clip_rejects_bad_radius():
    m = EmbeddingMatrix(np.ones((1, 1)))
    with pytest.raises(ParamError):
        clip_embeddings(m, 0.0)
    with pytest.raises(ParamError):
        clip_embeddings(m, -1.0)


def test_load_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        load_embeddings(tmp_path / "absent.crem")


def test_bad_magic(tmp_path):
    path = tmp_path / "m.crem"
    path.write_bytes(b"NOPE" + bytes(20) + bytes(16))
    with pytest.raises(FormatError):
        load_embeddings(path, fmt="binary")


def test_bad_version(tmp_path):
    path = tmp_path / "m.crem"
    path.write_bytes(HEADER.pack(MAGIC, 99, DTYPE_F64, 1, 1) + bytes(8))
    with pytest.raises(FormatError):
        load_embeddings(path)


def test_bad_dtype(tmp_path):
    path = tmp_path / "m.crem"
    path.write_bytes(HEADER.pack(MAGIC, FORMAT_VERSION, 7, 1, 1) + bytes(8))
    with pytest.raises(FormatError):
        load_embeddings(path)


def test_short_header(tmp_path):
    path = tmp_path / "m.crem"
    path.write_bytes(b"CREM\x01")
    with pytest.raises(FormatError):
        load_embeddings(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "m.crem"
    path.write_bytes(HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_F64, 2, 2) + bytes(24))
    with pytest.raises(TruncationError):
        load_embeddings(path)


def test_oversized_payload(tmp_path):
    path = tmp_path / "m.crem"
    path.write_bytes(HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_F64, 1, 1) + bytes(16))
    with pytest.raises(TruncationError):
        load_embeddings(path)


def test_zero_dims_in_header(tmp_path):
    path = tmp_path / "m.crem"
    path.write_bytes(HEADER.pack(MAGIC, FORMAT_VERSION, DTYPE_F64, 0, 1))
    with pytest.raises(FormatError):
        load_embeddings(path)


def test_csv_short_row_is_truncation(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("dim_0,dim_1\n1.0,2.0\n3.0\n")
    with pytest.raises(TruncationError):
        load_embeddings(path, fmt="csv")


def test_csv_non_finite_is_data_error(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("dim_0\ninf\n")
    with pytest.raises(DataError):
        load_embeddings(path, fmt="csv")


def test_csv_bad_token(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("dim_0\n1_0\n")
    with pytest.raises(FormatError):
        load_embeddings(path, fmt="csv")


def test_csv_bad_header(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a,b\n1.0,2.0\n")
    with pytest.raises(FormatError):
        load_embeddings(path, fmt="csv")


def test_label_survives_construction():
    m = EmbeddingMatrix(np.ones((1, 1)), label="run-7")
    assert m.label == "run-7"


def test_save_rejects_unknown_format(tmp_path):
    m = EmbeddingMatrix(np.ones((1, 1)))
    with pytest.raises(ParamError):
        save_embeddings(m, tmp_path / "m.bin", fmt="parquet")
