import numpy as np
import pytest

from fusionrec.checkpoint import load_checkpoint, save_checkpoint
from fusionrec.errors import DataError
from fusionrec.features import (
    FeatureTable,
    read_matrix,
    read_table,
    write_matrix,
    write_table,
)


class TestBinaryContainer:
    def test_round_trip_f32(self, tmp_path):
        m = np.arange(12, dtype=np.float32).reshape(3, 4)
        write_matrix(tmp_path / "m.vft", m)
        assert np.array_equal(read_matrix(tmp_path / "m.vft"), m)

    def test_round_trip_f64(self, tmp_path):
        m = np.random.default_rng(0).normal(size=(2, 5))
        write_matrix(tmp_path / "m.vft", m)
        out = read_matrix(tmp_path / "m.vft")
        assert out.dtype == np.float64
        assert np.array_equal(out, m)

    def test_header_layout(self, tmp_path):
        m = np.zeros((2, 3), dtype=np.float32)
        write_matrix(tmp_path / "m.vft", m)
        raw = (tmp_path / "m.vft").read_bytes()
        assert raw[:4] == b"VFT1"
        assert int.from_bytes(raw[4:8], "little") == 2
        assert int.from_bytes(raw[8:12], "little") == 3
        assert raw[12] == 0  # dtype tag: float32
        assert len(raw) == 13 + 2 * 3 * 4

    def test_bad_magic_rejected(self, tmp_path):
        (tmp_path / "bad.vft").write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(DataError, match="magic"):
            read_matrix(tmp_path / "bad.vft")

    def test_truncated_payload_rejected(self, tmp_path):
        m = np.ones((4, 4), dtype=np.float32)
        write_matrix(tmp_path / "m.vft", m)
        raw = (tmp_path / "m.vft").read_bytes()
        (tmp_path / "m.vft").write_bytes(raw[:-8])
        with pytest.raises(DataError, match="truncated"):
            read_matrix(tmp_path / "m.vft")

    def test_table_round_trip_with_sidecar(self, tmp_path):
        table = FeatureTable(
            kind="item", modality="visual", ids=("a", "b"),
            matrix=np.eye(2, dtype=np.float32), fingerprint="fp",
            missing=frozenset({1}),
        )
        write_table(table, tmp_path / "t.vft")
        loaded = read_table(tmp_path / "t.vft")
        assert loaded.ids == ("a", "b")
        assert loaded.fingerprint == "fp"
        assert loaded.missing == frozenset({1})
        assert np.array_equal(loaded.matrix, table.matrix)

    def test_non_finite_rejected(self):
        with pytest.raises(DataError, match="non-finite"):
            FeatureTable(
                kind="item", modality="visual", ids=("a",),
                matrix=np.array([[np.nan]]), fingerprint="fp",
            )

    def test_row_id_mismatch_rejected(self):
        from fusionrec.errors import InternalError

        with pytest.raises(InternalError):
            FeatureTable(
                kind="item", modality="visual", ids=("a",),
                matrix=np.zeros((2, 2), dtype=np.float32), fingerprint="fp",
            )


class TestCheckpoint:
    def test_round_trip_mixed_shapes_and_dtypes(self, tmp_path):
        tensors = {
            "scalarish": np.array(3.5, dtype=np.float32),
            "vector": np.arange(5, dtype=np.float64),
            "matrix": np.random.default_rng(1).normal(size=(3, 4)).astype(np.float32),
            "nested/name.weight": np.random.default_rng(2).normal(size=(2, 3, 4)),
        }
        save_checkpoint(tmp_path / "ckpt", tensors, config_fingerprint="fp",
                        extra={"note": "x"})
        loaded, manifest = load_checkpoint(tmp_path / "ckpt")
        assert manifest["config_fingerprint"] == "fp"
        assert manifest["note"] == "x"
        for name, original in tensors.items():
            assert loaded[name].shape == original.shape
            assert loaded[name].dtype == original.dtype
            assert np.array_equal(loaded[name], original)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError, match="manifest"):
            load_checkpoint(tmp_path / "nothing")
