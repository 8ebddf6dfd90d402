"""Named-tensor container: round trips, canonical bytes, corruption checks."""

import numpy as np
import pytest

import nirrec.autodiff as ad
from nirrec.autodiff import MAGIC, load_tensors, save_tensors
from nirrec.errors import IngestionError


class TestCheckpointContainer:
    """File format guarantees for checkpoints and shards."""

    def test_round_trip_preserves_values_and_shapes(self, tmp_path):
        """Scalars through 3-d arrays survive a save/load cycle exactly."""
        rng = np.random.default_rng(0)
        tensors = {
            "scalar": np.asarray(3.25),
            "vec": rng.normal(size=7),
            "mat": rng.normal(size=(3, 4)),
            "cube": rng.normal(size=(2, 3, 2)),
        }
        path = tmp_path / "ckpt.bin"
        save_tensors(path, tensors)
        loaded = load_tensors(path)
        assert set(loaded) == set(tensors)
        for name, arr in tensors.items():
            assert loaded[name].dtype == np.float64
            np.testing.assert_array_equal(loaded[name], arr)

    def test_accepts_tensor_objects(self, tmp_path):
        """Tensor values are stored via their underlying arrays."""
        path = tmp_path / "t.bin"
        save_tensors(path, {"w": ad.Tensor([[1.0, 2.0]])})
        np.testing.assert_array_equal(load_tensors(path)["w"], [[1.0, 2.0]])

    def test_bytes_independent_of_insertion_order(self, tmp_path):
        """Entries are sorted by name, so the file bytes are canonical."""
        a = {"x": np.ones(2), "y": np.zeros(3), "a.b": np.full(1, 2.0)}
        b = dict(reversed(list(a.items())))
        pa, pb = tmp_path / "a.bin", tmp_path / "b.bin"
        save_tensors(pa, a)
        save_tensors(pb, b)
        assert pa.read_bytes() == pb.read_bytes()

    def test_magic_prefix(self, tmp_path):
        """Files start with the 8-byte container magic."""
        path = tmp_path / "m.bin"
        save_tensors(path, {"t": np.zeros(1)})
        assert path.read_bytes()[:8] == MAGIC == b"NIRGNN01"

    def test_bad_magic_rejected(self, tmp_path):
        """A foreign file fails loudly instead of parsing garbage."""
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(IngestionError):
            load_tensors(path)

    def test_truncated_file_rejected(self, tmp_path):
        """Cutting the payload mid-entry raises an ingestion error."""
        path = tmp_path / "trunc.bin"
        save_tensors(path, {"w": np.ones((4, 4))})
        whole = path.read_bytes()
        path.write_bytes(whole[: len(whole) - 9])
        with pytest.raises(IngestionError):
            load_tensors(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        """Extra bytes after the last entry indicate corruption."""
        path = tmp_path / "trail.bin"
        save_tensors(path, {"w": np.ones(2)})
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(IngestionError):
            load_tensors(path)

    def test_empty_mapping_round_trips(self, tmp_path):
        """Zero entries is a valid container."""
        path = tmp_path / "empty.bin"
        save_tensors(path, {})
        assert load_tensors(path) == {}
