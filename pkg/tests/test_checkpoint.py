"""Tests for checkpoint files"""

import numpy as np
import pytest

from aelpn.checkpoint import FORMAT_VERSION, MAGIC_LINE, Checkpoint, load_checkpoint, save_checkpoint
from aelpn.core.rng import Rng
from aelpn.errors import CheckpointError, CheckpointVersionError, TensorFormatError
from aelpn.potential import VariantKind, build_model
from aelpn.training import MATCH, HistoryEntry, TrainConfig, TrainHistory

from .conftest import random_signals


class TestRoundTrip:
    """Test saving and loading"""

    def test_parameters_bitwise(self, tmp_path, ae_model):
        """Test every weight is restored exactly"""
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, ae_model, seed=11)
        loaded = load_checkpoint(path)
        assert loaded.seed == 11
        assert list(loaded.model.theta) == list(ae_model.theta)
        assert all(np.array_equal(loaded.model.theta[n], ae_model.theta[n]) for n in ae_model.theta)

    def test_outputs_identical(self, ae_model):
        """Test the reloaded model gives bitwise-identical proxes"""
        loaded = Checkpoint.from_bytes(Checkpoint(ae_model).to_bytes()).model
        x = random_signals(3, 4, 8)
        np.testing.assert_array_equal(loaded.prox_apply(x), ae_model.prox_apply(x))

    def test_config_history_metadata(self, plain_model):
        """Test the training record survives"""
        cfg = TrainConfig.denoiser(8, "lpn", seed=4)
        history = TrainHistory([HistoryEntry(10, MATCH, 0.25, 1e-4, 5.12, 27.3)])
        blob = Checkpoint(plain_model, 4, cfg, history, {"patch": [2, 4]}).to_bytes()
        loaded = Checkpoint.from_bytes(blob)
        assert loaded.train_config == cfg
        assert loaded.history.entries == history.entries
        assert loaded.metadata == {"patch": [2, 4]}

    def test_norm_trick_and_alpha(self):
        """Test the variant and alpha are restored"""
        model = build_model("normtrick", 4, (4,), Rng(1), alpha=0.3)
        loaded = Checkpoint.from_bytes(Checkpoint(model).to_bytes()).model
        assert loaded.kind is VariantKind.NORM_TRICK
        assert loaded.alpha == 0.3

    def test_header_is_readable(self, ae_model):
        """Test the file starts with the magic line and a YAML header"""
        blob = Checkpoint(ae_model).to_bytes()
        assert blob.startswith(MAGIC_LINE)
        assert b"variant: ae" in blob
        assert f"format_version: {FORMAT_VERSION}".encode() in blob


class TestMalformed:
    """Test rejection of bad files"""

    def test_missing_magic(self):
        """Test foreign files are rejected"""
        with pytest.raises(CheckpointError):
            Checkpoint.from_bytes(b"hello\n")

    def test_newer_version(self, ae_model):
        """Test a newer format version is refused with a version error"""
        blob = Checkpoint(ae_model).to_bytes().replace(
            f"format_version: {FORMAT_VERSION}".encode(), f"format_version: {FORMAT_VERSION + 1}".encode()
        )
        with pytest.raises(CheckpointVersionError):
            Checkpoint.from_bytes(blob)

    def test_schema_violation(self, ae_model):
        """Test an unknown variant in the header is a checkpoint error"""
        blob = Checkpoint(ae_model).to_bytes().replace(b"variant: ae", b"variant: xx")
        with pytest.raises(CheckpointError):
            Checkpoint.from_bytes(blob)

    def test_truncated_parameters(self, ae_model):
        """Test a cut parameter record is reported"""
        blob = Checkpoint(ae_model).to_bytes()
        with pytest.raises(TensorFormatError):
            Checkpoint.from_bytes(blob[:-5])

    def test_unterminated_header(self):
        """Test a header without its end marker"""
        with pytest.raises(CheckpointError):
            Checkpoint.from_bytes(MAGIC_LINE + b"seed: 0\n")
