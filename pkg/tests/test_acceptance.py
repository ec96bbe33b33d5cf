"""
End-to-end experiments at desk scale

These train real models and take minutes; run with ``pytest --runslow``.
"""

import numpy as np
import pytest

from aelpn.analysis import BRIGHTNESS_ALPHAS, regularizer_table
from aelpn.core.rng import Rng
from aelpn.data import PatchSpec
from aelpn.diff import parameter_gradient_check
from aelpn.experiments import (
    grid,
    run_eval_affine,
    run_eval_noise_sweep,
    run_train_denoiser,
    run_train_splitnormal,
)
from aelpn.losses import LossSpec
from aelpn.potential import build_model
from aelpn.training import TrainConfig

from .conftest import random_signals


def metric_value(report, **criteria) -> float:
    (record,) = report.select(**criteria)
    return record["value"]


def small_denoiser(kind: str):
    cfg = TrainConfig.denoiser(16, kind).override(pretrain_steps=200, match_steps=200, batch_size=32)
    return run_train_denoiser(kind, 0, cfg, PatchSpec(4, 4), widths=(32, 32), eval_patches=16)


@pytest.fixture(scope="module")
def ae_splitnormal():
    """The AE split-normal recipe tabulated on [-2, 2]"""
    return run_train_splitnormal("ae", 0, xs=grid(-2.0, 2.0, 0.05))


@pytest.mark.slow
class TestSplitNormalRecipe:
    """Test the full split-normal recipe"""

    def test_ae_learns_the_oracle_prox(self):
        """Test the AE model matches the closed-form prox on [-3, 3]"""
        run = run_train_splitnormal("ae", 0, xs=grid(-3.0, 3.0, 0.05))
        assert metric_value(run.summary, metric="max_prox_error") <= 0.05
        assert metric_value(run.summary, metric="scale_deviation_a2") < 1e-9

    def test_ae_recovers_the_negative_log_density(self, ae_splitnormal):
        """Test R / sigma^2 tracks -log p up to the anchor on [-2, 2]"""
        assert all(v is not None for v in ae_splitnormal.table.column("regularizer"))
        assert metric_value(ae_splitnormal.summary, metric="max_regularizer_error") <= 0.15

    def test_ae_inversions_converge(self, ae_splitnormal):
        """Test every preimage on the grid is found to tolerance"""
        points = grid(-2.0, 2.0, 0.05).reshape(-1, 1)
        result = regularizer_table(ae_splitnormal.checkpoint.model, points)
        assert np.all(result.converged)
        assert np.max(result.residual) <= 1e-8

    def test_plain_breaks_scaling(self):
        """Test the plain model is visibly not 1-homogeneous after training"""
        run = run_train_splitnormal("lpn", 0, xs=grid(-3.0, 3.0, 0.05))
        assert metric_value(run.summary, metric="scale_deviation_a2") > 0.01


@pytest.mark.slow
class TestDenoiser:
    """Test small patch denoisers"""

    def test_brightness_equivariance_after_training(self):
        """Test the AE stays above 100 dB while the plain LPN drops below 60 dB"""
        checkpoints = [("ae", small_denoiser("ae")), ("lpn", small_denoiser("lpn"))]
        report = run_eval_affine(checkpoints, 0, BRIGHTNESS_ALPHAS, patches=50)
        for record in report.select(model="ae", metric="equivariance_psnr"):
            assert record["value"] >= 100.0
        dark = [
            r["value"] for r in report.select(model="lpn", metric="equivariance_psnr") if r["param"] < 0.5
        ]
        assert len(dark) == 4
        assert min(dark) < 60.0

    def test_noise_robustness_trend(self):
        """Test the AE wins at high noise and the plain LPN at training noise on most seeds"""
        high_wins, low_wins = 0, 0
        for seed in range(3):
            checkpoints = []
            for kind in ("lpn", "ae"):
                cfg = TrainConfig.denoiser(256, kind).override(pretrain_steps=5000, match_steps=5000)
                checkpoints.append((kind, run_train_denoiser(kind, seed, cfg, PatchSpec(16, 16))))
            report = run_eval_noise_sweep(checkpoints, seed, (0.1, 0.4), patches=200)

            def psnr(model: str, sigma: float) -> float:
                return metric_value(report, model=model, param=sigma, metric="psnr")

            high_wins += psnr("ae", 0.4) >= psnr("lpn", 0.4)
            low_wins += psnr("lpn", 0.1) >= psnr("ae", 0.1)
        assert high_wins >= 2
        assert low_wins >= 2

    def test_parameter_gradient_at_patch_size(self):
        """Test the loss gradient of an 8x8 AE model against finite differences"""
        model = build_model("ae", 64, (32, 32), Rng(0).stream("init"), alpha=0.1)
        clean = random_signals(1, 8, 64)
        noisy = clean + 0.1 * random_signals(2, 8, 64)
        report = parameter_gradient_check(
            model.program, model.theta, (noisy, clean), LossSpec("prox_matching", gamma=5.12)
        )
        assert report.passed(1e-4)
