"""Tests for input-convex neural potentials"""

import numpy as np
import pytest

from aelpn.core.rng import Rng
from aelpn.errors import ConfigError, ShapeError
from aelpn.icnn import (
    Activation,
    IcnnConfig,
    IcnnParams,
    activation_margin,
    forward,
    init,
    pairwise_max,
    project_weights,
    sortpool,
    winning_index,
    zeros,
)


class TestIcnnConfig:
    """Test architecture presets and validation"""

    def test_plain_shapes(self):
        """Test parameter names and shapes of a plain two-layer ICNN"""
        shapes = IcnnConfig.plain(3, (4, 5)).parameter_shapes()
        assert shapes == {
            "wx.0": (4, 3),
            "b.0": (4,),
            "wz.1": (5, 4),
            "wx.1": (5, 3),
            "b.1": (5,),
            "wz.out": (1, 5),
            "wx.out": (1, 3),
            "b.out": (1,),
        }

    def test_equivariant_shapes_halve_state(self):
        """Test pairwise max halves each hidden state and drops biases"""
        shapes = IcnnConfig.equivariant(3, (4, 6)).parameter_shapes()
        assert shapes["wz.1"] == (6, 2)
        assert shapes["wz.out"] == (1, 3)
        assert not any(name.startswith("b.") for name in shapes)

    def test_sortpool_keeps_width(self):
        """Test sortpool states keep the layer width"""
        shapes = IcnnConfig.equivariant(3, (4, 6), Activation.SORTPOOL).parameter_shapes()
        assert shapes["wz.1"] == (6, 4)

    def test_homogeneous_flag(self):
        """Test only the equivariant preset is homogeneous"""
        assert IcnnConfig.equivariant(2, (4,)).is_homogeneous
        assert not IcnnConfig.plain(2, (4,)).is_homogeneous

    def test_odd_width_with_pairing(self):
        """Test pairing activations need even widths"""
        with pytest.raises(ConfigError):
            IcnnConfig.equivariant(2, (5,))

    def test_equivariant_needs_pairing(self):
        """Test softplus cannot build the equivariant preset"""
        with pytest.raises(ConfigError):
            IcnnConfig.equivariant(2, (4,), Activation.SOFTPLUS)

    def test_no_hidden_layers(self):
        """Test at least one hidden layer is required"""
        with pytest.raises(ConfigError):
            IcnnConfig.plain(2, ())

    def test_dict_round_trip(self):
        """Test to_dict/from_dict preserve the config"""
        config = IcnnConfig.equivariant(7, (8, 8), Activation.SORTPOOL)
        assert IcnnConfig.from_dict(config.to_dict()) == config


class TestParams:
    """Test initialisation and the weight constraint"""

    def test_init_z_path_nonnegative(self):
        """Test z-path weights start nonnegative and biases at zero"""
        params = init(IcnnConfig.plain(6, (8, 8, 8)), Rng(1))
        assert params.min_z_weight() >= 0.0
        assert all(not params[name].any() for name in params if name.startswith("b."))

    def test_init_is_deterministic(self):
        """Test the same stream gives the same parameters"""
        config = IcnnConfig.equivariant(4, (8,))
        a, b = init(config, Rng(2)), init(config, Rng(2))
        assert all(np.array_equal(a[name], b[name]) for name in a)

    def test_project_weights(self):
        """Test projection clamps only z-path weights"""
        config = IcnnConfig.plain(2, (2, 2))
        params = zeros(config).replace({"wz.1": -np.ones((2, 2)), "wx.1": -np.ones((2, 2))})
        projected = project_weights(params)
        assert projected.min_z_weight() == 0.0
        np.testing.assert_array_equal(projected["wx.1"], -np.ones((2, 2)))

    def test_project_is_idempotent(self):
        """Test projecting twice equals projecting once"""
        params = init(IcnnConfig.plain(3, (4, 4)), Rng(3))
        params = params.replace({"wz.1": params["wz.1"] - 0.5})
        once = project_weights(params)
        twice = project_weights(once)
        assert all(np.array_equal(once[name], twice[name]) for name in once)

    def test_shape_mismatch(self):
        """Test arrays must match the config"""
        config = IcnnConfig.plain(2, (2,))
        arrays = {name: np.zeros(shape) for name, shape in config.parameter_shapes().items()}
        arrays["wx.0"] = np.zeros((3, 2))
        with pytest.raises(ShapeError):
            IcnnParams(config, arrays)

    def test_size(self):
        """Test the parameter count"""
        assert zeros(IcnnConfig.plain(3, (4,))).size == 12 + 4 + 4 + 3 + 1


class TestForward:
    """Test evaluation"""

    def test_zero_parameters(self):
        """Test all-zero parameters give a zero potential"""
        assert forward(zeros(IcnnConfig.plain(5, (4, 4))), np.ones(5)) == 0.0

    def test_batch_shape(self, rng):
        """Test a stack returns one value per row"""
        params = init(IcnnConfig.plain(5, (4, 4)), Rng(4))
        assert forward(params, rng.normal((7, 5))).shape == (7,)

    def test_wrong_width(self):
        """Test inputs of the wrong length are rejected"""
        with pytest.raises(ShapeError):
            forward(zeros(IcnnConfig.plain(5, (4,))), np.ones(3))

    @pytest.mark.parametrize("activation", [Activation.PAIRWISE_MAX, Activation.SORTPOOL])
    def test_raw_output_one_homogeneous(self, activation, rng):
        """Test Psi(a x) = a Psi(x) for the bias-free preset"""
        params = init(IcnnConfig.equivariant(6, (8, 8), activation), Rng(5))
        x = rng.normal((5, 6))
        for a in (0.1, 3.0):
            np.testing.assert_allclose(
                forward(params, a * x, rectify=False), a * forward(params, x, rectify=False),
                rtol=1e-12, atol=1e-14,
            )

    def test_rectified_output_two_homogeneous(self, rng):
        """Test h(a x) = a^2 h(x) and h >= 0"""
        params = init(IcnnConfig.equivariant(6, (8, 8)), Rng(6))
        x = rng.normal((5, 6))
        h = forward(params, x)
        assert np.all(h >= 0.0)
        np.testing.assert_allclose(forward(params, 2.5 * x), 6.25 * h, rtol=1e-12, atol=1e-14)

    def test_convex_along_segments(self, rng):
        """Test midpoint convexity of a plain ICNN"""
        params = init(IcnnConfig.plain(4, (8, 8)), Rng(7))
        x, y = rng.normal((50, 4)), rng.normal((50, 4))
        mid = forward(params, 0.5 * (x + y))
        assert np.all(mid <= 0.5 * (forward(params, x) + forward(params, y)) + 1e-12)


class TestPairingHelpers:
    """Test the numpy pairing helpers"""

    def test_pairwise_max(self):
        """Test (3, -1, 2, 2) gives (3, 2)"""
        np.testing.assert_array_equal(pairwise_max([3.0, -1.0, 2.0, 2.0]), [3.0, 2.0])

    def test_sortpool(self):
        """Test (-1, 3) gives (3, -1)"""
        np.testing.assert_array_equal(sortpool([-1.0, 3.0]), [3.0, -1.0])

    def test_winning_index_tie(self):
        """Test a tie selects index 0 within the pair"""
        np.testing.assert_array_equal(winning_index([2.0, 2.0, -1.0, 4.0]), [0, 1])

    def test_margin_softplus_is_infinite(self, rng):
        """Test softplus networks have no kinks"""
        params = init(IcnnConfig.plain(3, (4,)), Rng(8))
        assert np.all(np.isinf(activation_margin(params, rng.normal((3, 3)))))

    def test_margin_zero_at_origin(self):
        """Test every pair ties at x = 0 without biases"""
        params = init(IcnnConfig.equivariant(3, (4, 4)), Rng(9))
        assert activation_margin(params, np.zeros(3))[0] == 0.0
