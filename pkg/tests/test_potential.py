"""Tests for potential variants and their learned proxes"""

import numpy as np
import pytest

from aelpn.core import affine_transform, center
from aelpn.core.rng import Rng
from aelpn.errors import ConfigError, IncompatibleVariantError, ShapeError
from aelpn.icnn import IcnnConfig, zeros
from aelpn.potential import (
    PotentialVariant,
    ProxModel,
    VariantKind,
    build_model,
    model_from_dict,
    norm_trick_apply,
    parse_variant,
    prox_apply,
)

from .conftest import random_signals


class TestVariantKind:
    """Test variant properties"""

    def test_equivariance_flags(self):
        """Test which variants commute with scaling and shifting"""
        assert VariantKind.AFFINE.scale_equivariant and VariantKind.AFFINE.shift_equivariant
        assert VariantKind.SCALE.scale_equivariant and not VariantKind.SCALE.shift_equivariant
        assert VariantKind.SHIFT.shift_equivariant and not VariantKind.SHIFT.scale_equivariant
        assert not VariantKind.PLAIN.scale_equivariant

    def test_parse_unknown(self):
        """Test unknown variant names are rejected"""
        with pytest.raises(ConfigError):
            parse_variant("rotation")

    def test_negative_alpha(self):
        """Test alpha must be nonnegative"""
        with pytest.raises(ConfigError):
            PotentialVariant(VariantKind.AFFINE, -0.1)


class TestCompatibility:
    """Test pairing variants with ICNN presets"""

    def test_affine_needs_equivariant_preset(self):
        """Test an AE potential on a plain ICNN is rejected"""
        config = IcnnConfig.plain(4, (4,))
        with pytest.raises(IncompatibleVariantError):
            ProxModel(PotentialVariant(VariantKind.AFFINE), config, zeros(config))

    def test_norm_trick_wraps_plain_only(self, ae_model):
        """Test the normalization trick only wraps plain models"""
        with pytest.raises(IncompatibleVariantError):
            ae_model.as_norm_trick()

    def test_norm_trick_has_no_potential(self, plain_model):
        """Test asking a norm-trick model for psi fails"""
        with pytest.raises(IncompatibleVariantError):
            plain_model.as_norm_trick().potential_value(np.ones(8))

    def test_wrong_signal_length(self, ae_model):
        """Test signals must match the model dimension"""
        with pytest.raises(ShapeError):
            ae_model.prox_apply(np.ones(5))


class TestAffineVariant:
    """Test the affine-equivariant construction"""

    @pytest.mark.parametrize("c", [0.0, 1.5, -2.0])
    def test_constant_signal(self, ae_model, c):
        """Test psi(c 1) = n c^2 / 2 and f(c 1) = c 1"""
        x = np.full(8, c)
        value, gradient = ae_model.value_and_grad(x)
        assert value == pytest.approx(0.5 * 8 * c**2)
        np.testing.assert_allclose(gradient, x, atol=1e-15)

    def test_equivariance(self, ae_model):
        """Test f(3 x - 0.7) = 3 f(x) - 0.7"""
        x = random_signals(11, 6, 8)
        lhs = ae_model.prox_apply(affine_transform(x, 3.0, -0.7))
        rhs = affine_transform(ae_model.prox_apply(x), 3.0, -0.7)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)

    def test_mean_is_preserved(self, ae_model):
        """Test the prox output has the input's mean"""
        x = random_signals(12, 4, 8)
        np.testing.assert_allclose(
            ae_model.prox_apply(x).mean(axis=1), x.mean(axis=1), atol=1e-12
        )

    def test_potential_two_homogeneous_when_centred(self, ae_model):
        """Test psi(a u) = a^2 psi(u) for mean-free u"""
        u = center(random_signals(13, 3, 8))
        np.testing.assert_allclose(
            ae_model.potential_value(2.0 * u), 4.0 * ae_model.potential_value(u), rtol=1e-12
        )

    def test_alpha_adds_centred_identity(self, ae_model):
        """Test f_alpha(x) - f_0(x) = alpha (I - P) x"""
        x = random_signals(14, 3, 8)
        diff = ae_model.with_alpha(0.25).prox_apply(x) - ae_model.prox_apply(x)
        np.testing.assert_allclose(diff, 0.25 * center(x), atol=1e-12)


class TestScaleAndShiftVariants:
    """Test the one-sided variants"""

    def test_scale_equivariance(self, scale_model):
        """Test f(a x) = a f(x) for the scale variant"""
        x = random_signals(21, 5, 8)
        for a in (0.2, 5.0):
            np.testing.assert_allclose(
                scale_model.prox_apply(a * x), a * scale_model.prox_apply(x), rtol=1e-10, atol=1e-12
            )

    def test_shift_equivariance(self, shift_model):
        """Test f(x + b 1) = f(x) + b 1 for the shift variant"""
        x = random_signals(22, 5, 8)
        for b in (-3.0, 0.4):
            np.testing.assert_allclose(
                shift_model.prox_apply(x + b), shift_model.prox_apply(x) + b, atol=1e-10
            )

    def test_shift_expansion(self, shift_model):
        """Test f(x) = (I - P) grad Psi(u) + Px with the plain ICNN gradient"""
        x = random_signals(23, 3, 8)
        plain = ProxModel(PotentialVariant(VariantKind.PLAIN), shift_model.config, shift_model.params)
        grad_u = plain.prox_apply(center(x))
        expected = center(grad_u) + x.mean(axis=1, keepdims=True)
        np.testing.assert_allclose(shift_model.prox_apply(x), expected, atol=1e-12)

    def test_plain_model_is_not_scale_equivariant(self, plain_model):
        """Test the plain LPN breaks scale equivariance"""
        x = random_signals(24, 3, 8)
        assert not np.allclose(plain_model.prox_apply(3.0 * x), 3.0 * plain_model.prox_apply(x))


class TestQuadraticModel:
    """Test closed-form quadratic potentials"""

    def test_identity(self, identity_model):
        """Test alpha = 1 gives the identity prox"""
        x = random_signals(31, 3, 4)
        np.testing.assert_allclose(prox_apply(identity_model, x), x)

    def test_half(self, quarter_model):
        """Test alpha = 1/2 halves the input"""
        assert quarter_model.prox_apply(np.array([3.0]))[0] == pytest.approx(1.5)


class TestNormTrick:
    """Test the normalization-trick wrapper"""

    def test_constant_signal_unchanged(self, plain_model):
        """Test rows with zero spread pass through"""
        x = np.full(8, 0.3)
        np.testing.assert_array_equal(plain_model.as_norm_trick().prox_apply(x), x)

    def test_affine_equivariance(self, plain_model):
        """Test the wrapper commutes with a x + b 1"""
        model = plain_model.as_norm_trick()
        x = random_signals(41, 5, 8)
        lhs = model.prox_apply(affine_transform(x, 2.5, 1.2))
        rhs = affine_transform(model.prox_apply(x), 2.5, 1.2)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)

    def test_matches_formula(self, plain_model):
        """Test std(x) f((x - m)/std(x)) + m for one signal"""
        x = random_signals(42, 1, 8)[0]
        m, s = x.mean(), x.std()
        expected = s * plain_model.prox_apply((x - m) / s) + m
        np.testing.assert_allclose(norm_trick_apply(plain_model, x), expected)

    def test_base_is_plain(self, plain_model):
        """Test the wrapped model's base is the plain model"""
        assert plain_model.as_norm_trick().base.kind is VariantKind.PLAIN


class TestModelDict:
    """Test model descriptions"""

    def test_round_trip(self, ae_model):
        """Test a model rebuilt from its dict and theta gives the same prox"""
        rebuilt = model_from_dict(ae_model.to_dict(), ae_model.theta)
        x = random_signals(51, 2, 8)
        np.testing.assert_array_equal(rebuilt.prox_apply(x), ae_model.prox_apply(x))

    def test_build_is_deterministic(self):
        """Test building twice from the same stream gives equal parameters"""
        a = build_model("ae", 4, (4,), Rng(9))
        b = build_model("ae", 4, (4,), Rng(9))
        assert all(np.array_equal(a.theta[k], b.theta[k]) for k in a.theta)
