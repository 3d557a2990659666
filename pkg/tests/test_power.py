import math

import numpy as np
import pytest

from qrsma.power import (
    PowerModel,
    circuit_power,
    dac_power,
    smooth_antenna_power,
    transmit_power,
)
from qrsma.sysmodel import ConfigError, QuantizationProfile, SystemConfig

FS = 150e6
P_RF = 2 * 14e-3 + 2 * 0.3e-3 + 3e-3  # 31.6 mW
P_LO = 22.5e-3


def model_for(bits):
    cfg = SystemConfig(n_antennas=len(bits), n_users=max(1, len(bits) - 1), bits=tuple(bits))
    return PowerModel.from_config(cfg)


class TestDacPower:
    def test_eight_bits(self):
        assert dac_power(8, FS) == pytest.approx(0.01464, rel=1e-12)

    def test_sixteen_bits(self):
        assert dac_power(16, FS) == pytest.approx(1.00464, rel=1e-12)

    def test_static_term_only(self):
        assert dac_power(1, 0.0) == pytest.approx(3.0e-5, rel=1e-12)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            dac_power(0, FS)


class TestCircuitPower:
    def test_empty_mask(self):
        model = model_for([8, 8])
        assert circuit_power(np.zeros(2, dtype=bool), model) == pytest.approx(P_LO)

    def test_homogeneous_eight_bit_sixteen_antennas(self):
        model = model_for([8] * 16)
        expect = P_LO + 16 * (2 * 0.01464 + P_RF)
        assert circuit_power(np.ones(16, dtype=bool), model) == pytest.approx(expect, rel=1e-12)

    def test_single_four_bit_antenna(self):
        model = model_for([4, 4])
        mask = np.array([True, False])
        assert dac_power(4, FS) == pytest.approx(5.64e-3, rel=1e-12)
        assert circuit_power(mask, model) == pytest.approx(P_LO + 2 * 5.64e-3 + P_RF, rel=1e-12)

    def test_additive_over_disjoint_masks(self):
        model = model_for([4, 8, 12, 16])
        a = np.array([True, False, True, False])
        b = ~a
        total = circuit_power(a, model) + circuit_power(b, model) - P_LO
        assert total == pytest.approx(circuit_power(np.ones(4, dtype=bool), model), rel=1e-12)


def random_unit_direction(rng, n, s):
    W = rng.standard_normal((n, s)) + 1j * rng.standard_normal((n, s))
    return W / np.linalg.norm(W)


class TestSmoothAntennaPower:
    def test_zero_row_contributes_nothing(self):
        rng = np.random.default_rng(0)
        n, s = 4, 3
        profile = QuantizationProfile.from_bits([6] * n)
        model = model_for([6] * n)
        W = random_unit_direction(rng, n, s)
        W[2] = 0.0
        W /= np.linalg.norm(W)
        with_row = smooth_antenna_power(W, profile, model, rho=1e-12)
        mask = np.ones(n, dtype=bool)
        mask[2] = False
        hard_wo = float(np.sum(model.p_ant[mask]))
        # the zero row must not push the smooth value above the 3-antenna cost
        assert with_row <= hard_wo + 1e-9

    def test_quadratic_form_identity(self):
        # Kronecker-form quadratic forms equal the plain row norms
        rng = np.random.default_rng(1)
        n, k = 4, 2
        profile = QuantizationProfile.from_bits([3, 5, 8, 11])
        W = random_unit_direction(rng, n, k + 1)
        rho = 1e-10
        e_vals = []
        eye = np.eye(n)
        for i in range(n):
            e_tilde = eye[:, i] / math.sqrt(profile.alpha[i])
            E = np.eye(n * (k + 1), dtype=complex) + np.kron(
                np.eye(k + 1), np.outer(e_tilde, e_tilde.conj())
            ) / rho
            wbar = W.reshape(-1, order="F")
            e_vals.append(float(np.real(wbar.conj() @ E @ wbar)))
        row = np.sum(np.abs(W) ** 2, axis=1) / profile.alpha
        direct = 1.0 + row / rho
        np.testing.assert_allclose(e_vals, direct, rtol=1e-12)

    def test_converges_to_hard_power_as_rho_shrinks(self):
        # the indicator weight is log2(1 + g/rho)/log2(1 + 1/rho), so the gap
        # to the hard sum decays like log(1/g)/log(1/rho); never 1% at the
        # production rho = 1e-12 for spread-out rows, but provably -> 0
        rng = np.random.default_rng(2)
        n, s = 6, 4
        profile = QuantizationProfile.from_bits([4, 6, 8, 10, 12, 14])
        model = model_for([4, 6, 8, 10, 12, 14])
        W = random_unit_direction(rng, n, s)
        hard = float(np.sum(model.p_ant))
        errors = []
        for rho in (1e-6, 1e-12, 1e-24, 1e-48, 1e-120):
            smooth = smooth_antenna_power(W, profile, model, rho=rho)
            errors.append(abs(smooth - hard) / hard)
        assert all(a > b for a, b in zip(errors, errors[1:]))
        assert errors[-1] <= 0.02

    def test_hard_soft_agreement_mixed_rows(self):
        # rows either zero or with gain >= 0.01: 2% agreement once rho is
        # small enough for the log-indicator to saturate
        rng = np.random.default_rng(3)
        n, s = 8, 3
        profile = QuantizationProfile.from_bits([8] * n)
        model = model_for([8] * n)
        W = random_unit_direction(rng, n, s)
        W[1] = 0.0
        W[5] = 0.0
        W /= np.linalg.norm(W)
        gains = np.sum(np.abs(W) ** 2, axis=1) / profile.alpha
        assert np.all((gains == 0) | (gains >= 0.01))
        mask = gains > 0
        hard = float(np.sum(model.p_ant[mask]))
        smooth = smooth_antenna_power(W, profile, model, rho=1e-120)
        assert abs(smooth - hard) / hard <= 0.02
        # at the production rho the surrogate still identifies the active set:
        # zero rows contribute nothing, active rows most of their cost
        prod = smooth_antenna_power(W, profile, model, rho=1e-12)
        assert 0.75 * hard <= prod <= hard


class TestTransmitPower:
    def test_full_scale(self):
        assert transmit_power(1.0, 7.5) == 7.5

    def test_half_scale(self):
        assert transmit_power(0.5, 10.0) == pytest.approx(5.0)

    def test_rejects_out_of_range(self):
        with pytest.raises(ConfigError):
            transmit_power(0.0, 1.0)
        with pytest.raises(ConfigError):
            transmit_power(1.5, 1.0)

    def test_trace_identity_after_normalization(self):
        # Tr(Phi_alpha F F^H) == tau for F assembled from a unit direction
        rng = np.random.default_rng(4)
        n, s = 5, 3
        profile = QuantizationProfile.from_bits([4, 8, 12, 16, 6][:n])
        W = random_unit_direction(rng, n, s)
        tau = 0.37
        F = math.sqrt(tau) * W / np.sqrt(profile.alpha)[:, None]
        trace = float(np.sum(profile.alpha[:, None] * np.abs(F) ** 2))
        assert trace == pytest.approx(tau, rel=1e-12)
