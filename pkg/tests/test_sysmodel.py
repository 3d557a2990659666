import math

import numpy as np
import pytest

from qrsma.sysmodel import (
    ConfigError,
    QuantizationProfile,
    SystemConfig,
    dbm_to_watts,
    distortion_factor,
    quantization_noise_cov,
    quantize_signal,
    thermal_noise_watts,
    watts_to_dbm,
)


def lloyd_max_distortion(bits, tol=1e-14, max_iter=200000):
    """Oracle: MMSE scalar quantizer distortion for a unit-variance Gaussian.

    Centroid/boundary fixed-point refinement with exact Gaussian integrals,
    iterated until the centroids stop moving.
    """
    def phi(x):
        return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)

    def Phi(x):
        return 0.5 * (1.0 + np.vectorize(math.erf)(x / math.sqrt(2.0)))

    levels = 2 ** bits
    c = np.linspace(-4.0, 4.0, levels)
    for _ in range(max_iter):
        t = 0.5 * (c[:-1] + c[1:])
        p = np.diff(np.concatenate(([0.0], Phi(t), [1.0])))
        m = np.diff(-np.concatenate(([0.0], phi(t), [0.0])))
        c_new = m / p
        if np.max(np.abs(c_new - c)) < tol:
            c = c_new
            break
        c = c_new
    return 1.0 - float(np.sum(c * c * p))


class TestDistortionFactor:
    def test_table_reproduced_by_lloyd_max_oracle(self):
        for b in range(1, 6):
            assert distortion_factor(b) == pytest.approx(lloyd_max_distortion(b), abs=1e-9)

    def test_table_matches_quoted_values(self):
        # classic four-digit table entries; the converged fixed point differs
        # from the historical numbers by <0.25% at b=4,5
        quoted = {1: 0.3634, 2: 0.1175, 3: 0.03454, 4: 0.009497, 5: 0.002499}
        for b, v in quoted.items():
            assert distortion_factor(b) == pytest.approx(v, rel=2.5e-3)

    def test_high_resolution_formula(self):
        assert distortion_factor(6) == pytest.approx(math.pi * math.sqrt(3) / 2 / 2 ** 12, rel=1e-12)
        assert distortion_factor(6) == pytest.approx(6.6423e-4, rel=1e-4)

    def test_lossless_limit(self):
        assert distortion_factor(30) < 1e-17
        assert 1.0 - distortion_factor(30) == pytest.approx(1.0, abs=1e-15)

    def test_strictly_decreasing_over_1_to_24(self):
        betas = [distortion_factor(b) for b in range(1, 25)]
        assert all(a > b for a, b in zip(betas, betas[1:]))

    def test_invalid_bits(self):
        with pytest.raises(ConfigError):
            distortion_factor(0)
        with pytest.raises(ConfigError):
            distortion_factor(-3)


class TestQuantizationProfile:
    def test_alpha_beta_partition(self):
        prof = QuantizationProfile.from_bits([1, 3, 5, 8, 16])
        np.testing.assert_array_equal(prof.alpha + prof.beta, np.ones(5))

    def test_beta_non_increasing_in_bits(self):
        prof = QuantizationProfile.from_bits(range(1, 25))
        assert np.all(np.diff(prof.beta) < 0)

    def test_restrict(self):
        prof = QuantizationProfile.from_bits([4, 8, 12, 16])
        sub = prof.restrict(np.array([True, False, True, False]))
        np.testing.assert_array_equal(sub.bits, [4, 12])


class TestQuantizeSignal:
    def test_identity_for_lossless(self):
        n = 4
        prof = QuantizationProfile(bits=np.full(n, 64), beta=np.zeros(n), alpha=np.ones(n))
        x = np.arange(n) + 1j * np.arange(n)
        np.testing.assert_array_equal(quantize_signal(x, prof, np.zeros(n)), x)

    def test_zero_input_passes_noise(self):
        prof = QuantizationProfile.from_bits([4, 4, 4])
        q = np.array([1 + 1j, 2.0, -3j])
        np.testing.assert_array_equal(quantize_signal(np.zeros(3), prof, q), q)

    def test_dimension_mismatch(self):
        prof = QuantizationProfile.from_bits([4, 4])
        with pytest.raises(ConfigError):
            quantize_signal(np.zeros(3), prof, np.zeros(3))
        with pytest.raises(ConfigError):
            quantize_signal(np.zeros(2), prof, np.zeros(3))

    def test_second_moments_match_model(self):
        # empirical covariance of x_q over many draws vs the linear model
        rng = np.random.default_rng(7)
        n, k, m = 2, 1, 200_000
        prof = QuantizationProfile.from_bits([4, 4])
        p = 2.0
        F = (rng.standard_normal((n, k + 1)) + 1j * rng.standard_normal((n, k + 1))) / 2
        rq = quantization_noise_cov(F, p, prof)

        s = (rng.standard_normal((m, k + 1)) + 1j * rng.standard_normal((m, k + 1))) / math.sqrt(2)
        x = math.sqrt(p) * s @ F.T
        q = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) * np.sqrt(rq / 2)
        xq = quantize_signal(x.T, prof, q.T).T

        emp = xq.T @ xq.conj() / m
        model = np.diag(prof.alpha) @ (p * F @ F.conj().T) @ np.diag(prof.alpha) + np.diag(rq)
        rel = np.linalg.norm(emp - model) / np.linalg.norm(model)
        assert rel <= 3.0 / math.sqrt(m)


class TestQuantizationNoiseCov:
    def test_zero_precoder(self):
        prof = QuantizationProfile.from_bits([3, 3])
        np.testing.assert_array_equal(quantization_noise_cov(np.zeros((2, 3)), 5.0, prof), np.zeros(2))

    def test_infinite_resolution(self):
        n = 3
        prof = QuantizationProfile(bits=np.full(n, 64), beta=np.zeros(n), alpha=np.ones(n))
        F = np.ones((n, 2), dtype=complex)
        np.testing.assert_array_equal(quantization_noise_cov(F, 5.0, prof), np.zeros(n))

    def test_hand_expanded_two_by_two(self):
        prof = QuantizationProfile.from_bits([2, 5])
        F = np.array([[1 + 1j, 2.0], [0.5j, -1.0]])
        p = 3.0
        got = quantization_noise_cov(F, p, prof)
        for i in range(2):
            row = p * sum(abs(F[i, j]) ** 2 for j in range(2))
            assert got[i] == pytest.approx(prof.alpha[i] * prof.beta[i] * row, rel=1e-14)


class TestUnitsAndConfig:
    def test_dbm_round_trip(self):
        assert dbm_to_watts(30.0) == pytest.approx(1.0)
        assert dbm_to_watts(40.0) == pytest.approx(10.0)
        assert watts_to_dbm(dbm_to_watts(17.3)) == pytest.approx(17.3)

    def test_thermal_noise_default(self):
        # -174 dBm/Hz + 10 log10(150 MHz) + 5 dB noise figure
        expect_dbm = -174.0 + 10.0 * math.log10(150e6) + 5.0
        assert thermal_noise_watts(150e6, 5.0) == pytest.approx(dbm_to_watts(expect_dbm))
        cfg = SystemConfig()
        assert cfg.noise_w == pytest.approx(thermal_noise_watts(150e6, 5.0))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SystemConfig(n_antennas=4, n_users=4, bits=(8,))
        with pytest.raises(ConfigError):
            SystemConfig(kappa=1.5)
        with pytest.raises(ConfigError):
            SystemConfig(pa_efficiency=0.0)
        with pytest.raises(ConfigError):
            SystemConfig(n_antennas=16, bits=(4, 8, 12))  # does not tile 16

    def test_bits_tiling(self):
        cfg = SystemConfig(n_antennas=8, n_users=2, bits=(4, 8))
        np.testing.assert_array_equal(cfg.bits_vector(), [4, 8, 4, 8, 4, 8, 4, 8])
