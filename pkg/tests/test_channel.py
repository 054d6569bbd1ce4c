import math

import numpy as np
import pytest

from rishwi.channel import (
    ChannelRealization,
    LinkStatistics,
    PhaseVector,
    array_response,
    dbm_to_watt,
    effective_channel,
    effective_channels_batch,
    los_channels,
    make_rng,
    rician_weights,
    sample_batch,
    sample_realization,
    steering_vector,
    watt_to_dbm,
)
from rishwi.errors import ConfigError, DimensionError

from conftest import make_config, make_geometry


def steering_loop(Z, va, ve, dl):
    side = int(round(math.sqrt(Z)))
    out = []
    for m in range(side):
        for n in range(side):
            out.append(complex(math.cos(2 * math.pi * dl * (m * math.sin(va) * math.sin(ve) + n * math.cos(ve))),
                               math.sin(2 * math.pi * dl * (m * math.sin(va) * math.sin(ve) + n * math.cos(ve)))))
    return np.array(out)


class TestSteering:
    def test_single_element(self):
        assert np.allclose(steering_vector(1, 0.3, 1.2), [1.0])

    def test_broadside_half_wavelength(self):
        assert np.allclose(steering_vector(4, 0.0, 0.0, 0.5), [1, -1, 1, -1])

    def test_matches_scalar_loop(self):
        ref = steering_loop(16, 0.7, 1.1, 0.5)
        assert np.allclose(steering_vector(16, 0.7, 1.1, 0.5), ref, atol=1e-13)

    @pytest.mark.parametrize("Z", [2, 3, 5, 50])
    def test_non_square_rejected(self, Z):
        with pytest.raises(DimensionError):
            steering_vector(Z, 0.1, 0.2)

    def test_unit_modulus(self):
        v = steering_vector(25, 2.0, 0.4, 0.37)
        assert np.allclose(np.abs(v), 1.0)

    def test_array_response_truncates_enclosing_square(self):
        full = steering_vector(64, 0.3, 0.9)
        assert np.allclose(array_response(50, 0.3, 0.9), full[:50])
        assert np.allclose(array_response(49, 0.3, 0.9), steering_vector(49, 0.3, 0.9))


class TestLos:
    def test_scalar_case(self):
        geo = make_geometry(1)
        H, h = los_channels(geo, make_config(M=1, N=1, K=1))
        assert np.allclose(H, [[1.0]]) and np.allclose(h, [[1.0]])

    def test_outer_product_loop(self):
        geo = make_geometry(2, seed=11)
        cfg = make_config(M=4, N=4)
        H, h = los_channels(geo, cfg)
        a_m = steering_loop(4, geo.psi_a_rb, geo.psi_e_rb, 0.5)
        a_n = steering_loop(4, geo.phi_a_rb, geo.phi_e_rb, 0.5)
        ref = np.empty((4, 4), complex)
        for m in range(4):
            for n in range(4):
                ref[m, n] = a_m[m] * a_n[n].conjugate()
        assert np.allclose(H, ref)
        assert np.allclose(h[1], steering_loop(4, geo.psi_a_kr[1], geo.psi_e_kr[1], 0.5))
        assert np.allclose(np.abs(H), 1.0)
        assert np.linalg.matrix_rank(H) == 1

    def test_user_count_mismatch(self):
        with pytest.raises(DimensionError):
            los_channels(make_geometry(3), make_config(K=2))


class TestConfig:
    def test_scalar_power_broadcast(self):
        assert make_config(K=3, p=2.0).p == (2.0, 2.0, 2.0)

    @pytest.mark.parametrize("kw", [dict(N=0), dict(K=0), dict(sigma2=0.0), dict(k_r=1.5), dict(k_u=-0.1), dict(p=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises((ConfigError, DimensionError)):
            make_config(**kw)

    def test_non_square_arrays_allowed(self):
        cfg = make_config(M=50, N=2)
        geo = make_geometry(2)
        H, h = los_channels(geo, cfg)
        assert H.shape == (50, 2) and h.shape == (2, 2)
        assert np.allclose(h[0], steering_vector(4, geo.psi_a_kr[0], geo.psi_e_kr[0])[:2])

    def test_dbm_round_trip(self):
        assert dbm_to_watt(30.0) == pytest.approx(1.0, rel=1e-15)
        assert dbm_to_watt(-104.0) == pytest.approx(10 ** -13.4, rel=1e-14)
        assert watt_to_dbm(dbm_to_watt(-104.0)) == pytest.approx(-104.0, abs=1e-12)

    def test_phase_vector_range(self):
        with pytest.raises(ValueError):
            PhaseVector([0.0, 2 * math.pi])
        assert PhaseVector.wrap([-1e-18, 7.0]).theta[0] == 0.0

    def test_geometry_validation(self):
        with pytest.raises(ConfigError):
            make_geometry(2, nu=0.0)
        with pytest.raises(ConfigError):
            make_geometry(2, rho=-1.0)


class TestSampling:
    def test_rician_weights_limits(self):
        los, nlos = rician_weights([0.0, 1.0, np.inf])
        assert np.allclose(los, [0, math.sqrt(0.5), 1]) and np.allclose(nlos, [1, math.sqrt(0.5), 0])

    def test_strong_los_limit(self):
        geo = make_geometry(2).replace(rho=1e12)
        cfg = make_config()
        real = sample_realization(geo, cfg, 5)
        H_bar, _ = los_channels(geo, cfg)
        assert np.max(np.abs(real.H_rb / math.sqrt(geo.nu) - H_bar)) < 1e-5

    def test_no_phase_noise(self):
        real = sample_realization(make_geometry(2), make_config(k_r=0.0), 1)
        assert np.all(real.phase_noise == 0.0)

    def test_phase_noise_interval(self):
        stats = LinkStatistics.build(make_geometry(2), make_config(k_r=0.25))
        pn = sample_batch(stats, make_rng(0), 2000)[3]
        assert pn.min() >= -0.25 * math.pi and pn.max() <= 0.25 * math.pi
        assert pn.max() > 0.24 * math.pi

    def test_ris_bs_power(self):
        geo = make_geometry(2, nu=3.0)
        stats = LinkStatistics.build(geo, make_config(M=1, N=1))
        H = sample_batch(stats, make_rng(2), 100_000)[0]
        assert np.mean(np.abs(H) ** 2) == pytest.approx(3.0, rel=0.02)

    def test_deterministic(self):
        geo, cfg = make_geometry(2), make_config()
        a, b = sample_realization(geo, cfg, 9), sample_realization(geo, cfg, 9)
        assert np.array_equal(a.H_rb, b.H_rb) and np.array_equal(a.phase_noise, b.phase_noise)
        assert not np.array_equal(a.h, sample_realization(geo, cfg, 10).h)


class TestEffectiveChannel:
    def test_ris_path_vanishes(self):
        real = sample_realization(make_geometry(2), make_config(), 0)
        zero = ChannelRealization(real.H_rb, np.zeros_like(real.h), real.d, real.phase_noise)
        assert np.allclose(effective_channel(zero, PhaseVector.random(4, make_rng(1))), real.d)

    def test_matches_loop(self):
        real = sample_realization(make_geometry(2), make_config(), 4)
        ph = PhaseVector.random(4, make_rng(3))
        g = effective_channel(real, ph)
        for k in range(2):
            ref = real.d[k].copy()
            for n in range(4):
                ref += real.H_rb[:, n] * np.exp(1j * (ph.theta[n] + real.phase_noise[n])) * real.h[k, n]
            assert np.allclose(g[k], ref)

    def test_batch_agrees(self):
        real = sample_realization(make_geometry(2), make_config(), 4)
        ph = PhaseVector.random(4, make_rng(3))
        gb = effective_channels_batch(real.H_rb[None], real.h[None], real.d[None], real.phase_noise[None], ph.theta)
        assert np.allclose(gb[0], effective_channel(real, ph))

    def test_dimension_mismatch(self):
        real = sample_realization(make_geometry(2), make_config(), 4)
        with pytest.raises(DimensionError):
            effective_channel(real, PhaseVector(np.zeros(9)))
