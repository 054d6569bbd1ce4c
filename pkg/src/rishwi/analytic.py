"""Closed-form MRC moments and the approximate ergodic uplink rate.

All moments are exact expectations over the NLoS components, the direct links
and the RIS phase noise for a fixed phase design ``theta``. The evaluation
proceeds in two conditioning steps:

1. Given the RIS-BS matrix and the phase noise, every ``g_k`` is complex
   Gaussian, independent across users, so fourth moments reduce to Gaussian
   quadratic-form identities.
2. The remaining expectations over ``H_tilde`` (i.i.d. Gaussian) and the
   uniform phase noise are polynomial; phase-noise moments up to fourth order
   are taken exactly through ``sinc(k_r pi)`` and ``sinc(2 k_r pi)``.

Only the LoS products ``f_k``, their pairwise overlaps and the user LoS Gram
matrix depend on the design, so :class:`RateModel` precomputes everything else
and evaluates a whole population of phase vectors in one vectorized call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (
    PhaseVector,
    ScenarioGeometry,
    SystemConfig,
    ris_departure_vector,
    user_los_vectors,
)
from .errors import ConfigError, DimensionError


def sinc(x):
    """Unnormalized sinc, ``sin(x)/x`` with ``sinc(0) = 1``."""
    return np.sinc(np.asarray(x, dtype=float) / math.pi)


@dataclass(frozen=True)
class PhaseNoiseMoments:
    """Central moments of ``u = exp(j theta_hat)``, ``theta_hat ~ U[-k_r pi, k_r pi]``.

    With ``z = u - s``: ``var = E|z|^2``, ``pseudo = E z^2``, ``third = E z^2 z*``,
    ``fourth = E|z|^4``. All are real because the distribution is symmetric.
    """

    s: float
    s2: float
    var: float
    pseudo: float
    third: float
    fourth: float

    @classmethod
    def from_severity(cls, k_r: float) -> "PhaseNoiseMoments":
        s = float(sinc(k_r * math.pi))
        s2 = float(sinc(2.0 * k_r * math.pi))
        return cls(
            s=s,
            s2=s2,
            var=1.0 - s * s,
            pseudo=s2 - s * s,
            third=-s - s * s2 + 2.0 * s**3,
            fourth=(1.0 + s * s) ** 2 - 4.0 * s * s * (1.0 + s * s) + 2.0 * s * s * (1.0 + s2),
        )


def phase_noise_moment4(wa, wb, wc, wd, pn: PhaseNoiseMoments):
    """``E[F_a^* F_b F_c^* F_d]`` for ``F_x = sum_n w_xn u_n`` with i.i.d. phase noise ``u_n``.

    Inputs broadcast over leading axes; the last axis indexes RIS elements.
    """
    s, v11, v20, t3, t4 = pn.s, pn.var, pn.pseudo, pn.third, pn.fourth
    ac, cc = np.conj(wa), np.conj(wc)
    fa, fb, fc, fd = (x.sum(-1) for x in (ac, wb, cc, wd))  # fa, fc already conjugated

    def S(*xs):
        out = xs[0]
        for x in xs[1:]:
            out = out * x
        return out.sum(-1)

    P = S(ac, wb, cc, wd)
    second = s * s * (
        fa * fb * v11 * S(cc, wd)
        + fa * fc * v20 * S(wb, wd)
        + fa * fd * v11 * S(wb, cc)
        + fb * fc * v11 * S(ac, wd)
        + fb * fd * v20 * S(ac, cc)
        + fc * fd * v11 * S(ac, wb)
    )
    third = s * t3 * (fa * S(wb, cc, wd) + fb * S(ac, cc, wd) + fc * S(ac, wb, wd) + fd * S(ac, wb, cc))
    fourth = (
        t4 * P
        + v11 * v11 * (S(ac, wb) * S(cc, wd) - P)
        + v11 * v11 * (S(ac, wd) * S(wb, cc) - P)
        + v20 * v20 * (S(ac, cc) * S(wb, wd) - P)
    )
    return s**4 * fa * fb * fc * fd + second + third + fourth


@dataclass(frozen=True)
class DerivedConstants:
    a: np.ndarray  # (K,)
    f: np.ndarray  # (K,) complex, noise-free cascaded LoS gain
    c: np.ndarray  # (K,) E|f_k(Theta~)|^2
    sinc2: float


@dataclass(frozen=True)
class RateBreakdown:
    """Per-user moment terms; ``e_interf[k][i]`` and ``e_cross[k][i]`` are NaN for i == k."""

    e_signal: np.ndarray
    e_interf: np.ndarray
    e_noise: np.ndarray
    e_hwi: np.ndarray
    e_fourth: np.ndarray
    e_cross: np.ndarray
    rate: np.ndarray

    def sinr(self, config: SystemConfig) -> np.ndarray:
        return 2.0 ** self.rate - 1.0


class RateModel:
    """Vectorized analytic moments for one scenario.

    Every ``*_batch`` method accepts phases of shape ``(..., N)`` and returns
    arrays with the leading shape preserved.
    """

    def __init__(self, geometry: ScenarioGeometry, config: SystemConfig):
        geometry.check(config)
        if not (math.isfinite(geometry.rho) and np.all(np.isfinite(geometry.epsilon))):
            raise ConfigError("analytic moments need finite Rician factors")
        self.geometry = geometry
        self.config = config
        self.beta = ris_departure_vector(geometry, config)
        self.h_bar = user_los_vectors(geometry, config)
        self.w0 = self.beta.conj()[None, :] * self.h_bar  # (K, N)
        # gram[k, i] = h_bar_i^H h_bar_k
        self.gram = self.h_bar @ self.h_bar.conj().T
        self.pn = PhaseNoiseMoments.from_severity(config.k_r)
        rho, eps = geometry.rho, geometry.epsilon
        self.a = geometry.nu * geometry.mu / ((rho + 1.0) * (eps + 1.0))
        self._pair = ~np.eye(config.K, dtype=bool)

    @classmethod
    def from_vectors(cls, beta, h_bar, geometry: ScenarioGeometry, config: SystemConfig) -> "RateModel":
        """Model with explicit LoS vectors (bypasses the USPA construction)."""
        model = cls(geometry, config)
        beta = np.asarray(beta, dtype=complex)
        h_bar = np.asarray(h_bar, dtype=complex)
        if beta.shape != (config.N,) or h_bar.shape != (config.K, config.N):
            raise DimensionError("LoS vectors do not match (N,) and (K, N)")
        model.beta, model.h_bar = beta, h_bar
        model.w0 = beta.conj()[None, :] * h_bar
        model.gram = h_bar @ h_bar.conj().T
        return model

    def _weights(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.config.N:
            raise DimensionError(f"expected {self.config.N} phases, got {theta.shape[-1]}")
        return self.w0 * np.exp(1j * theta)[..., None, :]  # (..., K, N)

    def f_batch(self, theta):
        return self._weights(theta).sum(-1)

    def derived(self, theta) -> DerivedConstants:
        f = self.f_batch(theta)
        s2 = self.pn.s**2
        c = s2 * np.abs(f) ** 2 + (1.0 - s2) * self.config.N
        return DerivedConstants(a=self.a.copy(), f=f, c=c, sinc2=s2)

    def _phase_noise_stats(self, theta):
        """c_k, E|F_k|^4, E|F_k|^2|F_i|^2 and Re(gram_ki E[F_k^* F_i])."""
        w = self._weights(theta)
        N = self.config.N
        s2 = self.pn.s**2
        f = w.sum(-1)
        c = s2 * np.abs(f) ** 2 + (1.0 - s2) * N
        wk = w[..., :, None, :]
        wi = w[..., None, :, :]
        x = phase_noise_moment4(wk, wk, wi, wi, self.pn).real  # (..., K, K)
        q = np.diagonal(x, axis1=-2, axis2=-1)
        corr = s2 * np.conj(f)[..., :, None] * f[..., None, :] + (1.0 - s2) * np.conj(self.gram)
        r = (self.gram * corr).real
        return c, q, x, r

    def breakdown_batch(self, theta) -> RateBreakdown:
        cfg, geo = self.config, self.geometry
        M, N = float(cfg.M), float(cfg.N)
        rho = geo.rho
        eps, xi, a = geo.epsilon, geo.xi, self.a
        c, q, x, r = self._phase_noise_stats(theta)
        g2 = np.abs(self.gram) ** 2

        # expectations over X = sqrt(rho) a_M b^H + G, then over phase noise
        EQ1 = rho * M * c + M * N
        EQ1sq = rho**2 * M**2 * q + 2 * rho * M**2 * N * c + M**2 * N**2 + M * N**2 + 2 * rho * M * N * c
        EQ2 = M * N * (rho + 1)
        EQ2sq = N**2 * M**2 * (rho + 1) ** 2 + M * N * (1 + 2 * rho)
        EQ1Q2 = N * (rho + 1) * M * (rho * M * c + M * N) + M * N + 2 * rho * M * c
        EtrA2 = N**2 * (rho**2 * M**2 + 2 * rho * M + M) + N * (2 * rho * M**2 + M**2)
        EAh2 = c * (rho**2 * N * M**2 + 2 * rho * M**2 + rho * M * N) + rho * N**2 * M + N * M**2 + N**2 * M
        EhAh2 = (rho**2 * M**2 * x + 2 * rho * M**2 * r
                 + rho * M * N * (c[..., :, None] + c[..., None, :]) + M**2 * g2 + M * N**2)

        e_noise = a * eps * EQ1 + a * EQ2 + M * xi
        e_signal = (
            a**2 * eps**2 * EQ1sq + a**2 * EQ2sq + M**2 * xi**2 + 2 * a**2 * eps * EQ1Q2
            + 2 * a * eps * M * xi * EQ1 + 2 * a * M * xi * EQ2 + a**2 * EtrA2 + 2 * a * xi * EQ2
            + M * xi**2 + 2 * a**2 * eps * EAh2 + 2 * a * eps * xi * EQ1
        )

        ae = a * eps
        ak, ai = a[:, None], a[None, :]
        aek, aei = ae[:, None], ae[None, :]
        xik, xii = xi[:, None], xi[None, :]
        e_interf = (
            aek * aei * EhAh2
            + aei * ak * EAh2[..., None, :] + aei * xik * EQ1[..., None, :]
            + aek * ai * EAh2[..., :, None] + aek * xii * EQ1[..., :, None]
            + ak * ai * EtrA2 + (ai * xik + ak * xii) * EQ2 + M * xii * xik
        )

        # single BS antenna: y = sqrt(rho) a_m conj(b) + g, P_k = h_bar_k^T y, R = ||y||^2
        EP = rho * c + N
        EP4 = rho**2 * q + 4 * rho * N * c + 2 * N**2
        EPR = (rho * c + N) * (rho + 1) * N + 2 * rho * c + N
        ER = (rho + 1) * N
        ER2 = (rho + 1) ** 2 * N**2 + N * (1 + 2 * rho)
        EPP = rho**2 * x + rho * N * (c[..., :, None] + c[..., None, :]) + N**2 + 2 * rho * r + g2

        e_fourth = (a**2 * eps**2 * EP4 + 4 * a**2 * eps * EPR + 4 * a * eps * xi * EP
                    + 2 * a**2 * ER2 + 4 * a * xi * ER + 2 * xi**2)
        e_cross = (
            aei * aek * EPP
            + aei * ak * EPR[..., None, :] + aei * xik * EP[..., None, :]
            + ai * aek * EPR[..., :, None] + ai * ak * ER2 + ai * xik * ER
            + xii * aek * EP[..., :, None] + xii * ak * ER + xii * xik
        )

        nan_diag = np.where(self._pair, 1.0, np.nan)
        e_interf = e_interf * nan_diag
        e_cross = e_cross * nan_diag

        p = cfg.p_array
        interf_power = np.nansum(e_interf * p[None, :], axis=-1)
        cross_power = np.nansum(e_cross * p[None, :], axis=-1)
        e_hwi = (cfg.k_u * (interf_power + p * e_signal)
                 + (1 + cfg.k_u) * cfg.k_b * M * (p * e_fourth + cross_power))
        rate = np.log2(1.0 + p * e_signal / (interf_power + e_hwi + cfg.sigma2 * e_noise))
        return RateBreakdown(e_signal, e_interf, e_noise, e_hwi, e_fourth, e_cross, rate)

    def rates_batch(self, theta) -> np.ndarray:
        return self.breakdown_batch(theta).rate

    def breakdown(self, phases: PhaseVector | np.ndarray) -> RateBreakdown:
        theta = phases.theta if isinstance(phases, PhaseVector) else np.asarray(phases, dtype=float)
        if theta.ndim != 1:
            raise DimensionError("breakdown expects a single phase vector")
        return self.breakdown_batch(theta)


def _model(geometry, config) -> RateModel:
    return RateModel(geometry, config)


def _check_user(k: int, K: int):
    if not 0 <= k < K:
        raise IndexError(f"user index {k} out of range for K={K}")


def _check_pair(k: int, i: int, K: int):
    _check_user(k, K)
    _check_user(i, K)
    if i == k:
        raise ValueError("interferer index must differ from the user index")


def derived_constants(phases: PhaseVector, geometry: ScenarioGeometry, config: SystemConfig) -> DerivedConstants:
    return _model(geometry, config).derived(phases.theta)


def f_k(phases: PhaseVector, geometry: ScenarioGeometry, config: SystemConfig, k: int) -> complex:
    """``a_N(phi_rb)^H diag(exp(j theta)) h_bar_k``."""
    _check_user(k, config.K)
    return complex(_model(geometry, config).f_batch(phases.theta)[k])


def e_signal(k, phases, geometry, config) -> float:
    """``E ||g_k||^4``."""
    _check_user(k, config.K)
    return float(_model(geometry, config).breakdown(phases).e_signal[k])


def e_interf(k, i, phases, geometry, config) -> float:
    """``E |g_k^H g_i|^2`` for i != k."""
    _check_pair(k, i, config.K)
    return float(_model(geometry, config).breakdown(phases).e_interf[k, i])


def e_noise(k, phases, geometry, config) -> float:
    """``E ||g_k||^2``."""
    _check_user(k, config.K)
    return float(_model(geometry, config).breakdown(phases).e_noise[k])


def cross_moment(k, i, phases, geometry, config) -> float:
    """Per-antenna ``E |g_{i,m}|^2 |g_{k,m}|^2`` for i != k (the same for every m)."""
    _check_pair(k, i, config.K)
    return float(_model(geometry, config).breakdown(phases).e_cross[k, i])


def fourth_moment_per_antenna(k, phases, geometry, config) -> float:
    """Per-antenna ``E |g_{k,m}|^4``."""
    _check_user(k, config.K)
    return float(_model(geometry, config).breakdown(phases).e_fourth[k])


def e_hwi(k, phases, geometry, config) -> float:
    _check_user(k, config.K)
    return float(_model(geometry, config).breakdown(phases).e_hwi[k])


def rate(k, phases, geometry, config) -> float:
    """Approximate ergodic rate of user k in bits/s/Hz."""
    _check_user(k, config.K)
    return float(_model(geometry, config).breakdown(phases).rate[k])


def rates(phases, geometry, config) -> np.ndarray:
    return _model(geometry, config).breakdown(phases).rate


def asymptotic_rate(k: int, geometry: ScenarioGeometry, config: SystemConfig, p: float) -> float:
    """Large-M limit of user k's rate when every user transmits ``p / M`` over NLoS-only links."""
    _check_user(k, config.K)
    if geometry.rho != 0 or np.any(geometry.epsilon != 0):
        raise ConfigError("the power-scaling limit requires rho = epsilon_k = 0")
    if not p > 0:
        raise ConfigError("total power p must be positive")
    N = config.N
    vm = geometry.nu * geometry.mu
    xi = geometry.xi
    A1 = vm[k] * N * (vm[k] * N + vm[k] + 2 * xi[k]) + xi[k] ** 2
    A2 = geometry.nu**2 * geometry.mu[k] * np.delete(geometry.mu, k) * N
    A3 = vm[k] * N + xi[k]
    den = p * (1 + config.k_u) * A2.sum() + p * config.k_u * A1 + A3 * config.sigma2
    return float(np.log2(1.0 + p * A1 / den))
