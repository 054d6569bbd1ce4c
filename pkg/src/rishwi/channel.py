"""Signal model: USPA steering vectors, Rician RIS links, Rayleigh direct links, RIS phase noise.

Conventions shared by every module:

* USPA element ``(m, n)`` sits at flat index ``m * sqrt(Z) + n`` (row-major, m outer).
  The RIS size N must be a perfect square. A non-square BS antenna count M
  (e.g. M=50) uses the first M elements of the smallest enclosing square USPA.
* The RIS-BS LoS matrix is ``a_M(psi_rb) a_N(phi_rb)^H``: ``psi_rb`` is the arrival
  direction at the BS array, ``phi_rb`` the departure direction at the RIS. The
  cascaded LoS gain of user k is therefore ``a_N(phi_rb)^H Theta a_N(psi_kr)``.
* Randomness comes from ``numpy.random.Generator(Philox(seed))``; Philox is a
  counter-based bit generator, so a given 64-bit seed reproduces across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

TWO_PI = 2.0 * math.pi


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Philox-backed generator for a 64-bit seed (or an already spawned SeedSequence)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    if seed < 0 or seed >= 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(int(seed)))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Independent Philox substreams derived from one seed."""
    return [make_rng(child) for child in np.random.SeedSequence(int(seed)).spawn(n)]


def isqrt_exact(z: int, what: str = "Z") -> int:
    r = math.isqrt(int(z)) if z > 0 else -1
    if r < 1 or r * r != z:
        raise DimensionError(f"{what}={z} is not a positive perfect square (USPA)")
    return r


def dbm_to_watt(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(p_watt):
    return 10.0 * np.log10(np.asarray(p_watt, dtype=float)) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """Scalar system parameters; powers and noise in watts.

    Square M and N give full USPAs. Other counts keep the first M (or N)
    elements of the enclosing square array, row-major.
    """

    M: int
    N: int
    K: int
    p: tuple[float, ...]
    sigma2: float
    k_r: float = 0.0
    k_u: float = 0.0
    k_b: float = 0.0
    d_over_lambda: float = 0.5

    def __post_init__(self):
        p = tuple(float(x) for x in np.atleast_1d(self.p))
        if len(p) == 1 and self.K > 1:
            p = p * self.K
        object.__setattr__(self, "p", p)
        for name in ("M", "N", "K"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v}")
        if len(self.p) != self.K:
            raise ConfigError(f"expected {self.K} transmit powers, got {len(self.p)}")
        if not all(x > 0 and math.isfinite(x) for x in self.p):
            raise ConfigError("transmit powers must be positive and finite")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ConfigError("sigma2 must be positive and finite")
        if not 0.0 <= self.k_r <= 1.0:
            raise ConfigError(f"k_r must lie in [0, 1], got {self.k_r}")
        if self.k_u < 0 or self.k_b < 0:
            raise ConfigError("k_u and k_b must be nonnegative")
        if not self.d_over_lambda > 0:
            raise ConfigError("d_over_lambda must be positive")

    @property
    def p_array(self) -> np.ndarray:
        return np.asarray(self.p, dtype=float)

    def replace(self, **changes) -> "SystemConfig":
        fields_ = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields_.update(changes)
        return SystemConfig(**fields_)


def _per_user(value, K: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(K, float(arr[0]))
    if arr.shape != (K,):
        raise DimensionError(f"{name} must have length {K}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class ScenarioGeometry:
    """Large-scale coefficients, Rician factors and angles (radians).

    ``rho`` and ``epsilon`` may be ``inf`` (pure LoS) for sampling; the analytic
    moments require finite values.
    """

    nu: float
    mu: np.ndarray
    xi: np.ndarray
    rho: float
    epsilon: np.ndarray
    psi_a_kr: np.ndarray
    psi_e_kr: np.ndarray
    phi_a_rb: float
    phi_e_rb: float
    psi_a_rb: float
    psi_e_rb: float

    def __post_init__(self):
        K = np.atleast_1d(self.mu).size
        for name in ("mu", "xi", "epsilon", "psi_a_kr", "psi_e_kr"):
            arr = _per_user(getattr(self, name), K, name)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ConfigError("nu must be positive and finite")
        if np.any(self.mu <= 0) or not np.all(np.isfinite(self.mu)):
            raise ConfigError("mu_k must be positive and finite")
        # xi_k = 0 switches the direct link off (used by the no-direct-link arms)
        if np.any(self.xi < 0) or not np.all(np.isfinite(self.xi)):
            raise ConfigError("xi_k must be nonnegative and finite")
        if self.rho < 0 or np.any(self.epsilon < 0):
            raise ConfigError("Rician factors must be nonnegative")
        angles = np.concatenate([self.psi_a_kr, self.psi_e_kr,
                                 [self.phi_a_rb, self.phi_e_rb, self.psi_a_rb, self.psi_e_rb]])
        if not np.all(np.isfinite(angles)):
            raise ConfigError("angles must be finite")

    @property
    def K(self) -> int:
        return self.mu.size

    def replace(self, **changes) -> "ScenarioGeometry":
        fields_ = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields_.update(changes)
        return ScenarioGeometry(**fields_)

    def check(self, config: SystemConfig) -> None:
        if self.K != config.K:
            raise DimensionError(f"geometry has {self.K} users, config has K={config.K}")


@dataclass(frozen=True, eq=False)
class PhaseVector:
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if np.any(theta < 0) or np.any(theta >= TWO_PI) or not np.all(np.isfinite(theta)):
            raise ValueError("phases must lie in [0, 2*pi)")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def wrap(cls, theta) -> "PhaseVector":
        t = np.mod(np.asarray(theta, dtype=float), TWO_PI)
        # mod can round up to exactly 2*pi for tiny negative inputs
        t[t >= TWO_PI] = 0.0
        return cls(t)

    @classmethod
    def random(cls, N: int, rng: np.random.Generator) -> "PhaseVector":
        return cls(rng.uniform(0.0, TWO_PI, size=N))

    def __len__(self):
        return self.theta.size


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    H_rb: np.ndarray  # (M, N)
    h: np.ndarray  # (K, N)
    d: np.ndarray  # (K, M)
    phase_noise: np.ndarray  # (N,)

    def check(self, config: SystemConfig) -> None:
        M, N, K = config.M, config.N, config.K
        if self.H_rb.shape != (M, N) or self.h.shape != (K, N) or self.d.shape != (K, M):
            raise DimensionError("realization dimensions do not match the configuration")
        if self.phase_noise.shape != (N,):
            raise DimensionError("phase noise must have length N")


def steering_vector(Z: int, v_a: float, v_e: float, d_over_lambda: float = 0.5) -> np.ndarray:
    """USPA response ``exp(j 2 pi d/lambda (m sin v_a sin v_e + n cos v_e))``, row-major."""
    side = isqrt_exact(Z)
    if not d_over_lambda > 0:
        raise ConfigError("d_over_lambda must be positive")
    idx = np.arange(side, dtype=float)
    phase = 2.0 * math.pi * d_over_lambda * (
        idx[:, None] * (math.sin(v_a) * math.sin(v_e)) + idx[None, :] * math.cos(v_e)
    )
    return np.exp(1j * phase).reshape(-1)


def ris_departure_vector(geometry: ScenarioGeometry, config: SystemConfig) -> np.ndarray:
    """RIS-side steering vector of the RIS-BS link, ``a_N(phi_rb)``."""
    return array_response(config.N, geometry.phi_a_rb, geometry.phi_e_rb, config.d_over_lambda)


def array_response(Z: int, v_a: float, v_e: float, d_over_lambda: float = 0.5) -> np.ndarray:
    """Steering vector for any element count: the first Z entries of the enclosing square USPA."""
    side = math.isqrt(Z - 1) + 1 if Z > 0 else 0
    return steering_vector(side * side, v_a, v_e, d_over_lambda)[:Z]


def bs_arrival_vector(geometry: ScenarioGeometry, config: SystemConfig) -> np.ndarray:
    return array_response(config.M, geometry.psi_a_rb, geometry.psi_e_rb, config.d_over_lambda)


def user_los_vectors(geometry: ScenarioGeometry, config: SystemConfig) -> np.ndarray:
    """Rows are ``a_N(psi_kr)`` for each user, shape (K, N)."""
    return np.stack([
        array_response(config.N, a, e, config.d_over_lambda)
        for a, e in zip(geometry.psi_a_kr, geometry.psi_e_kr)
    ])


def los_channels(geometry: ScenarioGeometry, config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic LoS parts: ``H_bar_rb`` (M, N) and ``h_bar`` (K, N)."""
    geometry.check(config)
    H_bar = np.outer(bs_arrival_vector(geometry, config),
                     ris_departure_vector(geometry, config).conj())
    return H_bar, user_los_vectors(geometry, config)


def rician_weights(factor):
    """LoS and NLoS amplitude weights ``sqrt(K/(K+1))``, ``sqrt(1/(K+1))``; finite at K=inf."""
    factor = np.asarray(factor, dtype=float)
    with np.errstate(divide="ignore"):
        inv = np.where(np.isinf(factor), 0.0, 1.0 / np.where(factor == 0, 1.0, factor))
    los = np.where(factor == 0, 0.0, np.sqrt(1.0 / (1.0 + inv)))
    nlos = np.where(np.isinf(factor), 0.0, np.sqrt(1.0 / (factor + 1.0)))
    return los, nlos


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1): independent real and imaginary parts of variance 1/2."""
    out = rng.standard_normal(tuple(shape) + (2,))
    return (out[..., 0] + 1j * out[..., 1]) * math.sqrt(0.5)


@dataclass(frozen=True, eq=False)
class LinkStatistics:
    """Deterministic quantities needed to draw realizations quickly."""

    H_bar: np.ndarray
    h_bar: np.ndarray
    nu: float
    rho_w: tuple
    mu: np.ndarray
    eps_w: tuple
    xi: np.ndarray
    k_r: float

    @classmethod
    def build(cls, geometry: ScenarioGeometry, config: SystemConfig) -> "LinkStatistics":
        H_bar, h_bar = los_channels(geometry, config)
        return cls(H_bar, h_bar, geometry.nu, rician_weights(geometry.rho), geometry.mu,
                   rician_weights(geometry.epsilon), geometry.xi, config.k_r)


def sample_batch(stats: LinkStatistics, rng: np.random.Generator, size: int,
                 rows: np.ndarray | None = None):
    """Draw ``size`` independent realizations as stacked arrays.

    ``rows`` restricts the RIS-BS matrix and direct links to a subset of BS
    antennas, which is all the per-antenna moments need. Draw order per batch:
    H_tilde, h_tilde, d_tilde, phase noise.
    """
    H_bar = stats.H_bar if rows is None else stats.H_bar[rows]
    M_eff, N = H_bar.shape
    K = stats.h_bar.shape[0]
    los, nlos = stats.rho_w
    H = math.sqrt(stats.nu) * (los * H_bar + nlos * complex_normal(rng, (size, M_eff, N)))
    e_los, e_nlos = stats.eps_w
    h = np.sqrt(stats.mu)[:, None] * (e_los[:, None] * stats.h_bar
                                      + e_nlos[:, None] * complex_normal(rng, (size, K, N)))
    d = np.sqrt(stats.xi)[:, None] * complex_normal(rng, (size, K, M_eff))
    half_width = stats.k_r * math.pi
    pn = rng.uniform(-half_width, half_width, size=(size, N)) if half_width > 0 else np.zeros((size, N))
    return H, h, d, pn


def sample_realization(geometry: ScenarioGeometry, config: SystemConfig, rng_seed: int) -> ChannelRealization:
    stats = LinkStatistics.build(geometry, config)
    H, h, d, pn = sample_batch(stats, make_rng(rng_seed), 1)
    return ChannelRealization(H[0], h[0], d[0], pn[0])


def effective_channels_batch(H, h, d, phase_noise, theta) -> np.ndarray:
    """``g_k = d_k + H_rb diag(exp(j(theta + theta_hat))) h_k`` for stacked draws, shape (B, K, M)."""
    rot = np.exp(1j * (np.asarray(theta)[None, :] + phase_noise))  # (B, N)
    return d + np.einsum("bmn,bkn->bkm", H, rot[:, None, :] * h)


def effective_channel(realization: ChannelRealization, phases: PhaseVector) -> np.ndarray:
    """Per-user effective channels, shape (K, M)."""
    N = realization.H_rb.shape[1]
    if len(phases) != N or realization.h.shape[1] != N:
        raise DimensionError("phase vector length must equal the RIS element count")
    if realization.d.shape[1] != realization.H_rb.shape[0]:
        raise DimensionError("direct links must have one entry per BS antenna")
    rot = np.exp(1j * (phases.theta + realization.phase_noise))
    return realization.d + (realization.H_rb @ (rot[:, None] * realization.h.T)).T
