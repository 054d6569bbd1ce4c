"""Monte-Carlo estimates of the MRC moments and of the ergodic rate.

Samples are drawn in fixed-size chunks, each from its own Philox substream
spawned from the user seed, so an estimate depends only on ``(seed, n_samples)``
and chunks can be processed by any number of workers. Chunk statistics are
merged with the pairwise mean/covariance update, which is associative.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import (
    LinkStatistics,
    PhaseVector,
    ScenarioGeometry,
    SystemConfig,
    complex_normal,
    effective_channels_batch,
    sample_batch,
)

CHUNK = 20_000
MOMENTS = ("signal", "noise", "interf", "cross", "fourth")
PER_ANTENNA = ("cross", "fourth")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int

    def z_score(self, reference: float) -> float:
        diff = self.mean - reference
        if self.std_error == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.std_error


class RunningMoments:
    """Streaming mean and covariance of vector-valued samples.

    Values are accumulated relative to the first observation (``shift``) to
    keep the sums well conditioned; identical samples give exactly zero variance.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.n = 0
        self.shift = None
        self.mean = np.zeros(dim)
        self.m2 = np.zeros((dim, dim))

    def update(self, samples: np.ndarray) -> "RunningMoments":
        samples = np.asarray(samples, dtype=float).reshape(-1, self.dim)
        if samples.shape[0] == 0:
            return self
        if self.shift is None:
            self.shift = samples[0].copy()
        x = samples - self.shift
        n_b = x.shape[0]
        mean_b = x.mean(axis=0)
        dev = x - mean_b
        other = RunningMoments(self.dim)
        other.n, other.shift, other.mean, other.m2 = n_b, self.shift, mean_b, dev.T @ dev
        self._absorb(other)
        return self

    def _absorb(self, other: "RunningMoments"):
        if other.n == 0:
            return
        if self.n == 0:
            self.n, self.shift, self.mean, self.m2 = other.n, other.shift, other.mean.copy(), other.m2.copy()
            return
        # bring the other accumulator onto our shift
        other_mean = other.mean + (other.shift - self.shift)
        n = self.n + other.n
        delta = other_mean - self.mean
        self.mean = self.mean + delta * (other.n / n)
        self.m2 = self.m2 + other.m2 + np.outer(delta, delta) * (self.n * other.n / n)
        self.n = n

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        out = RunningMoments(self.dim)
        out._absorb(self)
        out._absorb(other)
        return out

    @property
    def value(self) -> np.ndarray:
        return self.mean + (self.shift if self.shift is not None else 0.0)

    @property
    def covariance_of_mean(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros((self.dim, self.dim))
        return self.m2 / (self.n - 1) / self.n

    def estimate(self, j: int = 0) -> McEstimate:
        var = max(self.covariance_of_mean[j, j], 0.0)
        return McEstimate(float(self.value[j]), math.sqrt(var), self.n)


def _parse_selector(which: str, i: int | None):
    m = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*(\d+)\s*\))?\s*", which)
    if m is None or m.group(1) not in MOMENTS:
        raise ValueError(f"unknown moment selector {which!r}; expected one of {MOMENTS}")
    name = m.group(1)
    if m.group(2) is not None:
        i = int(m.group(2))
    if name in ("interf", "cross"):
        if i is None:
            raise ValueError(f"selector {name!r} needs an interferer index")
    else:
        i = None
    return name, i


def _chunks(n_samples: int, seed: int):
    sizes = [CHUNK] * (n_samples // CHUNK)
    if n_samples % CHUNK:
        sizes.append(n_samples % CHUNK)
    seqs = np.random.SeedSequence(int(seed)).spawn(len(sizes))
    return list(zip(sizes, seqs))


def _run_chunks(n_samples, seed, dim, fn, workers):
    jobs = _chunks(n_samples, seed)

    def one(job):
        size, seq = job
        rng = np.random.Generator(np.random.Philox(seq))
        return RunningMoments(dim).update(fn(rng, size))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, jobs))
    else:
        parts = [one(job) for job in jobs]
    acc = RunningMoments(dim)
    for part in parts:  # fixed merge order keeps results worker-independent
        acc._absorb(part)
    return acc


def _check(k, i, config, n_samples):
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    if not 0 <= k < config.K:
        raise IndexError(f"user index {k} out of range")
    if i is not None and (not 0 <= i < config.K or i == k):
        raise ValueError("interferer index must be a different valid user")


def _theta(phases):
    return phases.theta if isinstance(phases, PhaseVector) else np.asarray(phases, dtype=float)


def estimate_moment(which: str, k: int, phases, geometry: ScenarioGeometry, config: SystemConfig,
                    n_samples: int = 100_000, seed: int = 0, i: int | None = None,
                    antenna: int = 0, workers: int = 1) -> McEstimate:
    """Sample mean of the selected MRC moment over fresh channel and phase-noise draws.

    ``which`` is one of ``signal``, ``noise``, ``interf``, ``cross``, ``fourth``;
    the pairwise selectors take the interferer via ``i`` or as ``"interf(1)"``.
    Per-antenna selectors draw only row ``antenna`` of the RIS-BS channel.
    """
    name, i = _parse_selector(which, i)
    _check(k, i, config, n_samples)
    stats = LinkStatistics.build(geometry, config)
    theta = _theta(phases)
    rows = np.array([antenna]) if name in PER_ANTENNA else None

    def fn(rng, size):
        g = effective_channels_batch(*sample_batch(stats, rng, size, rows=rows), theta)
        if name == "signal":
            return np.sum(np.abs(g[:, k]) ** 2, axis=-1) ** 2
        if name == "noise":
            return np.sum(np.abs(g[:, k]) ** 2, axis=-1)
        if name == "interf":
            return np.abs(np.sum(np.conj(g[:, k]) * g[:, i], axis=-1)) ** 2
        if name == "cross":
            return np.abs(g[:, i, 0]) ** 2 * np.abs(g[:, k, 0]) ** 2
        return np.abs(g[:, k, 0]) ** 4

    return _run_chunks(n_samples, seed, 1, fn, workers).estimate(0)


def estimate_moments(k: int, phases, geometry: ScenarioGeometry, config: SystemConfig,
                     n_samples: int = 100_000, seed: int = 0, workers: int = 1) -> dict[str, McEstimate]:
    """All full-array moments of user k from one pass: ``signal``, ``noise``, ``interf(i)``.

    Per-antenna moments are averaged over the M antennas of each draw (valid
    because they do not depend on the antenna index), keyed ``fourth`` and
    ``cross(i)``.
    """
    _check(k, None, config, n_samples)
    stats = LinkStatistics.build(geometry, config)
    theta = _theta(phases)
    others = [i for i in range(config.K) if i != k]
    keys = ["signal", "noise"] + [f"interf({i})" for i in others] + ["fourth"] + [f"cross({i})" for i in others]

    def fn(rng, size):
        g = effective_channels_batch(*sample_batch(stats, rng, size), theta)
        pw = np.abs(g) ** 2  # (B, K, M)
        nk = pw[:, k].sum(-1)
        cols = [nk**2, nk]
        cols += [np.abs(np.sum(np.conj(g[:, k]) * g[:, i], axis=-1)) ** 2 for i in others]
        cols.append(np.mean(pw[:, k] ** 2, axis=-1))
        cols += [np.mean(pw[:, i] * pw[:, k], axis=-1) for i in others]
        return np.stack(cols, axis=-1)

    acc = _run_chunks(n_samples, seed, len(keys), fn, workers)
    return {key: acc.estimate(j) for j, key in enumerate(keys)}


def estimate_moment_table(phases, geometry: ScenarioGeometry, config: SystemConfig,
                          n_samples: int = 100_000, seed: int = 0, per_antenna: bool = False,
                          antenna: int = 0, workers: int = 1) -> dict[str, McEstimate]:
    """Every distinct moment of every user from one set of draws.

    Full-array keys: ``signal[k]``, ``noise[k]``, ``interf[k,i]`` (k < i; the
    moment is symmetric). With ``per_antenna`` only row ``antenna`` of the
    RIS-BS channel is drawn and the keys are ``fourth[k]`` and ``cross[k,i]``.
    """
    _check(0, None, config, n_samples)
    stats = LinkStatistics.build(geometry, config)
    theta = _theta(phases)
    K = config.K
    pairs = [(k, i) for k in range(K) for i in range(k + 1, K)]
    if per_antenna:
        keys = [f"fourth[{k}]" for k in range(K)] + [f"cross[{k},{i}]" for k, i in pairs]
        rows = np.array([antenna])
    else:
        keys = ([f"signal[{k}]" for k in range(K)] + [f"noise[{k}]" for k in range(K)]
                + [f"interf[{k},{i}]" for k, i in pairs])
        rows = None

    def fn(rng, size):
        g = effective_channels_batch(*sample_batch(stats, rng, size, rows=rows), theta)
        pw = np.abs(g) ** 2
        if per_antenna:
            cols = [pw[:, k, 0] ** 2 for k in range(K)] + [pw[:, k, 0] * pw[:, i, 0] for k, i in pairs]
        else:
            norm = pw.sum(-1)
            cols = ([norm[:, k] ** 2 for k in range(K)] + [norm[:, k] for k in range(K)]
                    + [np.abs(np.sum(np.conj(g[:, k]) * g[:, i], axis=-1)) ** 2 for k, i in pairs])
        return np.stack(cols, axis=-1)

    acc = _run_chunks(n_samples, seed, len(keys), fn, workers)
    return {key: acc.estimate(j) for j, key in enumerate(keys)}


def _hwi_power(g, k, config: SystemConfig, rng, hwi: str):
    """HWI power seen by user k's MRC output for each draw, shape (B,)."""
    p = config.p_array
    cross = np.einsum("bm,bim->bi", np.conj(g[:, k]), g)  # g_k^H g_i
    if hwi == "conditional":
        pw = np.abs(g) ** 2
        rx = np.einsum("i,bim,bm->b", p, pw, pw[:, k])
        return config.k_u * (np.abs(cross) ** 2 @ p) + (1 + config.k_u) * config.k_b * rx
    # explicit: draw symbols and distortions, return the realized distortion power
    B, K, M = g.shape
    x = complex_normal(rng, (B, K))
    z_t = complex_normal(rng, (B, K)) * np.sqrt(config.k_u * p)
    y_tilde = g * (np.sqrt(p) * x + z_t)[:, :, None]  # (B, K, M)
    rx_var = config.k_b * np.sum(np.abs(y_tilde) ** 2, axis=1)  # (B, M)
    z_r = complex_normal(rng, (B, M)) * np.sqrt(rx_var)
    distortion = np.sum(cross * z_t, axis=-1) + np.sum(np.conj(g[:, k]) * z_r, axis=-1)
    return np.abs(distortion) ** 2


def estimate_ergodic_rate(k: int, phases, geometry: ScenarioGeometry, config: SystemConfig,
                          n_samples: int = 100_000, seed: int = 0, mode: str = "instantaneous",
                          hwi: str = "conditional", workers: int = 1) -> McEstimate:
    """Monte-Carlo ergodic rate of user k in bits/s/Hz.

    ``instantaneous`` averages ``log2(1 + SINR)`` per draw; ``moment-ratio``
    plugs the sample moments into the approximate-rate ratio (standard error by
    the delta method). ``hwi="explicit"`` samples the distortion noise instead of
    using its conditional power; with ``instantaneous`` that draws one
    distortion per channel draw and is meant for auditing only.
    """
    if mode not in ("instantaneous", "moment-ratio"):
        raise ValueError(f"unknown mode {mode!r}")
    if hwi not in ("conditional", "explicit"):
        raise ValueError(f"unknown hwi mode {hwi!r}")
    _check(k, None, config, n_samples)
    stats = LinkStatistics.build(geometry, config)
    theta = _theta(phases)
    p = config.p_array
    others = np.arange(config.K) != k

    def parts(rng, size):
        g = effective_channels_batch(*sample_batch(stats, rng, size), theta)
        gain = np.sum(np.abs(g[:, k]) ** 2, axis=-1)
        cross = np.abs(np.einsum("bm,bim->bi", np.conj(g[:, k]), g)) ** 2
        num = p[k] * gain**2
        den = cross[:, others] @ p[others] + _hwi_power(g, k, config, rng, hwi) + config.sigma2 * gain
        return num, den

    if mode == "instantaneous":
        def fn(rng, size):
            num, den = parts(rng, size)
            return np.log2(1.0 + num / den)

        return _run_chunks(n_samples, seed, 1, fn, workers).estimate(0)

    def fn2(rng, size):
        return np.stack(parts(rng, size), axis=-1)

    acc = _run_chunks(n_samples, seed, 2, fn2, workers)
    num, den = acc.value
    cov = acc.covariance_of_mean
    ln2 = math.log(2.0)
    grad = np.array([1.0 / (ln2 * (den + num)), -num / (ln2 * den * (den + num))])
    se = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    return McEstimate(float(math.log2(1.0 + num / den)), se, acc.n)
