"""Classical oscillator comparator for the two-quench protocol.

A classical particle of energy E_1 = epsilon * hbar omega / 2 sits in a
static trap. At t = 0 the trap starts moving with velocity kappa and
acceleration lam (dimensionless, as in :mod:`quenchkit.sho`); at t = tau it
stops. The quantities here are ratios E_3/E_1 of final to initial energy.

The initial state is labelled by the dimensionless position y (with
y^2 <= epsilon) and a branch ``sign``. ``sign`` is the sign in front of the
sqrt(epsilon - y^2) term of the closed form; it corresponds to the initial
velocity u_1 = -sign * sqrt(epsilon - y^2).

Position averages use the uniform measure on y in [-sqrt eps, sqrt eps],
not the time-weighted (arcsine) measure of a classical orbit.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .sho import ShoKinematics


@dataclass(frozen=True)
class ClassicalInit:
    epsilon: float
    y: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.y * self.y > self.epsilon * (1 + 1e-14):
            raise ValueError(f"y^2 = {self.y * self.y} exceeds epsilon = {self.epsilon}")

    @property
    def velocity(self) -> float:
        """Initial dimensionless velocity of this branch."""
        return -self.sign * math.sqrt(max(self.epsilon - self.y * self.y, 0.0))


def _ratio(eps, y, sign, kappa, lam, tau):
    # vectorised over y and sign
    root = np.sqrt(np.maximum(eps - y * y, 0.0))
    c, s = np.cos(tau), np.sin(tau)
    m = kappa ** 2 + lam * (y + lam)
    bracket = (eps + 2 * m + 2 * kappa * lam * tau + lam ** 2 * tau ** 2
               - 2 * (m + kappa * lam * tau) * c
               - 2 * (y * kappa + lam * (y + lam) * tau) * s
               + sign * 2 * root * (kappa - (kappa + lam * tau) * c + lam * s))
    return bracket / eps


def classical_energy_ratio(init: ClassicalInit, kin: ShoKinematics) -> float:
    """E_3/E_1 for one initial condition."""
    return float(_ratio(init.epsilon, init.y, init.sign, kin.kappa, kin.lam, kin.tau))


def trajectory_energy_ratio(init: ClassicalInit, kin: ShoKinematics) -> float:
    """E_3/E_1 from the piecewise analytic trajectory (independent of the closed form).

    Between the quenches the coordinate relative to the moving centre obeys
    x'' = -x - lam, so x_2(t) = -lam + (y + lam) cos t + (u_1 - kappa) sin t.
    After the stop the lab velocity is kappa + lam tau + x_2'(tau) and the
    displacement from the (now static) centre is x_2(tau).
    """
    lam, kappa, tau = kin.lam, kin.kappa, kin.tau
    u1 = init.velocity
    x2 = -lam + (init.y + lam) * math.cos(tau) + (u1 - kappa) * math.sin(tau)
    v2 = -(init.y + lam) * math.sin(tau) + (u1 - kappa) * math.cos(tau)
    v3 = kappa + lam * tau + v2
    return (x2 * x2 + v3 * v3) / init.epsilon


def position_averaged_ratio(epsilon: float, sign: int, kin: ShoKinematics) -> float:
    """Uniform average of E_3/E_1 over y in [-sqrt eps, sqrt eps] for one branch."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    k, l, t = kin.kappa, kin.lam, kin.tau
    p = sign * math.pi * math.sqrt(epsilon)
    c, s = math.cos(t), math.sin(t)
    bracket = (2 * epsilon + p * k + 4 * k * k + 4 * k * l * t + 2 * l * l * (2 + t * t)
               - (4 * l * l + (p + 4 * k) * (k + l * t)) * c
               + l * (p - 4 * l * t) * s)
    return bracket / (2 * epsilon)


def sign_averaged_ratio(epsilon: float, kin: ShoKinematics) -> float:
    """Average of :func:`position_averaged_ratio` over both branches."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    k, l, t = kin.kappa, kin.lam, kin.tau
    bracket = (epsilon + 2 * k * k + 2 * k * l * t + l * l * (2 + t * t)
               - 2 * (k * k + l * l + k * l * t) * math.cos(t)
               - 2 * l * l * t * math.sin(t))
    return bracket / epsilon


class MonteCarloResult(NamedTuple):
    mean: float
    stderr: float
    n_samples: int


CHUNK = 65536


def _chunk_sums(seed_seq, size, epsilon, kin):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    root = math.sqrt(epsilon)
    y = rng.uniform(-root, root, size)
    sign = rng.choice(np.array([-1.0, 1.0]), size)
    r = _ratio(epsilon, y, sign, kin.kappa, kin.lam, kin.tau)
    return float(np.sum(r)), float(np.sum(r * r))


def monte_carlo_verify(epsilon: float, kin: ShoKinematics, n_samples: int = 10 ** 6,
                       seed: int = 0, workers: int = 1) -> MonteCarloResult:
    """Monte Carlo estimate of the sign- and position-averaged E_3/E_1.

    Samples y uniformly on [-sqrt eps, sqrt eps] and the branch with equal
    probability using PCG64. Samples are drawn in fixed chunks of 65536,
    each from its own ``SeedSequence(seed).spawn`` child, and the chunk sums
    are combined in chunk order, so the result does not depend on
    ``workers``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    sizes = [CHUNK] * (n_samples // CHUNK)
    if n_samples % CHUNK:
        sizes.append(n_samples % CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(children, sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _chunk_sums(job[0], job[1], epsilon, kin), jobs))
    else:
        parts = [_chunk_sums(s, n, epsilon, kin) for s, n in jobs]
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    mean = total / n_samples
    if n_samples > 1:
        var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
        stderr = math.sqrt(var / n_samples)
    else:
        stderr = float("nan")
    return MonteCarloResult(mean, stderr, n_samples)
