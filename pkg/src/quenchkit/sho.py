"""Harmonic oscillator under sudden changes of velocity and acceleration.

Units: hbar = m = omega = 1, so velocities are in sqrt(hbar omega/m),
accelerations in sqrt(hbar omega^3/m) and times in 1/omega. Energies are
reported in units of E_0 = hbar omega / 2.

A basis is attached to a frame (X, T, v, a): the potential centre follows
X + v (t-T) + a (t-T)^2 / 2, and

    phi_n(x, t) = psi_n(xi + a) exp(i[a^2 s^3/6 + a s xi + a v s^2/2
                                     + v^2 s/2 + v xi - (n + 1/2 - a^2/2) s])

with s = t - T and xi = x - X - v s - a s^2/2. At s = 0 this reduces to
psi_n(x - X + a) exp(i v (x - X)), which is what the quench matrices assume.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DEFAULT_TAIL_THRESHOLD, ConvergenceWarning, QuenchError, check_tail
from .specfun import (gauss_hermite, hermite_functions, laguerre, laguerre_table,
                      sqrt_factorial_ratio)


@dataclass(frozen=True)
class ShoKinematics:
    """Dimensionless quench parameters.

    kappa = v2 - v1, lam = a2 - a1, rho = a2 + a1, tau = duration of the
    segment that follows the quench (only used by multi-quench chains).
    """

    kappa: float = 0.0
    lam: float = 0.0
    rho: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "lam", "rho", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")

    @classmethod
    def from_motion(cls, v1=0.0, v2=0.0, a1=0.0, a2=0.0, duration=0.0,
                    mass=1.0, hbar=1.0, omega=1.0) -> "ShoKinematics":
        """Build from physical velocities/accelerations in arbitrary units."""
        sv = math.sqrt(mass / (hbar * omega))
        sa = math.sqrt(mass / (hbar * omega ** 3))
        return cls(sv * (v2 - v1), sa * (a2 - a1), sa * (a2 + a1), omega * duration)

    @property
    def eta_sq(self) -> float:
        return self.kappa ** 2 + self.lam ** 2


def _prefactor(kin: ShoKinematics) -> complex:
    return np.exp(-(kin.eta_sq - 2j * kin.kappa * kin.rho) / 4.0)


def sho_q_closed(k: int, j: int, kin: ShoKinematics) -> complex:
    """Quench amplitude Q_kj from the Laguerre-sum closed form.

    Off the diagonal the amplitude is

        -(i (kappa - i s lam)/sqrt 2)^d sqrt(min!/max!) / Gamma(d) * pref
            * sum_{l=0}^{min} prod_{p=1}^{d-1} (l - min - p) L_l(eta^2/2)

    with d = |k - j| and s = -1 for k > j, +1 otherwise.
    """
    if k < 0 or j < 0:
        raise ValueError("quantum numbers must be non-negative")
    x = 0.5 * kin.eta_sq
    pref = _prefactor(kin)
    n = min(k, j)
    # Laguerre values and the weighted sum are carried in exact rationals
    # (at the exact binary value of x): the terms alternate and cancel
    # strongly once eta^2 is comparable to the indices.
    xq = Fraction(x)
    lags = [Fraction(1)]
    if n >= 1:
        lags.append(1 - xq)
    for m in range(1, n):
        lags.append(((2 * m + 1 - xq) * lags[m] - m * lags[m - 1]) / (m + 1))
    if k == j:
        return complex(pref * float(lags[n]))
    d = abs(k - j)
    s = -1.0 if k > j else 1.0
    base = (1j * (kin.kappa - 1j * s * kin.lam) / math.sqrt(2.0)) ** d
    total = Fraction(0)
    for l in range(n + 1):
        prod = 1
        for p in range(1, d):
            prod *= l - n - p
        total += prod * lags[l]
    total = float(total / math.factorial(d - 1))
    return complex(-base * sqrt_factorial_ratio(n, n + d) * pref * total)


def sho_q_matrix(n_states: int, kin: ShoKinematics) -> np.ndarray:
    """Full N x N quench matrix Q_kj, k, j = 0..N-1.

    Uses the equivalent compact form
    Q_kj = alpha_kj^d sqrt(min!/max!) L_min^(d)(eta^2/2) * pref, with
    alpha = (lam - i kappa)/sqrt 2 below the diagonal and
    (-lam - i kappa)/sqrt 2 above it; associated Laguerre values come from a
    vectorised recurrence so large N stays accurate.
    """
    x = 0.5 * kin.eta_sq
    table = laguerre_table(n_states - 1, x)
    idx = np.arange(n_states)
    kk, jj = np.meshgrid(idx, idx, indexing="ij")
    d = np.abs(kk - jj)
    n = np.minimum(kk, jj)
    lower = complex(kin.lam, -kin.kappa) / math.sqrt(2.0)
    upper = complex(-kin.lam, -kin.kappa) / math.sqrt(2.0)
    alpha = np.where(kk >= jj, lower, upper)
    from scipy.special import gammaln

    log_ratio = 0.5 * (gammaln(n + 1) - gammaln(n + d + 1))
    if abs(lower) == 0.0:
        amp = np.where(d == 0, 1.0 + 0j, 0.0 + 0j)
    else:
        log_mag = d * math.log(abs(lower)) + log_ratio
        amp = np.exp(log_mag) * np.exp(1j * d * np.angle(alpha))
    return _prefactor(kin) * amp * table[n, d]


def _exact_poly(coeffs: list[Fraction], w: complex) -> complex:
    """Horner evaluation of sum coeffs[j] w^j in exact rational arithmetic."""
    wr, wi = Fraction(w.real), Fraction(w.imag)
    acc_r, acc_i = Fraction(0), Fraction(0)
    for c in reversed(coeffs):
        acc_r, acc_i = acc_r * wr - acc_i * wi + c, acc_r * wi + acc_i * wr
    return complex(float(acc_r), float(acc_i))


def sho_q_series(m: int, n: int, alpha: float, beta: complex) -> complex:
    """Q_mn(alpha, beta) = int psi_m(x + alpha) psi_n(x) exp(beta x) dx.

    Finite double sum from normal-ordering exp(-alpha D) exp(beta x): terms
    (alpha+beta)^j (beta-alpha)^k R_mj R_nk / (2^((j+k)/2) j! k!) with
    R_mj = sqrt(m!/(m-j)!), restricted to m - j = n - k. The restriction
    turns the sum into a polynomial in w = (beta^2 - alpha^2)/2 whose terms
    alternate in sign for imaginary beta; it is summed exactly in rationals
    so no digits are lost to cancellation.
    """
    if m < 0 or n < 0:
        raise ValueError("quantum numbers must be non-negative")
    up = (alpha + beta) / math.sqrt(2.0)
    down = (beta - alpha) / math.sqrt(2.0)
    w = complex(up * down)
    lo, gap = min(m, n), abs(m - n)
    # sum over the lower index i = 0..lo of w^i / ((lo-i)! i! (i+gap)!)
    coeffs = [Fraction(1, math.factorial(lo - i) * math.factorial(i) * math.factorial(i + gap))
              for i in range(lo + 1)]
    outer = (down if n >= m else up) ** gap
    scale = math.exp(0.5 * (math.lgamma(m + 1) + math.lgamma(n + 1)))
    pref = np.exp((beta * beta - alpha * alpha) / 4.0 - alpha * beta / 2.0)
    return complex(pref * outer * scale * _exact_poly(coeffs, w))


def sho_q_series_shifted(m: int, n: int, alpha1: float, alpha2: float, beta: complex) -> complex:
    """int psi_m(x + alpha1) psi_n(x + alpha2) exp(beta x) dx."""
    return complex(np.exp(-beta * alpha2) * sho_q_series(m, n, alpha1 - alpha2, beta))


def sho_q_series_kin(k: int, j: int, kin: ShoKinematics) -> complex:
    """Quench amplitude through the normal-ordered series.

    With a1 = (rho - lam)/2 and a2 = (rho + lam)/2 the quench overlap is
    int psi_k(u + a2) psi_j(u + a1) exp(-i kappa u) du.
    """
    a1 = 0.5 * (kin.rho - kin.lam)
    a2 = 0.5 * (kin.rho + kin.lam)
    return sho_q_series_shifted(k, j, a2, a1, -1j * kin.kappa)


def _quadrature_matrix(n_states: int, kin: ShoKinematics, order: int) -> np.ndarray:
    rule = gauss_hermite(order)
    x = rule.nodes
    p_plus = hermite_functions(n_states - 1, x + 0.5 * kin.lam, gaussian=False)
    p_minus = hermite_functions(n_states - 1, x - 0.5 * kin.lam, gaussian=False)
    weight = rule.weights * np.exp(-1j * kin.kappa * x)
    pref = np.exp(0.5j * kin.kappa * kin.rho - 0.25 * kin.lam ** 2)
    return pref * (p_plus * weight) @ p_minus.T


def sho_q_quadrature_matrix(n_states: int, kin: ShoKinematics, order: int | None = None,
                            check: bool = True) -> np.ndarray:
    """Quench matrix by Gauss-Hermite quadrature of the defining integral.

    A second evaluation 20 orders higher is compared against the first and a
    ConvergenceWarning is issued if they differ by more than 1e-10.
    """
    if order is None:
        order = 2 * (n_states - 1) + 80
    q = _quadrature_matrix(n_states, kin, order)
    if check:
        q2 = _quadrature_matrix(n_states, kin, order + 20)
        diff = float(np.max(np.abs(q - q2)))
        if diff > 1e-10:
            warnings.warn(f"Gauss-Hermite order {order} not converged (change {diff:.2e})",
                          ConvergenceWarning, stacklevel=2)
    return q


def sho_q_quadrature(k: int, j: int, kin: ShoKinematics, order: int | None = None) -> complex:
    if k < 0 or j < 0:
        raise ValueError("quantum numbers must be non-negative")
    n = max(k, j) + 1
    if order is None:
        order = k + j + 80
    return complex(sho_q_quadrature_matrix(n, kin, order)[k, j])


# ---------------------------------------------------------------------------
# moving frames and coefficient states


@dataclass(frozen=True)
class ShoFrame:
    X: float = 0.0
    T: float = 0.0
    v: float = 0.0
    a: float = 0.0

    def center(self, t):
        s = np.asarray(t, dtype=float) - self.T
        return self.X + self.v * s + 0.5 * self.a * s * s


@dataclass(frozen=True)
class ShoCoeffState:
    """Coefficients over the basis of ``frame``.

    ``instantaneous`` marks a representation that is exact only at
    ``frame.T``; it comes out of :func:`rebase` when the frame accelerates,
    because the rebased basis keeps the velocity label ``v``.
    """

    coeffs: np.ndarray
    frame: ShoFrame = field(default_factory=ShoFrame)
    instantaneous: bool = False

    @property
    def n_states(self) -> int:
        return len(self.coeffs)

    @property
    def tail_mass(self) -> float:
        return float(1.0 - np.sum(np.abs(self.coeffs) ** 2))


def eigenstate(n: int, n_states: int, frame: ShoFrame | None = None) -> ShoCoeffState:
    if not 0 <= n < n_states:
        raise ValueError("level outside the truncated basis")
    c = np.zeros(n_states, dtype=complex)
    c[n] = 1.0
    return ShoCoeffState(c, frame or ShoFrame())


def basis_function(n: int, x, t: float, frame: ShoFrame) -> np.ndarray:
    """phi_n(x, t) of ``frame`` in position space (mainly for cross-checks)."""
    x = np.asarray(x, dtype=float)
    X, T, v, a = frame.X, frame.T, frame.v, frame.a
    s = t - T
    xi = x - X - v * s - 0.5 * a * s * s
    phase = (a * a * s ** 3 / 6 + a * s * xi + 0.5 * a * v * s * s + 0.5 * v * v * s + v * xi
             - (n + 0.5 - 0.5 * a * a) * s)
    return hermite_functions(n, (xi + a).ravel())[n].reshape(x.shape) * np.exp(1j * phase)


def wavefunction(state: ShoCoeffState, x, t: float) -> np.ndarray:
    """Position-space wave function of a (non-instantaneous) state at time t."""
    if state.instantaneous and t != state.frame.T:
        raise QuenchError("instantaneous representation is only valid at its anchor time")
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    for n, c in enumerate(state.coeffs):
        if c != 0:
            out += c * basis_function(n, x, t, state.frame)
    return out


def rebase(state: ShoCoeffState, to_T: float,
           tail_threshold: float | None = DEFAULT_TAIL_THRESHOLD) -> ShoCoeffState:
    """Re-express the state at time ``to_T`` in the frame anchored there.

    The new frame is (X + v D + a D^2/2, to_T, v, a) with D = to_T - T. For
    a = 0 the coefficients only pick up phases; otherwise they are mixed by
    Q(kappa = -a D, lam = 0, rho = 0) and the result is an instantaneous
    representation at ``to_T``.
    """
    f = state.frame
    dt = to_T - f.T
    if dt < 0:
        raise ValueError(f"cannot rebase backwards (from T={f.T} to {to_T})")
    if dt == 0:
        return state
    if state.instantaneous:
        raise QuenchError("state is an instantaneous representation; apply a quench first")
    v, a = f.v, f.a
    common = a * a * dt ** 3 / 6 - 0.5 * a * a * dt + 0.5 * a * v * dt * dt + 0.5 * v * v * dt
    levels = np.arange(state.n_states)
    c = state.coeffs * np.exp(-1j * (levels + 0.5) * dt)
    if a != 0.0:
        c = sho_q_matrix(state.n_states, ShoKinematics(kappa=-a * dt)) @ c
    c = np.exp(1j * common) * c
    check_tail(c, tail_threshold)
    new_frame = ShoFrame(float(f.center(to_T)), to_T, v, a)
    return ShoCoeffState(c, new_frame, instantaneous=(a != 0.0))


def apply_quench(state: ShoCoeffState, new_v: float, new_a: float, at_t: float | None = None,
                 tail_threshold: float | None = DEFAULT_TAIL_THRESHOLD) -> ShoCoeffState:
    """Sudden change to velocity ``new_v`` and acceleration ``new_a`` at ``at_t``.

    The state is first rebased to ``at_t`` if its frame is anchored earlier.
    """
    if at_t is None:
        at_t = state.frame.T
    if at_t != state.frame.T:
        state = rebase(state, at_t, tail_threshold)
    f = state.frame
    kin = ShoKinematics(new_v - f.v, new_a - f.a, new_a + f.a)
    if kin.kappa == 0.0 and kin.lam == 0.0:
        c = state.coeffs
    else:
        c = sho_q_matrix(state.n_states, kin) @ state.coeffs
    check_tail(c, tail_threshold)
    return ShoCoeffState(c, ShoFrame(f.X, at_t, new_v, new_a))


def one_change_coeffs(n0: int, kin: ShoKinematics, n_states: int = 60) -> np.ndarray:
    """Coefficients after a single quench from eigenstate n0 in {0, 1, 2} of the static trap."""
    if n0 not in (0, 1, 2):
        raise ValueError("closed forms exist for n0 = 0, 1, 2")
    eta2 = kin.eta_sq
    z = complex(kin.lam, -kin.kappa)        # lam - i kappa
    zc = z.conjugate()                      # lam + i kappa
    pref = np.exp((-eta2 + 2j * kin.kappa * kin.rho) / 4.0)
    out = np.zeros(n_states, dtype=complex)
    for l in range(n_states):
        norm = math.exp(-0.5 * math.lgamma(l + 1) - 0.5 * math.lgamma(n0 + 1)
                        - 0.5 * (l + n0) * math.log(2.0))
        if n0 == 0:
            val = z ** l
        elif n0 == 1:
            # (lam - i kappa)^(l-1) (2l - eta^2), continued to l = 0
            val = -zc if l == 0 else z ** (l - 1) * (2 * l - eta2)
        else:
            poly = eta2 * eta2 + 4 * l * l - 4 * l * (eta2 + 1)
            if l == 0:
                val = zc ** 2
            elif l == 1:
                val = zc * (eta2 - 4)
            else:
                val = z ** (l - 2) * poly
        out[l] = pref * norm * val
    return out


def two_change_chain(kin: ShoKinematics, tau: float | None = None, n_states: int = 60,
                     n0: int = 0,
                     tail_threshold: float | None = DEFAULT_TAIL_THRESHOLD) -> np.ndarray:
    """Static trap; at t=0 jump to (v2, a2) = (kin.kappa, kin.lam); stop at t=tau.

    ``tau`` defaults to ``kin.tau``.

    Starting from eigenstate ``n0`` this is Q_off . R(tau) . Q_on e_n0 with the
    rebase R carrying the phases exp(i[a^2 tau^3/6 - a^2 tau/2 + a v tau^2/2
    + v^2 tau/2 - (l + 1/2) tau]) and the mixing Q(-a tau, 0, 0).
    """
    tau = kin.tau if tau is None else tau
    if tau < 0:
        raise ValueError("tau must be non-negative")
    state = eigenstate(n0, n_states)
    state = apply_quench(state, kin.kappa, kin.lam, 0.0, tail_threshold)
    state = apply_quench(state, 0.0, 0.0, tau, tail_threshold)
    return state.coeffs


def two_change_energy_scan(kappa: float, lam: float, taus, n_states: int = 60, n0: int = 0,
                           tail_threshold: float | None = DEFAULT_TAIL_THRESHOLD):
    """Final populations and <H>/E_0 over a grid of durations.

    Returns (populations of shape (len(taus), N), energies, tail masses).
    The tail check is applied to every grid point.
    """
    taus = np.asarray(taus, dtype=float)
    q_on = sho_q_matrix(n_states, ShoKinematics(kappa, lam, lam))
    q_off = sho_q_matrix(n_states, ShoKinematics(-kappa, -lam, lam))
    start = q_on[:, n0]
    levels = np.arange(n_states)
    pops = np.empty((taus.size, n_states))
    for i, tau in enumerate(taus):
        c = start * np.exp(-1j * (levels + 0.5) * tau)
        if lam != 0.0:
            c = sho_q_matrix(n_states, ShoKinematics(kappa=-lam * tau)) @ c
        c = q_off @ c
        pops[i] = np.abs(c) ** 2
    tails = 1.0 - pops.sum(axis=1)
    if tail_threshold is not None and tails.size and tails.max() > tail_threshold:
        from .errors import LeakyTruncation

        raise LeakyTruncation(float(tails.max()), tail_threshold, n_states)
    energies = pops @ (2 * levels + 1)
    return pops, energies, tails


def evolve_protocol(protocol, n0: int = 0, n_states: int = 60,
                    tail_threshold: float | None = DEFAULT_TAIL_THRESHOLD) -> ShoCoeffState:
    """Run a protocol starting from eigenstate ``n0`` of the segment-0 trap.

    The returned state lives in the frame of the last segment, anchored at
    that segment's start.
    """
    from .protocol import validate

    validate(protocol)
    if protocol.system != "sho":
        raise QuenchError(f"protocol system is {protocol.system!r}, expected 'sho'")
    first = protocol.segments[0]
    state = eigenstate(n0, n_states, ShoFrame(protocol.x1, first.t_start, first.v, first.a))
    for seg in protocol.segments[1:]:
        state = apply_quench(state, seg.v, seg.a, seg.t_start, tail_threshold)
    return state


def ludwig_probability(i: int, f: int, gamma: float) -> float:
    """min!/max! gamma^|f-i| e^-gamma [L_min^(|i-f|)(gamma)]^2."""
    if i < 0 or f < 0:
        raise ValueError("levels must be non-negative")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    lo, hi = min(i, f), max(i, f)
    d = hi - lo
    if gamma == 0.0:
        return 1.0 if d == 0 else 0.0
    log_w = math.lgamma(lo + 1) - math.lgamma(hi + 1) + d * math.log(gamma) - gamma
    return math.exp(log_w) * laguerre(lo, d, gamma) ** 2


def gamma_this_paper(a: float, t):
    """Accelerated-trap excitation parameter a^2 t^2 / 2 (grows without bound)."""
    t = np.asarray(t, dtype=float)
    out = 0.5 * a * a * t * t
    return out if out.ndim else float(out)


def gamma_dodonov(a: float, t):
    """Alternative parameter 2 a^2 sin^2(t/2); periodic in t with period 2 pi."""
    t = np.asarray(t, dtype=float)
    out = 2.0 * a * a * np.sin(0.5 * t) ** 2
    return out if out.ndim else float(out)


def sho_expectations(state: ShoCoeffState, t):
    """(<x>, Var x, <H>/E_0) at time(s) t for a state in a dynamical frame.

    The energy is the oscillator energy in the trap's own frame,
    sum |c_l|^2 (2l + 1), and does not depend on t.
    """
    f = state.frame
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    s = t_arr - f.T
    if state.instantaneous and np.any(s != 0):
        raise QuenchError("instantaneous representation is only valid at its anchor time")
    c = np.asarray(state.coeffs)
    n = len(c)
    levels = np.arange(n)
    b = c[None, :] * np.exp(-1j * np.outer(s, levels))
    q1 = math.sqrt(2.0) * np.sum(np.sqrt(levels[1:])[None, :]
                                 * np.real(np.conj(b[:, 1:]) * b[:, :-1]), axis=1)
    diag = np.sum((2 * levels + 1) * np.abs(c) ** 2)
    off2 = np.sum(np.sqrt(levels[2:] * (levels[2:] - 1.0))[None, :]
                  * np.real(np.conj(b[:, 2:]) * b[:, :-2]), axis=1)
    q2 = 0.5 * diag + off2
    x_mean = f.center(t_arr) - f.a + q1
    x_var = q2 - q1 * q1
    energy = float(diag)
    if np.ndim(t) == 0:
        return float(x_mean[0]), float(x_var[0]), energy
    return x_mean, x_var, energy
