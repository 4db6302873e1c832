"""Infinite square well under sudden changes of velocity.

Units: hbar = m = L = 1. Eigenvalues are E_k = pi^2 k^2 / 2 and energies are
reported in units of E_1. The well is centred at the origin and the basis is

    psi_k(y) = sqrt(2) * sin(k*pi*(y + 1/2)),   -1/2 <= y <= 1/2,

i.e. the usual cos (odd k) / sin (even k) functions with the signs
(+, -, -, +) repeating with period four. With these signs the closed-form
quench amplitude carries the factor i^(k+l); probabilities do not depend on
the sign choice.

A velocity jump Delta v = v2 - v1 is described by the dimensionless
delta = Delta v / 2, and the quench matrix is the overlap
Q_kl(delta) = <k| exp(-2i delta y) |l>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import DEFAULT_TAIL_THRESHOLD, QuenchError, check_tail
from .scan import ScanResult

PI = math.pi
TAU0 = 4.0 / PI
"""Revival time 4 m L^2 / (pi hbar)."""

_REL_SINGULAR = 1e-6


@dataclass(frozen=True)
class BoxBasisSpec:
    n_states: int
    delta: float

    def __post_init__(self):
        if self.n_states < 1:
            raise ValueError("n_states must be >= 1")


@dataclass(frozen=True)
class BoxCoeffState:
    """Coefficients in the basis of a well moving with ``v_frame``, anchored at ``t_anchor``."""

    coeffs: np.ndarray
    t_anchor: float = 0.0
    v_frame: float = 0.0

    @property
    def tail_mass(self) -> float:
        return float(1.0 - np.sum(np.abs(self.coeffs) ** 2))


def energy_levels(n_states: int) -> np.ndarray:
    k = np.arange(1, n_states + 1, dtype=float)
    return 0.5 * PI ** 2 * k ** 2


def basis_functions(n_states: int, y) -> np.ndarray:
    """Rows k = 1..n_states of psi_k evaluated at ``y``."""
    k = np.arange(1, n_states + 1)[:, None]
    return math.sqrt(2.0) * np.sin(k * PI * (np.asarray(y, dtype=float)[None, :] + 0.5))


@lru_cache(maxsize=32)
def _legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * x, 0.5 * w


def _n_nodes(k_max: int, delta: float) -> int:
    # highest frequency of the integrand over the unit interval
    omega = PI * 2 * k_max + 2.0 * abs(delta)
    n = int(0.75 * omega) + 40
    return -(-n // 64) * 64  # round up so cached rules are reused


def box_q_matrix_quadrature(n_states: int, delta: float) -> np.ndarray:
    """Q(delta) by Gauss-Legendre quadrature of the defining overlap integral."""
    y, w = _legendre(_n_nodes(n_states, delta))
    psi = basis_functions(n_states, y)
    return (psi * (w * np.exp(-2j * delta * y))) @ psi.T


def box_q_element_quadrature(k: int, l: int, delta: float) -> complex:
    """Single element of Q(delta) by quadrature; regular at every delta."""
    if k < 1 or l < 1:
        raise ValueError("quantum numbers start at 1")
    y, w = _legendre(_n_nodes(max(k, l), delta))
    s = math.sqrt(2.0)
    pk = s * np.sin(k * PI * (y + 0.5))
    pl = s * np.sin(l * PI * (y + 0.5))
    return complex(np.sum(w * pk * pl * np.exp(-2j * delta * y)))


def _closed_form(k, l, delta):
    """Vectorised closed form plus a mask of entries too close to a removable singularity."""
    k = np.asarray(k, dtype=float)
    l = np.asarray(l, dtype=float)
    d = float(delta)
    diag = k == l
    ksq, lsq = k * k, l * l

    den_diag = PI ** 2 * ksq - d * d
    bad_diag = (np.abs(den_diag) < _REL_SINGULAR * PI ** 2 * ksq) | (abs(d) < _REL_SINGULAR)
    den_off = 16 * d ** 4 - 8 * PI ** 2 * d * d * (ksq + lsq) + PI ** 4 * (ksq - lsq) ** 2
    bad_off = np.abs(den_off) < _REL_SINGULAR * PI ** 4 * (ksq + lsq) ** 2
    bad = np.where(diag, bad_diag, bad_off)

    with np.errstate(divide="ignore", invalid="ignore"):
        v_diag = PI ** 2 * ksq * math.sin(d) / (d * den_diag)
        phase = 1j ** ((k + l).astype(int) % 4)
        v_off = phase * 16 * PI ** 2 * d * k * l * np.sin(0.5 * PI * (k + l) - d) / den_off
    return np.where(diag, v_diag, v_off), bad


def box_q_element(k: int, l: int, delta: float) -> complex:
    """Quench amplitude Q_kl(delta) from the closed form.

    Falls back to quadrature within a relative 1e-6 of a zero of the
    closed-form denominator (delta = pi (k +- l)/2, or delta = 0 on the
    diagonal), where the overlap itself is regular.
    """
    if k < 1 or l < 1:
        raise ValueError("quantum numbers start at 1")
    val, bad = _closed_form(k, l, delta)
    if bad:
        return box_q_element_quadrature(k, l, delta)
    return complex(val)


def box_q_matrix(spec: BoxBasisSpec | int, delta: float | None = None) -> np.ndarray:
    """N x N quench matrix, entries box_q_element(k, l, delta) for k, l = 1..N."""
    if not isinstance(spec, BoxBasisSpec):
        spec = BoxBasisSpec(int(spec), float(delta))
    n = spec.n_states
    k = np.arange(1, n + 1)
    kk, ll = np.meshgrid(k, k, indexing="ij")
    q, bad = _closed_form(kk, ll, spec.delta)
    q = q.astype(complex)
    if bad.any():
        q[bad] = box_q_matrix_quadrature(n, spec.delta)[bad]
    return q


def free_phase_evolve(state: BoxCoeffState, dt: float) -> BoxCoeffState:
    """Carry the state forward by ``dt`` inside one velocity segment.

    The basis anchor moves with the well (X -> X + v dt, T -> T + dt), which
    gives c_l -> c_l exp(-i E_l dt) exp(+i v^2 dt / 2).
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    n = len(state.coeffs)
    phases = np.exp(-1j * energy_levels(n) * dt + 0.5j * state.v_frame ** 2 * dt)
    return replace(state, coeffs=state.coeffs * phases, t_anchor=state.t_anchor + dt)


def apply_velocity_quench(state: BoxCoeffState, new_v: float) -> BoxCoeffState:
    delta = 0.5 * (new_v - state.v_frame)
    q = box_q_matrix(len(state.coeffs), delta)
    return replace(state, coeffs=q @ state.coeffs, v_frame=new_v)


def _ground(n_states: int) -> np.ndarray:
    c = np.zeros(n_states, dtype=complex)
    c[0] = 1.0
    return c


def _two_change_from_matrix(q_on: np.ndarray, t2, v2: float) -> np.ndarray:
    """Columns c^(3)(t2) for each t2; q_off = Q(-delta) = conj(Q(delta))."""
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    n = q_on.shape[0]
    e = energy_levels(n)
    b = q_on[:, 0]
    phases = np.exp(0.5j * v2 * v2 * t2[None, :] - 1j * e[:, None] * t2[None, :])
    return np.conj(q_on) @ (b[:, None] * phases)


def two_change_amplitudes(delta: float, t2: float, n_states: int = 200,
                          tail_threshold: float | None = DEFAULT_TAIL_THRESHOLD) -> np.ndarray:
    """Ground state of the static well; velocity v2 = 2 delta for a time t2; stop.

    Returns c_k^(3), k = 1..n_states, including the intermediate phase
    exp(i t2 v2^2 / 2).
    """
    if t2 < 0:
        raise ValueError("t2 must be non-negative")
    c = _two_change_from_matrix(box_q_matrix(n_states, delta), t2, 2.0 * delta)[:, 0]
    check_tail(c, tail_threshold)
    return c


def _three_change_from_matrices(q_on, q_rev, t, v: float) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    e = energy_levels(q_on.shape[0])
    d = np.exp(-1j * e[:, None] * t[None, :])
    first = q_on[:, 0][:, None] * d
    second = (q_rev @ first) * d
    return np.exp(1j * v * v * t)[None, :] * (q_on @ second)


def three_change_amplitudes(delta: float, t: float, n_states: int = 200,
                            tail_threshold: float | None = DEFAULT_TAIL_THRESHOLD) -> np.ndarray:
    """Static ground state; +v for a time t; -v for a time t; stop.

    ``t`` is the duration of each leg, so the last change happens at 2t and
    the well returns to its starting position. With v = 2 delta the three
    jumps are +delta, -2 delta and +delta.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    q_on = box_q_matrix(n_states, delta)
    q_rev = box_q_matrix(n_states, -2.0 * delta)
    c = _three_change_from_matrices(q_on, q_rev, t, 2.0 * delta)[:, 0]
    check_tail(c, tail_threshold)
    return c


def box_energy_expectation(coeffs) -> tuple[float, float]:
    """(<H>/E_1, tail mass) for box coefficients c_1..c_N."""
    p = np.abs(np.asarray(coeffs)) ** 2
    k = np.arange(1, len(p) + 1, dtype=float)
    return float(np.sum(p * k * k)), float(1.0 - np.sum(p))


def box_classical_energies(delta: float, n_changes: int = 2) -> tuple[float, float]:
    """Classical averaged energy and averaged maximal energy, in units of E_1."""
    r = delta * delta / PI ** 2
    if n_changes == 2:
        return 1.0 + 8.0 * r, 1.0 + 16.0 * r
    if n_changes == 3:
        return 1.0 + 24.0 * r, 1.0 + 64.0 * r
    raise ValueError("n_changes must be 2 or 3")


def chain_coefficients(delta: float, t_grid, n_states: int, n_changes: int) -> np.ndarray:
    """Final coefficients, shape (n_states, len(t_grid)), for the 2- or 3-change protocol."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0):
        raise ValueError("grid values must be non-negative")
    q_on = box_q_matrix(n_states, delta)
    if n_changes == 2:
        return _two_change_from_matrix(q_on, t_grid, 2.0 * delta)
    if n_changes == 3:
        q_rev = box_q_matrix(n_states, -2.0 * delta)
        return _three_change_from_matrices(q_on, q_rev, t_grid, 2.0 * delta)
    raise ValueError("n_changes must be 2 or 3")


def revival_scan(delta: float, t_grid, n_states: int = 200, n_changes: int = 2,
                 k_max: int = 5, tail_threshold: float | None = DEFAULT_TAIL_THRESHOLD) -> ScanResult:
    """Transition probabilities P_{1->k} and <H>/E_1 over a grid of (leg) durations."""
    t_grid = np.asarray(t_grid, dtype=float)
    c = chain_coefficients(delta, t_grid, n_states, n_changes)
    p = np.abs(c) ** 2
    k = np.arange(1, n_states + 1, dtype=float)
    tails = 1.0 - p.sum(axis=0)
    if tail_threshold is not None and tails.size:
        check_tail(c[:, int(np.argmax(tails))], tail_threshold)
    cols = {"t": t_grid, "t_over_tau0": t_grid / TAU0}
    for j in range(min(k_max, n_states)):
        cols[f"P_1_{j + 1}"] = p[j]
    cols["energy_ratio"] = (p * (k * k)[:, None]).sum(axis=0)
    cols["tail_mass"] = tails
    e_cl, e_plus = box_classical_energies(delta, n_changes)
    meta = {"system": "box", "delta": delta, "n_changes": n_changes, "n_states": n_states,
            "max_tail_mass": float(tails.max()) if tails.size else 0.0,
            "classical_energy_ratio": e_cl, "classical_max_energy_ratio": e_plus}
    return ScanResult(cols, meta)


def evolve_protocol(protocol, n_states: int = 200, initial_level: int = 1,
                    tail_threshold: float | None = DEFAULT_TAIL_THRESHOLD) -> BoxCoeffState:
    """Run a velocity-only protocol from eigenstate ``initial_level`` of segment 0.

    The state ends in the frame of the last segment, anchored at its start.
    """
    from .protocol import validate

    validate(protocol)
    if protocol.system != "box":
        raise QuenchError(f"protocol system is {protocol.system!r}, expected 'box'")
    for i, seg in enumerate(protocol.segments):
        if seg.a != 0.0:
            raise QuenchError(f"segment {i}: accelerating box is not supported (a={seg.a})")
    c = np.zeros(n_states, dtype=complex)
    c[initial_level - 1] = 1.0
    first = protocol.segments[0]
    state = BoxCoeffState(c, first.t_start, first.v)
    for seg in protocol.segments[1:]:
        state = free_phase_evolve(state, seg.t_start - state.t_anchor)
        state = apply_velocity_quench(state, seg.v)
        check_tail(state.coeffs, tail_threshold)
    return state
