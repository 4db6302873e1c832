"""Command-line front end: ``quenchkit <subcommand> [options]``.

Every scan writes a table (CSV or JSON) to stdout or ``--output`` and prints
the largest truncation tail mass to stderr.

Exit codes: 0 ok, 2 usage, 3 protocol parse/validation, 4 leaky
truncation, 5 I/O.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

import numpy as np
from scipy.integrate import trapezoid

from . import __version__, box, classical, sho
from .errors import DEFAULT_TAIL_THRESHOLD, LeakyTruncation, ProtocolError
from .protocol import load_protocol
from .scan import ScanResult, emit

EXIT_OK, EXIT_USAGE, EXIT_PROTOCOL, EXIT_TRUNCATION, EXIT_IO = 0, 2, 3, 4, 5


def _threshold(args) -> float | None:
    return None if args.allow_leaky else args.tolerance


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("--n-points must be at least 1")
    if hi < lo:
        raise ValueError("grid maximum is below its minimum")
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo], dtype=float)


def _finish(result: ScanResult, args, tail: float) -> ScanResult:
    result.metadata.setdefault("command", args.command)
    result.metadata["n_states"] = args.n_states
    result.metadata["max_tail_mass"] = float(tail)
    print(f"tail mass: {tail:.3e}", file=sys.stderr)
    return result


# ---------------------------------------------------------------------------
# box


def cmd_box_revive(args) -> ScanResult:
    n = args.n_states or 200
    t = _grid(args.t_min, args.t_max, args.n_points) * box.TAU0
    res = box.revival_scan(args.delta, t, n, args.n_changes, args.k_max, _threshold(args))
    res.metadata["n_states"] = n
    args.n_states = n
    return _finish(res, args, res.metadata["max_tail_mass"])


def cmd_box_energy(args) -> ScanResult:
    n = args.n_states or 200
    args.n_states = n
    t = _grid(args.t_min, args.t_max, args.n_points) * box.TAU0
    res = box.revival_scan(args.delta, t, n, args.n_changes, 1, _threshold(args))
    e_cl, e_plus = box.box_classical_energies(args.delta, args.n_changes)
    cols = {"t_over_tau0": res.columns["t_over_tau0"],
            "energy_ratio": res.columns["energy_ratio"],
            "classical": np.full(len(t), e_cl),
            "classical_max": np.full(len(t), e_plus)}
    meta = dict(res.metadata)
    if len(t) > 1:
        meta["time_average"] = float(trapezoid(res.columns["energy_ratio"], t) / (t[-1] - t[0]))
    return _finish(ScanResult(cols, meta), args, meta["max_tail_mass"])


# ---------------------------------------------------------------------------
# harmonic oscillator


def _stop_time_protocols(protocol, taus):
    """Copies of ``protocol`` with the last quench moved to t_{last-1} + tau."""
    segs = protocol.segments
    base = segs[-2].t_start
    for tau in taus:
        yield tau, replace(protocol, segments=segs[:-1] + (replace(segs[-1], t_start=base + tau),))


def _classical_column(protocol, n0: int, tau: float) -> float:
    segs = protocol.segments
    static = lambda s: s.v == 0 and s.a == 0  # noqa: E731
    if len(segs) == 3 and static(segs[0]) and static(segs[2]):
        kin = sho.ShoKinematics(segs[1].v, segs[1].a, segs[1].a, tau)
        # classical E_3/E_1 with E_1 = (2 n0 + 1) E_0, reported in units of E_0
        return (2 * n0 + 1) * classical.sign_averaged_ratio(2 * n0 + 1, kin)
    return float("nan")


def cmd_sho_quench(args) -> ScanResult:
    n = args.n_states or 60
    args.n_states = n
    protocol = load_protocol(args.protocol)
    if protocol.system != "sho":
        raise ProtocolError(f"protocol system is {protocol.system!r}, expected 'sho'")
    segs = protocol.segments
    if args.tau_min is None:
        taus = [segs[-1].t_start - segs[-2].t_start]
    else:
        tau_max = args.tau_max if args.tau_max is not None else args.tau_min
        taus = _grid(args.tau_min, tau_max, args.n_points)
        if taus[0] <= 0:
            raise ValueError("tau grid must be positive")
    rows = []
    worst = 0.0
    for tau, p in _stop_time_protocols(protocol, taus):
        state = sho.evolve_protocol(p, args.n0, n, _threshold(args))
        pops = np.abs(state.coeffs) ** 2
        worst = max(worst, 1.0 - pops.sum())
        energy = float(pops @ (2 * np.arange(n) + 1))
        rows.append((tau, pops[: args.l_max + 1], energy, _classical_column(p, args.n0, tau)))
    cols = {"omega_tau": np.array([r[0] for r in rows])}
    for l in range(min(args.l_max + 1, n)):
        cols[f"P_{args.n0}_{l}"] = np.array([r[1][l] for r in rows])
    cols["energy_ratio"] = np.array([r[2] for r in rows])
    cols["classical_energy_ratio"] = np.array([r[3] for r in rows])
    meta = {"system": "sho", "protocol": str(args.protocol), "n0": args.n0}
    return _finish(ScanResult(cols, meta), args, worst)


def cmd_sho_ludwig(args) -> ScanResult:
    if args.i < 0 or args.f_max < args.i:
        raise ValueError("need 0 <= i <= f-max")
    t = _grid(args.t_min, args.t_max, args.n_points)
    cols = {"omega_t": t,
            "gamma_ours": sho.gamma_this_paper(args.a, t),
            "gamma_dodonov": sho.gamma_dodonov(args.a, t)}
    for f in range(args.f_max + 1):
        cols[f"P_ours_{args.i}_{f}"] = np.array(
            [sho.ludwig_probability(args.i, f, g) for g in np.atleast_1d(cols["gamma_ours"])])
        cols[f"P_dodonov_{args.i}_{f}"] = np.array(
            [sho.ludwig_probability(args.i, f, g) for g in np.atleast_1d(cols["gamma_dodonov"])])
    meta = {"system": "sho", "a": args.a, "i": args.i}
    args.n_states = None
    return _finish(ScanResult(cols, meta), args, 0.0)


def cmd_sho_coherent(args) -> ScanResult:
    n = args.n_states or 60
    args.n_states = n
    kin = sho.ShoKinematics(args.kappa, args.lam, args.lam)
    c = sho.one_change_coeffs(args.n0, kin, n)
    tail = 1.0 - float(np.sum(np.abs(c) ** 2))
    threshold = _threshold(args)
    if threshold is not None and tail > threshold:
        raise LeakyTruncation(tail, threshold, n)
    state = sho.ShoCoeffState(c, sho.ShoFrame(0.0, 0.0, args.kappa, args.lam))
    t = _grid(args.t_min, args.t_max, args.n_points)
    x_mean, x_var, energy = sho.sho_expectations(state, t)
    cols = {"omega_t": t, "x_mean": np.atleast_1d(x_mean), "x_std": np.sqrt(np.atleast_1d(x_var)),
            "trap_center": state.frame.center(t)}
    for l in range(min(args.l_max + 1, n)):
        cols[f"P_{args.n0}_{l}"] = np.full(len(t), abs(c[l]) ** 2)
    meta = {"system": "sho", "kappa": args.kappa, "lambda": args.lam, "n0": args.n0,
            "energy_ratio": energy}
    return _finish(ScanResult(cols, meta), args, tail)


def cmd_classical_compare(args) -> ScanResult:
    n = args.n_states or 60
    args.n_states = n
    taus = _grid(args.tau_min, args.tau_max, args.n_points)
    eps = 2 * args.n0 + 1
    _, quantum, tails = sho.two_change_energy_scan(args.kappa, args.lam, taus, n, args.n0,
                                                   _threshold(args))
    plus, minus, avg, mc, mc_err = [], [], [], [], []
    for tau in taus:
        kin = sho.ShoKinematics(args.kappa, args.lam, args.lam, float(tau))
        plus.append(classical.position_averaged_ratio(eps, 1, kin))
        minus.append(classical.position_averaged_ratio(eps, -1, kin))
        avg.append(classical.sign_averaged_ratio(eps, kin))
        if args.mc_samples > 0:
            r = classical.monte_carlo_verify(eps, kin, args.mc_samples, args.seed)
            mc.append(r.mean)
            mc_err.append(r.stderr)
    cols = {"omega_tau": taus, "quantum_ratio": quantum / eps, "classical_ratio": np.array(avg),
            "classical_plus": np.array(plus), "classical_minus": np.array(minus)}
    if args.mc_samples > 0:
        cols["mc_mean"] = np.array(mc)
        cols["mc_stderr"] = np.array(mc_err)
    meta = {"system": "sho", "kappa": args.kappa, "lambda": args.lam, "epsilon": eps,
            "seed": args.seed, "mc_samples": args.mc_samples}
    return _finish(ScanResult(cols, meta), args, float(tails.max()) if tails.size else 0.0)


def cmd_validate_protocol(args) -> None:
    p = load_protocol(args.protocol)
    print(f"ok: {p.system} protocol with {len(p.segments)} segments")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n-states", type=int, default=None,
                        help="basis truncation N (default 200 for the box, 60 for the oscillator)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", default=None, help="write the table here instead of stdout")
    common.add_argument("--allow-leaky", action="store_true",
                        help="report but do not reject a large truncation tail")
    common.add_argument("--tolerance", type=float, default=DEFAULT_TAIL_THRESHOLD,
                        help="largest acceptable tail mass (default %(default)g)")
    common.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")

    parser = argparse.ArgumentParser(prog="quenchkit",
                                     description="Sudden velocity/acceleration quenches of "
                                                 "a square well and a harmonic oscillator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("box-revive", parents=[common], help="P_{1->k} over time for 2 or 3 changes")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--t-min", type=float, default=0.0, help="in units of tau0")
    p.add_argument("--t-max", type=float, default=1.0, help="in units of tau0")
    p.add_argument("--n-points", type=int, default=101)
    p.add_argument("--n-changes", type=int, choices=(2, 3), default=2)
    p.add_argument("--k-max", type=int, default=5)
    p.set_defaults(func=cmd_box_revive)

    p = sub.add_parser("box-energy", parents=[common], help="<H>/E_1 against classical averages")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--t-min", type=float, default=0.0, help="in units of tau0")
    p.add_argument("--t-max", type=float, default=1.0, help="in units of tau0")
    p.add_argument("--n-points", type=int, default=401)
    p.add_argument("--n-changes", type=int, choices=(2, 3), default=2)
    p.set_defaults(func=cmd_box_energy)

    p = sub.add_parser("sho-quench", parents=[common], help="run an oscillator protocol file")
    p.add_argument("protocol")
    p.add_argument("--n0", type=int, default=0, help="initial level")
    p.add_argument("--l-max", type=int, default=5)
    p.add_argument("--tau-min", type=float, default=None,
                   help="scan the duration of the second-to-last segment")
    p.add_argument("--tau-max", type=float, default=None)
    p.add_argument("--n-points", type=int, default=50)
    p.set_defaults(func=cmd_sho_quench)

    p = sub.add_parser("sho-ludwig", parents=[common], help="uniform-acceleration transition law")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--i", type=int, default=0)
    p.add_argument("--f-max", type=int, default=3)
    p.add_argument("--t-min", type=float, default=0.0)
    p.add_argument("--t-max", type=float, default=4 * math.pi)
    p.add_argument("--n-points", type=int, default=101)
    p.set_defaults(func=cmd_sho_ludwig)

    p = sub.add_parser("sho-coherent", parents=[common], help="moments after a single quench")
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--n0", type=int, choices=(0, 1, 2), default=0)
    p.add_argument("--l-max", type=int, default=5)
    p.add_argument("--t-min", type=float, default=0.0)
    p.add_argument("--t-max", type=float, default=2 * math.pi)
    p.add_argument("--n-points", type=int, default=101)
    p.set_defaults(func=cmd_sho_coherent)

    p = sub.add_parser("classical-compare", parents=[common],
                       help="quantum vs classical energy after a start/stop protocol")
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--n0", type=int, default=0)
    p.add_argument("--tau-min", type=float, default=0.0)
    p.add_argument("--tau-max", type=float, default=2 * math.pi)
    p.add_argument("--n-points", type=int, default=50)
    p.add_argument("--mc-samples", type=int, default=0)
    p.set_defaults(func=cmd_classical_compare)

    p = sub.add_parser("validate-protocol", help="parse and check a protocol file")
    p.add_argument("protocol")
    p.set_defaults(func=cmd_validate_protocol)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
        if result is not None:
            emit(result, args.format, args.output or sys.stdout)
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except LeakyTruncation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
