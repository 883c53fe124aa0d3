"""Command-line front end: bounds, SDP thresholds, strategy checks, sweeps, entropies.

Exit codes: 0 success/pass, 1 verification failure, 2 usage error,
3 solver diagnostic. Angles are in radians. ``GJM_LOG`` (error, info or
debug) sets the diagnostics level on standard error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import bounds
from .povm import NO_CLICK, Assembly, Povm, loads_assembly, qubit_assembly, xz_directions

log = logging.getLogger("gjm")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3
CSV_COLUMNS = ("theta", "nu_vis", "case", "eta_analytic", "eta_sdp", "gap")
STRATEGIES = ("full-jm", "partial-input", "partial-outcome", "case-d-generic", "qubit-c", "qubit-d")

# example transcript strings for the parity demo (d = 2)
DEMO_A = "001011010100010"
DEMO_B = f"001{NO_CLICK}11010{NO_CLICK}00{NO_CLICK}10"
DEMO_E = "001111010000110"


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.9g}"
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _emit(args, record: dict) -> None:
    if args.json:
        print(json.dumps(_jsonable(record), indent=2, ensure_ascii=False))
        return
    for k, v in record.items():
        if isinstance(v, dict):
            print(f"{k}:")
            for kk, vv in v.items():
                print(f"  {kk}: {_fmt(vv)}")
        else:
            print(f"{k}: {_fmt(v)}")


def _angles(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot parse angle list {text!r}") from None


def _grid(text: str) -> list[float]:
    """``START:STOP:STEPS`` (inclusive, STEPS >= 2) or a comma list."""
    if ":" in text:
        try:
            start, stop, steps = text.split(":")
            start, stop, steps = float(start), float(stop), int(steps)
        except ValueError:
            raise UsageError(f"cannot parse range {text!r}; expected START:STOP:STEPS") from None
        if steps < 2:
            raise UsageError("a range needs at least 2 steps")
        return [float(v) for v in np.linspace(start, stop, steps)]
    return _angles(text)


def _eta_arg(text: str | None):
    """``None``/``bound`` -> None (use the constructor's bound), else a float from a decimal or ``p/q``."""
    if text is None or text == "bound":
        return None
    try:
        val = float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse efficiency {text!r}") from None
    if not 0.0 <= val <= 1.0:
        raise UsageError("eta must lie in [0, 1]")
    return val


def _read_assembly(path: str) -> Assembly:
    with open(path, encoding="utf-8") as fh:
        return loads_assembly(fh.read())


# --- bound ------------------------------------------------------------------

def cmd_bound(args) -> int:
    rec = {"case": args.case}
    if args.theta is not None and args.case in ("c", "d"):
        theta = args.theta
        rec["theta"] = theta
        if args.case == "c":
            mu = math.cos(theta / 2)
            rec["bound"] = bounds.qubit_bound_case_c(theta)
            rec["mu"] = mu
            rec["nu"] = mu / (1 + math.sqrt(max(1 - mu * mu, 0.0)))
        else:
            p = bounds.case_d_params(theta, args.variant)
            rec["variant"] = args.variant
            rec["bound"] = p.bound
            rec["x_star"] = p.x_star
            rec["nu_star"] = p.nu_star
            rec["gamma"] = p.gamma
    else:
        rec["n"], rec["k"] = args.n, args.k
        rec["bound"] = bounds.generic_bound(args.case, args.n, args.k)
    _emit(args, rec)
    return EXIT_OK


# --- threshold --------------------------------------------------------------

def _threshold_input(args):
    if args.assembly and args.qubit_angles:
        raise UsageError("give either an assembly file or --qubit-angles, not both")
    if args.assembly:
        return _read_assembly(args.assembly), None
    if args.qubit_angles:
        dirs = xz_directions(_angles(args.qubit_angles))
        return qubit_assembly(dirs), dirs
    raise UsageError("threshold needs an assembly JSON file or --qubit-angles")


def cmd_threshold(args) -> int:
    from .povm import LossParams, apply_loss_visibility, gspec_case
    from .sdp.program import build_program
    from .sdp.sdpa import export_sdpa
    from .sdp.threshold import ThresholdError, threshold

    a, dirs = _threshold_input(args)
    tol = args.tol if args.tol is not None else 1e-4
    try:
        res = threshold(a, args.case, tol, nu_vis=args.nu_vis, solver_tol=args.solver_tol)
    except ThresholdError as exc:
        print(f"solver diagnostic: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    rec = {"case": args.case, "nu_vis": args.nu_vis, "eta_star": res.eta_star,
           "bracket_lo": res.bracket[0], "bracket_hi": res.bracket[1], "tol": res.tol,
           "evaluations": res.evaluations, "always_jm": res.always_jm}
    for end, rep in (("lo", res.lo_report), ("hi", res.hi_report)):
        if rep is not None:
            rec[f"{end}_status"] = rep.status.value
            rec[f"{end}_slack"] = rep.slack
            rec[f"{end}_iterations"] = rep.iterations
    if dirs is not None:
        variant = args.variant or ("n2" if len(dirs) == 2 else "general")
        if args.case == "d" and variant == "n2" and len(dirs) != 2:
            raise UsageError("variant n2 needs exactly two angles")
        if args.case == "d" and args.nu_vis == 1.0:
            eta_a = bounds.qubit_bound_case_d(bounds.case_d_axis_angle(dirs), variant)
        else:
            eta_a = bounds.analytic_threshold(args.case, dirs, nu_vis=args.nu_vis)
        rec["eta_analytic"] = eta_a
        rec["gap"] = res.eta_star - eta_a
    if args.export_sdpa:
        lossy = apply_loss_visibility(a, LossParams(res.eta_star, args.nu_vis))
        text = export_sdpa(build_program(lossy, gspec_case(args.case, lossy)))
        with open(args.export_sdpa, "w", encoding="utf-8") as fh:
            fh.write(text)
        rec["sdpa_file"] = args.export_sdpa
    _emit(args, rec)
    reps = [r for r in (res.lo_report, res.hi_report) if r is not None]
    if len(reps) == 2 and all(r.status.value == "MARGINAL" for r in reps):
        print("solver diagnostic: both bracket ends are marginal", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# --- verify -----------------------------------------------------------------

def default_assembly(k: int, n: int, seed: int = 0) -> Assembly:
    """``n`` projective ``k``-outcome measurements on ``C^k``.

    Setting 0 is the computational basis, setting 1 the Fourier basis and
    further settings seeded Haar-random bases.
    """
    from .matqm import random_unitary

    if k < 2 or n < 1:
        raise UsageError("need k >= 2 and n >= 1")
    rng = np.random.default_rng(seed)
    fourier = np.exp(2j * np.pi * np.outer(np.arange(k), np.arange(k)) / k) / np.sqrt(k)
    povms = []
    for y in range(n):
        u = np.eye(k) if y == 0 else fourier if y == 1 else random_unitary(k, rng)
        effects = [np.outer(u[:, i], u[:, i].conj()) for i in range(k)]
        povms.append(Povm(tuple(range(1, k + 1)), effects))
    return Assembly(povms)


def _qubit_dirs(args):
    if args.qubit_angles:
        return xz_directions(_angles(args.qubit_angles))
    if args.theta is None:
        raise UsageError("qubit strategies need --theta or --qubit-angles")
    angles = [0.0, args.theta] if args.n == 2 else [0.0, args.theta, -args.theta]
    if args.n not in (2, 3):
        raise UsageError("--theta builds n = 2 or n = 3 (cone) configurations")
    return xz_directions(angles)


def build_strategy(name: str, args):
    from . import strategies as st
    from .strategies.generic import case_d_generic_bound

    eta = _eta_arg(args.eta)
    if name in ("qubit-c", "qubit-d"):
        dirs = _qubit_dirs(args)
        if name == "qubit-c":
            if eta is None:
                eta = bounds.qubit_bound_case_c(bounds.double_cone_angle(dirs).theta)
            return st.strat_qubit_case_c_optimal(dirs, eta)
        return st.strat_qubit_case_d(dirs, args.variant or "n2-optimal", eta)
    a = _read_assembly(args.assembly) if args.assembly else default_assembly(args.k, args.n, args.seed)
    k0 = a[0].k
    if name == "full-jm":
        return st.strat_full_jm(a, 1.0 / a.n if eta is None else eta)
    if name == "partial-input":
        return st.strat_partial_input(a, 0.5 if eta is None else eta)
    if name == "partial-outcome":
        return st.strat_partial_outcome_generic(a, 1.0 / k0 if eta is None else eta)
    return st.strat_case_d_generic(a, case_d_generic_bound(k0) if eta is None else eta)


def _load_strategy(path: str):
    from .strategies import loads_strategy

    try:
        with open(path, encoding="utf-8") as fh:
            s = loads_strategy(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read strategy file: {exc}") from None
    if s.target is None:
        raise UsageError("strategy file has no target assembly to verify against")
    return s


def cmd_verify(args) -> int:
    from .strategies import StrategyError, ValidityError, dumps_strategy, verify_strategy

    name = args.strategy or args.strategy_file
    try:
        s = _load_strategy(args.strategy_file) if args.strategy_file else build_strategy(args.strategy, args)
    except ValidityError as exc:
        rec = {"strategy": name, "result": "FAIL", "error": type(exc).__name__,
               "message": str(exc), "validity_margins": dict(exc.margins)}
        _emit(args, rec)
        return EXIT_FAIL
    except StrategyError as exc:
        _emit(args, {"strategy": name, "result": "FAIL", "error": type(exc).__name__,
                     "message": str(exc)})
        return EXIT_FAIL
    if args.save:
        with open(args.save, "w", encoding="utf-8") as fh:
            fh.write(dumps_strategy(s, indent=1))
    tol = args.tol if args.tol is not None else 1e-9
    rep = verify_strategy(s, tol=tol)
    rec = {"strategy": name, "eta": s.target[1], "result": "PASS" if rep.passed else "FAIL",
           "tol": tol, "residuals": rep.residuals, "min_validity": rep.min_validity}
    if args.json or not rep.passed:
        rec["validity_margins"] = rep.validity
    _emit(args, rec)
    return EXIT_OK if rep.passed else EXIT_FAIL


# --- sweep ------------------------------------------------------------------

@dataclass
class SweepSpec:
    """Grid of (theta, nu_vis, case) points; rows come out in this nested order."""

    thetas: list
    nu_vis: list = field(default_factory=lambda: [1.0])
    cases: tuple = ("a", "b", "c", "d")
    mode: str = "both"
    family: str = "pair"
    tol: float = 1e-4
    solver_tol: float = 1e-7

    def __post_init__(self):
        if self.mode not in ("analytic", "sdp", "both"):
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.family not in ("pair", "cone"):
            raise UsageError(f"unknown family {self.family!r}")
        bad = [c for c in self.cases if c not in bounds.CASES]
        if bad:
            raise UsageError(f"unknown case(s) {bad}")
        if any(not 0.0 <= v <= 1.0 for v in self.nu_vis):
            raise UsageError("nu_vis values must lie in [0, 1]")
        if any(not 0.0 <= t <= math.pi / 2 + 1e-12 for t in self.thetas):
            raise UsageError("theta values must lie in [0, pi/2]")

    def points(self):
        return [(t, v, c, self) for t, v, c in itertools.product(self.thetas, self.nu_vis, self.cases)]


def _directions(theta: float, family: str):
    angles = [0.0, theta] if family == "pair" else [0.0, theta, -theta]
    return xz_directions(angles)


def sweep_point(point) -> dict:
    """One CSV row; solver failures leave ``nan`` in place and are logged."""
    from .sdp.threshold import threshold

    theta, nu_vis, case, spec = point
    dirs = _directions(theta, spec.family)
    row = {"theta": theta, "nu_vis": nu_vis, "case": case, "eta_analytic": math.nan, "eta_sdp": math.nan}
    if spec.mode in ("analytic", "both"):
        try:
            row["eta_analytic"] = bounds.analytic_threshold(case, dirs, nu_vis=nu_vis)
        except Exception as exc:  # noqa: BLE001 - recorded in-row
            log.error("analytic bound failed at theta=%g nu_vis=%g case=%s: %s", theta, nu_vis, case, exc)
    if spec.mode in ("sdp", "both"):
        try:
            res = threshold(qubit_assembly(dirs), case, spec.tol, nu_vis=nu_vis,
                            solver_tol=spec.solver_tol)
            row["eta_sdp"] = res.eta_star
        except Exception as exc:  # noqa: BLE001 - recorded in-row
            log.error("threshold failed at theta=%g nu_vis=%g case=%s: %s", theta, nu_vis, case, exc)
    row["gap"] = row["eta_sdp"] - row["eta_analytic"]
    return row


def default_jobs() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[dict]:
    pts = spec.points()
    if jobs <= 1 or len(pts) <= 1:
        return [sweep_point(p) for p in pts]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map() yields in submission order, so rows stay in grid order
        return list(pool.map(sweep_point, pts))


def write_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(float(r[c])) if c != "case" else r[c] for c in CSV_COLUMNS])


def cmd_sweep(args) -> int:
    spec = SweepSpec(
        thetas=_grid(args.theta),
        nu_vis=_grid(args.nu_vis),
        cases=tuple(c.strip() for c in args.cases.split(",") if c.strip()),
        mode=args.mode,
        family=args.family,
        tol=args.tol if args.tol is not None else 1e-4,
        solver_tol=args.solver_tol,
    )
    rows = run_sweep(spec, args.jobs or default_jobs())
    if args.json:
        print(json.dumps(_jsonable(rows), indent=2))
    elif args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    return EXIT_OK


# --- entropy ----------------------------------------------------------------

def cmd_entropy(args) -> int:
    from . import postsel

    try:
        eta = Fraction(args.eta)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse efficiency {args.eta!r}") from None
    if args.d < 2 or not 0 <= eta <= 1:
        raise UsageError("need d >= 2 and eta in [0, 1]")
    dist = postsel.abe_dist(args.d, eta)
    rep = postsel.entropies(dist).scaled(args.n_rounds)
    closed = postsel.closed_form_entropies(args.d, float(eta)).scaled(args.n_rounds)
    rec = {"d": args.d, "eta": float(eta), "n_rounds": args.n_rounds}
    rec.update({k: v for k, v in rep.as_dict().items() if k != "n_rounds"})
    rec["closed_form_max_deviation"] = max(
        abs(a - b) for a, b in zip(rep.as_dict().values(), closed.as_dict().values()))
    form = postsel.exact_information_form(dist, "i_BA_minus_BE")
    rec["i_BA_minus_BE_exactly_zero"] = not form
    if args.mc:
        mc = postsel.monte_carlo(postsel.abe_dist(args.d, float(eta)), int(args.mc), seed=args.seed)
        per_round = postsel.closed_form_entropies(args.d, float(eta)).as_dict()
        rec["monte_carlo"] = {}
        for name, est in mc.items():
            z = (est.value - per_round[name]) / est.sigma if est.sigma > 0 else 0.0
            rec["monte_carlo"][name] = f"{est.value:.9g} +- {est.sigma:.2g} (z={z:+.2f})"
    if args.parity_demo:
        bob, leaked = postsel.parity_reconcile(DEMO_A, DEMO_B, block=5, blocks=1)
        eve_parity = sum(int(ch) for ch in DEMO_E[:5]) % 2
        rec["parity_demo"] = {"alice": DEMO_A, "bob": DEMO_B, "eve": DEMO_E,
                              "announced": ", ".join(f"block {i}: {p}" for i, p in leaked),
                              "bob_after": bob, "eve_block_parity": eve_parity}
    _emit(args, rec)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def globals_parser(suppress: bool):
        g = argparse.ArgumentParser(add_help=False)
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--tol", type=float, default=dflt(None),
                       help="bisection tolerance (threshold, sweep) or residual tolerance (verify)")
        g.add_argument("--jobs", type=int, default=dflt(None), help="worker processes for sweeps")
        g.add_argument("--json", action="store_true", default=dflt(False), help="machine-readable output")
        g.add_argument("--seed", type=int, default=dflt(0))
        return g

    # flags are accepted before or after the command; the copy on each
    # command only overrides what was actually given there
    common = globals_parser(True)
    p = argparse.ArgumentParser(prog="gjm", description=__doc__.splitlines()[0],
                                parents=[globals_parser(False)])
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", parents=[common], help="closed-form efficiency bounds")
    b.add_argument("--case", choices=bounds.CASES, required=True)
    b.add_argument("--n", type=int, default=2)
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--theta", type=float, help="qubit double-cone / axis angle (radians)")
    b.add_argument("--variant", choices=("n2", "general"), default="n2")
    b.set_defaults(func=cmd_bound)

    t = sub.add_parser("threshold", parents=[common], help="critical efficiency from the SDP")
    t.add_argument("assembly", nargs="?", help="assembly JSON file")
    t.add_argument("--qubit-angles", help="comma-separated angles a_y; r_y = (sin a_y, 0, cos a_y)")
    t.add_argument("--case", choices=bounds.CASES, default="c")
    t.add_argument("--variant", choices=("n2", "general"))
    t.add_argument("--nu-vis", type=float, default=1.0)
    t.add_argument("--solver-tol", type=float, default=1e-7)
    t.add_argument("--export-sdpa", metavar="PATH", help="write the program at eta_star as SDPA")
    t.set_defaults(func=cmd_threshold)

    v = sub.add_parser("verify", parents=[common], help="construct and verify an explicit strategy")
    src = v.add_mutually_exclusive_group(required=True)
    src.add_argument("--strategy", choices=STRATEGIES)
    src.add_argument("--strategy-file", metavar="PATH", help="strategy JSON to verify against its target")
    v.add_argument("--save", metavar="PATH", help="write the constructed strategy as JSON")
    v.add_argument("--eta", help="efficiency: decimal, p/q, or 'bound' (default)")
    v.add_argument("--k", type=int, default=2)
    v.add_argument("--n", type=int, default=2)
    v.add_argument("--theta", type=float)
    v.add_argument("--qubit-angles")
    v.add_argument("--variant", choices=("n2-optimal", "cone-axis"))
    v.add_argument("--assembly", help="assembly JSON for the generic strategies")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", parents=[common], help="CSV grid of analytic and SDP thresholds")
    s.add_argument("--theta", default="0:1.5707963267948966:9", help="START:STOP:STEPS or list")
    s.add_argument("--nu-vis", default="1.0", help="START:STOP:STEPS or list")
    s.add_argument("--cases", default="a,b,c,d")
    s.add_argument("--mode", choices=("analytic", "sdp", "both"), default="both")
    s.add_argument("--family", choices=("pair", "cone"), default="pair")
    s.add_argument("--solver-tol", type=float, default=1e-7)
    s.add_argument("--out", help="write CSV here instead of standard output")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("entropy", parents=[common], help="post-selection entropy report")
    e.add_argument("--d", type=int, default=2)
    e.add_argument("--eta", default="2/3", help="decimal or p/q")
    e.add_argument("--n-rounds", type=int, default=1)
    e.add_argument("--mc", type=float, default=0, help="Monte-Carlo samples (0: skip)")
    e.add_argument("--parity-demo", action="store_true")
    e.set_defaults(func=cmd_entropy)
    return p


def _setup_logging() -> None:
    level = os.environ.get("GJM_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gjm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (bounds.DomainError, ValueError) as exc:
        print(f"gjm {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
