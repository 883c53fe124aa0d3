"""Critical detection efficiency by bisection on the feasibility predicate."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ..povm import Assembly, GSpec, LossParams, apply_loss_visibility, gspec_case
from .program import FeasibilityReport, build_program, solve

log = logging.getLogger(__name__)


class ThresholdError(RuntimeError):
    """The feasibility predicate behaved inconsistently (e.g. infeasible at eta = 0)."""


@dataclass
class ThresholdResult:
    eta_star: float
    bracket: tuple          # (feasible eta, infeasible eta)
    tol: float
    evaluations: int
    always_jm: bool = False
    lo_report: FeasibilityReport | None = None
    hi_report: FeasibilityReport | None = None


def _gspec_for(g_builder, lossy: Assembly) -> GSpec:
    if isinstance(g_builder, GSpec):
        return g_builder.validate(lossy)
    return gspec_case(g_builder, lossy)


def feasibility_at(a_ideal: Assembly, g_builder, eta: float, nu_vis: float = 1.0,
                   solver_tol: float = 1e-7) -> FeasibilityReport:
    lossy = apply_loss_visibility(a_ideal, LossParams(eta, nu_vis))
    return solve(build_program(lossy, _gspec_for(g_builder, lossy)), solver_tol)


def threshold(a_ideal: Assembly, g_builder="c", tol: float = 1e-4, *, nu_vis: float = 1.0,
              solver_tol: float = 1e-7) -> ThresholdResult:
    """Largest ``eta`` for which the lossy (and noisy) assembly is G-jointly measurable.

    Bisection on ``[0, 1]``; it is valid because the feasible set of ``eta``
    is an interval containing 0 (the lossy effects are affine in ``eta`` and
    the all-no-click device is always feasible). MARGINAL counts as feasible,
    so ``eta_star`` is the feasible end of the final bracket.

    ``g_builder`` is a case tag (``"a"`` .. ``"d"``) or an explicit GSpec.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    evals = 0

    def probe(eta):
        nonlocal evals
        evals += 1
        rep = feasibility_at(a_ideal, g_builder, eta, nu_vis, solver_tol)
        log.debug("eta=%.8f -> %s (slack %.3e)", eta, rep.status.value, rep.slack)
        return rep

    hi_rep = probe(1.0)
    if hi_rep.feasible:
        return ThresholdResult(1.0, (1.0, 1.0), tol, evals, always_jm=True,
                               lo_report=hi_rep, hi_report=None)
    lo_rep = probe(0.0)
    if not lo_rep.feasible:
        raise ThresholdError("program infeasible at eta = 0; the all-no-click device "
                             f"should always be feasible ({lo_rep.diagnostics})")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        rep = probe(mid)
        if rep.feasible:
            lo, lo_rep = mid, rep
        else:
            hi, hi_rep = mid, rep
    return ThresholdResult(lo, (lo, hi), tol, evals, lo_report=lo_rep, hi_report=hi_rep)
