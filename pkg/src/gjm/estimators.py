"""scikit-learn style wrapper around the threshold search, plus input checks.

``GJMThreshold().fit(X)`` takes an ideal assembly (an :class:`Assembly`,
its JSON document, qubit Bloch vectors of shape ``(n, 3)`` or x-z plane
angles of shape ``(n,)``) and learns the critical efficiency; ``predict``
then says which efficiencies leave the lossy assembly G-jointly measurable.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .bounds import CASES, analytic_threshold
from .matqm import as_bloch
from .povm import Assembly, GSpec, assembly_from_dict, loads_assembly, qubit_assembly, xz_directions
from .sdp.threshold import threshold


def check_directions(X) -> np.ndarray:
    """Unit Bloch vectors as an ``(n, 3)`` array; a 1-D input is read as x-z plane angles."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = np.array(xz_directions(arr))
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
        raise ValueError(f"expected angles (n,) or Bloch vectors (n, 3), got shape {np.shape(X)}")
    return np.array([as_bloch(r, tol=1e-9) for r in arr])


def check_assembly(X) -> tuple[Assembly, np.ndarray | None]:
    """Coerce ``X`` to an ideal assembly; also return the Bloch vectors when ``X`` gave them."""
    if isinstance(X, Assembly):
        a, dirs = X, None
    elif isinstance(X, dict):
        a, dirs = assembly_from_dict(X), None
    elif isinstance(X, str):
        a, dirs = loads_assembly(X), None
    else:
        dirs = check_directions(X)
        a = qubit_assembly(dirs)
    if a.is_lossy:
        raise ValueError("expected an ideal assembly; loss is applied during the search")
    return a, dirs


def check_efficiency(eta) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(eta, dtype=float))
    if arr.ndim != 1:
        arr = arr.ravel()
    if np.any((arr < 0) | (arr > 1)) or not np.all(np.isfinite(arr)):
        raise ValueError("efficiencies must lie in [0, 1]")
    return arr


class GJMThreshold(BaseEstimator):
    """Critical detection efficiency of an assembly for one guessable-set case.

    Parameters
    ----------
    case : "a" | "b" | "c" | "d" or GSpec
    tol : bisection tolerance on eta
    nu_vis : visibility applied together with the loss
    solver_tol : slack classification tolerance of the SDP

    Attributes
    ----------
    eta_star_, bracket_, n_evaluations_, always_jm_ : search results
    eta_analytic_ : closed-form value for qubit inputs (nan otherwise)
    """

    def __init__(self, case="c", tol=1e-4, nu_vis=1.0, solver_tol=1e-7):
        self.case = case
        self.tol = tol
        self.nu_vis = nu_vis
        self.solver_tol = solver_tol

    def fit(self, X, y=None):
        if not isinstance(self.case, GSpec) and self.case not in CASES:
            raise ValueError(f"case must be one of {CASES} or a GSpec")
        if not 0 <= self.nu_vis <= 1:
            raise ValueError("nu_vis must lie in [0, 1]")
        a, dirs = check_assembly(X)
        res = threshold(a, self.case, self.tol, nu_vis=self.nu_vis, solver_tol=self.solver_tol)
        self.eta_star_ = res.eta_star
        self.bracket_ = res.bracket
        self.n_evaluations_ = res.evaluations
        self.always_jm_ = res.always_jm
        self.result_ = res
        self.eta_analytic_ = (analytic_threshold(self.case, dirs, nu_vis=self.nu_vis)
                              if dirs is not None and not isinstance(self.case, GSpec) else np.nan)
        return self

    def decision_function(self, eta) -> np.ndarray:
        """``eta_star_ - eta``: non-negative where the lossy assembly is G-JM."""
        check_is_fitted(self, "eta_star_")
        return self.eta_star_ - check_efficiency(eta)

    def predict(self, eta) -> np.ndarray:
        return self.decision_function(eta) >= 0
