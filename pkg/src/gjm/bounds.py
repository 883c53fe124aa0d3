"""Closed-form efficiency thresholds and the geometric quantities they depend on."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .matqm import as_bloch

CASES = ("a", "b", "c", "d")
CERT_TOL = 1e-7
AXIS_TIE = 1e-12


class DomainError(ValueError):
    """Argument outside the domain of a closed-form expression."""


def generic_bound(case: str, n: int, k: int) -> float:
    """Efficiency below which the generic strategies make ``n`` ``k``-outcome measurements G-JM."""
    if n < 1 or k < 1:
        raise DomainError("n and k must be positive")
    if case == "a":
        return 1.0 / n
    if case == "b":
        return 0.5
    if case == "c":
        return max(1.0 / n, 1.0 / k)
    if case == "d":
        return k / (2.0 * k - 1.0)
    raise DomainError(f"unknown case {case!r}")


# --- double cone ------------------------------------------------------------

def fold_axis(m) -> np.ndarray:
    """Representative of the axis ``{m, -m}`` in the hemisphere z > 0 (ties: x > 0, then y > 0)."""
    m = np.asarray(m, dtype=float)
    for comp in (m[2], m[0], m[1]):
        if abs(comp) > AXIS_TIE:
            return m if comp > 0 else -m
    return m


def _sgn(x: float) -> float:
    return 1.0 if x >= 0 else -1.0


@dataclass
class ConeResult:
    theta: float
    axis: np.ndarray
    per_axis_angles: np.ndarray
    method: str = "closed-form"
    certified: bool = True
    restarts: int = 0

    @property
    def mu(self) -> float:
        """``min_y |m . r_y| = cos(theta / 2)``."""
        return float(np.cos(self.theta / 2))


def _angles(m, dirs) -> np.ndarray:
    return np.arccos(np.clip(np.abs(dirs @ m), 0.0, 1.0))


def fibonacci_sphere(count: int) -> np.ndarray:
    """Near-uniform points on the upper hemisphere (axes are sign-less)."""
    i = np.arange(count) + 0.5
    z = i / count                       # z in (0, 1)
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    rho = np.sqrt(1.0 - z * z)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def _polish(m0, dirs):
    """Maximize ``s`` subject to ``sigma_y (m . r_y) >= s`` and ``|m| = 1`` with fixed signs."""
    sig = np.array([_sgn(v) for v in dirs @ m0])
    sd = dirs * sig[:, None]
    x0 = np.concatenate([m0, [float(np.min(sd @ m0))]])
    cons = [
        {"type": "ineq", "fun": lambda x: sd @ x[:3] - x[3], "jac": lambda x: np.column_stack([sd, -np.ones(len(sd))])},
        {"type": "eq", "fun": lambda x: np.array([x[:3] @ x[:3] - 1.0]),
         "jac": lambda x: np.concatenate([2 * x[:3], [0.0]])[None, :]},
    ]
    res = optimize.minimize(lambda x: -x[3], x0, jac=lambda x: np.array([0, 0, 0, -1.0]),
                            constraints=cons, method="SLSQP", options={"ftol": 1e-15, "maxiter": 200})
    m = res.x[:3] / np.linalg.norm(res.x[:3])
    return m


def _numeric_cone(dirs, grid: int = 10_000, restarts: int = 20):
    pts = fibonacci_sphere(grid)
    vals = np.min(np.abs(pts @ dirs.T), axis=1)
    order = np.argsort(-vals, kind="stable")[:restarts]
    found = []
    for idx in order:
        res = optimize.minimize(lambda v: -np.min(np.abs(dirs @ (v / np.linalg.norm(v)))),
                                pts[idx], method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        m = res.x / np.linalg.norm(res.x)
        m = _polish(m, dirs)
        found.append((float(np.min(np.abs(dirs @ m))), fold_axis(m)))
    best = max(v for v, _ in found)
    # ties: lexicographic on the folded axis coordinates
    cands = sorted((m for v, m in found if best - v <= CERT_TOL), key=lambda m: tuple(np.round(m, 12)))
    agree = sum(1 for v, _ in found if best - v <= CERT_TOL)
    return cands[0], best, agree >= 2 or len(found) == 1, len(found)


def double_cone_angle(directions, *, method: str = "auto", grid: int = 10_000,
                      restarts: int = 20) -> ConeResult:
    """Full aperture ``theta`` of the narrowest double cone containing all measurement axes.

    ``theta / 2 = min_m max_y arccos |m . r_y|``. One direction gives 0;
    two use the closed form ``arccos |r_1 . r_2|`` with the bisector axis
    (unless ``method="numeric"``); three or more use a grid search, multi-start
    Nelder-Mead and a smooth constrained polish with the active signs fixed.
    """
    dirs = np.array([as_bloch(r, tol=1e-9) for r in directions], dtype=float)
    if dirs.ndim != 2 or len(dirs) == 0:
        raise DomainError("need at least one direction")
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    n = len(dirs)
    if method not in ("auto", "closed-form", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    if n == 1 and method != "numeric":
        m = fold_axis(dirs[0])
        return ConeResult(0.0, m, _angles(m, dirs))
    if n == 2 and method != "numeric":
        r1, r2 = dirs
        s = _sgn(float(r1 @ r2))
        theta = float(np.arccos(np.clip(abs(r1 @ r2), 0.0, 1.0)))
        m = fold_axis((r1 + s * r2) / np.linalg.norm(r1 + s * r2))
        return ConeResult(theta, m, _angles(m, dirs))
    if method == "closed-form":
        raise DomainError("closed form only exists for one or two directions")
    if np.all(np.abs(dirs @ dirs[0]) >= 1 - 1e-15):
        m = fold_axis(dirs[0])
        return ConeResult(0.0, m, _angles(m, dirs), "numeric", True, 0)
    m, mu, certified, runs = _numeric_cone(dirs, grid, restarts)
    theta = 2.0 * float(np.arccos(np.clip(mu, 0.0, 1.0)))
    return ConeResult(theta, m, _angles(m, dirs), "numeric", certified, runs)


def case_d_axis_angle(directions) -> float:
    """Largest angle between the first axis and any other axis, in ``[0, pi/2]``."""
    dirs = [as_bloch(r, tol=1e-9) for r in directions]
    if not dirs:
        raise DomainError("need at least one direction")
    r1 = dirs[0]
    if len(dirs) == 1:
        return 0.0
    return float(max(np.arccos(np.clip(abs(r1 @ r), 0.0, 1.0)) for r in dirs[1:]))


# --- closed-form bounds -----------------------------------------------------

def _theta_in(theta: float, hi: float) -> float:
    theta = float(theta)
    if not (-1e-12 <= theta <= hi + 1e-12):
        raise DomainError(f"theta={theta} outside [0, {hi}]")
    return min(max(theta, 0.0), hi)


def qubit_bound_case_c(theta: float) -> float:
    """``1 / (1 + sin(theta/2))`` for the double-cone aperture ``theta`` in ``[0, pi]``."""
    theta = _theta_in(theta, np.pi)
    return 1.0 / (1.0 + np.sin(theta / 2))


def qubit_bound_case_d(theta: float, variant: str = "n2") -> float:
    """``2/(2 + sin theta)`` (two settings) or ``(1 + sin theta)/(1 + 2 sin theta)`` (any number)."""
    theta = _theta_in(theta, np.pi / 2)
    s = np.sin(theta)
    if variant == "n2":
        return 2.0 / (2.0 + s)
    if variant == "general":
        return (1.0 + s) / (1.0 + 2.0 * s)
    raise DomainError(f"unknown variant {variant!r}")


def case_d_gap(theta: float) -> float:
    """``sin(1 - sin) / ((2 + sin)(1 + 2 sin))``: how much the two-setting bound exceeds the general one."""
    theta = _theta_in(theta, np.pi / 2)
    s = np.sin(theta)
    return s * (1 - s) / ((2 + s) * (1 + 2 * s))


# --- weak-measurement constraint functions ---------------------------------

def _check_nu_t(nu, t, nu_closed=False):
    if not (0.0 <= nu <= 1.0) or (nu == 1.0 and not nu_closed):
        raise DomainError(f"nu={nu} outside [0, 1)")
    if not (-1e-12 <= t <= 1 + 1e-12):
        raise DomainError(f"t={t} outside [0, 1]")
    return float(nu), float(min(max(t, 0.0), 1.0))


def F(nu: float, t: float) -> float:
    """``(1 - nu^2) / (2 (1 - nu t))``: constraint from the guessed setting."""
    nu, t = _check_nu_t(nu, t)
    return (1 - nu * nu) / (2 * (1 - nu * t))


def g_objective(nu: float, t: float, gamma: float) -> float:
    """Largest admissible efficiency for a non-guessed setting at post-processing ``gamma``."""
    a = 1 - nu * gamma * t
    disc = max(a * a - (1 - nu * nu) * (1 - gamma * gamma), 0.0)
    return (1 - nu * nu) / (a + np.sqrt(disc))


def stationary_gamma(nu: float, t: float) -> float:
    """Stationary point ``nu t / (1 - nu sqrt(1 - t^2))`` of ``g_objective`` in ``gamma``."""
    return nu * t / (1 - nu * np.sqrt(max(1 - t * t, 0.0)))


def G(nu: float, t: float) -> float:
    """``max_{0<=gamma<=1} g_objective``; the first branch is used at the branch point."""
    nu, t = _check_nu_t(nu, t)
    st = np.sqrt(max(1 - t * t, 0.0))
    if nu * (t + st) <= 1.0:
        return 1 - nu * st
    return (1 - nu * nu) / (2 * (1 - nu * t))


def case_d_sufficient(nu: float, t1: float, ts) -> float:
    """``min{F(nu, t_1), min_y G(nu, t_y)}`` for a fixed weak-measurement axis."""
    return min([F(nu, t1)] + [G(nu, t) for t in ts])


@dataclass
class CaseDParams:
    variant: str
    theta: float
    x_star: float | None
    nu_star: float
    gamma: tuple
    branch_value: float     # quantity that must be <= 1 for the stationary branch

    @property
    def bound(self) -> float:
        return qubit_bound_case_d(self.theta, self.variant)


def case_d_params(theta: float, variant: str = "n2") -> CaseDParams:
    """Optimal weak-measurement parameters for the case-(d) qubit strategies.

    ``n2``: axis at angle ``x*`` from ``r_1`` with ``cos x* = (1 + cos^2)/sqrt(1 + 3 cos^2)``,
    strength ``nu* = sqrt(1 + 3 cos^2)/(2 + sin)`` and ``gamma_2 = cos theta``.
    ``general``: axis ``r_1``, ``nu* = 1/(1 + 2 sin)`` and the worst-case stationary
    ``gamma`` at ``t = cos theta``.
    """
    theta = _theta_in(theta, np.pi / 2)
    s, c = np.sin(theta), np.cos(theta)
    if variant == "n2":
        root = np.sqrt(1 + 3 * c * c)
        x = float(np.arctan2(s * c / root, (1 + c * c) / root))
        nu = float(root / (2 + s))
        branch = (2 * c + s) / (2 + s)
        return CaseDParams("n2", theta, x, nu, (float(c),), float(branch))
    if variant == "general":
        nu = 1.0 / (1.0 + 2.0 * s)
        gam = nu * c / (1 - nu * s)
        return CaseDParams("general", theta, None, float(nu), (float(gam),), float(1.0 / (1.0 + s)))
    raise DomainError(f"unknown variant {variant!r}")


def analytic_threshold(case: str, directions, *, nu_vis: float = 1.0) -> float:
    """Best closed-form efficiency known for qubit axes, or ``nan`` if none applies.

    Only lossy, unit-visibility assemblies have closed forms. Case (a): ``1/n``
    (``1`` for a single axis); (b): ``1/2`` (``1`` if all axes coincide);
    (c): the double-cone bound; (d): the two-setting bound for ``n = 2``, the
    cone-axis bound otherwise.
    """
    if nu_vis != 1.0:
        return float("nan")
    dirs = [as_bloch(r, tol=1e-9) for r in directions]
    n = len(dirs)
    coincident = all(abs(abs(dirs[0] @ r) - 1) < 1e-12 for r in dirs)
    if case == "a":
        return 1.0 if coincident else 1.0 / n
    if case == "b":
        return 1.0 if coincident else 0.5
    if case == "c":
        return qubit_bound_case_c(double_cone_angle(dirs).theta)
    if case == "d":
        th = case_d_axis_angle(dirs)
        return qubit_bound_case_d(th, "n2" if n == 2 else "general")
    raise DomainError(f"unknown case {case!r}")
