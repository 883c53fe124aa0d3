"""Weak-measurement strategies for lossy qubit observables ``r_y . sigma``."""

from __future__ import annotations

import numpy as np

from ..bounds import case_d_axis_angle, case_d_params, double_cone_angle, stationary_gamma
from ..matqm import as_bloch, bloch_projector, herm, max_eig
from ..povm import NO_CLICK, qubit_assembly
from .core import Instrument, Strategy, StrategyError, ValidityError, mix_with_no_click

SIGNS = (1, -1)
VALIDITY_SLACK = 1e-12


def sgn(x: float) -> int:
    """Sign with ``sgn(0) = +1``."""
    return 1 if x >= 0 else -1


def weak_kraus(m, nu: float):
    """Kraus operators ``K_c`` of the weak measurement along ``m`` and their (pseudo-)inverses.

    ``K_c = sqrt((1+nu)/2) P_{cm} + sqrt((1-nu)/2) P_{-cm}``. The inverse is
    written in the same eigenbasis; at ``nu = 1`` the kernel term is dropped.
    """
    if not 0.0 <= nu <= 1.0:
        raise StrategyError(f"weak-measurement strength nu={nu} outside [0, 1]")
    m = as_bloch(m, tol=1e-9)
    k, kinv = {}, {}
    hi, lo = np.sqrt((1 + nu) / 2), np.sqrt((1 - nu) / 2)
    for c in SIGNS:
        p_on, p_off = bloch_projector(m, c), bloch_projector(m, -c)
        k[c] = hi * p_on + lo * p_off
        kinv[c] = np.sqrt(2 / (1 + nu)) * p_on + (np.sqrt(2 / (1 - nu)) * p_off if nu < 1 else 0 * p_off)
    return k, kinv


def star_trace(nu: float, t: float, eta: float) -> float:
    """Trace (= only nonzero eigenvalue) of ``eta K_c^-1 P K_c^-1`` at overlap ``t = |m . r|``."""
    return eta * 2 * (1 - nu * t) / (1 - nu * nu)


def _target(directions, eta, case):
    return (qubit_assembly(directions), float(eta), case, 1.0)


def strat_qubit_case_c(directions, m, nu: float, eta: float) -> Strategy:
    """Weak measurement along ``m`` then a filtered sharp measurement; guesses every conclusive outcome.

    Guess ``g_y(c) = c sgn(m . r_y)``; ``M_{star|y,c} = eta K_c^-1 B_{g|y} K_c^-1``.
    Valid iff ``eta <= (1 - nu^2) / (2 (1 - nu |m . r_y|))`` for every ``y``;
    otherwise :class:`ValidityError` lists the per-setting margins.
    """
    dirs = [as_bloch(r, tol=1e-9) for r in directions]
    m = as_bloch(m, tol=1e-9)
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    k, kinv = weak_kraus(m, nu)
    labels = tuple((1, -1, NO_CLICK) for _ in dirs)
    inst = Instrument(SIGNS, [[k[c]] for c in SIGNS])
    zero, eye = np.zeros((2, 2)), np.eye(2)
    cond, resp, guess, margins = {}, {}, {}, {}
    for y, r in enumerate(dirs):
        s = sgn(float(m @ r))
        worst = 0.0
        for c in SIGNS:
            g = c * s
            unit_star = herm(kinv[c] @ bloch_projector(r, g) @ kinv[c])
            worst = max(worst, max_eig(unit_star))
            star = eta * unit_star
            cond[(y, c)] = {g: star, -g: zero, NO_CLICK: herm(eye - star)}
            resp[(y, c)] = {g: 1.0, -g: 0.0}
            guess[(y, c)] = g
        margins[f"y={y}"] = (1.0 / worst if worst > 0 else np.inf) - eta
    bad = {key: v for key, v in margins.items() if v < -VALIDITY_SLACK}
    if bad:
        raise ValidityError(f"conditional effects exceed the identity for {sorted(bad)}", margins)
    meta = {"construction": "qubit_case_c", "axis": m, "nu": float(nu), "margins": margins,
            "t": [abs(float(m @ r)) for r in dirs]}
    return Strategy(inst, cond, resp, guess, len(dirs), labels, _target(dirs, eta, "c"), meta)


def qubit_case_c_parameters(directions):
    """Axis ``m`` of the narrowest double cone and the optimal strength for it."""
    cone = double_cone_angle(directions)
    mu = cone.mu if cone.theta > 1e-12 else 1.0
    nu = mu / (1 + np.sqrt(max(1 - mu * mu, 0.0)))
    return cone.axis, float(nu), cone


def strat_qubit_case_c_optimal(directions, eta: float) -> Strategy:
    m, nu, _ = qubit_case_c_parameters(directions)
    return strat_qubit_case_c(directions, m, nu, eta)


def _case_d_axis(dirs, variant):
    r1 = dirs[0]
    if variant == "cone-axis":
        theta = case_d_axis_angle(dirs)
        p = case_d_params(theta, "general")
        return r1, p.nu_star, theta
    if variant == "n2-optimal":
        if len(dirs) != 2:
            raise StrategyError("the n2-optimal variant needs exactly two directions")
        r2 = dirs[1]
        s2 = sgn(float(r1 @ r2))
        theta = case_d_axis_angle(dirs)
        p = case_d_params(theta, "n2")
        perp = s2 * r2 - (s2 * float(r1 @ r2)) * r1
        norm = np.linalg.norm(perp)
        if norm < 1e-12:
            return r1, p.nu_star, theta
        u = perp / norm
        m = np.cos(p.x_star) * r1 + np.sin(p.x_star) * u
        return m / np.linalg.norm(m), p.nu_star, theta
    raise StrategyError(f"unknown variant {variant!r}")


def strat_qubit_case_d(directions, variant: str = "n2-optimal", eta: float | None = None) -> Strategy:
    """Weak measurement plus trace-matched post-processing; guesses conclusive outcomes of setting 1.

    ``M_{b|1,c} = delta_{b,g_1(c)} eta K_c^-1 B_{b|1} K_c^-1``; for ``y != 1``,
    ``M_{b|y,c} = q_{b,c|y} eta K_c^-1 B_{b|y} K_c^-1`` with
    ``q = (1 + b g_y(c) gamma_y) / 2`` and the stationary ``gamma_y``.
    ``eta`` defaults to the variant's closed-form bound. A violated ``F``
    (setting 1) or ``G`` (other settings) constraint raises ValidityError.
    """
    dirs = [as_bloch(r, tol=1e-9) for r in directions]
    m, nu, theta = _case_d_axis(dirs, variant)
    if eta is None:
        from ..bounds import qubit_bound_case_d
        eta = qubit_bound_case_d(theta, "n2" if variant == "n2-optimal" else "general")
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    k, kinv = weak_kraus(m, nu)
    inst = Instrument(SIGNS, [[k[c]] for c in SIGNS])
    labels = tuple((1, -1, NO_CLICK) for _ in dirs)
    zero, eye = np.zeros((2, 2)), np.eye(2)
    cond, resp, guess, margins, gammas = {}, {}, {}, {}, {}
    for y, r in enumerate(dirs):
        s = sgn(float(m @ r))
        t = abs(float(m @ r))
        if y > 0:
            gam = 1.0 if nu == 1.0 else min(stationary_gamma(nu, t), 1.0)
            gammas[y] = gam
        worst = 0.0
        for c in SIGNS:
            g = c * s
            if y == 0:
                unit = {g: herm(kinv[c] @ bloch_projector(r, g) @ kinv[c]), -g: zero}
                resp[(y, c)] = {g: 1.0, -g: 0.0}
                guess[(y, c)] = g
            else:
                unit = {}
                for b in (1, -1):
                    q = 0.5 * (1 + b * g * gam)
                    unit[b] = herm(q * kinv[c] @ bloch_projector(r, b) @ kinv[c])
            worst = max(worst, max_eig(unit[1] + unit[-1]))
            mm = {b: eta * v for b, v in unit.items()}
            mm[NO_CLICK] = herm(eye - mm[1] - mm[-1])
            cond[(y, c)] = mm
        name = "F" if y == 0 else f"G[y={y}]"
        margins[name] = (1.0 / worst if worst > 0 else np.inf) - eta
    bad = {key: v for key, v in margins.items() if v < -VALIDITY_SLACK}
    if bad:
        raise ValidityError(f"violated constraint(s) {sorted(bad)} at eta={eta:.6g}", margins)
    meta = {"construction": "qubit_case_d", "variant": variant, "axis": m, "nu": float(nu),
            "theta": theta, "gamma": gammas, "margins": margins}
    return Strategy(inst, cond, resp, guess, len(dirs), labels, _target(dirs, eta, "d"), meta)


def below_bound(s: Strategy, eta: float) -> Strategy:
    """Mix a strategy built at its bound down to a smaller efficiency."""
    a_ideal, eta0, case, nu = s.target
    if eta > eta0 + 1e-12:
        raise StrategyError("can only mix down to a smaller efficiency")
    return mix_with_no_click(s, eta / eta0 if eta0 > 0 else 0.0, (a_ideal, float(eta), case, nu))
