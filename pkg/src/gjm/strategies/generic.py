"""Dimension-independent strategies for the four standard guessable-set cases."""

from __future__ import annotations

import numpy as np

from ..matqm import ancilla_embedding, herm, herm_sqrt, naimark_dilate
from ..povm import NO_CLICK, Assembly, AssemblyError
from .core import (
    BoundViolatedError,
    Instrument,
    ReversalInvalidityError,
    Strategy,
    StrategyError,
    mix_with_no_click,
)

BOUND_SLACK = 1e-12


def _check_ideal(a: Assembly) -> None:
    if a.is_lossy:
        raise AssemblyError("constructors take the ideal (lossless) assembly")


def _check_eta(eta: float, bound: float, name: str) -> float:
    eta = float(eta)
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if eta > bound + BOUND_SLACK:
        raise BoundViolatedError(f"{name}: eta={eta:.6g} exceeds the bound {bound:.6g}")
    return eta


def _lossy_labels(a: Assembly) -> tuple:
    return tuple(p.labels + (NO_CLICK,) for p in a)


def _finish(s: Strategy, eta: float, eta0: float, target) -> Strategy:
    """Mix down from the bound ``eta0`` when ``eta < eta0``."""
    if eta >= eta0 - BOUND_SLACK:
        return mix_with_no_click(s, 1.0, target)
    return mix_with_no_click(s, eta / eta0, target)


def strat_full_jm(a_ideal: Assembly, eta: float) -> Strategy:
    """Guess the setting: measure ``B_{y'}`` for a uniformly random ``y'``.

    Parent POVM ``E_{(y',b')} = B_{b'|y'} / n``; the device outputs ``b'`` if
    ``y = y'`` and no-click otherwise. Valid for ``eta <= 1/n``.
    """
    _check_ideal(a_ideal)
    n = a_ideal.n
    eta0 = 1.0 / n
    eta = _check_eta(eta, eta0, "full JM")
    d = a_ideal.dim
    labels = _lossy_labels(a_ideal)
    outcomes, kraus = [], []
    for yp, p in enumerate(a_ideal):
        for bp, e in p.items():
            outcomes.append((yp, bp))
            kraus.append([herm_sqrt(e / n)])
    inst = Instrument(outcomes, kraus)
    eye, zero = np.eye(d), np.zeros((d, d))
    cond, resp, guess = {}, {}, {}
    for y in range(n):
        for c in outcomes:
            yp, bp = c
            out = bp if y == yp else NO_CLICK
            cond[(y, c)] = {b: (eye if b == out else zero) for b in labels[y]}
            resp[(y, c)] = {b: float(b == out) for b in labels[y]}
            guess[(y, c)] = out
    s = Strategy(inst, cond, resp, guess, n, labels, None, {"construction": "full_jm", "eta0": eta0})
    return _finish(s, eta, eta0, (a_ideal, eta, "a", 1.0))


def strat_partial_input(a_ideal: Assembly, eta: float) -> Strategy:
    """Measure ``B_1`` or forward the state untouched, each with probability 1/2.

    Guessable: every outcome (no-click included) of the first setting.
    Outcomes with a zero effect are kept; they simply never occur.
    """
    _check_ideal(a_ideal)
    eta0 = 0.5
    eta = _check_eta(eta, eta0, "partial input")
    d = a_ideal.dim
    n = a_ideal.n
    labels = _lossy_labels(a_ideal)
    first = a_ideal[0]
    outcomes = first.labels + (NO_CLICK,)
    kraus = [[np.sqrt(0.5) * herm_sqrt(e)] for e in first.effects]
    kraus.append([np.sqrt(0.5) * np.eye(d)])
    inst = Instrument(outcomes, kraus)
    eye, zero = np.eye(d), np.zeros((d, d))
    cond, resp, guess = {}, {}, {}
    for c in outcomes:
        cond[(0, c)] = {b: (eye if b == c else zero) for b in labels[0]}
        resp[(0, c)] = {b: float(b == c) for b in labels[0]}
        guess[(0, c)] = c
        for y in range(1, n):
            m = {}
            for b in labels[y]:
                if b == NO_CLICK:
                    m[b] = zero if c == NO_CLICK else eye
                else:
                    m[b] = a_ideal[y][b] if c == NO_CLICK else zero
            cond[(y, c)] = m
    s = Strategy(inst, cond, resp, guess, n, labels, None,
                 {"construction": "partial_input", "eta0": eta0})
    return _finish(s, eta, eta0, (a_ideal, eta, "b", 1.0))


def _common_k(a: Assembly) -> int:
    ks = {p.k for p in a}
    if len(ks) != 1:
        raise AssemblyError(f"outcome guessing needs equal outcome counts, got {sorted(ks)}")
    return ks.pop()


def strat_partial_outcome_generic(a_ideal: Assembly, eta: float, *, case: str = "c") -> Strategy:
    """Guess the outcome: pick ``c`` uniformly, output ``b`` only if ``b = c``.

    ``c`` is the index of an outcome; it names the ``c``-th label of each
    setting. Valid for ``eta <= 1/k``.
    """
    _check_ideal(a_ideal)
    k = _common_k(a_ideal)
    eta0 = 1.0 / k
    eta = _check_eta(eta, eta0, "partial outcome")
    d, n = a_ideal.dim, a_ideal.n
    labels = _lossy_labels(a_ideal)
    outcomes = a_ideal[0].labels
    inst = Instrument(outcomes, [[np.sqrt(1.0 / k) * np.eye(d)] for _ in outcomes])
    zero = np.zeros((d, d))
    cond, resp, guess = {}, {}, {}
    for i, c in enumerate(outcomes):
        for y, p in enumerate(a_ideal):
            gy = p.labels[i]
            bc = p[gy]
            m = {b: zero for b in labels[y]}
            m[gy] = bc
            m[NO_CLICK] = herm(np.eye(d) - bc)
            cond[(y, c)] = m
            resp[(y, c)] = {b: float(b == gy) for b in p.labels}
            guess[(y, c)] = gy
    s = Strategy(inst, cond, resp, guess, n, labels, None,
                 {"construction": "partial_outcome", "eta0": eta0})
    return _finish(s, eta, eta0, (a_ideal, eta, case, 1.0))


def case_d_generic_bound(k: int) -> float:
    return k / (2 * k - 1)


def reversal_margins(k: int, eta: float, gamma: float) -> dict:
    """Slack of the reversal constraints (negative = violated)."""
    return {
        "gamma<=eta": eta - gamma,
        "gamma<=(1-eta)/(k-1)": (1 - eta) / (k - 1) - gamma,
        "k*gamma==eta": eta - k * gamma,
    }


def _case_d_weak(a_ideal: Assembly, eta: float) -> Strategy:
    """Weak measurement of the dilated ``B_1`` plus probabilistic reversal (``eta > 1/k``)."""
    first = a_ideal[0]
    k, d, n = first.k, a_ideal.dim, a_ideal.n
    projs, big = naimark_dilate(first.effects)
    v = ancilla_embedding(d, k)
    eye = np.eye(big)
    gamma = eta / k
    a_on, a_off = np.sqrt(eta), np.sqrt((1 - eta) / (k - 1))
    l_on, l_off = np.sqrt(gamma / eta), np.sqrt(gamma * (k - 1) / (1 - eta)) if eta < 1 else 0.0
    k_ext, l_inv = [], []
    for pc in projs:
        k_ext.append(a_on * pc + a_off * (eye - pc))
        l_inv.append(l_on * pc + l_off * (eye - pc))
    outcomes = first.labels
    inst = Instrument(outcomes, [[kc @ v] for kc in k_ext])
    labels = _lossy_labels(a_ideal)
    zero = np.zeros((big, big))
    cond, resp, guess = {}, {}, {}
    for i, c in enumerate(outcomes):
        pc = projs[i]
        m0 = {b: zero for b in labels[0]}
        m0[c] = pc
        m0[NO_CLICK] = herm(eye - pc)
        cond[(0, c)] = m0
        resp[(0, c)] = {b: float(b == c) for b in first.labels}
        guess[(0, c)] = c
        li = l_inv[i]
        lil = herm(li.conj().T @ li)
        for y in range(1, n):
            m = {}
            for b, e in a_ideal[y].items():
                m[b] = herm(li.conj().T @ np.kron(e, np.eye(k)) @ li)
            m[NO_CLICK] = herm(eye - lil)
            cond[(y, c)] = m
    meta = {
        "construction": "case_d_weak",
        "k": k,
        "nu": (k * eta - 1) / (k - 1),
        "gamma": gamma,
        "margins": reversal_margins(k, eta, gamma),
        "projectors": projs,
        "kraus_dilated": k_ext,
        "reversal_kraus": l_inv,
        "embedding": v,
    }
    return Strategy(inst, cond, resp, guess, n, labels, None, meta)


def strat_case_d_generic(a_ideal: Assembly, eta: float) -> Strategy:
    """Weak measurement of ``B_1`` on its Naimark dilation with reversal for ``y != 1``.

    Valid for ``eta <= k/(2k-1)``, ``k`` the number of outcomes of the first
    setting. For ``eta <= 1/k`` the outcome-guessing strategy is used.
    """
    _check_ideal(a_ideal)
    k = a_ideal[0].k
    eta = float(eta)
    if eta < 0:
        raise ValueError("eta must be non-negative")
    target = (a_ideal, eta, "d", 1.0)
    if k < 2 or eta <= 1.0 / k:
        if len({p.k for p in a_ideal}) == 1:
            return mix_with_no_click(strat_partial_outcome_generic(a_ideal, eta, case="d"), 1.0, target)
        if k < 2:
            raise StrategyError("case (d) needs at least two outcomes for the first setting")
        # unequal outcome counts: the nu = 0 weak strategy at eta = 1/k, mixed down
        return mix_with_no_click(_case_d_weak(a_ideal, 1.0 / k), k * eta, target)
    bound = case_d_generic_bound(k)
    if eta > bound + BOUND_SLACK:
        gamma = eta / k
        raise ReversalInvalidityError(
            f"eta={eta:.6g} > k/(2k-1)={bound:.6g}: gamma=eta/k={gamma:.6g} exceeds "
            f"(1-eta)/(k-1)={(1 - eta) / (k - 1):.6g}")
    return mix_with_no_click(_case_d_weak(a_ideal, eta), 1.0, target)


GENERIC_CONSTRUCTORS = {
    "a": strat_full_jm,
    "b": strat_partial_input,
    "c": strat_partial_outcome_generic,
    "d": strat_case_d_generic,
}
