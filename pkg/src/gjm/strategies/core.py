"""Attack strategies: instrument, conditional measurements and guess tables.

A strategy is the two-step simulation of a measurement device: an instrument
``{I_c}`` produces classical side information ``c`` and a post-measurement
state, then a ``(y, c)``-dependent measurement ``M_{y,c}`` produces ``b``.
Its effective operators are ``E_{c,b|y} = I_c^dagger(M_{b|y,c})``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from ..matqm import herm, max_eig, min_eig, pinv_sqrt, support_projector
from ..povm import NO_CLICK, Assembly, GSpec, LossParams, apply_loss_visibility, gspec_case

TP_TOL = 1e-10
RANK_TOL = 1e-10


class StrategyError(ValueError):
    """A strategy cannot be built for the requested parameters."""


class BoundViolatedError(StrategyError):
    """The requested efficiency exceeds the bound the construction is valid for."""


class ReversalInvalidityError(BoundViolatedError):
    """The probabilistic reversal instrument would not be trace non-increasing."""


class ValidityError(BoundViolatedError):
    """Some conditional effect exceeds the identity.

    ``margins`` maps a constraint name to ``bound - eta`` (negative = violated).
    """

    def __init__(self, msg, margins=None):
        super().__init__(msg)
        self.margins = dict(margins or {})


class SupportViolationError(StrategyError):
    """An effective operator is not supported on the support of its marginal."""


@dataclass(frozen=True, eq=False)
class Instrument:
    """Instrument given by Kraus operators; ``kraus_sets[i]`` belongs to ``outcomes[i]``.

    Kraus operators map the input space (dimension ``d_in``) to the output
    space; they may be rectangular when the output is a dilated space.
    """

    outcomes: tuple
    kraus_sets: tuple

    def __init__(self, outcomes, kraus_sets, tol: float = TP_TOL):
        outcomes = tuple(outcomes)
        sets = tuple(tuple(np.asarray(k, dtype=complex) for k in ks) for ks in kraus_sets)
        if len(outcomes) != len(sets) or len(set(outcomes)) != len(outcomes):
            raise StrategyError("need one Kraus set per distinct outcome")
        shapes = {k.shape for ks in sets for k in ks}
        if len(shapes) != 1:
            raise StrategyError(f"Kraus operators have inconsistent shapes {shapes}")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "kraus_sets", sets)
        if self.trace_preservation_residual() > tol:
            raise StrategyError("instrument is not trace preserving "
                                f"(residual {self.trace_preservation_residual():.3e})")

    @property
    def d_in(self) -> int:
        return self.kraus_sets[0][0].shape[1]

    @property
    def d_out(self) -> int:
        return self.kraus_sets[0][0].shape[0]

    def kraus(self, c) -> tuple:
        return self.kraus_sets[self.outcomes.index(c)]

    def effect(self, c) -> np.ndarray:
        """``I_c^dagger(1) = sum K^dagger K``."""
        return herm(sum(k.conj().T @ k for k in self.kraus(c)))

    def adjoint(self, c, m) -> np.ndarray:
        return herm(sum(k.conj().T @ m @ k for k in self.kraus(c)))

    def apply(self, c, rho) -> np.ndarray:
        return herm(sum(k @ rho @ k.conj().T for k in self.kraus(c)))

    def output_support(self, c) -> np.ndarray:
        """Projector onto the range of ``I_c``."""
        return support_projector(herm(sum(k @ k.conj().T for k in self.kraus(c))), RANK_TOL)

    def trace_preservation_residual(self) -> float:
        tot = sum(self.effect(c) for c in self.outcomes)
        return float(np.max(np.abs(tot - np.eye(self.d_in))))


@dataclass(frozen=True, eq=False)
class Strategy:
    """Instrument plus conditional measurements, response and guess tables.

    ``conditional_povms[(y, c)]`` maps each outcome label of setting ``y`` to
    its operator on the instrument's output space. ``response[(y, c)]`` maps
    the guessable labels to ``p(b|y,c)``; ``guess[(y, c)]`` is Eve's
    deterministic guess (absent when nothing is guessable for ``y``).
    ``target`` records the honest lossy assembly and guessable sets the
    strategy is meant to simulate.
    """

    instrument: Instrument
    conditional_povms: dict
    response: dict
    guess: dict
    n: int
    labels: tuple                 # per-setting outcome labels, lossy
    target: tuple | None = None   # (a_ideal, eta, case or GSpec, nu_vis)
    meta: dict = field(default_factory=dict)

    def effective(self, y: int, c, b) -> np.ndarray:
        return self.instrument.adjoint(c, self.conditional_povms[(y, c)][b])

    def effective_povms(self) -> dict:
        """``{(c, b, y): E_{c,b|y}}``."""
        return {(c, b, y): self.effective(y, c, b)
                for y in range(self.n) for c in self.instrument.outcomes for b in self.labels[y]}

    def target_assembly(self) -> tuple[Assembly, GSpec]:
        if self.target is None:
            raise StrategyError("strategy carries no target assembly")
        a_ideal, eta, case, nu = self.target
        lossy = apply_loss_visibility(a_ideal, LossParams(eta, nu))
        g = case.validate(lossy) if isinstance(case, GSpec) else gspec_case(case, lossy)
        return lossy, g

    def statistics(self, rho) -> dict:
        """``{(y, b): p(b|y)}`` for input state ``rho``."""
        out = {}
        for y in range(self.n):
            for b in self.labels[y]:
                p = 0.0
                for c in self.instrument.outcomes:
                    p += np.trace(self.instrument.apply(c, rho) @ self.conditional_povms[(y, c)][b]).real
                out[(y, b)] = float(p)
        return out


@dataclass
class VerificationReport:
    consistency_residual: float
    nosignaling_residual: float
    partial_jm_residual: float
    guess_failure_prob: float
    completeness_residual: float
    trace_preservation_residual: float
    validity: dict                # name -> min eigenvalue margin (negative = violation)
    tol: float
    extracted_response: dict = field(default_factory=dict)

    @property
    def min_validity(self) -> float:
        return min(self.validity.values(), default=0.0)

    @property
    def residuals(self) -> dict:
        return {
            "consistency": self.consistency_residual,
            "no_signaling": self.nosignaling_residual,
            "partial_jm": self.partial_jm_residual,
            "guess_failure": self.guess_failure_prob,
            "completeness": self.completeness_residual,
            "trace_preservation": self.trace_preservation_residual,
        }

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values()) and self.min_validity >= -self.tol

    def summary(self) -> str:
        parts = [f"{k}={v:.2e}" for k, v in self.residuals.items()]
        parts.append(f"min_validity={self.min_validity:.2e}")
        return ("PASS " if self.passed else "FAIL ") + " ".join(parts)


def _maxabs(m) -> float:
    return float(np.max(np.abs(m))) if np.size(m) else 0.0


def _star(eff_c, ops_yc: dict, guessable: tuple) -> np.ndarray:
    """``E_c - sum_{b not guessable} E_{c,b|y}``."""
    return eff_c - sum((m for b, m in ops_yc.items() if b not in guessable),
                       np.zeros_like(eff_c))


def extract_response(star, ops: dict, guessable: tuple, tol: float = 1e-12) -> dict:
    """Response ``p(b)`` read off traces; uniform when ``E_star`` vanishes."""
    tr = np.trace(star).real
    if tr <= tol:
        return {b: 1.0 / len(guessable) for b in guessable}
    return {b: float(np.trace(ops[b]).real / tr) for b in guessable}


def verify_strategy(s: Strategy, a_lossy: Assembly | None = None, g: GSpec | None = None,
                    tol: float = 1e-9) -> VerificationReport:
    """Check a strategy against a lossy assembly and guessable sets.

    Every condition is evaluated as an operator identity (no sampling of
    states): consistency, no-signalling, partial joint measurability with the
    response extracted from the effective operators, the worst-case
    probability that a guessable outcome differs from Eve's guess, and PSD
    margins of every conditional effect. Completeness of ``M_{y,c}`` is
    checked on the range of ``I_c`` only.
    """
    if a_lossy is None or g is None:
        a_lossy, g = s.target_assembly()
    inst = s.instrument
    if a_lossy.dim != inst.d_in or a_lossy.n != s.n:
        raise StrategyError("strategy and assembly have inconsistent dimensions or settings")
    d = inst.d_in
    eff = {c: inst.effect(c) for c in inst.outcomes}
    ops = {}
    for y in range(s.n):
        for c in inst.outcomes:
            ops[(y, c)] = {b: inst.adjoint(c, m) for b, m in s.conditional_povms[(y, c)].items()}

    cons = 0.0
    for y, p in enumerate(a_lossy):
        for b, target in p.items():
            tot = sum((ops[(y, c)].get(b, np.zeros((d, d))) for c in inst.outcomes),
                      np.zeros((d, d), dtype=complex))
            cons = max(cons, _maxabs(tot - target))
        extra = set().union(*(ops[(y, c)].keys() for c in inst.outcomes)) - set(p.labels)
        for b in extra:
            for c in inst.outcomes:
                cons = max(cons, _maxabs(ops[(y, c)][b]))

    nosig = 0.0
    for c in inst.outcomes:
        for y in range(s.n):
            marg = sum(ops[(y, c)].values(), np.zeros((d, d), dtype=complex))
            nosig = max(nosig, _maxabs(marg - eff[c]))

    pjm, fail = 0.0, 0.0
    responses = {}
    for y, p in enumerate(a_lossy):
        guessable = g.guessable(y, p)
        if not guessable:
            continue
        bad_total = np.zeros((d, d), dtype=complex)
        for c in inst.outcomes:
            oc = ops[(y, c)]
            star = _star(eff[c], oc, guessable)
            resp = extract_response(star, oc, guessable)
            responses[(y, c)] = resp
            for b in guessable:
                pjm = max(pjm, _maxabs(oc.get(b, 0 * star) - resp[b] * star))
            gy = s.guess.get((y, c))
            for b in guessable:
                if b != gy and b in oc:
                    bad_total = bad_total + oc[b]
        fail = max(fail, max(0.0, max_eig(bad_total)))

    validity, comp = {}, 0.0
    for (y, c), m_yc in s.conditional_povms.items():
        for b, m in m_yc.items():
            validity[f"M[{b}|{y},{c}]"] = min_eig(m)
        pi = inst.output_support(c)
        tot = sum(m_yc.values(), np.zeros_like(pi))
        comp = max(comp, _maxabs(pi @ (tot - np.eye(pi.shape[0])) @ pi))
    for (y, c), oc in ops.items():
        for b, e in oc.items():
            validity[f"E[{c},{b}|{y}]"] = min_eig(e)

    return VerificationReport(
        consistency_residual=cons,
        nosignaling_residual=nosig,
        partial_jm_residual=pjm,
        guess_failure_prob=fail,
        completeness_residual=comp,
        trace_preservation_residual=inst.trace_preservation_residual(),
        validity=validity,
        tol=tol,
        extracted_response=responses,
    )


# --- sub-threshold mixing ---------------------------------------------------

OFF = "off"


def mix_with_no_click(s: Strategy, weight: float, target=None) -> Strategy:
    """Run ``s`` with probability ``weight``; otherwise always output no-click.

    The extra instrument outcome ``OFF`` forwards the (embedded) state and
    every ``M_{y,OFF}`` outputs the no-click label with certainty. This turns
    a strategy for efficiency ``eta0`` into one for ``weight * eta0``.
    """
    if not 0.0 <= weight <= 1.0:
        raise StrategyError("mixing weight must lie in [0, 1]")
    if weight == 1.0:
        return s if target is None else _retarget(s, target)
    inst = s.instrument
    if OFF in inst.outcomes:
        raise StrategyError("strategy is already mixed")
    w = np.sqrt(weight)
    embed = s.meta.get("embedding")
    if embed is None:
        embed = np.eye(inst.d_out, inst.d_in)
    kraus = [[w * k for k in ks] for ks in inst.kraus_sets]
    kraus.append([np.sqrt(1.0 - weight) * embed])
    new_inst = Instrument(inst.outcomes + (OFF,), kraus)
    cond = dict(s.conditional_povms)
    resp, guess = dict(s.response), dict(s.guess)
    dout = inst.d_out
    for y in range(s.n):
        cond[(y, OFF)] = {b: (np.eye(dout) if b == NO_CLICK else np.zeros((dout, dout)))
                          for b in s.labels[y]}
        gy = [b for (yy, _), r in s.response.items() if yy == y for b in r]
        if gy:
            pick = NO_CLICK if NO_CLICK in gy else gy[0]
            resp[(y, OFF)] = {b: float(b == pick) for b in dict.fromkeys(gy)}
            guess[(y, OFF)] = pick
    meta = dict(s.meta, mixing_weight=weight)
    return Strategy(new_inst, cond, resp, guess, s.n, s.labels,
                    target if target is not None else s.target, meta)


def _retarget(s: Strategy, target) -> Strategy:
    return Strategy(s.instrument, s.conditional_povms, s.response, s.guess, s.n, s.labels,
                    target, s.meta)


# --- partial parent POVMs ---------------------------------------------------

@dataclass
class PartialParent:
    """Effective operators ``blocks[(c, b, y)]`` with response ``response[(y, c)][b]``."""

    blocks: dict
    response: dict
    outcomes: tuple
    labels: tuple      # per-setting labels
    gspec: GSpec

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return next(iter(self.blocks.values())).shape[0]

    def marginal(self, c, y: int = 0) -> np.ndarray:
        return herm(sum(self.blocks[(c, b, y)] for b in self.labels[y]))

    def star(self, c, y: int) -> np.ndarray:
        guessable = self.gspec[y]
        return herm(self.marginal(c, y) - sum((self.blocks[(c, b, y)] for b in self.labels[y]
                                               if b not in guessable), 0 * self.marginal(c, y)))

    def reconstruct(self) -> dict:
        """``{(y, b): sum_c E_{c,b|y}}``."""
        return {(y, b): herm(sum(self.blocks[(c, b, y)] for c in self.outcomes))
                for y in range(self.n) for b in self.labels[y]}


def validate_pp(pp: PartialParent, a_lossy: Assembly) -> dict:
    """Residuals of no-signalling, consistency, partial JM and positivity."""
    recon = pp.reconstruct()
    cons = max(_maxabs(recon[(y, b)] - a_lossy[y][b]) for y in range(pp.n) for b in pp.labels[y])
    nosig = max((_maxabs(pp.marginal(c, y) - pp.marginal(c, 0))
                 for c in pp.outcomes for y in range(pp.n)), default=0.0)
    pjm = 0.0
    for y in range(pp.n):
        for c in pp.outcomes:
            if not pp.gspec[y]:
                continue
            st = pp.star(c, y)
            for b in pp.labels[y]:
                if b in pp.gspec[y]:
                    pjm = max(pjm, _maxabs(pp.blocks[(c, b, y)] - pp.response[(y, c)][b] * st))
    psd = min(min_eig(m) for m in pp.blocks.values())
    return {"consistency": cons, "no_signaling": nosig, "partial_jm": pjm, "min_eig": psd}


def strategy_to_pp(s: Strategy, g: GSpec | None = None) -> PartialParent:
    """Effective operators of a strategy; missing responses are read off traces."""
    if g is None:
        g = s.target_assembly()[1]
    blocks = s.effective_povms()
    response = {}
    for y in range(s.n):
        guessable = tuple(b for b in s.labels[y] if b in g[y])
        if not guessable:
            continue
        for c in s.instrument.outcomes:
            if (y, c) in s.response:
                response[(y, c)] = dict(s.response[(y, c)])
            else:
                oc = {b: blocks[(c, b, y)] for b in s.labels[y]}
                response[(y, c)] = extract_response(
                    _star(s.instrument.effect(c), oc, guessable), oc, guessable)
    return PartialParent(blocks, response, s.instrument.outcomes, s.labels, g)


def pp_to_strategy(pp: PartialParent, tol: float = 1e-9, target=None) -> Strategy:
    """Instrument ``sqrt(E_c) . sqrt(E_c)`` and ``M = E_c^{-1/2} E_{c,b|y} E_c^{-1/2}``.

    The conditional measurements are complete on the support of ``E_c`` only.
    """
    kraus, cond = [], {}
    guess = {}
    for c in pp.outcomes:
        e_c = pp.marginal(c)
        w, v = np.linalg.eigh(e_c)
        root = herm((v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T)
        kraus.append([root])
        r = pinv_sqrt(e_c, RANK_TOL)
        pi = support_projector(e_c, RANK_TOL)
        out = np.eye(pi.shape[0]) - pi
        for y in range(pp.n):
            m_yc = {}
            for b in pp.labels[y]:
                blk = pp.blocks[(c, b, y)]
                leak = max(_maxabs(out @ blk), _maxabs(blk @ out))
                if leak > tol:
                    raise SupportViolationError(
                        f"E[{c},{b}|{y}] leaves the support of E_{c} by {leak:.3e}")
                m_yc[b] = herm(r @ blk @ r)
            cond[(y, c)] = m_yc
            if (y, c) in pp.response:
                resp = pp.response[(y, c)]
                guess[(y, c)] = max(resp, key=lambda b: resp[b])
    inst = Instrument(pp.outcomes, kraus)
    return Strategy(inst, cond, {k: dict(v) for k, v in pp.response.items()}, guess,
                    pp.n, pp.labels, target, {"origin": "partial_parent"})


def _beta_axes(pp: PartialParent) -> list:
    return [tuple(b for b in pp.labels[y] if b in pp.gspec[y]) or (None,) for y in range(pp.n)]


def randomize_to_deterministic(pp: PartialParent, tol: float = 1e-10) -> PartialParent:
    """Relabel side information by tuples ``beta`` with deterministic response.

    ``E_{beta,b|y} = sum_c p(beta|c) E_{c,b|y}`` for non-guessable ``b`` and
    ``delta_{b,beta_y} sum_c p(beta|c) E_{c,star|y}`` for guessable ``b``,
    where ``p(beta|c)`` is the product of responses over settings with a
    non-empty guessable set.
    """
    import itertools

    for (y, c), resp in pp.response.items():
        if any(p < -tol for p in resp.values()) or abs(sum(resp.values()) - 1.0) > tol:
            raise StrategyError(f"response row ({y}, {c}) is not a probability distribution")
    axes = _beta_axes(pp)
    betas = list(itertools.product(*axes))

    def weight(beta, c):
        w = 1.0
        for y, by in enumerate(beta):
            if by is not None:
                w *= pp.response[(y, c)].get(by, 0.0)
        return w

    d = pp.dim
    blocks, response = {}, {}
    for beta in betas:
        ws = {c: weight(beta, c) for c in pp.outcomes}
        for y in range(pp.n):
            guessable = pp.gspec[y]
            star = sum((ws[c] * pp.star(c, y) for c in pp.outcomes), np.zeros((d, d), dtype=complex))
            for b in pp.labels[y]:
                if b in guessable:
                    blocks[(beta, b, y)] = herm(star) if b == beta[y] else np.zeros((d, d), dtype=complex)
                else:
                    blocks[(beta, b, y)] = herm(sum((ws[c] * pp.blocks[(c, b, y)] for c in pp.outcomes),
                                                    np.zeros((d, d), dtype=complex)))
            if beta[y] is not None:
                response[(y, beta)] = {b: float(b == beta[y]) for b in pp.labels[y] if b in guessable}
    return PartialParent(blocks, response, tuple(betas), pp.labels, pp.gspec)


def pp_to_witness(pp: PartialParent) -> dict:
    """Deterministic partial parent as ``(beta, y, x)`` blocks for the SDP residual checker."""
    from ..sdp.program import STAR

    out = {}
    for beta in pp.outcomes:
        for y in range(pp.n):
            for b in pp.labels[y]:
                if b in pp.gspec[y]:
                    continue
                out[(beta, y, b)] = pp.blocks[(beta, b, y)]
            if pp.gspec[y]:
                out[(beta, y, STAR)] = pp.star(beta, y)
    return out
