"""Primal-dual interior-point method for small block-diagonal LMIs.

Solves the pair

    (D)  maximize  b.y    s.t.  S = C - sum_i y_i A_i  >= 0
    (P)  minimize  C.X    s.t.  A_i . X = b_i,  X >= 0

with real symmetric blocks, using the HKM search direction and Mehrotra's
predictor-corrector. Blocks of equal size are stacked so the Schur complement
is assembled with a few batched ``einsum`` calls.

The dual iterate is started strictly feasible and, since every step is a
Newton step on a linear residual, stays feasible. ``b.y`` is therefore always
an achievable (certified) lower bound on the optimum; ``C.X`` is an upper
bound once the primal residual has vanished.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class LmiResult:
    y: np.ndarray
    lower: float           # b.y of the (feasible) dual iterate
    upper: float           # C.X of the primal iterate
    primal_residual: float
    dual_residual: float
    iterations: int
    converged: bool
    message: str = ""
    history: list = field(default_factory=list)


class _Group:
    """Blocks sharing one size ``s``: C has shape (nb, s, s), A has (m, nb, s, s)."""

    def __init__(self, c, a):
        self.c = c
        self.a = a

    @property
    def size(self):
        return self.c.shape[1] * self.c.shape[0]


def _sym(x):
    return (x + np.swapaxes(x, -1, -2)) / 2


def _max_step(x, dx):
    """Largest alpha with x + alpha*dx PSD (inf if dx keeps x PSD for all alpha)."""
    try:
        lo = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        # an eigenvalue fell below rounding near convergence; clip it
        w, v = np.linalg.eigh(x)
        floor = np.finfo(float).eps * max(float(np.abs(w).max()), 1e-300)
        lo = v * np.sqrt(np.maximum(w, floor))[..., None, :]
    linv = np.linalg.inv(lo)
    w = np.linalg.eigvalsh(_sym(linv @ dx @ np.swapaxes(linv, -1, -2)))
    wmin = w[..., 0].min()
    return np.inf if wmin >= 0 else -1.0 / wmin


def solve_lmi(c_blocks, a_blocks, b, *, tol: float = 1e-10, max_iter: int = 100,
              y0=None) -> LmiResult:
    """Maximize ``b.y`` subject to ``C - sum_i y_i A_i`` PSD.

    Parameters
    ----------
    c_blocks : list of (s_k, s_k) real symmetric arrays
    a_blocks : list over blocks of arrays with shape (m, s_k, s_k)
    b : (m,) objective
    y0 : optional strictly feasible starting point
    """
    b = np.asarray(b, dtype=float)
    m = b.size
    sizes = sorted({cb.shape[0] for cb in c_blocks})
    groups = []
    for s in sizes:
        idx = [k for k, cb in enumerate(c_blocks) if cb.shape[0] == s]
        c = np.stack([c_blocks[k] for k in idx])
        a = np.stack([a_blocks[k] for k in idx], axis=1).reshape(m, len(idx), s, s)
        groups.append(_Group(c, a))
    n_total = sum(g.size for g in groups)

    def a_op(xs):
        return sum(np.einsum("mbij,bij->m", g.a, x) for g, x in zip(groups, xs))

    def a_adj(y):
        return [np.einsum("m,mbij->bij", y, g.a) for g in groups]

    def inner(us, vs):
        return float(sum(np.einsum("bij,bij->", u, v) for u, v in zip(us, vs)))

    if y0 is None:
        # the caller guarantees some direction (the slack) with A = identity;
        # otherwise fall back to y = 0 and require C > 0
        y = np.zeros(m)
    else:
        y = np.asarray(y0, dtype=float).copy()
    s_mats = [g.c - aty for g, aty in zip(groups, a_adj(y))]
    for s in s_mats:
        np.linalg.cholesky(s)  # raises if the start is not strictly feasible
    scale = max(1.0, max(np.abs(g.c).max() for g in groups))
    x_mats = [np.broadcast_to(np.eye(g.c.shape[1]), g.c.shape).copy() * scale for g in groups]
    cnorm = 1.0 + np.sqrt(inner([g.c for g in groups], [g.c for g in groups]))
    bnorm = 1.0 + np.linalg.norm(b)

    history = []
    best = None             # (merit, x, y, s) of the most accurate iterate so far
    best_it = 0
    converged = False
    message = "max iterations reached"
    it = 0
    for it in range(1, max_iter + 1):
        rp = b - a_op(x_mats)
        aty = a_adj(y)
        rd = [g.c - s - t for g, s, t in zip(groups, s_mats, aty)]
        gap = inner(x_mats, s_mats)
        mu = gap / n_total
        pobj = inner([g.c for g in groups], x_mats)
        dobj = float(b @ y)
        pres = np.linalg.norm(rp) / bnorm
        dres = np.sqrt(inner(rd, rd)) / cnorm
        rel_gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        history.append((pobj, dobj, pres, dres, mu))
        merit = max(pres, dres, rel_gap)
        if best is None or merit < best[0]:
            best, best_it = (merit, x_mats, y, s_mats), it
        if pres < tol and dres < tol and (rel_gap < tol or gap < tol):
            converged = True
            message = "converged"
            break
        if it - best_it >= 10 and best[0] < 1e-8:
            message = "accuracy stalled"
            break

        try:
            s_inv = [np.linalg.inv(s) for s in s_mats]
        except np.linalg.LinAlgError:
            message = "slack matrix became singular"
            break
        # T_j = X A_j S^{-1}, Schur complement M_ij = <A_i, T_j>
        ts = [x[None] @ g.a @ si[None] for g, x, si in zip(groups, x_mats, s_inv)]
        schur = sum(np.einsum("ibpq,jbqp->ij", g.a, t) for g, t in zip(groups, ts))
        schur = (schur + schur.T) / 2
        try:
            chol = np.linalg.cholesky(schur)

            def msolve(r):
                return np.linalg.solve(chol.T, np.linalg.solve(chol, r))
        except np.linalg.LinAlgError:
            def msolve(r):
                return np.linalg.lstsq(schur, r, rcond=None)[0]

        def direction(sigma, corr):
            # dX = sigma*mu*S^-1 - X - (corr) S^-1 - X dS S^-1, with dS = Rd - A^T dy
            base = []
            for x, si, r, cc in zip(x_mats, s_inv, rd, corr):
                gmat = sigma * mu * si - x - x @ r @ si
                if cc is not None:
                    gmat = gmat - cc @ si
                base.append(gmat)
            dy = msolve(rp - a_op(base))
            ds = [r - t for r, t in zip(rd, a_adj(dy))]
            dx = []
            for x, si, d_s, cc in zip(x_mats, s_inv, ds, corr):
                v = sigma * mu * si - x - x @ d_s @ si
                if cc is not None:
                    v = v - cc @ si
                dx.append(_sym(v))
            return dx, dy, ds

        def steps(dx, ds):
            ap = min(_max_step(x, d) for x, d in zip(x_mats, dx))
            ad = min(_max_step(s, d) for s, d in zip(s_mats, ds))
            return ap, ad

        none = [None] * len(groups)
        dxa, dya, dsa = direction(0.0, none)
        ap, ad = steps(dxa, dsa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = inner([x + ap * d for x, d in zip(x_mats, dxa)],
                       [s + ad * d for s, d in zip(s_mats, dsa)]) / n_total
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        corr = [a @ c for a, c in zip(dxa, dsa)]
        dx, dy, ds = direction(sigma, corr)
        ap, ad = steps(dx, ds)
        tau = 0.98
        ap, ad = min(1.0, tau * ap), min(1.0, tau * ad)
        if ap < 1e-12 and ad < 1e-12:
            message = "step length collapsed"
            break
        x_mats = [_sym(x + ap * d) for x, d in zip(x_mats, dx)]
        y = y + ad * dy
        s_mats = [_sym(s + ad * d) for s, d in zip(s_mats, ds)]

    if not converged and best is not None:
        # late iterations can lose accuracy on ill-conditioned Schur systems
        _, x_mats, y, s_mats = best
    rp = b - a_op(x_mats)
    rd = [g.c - s - t for g, s, t in zip(groups, s_mats, a_adj(y))]
    log.debug("ipm finished after %d iterations: %s", it, message)
    return LmiResult(
        y=y,
        lower=float(b @ y),
        upper=inner([g.c for g in groups], x_mats),
        primal_residual=float(np.linalg.norm(rp)),
        dual_residual=float(np.sqrt(inner(rd, rd))),
        iterations=it,
        converged=converged,
        message=message,
        history=history,
    )
