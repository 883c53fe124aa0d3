"""Feasibility program for generalized partial joint measurability.

Variables are PSD blocks ``E[beta, y, x]`` indexed by a deterministic guess
tuple ``beta`` (one entry per setting, ``None`` when nothing is guessed for
that setting), a setting ``y`` and ``x``, which is either a non-guessable
label or ``STAR``. Blocks for guessable labels other than ``beta[y]`` are zero
and never created, so the partial-JM condition holds by construction.

Constraints:

* no-signalling: for each ``beta`` the sum over ``x`` of ``E[beta, y, x]`` does
  not depend on ``y``;
* consistency: for every ``(b, y)`` the blocks that output ``b`` sum to ``B_{b|y}``.

Before solving, each block is restricted to the largest subspace that any
feasible solution can use (``support reduction``): a block that must sum up to
a rank-deficient effect lives in that effect's support, and a ``beta`` marginal
lives in the intersection over settings of the span of its blocks. This keeps
the slack problem strictly feasible in the interior of the feasible region so
that its optimal value has a meaningful sign.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable

import numpy as np
import scipy.linalg as sla

from ..matqm import herm, real_embedding, support_basis
from ..povm import Assembly, GSpec
from .ipm import solve_lmi

log = logging.getLogger(__name__)

STAR = "⋆"
RANK_TOL = 1e-10
SUBSPACE_TOL = 1e-9


class ProgramError(ValueError):
    pass


class Status(str, Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE = "INFEASIBLE"
    MARGINAL = "MARGINAL"


# --- Hermitian coordinates ---------------------------------------------------

def herm_basis(r: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of ``r x r`` Hermitian matrices, shape (r*r, r, r)."""
    out = []
    for i in range(r):
        e = np.zeros((r, r), dtype=complex)
        e[i, i] = 1
        out.append(e)
    s = 1 / np.sqrt(2)
    for i in range(r):
        for j in range(i + 1, r):
            e = np.zeros((r, r), dtype=complex)
            e[i, j] = e[j, i] = s
            out.append(e)
            f = np.zeros((r, r), dtype=complex)
            f[i, j], f[j, i] = -1j * s, 1j * s
            out.append(f)
    return np.array(out).reshape(r * r, r, r)


def herm_coords(m: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian matrix in :func:`herm_basis`."""
    basis = herm_basis(m.shape[0])
    return np.einsum("kij,ji->k", basis, m).real


def _orth(cols: np.ndarray, d: int) -> np.ndarray:
    if cols.size == 0:
        return np.zeros((d, 0), dtype=complex)
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    return u[:, s > SUBSPACE_TOL]


def _intersect(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ``span(u) & span(w)``."""
    d = u.shape[0]
    if u.shape[1] == 0 or w.shape[1] == 0:
        return np.zeros((d, 0), dtype=complex)
    resid = u - w @ (w.conj().T @ u)
    # absolute threshold: the columns of u are orthonormal, so resid is O(1) or round-off
    _, s, vh = np.linalg.svd(resid, full_matrices=True)
    rank = int(np.sum(s > SUBSPACE_TOL))
    coeff = vh[rank:].conj().T
    return _orth(u @ coeff, d)


# --- program ---------------------------------------------------------------

BlockKey = tuple  # (beta, y, x)


@dataclass
class GjmProgram:
    """Feasibility program for one assembly and guessable-set specification.

    ``keys`` lists every block; ``bases[key]`` is an orthonormal basis of the
    subspace the block may occupy (possibly empty, meaning the block is forced
    to zero). The affine constraints act on the concatenated real coordinates
    of the reduced blocks and are solved once: ``x = x0 + null @ z``.
    """

    assembly: Assembly
    gspec: GSpec
    beta_tuples: list
    keys: list
    bases: dict
    equations: list          # (kind, index, [keys], target matrix)
    offsets: dict            # key -> slice into the reduced coordinate vector
    x0: np.ndarray
    null: np.ndarray
    affine_residual: float
    reduced: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.assembly.dim

    @property
    def n_blocks(self) -> int:
        return len(self.keys)

    @property
    def consistent(self) -> bool:
        return self.affine_residual <= 1e-9

    def block_label(self, key: BlockKey) -> Hashable:
        beta, y, x = key
        return beta[y] if x == STAR else x

    def blocks_from(self, x: np.ndarray) -> dict:
        """Full ``d x d`` blocks from a reduced coordinate vector."""
        out = {}
        for key in self.keys:
            v = self.bases[key]
            r = v.shape[1]
            if r == 0:
                out[key] = np.zeros((self.dim, self.dim), dtype=complex)
                continue
            y = np.einsum("k,kij->ij", x[self.offsets[key]], herm_basis(r))
            out[key] = herm(v @ y @ v.conj().T)
        return out


def _beta_tuples(a: Assembly, g: GSpec) -> list:
    axes = []
    for y, p in enumerate(a):
        guess = g.guessable(y, p)
        axes.append(guess if guess else (None,))
    return list(itertools.product(*axes))


def build_program(a: Assembly, g: GSpec, *, reduce: bool = True) -> GjmProgram:
    """Assemble blocks and constraints, then eliminate the affine equalities.

    The number of ``beta`` tuples is the product over settings of
    ``max(|G_y|, 1)``. For each ``(beta, y)`` the blocks are the
    non-guessable labels plus ``STAR`` when ``G_y`` is non-empty.
    """
    g.validate(a)
    d = a.dim
    betas = _beta_tuples(a, g)
    keys = []
    for beta in betas:
        for y, p in enumerate(a):
            xs = list(g.complement(y, p))
            if g[y]:
                xs.append(STAR)
            keys.extend((beta, y, x) for x in xs)

    def label_of(key):
        beta, y, x = key
        return beta[y] if x == STAR else x

    # consistency groups: (b, y) -> keys producing outcome b
    equations = []
    for y, p in enumerate(a):
        for b, eff in p.items():
            members = [k for k in keys if k[1] == y and label_of(k) == b]
            equations.append(("consistency", (b, y), members, eff))
    for beta in betas:
        ref = [k for k in keys if k[0] == beta and k[1] == 0]
        for y in range(1, a.n):
            cur = [k for k in keys if k[0] == beta and k[1] == y]
            equations.append(("no-signaling", (beta, y), (cur, ref), np.zeros((d, d))))

    full = np.eye(d, dtype=complex)
    bases = {}
    for k in keys:
        beta, y, _ = k
        bases[k] = support_basis(a[y][label_of(k)], RANK_TOL) if reduce else full
    if reduce:
        _reduce_supports(a, betas, keys, bases)

    offsets, pos = {}, 0
    for k in keys:
        r = bases[k].shape[1]
        offsets[k] = slice(pos, pos + r * r)
        pos += r * r
    nvar = pos

    # each Hermitian d x d equation contributes d*d real rows
    rows, rhs = [], []
    maps = {}
    for k in keys:
        v = bases[k]
        r = v.shape[1]
        if r:
            hb = herm_basis(r)
            maps[k] = np.array([herm_coords(v @ h @ v.conj().T) for h in hb]).T
        else:
            maps[k] = np.zeros((d * d, 0))
    for kind, _, members, target in equations:
        block = np.zeros((d * d, nvar))
        if kind == "consistency":
            for k in members:
                block[:, offsets[k]] += maps[k]
        else:
            cur, ref = members
            for k in cur:
                block[:, offsets[k]] += maps[k]
            for k in ref:
                block[:, offsets[k]] -= maps[k]
        rows.append(block)
        rhs.append(herm_coords(herm(target)))
    amat = np.vstack(rows) if rows else np.zeros((0, nvar))
    cvec = np.concatenate(rhs) if rhs else np.zeros(0)

    if nvar:
        x0, *_ = np.linalg.lstsq(amat, cvec, rcond=None)
        resid = float(np.max(np.abs(amat @ x0 - cvec))) if cvec.size else 0.0
        null = sla.null_space(amat, rcond=1e-11) if amat.size else np.eye(nvar)
    else:
        x0 = np.zeros(0)
        resid = float(np.max(np.abs(cvec))) if cvec.size else 0.0
        null = np.zeros((0, 0))
    prog = GjmProgram(
        assembly=a, gspec=g, beta_tuples=betas, keys=keys, bases=bases,
        equations=equations, offsets=offsets, x0=x0, null=null,
        affine_residual=resid, reduced=reduce,
    )
    log.debug("program: %d tuples, %d blocks, %d reduced vars, %d free, affine residual %.2e",
              len(betas), len(keys), nvar, null.shape[1], resid)
    return prog


def _reduce_supports(a, betas, keys, bases):
    d = a.dim
    by_beta = {beta: [k for k in keys if k[0] == beta] for beta in betas}
    changed = True
    while changed:
        changed = False
        for beta, ks in by_beta.items():
            marginal = None
            for y in range(a.n):
                cols = [bases[k] for k in ks if k[1] == y]
                span = _orth(np.hstack(cols), d) if cols else np.zeros((d, 0), dtype=complex)
                marginal = span if marginal is None else _intersect(marginal, span)
            for k in ks:
                new = _intersect(bases[k], marginal)
                if new.shape[1] < bases[k].shape[1]:
                    bases[k] = new
                    changed = True


# --- solving ---------------------------------------------------------------

@dataclass
class FeasibilityReport:
    status: Status
    slack: float
    witness_blocks: dict | None
    iterations: int
    residuals: float
    upper_bound: float = np.nan
    diagnostics: str = ""

    @property
    def feasible(self) -> bool:
        """Feasible or marginal; marginal counts as feasible for thresholds."""
        return self.status in (Status.FEASIBLE, Status.MARGINAL)


def check_witness(a: Assembly, g: GSpec, blocks: dict) -> dict:
    """Residuals of a full-block assignment against the three defining conditions.

    ``blocks`` maps ``(beta, y, x)`` to ``d x d`` operators, ``x`` a label or
    ``STAR``. Returns the maximal entrywise violation of consistency and
    no-signalling, and the most negative eigenvalue over blocks.
    """
    d = a.dim
    cons = 0.0
    for y, p in enumerate(a):
        for b, eff in p.items():
            tot = np.zeros((d, d), dtype=complex)
            for (beta, yy, x), m in blocks.items():
                if yy == y and (x == b or (x == STAR and beta[y] == b)):
                    tot = tot + m
            cons = max(cons, float(np.max(np.abs(tot - eff))))
    nosig = 0.0
    betas = sorted({k[0] for k in blocks}, key=repr)
    for beta in betas:
        margs = []
        for y in range(a.n):
            margs.append(sum((m for (bb, yy, _), m in blocks.items() if bb == beta and yy == y),
                             np.zeros((d, d), dtype=complex)))
        for m in margs[1:]:
            nosig = max(nosig, float(np.max(np.abs(m - margs[0]))))
    psd = min((float(np.linalg.eigvalsh(herm(m))[0]) for m in blocks.values()), default=0.0)
    # guessable labels must only appear through STAR blocks with matching beta
    pjm = 0.0
    for (beta, y, x), m in blocks.items():
        if x != STAR and x in g[y]:
            pjm = max(pjm, float(np.max(np.abs(m))))
    return {"consistency": cons, "no_signaling": nosig, "min_eig": psd, "partial_jm": pjm}


def solve(p: GjmProgram, tol: float = 1e-7, *, max_iter: int = 100) -> FeasibilityReport:
    """Maximize ``t`` such that every (reduced) block is ``>= t * 1``.

    Classification: ``t > tol`` FEASIBLE, ``t < -tol`` INFEASIBLE, otherwise
    MARGINAL. The lower bound comes from a strictly feasible dual iterate,
    the upper bound from the primal iterate; if the solver stalls the
    classification falls back on whichever bound is conclusive, and reports
    MARGINAL when neither is.
    """
    if not p.consistent:
        if p.reduced:
            # support reduction proved infeasibility; get a finite slack from the full program
            full = build_program(p.assembly, p.gspec, reduce=False)
            rep = solve(full, tol, max_iter=max_iter)
            rep.diagnostics = ("affine constraints inconsistent after support reduction "
                               f"(residual {p.affine_residual:.2e}); " + rep.diagnostics)
            return rep
        return FeasibilityReport(Status.INFEASIBLE, -np.inf, None, 0, p.affine_residual,
                                 diagnostics="affine constraints inconsistent")

    live = [k for k in p.keys if p.bases[k].shape[1] > 0]
    if not live:
        raise ProgramError("program has no free blocks but consistent constraints")
    nz = p.null.shape[1]
    m = nz + 1
    c_blocks, a_blocks = [], []
    for k in live:
        r = p.bases[k].shape[1]
        hb = herm_basis(r)
        sl = p.offsets[k]
        y0 = np.einsum("k,kij->ij", p.x0[sl], hb)
        c_blocks.append(real_embedding(y0))
        amat = np.zeros((m, 2 * r, 2 * r))
        for j in range(nz):
            amat[j] = -real_embedding(np.einsum("k,kij->ij", p.null[sl, j], hb))
        amat[nz] = np.eye(2 * r)
        a_blocks.append(amat)
    bvec = np.zeros(m)
    bvec[nz] = 1.0
    t0 = min(np.linalg.eigvalsh(cb)[0] for cb in c_blocks) - 1.0
    start = np.zeros(m)
    start[nz] = t0
    res = solve_lmi(c_blocks, a_blocks, bvec, y0=start, max_iter=max_iter, tol=1e-10)

    z = res.y[:nz]
    x = p.x0 + p.null @ z if nz else p.x0.copy()
    blocks = p.blocks_from(x)
    # certified lower bound: the smallest eigenvalue actually attained by the reduced blocks
    lower = min(float(np.linalg.eigvalsh(
        herm(p.bases[k].conj().T @ blocks[k] @ p.bases[k]))[0]) for k in live)
    upper = res.upper if res.primal_residual < 1e-7 else np.inf
    resid = check_witness(p.assembly, p.gspec, blocks)
    affine = max(resid["consistency"], resid["no_signaling"])
    residuals = max(affine, max(0.0, -resid["min_eig"]))

    diag = f"ipm: {res.message}; lower={lower:.3e} upper={upper:.3e}"
    if lower > tol and affine <= tol:
        status = Status.FEASIBLE
    elif upper < -tol or (res.converged and lower < -tol):
        status = Status.INFEASIBLE
    elif abs(lower) <= tol or res.converged:
        status = Status.MARGINAL
    else:
        status = Status.MARGINAL
        diag += "; solver stalled without a conclusive bound"
    slack = lower if np.isfinite(lower) else res.lower
    return FeasibilityReport(
        status=status,
        slack=slack,
        witness_blocks=blocks if status != Status.INFEASIBLE else None,
        iterations=res.iterations,
        residuals=residuals if status != Status.INFEASIBLE else affine,
        upper_bound=upper,
        diagnostics=diag,
    )


def is_gjm(a: Assembly, g: GSpec, tol: float = 1e-7) -> bool:
    """Convenience predicate: FEASIBLE or MARGINAL."""
    return solve(build_program(a, g), tol).feasible
