"""Sparse SDPA (``.dat-s``) export of the slack program, and a matching reader.

The exported problem is in SDPA primal form

    minimize  c.x   subject to   sum_i x_i F_i - F_0  PSD

with ``x = (z_1, ..., z_p, t)``: ``z`` parametrizes the affine solution set of
the consistency and no-signalling equalities and ``t`` is the slack. Each
reduced complex block is written through its real symmetric embedding, so a
block of complex size ``r`` has SDPA size ``2r``. With ``slack_form=False``
the slack variable is dropped and the objective is zero (pure feasibility).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from ..matqm import real_embedding
from .program import GjmProgram, build_program, herm_basis


def _exportable(p: GjmProgram) -> GjmProgram:
    # support reduction can prove infeasibility outright; export the full program instead
    if p.reduced and not p.consistent:
        return build_program(p.assembly, p.gspec, reduce=False)
    return p


@dataclass
class SdpaProblem:
    c: np.ndarray                # (m,)
    block_sizes: list            # signed, negative = diagonal block
    matrices: list               # m+1 entries, each a list of dense blocks (F_0 first)

    @property
    def m(self) -> int:
        return self.c.size


def program_matrices(p: GjmProgram, slack_form: bool = True) -> SdpaProblem:
    """The ``(c, F_0, F_1, ...)`` data of the slack LMI, in program key order."""
    p = _exportable(p)
    live = [k for k in p.keys if p.bases[k].shape[1] > 0]
    nz = p.null.shape[1]
    m = nz + (1 if slack_form else 0)
    sizes, f = [], [[] for _ in range(m + 1)]
    for k in live:
        r = p.bases[k].shape[1]
        hb = herm_basis(r)
        sl = p.offsets[k]
        sizes.append(2 * r)
        f[0].append(-real_embedding(np.einsum("k,kij->ij", p.x0[sl], hb)))
        for j in range(nz):
            f[j + 1].append(real_embedding(np.einsum("k,kij->ij", p.null[sl, j], hb)))
        if slack_form:
            f[m].append(-np.eye(2 * r))
    c = np.zeros(m)
    if slack_form:
        c[-1] = -1.0
    return SdpaProblem(c, sizes, f)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def export_sdpa(p: GjmProgram, slack_form: bool = True, *, zero_tol: float = 1e-15) -> str:
    """Serialize the program as sparse SDPA text.

    Layout: comment lines, ``m``, ``nblocks``, the block sizes, the objective,
    then one ``matno blkno i j value`` line per nonzero upper-triangular entry
    (1-based). Ordering is deterministic: matrices, then blocks, then ``i``,
    then ``j``.
    """
    p = _exportable(p)
    prob = program_matrices(p, slack_form)
    nz = p.null.shape[1]
    live = [k for k in p.keys if p.bases[k].shape[1] > 0]
    lines = [
        f'"gjm feasibility program: n={p.assembly.n} dim={p.dim} '
        f'tuples={len(p.beta_tuples)} slack_form={slack_form}',
        '"variables: ' + ", ".join(([f"z_1..z_{nz}"] if nz else []) + (["t"] if slack_form else [])),
    ]
    for bi, k in enumerate(live, start=1):
        beta, y, x = k
        lines.append(f'"block {bi}: beta={list(beta)} y={y} x={x} rank={p.bases[k].shape[1]}')
    lines.append(str(prob.m))
    lines.append(str(len(prob.block_sizes)))
    lines.append(" ".join(str(s) for s in prob.block_sizes))
    lines.append(" ".join(_fmt(v) for v in prob.c) if prob.m else "0")
    for matno, blocks in enumerate(prob.matrices):
        for blkno, blk in enumerate(blocks, start=1):
            n = blk.shape[0]
            for i in range(n):
                for j in range(i, n):
                    v = blk[i, j]
                    if abs(v) > zero_tol:
                        lines.append(f"{matno} {blkno} {i + 1} {j + 1} {_fmt(v)}")
    return "\n".join(lines) + "\n"


_SEP = re.compile(r"[,{}()\s]+")


def read_sdpa(text: str) -> SdpaProblem:
    """Parse sparse SDPA text (comments start with ``"`` or ``*``)."""
    body = [ln for ln in text.splitlines() if ln.strip() and ln.lstrip()[0] not in '"*']
    tokens = [t for t in _SEP.split(" ".join(body)) if t]
    pos = 0

    def take(n):
        nonlocal pos
        out = tokens[pos:pos + n]
        if len(out) < n:
            raise ValueError("truncated SDPA data")
        pos += n
        return out

    m = int(take(1)[0])
    nblocks = int(take(1)[0])
    sizes = [int(float(s)) for s in take(nblocks)]
    c = np.array([float(v) for v in take(m)]) if m else np.zeros(0)
    if m == 0:
        take(1)  # placeholder objective line
    mats = [[np.zeros((abs(s), abs(s))) for s in sizes] for _ in range(m + 1)]
    rest = tokens[pos:]
    if len(rest) % 5:
        raise ValueError("entry lines must have five fields")
    for q in range(0, len(rest), 5):
        matno, blkno, i, j = (int(float(v)) for v in rest[q:q + 4])
        val = float(rest[q + 4])
        blk = mats[matno][blkno - 1]
        blk[i - 1, j - 1] = val
        blk[j - 1, i - 1] = val
    return SdpaProblem(c, sizes, mats)


def solve_sdpa(prob: SdpaProblem, **kwargs):
    """Solve a parsed SDPA problem with the internal interior-point code.

    Returns the :class:`~gjm.sdp.ipm.LmiResult`; the optimal SDPA objective is
    ``-result.lower``. Requires the last variable to carry an identity-like
    ``-F_m`` (the slack), which gives a strictly feasible start.
    """
    from .ipm import solve_lmi

    cb = [-b for b in prob.matrices[0]]
    ab = [np.stack([-prob.matrices[i + 1][k] for i in range(prob.m)]) for k in range(len(cb))]
    y0 = np.zeros(prob.m)
    y0[-1] = min(np.linalg.eigvalsh(b)[0] for b in cb) - 1.0
    return solve_lmi(cb, ab, -prob.c, y0=y0, **kwargs)
