"""Shannon-level effect of announcing click/no-click on a lossy key-generation round.

Alice, Bob and Eve hold ``A, E in [d]`` and ``B in [d] + {no-click}``: on a
click (probability ``eta``) all three agree on a uniform symbol, on a
no-click ``A`` and ``E`` are independent and uniform. Announcing the click
flag ``C = [B != no-click]`` lets Eve separate the two regimes.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .povm import NO_CLICK


@dataclass(frozen=True)
class AbeDist:
    d: int
    eta: Fraction | float
    table: dict          # (a, b, e) -> probability; b == NO_CLICK for a no-click

    @property
    def exact(self) -> bool:
        return isinstance(self.eta, Fraction)

    def cells(self):
        return [(k, v) for k, v in self.table.items() if v != 0]


def _as_prob(eta):
    if isinstance(eta, (Fraction, int)) and not isinstance(eta, bool):
        return Fraction(eta)
    if isinstance(eta, str):
        return Fraction(eta)
    return float(eta)


def abe_dist(d: int, eta) -> AbeDist:
    """Joint table ``P(a, b, e)``; exact (Fraction) when ``eta`` is an int, Fraction or ``"p/q"``."""
    if int(d) != d or d < 2:
        raise ValueError("alphabet size d must be an integer >= 2")
    d = int(d)
    eta = _as_prob(eta)
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    one = Fraction(1) if isinstance(eta, Fraction) else 1.0
    table = {}
    for a in range(d):
        for e in range(d):
            for b in list(range(d)) + [NO_CLICK]:
                if b == NO_CLICK:
                    p = (one - eta) / (d * d)
                elif a == b == e:
                    p = eta / d
                else:
                    p = 0 * one
                table[(a, b, e)] = p
    return AbeDist(d, eta, table)


# --- entropies --------------------------------------------------------------

def _marginal(table, keyf):
    out = defaultdict(float)
    for k, p in table.items():
        out[keyf(k)] += float(p)
    return out


def _h(probs) -> float:
    return -sum(p * math.log2(p) for p in probs if p > 0)


@dataclass(frozen=True)
class EntropyReport:
    h_A_given_E: float
    h_A_given_Eprime: float
    i_AB_minus_AE: float
    i_BA_minus_BE: float
    n_rounds: int = 1

    def scaled(self, n: int) -> "EntropyReport":
        f = n / self.n_rounds
        return replace(self, h_A_given_E=self.h_A_given_E * f, h_A_given_Eprime=self.h_A_given_Eprime * f,
                       i_AB_minus_AE=self.i_AB_minus_AE * f, i_BA_minus_BE=self.i_BA_minus_BE * f,
                       n_rounds=n)

    def as_dict(self) -> dict:
        return {"h_A_given_E": self.h_A_given_E, "h_A_given_Eprime": self.h_A_given_Eprime,
                "i_AB_minus_AE": self.i_AB_minus_AE, "i_BA_minus_BE": self.i_BA_minus_BE,
                "n_rounds": self.n_rounds}


# joint entropies of marginals, as (coefficient, key function) lists
_A = lambda k: k[0]            # noqa: E731
_B = lambda k: k[1]            # noqa: E731
_E = lambda k: k[2]            # noqa: E731
_AE = lambda k: (k[0], k[2])   # noqa: E731
_AB = lambda k: (k[0], k[1])   # noqa: E731
_BE = lambda k: (k[1], k[2])   # noqa: E731
_C = lambda k: k[1] != NO_CLICK                  # noqa: E731
_EC = lambda k: (k[2], k[1] != NO_CLICK)         # noqa: E731
_AEC = lambda k: (k[0], k[2], k[1] != NO_CLICK)  # noqa: E731

QUANTITIES = {
    "h_A_given_E": [(1, _AE), (-1, _E)],
    "h_A_given_Eprime": [(1, _AEC), (-1, _EC)],
    # I(A:B) - I(A:E) = H(B) - H(AB) - H(E) + H(AE)
    "i_AB_minus_AE": [(1, _B), (-1, _AB), (-1, _E), (1, _AE)],
    # I(B:A) - I(B:E) = H(A) - H(AB) - H(E) + H(BE)
    "i_BA_minus_BE": [(1, _A), (-1, _AB), (-1, _E), (1, _BE)],
}


def _combo(table, terms) -> float:
    return sum(c * _h(_marginal(table, f).values()) for c, f in terms)


def entropies(dist: AbeDist) -> EntropyReport:
    """Per-round entropies by direct summation over the table (bits; 0 log 0 = 0)."""
    vals = {name: _combo(dist.table, terms) for name, terms in QUANTITIES.items()}
    return EntropyReport(**vals)


def _xlog2x(x: float) -> float:
    return x * math.log2(x) if x > 0 else 0.0


def closed_form_entropies(d: int, eta: float) -> EntropyReport:
    """Per-round closed forms; ``I(B:A) - I(B:E)`` vanishes identically."""
    eta = float(eta)
    hae = -_xlog2x(eta + (1 - eta) / d) - (d - 1) * _xlog2x((1 - eta) / d)
    hae_p = (1 - eta) * math.log2(d)
    diff = eta * math.log2(d) - (_xlog2x(1 + eta * (d - 1)) + (d - 1) * _xlog2x(1 - eta)) / d
    return EntropyReport(hae, hae_p, diff, 0.0)


# --- exact rational path ----------------------------------------------------

def _factor(n: int) -> dict:
    from sympy import factorint

    return factorint(n) if n > 1 else {}


def log2_form(q: Fraction) -> dict:
    """``log2 q`` as ``{prime: exponent}`` (exponents of ``log2 p``)."""
    out = defaultdict(int)
    for p, k in _factor(q.numerator).items():
        out[p] += k
    for p, k in _factor(q.denominator).items():
        out[p] -= k
    return dict(out)


def exact_information_form(dist: AbeDist, quantity: str) -> dict:
    """A combination of joint entropies as an exact linear form ``sum_p c_p log2 p``.

    Coefficients are Fractions keyed by prime; the quantity is exactly zero
    iff every coefficient vanishes (logarithms of distinct primes are
    linearly independent over the rationals). Requires an exact table.
    """
    if not dist.exact:
        raise ValueError("exact path needs a rational eta")
    coeffs = defaultdict(Fraction)
    for c, f in QUANTITIES[quantity]:
        marg = defaultdict(Fraction)
        for k, p in dist.table.items():
            marg[f(k)] += p
        for p in marg.values():
            if p == 0:
                continue
            # H contribution: -p log2 p
            for prime, e in log2_form(p).items():
                coeffs[prime] -= c * p * e
    return {p: v for p, v in coeffs.items() if v != 0}


def evaluate_form(form: dict) -> float:
    return float(sum(float(v) * math.log2(p) for p, v in form.items()))


# --- Monte Carlo ------------------------------------------------------------

@dataclass
class MonteCarloEstimate:
    value: float
    sigma_delta: float
    sigma_bootstrap: float
    samples: int

    @property
    def sigma(self) -> float:
        return max(self.sigma_delta, self.sigma_bootstrap)


def sample_counts(dist: AbeDist, samples: int, seed: int = 0, shards: int = 4) -> dict:
    """Draw ``samples`` triples (in independently seeded shards) and tally them."""
    keys = [k for k, _ in dist.cells()]
    probs = np.array([float(p) for _, p in dist.cells()])
    probs = probs / probs.sum()
    counts = np.zeros(len(keys), dtype=np.int64)
    sizes = [samples // shards + (1 if i < samples % shards else 0) for i in range(shards)]
    for child, size in zip(np.random.SeedSequence(seed).spawn(shards), sizes):
        rng = np.random.default_rng(child)
        idx = rng.choice(len(keys), size=size, p=probs)
        counts += np.bincount(idx, minlength=len(keys))
    return dict(zip(keys, counts.tolist()))


def _plugin(counts_vec, keys, terms, total) -> float:
    table = {k: c / total for k, c in zip(keys, counts_vec)}
    return _combo(table, terms)


def monte_carlo(dist: AbeDist, samples: int = 1_000_000, seed: int = 0,
                bootstrap: int = 200, shards: int = 4) -> dict:
    """Plug-in estimates of every quantity with delta-method and bootstrap standard errors.

    The delta-method error vanishes for ``I(B:A) - I(B:E)`` (its influence
    function is identically zero on this family), so a multinomial bootstrap
    of the tallies provides the second-order scale.
    """
    counts = sample_counts(dist, samples, seed, shards)
    keys = list(counts)
    vec = np.array([counts[k] for k in keys], dtype=float)
    total = vec.sum()
    phat = vec / total
    # the child after the sampling shards drives the bootstrap
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(shards + 1)[-1])
    boots = rng.multinomial(int(total), phat, size=bootstrap)
    out = {}
    for name, terms in QUANTITIES.items():
        est = _plugin(vec, keys, terms, total)
        # influence function: psi(x) = sum_j c_j (-log2 p_j(x_j))
        table = {k: p for k, p in zip(keys, phat)}
        margs = [(c, f, _marginal(table, f)) for c, f in terms]
        psi = np.array([sum(-c * math.log2(m[f(k)]) for c, f, m in margs) for k in keys])
        mean = float(phat @ psi)
        sig_d = math.sqrt(max(float(phat @ (psi - mean) ** 2), 0.0) / total)
        reps = np.array([_plugin(b, keys, terms, total) for b in boots])
        out[name] = MonteCarloEstimate(est, sig_d, float(reps.std(ddof=1)), int(total))
    return out


# --- parity reconciliation --------------------------------------------------

def parity_reconcile(alice_bits, bob_symbols, block: int, blocks: int | None = None):
    """Fill single erasures in Bob's string from Alice's announced block parities.

    Alice announces the parity of each block of ``block`` symbols (the first
    ``blocks`` blocks if given). A block with exactly one erasure on Bob's
    side is completed; other blocks are left unchanged. Returns Bob's
    updated string and the announced ``(block_index, parity)`` pairs.
    """
    a = [int(ch) for ch in alice_bits]
    bob = [ch if isinstance(ch, str) else str(ch) for ch in bob_symbols]
    if len(a) != len(bob):
        raise ValueError(f"length mismatch: {len(a)} vs {len(bob)}")
    if block < 2:
        raise ValueError("block must be at least 2")
    if any(ch not in ("0", "1", NO_CLICK) for ch in bob):
        raise ValueError("Bob's symbols must be 0, 1 or the no-click symbol")
    out = list(bob)
    leaked = []
    n_blocks = -(-len(a) // block)
    if blocks is not None:
        n_blocks = min(n_blocks, blocks)
    for i in range(n_blocks):
        lo, hi = i * block, min((i + 1) * block, len(a))
        parity = sum(a[lo:hi]) % 2
        leaked.append((i, parity))
        erased = [j for j in range(lo, hi) if out[j] == NO_CLICK]
        if len(erased) == 1:
            known = sum(int(out[j]) for j in range(lo, hi) if j != erased[0]) % 2
            out[erased[0]] = str((parity - known) % 2)
    return "".join(out), leaked
