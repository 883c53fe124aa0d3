"""Measurement assemblies, guessable-outcome specifications and loss models."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .matqm import POVMError, as_bloch, bloch_projector, herm, min_eig

NO_CLICK = "∅"
CASES = ("a", "b", "c", "d")

Label = Hashable


class AssemblyError(ValueError):
    """Inconsistent or invalid measurement assembly."""


class GSpecError(ValueError):
    """Guessable-outcome specification does not match the assembly."""


@dataclass(frozen=True, eq=False)
class Povm:
    """A POVM with explicit outcome labels.

    ``effects[i]`` is the effect for ``labels[i]``. Effects are stored as
    read-only Hermitian arrays.
    """

    labels: tuple
    effects: tuple

    def __init__(self, labels: Sequence[Label], effects: Sequence, tol: float = 1e-10):
        labels = tuple(labels)
        if len(labels) != len(effects) or not labels:
            raise POVMError("need one effect per label and at least one outcome")
        if len(set(labels)) != len(labels):
            raise POVMError(f"duplicate outcome labels {labels}")
        mats = []
        for e in effects:
            e = herm(e)
            e.setflags(write=False)
            mats.append(e)
        d = mats[0].shape[0]
        if any(m.shape != (d, d) for m in mats):
            raise POVMError("effects have inconsistent dimensions")
        for lab, m in zip(labels, mats):
            if min_eig(m) < -tol:
                raise POVMError(f"effect {lab!r} is not PSD (min eig {min_eig(m):.3e})")
        if np.max(np.abs(sum(mats) - np.eye(d))) > tol:
            raise POVMError("effects do not sum to the identity")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "effects", tuple(mats))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @property
    def k(self) -> int:
        return len(self.labels)

    def __getitem__(self, label: Label) -> np.ndarray:
        try:
            return self.effects[self.labels.index(label)]
        except ValueError:
            raise KeyError(label) from None

    def items(self):
        return zip(self.labels, self.effects)

    @property
    def is_lossy(self) -> bool:
        return NO_CLICK in self.labels

    @property
    def conclusive_labels(self) -> tuple:
        return tuple(b for b in self.labels if b != NO_CLICK)


@dataclass(frozen=True, eq=False)
class Assembly:
    """A finite family of POVMs ``B_y`` on a common Hilbert space."""

    povms: tuple

    def __init__(self, povms: Iterable[Povm]):
        povms = tuple(povms)
        if not povms:
            raise AssemblyError("an assembly needs at least one measurement")
        dims = {p.dim for p in povms}
        if len(dims) != 1:
            raise AssemblyError(f"measurements act on different dimensions {sorted(dims)}")
        object.__setattr__(self, "povms", povms)

    @property
    def n(self) -> int:
        return len(self.povms)

    @property
    def dim(self) -> int:
        return self.povms[0].dim

    def __getitem__(self, y: int) -> Povm:
        return self.povms[y]

    def __iter__(self):
        return iter(self.povms)

    def __len__(self) -> int:
        return self.n

    @property
    def is_lossy(self) -> bool:
        return any(p.is_lossy for p in self.povms)

    def subset(self, settings: Sequence[int]) -> "Assembly":
        return Assembly(self.povms[y] for y in settings)


@dataclass(frozen=True)
class GSpec:
    """Per-setting subsets of outcome labels whose values must be guessable."""

    subsets: tuple

    def __init__(self, subsets: Iterable[Iterable[Label]]):
        object.__setattr__(self, "subsets", tuple(frozenset(s) for s in subsets))

    def __getitem__(self, y: int) -> frozenset:
        return self.subsets[y]

    def __len__(self) -> int:
        return len(self.subsets)

    def complement(self, y: int, povm: Povm) -> tuple:
        """Labels of ``povm`` outside the guessable set, in POVM order."""
        return tuple(b for b in povm.labels if b not in self.subsets[y])

    def guessable(self, y: int, povm: Povm) -> tuple:
        """Guessable labels in POVM order (deterministic iteration)."""
        return tuple(b for b in povm.labels if b in self.subsets[y])

    def validate(self, a: Assembly) -> "GSpec":
        if len(self.subsets) != a.n:
            raise GSpecError(f"GSpec has {len(self.subsets)} settings, assembly has {a.n}")
        for y, (s, p) in enumerate(zip(self.subsets, a.povms)):
            unknown = s - set(p.labels)
            if unknown:
                raise GSpecError(f"setting {y}: unknown labels {sorted(map(str, unknown))}")
        return self

    def issubset(self, other: "GSpec") -> bool:
        return len(self) == len(other) and all(s <= t for s, t in zip(self.subsets, other.subsets))

    def restrict(self, settings: Sequence[int]) -> "GSpec":
        return GSpec(self.subsets[y] for y in settings)


# --- constructors and transforms -------------------------------------------

def qubit_assembly(directions: Sequence) -> Assembly:
    """Projective qubit measurements ``r_y . sigma`` with outcome labels ``+1, -1``."""
    if len(directions) == 0:
        raise AssemblyError("need at least one measurement direction")
    povms = []
    for r in directions:
        r = as_bloch(r, tol=1e-9)
        povms.append(Povm((1, -1), (bloch_projector(r, 1), bloch_projector(r, -1))))
    return Assembly(povms)


def xz_directions(angles: Sequence[float]) -> list[np.ndarray]:
    """Unit vectors ``(sin a, 0, cos a)`` in the x-z plane."""
    return [np.array([np.sin(a), 0.0, np.cos(a)]) for a in angles]


def _check_unit_interval(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class LossParams:
    """Detection efficiency ``eta`` and visibility ``nu_vis``, both in [0, 1]."""

    eta: float
    nu_vis: float = 1.0

    def __post_init__(self):
        _check_unit_interval("eta", self.eta)
        _check_unit_interval("nu_vis", self.nu_vis)


def apply_loss_visibility(a: Assembly, p: LossParams) -> Assembly:
    """Lossy, noisy effects ``eta*nu*B + eta*(1-nu)*t_b*1`` plus a no-click effect ``(1-eta)*1``.

    ``t_b = tr(B_b) / d`` is computed from the ideal effects.
    """
    if a.is_lossy:
        raise AssemblyError("assembly already has a no-click outcome; loss is applied once")
    eta, nu = p.eta, p.nu_vis
    d = a.dim
    eye = np.eye(d)
    out = []
    for povm in a:
        effects = []
        for e in povm.effects:
            t = np.trace(e).real / d
            effects.append(eta * nu * e + eta * (1 - nu) * t * eye)
        effects.append((1 - eta) * eye)
        out.append(Povm(povm.labels + (NO_CLICK,), effects))
    return Assembly(out)


def apply_loss(a: Assembly, eta: float) -> Assembly:
    """Lossy measurements ``eta * B_b`` with the extra no-click effect ``(1-eta) * 1``."""
    return apply_loss_visibility(a, LossParams(eta, 1.0))


def gspec_case(case: str, a: Assembly) -> GSpec:
    """Guessable sets for the four standard scenarios.

    ``a``: every outcome including no-click. ``b``: every outcome of the first
    setting only. ``c``: conclusive outcomes of every setting. ``d``:
    conclusive outcomes of the first setting only.
    """
    if case not in CASES:
        raise GSpecError(f"unknown case {case!r}; expected one of {CASES}")
    if not a.is_lossy:
        raise GSpecError("gspec_case expects a lossy assembly (with no-click labels)")
    subsets = []
    for y, p in enumerate(a):
        if case == "a":
            subsets.append(p.labels)
        elif case == "b":
            subsets.append(p.labels if y == 0 else ())
        elif case == "c":
            subsets.append(p.conclusive_labels)
        else:
            subsets.append(p.conclusive_labels if y == 0 else ())
    return GSpec(subsets)


# --- JSON ------------------------------------------------------------------

def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def matrix_from_json(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise AssemblyError("matrix entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def assembly_to_dict(a: Assembly) -> dict:
    return {
        "dim": a.dim,
        "settings": [
            {"labels": list(p.labels), "effects": [matrix_to_json(e) for e in p.effects]}
            for p in a
        ],
    }


def assembly_from_dict(doc: dict) -> Assembly:
    try:
        dim = int(doc["dim"])
        settings = doc["settings"]
    except (KeyError, TypeError) as exc:
        raise AssemblyError(f"malformed assembly document: {exc}") from None
    povms = []
    for s in settings:
        effects = [matrix_from_json(e) for e in s["effects"]]
        povms.append(Povm(s["labels"], effects))
    a = Assembly(povms)
    if a.dim != dim:
        raise AssemblyError(f"declared dim {dim} but effects have dim {a.dim}")
    return a


def dumps_assembly(a: Assembly, **kwargs) -> str:
    return json.dumps(assembly_to_dict(a), ensure_ascii=False, **kwargs)


def loads_assembly(text: str) -> Assembly:
    return assembly_from_dict(json.loads(text))
