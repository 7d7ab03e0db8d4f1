"""POVMs, Born-rule probabilities and outcome sampling.

Outcome indices are 0-based. For a product POVM over ``m`` subsystems the
outcome tuple ``(x_0, ..., x_{m-1})`` maps to the effect
``Pi_{x_0} (x) ... (x) Pi_{x_{m-1}}`` (subsystem 0 is the leftmost Kronecker
factor) and to the flat index ``sum_q x_q * M**q`` (little-endian in base
``M``).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import CapacityError, ValidationError
from .quantum import MAX_DIM, STATE_TOL

PROB_CLAMP = -1e-12


@dataclass(frozen=True, eq=False)
class Povm:
    """An ordered list of effects, stored as an ``(M, D, D)`` array."""

    effects: np.ndarray
    label: str = "povm"

    def __post_init__(self):
        eff = np.array(self.effects, dtype=complex)
        if eff.ndim != 3 or eff.shape[1] != eff.shape[2]:
            raise ValidationError(f"effects must have shape (M, D, D), got {eff.shape}")
        eff.setflags(write=False)
        object.__setattr__(self, "effects", eff)

    @property
    def dim(self):
        return self.effects.shape[1]

    @property
    def n_outcomes(self):
        return self.effects.shape[0]

    def __len__(self):
        return self.n_outcomes

    def __getitem__(self, x):
        return self.effects[x]

    @cached_property
    def flat_conj(self):
        # row x dotted with vec(rho) gives tr(Pi_x rho)
        out = self.effects.reshape(self.n_outcomes, -1).conj()
        out.setflags(write=False)
        return out


def validate_povm(povm, tol=STATE_TOL):
    """Hermiticity, PSD and completeness violations, each with its magnitude."""
    effects = np.asarray(povm.effects if isinstance(povm, Povm) else povm, dtype=complex)
    problems = []
    for x, E in enumerate(effects):
        herm = np.max(np.abs(E - E.conj().T))
        if herm > tol:
            problems.append(f"effect {x}: not Hermitian (deviation {herm:.3g})")
        lo = np.linalg.eigvalsh(0.5 * (E + E.conj().T))[0]
        if lo < -tol:
            problems.append(f"effect {x}: not PSD (min eigenvalue {lo:.3g})")
    dim = effects.shape[-1]
    gap = np.max(np.abs(effects.sum(axis=0) - np.eye(dim)))
    if gap > tol:
        problems.append(f"effects do not sum to identity (max deviation {gap:.3g})")
    return problems


SIC_BLOCH_VECTORS = np.array([
    [0.0, 0.0, 1.0],
    [2 * np.sqrt(2) / 3, 0.0, -1 / 3],
    [-np.sqrt(2) / 3, np.sqrt(2 / 3), -1 / 3],
    [-np.sqrt(2) / 3, -np.sqrt(2 / 3), -1 / 3],
])

_PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


def qubit_sic_povm():
    """Tetrahedral qubit SIC-POVM, ``Pi_x = (I + v_x . sigma) / 4``."""
    effects = (np.eye(2) + np.tensordot(SIC_BLOCH_VECTORS, _PAULI, axes=(1, 0))) / 4
    return Povm(effects, label="sic")


def product_povm(base, m):
    """All ``m``-fold tensor products of ``base`` effects (see module docstring for order)."""
    if m < 1:
        raise ValidationError(f"number of subsystems must be >= 1, got {m}")
    if base.dim**m > MAX_DIM:
        raise CapacityError(f"product dimension {base.dim}**{m} exceeds {MAX_DIM}")
    if m == 1:
        return base
    M, d = base.n_outcomes, base.dim
    effects = np.empty((M**m, d**m, d**m), dtype=complex)
    for idx in range(M**m):
        xs = outcome_digits(idx, M, m)
        E = base.effects[xs[0]]
        for x in xs[1:]:
            E = np.kron(E, base.effects[x])
        effects[idx] = E
    return Povm(effects, label=f"{base.label}^{m}")


def outcome_digits(index, base_outcomes, m):
    """Inverse of the product-outcome encoding."""
    return tuple((index // base_outcomes**q) % base_outcomes for q in range(m))


def born_probabilities(rho, povm):
    """``p_x = tr(Pi_x rho)``, clamped at zero and renormalized to sum to one."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (povm.dim, povm.dim):
        raise ValidationError(f"state shape {rho.shape} does not match POVM dimension {povm.dim}")
    p = (povm.flat_conj @ rho.ravel()).real
    if p.min() < PROB_CLAMP:
        raise ValidationError(f"negative Born probability {p.min():.3g}; state is not PSD")
    p = np.maximum(p, 0.0)
    total = p.sum()
    if abs(total - 1.0) > STATE_TOL:
        raise ValidationError(f"Born probabilities sum to {total:.12g}; state trace is not 1")
    return p / total


def sample_outcome(rho, povm, rng, size=None):
    """Draw outcome index(es) by inverse CDF over the effect order."""
    cdf = np.cumsum(born_probabilities(rho, povm))
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, povm.n_outcomes - 1)
    return int(idx) if size is None else idx


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """Time-ordered observations; entry ``t-1`` is ``(povm label, outcome, effect)``.

    Records are values: :meth:`append` returns a new record.
    """

    dim: int
    entries: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.entries)

    def append(self, povm, outcome):
        if povm.dim != self.dim:
            raise ValidationError(f"POVM dimension {povm.dim} != record dimension {self.dim}")
        if not 0 <= outcome < povm.n_outcomes:
            raise ValidationError(f"outcome {outcome} outside 0..{povm.n_outcomes - 1}")
        entry = (povm.label, int(outcome), povm.effects[outcome])
        return MeasurementRecord(self.dim, self.entries + (entry,))

    @classmethod
    def from_outcomes(cls, povm, outcomes):
        entries = tuple((povm.label, int(x), povm.effects[x]) for x in outcomes)
        for _, x, _ in entries:
            if not 0 <= x < povm.n_outcomes:
                raise ValidationError(f"outcome {x} outside 0..{povm.n_outcomes - 1}")
        return cls(povm.dim, entries)

    @property
    def effects(self):
        if not self.entries:
            return np.zeros((0, self.dim, self.dim), dtype=complex)
        return np.stack([e for _, _, e in self.entries])

    @property
    def outcomes(self):
        return [x for _, x, _ in self.entries]

    @cached_property
    def grouped(self):
        """Distinct effects and their counts, as ``(effects (k, D, D), counts (k,))``."""
        index = {}
        mats, counts = [], []
        for label, x, E in self.entries:
            key = (label, x)
            if key not in index:
                index[key] = len(mats)
                mats.append(E)
                counts.append(0)
            counts[index[key]] += 1
        if not mats:
            return np.zeros((0, self.dim, self.dim), dtype=complex), np.zeros(0)
        return np.stack(mats), np.asarray(counts, dtype=float)
