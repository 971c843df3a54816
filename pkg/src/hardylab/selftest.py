"""Certification of near-optimal Hardy statistics.

Any two dichotomic Hermitian observables decompose the local space into
invariant blocks of dimension at most two.  The anticommutator
a1 a2 + a2 a1 is constant on each block, equal to twice the cosine of
the block angle; inside a non-commuting block the pair acts, in a
canonical basis, as the computational observable and the rotated one
with that angle.  When the observed statistics sit at the Hardy optimum,
projecting the state into every combination of blocks and rotating each
block to the canonical frame must recover the reference Hardy state on
the qubit factors, up to the uncharacterised junk carried by the block
multiplicities.  The report quantifies exactly that: per-combination
weights, per-combination fidelities against the reference state, and
their weighted total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .behavior import (hardy_statistics, joint_distribution,
                       measurements_from_observables)
from .errors import HypothesisUnmetError, NumericError, ValidationError
from .linalg import StateVector, eig_herm
from .states import MeasurementPair, hardy_state, pmax

WEIGHT_FLOOR = 1e-14
BLOCK_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class ObservablePair:
    """One party's two dichotomic Hermitian observables."""

    a1: np.ndarray
    a2: np.ndarray

    def __post_init__(self):
        a1 = np.asarray(self.a1, dtype=complex)
        a2 = np.asarray(self.a2, dtype=complex)
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)
        d = a1.shape[0]
        if a1.shape != (d, d) or a2.shape != (d, d):
            raise ValidationError("observables must be square and equally sized")
        eye = np.eye(d)
        for name, a in (("a1", a1), ("a2", a2)):
            if np.linalg.norm(a - a.conj().T) > 1e-10 * d:
                raise ValidationError(f"{name} is not Hermitian")
            if np.linalg.norm(a @ a - eye) > 1e-10 * d:
                raise ValidationError(f"{name} is not dichotomic (square != identity)")

    @property
    def dim(self) -> int:
        return self.a1.shape[0]


@dataclass(frozen=True)
class JordanBlock:
    """Invariant subspace of an observable pair.

    Two-dimensional blocks store an orthonormal basis (columns) in which
    a1 = diag(1, -1) and a2 = [[c, s], [s, -c]] with s > 0 and
    c = cos(angle); commuting directions appear as one-dimensional
    degenerate blocks tagged with both eigenvalue signs.
    """

    basis: np.ndarray
    angle: float | None
    degenerate: bool
    signs: tuple[int, int] | None = None

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class JordanDecomposition:
    blocks: tuple[JordanBlock, ...]

    @property
    def total_dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    def two_dim_blocks(self) -> list[JordanBlock]:
        return [b for b in self.blocks if not b.degenerate]


def jordan_blocks(pair: ObservablePair, tol: float = 1e-9) -> JordanDecomposition:
    """Simultaneous block decomposition of a dichotomic observable pair.

    Blocks are read off the eigenspaces of the anticommutator; within an
    eigenspace of value 2c with |c| < 1 every +1 eigenvector v of a1
    pairs with the normalised component of a2 v orthogonal to v.
    """
    a1, a2 = pair.a1, pair.a2
    d = pair.dim
    anti = a1 @ a2 + a2 @ a1
    vals, vecs = eig_herm(anti, tol=max(tol, 1e-10))
    blocks: list[JordanBlock] = []
    gap = 1e-8 * max(2.0, float(np.max(np.abs(vals))))
    i = 0
    while i < d:
        j = i + 1
        while j < d and vals[j] - vals[i] <= gap:
            j += 1
        kappa = float(np.mean(vals[i:j]))
        space = vecs[:, i:j]
        c = min(1.0, max(-1.0, kappa / 2.0))
        sin_sq = 1.0 - c * c
        a1_sub = space.conj().T @ a1 @ space
        sub_vals, sub_vecs = eig_herm(a1_sub, tol=max(tol, 1e-9))
        if sin_sq <= max(tol, 1e-12):
            # commuting sector: a2 = +/- a1 here, one-dimensional blocks
            for k in range(j - i):
                v = space @ sub_vecs[:, k]
                s1 = 1 if sub_vals[k] > 0 else -1
                s2 = 1 if float(np.vdot(v, a2 @ v).real) > 0 else -1
                blocks.append(JordanBlock(basis=v[:, None], angle=None,
                                          degenerate=True, signs=(s1, s2)))
        else:
            plus = [space @ sub_vecs[:, k] for k in range(j - i)
                    if sub_vals[k] > 0]
            minus_count = (j - i) - len(plus)
            if len(plus) != minus_count:
                raise NumericError(
                    "anticommutator eigenspace has unbalanced observable signs; "
                    "eigenvalue clusters may be merged, adjust tol")
            s = math.sqrt(sin_sq)
            for v in plus:
                u = a2 @ v - c * v
                nrm = float(np.linalg.norm(u))
                if abs(nrm - s) > 1e-7 * max(1.0, s):
                    raise NumericError("block companion vector has inconsistent norm")
                basis = np.column_stack([v, u / nrm])
                blocks.append(JordanBlock(basis=basis, angle=math.acos(c),
                                          degenerate=False))
        i = j
    decomp = JordanDecomposition(blocks=tuple(blocks))
    if decomp.total_dim != d:
        raise NumericError("block dimensions do not sum to the local dimension")
    full = np.column_stack([b.basis for b in blocks])
    if np.linalg.norm(full.conj().T @ full - np.eye(d)) > BLOCK_ORTHO_TOL * d:
        raise NumericError("recovered blocks are not jointly orthonormal")
    return decomp


@dataclass(frozen=True)
class SelfTestReport:
    """Blockwise certification result.

    ``block_weights[b1, ..., bn]`` is the probability mass on the block
    combination; ``block_fidelities`` the overlap of its normalised qubit
    part with the reference Hardy state (zero for combinations touching a
    degenerate block, which cannot host it); ``total_fidelity`` their
    weighted sum.  ``extracted_rotations`` hold each party's block bases
    as unitary columns (2-dim blocks first, then degenerate directions);
    ``junk_dims`` count the 2-dim blocks per party.
    """

    block_weights: np.ndarray
    block_fidelities: np.ndarray
    total_fidelity: float
    extracted_rotations: tuple[np.ndarray, ...]
    junk_dims: tuple[int, ...]
    degenerate_weight: float
    observed_p: float
    observed_zeros: np.ndarray
    decompositions: tuple[JordanDecomposition, ...]


def canonical_observables(n: int) -> list[ObservablePair]:
    """Qubit observable pairs realising the optimal Hardy point."""
    t = pmax(n).t
    pair = MeasurementPair.from_alpha_sq(t)
    z = np.diag([1.0, -1.0]).astype(complex)
    d = 2.0 * np.outer(pair.ket_plus, pair.ket_plus.conj()) - np.eye(2)
    return [ObservablePair(a1=z, a2=d) for _ in range(n)]


def _as_density(state, dims) -> np.ndarray:
    total = int(np.prod(dims))
    if isinstance(state, StateVector):
        if tuple(state.dims) != tuple(dims):
            raise ValidationError(
                f"state dims {state.dims} do not match observables {tuple(dims)}")
        return state.density()
    rho = np.asarray(state, dtype=complex)
    if rho.shape != (total, total):
        raise ValidationError(
            f"density shape {rho.shape} does not match observables, dim {total}")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > 1e-10:
        raise ValidationError(f"density trace {tr!r}, expected 1")
    return rho


def _project_combo(rho_tensor, bases, n):
    t = rho_tensor
    for p, b in enumerate(bases):
        t = np.tensordot(b.conj().T, t, axes=([1], [p]))
        t = np.moveaxis(t, 0, p)
    for p, b in enumerate(bases):
        t = np.tensordot(t, b, axes=([n + p], [0]))
        t = np.moveaxis(t, -1, n + p)
    k = int(np.prod([b.shape[1] for b in bases]))
    return t.reshape(k, k)


def selftest_report(state, observables, tol: float = 1e-6,
                    loose: bool = False) -> SelfTestReport:
    """Blockwise fidelity of a near-optimal realization to the Hardy state.

    ``state`` is a StateVector or density matrix over the observables'
    dimensions.  Unless ``loose`` is set, the observed statistics must
    sit at the Hardy point within ``tol`` (all constrained terms at most
    tol, success probability within tol of the optimum); otherwise the
    certification hypothesis is unmet and HypothesisUnmetError is raised.
    """
    observables = list(observables)
    n = len(observables)
    if n < 2:
        raise ValidationError("need at least two parties")
    dims = tuple(o.dim for o in observables)
    rho = _as_density(state, dims)

    ms = measurements_from_observables([(o.a1, o.a2) for o in observables])
    stats = hardy_statistics(joint_distribution(rho, ms))
    ref = pmax(n)
    if not loose:
        worst_zero = float(np.max(stats.zeros))
        p_gap = abs(stats.p - ref.p_max)
        if worst_zero > tol or p_gap > tol:
            raise HypothesisUnmetError(
                f"statistics are not a near-optimal Hardy point: "
                f"max constrained term {worst_zero:.3e}, "
                f"|p - p_max| = {p_gap:.3e} (tol {tol:.1e})")

    decomps = tuple(jordan_blocks(o, tol=min(tol, 1e-8)) for o in observables)
    psi_ref = hardy_state(n, [MeasurementPair.from_alpha_sq(ref.t)] * n).amps

    rho_tensor = rho.reshape(dims + dims)
    counts = tuple(len(dc.blocks) for dc in decomps)
    weights = np.zeros(counts)
    fidelities = np.zeros(counts)
    degenerate_weight = 0.0
    total = 0.0
    for combo in product(*(range(c) for c in counts)):
        blocks = [decomps[p].blocks[combo[p]] for p in range(n)]
        sigma = _project_combo(rho_tensor, [b.basis for b in blocks], n)
        weight = float(np.trace(sigma).real)
        weights[combo] = weight
        if any(b.degenerate for b in blocks):
            if weight > WEIGHT_FLOOR:
                degenerate_weight += weight
            continue
        if weight <= WEIGHT_FLOOR:
            continue
        fid = float(np.vdot(psi_ref, sigma @ psi_ref).real) / weight
        fidelities[combo] = fid
        total += weight * fid

    wsum = float(weights.sum())
    if abs(wsum - 1.0) > 1e-8:
        raise NumericError(f"block weights sum to {wsum!r}, expected 1")

    rotations = []
    for dc in decomps:
        cols = [b.basis for b in dc.two_dim_blocks()]
        cols += [b.basis for b in dc.blocks if b.degenerate]
        rot = np.column_stack(cols)
        rotations.append(rot)
    junk_dims = tuple(len(dc.two_dim_blocks()) for dc in decomps)

    return SelfTestReport(block_weights=weights, block_fidelities=fidelities,
                          total_fidelity=float(total),
                          extracted_rotations=tuple(rotations),
                          junk_dims=junk_dims,
                          degenerate_weight=float(degenerate_weight),
                          observed_p=stats.p,
                          observed_zeros=np.array(stats.zeros),
                          decompositions=decomps)
