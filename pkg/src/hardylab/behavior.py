"""Joint probability behaviors from states and measurements.

Index layout, fixed across the package: ``probs`` has shape (2,)*2n with
the first n axes holding the settings (0 = U, 1 = D) of parties 1..n and
the last n axes the outcomes (0 = +1, 1 = -1).  Two-party Hardy terms
marginalise the remaining parties over their outcomes at setting U; that
choice is immaterial for no-signaling behaviors and no-signaling is
verified at use.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ValidationError
from .linalg import StateVector
from .states import MeasurementPair

NEGATIVITY_FLOOR = -1e-12


@dataclass(frozen=True)
class Scenario:
    """n parties, two settings per party, two outcomes per setting."""

    n: int
    settings_per_party: int = 2
    outcomes_per_setting: int = 2

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"need at least two parties, got n={self.n}")
        if self.settings_per_party != 2 or self.outcomes_per_setting != 2:
            raise ValidationError("only the (2, 2) scenario is supported")


@dataclass(frozen=True)
class MeasurementSet:
    """Per-party projector pairs: projectors[party][setting][outcome]."""

    projectors: tuple
    dims: tuple[int, ...]

    def __post_init__(self):
        for party, (dim, settings) in enumerate(zip(self.dims, self.projectors)):
            if len(settings) != 2:
                raise ValidationError(f"party {party}: expected two settings")
            eye = np.eye(dim)
            for pair in settings:
                plus, minus = pair
                if plus.shape != (dim, dim) or minus.shape != (dim, dim):
                    raise ValidationError(f"party {party}: projector shape mismatch")
                if np.linalg.norm(plus + minus - eye) > 1e-12 * max(1.0, dim):
                    raise ValidationError(f"party {party}: projectors do not sum to identity")
                for p in (plus, minus):
                    if np.linalg.norm(p @ p - p) > 1e-12 * max(1.0, dim):
                        raise ValidationError(f"party {party}: projector not idempotent")

    @property
    def n_parties(self) -> int:
        return len(self.dims)

    def is_rank1_qubits(self) -> bool:
        return all(d == 2 for d in self.dims) and all(
            abs(np.trace(pair[0]).real - 1.0) < 1e-9
            for settings in self.projectors for pair in settings)


@dataclass(frozen=True)
class BehaviorTensor:
    """Full table P(outcomes | settings) for an n-party (2, 2) scenario."""

    scenario: Scenario
    probs: np.ndarray

    def __post_init__(self):
        n = self.scenario.n
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (2,) * (2 * n):
            raise ValidationError(
                f"probs shape {probs.shape}, expected {(2,) * (2 * n)}")
        if probs.min() < NEGATIVITY_FLOOR:
            raise ValidationError(
                f"negative probability {probs.min()!r} below the clamp floor")
        probs = np.clip(probs, 0.0, None)
        sums = probs.sum(axis=tuple(range(n, 2 * n)))
        if np.max(np.abs(sums - 1.0)) > 1e-10:
            raise ValidationError("per-setting outcome sums deviate from 1")
        object.__setattr__(self, "probs", probs)

    @property
    def n(self) -> int:
        return self.scenario.n


@dataclass(frozen=True)
class HardyStats:
    """Success probability and the n+1 constrained Hardy terms."""

    p: float
    zeros: np.ndarray


@dataclass(frozen=True)
class NoSignalingReport:
    max_violation: float
    subset: tuple[int, ...]
    settings_a: tuple[int, ...]
    settings_b: tuple[int, ...]


def measurements_from_pairs(pairs) -> MeasurementSet:
    """Rank-1 qubit projectors onto {|0>,|1>} (U) and {|+>,|->} (D)."""
    pairs = list(pairs)
    projs = []
    for pair in pairs:
        if not isinstance(pair, MeasurementPair):
            raise ValidationError("expected MeasurementPair instances")
        plus = np.outer(pair.ket_plus, pair.ket_plus.conj())
        minus = np.outer(pair.ket_minus, pair.ket_minus.conj())
        u0 = np.diag([1.0, 0.0]).astype(complex)
        u1 = np.diag([0.0, 1.0]).astype(complex)
        projs.append(((u0, u1), (plus, minus)))
    return MeasurementSet(projectors=tuple(projs), dims=(2,) * len(pairs))


def measurements_from_observables(observables) -> MeasurementSet:
    """Projector pairs (I +/- A)/2 from per-party dichotomic observables."""
    projs = []
    dims = []
    for a1, a2 in observables:
        a1 = np.asarray(a1, dtype=complex)
        a2 = np.asarray(a2, dtype=complex)
        d = a1.shape[0]
        eye = np.eye(d)
        for a in (a1, a2):
            if a.shape != (d, d):
                raise ValidationError("observable shape mismatch")
            if np.linalg.norm(a @ a - eye) > 1e-10 * d:
                raise ValidationError("observable is not dichotomic (A^2 != I)")
        projs.append((( (eye + a1) / 2, (eye - a1) / 2),
                      ((eye + a2) / 2, (eye - a2) / 2)))
        dims.append(d)
    return MeasurementSet(projectors=tuple(projs), dims=tuple(dims))


def _joint_pure_rank1(psi: StateVector, m: MeasurementSet) -> np.ndarray:
    """All Born probabilities at once via per-party basis rotations."""
    n = m.n_parties
    probs = np.empty((2,) * (2 * n))
    tensor = psi.tensor()
    bases = []
    for party in range(n):
        per_setting = []
        for setting in range(2):
            plus, minus = m.projectors[party][setting]
            # Rank-1 projector onto v has column v on the diagonal basis:
            # recover the eigenvector as the dominant column.
            vp = _rank1_vector(plus)
            vm = _rank1_vector(minus)
            per_setting.append(np.vstack([vp.conj(), vm.conj()]))
        bases.append(per_setting)
    for settings in product(range(2), repeat=n):
        t = tensor
        for party, s in enumerate(settings):
            t = np.tensordot(bases[party][s], t, axes=([1], [party]))
            t = np.moveaxis(t, 0, party)
        probs[settings] = np.abs(t) ** 2
    return probs


def _rank1_vector(proj: np.ndarray) -> np.ndarray:
    col = np.argmax(np.abs(np.diag(proj)))
    v = proj[:, col]
    return v / np.linalg.norm(v)


def _joint_general(rho: np.ndarray, m: MeasurementSet) -> np.ndarray:
    n = m.n_parties
    dims = m.dims
    probs = np.empty((2,) * (2 * n))
    rt = rho.reshape(dims + dims)
    for settings in product(range(2), repeat=n):
        for outcomes in product(range(2), repeat=n):
            # Tr[rho (P_1 x ... x P_n)] contracts each party's row index
            # with axis 1 of its projector and column index with axis 0.
            # Contracting the last active party keeps axis numbers stable.
            t = rt
            for party in reversed(range(n)):
                proj = m.projectors[party][settings[party]][outcomes[party]]
                k = party + 1
                t = np.tensordot(t, proj, axes=([k - 1, 2 * k - 1], [1, 0]))
            probs[settings + outcomes] = float(t.real)
    return probs


def joint_distribution(state, m: MeasurementSet) -> BehaviorTensor:
    """Born-rule behavior of a pure state or density matrix under ``m``."""
    n = m.n_parties
    total = int(np.prod(m.dims))
    if isinstance(state, StateVector):
        if state.dims != m.dims:
            raise ValidationError(
                f"state dims {state.dims} do not match measurement dims {m.dims}")
        if m.is_rank1_qubits():
            probs = _joint_pure_rank1(state, m)
        else:
            probs = _joint_general(state.density(), m)
    else:
        rho = np.asarray(state, dtype=complex)
        if rho.shape != (total, total):
            raise ValidationError(
                f"density shape {rho.shape} does not match measurement dims {m.dims}")
        probs = _joint_general(rho, m)
    return BehaviorTensor(scenario=Scenario(n=n), probs=probs)


def hardy_functionals(n: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Coefficient tensors over the behavior table for p and the zero terms.

    Returns (p_coeff, [z_1, ..., z_n, z_minus]); z_i marginalises the
    parties other than (i, i+1 cyclic) at setting U.
    """
    shape = (2,) * (2 * n)
    p_coeff = np.zeros(shape)
    p_coeff[(0,) * (2 * n)] = 1.0
    zs = []
    for i in range(n):
        j = (i + 1) % n
        coeff = np.zeros(shape)
        settings = [0] * n
        settings[i] = 1
        sel = [slice(None)] * n
        sel[i] = 0
        sel[j] = 0
        coeff[tuple(settings) + tuple(sel)] = 1.0
        zs.append(coeff)
    last = np.zeros(shape)
    last[(1,) * (2 * n)] = 1.0
    zs.append(last)
    return p_coeff, zs


def hardy_statistics(b: BehaviorTensor, ns_tol: float | None = 1e-6) -> HardyStats:
    """Hardy statistic set of a behavior.

    Marginal terms are only meaningful for no-signaling behaviors, so the
    no-signaling property is asserted (within ``ns_tol``) unless disabled
    with ``ns_tol=None``.
    """
    n = b.n
    if ns_tol is not None:
        report = check_no_signaling(b)
        if report.max_violation > ns_tol:
            raise ValidationError(
                f"behavior signals (violation {report.max_violation:.3e}); "
                "Hardy marginals would be convention-dependent")
    p_coeff, zs = hardy_functionals(n)
    p = float(np.tensordot(p_coeff, b.probs, axes=2 * n))
    zeros = np.array([float(np.tensordot(z, b.probs, axes=2 * n)) for z in zs])
    return HardyStats(p=p, zeros=zeros)


def check_no_signaling(b: BehaviorTensor, tol: float = 1e-10) -> NoSignalingReport:
    """Largest marginal discrepancy over parties traced out of the behavior.

    For every proper nonempty subset of kept parties, the outcome marginal
    must not depend on the settings of the complement.  ``tol`` is only
    advisory here; the raw maximum is reported.
    """
    n = b.n
    worst = NoSignalingReport(0.0, (), (), ())
    for mask in range(1, 2 ** n - 1):
        keep = [i for i in range(n) if (mask >> i) & 1]
        drop = [i for i in range(n) if not (mask >> i) & 1]
        marg = b.probs.sum(axis=tuple(n + i for i in drop))
        # axes: settings (all n) then outcomes of kept parties
        marg = np.moveaxis(marg, [d for d in drop], range(n - len(keep)))
        flat = marg.reshape(2 ** len(drop), -1)
        spread = flat.max(axis=0) - flat.min(axis=0)
        col = int(np.argmax(spread))
        viol = float(spread[col])
        if viol > worst.max_violation:
            hi = int(np.argmax(flat[:, col]))
            lo = int(np.argmin(flat[:, col]))
            unpack = lambda code: tuple((code >> k) & 1 for k in range(len(drop)))[::-1]
            worst = NoSignalingReport(
                max_violation=viol,
                subset=tuple(keep),
                settings_a=unpack(hi),
                settings_b=unpack(lo),
            )
    return worst
