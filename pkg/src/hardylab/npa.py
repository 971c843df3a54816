"""Moment-matrix relaxation of the noisy Hardy problem.

Monomials are products of the per-party '+'-outcome projectors (one per
dichotomic measurement; the '-' projector is eliminated through
completeness).  Letters of different parties commute, same-party letters
do not, and projector idempotence collapses equal neighbours, so a
canonical monomial is an ascending tuple of per-party reduced words.

The moment matrix over the level-k monomial basis may be taken real
symmetric without loss: if a complex Hermitian moment matrix is feasible
then so is its entrywise conjugate (every constraint here has real
coefficients), and the average of the two is a real symmetric feasible
matrix with the same objective.  Cell (u, v) and cell (v, u) therefore
share one variable, identified by canon(u'v) ~ canon((u'v)').
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .behavior import Scenario
from .errors import CapabilityError, NumericError, SizeError, ValidationError

LETTERS = "UD"
MAX_BASIS = 5000

Word = tuple[int, ...]
Monomial = tuple[Word, ...]


def reduce_word(word) -> Word:
    out = []
    for letter in word:
        if letter not in (0, 1):
            raise ValidationError(f"letter {letter!r} not in {{0, 1}}")
        if not out or out[-1] != letter:
            out.append(letter)
    return tuple(out)


def canonical_monomial(ops, n: int) -> Monomial:
    """Canonical form of a product of (party, letter) projector factors.

    Cross-party factors commute and are sorted by party; within a party
    the original order is preserved and equal neighbours collapse.
    """
    words = [[] for _ in range(n)]
    for party, letter in ops:
        if not 0 <= party < n:
            raise ValidationError(f"party {party} out of range for n={n}")
        words[party].append(letter)
    return tuple(reduce_word(w) for w in words)


def identity_monomial(n: int) -> Monomial:
    return ((),) * n


def dagger(m: Monomial) -> Monomial:
    return tuple(w[::-1] for w in m)


def mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(reduce_word(wa + wb) for wa, wb in zip(a, b))


def degree(m: Monomial) -> int:
    return sum(len(w) for w in m)


def monomial_str(m: Monomial) -> str:
    parts = [f"p{i + 1}:" + "".join(LETTERS[x] for x in w)
             for i, w in enumerate(m) if w]
    return ".".join(parts) if parts else "1"


def monomial_from_str(s: str, n: int) -> Monomial:
    if s == "1":
        return identity_monomial(n)
    words = [()] * n
    for part in s.split("."):
        head, _, body = part.partition(":")
        party = int(head[1:]) - 1
        if not 0 <= party < n:
            raise ValidationError(f"party token {head!r} out of range")
        words[party] = reduce_word(LETTERS.index(ch) for ch in body)
    return tuple(words)


def _sort_key(m: Monomial):
    return (degree(m), m)


def _party_words(max_len: int) -> list[Word]:
    """All reduced words of one party up to ``max_len`` letters."""
    words: list[Word] = [()]
    for length in range(1, max_len + 1):
        for first in (0, 1):
            words.append(tuple((first + k) % 2 for k in range(length)))
    return words


def monomial_list(scenario: Scenario, level: int) -> list[Monomial]:
    """Canonical monomials of total degree <= level, deterministically ordered."""
    if level < 1:
        raise ValidationError(f"level must be >= 1, got {level}")
    n = scenario.n
    per_party = _party_words(level)
    out = []
    for combo in product(per_party, repeat=n):
        if sum(len(w) for w in combo) <= level:
            out.append(tuple(combo))
    out.sort(key=_sort_key)
    if len(out) > MAX_BASIS:
        raise SizeError(f"basis would hold {len(out)} monomials (cap {MAX_BASIS})")
    return out


@dataclass
class MomentProblem:
    """Moment-matrix SDP instance for the noisy Hardy maximisation."""

    scenario: Scenario
    level: int
    epsilon: float
    basis: list
    moment_index: dict
    variables: list
    cell_var: np.ndarray
    objective: dict
    equalities: list
    inequalities: list

    @property
    def n_basis(self) -> int:
        return len(self.basis)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def identity_var(self) -> int:
        return self.moment_index[identity_monomial(self.scenario.n)]


def _variable_key(m: Monomial) -> Monomial:
    d = dagger(m)
    return m if _sort_key(m) <= _sort_key(d) else d


def hardy_constraint_terms(n: int) -> list[dict]:
    """The n+1 noisy Hardy constraints as {monomial: coefficient} maps.

    The cyclic pair terms are single cross-party moments; the all-minus
    term expands each (1 - D_i) factor, e.g. for three parties
    1 - sum m(D_i) + sum m(D_i D_j) - m(D_1 D_2 D_3).
    """
    terms = []
    for i in range(n):
        j = (i + 1) % n
        mono = canonical_monomial([(i, 1), (j, 0)], n)
        terms.append({mono: 1.0})
    allminus: dict = {}
    for subset in product((0, 1), repeat=n):
        mono = canonical_monomial([(i, 1) for i in range(n) if subset[i]], n)
        sign = (-1.0) ** sum(subset)
        allminus[mono] = allminus.get(mono, 0.0) + sign
    terms.append(allminus)
    return terms


def build_moment_problem(scenario: Scenario, level: int, epsilon: float) -> MomentProblem:
    """Assemble the level-``level`` relaxation of the noisy Hardy problem."""
    if epsilon < 0:
        raise ValidationError(f"epsilon = {epsilon!r} must be nonnegative")
    n = scenario.n
    basis = monomial_list(scenario, level)
    nb = len(basis)
    daggers = [dagger(b) for b in basis]

    moment_index: dict = {}
    variables: list = []
    cell_var = np.empty((nb, nb), dtype=np.int32)
    for i in range(nb):
        for j in range(nb):
            key = _variable_key(mul(daggers[i], basis[j]))
            var = moment_index.get(key)
            if var is None:
                var = len(variables)
                moment_index[key] = var
                variables.append(key)
            cell_var[i, j] = var

    def lookup(mono: Monomial) -> int:
        var = moment_index.get(_variable_key(mono))
        if var is None:
            raise CapabilityError(
                f"moment {monomial_str(mono)} is not expressible at level {level}")
        return var

    objective = {lookup(canonical_monomial([(i, 0) for i in range(n)], n)): 1.0}
    equalities = [({lookup(identity_monomial(n)): 1.0}, 1.0)]
    inequalities = []
    for term in hardy_constraint_terms(n):
        row: dict = {}
        for mono, coef in term.items():
            var = lookup(mono)
            row[var] = row.get(var, 0.0) + coef
        inequalities.append((row, float(epsilon)))
    return MomentProblem(scenario=scenario, level=level, epsilon=float(epsilon),
                         basis=basis, moment_index=moment_index,
                         variables=variables, cell_var=cell_var,
                         objective=objective, equalities=equalities,
                         inequalities=inequalities)


def _word_operator(word: Word, pair) -> np.ndarray:
    """Matrix product of the '+' projectors along a one-party word."""
    proj_u = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    proj_d = np.outer(pair.ket_plus, pair.ket_plus.conj())
    out = np.eye(2, dtype=complex)
    for letter in word:
        out = out @ (proj_u if letter == 0 else proj_d)
    return out


def quantum_moment_vector(problem: MomentProblem, psi, pairs) -> np.ndarray:
    """Moments <psi| W |psi> of a qubit realization, per problem variable."""
    n = problem.scenario.n
    tensor = psi.tensor()
    moments = np.empty(problem.n_vars)
    for idx, mono in enumerate(problem.variables):
        t = tensor
        for party, word in enumerate(mono):
            if not word:
                continue
            op = _word_operator(word, pairs[party])
            t = np.tensordot(op, t, axes=([1], [party]))
            t = np.moveaxis(t, 0, party)
        moments[idx] = float(np.vdot(tensor, t).real)
    return moments


def mixed_moment_vector(problem: MomentProblem, pairs) -> np.ndarray:
    """Moments of the maximally mixed state: products of Tr(W_p)/2."""
    moments = np.empty(problem.n_vars)
    for idx, mono in enumerate(problem.variables):
        val = 1.0
        for party, word in enumerate(mono):
            if word:
                val *= float(np.trace(_word_operator(word, pairs[party])).real) / 2.0
        moments[idx] = val
    return moments


# Deterministic spread of |alpha|^2 values whose word relations differ, so
# the averaged mixed-state moment matrix is strictly positive definite.
_INTERIOR_ALPHA_SQ = (0.17, 0.29, 0.41, 0.52, 0.64, 0.77, 0.88)


def interior_moment_vector(problem: MomentProblem) -> np.ndarray:
    """Strictly interior moment vector: angle-averaged mixed-state moments.

    Averaging realizations with different measurement angles is itself a
    realization on the direct sum, so the point is feasible; distinct
    angles break every fixed-angle word relation, so the moment matrix is
    strictly positive definite.  The Hardy constraint values are angle
    independent (each cyclic term 1/4, the all-minus term 2^-n).
    """
    from .states import MeasurementPair

    n = problem.scenario.n
    total = np.zeros(problem.n_vars)
    k = len(_INTERIOR_ALPHA_SQ)
    for cfg in range(k):
        pairs = [MeasurementPair.from_alpha_sq(_INTERIOR_ALPHA_SQ[(cfg + p) % k])
                 for p in range(n)]
        total += mixed_moment_vector(problem, pairs)
    return total / k


def hardy_moment_vector(problem: MomentProblem) -> np.ndarray:
    """Moments of the optimal n-qubit Hardy realization (exact Hardy point)."""
    from .states import MeasurementPair, hardy_state, pmax

    n = problem.scenario.n
    pairs = [MeasurementPair.from_alpha_sq(pmax(n).t)] * n
    return quantum_moment_vector(problem, hardy_state(n, pairs), pairs)


def npa_upper_bound(scenario: Scenario, level: int, epsilon: float,
                    tol: float = 1e-6, max_iter: int | None = None,
                    **solver_kwargs) -> float:
    """Converged moment-relaxation value; an upper bound on the quantum
    noisy Hardy probability at the given hierarchy level.

    The barrier start blends the exact Hardy-point moments with the
    angle-averaged interior point; the blend weight keeps the error
    constraints strictly slack.  Raises NumericError when the optimiser
    does not reach its residual targets.
    """
    from .sdp import DEFAULT_MAX_ITER, DEFAULT_SHIFT, sdp_solve

    problem = build_moment_problem(scenario, level, epsilon)
    shift = solver_kwargs.pop("slack_shift", DEFAULT_SHIFT)
    lam = min(0.9, 2.0 * (epsilon + shift))
    start = ((1.0 - lam) * hardy_moment_vector(problem)
             + lam * interior_moment_vector(problem))
    sol = sdp_solve(problem, tol=tol,
                    max_iter=DEFAULT_MAX_ITER if max_iter is None else max_iter,
                    start=start, slack_shift=shift, **solver_kwargs)
    if not sol.converged:
        raise NumericError(
            f"moment SDP did not converge after {sol.iterations} iterations "
            f"(psd_residual={sol.psd_residual:.3e}, "
            f"affine_residual={sol.affine_residual:.3e})")
    return sol.value


def problem_to_text(p: MomentProblem) -> str:
    """Plain-text serialisation (documented, versioned) for debugging."""
    lines = ["momentproblem/1",
             f"scenario n={p.scenario.n} level={p.level} epsilon={p.epsilon!r}",
             f"basis {p.n_basis}"]
    lines += [monomial_str(b) for b in p.basis]
    lines.append(f"variables {p.n_vars}")
    lines += [monomial_str(v) for v in p.variables]
    lines.append("matrix")
    for i in range(p.n_basis):
        lines.append(" ".join(str(int(v)) for v in p.cell_var[i]))
    lines.append(f"objective {len(p.objective)}")
    lines += [f"{k} {v!r}" for k, v in sorted(p.objective.items())]
    lines.append(f"equalities {len(p.equalities)}")
    for row, rhs in p.equalities:
        body = " ".join(f"{k}:{v!r}" for k, v in sorted(row.items()))
        lines.append(f"{rhs!r} | {body}")
    lines.append(f"inequalities {len(p.inequalities)}")
    for row, rhs in p.inequalities:
        body = " ".join(f"{k}:{v!r}" for k, v in sorted(row.items()))
        lines.append(f"{rhs!r} | {body}")
    return "\n".join(lines) + "\n"


def problem_from_text(text: str) -> MomentProblem:
    lines = text.strip().split("\n")
    if lines[0] != "momentproblem/1":
        raise ValidationError(f"unknown format header {lines[0]!r}")
    meta = dict(tok.split("=") for tok in lines[1].split()[1:])
    n = int(meta["n"])
    level = int(meta["level"])
    epsilon = float(meta["epsilon"])
    pos = 2
    nb = int(lines[pos].split()[1]); pos += 1
    basis = [monomial_from_str(lines[pos + k], n) for k in range(nb)]
    pos += nb
    nv = int(lines[pos].split()[1]); pos += 1
    variables = [monomial_from_str(lines[pos + k], n) for k in range(nv)]
    pos += nv
    if lines[pos] != "matrix":
        raise ValidationError("expected matrix section")
    pos += 1
    cell_var = np.array([[int(t) for t in lines[pos + k].split()] for k in range(nb)],
                        dtype=np.int32)
    pos += nb

    def parse_rows(count):
        nonlocal pos
        rows = []
        for _ in range(count):
            rhs_s, _, body = lines[pos].partition(" | ")
            row = {}
            if body:
                for tok in body.split():
                    k, v = tok.split(":")
                    row[int(k)] = float(v)
            rows.append((row, float(rhs_s)))
            pos += 1
        return rows

    no = int(lines[pos].split()[1]); pos += 1
    objective = {}
    for _ in range(no):
        k, v = lines[pos].split()
        objective[int(k)] = float(v)
        pos += 1
    ne = int(lines[pos].split()[1]); pos += 1
    equalities = parse_rows(ne)
    ni = int(lines[pos].split()[1]); pos += 1
    inequalities = parse_rows(ni)
    return MomentProblem(scenario=Scenario(n), level=level, epsilon=epsilon,
                         basis=basis,
                         moment_index={v: i for i, v in enumerate(variables)},
                         variables=variables, cell_var=cell_var,
                         objective=objective, equalities=equalities,
                         inequalities=inequalities)
