"""Linear-chain CRF over per-position label spaces that differ by speaker.

Positions carry a role (0 = persuader, 1 = persuadee) and a score vector
over that role's labels.  Transitions between adjacent positions are read
from one of four matrices selected by the (previous role, next role) pair,
so the chain can change label space mid-sequence.  A single-role sequence
with one matrix is the ordinary linear-chain special case.

Scores are log-potentials throughout: a labeling's score is the sum of its
emission entries plus its pairwise transition entries, position 0
contributing emission only (no start/stop potentials).  The forward pass,
NLL and Viterbi all share that convention, so ``exp(score - log_partition)``
is the labeling's probability.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Module, Tensor
from .autodiff import ops as _ops


class TransitionTable(Module):
    """Four learnable matrices keyed by (prev_role, next_role).

    Sizes follow the two vocabularies: (n[r], n[s]) for pair (r, s).
    Zero initialization makes the untrained CRF equivalent to a
    per-position softmax, which eases comparison with CRF-free heads.
    """

    def __init__(self, n_er, n_ee):
        self.sizes = (n_er, n_ee)
        self.t00 = Tensor(np.zeros((n_er, n_er)), requires_grad=True)
        self.t01 = Tensor(np.zeros((n_er, n_ee)), requires_grad=True)
        self.t10 = Tensor(np.zeros((n_ee, n_er)), requires_grad=True)
        self.t11 = Tensor(np.zeros((n_ee, n_ee)), requires_grad=True)

    def matrix(self, prev_role, next_role):
        return (
            (self.t00, self.t01),
            (self.t10, self.t11),
        )[prev_role][next_role]


class SingleTable(Module):
    """One matrix for single-role chains; same interface as TransitionTable."""

    def __init__(self, n_labels):
        self.sizes = (n_labels, n_labels)
        self.t = Tensor(np.zeros((n_labels, n_labels)), requires_grad=True)

    def matrix(self, prev_role, next_role):
        return self.t


def _check_instance(emissions, roles, table):
    if len(emissions) == 0:
        raise ValueError("CRF instance must have at least one position")
    if len(emissions) != len(roles):
        raise ValueError("emissions and roles differ in length")
    for j, (e, r) in enumerate(zip(emissions, roles)):
        expected = table.matrix(r, r).shape[0]
        if e.shape != (1, expected):
            raise ValueError(
                f"position {j}: emission shape {e.shape} does not match "
                f"role {r} vocabulary size {expected}"
            )


def sequence_score(emissions, roles, labels, table):
    """Log-potential of one labeling: emissions plus pairwise transitions."""
    _check_instance(emissions, roles, table)
    if len(labels) != len(emissions):
        raise ValueError("labels and emissions differ in length")
    for j, (y, r) in enumerate(zip(labels, roles)):
        if not 0 <= y < emissions[j].shape[1]:
            raise ValueError(f"position {j}: label {y} out of range for role {r}")
    score = _ops.pick(emissions[0], 0, labels[0])
    for j in range(1, len(emissions)):
        trans = table.matrix(roles[j - 1], roles[j])
        score = score + _ops.pick(trans, labels[j - 1], labels[j])
        score = score + _ops.pick(emissions[j], 0, labels[j])
    return score


def log_partition(emissions, roles, table):
    """Forward algorithm in log space; alpha changes width at role changes."""
    _check_instance(emissions, roles, table)
    alpha = emissions[0]
    for j in range(1, len(emissions)):
        trans = table.matrix(roles[j - 1], roles[j])
        alpha = _ops.logsumexp(alpha.T + trans, axis=0) + emissions[j]
    return _ops.reshape(_ops.logsumexp(alpha, axis=1), ())


def nll(emissions, roles, labels, table):
    """log Z minus the gold score; differentiable in emissions and table."""
    if labels is None:
        raise ValueError("CRF NLL requires gold labels")
    return log_partition(emissions, roles, table) - sequence_score(
        emissions, roles, labels, table
    )


def viterbi_decode(emissions, roles, table):
    """Most likely labeling; ties break toward the lowest label index.

    Pure numpy — inputs may be Tensors or arrays; no gradients involved.
    """
    rows = [e.data if isinstance(e, Tensor) else np.asarray(e) for e in emissions]
    if len(rows) == 0:
        raise ValueError("CRF instance must have at least one position")
    alpha = rows[0].reshape(-1)
    backptr = []
    for j in range(1, len(rows)):
        trans = table.matrix(roles[j - 1], roles[j])
        trans = trans.data if isinstance(trans, Tensor) else np.asarray(trans)
        cand = alpha[:, None] + trans
        best_prev = cand.argmax(axis=0)
        alpha = cand[best_prev, np.arange(cand.shape[1])] + rows[j].reshape(-1)
        backptr.append(best_prev)
    path = [int(alpha.argmax())]
    for best_prev in reversed(backptr):
        path.append(int(best_prev[path[-1]]))
    return path[::-1]


class RolePairCRF(Module):
    """CRF head over mixed-role sequences with four transition matrices."""

    def __init__(self, n_er, n_ee):
        self.table = TransitionTable(n_er, n_ee)

    def nll(self, emissions, roles, labels):
        return nll(emissions, roles, labels, self.table)

    def decode(self, emissions, roles):
        return viterbi_decode(emissions, roles, self.table)


class ChainCRF(Module):
    """Single-role CRF used for the auxiliary per-speaker losses."""

    def __init__(self, n_labels):
        self.n_labels = n_labels
        self.table = SingleTable(n_labels)

    def _check_single_role(self, roles):
        if len(set(roles)) > 1:
            raise ValueError("single-table CRF expects one role per instance")

    def nll(self, emissions, roles, labels):
        self._check_single_role(roles)
        return nll(emissions, roles, labels, self.table)

    def decode(self, emissions, roles):
        self._check_single_role(roles)
        return viterbi_decode(emissions, roles, self.table)
