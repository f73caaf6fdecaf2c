"""Shared fixtures and the central finite-difference gradient oracle."""

import numpy as np
import pytest

import strategyseq as S


def fd_gradient(loss_fn, param, eps=1e-6):
    """Central finite differences of a scalar function w.r.t. one tensor.

    ``loss_fn`` must recompute the forward value from current tensor data;
    the perturbation happens in place and is always restored.
    """
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = loss_fn()
        flat[i] = orig - eps
        down = loss_fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return grad


def max_rel_error(analytic, numeric, clamp=1e-8):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), clamp)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(build_loss, params, tol=1e-4, eps=1e-6):
    """Backward pass vs. finite differences for every tensor in ``params``.

    ``build_loss()`` runs a fresh forward pass and returns the scalar loss
    tensor; it is re-invoked (without a tape) for each perturbation.
    """
    from strategyseq.autodiff import Tape, backward

    for p in params:
        p.zero_grad()
    with Tape():
        loss = build_loss()
        backward(loss)
    worst = 0.0
    for p in params:
        assert p.grad is not None, "parameter missing gradient"
        numeric = fd_gradient(lambda: build_loss().item(), p, eps=eps)
        worst = max(worst, max_rel_error(p.grad, numeric))
    assert worst < tol, f"gradient mismatch: max relative error {worst:.3e} >= {tol}"
    return worst


@pytest.fixture
def sample():
    """(corpus, er_vocab, ee_vocab) for the bundled 16-utterance dialogue."""
    return S.sample_corpus()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
