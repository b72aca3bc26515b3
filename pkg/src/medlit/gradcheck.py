"""Finite-difference suites for the three hand-derived gradients."""

import numpy as np

from .classifier import gradient_check_logistic
from .embeddings import skipgram_gradient_check
from .tagger import LABELS, gradient_check, init_params


def random_tagger_instance(seed, max_dim=5, max_hidden=6, max_len=5):
    """Small BLSTM, embedded sentence and gold labels drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    D = int(rng.integers(1, max_dim + 1))
    H = int(rng.integers(1, max_hidden + 1))
    n = int(rng.integers(1, max_len + 1))
    params = init_params(int(rng.integers(2**31)), D, H)
    for arr in params.tensors().values():
        arr += rng.normal(0.0, 0.3, size=arr.shape)
    x = rng.normal(0.0, 1.0, size=(n, D))
    gold = [LABELS[i] for i in rng.integers(0, 2, size=n)]
    return params, x, gold


def tagger_suite(n_seeds=20, eps=1e-5, tolerance=1e-4):
    """Run the BLSTM check on ``n_seeds`` random instances; returns the list of reports."""
    return [gradient_check(*random_tagger_instance(seed), eps=eps, tolerance=tolerance)
            for seed in range(n_seeds)]


def skipgram_check(seed=0, eps=1e-5, tolerance=1e-4):
    """3-word vocabulary, D=2, both matrices random."""
    rng = np.random.default_rng(seed)
    W_in = rng.normal(0.0, 0.5, size=(3, 2))
    W_out = rng.normal(0.0, 0.5, size=(3, 2))
    return skipgram_gradient_check(W_in, W_out, center=0, context=1, negatives=[2, 1, 2],
                                   eps=eps, tolerance=tolerance)


def logistic_check(seed=0, n=10, n_features=3, l2_lambda=1e-3, eps=1e-6, tolerance=1e-6):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(n, n_features))
    y = rng.integers(0, 2, size=n)
    w = rng.normal(size=n_features)
    return gradient_check_logistic(w, float(rng.normal()), Z, y, l2_lambda=l2_lambda,
                                   eps=eps, tolerance=tolerance)
