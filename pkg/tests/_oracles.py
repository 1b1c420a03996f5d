"""Brute-force reference implementations shared by several test modules."""
import itertools
import math

import numpy as np

from gmgini.gini import _pair_coefficients


def naive_gini(x):
    x = np.asarray(x, dtype=float)
    n = x.size
    total = math.fsum(abs(a - b) for a, b in itertools.combinations(x.tolist(), 2))
    return total / ((n - 1) * math.fsum(x))


def naive_expectation(params, n):
    """E[G_hat] by full enumeration of label sequences (m**(n-2) and m**(n-1) terms)."""
    w, a = params.weights, params.shapes
    m = params.m
    mass = math.fsum(w * a)
    coef = _pair_coefficients(params)
    first = []
    for seq in itertools.product(range(m), repeat=n - 2):
        weight = math.prod(w[k] for k in seq)
        s = math.fsum(a[k] for k in seq)
        for i in range(m):
            for j in range(m):
                first.append(coef[i, j] * weight * n * mass / (s + a[i] + a[j]))
    second = []
    for seq in itertools.product(range(m), repeat=n - 1):
        weight = math.prod(w[k] for k in seq)
        s = math.fsum(a[k] for k in seq)
        for j in range(m):
            second.append(weight * n * w[j] * a[j] / (s + a[j]))
    return math.fsum(first) - math.fsum(second)


def pairwise_gini(x):
    """O(n^2) Gini from the full matrix of absolute differences."""
    x = np.asarray(x, dtype=float)
    n = x.size
    return np.abs(x[:, None] - x[None, :]).sum() / (2.0 * (n - 1) * x.sum())
