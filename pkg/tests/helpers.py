"""Shared spaces and samplers for the test-suite."""

import numpy as np

from finsler_hmx.fields import Poly
from finsler_hmx.finsler import euclidean, randers, riemannian_diag, root_metric
from finsler_hmx.jets import PointDirection


def P(n, *terms):
    """Poly from (coef, exponents) pairs; a bare number is a constant."""
    if len(terms) == 1 and isinstance(terms[0], (int, float)):
        return Poly.const(float(terms[0]), n)
    return Poly(tuple((float(c), tuple(e)) for c, e in terms))


def setup_randers(n=3):
    a = [[P(n, 0.0) for _ in range(n)] for _ in range(n)]
    a[0][0] = P(n, (1.0, (0,) * n), (0.1, (1,) + (0,) * (n - 1)))
    for i in range(1, n):
        a[i][i] = P(n, 1.0)
    a[0][1] = a[1][0] = P(n, (0.05, (0, 1) + (0,) * (n - 2)))
    c = [P(n, 0.1), P(n, (0.05, (1,) + (0,) * (n - 1)))] + [P(n, 0.02)] * (n - 2)
    return randers(a, c)


def setup_riemannian(n=3):
    diag = [P(n, (1.0, (0,) * n), (0.2, (1,) + (0,) * (n - 1)))] + [P(n, 1.0)] * (n - 1)
    diag[-1] = P(n, (1.0, (0,) * n), (0.1, (0,) * (n - 2) + (1, 0)))
    return riemannian_diag(diag)


def setup_root(n=3):
    """(a(x) |y|^4 + 0.2 y1^4)^(1/4): a strongly convex quartic metric."""
    terms = []
    a = P(n, (1.0, (0,) * n), (0.1, (1,) + (0,) * (n - 1)))
    for i in range(n):
        e = [0] * n
        e[i] = 4
        terms.append((a, tuple(e)))
        for j in range(i + 1, n):
            e = [0] * n
            e[i] = e[j] = 2
            terms.append((P(n, (2.0, (0,) * n), (0.2, (1,) + (0,) * (n - 1))), tuple(e)))
    terms.append((P(n, 0.2), (4,) + (0,) * (n - 1)))
    return root_metric(n, 4, terms)


def all_spaces(n=3):
    return {
        "euclidean": euclidean(n),
        "randers": setup_randers(n),
        "riemannian": setup_riemannian(n),
        "root": setup_root(n),
    }


def random_points(n, count, seed, box=0.5):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        y = rng.uniform(-1, 1, n)
        if np.linalg.norm(y) < 0.3:
            continue
        out.append(PointDirection(rng.uniform(-box, box, n), y))
    return out
