"""Quadrature on the reference triangle {x, y >= 0, x + y <= 1} and on [0, 1]."""
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


# Dunavant degree-5 rule, weights normalised to the reference area 1/2
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_W0, _W1, _W2 = 0.225, 0.132394152788506, 0.125939180544827
DUNAVANT5 = QuadratureRule(
    points=np.array([
        [1 / 3, 1 / 3],
        [_A1, _B1], [_B1, _A1], [_B1, _B1],
        [_A2, _B2], [_B2, _A2], [_B2, _B2],
    ]),
    weights=0.5 * np.array([_W0, _W1, _W1, _W1, _W2, _W2, _W2]),
    degree=5,
)


def collapsed_gauss(degree: int) -> QuadratureRule:
    """Tensor Gauss rule mapped onto the triangle by the Duffy collapse."""
    n = max(1, (degree + 2) // 2 + (degree % 2))
    x, w = leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    px = u * (1.0 - v)
    py = v
    weights = wu * wv * (1.0 - v)
    return QuadratureRule(np.column_stack([px.ravel(), py.ravel()]), weights.ravel(), degree)


def triangle_rule(degree: int) -> QuadratureRule:
    if degree <= 5:
        return DUNAVANT5
    return collapsed_gauss(degree)


def gauss_interval(n_points: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1]."""
    x, w = leggauss(n_points)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, 2 * n_points - 1)
