import numpy as np
import pytest
import sympy as sym

from dgrom.config import RunConfig
from dgrom.workflow import setup

X, Y = sym.symbols("x y")


@pytest.fixture(scope="session")
def cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def prob(cfg):
    """Reference problem at the default refinement (k = 2)."""
    return setup(cfg)


@pytest.fixture(scope="session")
def coarse(cfg):
    """Same problem one refinement level down, for cheaper structural checks."""
    return setup(cfg.replace(refinement=1))


def random_poly(rng, degree):
    """Sympy polynomial in x, y with small integer coefficients."""
    return sum(int(rng.integers(-3, 4)) * X**a * Y**b for a in range(degree + 1) for b in range(degree + 1 - a))


def as_vector_func(exprs):
    fs = [sym.lambdify((X, Y), e, "numpy") for e in exprs]

    def f(p):
        p = np.asarray(p, dtype=float)
        return np.stack([np.broadcast_to(g(p[..., 0], p[..., 1]), p.shape[:-1]) for g in fs], axis=-1)

    return f


def as_scalar_func(expr):
    g = sym.lambdify((X, Y), expr, "numpy")
    return lambda p: np.broadcast_to(g(np.asarray(p)[..., 0], np.asarray(p)[..., 1]), np.asarray(p).shape[:-1])


def triangle_integral(expr, tri):
    """Exact integral of a sympy expression over a triangle."""
    (x0, y0), (x1, y1), (x2, y2) = [[sym.Rational(str(c)) for c in v] for v in tri]
    s, t = sym.symbols("s t")
    jac = abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
    sub = expr.subs({X: x0 + s * (x1 - x0) + t * (x2 - x0), Y: y0 + s * (y1 - y0) + t * (y2 - y0)}, simultaneous=True)
    return float(sym.integrate(sym.integrate(sub * jac, (t, 0, 1 - s)), (s, 0, 1)))


def segment_integral(expr_of_normal, a, b):
    """Exact ``int_a^b f ds`` where ``expr_of_normal(nx, ny)`` builds the integrand."""
    a = [sym.Rational(str(c)) for c in a]
    b = [sym.Rational(str(c)) for c in b]
    t = sym.symbols("t")
    dx, dy = b[0] - a[0], b[1] - a[1]
    length = sym.sqrt(dx**2 + dy**2)
    nx, ny = dy / length, -dx / length
    e = expr_of_normal(nx, ny).subs({X: a[0] + t * dx, Y: a[1] + t * dy}, simultaneous=True)
    return float(sym.integrate(e * length, (t, 0, 1)))
