"""Grids, spectral representations and Sobolev-type norms on I = (0, 1).

Fields are stored as *series* objects: anything that is callable on an array
of points and has a ``deriv(m)`` method.  Three kinds are used throughout:
:class:`numpy.polynomial.Chebyshev` on the domain ``[0, 1]`` (the workhorse),
:class:`TrigSeries` for sine/cosine expansions, and :class:`PiecewiseSeries`
for fields with a kink at ``x = 1/2`` (anything multiplied or divided by the
distance function).  :class:`ClosedFormSeries` wraps user supplied
derivatives and declares a finite derivative order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial import Chebyshev, legendre
from scipy.fft import dct, dst
from scipy.special import zeta

from .errors import (
    InsufficientSmoothness,
    NonpositiveWeight,
    NotInH10,
    QuadratureDegreeInsufficient,
)

log = logging.getLogger(__name__)

UNIT = (0.0, 1.0)
SQRT2 = math.sqrt(2.0)

# below this distance the Hardy quotient switches to the integral form
HARDY_SWITCH = 10.0 * math.sqrt(np.finfo(float).eps)

# sample count of the odd-extension sine transform used by fractional norms
DST_POINTS = 4096


# {{{ Chebyshev helpers


def chop(series, tol=1e-15):
    """Drop trailing Chebyshev coefficients below ``tol`` relative to the largest."""
    c = np.asarray(series.coef, dtype=float)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return Chebyshev([0.0], domain=series.domain)
    keep = np.nonzero(np.abs(c) > tol * scale)[0]
    return Chebyshev(c[: keep[-1] + 1], domain=series.domain)


def _chebyshev_fit(func, deg, domain):
    """Interpolant at the ``deg + 1`` first-kind Chebyshev points (via a DCT)."""
    n = deg + 1
    theta = np.pi * (np.arange(n) + 0.5) / n
    lo, hi = domain
    x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(theta)
    coef = dct(np.asarray(func(x), dtype=float), type=2) / n
    coef[0] *= 0.5
    return Chebyshev(coef, domain=list(domain))


def interpolate(func, domain=UNIT, tol=1e-14, max_degree=4096, min_degree=16):
    """Adaptive Chebyshev interpolant of a vectorized callable.

    The degree is doubled until the trailing block of coefficients falls below
    ``tol`` relative to the largest one.  Interpolation points are of the
    first kind, so ``func`` is never evaluated at the ends of ``domain``.
    """
    deg = min_degree
    while True:
        p = _chebyshev_fit(func, deg, domain)
        c = np.abs(p.coef)
        scale = c.max()
        if scale == 0.0:
            return Chebyshev([0.0], domain=list(domain))
        tail = c[-max(4, deg // 8):].max()
        if tail <= tol * scale:
            return chop(p, tol)
        if deg >= max_degree:
            log.debug("interpolation stopped at degree %d, tail %.2e", deg, tail / scale)
            return p
        deg *= 2


def as_chebyshev(series, tol=1e-14):
    if isinstance(series, Chebyshev):
        return series
    return interpolate(series, tol=tol)


@lru_cache(maxsize=None)
def lobatto_nodes(n):
    """The ``n + 1`` Chebyshev-Lobatto points mapped to [0, 1], ascending."""
    return 0.5 * (1.0 - np.cos(np.pi * np.arange(n + 1) / n))


@lru_cache(maxsize=None)
def _lobatto_to_coef(n):
    y = 2.0 * lobatto_nodes(n) - 1.0
    return np.linalg.inv(np.polynomial.chebyshev.chebvander(y, n))


def chebyshev_from_lobatto(values):
    """Chebyshev series on [0, 1] interpolating values at :func:`lobatto_nodes`."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1] - 1
    return Chebyshev(_lobatto_to_coef(n) @ values, domain=list(UNIT))


def lobatto_interpolation_matrix(n, x):
    """Matrix mapping Lobatto nodal values to values of the interpolant at ``x``."""
    y = 2.0 * np.asarray(x, dtype=float) - 1.0
    return np.polynomial.chebyshev.chebvander(y, n) @ _lobatto_to_coef(n)


@lru_cache(maxsize=None)
def lobatto_differentiation_matrix(n):
    """Spectral differentiation matrix d/dx on the Lobatto nodes of [0, 1]."""
    y = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.hstack([2.0, np.ones(n - 1), 2.0]) * (-1.0) ** np.arange(n + 1)
    dy = y[:, None] - y[None, :]
    D = np.outer(c, 1.0 / c) / (dy + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    # reverse to ascending order and map [-1, 1] -> [0, 1]
    return 2.0 * D[::-1, ::-1]


# }}}


# {{{ series types


class TrigSeries:
    """``sum_k c_k sqrt(2) sin(k pi x)`` (or the cosine analogue), k = 1..n."""

    def __init__(self, coef, kind="sin"):
        if kind not in ("sin", "cos"):
            raise ValueError(f"unknown kind: {kind!r}")
        self.coef = np.asarray(coef, dtype=float)
        self.kind = kind

    @property
    def wavenumbers(self):
        return np.pi * np.arange(1, self.coef.size + 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        arg = np.multiply.outer(x, self.wavenumbers)
        trig = np.sin if self.kind == "sin" else np.cos
        return SQRT2 * (trig(arg) @ self.coef)

    def deriv(self, m=1):
        coef, kind = self.coef, self.kind
        for _ in range(m):
            if kind == "sin":
                coef, kind = coef * self.wavenumbers, "cos"
            else:
                coef, kind = -coef * self.wavenumbers, "sin"
        return TrigSeries(coef, kind)


class PiecewiseSeries:
    """Series defined piece by piece between ``breaks``."""

    def __init__(self, breaks, pieces):
        self.breaks = np.asarray(breaks, dtype=float)
        self.pieces = list(pieces)
        if len(self.pieces) != self.breaks.size - 1:
            raise ValueError("need one piece per interval")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty(x.shape, dtype=float)
        for i, piece in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = piece(x[mask])
        return out

    def deriv(self, m=1):
        return PiecewiseSeries(self.breaks, [p.deriv(m) for p in self.pieces])


class ClosedFormSeries:
    """A function given through callables for itself and its first derivatives."""

    def __init__(self, funcs):
        self.funcs = tuple(funcs)

    @property
    def max_order(self):
        return len(self.funcs) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.funcs[0](x), x.shape).astype(float)

    def deriv(self, m=1):
        if m > self.max_order:
            raise InsufficientSmoothness(
                f"derivative of order {m} requested, only {self.max_order} available"
            )
        return ClosedFormSeries(self.funcs[m:])


# }}}


# {{{ grid


@dataclass(frozen=True, eq=False)
class Grid:
    """Composite Gauss-Legendre rule on (0, 1).

    Panels are uniform in the interior and refined geometrically toward both
    endpoints; ``x = 1/2`` is always a panel break so that fields with a kink
    there (``d(x) = min(x, 1 - x)``) are integrated panel-wise smoothly.
    """

    edges: np.ndarray
    order: int
    n_base_panels: int
    nodes: np.ndarray = field(init=False, repr=False)
    quad_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        xg, wg = legendre.leggauss(self.order)
        a, b = self.edges[:-1, None], self.edges[1:, None]
        nodes = (0.5 * (a + b) + 0.5 * (b - a) * xg).ravel()
        weights = (0.5 * (b - a) * wg).ravel()
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "quad_weights", weights)

    @property
    def n_points(self):
        return self.nodes.size

    @property
    def interior_margin(self):
        return float(min(self.nodes[0], 1.0 - self.nodes[-1]))

    @property
    def degree(self):
        """Largest sine-product frequency integrated to round-off.

        Products ``e_i e_j`` with ``i + j <= degree`` are resolved, so a basis
        of ``n`` modes needs ``degree >= 2 n``.
        """
        return int(self.order * self.n_base_panels // 2)

    def integrate(self, values):
        return float(np.dot(self.quad_weights, values))

    def refined(self):
        """The same construction with twice as many base panels."""
        levels = len(self.edges) - 1 - self.n_base_panels
        return make_grid(2 * self.n_base_panels, self.order, grading_levels=levels // 2)


def make_grid(n_panels=32, order=16, grading_levels=3, grading_ratio=0.5):
    if n_panels < 2 or n_panels % 2:
        raise ValueError("n_panels must be an even integer >= 2")
    base = np.linspace(0.0, 1.0, n_panels + 1)
    h = base[1]
    graded = h * grading_ratio ** np.arange(grading_levels, 0, -1)
    edges = np.concatenate([[0.0], graded, base[1:-1], 1.0 - graded[::-1], [1.0]])
    return Grid(edges=edges, order=order, n_base_panels=n_panels)


@lru_cache(maxsize=None)
def default_grid():
    return make_grid()


# }}}


# {{{ fields


class ScalarField:
    """A function on I together with the grid its integrals are taken on.

    ``max_order`` is the declared number of available derivatives (``None``
    for spectral series, which can be differentiated any number of times).
    """

    def __init__(self, grid, series, *, sine_coeffs=None, max_order=None):
        self.grid = grid
        self.series = series
        self.sine_coeffs = None if sine_coeffs is None else np.asarray(sine_coeffs, dtype=float)
        if max_order is None and isinstance(series, ClosedFormSeries):
            max_order = series.max_order
        self.max_order = max_order

    # construction

    @classmethod
    def from_function(cls, func, grid=None, *, tol=1e-14, max_degree=4096):
        """Chebyshev interpolant of ``func`` (vectorized callable on [0, 1])."""
        return cls(grid or default_grid(), interpolate(func, tol=tol, max_degree=max_degree))

    @classmethod
    def from_chebyshev(cls, coef_or_series, grid=None):
        series = coef_or_series
        if not isinstance(series, Chebyshev):
            series = Chebyshev(np.asarray(series, dtype=float), domain=list(UNIT))
        return cls(grid or default_grid(), series)

    @classmethod
    def from_derivatives(cls, funcs, grid=None):
        """Field given in closed form by ``funcs = (f, f', f'', ...)``."""
        return cls(grid or default_grid(), ClosedFormSeries(funcs))

    @classmethod
    def constant(cls, value, grid=None):
        return cls.from_chebyshev([float(value)], grid)

    # evaluation

    @cached_property
    def values(self):
        return np.broadcast_to(self.series(self.grid.nodes), self.grid.nodes.shape).astype(float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.series(x), x.shape).astype(float)

    def require_order(self, order):
        if self.max_order is not None and order > self.max_order:
            raise InsufficientSmoothness(
                f"derivative of order {order} requested, field declares {self.max_order}"
            )

    def deriv(self, order=1):
        if order == 0:
            return self
        self.require_order(order)
        max_order = None if self.max_order is None else self.max_order - order
        return ScalarField(self.grid, self.series.deriv(order), max_order=max_order)

    def derivative_values(self, order):
        return self.deriv(order).values

    def endpoint_values(self):
        return float(self(0.0)), float(self(1.0))

    def to_chebyshev(self, tol=1e-14):
        return as_chebyshev(self.series, tol=tol)

    def with_grid(self, grid):
        return ScalarField(grid, self.series, sine_coeffs=self.sine_coeffs, max_order=self.max_order)

    # arithmetic (always through Chebyshev series)

    def _combine(self, other, op):
        if isinstance(other, ScalarField):
            max_order = _min_order(self.max_order, other.max_order)
            series = chop(op(self.to_chebyshev(), other.to_chebyshev()))
        else:
            max_order = self.max_order
            series = op(self.to_chebyshev(), float(other))
        return ScalarField(self.grid, series, max_order=max_order)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"ScalarField({type(self.series).__name__}, n_points={self.grid.n_points})"


def _min_order(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def distance_function(grid=None):
    """``d(x) = min(x, 1 - x)``, exactly, as a two-piece field."""
    left = Chebyshev([0.25, 0.25], domain=[0.0, 0.5])  # x
    right = Chebyshev([0.25, -0.25], domain=[0.5, 1.0])  # 1 - x
    return ScalarField(grid or default_grid(), PiecewiseSeries([0.0, 0.5, 1.0], [left, right]))


def distance_weighted(f):
    """The product ``d * f`` as a piecewise Chebyshev field."""
    cheb = f.to_chebyshev()
    pieces = []
    for lo, hi, sign in ((0.0, 0.5, 1.0), (0.5, 1.0, -1.0)):
        local = cheb.convert(domain=[lo, hi])
        dist = Chebyshev([0.25, 0.25 * sign], domain=[lo, hi])
        pieces.append(chop(local * dist))
    return ScalarField(f.grid, PiecewiseSeries([0.0, 0.5, 1.0], pieces), max_order=f.max_order)


# }}}


# {{{ sine basis


@dataclass(frozen=True, eq=False)
class SineBasis:
    """Dirichlet Laplacian eigenfunctions ``e_k = sqrt(2) sin(k pi x)``, k = 1..n."""

    n_modes: int
    grid: Grid
    orthonormality_defect: float

    @property
    def wavenumbers(self):
        return np.pi * np.arange(1, self.n_modes + 1)

    @property
    def eigenvalues(self):
        return self.wavenumbers ** 2

    def eigenvalue(self, k):
        return (k * np.pi) ** 2

    def evaluate(self, x, order=0):
        """Matrix with entries ``D^order e_k(x_j)``, shape ``(len(x), n_modes)``."""
        arg = np.multiply.outer(np.asarray(x, dtype=float), self.wavenumbers)
        phase = order % 4
        trig = (np.sin, np.cos, lambda a: -np.sin(a), lambda a: -np.cos(a))[phase]
        return SQRT2 * trig(arg) * self.wavenumbers ** order

    @cached_property
    def nodal(self):
        return self.evaluate(self.grid.nodes)

    def mode(self, k):
        coef = np.zeros(self.n_modes)
        coef[k - 1] = 1.0
        return self.synthesize(coef)

    def synthesize(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        return ScalarField(self.grid, TrigSeries(coeffs, "sin"), sine_coeffs=coeffs)

    def project(self, f):
        """L2 projection coefficients ``(f, e_k)``."""
        return self.nodal.T @ (self.grid.quad_weights * f.with_grid(self.grid).values)


def build_sine_basis(n_modes, grid=None):
    grid = grid or default_grid()
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if grid.degree < 2 * n_modes:
        raise QuadratureDegreeInsufficient(
            f"grid resolves sine products up to {grid.degree}, need {2 * n_modes}"
        )
    provisional = SineBasis(n_modes, grid, float("nan"))
    E = provisional.nodal
    gram = E.T @ (grid.quad_weights[:, None] * E)
    defect = float(np.max(np.abs(gram - np.eye(n_modes))))
    if defect > 1e-10:
        raise QuadratureDegreeInsufficient(f"orthonormality defect {defect:.3e} exceeds 1e-10")
    return SineBasis(n_modes, grid, defect)


# }}}


# {{{ norms


def _lift_norm_sq(a, b, s):
    """Interpolated H^s norm of the linear function with end values a, b."""
    l2 = (a * a + a * b + b * b) / 3.0
    h1 = l2 + (b - a) ** 2
    if s >= 1.0:
        return h1
    if l2 == 0.0:
        return 0.0
    return l2 ** (1.0 - s) * h1 ** s


def sine_coefficients(f, n_points=DST_POINTS):
    """Odd-extension sine coefficients of ``f`` minus its linear endpoint lift.

    Returns ``(a, b, c)`` with ``a = f(0)``, ``b = f(1)`` and ``c[k-1]`` the
    coefficient of ``e_k`` in ``f - ((1 - x) a + x b)`` for ``k < n_points``.
    """
    a, b = f.endpoint_values()
    x = np.arange(1, n_points) / n_points
    g = f(x) - (a * (1.0 - x) + b * x)
    return a, b, dst(g, type=1) * (SQRT2 / (2.0 * n_points))


def _tail_sum(f, s, kmax):
    """Asymptotic sum over k > kmax of (k pi)^(2 s) c_k^2.

    Two integrations by parts give ``c_k ~ -sqrt(2) (f''(0) - (-1)^k f''(1)) / (k pi)^3``.
    """
    try:
        d2 = f.deriv(2)
    except InsufficientSmoothness:
        return 0.0
    a0, a1 = d2.endpoint_values()
    p = 6.0 - 2.0 * s
    k_even = kmax + 1 if (kmax + 1) % 2 == 0 else kmax + 2
    k_odd = kmax + 1 if (kmax + 1) % 2 == 1 else kmax + 2
    s_even = 2.0 ** -p * zeta(p, k_even / 2.0)
    s_odd = 2.0 ** -p * zeta(p, k_odd / 2.0)
    total = (a0 * a0 + a1 * a1) * (s_even + s_odd) - 2.0 * a0 * a1 * (s_even - s_odd)
    return 2.0 * np.pi ** (2.0 * s - 6.0) * total


def _fractional_norm_sq(f, s):
    a, b, c = sine_coefficients(f)
    kmax = DST_POINTS // 2
    k = np.arange(1, kmax + 1)
    body = np.sum((1.0 + (k * np.pi) ** 2) ** s * c[:kmax] ** 2)
    return _lift_norm_sq(a, b, s) + body + _tail_sum(f, s, kmax)


def sobolev_norm(f, s):
    """``H^s(I)`` norm.

    Integer orders use ``(sum_{a <= s} int |D^a f|^2)^(1/2)`` on the field's
    grid.  Fractional orders split off the linear interpolant of the endpoint
    values and apply the multiplier ``(1 + k^2 pi^2)^s`` to the sine
    coefficients of the remainder.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    f.require_order(math.ceil(s))
    if float(s).is_integer():
        w = f.grid.quad_weights
        total = sum(np.dot(w, f.derivative_values(a) ** 2) for a in range(int(s) + 1))
        return math.sqrt(total)
    return math.sqrt(_fractional_norm_sq(f, float(s)))


def weighted_norm(f, weight, power=1.0):
    """``(int weight^power (|f|^2 + |Df|^2))^(1/2)``."""
    wv = weight.with_grid(f.grid).values if isinstance(weight, ScalarField) else np.asarray(weight)
    if np.any(wv <= 0.0):
        bad = int(np.argmin(wv))
        raise NonpositiveWeight(f"weight is {wv[bad]:.3e} at node x = {f.grid.nodes[bad]:.6g}")
    integrand = wv ** power * (f.values ** 2 + f.derivative_values(1) ** 2)
    return math.sqrt(f.grid.integrate(integrand))


def _gauss_mean(deriv, lo, hi, n=8):
    """Mean of ``deriv`` over [lo, hi] for arrays of intervals."""
    xg, wg = legendre.leggauss(n)
    lo, hi = np.asarray(lo)[..., None], np.asarray(hi)[..., None]
    pts = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xg
    return 0.5 * np.sum(wg * deriv(pts), axis=-1)


def hardy_quotient(u, tol=1e-8):
    """``u / d`` for ``u`` vanishing at both endpoints, as a two-piece field.

    Close to an endpoint the quotient ``u(x)/x`` is replaced by the mean of
    ``u'`` over ``[0, x]`` (and symmetrically at ``x = 1``) to avoid 0/0.
    """
    u.require_order(1)
    scale = max(1.0, float(np.max(np.abs(u.values))))
    ua, ub = u.endpoint_values()
    if abs(ua) > tol * scale or abs(ub) > tol * scale:
        raise NotInH10(f"endpoint values u(0) = {ua:.3e}, u(1) = {ub:.3e} exceed tolerance")
    max_order = None if u.max_order is None else u.max_order - 1
    if isinstance(u.series, Chebyshev):
        # exact polynomial division; the remainders are the (negligible) endpoint values
        x_lin = Chebyshev([0.5, 0.5], domain=list(UNIT))
        pieces = [chop((u.series // x_lin).convert(domain=[0.0, 0.5])),
                  chop((u.series // (1.0 - x_lin)).convert(domain=[0.5, 1.0]))]
        return ScalarField(u.grid, PiecewiseSeries([0.0, 0.5, 1.0], pieces), max_order=max_order)
    du = u.series.deriv(1)

    def left(x):
        x = np.asarray(x, dtype=float)
        small = x < HARDY_SWITCH
        out = np.empty_like(x)
        out[~small] = u(x[~small]) / x[~small]
        if np.any(small):
            out[small] = _gauss_mean(du, 0.0, x[small])
        return out

    def right(x):
        x = np.asarray(x, dtype=float)
        r = 1.0 - x
        small = r < HARDY_SWITCH
        out = np.empty_like(x)
        out[~small] = u(x[~small]) / r[~small]
        if np.any(small):
            out[small] = -_gauss_mean(du, x[small], 1.0)
        return out

    pieces = [interpolate(left, (0.0, 0.5)), interpolate(right, (0.5, 1.0))]
    return ScalarField(u.grid, PiecewiseSeries([0.0, 0.5, 1.0], pieces), max_order=max_order)


def check_hardy_ratio(u, s):
    """``||u/d||_{s-1} / ||u||_s`` for integer ``s >= 1``.

    Because ``d`` has a kink at 1/2 the quotient is measured piecewise on the
    two halves of I (the grid has a panel break there).
    """
    if int(s) != s or s < 1:
        raise ValueError("s must be a positive integer")
    u.require_order(int(s))
    return sobolev_norm(hardy_quotient(u), s - 1) / sobolev_norm(u, s)


def check_embedding(f, p):
    """``||f||_{1-p/2}^2 / int d^p (|f|^2 + |Df|^2)``; 0 for the zero field."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    grid = f.grid
    d = np.minimum(grid.nodes, 1.0 - grid.nodes)
    denom = grid.integrate(d ** p * (f.values ** 2 + f.derivative_values(1) ** 2))
    if denom == 0.0:
        return 0.0
    return sobolev_norm(f, 1.0 - p / 2.0) ** 2 / denom


# }}}
