"""Polynomials on boxes, differential operators, quadrature and the element spaces.

Every polynomial lives on a :class:`Box3` and is stored in cell-centred scaled
coordinates ``xi_i = (x_i - c_i) / h_i`` as a dense coefficient tensor of shape
``(..., ncomp, n, n, n)``.  Entry ``[..., c, a, b, k]`` multiplies
``xi_1**a * xi_2**b * xi_3**k`` in physical component ``c``.  Physical
derivatives therefore carry a factor ``1 / h_i``.

Element spaces are generated on the reference cube ``[-1, 1]^3`` and mapped to a
box: scalar spaces and the bubble space keep their coefficients, the
curl-conforming space uses the covariant map and the div-conforming space the
contravariant one.  Both maps preserve the defining sums on axis-aligned boxes.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
import scipy.linalg as sla

from .errors import ContractViolation, NumericalDegeneracyError

FAMILIES = ("S0", "S1", "S2", "S3", "Splus1", "Splus2", "Vbubble", "Ububble")
_ALIASES = {"Ububle": "Ububble", "V": "Vbubble", "U": "Ububble"}

REDUCTION_TOL = 1e-10


def canonical_family(family):
    name = _ALIASES.get(family, family)
    if name not in FAMILIES:
        raise ContractViolation(f"unknown family {family!r}")
    return name


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box given by its centre and per-axis half-widths."""

    center: tuple
    halfwidths: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        h = tuple(float(v) for v in self.halfwidths)
        if len(c) != 3 or len(h) != 3:
            raise ContractViolation("Box3 needs three coordinates")
        if min(h) <= 0:
            raise ContractViolation("half-widths must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "halfwidths", h)

    @classmethod
    def from_bounds(cls, lower, upper):
        lo = np.asarray(lower, float)
        hi = np.asarray(upper, float)
        return cls(tuple((lo + hi) / 2), tuple((hi - lo) / 2))

    @classmethod
    def reference(cls):
        return cls((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))

    @property
    def h(self):
        return np.array(self.halfwidths)

    @property
    def c(self):
        return np.array(self.center)

    @property
    def diameter(self):
        return math.sqrt(sum(v * v for v in self.halfwidths))

    @property
    def volume(self):
        return 8.0 * math.prod(self.halfwidths)

    @property
    def lower(self):
        return self.c - self.h

    @property
    def upper(self):
        return self.c + self.h

    def to_local(self, x):
        return (np.asarray(x, float) - self.c) / self.h

    def to_global(self, xi):
        return self.c + np.asarray(xi, float) * self.h

    def with_center(self, center):
        return Box3(center, self.halfwidths)


def superlinear_degree(m):
    """Degree of a monomial ignoring variables that enter linearly."""
    return sum(e for e in m if e >= 2)


# ---------------------------------------------------------------------------
# raw coefficient-tensor kernels


def pad(c, n):
    """Zero-pad the three trailing axes of ``c`` to length ``n``."""
    m = c.shape[-1]
    if m == n:
        return c
    if m > n:
        if np.any(c[..., n:, :, :]) or np.any(c[..., :, n:, :]) or np.any(c[..., :, :, n:]):
            raise ContractViolation("cannot truncate a nonzero coefficient")
        return c[..., :n, :n, :n].copy()
    widths = [(0, 0)] * (c.ndim - 3) + [(0, n - m)] * 3
    return np.pad(c, widths)


def deriv(c, axis, h=1.0):
    """Partial derivative along ``axis`` (0, 1, 2) of coefficient tensor ``c``."""
    ax = c.ndim - 3 + axis
    cm = np.moveaxis(c, ax, -1)
    out = np.zeros_like(cm)
    n = cm.shape[-1]
    out[..., :-1] = cm[..., 1:] * np.arange(1, n)
    return np.moveaxis(out, -1, ax) / h


def grad(c, h=(1.0, 1.0, 1.0)):
    """(..., 1, n,n,n) -> (..., 3, n,n,n)"""
    s = c[..., 0, :, :, :]
    return np.stack([deriv(s, i, h[i]) for i in range(3)], axis=-4)


def curl(c, h=(1.0, 1.0, 1.0)):
    u = [c[..., i, :, :, :] for i in range(3)]
    return np.stack(
        [
            deriv(u[2], 1, h[1]) - deriv(u[1], 2, h[2]),
            deriv(u[0], 2, h[2]) - deriv(u[2], 0, h[0]),
            deriv(u[1], 0, h[0]) - deriv(u[0], 1, h[1]),
        ],
        axis=-4,
    )


def div(c, h=(1.0, 1.0, 1.0)):
    total = sum(deriv(c[..., i, :, :, :], i, h[i]) for i in range(3))
    return total[..., None, :, :, :]


def grad_vector(c, h=(1.0, 1.0, 1.0)):
    """Gradient of each component: (..., k, n,n,n) -> (..., k, 3, n,n,n)."""
    return np.stack([deriv(c, i, h[i]) for i in range(3)], axis=-4)


def mul(a, s):
    """Product of coefficient tensor ``a`` with a scalar polynomial ``s`` of shape (m, m, m)."""
    n = a.shape[-1]
    m = s.shape[-1]
    out = np.zeros(a.shape[:-3] + (n + m - 1,) * 3)
    for i, j, k in zip(*np.nonzero(s)):
        out[..., i:i + n, j:j + n, k:k + n] += s[i, j, k] * a
    return out


def linear(coef0, coef1, axis):
    """Scalar tensor of ``coef0 + coef1 * xi_axis``."""
    s = np.zeros((2, 2, 2))
    s[0, 0, 0] = coef0
    idx = [0, 0, 0]
    idx[axis] = 1
    s[tuple(idx)] += coef1
    return s


def cross_const(n_vec, c):
    """Pointwise cross product of a constant vector with a vector tensor."""
    a = np.asarray(n_vec, float)
    u = [c[..., i, :, :, :] for i in range(3)]
    return np.stack(
        [a[1] * u[2] - a[2] * u[1], a[2] * u[0] - a[0] * u[2], a[0] * u[1] - a[1] * u[0]],
        axis=-4,
    )


def powers(t, n):
    return np.asarray(t, float)[:, None] ** np.arange(n)


def eval_points(c, xi):
    """Evaluate at local points ``xi`` of shape (P, 3); returns (..., P)."""
    xi = np.atleast_2d(np.asarray(xi, float))
    n = c.shape[-1]
    x0, x1, x2 = (powers(xi[:, d], n) for d in range(3))
    return np.einsum("...abk,pa,pb,pk->...p", c, x0, x1, x2, optimize=True)


def eval_grid(c, g0, g1, g2):
    """Evaluate on the tensor grid g0 x g1 x g2; returns (..., n0, n1, n2)."""
    n = c.shape[-1]
    x0, x1, x2 = powers(g0, n), powers(g1, n), powers(g2, n)
    return np.einsum("...abk,ia,jb,lk->...ijl", c, x0, x1, x2, optimize=True)


@lru_cache(maxsize=None)
def _moment_matrix(n):
    k = np.arange(2 * n - 1)
    mom = np.where(k % 2 == 0, 2.0 / (k + 1), 0.0)
    return mom[np.add.outer(np.arange(n), np.arange(n))]


def reference_gram(a, b):
    """Exact L2 inner products on [-1,1]^3 between two stacks of tensors of equal size."""
    n = max(a.shape[-1], b.shape[-1])
    a, b = pad(a, n), pad(b, n)
    g = _moment_matrix(n)
    return np.einsum("icabk,jcdeh,ad,be,kh->ij", a, b, g, g, g, optimize=True)


def unit(ncomp, comp, exps, n):
    out = np.zeros((ncomp, n, n, n))
    out[(comp,) + tuple(exps)] = 1.0
    return out


def monomials_total(deg):
    """Exponent triples of total degree <= deg."""
    if deg < 0:
        return []
    return [e for e in product(range(deg + 1), repeat=3) if sum(e) <= deg]


def monomials_homogeneous(deg):
    if deg < 0:
        return []
    return [e for e in product(range(deg + 1), repeat=3) if sum(e) == deg]


def independent_subset(gens, tol=REDUCTION_TOL):
    """Keep a maximal linearly independent subset via column-pivoted QR."""
    if len(gens) == 0:
        return gens
    a = gens.reshape(len(gens), -1).T
    _, r, piv = sla.qr(a, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > tol * d[0])) if d[0] > 0 else 0
    return gens[np.sort(piv[:rank])]


def orthonormalize(gens):
    """L2(reference cube) orthonormal basis of the span, preserving nested order."""
    g = reference_gram(gens, gens)
    low = np.linalg.cholesky(g)
    flat = sla.solve_triangular(low, gens.reshape(len(gens), -1), lower=True)
    return flat.reshape(gens.shape)


def coefficient_rank(stack, tol=REDUCTION_TOL):
    if len(stack) == 0:
        return 0
    s = np.linalg.svd(stack.reshape(len(stack), -1), compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s[0] > 0 else 0


# ---------------------------------------------------------------------------
# user-facing polynomial


class PolyVec:
    """A scalar- or vector-valued polynomial on a box."""

    def __init__(self, coeffs, cell):
        coeffs = np.asarray(coeffs, float)
        if coeffs.ndim == 3:
            coeffs = coeffs[None]
        if coeffs.ndim != 4 or coeffs.shape[0] not in (1, 3):
            raise ContractViolation("coefficients must have shape (ncomp, n, n, n), ncomp in {1, 3}")
        if not (coeffs.shape[1] == coeffs.shape[2] == coeffs.shape[3]):
            raise ContractViolation("coefficient tensor must be cubic")
        self.coeffs = coeffs
        self.cell = cell

    @classmethod
    def from_terms(cls, cell, terms, ncomp=1):
        """Build from ``{(comp, (e1, e2, e3)): value}`` in local coordinates."""
        n = 1 + max((max(e) for _, e in terms), default=0)
        c = np.zeros((ncomp, n, n, n))
        for (comp, e), v in terms.items():
            c[(comp,) + tuple(e)] += v
        return cls(c, cell)

    @property
    def ncomp(self):
        return self.coeffs.shape[0]

    @property
    def size(self):
        return self.coeffs.shape[-1]

    def monomials(self):
        n = self.size
        return list(product(range(n), repeat=3))

    def coeff_matrix(self):
        return self.coeffs.reshape(self.ncomp, -1)

    def __call__(self, x):
        """Values at physical points ``x`` of shape (P, 3); returns (P, ncomp)."""
        xi = self.cell.to_local(np.atleast_2d(x))
        return eval_points(self.coeffs, xi).T

    def _binary(self, other, sign):
        if self.cell != other.cell or self.ncomp != other.ncomp:
            raise ContractViolation("operands live on different cells or have different shapes")
        n = max(self.size, other.size)
        return PolyVec(pad(self.coeffs, n) + sign * pad(other.coeffs, n), self.cell)

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __mul__(self, scalar):
        return PolyVec(self.coeffs * float(scalar), self.cell)

    __rmul__ = __mul__

    def __neg__(self):
        return PolyVec(-self.coeffs, self.cell)

    def max_abs_coeff(self):
        return float(np.abs(self.coeffs).max())

    def is_zero(self, tol=1e-12):
        return self.max_abs_coeff() <= tol

    def __repr__(self):
        return f"PolyVec(ncomp={self.ncomp}, size={self.size}, cell={self.cell})"


def diff(p, op):
    """Exact differentiation: ``op`` is "grad", "curl", "div" or an axis index 0..2."""
    h = p.cell.halfwidths
    if op == "grad":
        if p.ncomp != 1:
            raise ContractViolation("grad needs a scalar polynomial")
        return PolyVec(grad(p.coeffs, h), p.cell)
    if op == "curl":
        if p.ncomp != 3:
            raise ContractViolation("curl needs a vector polynomial")
        return PolyVec(curl(p.coeffs, h), p.cell)
    if op == "div":
        if p.ncomp != 3:
            raise ContractViolation("div needs a vector polynomial")
        return PolyVec(div(p.coeffs, h), p.cell)
    if op in (0, 1, 2):
        return PolyVec(deriv(p.coeffs, op, h[op]), p.cell)
    raise ContractViolation(f"unknown operator {op!r}")


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True, eq=False)
class Quadrature:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, f):
        vals = np.asarray(f(self.points), float)
        return np.tensordot(self.weights, vals, axes=(0, 0))


@lru_cache(maxsize=None)
def gauss_1d(npts):
    x, w = np.polynomial.legendre.leggauss(npts)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def points_for_degree(degree):
    return max(1, math.ceil((degree + 1) / 2))


def tensor_rule(degree):
    """Reference nodes and weights on [-1,1] exact to per-axis ``degree``."""
    return gauss_1d(points_for_degree(degree))


def gauss_tensor(cell, degree):
    """Tensor Gauss rule on ``cell`` exact for per-axis degree ``degree``."""
    if degree < 0:
        raise ContractViolation("degree must be non-negative")
    x, w = tensor_rule(degree)
    grid = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    weights = np.einsum("i,j,k->ijk", w, w, w).ravel() * math.prod(cell.halfwidths)
    return Quadrature(cell.to_global(grid), weights, degree)


# ---------------------------------------------------------------------------
# element spaces on the reference cube


def _times_xi(c, axis):
    """Multiply by xi_axis, growing every trailing axis by one."""
    n = c.shape[-1]
    out = np.zeros(c.shape[:-3] + (n + 1,) * 3)
    sl = [slice(0, n)] * 3
    sl[axis] = slice(1, n + 1)
    out[(Ellipsis,) + tuple(sl)] = c
    return out


def _twist(w, n):
    """Field (x2 x3 (w2 - w3), x1 x3 (w3 - w1), x1 x2 (w1 - w2)) for scalar tensors w."""
    pairs = ((1, 2), (2, 0), (0, 1))
    comps = []
    for i, (a, b) in enumerate(pairs):
        diff_w = w[a] - w[b]
        comps.append(_times_xi(_times_xi(diff_w, (i + 1) % 3), (i + 2) % 3))
    return pad(np.stack(comps), n)


def _twist_generators(r, n):
    gens = []
    for i in range(3):
        for e in monomials_homogeneous(r - 1):
            if e[i] != 0:
                continue
            w = np.zeros((3, r, r, r))
            w[(i,) + e] = 1.0
            gens.append(_twist(w, n))
    return gens


def _cross_xi(c):
    """(a x xi) for a vector tensor a."""
    ax = [_times_xi(c[..., i, :, :, :], j) for i in range(3) for j in range(3)]
    a = lambda i, j: ax[3 * i + j]
    return np.stack([a(1, 2) - a(2, 1), a(2, 0) - a(0, 2), a(0, 1) - a(1, 0)], axis=-4)


def _serendipity_exponents(r):
    return [e for e in product(range(r + 1), repeat=3) if superlinear_degree(e) <= r]


@lru_cache(maxsize=None)
def _ref_s0(r):
    n = r + 1
    gens = np.array([unit(1, 0, e, n) for e in _serendipity_exponents(r)])
    return orthonormalize(gens)


@lru_cache(maxsize=None)
def _ref_s1(r):
    n = r + 1
    gens = list(grad(np.array([unit(1, 0, e, n) for e in _serendipity_exponents(r)])))
    for e in monomials_total(r - 1):
        for j in range(3):
            gens.append(pad(_cross_xi(unit(3, j, e, r)), n))
    gens.extend(_twist_generators(r, n))
    return orthonormalize(independent_subset(np.array(gens)))


@lru_cache(maxsize=None)
def _ref_s2(r):
    n = r + 1
    gens = [unit(3, j, e, n) for e in monomials_total(r - 1) for j in range(3)]
    gens.extend(curl(np.array(_twist_generators(r, n))))
    return orthonormalize(independent_subset(np.array(gens)))


@lru_cache(maxsize=None)
def _ref_s3(r):
    gens = np.array([unit(1, 0, e, max(r - 1, 1)) for e in monomials_total(r - 2)])
    return orthonormalize(gens)


def cell_bubble():
    """Normalised cell bubble prod(1 - xi_i^2) as a (3, 3, 3) tensor."""
    out = np.ones((1, 1, 1))
    for a in range(3):
        s = np.zeros((3, 3, 3))
        s[0, 0, 0] = 1.0
        idx = [0, 0, 0]
        idx[a] = 2
        s[tuple(idx)] = -1.0
        out = mul(out, s) if out.shape[-1] > 1 else pad(s, 3) * out[0, 0, 0]
    return out


def face_bubble(face):
    """Normalised face bubble for local face ``2*axis + side``; nonzero on that face only."""
    axis, side = divmod(face, 2)
    sigma = 2 * side - 1
    out = pad(linear(1.0, float(sigma), axis), 2)
    for b in range(3):
        if b == axis:
            continue
        s = np.zeros((3, 3, 3))
        s[0, 0, 0] = 1.0
        idx = [0, 0, 0]
        idx[b] = 2
        s[tuple(idx)] = -1.0
        out = mul(out, s)
    return pad(out, 3)


def face_normal(face):
    n = np.zeros(3)
    n[face // 2] = 1.0
    return n


def outward_normal(face):
    return face_normal(face) * (2 * (face % 2) - 1)


@lru_cache(maxsize=None)
def _ref_bubbles(r):
    """Bubble generators, owning face and tangential factor, all on [-1,1]^3."""
    n = r + 3
    bk = cell_bubble()
    zs, faces, qs = [], [], []
    for f in range(6):
        a = f // 2
        weight = mul(bk, face_bubble(f))
        tang = [b for b in range(3) if b != a]
        q_gen = np.array([unit(3, b, e, max(r - 1, 1)) for e in monomials_total(r - 2) for b in tang])
        w_gen = [unit(3, b, e, max(r - 2, 1)) for e in monomials_total(r - 3) for b in tang]
        if w_gen:
            moments = reference_gram(mul(np.array(w_gen), weight), q_gen)
            _, s, vt = np.linalg.svd(moments)
            rank = int(np.sum(s > REDUCTION_TOL * s[0]))
            null = vt[rank:]
        else:
            null = np.eye(len(q_gen))
        if len(null) != r * (r - 1):
            raise NumericalDegeneracyError(
                f"face {f}: null space has dimension {len(null)}, expected {r * (r - 1)}"
            )
        q = np.einsum("kj,j...->k...", null, q_gen)
        qs.extend(pad(q, r + 1))
        zs.extend(pad(mul(q, mul(bk, face_bubble(f))), n))
        faces.extend([f] * len(q))
    zs = np.array(zs)
    if coefficient_rank(zs) != 6 * r * (r - 1):
        raise NumericalDegeneracyError("bubble generators are linearly dependent")
    return zs, np.array(faces), np.array(qs)


# ---------------------------------------------------------------------------
# mapped spaces


@dataclass(frozen=True, eq=False)
class SpaceBasis:
    """Ordered polynomial basis of one element space on a box."""

    family: str
    order: int
    cell: Box3
    coeffs: np.ndarray
    face_index: np.ndarray = None
    face_q: np.ndarray = None

    @property
    def ncomp(self):
        return self.coeffs.shape[1]

    @property
    def dim(self):
        return self.coeffs.shape[0]

    def __len__(self):
        return self.dim

    @property
    def basis(self):
        return [PolyVec(c, self.cell) for c in self.coeffs]

    def rank(self, tol=REDUCTION_TOL):
        return coefficient_rank(self.coeffs, tol)

    def evaluate(self, x):
        """Values of all basis functions at physical points, shape (dim, ncomp, P)."""
        return eval_points(self.coeffs, self.cell.to_local(np.atleast_2d(x)))


def _scales(cell):
    h = cell.h
    return h, float(np.prod(h) ** (1.0 / 3.0))


def covariant(c, cell):
    h, hbar = _scales(cell)
    return c * (hbar / h)[:, None, None, None]


def contravariant(c, cell):
    h, hbar = _scales(cell)
    return c * (h / hbar)[:, None, None, None]


def _check_order(family, r):
    low = 1 if family == "S0" else 2
    if not isinstance(r, (int, np.integer)) or r < low or r > 4:
        raise ContractViolation(f"{family} needs {low} <= r <= 4, got {r!r}")


def build_bubbles(r, cell):
    """Bubble space and its curl image on ``cell``.

    The bubble generators are ``b_K * b_f * q`` with normalised bubbles
    ``b_K = prod(1 - xi_i^2)`` and ``b_f`` vanishing on the five other faces.
    ``face_q`` holds the tangential factor ``q`` in local coefficients.
    """
    _check_order("Vbubble", r)
    zs, faces, qs = _ref_bubbles(r)
    _, hbar = _scales(cell)
    v = SpaceBasis("Vbubble", r, cell, zs.copy(), faces, qs)
    u = SpaceBasis("Ububble", r, cell, curl(zs, cell.halfwidths) * hbar, faces, qs)
    return v, u


def build_space(family, r, cell):
    """Basis of ``family`` of order ``r`` on ``cell``."""
    family = canonical_family(family)
    _check_order(family, r)
    if family == "S0":
        return SpaceBasis(family, r, cell, _ref_s0(r).copy())
    if family == "S3":
        return SpaceBasis(family, r, cell, _ref_s3(r).copy())
    if family == "S1":
        return SpaceBasis(family, r, cell, covariant(_ref_s1(r), cell))
    if family == "S2":
        return SpaceBasis(family, r, cell, contravariant(_ref_s2(r), cell))
    v, u = build_bubbles(r, cell)
    if family == "Vbubble":
        return v
    if family == "Ububble":
        return u
    n = r + 3
    if family == "Splus1":
        coeffs = np.concatenate([pad(covariant(_ref_s1(r), cell), n), v.coeffs])
    else:
        coeffs = np.concatenate([pad(contravariant(_ref_s2(r), cell), n), u.coeffs])
    if coefficient_rank(coeffs) != len(coeffs):
        raise NumericalDegeneracyError(f"{family}: polynomial part and bubbles overlap")
    return SpaceBasis(family, r, cell, coeffs)


def dimension_formula(family, r):
    """Closed-form local dimension of each family."""
    family = canonical_family(family)
    if family == "S0":
        return {1: 8, 2: 20}.get(r, (r + 1) * (r * r + 5 * r + 24) // 6)
    if family == "S1":
        return 36 if r == 2 else (r**3 + 5 * r * r + 18 * r + 6) // 2
    if family == "S2":
        return r * (r * r + 3 * r + 8) // 2
    if family == "S3":
        return (r - 1) * r * (r + 1) // 6
    if family in ("Vbubble", "Ububble"):
        return 6 * r * (r - 1)
    if family == "Splus1":
        return dimension_formula("S1", r) + 6 * r * (r - 1)
    return dimension_formula("S2", r) + 6 * r * (r - 1)
