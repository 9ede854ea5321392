"""Kernel evaluation, Gram matrices, and explicit finite-rank feature maps.

Two families matter for the regression machinery: the linear kernel
``k(w, w') = <w, w'>`` and the polynomial kernel
``k(w, w') = (<w, w'> + offset)^degree``.  Both are finite rank, so they admit
an explicit monomial feature map whose inner product reproduces the kernel
exactly; :func:`featurize` is used throughout the test suite as an oracle for
the kernel trick.  The RBF kernel
``k(w, w') = exp(-||w - w'||^2 / (2 * bandwidth^2))`` is infinite rank and is
only available for the infinite-dimensional policy variant.

Monomial ordering is graded lexicographic: exponent vectors are listed by
increasing total degree, ties broken lexicographically by which coordinates
carry the degree (for d=2, degree<=2: (0,0), (1,0), (0,1), (2,0), (1,1),
(0,2)).  Each monomial ``w^m`` of total degree q is scaled by
``sqrt(multinomial(degree; degree-q, m) * offset^(degree-q))`` so that the
multinomial theorem gives ``<featurize(w), featurize(w')> = k(w, w')`` with no
approximation beyond float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .errors import InputError, UnsupportedKernelError

LINEAR = "linear"
POLYNOMIAL = "polynomial"
RBF = "rbf"

_FAMILIES = (LINEAR, POLYNOMIAL, RBF)


@dataclass(frozen=True)
class KernelSpec:
    """Declarative description of a positive-semidefinite kernel.

    ``degree``/``offset`` apply to the polynomial family only, ``bandwidth``
    to RBF only.  Unused fields stay ``None``.
    """

    family: str
    degree: int | None = None
    offset: float | None = None
    bandwidth: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}")
        if self.family == POLYNOMIAL:
            if self.degree is None or int(self.degree) < 1:
                raise InputError("polynomial kernel requires degree >= 1")
            if self.offset is None or self.offset < 0:
                raise InputError("polynomial kernel requires offset >= 0")
        elif self.family == RBF:
            if self.bandwidth is None or self.bandwidth <= 0:
                raise InputError("rbf kernel requires bandwidth > 0")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls(LINEAR)

    @classmethod
    def polynomial(cls, degree: int, offset: float = 0.0) -> "KernelSpec":
        return cls(POLYNOMIAL, degree=int(degree), offset=float(offset))

    @classmethod
    def rbf(cls, bandwidth: float) -> "KernelSpec":
        return cls(RBF, bandwidth=float(bandwidth))

    @property
    def finite_rank(self) -> bool:
        return self.family in (LINEAR, POLYNOMIAL)

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.degree is not None:
            out["degree"] = self.degree
        if self.offset is not None:
            out["offset"] = self.offset
        if self.bandwidth is not None:
            out["bandwidth"] = self.bandwidth
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(
            d["family"],
            degree=d.get("degree"),
            offset=d.get("offset"),
            bandwidth=d.get("bandwidth"),
        )


def _as_matrix(vectors) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InputError("expected a non-empty list of equal-length vectors")
    return arr


def eval_kernel(spec: KernelSpec, w, w_prime) -> float:
    """Evaluate k(w, w') for a single pair of vectors."""
    a = np.asarray(w, dtype=np.float64).ravel()
    b = np.asarray(w_prime, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if spec.family == LINEAR:
        return float(a @ b)
    if spec.family == POLYNOMIAL:
        return float((a @ b + spec.offset) ** spec.degree)
    d = a - b
    return float(np.exp(-(d @ d) / (2.0 * spec.bandwidth**2)))


def gram(spec: KernelSpec, rows, cols) -> np.ndarray:
    """Gram matrix G[i, j] = k(rows[i], cols[j]).

    Passing the *same array object* for ``rows`` and ``cols`` guarantees an
    exactly symmetric result (the raw product is averaged with its
    transpose, which also guards later Cholesky factorizations against
    floating-point asymmetry).
    """
    symmetric = rows is cols
    r = _as_matrix(rows)
    c = r if symmetric else _as_matrix(cols)
    if r.shape[1] != c.shape[1]:
        raise InputError(f"dimension mismatch: {r.shape[1]} vs {c.shape[1]}")
    if spec.family == LINEAR:
        g = r @ c.T
    elif spec.family == POLYNOMIAL:
        g = (r @ c.T + spec.offset) ** spec.degree
    else:
        sq = (
            np.sum(r**2, axis=1)[:, None]
            + np.sum(c**2, axis=1)[None, :]
            - 2.0 * (r @ c.T)
        )
        g = np.exp(-np.maximum(sq, 0.0) / (2.0 * spec.bandwidth**2))
    if symmetric:
        g = (g + g.T) / 2.0
    return g


def monomial_exponents(dim: int, max_degree: int) -> list[tuple[int, ...]]:
    """All exponent vectors with total degree <= max_degree, graded-lex order."""
    out = []
    for q in range(max_degree + 1):
        for combo in combinations_with_replacement(range(dim), q):
            exp = [0] * dim
            for idx in combo:
                exp[idx] += 1
            out.append(tuple(exp))
    return out


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Explicit feature map for a finite-rank kernel.

    ``exponents`` has one row per output coordinate; ``coefficients`` holds
    the matching square-root multinomial weights.  Built via
    :func:`feature_map`, not directly.
    """

    spec: KernelSpec
    input_dim: int
    exponents: np.ndarray  # (output_dim, input_dim) int
    coefficients: np.ndarray  # (output_dim,)

    @property
    def output_dim(self) -> int:
        return self.exponents.shape[0]


def feature_map(spec: KernelSpec, input_dim: int) -> FeatureMap:
    """Construct the canonical feature map for a finite-rank kernel spec."""
    if input_dim < 1:
        raise InputError("input_dim must be >= 1")
    if spec.family == LINEAR:
        exps = np.eye(input_dim, dtype=np.int64)
        coeffs = np.ones(input_dim)
        return FeatureMap(spec, input_dim, exps, coeffs)
    if spec.family != POLYNOMIAL:
        raise UnsupportedKernelError(
            f"{spec.family} kernel has no finite-rank feature map"
        )
    p = spec.degree
    exps = monomial_exponents(input_dim, p)
    coeffs = np.empty(len(exps))
    for i, m in enumerate(exps):
        q = sum(m)
        multinom = math.factorial(p) // math.factorial(p - q)
        for mj in m:
            multinom //= math.factorial(mj)
        coeffs[i] = math.sqrt(multinom * spec.offset ** (p - q))
    return FeatureMap(spec, input_dim, np.asarray(exps, dtype=np.int64), coeffs)


def featurize(fmap: FeatureMap, w) -> np.ndarray:
    """Map one input vector to feature coordinates."""
    a = np.asarray(w, dtype=np.float64).ravel()
    if a.shape[0] != fmap.input_dim:
        raise InputError(f"expected dim {fmap.input_dim}, got {a.shape[0]}")
    return featurize_many(fmap, a[None, :])[0]


def featurize_many(fmap: FeatureMap, ws) -> np.ndarray:
    """Map an (n, input_dim) batch to an (n, output_dim) feature matrix."""
    arr = _as_matrix(ws)
    if arr.shape[1] != fmap.input_dim:
        raise InputError(f"expected dim {fmap.input_dim}, got {arr.shape[1]}")
    if fmap.spec.family == LINEAR:
        return arr.copy()
    # w^m per monomial; 0**0 == 1 handles absent coordinates
    powers = arr[:, None, :] ** fmap.exponents[None, :, :]
    return fmap.coefficients * np.prod(powers, axis=2)


def space_dim(spec: KernelSpec, input_dim: int) -> int:
    """Dimension of the RKHS spanned by a finite-rank kernel on R^input_dim.

    Linear spans the coordinate functionals (dim d).  A polynomial kernel
    with positive offset spans every monomial of total degree <= p, i.e.
    binomial(d+p, p); with offset 0 only the degree-exactly-p monomials
    survive, i.e. binomial(d+p-1, p).
    """
    if input_dim < 1:
        raise InputError("input_dim must be >= 1")
    if spec.family == LINEAR:
        return input_dim
    if spec.family == POLYNOMIAL:
        if spec.offset > 0:
            return math.comb(input_dim + spec.degree, spec.degree)
        return math.comb(input_dim + spec.degree - 1, spec.degree)
    raise UnsupportedKernelError(f"{spec.family} kernel is not finite rank")
