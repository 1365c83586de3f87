"""Normalized Hermite functions, their eigenvalues, and the shared quadrature grid.

The functions h_k are the L^2(R)-normalized eigenfunctions of the harmonic
oscillator -d^2/dx^2 + x^2 with eigenvalues 2k+1.  Everything downstream
(representation matrix elements, spectral transforms) evaluates them through
the stable three-term recurrence

    h_0(x) = pi^(-1/4) exp(-x^2/2),
    h_{k+1}(x) = x*sqrt(2/(k+1))*h_k(x) - sqrt(k/(k+1))*h_{k-1}(x),

which never forms the Hermite polynomials or factorials explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

#: Hard cap on the degree: beyond this, double precision recurrences would
#: need range scaling that is not worth building at desk scale.
DEGREE_CAP = 512

#: Required bound on |h_k| at the ends of the truncated evaluation interval.
TAIL_BOUND = 1e-12


def hermite_eigenvalue(k: int, n: int) -> int:
    """Eigenvalue 2k + n of the n-dimensional oscillator at total degree k."""
    if k < 0:
        raise ValidationError(f"degree must be nonnegative, got {k}")
    if n < 1:
        raise ValidationError(f"half-dimension must be positive, got {n}")
    return 2 * k + n


def hermite_eval(k: int, x):
    """Evaluate the normalized Hermite function h_k at x (scalar or array)."""
    if k < 0:
        raise ValidationError(f"degree must be nonnegative, got {k}")
    if k > DEGREE_CAP:
        raise ValidationError(f"degree {k} exceeds the hard cap {DEGREE_CAP}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValidationError("evaluation points must be finite")
    h_prev = np.pi ** -0.25 * np.exp(-0.5 * x**2)
    if k == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x * np.sqrt(2.0) * h_prev
    for j in range(1, k):
        h, h_prev = x * np.sqrt(2.0 / (j + 1)) * h - np.sqrt(j / (j + 1)) * h_prev, h
    return h if h.ndim else float(h)


def hermite_table(k_max: int, x) -> np.ndarray:
    """All h_k(x) for k = 0..k_max, shape (k_max+1,) + x.shape."""
    if k_max < 0:
        raise ValidationError(f"k_max must be nonnegative, got {k_max}")
    if k_max > DEGREE_CAP:
        raise ValidationError(f"k_max {k_max} exceeds the hard cap {DEGREE_CAP}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((k_max + 1,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x**2)
    if k_max >= 1:
        out[1] = x * np.sqrt(2.0) * out[0]
    for j in range(1, k_max):
        out[j + 1] = x * np.sqrt(2.0 / (j + 1)) * out[j] - np.sqrt(j / (j + 1)) * out[j - 1]
    return out


@dataclass(frozen=True)
class HermiteBasisSpec:
    """Truncated Hermite basis plus the uniform quadrature rule on [-L, L].

    Parameters
    ----------
    n : int
        Half-dimension; the underlying group has homogeneous dimension 2n+2.
    k_max : int
        Maximum retained total degree.
    u_halfwidth : float
        Half-width L of the truncated evaluation interval.
    u_points : int
        Number of uniform quadrature nodes on [-L, L]; must be >= 4*k_max so
        the oscillation of the highest retained mode is resolved.
    """

    n: int
    k_max: int
    u_halfwidth: float = 12.0
    u_points: int = 256

    u_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    u_weights: np.ndarray = field(init=False, repr=False, compare=False)
    table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"half-dimension must be positive, got {self.n}")
        if self.k_max < 1:
            raise ValidationError(f"k_max must be >= 1, got {self.k_max}")
        if self.k_max > DEGREE_CAP:
            raise ValidationError(f"k_max {self.k_max} exceeds the hard cap {DEGREE_CAP}")
        if self.u_halfwidth <= 0 or not np.isfinite(self.u_halfwidth):
            raise ValidationError("u_halfwidth must be positive and finite")
        if self.u_points < 4 * self.k_max:
            raise ValidationError(
                f"u_points={self.u_points} under-resolves degree {self.k_max}; "
                f"need at least {4 * self.k_max}"
            )
        nodes = np.linspace(-self.u_halfwidth, self.u_halfwidth, self.u_points)
        weights = np.full(self.u_points, nodes[1] - nodes[0])
        weights[0] *= 0.5
        weights[-1] *= 0.5
        table = hermite_table(self.k_max, nodes)
        edge = np.abs(table[:, [0, -1]]).max()
        if edge >= TAIL_BOUND:
            raise ValidationError(
                f"basis tail |h_k(+-L)| = {edge:.3e} >= {TAIL_BOUND:g}; "
                "increase u_halfwidth"
            )
        object.__setattr__(self, "u_nodes", nodes)
        object.__setattr__(self, "u_weights", weights)
        object.__setattr__(self, "table", table)

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.k_max + 1)

    @property
    def eigenvalues(self) -> np.ndarray:
        """mu_k = 2k + n for k = 0..k_max."""
        return 2 * self.degrees + self.n

    def multiplicities(self) -> np.ndarray:
        """Dimension of the degree-k eigenspace, binom(k+n-1, n-1)."""
        k = self.degrees
        d = np.ones(self.k_max + 1)
        for j in range(1, self.n):
            d *= (k + j) / j
        return np.rint(d).astype(np.int64)


def orthonormality_defect(spec: HermiteBasisSpec) -> float:
    """Max over j,k of |<h_j, h_k>_quadrature - delta_jk| on the spec's grid."""
    gram = (spec.table * spec.u_weights) @ spec.table.T
    return float(np.abs(gram - np.eye(spec.k_max + 1)).max())
