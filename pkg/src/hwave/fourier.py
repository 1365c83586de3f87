"""Group Fourier transform on the Heisenberg group, restricted to z-radial functions.

A function f(x, y, tau) on H^n that is radial in z = (x, y) is represented two
ways: sampled on an (r, tau) grid (`PhysicalField`), or through the diagonal
coefficients of its operator-valued Fourier transform on a grid of nonzero
frequencies lambda (`SpectralField`).  For z-radial f the transform is diagonal
in Hermite total degree, with the degree-k diagonal profile given by a
Laguerre-type kernel

    b_k(lambda, r) = L_k^(n-1)(|lambda| r^2 / 2) * exp(-|lambda| r^2 / 4),

which is what the fast transform paths contract against.  The slow path
evaluates representation matrix elements by direct quadrature and exists to
validate the fast path; it never shares the Laguerre reduction.

Conventions: sqrt(lambda) means sgn(lambda)*sqrt(|lambda|); the Plancherel
measure is c_n |lambda|^n dlambda with c_n = (2*pi)^(-(n+1)); Haar measure is
Lebesgue measure, so the z-integral carries the polar factor
vol(S^{2n-1}) r^(2n-1) dr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridResolutionError, SymmetryError, ValidationError
from .hermite import HermiteBasisSpec, hermite_table

#: Relative magnitude allowed for the matrix-element integrand at the ends of
#: the truncated u-interval before the grid is declared too small.
MC_TAIL_TOL = 1e-9

#: Minimum points per period of the oscillatory factor exp(i*sqrt(lambda)*y*u).
MC_MIN_PTS_PER_PERIOD = 6.0

#: Relative imaginary residual tolerated when reconstructing a real field.
IMAG_TOL = 1e-6


def plancherel_constant(n: int) -> float:
    """The constant c_n in the Plancherel measure c_n |lambda|^n dlambda."""
    return (2.0 * math.pi) ** -(n + 1)


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^{2n}, i.e. 2 pi^n / (n-1)!."""
    return 2.0 * math.pi**n / math.factorial(n - 1)


def _uniform_weights(m: int, h: float) -> np.ndarray:
    """Composite Simpson weights on a uniform grid (trapezoid fallback).

    Simpson needs an even number of intervals; with an odd interval count the
    last interval is handled by trapezoid.  All weights stay positive.
    """
    if m < 2:
        raise ValidationError("quadrature grid needs at least 2 nodes")
    if m == 2:
        return np.array([0.5, 0.5]) * h
    w = np.zeros(m)
    stop = m if m % 2 == 1 else m - 1
    w[0:stop:2] += 2.0 / 3.0
    w[1:stop:2] += 4.0 / 3.0
    w[0] -= 1.0 / 3.0
    w[stop - 1] -= 1.0 / 3.0
    if m % 2 == 0:
        w[-2] += 0.5
        w[-1] += 0.5
    return w * h


@dataclass(frozen=True)
class GroupPoint:
    """A point (x, y, tau) of H^1; x, y horizontal, tau central."""

    x: float
    y: float
    tau: float

    def __post_init__(self):
        if not all(np.isfinite([self.x, self.y, self.tau])):
            raise ValidationError("group point coordinates must be finite")


def _as_group_point(g) -> GroupPoint:
    if isinstance(g, GroupPoint):
        return g
    return GroupPoint(*g)


@dataclass(frozen=True)
class LambdaGrid:
    """Symmetric grid of nonzero frequencies with Plancherel weights.

    `nodes` is ascending, symmetric about 0, and avoids 0; `weights[j]`
    approximates integration against c_n |lambda|^n dlambda near node j, so
    sums over nodes of w_j * (...) discretize the Plancherel integral.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or nodes.size % 2 != 0:
            raise ValidationError("lambda nodes must form a symmetric 1-d pair grid")
        if np.any(nodes == 0.0):
            raise ValidationError("lambda = 0 is not an admissible node")
        if np.any(np.diff(nodes) <= 0):
            raise ValidationError("lambda nodes must be strictly increasing")
        if not np.allclose(nodes, -nodes[::-1], rtol=0, atol=1e-15 * abs(nodes).max()):
            raise ValidationError("lambda nodes must be symmetric about 0")
        if weights.shape != nodes.shape or np.any(weights <= 0):
            raise ValidationError("weights must be positive, one per node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def log_spaced(cls, n: int, lambda_min: float = 1e-3, lambda_max: float = 1e2,
                   per_sign: int = 96) -> "LambdaGrid":
        """Log-spaced nodes on [lambda_min, lambda_max], mirrored to negatives.

        Low-lambda resolution matters because decay rates are governed by the
        small-frequency regime; log spacing resolves that power-law range.
        """
        if not (0 < lambda_min < lambda_max):
            raise ValidationError("need 0 < lambda_min < lambda_max")
        u = np.linspace(math.log(lambda_min), math.log(lambda_max), per_sign)
        pos = np.exp(u)
        # d lambda = lambda du on the log axis
        wu = _uniform_weights(per_sign, u[1] - u[0]) * pos
        return cls._from_positive(n, pos, wu)

    @classmethod
    def linear(cls, n: int, lambda_min: float, lambda_max: float,
               per_sign: int = 128) -> "LambdaGrid":
        """Uniform nodes on [lambda_min, lambda_max], mirrored to negatives."""
        if not (0 < lambda_min < lambda_max):
            raise ValidationError("need 0 < lambda_min < lambda_max")
        pos = np.linspace(lambda_min, lambda_max, per_sign)
        wu = _uniform_weights(per_sign, pos[1] - pos[0])
        return cls._from_positive(n, pos, wu)

    @classmethod
    def _from_positive(cls, n: int, pos: np.ndarray, dlam: np.ndarray) -> "LambdaGrid":
        cn = plancherel_constant(n)
        wpos = cn * pos**n * dlam
        nodes = np.concatenate([-pos[::-1], pos])
        weights = np.concatenate([wpos[::-1], wpos])
        return cls(n=n, nodes=nodes, weights=weights)

    @property
    def per_sign(self) -> int:
        return self.nodes.size // 2

    @property
    def lambda_min(self) -> float:
        return float(self.nodes[self.nodes > 0].min())

    @property
    def lambda_max(self) -> float:
        return float(self.nodes.max())

    def mirror_index(self) -> np.ndarray:
        """Index j' with nodes[j'] = -nodes[j] (exact by construction)."""
        return np.arange(self.nodes.size)[::-1]


@dataclass
class PhysicalField:
    """Samples v[i, j] = f(r_i, tau_j) of a z-radial function on H^n."""

    r_nodes: np.ndarray
    tau_nodes: np.ndarray
    values: np.ndarray
    n: int = 1

    def __post_init__(self):
        self.r_nodes = np.asarray(self.r_nodes, dtype=float)
        self.tau_nodes = np.asarray(self.tau_nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.r_nodes) <= 0) or np.any(np.diff(self.tau_nodes) <= 0):
            raise ValidationError("grid coordinates must be strictly increasing")
        if self.r_nodes[0] < 0:
            raise ValidationError("radial nodes must be nonnegative")
        if self.values.shape != (self.r_nodes.size, self.tau_nodes.size):
            raise ValidationError("values must have shape (len(r), len(tau))")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field values must be finite")

    def r_weights(self) -> np.ndarray:
        """Quadrature weights carrying the polar measure vol(S^{2n-1}) r^{2n-1} dr."""
        w = _uniform_weights(self.r_nodes.size, self.r_nodes[1] - self.r_nodes[0])
        return sphere_area(self.n) * self.r_nodes ** (2 * self.n - 1) * w

    def tau_weights(self) -> np.ndarray:
        return _uniform_weights(self.tau_nodes.size, self.tau_nodes[1] - self.tau_nodes[0])

    def l2_norm(self) -> float:
        return self.lq_norm(2.0)

    def lq_norm(self, q: float) -> float:
        """L^q norm over H^n computed on the polar grid."""
        if q <= 0:
            raise ValidationError("q must be positive")
        wr = self.r_weights()
        wt = self.tau_weights()
        total = float(np.einsum("i,j,ij->", wr, wt, np.abs(self.values) ** q))
        return total ** (1.0 / q)


def radialization_residual(x_nodes, y_nodes, values) -> float:
    """Relative deviation of cartesian z-samples from exact z-radiality.

    `values[iy, ix]` samples f on the meshgrid of (x, y) at fixed tau.  Bins
    samples by radius and measures the max in-bin spread relative to the
    field's max magnitude.
    """
    x = np.asarray(x_nodes, float)
    y = np.asarray(y_nodes, float)
    v = np.asarray(values, float)
    r = np.hypot(*np.meshgrid(x, y))
    order = np.argsort(r.ravel())
    rs, vs = r.ravel()[order], v.ravel()[order]
    scale = np.abs(vs).max()
    if scale == 0:
        return 0.0
    nbins = max(8, x.size)
    edges = np.linspace(0, rs[-1] * (1 + 1e-12), nbins + 1)
    idx = np.digitize(rs, edges) - 1
    worst = 0.0
    for b in range(nbins):
        sel = idx == b
        if np.count_nonzero(sel) > 1:
            worst = max(worst, float(vs[sel].max() - vs[sel].min()))
    return worst / scale


@dataclass
class SpectralField:
    """Diagonal coefficient tensor c[k, j] over Hermite degree x lambda grid."""

    basis: HermiteBasisSpec
    grid: LambdaGrid
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        expected = (self.basis.k_max + 1, self.grid.nodes.size)
        if self.coeffs.shape != expected:
            raise ValidationError(f"coeffs must have shape {expected}, got {self.coeffs.shape}")
        if self.basis.n != self.grid.n:
            raise ValidationError("basis and lambda grid disagree on half-dimension")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValidationError("coefficients must be finite")

    @classmethod
    def zeros(cls, basis: HermiteBasisSpec, grid: LambdaGrid) -> "SpectralField":
        return cls(basis, grid, np.zeros((basis.k_max + 1, grid.nodes.size), complex))

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.basis, self.grid, coeffs)

    def copy(self) -> "SpectralField":
        return self.with_coeffs(self.coeffs.copy())

    def beta_sq(self) -> np.ndarray:
        """Mode frequencies |lambda_j| mu_k, shape (k_max+1, n_lambda)."""
        return np.outer(self.basis.eigenvalues, np.abs(self.grid.nodes))

    def plancherel_weights(self) -> np.ndarray:
        """Combined weights d_k * w_j of the Plancherel sum, same shape as coeffs."""
        return np.outer(self.basis.multiplicities(), self.grid.weights)

    def reality_defect(self) -> float:
        """Max violation of c_k(-lambda) = conj(c_k(lambda)), relative."""
        mirrored = np.conj(self.coeffs[:, self.grid.mirror_index()])
        scale = np.abs(self.coeffs).max()
        if scale == 0:
            return 0.0
        return float(np.abs(self.coeffs - mirrored).max() / scale)

    def symmetrize_real(self) -> "SpectralField":
        """Project onto the reality-symmetric sector c_k(-lambda) = conj(c_k(lambda))."""
        mirrored = np.conj(self.coeffs[:, self.grid.mirror_index()])
        return self.with_coeffs(0.5 * (self.coeffs + mirrored))


def plancherel_l2_norm(F: SpectralField) -> float:
    """L^2 norm of the represented function via the Plancherel sum."""
    return float(np.sqrt(np.sum(F.plancherel_weights() * np.abs(F.coeffs) ** 2)))


# ---------------------------------------------------------------------------
# Representation matrix elements (slow path, n = 1)


def _require_rank_one(basis: HermiteBasisSpec, what: str):
    if basis.n != 1:
        raise ValidationError(
            f"{what} uses the one-dimensional representation quadrature; "
            "only n = 1 is supported on this path"
        )


def _rep_profiles(basis: HermiteBasisSpec, lam: float, x, y) -> np.ndarray:
    """Diagonal-free building block: all (pi_lambda(x,y,0) h_k, h_l) columns.

    Returns M[k, l, p] for the p-th point (x_p, y_p), each entry computed by
    trapezoid quadrature of exp(i sqrt(lambda) y u) h_k(u + sqrt|lambda| x) h_l(u).
    """
    _require_rank_one(basis, "matrix-coefficient quadrature")
    if lam == 0:
        raise ValidationError("lambda must be nonzero")
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    root = math.sqrt(abs(lam))
    signed_root = math.copysign(root, lam)
    u = basis.u_nodes
    du = u[1] - u[0]
    freq = np.abs(signed_root * y).max()
    if freq * du > 2 * math.pi / MC_MIN_PTS_PER_PERIOD:
        raise GridResolutionError(
            f"u-grid under-resolves oscillation |sqrt(lambda) y| = {freq:.3g}; "
            "use more u_points"
        )
    shifted = u[None, :] + (root * x)[:, None]          # (P, U)
    shifted_tab = hermite_table(basis.k_max, shifted)   # (K+1, P, U)
    osc = np.exp(1j * signed_root * np.outer(y, u))      # (P, U)
    left = shifted_tab * osc[None, :, :] * basis.u_weights
    # tail sanity: the product h_k(u + a) h_l(u) must have died at the ends
    ref = np.abs(shifted_tab).max()
    edge = np.abs(shifted_tab[:, :, [0, -1]]).max() * np.abs(basis.table[:, [0, -1]]).max()
    if ref > 0 and edge > MC_TAIL_TOL * ref:
        raise GridResolutionError(
            "shifted Hermite argument leaves the truncated interval; "
            "enlarge u_halfwidth for this (lambda, g)"
        )
    M = np.einsum("kpu,lu->klp", left, basis.table)
    phase = np.exp(1j * lam * x * y / 2.0)
    return M * phase[None, None, :]


def matrix_coefficient(basis: HermiteBasisSpec, lam: float, g, k: int, l: int) -> complex:
    """Matrix element (pi_lambda(g) h_k, h_l) by direct quadrature (n = 1)."""
    g = _as_group_point(g)
    if not (0 <= k <= basis.k_max and 0 <= l <= basis.k_max):
        raise ValidationError("degrees must lie within the basis truncation")
    M = _rep_profiles(basis, lam, g.x, g.y)
    central = np.exp(1j * lam * g.tau)
    return complex(central * M[k, l, 0])


def laguerre_kernel(basis: HermiteBasisSpec, lam_abs: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Radial kernels b_k(lambda, r) = L_k^(n-1)(|lam| r^2/2) exp(-|lam| r^2/4).

    Shape (k_max+1, len(lam_abs), len(r)).  Three-term recurrence on the
    exponentially weighted functions; underflow to 0 at large argument is the
    correct limit.
    """
    a = basis.n - 1
    xx = 0.5 * np.multiply.outer(np.abs(lam_abs), r**2)   # (J, R)
    out = np.empty((basis.k_max + 1,) + xx.shape)
    out[0] = np.exp(-0.5 * xx)
    if basis.k_max >= 1:
        out[1] = (1.0 + a - xx) * out[0]
    for m in range(1, basis.k_max):
        out[m + 1] = ((2 * m + a + 1 - xx) * out[m] - (m + a) * out[m - 1]) / (m + 1)
    return out


class TransformPlan:
    """Precomputed kernels binding (basis, lambda grid, physical grid).

    Reused across repeated transforms (time stepping); the per-lambda fiber
    contractions are independent and vectorized.
    """

    def __init__(self, basis: HermiteBasisSpec, grid: LambdaGrid,
                 r_nodes, tau_nodes):
        self.basis = basis
        self.grid = grid
        self.r_nodes = np.asarray(r_nodes, float)
        self.tau_nodes = np.asarray(tau_nodes, float)
        template = PhysicalField(self.r_nodes, self.tau_nodes,
                                 np.zeros((self.r_nodes.size, self.tau_nodes.size)),
                                 n=basis.n)
        self.r_w = template.r_weights()
        self.tau_w = template.tau_weights()
        self.kernel = laguerre_kernel(basis, np.abs(grid.nodes), self.r_nodes)
        self.phases = np.exp(1j * np.outer(self.tau_nodes, grid.nodes))  # (T, J)
        self.mult = basis.multiplicities().astype(float)

    def forward(self, values: np.ndarray) -> np.ndarray:
        """(r, tau) samples -> diagonal coefficients c[k, j]."""
        slab = (values * self.tau_w) @ np.conj(self.phases)        # (R, J)
        slab *= self.r_w[:, None]
        return np.einsum("kjr,rj->kj", self.kernel, slab) / self.mult[:, None]

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        """Diagonal coefficients -> complex (r, tau) samples (imag = residual)."""
        slab = np.einsum("kj,kjr->jr", coeffs, self.kernel)        # (J, R)
        slab *= self.grid.weights[:, None]
        return slab.T @ self.phases.T                              # (R, T)


def forward_transform(f: PhysicalField, basis: HermiteBasisSpec, grid: LambdaGrid,
                      method: str = "fast", n_theta: int = 16) -> SpectralField:
    """Group Fourier transform of a z-radial field, diagonal sector.

    method="fast" contracts against the Laguerre kernels; method="quadrature"
    is the independent oracle built on representation matrix elements (n = 1).
    Both share the same (r, tau) quadrature, so their disagreement isolates
    the radial reduction.
    """
    if f.n != basis.n:
        raise ValidationError("field and basis disagree on half-dimension")
    if method == "fast":
        plan = TransformPlan(basis, grid, f.r_nodes, f.tau_nodes)
        coeffs = plan.forward(f.values)
        return SpectralField(basis, grid, coeffs).symmetrize_real()
    if method != "quadrature":
        raise ValidationError(f"unknown transform method {method!r}")
    _require_rank_one(basis, "quadrature-oracle transform")
    wr = f.r_weights()
    wt = f.tau_weights()
    slab = (f.values * wt) @ np.exp(-1j * np.outer(f.tau_nodes, grid.nodes))  # (R, J)
    thetas = np.arange(n_theta) * (2 * math.pi / n_theta)
    coeffs = np.zeros((basis.k_max + 1, grid.nodes.size), complex)
    for j, lam in enumerate(grid.nodes):
        acc = np.zeros((basis.k_max + 1, f.r_nodes.size), complex)
        for th in thetas:
            M = _rep_profiles(basis, lam, f.r_nodes * math.cos(th),
                              f.r_nodes * math.sin(th))
            acc += np.conj(np.einsum("kkp->kp", M))
        acc /= n_theta
        coeffs[:, j] = acc @ (wr * slab[:, j])
    return SpectralField(basis, grid, coeffs).symmetrize_real()


def quadrature_coefficient(f: PhysicalField, basis: HermiteBasisSpec, lam: float,
                           k: int, l: int, n_theta: int = 16) -> complex:
    """Oracle value of the (k, l) transform entry at one lambda (n = 1).

    Used to check diagonal closure: for z-radial f the off-diagonal entries
    must vanish; nothing in this path assumes it.
    """
    wr = f.r_weights()
    wt = f.tau_weights()
    tau_part = (f.values * wt) @ np.exp(-1j * lam * f.tau_nodes)   # (R,)
    thetas = np.arange(n_theta) * (2 * math.pi / n_theta)
    acc = np.zeros(f.r_nodes.size, complex)
    for th in thetas:
        M = _rep_profiles(basis, lam, f.r_nodes * math.cos(th),
                          f.r_nodes * math.sin(th))
        acc += np.conj(M[k, l, :])
    acc /= n_theta
    return complex(np.sum(wr * tau_part * acc))


def inverse_transform(F: SpectralField, r_nodes, tau_nodes,
                      method: str = "fast") -> PhysicalField:
    """Reconstruct (r, tau) samples from diagonal coefficients.

    Requires reality symmetry; the imaginary residual is asserted below
    IMAG_TOL relative to the real magnitude, then discarded.
    """
    defect = F.reality_defect()
    if defect > 1e-8:
        raise SymmetryError(f"spectral field violates reality symmetry ({defect:.2e})")
    r_nodes = np.asarray(r_nodes, float)
    tau_nodes = np.asarray(tau_nodes, float)
    if method == "fast":
        plan = TransformPlan(F.basis, F.grid, r_nodes, tau_nodes)
        complex_vals = plan.inverse(F.coeffs)
    elif method == "quadrature":
        _require_rank_one(F.basis, "quadrature-oracle inverse transform")
        profiles = np.empty((F.basis.k_max + 1, F.grid.nodes.size, r_nodes.size), complex)
        for j, lam in enumerate(F.grid.nodes):
            M = _rep_profiles(F.basis, lam, r_nodes, np.zeros_like(r_nodes))
            profiles[:, j, :] = np.einsum("kkp->kp", M)
        slab = np.einsum("kj,kjr->jr", F.coeffs * F.grid.weights, profiles)
        complex_vals = slab.T @ np.exp(1j * np.outer(tau_nodes, F.grid.nodes)).T
    else:
        raise ValidationError(f"unknown transform method {method!r}")
    scale = np.abs(complex_vals.real).max()
    resid = np.abs(complex_vals.imag).max()
    if scale > 0 and resid > IMAG_TOL * max(scale, 1e-300):
        raise SymmetryError(
            f"imaginary residual {resid:.3e} exceeds {IMAG_TOL:g} of real magnitude {scale:.3e}"
        )
    return PhysicalField(r_nodes, tau_nodes, complex_vals.real, n=F.basis.n)


# ---------------------------------------------------------------------------
# Standard setups


def standard_setup(n: int = 1, preset: str = "default"):
    """Tuned (basis, lambda grid, r_nodes, tau_nodes) bundles.

    "default": transform-integrity work (accurate roundtrips / Parseval).
    "lean":    nonlinear time stepping (cheaper, wider tau window).
    "decay":   frequency-space-only decay experiments (no physical grid).
    """
    if preset == "default":
        basis = HermiteBasisSpec(n=n, k_max=40, u_halfwidth=16.0, u_points=512)
        grid = LambdaGrid.log_spaced(n, 0.05, 10.0, per_sign=161)
        r_nodes = np.linspace(0.0, 12.0, 241)
        tau_nodes = np.linspace(-12.0, 12.0, 193)
        return basis, grid, r_nodes, tau_nodes
    if preset == "lean":
        basis = HermiteBasisSpec(n=n, k_max=32, u_halfwidth=14.0, u_points=136)
        grid = LambdaGrid.log_spaced(n, 2e-3, 5.0, per_sign=49)
        r_nodes = np.linspace(0.0, 20.0, 81)
        tau_nodes = np.linspace(-40.0, 40.0, 401)
        return basis, grid, r_nodes, tau_nodes
    if preset == "decay":
        basis = HermiteBasisSpec(n=n, k_max=4, u_halfwidth=10.0, u_points=64)
        grid = LambdaGrid.log_spaced(n, 1e-6, 1e2, per_sign=128)
        return basis, grid, None, None
    raise ValidationError(f"unknown preset {preset!r}")
