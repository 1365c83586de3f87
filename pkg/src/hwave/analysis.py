"""Exponent calculators, inequality ratio checks, and test-function calculus.

The closed-form calculators are the single source of truth for every
theoretical exponent quoted by the experiment harness: the critical exponent
1 + 4/(Q + 2 gamma), the crossover order gamma_tilde solving
2 g^2 + Q g - 2 Q = 0, the lifespan scaling exponent, and the
Gagliardo-Nirenberg interpolation fraction.  The bump-function machinery
evaluates the scaled test function and its derivatives under the group's
horizontal Laplacian analytically; a finite-difference oracle along the
left-invariant vector fields validates it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, ValidationError
from .fourier import PhysicalField, forward_transform
from .sobolev import DataProfileSpec, sobolev_norm

# ---------------------------------------------------------------------------
# Closed-form exponents


def critical_exponent(Q: float, gamma: float) -> float:
    """Threshold power 1 + 4/(Q + 2 gamma) separating global existence from blow-up."""
    if Q < 4:
        raise ValidationError("homogeneous dimension must be >= 4")
    if gamma < 0:
        raise ValidationError("gamma must be nonnegative")
    return 1.0 + 4.0 / (Q + 2.0 * gamma)


def gamma_tilde(Q: float) -> float:
    """Positive root of 2 g^2 + Q g - 2 Q = 0; always below 2."""
    if Q < 4:
        raise ValidationError("homogeneous dimension must be >= 4")
    return (-Q + math.sqrt(Q * Q + 16.0 * Q)) / 4.0


def lifespan_exponent(Q: float, gamma: float, p: float) -> float:
    """Exponent a in the subcritical lifespan law T ~ eps^a (a < 0).

    a = -1/(1/(p-1) - (Q/4 + gamma/2)); the denominator vanishes exactly at
    the critical power, where the exponent is undefined.
    """
    if p <= 1:
        raise ValidationError("p must exceed 1")
    denom = 1.0 / (p - 1.0) - (Q / 4.0 + gamma / 2.0)
    if denom <= 0:
        raise AdmissibilityError(
            f"p = {p} is at or above the critical exponent {critical_exponent(Q, gamma):.6g}; "
            "the subcritical lifespan exponent is undefined"
        )
    return -1.0 / denom


def blowup_sign_exponent(Q: float, gamma: float, p: float) -> float:
    """Power of the scale parameter in the test-function contradiction.

    Q + 2 - 2 p' - Q/2 + gamma with p' = p/(p-1): negative exactly below the
    critical exponent, zero at it.
    """
    if p <= 1:
        raise ValidationError("p must exceed 1")
    p_conj = p / (p - 1.0)
    return Q + 2.0 - 2.0 * p_conj - Q / 2.0 + gamma


def gn_theta(q: float, s: float, r: float, Q: float):
    """Interpolation fraction theta of the Gagliardo-Nirenberg inequality.

    theta = (1/2 - 1/q) / (s/Q + 1/2 - 1/r); returns (theta, admissible) with
    admissibility per the stated ranges s in (0,1], 1 < r < Q/s,
    2 <= q <= rQ/(Q - sr), theta in [0,1].
    """
    if min(q, s, r, Q) <= 0:
        raise ValidationError("all exponents must be positive")
    denom = s / Q + 0.5 - 1.0 / r
    if denom == 0:
        raise AdmissibilityError("excluded case s/Q + 1/2 = 1/r")
    theta = (0.5 - 1.0 / q) / denom
    admissible = (
        0 < s <= 1
        and 1 < r < Q / s
        and 2 <= q <= r * Q / (Q - s * r)
        and 0 <= theta <= 1
    )
    return theta, admissible


# ---------------------------------------------------------------------------
# Measured inequality ratios

_ZERO_GUARD = 1e-14


def gn_ratio(f: PhysicalField, q: float, s: float, basis, grid) -> float:
    """||f||_q / (||f||_{Hs-dot}^theta ||f||_2^(1-theta)) on the polar grid, r = 2.

    Scale-invariant by homogeneity; its boundedness over a field family is
    the testable content of the inequality.
    """
    Q = 2 * f.n + 2
    theta, ok = gn_theta(q, s, 2.0, Q)
    if not ok:
        raise AdmissibilityError(f"(q={q}, s={s}, r=2, Q={Q}) outside the admissible range")
    l2 = f.l2_norm()
    if l2 < _ZERO_GUARD:
        raise ValidationError("field is numerically zero")
    F = forward_transform(f, basis, grid)
    hs = sobolev_norm(F, s)
    return f.lq_norm(q) / (hs**theta * l2 ** (1.0 - theta))


def hls_ratio(f: PhysicalField, a: float, p_in: float, basis, grid) -> float:
    """||f||_{H^{-a}-dot} / ||f||_{L^p} for the Sobolev-embedding pairing a/Q = 1/p - 1/2."""
    Q = 2 * f.n + 2
    if not (1 < p_in < 2):
        raise AdmissibilityError("p must lie in (1, 2) for the q = 2 case")
    a_expected = Q * (1.0 / p_in - 0.5)
    if abs(a - a_expected) > 1e-12 * max(1.0, abs(a)):
        raise AdmissibilityError(
            f"inadmissible exponent relation: a = {a} but Q(1/p - 1/2) = {a_expected}"
        )
    if not (0 < a < Q / 2):
        raise AdmissibilityError("order a must lie in (0, Q/2)")
    lp = f.lq_norm(p_in)
    if lp < _ZERO_GUARD:
        raise ValidationError("field is numerically zero")
    F = forward_transform(f, basis, grid)
    return sobolev_norm(F, -a) / lp


# ---------------------------------------------------------------------------
# Smooth bump profiles and the scaled test function


def _smoothstep(u):
    """C-infinity transition 1 -> 0 on [0, 1] built from exp(-1/v) mollifier pieces.

    All derivatives vanish at both ends, so gluing to the plateau and to the
    zero tail is C-infinity.
    """
    u = np.asarray(u, float)
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        fu = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
        fc = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
    return fu / (fu + fc)


def _bump(rho, plateau: float, support: float):
    """1 on [0, plateau], smoothstep transition, 0 beyond support."""
    rho = np.abs(np.asarray(rho, float))
    u = (rho - plateau) / (support - plateau)
    return np.where(rho <= plateau, 1.0, np.where(rho >= support, 0.0, _smoothstep(np.clip(u, 0.0, 1.0))))


def _bump_derivs(rho, plateau: float, support: float, h: float = 1e-5):
    """(value, d/drho, d2/drho2) of the radial bump profile.

    Richardson-free central differences on the smooth transition; the profile
    is C-infinity so modest h gives ~1e-8 accuracy, far below the use sites'
    tolerances.
    """
    f0 = _bump(rho, plateau, support)
    fp = (_bump(rho + h, plateau, support) - _bump(rho - h, plateau, support)) / (2 * h)
    fpp = (_bump(rho + h, plateau, support) - 2 * f0 + _bump(rho - h, plateau, support)) / h**2
    return f0, fp, fpp


@dataclass(frozen=True)
class BumpSpec:
    """Spatial profile alpha (plateau 1/2, support 1), central/temporal profile
    beta (plateau 1/4, support 1), and the scale parameter R > 1.

    beta is even and non-increasing on [0, oo), as the sign argument needs.
    """

    R: float
    alpha_plateau: float = 0.5
    alpha_support: float = 1.0
    beta_plateau: float = 0.25
    beta_support: float = 1.0

    def __post_init__(self):
        if self.R <= 1:
            raise ValidationError("scale parameter R must exceed 1")
        if not (0 < self.alpha_plateau < self.alpha_support):
            raise ValidationError("alpha plateau must precede its support radius")
        if not (0 < self.beta_plateau < self.beta_support):
            raise ValidationError("beta plateau must precede its support radius")

    def alpha(self, x):
        """Spatial bump on R^n evaluated radially."""
        return _bump(x, self.alpha_plateau, self.alpha_support)

    def beta(self, v):
        return _bump(v, self.beta_plateau, self.beta_support)

    def beta_derivs(self, v):
        return _bump_derivs(v, self.beta_plateau, self.beta_support)

    def alpha_derivs(self, rho):
        return _bump_derivs(rho, self.alpha_plateau, self.alpha_support)


def bump_gradient_constant(spec: BumpSpec, p: float, which: str = "beta",
                           n_samples: int = 2001):
    """Measured constant in |profile'| <= C * profile^(1/p) on the transition.

    The bound holds for mollifier bumps with a p-dependent constant; this
    reports it instead of assuming it.
    """
    if which == "beta":
        lo, hi, derivs = spec.beta_plateau, spec.beta_support, spec.beta_derivs
    elif which == "alpha":
        lo, hi, derivs = spec.alpha_plateau, spec.alpha_support, spec.alpha_derivs
    else:
        raise ValidationError("which must be 'alpha' or 'beta'")
    # stay off the outer edge, where profile^(1/p) underflows before profile'
    rho = np.linspace(lo, lo + 0.985 * (hi - lo), n_samples)
    f, fp, _ = derivs(rho)
    mask = f > 1e-250
    return float(np.max(np.abs(fp[mask]) / f[mask] ** (1.0 / p)))


def test_function_eval(spec: BumpSpec, n: int, t: float, g):
    """(phi, dt_phi, dtt_phi, L_phi) of the scaled separable test function.

    phi_R(t, x, y, tau) = beta(t/R^2) alpha(x/R) alpha(y/R) beta(tau/R^2); the
    horizontal Laplacian expands into the two Euclidean Laplacian terms, the
    mixed x_j d_j alpha x beta' terms, and the (|x|^2+|y|^2) beta'' term, all
    evaluated analytically from the profiles (no differencing through phi).
    """
    x, y, tau = g
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    if x.size != n or y.size != n:
        raise ValidationError(f"expected {n}-vectors for x and y")
    R = spec.R
    R2 = R * R
    rx = float(np.linalg.norm(x))
    ry = float(np.linalg.norm(y))
    ax, axp, axpp = spec.alpha_derivs(rx / R)
    ay, ayp, aypp = spec.alpha_derivs(ry / R)
    bt, btp, btpp = spec.beta_derivs(t / R2)
    bs, bsp, bspp = spec.beta_derivs(tau / R2)

    phi = bt * ax * ay * bs
    dt_phi = btp / R2 * ax * ay * bs
    dtt_phi = btpp / R2**2 * ax * ay * bs

    # radial Laplacian of the scaled profile: [alpha''(rho) + (n-1) alpha'(rho)/rho] / R^2
    def lap_alpha(r_abs, a1, a2):
        if r_abs == 0.0:
            return n * a2 / R2          # limit of a2 + (n-1) a1/rho with a1 ~ a2 rho
        return (a2 + (n - 1) * a1 / (r_abs / R)) / R2

    lap_x = lap_alpha(rx, axp, axpp)
    lap_y = lap_alpha(ry, ayp, aypp)
    # gradient components: d/dz_j alpha(|z|/R) = alpha'(|z|/R) z_j / (|z| R)
    gx = axp * (x / (rx * R) if rx > 0 else np.zeros(n))
    gy = ayp * (y / (ry * R) if ry > 0 else np.zeros(n))

    L_phi = bt * bs * (lap_x * ay + ax * lap_y)
    L_phi += bt * (bsp / R2) * (float(x @ gy) * ax - float(y @ gx) * ay)
    L_phi += 0.25 * (rx**2 + ry**2) * bt * ax * ay * (bspp / R2**2)
    return float(phi), float(dt_phi), float(dtt_phi), float(L_phi)


def sublaplacian_fd(spec: BumpSpec, n: int, t: float, g, h: float = 1e-3) -> float:
    """Finite-difference oracle for L phi through the left-invariant fields.

    X_j^2 phi(g) is the second difference of phi along the group flow
    g o (h e_j, 0, 0), and likewise Y_j along (0, h e_j, 0); this never uses
    the analytic expansion.
    """
    x, y, tau = g
    x = np.asarray(x, float).copy()
    y = np.asarray(y, float).copy()

    def phi_at(xx, yy, tt):
        return test_function_eval(spec, n, t, (xx, yy, tt))[0]

    base = 2.0 * (2 * n) * phi_at(x, y, tau)
    acc = -base
    step = h * spec.R
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        # group product (x,y,tau) o (e,0,0) = (x+e, y, tau - y_j*step/2)
        acc += phi_at(x + e, y, tau - y[j] * step / 2.0)
        acc += phi_at(x - e, y, tau + y[j] * step / 2.0)
        # (x,y,tau) o (0,e,0) = (x, y+e, tau + x_j*step/2)
        acc += phi_at(x, y + e, tau + x[j] * step / 2.0)
        acc += phi_at(x, y - e, tau - x[j] * step / 2.0)
    return acc / step**2


def data_lower_bound_check(profile: DataProfileSpec, spec: BumpSpec,
                           n_r: int = 400, n_theta: int = 32, n_tau: int = 500):
    """Integral of (u0 + u1) against the frozen-time test function vs its bound.

    With u0 = u1 = the profile, computes int 2*profile(g) phi_R(0, g) dg over
    H^1 by nested (r, angle, tau) quadrature and returns it together with the
    reference bound C0 * R^(Q/2 - gamma) / log R.
    """
    if profile.n != 1:
        raise ValidationError("the quadrature path is implemented for n = 1")
    R = spec.R
    r = np.linspace(0.0, R * spec.alpha_support * math.sqrt(2.0), n_r + 1)[1:]
    theta = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    # geometric tau panels resolve the unit core and reach the support edge
    tau_half = R * R * spec.beta_support
    edges = np.concatenate([[0.0], np.geomspace(min(1e-2, tau_half / 10), tau_half, n_tau)])
    tau_mid = 0.5 * (edges[1:] + edges[:-1])
    tau_w = np.diff(edges)

    alpha_grid = spec.alpha(np.abs(np.outer(r, np.cos(theta))) / R) * \
        spec.alpha(np.abs(np.outer(r, np.sin(theta))) / R)
    ang = alpha_grid.mean(axis=1) * 2.0 * math.pi          # (n_r,)
    beta_tau = spec.beta(tau_mid / R**2)                    # (n_tau,)
    prof = profile(r[:, None], tau_mid[None, :])            # (n_r, n_tau)
    rw = np.gradient(r)
    # tau runs over both signs (integrand tau-even); u0 + u1 doubles the profile
    one_sided = np.einsum("i,i,j,ij->", rw * r, ang, tau_w * beta_tau, prof)
    integral = 2.0 * 2.0 * one_sided
    bound = profile.C0 * R ** (profile.Q / 2.0 - profile.gamma) / math.log(R)
    return float(integral), float(bound)
