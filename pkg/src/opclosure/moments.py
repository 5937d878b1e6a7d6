"""Truncated slab-geometry radiation moment hierarchy and closure coefficients.

The angular expansion of the slab transfer equation in Legendre polynomials
gives the tridiagonal system

    d/dt u_k + b_{k,k-1} dx u_{k-1} + b_{k,k+1} dx u_{k+1} = -c_k u_k + q_k,

with b_{k,k+1} = (k+1)/(2k+1), b_{k,k-1} = k/(2k+1), c_0 = kappa,
c_k = kappa + sigma for k >= 1, and q_0 = 2 kappa qhat.  Truncating at moment
N requires a closure for the u_{N+1} appearing in the last equation; this
module produces the coefficients for every supported closure family:

* ``pn``                    -- drop u_{N+1} (decoupled measure);
* ``general_linear``        -- replace u_{N+1} by a measure-induced linear
                               combination of the resolved moments;
* ``diffusion`` /
  ``diffusion_correction``  -- add theta dxx u_N with
                               theta = (N+1)^2 / ((2N+1)(2N+3)(kappa+sigma));
* ``crescendo`` variants    -- same but theta ramps in as min(t, tau) with
                               tau = 1/(kappa+sigma);
* ``trapezoidal``           -- half the constant-correction coefficient.

Space-dependent kappa, sigma are supported: theta becomes a per-cell field
and the solver applies it in divergence form dx(theta(x) dx u_N).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .measures import GaussianMeasure

__all__ = ["MomentMatrices", "ClosureSpec", "ClosureCoefficients",
           "build_matrices", "closure_coefficients", "general_linear_closure",
           "reconstruct_intensity", "FAMILIES"]

Coefficient = Union[float, np.ndarray]

#: closure family names; the *_correction names are aliases used for N > 0
FAMILIES = ("pn", "diffusion", "diffusion_correction",
            "crescendo", "crescendo_correction",
            "trapezoidal", "general_linear")

_DIFFUSIVE = {"diffusion", "diffusion_correction", "crescendo",
              "crescendo_correction", "trapezoidal"}
_ALIASES = {"diffusion_correction": "diffusion", "crescendo_correction": "crescendo"}


def advection_matrix(N: int) -> np.ndarray:
    """Tridiagonal advection matrix of the first N+1 moments (zero diagonal)."""
    B = np.zeros((N + 1, N + 1))
    for k in range(N + 1):
        if k + 1 <= N:
            B[k, k + 1] = (k + 1) / (2 * k + 1)
        if k - 1 >= 0:
            B[k, k - 1] = k / (2 * k + 1)
    return B


def coupling_in(N: int) -> float:
    """Coefficient b_{N,N+1} through which the first discarded moment acts."""
    return (N + 1) / (2 * N + 1)


def coupling_out(N: int) -> float:
    """Coefficient b_{N+1,N} through which the last kept moment drives u_{N+1}."""
    return (N + 1) / (2 * N + 3)


@dataclass(frozen=True)
class MomentMatrices:
    """Truncated moment-system matrices.

    ``B`` is the (N+1) x (N+1) advection matrix; ``C`` holds the diagonal
    decay entries (kappa, kappa+sigma, ...) and ``q`` the source vector
    (2 kappa qhat, 0, ...).  With space-dependent coefficients C and q gain a
    trailing cell axis.
    """

    N: int
    B: np.ndarray
    C: np.ndarray
    q: np.ndarray


def build_matrices(N: int, kappa: Coefficient, sigma: Coefficient,
                   qhat: Coefficient = 0.0) -> MomentMatrices:
    """Assemble the truncated moment matrices for highest retained index N."""
    if N < 0:
        raise ValueError("moment order N must be nonnegative")
    kappa = np.asarray(kappa, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    qhat = np.asarray(qhat, dtype=float)
    if np.any(kappa < 0) or np.any(sigma < 0):
        raise ValueError("absorption and scattering coefficients must be >= 0")
    B = advection_matrix(N)
    rows = [kappa] + [kappa + sigma] * N
    C = np.stack(np.broadcast_arrays(*rows)) if N > 0 else kappa[np.newaxis, ...]
    q = np.zeros_like(C)
    q[0] = 2.0 * kappa * qhat
    return MomentMatrices(N=N, B=B, C=C, q=q)


@dataclass(frozen=True)
class ClosureSpec:
    """Choice of closure family and its parameters.

    ``measure`` is only used by the general_linear family and must be a
    Gaussian measure on moments 0..M split at k = N+1.
    """

    family: str
    N: int
    measure: Optional[GaussianMeasure] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown closure family {self.family!r}; "
                             f"choose one of {FAMILIES}")
        if self.N < 0:
            raise ValueError("closure order N must be >= 0")
        if self.family == "general_linear":
            if self.measure is None:
                raise ValueError("general_linear closure requires a measure")
            if self.measure.k != self.N + 1:
                raise ValueError(
                    f"general_linear measure must be split at k = N+1 = {self.N + 1}, "
                    f"got k = {self.measure.k}")


@dataclass(frozen=True)
class ClosureCoefficients:
    """What a closure adds to the truncated system.

    ``advection_row_modification`` is added to the last row of B.
    ``diffusion_coefficient`` maps time to theta (scalar, or per-cell field
    when the material coefficients are fields); it is identically zero for
    hyperbolic families.
    """

    advection_row_modification: np.ndarray
    diffusion_coefficient: Callable[[float], Coefficient]

    def theta(self, t: float) -> Coefficient:
        return self.diffusion_coefficient(t)


def diffusion_strength(N: int) -> float:
    """Dimensionless prefactor (N+1)^2 / ((2N+1)(2N+3)) of the corrective diffusion."""
    return (N + 1) ** 2 / ((2 * N + 1) * (2 * N + 3))


def closure_coefficients(spec: ClosureSpec, kappa: Coefficient, sigma: Coefficient,
                         t: float = 0.0) -> ClosureCoefficients:
    """Evaluate the closure for given material coefficients.

    ``t`` is validated here (the crescendo families need t >= 0); the returned
    coefficients carry theta as a function of time so solvers can sample it at
    half-step times.
    """
    N = spec.N
    row = np.zeros(N + 1)
    family = _ALIASES.get(spec.family, spec.family)

    if family == "pn":
        theta_fn = _constant_theta(0.0)
    elif family == "general_linear":
        row = general_linear_closure(spec.measure, N)
        theta_fn = _constant_theta(0.0)
    else:
        kappa = np.asarray(kappa, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        total = kappa + sigma
        if np.any(total <= 0.0):
            raise ValueError(
                f"{spec.family} closure needs kappa + sigma > 0 everywhere "
                "(the decay time scale tau = 1/(kappa+sigma) is undefined)")
        tau = 1.0 / total
        strength = diffusion_strength(N)
        if family == "diffusion":
            theta_fn = _constant_theta(strength * tau)
        elif family == "trapezoidal":
            theta_fn = _constant_theta(0.5 * strength * tau)
        else:  # crescendo
            if t < 0:
                raise ValueError("crescendo closure needs t >= 0")

            def theta_fn(time, _tau=tau, _s=strength):
                return _s * np.minimum(time, _tau)

    return ClosureCoefficients(advection_row_modification=row,
                               diffusion_coefficient=theta_fn)


def _constant_theta(value):
    return lambda t: value


def general_linear_closure(measure: GaussianMeasure, N: int,
                           max_unresolved: int = 3) -> np.ndarray:
    """Closure row induced by a measure on moments 0..M with split k = N+1.

    Returns b_{N,N+1} times the first row of A_FC A_CC^-1; only that row can
    reach the truncated system because the coupling matrix into the resolved
    block has a single nonzero entry.  Measures with more than
    ``max_unresolved`` unresolved moments are truncated (harmlessly: extra
    rows of A_FC never touch the first row) with a warning.
    """
    if measure.k != N + 1:
        raise ValueError(f"measure split k = {measure.k} must equal N+1 = {N + 1}")
    if measure.n - measure.k > max_unresolved:
        warnings.warn(
            f"measure has {measure.n - measure.k} unresolved moments; only the "
            f"first matters for the closure row, truncating to {max_unresolved}",
            stacklevel=2)
        keep = measure.k + max_unresolved
        measure = GaussianMeasure(A=measure.A[:keep, :keep],
                                  m=measure.m[:keep], k=measure.k)
    W = measure.coupling()
    return coupling_in(N) * W[0, :]


def reconstruct_intensity(moments: np.ndarray, mu) -> np.ndarray:
    """Angular intensity sum_l (2l+1)/2 u_l P_l(mu) by three-term recurrence."""
    moments = np.asarray(moments, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(np.abs(mu) > 1.0):
        raise ValueError("direction cosine mu must lie in [-1, 1]")
    p_prev = np.ones_like(mu)
    out = 0.5 * moments[0] * p_prev
    if len(moments) == 1:
        return out
    p = mu.copy()
    out = out + 1.5 * moments[1] * p
    for l in range(2, len(moments)):
        p_prev, p = p, ((2 * l - 1) * mu * p - (l - 1) * p_prev) / l
        out = out + (2 * l + 1) / 2 * moments[l] * p
    return out
