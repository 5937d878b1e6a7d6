"""Finite-dimensional Gaussian measures and their conditional-expectation projections.

A :class:`GaussianMeasure` is a symmetric positive-definite covariance ``A``
together with a mean ``m`` and a split index ``k``: the first ``k`` coordinates
are the resolved ("C") variables, the remainder are the unresolved ("F")
variables that get averaged out.  Conditioning on the resolved coordinates is
affine linear; with a centered measure it is the matrix

    E = [[I, 0], [A_FC A_CC^-1, 0]],     F = I - E,

and every linear closure in this package is some disguise of these two
projections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = ["MeasureError", "GaussianMeasure", "ProjectionPair",
           "condition", "projection_pair", "project_matrix"]

#: relative tolerance for symmetry / positivity checks of covariances
SPD_TOL = 1e-12


class MeasureError(ValueError):
    """Raised for covariances that are not usable (non-SPD, bad split, ...)."""


@dataclass(frozen=True)
class GaussianMeasure:
    """Gaussian measure on R^n with covariance ``A``, mean ``m``, split ``k``.

    Parameters
    ----------
    A : (n, n) ndarray
        Symmetric positive definite covariance-like matrix.
    m : (n,) ndarray
        Mean vector.
    k : int
        Number of resolved (leading) coordinates, ``0 < k < n``.
    """

    A: np.ndarray
    m: np.ndarray
    k: int
    _cc_factor: tuple = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        m = np.asarray(self.m, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise MeasureError(f"covariance A must be square, got shape {A.shape}")
        n = A.shape[0]
        if m.shape != (n,):
            raise MeasureError(f"mean m has shape {m.shape}, expected ({n},)")
        if not (0 < self.k < n):
            raise MeasureError(f"split index k={self.k} must satisfy 0 < k < n={n}")
        scale = np.abs(A).max()
        if scale == 0.0 or not np.all(np.isfinite(A)):
            raise MeasureError("covariance A must be finite and nonzero")
        if np.abs(A - A.T).max() > SPD_TOL * scale:
            raise MeasureError("covariance A is not symmetric to within tolerance")
        eigs = np.linalg.eigvalsh(0.5 * (A + A.T))
        if eigs.min() <= SPD_TOL * eigs.max():
            raise MeasureError(
                f"covariance A is not positive definite (min eigenvalue {eigs.min():.3e})")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "m", m)
        try:
            factor = cho_factor(A[: self.k, : self.k])
        except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by SPD check
            raise MeasureError(f"resolved covariance block A_CC is singular: {exc}")
        object.__setattr__(self, "_cc_factor", factor)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    # block views -----------------------------------------------------------
    @property
    def A_CC(self) -> np.ndarray:
        return self.A[: self.k, : self.k]

    @property
    def A_CF(self) -> np.ndarray:
        return self.A[: self.k, self.k:]

    @property
    def A_FC(self) -> np.ndarray:
        return self.A[self.k:, : self.k]

    @property
    def A_FF(self) -> np.ndarray:
        return self.A[self.k:, self.k:]

    @property
    def m_C(self) -> np.ndarray:
        return self.m[: self.k]

    @property
    def m_F(self) -> np.ndarray:
        return self.m[self.k:]

    def solve_cc(self, rhs: np.ndarray) -> np.ndarray:
        """Apply A_CC^-1 through the cached Cholesky factorization."""
        return cho_solve(self._cc_factor, rhs)

    def coupling(self) -> np.ndarray:
        """The (n-k, k) matrix W = A_FC A_CC^-1 that defines conditioning."""
        return self.solve_cc(self.A_FC.T).T


def centered(A, k: int) -> GaussianMeasure:
    """Convenience constructor for a zero-mean measure."""
    A = np.asarray(A, dtype=float)
    return GaussianMeasure(A=A, m=np.zeros(A.shape[0]), k=k)


@dataclass(frozen=True)
class ProjectionPair:
    """Complementary projections E (onto resolved data) and F = I - E."""

    E: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        E, F = np.asarray(self.E), np.asarray(self.F)
        n = E.shape[0]
        eye = np.eye(n)
        scale = max(np.abs(E).max(), 1.0)
        for name, resid in (("E+F=I", E + F - eye), ("E^2=E", E @ E - E),
                            ("F^2=F", F @ F - F), ("EF=0", E @ F), ("FE=0", F @ E)):
            if np.abs(resid).max() > 1e-12 * scale * n:
                raise MeasureError(f"projection identity {name} violated "
                                   f"(residual {np.abs(resid).max():.3e})")


def condition(measure: GaussianMeasure, x_C) -> np.ndarray:
    """Conditional expectation of the full vector given resolved values x_C.

    Returns the length-n vector ``[x_C ; m_F + A_FC A_CC^-1 (x_C - m_C)]``.
    The first k entries are x_C verbatim.
    """
    x_C = np.asarray(x_C, dtype=float)
    if x_C.shape != (measure.k,):
        raise MeasureError(f"x_C has shape {x_C.shape}, expected ({measure.k},)")
    x_F = measure.m_F + measure.A_FC @ measure.solve_cc(x_C - measure.m_C)
    return np.concatenate([x_C, x_F])


def projection_pair(measure: GaussianMeasure) -> ProjectionPair:
    """Projection matrices E = [[I,0],[W,0]] and F = I - E with W = A_FC A_CC^-1."""
    n, k = measure.n, measure.k
    E = np.zeros((n, n))
    E[:k, :k] = np.eye(k)
    E[k:, :k] = measure.coupling()
    return ProjectionPair(E=E, F=np.eye(n) - E)


def project_matrix(B, measure: GaussianMeasure) -> np.ndarray:
    """Project a linear map through the measure: returns B @ E.

    The result has left block column ``[B_CC + B_CF W ; B_FC + B_FF W]`` and an
    exactly zero right block column.  ``B`` may be complex (the covariance
    stays real); this is what the per-Fourier-mode generators need.
    """
    B = np.asarray(B)
    n, k = measure.n, measure.k
    if B.shape != (n, n):
        raise MeasureError(f"matrix has shape {B.shape}, expected ({n}, {n})")
    W = measure.coupling()
    out = np.zeros_like(B, dtype=np.result_type(B.dtype, float))
    out[:, :k] = B[:, :k] + B[:, k:] @ W
    return out
