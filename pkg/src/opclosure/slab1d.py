"""Second-order staggered-grid finite-difference solver for 1D moment systems.

Layout: even-indexed moments live at cell centers, odd-indexed moments at cell
faces, so every tridiagonal coupling becomes a compact two-point difference
across the dual grid.  One time step is a kick-drift-kick composition:

* half-step update of the odd moments from the even data,
* full-step update of the even moments from the midpoint odd data,
* half-step update of the odd moments from the new even data,

with the decay/source part of each substep integrated exactly (the advection
forcing is frozen per substep, the decay uses the exact integrating factor
exp(-c_k h)).  Diffusive closures wrap the hyperbolic step between two
Crank-Nicolson half steps on the last moment, in divergence form for
space-dependent coefficients.  The composition is time-symmetric, hence
second order; with kappa = 0 and no source the discrete total energy
sum(u0) dx is conserved to rounding per step.

General linear closures may couple the last moment to moments of its own
parity.  The self-advection term is integrated with Crank-Nicolson (a cyclic
tridiagonal solve) to stay unconditionally stable; other same-parity inputs
are taken as the average of their pre- and post-stage values.

Everything is periodic; the CFL limit is dt <= dx / max(1, rho(B)).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import solve_banded

from .moments import ClosureCoefficients, ClosureSpec, advection_matrix, closure_coefficients

__all__ = ["MomentField1D", "Snapshot", "CflError",
           "make_field", "init_paper_scenario", "step", "run",
           "write_snapshot_csv", "read_snapshot_csv"]

Material = Union[float, Callable[[np.ndarray], np.ndarray]]

#: paper-resolution defaults of the 1D scenario
PAPER_KAPPA = 1.5
PAPER_SIGMA = 1.5
PAPER_CELLS = 1000
PAPER_CFL = 0.8
PAPER_TIMES = (0.1, 0.2, 0.3, 0.4)


class CflError(ValueError):
    """Time step violates the advective stability limit."""


def _sample(coef: Material, x: np.ndarray) -> np.ndarray:
    if callable(coef):
        return np.asarray(coef(x), dtype=float) * np.ones_like(x)
    return float(coef) * np.ones_like(x)


@dataclass(frozen=True)
class MomentField1D:
    """State of a truncated moment system on the staggered periodic mesh.

    ``u[k]`` holds moment k on its grid (centers for even k, faces for odd k);
    materials are sampled on both grids.  ``B`` is the advection matrix
    actually used (the standard tridiagonal one unless overridden, e.g. to run
    the two-component benchmark system).
    """

    N: int
    a: float
    b: float
    n_cells: int
    u: tuple
    kappa_c: np.ndarray
    kappa_f: np.ndarray
    sigma_c: np.ndarray
    sigma_f: np.ndarray
    qhat_c: np.ndarray
    B: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError("need at least two cells")
        if len(self.u) != self.N + 1:
            raise ValueError(f"expected {self.N + 1} moment arrays, got {len(self.u)}")
        for k, arr in enumerate(self.u):
            if arr.shape != (self.n_cells,):
                raise ValueError(f"moment {k} has shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"moment {k} contains non-finite values")
        if self.B.shape != (self.N + 1, self.N + 1):
            raise ValueError("advection matrix must be (N+1) x (N+1)")

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.a + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.a + np.arange(self.n_cells) * self.dx

    def grid(self, k: int) -> np.ndarray:
        return self.centers if k % 2 == 0 else self.faces

    def energy(self) -> float:
        """Discrete total energy sum(u0) dx."""
        return float(self.u[0].sum() * self.dx)


@dataclass(frozen=True)
class Snapshot:
    """All moments co-located at cell centers at one time.

    Odd moments are averaged from the two bracketing faces.
    """

    t: float
    x: np.ndarray
    values: np.ndarray  # (N+1, n_cells)


def make_field(N: int, n_cells: int, kappa: Material, sigma: Material,
               qhat: Material = 0.0, domain=(0.0, 1.0),
               initial: Optional[Sequence] = None,
               B: Optional[np.ndarray] = None) -> MomentField1D:
    """Build a field; ``initial`` entries are callables, arrays, or None (zero)."""
    a, b = float(domain[0]), float(domain[1])
    dx = (b - a) / n_cells
    centers = a + (np.arange(n_cells) + 0.5) * dx
    faces = a + np.arange(n_cells) * dx
    B_eff = advection_matrix(N) if B is None else np.asarray(B, dtype=float)

    u = []
    for k in range(N + 1):
        x = centers if k % 2 == 0 else faces
        ic = None if initial is None or k >= len(initial) else initial[k]
        if ic is None:
            u.append(np.zeros(n_cells))
        elif callable(ic):
            u.append(np.asarray(ic(x), dtype=float))
        else:
            u.append(np.array(ic, dtype=float))
    return MomentField1D(
        N=N, a=a, b=b, n_cells=n_cells, u=tuple(u),
        kappa_c=_sample(kappa, centers), kappa_f=_sample(kappa, faces),
        sigma_c=_sample(sigma, centers), sigma_f=_sample(sigma, faces),
        qhat_c=_sample(qhat, centers), B=B_eff)


def init_paper_scenario(N: int, n_cells: int = PAPER_CELLS) -> MomentField1D:
    """Periodic unit slab, kappa = sigma = 1.5, no source, Gaussian pulse in u0."""
    return make_field(
        N, n_cells, kappa=PAPER_KAPPA, sigma=PAPER_SIGMA, qhat=0.0,
        initial=[lambda x: np.exp(-500.0 * (x - 0.5) ** 2)])


# ---------------------------------------------------------------------------
# stepping kernel
# ---------------------------------------------------------------------------

def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z, stable near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(small, 1.0 + 0.5 * z, np.expm1(z) / np.where(small, 1.0, z))
    return out


def _cyclic_tridiag_solve(lower, diag, upper, rhs):
    """Solve a periodic tridiagonal system via Sherman-Morrison.

    ``lower[i]`` multiplies x[i-1] (lower[0] is the wrap entry M[0, n-1]),
    ``upper[i]`` multiplies x[i+1] (upper[-1] is the wrap entry M[n-1, 0]).
    """
    n = len(diag)
    corner_ul = lower[0]
    corner_lr = upper[-1]
    gamma = -diag[0]
    d = diag.copy()
    d[0] -= gamma
    d[-1] -= corner_ul * corner_lr / gamma

    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = d
    ab[2, :-1] = lower[1:]

    u = np.zeros(n)
    u[0] = gamma
    u[-1] = corner_lr
    try:
        z = solve_banded((1, 1), ab, np.column_stack([rhs, u]))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"implicit tridiagonal solve is singular: {exc}")
    y, q = z[:, 0], z[:, 1]
    v_dot_y = y[0] + (corner_ul / gamma) * y[-1]
    v_dot_q = q[0] + (corner_ul / gamma) * q[-1]
    return y - q * (v_dot_y / (1.0 + v_dot_q))


class _Stepper:
    """Owns one simulation's mutable arrays and per-run caches."""

    def __init__(self, field: MomentField1D, coeffs: ClosureCoefficients):
        self.N = field.N
        self.n = field.n_cells
        self.dx = field.dx
        self.t = field.t
        self.field0 = field
        self.u = [arr.copy() for arr in field.u]
        self.coeffs = coeffs

        self.B_eff = field.B.copy()
        row_mod = np.asarray(coeffs.advection_row_modification, dtype=float)
        if row_mod.shape != (self.N + 1,):
            raise ValueError("closure row modification has wrong length")
        self.B_eff[self.N, :] += row_mod
        self.rho = max(np.abs(np.linalg.eigvals(self.B_eff)).max(), 0.0)

        # decay rate and source of each moment, on that moment's grid
        self.c = []
        self.q = []
        for k in range(self.N + 1):
            kap = field.kappa_c if k % 2 == 0 else field.kappa_f
            sig = field.sigma_c if k % 2 == 0 else field.sigma_f
            self.c.append(kap if k == 0 else kap + sig)
            self.q.append(2.0 * field.kappa_c * field.qhat_c if k == 0
                          else np.zeros(self.n))

        # material total on the last moment's grid, for theta fields
        self.total_N = (field.kappa_c + field.sigma_c if self.N % 2 == 0
                        else field.kappa_f + field.sigma_f)
        self.self_coeff = float(self.B_eff[self.N, self.N])
        self._exp_cache = {}
        self._has_diffusion = _theta_is_active(coeffs, field)

    # -- spatial differences (periodic) ------------------------------------
    def _d_face_to_center(self, f):
        return (np.roll(f, -1) - f) / self.dx

    def _d_center_to_face(self, c):
        return (c - np.roll(c, 1)) / self.dx

    def _d_same(self, g):
        return (np.roll(g, -1) - np.roll(g, 1)) / (2.0 * self.dx)

    def _coupling(self, k, j, arr):
        """Derivative of moment j's array evaluated on moment k's grid."""
        if (j - k) % 2 == 1:
            return self._d_face_to_center(arr) if k % 2 == 0 else self._d_center_to_face(arr)
        return self._d_same(arr)

    def _forcing(self, k, data, averaged=None):
        """Advection + source forcing for moment k, excluding its self term."""
        w = self.q[k].copy() if k == 0 else np.zeros(self.n)
        for j in range(self.N + 1):
            coeff = self.B_eff[k, j]
            if coeff == 0.0 or j == k:
                continue
            arr = data[j] if averaged is None or j not in averaged else averaged[j]
            w -= coeff * self._coupling(k, j, arr)
        return w

    def _decay_factors(self, k, h):
        key = (k, h)
        if key not in self._exp_cache:
            z = -self.c[k] * h
            self._exp_cache[key] = (np.exp(z), h * _phi1(z))
        return self._exp_cache[key]

    def _substep(self, k, h, w):
        """Advance moment k by h with frozen forcing w (exact decay)."""
        if k == self.N and self.self_coeff != 0.0:
            return self._substep_cn_self(k, h, w)
        e, hphi = self._decay_factors(k, h)
        return e * self.u[k] + hphi * w

    def _substep_cn_self(self, k, h, w):
        # Crank-Nicolson on self-advection + decay, trapezoid on the forcing;
        # unconditionally stable for the centered self term.
        a = self.self_coeff
        off = 0.25 * h * a / self.dx      # (h/2) * a / (2 dx)
        diag = 1.0 + 0.5 * h * self.c[k] * np.ones(self.n)
        upper = np.full(self.n, off)
        lower = np.full(self.n, -off)
        u = self.u[k]
        rhs = ((1.0 - 0.5 * h * self.c[k]) * u
               - 0.5 * h * a * self._d_same(u) + h * w)
        return _cyclic_tridiag_solve(lower, diag, upper, rhs)

    def _stage(self, parity, h):
        """Update all moments of one parity; moment N goes last with averaged
        same-parity inputs so the closure forcing is stage-centered."""
        ks = [k for k in range(self.N + 1) if k % 2 == parity]
        if not ks:
            return
        old = {k: self.u[k] for k in ks}
        new = {}
        for k in ks:
            if k == self.N:
                continue
            new[k] = self._substep(k, h, self._forcing(k, self.u))
        if self.N % 2 == parity:
            averaged = {j: 0.5 * (old[j] + new[j]) for j in new
                        if self.B_eff[self.N, j] != 0.0}
            w = self._forcing(self.N, self.u, averaged=averaged)
            new[self.N] = self._substep(self.N, h, w)
        for k, arr in new.items():
            self.u[k] = arr

    # -- diffusion (Crank-Nicolson half steps on the last moment) ----------
    def _diffuse_half(self, dt, theta):
        """One CN half step of length dt/2 for dx(theta dx u_N)."""
        h = 0.5 * dt
        theta = np.asarray(theta, dtype=float) * np.ones(self.n)
        if np.all(theta == 0.0):
            return
        # harmonic face values keep fluxes continuous across material jumps
        left = np.roll(theta, 1)
        theta_f = np.where((theta > 0) & (left > 0),
                           2.0 * theta * left / np.maximum(theta + left, 1e-300),
                           0.0)
        lam = 0.5 * h / self.dx ** 2
        lo = theta_f
        hi = np.roll(theta_f, -1)
        u = self.u[self.N]
        Lu = lam * (hi * (np.roll(u, -1) - u) - lo * (u - np.roll(u, 1)))
        diag = 1.0 + lam * (hi + lo)
        lower = -lam * lo
        upper = -lam * hi
        self.u[self.N] = _cyclic_tridiag_solve(lower, diag, upper, u + Lu)

    # -- one full step ------------------------------------------------------
    def step(self, dt):
        if dt <= 0:
            raise ValueError("dt must be positive")
        limit = self.dx / max(1.0, self.rho)
        if dt > limit * (1.0 + 1e-9):
            raise CflError(
                f"dt = {dt:.3e} exceeds the advective limit {limit:.3e} "
                f"(dx = {self.dx:.3e}, spectral radius {self.rho:.3f})")
        theta = None
        if self._has_diffusion:
            theta = self.coeffs.diffusion_coefficient(self.t + 0.5 * dt)
            self._diffuse_half(dt, theta)
        self._stage(1, 0.5 * dt)
        self._stage(0, dt)
        self._stage(1, 0.5 * dt)
        if self._has_diffusion:
            self._diffuse_half(dt, theta)
        self.t += dt

    def to_field(self) -> MomentField1D:
        return replace(self.field0, u=tuple(arr.copy() for arr in self.u), t=self.t)

    def snapshot(self) -> Snapshot:
        values = np.empty((self.N + 1, self.n))
        for k in range(self.N + 1):
            if k % 2 == 0:
                values[k] = self.u[k]
            else:
                values[k] = 0.5 * (self.u[k] + np.roll(self.u[k], -1))
        return Snapshot(t=self.t, x=self.field0.centers, values=values)


def _theta_is_active(coeffs: ClosureCoefficients, field: MomentField1D) -> bool:
    probe = np.asarray(coeffs.diffusion_coefficient(
        max(field.t, 1.0)), dtype=float)
    return bool(np.any(probe != 0.0))


def step(field: MomentField1D, coeffs: ClosureCoefficients, dt: float) -> MomentField1D:
    """Advance one time step; returns a new field (the input is untouched)."""
    stepper = _Stepper(field, coeffs)
    stepper.step(dt)
    return stepper.to_field()


def run(field: MomentField1D, closure: ClosureSpec, snapshot_times: Sequence[float],
        cfl: float = PAPER_CFL):
    """March to each requested time exactly and return the snapshots.

    The base step is cfl * dx; the step before each snapshot time is shortened
    to land on it exactly.  Deterministic for fixed inputs.
    """
    times = list(snapshot_times)
    if sorted(times) != times:
        raise ValueError("snapshot times must be sorted")
    kap = field.kappa_c if field.N % 2 == 0 else field.kappa_f
    sig = field.sigma_c if field.N % 2 == 0 else field.sigma_f
    coeffs = closure_coefficients(closure, kap, sig, t=field.t)
    stepper = _Stepper(field, coeffs)
    dt_base = cfl * field.dx
    out = []
    for target in times:
        if target < stepper.t - 1e-12:
            raise ValueError("snapshot times must not precede the current time")
        while target - stepper.t > 1e-12:
            dt = min(dt_base, target - stepper.t)
            stepper.step(dt)
        stepper.t = target  # absorb accumulated rounding; |drift| <= 1e-12
        out.append(stepper.snapshot())
    return out


# ---------------------------------------------------------------------------
# snapshot CSV interface
# ---------------------------------------------------------------------------

def write_snapshot_csv(snapshot: Snapshot, path) -> None:
    """Write `# t=<time>` then x,u0,...,uN rows with 15 significant digits."""
    n_moments = snapshot.values.shape[0]
    header = ",".join(["x"] + [f"u{k}" for k in range(n_moments)])
    with open(path, "w", newline="") as fh:
        fh.write(f"# t={snapshot.t:.15g}\n")
        fh.write(header + "\n")
        for i in range(len(snapshot.x)):
            row = [f"{snapshot.x[i]:.15g}"] + [
                f"{snapshot.values[k, i]:.15g}" for k in range(n_moments)]
            fh.write(",".join(row) + "\n")


def read_snapshot_csv(path) -> Snapshot:
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# t="):
            raise ValueError(f"{path}: missing '# t=' header line")
        t = float(first[4:])
        fh.readline()  # column names
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return Snapshot(t=t, x=data[:, 0], values=data[:, 1:].T)
