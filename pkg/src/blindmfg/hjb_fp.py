"""Backward HJB and forward Fokker-Planck solvers on the periodic grid.

The HJB step treats the Hamiltonian explicitly with a Godunov upwind flux
and the diffusion implicitly (circulant solve via FFT).  The FP step is
built as the exact discrete adjoint of the linearized HJB step, so the
duality pairing <HJB-step phi, m> = <phi, FP-step m> holds to machine
precision and mass/positivity are preserved by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .torus import Density, ScalarField, TorusGrid, density_from_values, wasserstein1_circle

__all__ = [
    "Hamiltonian",
    "TimeGrid",
    "DriftField",
    "ValuePath",
    "DensityPath",
    "solve_hjb_backward",
    "optimal_drift",
    "solve_fp_forward",
    "fp_holder_modulus",
    "hjb_linear_step",
    "fp_step",
    "implicit_diffusion",
    "upwind_advection",
]

_CFL_SLACK = 1.0 + 1e-12


@dataclass(frozen=True)
class Hamiltonian:
    """Catalogue of convex Hamiltonians with H(x,0)=0, applied per axis.

    kinds: 'abs' (|p|), 'smoothed_abs' (sqrt(p^2+delta^2)-delta),
    'capped_quadratic' (p^2/2 capped to slope `cap`).
    """

    kind: str
    smoothing: float = 0.0
    cap: float = 1.0

    def __post_init__(self):
        if self.kind not in ("abs", "smoothed_abs", "capped_quadratic"):
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")
        if self.kind == "smoothed_abs" and self.smoothing < 0:
            raise ValueError("smoothing must be >= 0")
        if self.kind == "capped_quadratic" and self.cap <= 0:
            raise ValueError("cap must be > 0")

    @property
    def lipschitz(self) -> float:
        return self.cap if self.kind == "capped_quadratic" else 1.0

    def profile(self, p: np.ndarray) -> np.ndarray:
        """One-axis value h(p)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "abs":
            return np.abs(p)
        if self.kind == "smoothed_abs":
            d = self.smoothing
            return np.sqrt(p * p + d * d) - d
        P = self.cap
        quad = 0.5 * p * p
        affine = P * np.abs(p) - 0.5 * P * P
        return np.where(np.abs(p) <= P, quad, affine)

    def dprofile(self, p: np.ndarray) -> np.ndarray:
        """One-axis derivative h'(p), with h'(0) = 0 for the kink."""
        p = np.asarray(p, dtype=float)
        if self.kind == "abs":
            return np.sign(p)
        if self.kind == "smoothed_abs":
            d = self.smoothing
            if d == 0.0:
                return np.sign(p)
            return p / np.sqrt(p * p + d * d)
        return np.clip(p, -self.cap, self.cap)


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        if self.steps < 1:
            raise ValueError("need at least one time step")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)


def _check_cfl(tg: TimeGrid, grid: TorusGrid, speed: float, what: str) -> None:
    ratio = tg.dt * speed / grid.spacing
    if ratio > _CFL_SLACK:
        raise ValueError(
            f"CFL violation for {what}: dt*speed/h = {ratio:.4g} > 1 "
            f"(dt={tg.dt:.4g}, speed={speed:.4g}, h={grid.spacing:.4g})"
        )


@dataclass(frozen=True)
class ValuePath:
    grid: TorusGrid
    time_grid: TimeGrid
    values: np.ndarray  # (steps+1,) + grid.shape

    def at(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.values[k])


@dataclass(frozen=True)
class DensityPath:
    grid: TorusGrid
    time_grid: TimeGrid
    values: np.ndarray  # (steps+1,) + grid.shape

    def at(self, k: int) -> Density:
        return density_from_values(self.grid, self.values[k])

    def mass_error(self) -> float:
        masses = self.values.reshape(self.values.shape[0], -1).sum(axis=1)
        return float(np.max(np.abs(masses * self.grid.cell_volume - 1.0)))


@dataclass(frozen=True)
class DriftField:
    grid: TorusGrid
    time_grid: TimeGrid
    values: np.ndarray  # (steps+1, dim) + grid.shape

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def zero_drift(grid: TorusGrid, tg: TimeGrid) -> DriftField:
    return DriftField(grid, tg, np.zeros((tg.steps + 1, grid.dim) + grid.shape))


def constant_drift(grid: TorusGrid, tg: TimeGrid, velocity) -> DriftField:
    v = np.atleast_1d(np.asarray(velocity, dtype=float))
    vals = np.zeros((tg.steps + 1, grid.dim) + grid.shape)
    for ax in range(grid.dim):
        vals[:, ax] = v[ax]
    return DriftField(grid, tg, vals)


# ---------------------------------------------------------------------------
# elementary steps

def implicit_diffusion(grid: TorusGrid, v: np.ndarray, sigma: float, dt: float) -> np.ndarray:
    """Solve (I - dt*sigma*Lap) w = v exactly on the periodic grid.

    The operator is circulant, so the solve is a division in Fourier
    space; it is symmetric, hence self-adjoint for the duality checks.
    """
    if sigma == 0.0 or dt == 0.0:
        return v.copy()
    n = grid.n
    h2 = grid.spacing ** 2
    eig = (2.0 * np.cos(2.0 * np.pi * np.arange(n) / n) - 2.0) / h2
    if grid.dim == 1:
        denom = 1.0 - dt * sigma * eig
    else:
        denom = 1.0 - dt * sigma * (eig[:, None] + eig[None, :])
    return np.real(np.fft.ifftn(np.fft.fftn(v) / denom))


def _diff_minus(grid: TorusGrid, v: np.ndarray, ax: int) -> np.ndarray:
    return (v - np.roll(v, 1, axis=ax)) / grid.spacing


def _diff_plus(grid: TorusGrid, v: np.ndarray, ax: int) -> np.ndarray:
    return (np.roll(v, -1, axis=ax) - v) / grid.spacing


def godunov_hamiltonian(grid: TorusGrid, u: np.ndarray, H: Hamiltonian) -> np.ndarray:
    """Godunov numerical Hamiltonian, summed per axis."""
    out = np.zeros_like(u)
    for ax in range(grid.dim):
        pm = np.maximum(_diff_minus(grid, u, ax), 0.0)
        pp = np.minimum(_diff_plus(grid, u, ax), 0.0)
        out += np.maximum(H.profile(pm), H.profile(pp))
    return out


def upwind_advection(grid: TorusGrid, phi: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Upwind b . grad(phi) for the linearized backward transport."""
    out = np.zeros_like(phi)
    for ax in range(grid.dim):
        bax = b[ax]
        bp = np.maximum(bax, 0.0)
        bm = np.minimum(bax, 0.0)
        out += bp * _diff_plus(grid, phi, ax) + bm * _diff_minus(grid, phi, ax)
    return out


def hjb_linear_step(grid: TorusGrid, phi: np.ndarray, b: np.ndarray,
                    sigma: float, dt: float) -> np.ndarray:
    """One linearized backward step phi_k from phi_{k+1} with frozen drift b."""
    return implicit_diffusion(grid, phi + dt * upwind_advection(grid, phi, b), sigma, dt)


def fp_step(grid: TorusGrid, m: np.ndarray, b: np.ndarray,
            sigma: float, dt: float) -> np.ndarray:
    """One forward FP step, the exact transpose of hjb_linear_step."""
    md = implicit_diffusion(grid, m, sigma, dt)
    out = md.copy()
    h = grid.spacing
    for ax in range(grid.dim):
        bax = b[ax]
        bp = np.maximum(bax, 0.0)
        bm = np.minimum(bax, 0.0)
        # donor-cell flux F_{i+1/2} = b+_i m_i + b-_{i+1} m_{i+1}
        flux = bp * md + np.roll(bm * md, -1, axis=ax)
        out += dt * (np.roll(flux, 1, axis=ax) - flux) / h
    return out


# ---------------------------------------------------------------------------
# solvers

def solve_hjb_backward(running_cost, terminal_cost: ScalarField, H: Hamiltonian,
                       sigma: float, tg: TimeGrid) -> ValuePath:
    """Backward value solve with explicit Godunov Hamiltonian, implicit diffusion.

    `running_cost` is an array of shape (steps+1,) + grid.shape or a list
    of ScalarField slices; slice k is used on the step [t_k, t_{k+1}].
    """
    grid = terminal_cost.grid
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    f = _as_path_array(running_cost, grid, tg)
    _check_cfl(tg, grid, H.lipschitz, "HJB")
    u = np.empty((tg.steps + 1,) + grid.shape)
    u[tg.steps] = terminal_cost.values
    dt = tg.dt
    for k in range(tg.steps - 1, -1, -1):
        ham = godunov_hamiltonian(grid, u[k + 1], H)
        u[k] = implicit_diffusion(grid, u[k + 1] + dt * (f[k] - ham), sigma, dt)
    return ValuePath(grid, tg, u)


def _as_path_array(cost, grid: TorusGrid, tg: TimeGrid) -> np.ndarray:
    if isinstance(cost, ScalarField):
        return np.broadcast_to(cost.values, (tg.steps + 1,) + grid.shape)
    if isinstance(cost, (list, tuple)):
        if len(cost) != tg.steps + 1:
            raise ValueError(f"running cost has {len(cost)} slices, expected {tg.steps + 1}")
        return np.stack([c.values if isinstance(c, ScalarField) else np.asarray(c) for c in cost])
    arr = np.asarray(cost, dtype=float)
    if arr.shape != (tg.steps + 1,) + grid.shape:
        raise ValueError(f"running cost shape {arr.shape} incompatible")
    return arr


def optimal_drift(u: ValuePath, H: Hamiltonian) -> DriftField:
    """Feedback drift b = -D_pH(grad u) with the Godunov upwind gradient choice."""
    grid = u.grid
    b = np.zeros((u.time_grid.steps + 1, grid.dim) + grid.shape)
    for k in range(u.time_grid.steps + 1):
        uk = u.values[k]
        for ax in range(grid.dim):
            pm = np.maximum(_diff_minus(grid, uk, ax), 0.0)
            pp = np.minimum(_diff_plus(grid, uk, ax), 0.0)
            hm, hp = H.profile(pm), H.profile(pp)
            p_sel = np.where(hm >= hp, pm, pp)
            vel = -H.dprofile(p_sel)
            # two-sided tie (local max of u): both branches are equally
            # optimal; pick the stationary, reflection-symmetric choice
            tie = np.abs(hm - hp) <= 1e-12 * (np.abs(hm) + np.abs(hp) + 1.0)
            b[k, ax] = np.where(tie & (pm > 0.0), 0.0, vel)
    return DriftField(grid, u.time_grid, b)


def solve_fp_forward(m0: Density, b: DriftField, sigma: float, tg: TimeGrid) -> DensityPath:
    """Conservative donor-cell + implicit diffusion forward solve."""
    grid = m0.grid
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if b.grid != grid:
        raise ValueError("drift grid mismatch")
    if b.values.shape[0] != tg.steps + 1:
        raise ValueError("drift slice count mismatch")
    _check_cfl(tg, grid, b.sup_norm(), "FP advection")
    m = np.empty((tg.steps + 1,) + grid.shape)
    m[0] = m0.values
    for k in range(tg.steps):
        m[k + 1] = fp_step(grid, m[k], b.values[k], sigma, tg.dt)
    return DensityPath(grid, tg, m)


def _sample_indices(steps: int, max_nodes: int = 16) -> np.ndarray:
    # fixed coarse sample times so the modulus is stable under dt refinement
    return np.unique(np.linspace(0, steps, min(max_nodes, steps) + 1).round().astype(int))


def fp_holder_modulus(path: DensityPath) -> float:
    """Max over sampled time pairs of W1(m_s, m_t)/sqrt|t-s| (d = 1 only)."""
    if path.grid.dim != 1:
        raise ValueError("fp_holder_modulus requires d = 1")
    idx = _sample_indices(path.time_grid.steps)
    times = path.time_grid.times
    dens = [path.at(int(k)) for k in idx]
    best = 0.0
    for a in range(len(idx)):
        for bidx in range(a + 1, len(idx)):
            dtau = times[idx[bidx]] - times[idx[a]]
            w = wasserstein1_circle(dens[a], dens[bidx])
            best = max(best, w / np.sqrt(dtau))
    return best
