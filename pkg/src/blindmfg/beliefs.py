"""Atomic beliefs over densities: pushforward, cost aggregation, metrics.

A belief is a finitely supported probability measure on the set of
densities.  Beliefs are pushed forward atom by atom under a common
Fokker-Planck flow; running/terminal costs are averaged linearly over
atoms; the belief metric is the exact W1 with the circle W1 as ground
cost, solved as a small dense transportation LP.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .hjb_fp import DensityPath, DriftField, TimeGrid, solve_fp_forward, upwind_advection
from .torus import (
    Density,
    ScalarField,
    TorusGrid,
    constant_field,
    integrate,
    laplacian_array,
    mollified_dirac,
    wasserstein1_circle,
)

__all__ = [
    "Belief",
    "BeliefPath",
    "CostModel",
    "CylinderFunctional",
    "push_forward",
    "aggregate_running",
    "aggregate_terminal",
    "belief_distance",
    "belief_holder_modulus",
    "weak_solution_residual",
    "product_form_cost",
    "moment_form_cost",
    "illustrative_cost",
    "constant_cost",
    "belief_to_json",
    "belief_from_json",
]

MAX_ATOMS = 64


@dataclass(frozen=True)
class Belief:
    weights: np.ndarray
    atoms: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        w.flags.writeable = False
        atoms = tuple(self.atoms)
        if not 1 <= len(atoms) <= MAX_ATOMS:
            raise ValueError(f"belief must have between 1 and {MAX_ATOMS} atoms")
        if w.shape != (len(atoms),):
            raise ValueError("one weight per atom required")
        if np.any(w <= 0):
            raise ValueError("atom weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()}, expected 1")
        grid = atoms[0].grid
        if any(a.grid != grid for a in atoms):
            raise ValueError("all atoms must share one grid")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "atoms", atoms)

    @property
    def grid(self) -> TorusGrid:
        return self.atoms[0].grid

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)


@dataclass(frozen=True)
class BeliefPath:
    weights: np.ndarray
    atom_paths: tuple  # of DensityPath, transported by one common flow

    def __post_init__(self):
        object.__setattr__(self, "atom_paths", tuple(self.atom_paths))
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)

    @property
    def grid(self) -> TorusGrid:
        return self.atom_paths[0].grid

    @property
    def time_grid(self) -> TimeGrid:
        return self.atom_paths[0].time_grid

    def belief_at(self, k: int) -> Belief:
        return Belief(self.weights, tuple(p.at(k) for p in self.atom_paths))


@dataclass(frozen=True)
class CostModel:
    """Running cost f: m -> field and terminal cost U0: m -> field."""

    kind: str
    running: Callable[[Density], ScalarField]
    terminal: Callable[[Density], ScalarField]


def _zero_terminal(grid: TorusGrid | None = None):
    def term(m: Density) -> ScalarField:
        return constant_field(m.grid, 0.0)

    return term


def product_form_cost(phi: ScalarField, base: ScalarField | None = None,
                      terminal: Callable[[Density], ScalarField] | None = None) -> CostModel:
    """f(m) = base + phi * ∫phi dm; monotone in the lifted sense."""

    def running(m: Density) -> ScalarField:
        s = integrate(phi, m)
        vals = phi.values * s
        if base is not None:
            vals = base.values + vals
        return ScalarField(phi.grid, vals)

    return CostModel("product_form", running, terminal or _zero_terminal(phi.grid))


def moment_form_cost(g: Callable[[float], float], kind: str = "moment_form") -> CostModel:
    """f(m)(x) = x * g(first moment of m); d = 1 only."""

    def running(m: Density) -> ScalarField:
        if m.grid.dim != 1:
            raise ValueError("moment_form cost requires d = 1")
        x = m.grid.axis_coords()
        mom = float(np.sum(x * m.values) * m.grid.cell_volume)
        return ScalarField(m.grid, x * g(mom))

    return CostModel(kind, running, _zero_terminal())


def illustrative_cost(f0: ScalarField, c: float) -> CostModel:
    """f(m) = f0 + c * f0 * ∫f0 dm; the observed-payments demo coupling."""
    if not 0 < c < 1:
        raise ValueError("coupling strength c must lie in (0,1)")

    def running(m: Density) -> ScalarField:
        s = integrate(f0, m)
        return ScalarField(f0.grid, f0.values * (1.0 + c * s))

    return CostModel("illustrative", running, _zero_terminal(f0.grid))


def constant_cost(f_field: ScalarField,
                  terminal_field: ScalarField | None = None) -> CostModel:
    def running(m: Density) -> ScalarField:
        return f_field

    def term(m: Density) -> ScalarField:
        return terminal_field if terminal_field is not None else constant_field(m.grid, 0.0)

    return CostModel("constant", running, term)


# ---------------------------------------------------------------------------
# operations

def push_forward(mu0: Belief, b: DriftField, sigma: float, tg: TimeGrid) -> BeliefPath:
    """Transport every atom along the same FP flow; weights never change."""
    paths = tuple(solve_fp_forward(a, b, sigma, tg) for a in mu0.atoms)
    return BeliefPath(mu0.weights, paths)


def aggregate_running(mu: Belief, cm: CostModel) -> ScalarField:
    vals = np.zeros(mu.grid.shape)
    for w, a in zip(mu.weights, mu.atoms):
        vals += w * cm.running(a).values
    return ScalarField(mu.grid, vals)


def aggregate_terminal(mu: Belief, cm: CostModel) -> ScalarField:
    vals = np.zeros(mu.grid.shape)
    for w, a in zip(mu.weights, mu.atoms):
        vals += w * cm.terminal(a).values
    return ScalarField(mu.grid, vals)


def _transport_lp(w1: np.ndarray, w2: np.ndarray, cost: np.ndarray) -> float:
    """Exact optimal transport value on a dense bipartite instance."""
    k1, k2 = cost.shape
    if k1 == 1 or k2 == 1:
        # transport plan is forced
        return float(np.sum(np.outer(w1, w2) * cost))
    A_eq = np.zeros((k1 + k2 - 1, k1 * k2))
    b_eq = np.concatenate([w1, w2[:-1]])
    for i in range(k1):
        A_eq[i, i * k2:(i + 1) * k2] = 1.0
    for j in range(k2 - 1):
        A_eq[k1 + j, j::k2] = 1.0
    res = linprog(cost.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def belief_distance(mu: Belief, nu: Belief) -> float:
    """Exact W1 between two atomic beliefs, ground metric W1 on the circle."""
    if mu.grid != nu.grid:
        raise ValueError("beliefs on different grids")
    if mu.grid.dim != 1:
        raise ValueError("belief_distance requires d = 1")
    cost = np.empty((mu.n_atoms, nu.n_atoms))
    for i, a in enumerate(mu.atoms):
        for j, b in enumerate(nu.atoms):
            cost[i, j] = wasserstein1_circle(a, b)
    return _transport_lp(mu.weights, nu.weights, cost)


def belief_holder_modulus(path: BeliefPath) -> float:
    """Max over sampled pairs of d1(mu_s, mu_t)/sqrt|t-s| (d = 1 only)."""
    if path.grid.dim != 1:
        raise ValueError("belief_holder_modulus requires d = 1")
    steps = path.time_grid.steps
    idx = np.unique(np.linspace(0, steps, min(16, steps) + 1).round().astype(int))
    times = path.time_grid.times
    beliefs = [path.belief_at(int(k)) for k in idx]
    best = 0.0
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            dtau = times[idx[b]] - times[idx[a]]
            best = max(best, belief_distance(beliefs[a], beliefs[b]) / np.sqrt(dtau))
    return best


# ---------------------------------------------------------------------------
# cylinder test functionals and the weak-solution residual

@dataclass(frozen=True)
class CylinderFunctional:
    """phi(t, m) = psi(t, ∫ inner dm) with psi', d/dt psi available."""

    inner: ScalarField
    psi: Callable[[float, float], float]
    psi_s: Callable[[float, float], float]
    psi_t: Callable[[float, float], float]

    def value(self, t: float, m: Density) -> float:
        return self.psi(t, integrate(self.inner, m))

    def value_belief(self, t: float, mu: Belief) -> float:
        return float(sum(w * self.value(t, a) for w, a in zip(mu.weights, mu.atoms)))


def static_cylinder(inner: ScalarField, outer=None, outer_d=None) -> CylinderFunctional:
    """Time-independent cylinder functional; identity outer map by default."""
    if outer is None:
        return CylinderFunctional(inner, lambda t, s: s, lambda t, s: 1.0, lambda t, s: 0.0)
    return CylinderFunctional(inner, lambda t, s: outer(s),
                              lambda t, s: outer_d(s), lambda t, s: 0.0)


def ramp_cylinder(inner: ScalarField, horizon: float, outer=None, outer_d=None) -> CylinderFunctional:
    """(T - t) * outer(∫inner dm); vanishes at the horizon as required."""
    if outer is None:
        outer, outer_d = (lambda s: s), (lambda s: 1.0)
    return CylinderFunctional(
        inner,
        lambda t, s: (horizon - t) * outer(s),
        lambda t, s: (horizon - t) * outer_d(s),
        lambda t, s: -outer(s),
    )


def _generator_field(grid: TorusGrid, h_vals: np.ndarray, lap_h: np.ndarray,
                     b_slice: np.ndarray, sigma: float) -> np.ndarray:
    """sigma*Lap(h) + b.grad(h), with the solver's upwind gradient."""
    return sigma * lap_h + upwind_advection(grid, h_vals, b_slice)


def weak_solution_residual(path, b: DriftField, sigma: float,
                           phi: CylinderFunctional) -> float:
    """|discrete weak-form residual| of the lifted continuity equation.

    `path` is a BeliefPath or a sequence of Beliefs with len(steps)+1
    entries (the latter allows deliberately inconsistent paths for
    violation detection).  Requires phi(T, .) = 0.
    """
    tg = b.time_grid
    grid = b.grid
    if isinstance(path, BeliefPath):
        beliefs = [path.belief_at(k) for k in range(tg.steps + 1)]
    else:
        beliefs = list(path)
        if len(beliefs) != tg.steps + 1:
            raise ValueError("belief sequence length must match the time grid")
    times = tg.times
    T = tg.horizon
    # terminal-vanishing check on the values the path actually visits
    for w, a in zip(beliefs[-1].weights, beliefs[-1].atoms):
        if abs(phi.psi(T, integrate(phi.inner, a))) > 1e-12:
            raise ValueError("test functional must vanish at the horizon")
    h_vals = phi.inner.values
    lap_h = laplacian_array(grid, h_vals)
    dt = tg.dt
    vol = grid.cell_volume
    acc = 0.0
    for k in range(tg.steps):
        gen = _generator_field(grid, h_vals, lap_h, b.values[k], sigma)
        mu = beliefs[k]
        t = times[k]
        for w, a in zip(mu.weights, mu.atoms):
            s = integrate(phi.inner, a)
            gen_m = float(np.sum(gen * a.values) * vol)
            acc += dt * w * (-phi.psi_t(t, s) - phi.psi_s(t, s) * gen_m)
    mu0 = beliefs[0]
    for w, a in zip(mu0.weights, mu0.atoms):
        acc -= w * phi.psi(0.0, integrate(phi.inner, a))
    return abs(acc)


# ---------------------------------------------------------------------------
# serialization

def belief_to_json(mu: Belief) -> dict:
    return {
        "weights": [float(w) for w in mu.weights],
        "atoms": [{"kind": "grid", "values": a.values.ravel().tolist()} for a in mu.atoms],
    }


def belief_from_json(obj: dict, grid: TorusGrid) -> Belief:
    weights = np.asarray(obj["weights"], dtype=float)
    atoms = []
    for spec in obj["atoms"]:
        kind = spec.get("kind")
        if kind == "dirac":
            bw = spec.get("bandwidth")
            atoms.append(mollified_dirac(grid, spec["center"], bw))
        elif kind == "grid":
            vals = np.asarray(spec["values"], dtype=float).reshape(grid.shape)
            from .torus import density_from_values

            atoms.append(density_from_values(grid, vals))
        else:
            raise ValueError(f"unknown atom kind {kind!r}")
    return Belief(weights, tuple(atoms))
