"""Nash equilibria of the blind game by damped fixed-point iteration.

One iteration applies the map: drift -> pushforward belief path ->
belief-averaged costs -> backward HJB -> feedback drift.  Fixed points
are equilibria of the belief-coupled forward-backward system; the
complete-information game is the single-atom special case and shares the
code path exactly.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .beliefs import (
    Belief,
    BeliefPath,
    CostModel,
    aggregate_running,
    aggregate_terminal,
    push_forward,
)
from .hjb_fp import (
    DriftField,
    Hamiltonian,
    TimeGrid,
    ValuePath,
    godunov_hamiltonian,
    implicit_diffusion,
    optimal_drift,
    solve_hjb_backward,
    zero_drift,
)
from .torus import Density

__all__ = [
    "SolverConfig",
    "EquilibriumSolution",
    "solve_blind",
    "solve_complete_info",
    "equilibrium_gap",
    "cross_solution_coupling",
    "write_history_csv",
]


@dataclass(frozen=True)
class SolverConfig:
    relaxation: float = 0.5
    tol: float = 1e-6
    max_iter: int = 500
    averaging: str = "picard"  # or "fictitious_play"

    def __post_init__(self):
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.averaging not in ("picard", "fictitious_play"):
            raise ValueError(f"unknown averaging {self.averaging!r}")


@dataclass(frozen=True)
class EquilibriumSolution:
    value: ValuePath
    belief: BeliefPath
    drift: DriftField
    diagnostics: dict


def _cost_paths(bp: BeliefPath, cm: CostModel):
    tg = bp.time_grid
    grid = bp.grid
    running = np.empty((tg.steps + 1,) + grid.shape)
    for k in range(tg.steps + 1):
        running[k] = aggregate_running(bp.belief_at(k), cm).values
    terminal = aggregate_terminal(bp.belief_at(tg.steps), cm)
    return running, terminal


def _apply_psi3(mu0: Belief, drift: DriftField, cm: CostModel, H: Hamiltonian,
                sigma: float, tg: TimeGrid):
    """One full application: drift -> belief path -> HJB value -> new drift."""
    bp = push_forward(mu0, drift, sigma, tg)
    running, terminal = _cost_paths(bp, cm)
    u = solve_hjb_backward(running, terminal, H, sigma, tg)
    return bp, u, optimal_drift(u, H)


def solve_blind(mu0: Belief, cm: CostModel, H: Hamiltonian, sigma: float,
                tg: TimeGrid, cfg: SolverConfig | None = None,
                initial_drift: DriftField | None = None) -> EquilibriumSolution:
    """Solve the blind game; non-convergence is reported, never raised."""
    cfg = cfg or SolverConfig()
    grid = mu0.grid
    b = initial_drift if initial_drift is not None else zero_drift(grid, tg)
    history = []
    converged = False
    u_prev = None
    gap = np.inf
    t0 = time.perf_counter()
    for it in range(1, cfg.max_iter + 1):
        bp, u, b_raw = _apply_psi3(mu0, b, cm, H, sigma, tg)
        gap = float(np.max(np.abs(b_raw.values - b.values)))
        value_change = (np.inf if u_prev is None
                        else float(np.max(np.abs(u.values - u_prev))))
        history.append({"iter": it, "drift_gap": gap, "value_change": value_change,
                        "wall_time": time.perf_counter() - t0})
        u_prev = u.values
        if gap < cfg.tol:
            converged = True
            b = b_raw
            break
        if cfg.averaging == "picard":
            # full first step: relaxing toward the zero initial guess has
            # no virtue, and decoupled systems then finish immediately
            theta = 1.0 if it == 1 and initial_drift is None else cfg.relaxation
        else:
            theta = 1.0 / (it + 1)
        b = DriftField(grid, tg, (1.0 - theta) * b.values + theta * b_raw.values)
    # final consistent packaging: value from the last belief path, drift
    # recomputed from the value, belief recomputed from the drift
    bp, u, drift = _apply_psi3(mu0, b, cm, H, sigma, tg)
    belief = push_forward(mu0, drift, sigma, tg)
    mass_error = max(p.mass_error() for p in belief.atom_paths)
    diagnostics = {
        "iterations": len(history),
        "final_gap": gap,
        "converged": converged,
        "hjb_residual": _hjb_residual(u, belief, cm, H, sigma),
        "mass_error": mass_error,
        "history": history,
    }
    return EquilibriumSolution(value=u, belief=belief, drift=drift,
                               diagnostics=diagnostics)


def solve_complete_info(m0: Density, cm: CostModel, H: Hamiltonian, sigma: float,
                        tg: TimeGrid, cfg: SolverConfig | None = None,
                        initial_drift: DriftField | None = None) -> EquilibriumSolution:
    """Complete-information game = blind game with a one-atom belief."""
    return solve_blind(Belief(np.array([1.0]), (m0,)), cm, H, sigma, tg, cfg,
                       initial_drift=initial_drift)


def _hjb_residual(u: ValuePath, belief: BeliefPath, cm: CostModel, H: Hamiltonian,
                  sigma: float) -> float:
    """Sup-norm defect of the discrete backward recurrence against the
    returned belief's aggregated cost (a posteriori check)."""
    tg = u.time_grid
    grid = u.grid
    running, _ = _cost_paths(belief, cm)
    worst = 0.0
    for k in range(tg.steps):
        ham = godunov_hamiltonian(grid, u.values[k + 1], H)
        pred = implicit_diffusion(grid, u.values[k + 1] + tg.dt * (running[k] - ham),
                                  sigma, tg.dt)
        worst = max(worst, float(np.max(np.abs(u.values[k] - pred))) / tg.dt)
    return worst


def equilibrium_gap(sol: EquilibriumSolution, cm: CostModel, H: Hamiltonian,
                    sigma: float, tg: TimeGrid) -> float:
    """Sup-norm distance between sol.drift and one fixed-point map application."""
    running, terminal = _cost_paths(sol.belief, cm)
    u = solve_hjb_backward(running, terminal, H, sigma, tg)
    b_new = optimal_drift(u, H)
    return float(np.max(np.abs(b_new.values - sol.drift.values)))


def cross_solution_coupling(sol1: EquilibriumSolution, sol2: EquilibriumSolution,
                            cm: CostModel, tg: TimeGrid) -> float:
    """Discrete aggregate coupling term of the uniqueness computation.

    Time integral of the lifted pairing between the two solutions' belief
    paths plus the terminal pairing; nonpositive at equilibria of
    monotone instances (and ~0 when the solutions coincide).
    """
    from .monotonicity import lifted_pairing

    total = 0.0
    for k in range(tg.steps):
        mu1 = sol1.belief.belief_at(k)
        mu2 = sol2.belief.belief_at(k)
        total += tg.dt * lifted_pairing(cm, mu1, mu2)
    # terminal part uses the terminal cost map in place of the running one
    term_cm = CostModel(cm.kind + "_terminal", cm.terminal, cm.terminal)
    total += lifted_pairing(term_cm, sol1.belief.belief_at(tg.steps),
                            sol2.belief.belief_at(tg.steps))
    return total


def write_history_csv(sol: EquilibriumSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "drift_gap", "value_change", "wall_time"])
        for row in sol.diagnostics["history"]:
            writer.writerow([row["iter"], f"{row['drift_gap']:.17g}",
                             f"{row['value_change']:.17g}", f"{row['wall_time']:.17g}"])
