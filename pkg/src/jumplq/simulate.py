"""Euler simulation of the controlled jump diffusion on the problem grid.

One step advances a batch of paths by

    X' = X + [A X + B u + b] h + [C X + D u + sigma] dW
         + sum_i [F_i X + G_i u + f_i] (dN_i - pi_i h),

with every coefficient and the control evaluated at the left endpoint of the
step, so the control never sees the step's own noise.  The jump increments
enter compensated; for a pure-jump problem with no drift this makes the
simulated state a discrete-time martingale exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure


@dataclass
class Trajectory:
    """One simulated path: states per grid point, controls and counts per step."""

    grid: object
    X: np.ndarray            # (N+1, n)
    u: np.ndarray            # (N, m)
    jump_counts: np.ndarray  # (N, K)


@dataclass
class SimBatch:
    """A batch of simulated paths with common grid."""

    grid: object
    X: np.ndarray            # (paths, N+1, n)
    u: np.ndarray            # (paths, N, m)
    jump_counts: np.ndarray  # (paths, N, K)

    @property
    def paths(self):
        return self.X.shape[0]

    def path(self, p):
        return Trajectory(grid=self.grid, X=self.X[p], u=self.u[p], jump_counts=self.jump_counts[p])


def step_batch(X, U, t, dW, dN, prob):
    """Advance a batch one step from time t; inputs are per-path rows."""
    h = prob.h
    Xn = (X + h * (X @ prob.A(t).T + U @ prob.B(t).T + prob.b(t))
          + dW[:, None] * (X @ prob.C(t).T + U @ prob.D(t).T + prob.sigma(t)))
    if prob.K:
        F = prob.Fs(t)
        G = prob.Gs(t)
        f = prob.fs(t)
        lam = prob.weights * h
        for i in range(prob.K):
            amp = X @ F[i].T + U @ G[i].T + f[i]
            Xn = Xn + (dN[:, i] - lam[i])[:, None] * amp
    return Xn


def euler_step(x, u, t, dW, dN, prob):
    """Single-sample step; dN holds one count per mark."""
    X = np.asarray(x, dtype=float)[None, :]
    U = np.asarray(u, dtype=float)[None, :]
    dNb = np.asarray(dN, dtype=np.int64).reshape(1, prob.K)
    return step_batch(X, U, t, np.asarray([dW], dtype=float), dNb, prob)[0]


def closed_loop_control(strat):
    """Control callback u_k = Theta(t_k) x + v(t_k)."""
    theta = strat.theta
    v = strat.v

    def control(k, X):
        return X @ theta[k].T + v[k]

    return control


def open_loop_control(u, paths):
    """Control callback for a fixed control path, shared or per path.

    ``u`` has shape (N, m) for a path shared by the whole batch or
    (paths, N, m) for per-path controls.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 2:
        def control(k, X):
            return np.broadcast_to(u[k], (X.shape[0], u.shape[1]))
    elif u.ndim == 3:
        if u.shape[0] != paths:
            raise ValueError(f"per-path control has {u.shape[0]} paths, plan has {paths}")

        def control(k, X):
            return u[:, k, :]
    else:
        raise ValueError(f"control path must be 2-d or 3-d, got shape {u.shape}")
    return control


def run_batch(prob, control, plan, record=True):
    """Drive a batch of paths over the whole grid.

    ``control`` maps (step index, state batch) to a control batch.  With
    ``record`` the full SimBatch is returned; otherwise only the final state
    batch, which keeps long many-path runs at O(paths) memory.
    """
    N = prob.grid.steps
    times = prob.times
    P = plan.paths
    lam = prob.weights * prob.h

    X = np.tile(prob.x0, (P, 1))
    if record:
        Xs = np.empty((P, N + 1, prob.n))
        Us = np.empty((P, N, prob.m))
        dNs = np.empty((P, N, prob.K), dtype=np.int64)
        Xs[:, 0] = X

    for k in range(N):
        dW = plan.brownian(k, prob.h)
        dN = plan.mark_counts(k, lam)
        U = control(k, X)
        Xn = step_batch(X, U, times[k], dW, dN, prob)
        if not np.all(np.isfinite(Xn)):
            bad = int(np.argwhere(~np.isfinite(Xn))[0][0])
            raise NumericalFailure(f"simulation produced non-finite state (path {bad}, step {k + 1})",
                                   path=bad, step=k + 1)
        if record:
            Us[:, k] = U
            dNs[:, k] = dN
            Xs[:, k + 1] = Xn
        X = Xn

    if record:
        return SimBatch(grid=prob.grid, X=Xs, u=Us, jump_counts=dNs)
    return X


def simulate_closed_loop(prob, strat, plan):
    """Simulate the closed-loop system under a strategy; returns the full batch."""
    return run_batch(prob, closed_loop_control(strat), plan, record=True)


def simulate_open_loop(prob, u, plan):
    """Simulate under a fixed control path; returns the full batch."""
    return run_batch(prob, open_loop_control(u, plan.paths), plan, record=True)
