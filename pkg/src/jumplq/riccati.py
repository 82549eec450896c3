"""Backward Riccati sweep with jump terms, solvability gates, feedback gains.

The sweep integrates the symmetric matrix equation

    dP/dt = -[ P A + A^T P + C^T P C + sum_i pi_i F_i^T P F_i + Q
               - L(P)^T W(P)^+ L(P) ],    P(T) = H,

where W(P) = R + D^T P D + sum_i pi_i G_i^T P G_i is the effective control
weight and L(P) = B^T P + D^T P C + sum_i pi_i G_i^T P F_i + S the cross
term.  A closed-loop optimal strategy exists iff W stays positive
semidefinite and the columns of L stay inside the range of W along the whole
sweep; both gates are checked at every grid point and a failure aborts with
ClosedLoopUnsolvable.  Integration is classical RK4 with fixed step and
post-step symmetrization; half-step coefficient values come from the paths'
linear interpolation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ClosedLoopUnsolvable, NumericalFailure, RegularityViolation
from .linalg import is_psd, pinv, range_contains, symmetrize

DEFAULT_TOL_PSD = 1e-10
DEFAULT_TOL_RANGE = 1e-9


@dataclass(frozen=True)
class GainOperators:
    """Effective control weight and cross term at one (P, t)."""

    weight: np.ndarray   # (m, m) symmetric: R + D^T P D + sum_i pi_i G_i^T P G_i
    cross: np.ndarray    # (m, n): B^T P + D^T P C + sum_i pi_i G_i^T P F_i + S


@dataclass
class RiccatiSolution:
    """Backward sweep output on the problem grid.

    ``theta_l2`` holds, per grid point k, the running discrete L2 norm of
    the feedback gain over [t_k, T] (trapezoid weights); the value at k = 0
    is the norm over the whole horizon.
    """

    grid: object
    P: np.ndarray          # (N+1, n, n), symmetric per point
    psd_ok: np.ndarray     # (N+1,) bool
    range_ok: np.ndarray   # (N+1,) bool
    theta_l2: np.ndarray   # (N+1,)
    tol_psd: float
    tol_range: float


def gain_operators(P, t, prob):
    """Assemble the effective control weight and cross term from P at time t."""
    D = prob.D(t)
    G = prob.Gs(t)
    w = prob.weights
    weight = prob.R(t) + D.T @ P @ D
    if prob.K:
        weight = weight + np.einsum("k,kpi,pq,kqj->ij", w, G, P, G)
    cross = prob.B(t).T @ P + D.T @ P @ prob.C(t) + prob.S(t)
    if prob.K:
        cross = cross + np.einsum("k,kpi,pq,kqj->ij", w, G, P, prob.Fs(t))
    return GainOperators(weight=symmetrize(weight), cross=cross)


def _derivative(P, t, prob, ops=None):
    if ops is None:
        ops = gain_operators(P, t, prob)
    A = prob.A(t)
    C = prob.C(t)
    lin = P @ A + A.T @ P + C.T @ P @ C + prob.Q(t)
    if prob.K:
        F = prob.Fs(t)
        lin = lin + np.einsum("k,kpi,pq,kqj->ij", prob.weights, F, P, F)
    quad = ops.cross.T @ (pinv(ops.weight) @ ops.cross)
    return symmetrize(quad - lin)


def riccati_derivative(P, t, prob, tol_psd=DEFAULT_TOL_PSD, tol_range=DEFAULT_TOL_RANGE,
                       check_gates=True):
    """Right-hand side dP/dt of the backward equation at (P, t).

    With ``check_gates`` the solvability gates are verified first and a
    failure raises RegularityViolation; the sweep itself gates at grid
    points only and calls this with the checks off for interior stages.
    """
    P = np.asarray(P, dtype=float)
    ops = gain_operators(P, t, prob)
    if check_gates:
        if not is_psd(ops.weight, tol_psd):
            raise RegularityViolation(t, "PSD")
        if not range_contains(ops.weight, ops.cross, tol_range):
            raise RegularityViolation(t, "RANGE")
    return _derivative(P, t, prob, ops=ops)


def _gate(ops, tol_psd, tol_range):
    return is_psd(ops.weight, tol_psd), range_contains(ops.weight, ops.cross, tol_range)


def solve_riccati(prob, tol_psd=DEFAULT_TOL_PSD, tol_range=DEFAULT_TOL_RANGE):
    """Integrate the backward sweep over the problem grid.

    Returns a RiccatiSolution whose certificates all pass; raises
    ClosedLoopUnsolvable at the first failing grid point (largest failing
    time, since the sweep runs backward) and NumericalFailure if the
    iteration produces non-finite entries.
    """
    times = prob.times
    N = prob.grid.steps
    h = prob.h
    n = prob.n

    P = np.empty((N + 1, n, n))
    psd_ok = np.zeros(N + 1, dtype=bool)
    range_ok = np.zeros(N + 1, dtype=bool)
    theta_sq = np.zeros(N + 1)

    P[N] = prob.H
    gain_sq = np.empty(N + 1)

    def checkpoint(k):
        ops = gain_operators(P[k], times[k], prob)
        ok_psd, ok_range = _gate(ops, tol_psd, tol_range)
        psd_ok[k], range_ok[k] = ok_psd, ok_range
        if not ok_psd:
            raise ClosedLoopUnsolvable(times[k], "PSD")
        if not ok_range:
            raise ClosedLoopUnsolvable(times[k], "RANGE")
        theta = -pinv(ops.weight) @ ops.cross
        gain_sq[k] = float(np.sum(theta * theta))

    checkpoint(N)
    for k in range(N, 0, -1):
        t = times[k]
        Pk = P[k]
        k1 = _derivative(Pk, t, prob)
        k2 = _derivative(Pk - 0.5 * h * k1, t - 0.5 * h, prob)
        k3 = _derivative(Pk - 0.5 * h * k2, t - 0.5 * h, prob)
        k4 = _derivative(Pk - h * k3, times[k - 1], prob)
        P[k - 1] = symmetrize(Pk - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if not np.all(np.isfinite(P[k - 1])):
            raise NumericalFailure(f"Riccati sweep produced non-finite entries at t={times[k - 1]:.9g}",
                                   time=times[k - 1])
        checkpoint(k - 1)

    # Running discrete L2 norm of the gain over [t_k, T], trapezoid weights.
    acc = 0.0
    for k in range(N - 1, -1, -1):
        acc += 0.5 * h * (gain_sq[k] + gain_sq[k + 1])
        theta_sq[k] = acc
    return RiccatiSolution(grid=prob.grid, P=P, psd_ok=psd_ok, range_ok=range_ok,
                           theta_l2=np.sqrt(theta_sq), tol_psd=tol_psd, tol_range=tol_range)


def feedback_gains(sol, prob):
    """Feedback gain -W^+ L at every grid point, shape (N+1, m, n)."""
    times = prob.times
    out = np.empty((len(times), prob.m, prob.n))
    for k, t in enumerate(times):
        ops = gain_operators(sol.P[k], t, prob)
        out[k] = -pinv(ops.weight) @ ops.cross
    return out


def solve_lyapunov(prob, theta):
    """Cost-to-go weight of the fixed linear feedback ``theta``.

    ``theta`` holds the gain at every grid point, shape (N+1, m, n); between
    grid points it is interpolated linearly.  Integrates backward from H the
    linear matrix equation obtained by substituting u = theta x into the
    dynamics and the cost:

        dP/dt = -[ P(A + B th) + (A + B th)^T P + (C + D th)^T P (C + D th)
                   + sum_i pi_i (F_i + G_i th)^T P (F_i + G_i th)
                   + Q + S^T th + th^T S + th^T R th ].

    No solvability gates apply; the equation is linear in P.
    """
    from .problem import CoefficientPath

    theta = np.asarray(theta, dtype=float)
    times = prob.times
    N = prob.grid.steps
    h = prob.h
    theta_path = CoefficientPath.sampled(theta)

    def deriv(P, t):
        th = theta_path.at(t, prob.grid)
        A_cl = prob.A(t) + prob.B(t) @ th
        C_cl = prob.C(t) + prob.D(t) @ th
        S = prob.S(t)
        lin = (P @ A_cl + A_cl.T @ P + C_cl.T @ P @ C_cl
               + prob.Q(t) + S.T @ th + th.T @ S + th.T @ prob.R(t) @ th)
        if prob.K:
            F_cl = prob.Fs(t) + prob.Gs(t) @ th
            lin = lin + np.einsum("k,kpi,pq,kqj->ij", prob.weights, F_cl, P, F_cl)
        return -lin

    P = np.empty((N + 1, prob.n, prob.n))
    P[N] = prob.H
    for k in range(N, 0, -1):
        t = times[k]
        Pk = P[k]
        k1 = deriv(Pk, t)
        k2 = deriv(Pk - 0.5 * h * k1, t - 0.5 * h)
        k3 = deriv(Pk - 0.5 * h * k2, t - 0.5 * h)
        k4 = deriv(Pk - h * k3, times[k - 1])
        P[k - 1] = symmetrize(Pk - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if not np.all(np.isfinite(P[k - 1])):
            raise NumericalFailure(f"Lyapunov sweep produced non-finite entries at t={times[k - 1]:.9g}",
                                   time=times[k - 1])
    return P
