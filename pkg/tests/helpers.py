"""Shared problem builders for the test suite."""

import numpy as np

from jumplq import CoefficientPath, ProblemSpec, TimeGrid


def const(value, shape):
    return CoefficientPath.constant(np.broadcast_to(np.asarray(value, dtype=float), shape).copy())


def scalar_problem(A=0.0, B=0.0, C=0.0, D=0.0, F=(), G=(), pis=(), b=0.0, sigma=0.0, fj=(),
                   Q=0.0, S=0.0, R=0.0, q=0.0, rho=0.0, H=0.0, g=0.0, x0=1.0,
                   t0=0.0, T=1.0, steps=200):
    """One-state one-control problem with constant coefficients; jumps optional."""
    K = len(pis)
    if not (len(F) == len(G) == len(fj) == K):
        raise ValueError("F, G, fj must match pis in length")
    return ProblemSpec(
        n=1, m=1, grid=TimeGrid(t0, T, steps),
        mark_ids=[f"e{i}" for i in range(K)], weights=np.asarray(pis, dtype=float),
        A=const(A, (1, 1)), B=const(B, (1, 1)), C=const(C, (1, 1)), D=const(D, (1, 1)),
        F=[const(v, (1, 1)) for v in F], G=[const(v, (1, 1)) for v in G],
        b=const(b, (1,)), sigma=const(sigma, (1,)), f=[const(v, (1,)) for v in fj],
        Q=const(Q, (1, 1)), S=const(S, (1, 1)), R=const(R, (1, 1)),
        q=const(q, (1,)), rho=const(rho, (1,)),
        H=np.full((1, 1), float(H)), g=np.full(1, float(g)), x0=np.full(1, float(x0)))


def random_problem(rng, n=3, m=2, K=2, steps=400, t0=0.0, T=1.0,
                   scale=0.4, inhomogeneous=False):
    """Random well-posed problem: Q, R strictly positive definite, mild coefficients."""
    def mat(r, c, s=scale):
        return rng.uniform(-s, s, size=(r, c))

    def spd(d, base=1.0, s=scale):
        W = rng.uniform(-s, s, size=(d, d))
        return base * np.eye(d) + W @ W.T

    def vec(d, s=scale):
        return rng.uniform(-s, s, size=d) if inhomogeneous else np.zeros(d)

    pis = rng.uniform(0.2, 0.8, size=K)
    return ProblemSpec(
        n=n, m=m, grid=TimeGrid(t0, T, steps),
        mark_ids=[f"e{i}" for i in range(K)], weights=pis,
        A=CoefficientPath.constant(mat(n, n)), B=CoefficientPath.constant(mat(n, m)),
        C=CoefficientPath.constant(mat(n, n)), D=CoefficientPath.constant(mat(n, m)),
        F=[CoefficientPath.constant(mat(n, n)) for _ in range(K)],
        G=[CoefficientPath.constant(mat(n, m)) for _ in range(K)],
        b=CoefficientPath.constant(vec(n)), sigma=CoefficientPath.constant(vec(n)),
        f=[CoefficientPath.constant(vec(n)) for _ in range(K)],
        Q=CoefficientPath.constant(spd(n)), S=CoefficientPath.constant(mat(m, n, 0.2)),
        R=CoefficientPath.constant(spd(m)),
        q=CoefficientPath.constant(vec(n)), rho=CoefficientPath.constant(vec(m)),
        H=spd(n, base=0.5), g=vec(n), x0=rng.uniform(-1.0, 1.0, size=n))
