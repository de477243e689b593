"""Directed enhanced configuration model (DECM).

Each ordered pair ``uv`` carries an independent weight that is zero with
probability ``1 - p_uv`` and otherwise exponential with rate
``lam_uv = -phi_u - psi_v``, where

    p_uv = e^{alpha_u + beta_v} / (e^{alpha_u + beta_v} + lam_uv).

The sufficient statistics are the out/in degrees and out/in strengths.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy.special import expit

from .graph import WeightedDigraph, degrees

log = logging.getLogger(__name__)

# parameter value assigned to rows/columns dropped from a fit; gives p ~ 1e-22
DROPPED = -25.0


@dataclass
class DecmParams:
    """Per-node DECM parameters.

    Only ``lam_uv = -phi_u - psi_v > 0`` on pairs that can carry an edge is
    needed. We require it for every pair of distinct nodes; a self-pair may
    have a non-positive rate, which is harmless while self-loops are forbidden
    (the fitted rates of a graph without loops can end up there). ``phi < 0``
    and ``psi < 0`` everywhere is the common sufficient condition.
    """

    alpha: np.ndarray
    beta: np.ndarray
    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta", "phi", "psi"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be a vector")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            setattr(self, name, arr)
        if not len(self.alpha) == len(self.beta) == len(self.phi) == len(self.psi):
            raise ValueError("parameter vectors must share one length")
        lam = self.rate()
        np.fill_diagonal(lam, np.inf)
        if np.any(lam <= 0):
            raise ValueError("rates -phi_u - psi_v must be positive for all distinct u, v")

    @property
    def n(self) -> int:
        return len(self.alpha)

    def rate(self) -> np.ndarray:
        """Matrix of exponential rates ``lam_uv = -phi_u - psi_v``."""
        return -self.phi[:, None] - self.psi[None, :]

    def edge_prob_matrix(self) -> np.ndarray:
        """Edge probabilities; zero where the rate is not positive (a self-pair only)."""
        lam = self.rate()
        ok = lam > 0
        eta = self.alpha[:, None] + self.beta[None, :]
        return np.where(ok, expit(eta - np.log(np.where(ok, lam, 1.0))), 0.0)


def edge_prob(p: DecmParams, u: int, v: int) -> float:
    """P{w_uv > 0}, evaluated as a logistic in ``alpha_u + beta_v - log lam_uv``."""
    lam = -p.phi[u] - p.psi[v]
    if lam <= 0:
        return 0.0
    return float(expit(p.alpha[u] + p.beta[v] - np.log(lam)))


def log_density_unnorm(p: DecmParams, G: WeightedDigraph) -> float:
    d = degrees(G)
    return float(
        p.alpha @ d.out_deg + p.beta @ d.in_deg + p.phi @ G.out_strength + p.psi @ G.in_strength
    )


def sample_weight_matrix(p: DecmParams, rng: np.random.Generator, allowed=None) -> np.ndarray:
    """Dense weight matrix of one independent draw; self-loops off unless ``allowed`` says so."""
    n = p.n
    if allowed is None:
        allowed = ~np.eye(n, dtype=bool)
    lam = p.rate()
    if np.any(lam[allowed] <= 0):
        raise ValueError("parameters give a non-positive rate on an allowed self-pair")
    present = (rng.random((n, n)) < p.edge_prob_matrix()) & allowed
    W = rng.exponential(1.0, (n, n)) / np.where(lam > 0, lam, 1.0)
    return np.where(present, W, 0.0)


def sample_graph(p: DecmParams, rng: np.random.Generator, forbidden=None) -> WeightedDigraph:
    n = p.n
    G = WeightedDigraph(n, forbidden=forbidden)
    return WeightedDigraph.from_dense(sample_weight_matrix(p, rng, G.allowed_mask()), G.forbidden)


# fitting


class FitError(RuntimeError):
    pass


class BoundaryDegreeError(FitError):
    """A degree sits at its minimum or maximum, so the MLE is at infinity."""

    def __init__(self, node: int, side: str, degree: int, limit: int):
        super().__init__(
            f"node {node} has {side}-degree {degree} (admissible interior is 1..{limit - 1}); "
            "the maximum likelihood estimate diverges"
        )
        self.node = node
        self.side = side


class ConvergenceError(FitError):
    def __init__(self, residual: float, iters: int):
        super().__init__(f"no convergence after {iters} iterations (max residual {residual:.3g})")
        self.residual = residual


@dataclass
class FitOptions:
    tol: float = 1e-6
    max_iter: int = 10_000
    damping: float = 0.5
    drop_empty: bool = False
    # systems larger than this are solved matrix-free with conjugate gradients
    direct_limit: int = 2400


def expected_statistics(p: DecmParams, allowed: np.ndarray):
    """Expected (out_deg, in_deg, out_str, in_str) under ``p`` over the allowed pairs."""
    P = np.where(allowed, p.edge_prob_matrix(), 0.0)
    lam = p.rate()
    Ew = np.where(allowed & (lam > 0), P / np.where(lam > 0, lam, 1.0), 0.0)
    return P.sum(1), P.sum(0), Ew.sum(1), Ew.sum(0)


def residuals(p: DecmParams, G: WeightedDigraph, allowed=None) -> np.ndarray:
    """Expected minus observed sufficient statistics, stacked as a 4n vector."""
    if allowed is None:
        allowed = G.allowed_mask()
    d = degrees(G)
    e = expected_statistics(p, allowed)
    obs = (d.out_deg, d.in_deg, G.out_strength, G.in_strength)
    return np.concatenate([a - b for a, b in zip(e, obs)])


class _Objective:
    """Negative log-likelihood of the DECM, convex in the natural parameters."""

    def __init__(self, mask, stats):
        self.mask = mask
        self.n = mask.shape[0]
        self.stats = np.concatenate(stats)

    def split(self, theta):
        n = self.n
        return theta[:n], theta[n : 2 * n], theta[2 * n : 3 * n], theta[3 * n :]

    def parts(self, theta):
        a, b, f, s = self.split(theta)
        lam = -f[:, None] - s[None, :]
        if np.any(lam[self.mask] <= 0):
            return None
        lam = np.where(self.mask, lam, 1.0)
        z = a[:, None] + b[None, :] - np.log(lam)
        return lam, z

    def value(self, theta, parts=None):
        parts = parts or self.parts(theta)
        if parts is None:
            return np.inf
        _, z = parts
        return float(np.logaddexp(0.0, z)[self.mask].sum() - theta @ self.stats)

    def gradient(self, theta, parts):
        lam, z = parts
        P = np.where(self.mask, expit(z), 0.0)
        Ew = P / lam
        e = np.concatenate([P.sum(1), P.sum(0), Ew.sum(1), Ew.sum(0)])
        return e - self.stats, P

    def curvature(self, P, lam):
        # per-pair second derivatives in (eta, nu) with nu = phi_u + psi_v
        A = P * (1.0 - P)
        B = A / lam
        C = P * (2.0 - P) / lam**2
        return A, B, C


def _dense_hessian(A, B, C):
    n = A.shape[0]
    H = np.zeros((4 * n, 4 * n))
    sl = [slice(i * n, (i + 1) * n) for i in range(4)]
    for (i, j), M in {(0, 1): A, (0, 3): B, (2, 1): B, (2, 3): C}.items():
        H[sl[i], sl[j]] = M
        H[sl[j], sl[i]] = M.T
    diag = np.concatenate([A.sum(1), A.sum(0), C.sum(1), C.sum(0)])
    H[np.arange(4 * n), np.arange(4 * n)] = diag
    idx = np.arange(n)
    H[idx, 2 * n + idx] = H[2 * n + idx, idx] = B.sum(1)
    H[n + idx, 3 * n + idx] = H[3 * n + idx, n + idx] = B.sum(0)
    return H


def _hvp_operator(A, B, C, free):
    n = A.shape[0]
    rA, cA, rB, cB, rC, cC = A.sum(1), A.sum(0), B.sum(1), B.sum(0), C.sum(1), C.sum(0)

    def mv(x_free):
        x = np.zeros(4 * n)
        x[free] = x_free
        a, b, f, s = x[:n], x[n : 2 * n], x[2 * n : 3 * n], x[3 * n :]
        y = np.concatenate(
            [
                rA * a + A @ b + rB * f + B @ s,
                A.T @ a + cA * b + B.T @ f + cB * s,
                rB * a + B @ b + rC * f + C @ s,
                B.T @ a + cB * b + C.T @ f + cC * s,
            ]
        )
        return y[free]

    diag = np.concatenate([rA, cA, rC, cC])[free]
    m = len(free)
    op = scipy.sparse.linalg.LinearOperator((m, m), matvec=mv, dtype=float)
    precond = scipy.sparse.linalg.LinearOperator(
        (m, m), matvec=lambda r: r / np.maximum(diag, 1e-300), dtype=float
    )
    return op, precond


def _check_degrees(d, mask, rows_on, cols_on):
    limit_out, limit_in = mask.sum(1), mask.sum(0)
    for side, deg, limit, on in (
        ("out", d.out_deg, limit_out, rows_on),
        ("in", d.in_deg, limit_in, cols_on),
    ):
        bad = np.flatnonzero(on & ((deg <= 0) | (deg >= limit)))
        if len(bad):
            u = int(bad[0])
            raise BoundaryDegreeError(u, side, int(deg[u]), int(limit[u]))


def fit_mle(G: WeightedDigraph, opts: FitOptions | None = None) -> DecmParams:
    """Maximum likelihood DECM parameters for ``G``.

    Solves the 4n moment equations (expected degrees and strengths equal to
    the observed ones) by damped Newton iteration on the convex negative
    log-likelihood. With ``opts.drop_empty`` nodes whose out- (in-) degree is
    zero are removed from the out (in) equations and their parameters are
    set to a large negative sentinel, since their MLE lies at infinity.

    Raises :class:`BoundaryDegreeError` when some degree is zero (unless
    dropped) or equals the number of admissible partners, and
    :class:`ConvergenceError` when the residual stays above ``opts.tol``.
    """
    opts = opts or FitOptions()
    n = G.n
    d = degrees(G)
    mask = G.allowed_mask()
    rows_on = d.out_deg > 0
    cols_on = d.in_deg > 0
    if opts.drop_empty:
        mask &= rows_on[:, None] & cols_on[None, :]
    else:
        rows_on[:] = True
        cols_on[:] = True
    _check_degrees(d, mask, rows_on, cols_on)
    if mask.sum() == 0:
        raise FitError("graph has no admissible pairs to fit")

    s_out, s_in = G.out_strength, G.in_strength
    stats = (d.out_deg.astype(float), d.in_deg.astype(float), s_out, s_in)
    obj = _Objective(mask, stats)

    M = float(d.out_deg.sum())
    lam0 = M / G.total_weight
    theta = np.concatenate(
        [
            np.log(np.maximum(d.out_deg, 0.5) / np.sqrt(M)) + 0.5 * np.log(lam0),
            np.log(np.maximum(d.in_deg, 0.5) / np.sqrt(M)) + 0.5 * np.log(lam0),
            np.full(n, -lam0 / 2),
            np.full(n, -lam0 / 2),
        ]
    )
    # variables that enter the likelihood; one beta and one psi are pinned to
    # remove the two additive gauge symmetries
    active = np.concatenate([rows_on, cols_on, rows_on, cols_on])
    pin = int(np.flatnonzero(cols_on)[0])
    active[n + pin] = False
    active[3 * n + pin] = False
    free = np.flatnonzero(active)

    parts = obj.parts(theta)
    fval = obj.value(theta, parts)
    res = np.inf
    for it in range(1, opts.max_iter + 1):
        g, P = obj.gradient(theta, parts)
        g[~np.concatenate([rows_on, cols_on, rows_on, cols_on])] = 0.0
        res = float(np.abs(g).max())
        if res <= opts.tol:
            break
        A, B, C = obj.curvature(P, parts[0])
        step = np.zeros(4 * n)
        if len(free) <= opts.direct_limit:
            H = _dense_hessian(A, B, C)[np.ix_(free, free)]
            try:
                step[free] = scipy.linalg.solve(H, -g[free], assume_a="pos")
            except (np.linalg.LinAlgError, ValueError):
                step[free] = scipy.linalg.lstsq(H, -g[free])[0]
        else:
            op, pre = _hvp_operator(A, B, C, free)
            step[free], _ = scipy.sparse.linalg.cg(op, -g[free], M=pre, rtol=1e-10, maxiter=500)
        slope = float(g @ step)
        t = 1.0
        for _ in range(60):
            cand = theta + t * step
            cparts = obj.parts(cand)
            if cparts is not None:
                cval = obj.value(cand, cparts)
                if cval <= fval + 1e-4 * t * slope:
                    break
                # near the optimum the objective is flat to rounding; judge by the gradient
                if t == 1.0 and abs(cval - fval) <= 1e-12 * max(1.0, abs(fval)):
                    gc, _ = obj.gradient(cand, cparts)
                    if np.abs(gc).max() < res:
                        break
            t *= opts.damping
        else:
            raise ConvergenceError(res, it)
        theta, parts, fval = cand, cparts, cval
    else:
        raise ConvergenceError(res, opts.max_iter)

    a, b, f, s = (x.copy() for x in obj.split(theta))
    # balance the gauge; phi and psi both end up negative whenever some gauge allows it
    hi_f, hi_s = f[rows_on].max(), s[cols_on].max()
    c = (hi_s - hi_f) / 2.0
    f += c
    s -= c
    shift = (a[rows_on].mean() - b[cols_on].mean()) / 2.0
    a -= shift
    b += shift
    a[~rows_on] = DROPPED
    b[~cols_on] = DROPPED
    f[~rows_on] = f[rows_on].min()
    s[~cols_on] = s[cols_on].min()
    log.debug("DECM fit converged in %d iterations, residual %.3g", it, res)
    try:
        return DecmParams(a, b, f, s)
    except ValueError as exc:
        # only reachable with a custom forbidden set between distinct nodes
        raise FitError(f"fitted rates are not representable: {exc}") from exc
