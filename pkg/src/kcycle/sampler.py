"""k-cycle MCMC sampler for graphs with fixed strengths and degrees within +-m.

A step picks a k-cycle with an alternating walk over out- and in-neighbours,
then resamples the cycle-weights from their full conditional under the DECM
restricted to the degree slack, with the boundary masses reweighted by the
relative probability of the walk picking the same cycle from each boundary
graph. Heavy lifting is done in :mod:`kcycle._kernel`.
"""
from __future__ import annotations

import logging
from collections import namedtuple
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from . import _kernel as K
from .decm import DecmParams, FitError, FitOptions, fit_mle
from .graph import DegreeVector, WeightedDigraph, degrees

log = logging.getLogger(__name__)

RESYNC_EVERY = 1_000_000

KState = namedtuple(
    "KState",
    "n m eu ev ew elist epos cnt free hkey hval onbr ocnt eopos inbr icnt eipos "
    "fkey d0o d0i ahat bhat",
)


@dataclass
class SamplerConfig:
    """Chain settings.

    ``k_probs`` gives P(k) for k = 2, 3, ...; when omitted it is the truncated
    geometric P(k) ~ 2^-(k-2) on 2..k_max with ``k_max = min(n, 16)``.
    ``nuisance`` is ``"zero"``, ``"mle"``, ``"file"`` (parameters passed in
    explicitly) or ``"auto"`` (MLE, falling back to zero if the fit fails).
    """

    m: int = 1
    k_max: int | None = None
    k_probs: tuple | None = None
    nuisance: str = "auto"
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    chain_id: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("degree slack m must be >= 1")
        if self.nuisance not in ("zero", "mle", "file", "auto"):
            raise ValueError(f"unknown nuisance mode {self.nuisance!r}")
        if self.thin < 1 or self.burn_in < 0:
            raise ValueError("thin must be >= 1 and burn_in >= 0")
        if self.k_probs is not None:
            probs = np.asarray(self.k_probs, dtype=float)
            if len(probs) == 0 or np.any(probs <= 0):
                raise ValueError("k_probs must be positive for every k in 2..k_max")

    def k_distribution(self, n: int) -> np.ndarray:
        if self.k_probs is not None:
            probs = np.asarray(self.k_probs, dtype=float)
        else:
            k_max = self.k_max if self.k_max is not None else min(n, 16)
            k_max = max(2, k_max)
            probs = 0.5 ** np.arange(k_max - 1)
        return probs / probs.sum()

    def rng(self) -> np.random.Generator:
        """Counter-based generator; each chain id gets an independent stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.chain_id,))
        return np.random.Generator(np.random.Philox(seq))

    def to_dict(self) -> dict:
        return asdict(self)


def _cumulative(probs):
    c = np.cumsum(probs)
    c[-1] = 1.0
    return c


class ChainState:
    """Mutable chain state built from a graph, a target degree vector and slack."""

    def __init__(
        self,
        G: WeightedDigraph,
        m: int,
        d0: DegreeVector | None = None,
        alpha_hat=None,
        beta_hat=None,
    ):
        n = G.n
        d = degrees(G)
        d0 = d if d0 is None else d0
        if d0.n != n:
            raise ValueError("target degree vector does not match the graph")
        self.forbidden = G.forbidden
        ocap = int(min(n, max(d.out_deg.max(initial=0), d0.out_deg.max(initial=0) + m)))
        icap = int(min(n, max(d.in_deg.max(initial=0), d0.in_deg.max(initial=0) + m)))
        cap = int(min(n * n, max(G.n_edges, int(d0.out_deg.sum()) + n * m)))
        cap = max(cap, 1)
        hsize = K.table_size(cap)
        fkey = np.full(K.table_size(len(G.forbidden)), K.EMPTY, np.int64)
        fval = np.zeros_like(fkey)
        for u, v in G.forbidden:
            K.table_insert(fkey, fval, u * n + v, 1)
        zeros = np.zeros(n)
        self.st = KState(
            n=n,
            m=int(m),
            eu=np.zeros(cap, np.int64),
            ev=np.zeros(cap, np.int64),
            ew=np.zeros(cap),
            elist=np.zeros(cap, np.int64),
            epos=np.zeros(cap, np.int64),
            cnt=np.array([0, cap], np.int64),
            free=np.arange(cap, dtype=np.int64)[::-1].copy(),
            hkey=np.full(hsize, K.EMPTY, np.int64),
            hval=np.zeros(hsize, np.int64),
            onbr=np.zeros((n, max(ocap, 1)), np.int64),
            ocnt=np.zeros(n, np.int64),
            eopos=np.zeros(cap, np.int64),
            inbr=np.zeros((n, max(icap, 1)), np.int64),
            icnt=np.zeros(n, np.int64),
            eipos=np.zeros(cap, np.int64),
            fkey=fkey,
            d0o=np.asarray(d0.out_deg, np.int64).copy(),
            d0i=np.asarray(d0.in_deg, np.int64).copy(),
            ahat=zeros.copy() if alpha_hat is None else np.asarray(alpha_hat, float).copy(),
            bhat=zeros.copy() if beta_hat is None else np.asarray(beta_hat, float).copy(),
        )
        for u, v, w in G.edges():
            K.add_edge(self.st, u, v, w)

    @property
    def n(self) -> int:
        return self.st.n

    @property
    def m(self) -> int:
        return self.st.m

    @property
    def n_edges(self) -> int:
        return int(self.st.cnt[0])

    def weight(self, u: int, v: int) -> float:
        return float(K.get_weight(self.st, u, v))

    def degrees(self) -> DegreeVector:
        return DegreeVector(self.st.ocnt.copy(), self.st.icnt.copy())

    def target_degrees(self) -> DegreeVector:
        return DegreeVector(self.st.d0o.copy(), self.st.d0i.copy())

    def strengths(self) -> tuple[np.ndarray, np.ndarray]:
        """Out- and in-strengths recomputed from the current weights."""
        out_str, in_str = np.zeros(self.n), np.zeros(self.n)
        K.strengths(self.st, out_str, in_str)
        return out_str, in_str

    def to_dense(self, out: np.ndarray | None = None) -> np.ndarray:
        W = np.zeros((self.n, self.n)) if out is None else out
        K.fill_dense(self.st, W)
        return W

    def to_graph(self) -> WeightedDigraph:
        G = WeightedDigraph(self.n, forbidden=self.forbidden)
        st = self.st
        live = st.elist[: st.cnt[0]]
        order = np.lexsort((st.ev[live], st.eu[live]))
        for e in live[order]:
            G.set_weight(int(st.eu[e]), int(st.ev[e]), float(st.ew[e]))
        return G

    def max_slack(self) -> int:
        return int(K.max_slack(self.st))

    def forbidden_edges(self) -> int:
        return int(K.count_forbidden(self.st))


@dataclass(frozen=True)
class CycleCoords:
    """Row nodes ``us`` and column nodes ``vs`` of a k-cycle."""

    us: tuple
    vs: tuple

    def __post_init__(self):
        if len(self.us) != len(self.vs) or len(self.us) < 2:
            raise ValueError("a k-cycle needs k >= 2 row and column nodes")
        if len(set(self.us)) != len(self.us) or len(set(self.vs)) != len(self.vs):
            raise ValueError("cycle nodes must be distinct within rows and within columns")

    @property
    def k(self) -> int:
        return len(self.us)

    def coords(self) -> list[tuple[int, int]]:
        """``[(u1,v1), (u1,v2), (u2,v2), ..., (uk,vk), (uk,v1)]``."""
        k = self.k
        out = []
        for i in range(k):
            out.append((self.us[i], self.vs[i]))
            out.append((self.us[i], self.vs[(i + 1) % k]))
        return out

    def as_set(self) -> frozenset:
        return frozenset(self.coords())

    def arrays(self):
        return np.asarray(self.us, np.int64), np.asarray(self.vs, np.int64)


def alternating(k: int) -> np.ndarray:
    return np.tile([1.0, -1.0], k)


def cycle_weights(G, z: CycleCoords) -> np.ndarray:
    return np.array([G.weight(u, v) for u, v in z.coords()])


def delta_bounds(x) -> tuple[float, float]:
    """Feasible range of the shift along ``(+1, -1, +1, ...)`` keeping weights >= 0."""
    x = np.asarray(x, dtype=float)
    if len(x) % 2 or len(x) < 4:
        raise ValueError("cycle-weights must have even length 2k with k >= 2")
    return float(-x[0::2].min()), float(x[1::2].min())


def apply_delta(G: WeightedDigraph, z: CycleCoords, delta: float) -> WeightedDigraph:
    """Copy of ``G`` with the cycle-weights shifted by ``delta``."""
    x = cycle_weights(G, z)
    lo, hi = delta_bounds(x)
    if not lo <= delta <= hi:
        raise ValueError(f"delta {delta} outside [{lo}, {hi}]")
    out = G.copy()
    y = x + alternating(z.k) * delta
    if delta == lo:
        y[0::2][x[0::2] == -lo] = 0.0
    if delta == hi:
        y[1::2][x[1::2] == hi] = 0.0
    for (u, v), w in zip(z.coords(), np.maximum(y, 0.0)):
        out.set_weight(u, v, w)
    return out


def selection_weights(G_star: WeightedDigraph, z: CycleCoords) -> tuple[float, float]:
    """Probability of the walk choosing ``z`` from each boundary graph, relative to ``G_star``.

    ``G_star`` must carry positive weights on every cycle coordinate. Returns
    ``(gamma_l, gamma_u)`` for the graphs reached at the lower and upper end
    of the feasible shift. A boundary that zeroes two or more coordinates
    (a positive tie) can never be selected, so its ratio is 0.
    """
    x = cycle_weights(G_star, z)
    if np.any(x <= 0):
        raise ValueError("G_star must have positive weights on all cycle coordinates")
    out_deg = {u: len(G_star.out_neighbors(u)) for u in z.us}
    in_deg = {v: len(G_star.in_neighbors(v)) for v in z.vs}
    terms = np.array([(out_deg[u] - 1) * (in_deg[v] - 1) for u, v in z.coords()], dtype=float)
    total = terms.sum()
    if total <= 0:
        raise ValueError("degenerate cycle: all selection terms vanish")
    M = G_star.n_edges
    scale = M / (M - 1) / total
    even = np.arange(2 * z.k) % 2 == 0
    zero_l = np.flatnonzero(even & (x == x[even].min()))
    zero_u = np.flatnonzero(~even & (x == x[~even].min()))
    gl = scale * terms[zero_l[0]] if len(zero_l) == 1 else 0.0
    gu = scale * terms[zero_u[0]] if len(zero_u) == 1 else 0.0
    return float(gl), float(gu)


def interior_graph(G: WeightedDigraph, z: CycleCoords) -> WeightedDigraph:
    """Copy of ``G`` with cycle-weights moved to the midpoint of the feasible shift.

    When the shift range is non-degenerate, every cycle coordinate is positive there.
    """
    lo, hi = delta_bounds(cycle_weights(G, z))
    return apply_delta(G, z, 0.5 * (lo + hi))


# operations on a chain state


def _state(G, m=None, d0=None, alpha_hat=None, beta_hat=None) -> ChainState:
    if isinstance(G, ChainState):
        return G
    return ChainState(G, 1 if m is None else m, d0, alpha_hat, beta_hat)


def select_cycle(G, cfg: SamplerConfig, rng: np.random.Generator, k: int | None = None) -> CycleCoords | None:
    """One attempt of the alternating-walk selection; ``None`` when the walk fails.

    ``G`` is a graph or a :class:`ChainState`; ``k`` defaults to a draw from
    the configured cycle-length distribution.
    """
    state = _state(G, cfg.m)
    if k is None:
        k = int(K.draw_k(rng, _cumulative(cfg.k_distribution(state.n))))
    us = np.empty(k, np.int64)
    vs = np.empty(k, np.int64)
    if K.select_cycle(state.st, rng, k, us, vs) == 0:
        return None
    return CycleCoords(tuple(int(u) for u in us), tuple(int(v) for v in vs))


def chain_gammas(state: ChainState, z: CycleCoords) -> tuple[float, float]:
    """Selection ratios as the compiled chain computes them from the current state."""
    us, vs = z.arrays()
    k = z.k
    x, yl, yu, terms = (np.empty(2 * k) for _ in range(4))
    if not K.read_weights(state.st, k, us, vs, x):
        raise ValueError("cycle touches a forbidden pair")
    dl, du = K.bounds(x, k)
    K.shifted(x, k, dl, yl)
    K.shifted(x, k, du, yu)
    gl, gu = K.gammas(state.st, k, us, vs, x, yl, yu, terms)
    if gl < 0:
        raise ValueError("degenerate cycle: all selection terms vanish")
    return gl, gu


def update_cycle(
    state: ChainState,
    z: CycleCoords,
    rng: np.random.Generator,
    gammas: tuple[float, float] | None = None,
) -> tuple[int, float]:
    """Resample the weights of cycle ``z`` in place.

    ``gammas`` defaults to the selection ratios computed from the state.
    Returns the outcome code (see :mod:`kcycle._kernel`) and the shift applied.
    """
    us, vs = z.arrays()
    k = z.k
    bufs = [np.empty(2 * k) for _ in range(5)]
    out = np.zeros(1)
    if gammas is None:
        res = K.update(state.st, rng, k, us, vs, 1.0, 1.0, 2, *bufs, out)
    else:
        res = K.update(state.st, rng, k, us, vs, float(gammas[0]), float(gammas[1]), 1, *bufs, out)
    moved = res in (K.LOW, K.HIGH, K.INTERIOR)
    return int(res), float(out[0]) if moved else 0.0


def repeat_update(state: ChainState, z: CycleCoords, rng, gammas, nrep: int):
    """Apply the same cycle update ``nrep`` times; returns (outcomes, shifts)."""
    us, vs = z.arrays()
    outcomes = np.zeros(nrep, np.int64)
    deltas = np.zeros(nrep)
    K.repeat_update(state.st, rng, z.k, us, vs, float(gammas[0]), float(gammas[1]), nrep, outcomes, deltas)
    return outcomes, deltas


def kcycle_step(
    G: WeightedDigraph,
    z: CycleCoords,
    alpha_hat,
    beta_hat,
    m: int,
    d0: DegreeVector,
    gamma_l: float,
    gamma_u: float,
    rng: np.random.Generator,
) -> WeightedDigraph:
    """One conditional update of cycle ``z`` on a graph value; ``G`` itself is untouched.

    Returns ``G`` (the same object) when the update is rejected.
    """
    state = ChainState(G, m, d0, alpha_hat, beta_hat)
    res, _ = update_cycle(state, z, rng, (gamma_l, gamma_u))
    if res in (K.REJECT, K.NO_CYCLE):
        return G
    return state.to_graph()


def step(
    G: WeightedDigraph,
    cfg: SamplerConfig,
    d0: DegreeVector,
    rng: np.random.Generator,
    params: DecmParams | None = None,
) -> WeightedDigraph:
    """One full iteration on a graph value: select a cycle, then update it with computed ratios."""
    a = params.alpha if params is not None else None
    b = params.beta if params is not None else None
    state = ChainState(G, cfg.m, d0, a, b)
    kcum = _cumulative(cfg.k_distribution(G.n))
    res = K.step(state.st, rng, kcum, 2, K.buffers(len(kcum) + 1))
    if res in (K.REJECT, K.NO_CYCLE):
        return G
    return state.to_graph()


@dataclass
class ChainStats:
    steps: int = 0
    outcomes: np.ndarray = field(default_factory=lambda: np.zeros(5, np.int64))
    max_strength_drift: float = 0.0

    @property
    def moved(self) -> int:
        return int(self.outcomes[K.LOW] + self.outcomes[K.HIGH] + self.outcomes[K.INTERIOR])

    def as_dict(self) -> dict:
        names = ("no_cycle", "reject", "low", "high", "interior")
        return {
            "steps": self.steps,
            **{k: int(v) for k, v in zip(names, self.outcomes)},
            "max_strength_drift": self.max_strength_drift,
        }


class Chain:
    """A k-cycle chain on graphs with the strengths of ``G0`` and degrees within ``m`` of ``d0``.

    ``use_gamma=False`` drops the selection correction (a diagnostic that
    makes the chain biased; never use it for inference).
    """

    def __init__(
        self,
        G0: WeightedDigraph,
        cfg: SamplerConfig,
        d0: DegreeVector | None = None,
        params: DecmParams | None = None,
        use_gamma: bool = True,
    ):
        self.cfg = cfg
        self.params, self.nuisance = resolve_nuisance(G0, cfg, params)
        a = self.params.alpha if self.params is not None else None
        b = self.params.beta if self.params is not None else None
        self.state = ChainState(G0, cfg.m, d0, a, b)
        self.kcum = _cumulative(cfg.k_distribution(G0.n))
        self.rng = cfg.rng()
        self.use_gamma = 2 if use_gamma else 0
        self.stats = ChainStats()
        self.s0 = (G0.out_strength, G0.in_strength)
        self._since_sync = 0

    def advance(self, nsteps: int) -> None:
        left = int(nsteps)
        while left > 0:
            chunk = min(left, RESYNC_EVERY - self._since_sync)
            K.run_steps(self.state.st, self.rng, chunk, self.kcum, self.stats.outcomes, self.use_gamma)
            left -= chunk
            self.stats.steps += chunk
            self._since_sync += chunk
            if self._since_sync >= RESYNC_EVERY:
                self.resync()

    def resync(self) -> float:
        """Compare strengths recomputed from the weights with the initial ones; returns the max relative drift.

        The chain keeps no running strength totals (every update reads and
        writes weights only), so there is nothing to reset; the drift is recorded.
        """
        self._since_sync = 0
        out_str, in_str = self.state.strengths()
        drift = 0.0
        for now, ref in ((out_str, self.s0[0]), (in_str, self.s0[1])):
            pos = ref > 0
            if pos.any():
                drift = max(drift, float(np.max(np.abs(now[pos] - ref[pos]) / ref[pos])))
        self.stats.max_strength_drift = max(self.stats.max_strength_drift, drift)
        return drift

    def trace_weight(self, u: int, v: int, nsteps: int) -> np.ndarray:
        """Advance ``nsteps`` recording ``w_uv`` after each step (a mixing diagnostic)."""
        out = np.empty(nsteps)
        counts = K.trace_weight(self.state.st, self.rng, nsteps, self.kcum, u, v, self.use_gamma, out)
        self.stats.outcomes += counts
        self.stats.steps += nsteps
        return out

    def graph(self) -> WeightedDigraph:
        return self.state.to_graph()


def resolve_nuisance(G0, cfg: SamplerConfig, params: DecmParams | None):
    """Decide the (alpha, beta) used in the boundary masses; returns (params or None, mode used)."""
    mode = cfg.nuisance
    if mode == "zero":
        return None, "zero"
    if mode == "file":
        if params is None:
            raise ValueError("nuisance mode 'file' needs parameters")
        if params.n != G0.n:
            raise ValueError("parameter vectors do not match the graph size")
        return params, "file"
    if params is not None:
        return params, "given"
    try:
        fitted = fit_mle(G0, FitOptions(drop_empty=True))
    except FitError as exc:
        if mode == "mle":
            raise
        log.warning("MLE fit failed (%s); using alpha = beta = 0", exc)
        return None, "zero"
    log.info("using MLE nuisance parameters")
    return fitted, "mle"


def run(
    G0: WeightedDigraph,
    cfg: SamplerConfig,
    n_samples: int,
    d0: DegreeVector | None = None,
    params: DecmParams | None = None,
) -> Iterator[WeightedDigraph]:
    """Burn in, then yield ``n_samples`` snapshots spaced ``cfg.thin`` steps apart."""
    chain = Chain(G0, cfg, d0, params)
    chain.advance(cfg.burn_in)
    for _ in range(n_samples):
        chain.advance(cfg.thin)
        yield chain.graph()
