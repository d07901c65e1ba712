"""Absorbing Markov chain for p-persistent CSMA contention.

Conditioned on ``w`` woken nodes, the slot-level contention process is a
chain over states (m, l): m nodes still backlogged, the channel l slots
into an ongoing transmission (l = 0 means idle).  State (0, 0) absorbs
once everyone has delivered.  Rows have at most two nonzero transitions,
so transient analysis is a cheap vector recurrence rather than a matrix
power.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import ScenarioParams


@dataclass(frozen=True)
class CsmaChain:
    """Sparse transition structure for ``wake_count`` contending nodes.

    States are ordered (w,0), (w,1), ..., (w,L-1), (w-1,0), ..., (1,L-1),
    plus the absorbing (0,0) last: ``w*L + 1`` states total.
    """

    wake_count: int
    packet_len_slots: int
    tx_prob: float
    erasure_prob: float
    # per-block probabilities, indexed by block j = 0..w-1 (m = w - j):
    # _q[j]  = P(at least one of m transmits)     : (m,0) -> (m,1)
    # _s[j]  = P(delivery | transmission ongoing) : (m,L-1) -> (m-1,0)
    _q: np.ndarray = field(repr=False, default=None)
    _s: np.ndarray = field(repr=False, default=None)

    @property
    def n_states(self) -> int:
        return self.wake_count * self.packet_len_slots + 1

    def states(self) -> list[tuple[int, int]]:
        """(m, l) pairs in storage order, absorbing (0, 0) last."""
        out = [(m, l)
               for m in range(self.wake_count, 0, -1)
               for l in range(self.packet_len_slots)]
        out.append((0, 0))
        return out

    def state_index(self, m: int, l: int) -> int:
        if m == 0:
            if l != 0:
                raise ValueError("absorbing state is (0, 0)")
            return self.n_states - 1
        if not (1 <= m <= self.wake_count and 0 <= l < self.packet_len_slots):
            raise ValueError(f"state ({m}, {l}) not in the chain")
        return (self.wake_count - m) * self.packet_len_slots + l

    def transitions(self) -> dict[tuple[int, int], list[tuple[tuple[int, int], float]]]:
        """Sparse map state -> [(target state, probability), ...]."""
        w, L = self.wake_count, self.packet_len_slots
        out = {(0, 0): [((0, 0), 1.0)]}
        for j in range(w):
            m = w - j
            q, s = float(self._q[j]), float(self._s[j])
            down = (m - 1, 0)
            if L == 1:
                # transmission start and completion collapse into one slot
                out[(m, 0)] = _merge([(down, q * s), ((m, 0), 1.0 - q * s)])
            else:
                out[(m, 0)] = _merge([((m, 1), q), ((m, 0), 1.0 - q)])
                for l in range(1, L - 1):
                    out[(m, l)] = [((m, l + 1), 1.0)]
                out[(m, L - 1)] = _merge([(down, s), ((m, 0), 1.0 - s)])
        return out


def _merge(pairs):
    return [(state, p) for state, p in pairs if p > 0.0] or [pairs[0]]


def build_chain(params: ScenarioParams, wake_count: int,
                tx_prob: float | None = None) -> CsmaChain:
    """Chain for ``wake_count`` contenders; ``tx_prob`` overrides the scenario's p."""
    if wake_count < 0:
        raise ValueError("wake_count must be nonnegative")
    p = params.tx_prob if tx_prob is None else tx_prob
    if not 0.0 < p <= 1.0:
        raise ValueError("tx_prob must lie in (0, 1]")
    w = wake_count
    m = np.arange(w, 0, -1, dtype=float)
    q = -np.expm1(m * np.log1p(-p)) if p < 1 else np.ones(w)
    # P(single transmitter and no erasure | at least one transmitter)
    single = m * p * (1.0 - p) ** (m - 1)
    with np.errstate(invalid="ignore"):
        s = np.where(q > 0, (1.0 - params.erasure_prob) * single / np.where(q > 0, q, 1.0), 0.0)
    return CsmaChain(wake_count=w, packet_len_slots=params.packet_len_slots,
                     tx_prob=p, erasure_prob=params.erasure_prob, _q=q, _s=s)


# ---------------------------------------------------------------------------
# transient propagation
# ---------------------------------------------------------------------------

def initial_state(chain: CsmaChain) -> np.ndarray:
    """Unit mass on (w, 0) -- or on the absorbing state when w = 0."""
    phi = np.zeros(chain.n_states)
    phi[0 if chain.wake_count > 0 else -1] = 1.0
    return phi


def step(chain: CsmaChain, phi: np.ndarray) -> np.ndarray:
    """One slot of Phi(t+1) = Phi(t) R using the two-nonzeros-per-row structure."""
    w, L = chain.wake_count, chain.packet_len_slots
    if w == 0:
        return phi.copy()
    blocks = phi[:-1].reshape(w, L)
    new = np.empty_like(blocks)
    q, s = chain._q, chain._s
    if L == 1:
        qs = q * s
        new[:, 0] = blocks[:, 0] * (1.0 - qs)
        carry = blocks[:, 0] * qs
    else:
        if L > 2:
            new[:, 2:] = blocks[:, 1:L - 1]
        new[:, 1] = blocks[:, 0] * q
        new[:, 0] = blocks[:, 0] * (1.0 - q) + blocks[:, L - 1] * (1.0 - s)
        carry = blocks[:, L - 1] * s
    new[1:, 0] += carry[:-1]
    out = np.empty_like(phi)
    out[:-1] = new.ravel()
    out[-1] = phi[-1] + carry[-1]
    return out


def propagate(chain: CsmaChain, steps: int) -> np.ndarray:
    """State distribution after ``steps`` slots from the initial state."""
    phi = initial_state(chain)
    for _ in range(steps):
        phi = step(chain, phi)
    return phi


@dataclass(frozen=True)
class SuccessDistribution:
    """pmf of the number of nodes delivered within ``lead_slots`` slots."""

    wake_count: int
    lead_slots: int
    pmf: np.ndarray

    def mean(self) -> float:
        return float(np.dot(self.pmf, np.arange(self.wake_count + 1)))


def _success_pmf(chain: CsmaChain, phi: np.ndarray) -> np.ndarray:
    w, L = chain.wake_count, chain.packet_len_slots
    pmf = np.empty(w + 1)
    pmf[w] = phi[-1]
    if w > 0:
        # w_s < w successes leave m = w - w_s nodes backlogged, any l
        pmf[:w] = phi[:-1].reshape(w, L).sum(axis=1)[::-1]
    return pmf


def success_count_dist(chain: CsmaChain, lead_slots: int) -> SuccessDistribution:
    """Distribution of deliveries by the deadline, ``lead_slots`` after sampling."""
    if lead_slots < 0:
        raise ValueError("lead_slots must be nonnegative")
    phi = propagate(chain, lead_slots)
    return SuccessDistribution(chain.wake_count, lead_slots, _success_pmf(chain, phi))


def success_count_curve(chain: CsmaChain, lead_slots_grid) -> list[SuccessDistribution]:
    """Success distributions at several deadlines from one propagation pass.

    ``lead_slots_grid`` must be sorted ascending; the chain is propagated
    once to the largest deadline and snapshotted along the way, so the
    cost is O(max(grid) * w * L) regardless of grid size.
    """
    grid = [int(z) for z in lead_slots_grid]
    if any(z < 0 for z in grid) or any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("lead_slots_grid must be sorted and nonnegative")
    out = []
    phi = initial_state(chain)
    t = 0
    for z in grid:
        for _ in range(z - t):
            phi = step(chain, phi)
        t = z
        out.append(SuccessDistribution(chain.wake_count, z, _success_pmf(chain, phi)))
    return out


def expected_success_table(params: ScenarioParams, max_wake: int, lead_slots_grid,
                           tx_prob_of_w=None) -> np.ndarray:
    """E[deliveries by deadline] for w = 0..max_wake at each grid deadline.

    Returns an array of shape (max_wake + 1, len(grid)).  ``tx_prob_of_w``
    maps a wake count to the persistence probability its chain uses
    (default: the scenario's fixed p).  This is the cached quantity the
    optimizer sweeps reuse across thresholds.
    """
    grid = list(lead_slots_grid)
    out = np.zeros((max_wake + 1, len(grid)))
    for w in range(1, max_wake + 1):
        p = tx_prob_of_w(w) if tx_prob_of_w is not None else None
        chain = build_chain(params, w, tx_prob=p)
        for j, dist in enumerate(success_count_curve(chain, grid)):
            out[w, j] = dist.mean()
    return out
