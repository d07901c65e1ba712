"""Closed-form expected k-QAoI, energy, and delay for the four wake-up schemes.

All pmfs are computed in log space (gammaln) so binomial/hypergeometric
coefficients stay finite for hundreds of nodes.  Expectations accumulate
in a fixed order (ascending wake count, then successes, then top-k hits)
so results are bit-reproducible across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .chain import build_chain, success_count_curve, success_count_dist
from .scenario import ScenarioParams, SchemeSpec, capped_age_cost, wake_probability

PofW = Callable[[int], float] | None


@dataclass(frozen=True)
class SchemePoint:
    """One (scheme, parameters) -> (k-QAoI, energy) evaluation record."""

    scheme: SchemeSpec
    expected_kqaoi: float
    expected_energy_joules: float


# ---------------------------------------------------------------------------
# counting distributions
# ---------------------------------------------------------------------------

def _log_comb(n, r):
    return gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)


def binomial_pmf(n: int, prob: float) -> np.ndarray:
    """Binomial(n, prob) pmf over 0..n, evaluated via log-gamma."""
    counts = np.arange(n + 1)
    if prob <= 0.0:
        pmf = np.zeros(n + 1)
        pmf[0] = 1.0
        return pmf
    if prob >= 1.0:
        pmf = np.zeros(n + 1)
        pmf[n] = 1.0
        return pmf
    logpmf = (_log_comb(n, counts)
              + counts * np.log(prob) + (n - counts) * np.log1p(-prob))
    return np.exp(logpmf)


def wake_count_pmf(params: ScenarioParams, threshold: float) -> np.ndarray:
    """pmf of the number of woken nodes for a content threshold."""
    return binomial_pmf(params.n_nodes, wake_probability(params, threshold))


def topk_hit_pmf(k: int, wake_count: int, successes: int) -> np.ndarray:
    """pmf over r = top-k members among the ``successes`` delivered nodes.

    With w <= k woken, every woken node is a top-k member, so r equals the
    success count.  Otherwise the delivered set is an exchangeable draw of
    ``successes`` nodes from the w woken ones, of which exactly k are
    top-k members: r is hypergeometric.
    """
    w, ws = wake_count, successes
    if not 0 <= ws <= w:
        raise ValueError(f"successes must lie in [0, {w}], got {ws}")
    rmax = min(ws, k)
    pmf = np.zeros(rmax + 1)
    if w <= k:
        pmf[ws] = 1.0
        return pmf
    r = np.arange(rmax + 1)
    ok = (w - k - ws + r) >= 0
    logpmf = np.full(rmax + 1, -np.inf)
    rr = r[ok]
    logpmf[ok] = (_log_comb(k, rr) + _log_comb(w - k, ws - rr) - _log_comb(w, ws))
    return np.exp(logpmf)


def qwu_topk_hit_pmf(params: ScenarioParams, successes: int) -> np.ndarray:
    """Top-k hit pmf for content-blind wake-up.

    The woken set is independent of the observed values, so the delivered
    set is a uniform draw from all N nodes: hypergeometric over N
    regardless of how many woke.
    """
    n, k, ws = params.n_nodes, params.k, successes
    if not 0 <= ws <= n:
        raise ValueError(f"successes must lie in [0, {n}], got {ws}")
    rmax = min(ws, k)
    r = np.arange(rmax + 1)
    ok = (n - k - ws + r) >= 0
    logpmf = np.full(rmax + 1, -np.inf)
    rr = r[ok]
    logpmf[ok] = _log_comb(k, rr) + _log_comb(n - k, ws - rr) - _log_comb(n, ws)
    return np.exp(logpmf)


# ---------------------------------------------------------------------------
# content-based wake-up
# ---------------------------------------------------------------------------

def _age_pair(params: ScenarioParams, lead_slots: float) -> tuple[float, float]:
    return (capped_age_cost(params, lead_slots),
            capped_age_cost(params, params.age_penalty_slots))


def _mixture_kqaoi(params: ScenarioParams, count_pmf: np.ndarray, lead_slots: int,
                   hit_pmf_of, tx_prob_of_w: PofW) -> float:
    """Triple expectation over wake count, deliveries, and top-k hits."""
    k = params.k
    c_fresh, c_stale = _age_pair(params, lead_slots)
    total = 0.0
    for w in range(len(count_pmf)):
        pw = count_pmf[w]
        if pw == 0.0:
            continue
        p = tx_prob_of_w(w) if tx_prob_of_w is not None else None
        chain = build_chain(params, w, tx_prob=p)
        success = success_count_dist(chain, lead_slots).pmf
        inner = 0.0
        for ws in range(w + 1):
            ps = success[ws]
            if ps == 0.0:
                continue
            hits = hit_pmf_of(w, ws)
            ages = (np.arange(len(hits)) * c_fresh
                    + (k - np.arange(len(hits))) * c_stale) / k
            inner += ps * float(np.dot(hits, ages))
        total += pw * inner
    return total


def cowu_expected_kqaoi(params: ScenarioParams, threshold: float, lead_slots: int,
                        tx_prob_of_w: PofW = None) -> float:
    """Expected deadline k-QAoI of content-based wake-up.

    ``tx_prob_of_w`` optionally supplies a persistence probability per
    realized wake count (the delay-optimal schedule); default is the
    scenario's fixed p.
    """
    if lead_slots < 1:
        raise ValueError("lead_slots must be >= 1")
    pd = wake_count_pmf(params, threshold)
    return _mixture_kqaoi(params, pd, lead_slots,
                          lambda w, ws: topk_hit_pmf(params.k, w, ws),
                          tx_prob_of_w)


def cowu_kqaoi_curve(params: ScenarioParams, threshold: float,
                     lead_slots_grid: Sequence[int],
                     tx_prob_of_w: PofW = None) -> list[float]:
    """`cowu_expected_kqaoi` over an ascending deadline grid.

    One chain propagation per wake count serves every deadline (the
    transient distribution at a later deadline extends the earlier one),
    so a whole curve costs the same as its largest point.
    """
    grid = [int(z) for z in lead_slots_grid]
    if any(z < 1 for z in grid):
        raise ValueError("lead_slots must be >= 1")
    pd = wake_count_pmf(params, threshold)
    k = params.k
    pairs = [_age_pair(params, z) for z in grid]
    totals = [0.0] * len(grid)
    for w in range(len(pd)):
        pw = pd[w]
        if pw == 0.0:
            continue
        p = tx_prob_of_w(w) if tx_prob_of_w is not None else None
        chain = build_chain(params, w, tx_prob=p)
        hit_age_base = []   # per ws: (hits pmf, hit index array), reused per grid point
        for ws in range(w + 1):
            hits = topk_hit_pmf(k, w, ws)
            hit_age_base.append((hits, np.arange(len(hits))))
        for j, dist in enumerate(success_count_curve(chain, grid)):
            c_fresh, c_stale = pairs[j]
            inner = 0.0
            for ws in range(w + 1):
                ps = dist.pmf[ws]
                if ps == 0.0:
                    continue
                hits, r = hit_age_base[ws]
                inner += ps * float(np.dot(hits, (r * c_fresh + (k - r) * c_stale) / k))
            totals[j] += pw * inner
    return totals


# ---------------------------------------------------------------------------
# energy and delay
# ---------------------------------------------------------------------------

def _energy_given_w(params: ScenarioParams, wake_count: int, tx_prob: float) -> float:
    """Literal evaluation of the per-episode energy closed form."""
    w, p = wake_count, tx_prob
    if w == 0:
        return 0.0
    if params.erasure_prob >= 1.0:
        raise ValueError("erasure_prob = 1 makes delivery impossible (infinite energy)")
    loss = 1.0 - params.erasure_prob
    L, d = params.packet_len_slots, params.slot_seconds
    if p >= 1.0:
        if w == 1:
            # limiting value: no idle waiting, geometric retransmissions
            return params.tx_power_watts * L * d / loss
        raise ValueError("tx_prob = 1 with several contenders collides forever")
    m = np.arange(1, w + 1, dtype=float)
    tx_time = float(np.sum(L / (loss * (1.0 - p) ** (m - 1)))) * d
    rx_time = float(np.sum((L - (L - 1) * (1.0 - p) ** (m - 1))
                           / (loss * p * (1.0 - p) ** (m - 2)))) * d
    return params.tx_power_watts * tx_time + params.rx_power_watts * rx_time


def csma_energy_given_w(params: ScenarioParams, wake_count: int) -> float:
    """Expected total energy (J) spent by ``wake_count`` contenders.

    Evaluates the closed form exactly as written; p = 1 hits the
    (1-p)^(-1) factor in the receive term and is rejected as singular.
    """
    if wake_count < 0:
        raise ValueError("wake_count must be nonnegative")
    if params.tx_prob >= 1.0 and wake_count >= 1:
        raise ValueError("energy closed form is singular at tx_prob = 1")
    return _energy_given_w(params, wake_count, params.tx_prob)


def cowu_expected_energy(params: ScenarioParams, threshold: float,
                         tx_prob_of_w: PofW = None) -> float:
    """Threshold-determined expected energy; independent of the deadline."""
    pd = wake_count_pmf(params, threshold)
    total = 0.0
    for w in range(len(pd)):
        if pd[w] == 0.0:
            continue
        p = params.tx_prob if tx_prob_of_w is None else tx_prob_of_w(w)
        total += pd[w] * _energy_given_w(params, w, p)
    return total


def expected_delay(params: ScenarioParams, wake_count: int,
                   tx_prob: float | None = None) -> float:
    """Expected seconds until all ``wake_count`` contenders have delivered."""
    if wake_count < 0:
        raise ValueError("wake_count must be nonnegative")
    if wake_count == 0:
        return 0.0
    p = params.tx_prob if tx_prob is None else tx_prob
    if p <= 0.0:
        raise ValueError("tx_prob = 0 never transmits")
    if params.erasure_prob >= 1.0:
        raise ValueError("erasure_prob = 1 makes delivery impossible")
    if p >= 1.0 and wake_count > 1:
        raise ValueError("tx_prob = 1 with several contenders collides forever")
    m = np.arange(1, wake_count + 1, dtype=float)
    terms = ((params.packet_len_slots - (params.packet_len_slots - 1) * (1.0 - p) ** m)
             / ((1.0 - params.erasure_prob) * m * p * (1.0 - p) ** (m - 1)))
    return float(np.sum(terms)) * params.slot_seconds


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def rr_expected_kqaoi(params: ScenarioParams) -> float:
    """Round-robin k-QAoI: ages L, 2L, ..., NL hit a uniformly placed top-k."""
    n, L = params.n_nodes, params.packet_len_slots
    ec = params.erasure_prob
    acc = 0.0
    for w in range(1, n + 1):
        acc += (1.0 - ec) * capped_age_cost(params, w * L)
    return acc / n + ec * capped_age_cost(params, params.age_penalty_slots)


def rr_energy(params: ScenarioParams) -> float:
    """Every node transmits exactly once."""
    return (params.tx_power_watts * params.n_nodes
            * params.packet_len_slots * params.slot_seconds)


def qwu_expected_kqaoi(params: ScenarioParams, wake_prob: float, lead_slots: int,
                       tx_prob_of_w: PofW = None) -> float:
    """Expected k-QAoI when each node wakes independently with probability q."""
    if not 0.0 <= wake_prob <= 1.0:
        raise ValueError("wake_prob must lie in [0, 1]")
    if lead_slots < 1:
        raise ValueError("lead_slots must be >= 1")
    pd = binomial_pmf(params.n_nodes, wake_prob)
    return _mixture_kqaoi(params, pd, lead_slots,
                          lambda w, ws: qwu_topk_hit_pmf(params, ws),
                          tx_prob_of_w)


def qwu_expected_energy(params: ScenarioParams, wake_prob: float,
                        tx_prob_of_w: PofW = None) -> float:
    pd = binomial_pmf(params.n_nodes, wake_prob)
    total = 0.0
    for w in range(len(pd)):
        if pd[w] == 0.0:
            continue
        p = params.tx_prob if tx_prob_of_w is None else tx_prob_of_w(w)
        total += pd[w] * _energy_given_w(params, w, p)
    return total


def genie_kqaoi(params: ScenarioParams) -> float:
    """Lower bound: the k true top-k nodes deliver back-to-back, ages L..kL."""
    acc = 0.0
    for w in range(1, params.k + 1):
        acc += capped_age_cost(params, w * params.packet_len_slots)
    return acc / params.k


def genie_energy(params: ScenarioParams) -> float:
    return (params.tx_power_watts * params.k
            * params.packet_len_slots * params.slot_seconds)
