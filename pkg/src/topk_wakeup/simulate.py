"""Slot-level Monte-Carlo simulation of single data-collection episodes.

Each episode, per scheme: sample observations, decide who wakes,
contend on a p-persistent CSMA channel (collision + erasure), snapshot
the deadline to score k-QAoI, and keep contending past the deadline
until every woken node delivers so the energy accounting matches the
"retry until success" assumption of the closed forms.

Randomness layout: every episode owns three Philox streams derived from
(master_seed, episode_index, purpose) -- observation values, wake
decisions, and channel events.  Separating the purposes makes batches
bit-reproducible regardless of execution order, and couples schemes
that share a wake set (q=1 random wake-up replays content wake-up at
the lowest threshold, episode by episode).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .scenario import (CoWu, Genie, QWu, RoundRobin, ScenarioParams, SchemeSpec,
                       capped_age_cost)

_VALUES, _WAKE, _CHANNEL = 0, 1, 2


def _stream(master_seed: int, episode: int, purpose: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=(int(master_seed), int(episode), purpose))
    return np.random.Generator(np.random.Philox(ss))


# conditional Binomial(m, p) | >= 1 transmitter, as cumulative tables
_COND_BINOM: dict[tuple[int, float], np.ndarray] = {}


def _cond_binom_cdf(m: int, p: float) -> np.ndarray:
    key = (m, p)
    cdf = _COND_BINOM.get(key)
    if cdf is None:
        b = np.arange(1, m + 1)
        logpmf = (gammaln(m + 1) - gammaln(b + 1) - gammaln(m - b + 1)
                  + b * math.log(p)
                  + (m - b) * (math.log1p(-p) if p < 1.0 else 0.0))
        pmf = np.exp(logpmf)
        if p < 1.0:
            pmf /= -math.expm1(m * math.log1p(-p))
        cdf = np.cumsum(pmf)
        _COND_BINOM[key] = cdf
    return cdf


@dataclass(frozen=True)
class EpisodeOutcome:
    """Everything observable about one simulated episode."""

    sampled_values: np.ndarray          # observation of every node at sampling time
    topk_indices: tuple[int, ...]       # true top-k at sampling time
    woke: np.ndarray                    # bool per node
    success_slot: tuple[int | None, ...]  # ACK slot per node; None if it never transmitted
    attempts: np.ndarray                # transmission attempts per node
    kqaoi: float                        # deadline snapshot, capped
    total_energy_joules: float
    events: tuple[str, ...] | None = None   # "slot kind node" lines when logging is on


@dataclass(frozen=True)
class BatchStats:
    episodes: int
    mean_kqaoi: float
    mean_energy_joules: float
    se_kqaoi: float
    se_energy_joules: float
    master_seed: int


def _topk_indices(values: np.ndarray, k: int) -> tuple[int, ...]:
    # descending value, ascending index on (measure-zero) ties
    order = np.lexsort((np.arange(len(values)), -values))
    return tuple(int(i) for i in order[:k])


def _contend(gen: np.random.Generator, n_contenders: int, p: float, erasure: float,
             packet_len: int, log: list[str] | None):
    """Run CSMA until all ``n_contenders`` deliver; event-driven over contention rounds.

    Returns (attempts, ack_slot) per contender.  Equivalent to slot-by-slot
    per-node coin flips: idle gaps are geometric in the no-transmission
    probability, the transmitter count is a conditional binomial, and the
    transmitter identities are a uniform draw without replacement.
    """
    if erasure >= 1.0 and n_contenders > 0:
        raise ValueError("erasure_prob = 1 never delivers; the episode cannot end")
    attempts = np.zeros(n_contenders, dtype=np.int64)
    ack = np.zeros(n_contenders, dtype=np.int64)
    backlog = list(range(n_contenders))
    t = 0
    log_gap = math.log1p(-p) if p < 1.0 else None
    while backlog:
        m = len(backlog)
        if p < 1.0:
            u = gen.random()
            if u > 0.0:
                t += int(math.log(u) / (m * log_gap))
        cdf = _cond_binom_cdf(m, p)
        b = int(np.searchsorted(cdf, gen.random() * cdf[-1])) + 1
        if b < m:
            chosen = gen.choice(m, size=b, replace=False)
        else:
            chosen = np.arange(m)
        start = t
        t += packet_len
        if b == 1:
            i = int(chosen[0])
            node = backlog[i]
            attempts[node] += 1
            if log is not None:
                log.append(f"{start} tx {node}")
            if erasure == 0.0 or gen.random() >= erasure:
                ack[node] = t
                backlog.pop(i)
                if log is not None:
                    log.append(f"{t} ack {node}")
            elif log is not None:
                log.append(f"{t} erasure {node}")
        else:
            for i in chosen:
                node = backlog[int(i)]
                attempts[node] += 1
                if log is not None:
                    log.append(f"{start} tx {node}")
            if log is not None:
                log.append(f"{t} collision -1")
    return attempts, ack


def _csma_episode(params: ScenarioParams, woke_mask: np.ndarray, values: np.ndarray,
                  lead_slots: int, seed_pair, tx_prob: float,
                  log_events: bool) -> EpisodeOutcome:
    """Common CSMA core for content-based and random wake-up."""
    n = params.n_nodes
    log: list[str] | None = [] if log_events else None
    woken = np.flatnonzero(woke_mask)
    if log is not None:
        for node in woken:
            log.append(f"0 wake {int(node)}")
    topk = _topk_indices(values, params.k)
    attempts = np.zeros(n, dtype=np.int64)
    success: list[int | None] = [None] * n
    energy = 0.0
    if len(woken) > 0:
        gen = _stream(seed_pair[0], seed_pair[1], _CHANNEL)
        local_attempts, local_ack = _contend(
            gen, len(woken), tx_prob, params.erasure_prob,
            params.packet_len_slots, log)
        tx_slots = params.packet_len_slots * local_attempts
        rx_slots = local_ack - tx_slots
        energy = float(params.slot_seconds
                       * (params.tx_power_watts * tx_slots.sum()
                          + params.rx_power_watts * rx_slots.sum()))
        for i, node in enumerate(woken):
            attempts[node] = local_attempts[i]
            success[int(node)] = int(local_ack[i])
    c_fresh = capped_age_cost(params, lead_slots)
    c_stale = capped_age_cost(params, params.age_penalty_slots)
    kq = 0.0
    for node in topk:
        s = success[node]
        kq += c_fresh if (s is not None and s <= lead_slots) else c_stale
    kq /= params.k
    return EpisodeOutcome(
        sampled_values=values, topk_indices=topk, woke=woke_mask,
        success_slot=tuple(success), attempts=attempts, kqaoi=kq,
        total_energy_joules=energy,
        events=tuple(log) if log is not None else None)


def run_cowu_episode(params: ScenarioParams, threshold: float, lead_slots: int,
                     seed, tx_prob_of_w=None, log_events: bool = False) -> EpisodeOutcome:
    """One content-based wake-up episode.

    Nodes observing at least ``threshold`` activate (inclusive compare) and
    contend until delivered; the k-QAoI snapshot is taken ``lead_slots``
    after sampling.  ``tx_prob_of_w`` optionally picks the persistence
    probability from the realized wake count (oracle mode).
    """
    if lead_slots < 1:
        raise ValueError("lead_slots must be >= 1")
    master, episode = _seed_pair(seed)
    gen_v = _stream(master, episode, _VALUES)
    values = gen_v.uniform(params.value_min, params.value_max, params.n_nodes)
    woke = values >= threshold
    p = params.tx_prob if tx_prob_of_w is None else tx_prob_of_w(int(woke.sum()))
    return _csma_episode(params, woke, values, lead_slots, (master, episode), p,
                         log_events)


def run_qwu_episode(params: ScenarioParams, wake_prob: float, lead_slots: int,
                    seed, tx_prob_of_w=None, log_events: bool = False) -> EpisodeOutcome:
    """One random wake-up episode: Bernoulli(q) activation, content ignored."""
    if not 0.0 <= wake_prob <= 1.0:
        raise ValueError("wake_prob must lie in [0, 1]")
    if lead_slots < 1:
        raise ValueError("lead_slots must be >= 1")
    master, episode = _seed_pair(seed)
    gen_v = _stream(master, episode, _VALUES)
    values = gen_v.uniform(params.value_min, params.value_max, params.n_nodes)
    gen_w = _stream(master, episode, _WAKE)
    woke = gen_w.random(params.n_nodes) < wake_prob
    p = params.tx_prob if tx_prob_of_w is None else tx_prob_of_w(int(woke.sum()))
    return _csma_episode(params, woke, values, lead_slots, (master, episode), p,
                         log_events)


def run_rr_episode(params: ScenarioParams, seed, log_events: bool = False) -> EpisodeOutcome:
    """One round-robin episode: node j transmits once, age (N-j)L on success."""
    master, episode = _seed_pair(seed)
    n, L = params.n_nodes, params.packet_len_slots
    gen_v = _stream(master, episode, _VALUES)
    values = gen_v.uniform(params.value_min, params.value_max, n)
    gen_c = _stream(master, episode, _CHANNEL)
    erased = gen_c.random(n) < params.erasure_prob
    topk = _topk_indices(values, params.k)
    log: list[str] | None = [] if log_events else None
    success: list[int | None] = [None] * n
    for j in range(n):
        # schedule starts N*L slots before the deadline; report slots relative to it
        if log is not None:
            log.append(f"{j * L} tx {j}")
        if not erased[j]:
            success[j] = (j + 1) * L
            if log is not None:
                log.append(f"{(j + 1) * L} ack {j}")
        elif log is not None:
            log.append(f"{(j + 1) * L} erasure {j}")
    c_stale = capped_age_cost(params, params.age_penalty_slots)
    kq = 0.0
    for node in topk:
        age = (n - node) * L
        kq += capped_age_cost(params, age) if not erased[node] else c_stale
    kq /= params.k
    return EpisodeOutcome(
        sampled_values=values, topk_indices=topk, woke=np.ones(n, dtype=bool),
        success_slot=tuple(success), attempts=np.ones(n, dtype=np.int64),
        kqaoi=kq,
        total_energy_joules=params.tx_power_watts * n * L * params.slot_seconds,
        events=tuple(log) if log is not None else None)


def run_genie_episode(params: ScenarioParams, seed, apply_erasures: bool = False,
                      log_events: bool = False) -> EpisodeOutcome:
    """One genie episode: the true top-k transmit back-to-back before the deadline.

    Erasures are off by default, matching the lower-bound closed forms;
    enable ``apply_erasures`` to study the bound's sensitivity.
    """
    master, episode = _seed_pair(seed)
    n, L, k = params.n_nodes, params.packet_len_slots, params.k
    gen_v = _stream(master, episode, _VALUES)
    values = gen_v.uniform(params.value_min, params.value_max, n)
    topk = _topk_indices(values, k)
    erased = np.zeros(k, dtype=bool)
    if apply_erasures and params.erasure_prob > 0.0:
        gen_c = _stream(master, episode, _CHANNEL)
        erased = gen_c.random(k) < params.erasure_prob
    log: list[str] | None = [] if log_events else None
    success: list[int | None] = [None] * n
    woke = np.zeros(n, dtype=bool)
    attempts = np.zeros(n, dtype=np.int64)
    kq = 0.0
    c_stale = capped_age_cost(params, params.age_penalty_slots)
    for rank, node in enumerate(topk):        # rank l-1; age (k-l+1)*L at the deadline
        woke[node] = True
        attempts[node] = 1
        if log is not None:
            log.append(f"{rank * L} tx {node}")
        if not erased[rank]:
            success[node] = (rank + 1) * L
            kq += capped_age_cost(params, (k - rank) * L)
            if log is not None:
                log.append(f"{(rank + 1) * L} ack {node}")
        else:
            kq += c_stale
            if log is not None:
                log.append(f"{(rank + 1) * L} erasure {node}")
    kq /= k
    return EpisodeOutcome(
        sampled_values=values, topk_indices=topk, woke=woke,
        success_slot=tuple(success), attempts=attempts, kqaoi=kq,
        total_energy_joules=params.tx_power_watts * k * L * params.slot_seconds,
        events=tuple(log) if log is not None else None)


def _seed_pair(seed) -> tuple[int, int]:
    """Accept either a bare master seed or a (master_seed, episode) pair."""
    if isinstance(seed, tuple):
        return int(seed[0]), int(seed[1])
    return int(seed), 0


def run_episode(params: ScenarioParams, scheme: SchemeSpec, seed,
                tx_prob_of_w=None, log_events: bool = False) -> EpisodeOutcome:
    if isinstance(scheme, CoWu):
        return run_cowu_episode(params, scheme.threshold, scheme.lead_slots, seed,
                                tx_prob_of_w, log_events)
    if isinstance(scheme, QWu):
        return run_qwu_episode(params, scheme.wake_prob, scheme.lead_slots, seed,
                               tx_prob_of_w, log_events)
    if isinstance(scheme, RoundRobin):
        return run_rr_episode(params, seed, log_events)
    if isinstance(scheme, Genie):
        return run_genie_episode(params, seed, log_events=log_events)
    raise TypeError(f"unknown scheme {scheme!r}")


def _episode_range(params, scheme, master_seed, start, stop, tx_prob_of_w):
    kq = np.empty(stop - start)
    en = np.empty(stop - start)
    for i in range(start, stop):
        out = run_episode(params, scheme, (master_seed, i), tx_prob_of_w)
        kq[i - start] = out.kqaoi
        en[i - start] = out.total_energy_joules
    return kq, en


def run_batch(params: ScenarioParams, scheme: SchemeSpec, episodes: int,
              master_seed: int, tx_prob_of_w=None, workers: int = 1) -> BatchStats:
    """Seeded batch of independent episodes; means and standard errors.

    Episode i always uses the streams keyed by (master_seed, i), and the
    reduction runs in episode order, so the result is bit-identical for a
    given seed no matter how many workers execute the episodes.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if workers <= 1 or episodes < 4 * workers:
        kq, en = _episode_range(params, scheme, master_seed, 0, episodes, tx_prob_of_w)
    else:
        bounds = np.linspace(0, episodes, workers + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_episode_range, params, scheme, master_seed,
                                   int(a), int(b), tx_prob_of_w)
                       for a, b in zip(bounds[:-1], bounds[1:])]
            parts = [f.result() for f in futures]
        kq = np.concatenate([p[0] for p in parts])
        en = np.concatenate([p[1] for p in parts])
    mean_kq = float(kq.mean())
    mean_en = float(en.mean())
    if episodes == 1:
        se_kq = se_en = 0.0
    else:
        se_kq = float(kq.std(ddof=1) / math.sqrt(episodes))
        se_en = float(en.std(ddof=1) / math.sqrt(episodes))
    return BatchStats(episodes=episodes, mean_kqaoi=mean_kq,
                      mean_energy_joules=mean_en, se_kqaoi=se_kq,
                      se_energy_joules=se_en, master_seed=int(master_seed))
