"""Scenario parameters, age-cost functions, and the wake-up frame codec.

Everything downstream (closed-form analysis, simulation, optimization)
consumes the types defined here.  All values are immutable; ages are
measured in slots throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union


# ---------------------------------------------------------------------------
# age cost
# ---------------------------------------------------------------------------

LINEAR = "linear"
EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class AgeCostSpec:
    """Nondecreasing cost of holding data that is ``tau`` slots old.

    ``linear`` is the identity; ``exponential`` is ``exp(alpha*tau) - 1``
    and models fast-decorrelating processes.  ``alpha`` is required for
    the exponential kind and ignored otherwise.
    """

    kind: str = LINEAR
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in (LINEAR, EXPONENTIAL):
            raise ValueError(f"unknown age cost kind {self.kind!r}")
        if self.kind == EXPONENTIAL:
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("exponential age cost needs alpha > 0")


def age_cost(spec: AgeCostSpec, tau: float) -> float:
    """Uncapped cost of age ``tau`` (slots); 0 at tau=0, nondecreasing."""
    if tau < 0:
        raise ValueError(f"age must be nonnegative, got {tau}")
    if spec.kind == LINEAR:
        return float(tau)
    return math.expm1(spec.alpha * tau)


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioParams:
    """Full parameter set for one data-collection scenario.

    Defaults follow the standard evaluation setup: 100 kbps link,
    10-slot packets of 320 us slots, 55/50 mW transmit/receive power,
    observations uniform on [0, 50], age cap 5000 slots.
    """

    n_nodes: int = 100
    k: int = 5
    packet_len_slots: int = 10
    slot_seconds: float = 320e-6
    tx_power_watts: float = 0.055
    rx_power_watts: float = 0.050
    erasure_prob: float = 0.0
    tx_prob: float = 0.0606
    value_min: float = 0.0
    value_max: float = 50.0
    age_penalty_slots: float = 1000.0
    age_cap: float = 5000.0
    age_cost: AgeCostSpec = AgeCostSpec(LINEAR)

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be a positive integer")
        if not 1 <= self.k <= self.n_nodes:
            raise ValueError("k must satisfy 1 <= k <= n_nodes")
        if self.packet_len_slots < 1:
            raise ValueError("packet_len_slots must be a positive integer")
        for name in ("slot_seconds", "tx_power_watts", "rx_power_watts"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 <= self.erasure_prob <= 1.0:
            raise ValueError("erasure_prob must lie in [0, 1]")
        if not 0.0 < self.tx_prob <= 1.0:
            raise ValueError("tx_prob must lie in (0, 1]")
        if not self.value_min < self.value_max:
            raise ValueError("value_min must be < value_max")
        if self.age_penalty_slots < 0:
            raise ValueError("age_penalty_slots must be nonnegative")
        if self.age_cap <= 0:
            raise ValueError("age_cap must be strictly positive")

    def with_(self, **kwargs) -> "ScenarioParams":
        """Copy with some fields replaced."""
        return replace(self, **kwargs)


def capped_age_cost(params: ScenarioParams, tau: float) -> float:
    """Age cost clipped at the cap; the penalty age may exceed the cap."""
    return min(age_cost(params.age_cost, tau), params.age_cap)


def wake_probability(params: ScenarioParams, threshold: float) -> float:
    """P(one node's observation >= threshold) under the uniform value model.

    This is the single seam through which the value distribution enters the
    closed-form analysis; swap it out to study other distributions.
    """
    if not params.value_min <= threshold <= params.value_max:
        raise ValueError(
            f"threshold {threshold} outside [{params.value_min}, {params.value_max}]")
    return (params.value_max - threshold) / (params.value_max - params.value_min)


def kqaoi_of_counts(params: ScenarioParams, succeeded_topk: int, lead_slots: float) -> float:
    """Deadline k-QAoI when ``succeeded_topk`` of the top-k delivered in time.

    Delivered nodes have age ``lead_slots``; the rest carry the failure
    penalty.  Both are capped before averaging.
    """
    r = succeeded_topk
    if not 0 <= r <= params.k:
        raise ValueError(f"succeeded_topk must lie in [0, {params.k}], got {r}")
    c_fresh = capped_age_cost(params, lead_slots)
    c_stale = capped_age_cost(params, params.age_penalty_slots)
    return (r * c_fresh + (params.k - r) * c_stale) / params.k


# ---------------------------------------------------------------------------
# wake-up schemes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoWu:
    """Content-based wake-up: nodes observing >= threshold activate."""
    threshold: float
    lead_slots: int

    def __post_init__(self):
        if self.lead_slots < 1:
            raise ValueError("lead_slots must be >= 1")


@dataclass(frozen=True)
class QWu:
    """Content-blind random wake-up with per-node probability q."""
    wake_prob: float
    lead_slots: int

    def __post_init__(self):
        if not 0.0 <= self.wake_prob <= 1.0:
            raise ValueError("wake_prob must lie in [0, 1]")
        if self.lead_slots < 1:
            raise ValueError("lead_slots must be >= 1")


@dataclass(frozen=True)
class RoundRobin:
    """TDMA-like baseline: node j transmits once at (N-j)*L slots before the deadline."""


@dataclass(frozen=True)
class Genie:
    """Lower bound: the sink schedules exactly the true top-k, collision-free."""


SchemeSpec = Union[CoWu, QWu, RoundRobin, Genie]


# ---------------------------------------------------------------------------
# threshold <-> wake-up frame length codec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameCodecSpec:
    """Maps a threshold onto one of ``levels`` wake-up frame lengths.

    Higher thresholds map to shorter frames; at most 512 lengths are
    encodable.  Frame lengths are ``t_min + i*t_step`` for interval
    index i in [0, levels-1].
    """

    t_min_seconds: float = 0.5e-3
    t_step_seconds: float = 0.1e-3
    levels: int = 512

    def __post_init__(self):
        if self.t_min_seconds <= 0 or self.t_step_seconds <= 0:
            raise ValueError("frame timing parameters must be strictly positive")
        if not 2 <= self.levels <= 512:
            raise ValueError("levels must lie in [2, 512]")


def threshold_interval(codec: FrameCodecSpec, params: ScenarioParams, threshold: float) -> int:
    """Quantization interval index of ``threshold`` (0 = highest threshold)."""
    if not params.value_min <= threshold <= params.value_max:
        raise ValueError(
            f"threshold {threshold} outside [{params.value_min}, {params.value_max}]")
    span = params.value_max - params.value_min
    i = math.floor((params.value_max - threshold) / span * (codec.levels - 1))
    return min(max(i, 0), codec.levels - 1)


def encode_threshold(codec: FrameCodecSpec, params: ScenarioParams, threshold: float) -> float:
    """Wake-up frame length (seconds) announcing ``threshold``."""
    i = threshold_interval(codec, params, threshold)
    return codec.t_min_seconds + i * codec.t_step_seconds


def decode_threshold(codec: FrameCodecSpec, params: ScenarioParams, frame_seconds: float) -> float:
    """Threshold represented by a received frame length.

    Returns the quantization cell's representative threshold (the value
    that re-encodes to the same frame).  Frame lengths off the
    ``t_min + i*t_step`` grid are rejected.
    """
    x = (frame_seconds - codec.t_min_seconds) / codec.t_step_seconds
    i = round(x)
    if i < 0 or i > codec.levels - 1 or abs(x - i) > 1e-6:
        raise ValueError(f"frame length {frame_seconds} not on the codec grid")
    span = params.value_max - params.value_min
    return params.value_max - i * span / (codec.levels - 1)


# ---------------------------------------------------------------------------
# flat key=value config files
# ---------------------------------------------------------------------------

_SCALAR_FIELDS = [
    ("n_nodes", int),
    ("k", int),
    ("packet_len_slots", int),
    ("slot_seconds", float),
    ("tx_power_watts", float),
    ("rx_power_watts", float),
    ("erasure_prob", float),
    ("tx_prob", float),
    ("value_min", float),
    ("value_max", float),
    ("age_penalty_slots", float),
    ("age_cap", float),
]


def params_to_config(params: ScenarioParams) -> str:
    """Serialize to the flat one-`key = value`-per-line format."""
    lines = [f"{name} = {getattr(params, name)}" for name, _ in _SCALAR_FIELDS]
    if params.age_cost.kind == LINEAR:
        lines.append("age_cost = linear")
    else:
        lines.append(f"age_cost = exponential {params.age_cost.alpha}")
    return "\n".join(lines) + "\n"


def params_from_config(text: str) -> ScenarioParams:
    """Parse the flat config format produced by :func:`params_to_config`.

    Unknown keys are rejected; missing keys fall back to the defaults.
    Lines that are blank or start with ``#`` are ignored.
    """
    known = dict(_SCALAR_FIELDS)
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key == "age_cost":
            parts = value.split()
            if parts[0] == LINEAR and len(parts) == 1:
                kwargs["age_cost"] = AgeCostSpec(LINEAR)
            elif parts[0] == EXPONENTIAL and len(parts) == 2:
                kwargs["age_cost"] = AgeCostSpec(EXPONENTIAL, alpha=float(parts[1]))
            else:
                raise ValueError(f"line {lineno}: bad age_cost value {value!r}")
        elif key in known:
            kwargs[key] = known[key](value)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    return ScenarioParams(**kwargs)


def save_config(params: ScenarioParams, path) -> None:
    with open(path, "w") as fh:
        fh.write(params_to_config(params))


def load_config(path) -> ScenarioParams:
    with open(path) as fh:
        return params_from_config(fh.read())
