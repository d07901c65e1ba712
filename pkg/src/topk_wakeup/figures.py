"""One-command regeneration of the reference evaluation figures as CSV.

Each preset stores parameters only; every number in the output flows
through the analytic or simulation modules at run time.  Simulation
series use a fixed, documented master seed so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict

import numpy as np

from . import analytic, optimize, simulate
from .manifest import RunManifest
from .optimize import AxisSpec, GridSpec
from .scenario import (AgeCostSpec, CoWu, EXPONENTIAL, LINEAR, QWu, RoundRobin, Genie,
                       ScenarioParams)

DEFAULT_EPISODES = 10_000
DEFAULT_SEED = 73

FIGURES = (2, 3, 4, 5, 6, 7, 8, 9, 10)

_BASE = ScenarioParams()        # N=100, k=5, L=10, uniform [0,50], cap 5000


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(c) for c in row])


def _zeta_axis():
    return [int(z) for z in range(50, 501, 50)]


def figure_2(outdir, episodes, seed):
    """Achievable (energy, k-QAoI) region; threshold and q sweeps + baselines."""
    params = _BASE.with_(age_penalty_slots=1000.0)
    zeta = 250
    points = optimize.achievable_region(params, zeta)
    rows = []
    for sp in points:
        scheme = sp.scheme
        if isinstance(scheme, CoWu):
            name, tunable = "cowu", scheme.threshold
        elif isinstance(scheme, QWu):
            name, tunable = "qwu", scheme.wake_prob
        elif isinstance(scheme, RoundRobin):
            name, tunable = "rr", None
        else:
            name, tunable = "genie", None
        kq_sim = en_sim = None
        if episodes and name in ("cowu", "qwu"):
            stats = simulate.run_batch(params, scheme, episodes, seed)
            kq_sim, en_sim = stats.mean_kqaoi, stats.mean_energy_joules
        rows.append([name, tunable, sp.expected_kqaoi, sp.expected_energy_joules,
                     kq_sim, en_sim])
    path = outdir / "figure2.csv"
    _write_csv(path, ["scheme", "tunable", "kqaoi_theory", "energy_theory_joules",
                      "kqaoi_sim", "energy_sim_joules"], rows)
    return [path], {"n_nodes": 100, "k": 5, "lead_slots": zeta, "age_penalty": 1000,
                    "tx_prob": 0.0606}, []


def _zeta_sweep_figure(outdir, episodes, seed, cost, fname):
    params = _BASE.with_(age_penalty_slots=1000.0, age_cost=cost)
    zetas = _zeta_axis()
    series = {}
    for vth in (46.0, 48.0):
        series[vth] = analytic.cowu_kqaoi_curve(params, vth, zetas)
    rr = analytic.rr_expected_kqaoi(params)
    sims = {}
    if episodes:
        for vth in (46.0, 48.0):
            sims[vth] = [simulate.run_batch(params, CoWu(vth, z), episodes, seed).mean_kqaoi
                         for z in zetas]
    rows = []
    for j, z in enumerate(zetas):
        rows.append([z,
                     series[46.0][j], sims.get(46.0, [None] * len(zetas))[j],
                     series[48.0][j], sims.get(48.0, [None] * len(zetas))[j],
                     rr])
    path = outdir / fname
    _write_csv(path, ["zeta", "cowu_theory_vth46", "cowu_sim_vth46",
                      "cowu_theory_vth48", "cowu_sim_vth48", "rr_theory"], rows)
    return [path], {"n_nodes": 100, "k": 5, "tx_prob": 0.0606,
                    "age_cost": cost.kind, "alpha": cost.alpha}, []


def figure_3(outdir, episodes, seed):
    """k-QAoI against the wake-up lead time, linear age."""
    return _zeta_sweep_figure(outdir, episodes, seed, AgeCostSpec(LINEAR), "figure3.csv")


def figure_4(outdir, episodes, seed):
    """k-QAoI against the wake-up lead time, exponential age (alpha 0.02)."""
    return _zeta_sweep_figure(outdir, episodes, seed,
                              AgeCostSpec(EXPONENTIAL, alpha=0.02), "figure4.csv")


def _alpha_axis():
    return [round(0.005 * i, 10) for i in range(1, 11)]


def figure_5(outdir, episodes, seed):
    """Best wake-up lead time against the exponential age rate."""
    params = _BASE.with_(age_penalty_slots=1000.0)
    curve = optimize.zeta_opt_curve(params, "alpha", _alpha_axis(), threshold=46.0)
    path = outdir / "figure5.csv"
    _write_csv(path, ["alpha", "zeta_opt"], [[a, z] for a, z, _ in curve])
    return [path], {"n_nodes": 100, "k": 5, "threshold": 46.0, "tx_prob": 0.0606,
                    "age_penalty": 1000}, []


def figure_6(outdir, episodes, seed):
    """Best-achievable k-QAoI against the exponential age rate, with baseline."""
    params = _BASE.with_(age_penalty_slots=1000.0)
    curve = optimize.zeta_opt_curve(params, "alpha", _alpha_axis(), threshold=46.0)
    rows = []
    for a, _, kq in curve:
        pa = params.with_(age_cost=AgeCostSpec(EXPONENTIAL, alpha=a))
        rr = analytic.rr_expected_kqaoi(pa)
        rr_sim = (simulate.run_batch(pa, RoundRobin(), episodes, seed).mean_kqaoi
                  if episodes else None)
        rows.append([a, kq, rr, rr_sim])
    path = outdir / "figure6.csv"
    _write_csv(path, ["alpha", "cowu_opt_kqaoi", "rr_theory", "rr_sim"], rows)
    return [path], {"n_nodes": 100, "k": 5, "threshold": 46.0, "tx_prob": 0.0606}, []


def figure_7(outdir, episodes, seed):
    """Best wake-up lead time against the failure age penalty, linear age."""
    params = _BASE
    gammas = [float(g) for g in range(1000, 10001, 1000)]
    curve = optimize.zeta_opt_curve(params, "gamma", gammas, threshold=46.0)
    path = outdir / "figure7.csv"
    _write_csv(path, ["gamma", "zeta_opt"], [[g, z] for g, z, _ in curve])
    return [path], {"n_nodes": 100, "k": 5, "threshold": 46.0, "tx_prob": 0.0606}, []


FIG8_NOTES = [
    "rr series uses the closed form (505 + slope in erasure probability at these "
    "parameters); the reference plot's rr line starts at 550, which matches a "
    "k-slot schedule with ages l*N*L/k instead of the printed formula.",
    "cowu series regenerates the reference data with k=5; the stated k=10 is "
    "unattainable at threshold 46 (expected wake count 8 bounds the expected "
    "top-k deliveries below what the plotted values require).",
]


def figure_8(outdir, episodes, seed):
    """k-QAoI against the erasure probability, delay-optimal persistence."""
    params = _BASE.with_(k=5)
    ecs = [round(0.05 * i, 10) for i in range(5)]
    vth, zeta = 46.0, 150
    p_table = optimize.optimal_p_table(params)
    rows = []
    for ec in ecs:
        row = [ec]
        for gamma in (1000.0, 5000.0):
            pe = params.with_(erasure_prob=ec, age_penalty_slots=gamma)
            row.append(analytic.cowu_expected_kqaoi(pe, vth, zeta, tx_prob_of_w=p_table))
            row.append(simulate.run_batch(pe, CoWu(vth, zeta), episodes, seed,
                                          tx_prob_of_w=p_table).mean_kqaoi
                       if episodes else None)
        for gamma in (1000.0, 5000.0):
            pe = params.with_(erasure_prob=ec, age_penalty_slots=gamma)
            row.append(analytic.rr_expected_kqaoi(pe))
        rows.append(row)
    path = outdir / "figure8.csv"
    _write_csv(path, ["ec", "cowu_theory_gamma1000", "cowu_sim_gamma1000",
                      "cowu_theory_gamma5000", "cowu_sim_gamma5000",
                      "rr_theory_gamma1000", "rr_theory_gamma5000"], rows)
    return [path], {"n_nodes": 100, "k": 5, "threshold": vth, "lead_slots": zeta,
                    "persistence": "delay-optimal per wake count"}, FIG8_NOTES


FIG9_NOTES = [
    "threshold grid uses quantization-cell midpoints {0.25, 0.75, ..., 49.75}; "
    "the reference energies land on this grid exactly, not on {0, 0.5, ..., 50}.",
    "the reference point at n=60, penalty 5000 (91.63 mJ) is infeasible under "
    "the closed forms: the smallest achievable k-QAoI over the whole grid is "
    "308.97 against a cap of 305, so that cell is left empty.",
]


def figure_9(outdir, episodes, seed):
    """Minimum energy meeting the round-robin k-QAoI, against network size."""
    grid = GridSpec.midpoint_thresholds()
    ns = list(range(10, 101, 10))
    rows = []
    for n in ns:
        row = [n]
        for gamma in (1000.0, 5000.0):
            params = _BASE.with_(n_nodes=n, k=5, age_penalty_slots=gamma)
            cap = analytic.rr_expected_kqaoi(params)
            res = optimize.min_energy_params(params, cap, grid=grid)
            row.append(res.energy_joules * 1e3 if res.feasible else None)
        row.append(analytic.rr_energy(_BASE.with_(n_nodes=n)) * 1e3)
        rows.append(row)
    path = outdir / "figure9.csv"
    _write_csv(path, ["n", "cowu_min_energy_mj_gamma1000",
                      "cowu_min_energy_mj_gamma5000", "rr_energy_mj"], rows)
    return [path], {"k": 5, "constraint": "rr k-QAoI",
                    "persistence": "delay-optimal per wake count",
                    "threshold_grid": "0.25..49.75 step 0.5"}, FIG9_NOTES


SETTINGS = {
    1: dict(age_cost=AgeCostSpec(LINEAR), age_penalty_slots=1000.0, erasure_prob=0.0),
    2: dict(age_cost=AgeCostSpec(LINEAR), age_penalty_slots=1000.0, erasure_prob=0.1),
    3: dict(age_cost=AgeCostSpec(LINEAR), age_penalty_slots=5000.0, erasure_prob=0.0),
    4: dict(age_cost=AgeCostSpec(EXPONENTIAL, alpha=0.02), age_penalty_slots=1000.0,
            erasure_prob=0.0),
}

FIG10_NOTES = [
    "max-k values are recomputed from the closed forms on the stated grids; "
    "several large-n cells of the reference plot are inconsistent with those "
    "closed forms (the erasure-free chain quantities that regenerate the other "
    "figures exactly admit strictly larger feasible k here).",
]


def max_k_for_setting(setting: int, n: int) -> optimize.MaxKResult:
    """Feasibility caps set to the round-robin baseline of the same scenario."""
    overrides = SETTINGS[setting]
    params = _BASE.with_(n_nodes=n, k=1, **overrides)
    energy_cap = analytic.rr_energy(params)

    def kq_cap(k: int) -> float:
        return analytic.rr_expected_kqaoi(params.with_(k=k))

    return optimize.max_k(params, energy_cap, kq_cap)


def figure_10(outdir, episodes, seed):
    """Largest feasible top-k size against network size, four settings."""
    ns = [20, 40, 60, 80, 100]
    rows = []
    for n in ns:
        row = [n]
        for s in (1, 2, 3, 4):
            row.append(max_k_for_setting(s, n).max_k)
        rows.append(row)
    path = outdir / "figure10.csv"
    _write_csv(path, ["n", "maxk_setting1", "maxk_setting2",
                      "maxk_setting3", "maxk_setting4"], rows)
    return [path], {"k_search": "ascending with early exit",
                    "caps": "rr k-QAoI and rr energy",
                    "grids": "thresholds 0..50 step 2, deadlines 50..500 step 50"}, FIG10_NOTES


_BUILDERS = {2: figure_2, 3: figure_3, 4: figure_4, 5: figure_5, 6: figure_6,
             7: figure_7, 8: figure_8, 9: figure_9, 10: figure_10}


def reproduce(figure: int, outdir, episodes: int | None = None,
              seed: int = DEFAULT_SEED, command=None) -> RunManifest:
    """Regenerate one figure's data; returns the manifest written next to it."""
    if figure not in _BUILDERS:
        raise ValueError(f"unknown figure {figure}; choose from {sorted(_BUILDERS)}")
    if episodes is None:
        episodes = DEFAULT_EPISODES if figure in (2, 3, 4, 6, 8) else 0
    outdir.mkdir(parents=True, exist_ok=True)
    start = time.time()
    paths, resolved, notes = _BUILDERS[figure](outdir, episodes, seed)
    manifest = RunManifest(
        command=command or ["reproduce", "--figure", str(figure)],
        parameters={**resolved, "episodes": episodes},
        master_seed=seed,
        outputs=[p.name for p in paths],
        duration_seconds=round(time.time() - start, 3),
        notes=list(notes))
    manifest.write(outdir / f"figure{figure}.manifest.json")
    return manifest
