"""Monte-Carlo execution of an :class:`ExperimentConfig`.

Every trial gets its own seed derived from ``(master_seed, instance_id,
algorithm, trial)``, so results do not depend on how trials are spread over
worker processes. Trials are merged back in task order.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
import json
import math
import time
import zlib

import numpy as np

from ..algorithms import (AlgoParams, StaticKind, estimate_lambda_min, run_cpeg, run_cpeg_plugin,
                          run_cpeug, run_static_baseline, run_ucb_baseline)
from ..design import round_design, uniform_design
from ..errors import CapExceeded
from ..estimators import LogBarMode, NoiseBounds
from ..instances import best_arm, instance_from_spec, sample_counts
from ..numerics import sigma_min
from .config import AlgoSpec, UCB_ALGORITHMS

_STATIC = {"static_oracle": StaticKind.ORACLE, "static_xy": StaticKind.XY,
           "static_uniform": StaticKind.UNIFORM, "se": StaticKind.SE}


@dataclass
class Row:
    instance_id: str
    algorithm: str
    trial: int
    seed: int
    samples: int
    correct: bool
    recommended: int
    wall_ms: int
    cap_exceeded: bool = False


@dataclass
class ResultsTable:
    """Rows in deterministic order plus optional per-row payloads.

    ``traces[i]`` is the JSONL phase trace of row ``i`` (or None) and
    ``curves[i]`` a UCB row's per-step flag "recommendation is the best arm"
    (or None).
    """

    rows: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    curves: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)


def trial_seed(master_seed, instance_id, algorithm, trial):
    """63-bit seed for one trial; ``np.random.default_rng(seed)`` reproduces it."""
    keys = [int(master_seed) & 0xFFFFFFFF, zlib.crc32(instance_id.encode()),
            zlib.crc32(algorithm.encode()), int(trial) & 0xFFFFFFFF]
    state = np.random.SeedSequence(keys).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


@lru_cache(maxsize=64)
def _instance(spec_json):
    return instance_from_spec(json.loads(spec_json))


def algo_params(spec, env, log_mode, gamma_min=None):
    """AlgoParams for ``spec`` on ``env``; unset noise bounds use the instance's tight values."""
    tight = NoiseBounds.for_instance(env, slack=spec.bound_slack)
    if spec.L_nu is None and spec.L_eta is None and spec.theta_norm_bound is None:
        bounds = tight
    else:
        bounds = NoiseBounds(L_nu=spec.L_nu if spec.L_nu is not None else tight.L_nu,
                             L_eta=spec.L_eta if spec.L_eta is not None else tight.L_eta,
                             theta_norm_bound=spec.theta_norm_bound)
    if gamma_min is None and isinstance(spec.gamma_min, (int, float)):
        gamma_min = float(spec.gamma_min)
    mode = LogBarMode(spec.log_mode) if spec.log_mode else LogBarMode(log_mode)
    return AlgoParams(bounds=bounds, delta=spec.delta, omega=spec.omega, gamma_min=gamma_min, g=spec.g,
                      log_mode=mode, max_phases=spec.max_phases, max_total_samples=spec.max_total_samples)


def run_trial(env, spec, log_mode, seed):
    """Run one trial of ``spec`` and return its TrialResult (CapExceeded is caught)."""
    rng = np.random.default_rng(seed)
    name = spec.name
    try:
        if name in UCB_ALGORITHMS:
            return run_ucb_baseline(env, spec.horizon, name.split("_")[1], rng, seed=seed)
        if name == "cpeg":
            return run_cpeg(env, algo_params(spec, env, log_mode), rng, seed=seed)
        if name in _STATIC:
            return run_static_baseline(env, _STATIC[name], algo_params(spec, env, log_mode), rng, seed=seed)
        if name == "cpeg_plugin":
            params = algo_params(spec, env, log_mode)
            counts = round_design(uniform_design(env.n_arms), spec.offline_rows)
            offline = sample_counts(env, counts, rng)
            return run_cpeg_plugin(env, offline, params, rng, seed=seed)
        if name == "cpeug":
            warm = None
            if spec.gamma_min == "true":
                gm = sigma_min(env.gamma)
            elif spec.gamma_min == "warmup":
                gm, warm_n, warm = estimate_lambda_min(env, algo_params(spec, env, log_mode), rng,
                                                       return_trace=True)
            else:
                gm = float(spec.gamma_min)
            res = run_cpeug(env, algo_params(spec, env, log_mode, gamma_min=gm), rng, seed=seed,
                            gamma_design=spec.gamma_design, theta_design=spec.theta_design)
            if warm:
                res.phases[:0] = warm
                res.total_samples += warm_n
            return res
    except CapExceeded as exc:
        if exc.result is None:
            raise
        return exc.result
    raise ValueError(f"unknown algorithm {name!r}")


def _task(args):
    spec_json, instance_id, algo_dict, trial, seed, log_mode, want_trace, timing = args
    env = _instance(spec_json)
    spec = AlgoSpec(**algo_dict)
    t0 = time.perf_counter()
    res = run_trial(env, spec, log_mode, seed)
    wall = int(round((time.perf_counter() - t0) * 1000)) if timing else 0
    row = Row(instance_id, spec.display, trial, seed, int(res.total_samples), bool(res.correct),
              int(res.recommended), wall, bool(res.cap_exceeded))
    trace = res.trace_jsonl() if want_trace else None
    curve = None
    if spec.name in UCB_ALGORITHMS:
        curve = np.asarray(res.extra["trace"]) == best_arm(env)[0]
    return row, trace, curve


def build_tasks(config):
    tasks = []
    for iid, spec in config.instance_specs():
        spec_json = json.dumps(spec, sort_keys=True)
        for algo in config.algorithms:
            for trial in range(config.trials):
                seed = trial_seed(config.master_seed, iid, algo.display, trial)
                tasks.append((spec_json, iid, algo.to_dict(), trial, seed, config.log_mode.value,
                              config.traces, config.timing))
    return tasks


def run_experiment(config, workers=None, progress=None):
    """Run every (instance, algorithm, trial) of ``config``.

    ``workers`` overrides ``config.workers``; the table is identical for any
    worker count. ``progress`` is called with ``(done, total)``.
    """
    tasks = build_tasks(config)
    workers = config.workers if workers is None else int(workers)
    table = ResultsTable()
    if workers <= 1 or len(tasks) <= 1:
        results = []
        for i, t in enumerate(tasks):
            results.append(_task(t))
            if progress:
                progress(i + 1, len(tasks))
    else:
        chunk = max(1, math.ceil(len(tasks) / (4 * workers)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = []
            for i, r in enumerate(pool.map(_task, tasks, chunksize=chunk)):
                results.append(r)
                if progress:
                    progress(i + 1, len(tasks))
    for row, trace, curve in results:
        table.rows.append(row)
        table.traces.append(trace)
        table.curves.append(curve)
    return table
