"""Command-line interface and run orchestration.

Subcommands:

* ``oracle``   -- integrate the exact Fock-basis benchmark, write CSV
* ``run``      -- run one weighted-trajectory method (``pplus`` or ``npw``)
* ``compare``  -- run oracle, P+, and NPW on the identical measurement
                  record and write a merged CSV plus a JSON manifest
* ``selftest`` -- fast reduced-scale invariant suite

Output CSVs are deterministic byte-for-byte for a fixed (config, seed):
floats are printed with ``repr`` (shortest round-trip form) and missing
values (channels after a method's divergence) are empty fields.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

# honor the thread-count override before numpy spins up its pools
_threads = os.environ.get("NPWSIM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import numpy as np

from . import __version__
from .config import (SimulationConfig, config_from_dict, config_to_dict,
                     load_config, validate_config)
from .errors import ConfigError, DivergenceError
from .noise import NoiseStreams
from . import oracle as oracle_mod
from . import npw as npw_mod
from . import pplus as pplus_mod
from . import stats as stats_mod

METHODS = ("oracle", "pplus", "npw")


@dataclass
class MethodSeries:
    """Recorded channels of one method on the decimated output grid.

    Channels are aligned with ``times``; entries after the divergence
    time are NaN and serialize as missing fields.
    """

    name: str
    times: np.ndarray
    channels: dict = field(default_factory=dict)
    diverged_at: float | None = None
    divergence_cause: str | None = None

    def validate(self, n_traj: int) -> None:
        t = np.asarray(self.times)
        if t.size and not (np.diff(t) > 0).all():
            raise ValueError(f"{self.name}: times must be strictly increasing")
        for key, arr in self.channels.items():
            if len(arr) != t.size:
                raise ValueError(f"{self.name}: channel {key} length mismatch")
            vals = np.asarray(arr, dtype=float)
            ok = vals[np.isfinite(vals)]
            if key in ("accuracy", "precision") and (ok < 0).any():
                raise ValueError(f"{self.name}: {key} must be >= 0")
            if key == "ess" and ((ok <= 0) | (ok > n_traj)).any():
                raise ValueError(f"{self.name}: ess out of (0, n_traj]")


@dataclass
class RunManifest:
    version: str
    seed: int
    config: dict
    outputs: dict
    durations_s: dict
    divergence: dict

    def write(self, path) -> None:
        payload = {
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "outputs": self.outputs,
            "durations_s": self.durations_s,
            "divergence": self.divergence,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# per-method integration drivers
# ---------------------------------------------------------------------------


def run_oracle_series(cfg: SimulationConfig, streams: NoiseStreams,
                      stepper: str = "exact") -> tuple[MethodSeries, oracle_mod.OracleRun]:
    """Integrate the density-matrix benchmark along the shared W stream."""
    dws = streams.measurement_increments(cfg.n_steps, cfg.dt)
    rho0 = oracle_mod.init_coherent_density(cfg.alpha_amplitude, cfg.alpha_phase,
                                            cfg.fock_cutoff)
    rec = cfg.record_indices()
    run = oracle_mod.run_density(rho0, dws, cfg.dt, cfg.gamma, stepper=stepper,
                                 iterations=cfg.midpoint_iterations,
                                 record_indices=rec)
    series = MethodSeries(
        name="oracle",
        times=run.times,
        channels={
            "mean_n": run.mean_n,
            "var_n": run.var_n,
            "trace_error": run.trace_error,
            "purity": run.purity,
        },
    )
    return series, run


def _divergence_row(values: dict, rec_count: int) -> dict:
    return {k: np.full(rec_count, np.nan) for k in values}


def run_npw_series(cfg: SimulationConfig, streams: NoiseStreams) -> MethodSeries:
    """Run the NPW solver on the shared W stream."""
    dws = streams.measurement_increments(cfg.n_steps, cfg.dt)
    ens = npw_mod.init_npw_coherent(cfg.alpha_amplitude, cfg.alpha_phase, cfg.n_traj,
                                    streams, batch_count=cfg.batch_count)
    rec = cfg.record_indices()
    rec_set = set(rec)
    cols = {k: np.full(len(rec), np.nan) for k in
            ("mean_n", "precision", "ess", "phase_spread", "weight_sum")}
    row = {idx: i for i, idx in enumerate(rec)}
    status = stats_mod.DivergenceStatus(False)

    def record(at_step: int) -> None:
        i = row[at_step]
        w = npw_mod.npw_weights(ens)
        est = stats_mod.batch_estimate(ens.n.astype(float), w, cfg.batch_count)
        cols["mean_n"][i] = est.value
        cols["precision"][i] = est.precision
        cols["ess"][i] = stats_mod.effective_sample_size(w)
        cols["phase_spread"][i] = npw_mod.npw_phase_spread(ens)
        cols["weight_sum"][i] = w.sum()

    record(0)
    for k in range(cfg.n_steps):
        dv1 = streams.fictitious_increments("V1", cfg.n_traj, k, cfg.dt)
        ens = npw_mod.step_npw(ens, dws[k], dv1, cfg.dt, cfg.gamma,
                               cfg.npw_noise_coefficient)
        status = stats_mod.detect_divergence(
            npw_mod.npw_weights(ens), ens.is_finite(),
            cfg.ess_fraction_threshold, (k + 1) * cfg.dt)
        if status.diverged:
            break
        if (k + 1) in rec_set:
            record(k + 1)
    return MethodSeries(
        name="npw",
        times=cfg.dt * np.asarray(rec, dtype=float),
        channels=cols,
        diverged_at=status.time,
        divergence_cause=status.cause,
    )


def run_pplus_series(cfg: SimulationConfig, streams: NoiseStreams) -> MethodSeries:
    """Run the positive-P solver on the shared W stream."""
    dws = streams.measurement_increments(cfg.n_steps, cfg.dt)
    ens = pplus_mod.init_pplus(cfg.alpha_amplitude, cfg.alpha_phase, cfg.n_traj)
    rec = cfg.record_indices()
    rec_set = set(rec)
    cols = {k: np.full(len(rec), np.nan) for k in
            ("mean_n", "mean_n_imag", "precision", "ess", "weight_sum_magnitude")}
    row = {idx: i for i, idx in enumerate(rec)}
    status = stats_mod.DivergenceStatus(False)

    def record(at_step: int) -> None:
        i = row[at_step]
        w = pplus_mod.pplus_weights(ens)
        ba = pplus_mod.pplus_number_values(ens)
        est = stats_mod.batch_estimate(ba, w, cfg.batch_count)
        re, im = pplus_mod.pplus_mean_number(ens)
        cols["mean_n"][i] = re
        cols["mean_n_imag"][i] = im
        cols["precision"][i] = est.precision
        cols["ess"][i] = stats_mod.effective_sample_size(w)
        cols["weight_sum_magnitude"][i] = np.abs(w.sum())

    record(0)
    for k in range(cfg.n_steps):
        dv1 = streams.fictitious_increments("V1", cfg.n_traj, k, cfg.dt)
        dv2 = streams.fictitious_increments("V2", cfg.n_traj, k, cfg.dt)
        ens = pplus_mod.step_pplus(ens, dws[k], dv1, dv2, cfg.dt, cfg.gamma,
                                   cfg.midpoint_iterations)
        status = stats_mod.detect_divergence(
            pplus_mod.pplus_weights(ens), ens.is_finite(),
            cfg.ess_fraction_threshold, (k + 1) * cfg.dt)
        if status.diverged:
            break
        if (k + 1) in rec_set:
            try:
                record(k + 1)
            except DivergenceError:
                status = stats_mod.DivergenceStatus(True, (k + 1) * cfg.dt,
                                                    "weight_sum_underflow")
                cols_at = row[k + 1]
                for arr in cols.values():
                    arr[cols_at] = np.nan
                break
    return MethodSeries(
        name="pplus",
        times=cfg.dt * np.asarray(rec, dtype=float),
        channels=cols,
        diverged_at=status.time,
        divergence_cause=status.cause,
    )


# ---------------------------------------------------------------------------
# CSV / manifest output
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if np.isnan(x):
        return ""
    return repr(x)


def write_series_csv(path, series: MethodSeries, column_order) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["t"] + list(column_order) + ["diverged_at"]) + "\n")
        for i, t in enumerate(series.times):
            row = [_fmt(t)]
            for key in column_order:
                row.append(_fmt(series.channels[key][i]))
            row.append(_fmt(series.diverged_at))
            fh.write(",".join(row) + "\n")


COMPARE_COLUMNS = (
    ("oracle", ("mean_n", "var_n")),
    ("pplus", ("mean_n", "mean_n_imag", "precision", "accuracy", "ess",
               "weight_sum_magnitude")),
    ("npw", ("mean_n", "precision", "accuracy", "ess", "phase_spread",
             "weight_sum")),
)


def write_compare_csv(path, series_by_name: dict) -> None:
    header = ["t"]
    for name, keys in COMPARE_COLUMNS:
        if name not in series_by_name:
            continue
        header += [f"{name}_{k}" for k in keys]
        header += [f"{name}_diverged_at"] if name != "oracle" else []
    times = next(iter(series_by_name.values())).times
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i, t in enumerate(times):
            row = [_fmt(t)]
            for name, keys in COMPARE_COLUMNS:
                s = series_by_name.get(name)
                if s is None:
                    continue
                for k in keys:
                    row.append(_fmt(s.channels[k][i]) if k in s.channels else "")
                if name != "oracle":
                    row.append(_fmt(s.diverged_at))
            fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# top-level operations
# ---------------------------------------------------------------------------


def run_simulation(cfg: SimulationConfig, method: str, out_path,
                   stepper: str = "exact") -> RunManifest:
    """Run one method and write its CSV; divergence is data, not an error."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    cfg = validate_config(cfg)
    streams = NoiseStreams(cfg.seed)
    t0 = time.perf_counter()
    if method == "oracle":
        series, _ = run_oracle_series(cfg, streams, stepper=stepper)
        columns = ("mean_n", "var_n", "trace_error", "purity")
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(["t"] + list(columns)) + "\n")
            for i, t in enumerate(series.times):
                fh.write(",".join([_fmt(t)] + [_fmt(series.channels[c][i])
                                               for c in columns]) + "\n")
    elif method == "npw":
        series = run_npw_series(cfg, streams)
        series.validate(cfg.n_traj)
        write_series_csv(out_path, series,
                         ("mean_n", "precision", "ess", "phase_spread", "weight_sum"))
    else:
        series = run_pplus_series(cfg, streams)
        series.validate(cfg.n_traj)
        write_series_csv(out_path, series,
                         ("mean_n", "mean_n_imag", "precision", "ess",
                          "weight_sum_magnitude"))
    duration = time.perf_counter() - t0
    return RunManifest(
        version=__version__,
        seed=cfg.seed,
        config=config_to_dict(cfg),
        outputs={method: str(out_path)},
        durations_s={method: duration},
        divergence={method: {"diverged_at": series.diverged_at,
                             "cause": series.divergence_cause}},
    )


def compare(cfg: SimulationConfig, out_dir, methods=METHODS) -> RunManifest:
    """Run the requested methods on the identical W stream; merged CSV + manifest."""
    cfg = validate_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    series_by_name: dict[str, MethodSeries] = {}
    durations: dict[str, float] = {}

    oracle_series = None
    if "oracle" in methods:
        t0 = time.perf_counter()
        oracle_series, _ = run_oracle_series(cfg, NoiseStreams(cfg.seed))
        durations["oracle"] = time.perf_counter() - t0
        series_by_name["oracle"] = oracle_series
    if "pplus" in methods:
        t0 = time.perf_counter()
        series_by_name["pplus"] = run_pplus_series(cfg, NoiseStreams(cfg.seed))
        durations["pplus"] = time.perf_counter() - t0
    if "npw" in methods:
        t0 = time.perf_counter()
        series_by_name["npw"] = run_npw_series(cfg, NoiseStreams(cfg.seed))
        durations["npw"] = time.perf_counter() - t0

    if oracle_series is not None:
        ref = oracle_series.channels["mean_n"]
        for name in ("pplus", "npw"):
            s = series_by_name.get(name)
            if s is not None:
                s.channels["accuracy"] = np.abs(s.channels["mean_n"] - ref)
    for s in series_by_name.values():
        s.validate(cfg.n_traj)

    csv_path = os.path.join(out_dir, "compare.csv")
    write_compare_csv(csv_path, series_by_name)
    manifest = RunManifest(
        version=__version__,
        seed=cfg.seed,
        config=config_to_dict(cfg),
        outputs={"compare": csv_path},
        durations_s=durations,
        divergence={
            name: {"diverged_at": s.diverged_at, "cause": s.divergence_cause}
            for name, s in series_by_name.items() if name != "oracle"
        },
    )
    manifest.write(os.path.join(out_dir, "manifest.json"))
    return manifest


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


def selftest() -> int:
    """Reduced-scale invariant suite; returns a process exit code."""
    failures = []

    def check(name, fn):
        try:
            fn()
        except Exception as exc:   # noqa: BLE001 - report, do not crash
            failures.append(name)
            print(f"FAIL {name}: {exc}")
        else:
            print(f"PASS {name}")

    cfg = validate_config(SimulationConfig(
        alpha_amplitude=4.0, fock_cutoff=60, n_traj=400, batch_count=4,
        dt=1e-4, t_final=0.02, record_stride=20, seed=11,
    ))

    def _config_roundtrip():
        again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
        assert again == cfg

    def _noise_contracts():
        s = NoiseStreams(cfg.seed)
        key = s.stream_key("W")
        assert s.wiener_increment(key, 5, cfg.dt) == s.wiener_increment(key, 5, cfg.dt)
        a = s.measurement_increments(50, cfg.dt)
        b = NoiseStreams(cfg.seed).measurement_increments(50, cfg.dt)
        assert np.array_equal(a, b)

    def _oracle_invariants():
        s = NoiseStreams(cfg.seed)
        dws = s.measurement_increments(cfg.n_steps, cfg.dt)
        dm = oracle_mod.init_coherent_density(cfg.alpha_amplitude, 0.0, cfg.fock_cutoff)
        assert abs(oracle_mod.mean_number(dm) - cfg.alpha_amplitude**2) < 1e-6
        for k in range(cfg.n_steps):
            dm = oracle_mod.step_linear_propagator(dm, dws[k], cfg.dt, cfg.gamma)
            assert dm.hermiticity_defect() <= 1e-12
            assert abs(dm.trace() - 1.0) <= 1e-12

    def _npw_invariants():
        s = NoiseStreams(cfg.seed)
        ens = npw_mod.init_npw_coherent(cfg.alpha_amplitude, 0.0, cfg.n_traj, s,
                                        cfg.batch_count)
        n0 = ens.n.copy()
        dws = s.measurement_increments(cfg.n_steps, cfg.dt)
        for k in range(cfg.n_steps):
            dv1 = s.fictitious_increments("V1", cfg.n_traj, k, cfg.dt)
            ens = npw_mod.step_npw(ens, dws[k], dv1, cfg.dt, cfg.gamma)
        assert np.array_equal(ens.n, n0)
        assert np.isfinite(ens.log_weight).all()

    def _pplus_zero_drift():
        ens = pplus_mod.init_pplus(1.0, 0.0, 1)
        zero = np.zeros(1)
        stepped = pplus_mod.step_pplus(ens, 0.0, zero, zero, cfg.dt, cfg.gamma)
        assert np.allclose(stepped.alpha, ens.alpha)
        assert np.allclose(stepped.omega, ens.omega)

    def _stats_trivials():
        assert stats_mod.weighted_mean(np.array([1.0, 2, 3]), np.ones(3)) == 2.0
        assert abs(stats_mod.effective_sample_size(np.array([1.0, 1, 2])) - 16 / 6) < 1e-12
        est = stats_mod.batch_estimate(np.array([99.0, 101.0]), np.ones(2), 2)
        assert abs(est.precision - 1.0) < 1e-12

    def _determinism():
        import tempfile
        with tempfile.TemporaryDirectory() as d1, tempfile.TemporaryDirectory() as d2:
            compare(cfg, d1)
            compare(cfg, d2)
            with open(os.path.join(d1, "compare.csv")) as f1, \
                    open(os.path.join(d2, "compare.csv")) as f2:
                assert f1.read() == f2.read()

    check("config round-trip", _config_roundtrip)
    check("noise determinism", _noise_contracts)
    check("oracle conservation", _oracle_invariants)
    check("npw number conservation", _npw_invariants)
    check("pplus single-trajectory drift cancellation", _pplus_zero_drift)
    check("stats estimators", _stats_trivials)
    check("compare determinism", _determinism)
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _load_cfg(args) -> SimulationConfig:
    cfg = load_config(args.config) if args.config else SimulationConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "npw_coefficient", None):
        overrides["npw_noise_coefficient"] = args.npw_coefficient
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    return validate_config(cfg)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="npwsim",
        description="Simulate a number-monitored bosonic mode by an exact "
                    "Fock-basis filter, positive-P, and number-phase Wigner "
                    "weighted trajectories on a shared measurement record.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_oracle = sub.add_parser("oracle", help="run the exact benchmark")
    p_oracle.add_argument("--config", default=None)
    p_oracle.add_argument("--out", required=True)
    p_oracle.add_argument("--seed", type=int, default=None)

    p_run = sub.add_parser("run", help="run one stochastic method")
    p_run.add_argument("--method", choices=("pplus", "npw"), required=True)
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--npw-coefficient", choices=("derived_two", "paper_one"),
                       default=None)

    p_cmp = sub.add_parser("compare", help="all methods on one record")
    p_cmp.add_argument("--config", default=None)
    p_cmp.add_argument("--out-dir", required=True)
    p_cmp.add_argument("--seed", type=int, default=None)
    p_cmp.add_argument("--npw-coefficient", choices=("derived_two", "paper_one"),
                       default=None)
    p_cmp.add_argument("--methods", default="oracle,pplus,npw",
                       help="comma-separated subset of oracle,pplus,npw")

    sub.add_parser("selftest", help="reduced-scale invariant suite")

    args = parser.parse_args(argv)
    try:
        if args.command == "oracle":
            run_simulation(_load_cfg(args), "oracle", args.out)
        elif args.command == "run":
            run_simulation(_load_cfg(args), args.method, args.out)
        elif args.command == "compare":
            methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
            bad = set(methods) - set(METHODS)
            if bad:
                raise ConfigError(f"unknown methods: {sorted(bad)}")
            compare(_load_cfg(args), args.out_dir, methods)
        elif args.command == "selftest":
            return selftest()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
