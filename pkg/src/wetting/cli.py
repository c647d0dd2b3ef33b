"""Reproducible experiment driver.

Subcommands map one-to-one onto the library modules: ``statics``
(thermodynamic tables and partition functions), ``phase`` (critical
curves), ``sample`` (exact Gibbs draws), ``simulate`` (one event-driven
trajectory), ``gap`` (exact spectral reports with bottleneck columns)
and ``meta`` (exit-time experiments).  Every run writes CSV tables with
a sidecar schema description and finally a JSON manifest holding the
full configuration, file digests and wall-clock time; the manifest is
written last, so its presence marks a completed run.  Identical
(config, seed) pairs reproduce byte-identical CSV bodies.

Configuration is plain ``key=value`` text (``#`` comments); command-line
flags override file values.  Exit codes: 0 success, 2 configuration
error, 3 cap violation, 4 numeric-convergence failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path as FSPath

import numpy as np

from . import __version__, metastability, spectral, statics
from .core import ModelParams
from .dynamics import simulate
from .spectral import CapExceeded
from .statics import PathSampler


class ConfigError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def parse_grid(text, kind=float):
    """Scalar, comma list, or lo:hi:step range -> list of numbers."""
    text = str(text).strip()
    if ":" in text:
        pieces = text.split(":")
        if len(pieces) != 3:
            raise ConfigError(f"range syntax is lo:hi:step, got {text!r}")
        lo, hi, step = (float(p) for p in pieces)
        if step <= 0 or hi < lo:
            raise ConfigError(f"bad range {text!r}")
        vals = np.arange(lo, hi + 0.5 * step, step)
        return [kind(round(v, 12)) for v in vals]
    try:
        return [kind(float(p)) if kind is int else kind(p)
                for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}") from exc


@dataclass
class ExperimentConfig:
    """Validated configuration of one driver run; round-trips as text."""

    subcommand: str
    out: str
    n: list = field(default_factory=lambda: [16])
    a: float = 0.25
    lam: list = field(default_factory=lambda: [3.0])
    a_grid: list = field(default_factory=list)
    seed: int = 0
    replicas: int = 100
    t_max: float = 10.0
    t_cap: float = 0.0
    threads: int = 1
    enum_cap: int = 24
    state_cap: int = 200_000
    large_cap: int = 4_000_000
    ensemble: str = "elevated"

    def validate(self):
        if self.subcommand not in ("statics", "phase", "sample", "simulate",
                                   "gap", "meta"):
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if not self.n or any(v < 2 or v % 2 for v in self.n):
            raise ConfigError(f"N grid must be even integers >= 2: {self.n}")
        if not 0.0 < self.a < 0.5:
            raise ConfigError(f"a must lie in (0, 1/2): {self.a}")
        if not self.lam or any(v <= 0 for v in self.lam):
            raise ConfigError(f"lambda grid must be positive: {self.lam}")
        if any(not 0.0 < v < 0.5 for v in self.a_grid):
            raise ConfigError("a grid values must lie in (0, 1/2)")
        if self.seed < 0 or self.replicas < 1 or self.threads < 1:
            raise ConfigError("seed, replicas and threads must be positive")
        if self.subcommand in ("sample", "simulate", "meta") and \
                self.ensemble not in ("zero", "elevated", "elevated-free",
                                      "elevated-pinned"):
            raise ConfigError(f"unknown ensemble {self.ensemble!r}")
        return self

    def to_text(self) -> str:
        lines = [f"{f.name}={_fmt(getattr(self, f.name))}"
                 for f in fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides):
        raw = {}
        for ln, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {ln}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls._from_raw(raw)

    @classmethod
    def _from_raw(cls, raw: dict):
        known = {f.name: f for f in fields(cls)}
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in raw.items():
            if key in ("n",):
                kwargs[key] = value if isinstance(value, list) \
                    else parse_grid(value, int)
            elif key in ("lam", "a_grid"):
                kwargs[key] = value if isinstance(value, list) \
                    else parse_grid(value, float)
            elif key in ("a", "t_max", "t_cap"):
                kwargs[key] = float(value)
            elif key in ("seed", "replicas", "threads", "enum_cap",
                         "state_cap", "large_cap"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = str(value)
        missing = {"subcommand", "out"} - set(kwargs)
        if missing:
            raise ConfigError(f"missing required keys: {sorted(missing)}")
        return cls(**kwargs).validate()


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

class RunWriter:
    """Collects CSV outputs, writes schema sidecars and the final manifest."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out = FSPath(config.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.written = []
        self.counters = {}
        self.t0 = time.time()

    def csv(self, name: str, header, rows, schema: str):
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        with open(self.out / f"{name}.schema.txt", "w") as fh:
            fh.write(schema.strip() + "\n")
        self.written.append(path)
        return path

    def count(self, key: str, value):
        self.counters[key] = self.counters.get(key, 0) + int(value)

    def manifest(self):
        digests = {}
        for path in self.written:
            digests[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
        doc = {
            "tool": "wetting",
            "version": __version__,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "wall_clock_s": time.time() - self.t0,
            "config": {f.name: getattr(self.config, f.name)
                       for f in fields(self.config)},
            "counters": self.counters,
            "outputs": digests,
        }
        path = self.out / "run_manifest.json"
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def discard_partial(self):
        for path in self.written:
            path.unlink(missing_ok=True)
            FSPath(f"{path}.schema.txt").unlink(missing_ok=True)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_statics(config: ExperimentConfig, writer: RunWriter):
    rows = []
    for lam in config.lam:
        fe = statics.free_energy(lam)
        point = statics.free_energy_elevated(lam, config.a)
        d = statics.d_lambda(lam) if lam > 2.0 else float("nan")
        rows.append((lam, fe, config.a, point.free_energy, point.d_star,
                     point.regime, d))
    writer.csv(
        "free_energy.csv",
        ["lambda", "free_energy", "a", "free_energy_elevated", "d_star",
         "regime", "d_lambda"],
        rows,
        """free_energy.csv: closed-form thermodynamics per pinning strength.
lambda: pinning parameter; free_energy: zero-boundary free energy;
a: relative boundary height; free_energy_elevated: elevated free energy
(closed form, cross-checked variationally); d_star: maximising descent
slope; regime: phase-diagram cell; d_lambda: optimal slope (nan for
lambda <= 2).""",
    )
    rows = []
    for n in config.n:
        for lam in config.lam:
            parts = statics.partition_elevated(lam, config.a, n)
            rows.append((n, config.a, lam, parts.log_z, parts.log_z_free,
                         parts.log_z_pinned, parts.pinned_method))
    writer.csv(
        "partitions.csv",
        ["n", "a", "lambda", "log_z", "log_z_free", "log_z_pinned", "method"],
        rows,
        """partitions.csv: exact log partition functions of the elevated
ensemble and its free/pinned split, per system size and pinning
strength.  method records whether the pinned part came from
log-subtraction or the absorbing-flag DP.""",
    )
    xs = np.linspace(0.0, 1.0, 201)
    rows = []
    for lam in config.lam:
        prof = statics.scaling_profile(config.a, lam, xs)
        rows.extend((lam, x, p) for x, p in zip(xs, prof))
    writer.csv(
        "profile.csv",
        ["lambda", "x", "profile"],
        rows,
        """profile.csv: limit shape of the rescaled path (tent above the
fast-phase edge, flat otherwise) sampled on x in [0, 1].""",
    )


def cmd_phase(config: ExperimentConfig, writer: RunWriter):
    grid = config.a_grid or [round(0.01 * k, 2) for k in range(1, 50)]
    rows = []
    for a in grid:
        rows.append((a, statics.lambda_c(a), statics.fast_phase_edge(a)))
    writer.csv(
        "phase_curves.csv",
        ["a", "lambda_c", "fast_edge"],
        rows,
        """phase_curves.csv: the two phase-diagram curves per boundary
ratio a: the critical pinning strength lambda_c(a) (first-order
transition) and the fast-phase edge 2/(1-2a).""",
    )


def cmd_sample(config: ExperimentConfig, writer: RunWriter):
    rows = []
    for n in config.n:
        for lam in config.lam:
            params = ModelParams(n, config.a, lam)
            sampler = PathSampler(params, config.ensemble)
            rng = np.random.default_rng(
                np.random.SeedSequence([config.seed, n, int(lam * 2 ** 20)]))
            heights = sampler.sample_heights(config.replicas, rng)
            zero = heights == 0
            has = zero.any(axis=1)
            left = np.where(has, np.argmax(zero, axis=1), -1)
            right = np.where(has, n - np.argmax(zero[:, ::-1], axis=1), -1)
            for k in range(config.replicas):
                rows.append((n, lam, k, int(zero[k].sum()),
                             int(heights[k].min()), int(left[k]),
                             int(right[k])))
            writer.count("samples", config.replicas)
    writer.csv(
        "samples.csv",
        ["n", "lambda", "replica", "contacts", "min_height",
         "leftmost_contact", "rightmost_contact"],
        rows,
        """samples.csv: per-replica observables of exact Gibbs draws:
contact count, minimum height, leftmost/rightmost contact (-1 when the
path never touches the wall).""",
    )


def cmd_simulate(config: ExperimentConfig, writer: RunWriter):
    rows = []
    for n in config.n:
        for lam in config.lam:
            params = ModelParams(n, config.a, lam)
            rng = np.random.default_rng(
                np.random.SeedSequence([config.seed, n, int(lam * 2 ** 20)]))
            eta0 = PathSampler(params, config.ensemble).sample(rng)
            log = simulate(eta0, lam, rng, t_max=config.t_max)
            h = list(eta0)
            contacts = sum(1 for v in h if v == 0)
            for k, (t, x) in enumerate(zip(log.times, log.sites)):
                old = h[x]
                h[x] = h[x - 1] + h[x + 1] - h[x]
                contacts += (h[x] == 0) - (old == 0)
                rows.append((n, lam, k, t, int(x), contacts, min(h)))
            writer.count("events", log.n_events)
    writer.csv(
        "events.csv",
        ["n", "lambda", "event", "time", "site", "contacts", "min_height"],
        rows,
        """events.csv: time-stamped corner-flip events of one trajectory
per parameter point, with the contact count and minimum height right
after each flip.""",
    )


def cmd_gap(config: ExperimentConfig, writer: RunWriter):
    rows = []
    for n in config.n:
        for lam in config.lam:
            params = ModelParams(n, config.a, lam)
            gen = spectral.build_generator(params, "elevated",
                                           cap=config.state_cap)
            rep = spectral.spectral_gap(gen)
            mask = spectral.pinned_mask(gen)
            f = mask.astype(float)
            var = spectral.variance(gen, f)
            dir_form = spectral.dirichlet_form(gen, f)
            rows.append((n, config.a, lam, gen.n_states, rep.gap, rep.t_rel,
                         rep.method, rep.residual, var, dir_form,
                         var / dir_form))
    writer.csv(
        "gap_report.csv",
        ["n", "a", "lambda", "n_states", "gap", "t_rel", "method",
         "residual", "bottleneck_var", "bottleneck_dirichlet",
         "bottleneck_ratio"],
        rows,
        """gap_report.csv: exact spectral gap and relaxation time of the
elevated-ensemble chain, plus the one-contact bottleneck columns:
variance and Dirichlet form of the pinned indicator and their ratio
(a lower bound on t_rel).""",
    )


def _meta_worker(args):
    n, a, lam, seed_list, replicas = args
    params = ModelParams(n, a, lam)
    rng = np.random.default_rng(np.random.SeedSequence(seed_list))
    sample = metastability.exit_experiment(params, replicas, rng)
    return sample.times.tolist(), sample.censored, sample.start_well


def cmd_meta(config: ExperimentConfig, writer: RunWriter):
    rows, summary = [], []
    for n in config.n:
        for lam in config.lam:
            shards = max(1, config.threads)
            per = [config.replicas // shards] * shards
            for k in range(config.replicas % shards):
                per[k] += 1
            jobs = [(n, config.a, lam, [config.seed, n,
                                        int(lam * 2 ** 20), shard], cnt)
                    for shard, cnt in enumerate(per) if cnt]
            if config.threads > 1:
                with ProcessPoolExecutor(max_workers=config.threads) as pool:
                    results = list(pool.map(_meta_worker, jobs))
            else:
                results = [_meta_worker(job) for job in jobs]
            times = [t for chunk, _, _ in results for t in chunk]
            censored = sum(c for _, c, _ in results)
            well = results[0][2]
            times_arr = np.array(times)
            mean = float(times_arr.mean())
            rescaled = times_arr / mean
            from scipy import stats as _st
            ks = float(_st.kstest(rescaled, "expon").statistic)
            for k, t in enumerate(times):
                rows.append((n, lam, k, t, t / mean))
            summary.append((n, config.a, lam, well, len(times), censored,
                            mean, ks,
                            float(np.mean(rescaled > 0.5)),
                            float(np.mean(rescaled > 1.0)),
                            float(np.mean(rescaled > 2.0))))
            writer.count("replicas", len(times))
    writer.csv(
        "exit_times.csv",
        ["n", "lambda", "replica", "time", "rescaled"],
        rows,
        """exit_times.csv: per-replica first hitting times of the
equilibrium well from the metastable-conditioned start, raw and
rescaled by the empirical mean.""",
    )
    writer.csv(
        "meta_summary.csv",
        ["n", "a", "lambda", "start_well", "n_replicas", "censored",
         "mean_exit", "ks_exponential", "survival_0.5", "survival_1.0",
         "survival_2.0"],
        summary,
        """meta_summary.csv: per parameter point: the metastable start
well, replica counts, mean exit time, Kolmogorov-Smirnov distance of
the mean-rescaled sample to Exp(1) and survival fractions at rescaled
times 0.5, 1, 2.""",
    )


_COMMANDS = {
    "statics": cmd_statics,
    "phase": cmd_phase,
    "sample": cmd_sample,
    "simulate": cmd_simulate,
    "gap": cmd_gap,
    "meta": cmd_meta,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wetting",
        description="experiment driver for the elevated-boundary wetting model",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--N", dest="n", type=str, default=None)
        p.add_argument("--a", type=float, default=None)
        p.add_argument("--lambda", dest="lam", type=str, default=None)
        p.add_argument("--a-grid", dest="a_grid", type=str, default=None)
        p.add_argument("--replicas", type=int, default=None)
        p.add_argument("--t-max", dest="t_max", type=float, default=None)
        p.add_argument("--t-cap", dest="t_cap", type=float, default=None)
        p.add_argument("--ensemble", type=str, default=None)
        p.add_argument("--state-cap", dest="state_cap", type=int, default=None)
    return parser


def _load_config(args) -> ExperimentConfig:
    overrides = {
        "subcommand": args.subcommand,
        "out": args.out,
        "seed": args.seed,
        "threads": args.threads,
        "n": args.n,
        "a": args.a,
        "lam": args.lam,
        "a_grid": args.a_grid,
        "replicas": args.replicas,
        "t_max": args.t_max,
        "t_cap": args.t_cap,
        "ensemble": args.ensemble,
        "state_cap": args.state_cap,
    }
    text = ""
    if args.config:
        path = FSPath(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        text = path.read_text()
    if overrides["out"] is None and "out=" not in text:
        raise ConfigError("an output directory is required (--out)")
    return ExperimentConfig.from_text(text, **overrides)


def run(config: ExperimentConfig) -> FSPath:
    """Execute one validated configuration; returns the manifest path."""
    writer = RunWriter(config)
    try:
        _COMMANDS[config.subcommand](config, writer)
    except Exception:
        writer.discard_partial()
        raise
    return writer.manifest()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(config)
    except CapExceeded as exc:
        print(f"cap violation: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    print(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
