"""Command-line front end.

Every subcommand writes CSV data, a JSON summary and a run manifest into
``--out``.  Outputs depend only on the configuration and the master seed:
paths are indexed by stream and results are reduced in index order, so the
worker count changes wall time only.

Exit status: 0 on success, 2 for an invalid configuration, 3 when a
computation fails; failures print a one-line JSON record on stderr.
"""
from __future__ import annotations

import csv
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import click
import numpy as np

from . import __version__
from .brownian import Seed, sample_path
from .census import coarse_fine_census, joint_hit_census
from .curves import SampledCurve, curve_from_json
from .local_time import (
    TUBE_COUPLING,
    level_local_time,
    occupation_local_time,
    one_sided_local_time,
    tanaka_local_time,
)
from .stats import loglog_fit
from .sup_explorer import (
    adversarial_curve,
    adversary_local_time,
    brute_force_max,
    default_reward_eps,
    dichotomy_experiment,
    dp_branch_steps,
    dp_max_local_time,
    scaling_check,
)

COMMANDS = ("simulate", "localtime", "hits", "supdp", "adversary", "dichotomy", "scalecheck")
ESTIMATORS = ("occupation_two_sided", "occupation_one_sided", "tanaka", "level")
RECORD_COLUMNS = ["alpha", "n", "seed", "dp_value", "recomputed", "adversary_value", "delta"]


class ConfigError(Exception):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


@dataclass
class ExperimentConfig:
    alpha: list = field(default_factory=lambda: [0.75])
    n: list = field(default_factory=lambda: [64])
    eps: float | None = None
    dt: float | None = None
    paths: int = 16
    seed: int = 0
    out: str = "out"
    workers: int = 1
    t: float = 1.0
    curve: str | None = None
    brute_force: bool = False
    samples: int = 5000

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration field")
        cfg = cls(**data)
        cfg.alpha = [float(a) for a in _as_list(cfg.alpha)]
        cfg.n = [int(v) for v in _as_list(cfg.n)]
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def n_steps(self) -> int | None:
        if self.dt is None:
            return None
        k = round(1 / self.dt)
        if k < 2 or k & (k - 1) or abs(k * self.dt - 1) > 1e-12:
            raise ConfigError("dt", f"dt must be 1/2^k, got {self.dt}")
        return k

    def validate(self, command: str) -> None:
        if self.paths < 1:
            raise ConfigError("paths", "need at least one path")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed", "seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigError("workers", "need at least one worker")
        for a in self.alpha:
            if not 0 < a <= 1:
                raise ConfigError("alpha", f"alpha must lie in (0, 1], got {a}")
        if self.eps is not None and self.eps <= 0:
            raise ConfigError("eps", "eps must be positive")
        steps = self.n_steps()
        if command == "localtime":
            if steps is None:
                raise ConfigError("dt", "localtime needs --dt")
            if self.eps is None:
                raise ConfigError("eps", "localtime needs --eps")
            if self.dt > self.eps**2 / TUBE_COUPLING * (1 + 1e-12):
                raise ConfigError(
                    "dt", f"dt={self.dt:g} violates the tube coupling dt <= eps^2/16 = {self.eps**2 / 16:g}")
            if not 0 <= self.t <= 1:
                raise ConfigError("t", "t must lie in [0, 1]")
        if command in ("hits", "supdp", "dichotomy", "adversary", "scalecheck"):
            for v in self.n:
                if v < 2 or v & (v - 1):
                    raise ConfigError("n", f"every n must be a power of two >= 2, got {v}")
        if command == "hits" and steps is not None and steps < 4 * max(self.n):
            raise ConfigError("dt", "hits needs dt <= 1/(4N)")
        if command == "supdp":
            for a in self.alpha:
                for v in self.n:
                    eps = default_reward_eps(int(math.log2(v)), a)
                    if steps is not None and self.dt > eps**2 / TUBE_COUPLING * (1 + 1e-12):
                        raise ConfigError("dt", f"dt={self.dt:g} too coarse for the DP tube at alpha={a}, n={v}")
            if self.brute_force and max(self.n) > 16:
                raise ConfigError("n", "brute force is limited to N <= 16")
        if command == "adversary":
            if any(not a < 0.5 for a in self.alpha):
                raise ConfigError("alpha", "the adversarial construction needs alpha < 1/2")
            if any(v < 4 for v in self.n):
                raise ConfigError("n", "n must be at least 4")
        if command == "dichotomy":
            if len(self.n) != len(set(self.n)) or sorted(self.n) != self.n:
                raise ConfigError("n", "n must be strictly increasing")
            if any(v < 4 for v in self.n):
                raise ConfigError("n", "n must be at least 4")
            if any(a == 0.5 for a in self.alpha):
                raise ConfigError("alpha", "alpha = 1/2 is the open critical case")
        if command == "scalecheck" and self.paths < 1000:
            raise ConfigError("paths", "scalecheck needs at least 1000 paths")


def _as_list(v):
    if isinstance(v, (list, tuple)):
        return list(v)
    if isinstance(v, str):
        return [x for x in v.replace(",", " ").split() if x]
    return [v]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def _mapper(workers: int):
    if workers == 1:
        return map, None
    pool = ProcessPoolExecutor(max_workers=workers)
    return pool.map, pool


def _curve(cfg: ExperimentConfig):
    if cfg.curve is None:
        return SampledCurve.constant(0.0)
    return curve_from_json(Path(cfg.curve).read_text())


class _LocalTimeTask:
    def __init__(self, cfg, steps, curve):
        self.cfg, self.steps, self.curve = cfg, steps, curve

    def __call__(self, i):
        cfg = self.cfg
        path = sample_path(self.steps, Seed(cfg.seed, i))
        f = self.curve
        ests = [
            occupation_local_time(path, f, cfg.eps, cfg.t),
            one_sided_local_time(path, f, cfg.eps, cfg.t),
            tanaka_local_time(path, f, cfg.t),
        ]
        if f.max_slope() == 0:
            ests.append(level_local_time(path, float(f.values[0]), cfg.t))
        return [{"seed": i, "estimator": e.estimator, "eps": e.eps, "dt": e.dt, "t": e.t, "value": e.value}
                for e in ests]


class _HitsTask:
    def __init__(self, cfg, steps, curve):
        self.cfg, self.steps, self.curve = cfg, steps, curve

    def __call__(self, i):
        path = sample_path(self.steps, Seed(self.cfg.seed, i))
        rows, cells = [], []
        for a in self.cfg.alpha:
            for N in self.cfg.n:
                rows.append(joint_hit_census(path, self.curve, N, a).row() | {"seed": i})
                for c in coarse_fine_census(path, self.curve, N, a).cells:
                    cells.append({"seed": i, "N": N, "alpha": a} | c.to_json())
        return rows, cells


class _SupDpTask:
    def __init__(self, cfg, steps):
        self.cfg, self.steps = cfg, steps

    def __call__(self, i):
        path = sample_path(self.steps, Seed(self.cfg.seed, i))
        rows, argmax = [], []
        for a in self.cfg.alpha:
            for N in self.cfg.n:
                level = int(math.log2(N))
                res = dp_max_local_time(path, level, a)
                rows.append({"alpha": a, "n": N, "seed": i, "dp_value": res.value,
                             "recomputed": res.recomputed.value})
                argmax.append({"alpha": a, "n": N, "seed": i, "method": "dp", "value": res.value,
                               "levels": " ".join(map(str, res.argmax.levels))})
                if self.cfg.brute_force:
                    bf = brute_force_max(path, level, a)
                    argmax.append({"alpha": a, "n": N, "seed": i, "method": "brute_force", "value": bf.value,
                                   "levels": " ".join(map(str, bf.argmax.levels))})
        return rows, argmax


class _AdversaryTask:
    def __init__(self, cfg, steps, eps):
        self.cfg, self.steps, self.eps = cfg, steps, eps

    def __call__(self, i):
        path = sample_path(self.steps, Seed(self.cfg.seed, i))
        rows = []
        for a in self.cfg.alpha:
            for n in self.cfg.n:
                adv = adversarial_curve(path, n, alpha=a)
                val = adversary_local_time(path, adv, self.eps)
                rows.append({"alpha": a, "n": n, "seed": i, "adversary_value": val.tracking, "delta": adv.delta,
                             "full": val.occupation, "plateau_sum": val.plateau_sum, "m": adv.m,
                             "holder": adv.holder.member})
        return rows


def _steps_for_eps(eps: float, minimum: int) -> int:
    k = 1 << (max(minimum, 2) - 1).bit_length()
    while 1.0 / k > eps * eps / TUBE_COUPLING * (1 + 1e-12):
        k *= 2
    return k


def run_command(command: str, cfg: ExperimentConfig) -> dict:
    """Run one subcommand; returns the JSON summary (also written to disk)."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    mapper, pool = _mapper(cfg.workers)
    try:
        summary = _dispatch(command, cfg, out, mapper)
    finally:
        if pool is not None:
            pool.shutdown()
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _dispatch(command, cfg, out, mapper):
    if command == "simulate":
        steps = cfg.n_steps() or 1024
        rows, ends = [], []
        for i in range(cfg.paths):
            p = sample_path(steps, Seed(cfg.seed, i))
            ends.append(p.values[-1])
            rows.extend({"seed": i, "t": t, "w": w} for t, w in zip(p.times, p.values))
        write_csv(out / "paths.csv", ["seed", "t", "w"], rows)
        ends = np.array(ends)
        return {"command": command, "n_steps": steps, "paths": cfg.paths,
                "endpoint_mean": float(ends.mean()), "endpoint_var": float(ends.var())}

    if command == "localtime":
        steps = cfg.n_steps()
        rows = [r for chunk in mapper(_LocalTimeTask(cfg, steps, _curve(cfg)), range(cfg.paths)) for r in chunk]
        write_csv(out / "localtime.csv", ["seed", "estimator", "eps", "dt", "t", "value"], rows)
        means = {}
        for est in ESTIMATORS:
            vals = [r["value"] for r in rows if r["estimator"] == est]
            if vals:
                means[est] = float(np.mean(vals))
        return {"command": command, "means": means, "paths": cfg.paths}

    if command == "hits":
        steps = cfg.n_steps() or 4 * max(cfg.n)
        rows, cells = [], []
        for r, c in mapper(_HitsTask(cfg, steps, _curve(cfg)), range(cfg.paths)):
            rows.extend(r)
            cells.extend(c)
        write_csv(out / "hits.csv", ["seed", "N", "alpha", "joint", "curve_only", "path_only"], rows)
        with open(out / "coarse_cells.jsonl", "w") as fh:
            for c in cells:
                fh.write(json.dumps(c, sort_keys=True) + "\n")
        fits = {}
        for a in cfg.alpha:
            means = [float(np.mean([r["joint"] for r in rows if r["N"] == N and r["alpha"] == a])) for N in cfg.n]
            if len(cfg.n) >= 3 and all(m > 0 for m in means):
                fits[str(a)] = loglog_fit(list(zip(cfg.n, means))).to_json()
        return {"command": command, "fits": fits}

    if command == "supdp":
        steps = cfg.n_steps() or max(dp_branch_steps(a, cfg.n) for a in cfg.alpha)
        rows, argmax = [], []
        for r, a in mapper(_SupDpTask(cfg, steps), range(cfg.paths)):
            rows.extend(r)
            argmax.extend(a)
        write_csv(out / "supdp.csv", RECORD_COLUMNS, rows)
        write_csv(out / "argmax.csv", ["alpha", "n", "seed", "method", "value", "levels"], argmax)
        agree = None
        if cfg.brute_force:
            dp = [(r["value"], r["levels"]) for r in argmax if r["method"] == "dp"]
            bf = [(r["value"], r["levels"]) for r in argmax if r["method"] == "brute_force"]
            agree = dp == bf
        return {"command": command, "n_steps": steps, "brute_force_agrees": agree}

    if command == "adversary":
        eps = cfg.eps or 2.0**-8
        steps = cfg.n_steps() or _steps_for_eps(eps, 4 * max(cfg.n))
        rows = [r for chunk in mapper(_AdversaryTask(cfg, steps, eps), range(cfg.paths)) for r in chunk]
        write_csv(out / "adversary.csv", RECORD_COLUMNS + ["full", "plateau_sum", "m", "holder"], rows)
        return {"command": command, "n_steps": steps,
                "holder_pass_rate": float(np.mean([r["holder"] for r in rows]))}

    if command == "dichotomy":
        report = dichotomy_experiment(cfg.alpha, cfg.n, cfg.paths, Seed(cfg.seed, 0), eps=cfg.eps or 2.0**-8,
                                      mapper=mapper)
        write_csv(out / "dichotomy.csv", RECORD_COLUMNS, report.records)
        (out / "growth.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
        return {"command": command, "master_seed": report.master_seed,
                "fits": {str(a): f.to_json() for a, f in report.fits.items()}}

    if command == "scalecheck":
        results = {}
        samples = {}
        for n in cfg.n:
            rep = scaling_check(n, cfg.paths, Seed(cfg.seed, 0), n_samples=cfg.samples, mapper=mapper)
            results[str(n)] = {"ks": rep.ks, "mean": rep.mean, "reference_mean": rep.reference_mean}
            samples[n] = rep.samples
        rows = [{"n": n, "index": k, "y": float(y)} for n, ys in samples.items() for k, y in enumerate(ys)]
        write_csv(out / "scalecheck.csv", ["n", "index", "y"], rows)
        return {"command": command, "results": results}

    raise ConfigError("command", f"unknown command {command!r}")


def _error(kind: str, code: int, **info):
    click.echo(json.dumps({"status": "error", "kind": kind, **info}, sort_keys=True), err=True)
    sys.exit(code)


def _execute(command: str, config_file, overrides: dict) -> None:
    started = time.time()
    try:
        data = {}
        if config_file:
            data = json.loads(Path(config_file).read_text())
            if not isinstance(data, dict):
                raise ConfigError("config", "config file must hold a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        cfg = ExperimentConfig.from_dict(data)
        cfg.validate(command)
    except ConfigError as exc:
        _error("config", 2, field=exc.field, message=exc.message)
    except (OSError, ValueError, TypeError) as exc:
        _error("config", 2, field="config", message=str(exc))
    try:
        summary = run_command(command, cfg)
    except ConfigError as exc:
        _error("config", 2, field=exc.field, message=exc.message)
    except Exception as exc:  # any failure past validation is a computation failure
        _error("numerical", 3, command=command, message=f"{type(exc).__name__}: {exc}")
    manifest = {
        "command": command,
        "config": json.loads(cfg.to_json()),
        "versions": {"holder_localtime": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "elapsed_seconds": round(time.time() - started, 3),
    }
    Path(cfg.out, "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    click.echo(json.dumps(summary, sort_keys=True))


def _common(fn):
    opts = [
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="JSON config; command-line flags override it."),
        click.option("--alpha", default=None, help="Hölder exponent(s), comma separated."),
        click.option("--n", "n", default=None, help="Resolution(s) N or n, comma separated."),
        click.option("--eps", type=float, default=None, help="Occupation tube half-width."),
        click.option("--dt", type=float, default=None, help="Path step 1/2^k."),
        click.option("--paths", type=int, default=None, help="Number of paths."),
        click.option("--seed", type=int, default=None, help="Master seed (64-bit decimal)."),
        click.option("--out", default=None, help="Output directory."),
        click.option("--workers", type=int, default=None, help="Worker processes."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Brownian local times along Hölder curves."""


def _make(command: str, help_text: str, extra=()):
    def callback(config_file, **kwargs):
        _execute(command, config_file, kwargs)

    callback.__doc__ = help_text
    cmd = callback
    for opt in extra:
        cmd = opt(cmd)
    cmd = _common(cmd)
    main.command(name=command, help=help_text)(cmd)


_make("simulate", "Sample Brownian paths and write them as CSV.")
_make("localtime", "Run the local-time estimators along a curve.",
      [click.option("--t", type=float, default=None, help="Evaluation time."),
       click.option("--curve", default=None, help="Curve JSON file (default f = 0).")])
_make("hits", "Rectangle census of path and curve.",
      [click.option("--curve", default=None, help="Curve JSON file (default f = 0).")])
_make("supdp", "Maximize local time over the lattice family by dynamic programming.",
      [click.option("--brute-force", "brute_force", is_flag=True, default=None,
                    help="Also scan T_n exhaustively.")])
_make("adversary", "Build the path-tracking adversarial curves (alpha < 1/2).")
_make("dichotomy", "Growth of the supremum in both Hölder regimes.")
_make("scalecheck", "Distribution check of rescaled plateau local times.",
      [click.option("--samples", type=int, default=None, help="Sample size per side.")])


if __name__ == "__main__":
    main()
