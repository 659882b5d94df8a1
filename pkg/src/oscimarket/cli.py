"""Command-line front end.

Every subcommand reads one JSON scenario (or a CSV for ``spectrum`` and
``fit``), writes one CSV or JSON file into ``--out`` and prints a one-line
summary unless ``--quiet``.  Exit codes: 0 success, 1 invalid input,
2 numerical failure.  The config schema lives in docs/config.md.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import reducecheck as rc
from .errors import NumericalFailure, OscimarketError, ValidationError
from .ingest import MispricingMode, fit_series, load_csv
from .integrate import IntegratorConfig, Method, integrate_second_order
from .noise import NoiseEnsemble, NoiseStream
from .noscillator import (
    MarketSpec,
    closed_form_solution,
    component_energies,
    detect_sectors,
    force_field,
    inverse_from_frequencies,
    normal_modes,
    reduce_sector,
    sector_energy_split,
    verify_interlacing,
)
from .oscillator import (
    DampedOscillatorModel,
    potential_from_dict,
    simulate_cartesian,
    simulate_polar_radial,
    stationary_radial_density,
)
from .radial import Convention
from .stats import EmpiricalDistribution, find_peaks, ks_statistic, periodogram
from .stochastic_market import StochasticMarketModel, market_velocity, simulate_market

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
THREADS_ENV = "OSCIMARKET_THREADS"
_REQUIRED = object()


class ConfigError(ValidationError):
    pass


class UsageError(ValidationError):
    pass


@contextlib.contextmanager
def keyed(name: str):
    """Prefix validation errors raised by model constructors with a config key."""
    try:
        yield
    except ConfigError:
        raise
    except ValidationError as e:
        raise ConfigError(f"config key '{name}': {e}") from e


class Section:
    """Strict view of a JSON object; every key must be consumed."""

    def __init__(self, data, path: str = ""):
        if not isinstance(data, dict):
            raise ConfigError(f"config key '{path or '<root>'}' must be an object")
        self.data = data
        self.path = path
        self.used: set = set()

    def _name(self, key):
        return f"{self.path}.{key}" if self.path else key

    def has(self, key) -> bool:
        return key in self.data

    def raw(self, key, default=_REQUIRED):
        self.used.add(key)
        if key not in self.data:
            if default is _REQUIRED:
                raise ConfigError(f"missing config key '{self._name(key)}'")
            return default
        return self.data[key]

    def number(self, key, default=_REQUIRED) -> float:
        v = self.raw(key, default)
        if v is default and key not in self.data:
            return v
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"config key '{self._name(key)}' must be a number, got {v!r}")
        return float(v)

    def integer(self, key, default=_REQUIRED) -> int:
        v = self.raw(key, default)
        if v is default and key not in self.data:
            return v
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"config key '{self._name(key)}' must be an integer, got {v!r}")
        return v

    def boolean(self, key, default=_REQUIRED) -> bool:
        v = self.raw(key, default)
        if not isinstance(v, bool):
            raise ConfigError(f"config key '{self._name(key)}' must be true or false, got {v!r}")
        return v

    def string(self, key, default=_REQUIRED, choices=None) -> str:
        v = self.raw(key, default)
        if v is None and default is None:
            return v
        if not isinstance(v, str):
            raise ConfigError(f"config key '{self._name(key)}' must be a string, got {v!r}")
        if choices is not None and v not in choices:
            raise ConfigError(f"config key '{self._name(key)}' must be one of {sorted(choices)}, got {v!r}")
        return v

    def vector(self, key, default=_REQUIRED):
        v = self.raw(key, default)
        if v is None and default is None:
            return None
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return float(v)
        if not isinstance(v, list) or not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in v):
            raise ConfigError(f"config key '{self._name(key)}' must be a list of numbers")
        return np.array(v, dtype=float)

    def section(self, key, required: bool = True):
        if key not in self.data and not required:
            self.used.add(key)
            return None
        return Section(self.raw(key), self._name(key))

    def done(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(f"unknown config key '{self._name(extra[0])}'")


# config parsing shared by several subcommands

def _integrator(sec: Section, *, allow_method: bool = True, default_method=Method.STRATONOVICH_HEUN) -> IntegratorConfig:
    kw = dict(dt=sec.number("dt"), steps=sec.integer("steps"),
              record_every=sec.integer("record_every", 1), t0=sec.number("t0", 0.0))
    if allow_method:
        kw["method"] = sec.string("method", default_method.value, {m.value for m in Method})
    sec.done()
    with keyed(sec.path):
        return IntegratorConfig(**kw)


def _oscillator(sec: Section) -> DampedOscillatorModel:
    pot = sec.raw("potential", {"kind": "quadratic", "k": 1.0})
    with keyed(sec._name("potential")):
        if not isinstance(pot, dict):
            raise ValidationError("must be an object")
        potential = potential_from_dict(pot)
    kw = dict(potential=potential, damping=sec.number("damping", 1.0), sigma=sec.number("sigma", 1.0),
              damping_mode=sec.string("damping_mode", "radial", {"radial", "momentum"}))
    sec.done()
    with keyed(sec.path):
        return DampedOscillatorModel(**kw)


def _market(sec: Section) -> MarketSpec:
    a, b, v = sec.vector("a"), sec.vector("b"), sec.vector("v", None)
    labels = sec.raw("labels", None)
    if labels is not None and not (isinstance(labels, list) and all(isinstance(s, str) for s in labels)):
        raise ConfigError(f"config key '{sec._name('labels')}' must be a list of strings")
    sec.done()
    with keyed(sec.path):
        return MarketSpec(a, b, v, labels)


def _workers(n_items: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(raw)
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if cap < 1:
            raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return max(1, min(cap, n_items))


def _parallel_paths(fn, n_paths: int):
    """Run ``fn(start, stop)`` over contiguous path blocks; results in path order.

    Noise is counter-based per path, so the split does not change results.
    """
    workers = _workers(n_paths)
    edges = np.linspace(0, n_paths, workers + 1).astype(int)
    blocks = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    if len(blocks) == 1:
        return [fn(*blocks[0])]
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        return list(pool.map(lambda ab: fn(*ab), blocks))


# output

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n", encoding="utf-8")


# subcommands; each returns (output filename, payload writer, summary line)

def cmd_simulate_asset(cfg: Section, opts):
    model = _oscillator(cfg.section("model"))
    x0, y0 = cfg.number("x0", 1.0), cfg.number("y0", 0.0)
    icfg = _integrator(cfg.section("integrator"))
    seed, paths = opts.seed(cfg), opts.paths(cfg)
    out = cfg.string("output", "asset.csv")
    cfg.done()
    if paths == 1:
        traj = simulate_cartesian(model, x0, y0, icfg, NoiseStream(seed, 0, 2))
        st = traj.states[:, :, None]
        en = {k: v[:, None] for k, v in traj.energy.items()}
    else:
        ens = NoiseEnsemble.first(seed, paths, 2)

        def block(a, b):
            return simulate_cartesian(model, np.full(b - a, x0), np.full(b - a, y0), icfg, ens.subset(a, b))

        parts = _parallel_paths(block, paths)
        st = np.concatenate([p.states for p in parts], axis=2)
        en = {k: np.concatenate([p.energy[k] for p in parts], axis=1) for k in parts[0].energy}
        traj = parts[0]
    header = (["path"] if paths > 1 else []) + ["t", "x", "y", "potential", "kinetic", "total"]
    rows = []
    for m in range(paths):
        for i, t in enumerate(traj.times):
            row = [t, st[i, 0, m], st[i, 1, m], en["potential"][i, m], en["kinetic"][i, m], en["total"][i, m]]
            rows.append(([m] if paths > 1 else []) + row)
    return out, lambda p: write_csv(p, header, rows), f"{paths} path(s), {len(traj.times)} frames"


def cmd_modes(cfg: Section, opts):
    spec = _market(cfg.section("market"))
    out = cfg.string("output", "modes.json")
    cfg.done()
    d = normal_modes(spec)
    rep = verify_interlacing(spec.gammas, d.lambdas)
    payload = {
        "n": spec.n,
        "labels": list(spec.labels),
        "gammas": spec.gammas,
        "lambdas": d.lambdas,
        "C": d.C,
        "pseudo_inverse": d.pseudo_inverse,
        "interlacing": {"ok": rep.ok, "max_violation": rep.max_violation},
    }
    return out, lambda p: write_json(p, payload), f"lambdas {np.array2string(d.lambdas, precision=6)}; interlacing {rep.ok}"


def cmd_inverse_modes(cfg: Section, opts):
    g, lam = cfg.vector("gammas"), cfg.vector("lambdas")
    out = cfg.string("output", "inverse.json")
    cfg.done()
    with keyed("gammas/lambdas"):
        res = inverse_from_frequencies(np.atleast_1d(g), np.atleast_1d(lam))
    back = normal_modes(res.spec).lambdas
    payload = {
        "a": res.spec.a,
        "b": res.spec.b,
        "gammas": res.spec.gammas,
        "lambdas_requested": np.atleast_1d(lam),
        "lambdas_reproduced": back,
        "round_trip_error": res.round_trip_error,
    }
    return out, lambda p: write_json(p, payload), f"round-trip error {res.round_trip_error:.3g}"


def cmd_simulate_market(cfg: Section, opts):
    spec = _market(cfg.section("market"))
    x0, v0 = cfg.vector("x0"), cfg.vector("xdot0", np.zeros(spec.n))
    solver = cfg.string("solver", "closed_form", {"closed_form", "splitting"})
    icfg = _integrator(cfg.section("integrator"), allow_method=False)
    stoch = cfg.section("stochastic", required=False)
    seed, paths = opts.seed(cfg), opts.paths(cfg)
    out = cfg.string("output", "market.csv")
    with keyed("x0/xdot0"):
        sol = closed_form_solution(normal_modes(spec), (np.broadcast_to(x0, spec.n), np.broadcast_to(v0, spec.n)))
    d = sol.decomp
    k = spec.n - 1
    if stoch is None:
        cfg.done()
        if paths != 1:
            raise ConfigError("config key 'paths': a deterministic run has exactly one path")
        if solver == "closed_form":
            x, xd = sol(icfg.times())
            t = icfg.times()
        else:
            split = IntegratorConfig(icfg.dt, icfg.steps, Method.HAMILTONIAN_SPLITTING, icfg.record_every, icfg.t0)
            x0c, v0c = sol(icfg.t0)
            tr = integrate_second_order(force_field(spec), 0.0, 0.0, x0c, v0c, split, None)
            t, x, xd = tr.times, tr.states[:, : spec.n], tr.states[:, spec.n:]
        E, tot = component_energies(spec, x, xd)
        header = ["t"] + [f"x_{i + 1}" for i in range(spec.n)] + [f"E_{i + 1}" for i in range(spec.n)] + ["E_total"]
        rows = np.column_stack([t, x, E, tot])
        return out, lambda p: write_csv(p, header, rows), f"deterministic, {len(t)} frames"
    kw = dict(
        c=stoch.vector("c", 1.0), sigma=stoch.vector("sigma", 1.0), phase_sigma=stoch.vector("phase_sigma", 1.0),
        convention=stoch.string("convention", Convention.CARTESIAN_CONSISTENT.value, {c.value for c in Convention}),
    )
    r0, theta = stoch.vector("r0", None), stoch.vector("theta", None)
    stoch.done()
    cfg.done()
    if solver != "closed_form":
        raise ConfigError("config key 'solver': stochastic runs only support closed_form mode assembly")
    with keyed("stochastic"):
        model = StochasticMarketModel.build(
            d, r0=sol.amplitudes if r0 is None else r0, theta=sol.phases if theta is None else theta,
            seed=seed, **kw)

    def block(a, b):
        return [simulate_market(model, icfg, NoiseStream(seed, m, 2 * k)) for m in range(a, b)]

    sims = [s for part in _parallel_paths(block, paths) for s in part]
    header = ((["path"] if paths > 1 else []) + ["t"] + [f"x_{i + 1}" for i in range(spec.n)]
              + [f"E_{i + 1}" for i in range(spec.n)] + ["E_total"]
              + [f"r_{j + 1}" for j in range(k)] + [f"S_{j + 1}" for j in range(k)])
    rows = []
    for m, s in enumerate(sims):
        E, tot = component_energies(spec, s.x, market_velocity(model, s))
        block_rows = np.column_stack([s.times, s.x, E, tot, s.r, s.S])
        for r in block_rows:
            rows.append(([m] if paths > 1 else []) + list(r))
    return out, lambda p: write_csv(p, header, rows), f"stochastic, {paths} path(s), {len(sims[0].times)} frames"


def cmd_sectors(cfg: Section, opts):
    spec = _market(cfg.section("market"))
    tol = cfg.number("gamma_tolerance", 1e-9)
    x, xd = cfg.vector("x", None), cfg.vector("xdot", None)
    out = cfg.string("output", "sectors.json")
    cfg.done()
    grouping = detect_sectors(spec, tol)
    sectors = []
    for grp, g, ah, bh in zip(grouping.groups, grouping.gammas, grouping.a_hat, grouping.b_hat):
        entry = {"members": list(grp), "labels": [spec.labels[i] for i in grp], "gamma": g, "a_hat": ah, "b_hat": bh}
        if len(grp) > 1:
            red = reduce_sector(spec, grp, tol)
            entry["reduced_market"] = {"a": red.spec.a, "b": red.spec.b, "v": red.spec.v,
                                       "labels": list(red.spec.labels), "mapping": [list(m) for m in red.mapping]}
            if x is not None:
                with keyed("x/xdot"):
                    xs = np.broadcast_to(x, spec.n)
                    vs = np.zeros(spec.n) if xd is None else np.broadcast_to(xd, spec.n)
                    ext, internal = sector_energy_split(spec, grp, xs, vs, tol)
                entry["energy"] = {"external": float(ext), "internal": float(internal)}
        sectors.append(entry)
    payload = {"gamma_tolerance": tol, "sectors": sectors}
    return out, lambda p: write_json(p, payload), f"{len(sectors)} sector(s)"


_SYSTEMS = {"brownian_2d", "damped_oscillator", "rotation", "translation"}


def cmd_check_reduce(cfg: Section, opts):
    sysc = cfg.section("system")
    kind = sysc.string("kind", choices=_SYSTEMS)
    deterministic = cfg.boolean("deterministic", kind in ("rotation", "translation"))
    if kind == "brownian_2d":
        sigma = sysc.number("sigma", 1.0)
        sysc.done()
        V = rc.brownian_2d(sigma)
    elif kind == "damped_oscillator":
        sysc.used.discard("kind")
        sub = dict(sysc.data)
        sub.pop("kind")
        sysc.used.add("kind")
        V = _oscillator(Section(sub, sysc.path)).vector_fields()
        sysc.used.update(sub)
    else:
        sysc.done()
        V = None
    if kind in ("rotation", "translation") and not deterministic:
        raise ConfigError(f"config key 'deterministic': system {kind!r} is a plain vector field")
    proj = cfg.section("projection")
    pkind = proj.string("kind", choices={"coordinate", "radius"})
    n_base, pseed = proj.integer("n_base", 16), proj.integer("seed", 0)
    if pkind == "coordinate":
        keep = proj.raw("keep", [0])
        if not (isinstance(keep, list) and all(isinstance(i, int) and not isinstance(i, bool) for i in keep)):
            raise ConfigError("config key 'projection.keep' must be a list of integers")
        span = proj.number("span", 2.0)
        proj.done()
        with keyed("projection"):
            setup = rc.coordinate_projection(2, keep, n_base=n_base, span=span, seed=pseed)
    else:
        rmin, rmax = proj.number("r_min", 0.5), proj.number("r_max", 2.0)
        proj.done()
        if not 0 < rmin < rmax:
            raise ConfigError("config key 'projection.r_min' must satisfy 0 < r_min < r_max")
        setup = rc.radius_projection(2, n_base=n_base, r_min=rmin, r_max=rmax, seed=pseed)
    kw = dict(fiber_samples=cfg.integer("fiber_samples", 8),
              pass_threshold=cfg.number("pass_threshold", rc.PASS_THRESHOLD),
              fail_threshold=cfg.number("fail_threshold", rc.FAIL_THRESHOLD))
    out = cfg.string("output", "reduce.json")
    cfg.done()
    with keyed("fiber_samples/thresholds"):
        if deterministic:
            X0 = {"rotation": rc.rotation_field, "translation": rc.translation_field}.get(kind)
            report = rc.check_projectable_deterministic(X0 if X0 is not None else V.drift, setup, **kw)
        else:
            report = rc.check_projectable_sds(V, setup, **kw)
    payload = {"system": kind, "projection": pkind, "deterministic": deterministic, **report.to_dict()}
    return out, lambda p: write_json(p, payload), f"{report.verdict.value} (variation {report.max_fiber_variation:.3g})"


def cmd_density(cfg: Section, opts):
    model = _oscillator(cfg.section("model"))
    conv = Convention(cfg.string("convention", Convention.CARTESIAN_CONSISTENT.value, {c.value for c in Convention}))
    route = cfg.string("route", "polar", {"polar", "cartesian"})
    icfg_sec = cfg.section("integrator")
    dt = icfg_sec.number("dt")
    method = icfg_sec.string("method", Method.STRATONOVICH_HEUN.value, {m.value for m in Method})
    icfg_sec.done()
    burn_in = cfg.number("burn_in", 5.0)
    samples = cfg.integer("samples_per_path", 100)
    every = cfg.integer("sample_every", 100)
    bins = cfg.integer("bins", 60)
    r_max = cfg.number("r_max", 4.0)
    r0 = cfg.number("r0", 1.0)
    seed, paths = opts.seed(cfg), opts.paths(cfg)
    out = cfg.string("output", "density.csv")
    cfg.done()
    if route == "cartesian" and conv is not Convention.CARTESIAN_CONSISTENT:
        raise ConfigError("config key 'route': the cartesian route realises the cartesian_consistent convention only")
    if samples < 1 or every < 1 or bins < 1 or not r_max > 0 or not burn_in >= 0:
        raise ConfigError("config keys 'samples_per_path', 'sample_every', 'bins', 'r_max', 'burn_in' must be positive")
    with keyed("model"):
        dens = stationary_radial_density(model, conv)
    burn_steps = int(np.ceil(burn_in / dt))
    burn_steps = int(np.ceil(burn_steps / every) * every)
    with keyed("integrator"):
        icfg = IntegratorConfig(dt, burn_steps + samples * every, method, every)
    ens = NoiseEnsemble.first(seed, paths, 1 if route == "polar" else 2)
    skip = burn_steps // every + 1

    def block(a, b):
        if route == "polar":
            tr = simulate_polar_radial(model, np.full(b - a, r0), icfg, ens.subset(a, b), conv)
            return tr.states[skip:, 0].ravel()
        tr = simulate_cartesian(model, np.full(b - a, r0), np.zeros(b - a), icfg, ens.subset(a, b))
        return np.hypot(tr.states[skip:, 0], tr.states[skip:, 1]).ravel()

    r = np.concatenate(_parallel_paths(block, paths))
    ks = ks_statistic(EmpiricalDistribution(r), dens.cdf)
    edges = np.linspace(0.0, r_max, bins + 1)
    counts, _ = np.histogram(r, edges)
    width = edges[1] - edges[0]
    mid = 0.5 * (edges[:-1] + edges[1:])
    cdf_edges = dens.cdf(edges)
    rows = np.column_stack([mid, dens.pdf(mid), counts / (r.size * width), np.diff(cdf_edges), counts / r.size])
    header = ["r", "analytic_pdf", "empirical_pdf", "analytic_mass", "empirical_mass"]
    return out, lambda p: write_csv(p, header, rows), f"{r.size} samples, KS {ks:.4g}"


def _read_numeric_csv(path: Path):
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValidationError(f"{path}: row 1: missing header")
        cols = [[] for _ in header]
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}: row {row_no}: expected {len(header)} fields, got {len(row)}")
            for c, v in zip(cols, row):
                try:
                    c.append(float(v))
                except ValueError:
                    raise ValidationError(f"{path}: row {row_no}: cannot parse {v!r} as a number") from None
    return [h.strip() for h in header], [np.array(c) for c in cols]


def cmd_spectrum(path: Path, opts):
    header, cols = _read_numeric_csv(path)
    if opts.column is not None:
        if opts.column not in header:
            raise ValidationError(f"--column {opts.column!r} not in CSV header {header}")
        idx = header.index(opts.column)
    else:
        if len(header) < 2:
            raise ValidationError("CSV needs a time column and a series column")
        idx = 1
    x = cols[idx]
    if opts.dt is not None:
        dt = opts.dt
    else:
        t = cols[0]
        steps = np.diff(t)
        dt = float(np.mean(steps)) if steps.size else 0.0
        if steps.size == 0 or np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, abs(dt)):
            raise ValidationError(f"column {header[0]!r} is not uniformly spaced; pass --dt")
    p = periodogram(x, dt)
    sep = opts.min_separation if opts.min_separation is not None else 3.0 * p.resolution
    peaks = find_peaks(p, opts.peaks, sep)
    is_peak = np.isin(p.frequencies, peaks).astype(int)
    rows = [[f, pw, int(k)] for f, pw, k in zip(p.frequencies, p.power, is_peak)]
    out = opts.output or "spectrum.csv"
    return out, lambda q: write_csv(q, ["frequency", "power", "peak"], rows), \
        f"peaks at {np.array2string(peaks, precision=6)} (bin {p.resolution:.4g})"


def cmd_fit(path: Path, opts):
    series = load_csv(path)
    with keyed("--fair-value/--window/--significance"):
        result = fit_series(series, MispricingMode(opts.mode), opts.fair_value, opts.window, opts.significance)
    result = {"input": path.name, **result}
    out = opts.output or "fit.json"
    f = result["fit"]
    summary = f"period {f['period_estimate']:.4g}" if f["oscillatory"] else "no oscillatory roots"
    return out, lambda q: write_json(q, result), summary


CONFIG_COMMANDS = {
    "simulate-asset": cmd_simulate_asset,
    "modes": cmd_modes,
    "inverse-modes": cmd_inverse_modes,
    "simulate-market": cmd_simulate_market,
    "sectors": cmd_sectors,
    "check-reduce": cmd_check_reduce,
    "density": cmd_density,
}
CSV_COMMANDS = {"spectrum": cmd_spectrum, "fit": cmd_fit}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oscimarket", description="Second-order market oscillator models.")
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (u64); overrides the config")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--paths", type=int, default=None, help="ensemble size; overrides the config")
    common.add_argument("--quiet", action="store_true", help="suppress the summary line")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    for name in CONFIG_COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=f"{name} from a JSON scenario")
        sp.add_argument("config", type=Path)
    sp = sub.add_parser("spectrum", parents=[common], help="periodogram and peaks of a CSV column")
    sp.add_argument("csv", type=Path)
    sp.add_argument("--column", default=None, help="series column (default: second column)")
    sp.add_argument("--dt", type=float, default=None, help="sample spacing (default: from the first column)")
    sp.add_argument("--peaks", type=int, default=1, help="number of peaks to report")
    sp.add_argument("--min-separation", type=float, default=None, help="minimum peak separation (rad/time)")
    sp.add_argument("--output", default=None, help="output file name")
    sp = sub.add_parser("fit", parents=[common], help="AR(2) oscillator fit of a price CSV")
    sp.add_argument("csv", type=Path)
    sp.add_argument("--mode", default="log_ratio", choices=[m.value for m in MispricingMode])
    sp.add_argument("--fair-value", type=float, default=None, help="constant fair value")
    sp.add_argument("--window", type=int, default=521, help="rolling fair-value window (observations)")
    sp.add_argument("--significance", type=float, default=2.0,
                    help="standard errors the root discriminant must lie below zero (0: bare sign test)")
    sp.add_argument("--output", default=None, help="output file name")
    return parser


class _Options:
    def __init__(self, ns):
        self.ns = ns

    def __getattr__(self, name):
        return getattr(self.ns, name)

    def seed(self, cfg: Section) -> int:
        s = self.ns.seed if self.ns.seed is not None else cfg.integer("seed", 0)
        cfg.used.add("seed")
        if not 0 <= s < 2 ** 64:
            raise ConfigError("config key 'seed' must be an unsigned 64-bit integer")
        return s

    def paths(self, cfg: Section) -> int:
        n = self.ns.paths if self.ns.paths is not None else cfg.integer("paths", 1)
        cfg.used.add("paths")
        if n < 1:
            raise ConfigError("config key 'paths' must be >= 1")
        return n


def _load_config(path: Path) -> Section:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: line {e.lineno}: {e.msg}") from None
    return Section(data)


def run(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        opts = _Options(ns)
        # overflow on the way to a blow-up is reported as a numerical failure, not a warning
        with np.errstate(over="ignore", invalid="ignore"):
            if ns.command in CONFIG_COMMANDS:
                name, writer, summary = CONFIG_COMMANDS[ns.command](_load_config(ns.config), opts)
            else:
                if not ns.csv.is_file():
                    raise ValidationError(f"cannot read {ns.csv}")
                name, writer, summary = CSV_COMMANDS[ns.command](ns.csv, opts)
        out_dir = Path(ns.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        target = out_dir / name
        writer(target)
        if not ns.quiet:
            print(f"{ns.command}: {summary} -> {target}")
        return EXIT_OK
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailure, OscimarketError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FloatingPointError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())
