"""Command-line interface.

Runs are configured by a flat key-value file with ``[section]`` headers
(``[model]``, ``[costs]``, plus per-command sections) and/or by flags;
flags win.  Tables are emitted as CSV (header row, '.' decimal separator,
newline-terminated) or as JSON objects, one per line.

Exit codes: 0 success, 2 configuration error, 3 numerical
non-convergence, 4 verification failure.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field

import click
import numpy as np

from .errors import ConfigError, ConvergenceError, DomainError, IdciError, UnsupportedModelError
from .models import BrownianDrift, Costs, ExpJumpCL, FixedJumpCL
from .scale import ScaleSet
from .optimize import (
    Strategy,
    lemma45_threshold,
    optimize,
    require_feasible,
    value_function,
    xi,
)
from .hjb import GridSpec, check_hjb
from .mc import SimConfig, estimate_exit_laplace, estimate_value

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4

_MODEL_KEYS = {
    "brownian": ("mu", "sigma"),
    "fixed-jump": ("beta", "lam", "jump"),
    "exp-jump": ("beta", "lam", "eta"),
}


# -- configuration ------------------------------------------------------------


@dataclass
class RawConfig:
    """Parsed key-value file with per-key line numbers for error messages."""

    values: dict[str, dict[str, str]] = field(default_factory=dict)
    lines: dict[str, dict[str, int]] = field(default_factory=dict)

    def get(self, section: str, key: str) -> str | None:
        return self.values.get(section, {}).get(key)

    def where(self, section: str, key: str) -> str:
        n = self.lines.get(section, {}).get(key)
        return f"line {n}" if n is not None else "flag"


def parse_config_file(path: str) -> RawConfig:
    raw = RawConfig()
    section = ""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#") or text.startswith(";"):
                continue
            if text.startswith("[") and text.endswith("]"):
                section = text[1:-1].strip().lower()
                continue
            if "=" not in text:
                raise ConfigError(f"{path}: line {lineno}: expected 'key = value', got {text!r}")
            key, _, value = text.partition("=")
            raw.values.setdefault(section, {})[key.strip().lower()] = value.strip()
            raw.lines.setdefault(section, {})[key.strip().lower()] = lineno
    return raw


def _to_float(raw: RawConfig, section: str, key: str, override, required=True, default=None):
    if override is not None:
        return float(override)
    text = raw.get(section, key)
    if text is None:
        if required and default is None:
            raise ConfigError(f"missing required key '{key}' in section [{section}]")
        return default
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(
            f"{raw.where(section, key)}: key '{key}' must be numeric, got {text!r}"
        ) from exc


def build_model(raw: RawConfig, opts: dict):
    variant = opts.get("variant") or raw.get("model", "variant")
    if variant is None:
        raise ConfigError("missing model variant (key 'variant' in [model] or --variant)")
    variant = variant.lower()
    if variant not in _MODEL_KEYS:
        raise ConfigError(
            f"unknown model variant {variant!r}; expected one of {sorted(_MODEL_KEYS)}"
        )
    vals = {}
    for key in _MODEL_KEYS[variant]:
        vals[key] = _to_float(raw, "model", key, opts.get(key))
    try:
        if variant == "brownian":
            return BrownianDrift(mu=vals["mu"], sigma=vals["sigma"])
        if variant == "fixed-jump":
            return FixedJumpCL(beta=vals["beta"], lam=vals["lam"], jump=vals["jump"])
        return ExpJumpCL(beta=vals["beta"], lam=vals["lam"], eta=vals["eta"])
    except DomainError as exc:
        raise ConfigError(f"invalid [model] parameters: {exc}") from exc


def build_costs(raw: RawConfig, opts: dict) -> Costs:
    q = _to_float(raw, "costs", "q", opts.get("q"))
    c = _to_float(raw, "costs", "c", opts.get("c"))
    phi = _to_float(raw, "costs", "phi", opts.get("phi"))
    try:
        return Costs(q=q, c=c, phi=phi)
    except DomainError as exc:
        raise ConfigError(f"invalid [costs] parameters: {exc}") from exc


def _load(config_path, opts):
    raw = parse_config_file(config_path) if config_path else RawConfig()
    return raw, build_model(raw, opts), build_costs(raw, opts)


# -- output -------------------------------------------------------------------


def emit_table(rows: list[dict], columns: list[str], fmt: str, precision: int, output):
    def fnum(v):
        if isinstance(v, float):
            return f"{v:.{precision}f}"
        return str(v)

    out = open(output, "w", encoding="utf-8", newline="\n") if output else sys.stdout
    try:
        if fmt == "csv":
            out.write(",".join(columns) + "\n")
            for row in rows:
                out.write(",".join(fnum(row[c]) for c in columns) + "\n")
        else:
            for row in rows:
                out.write(json.dumps({c: row[c] for c in columns}) + "\n")
    finally:
        if output:
            out.close()


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    # shared exception-to-exit-code mapping for command bodies
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, UnsupportedModelError) as exc:
            _fail(EXIT_CONFIG, str(exc))
        except ConvergenceError as exc:
            _fail(EXIT_NUMERIC, str(exc))
        except DomainError as exc:
            _fail(EXIT_CONFIG, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# -- shared options -----------------------------------------------------------

def model_options(fn):
    for deco in reversed(
        [
            click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                         help="Key-value run configuration file."),
            click.option("--variant", type=click.Choice(sorted(_MODEL_KEYS)), default=None),
            click.option("--mu", type=float, default=None),
            click.option("--sigma", type=float, default=None),
            click.option("--beta", type=float, default=None),
            click.option("--lam", type=float, default=None),
            click.option("--jump", type=float, default=None),
            click.option("--eta", type=float, default=None),
            click.option("--q", type=float, default=None),
            click.option("--c", type=float, default=None),
            click.option("--phi", type=float, default=None),
        ]
    ):
        fn = deco(fn)
    return fn


def output_options(fn):
    for deco in reversed(
        [
            click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv"),
            click.option("--output", type=click.Path(), default=None,
                         help="Write to file instead of stdout."),
            click.option("--precision", type=int, default=5, show_default=True),
        ]
    ):
        fn = deco(fn)
    return fn


def _opts(kw):
    return {k: kw.get(k) for k in ("variant", "mu", "sigma", "beta", "lam", "jump", "eta", "q", "c", "phi")}


@click.group()
@click.option("--threads", type=int, envvar="IDCI_THREADS", default=None,
              help="Worker thread count for simulation (env IDCI_THREADS).")
def main(threads):
    """Optimal impulse dividend and capital injection strategies for
    spectrally negative Levy reserve models."""
    if threads is not None:
        import numba

        numba.set_num_threads(threads)


# -- commands -----------------------------------------------------------------


@main.command("eval-scale")
@model_options
@output_options
@click.option("--x-min", type=float, default=0.0, show_default=True)
@click.option("--x-max", type=float, default=5.0, show_default=True)
@click.option("--step", type=float, default=0.5, show_default=True)
@click.option("--certify", is_flag=True, help="Add the transform-identity residual column.")
@_guard
def cmd_eval_scale(config_path, fmt, output, precision, x_min, x_max, step, certify, **kw):
    """Tabulate w, w', z, zbar, h and g on a grid."""
    raw, model, costs = _load(config_path, _opts(kw))
    scale = ScaleSet(model, costs.q)
    if step <= 0:
        raise ConfigError(f"step must be positive, got {step}")
    xs = np.arange(x_min, x_max + step / 2.0, step)
    residual = scale.laplace_identity_check(scale.phi_q_cached + 1.0) if certify else None
    rows = []
    for x in xs:
        x = float(x)
        pos = max(x, 1e-12)
        row = dict(
            x=x,
            W=float(scale.w(x)),
            Wp=float(scale.w_prime(pos)),
            Z=float(scale.z(x)),
            Zbar=float(scale.zbar(x)),
            H=float(scale.h_func(pos)),
            G=float(scale.g_func(costs.phi, pos)),
        )
        if certify:
            row["residual"] = residual
        rows.append(row)
    cols = ["x", "W", "Wp", "Z", "Zbar", "H", "G"] + (["residual"] if certify else [])
    emit_table(rows, cols, fmt, precision, output)


def _parse_sweep(spec: str):
    try:
        key, _, rng = spec.partition("=")
        lo, hi, step = (float(p) for p in rng.split(":"))
    except ValueError as exc:
        raise ConfigError(f"bad sweep spec {spec!r}; expected key=lo:hi:step") from exc
    key = key.strip().lower()
    if key not in ("c", "phi"):
        raise ConfigError(f"sweep key must be 'c' or 'phi', got {key!r}")
    if step <= 0 or hi < lo:
        raise ConfigError(f"bad sweep range in {spec!r}")
    n = int(round((hi - lo) / step)) + 1
    return key, [round(lo + i * step, 12) for i in range(n)]


@main.command("optimize")
@model_options
@output_options
@click.option("--sweep", default=None, help="Sweep one cost, e.g. c=0.01:0.20:0.01.")
@_guard
def cmd_optimize(config_path, fmt, output, precision, sweep, **kw):
    """Locate the optimal impulse pair; optionally sweep a cost parameter."""
    raw, model, costs = _load(config_path, _opts(kw))
    scale = ScaleSet(model, costs.q)
    if sweep is None:
        rep = optimize(scale, costs)
        rows = [
            dict(
                z1=rep.strategy.z1,
                z2=rep.strategy.z2,
                xi=rep.xi_value,
                foc_r1=rep.foc_residuals[0],
                foc_r2=rep.foc_residuals[1],
                hessian=rep.hessian_check,
                search_bound=rep.search_bound_z0,
            )
        ]
        emit_table(rows, list(rows[0].keys()), fmt, precision, output)
        return
    key, values = _parse_sweep(sweep)
    rows = []
    for v in values:
        cs = Costs(q=costs.q, c=v, phi=costs.phi) if key == "c" else Costs(
            q=costs.q, c=costs.c, phi=v
        )
        rep = optimize(scale, cs)
        rows.append({key: v, "z1": rep.strategy.z1, "z2": rep.strategy.z2})
    emit_table(rows, [key, "z1", "z2"], fmt, precision, output)


@main.command("tables")
@model_options
@output_options
@click.option("--dir", "out_dir", type=click.Path(), default=".", show_default=True,
              help="Directory receiving table1.csv and table2.csv.")
@_guard
def cmd_tables(config_path, fmt, output, precision, out_dir, **kw):
    """Reproduce both benchmark sweeps (transaction cost and injection cost)."""
    import pathlib

    raw, model, costs = _load(config_path, _opts(kw))
    scale = ScaleSet(model, costs.q)
    outputs = []
    for name, key, values, fixed in (
        ("table1", "c", [round(0.01 * i, 12) for i in range(1, 21)], dict(phi=1.05)),
        ("table2", "phi", [round(1.0 + 0.01 * i, 12) for i in range(1, 21)], dict(c=0.1)),
    ):
        rows = []
        for v in values:
            cs = Costs(
                q=costs.q,
                c=v if key == "c" else fixed["c"],
                phi=v if key == "phi" else fixed["phi"],
            )
            rep = optimize(scale, cs)
            rows.append({key: v, "z1": rep.strategy.z1, "z2": rep.strategy.z2})
        path = str(pathlib.Path(out_dir) / f"{name}.csv")
        emit_table(rows, [key, "z1", "z2"], "csv", precision, path)
        outputs.append(path)
    click.echo("wrote " + " and ".join(outputs))


@main.command("value")
@model_options
@output_options
@click.option("--z1", type=float, default=None, help="Reset level (default: optimize).")
@click.option("--z2", type=float, default=None, help="Trigger level (default: optimize).")
@click.option("--x-min", type=float, default=0.0, show_default=True)
@click.option("--x-max", type=float, default=4.0, show_default=True)
@click.option("--step", type=float, default=0.01, show_default=True)
@click.option("--with-mc", is_flag=True, help="Add simulation columns for comparison.")
@click.option("--mc-paths", type=int, default=20_000, show_default=True)
@click.option("--mc-dt", type=float, default=1e-3, show_default=True)
@click.option("--mc-horizon", type=float, default=200.0, show_default=True)
@click.option("--seed", type=int, default=20240811, show_default=True)
@_guard
def cmd_value(config_path, fmt, output, precision, z1, z2, x_min, x_max, step,
              with_mc, mc_paths, mc_dt, mc_horizon, seed, **kw):
    """Tabulate the value function and its dividend/injection components."""
    raw, model, costs = _load(config_path, _opts(kw))
    scale = ScaleSet(model, costs.q)
    if (z1 is None) != (z2 is None):
        raise ConfigError("provide both --z1 and --z2 or neither")
    if z1 is None:
        strategy = optimize(scale, costs).strategy
    else:
        try:
            require_feasible(costs, z1, z2)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        strategy = Strategy(z1, z2)
    xs = np.arange(x_min, x_max + step / 2.0, step)
    rows = []
    for x in xs:
        vr = value_function(scale, costs, strategy, float(x))
        row = dict(x=float(x), V=vr.value, f=vr.dividends_part, g=vr.injections_part)
        rows.append(row)
    cols = ["x", "V", "f", "g"]
    if with_mc:
        cfg = SimConfig(dt=mc_dt, horizon=mc_horizon, n_paths=mc_paths, seed=seed)
        plain = Strategy(strategy.z1, strategy.z2)
        for row in rows:
            est = estimate_value(model, costs, plain, row["x"], cfg)
            row["mc"] = est.mean
            row["mc_stderr"] = est.stderr
        cols += ["mc", "mc_stderr"]
    emit_table(rows, cols, fmt, precision, output)


@main.command("xi-surface")
@model_options
@output_options
@click.option("--z1-max", type=float, default=None, help="Default: search bound.")
@click.option("--z2-max", type=float, default=None, help="Default: search bound.")
@click.option("--n", type=int, default=60, show_default=True, help="Grid points per axis.")
@click.option("--g-curve", is_flag=True, help="Emit the convexity curve instead.")
@click.option("--x-max", type=float, default=None, help="G-curve upper limit.")
@click.option("--step", type=float, default=0.01, show_default=True, help="G-curve step.")
@_guard
def cmd_xi_surface(config_path, fmt, output, precision, z1_max, z2_max, n, g_curve,
                   x_max, step, **kw):
    """Emit the payout surface over the feasible triangle (or the G curve)."""
    raw, model, costs = _load(config_path, _opts(kw))
    scale = ScaleSet(model, costs.q)
    rep = optimize(scale, costs)
    if g_curve:
        hi = x_max if x_max is not None else rep.strategy.z2 + 20.0
        xs = np.arange(max(step, 1e-6), hi + step / 2.0, step)
        rows = [dict(x=float(x), G=float(scale.g_func(costs.phi, float(x)))) for x in xs]
        emit_table(rows, ["x", "G"], fmt, precision, output)
        return
    hi1 = z1_max if z1_max is not None else rep.strategy.z1 * 4.0 + 0.5
    hi2 = z2_max if z2_max is not None else rep.strategy.z2 * 2.0
    z1s = np.linspace(0.0, hi1, n)
    z2s = np.linspace(costs.c, hi2, n)
    rows = []
    best = (-math.inf, -1)
    for a in z1s:
        for b in z2s:
            if b < a + costs.c:
                continue
            val = float(xi(scale, costs, float(a), float(b)))
            rows.append(dict(z1=float(a), z2=float(b), xi=val, is_max=0))
            if val > best[0]:
                best = (val, len(rows) - 1)
    if best[1] >= 0:
        rows[best[1]]["is_max"] = 1
    emit_table(rows, ["z1", "z2", "xi", "is_max"], fmt, precision, output)


@main.command("verify")
@model_options
@click.option("--z1", type=float, default=None, help="Reset level (default: optimize).")
@click.option("--z2", type=float, default=None, help="Trigger level (default: optimize).")
@click.option("--x-min", type=float, default=0.01, show_default=True)
@click.option("--x-max", type=float, default=None, help="Default: 3 * trigger.")
@click.option("--step", type=float, default=0.01, show_default=True)
@click.option("--output", type=click.Path(), default=None)
@_guard
def cmd_verify(config_path, z1, z2, x_min, x_max, step, output, **kw):
    """Check the optimality certificate; exit 0 only when every part holds."""
    raw, model, costs = _load(config_path, _opts(kw))
    scale = ScaleSet(model, costs.q)
    if (z1 is None) != (z2 is None):
        raise ConfigError("provide both --z1 and --z2 or neither")
    if z1 is None:
        strategy = optimize(scale, costs).strategy
    else:
        try:
            require_feasible(costs, z1, z2)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        strategy = Strategy(z1, z2)
    report = check_hjb(scale, costs, strategy, GridSpec(x_min=x_min, x_max=x_max, step=step))
    payload = dict(strategy=dict(z1=strategy.z1, z2=strategy.z2), **report.as_dict())
    a0 = lemma45_threshold(scale, costs)
    payload["slope_threshold"] = a0
    text = json.dumps(payload, indent=2, default=float)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)
    if not report.passed:
        sys.exit(EXIT_VERIFY)


@main.command("simulate")
@model_options
@output_options
@click.option("--z1", type=float, default=None, help="Reset level (default: optimize).")
@click.option("--z2", type=float, default=None, help="Trigger level (default: optimize).")
@click.option("--x0", type=float, multiple=True, default=(1.0,), show_default=True)
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--horizon", type=float, default=200.0, show_default=True)
@click.option("--paths", type=int, default=20_000, show_default=True)
@click.option("--seed", type=int, default=20240811, show_default=True)
@click.option("--bridge/--no-bridge", default=True, show_default=True)
@click.option("--block-max", type=float, default=0.05, show_default=True)
@click.option("--exit-barrier", type=float, default=None,
              help="Estimate the first-passage transform to this level instead.")
@_guard
def cmd_simulate(config_path, fmt, output, precision, z1, z2, x0, dt, horizon, paths,
                 seed, bridge, block_max, exit_barrier, **kw):
    """Monte Carlo estimates of the controlled-reserve value (or exit transform)."""
    raw, model, costs = _load(config_path, _opts(kw))
    cfg = SimConfig(dt=dt, horizon=horizon, n_paths=paths, seed=seed,
                    bridge_correction=bridge, block_time_max=block_max)
    rows = []
    if exit_barrier is not None:
        for x in x0:
            if not 0.0 <= x <= exit_barrier:
                raise ConfigError(f"need 0 <= x0 <= barrier, got x0={x}")
            est = estimate_exit_laplace(model, costs.q, cfg, x, exit_barrier)
            rows.append(dict(x0=x, **est.as_dict()))
    else:
        if (z1 is None) != (z2 is None):
            raise ConfigError("provide both --z1 and --z2 or neither")
        if z1 is None:
            strategy = optimize(ScaleSet(model, costs.q), costs).strategy
            strategy = Strategy(strategy.z1, strategy.z2)
        else:
            try:
                require_feasible(costs, z1, z2)
            except DomainError as exc:
                raise ConfigError(str(exc)) from exc
            strategy = Strategy(z1, z2)
        for x in x0:
            if x < 0:
                raise ConfigError(f"x0 must be nonnegative, got {x}")
            est = estimate_value(model, costs, strategy, x, cfg)
            rows.append(dict(x0=x, z1=strategy.z1, z2=strategy.z2, **est.as_dict()))
    cols = list(rows[0].keys())
    emit_table(rows, cols, fmt, precision, output)


if __name__ == "__main__":
    main()
