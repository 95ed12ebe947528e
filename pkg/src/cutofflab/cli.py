"""Command-line entry point: ``cutofflab <command> [options]``.

Options come from three layers, later ones winning: built-in defaults, a flat
``key = value`` config file (``--config``), then flags. ``CUTOFFLAB_SEED``
supplies the seed when neither layer sets it. Every command writes its outputs
plus ``manifest.json`` (config echo, seed, version, wall clock, sha256 of each
output) into ``--out`` or ``./out/<timestamp>-<digest>``.

Exit codes: 0 success, 1 failed invariant (``verify``, ``factorize``),
2 bad configuration or usage.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .errors import ConfigError, CutoffLabError

__all__ = ["main", "run", "build_parser", "load_config"]

COMMANDS = ("simulate", "sample-stationary", "sweep", "bounds", "verify", "factorize")

DEFAULTS = {
    "family": "ou",
    "rho": 1.0,
    "beta": 2.0,
    "gamma": 1.0,
    "d": 10,
    "dims": None,
    "c": 1.0,
    "eps": [0.2],
    "kinds": ["w2", "tv"],
    "dt": None,
    "particles": 10_000,
    "seed": None,
    "threads": None,
    "out": None,
    "mode": "analytic",
    "eta": None,
    "svg": True,
    "t": 1.0,
    "times": None,
    "x0": None,
    "scheme": "splitting",
    "temperature": 1.0,
    "fast": False,
}


# value parsers ---------------------------------------------------------------------

def _float_list(text) -> list[float]:
    if isinstance(text, list):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text) -> list[int]:
    vals = _float_list(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _str_list(text) -> list[str]:
    if isinstance(text, list):
        return text
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _on_off(text) -> bool:
    key = str(text).strip().lower()
    if key in ("on", "true", "yes", "1"):
        return True
    if key in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _mode(text) -> str:
    key = str(text).strip().lower()
    if key not in ("analytic", "mc"):
        raise argparse.ArgumentTypeError("mode must be analytic or mc")
    return key


def _positive_int(text) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from exc
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return v


CONVERTERS = {
    "family": str, "rho": float, "beta": float, "gamma": float, "d": _positive_int, "dims": _int_list,
    "c": float, "eps": _float_list, "kinds": _str_list, "dt": float, "particles": _positive_int, "seed": _seed,
    "threads": _positive_int, "out": str, "mode": _mode, "eta": float, "svg": _on_off, "t": float,
    "times": _float_list, "x0": _float_list, "scheme": str, "temperature": float, "fast": _on_off,
}


def load_config(path) -> dict:
    """Read a flat ``key = value`` file; a leading ``[section]`` header is optional."""
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[cutofflab]\n" + text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    out = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            key = key.replace("-", "_")
            if key in CONVERTERS:
                try:
                    out[key] = CONVERTERS[key](raw)
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise ConfigError(f"config key {key}: {exc}") from exc
            else:
                raise ConfigError(f"unknown config key {key!r}")
    return out


# parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and run options")
    g.add_argument("--config", help="flat key = value file; flags override it")
    g.add_argument("--family", type=str, help="ou, quadratic, quartic or dyson")
    g.add_argument("--rho", type=float, help="confinement strength (= spectral gap)")
    g.add_argument("--beta", type=float, help="Dyson repulsion")
    g.add_argument("--gamma", type=float, help="quadratic/quartic pair coupling")
    g.add_argument("--d", type=_positive_int, help="dimension")
    g.add_argument("--dims", type=_int_list, help="comma-separated dimensions (sweep)")
    g.add_argument("--c", type=float, help="initial ball radius factor: r = c sqrt(d)")
    g.add_argument("--eps", type=_float_list, help="window offsets; each e is run at -|e| and +|e|")
    g.add_argument("--kinds", type=_str_list, help="w2, tv, kl, fisher, chi2")
    g.add_argument("--dt", type=float, help="time step (default 1e-3 / rho)")
    g.add_argument("--particles", type=_positive_int, help="ensemble size")
    g.add_argument("--seed", type=_seed, help="root seed (env CUTOFFLAB_SEED otherwise, then 0)")
    g.add_argument("--threads", type=_positive_int, help="worker threads (results do not depend on it)")
    g.add_argument("--out", type=str, help="output directory")
    g.add_argument("--mode", type=_mode, help="analytic or mc")
    g.add_argument("--eta", type=float, help="TV threshold for the mixing time (bounds)")
    g.add_argument("--svg", type=_on_off, help="write SVG plots next to CSVs (on/off)")
    g.add_argument("--t", type=float, help="end time (simulate)")
    g.add_argument("--times", type=_float_list, help="comma-separated time grid (bounds)")
    g.add_argument("--x0", type=_float_list, help="start state, comma-separated (simulate, bounds)")
    g.add_argument("--scheme", type=str, help="splitting or em")
    g.add_argument("--temperature", type=float, help="noise level sigma^2 for sweeps")
    parser = argparse.ArgumentParser(prog="cutofflab", description="Cutoff experiments for rigid Langevin diffusions.")
    parser.add_argument("--version", action="version", version=f"cutofflab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    sub.add_parser("simulate", parents=[common], help="simulate an ensemble to time --t")
    sub.add_parser("sample-stationary", parents=[common], help="draw from the invariant law")
    sub.add_parser("sweep", parents=[common], help="distance profile across dimensions")
    sub.add_parser("bounds", parents=[common], help="W2 bound sandwich (and mixing time with --eta)")
    v = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    v.add_argument("--fast", action="store_const", const=True, help="reduced Monte-Carlo sizes")
    sub.add_parser("factorize", parents=[common], help="Gaussian factor check of the invariant law")
    for p in sub.choices.values():
        p.set_defaults(**{k: None for k in DEFAULTS if k != "fast"})
    return parser


def _effective(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(load_config(args.config))
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["seed"] is None:
        env = os.environ.get("CUTOFFLAB_SEED")
        try:
            cfg["seed"] = _seed(env) if env not in (None, "") else 0
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(f"CUTOFFLAB_SEED: {exc}") from exc
    return cfg


# outputs --------------------------------------------------------------------------------

class _Run:
    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.started = time.time()
        echo = {k: v for k, v in sorted(cfg.items()) if k not in ("out", "threads")}
        self.config_echo = echo
        self.digest = hashlib.sha256(json.dumps([command, echo], sort_keys=True).encode()).hexdigest()
        if cfg["out"]:
            self.dir = Path(cfg["out"])
        else:
            stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%SZ")
            self.dir = Path("out") / f"{stamp}-{self.digest[:10]}"
        self.outputs: dict[str, str] = {}

    def write(self, name: str, text: str) -> Path:
        # created on first write so failed runs leave nothing behind
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        data = text.encode()
        path.write_bytes(data)
        self.outputs[name] = hashlib.sha256(data).hexdigest()
        return path

    def manifest(self) -> None:
        from .rng import RNG_RULE

        doc = {
            "command": self.command,
            "config": self.config_echo,
            "config_digest": self.digest,
            "seed": self.cfg["seed"],
            "version": __version__,
            "rng_rule": RNG_RULE,
            "threads": self.cfg["threads"],
            "started_utc": _dt.datetime.fromtimestamp(self.started, _dt.timezone.utc).isoformat(),
            "wall_clock_seconds": round(time.time() - self.started, 3),
            "outputs": dict(sorted(self.outputs.items())),
        }
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _json(obj) -> str:
    import numpy as np

    def plain(v):
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, (np.floating, np.integer, np.bool_)):
            return v.item()
        return str(v)

    return json.dumps(obj, indent=2, sort_keys=True, default=plain) + "\n"


def _model(cfg, d=None):
    from .experiments import build_model

    return build_model(cfg["family"], d or cfg["d"], cfg["rho"], cfg["beta"], cfg["gamma"])


def _sim_config(cfg, model, **kw):
    from .sde import SimConfig

    dt = cfg["dt"] if cfg["dt"] is not None else 1e-3 / model.rho
    return SimConfig.for_model(model, dt=dt, n_particles=cfg["particles"], seed=cfg["seed"],
                               scheme=cfg["scheme"], **kw)


def _x0(cfg, model):
    import numpy as np

    from .sde import default_start

    if cfg["x0"] is None:
        return default_start(model)
    x0 = np.asarray(cfg["x0"], dtype=float)
    if x0.size == 1:
        x0 = np.full(model.d, float(x0[0]))
    if x0.size != model.d:
        raise ConfigError(f"--x0 has {x0.size} entries, expected {model.d}")
    return x0


# commands ------------------------------------------------------------------------------------

def _cmd_simulate(run: _Run) -> int:
    from .sde import simulate

    cfg = run.cfg
    model = _model(cfg)
    ens = simulate(model, _x0(cfg, model), _sim_config(cfg, model, t_end=cfg["t"]), cfg["threads"])
    run.write("ensemble.csv", ens.to_csv())
    x = ens.samples
    run.write("summary.json", _json({"model": model.model_id, "t": ens.time, "n": ens.n,
                                     "mean": x.mean(axis=0), "variance": x.var(axis=0, ddof=1)}))
    print(f"simulated {ens.n} particles of {model.model_id} to t={ens.time:g} -> {run.dir}")
    return 0


def _cmd_sample(run: _Run) -> int:
    from .sde import sample_stationary

    cfg = run.cfg
    model = _model(cfg)
    ens = sample_stationary(model, _sim_config(cfg, model), threads=cfg["threads"])
    run.write("samples.csv", ens.to_csv())
    print(f"drew {ens.n} stationary samples of {model.model_id} -> {run.dir}")
    return 0


def _eps_pm(eps) -> list[float]:
    return sorted({s * abs(float(e)) for e in eps for s in (-1.0, 1.0)})


def _cmd_sweep(run: _Run) -> int:
    from .experiments import cutoff_sweep, profile_svg

    cfg = run.cfg
    dims = cfg["dims"] or [cfg["d"]]
    prof = cutoff_sweep(cfg["family"], cfg["rho"], cfg["c"], dims, _eps_pm(cfg["eps"]), cfg["kinds"], cfg["mode"],
                        beta=cfg["beta"], gamma=cfg["gamma"], temperature=cfg["temperature"],
                        n_particles=cfg["particles"], dt=cfg["dt"], seed=cfg["seed"], threads=cfg["threads"])
    path = run.write("profile.csv", prof.to_csv())
    if cfg["svg"]:
        run.write("profile.svg", profile_svg(prof))
    print(f"{len(prof)} rows -> {path}")
    return 0


def _cmd_bounds(run: _Run) -> int:
    import math

    import numpy as np

    from .bounds import mixing_time_report
    from .experiments import bound_sandwich_report
    from .model import Ball
    from .sde import estimate_mean

    cfg = run.cfg
    model = _model(cfg)
    center = model.exact_mean()
    if center is None:
        center = estimate_mean(model, _sim_config(cfg, model), threads=cfg["threads"]).mean
    radius = cfg["c"] * math.sqrt(model.d)
    if cfg["x0"] is not None:
        x0 = _x0(cfg, model)
    else:
        x0 = center + radius * model.spectral().eigenmap.top_direction()
    times = cfg["times"] or list(np.round(np.linspace(0.0, 3.0, 13) / model.rho, 12))
    tab = bound_sandwich_report(model, x0, times, center=center, n_particles=cfg["particles"], dt=cfg["dt"],
                                seed=cfg["seed"], threads=cfg["threads"])
    path = run.write("sandwich.csv", tab.to_csv())
    print(f"{len(tab)} rows -> {path}")
    if cfg["eta"] is not None:
        mode = "analytic" if cfg["mode"] == "analytic" else "montecarlo"
        rep = mixing_time_report(model, Ball(center, radius), cfg["eta"], mode, n_particles=cfg["particles"],
                                 dt=cfg["dt"], seed=cfg["seed"], threads=cfg["threads"])
        run.write("mixing_time.json", _json(rep.to_dict()))
        print(f"mixing time (eta={cfg['eta']:g}): {rep.value:.6g} [{rep.side.value} bound]")
    return 0


def _cmd_verify(run: _Run) -> int:
    from .verify import run_suite

    cfg = run.cfg
    report = run_suite(fast=bool(cfg["fast"]), seed=cfg["seed"], progress=lambda r: print(r.line(), flush=True))
    run.write("verify.json", report.to_json() + "\n")
    n_bad = sum(not r.passed for r in report.results)
    print(f"{len(report.results) - n_bad}/{len(report.results)} checks passed")
    return 0 if report.passed else 1


def _cmd_factorize(run: _Run) -> int:
    from .experiments import factorization_check

    cfg = run.cfg
    model = _model(cfg)
    rep = factorization_check(model, cfg["particles"], cfg["seed"], threads=cfg["threads"])
    run.write("factorization.json", _json({"model": model.model_id, **rep.to_dict()}))
    print(f"KS p={rep.ks_pvalue:.4f}, max |corr|={rep.max_abs_correlation:.4f} (band {rep.correlation_ci:.4f}): "
          f"{'pass' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else 1


_DISPATCH = {"simulate": _cmd_simulate, "sample-stationary": _cmd_sample, "sweep": _cmd_sweep,
             "bounds": _cmd_bounds, "verify": _cmd_verify, "factorize": _cmd_factorize}


def run(argv=None) -> int:
    """Parse ``argv`` and execute; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    try:
        cfg = _effective(args)
        if cfg["threads"] and "numba" not in sys.modules:
            # must precede the first numba import to take effect
            os.environ["NUMBA_NUM_THREADS"] = str(cfg["threads"])
        r = _Run(args.command, cfg)
        code = _DISPATCH[args.command](r)
        r.manifest()
        return code
    except (CutoffLabError, ValueError, OSError) as exc:
        print(f"cutofflab {args.command}: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
