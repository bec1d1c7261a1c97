"""Command line front end.

Every subcommand writes plain CSV/JSON artifacts plus a ``*_meta.json``
sidecar recording the command, package version, and resolved parameters
(never timestamps, so identical invocations produce identical bytes).
Outputs land in --outdir, the GKENSO_OUTDIR environment variable, or the
working directory, and are written atomically (temp file then rename).

Parameters may come from a flat ``key=value`` config file; command line
flags take precedence and unknown config keys are rejected.

Exit codes: 0 success, 2 bad configuration or usage, 3 numerical failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .bifurcation import (
    _canonical_family,
    compute_stable_cycle,
    compute_upo,
    continue_branch,
    detect_hopf,
    detect_homoclinic,
    detect_sno,
    emit_diagram,
)
from .dde import const_history, extract_periodic_orbit, integrate_dde
from .errors import ConfigError, GkensoError
from .galerkin import assemble_linear, gk_equilibrium, integrate_gk, suarez_schopf_perturbed
from .reduction import build_reduced, closure_json, reduced_factory
from .spectral import eigen_sweep
from .stochastic import (
    RNG_NAME,
    PsdEstimate,
    StochasticModel,
    band_filter,
    band_peak_ratio,
    simulate_tsp,
    to_physical_years,
    welch_psd,
)

OUTDIR_ENV = "GKENSO_OUTDIR"

_REQUIRED = object()

# dest -> (kind, default) per command; drives config merging and metadata
_PARAM_TABLE = {
    "spectrum": {
        "alpha": ("float", 0.75),
        "n": ("int", 6),
        "tau_range": ("range", (1.3, 2.5, 0.05)),
        "pairs": ("int", 0),
        "find_tauc": ("bool", False),
        "out": ("str", "spectrum"),
    },
    "reduce": {
        "alpha": ("float", 0.75),
        "n": ("int", 6),
        "tau": ("float", _REQUIRED),
        "out": ("str", "reduce"),
    },
    "diagram": {
        "alpha": ("float", 0.75),
        "n": ("int", 6),
        "tau_range": ("range", (1.56, 1.80, 0.01)),
        "family": ("str", None),
        "workers": ("int", 0),
        "out": ("str", "diagram"),
    },
    "orbit": {
        "alpha": ("float", 0.75),
        "n": ("int", 6),
        "tau": ("float", _REQUIRED),
        "family": ("str", "stable_cycle"),
        "samples": ("int", 256),
        "out": ("str", "orbit"),
    },
    "dde": {
        "alpha": ("float", 0.75),
        "tau": ("float", 1.7),
        "history": ("float", 0.1),
        "t_end": ("float", 200.0),
        "dt": ("float", 5e-4),
        "stride": ("int", 10),
        "gk": ("int", 0),
        "orbit": ("bool", False),
        "transient": ("float", 50.0),
        "out": ("str", "dde"),
    },
    "tsp": {
        "alpha": ("float", 0.75),
        "sigma": ("float", 0.2),
        "tau0": ("float", 1.45),
        "tau1": ("float", 1.65),
        "epsilon": ("float", 8.4e-4),
        "schedule": ("choice:linear,triangle", "linear"),
        "stratonovich": ("bool", False),
        "history": ("float", None),
        "dt": ("float", 2e-3),
        "steps": ("int", 1_000_000),
        "seed": ("int", 0),
        "stride": ("int", 1),
        "ensemble": ("int", 1),
        "out": ("str", "tsp"),
    },
    "psd": {
        "segment_years": ("float", 120.0),
        "band": ("band", None),
        "out": ("str", "psd"),
    },
}


# ---------------------------------------------------------------------------
# parameter conversion and config merging


def _as_float(name: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"parameter '{name}': not a number: {raw!r}") from None


def _as_int(name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"parameter '{name}': not an integer: {raw!r}") from None


def _as_bool(name: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"parameter '{name}': not a boolean: {raw!r}")


def _as_range(name: str, raw: str) -> tuple[float, float, float]:
    parts = raw.split(":")
    if len(parts) != 3:
        raise ConfigError(f"parameter '{name}': expected lo:hi:step, got {raw!r}")
    lo, hi, step = (_as_float(name, p) for p in parts)
    if step <= 0.0:
        raise ConfigError(f"parameter '{name}': step must be positive")
    if hi < lo:
        raise ConfigError(f"parameter '{name}': range is empty (hi < lo)")
    return lo, hi, step


def _as_band(name: str, raw: str) -> tuple[float, float]:
    parts = raw.split(":")
    if len(parts) != 2:
        raise ConfigError(f"parameter '{name}': expected lo:hi, got {raw!r}")
    lo, hi = (_as_float(name, p) for p in parts)
    if not 0.0 < lo < hi:
        raise ConfigError(f"parameter '{name}': need 0 < lo < hi")
    return lo, hi


def _convert(kind: str, name: str, raw: str):
    if kind == "float":
        return _as_float(name, raw)
    if kind == "int":
        return _as_int(name, raw)
    if kind == "bool":
        return _as_bool(name, raw)
    if kind == "str":
        return raw
    if kind == "range":
        return _as_range(name, raw)
    if kind == "band":
        return _as_band(name, raw)
    if kind.startswith("choice:"):
        allowed = kind.split(":", 1)[1].split(",")
        if raw not in allowed:
            raise ConfigError(f"parameter '{name}': must be one of {allowed}, got {raw!r}")
        return raw
    raise AssertionError(f"unknown parameter kind {kind}")


def _load_config(path: str) -> dict[str, str]:
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    values: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve_params(args: argparse.Namespace) -> dict:
    """Merge CLI flags over config file over defaults; reject unknown keys."""
    table = _PARAM_TABLE[args.command]
    params: dict = {}
    for dest, (kind, default) in table.items():
        raw = getattr(args, dest, None)
        params[dest] = _convert(kind, dest, raw) if raw is not None else None
    if args.config:
        for key, raw in _load_config(args.config).items():
            if key not in table:
                raise ConfigError(f"unknown config key '{key}' for command {args.command}")
            if params[key] is None:
                params[key] = _convert(table[key][0], key, raw)
    for dest, (kind, default) in table.items():
        if params[dest] is None:
            if default is _REQUIRED:
                raise ConfigError(f"missing required parameter '{dest}'")
            params[dest] = default
    params["outdir"] = args.outdir or os.environ.get(OUTDIR_ENV) or "."
    if getattr(args, "inputs", None) is not None:
        params["inputs"] = list(args.inputs)
    return params


# ---------------------------------------------------------------------------
# artifact writers


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_safe(value):
    if isinstance(value, (tuple, list)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(path: str, text: str) -> None:
    _atomic_write(path, text)
    print(f"wrote {path}")


def _write_meta(params: dict, command: str, rng: str | None = None) -> None:
    parameters = {
        k: _json_safe(v) for k, v in params.items() if k not in ("out", "outdir")
    }
    meta = {
        "command": command,
        "version": __version__,
        "parameters": parameters,
        "rng": rng,
    }
    _emit(_path(params, "_meta.json"), _json_text(meta))


def _path(params: dict, suffix: str) -> str:
    os.makedirs(params["outdir"], exist_ok=True)
    return os.path.join(params["outdir"], params["out"] + suffix)


def _range_grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_spectrum(params: dict) -> None:
    lo, hi, step = params["tau_range"]
    taus = _range_grid(lo, hi, step)
    n = params["n"]
    pairs = params["pairs"] or min(10, max(1, n // 2))
    if 2 * pairs > n:
        raise ConfigError(f"cannot track {pairs} pairs with only {n} modes")
    sweep = eigen_sweep(params["alpha"], n, taus, n_pairs=pairs)
    rows = [
        (tau, j + 1, lam.real, lam.imag)
        for i, tau in enumerate(sweep.taus)
        for j, lam in enumerate(sweep.eigvals[i])
    ]
    _emit(
        _path(params, ".csv"),
        _csv_text(("tau", "j", "re_lambda", "im_lambda"), rows),
    )
    if params["find_tauc"]:
        hopf = detect_hopf(params["alpha"], N=n)
        _emit(
            _path(params, "_tauc.json"),
            _json_text({"tau_c": hopf.tau_c, "l1": hopf.l1, "type": hopf.kind}),
        )
    _write_meta(params, "spectrum")


def _cmd_reduce(params: dict) -> None:
    system = assemble_linear(
        suarez_schopf_perturbed(params["alpha"], params["tau"]), params["n"]
    )
    _emit(_path(params, ".json"), _json_text(closure_json(build_reduced(system))))
    _write_meta(params, "reduce")


def _cmd_diagram(params: dict) -> None:
    lo, hi, step = params["tau_range"]
    if not lo < hi:
        raise ConfigError("diagram needs a tau range with more than one point")
    factory = reduced_factory(params["alpha"], params["n"])
    workers = params["workers"] or None
    branches = []
    if params["family"]:
        family = _canonical_family(params["family"])
        branches.append(continue_branch(factory, (lo, hi), family, step, workers=workers))
    else:
        hopf = detect_hopf(params["alpha"], N=params["n"])
        tau_sharp = detect_homoclinic(factory)
        tau_star = detect_sno(factory)
        _emit(
            _path(params, "_detect.json"),
            _json_text(
                {
                    "tau_c": hopf.tau_c,
                    "l1": hopf.l1,
                    "type": hopf.kind,
                    "tau_sharp": tau_sharp,
                    "tau_star": tau_star,
                }
            ),
        )
        spans = {
            "stable_cycle": (max(lo, tau_star + step), hi),
            "upo_outer": (max(lo, tau_star + step), min(hi, tau_sharp - step)),
            "upo_inner_plus": (max(lo, tau_sharp + step), min(hi, hopf.tau_c - step)),
            "upo_inner_minus": (max(lo, tau_sharp + step), min(hi, hopf.tau_c - step)),
        }
        for family, (flo, fhi) in spans.items():
            if flo < fhi:
                branches.append(
                    continue_branch(factory, (flo, fhi), family, step, workers=workers)
                )
    path = _path(params, ".csv")
    emit_diagram(branches, path)
    print(f"wrote {path}")
    _write_meta(params, "diagram")


def _cmd_orbit(params: dict) -> None:
    family = _canonical_family(params["family"])
    reduced = reduced_factory(params["alpha"], params["n"])(params["tau"])
    if family == "stable_cycle":
        orbit = compute_stable_cycle(reduced)
    else:
        orbit = compute_upo(reduced, family=family)
    k = params["samples"]
    if k < 2:
        raise ConfigError("samples must be at least 2")
    grid = np.linspace(0.0, orbit.t[-1], k)
    values = np.interp(grid, orbit.t, orbit.value)
    _emit(
        _path(params, ".json"),
        _json_text(
            {
                "family": family,
                "tau": params["tau"],
                "period": orbit.period,
                "period_yr": float(to_physical_years(orbit.period)),
                "amplitude": orbit.amplitude,
                "stability": orbit.stability,
                "samples": [[float(t), float(x)] for t, x in zip(grid, values)],
            }
        ),
    )
    _write_meta(params, "orbit")


def _cmd_dde(params: dict) -> None:
    # compute every artifact before writing any, so a failed extraction
    # does not leave a partial artifact set behind
    spec = suarez_schopf_perturbed(params["alpha"], params["tau"])
    series = integrate_dde(
        spec,
        const_history(params["history"]),
        params["t_end"],
        params["dt"],
        stride=params["stride"],
    )
    gk_text = None
    if params["gk"]:
        system = assemble_linear(spec, params["gk"])
        traj = integrate_gk(
            system,
            gk_equilibrium(system, params["history"]),
            params["t_end"],
            params["dt"],
            stride=params["stride"],
        )
        header = ["t", *(f"y{j}" for j in range(system.N)), "xN"]
        rows = ((t, *y, x) for t, y, x in zip(traj.t, traj.y, traj.x))
        gk_text = _csv_text(header, rows)
    orbit_text = None
    if params["orbit"]:
        orbit = extract_periodic_orbit(series, transient_skip=params["transient"])
        orbit_text = _json_text(
            {
                "period": orbit.period,
                "period_yr": float(to_physical_years(orbit.period)),
                "amplitude": orbit.amplitude,
            }
        )
    _emit(_path(params, ".csv"), _csv_text(("t", "x"), zip(series.t, series.x)))
    if gk_text is not None:
        _emit(_path(params, "_gk.csv"), gk_text)
    if orbit_text is not None:
        _emit(_path(params, "_orbit.json"), orbit_text)
    _write_meta(params, "dde")


def _cmd_tsp(params: dict) -> None:
    model = StochasticModel(
        alpha=params["alpha"],
        sigma=params["sigma"],
        tau0=params["tau0"],
        tau1=params["tau1"],
        epsilon=params["epsilon"],
        schedule=params["schedule"],
        stratonovich=params["stratonovich"],
    )
    ensemble = params["ensemble"]
    if ensemble < 1:
        raise ConfigError("ensemble must be at least 1")
    seeds = [params["seed"] + k for k in range(ensemble)]
    for seed in seeds:
        run = simulate_tsp(
            model,
            history=params["history"],
            dt=params["dt"],
            steps=params["steps"],
            seed=seed,
            stride=params["stride"],
        )
        suffix = ".csv" if ensemble == 1 else f"_s{seed}.csv"
        _emit(
            _path(params, suffix),
            _csv_text(("t", "theta", "tau"), zip(run.times, run.theta, run.tau_t)),
        )
    params = dict(params)
    params["seeds"] = seeds
    _write_meta(params, "tsp", rng=RNG_NAME)


def _read_tsp_csv(path: str):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "t" not in reader.fieldnames or "theta" not in reader.fieldnames:
            raise ConfigError(f"{path}: expected CSV with 't' and 'theta' columns")
        t, theta = [], []
        for row in reader:
            t.append(float(row["t"]))
            theta.append(float(row["theta"]))
    if len(t) < 3:
        raise ConfigError(f"{path}: too few samples")
    return np.asarray(t), np.asarray(theta)


def _cmd_psd(params: dict) -> None:
    inputs = params.get("inputs") or []
    if not inputs:
        raise ConfigError("psd needs at least one input CSV")
    series, times, dt = [], [], None
    for path in inputs:
        t, theta = _read_tsp_csv(path)
        step = float(t[1] - t[0])
        if dt is None:
            dt = step
        elif abs(step - dt) > 1e-9 * dt:
            raise ConfigError("input series have mismatched sampling steps")
        series.append(theta)
        times.append(t)
    psds = [welch_psd(x, dt, segment_years=params["segment_years"]) for x in series]
    power = np.median(np.stack([p.power for p in psds]), axis=0)
    freq = psds[0].frequency
    _emit(
        _path(params, ".csv"),
        _csv_text(("period_yr", "power"), zip(1.0 / freq, power)),
    )
    if params["band"]:
        peak = band_peak_ratio(PsdEstimate(frequency=freq, power=power), params["band"])
        filtered = band_filter(series[0], dt, params["band"])
        _emit(
            _path(params, "_band.csv"),
            _csv_text(("t", "theta"), zip(times[0], filtered)),
        )
        _emit(
            _path(params, "_band.json"),
            _json_text(
                {
                    "period_yr": peak.period_yr,
                    "peak_power": peak.peak_power,
                    "flank_median": peak.flank_median,
                    "ratio": peak.ratio,
                }
            ),
        )
    _write_meta(params, "psd")


_HANDLERS = {
    "spectrum": _cmd_spectrum,
    "reduce": _cmd_reduce,
    "diagram": _cmd_diagram,
    "orbit": _cmd_orbit,
    "dde": _cmd_dde,
    "tsp": _cmd_tsp,
    "psd": _cmd_psd,
}


# ---------------------------------------------------------------------------
# parser


def _add_options(sub: argparse.ArgumentParser, command: str) -> None:
    flags = {"find_tauc", "orbit", "stratonovich"}
    for dest, (kind, default) in _PARAM_TABLE[command].items():
        option = "--" + dest.replace("_", "-")
        if dest in flags:
            sub.add_argument(option, dest=dest, action="store_const", const="true")
        else:
            sub.add_argument(option, dest=dest, metavar=kind.split(":")[0].upper())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkenso",
        description="Galerkin delay-oscillator toolkit: spectra, reductions, "
        "bifurcation diagrams, orbits, and stochastic paths.",
    )
    parser.add_argument("--version", action="version", version=f"gkenso {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="flat key=value parameter file")
    common.add_argument(
        "--outdir", metavar="DIR", help=f"output directory (default ${OUTDIR_ENV} or '.')"
    )
    subs = parser.add_subparsers(dest="command", required=True)

    helps = {
        "spectrum": "eigenvalue sweep over the delay, optionally locating the critical delay",
        "reduce": "emit the two-mode closure (eigenvalues, gains, polynomial) as JSON",
        "diagram": "bifurcation diagram: branch families plus critical-delay detections",
        "orbit": "settle one periodic orbit of the reduced system and dump it as JSON",
        "dde": "integrate the delay model directly, optionally with a Galerkin twin",
        "tsp": "stochastic tipping path(s) with a drifting delay",
        "psd": "Welch spectra of tipping paths, with optional band isolation",
    }
    for command in _PARAM_TABLE:
        sub = subs.add_parser(command, parents=[common], help=helps[command])
        _add_options(sub, command)
        if command == "psd":
            sub.add_argument("inputs", nargs="+", metavar="CSV")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        params = _resolve_params(args)
        _HANDLERS[args.command](params)
    except ConfigError as exc:
        print(f"gkenso: configuration error: {exc}", file=sys.stderr)
        return 2
    except GkensoError as exc:
        print(f"gkenso: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"gkenso: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"gkenso: i/o error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
