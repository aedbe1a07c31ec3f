"""Command-line front end.

Exit codes: 0 success, 1 analysis failure (degenerate fit), 2 usage or I/O error.

A ``--config`` JSON may hold the global options (``constants_mode``,
``output``, ``seed``, ``plot``), a ``constants`` object (``m_e_kev``, ``m_n_kev``,
``alpha_em``, ``a_m``, ``seconds_per_day``) and one object per subcommand
keyed by option name. Command-line flags win over the file.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import os
from dataclasses import asdict
from pathlib import Path

import click

from cslxray import __version__
from cslxray.fit import METHODS, DegenerateFitError, FitResult, fit_alpha
from cslxray.limits import (
    CL_MODES,
    LimitAssumptions,
    LimitResult,
    alpha_to_lambda,
    compare_models,
    fu_reference,
)
from cslxray.physics import PAPER_SECONDS_PER_DAY, PhysicalConstants, constants_from_mapping
from cslxray.pseudo import (
    SAMPLING_MODES,
    SimulationConfig,
    default_edges,
    run_trials,
    simulate_spectrum,
    summarize,
    write_trials_csv,
)
from cslxray.spectrum import (
    GERMANIUM,
    GERMANIUM_MOLAR,
    NORMALIZATIONS,
    SpectrumError,
    load_spectrum,
    restrict_range,
    save_spectrum,
)

EXIT_ANALYSIS = 1
EXIT_USAGE = 2

MATERIALS = {"paper": GERMANIUM, "molar": GERMANIUM_MOLAR}
GLOBAL_KEYS = ("constants_mode", "output", "seed", "plot")


class UsageError(click.UsageError):
    pass


class AnalysisFailure(click.ClickException):
    exit_code = EXIT_ANALYSIS


class InputError(click.ClickException):
    exit_code = EXIT_USAGE


def timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = dt.datetime.fromtimestamp(int(epoch), dt.timezone.utc) if epoch else dt.datetime.now(dt.timezone.utc)
    return t.replace(microsecond=0).isoformat()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class State:
    def __init__(self, constants_mode, output, seed, plot, constants, config_path):
        self.constants_mode = constants_mode
        self.output = Path(output) if output else None
        self.seed = seed
        self.plot = plot
        self.constants = constants
        self.config_path = config_path

    def manifest(self, subcommand: str, inputs=(), **resolved) -> dict:
        return {
            "tool": "cslxray",
            "version": __version__,
            "subcommand": subcommand,
            "inputs": [str(p) for p in inputs],
            "config_file": self.config_path,
            "constants_mode": self.constants_mode,
            "constants": self.constants.to_config(),
            "seed": self.seed,
            "resolved": resolved,
            "timestamp": timestamp(),
        }

    def out_dir(self) -> Path:
        d = self.output or Path(".")
        d.mkdir(parents=True, exist_ok=True)
        return d

    def emit(self, name: str, report: dict) -> None:
        text = dumps(report)
        if self.output is not None:
            (self.out_dir() / name).write_text(text, encoding="utf-8")
        click.echo(text, nl=False)


def parse_window(value: str | None) -> tuple[float, float] | None:
    if value is None:
        return None
    try:
        lo, hi = (float(v) for v in str(value).split(":"))
    except ValueError:
        raise UsageError(f"window must look like LO:HI, got {value!r}") from None
    if not lo < hi:
        raise UsageError(f"window lower edge must be below the upper edge, got {value!r}")
    return lo, hi


def read_spectrum(path, exposure, normalization, window):
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such input: {path}")
    try:
        s = load_spectrum(p, exposure=exposure, normalization=normalization)
        if window is not None:
            s = restrict_range(s, *window)
    except SpectrumError as exc:
        raise InputError(f"{path}: {exc}") from None
    return s


def read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such input: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--constants-mode", type=click.Choice(["exact", "paper-compat"]), default="paper-compat",
              show_default=True, help="paper-compat uses 8.6e4 s/day as in the published factor c.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="JSON configuration file.")
@click.option("--constants", "constants_path", type=click.Path(dir_okay=False), default=None,
              help="JSON file overriding physical constants.")
@click.option("--output", type=click.Path(file_okay=False), default=None, help="Directory for reports and plots.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True)
@click.option("--plot", is_flag=True, help="Also write SVG plots.")
@click.version_option(__version__, prog_name="cslxray")
@click.pass_context
def main(ctx, constants_mode, config_path, constants_path, output, seed, plot):
    """Upper limits on the CSL collapse rate from binned X-ray spectra."""
    config = read_json(config_path) if config_path else {}
    params = dict(constants_mode=constants_mode, output=output, seed=seed, plot=plot)
    for key in GLOBAL_KEYS:
        if key in config and ctx.get_parameter_source(key) == click.core.ParameterSource.DEFAULT:
            params[key] = config[key]
    params["constants_mode"] = str(params["constants_mode"]).replace("_", "-")
    if params["constants_mode"] not in ("exact", "paper-compat"):
        raise UsageError(f"bad constants_mode {params['constants_mode']!r}")

    base = PhysicalConstants()
    if params["constants_mode"] == "paper-compat":
        base = PhysicalConstants.paper_compat()
    try:
        constants = constants_from_mapping(config.get("constants", {}), base)
        if constants_path:
            constants = constants_from_mapping(read_json(constants_path), constants)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"constants: {exc}") from None

    ctx.default_map = {k: v for k, v in config.items() if isinstance(v, dict) and k != "constants"}
    ctx.obj = State(params["constants_mode"], params["output"], int(params["seed"]), bool(params["plot"]),
                    constants, config_path)


def _mode(state: State) -> str:
    return state.constants_mode.replace("-", "_")


spectrum_options = [
    click.argument("spectrum", type=click.Path(dir_okay=False)),
    click.option("--exposure", type=float, default=None, help="kg day; defaults to the sidecar metadata."),
    click.option("--normalization", type=click.Choice(NORMALIZATIONS), default=None),
    click.option("--window", default="4.5:48.5", show_default=True, help="Fit window LO:HI in keV."),
]


def with_spectrum_options(f):
    for opt in reversed(spectrum_options):
        f = opt(f)
    return f


def run_fits(state: State, spectrum, exposure, normalization, window, method):
    s = read_spectrum(spectrum, exposure, normalization, parse_window(window))
    methods = METHODS if method == "both" else (method,)
    fits = {}
    for m in methods:
        try:
            fits[m] = fit_alpha(s, m)
        except DegenerateFitError as exc:
            raise AnalysisFailure(f"degenerate fit ({m}): {exc}") from None
    return s, fits


@main.command()
@with_spectrum_options
@click.option("--method", type=click.Choice(METHODS + ("both",)), default="both", show_default=True,
              help="Primary estimator is wls when both are run.")
@click.pass_obj
def fit(state: State, spectrum, exposure, normalization, window, method):
    """Fit the alpha/E amplitude to SPECTRUM."""
    s, fits = run_fits(state, spectrum, exposure, normalization, window, method)
    primary = fits.get("wls") or fits["poisson_mle"]
    report = {
        "manifest": state.manifest("fit", [spectrum], window_kev=list(s.window), method=method,
                                   exposure_kg_day=s.exposure, normalization=s.normalization),
        "exposure_kg_day": s.exposure,
        "fit": primary.to_dict(),
        "fits": {m: f.to_dict() for m, f in fits.items()},
    }
    if state.plot:
        from cslxray.plot import plot_fit

        for m, f in fits.items():
            plot_fit(s, f, state.out_dir() / f"fit_{m}.svg")
    state.emit("fit.json", report)


def assumptions_from_flags(state, exposure, electrons, mass_prop, cl_mode) -> LimitAssumptions:
    if electrons is not None and electrons < 1:
        raise UsageError("--electrons must be a positive integer")
    if exposure is not None and not exposure > 0:
        raise UsageError("--exposure must be > 0")
    return LimitAssumptions(
        n_quasi_free=electrons if electrons is not None else 4,
        mass_proportional=mass_prop,
        constants_mode=_mode(state),
        cl_mode=cl_mode,
        exposure=exposure,
    )


limit_options = [
    click.option("--electrons", type=int, default=4, show_default=True, help="Quasi-free electrons per atom."),
    click.option("--mass-prop/--no-mass-prop", default=False, help="Mass-proportional coupling."),
    click.option("--cl-mode", type=click.Choice(tuple(CL_MODES)), default="point_estimate", show_default=True),
    click.option("--atom-density", type=click.Choice(tuple(MATERIALS)), default="paper", show_default=True,
                 help="Ge atoms per kg: paper value 8.9e24 or Avogadro / molar mass."),
]


def with_limit_options(f):
    for opt in reversed(limit_options):
        f = opt(f)
    return f


def limit_report(state, result: LimitResult, material, **resolved) -> dict:
    return {
        "manifest": state.manifest("limit", resolved.pop("inputs", ()), atoms_per_kg=material.atoms_per_kg,
                                   **resolved),
        **result.to_dict(),
    }


@main.command()
@click.option("--fit-report", type=click.Path(dir_okay=False), default=None, help="fit.json from the fit command.")
@click.option("--alpha", type=float, default=None, help="Amplitude in counts over the full exposure.")
@click.option("--alpha-err", type=float, default=None)
@click.option("--exposure", type=float, default=None, help="kg day (taken from the fit report when omitted).")
@with_limit_options
@click.pass_obj
def limit(state: State, fit_report, alpha, alpha_err, exposure, electrons, mass_prop, cl_mode, atom_density):
    """Convert a fitted amplitude into an upper limit on lambda."""
    inputs = []
    if fit_report is not None:
        if alpha is not None:
            raise UsageError("give either --fit-report or --alpha, not both")
        data = read_json(fit_report)
        inputs.append(fit_report)
        try:
            f = FitResult.from_dict(data.get("fit", data))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{fit_report}: malformed fit report ({exc})") from None
        alpha, alpha_err = f.alpha_hat, f.alpha_err if alpha_err is None else alpha_err
        if exposure is None:
            exposure = data.get("exposure_kg_day")
    if alpha is None:
        raise UsageError("an amplitude is required: --alpha or --fit-report")
    if not alpha > 0:
        raise UsageError("--alpha must be > 0")
    if exposure is None:
        raise UsageError("--exposure is required")
    assumptions = assumptions_from_flags(state, float(exposure), electrons, mass_prop, cl_mode)
    material = MATERIALS[atom_density]
    try:
        result = alpha_to_lambda(alpha, assumptions, alpha_err=alpha_err, material=material,
                                 constants=state.constants)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    state.emit("limit.json", limit_report(state, result, material, inputs=inputs, alpha=alpha,
                                          alpha_err=alpha_err, assumptions=asdict(assumptions),
                                          atom_density=atom_density))


sim_options = [
    click.option("--lambda", "lam", type=float, default=None, help="True collapse rate, s^-1."),
    click.option("--alpha", type=float, default=None, help="True amplitude instead of --lambda."),
    click.option("--background", type=float, default=0.0, show_default=True, help="Flat counts/(keV kg day)."),
    click.option("--exposure", type=float, default=80.0, show_default=True),
    click.option("--window", default="4.5:48.5", show_default=True),
    click.option("--bin-width", type=float, default=1.0, show_default=True),
    click.option("--sampling", type=click.Choice(SAMPLING_MODES), default="binned", show_default=True),
]


def with_sim_options(f):
    for opt in reversed(sim_options):
        f = opt(f)
    return f


def build_sim_config(state, lam, alpha, background, exposure, window, bin_width, sampling,
                     electrons, mass_prop, cl_mode, atom_density, method="poisson_mle") -> SimulationConfig:
    if (lam is None) == (alpha is None):
        raise UsageError("give exactly one of --lambda or --alpha")
    lo, hi = parse_window(window)
    if not bin_width > 0 or not lo > 0:
        raise UsageError("window must be positive and --bin-width > 0")
    n = (hi - lo) / bin_width
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise UsageError("window width must be a whole number of bins")
    assumptions = assumptions_from_flags(state, exposure, electrons, mass_prop, cl_mode)
    kwargs = dict(
        bin_edges=default_edges(lo, hi, bin_width),
        exposure=exposure,
        background_rate=background,
        assumptions=assumptions,
        material=MATERIALS[atom_density],
        constants=state.constants,
        seed=state.seed,
        fit_method=method,
        sampling=sampling,
    )
    try:
        if alpha is not None:
            if not alpha >= 0:
                raise ValueError("--alpha must be >= 0")
            return SimulationConfig.for_alpha(alpha, **kwargs)
        return SimulationConfig(lambda_true=lam, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


@main.command()
@with_sim_options
@with_limit_options
@click.option("--name", default="simulated.csv", show_default=True, help="Output file name inside --output.")
@click.option("--trial", type=click.IntRange(0), default=0, show_default=True, help="Trial index for the stream.")
@click.pass_obj
def simulate(state: State, lam, alpha, background, exposure, window, bin_width, sampling,
             electrons, mass_prop, cl_mode, atom_density, name, trial):
    """Write one pseudo-experiment spectrum as CSV (plus sidecar JSON)."""
    cfg = build_sim_config(state, lam, alpha, background, exposure, window, bin_width, sampling,
                           electrons, mass_prop, cl_mode, atom_density)
    s = simulate_spectrum(cfg, trial)
    path = state.out_dir() / name
    comments = [
        "synthetic pseudo-experiment, not measured data",
        f"alpha_true={cfg.alpha_true!r} lambda_true={cfg.lambda_true!r} seed={cfg.seed} trial={trial}",
        f"rng={cfg.to_dict()['rng']}",
    ]
    save_spectrum(s, path, comments, extra_meta={"simulation": cfg.to_dict()})
    click.echo(str(path))


@main.command()
@with_sim_options
@with_limit_options
@click.option("--trials", type=click.IntRange(1), default=200, show_default=True)
@click.option("--method", type=click.Choice(METHODS), default="poisson_mle", show_default=True)
@click.option("--workers", type=click.IntRange(1), default=1, show_default=True)
@click.option("--dump-trials", is_flag=True, help="Also write trials.csv.")
@click.pass_obj
def closure(state: State, lam, alpha, background, exposure, window, bin_width, sampling,
            electrons, mass_prop, cl_mode, atom_density, trials, method, workers, dump_trials):
    """Run a simulate -> fit -> limit closure study."""
    cfg = build_sim_config(state, lam, alpha, background, exposure, window, bin_width, sampling,
                           electrons, mass_prop, cl_mode, atom_density, method)
    outcomes = run_trials(cfg, trials, workers)
    report = summarize(cfg, outcomes)
    if dump_trials:
        write_trials_csv(outcomes, state.out_dir() / "trials.csv")
    state.emit("closure.json", {"manifest": state.manifest("closure", trials=trials, workers=workers),
                                **report.to_dict()})


COMPARE_COLUMNS = ("name", "kind", "reference", "reference_value_per_s", "verdict", "log10_distance")


def comparison_rows(lambda_upper: float) -> list[dict]:
    rows = []
    for c in compare_models(lambda_upper):
        ref = "-".join(str(m) for m in c.reference) if isinstance(c.reference, tuple) else f"{c.reference:g}"
        rows.append({
            "name": c.name,
            "kind": c.kind,
            "reference": ref,
            "reference_value_per_s": f"{c.reference_value:.6g}",
            "verdict": c.verdict.upper(),
            "log10_distance": f"{c.log10_distance:+.3f}",
        })
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def rows_to_text(lambda_upper: float, rows: list[dict]) -> str:
    lines = [f"lambda upper limit: {lambda_upper:.3g} s^-1", ""]
    width = max(len(r["name"]) for r in rows)
    lines.append(f"{'reference':<{width}}  {'value [s^-1]':>12}  {'log10(limit/ref)':>16}  verdict")
    for r in rows:
        lines.append(f"{r['name']:<{width}}  {r['reference_value_per_s']:>12}  {r['log10_distance']:>16}  {r['verdict']}")
    return "\n".join(lines) + "\n"


@main.command()
@click.argument("limit_report", type=click.Path(dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="CSV destination (default: compare.csv in --output when given).")
@click.pass_obj
def compare(state: State, limit_report, csv_path):
    """Tabulate a limit report against model values and published bounds."""
    data = read_json(limit_report)
    try:
        result = LimitResult.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{limit_report}: malformed limit report ({exc})") from None
    rows = comparison_rows(result.lambda_upper)
    click.echo(rows_to_text(result.lambda_upper, rows), nl=False)
    if csv_path is None and state.output is not None:
        csv_path = state.out_dir() / "compare.csv"
    if csv_path is not None:
        Path(csv_path).write_text(rows_to_csv(rows), encoding="utf-8")


@main.command()
@click.option("--spectrum", type=click.Path(dir_okay=False), default=None)
@click.option("--exposure", type=float, default=None)
@click.option("--normalization", type=click.Choice(NORMALIZATIONS), default=None)
@click.option("--window", default="4.5:48.5", show_default=True)
@click.option("--alpha", type=float, default=None, help="Use a given amplitude instead of fitting.")
@click.option("--alpha-err", type=float, default=None)
@click.option("--method", type=click.Choice(METHODS), default="wls", show_default=True,
              help="Estimator whose amplitude feeds the limits.")
@click.option("--cl-mode", type=click.Choice(tuple(CL_MODES)), default="point_estimate", show_default=True)
@click.option("--atom-density", type=click.Choice(tuple(MATERIALS)), default="paper", show_default=True)
@click.pass_obj
def report(state: State, spectrum, exposure, normalization, window, alpha, alpha_err, method, cl_mode, atom_density):
    """Full chain: fit (or given amplitude), the four limit variants, comparisons."""
    if (spectrum is None) == (alpha is None):
        raise UsageError("give exactly one of --spectrum or --alpha")
    out: dict = {}
    if spectrum is not None:
        s, fits = run_fits(state, spectrum, exposure, normalization, window, "both")
        out["fits"] = {m: f.to_dict() for m, f in fits.items()}
        chosen = fits[method]
        alpha, alpha_err = chosen.alpha_hat, chosen.alpha_err if alpha_err is None else alpha_err
        exposure = s.exposure
        if state.plot:
            from cslxray.plot import plot_fit

            plot_fit(s, chosen, state.out_dir() / "report_fit.svg")
    if not alpha > 0:
        raise UsageError("--alpha must be > 0")
    if exposure is None:
        raise UsageError("--exposure is required")
    material = MATERIALS[atom_density]
    limits = []
    for n in (4, 22):
        for mass_prop in (False, True):
            a = assumptions_from_flags(state, float(exposure), n, mass_prop, cl_mode)
            r = alpha_to_lambda(alpha, a, alpha_err=alpha_err, material=material, constants=state.constants)
            limits.append(r.to_dict())
    fu = fu_reference()
    out.update({
        "manifest": state.manifest("report", [spectrum] if spectrum else [], alpha=alpha, alpha_err=alpha_err,
                                   exposure_kg_day=exposure, method=method, cl_mode=cl_mode,
                                   atom_density=atom_density,
                                   paper_seconds_per_day=PAPER_SECONDS_PER_DAY),
        "alpha_used": alpha,
        "limits": limits,
        "fu_reference": fu,
        "ratio_to_fu": {f"{d['n_quasi_free']}e{'_mass_prop' if d['mass_proportional'] else ''}":
                        d["lambda_upper_per_s"] / fu["lambda_upper_per_s"] for d in limits},
    })
    state.emit("report.json", out)


if __name__ == "__main__":
    main()
