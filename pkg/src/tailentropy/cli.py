"""Command line front end.

Commands: ``index``, ``pipeline``, ``extremal``, ``simulate``, ``fit``.
Exit codes: 0 success, 2 validation failure, 3 numerical failure.
The output directory defaults to ``$TAILENTROPY_OUT`` (else ``./out``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from tailentropy import io
from tailentropy._rng import derive_seed
from tailentropy.copula_sim import (
    Comonotone,
    Gaussian,
    Gumbel,
    Independence,
    Student,
    sample,
    spec_from_dict,
    spec_to_dict,
)
from tailentropy.entropy_index import check_grid, index_curve, threshold_grid
from tailentropy.errors import NumericalError, ValidationError
from tailentropy.extremal import convergence_report, theta_empirical, theta_gumbel, theta_student
from tailentropy.mc_envelope import band_exceedance_report, envelope
from tailentropy.model_fit import (
    fit_garch11,
    fit_gaussian_copula,
    fit_gaussian_mixture,
    fit_student_copula,
    log_returns,
    synthetic_price_panel,
)
from tailentropy.pseudo_obs import select_components, to_pseudo_observations

logger = logging.getLogger("tailentropy")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
MODELS = ("gaussian", "student", "mixture")

REFERENCE_XI = float(np.log(3) / np.log(2))
REFERENCE_NU = 2.76733
REFERENCE_RHO = np.array([[1, 0.767, 0.759], [0.767, 1, 0.624], [0.759, 0.624, 1]])
DEFAULT_GRID = "0.850:0.995:0.005"
FOUR_POINT_GRID = "0.8,0.9,0.95,0.99,0.995"


# --------------------------------------------------------------------------
# argument parsing helpers
# --------------------------------------------------------------------------


def parse_grid(text: str) -> np.ndarray:
    """``"start:stop:step"`` (inclusive) or a comma separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            return threshold_grid(start, stop, step)
        return check_grid([float(x) for x in text.split(",") if x.strip()])
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise ValidationError(f"grid: {exc}") from None
        raise ValidationError(f"grid: cannot parse {text!r}") from None


def parse_floats(text: str, field: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"{field}: cannot parse {text!r}") from None


def parse_subsets(text: str | None, J: int) -> list[tuple[int, ...]]:
    """``"1,2;1,2,3"``; default is the leading subsets ``(1,2), ..., (1..J)``."""
    if not text:
        return [tuple(range(1, k + 1)) for k in range(2, J + 1)]
    out = []
    for part in text.split(";"):
        try:
            comps = tuple(int(x) for x in part.split(",") if x.strip())
        except ValueError:
            raise ValidationError(f"subsets: cannot parse {part!r}") from None
        if len(comps) < 2 or any(c < 1 or c > J for c in comps) or list(comps) != sorted(set(comps)):
            raise ValidationError(f"subsets: invalid subset {comps} for {J} columns")
        out.append(comps)
    return out


def subset_tag(comps: Sequence[int]) -> str:
    return "-".join(str(c) for c in comps)


def select_columns(header: list[str], values: np.ndarray, spec: str | None):
    if not spec:
        return header, values
    idx = []
    for tok in (t.strip() for t in spec.split(",")):
        if tok in header:
            idx.append(header.index(tok))
        elif tok.isdigit() and 1 <= int(tok) <= len(header):
            idx.append(int(tok) - 1)
        else:
            raise ValidationError(f"columns: unknown column {tok!r}")
    return [header[i] for i in idx], values[:, idx]


def output_dir(arg: str | None) -> Path:
    out = Path(arg or os.environ.get("TAILENTROPY_OUT") or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def parse_corr(text: str, J: int) -> np.ndarray:
    vals = parse_floats(text, "rho")
    if len(vals) == 1:
        m = np.full((J, J), vals[0])
    elif len(vals) == J * (J - 1) // 2:
        m = np.zeros((J, J))
        m[np.triu_indices(J, 1)] = vals
        m = m + m.T
    else:
        raise ValidationError(f"rho: expected 1 or {J * (J - 1) // 2} values, got {len(vals)}")
    np.fill_diagonal(m, 1.0)
    return m


# --------------------------------------------------------------------------
# library-level pipeline
# --------------------------------------------------------------------------


def run_pipeline(
    values: np.ndarray,
    column_names: Sequence[str] | None = None,
    *,
    kind: str = "prices",
    garch: bool = True,
    models: Sequence[str] = MODELS,
    subsets: Sequence[Sequence[int]] | None = None,
    grid: Sequence[float] | None = None,
    n: int | None = None,
    R: int = 500,
    level: float = 0.95,
    seed: int = 0,
    workers: int = 1,
    mixture_components: int = 5,
    mixture_starts: int = 5,
    tie_rule: str = "average",
) -> dict:
    """Marginal filtering, joint model fits, envelopes and exceedance reports.

    ``kind`` is ``"prices"`` (converted to percent log-returns) or
    ``"returns"``. Returns a dict with ``garch``, ``shocks``, ``pseudo``,
    ``fits``, ``curves`` (per subset), ``bands`` and ``reports`` (per model
    and subset) and ``warnings``.
    """
    values = np.asarray(values, dtype=float)
    if kind not in ("prices", "returns"):
        raise ValidationError(f"kind: expected 'prices' or 'returns', got {kind!r}")
    bad = [m for m in models if m not in MODELS]
    if bad or not models:
        raise ValidationError(f"models: unknown or empty selection {list(models)}")
    returns = log_returns(values) if kind == "prices" else values
    J = returns.shape[1]
    names = list(column_names) if column_names is not None else [f"X{j + 1}" for j in range(J)]
    grid = parse_grid(DEFAULT_GRID) if grid is None else check_grid(grid)
    subsets = parse_subsets(None, J) if subsets is None else [tuple(s) for s in subsets]

    warnings, garch_fits = [], {}
    if garch:
        shocks = np.empty_like(returns)
        for j in range(J):
            fit = fit_garch11(returns[:, j])
            garch_fits[names[j]] = fit
            shocks[:, j] = fit.shocks
            if not fit.converged:
                warnings.append(f"GARCH fit for column {names[j]} did not converge")
    else:
        shocks = returns
    pseudo = to_pseudo_observations(shocks, tie_rule=tie_rule, seed=seed)
    n = pseudo.n if n is None else int(n)

    fits = {}
    for m in models:
        if m == "gaussian":
            fits[m] = fit_gaussian_copula(pseudo)
        elif m == "student":
            fits[m] = fit_student_copula(pseudo)
            if fits[m].diagnostics.get("at_bound"):
                warnings.append("Student degrees of freedom at search bound")
        else:
            fits[m] = fit_gaussian_mixture(
                shocks, mixture_components, mixture_starts, seed=derive_seed(seed, 999)
            )

    curves = {s: index_curve(pseudo, grid, s) for s in subsets}
    bands, reports = {}, {}
    for mi, m in enumerate(MODELS):
        if m not in fits:
            continue
        for s in subsets:
            band = envelope(fits[m], s, grid, n, R, level, derive_seed(seed, mi), workers)
            bands[m, s] = band
            reports[m, s] = band_exceedance_report(curves[s], band)
    return {
        "names": names,
        "returns": returns,
        "garch": garch_fits,
        "shocks": shocks,
        "pseudo": pseudo,
        "fits": fits,
        "grid": grid,
        "curves": curves,
        "bands": bands,
        "reports": reports,
        "warnings": warnings,
        "config": {
            "kind": kind, "garch": garch, "models": list(models),
            "subsets": [list(s) for s in subsets], "grid": grid.tolist(), "n": n, "R": R,
            "level": level, "seed": seed, "mixture_components": mixture_components,
            "mixture_starts": mixture_starts, "tie_rule": tie_rule,
            "quantile_method": "linear", "rerank_copula_replicates": False,
        },
    }


def fitted_to_dict(fit) -> dict:
    diag = {k: v for k, v in fit.diagnostics.items() if k != "loglik_traces"}
    return {"spec": spec_to_dict(fit.spec), "method": fit.method, "diagnostics": diag}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_index(args) -> int:
    header, values, _ = io.read_table(args.input, args.delimiter)
    header, values = select_columns(header, values, args.columns)
    grid = parse_grid(args.grid)
    alphas = parse_floats(args.alpha, "alpha") if args.alpha else []
    if any(a <= 1 for a in alphas):
        raise ValidationError("alpha: Tsallis indices need alpha > 1")
    pseudo = to_pseudo_observations(values, tie_rule=args.tie_rule, seed=args.seed)
    out = output_dir(args.out)
    for s in parse_subsets(args.subsets, pseudo.J):
        cols = [index_curve(pseudo, grid, s).values]
        names = ["S_b"]
        for a in alphas:
            cols.append(index_curve(pseudo, grid, s, "tsallis", a).values)
            names.append(f"T_b_alpha_{a:g}")
        io.write_table(out / f"index_curve_{subset_tag(s)}.csv", ["b"] + names, [grid] + cols)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    header, values, _ = io.read_table(args.input, args.delimiter)
    header, values = select_columns(header, values, args.columns)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    res = run_pipeline(
        values, header, kind=args.kind, garch=not args.no_garch, models=models,
        subsets=parse_subsets(args.subsets, values.shape[1]), grid=parse_grid(args.grid),
        n=args.n, R=args.R, level=args.level, seed=args.seed, workers=args.workers,
        mixture_components=args.mixture_components, mixture_starts=args.mixture_starts,
        tie_rule=args.tie_rule,
    )
    out = output_dir(args.out)
    for w in res["warnings"]:
        logger.warning(w)
    io.write_json(out / "fits.json", {
        "garch": {k: v.to_dict() for k, v in res["garch"].items()},
        "models": {k: fitted_to_dict(v) for k, v in res["fits"].items()},
        "config": res["config"],
    })
    io.write_table(out / "shocks.csv", res["names"], list(res["shocks"].T))
    grid = res["grid"]
    for s, curve in res["curves"].items():
        io.write_table(out / f"data_curve_{subset_tag(s)}.csv", ["b", "S_b"], [grid, curve.values])
    report = {"warnings": res["warnings"], "models": {}}
    for (m, s), band in res["bands"].items():
        tag = subset_tag(s)
        io.write_table(out / f"band_{m}_{tag}.csv", ["b", "lower", "upper"], [grid, band.lower, band.upper])
        report["models"].setdefault(m, {})[tag] = res["reports"][m, s]
    io.write_json(out / "report.json", report)
    return EXIT_OK


def _extremal_families(args) -> list[tuple[str, object]]:
    fams = []
    if args.preset == "appendix-b":
        fams.append(("gumbel", Gumbel(REFERENCE_XI, 3)))
        fams.append(("student", Student(REFERENCE_NU, REFERENCE_RHO)))
    if args.gumbel_xi is not None:
        if not args.gumbel_xi >= 1:
            raise ValidationError(f"gumbel-xi: must be >= 1, got {args.gumbel_xi}")
        fams.append(("gumbel", Gumbel(args.gumbel_xi, args.j)))
    if args.student_nu is not None:
        if args.student_rho is None:
            raise ValidationError("student-rho: required with --student-nu")
        fams.append(("student", Student(args.student_nu, parse_corr(args.student_rho, args.j))))
    if not fams:
        raise ValidationError("choose --preset appendix-b, --gumbel-xi or --student-nu")
    return fams


def cmd_extremal(args) -> int:
    fams = _extremal_families(args)
    grid = parse_grid(args.grid)
    alphas = parse_floats(args.alpha, "alpha")
    out = output_dir(args.out)
    thetas, rows = {}, []
    for k, (name, spec) in enumerate(fams):
        key = name if name not in thetas else f"{name}_{k}"
        seed = derive_seed(args.seed, k)
        if isinstance(spec, Gumbel):
            thetas[key] = {"theta": theta_gumbel(spec.xi, spec.J).theta, "source": "closed-form-gumbel"}
        else:
            thetas[key] = _student_thetas(spec, args.n, seed, args.oracle_b)
        n = None if (args.exact and isinstance(spec, Gumbel)) else args.n
        for row in convergence_report(spec, alphas, grid, n=n, seed=seed):
            rows.append({"family": key, **row})
    io.write_json(out / "theta.json", thetas)
    cols = ["b", "alpha", "T", "g1", "g2", "theta"]
    io.write_table(
        out / "convergence_report.csv", cols,
        [[r[c] for r in rows] for c in cols], index=[r["family"] for r in rows], index_name="family",
    )
    return EXIT_OK


def _student_thetas(spec: Student, n: int, seed: int, b: float) -> dict:
    if spec.dim not in (2, 3):
        raise ValidationError("student: closed-form extremal coefficient needs J in {2, 3}")
    mc = theta_empirical(spec, b, n=n, seed=seed)
    conv = {}
    for arg in ("standard", "literal"):
        for disp in ("submatrix", "partial"):
            conv[f"{arg}/{disp}"] = theta_student(spec.df, spec.corr, arg, disp).theta
    validated = min(conv, key=lambda c: abs(conv[c] - mc.theta))
    return {
        "conventions": conv,
        "default": "standard/submatrix",
        "validated": validated,
        "monte_carlo": {"theta": mc.theta, "stderr": mc.stderr, "b": b, "n": n},
    }


def _simulate_spec(args):
    if args.spec_json:
        return spec_from_dict(json.loads(Path(args.spec_json).read_text(encoding="utf-8")))
    fam = args.family
    if fam == "independence":
        return Independence(args.j)
    if fam == "comonotone":
        return Comonotone(args.j)
    if fam == "gumbel":
        if args.xi is None:
            raise ValidationError("xi: required for the gumbel family")
        return Gumbel(args.xi, args.j)
    if args.rho is None:
        raise ValidationError("rho: required for elliptical families")
    corr = parse_corr(args.rho, args.j)
    if fam == "gaussian":
        return Gaussian(corr)
    if args.nu is None:
        raise ValidationError("nu: required for the student family")
    return Student(args.nu, corr)


def cmd_simulate(args) -> int:
    spec = _simulate_spec(args)
    names = [f"X{j + 1}" for j in range(spec.dim)]
    if args.prices:
        garch = tuple(parse_floats(args.garch, "garch"))
        if len(garch) != 3:
            raise ValidationError("garch: expected alpha0,alpha1,beta1")
        data = synthetic_price_panel(spec, args.n, args.seed, garch, args.mu)
    else:
        data = sample(spec, args.n, args.seed).values
    path = Path(args.output) if args.output else output_dir(args.out) / "sample.csv"
    io.write_table(path, names, list(data.T))
    return EXIT_OK


def cmd_fit(args) -> int:
    header, values, _ = io.read_table(args.input, args.delimiter)
    header, values = select_columns(header, values, args.columns)
    out = output_dir(args.out)
    if args.model == "garch":
        fits = {h: fit_garch11(values[:, j], not args.no_mean).to_dict() for j, h in enumerate(header)}
        io.write_json(out / "fit_garch.json", fits)
        return EXIT_OK
    if args.model == "mixture":
        fit = fit_gaussian_mixture(values, args.components, args.starts, seed=args.seed)
    else:
        pseudo = to_pseudo_observations(values, tie_rule=args.tie_rule, seed=args.seed)
        fit = fit_gaussian_copula(pseudo) if args.model == "gaussian" else fit_student_copula(pseudo)
    io.write_json(out / f"fit_{args.model}.json", fitted_to_dict(fit))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _common_io(p, seed_required=False):
    p.add_argument("--out", help="output directory (default $TAILENTROPY_OUT or ./out)")
    p.add_argument("--seed", type=int, required=seed_required)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailentropy", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="entropy index curves of a CSV")
    p.add_argument("input")
    p.add_argument("--columns")
    p.add_argument("--subsets", help='e.g. "1,2;1,2,3"; default leading subsets')
    p.add_argument("--grid", default=DEFAULT_GRID)
    p.add_argument("--alpha", help="comma separated Tsallis alphas (> 1)")
    p.add_argument("--tie-rule", default="average", choices=["average", "min", "max", "random"])
    p.add_argument("--delimiter", default=",")
    _common_io(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("pipeline", help="GARCH filter, model fits, envelopes")
    p.add_argument("input")
    p.add_argument("--columns")
    p.add_argument("--kind", default="prices", choices=["prices", "returns"])
    p.add_argument("--no-garch", action="store_true")
    p.add_argument("--models", default=",".join(MODELS))
    p.add_argument("--subsets")
    p.add_argument("--grid", default=DEFAULT_GRID)
    p.add_argument("--n", type=int, help="replicate size (default: number of shocks)")
    p.add_argument("--R", type=int, default=500)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--mixture-components", type=int, default=5)
    p.add_argument("--mixture-starts", type=int, default=5)
    p.add_argument("--tie-rule", default="average", choices=["average", "min", "max", "random"])
    p.add_argument("--delimiter", default=",")
    _common_io(p, seed_required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("extremal", help="extremal coefficients and convergence report")
    p.add_argument("--preset", choices=["appendix-b"])
    p.add_argument("--gumbel-xi", type=float)
    p.add_argument("--student-nu", type=float)
    p.add_argument("--student-rho", help="single value or upper triangle, row major")
    p.add_argument("--j", type=int, default=3)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--grid", default=FOUR_POINT_GRID)
    p.add_argument("--alpha", default="1", help="1 means the Shannon index")
    p.add_argument("--exact", action="store_true", help="exact cells where available")
    p.add_argument("--oracle-b", type=float, default=0.999)
    _common_io(p, seed_required=True)
    p.set_defaults(func=cmd_extremal)

    p = sub.add_parser("simulate", help="draw a sample from a copula family")
    p.add_argument("--family", default="independence",
                   choices=["independence", "comonotone", "gaussian", "student", "gumbel"])
    p.add_argument("--spec-json", help="family and parameters as JSON (overrides --family)")
    p.add_argument("--j", type=int, default=2)
    p.add_argument("--rho")
    p.add_argument("--nu", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--prices", action="store_true", help="emit a GARCH(1,1) price panel")
    p.add_argument("--garch", default="0.05,0.1,0.85")
    p.add_argument("--mu", type=float, default=0.03)
    p.add_argument("--output", help="CSV path (default <out>/sample.csv)")
    _common_io(p, seed_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one model to a CSV")
    p.add_argument("input")
    p.add_argument("--model", required=True, choices=["gaussian", "student", "mixture", "garch"])
    p.add_argument("--columns")
    p.add_argument("--components", type=int, default=5)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--no-mean", action="store_true")
    p.add_argument("--tie-rule", default="average", choices=["average", "min", "max", "random"])
    p.add_argument("--delimiter", default=",")
    _common_io(p)
    p.set_defaults(func=cmd_fit, seed=0)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
