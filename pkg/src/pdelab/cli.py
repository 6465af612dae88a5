"""Command-line front end.

Subcommands: ``run`` (one preset or config file), ``list-presets``,
``posterior-check`` (shortcut for posterior configs), and ``verify-all``
(the full preset suite). Artifacts are a CSV per experiment plus a JSON
summary embedding the exact config text and seed needed to reproduce
the run byte-for-byte. Exit status: 0 on completion, 2 when a verdict
fails in verify mode, 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import presets
from .bayes import (
    PriorSpec,
    SeparableBayesPredictive,
    StudentFormPredictive,
    f_independence_check,
    pi0a_params,
)
from .config import (
    ConfigError,
    dumps,
    get_float,
    get_floats,
    get_int,
    load,
    model_from_config,
    losses_from_config,
    parse_families,
    parse_prior,
    prior_from_config,
    require,
    shrinkage_from_config,
    validate_experiment,
)
from .densities import student_logpdf
from .model import ModelSpec
from .posterior import (
    brute_force_theta_marginal,
    build_posterior,
    factored_theta_marginal,
)
from .rng import RngStream
from .risk import (
    DEFAULT_CHUNK,
    RadialField,
    RiskReport,
    benchmark_predictor,
    dominance_verdict,
    duality_residual_max,
    plugin_predictor,
    point_estimation_risk_difference,
    point_prediction_risk_difference,
    risk_difference,
    stein_identity_check,
    theorem1_prediction_difference,
)

RISK_COLUMNS = ("f_family", "theta_norm", "eta", "n", "estimate", "se", "ci_lo", "ci_hi", "verdict")


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _scaled(cfg, key, scale, default=None):
    n = get_int(cfg, key, default)
    return max(1, int(round(n * scale)))


# ----------------------------------------------------------------------
# Experiment runners: each returns (exit_code, rows, details)
# ----------------------------------------------------------------------

def run_risk_compare(cfg, threads=1, scale=1.0):
    base = model_from_config(cfg)
    compare_kind = cfg.get("compare.kind", "plugin")
    seed = get_int(cfg, "budget.seed")
    n = _scaled(cfg, "budget.n", scale)
    chunk = get_int(cfg, "budget.chunk", DEFAULT_CHUNK)
    ci = get_float(cfg, "verdict.ci_level", 0.99)
    eps = get_float(cfg, "verdict.eps", 1e-4)
    verdict_on = cfg.get("verdict.enabled", "true") == "true"
    theta_norms = get_floats(cfg, "grid.theta_norms", default=[0.0])
    families = parse_families(require(cfg, "grid.f"))
    c_values = get_floats(cfg, "grid.c", default=[base.c])
    warnings = []
    if verdict_on and base.d < 3:
        warnings.append(f"d >= 3 required by the dominance theorems (got d={base.d}); verdict suppressed")

    residual_check = cfg.get("check.duality_residual", "false") == "true"
    residual_tol = get_float(cfg, "check.residual_tol", 1e-12)
    max_residual = 0.0

    reports = []
    cell = 0
    for c in c_values:
        shrink = shrinkage_from_config(cfg, c) if compare_kind != "bayes" else None
        for fname, radial in families:
            points = []
            for tn in theta_norms:
                spec = ModelSpec(base.d, base.k, c, np.zeros(base.d), base.eta, radial).with_theta_norm(tn)
                stream = RngStream(seed).substream(cell)
                cell += 1
                if compare_kind == "plugin":
                    h0 = StudentFormPredictive.mre(c, base.k)
                    h1 = StudentFormPredictive.plugin(shrink, c, base.k)
                elif compare_kind == "bayes":
                    prior = prior_from_config(cfg)
                    h0 = StudentFormPredictive.mre(c, base.k)
                    h1 = SeparableBayesPredictive(
                        prior, c, base.k,
                        evaluator=cfg.get("prior.evaluator", "auto"),
                        n_draws=_scaled(cfg, "budget.is_budget", scale, default=200_000),
                    )
                else:
                    raise ConfigError(f"key 'compare.kind': unknown kind {compare_kind!r}")
                points.append(risk_difference(spec, h0, h1, n, stream, ci, chunk, threads))
                if residual_check:
                    max_residual = max(
                        max_residual,
                        duality_residual_max(spec, shrink, min(n, 200_000), stream),
                    )
            label = fname if len(c_values) == 1 else f"{fname}|c={c:g}"
            verdict = dominance_verdict(points, eps)
            if warnings:
                verdict = "SUPPRESSED"
            reports.append(RiskReport(f_name=label, points=points, verdict=verdict))

    rows = [row for rep in reports for row in rep.rows()]
    verdicts = {rep.f_name: rep.verdict for rep in reports}
    details = {"verdicts": verdicts, "warnings": warnings}
    failed = verdict_on and any(v == "FAIL" for v in verdicts.values())
    if residual_check:
        details["max_duality_residual"] = max_residual
        details["residual_tol"] = residual_tol
        if max_residual >= residual_tol:
            failed = True
            details["residual_verdict"] = "FAIL"
        else:
            details["residual_verdict"] = "PASS"
    return (2 if failed else 0), rows, details


def run_point_risk(cfg, threads=1, scale=1.0):
    base = model_from_config(cfg)
    mode = cfg.get("compare.mode", "predict")
    seed = get_int(cfg, "budget.seed")
    n = _scaled(cfg, "budget.n", scale)
    chunk = get_int(cfg, "budget.chunk", DEFAULT_CHUNK)
    ci = get_float(cfg, "verdict.ci_level", 0.99)
    eps = get_float(cfg, "verdict.eps", 1e-4)
    theta_norms = get_floats(cfg, "grid.theta_norms", default=[0.0])
    families = parse_families(require(cfg, "grid.f"))
    shrink = shrinkage_from_config(cfg, base.c)
    losses = losses_from_config(cfg) if mode != "estimate" else [None]
    warnings = []
    if base.d < 3:
        warnings.append(f"d >= 3 required by the dominance theorems (got d={base.d}); verdict suppressed")

    reports = []
    cell = 0
    for loss in losses:
        for fname, radial in families:
            points = []
            for tn in theta_norms:
                spec = base.with_theta_norm(tn).with_radial(radial)
                stream = RngStream(seed).substream(cell)
                cell += 1
                if mode == "predict":
                    pt = point_prediction_risk_difference(
                        spec, benchmark_predictor(spec.c), plugin_predictor(shrink, spec.c, spec.k),
                        loss, n, stream, ci, chunk, threads,
                    )
                elif mode == "estimate":
                    from .shrinkage import theta_hat

                    pt = point_estimation_risk_difference(
                        spec, lambda x, u: x, lambda x, u: theta_hat(shrink, x, u, spec.c, spec.k),
                        n, stream, ci, chunk, threads,
                    )
                elif mode == "canonical":
                    alpha = shrink.a * spec.c**3 / (1 + spec.c**2)
                    pt = theorem1_prediction_difference(spec, alpha, shrink, loss, n, stream, ci, chunk, threads)
                else:
                    raise ConfigError(f"key 'compare.mode': unknown mode {mode!r}")
                points.append(pt)
            label = fname if loss is None else f"{fname}/{loss.label}"
            verdict = "SUPPRESSED" if warnings else dominance_verdict(points, eps)
            reports.append(RiskReport(f_name=label, points=points, verdict=verdict))

    rows = [row for rep in reports for row in rep.rows()]
    verdicts = {rep.f_name: rep.verdict for rep in reports}
    failed = cfg.get("verdict.enabled", "true") == "true" and any(v == "FAIL" for v in verdicts.values())
    return (2 if failed else 0), rows, {"verdicts": verdicts, "warnings": warnings}


def run_bayes_pde_eval(cfg, threads=1, scale=1.0):
    mode = cfg.get("check.mode", "closed-form-oracle")
    seed = get_int(cfg, "budget.seed")
    tol = get_float(cfg, "check.tol", 1e-3)
    y_points = get_int(cfg, "check.y_points", 50)
    y_span = get_float(cfg, "check.y_span", 4.0)
    c = get_float(cfg, "model.c", 1.0)

    if mode == "closed-form-oracle":
        rows = []
        worst = 0.0
        gen = RngStream(seed).generator()
        for d in [int(v) for v in get_floats(cfg, "check.d_values", default=[1, 2])]:
            for k in [int(v) for v in get_floats(cfg, "check.k_values", default=[2, 5])]:
                for a in get_floats(cfg, "check.a_values", default=[-1.0, 0.0, 1.0]):
                    x = gen.standard_normal(d)
                    u = gen.standard_normal(k)
                    closed = pi0a_params(x, u, c, k, a)
                    family = SeparableBayesPredictive(PriorSpec("flat", a=a), c, k, evaluator="quadrature")
                    handle = family.bind(x, u)
                    direction = np.ones(d) / np.sqrt(d)
                    ts = np.linspace(-y_span, y_span, y_points)
                    ys = closed.xi[None, :] + closed.sigma * ts[:, None] * direction[None, :]
                    numeric = handle.logpdf(ys)
                    exact = student_logpdf(closed, ys)
                    err = np.abs(numeric - exact)
                    worst = max(worst, float(err.max()))
                    case = f"d={d};k={k};a={a:g}"
                    for t, nv, ev, e in zip(ts, numeric, exact, err):
                        rows.append({
                            "case": case, "t": float(t), "numeric_logpdf": float(nv),
                            "closed_logpdf": float(ev), "abs_error": float(e),
                        })
        verdict = "PASS" if worst < tol else "FAIL"
        details = {"max_abs_log_error": worst, "tol": tol, "verdicts": {"closed-form-oracle": verdict}}
        columns = ("case", "t", "numeric_logpdf", "closed_logpdf", "abs_error")
        return (0 if verdict == "PASS" else 2), (columns, rows), details

    if mode == "f-independence":
        base = model_from_config(cfg)
        if base.d != 1:
            raise ConfigError("f-independence check requires model.d = 1")
        families = parse_families(require(cfg, "check.f"))
        prior_tokens = [tok.strip() for tok in require(cfg, "check.priors").split(";") if tok.strip()]
        a = get_float(cfg, "prior.a", -1.0)
        x = get_floats(cfg, "data.x")
        u = np.asarray(get_floats(cfg, "data.u"))
        ys = np.linspace(c * x[0] - y_span, c * x[0] + y_span, y_points)
        rows = []
        verdicts = {}
        worst = {}
        for token in prior_tokens:
            prior = parse_prior(token, a=a)
            models = [base.with_radial(radial) for _, radial in families]
            report = f_independence_check(prior, models, x, u, ys)
            worst[token] = report["max_discrepancy"]
            verdicts[token] = "PASS" if report["max_discrepancy"] < tol else "FAIL"
            for (label, _), (key, vals) in zip(families, report["log_densities"].items()):
                for y, v in zip(ys, vals):
                    rows.append({"prior": token, "f_family": label, "y": float(y), "log_density": float(v)})
        details = {"max_discrepancy": worst, "tol": tol, "verdicts": verdicts}
        failed = any(v == "FAIL" for v in verdicts.values())
        columns = ("prior", "f_family", "y", "log_density")
        return (2 if failed else 0), (columns, rows), details

    raise ConfigError(f"key 'check.mode': unknown mode {mode!r}")


def run_posterior_check(cfg, threads=1, scale=1.0):
    base = model_from_config(cfg)
    if base.d != 1:
        raise ConfigError("posterior-check requires model.d = 1")
    a = get_float(cfg, "prior.a", 0.0)
    tol = get_float(cfg, "check.tol", 1e-6)
    x = np.asarray(get_floats(cfg, "data.x"))
    u = np.asarray(get_floats(cfg, "data.u"))
    lo, hi, num = get_floats(cfg, "grid.theta", default=[-8.0, 8.0, 161])
    grid = np.linspace(lo, hi, int(num))
    families = parse_families(require(cfg, "check.f"))
    prior_tokens = [tok.strip() for tok in require(cfg, "check.priors").split(";") if tok.strip()]

    tables = {}
    verdicts = {}
    sup_errors = {}
    f_invariance = {}
    for token in prior_tokens:
        prior = parse_prior(token, a=a)
        brutes = {}
        for fname, radial in families:
            spec = base.with_radial(radial)
            rep = build_posterior(spec, prior, x, u)
            factored = factored_theta_marginal(rep, grid)
            brute = brute_force_theta_marginal(spec, prior, x, u, grid)
            brutes[fname] = brute
            err = np.abs(factored - brute)
            key = f"{token}|{fname}"
            sup_errors[key] = float(err.max())
            verdicts[key] = "PASS" if err.max() < tol else "FAIL"
            tables[key] = [
                {"theta": float(t), "factored_density": float(fd), "brute_force_density": float(bd),
                 "abs_error": float(e)}
                for t, fd, bd, e in zip(grid, factored, brute, err)
            ]
        names = list(brutes)
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                gap = float(np.max(np.abs(brutes[names[i]] - brutes[names[j]])))
                f_invariance[f"{token}|{names[i]}~{names[j]}"] = gap
                verdicts[f"{token}|f-invariance"] = "PASS" if gap < tol else "FAIL"

    details = {"sup_errors": sup_errors, "f_invariance": f_invariance, "tol": tol, "verdicts": verdicts}
    failed = any(v == "FAIL" for v in verdicts.values())
    return (2 if failed else 0), tables, details


def run_stein_check(cfg, threads=1, scale=1.0):
    from .config import parse_family

    seed = get_int(cfg, "budget.seed")
    n = _scaled(cfg, "budget.n", scale)
    tol = get_float(cfg, "battery.tol", 1e-6)
    rows = []
    verdicts = {}
    for i, case in enumerate(tok.strip() for tok in require(cfg, "battery.cases").split(";") if tok.strip()):
        fam_tok, field_tok, d_tok, k_tok = case.split("|")
        _, radial = parse_family(fam_tok)
        d, k = int(d_tok), int(k_tok)
        g = RadialField.linear() if field_tok == "linear" else RadialField.james_stein(d)
        report = stein_identity_check(radial, d, k, g, n=n, rng=RngStream(seed).substream(i))
        identity_ok = report.passes(tol)
        gamma_differs = (
            abs(report.gamma - 1.0) < 1e-12
            or report.discrepancy_with_gamma > max(tol, 5 * report.combined_se)
        )
        verdicts[case] = "PASS" if identity_ok and gamma_differs else "FAIL"
        rows.append({
            "case": case, "d": d, "k": k, "method": report.method,
            "lhs": report.lhs, "lhs_se": report.lhs_se,
            "rhs_no_gamma": report.rhs_no_gamma, "rhs_se": report.rhs_se,
            "rhs_with_gamma": report.rhs_with_gamma, "gamma": report.gamma,
            "verdict": verdicts[case],
        })
    details = {"verdicts": verdicts, "tol": tol}
    failed = any(v == "FAIL" for v in verdicts.values())
    columns = ("case", "d", "k", "method", "lhs", "lhs_se", "rhs_no_gamma", "rhs_se",
               "rhs_with_gamma", "gamma", "verdict")
    return (2 if failed else 0), (columns, rows), details


# ----------------------------------------------------------------------
# Orchestration
# ----------------------------------------------------------------------

def execute(cfg: dict, name: str, out_dir: str, threads: int = 1, scale: float = 1.0) -> int:
    kind = validate_experiment(cfg)
    os.makedirs(out_dir, exist_ok=True)
    if kind == "risk-compare":
        code, rows, details = run_risk_compare(cfg, threads, scale)
        write_csv(os.path.join(out_dir, f"{name}.csv"), RISK_COLUMNS, rows)
    elif kind == "point-risk":
        code, rows, details = run_point_risk(cfg, threads, scale)
        write_csv(os.path.join(out_dir, f"{name}.csv"), RISK_COLUMNS, rows)
    elif kind == "bayes-pde-eval":
        code, (columns, rows), details = run_bayes_pde_eval(cfg, threads, scale)
        write_csv(os.path.join(out_dir, f"{name}.csv"), columns, rows)
    elif kind == "posterior-check":
        code, tables, details = run_posterior_check(cfg, threads, scale)
        columns = ("theta", "factored_density", "brute_force_density", "abs_error")
        for key, rows in tables.items():
            safe = key.replace(":", "_").replace("|", "-").replace("=", "")
            write_csv(os.path.join(out_dir, f"{name}-{safe}.csv"), columns, rows)
    elif kind == "stein-check":
        code, (columns, rows), details = run_stein_check(cfg, threads, scale)
        write_csv(os.path.join(out_dir, f"{name}.csv"), columns, rows)
    else:
        raise ConfigError(f"experiment kind {kind!r} is not runnable directly")
    summary = {
        "name": name,
        "experiment_kind": kind,
        "exit_status": code,
        "seed": cfg.get("budget.seed"),
        "budget_scale": scale,
        "details": details,
        "config_text": dumps(cfg),
    }
    write_json(os.path.join(out_dir, f"{name}.json"), summary)
    return code


def default_out_dir(cli_value):
    return cli_value or os.environ.get("PDE_LAB_OUT") or "pdelab-out"


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg["budget.seed"] = str(args.seed)
    if getattr(args, "prior", None):
        prior = parse_prior(args.prior, a=get_float(cfg, "prior.a", -1.0))
        cfg["prior.kind"] = "twopoint" if prior.kind == "two-point" else prior.kind
        if prior.kind == "two-point":
            cfg["prior.m"] = format(prior.m, ".17g")
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors; 2 is reserved for verdict failures
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def build_parser():
    parser = _Parser(prog="pdelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one preset or config file")
    group = run.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", help="built-in preset name")
    group.add_argument("--config", help="path to a config file")
    run.add_argument("--out", help="output directory (default: $PDE_LAB_OUT or ./pdelab-out)")
    run.add_argument("--seed", type=int, help="override budget.seed")
    run.add_argument("--budget-scale", type=float, default=1.0, help="multiply all sample budgets")
    run.add_argument("--threads", type=int, default=1, help="worker threads (never affects results)")
    run.add_argument("--prior", help="override prior: harmonic|flat|twopoint:m=...")

    sub.add_parser("list-presets", help="list built-in presets")

    pc = sub.add_parser("posterior-check", help="run a posterior-check config")
    pc.add_argument("--config", required=True)
    pc.add_argument("--out")
    pc.add_argument("--seed", type=int)
    pc.add_argument("--budget-scale", type=float, default=1.0)
    pc.add_argument("--threads", type=int, default=1)

    va = sub.add_parser("verify-all", help="run every preset and aggregate verdicts")
    va.add_argument("--out")
    va.add_argument("--budget-scale", type=float, default=1.0)
    va.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "list-presets":
            for name, desc in presets.catalog().items():
                print(f"{name}: {desc}")
            return 0

        if args.command == "run":
            if args.preset:
                cfg = presets.preset_config(args.preset)
                name = args.preset
            else:
                cfg = load(args.config)
                name = os.path.splitext(os.path.basename(args.config))[0]
            cfg = _apply_overrides(cfg, args)
            code = execute(cfg, name, default_out_dir(args.out), args.threads, args.budget_scale)
            print(f"{name}: {'OK' if code == 0 else 'VERDICT FAIL'}")
            return code

        if args.command == "posterior-check":
            cfg = load(args.config)
            cfg.setdefault("experiment.kind", "posterior-check")
            if cfg["experiment.kind"] != "posterior-check":
                raise ConfigError("posterior-check subcommand requires experiment.kind = posterior-check")
            cfg = _apply_overrides(cfg, args)
            name = os.path.splitext(os.path.basename(args.config))[0]
            code = execute(cfg, name, default_out_dir(args.out), args.threads, args.budget_scale)
            print(f"{name}: {'OK' if code == 0 else 'VERDICT FAIL'}")
            return code

        if args.command == "verify-all":
            out = default_out_dir(args.out)
            overall = 0
            statuses = {}
            for name in presets.preset_names():
                code = execute(presets.preset_config(name), name, out, args.threads, args.budget_scale)
                statuses[name] = "PASS" if code == 0 else "FAIL"
                print(f"{name}: {statuses[name]}")
                overall = max(overall, code)
            write_json(os.path.join(out, "verify-all.json"), {"statuses": statuses, "exit_status": overall})
            return overall

        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
