"""Built-in experiment presets.

Each preset is a complete config reproducing one empirical check from
the suite of dominance, duality, robustness, and representation claims
the package validates. Names carry the claim tag; descriptions say what
is being checked. Budgets are the full acceptance budgets; scale them
down with ``--budget-scale`` for smoke runs.
"""

from .config import parse

_PRESETS = {}


def _register(name, description, text):
    _PRESETS[name] = {"description": description, "text": text.strip() + "\n"}


_register(
    "theorem2-normal",
    "theorem-2 check: KL risk of the James-Stein plug-in predictive density "
    "never exceeds the equivariant benchmark on a location grid, normal model",
    """
experiment.kind = risk-compare
compare.kind = plugin
model.d = 3
model.k = 5
model.c = 1.0
model.eta = 1.0
estimator.kind = james-stein
estimator.a = auto
grid.theta_norms = 0,1,2,5,10
grid.f = normal
budget.n = 1000000
budget.seed = 20260801
verdict.enabled = true
verdict.ci_level = 0.99
verdict.eps = 1e-4
""",
)

_register(
    "theorem6-student",
    "theorem-6 check: the theorem-2 dominance verdict is unchanged under "
    "Student(5) and two-atom scale mixtures with matched seeds",
    """
experiment.kind = risk-compare
compare.kind = plugin
model.d = 3
model.k = 5
model.c = 1.0
model.eta = 1.0
estimator.kind = james-stein
estimator.a = auto
grid.theta_norms = 0,1,2,5,10
grid.f = student:5; discrete:1*0.5+4*0.5
budget.n = 1000000
budget.seed = 20260801
verdict.enabled = true
verdict.ci_level = 0.99
verdict.eps = 1e-4
""",
)

_register(
    "theorem1-pointpred",
    "theorem-1 check: in the canonical prediction model (reached through the "
    "coordinate map), the shrinkage predictor beats the benchmark for "
    "increasing concave losses",
    """
experiment.kind = point-risk
compare.mode = canonical
model.d = 3
model.k = 5
model.c = 1.0
model.eta = 1.0
estimator.kind = james-stein
estimator.a = auto
loss.kinds = log; reflected-normal:2
grid.theta_norms = 0,2,5
grid.f = normal; student:5
budget.n = 1000000
budget.seed = 20260802
verdict.enabled = true
verdict.ci_level = 0.99
verdict.eps = 1e-4
""",
)

_register(
    "theorem2-allrho",
    "theorem-2 loss robustness: point-prediction risk differences stay "
    "nonnegative for log, fractional-power, and reflected-normal losses",
    """
experiment.kind = point-risk
compare.mode = predict
model.d = 3
model.k = 5
model.c = 1.0
model.eta = 1.0
estimator.kind = james-stein
estimator.a = auto
loss.kinds = log; power:0.5; reflected-normal:2
grid.theta_norms = 0,1,2,5,10
grid.f = normal; student:5
budget.n = 1000000
budget.seed = 20260803
verdict.enabled = true
verdict.ci_level = 0.99
verdict.eps = 1e-4
""",
)

_register(
    "theorem4-mixture-point",
    "theorem-4 check: a point-estimation dominance established in the normal "
    "model persists under every preset scale mixture",
    """
experiment.kind = point-risk
compare.mode = estimate
model.d = 3
model.k = 5
model.c = 1.0
model.eta = 1.0
estimator.kind = james-stein
estimator.a = auto
grid.theta_norms = 0,1,2,5,10
grid.f = normal; student:5; discrete:1*0.5+4*0.5
budget.n = 1000000
budget.seed = 20260804
verdict.enabled = true
verdict.ci_level = 0.99
verdict.eps = 1e-4
""",
)

_register(
    "theorem5-f-independence",
    "theorem-5 check: brute-force posterior-predictive densities computed "
    "under different radial kernels coincide pointwise",
    """
experiment.kind = bayes-pde-eval
check.mode = f-independence
model.d = 1
model.k = 2
model.c = 1.0
model.eta = 1.0
check.f = normal; student:3
check.priors = flat; twopoint:m=1.5
prior.a = -1
data.x = 0.7
data.u = 1.1,-0.4
check.y_points = 9
check.y_span = 4.0
check.tol = 1e-5
budget.n = 1
budget.seed = 20260805
""",
)

_register(
    "corollary2-harmonic",
    "corollary-2 check: the harmonic-prior Bayes predictive density beats the "
    "equivariant benchmark in KL risk, normal and Student(5) kernels",
    """
experiment.kind = risk-compare
compare.kind = bayes
model.d = 3
model.k = 5
model.c = 1.0
model.eta = 1.0
prior.kind = harmonic
prior.a = -1
prior.evaluator = auto
grid.theta_norms = 0,2
grid.f = normal; student:5
budget.n = 100000
budget.is_budget = 200000
budget.seed = 20260806
verdict.enabled = true
verdict.ci_level = 0.95
verdict.eps = 1e-3
""",
)

_register(
    "duality-identity",
    "lemma-1 check: the per-sample log-ratio of plug-in and benchmark Student "
    "densities equals its closed algebraic form to 1e-12",
    """
experiment.kind = risk-compare
compare.kind = plugin
check.duality_residual = true
check.residual_tol = 1e-12
model.d = 3
model.k = 5
model.c = 1.0
model.eta = 1.0
estimator.kind = james-stein
estimator.a = auto
grid.c = 0.5,1,2
grid.theta_norms = 1
grid.f = normal; student:5
budget.n = 200000
budget.seed = 20260807
verdict.enabled = true
verdict.ci_level = 0.99
verdict.eps = 1e-4
""",
)

_register(
    "stein-identity",
    "lemma-2 check: the integration-by-parts identity holds without the "
    "1/gamma factor; the gamma variant fails for non-normal kernels",
    """
experiment.kind = stein-check
battery.cases = normal|linear|1|0; student:5|linear|1|0; discrete:1*0.5+4*0.5|linear|1|0; normal|james-stein|3|2; student:5|james-stein|3|2
battery.tol = 1e-6
budget.n = 400000
budget.seed = 20260808
""",
)

_register(
    "posterior-factorization",
    "theorem-3 check: the factorized location posterior matches a brute-force "
    "two-dimensional quadrature of the raw posterior, for every kernel",
    """
experiment.kind = posterior-check
model.d = 1
model.k = 3
model.c = 1.0
model.eta = 1.0
prior.kind = flat
prior.a = 0
check.f = normal; student:4
check.priors = flat; twopoint:m=1.5
data.x = 0.6
data.u = 0.8,-0.5,0.3
grid.theta = -8,8,161
check.tol = 1e-6
budget.n = 1
budget.seed = 20260809
""",
)

_register(
    "pi0a-oracle",
    "flat-prior oracle: the numeric predictive density matches the "
    "closed-form Student family over (d, k, a) grids",
    """
experiment.kind = bayes-pde-eval
check.mode = closed-form-oracle
model.c = 1.0
check.d_values = 1,2
check.k_values = 2,5
check.a_values = -1,0,1
check.y_points = 50
check.y_span = 4.0
check.tol = 1e-3
budget.n = 1
budget.seed = 20260810
""",
)


def catalog():
    """Name -> description for every built-in preset."""
    return {name: info["description"] for name, info in _PRESETS.items()}


def preset_text(name: str) -> str:
    if name not in _PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(_PRESETS))}")
    return _PRESETS[name]["text"]


def preset_config(name: str) -> dict:
    return parse(preset_text(name))


def preset_names():
    return list(_PRESETS)
