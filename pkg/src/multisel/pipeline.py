"""End-to-end estimator recipes: selection model, controls, outcome fits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .basis import SieveSpec
from .design import sieve_design, with_intercept
from .first_stage import FirstStageError, fit_mnl, fit_ordered, fit_thresholds
from .optimize import OptimizationError
from .second_stage import ControlSpec, build_controls, fit_outcome
from .simulate import oracle_controls

ORDERED_ESTIMATORS = ("OLS", "Linear", "Oracle", "Sieve")
MULTINOMIAL_ESTIMATORS = ("OLS", "MLogit", "Oracle", "Sieve", "Exch-L2")

# failures that exclude a replication instead of aborting a study
ESTIMATION_ERRORS = (FirstStageError, OptimizationError, ValueError, TypeError,
                     linalg.LinAlgError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class PipelineOptions:
    """Tuning shared by all recipes.

    ``first_stage`` sets the marginal bases of the selection-equation sieve
    and ``pair_stage`` the bases multiplied into its pairwise tensors
    (bilinear by default). ``second_stage`` sets the control basis. Unset
    knot counts follow the growth rules of :func:`default_interior_knots`.
    ``interact_binary``
    multiplies binary covariates into the continuous spline blocks of the
    selection design. Selection-design columns with total mass below
    ``min_column_mass`` are dropped.
    """

    first_stage: SieveSpec = field(default_factory=SieveSpec)
    pair_stage: SieveSpec | None = field(default_factory=lambda: SieveSpec(order=2, n_interior=0))
    second_stage: SieveSpec = field(default_factory=SieveSpec)
    interact_binary: bool = True
    min_column_mass: float = 10.0


def default_estimators(family: str, dgp: int):
    if family == "ordered":
        return ORDERED_ESTIMATORS
    if dgp == 1:
        return MULTINOMIAL_ESTIMATORS[:4]
    return MULTINOMIAL_ESTIMATORS


def selection_design(X, continuous, opts: PipelineOptions):
    """Intercept plus a full-rank sieve expansion of the covariates."""
    Q = sieve_design(X, continuous, opts.first_stage, opts.interact_binary, opts.pair_stage)
    return with_intercept(Q, min_mass=opts.min_column_mass)[0]


def fit_categories(y, x, d, K, spec: ControlSpec, fs=None, Q=None, controls=None,
                   categories=None):
    """Outcome fits for each category ``k = 1..K``.

    Controls come from ``controls(k)`` when given (oracle designs), else
    from ``build_controls`` on the first-stage fit ``fs`` and design ``Q``.
    Returns a dict ``k -> FitResult``.
    """
    out = {}
    for k in categories or range(1, K + 1):
        rows = np.flatnonzero(d == k)
        if controls is not None:
            C = controls(k)
        elif spec.variant == "none":
            C = np.empty((rows.size, 0))
        else:
            C = build_controls(spec, fs, Q[rows], k)
        out[k] = fit_outcome(y[rows], x[rows], C, spec)
    return out


def _control_spec(name, ds, opts):
    s2 = opts.second_stage
    if name == "OLS":
        return ControlSpec("none", sieve=s2)
    if ds.family == "ordered":
        return {
            "Linear": ControlSpec("parametric-ordered", sieve=s2),
            "Oracle": ControlSpec("parametric-ordered", sieve=s2),
            "Sieve": ControlSpec("sieve-ordered", sieve=s2),
        }[name]
    if name == "Oracle":
        if ds.dgp in (1, 2):
            return ControlSpec("mlogit-iv", sieve=s2, linear=True)
        return ControlSpec("sieve-probs", sieve=s2)
    if name.startswith("Exch-L"):
        return ControlSpec("exch-L", L=int(name[len("Exch-L"):]), sieve=s2)
    return {
        "MLogit": ControlSpec("mlogit-iv", sieve=s2),
        "Sieve": ControlSpec("sieve-probs", sieve=s2),
    }[name]


def estimate(ds, estimators, opts: PipelineOptions | None = None):
    """Run named estimators on a simulated dataset.

    Returns a dict ``name -> (beta, se)`` with ``(K, p)`` arrays, or
    ``name -> None`` when that estimator failed on this sample. The sieve
    first stage is fitted once and shared by all estimators that use it.
    """
    opts = opts or PipelineOptions()
    cache = {}

    def first_stage(kind):
        if kind not in cache:
            if kind == "linear-ordered":
                cache[kind] = (fit_ordered(ds.d, ds.X, ds.K), ds.X)
            else:
                Q = selection_design(ds.X, ds.continuous, opts)
                fit = fit_thresholds if kind == "thresholds" else fit_mnl
                cache[kind] = (fit(ds.d, Q, ds.K), Q)
        return cache[kind]

    results = {}
    for name in estimators:
        try:
            spec = _control_spec(name, ds, opts)
            fs = Q = oracle = None
            if name == "Oracle":
                def oracle(k):
                    return oracle_controls(ds, k)
            elif name == "Linear":
                fs, Q = first_stage("linear-ordered")
            elif name != "OLS":
                fs, Q = first_stage("thresholds" if ds.family == "ordered" else "mnl")
            fits = fit_categories(ds.y, ds.X, ds.d, ds.K, spec, fs, Q, oracle)
            beta = np.array([fits[k].beta for k in range(1, ds.K + 1)])
            se = np.array([fits[k].se for k in range(1, ds.K + 1)])
            results[name] = (beta, se)
        except ESTIMATION_ERRORS:
            results[name] = None
    return results
