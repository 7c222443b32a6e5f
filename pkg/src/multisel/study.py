"""Monte Carlo studies, metric tables and bootstrap standard errors.

Seeding scheme: replication ``r`` of a study with seed ``s`` simulates its
dataset from ``default_rng((s, r))``. Bootstrap resample ``b`` of that
replication draws its indices from ``default_rng((s, r, 1, b))``. Results
are reduced in replication order, so tables do not depend on how many
worker processes ran them.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd

from .pipeline import (
    MULTINOMIAL_ESTIMATORS,
    ORDERED_ESTIMATORS,
    PipelineOptions,
    default_estimators,
    estimate,
)
from .simulate import SimDataset, generate

Z95 = 1.959964
MAX_FAILURE_RATE = 0.05


class StudyError(RuntimeError):
    """Too many replications failed for some estimator."""

    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo configuration.

    ``family`` is ``ordered`` or ``multinomial``; ``dgp`` the design number.
    ``estimators=None`` selects the standard battery for the design.
    ``bootstrap`` is the number of bootstrap resamples per replication
    (0 disables it). ``workers`` only affects wall time.
    """

    family: str
    dgp: int
    n: int = 5000
    R: int = 200
    seed: int = 0
    estimators: tuple | None = None
    delta: float = 1.0
    bootstrap: int = 0
    workers: int = 1
    options: PipelineOptions = field(default_factory=PipelineOptions)

    def __post_init__(self):
        if self.family not in ("ordered", "multinomial"):
            raise ValueError(f"unknown DGP family {self.family!r}")
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if self.n < 100:
            raise ValueError("n must be >= 100")
        if self.bootstrap == 1 or self.bootstrap < 0:
            raise ValueError("bootstrap needs B >= 2 (or 0 to disable)")
        valid_dgp = (1, 2, 3) if self.family == "ordered" else (1, 2, 3, 4)
        if self.dgp not in valid_dgp:
            raise ValueError(f"unknown {self.family} DGP {self.dgp}")
        if self.estimators is not None:
            if len(self.estimators) == 0:
                raise ValueError("estimator list is empty")
            menu = ORDERED_ESTIMATORS if self.family == "ordered" else MULTINOMIAL_ESTIMATORS
            unknown = [e for e in self.estimators if e not in menu]
            if unknown:
                raise ValueError(f"estimators {unknown} are not defined for {self.family} designs")
            object.__setattr__(self, "estimators", tuple(self.estimators))

    @property
    def battery(self):
        return self.estimators or default_estimators(self.family, self.dgp)

    def to_dict(self):
        out = asdict(self)
        out["estimators"] = list(self.battery)
        return out


# metrics -------------------------------------------------------------------


class MetricsTable:
    """Per (estimator, category, coefficient) Monte Carlo metrics.

    Columns of :attr:`frame`: ``estimator, category, coef, true, rmse,
    bias, abs_bias, coverage, mean_se, sd, n_ok, n_failed``.
    """

    def __init__(self, frame: pd.DataFrame, meta: dict | None = None):
        self.frame = frame.reset_index(drop=True)
        self.meta = dict(meta or {})

    def __eq__(self, other):
        return isinstance(other, MetricsTable) and self.frame.equals(other.frame)

    def by_category(self):
        """Averages over coefficients within each estimator and category."""
        g = self.frame.groupby(["estimator", "category"], sort=False)
        return g[["rmse", "abs_bias", "coverage"]].mean().reset_index()

    def overall(self):
        """Averages over all categories and coefficients per estimator."""
        g = self.frame.groupby("estimator", sort=False)
        return g[["rmse", "abs_bias", "coverage"]].mean().reset_index()

    def cell(self, estimator, category, metric):
        t = self.by_category()
        m = (t.estimator == estimator) & (t.category == category)
        return float(t.loc[m, metric].iloc[0])

    def total(self, estimator, metric):
        t = self.overall()
        return float(t.loc[t.estimator == estimator, metric].iloc[0])

    def failures(self):
        g = self.frame.groupby("estimator", sort=False)
        return g["n_failed"].first().to_dict()

    def to_csv(self, path=None):
        text = self.frame.to_csv(index=False, float_format="%.17g")
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_text(self):
        """Aligned table: rows are category x metric, columns estimators."""
        cat = self.by_category()
        names = list(dict.fromkeys(cat.estimator))
        labels = {"rmse": "RMSE", "abs_bias": "|Bias|", "coverage": "Coverage"}
        buf = io.StringIO()
        head = f"{'':<8}{'':<10}" + "".join(f"{n:>10}" for n in names)
        buf.write(head + "\n" + "-" * len(head) + "\n")
        for k in sorted(cat.category.unique()):
            for i, (key, lab) in enumerate(labels.items()):
                first = f"Occ. {k}" if i == 0 else ""
                vals = []
                for n in names:
                    m = (cat.estimator == n) & (cat.category == k)
                    vals.append(f"{cat.loc[m, key].iloc[0]:>10.3f}" if m.any() else f"{'--':>10}")
                buf.write(f"{first:<8}{lab:<10}" + "".join(vals) + "\n")
        tot = self.overall()
        buf.write("-" * len(head) + "\n")
        for i, (key, lab) in enumerate(labels.items()):
            first = "All" if i == 0 else ""
            vals = [f"{tot.loc[tot.estimator == n, key].iloc[0]:>10.3f}" for n in names]
            buf.write(f"{first:<8}{lab:<10}" + "".join(vals) + "\n")
        fails = self.failures()
        if any(fails.values()):
            buf.write("failed replications: "
                      + ", ".join(f"{k}={v}" for k, v in fails.items()) + "\n")
        return buf.getvalue()


def _metrics(truth, draws, names):
    """Frame of metrics from ``draws[name] = list of (beta, se) or None``."""
    rows = []
    K, p = truth.shape
    for name in names:
        ok = [r for r in draws[name] if r is not None]
        failed = len(draws[name]) - len(ok)
        if ok:
            B = np.array([b for b, _ in ok])
            S = np.array([s for _, s in ok])
            err = B - truth
            bias = err.mean(axis=0)
            rmse = np.sqrt((err**2).mean(axis=0))
            cover = (np.abs(err) <= Z95 * S).mean(axis=0)
            mean_se = S.mean(axis=0)
            sd = B.std(axis=0, ddof=1) if len(ok) > 1 else np.zeros_like(bias)
        else:
            bias = rmse = cover = mean_se = sd = np.full((K, p), np.nan)
        for k in range(K):
            for j in range(p):
                rows.append({
                    "estimator": name, "category": k + 1, "coef": j + 1,
                    "true": truth[k, j], "rmse": rmse[k, j], "bias": bias[k, j],
                    "abs_bias": abs(bias[k, j]), "coverage": cover[k, j],
                    "mean_se": mean_se[k, j], "sd": sd[k, j],
                    "n_ok": len(ok), "n_failed": failed,
                })
    return pd.DataFrame(rows)


# replications --------------------------------------------------------------


def replication_dataset(cfg: SimConfig, r: int) -> SimDataset:
    return generate(cfg.family, cfg.dgp, cfg.n, (cfg.seed, r), cfg.delta)


def _replicate(args):
    cfg, r = args
    ds = replication_dataset(cfg, r)
    out = estimate(ds, cfg.battery, cfg.options)
    boot = {}
    if cfg.bootstrap:
        for name in cfg.battery:
            if out[name] is None:
                boot[name] = None
                continue
            try:
                boot[name] = bootstrap_se(ds, name, cfg.bootstrap, (cfg.seed, r, 1), cfg.options)
            except ValueError:
                boot[name] = None
    return r, out, boot, ds.beta


def _run_all(cfg: SimConfig):
    jobs = [(cfg, r) for r in range(cfg.R)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_replicate, jobs, chunksize=max(1, cfg.R // (4 * cfg.workers))))
    else:
        results = [_replicate(j) for j in jobs]
    return sorted(results, key=lambda t: t[0])


def run_study(cfg: SimConfig, check_failures: bool = True) -> MetricsTable:
    """Simulate ``cfg.R`` datasets and tabulate every estimator's metrics.

    Failed fits are excluded and counted; if more than 5% of replications
    fail for any estimator a :class:`StudyError` carrying the table is
    raised (unless ``check_failures`` is off).
    """
    results = _run_all(cfg)
    truth = results[0][3]
    draws = {name: [res[1][name] for res in results] for name in cfg.battery}
    table = MetricsTable(_metrics(truth, draws, cfg.battery), cfg.to_dict())
    if check_failures:
        for name, nf in table.failures().items():
            if nf > MAX_FAILURE_RATE * cfg.R:
                raise StudyError(f"{name}: {nf} of {cfg.R} replications failed", table)
    return table


# bootstrap -----------------------------------------------------------------


def resample(ds: SimDataset, idx) -> SimDataset:
    """Dataset made of rows ``idx`` of ``ds`` (ground truth resampled alongside)."""
    idx = np.asarray(idx)
    truth = {}
    for key, val in ds.truth.items():
        arr = np.asarray(val)
        truth[key] = arr[idx] if arr.ndim >= 1 and arr.shape[0] == ds.n and key in (
            "index", "utilities") else val
    return replace(ds, n=idx.size, X=ds.X[idx], d=ds.d[idx], y=ds.y[idx], truth=truth)


def bootstrap_se(ds: SimDataset, estimator: str, B: int, seed,
                 opts: PipelineOptions | None = None):
    """Pairs-bootstrap standard errors of one estimator's slopes.

    Whole observations are resampled and both stages refitted ``B`` times.
    Resamples on which the estimator fails are skipped.

    Returns
    -------
    ndarray
        ``(K, p)`` standard deviations (``ddof=1``) of the resampled slopes.
    """
    if B < 2:
        raise ValueError("bootstrap needs B >= 2")
    seed = tuple(np.atleast_1d(seed).tolist())
    draws = []
    for b in range(B):
        rng = np.random.default_rng(seed + (b,))
        idx = rng.integers(0, ds.n, ds.n)
        res = estimate(resample(ds, idx), [estimator], opts)[estimator]
        if res is not None:
            draws.append(res[0])
    if len(draws) < 2:
        raise ValueError("fewer than two successful bootstrap resamples")
    return np.array(draws).std(axis=0, ddof=1)


@dataclass
class BootstrapTable:
    """Analytical versus bootstrap standard errors per coefficient."""

    frame: pd.DataFrame

    def to_csv(self, path=None):
        text = self.frame.to_csv(index=False, float_format="%.17g")
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_text(self):
        cols = ["true", "mc_sd", "hc_se", "boot_se", "hc_over_boot", "cov_hc", "cov_boot"]
        buf = io.StringIO()
        head = f"{'estimator':<10}{'occ':>4}{'coef':>5}" + "".join(f"{c:>13}" for c in cols)
        buf.write(head + "\n" + "-" * len(head) + "\n")
        for _, r in self.frame.iterrows():
            buf.write(f"{r.estimator:<10}{r.category:>4}{r.coef:>5}"
                      + "".join(f"{r[c]:>13.3f}" for c in cols) + "\n")
        return buf.getvalue()


def run_bootstrap_study(cfg: SimConfig) -> BootstrapTable:
    """Per replication: fit, then bootstrap the same pipeline ``cfg.bootstrap`` times."""
    if cfg.bootstrap < 2:
        raise ValueError("bootstrap study needs cfg.bootstrap >= 2")
    results = _run_all(cfg)
    truth = results[0][3]
    K, p = truth.shape
    rows = []
    for name in cfg.battery:
        ok = [(res[1][name], res[2][name]) for res in results
              if res[1][name] is not None and res[2][name] is not None]
        if not ok:
            continue
        Bh = np.array([fit[0] for fit, _ in ok])
        Sh = np.array([fit[1] for fit, _ in ok])
        Sb = np.array([bs for _, bs in ok])
        err = np.abs(Bh - truth)
        mc_sd = Bh.std(axis=0, ddof=1) if len(ok) > 1 else np.zeros((K, p))
        for k in range(K):
            for j in range(p):
                hc, bt = Sh[:, k, j].mean(), Sb[:, k, j].mean()
                rows.append({
                    "estimator": name, "category": k + 1, "coef": j + 1,
                    "true": truth[k, j], "mc_sd": mc_sd[k, j], "hc_se": hc,
                    "boot_se": bt, "hc_over_boot": hc / bt,
                    "cov_hc": float((err[:, k, j] <= Z95 * Sh[:, k, j]).mean()),
                    "cov_boot": float((err[:, k, j] <= Z95 * Sb[:, k, j]).mean()),
                    "n_ok": len(ok),
                })
    return BootstrapTable(pd.DataFrame(rows))
