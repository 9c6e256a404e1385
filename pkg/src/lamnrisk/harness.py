"""Monte Carlo risk of estimators in shrinking neighbourhoods.

Paths are simulated at ``theta = t + delta_n h`` for each ``h`` of a grid,
with statistics evaluated at ``t``. The normalised error of each estimator
is passed through the (truncated) loss and averaged.

Replicates are grouped into fixed-size chunks. Chunk ``c`` at local point
``h`` draws from the counter-based stream keyed by ``(seed, bits(h), c)``, so
the numbers do not depend on how chunks are spread over worker processes.
Results are collected in chunk order and summed with ``math.fsum``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import estimators as est_mod
from . import losses as loss_mod
from .bound import minimax_bound_truncated
from .mixing import chi2_1, exp1
from .models import make_model
from .rng import check_seed, substream

log = logging.getLogger(__name__)

DEFAULT_TRUNCATION = 50.0
MAX_DEGENERATE_FRACTION = 1e-3


class HarnessError(RuntimeError):
    """The simulation produced too many unusable paths."""


def limit_law(model_name):
    """Law of the limiting information level for each example model."""
    return {"ar1": chi2_1(), "gw": exp1()}[model_name]


@dataclass(frozen=True)
class RiskConfig:
    """Everything that determines a risk report.

    ``estimators`` holds estimator specs (``"mle"``, ``"corrected"`` or dicts
    as accepted by :func:`lamnrisk.estimators.from_dict`); a corrected
    estimator without its own loss uses ``loss``. ``sweep`` lists the ``k``
    of the shifted family ``(k/4) w^{-1/2} beta0(w)`` evaluated at ``h = 0``.
    """

    model: str = "gw"
    t: float = 2.0
    n: int = 30
    loss: loss_mod.LossSpec = field(default_factory=lambda: loss_mod.check(4, 1, DEFAULT_TRUNCATION))
    estimators: tuple = ("mle", "corrected")
    reps: int = 100_000
    h_grid: tuple = (-2.0, -1.0, 0.0, 1.0, 2.0)
    seed: int = 0
    workers: int = 1
    chunk_size: int = 5000
    sweep: tuple = ()
    allow_untruncated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "h_grid", tuple(float(h) for h in self.h_grid))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "sweep", tuple(int(k) for k in self.sweep))
        object.__setattr__(self, "seed", check_seed(self.seed))
        if self.reps < 1000:
            raise ValueError("reps must be at least 1000")
        if self.n < 1 or self.chunk_size < 1 or self.workers < 1:
            raise ValueError("n, chunk_size and workers must be positive")
        if 0.0 not in self.h_grid:
            raise ValueError("h_grid must contain 0")
        if self.loss.truncation is None:
            if not self.allow_untruncated:
                raise ValueError("risk needs a truncated loss; set allow_untruncated to override")
            warnings.warn("untruncated risks may have infinite variance", RuntimeWarning, stacklevel=2)
        model = make_model(self.model, self.t)
        delta = model.norming_constant(self.n)
        for h in self.h_grid:
            model._check(self.t + delta * h)

    def to_dict(self):
        d = asdict(self)
        d["loss"] = self.loss.to_dict()
        d["estimators"] = [e if isinstance(e, str) else dict(e) for e in self.estimators]
        d["h_grid"] = list(self.h_grid)
        d["sweep"] = list(self.sweep)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "loss" in d:
            spec = d["loss"]
            d["loss"] = loss_mod.parse(spec) if isinstance(spec, str) else loss_mod.from_dict(spec)
        if "theta0" in d and "t" not in d:
            d["t"] = d.pop("theta0")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    def resolved(self):
        """The config as embedded in reports: everything except ``workers``."""
        d = self.to_dict()
        d.pop("workers")
        return d

    def config_hash(self):
        """SHA-256 of the canonical JSON form of :meth:`resolved`."""
        d = self.resolved()
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _h_key(h):
    return struct.unpack("<Q", struct.pack("<d", float(h) + 0.0))[0]


def _chunks(reps, size):
    starts = range(0, reps, size)
    return [(i, min(size, reps - s)) for i, s in enumerate(starts)]


def _names(specs):
    out = []
    for s in specs:
        name = s if isinstance(s, str) else s.get("name") or s.get("estimator", "mle")
        out.append(str(name))
    if len(set(out)) != len(out):
        raise ValueError("estimator names must be unique")
    return out


def build_estimators(cfg):
    """Fitted estimators named as in the config, plus ``sweep_k`` entries."""
    ests = {}
    for name, spec in zip(_names(cfg.estimators), cfg.estimators):
        ests[name] = est_mod.from_dict(spec, cfg.model, cfg.t, default_loss=cfg.loss)
    sweep = {f"sweep_{k}": e for k, e in est_mod.sweep_estimators(cfg.model, cfg.t, cfg.loss, cfg.sweep).items()}
    return ests, sweep


def _simulate_stats(model_name, t, n, h, seed, chunk, count):
    model = make_model(model_name, t)
    delta = model.norming_constant(n)
    rng = substream(seed, _h_key(h), chunk)
    traj = model.simulate(n, rng, count, theta=t + delta * h)
    return model.local_stats(traj, mask_degenerate=True)


def _chunk_task(args):
    model_name, t, n, h, seed, chunk, count, loss, ests, what = args
    st = _simulate_stats(model_name, t, n, h, seed, chunk, count)
    out = {}
    for name, e in ests.items():
        err = est_mod.normalized_from_stats(e, st, h)
        out[name] = err if what == "error" else np.asarray(loss(err), dtype=float)
    out["_W"] = st.W_n
    out["_G"] = st.G_n
    return out


def _run(cfg, h, ests, what="loss", reps=None):
    """Per-replicate values for every estimator at ``h``, in replicate order."""
    reps = cfg.reps if reps is None else reps
    tasks = [(cfg.model, cfg.t, cfg.n, h, cfg.seed, c, k, cfg.loss, ests, what) for c, k in _chunks(reps, cfg.chunk_size)]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_chunk_task, tasks))
    else:
        parts = [_chunk_task(a) for a in tasks]
    keys = list(ests) + ["_W", "_G"]
    return {k: np.concatenate([p[k] for p in parts]) for k in keys}


def _mean_se(x):
    x = x[np.isfinite(x)]
    m = math.fsum(x) / x.size
    se = math.sqrt(math.fsum((x - m) ** 2) / (x.size - 1) / x.size)
    return m, se


def _degenerate(values, reps):
    bad = int(np.sum(~np.isfinite(values)))
    if bad > MAX_DEGENERATE_FRACTION * reps:
        raise HarnessError(f"{bad} of {reps} paths are degenerate")
    return bad


@dataclass
class RiskReport:
    """Risk estimates for one configuration.

    ``risks[name][i]`` is ``(risk, stderr)`` at ``h_grid[i]``. ``gaps[name][i]``
    is the paired difference ``risk(mle) - risk(name)`` with its standard
    error. ``bound`` is the truncated minimax bound under the limit law.
    ``diagnostics`` compares the ``h = 0`` draws of ``(W_n, G_n)`` with their
    limit laws (see :func:`diagnose`).
    """

    config: dict
    config_hash: str
    h_grid: list
    risks: dict
    local_sup: dict
    gaps: dict
    sweep: dict
    bound: float | None
    bound_divergent: bool
    degenerate: int
    diagnostics: dict

    def risk(self, name, h=0.0):
        return self.risks[name][self.h_grid.index(float(h))]

    def sweep_argmin(self):
        if not self.sweep:
            return None
        return min(self.sweep, key=lambda k: self.sweep[k][0])

    def to_dict(self):
        d = asdict(self)
        d["sweep"] = {str(k): v for k, v in self.sweep.items()}
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def rows(self):
        """CSV rows ``(estimator, h, risk, stderr)``."""
        for name, vals in self.risks.items():
            for h, (r, se) in zip(self.h_grid, vals):
                yield name, h, r, se


def run_risk(cfg, compute_bound=True):
    """Risk of every configured estimator over the whole ``h`` grid."""
    ests, sweep = build_estimators(cfg)
    names = list(ests)
    risks = {k: [] for k in names}
    gaps = {k: [] for k in names if k != "mle"} if "mle" in names else {}
    sweep_out = {}
    diagnostics = {}
    degenerate = 0
    for h in cfg.h_grid:
        use = dict(ests)
        if h == 0.0:
            use.update(sweep)
        vals = _run(cfg, h, use)
        degenerate += _degenerate(vals["_W"], cfg.reps)
        for k in names:
            risks[k].append(_mean_se(vals[k]))
        for k in gaps:
            gaps[k].append(_mean_se(vals["mle"] - vals[k]))
        if h == 0.0:
            diagnostics = _diagnostics(vals["_W"], vals["_G"], limit_law(cfg.model))
            for k in cfg.sweep:
                sweep_out[k] = _mean_se(vals[f"sweep_{k}"])
        log.debug("h=%g done", h)
    local_sup = {k: max(v, key=lambda rs: rs[0]) for k, v in risks.items()}
    bound, divergent = None, False
    if compute_bound and cfg.loss.truncation is not None:
        b = minimax_bound_truncated(cfg.loss.untruncated(), cfg.loss.truncation, limit_law(cfg.model))
        bound, divergent = b.value, b.divergent
    return RiskReport(
        cfg.resolved(), cfg.config_hash(), list(cfg.h_grid), risks, local_sup, gaps, sweep_out, bound, divergent,
        degenerate, diagnostics,
    )


def estimate_risk(cfg, estimator, h):
    """``(risk, stderr)`` of one fitted estimator at local point ``h``."""
    vals = _run(cfg, float(h), {"e": estimator})
    _degenerate(vals["_W"], cfg.reps)
    return _mean_se(vals["e"])


def local_sup_risk(cfg, estimator):
    """Largest risk over ``cfg.h_grid``, as ``(risk, stderr)``."""
    return max((estimate_risk(cfg, estimator, h) for h in cfg.h_grid), key=lambda rs: rs[0])


@dataclass(frozen=True)
class BiasMeasure:
    """Mean normalised error at ``h = 0`` and the mean correction on the same paths."""

    bias: float
    stderr: float
    reference: float


def bias_measure(cfg, estimator):
    vals = _run(cfg, 0.0, {"e": estimator}, what="error")
    _degenerate(vals["_W"], cfg.reps)
    m, se = _mean_se(vals["e"])
    w = vals["_W"][np.isfinite(vals["_W"])]
    ref = math.fsum(estimator.correction(w)) / w.size
    return BiasMeasure(m, se, ref)


def ks_statistic(sample, cdf):
    """Kolmogorov-Smirnov distance between a sample and a continuous cdf."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("sample is empty")
    return float(stats.kstest(x, cdf).statistic)


def _diagnostics(W, G, law):
    ok = np.isfinite(W)
    W, G = W[ok], G[ok]
    return {
        "ks_W": ks_statistic(W, law.cdf),
        "ks_G": ks_statistic(G, stats.norm.cdf),
        "corr_G_W": float(np.corrcoef(G, W)[0, 1]),
        "corr_G2_W": float(np.corrcoef(G * G, W)[0, 1]),
    }


def diagnose(model_name, theta0, n_list, reps, seed):
    """Convergence diagnostics of ``(W_n, G_n)`` along increasing ``n``.

    Returns one dict per ``n`` with KS distances to the limit laws and the
    correlations of ``G_n`` and ``G_n^2`` with ``W_n``.
    """
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    model = make_model(model_name, theta0)
    law = limit_law(model.name)
    out = []
    for n in n_list:
        traj = model.simulate(n, substream(check_seed(seed), n), reps)
        st = model.local_stats(traj, mask_degenerate=True)
        out.append({"n": n, **_diagnostics(st.W_n, st.G_n, law)})
    return out
