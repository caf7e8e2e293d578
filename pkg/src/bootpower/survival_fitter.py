"""Cox proportional-hazards regression with an optional shared per-cluster
frailty, fitted by Newton iterations on the (penalized) partial likelihood.

Ties are handled with the Breslow approximation throughout: all subjects
whose follow-up reaches an event time, including censorings recorded at that
exact time, belong to its risk set. The frailty is a normal random intercept
per cluster on the log-hazard scale; its variance can be held fixed or
profiled by an outer loop that re-estimates it from the fitted random
effects plus the matching block of the inverse penalized information.

The likelihood internals exploit two structural facts to stay fast on
bootstrap-sized data: risk sets are suffixes of the time-sorted order, so
all per-event sums come from reverse cumulative sums; and summing each
event's normalized risk-set contribution over events is equivalent to one
weighted sum over subjects with the Breslow cumulative hazard as weight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data_model import AnalysisOutcome, SurvivalRecord
from .errors import DomainError
from .analysis import wald_test

FRAILTY_NONE = "none"
FRAILTY_FIXED = "fixed"
FRAILTY_PROFILED = "profiled"

INTERACTION_TERM = "arm:period"

_SIGMA2_FLOOR = 1e-10
_MAX_STEP_HALVINGS = 10


@dataclass(frozen=True)
class CoxModelSpec:
    """Model formula and fitting controls.

    ``covariates`` names subject-level covariates; arm, period and their
    interaction are added as 0/1 terms when the flags are set. ``frailty``
    is one of ``none``, ``fixed`` (normal with ``frailty_variance`` held
    fixed) or ``profiled`` (normal, variance re-estimated by the outer
    loop, starting from ``frailty_variance``).
    """

    covariates: tuple[str, ...] = ()
    include_arm: bool = False
    include_period: bool = False
    include_interaction: bool = False
    frailty: str = FRAILTY_NONE
    frailty_variance: float = 0.25
    tolerance: float = 1e-9
    outer_tolerance: float = 1e-6
    max_inner_iterations: int = 50
    max_outer_iterations: int = 20
    coefficient_bound: float = 20.0

    def __post_init__(self) -> None:
        if self.frailty not in (FRAILTY_NONE, FRAILTY_FIXED, FRAILTY_PROFILED):
            raise DomainError(f"unknown frailty mode {self.frailty!r}")
        if not (self.tolerance > 0):
            raise DomainError("tolerance must be positive")
        if self.max_inner_iterations < 1 or self.max_outer_iterations < 1:
            raise DomainError("iteration limits must be >= 1")
        if self.frailty != FRAILTY_NONE and not (self.frailty_variance > 0):
            raise DomainError("frailty variance must be positive")
        if self.include_interaction and not (self.include_arm and self.include_period):
            raise DomainError("the interaction term requires both arm and period terms")


@dataclass(frozen=True)
class CoxFit:
    """Fitted coefficients with the fixed-effect block of the inverse
    (penalized) observed information as variance matrix."""

    names: tuple[str, ...]
    coefficients: np.ndarray
    variance: np.ndarray
    frailty_variance: float
    random_effects: dict[str, float]
    log_likelihood: float
    converged: bool
    iterations: int
    detail: str = ""

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self._index(name)])

    def coefficient_variance(self, name: str) -> float:
        i = self._index(name)
        return float(self.variance[i, i])

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DomainError(f"model has no coefficient {name!r}") from None


class _CoxCore:
    """Sorted-order workspace for one dataset; reused across Newton steps."""

    def __init__(self, times: np.ndarray, events: np.ndarray, X: np.ndarray,
                 cluster_idx: Optional[np.ndarray], n_clusters: int):
        n = len(times)
        order = np.argsort(times, kind="stable")
        t_sorted = times[order]
        self.n = n
        self.p = X.shape[1]
        self.q = n_clusters
        self.X = X[order]
        self.events = events[order].astype(float)
        self.cluster = cluster_idx[order] if cluster_idx is not None else None
        # risk set of an event at time t is the suffix starting at the first
        # index of t's tie group; cumulative hazard at time t includes every
        # event up to the last index of the tie group
        first = np.searchsorted(t_sorted, t_sorted, side="left")
        self.group_last = np.searchsorted(t_sorted, t_sorted, side="right") - 1
        self.event_pos = np.flatnonzero(self.events == 1.0)
        self.event_start = first[self.event_pos]
        if self.q:
            # per-cluster sorted positions and a prefix-sum slot for suffix queries
            self.members = [np.flatnonzero(self.cluster == c) for c in range(self.q)]
        # the profile loop re-enters at unchanged (beta, b) with a new
        # penalty, which touches none of the unpenalized quantities
        self._cache_key: Optional[tuple[bytes, bytes]] = None
        self._cache_val: Optional[tuple[float, np.ndarray, np.ndarray]] = None

    def _suffix_cluster_sums(self, r: np.ndarray) -> np.ndarray:
        """S1 over cluster indicator columns at each event's risk-set start."""
        out = np.empty((len(self.event_pos), self.q))
        for c, pos in enumerate(self.members):
            csum = np.concatenate(([0.0], np.cumsum(r[pos])))
            total = csum[-1]
            idx = np.searchsorted(pos, self.event_start, side="left")
            out[:, c] = total - csum[idx]
        return out

    def loglik(self, beta: np.ndarray, b: np.ndarray) -> float:
        eta = self.X @ beta if self.p else np.zeros(self.n)
        if self.q:
            eta = eta + b[self.cluster]
        with np.errstate(over="ignore"):
            r = np.exp(eta)
        s0 = np.cumsum(r[::-1])[::-1]
        s0_event = s0[self.event_start]
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(eta[self.event_pos].sum() - np.log(s0_event).sum())

    def score_information(
        self, beta: np.ndarray, b: np.ndarray
    ) -> tuple[float, np.ndarray, np.ndarray]:
        """Log partial likelihood, score and observed information at (beta, b).

        The information is assembled blockwise: cluster-indicator columns
        make the subject-sum part diagonal in the frailty block, and the
        per-event mean outer products need only one (events x dim) matrix.
        """
        key = (beta.tobytes(), b.tobytes())
        if key == self._cache_key:
            ll, score, info = self._cache_val
            return ll, score.copy(), info.copy()
        p, q = self.p, self.q
        dim = p + q
        eta = self.X @ beta if p else np.zeros(self.n)
        if q:
            eta = eta + b[self.cluster]
        with np.errstate(over="ignore"):
            r = np.exp(eta)
        s0 = np.cumsum(r[::-1])[::-1]
        s0_event = s0[self.event_start]
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = float(eta[self.event_pos].sum() - np.log(s0_event).sum())

        # Breslow hazard increments accumulate into per-subject weights
        h = np.zeros(self.n)
        h[self.event_pos] = 1.0 / s0_event
        A = np.cumsum(h)[self.group_last]
        w = r * A
        resid = self.events - w

        score = np.empty(dim)
        info = np.zeros((dim, dim))
        if p:
            score[:p] = self.X.T @ resid
            WX = w[:, None] * self.X
            info[:p, :p] = self.X.T @ WX
        if q:
            score[p:] = np.bincount(self.cluster, weights=resid, minlength=q)
            np.fill_diagonal(info[p:, p:], np.bincount(self.cluster, weights=w, minlength=q))
            for j in range(p):
                info[p:, j] = np.bincount(self.cluster, weights=WX[:, j], minlength=q)
            info[:p, p:] = info[p:, :p].T

        # subtract the per-event outer products of risk-set means
        n_events = len(self.event_pos)
        if n_events:
            V = np.empty((n_events, dim))
            if p:
                rX = np.cumsum((r[:, None] * self.X)[::-1], axis=0)[::-1]
                V[:, :p] = rX[self.event_start]
            if q:
                V[:, p:] = self._suffix_cluster_sums(r)
            V /= s0_event[:, None]
            info -= V.T @ V
        self._cache_key = key
        self._cache_val = (ll, score.copy(), info.copy())
        return ll, score, info


def _newton_solve(
    core: _CoxCore,
    beta: np.ndarray,
    b: np.ndarray,
    sigma2: float,
    spec: CoxModelSpec,
    names: Sequence[str],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, int, bool, str]:
    """Maximize the penalized partial likelihood at fixed sigma2.

    Returns (beta, b, penalized information at solution, penalized loglik,
    iterations, converged, detail).
    """
    p, q = core.p, core.q
    penalty_diag = np.zeros(p + q)
    if q:
        penalty_diag[p:] = 1.0 / sigma2

    def penalized(ll: float, b_vec: np.ndarray) -> float:
        if q:
            return ll - float(b_vec @ b_vec) / (2.0 * sigma2)
        return ll

    def refresh(beta_v: np.ndarray, b_v: np.ndarray):
        ll, score, info = core.score_information(beta_v, b_v)
        if q:
            score[p:] -= b_v / sigma2
        return penalized(ll, b_v), score, info + np.diag(penalty_diag)

    pll, score, info_pen = refresh(beta, b)

    for iteration in range(1, spec.max_inner_iterations + 1):
        try:
            step = np.linalg.solve(info_pen, score)
        except np.linalg.LinAlgError:
            return beta, b, info_pen, pll, iteration, False, "singular information matrix"

        scale = 1.0
        improved = False
        for _ in range(_MAX_STEP_HALVINGS + 1):
            beta_new = beta + scale * step[:p]
            b_new = b + scale * step[p:]
            pll_new = penalized(core.loglik(beta_new, b_new), b_new)
            if math.isfinite(pll_new) and pll_new >= pll:
                improved = True
                break
            scale *= 0.5
        if not improved:
            # flat within precision counts as converged; anything else stalled
            if math.isfinite(pll_new) and abs(pll_new - pll) < spec.tolerance * max(1.0, abs(pll)):
                return beta, b, info_pen, pll, iteration, True, ""
            return beta, b, info_pen, pll, iteration, False, "step halving failed to improve the penalized likelihood"
        beta, b = beta_new, b_new
        previous = pll
        pll, score, info_pen = refresh(beta, b)

        # a fixed effect sitting past the bound while its score still pushes
        # outward is the signature of a monotone likelihood
        for j in range(p):
            if abs(beta[j]) > spec.coefficient_bound and score[j] * beta[j] > 0 and abs(score[j]) > 1e-12:
                detail = f"monotone likelihood suspected: coefficient {names[j]!r} diverged"
                return beta, b, info_pen, pll, iteration, False, detail

        if abs(pll - previous) < spec.tolerance * max(1.0, abs(previous)):
            return beta, b, info_pen, pll, iteration, True, ""
    return beta, b, info_pen, pll, spec.max_inner_iterations, False, "inner Newton iteration limit reached"


def _check_rank(core: _CoxCore, penalty_diag: np.ndarray, names: Sequence[str]) -> None:
    """Fail fast when design columns are collinear on the risk sets."""
    _, _, info = core.score_information(np.zeros(core.p), np.zeros(core.q))
    info = info + np.diag(penalty_diag)
    if info.shape[0] == 0:
        return
    eigvals, eigvecs = np.linalg.eigh(info)
    if eigvals[-1] <= 0:
        raise DomainError(
            f"design matrix carries no information on the risk sets; collinear columns: {list(names)}"
        )
    if eigvals[0] > 1e-10 * eigvals[-1]:
        return
    null = np.abs(eigvecs[: core.p, 0])
    flagged = [names[j] for j in range(core.p) if null[j] > 1e-3 * max(null.max(), 1e-300)]
    raise DomainError(f"design matrix is rank deficient on the risk sets; collinear columns: {flagged}")


def fit_cox(
    subjects: Sequence[SurvivalRecord],
    spec: CoxModelSpec,
    arm: Optional[Sequence[int]] = None,
    period: Optional[Sequence[int]] = None,
) -> CoxFit:
    """Fit the Cox model described by ``spec`` to assembled subject records.

    ``arm`` and ``period`` are 0/1 indicators aligned with ``subjects``;
    they are required when the corresponding model terms are included.
    Monotone-likelihood divergence yields a non-converged fit rather than an
    exception; structural problems (no events, rank deficiency) raise.
    """
    n = len(subjects)
    if n == 0:
        raise DomainError("cannot fit a Cox model to an empty dataset")
    times = np.array([rec.time for rec in subjects], dtype=float)
    events = np.array([rec.event for rec in subjects], dtype=float)
    if events.sum() < 1:
        raise DomainError("cannot fit a Cox model to a dataset with no events")

    names: list[str] = list(spec.covariates)
    columns: list[np.ndarray] = []
    for name in spec.covariates:
        try:
            columns.append(np.array([rec.covariate(name) for rec in subjects], dtype=float))
        except KeyError:
            raise DomainError(f"covariate {name!r} missing from the data") from None
    if spec.include_arm:
        if arm is None:
            raise DomainError("the model includes an arm term but no arm indicators were given")
        names.append("arm")
        columns.append(np.asarray(arm, dtype=float))
    if spec.include_period:
        if period is None:
            raise DomainError("the model includes a period term but no period indicators were given")
        names.append("period")
        columns.append(np.asarray(period, dtype=float))
    if spec.include_interaction:
        names.append(INTERACTION_TERM)
        columns.append(columns[-2] * columns[-1])
    X = np.column_stack(columns) if columns else np.zeros((n, 0))

    if spec.frailty == FRAILTY_NONE:
        cluster_idx, q = None, 0
    else:
        codes: dict[str, int] = {}
        cluster_idx = np.array([codes.setdefault(rec.cluster_id, len(codes)) for rec in subjects])
        q = len(codes)

    core = _CoxCore(times, events, X, cluster_idx, q)
    p = core.p

    penalty_diag = np.zeros(p + q)
    sigma2 = spec.frailty_variance if q else 0.0
    if q:
        penalty_diag[p:] = 1.0 / sigma2
    _check_rank(core, penalty_diag, names)

    beta = np.zeros(p)
    b = np.zeros(q)
    if p + q == 0:
        ll = core.loglik(beta, b)
        return CoxFit((), beta, np.zeros((0, 0)), 0.0, {}, ll, True, 0)

    total_iterations = 0
    if spec.frailty != FRAILTY_PROFILED:
        beta, b, info_pen, _, iters, converged, detail = _newton_solve(core, beta, b, sigma2, spec, names)
        total_iterations = iters
    else:
        # Steffensen-accelerated fixed-point iteration on the variance update
        # sigma2 <- (sum b^2 + trace of the frailty block of the inverse
        # penalized information) / q; each round takes two plain updates and
        # extrapolates through them
        converged, detail = False, "outer profile iteration limit reached"
        info_pen = None
        for _ in range(spec.max_outer_iterations):
            path = [sigma2]
            inner_failed = False
            for _ in range(2):
                beta, b, info_pen, _, iters, inner_ok, detail_inner = _newton_solve(
                    core, beta, b, path[-1], spec, names
                )
                total_iterations += iters
                if not inner_ok:
                    converged, detail, inner_failed = False, detail_inner, True
                    break
                cov = np.linalg.inv(info_pen)
                path.append(max(float(b @ b + np.trace(cov[p:, p:])) / q, _SIGMA2_FLOOR))
                if abs(path[-1] - path[-2]) <= spec.outer_tolerance * max(path[-1], 1e-3):
                    converged, detail = True, ""
                    break
            sigma2 = path[-1]
            if inner_failed or converged:
                break
            denom = path[2] - 2.0 * path[1] + path[0]
            if abs(denom) > 1e-300:
                accelerated = path[0] - (path[1] - path[0]) ** 2 / denom
                if math.isfinite(accelerated) and accelerated > _SIGMA2_FLOOR:
                    sigma2 = accelerated
        if converged:
            # one final inner polish at the settled variance
            beta, b, info_pen, _, iters, converged, detail = _newton_solve(
                core, beta, b, sigma2, spec, names
            )
            total_iterations += iters

    ll = core.loglik(beta, b)
    try:
        cov_full = np.linalg.inv(info_pen)
        variance = cov_full[:p, :p]
    except np.linalg.LinAlgError:
        variance = np.full((p, p), np.nan)
        if converged:
            converged, detail = False, "information matrix singular at the solution"

    random_effects: dict[str, float] = {}
    if q:
        by_code = sorted(codes.items(), key=lambda kv: kv[1])
        random_effects = {cid: float(b[code]) for cid, code in by_code}

    return CoxFit(
        names=tuple(names),
        coefficients=beta,
        variance=variance,
        frailty_variance=float(sigma2) if q else 0.0,
        random_effects=random_effects,
        log_likelihood=ll,
        converged=converged,
        iterations=total_iterations,
        detail=detail,
    )


def test_interaction(fit: CoxFit, alpha: float) -> AnalysisOutcome:
    """Wald chi-square (1 df) test of the arm-by-period coefficient."""
    if INTERACTION_TERM not in fit.names:
        raise DomainError(f"fit has no {INTERACTION_TERM!r} coefficient")
    if not fit.converged:
        return AnalysisOutcome.failed(fit.detail or "Cox fit did not converge")
    estimate = fit.coefficient(INTERACTION_TERM)
    variance = fit.coefficient_variance(INTERACTION_TERM)
    return wald_test(estimate, variance, alpha)
