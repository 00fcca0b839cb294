"""Ground-truth channels and empirical checks for the certified bounds.

Two oracles anchor the estimator and the information ceiling:

* the closed-form MI of a correlated bivariate Gaussian,
  ``-1/2 ln(1 - rho^2)``;
* the exact rate of the binary channel ``Y = X + N(0, sigma^2)`` with
  ``X`` uniform on ``{-Delta/2, +Delta/2}``, computed as
  ``H(Y) - 1/2 ln(2 pi e sigma^2)`` by composite Gauss-Legendre quadrature.

The binary channel is the construction that nearly attains the ceiling:
for ``beta <= 0.2`` its rate is bracketed by ``[beta/4 - beta^2, beta]``.
``tightness_check`` asserts that bracket; ``monte_carlo_error_rates``
replays the decision rule over synthetic trials and compares the observed
error frequency with the certified bound.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .certification import (
    CertificationParams,
    DECISION_INDEPENDENT,
    DECISION_SURROGATE,
    bounded_difference_constant,
    credit_threshold,
    type1_bound,
    type2_bound,
    verify,
)
from .embedding_io import EmbeddingMatrix, clip_embeddings
from .errors import DomainError, ParamError, TightnessViolation
from .gaussian_mechanism import DefenseParams, apply_mechanism, mi_upper_bound
from .ksg_mi import KsgConfig

# Gauss-Legendre order per panel; panels double until two successive
# composite estimates agree to this tolerance.
_PANEL_ORDER = 32
_REFINE_TOL = 1e-9
_MAX_PANEL_DOUBLINGS = 16

SCENARIO_INDEPENDENT = "independent"
SCENARIO_SURROGATE = "surrogate"


def gaussian_mi_closed_form(rho: float) -> float:
    """MI of a bivariate Gaussian with correlation ``rho``, in nats."""
    if not (math.isfinite(rho) and -1.0 < rho < 1.0):
        raise DomainError(f"rho must lie strictly inside (-1, 1), got {rho!r}")
    return -0.5 * math.log1p(-rho * rho)


@dataclass(frozen=True)
class ChannelSpec:
    """Binary-input Gaussian channel: signal separation and noise scale."""

    delta: float
    sigma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta > 0.0):
            raise ParamError(f"delta must be a positive real, got {self.delta!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise ParamError(f"sigma must be a positive real, got {self.sigma!r}")

    @property
    def beta(self) -> float:
        """Single-release information ceiling for this channel."""
        return mi_upper_bound(self.delta, self.sigma)


def _mixture_neg_p_log_p(y: np.ndarray, spec: ChannelSpec) -> np.ndarray:
    a = 0.5 * spec.delta
    norm = 1.0 / (spec.sigma * math.sqrt(2.0 * math.pi))
    p = 0.5 * norm * (
        np.exp(-0.5 * ((y - a) / spec.sigma) ** 2)
        + np.exp(-0.5 * ((y + a) / spec.sigma) ** 2)
    )
    out = np.zeros_like(p)
    positive = p > 0.0
    out[positive] = -p[positive] * np.log(p[positive])
    return out


def binary_channel_mi(spec: ChannelSpec, quadrature_points: int = 1024) -> float:
    """Exact rate of the binary Gaussian channel, in nats.

    Integrates the output entropy over ``[-delta/2 - 10 sigma,
    +delta/2 + 10 sigma]`` with composite Gauss-Legendre panels, doubling
    the panel count until successive estimates differ by less than 1e-9.
    """
    if quadrature_points < 1024:
        raise ParamError(f"quadrature_points must be >= 1024, got {quadrature_points}")
    lo = -0.5 * spec.delta - 10.0 * spec.sigma
    hi = +0.5 * spec.delta + 10.0 * spec.sigma
    nodes, weights = np.polynomial.legendre.leggauss(_PANEL_ORDER)

    def composite(panels: int) -> float:
        edges = np.linspace(lo, hi, panels + 1)
        total = 0.0
        for left, right in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (left + right)
            half = 0.5 * (right - left)
            total += half * float(
                (weights * _mixture_neg_p_log_p(mid + half * nodes, spec)).sum()
            )
        return total

    panels = max(1, -(-quadrature_points // _PANEL_ORDER))
    estimate = composite(panels)
    for _ in range(_MAX_PANEL_DOUBLINGS):
        panels *= 2
        refined = composite(panels)
        if abs(refined - estimate) < _REFINE_TOL:
            estimate = refined
            break
        estimate = refined
    h_y = estimate
    h_noise = 0.5 * math.log(2.0 * math.pi * math.e * spec.sigma * spec.sigma)
    return max(0.0, h_y - h_noise)


@dataclass(frozen=True)
class TightnessEntry:
    delta: float
    sigma: float
    beta: float
    mi: float
    ratio: float
    lower: float | None
    upper: float


@dataclass(frozen=True)
class TightnessReport:
    entries: tuple[TightnessEntry, ...]

    def to_text(self) -> str:
        lines = []
        for i, e in enumerate(self.entries):
            lines.append(
                f"channel_{i} = delta={e.delta:.17g} sigma={e.sigma:.17g} "
                f"beta={e.beta:.17g} mi={e.mi:.17g} ratio={e.ratio:.17g}"
            )
        return "\n".join(lines) + "\n"


def tightness_check(specs: list[ChannelSpec] | tuple[ChannelSpec, ...]) -> TightnessReport:
    """Verify the bracket ``I <= beta`` (always) and ``I >= beta/4 - beta^2``
    (for ``beta <= 0.2``) over channels ordered by decreasing ceiling.

    Raises TightnessViolation naming the first offending channel.
    """
    if len(specs) == 0:
        raise ParamError("tightness_check needs at least one channel")
    betas = [s.beta for s in specs]
    if any(b2 >= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ParamError("channels must be ordered by strictly decreasing beta")
    entries = []
    for spec in specs:
        beta = spec.beta
        mi = binary_channel_mi(spec)
        if mi > beta:
            raise TightnessViolation(
                f"channel delta={spec.delta} sigma={spec.sigma}: rate {mi:.17g} "
                f"exceeds ceiling {beta:.17g}"
            )
        lower = beta / 4.0 - beta * beta if beta <= 0.2 else None
        if lower is not None and mi < lower:
            raise TightnessViolation(
                f"channel delta={spec.delta} sigma={spec.sigma}: rate {mi:.17g} "
                f"fell below the guaranteed {lower:.17g}"
            )
        entries.append(
            TightnessEntry(
                delta=spec.delta, sigma=spec.sigma, beta=beta, mi=mi,
                ratio=mi / beta, lower=lower, upper=beta,
            )
        )
    return TightnessReport(entries=tuple(entries))


@dataclass(frozen=True)
class TrialGenerator:
    """Synthetic data family for Monte-Carlo error-rate checks."""

    n: int = 1000
    d: int = 4
    clip_radius: float = 1.0
    sigma: float = 0.5
    perturbation: float = 0.01
    base_seed: int = 20260819

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ParamError(f"n must be >= 2, got {self.n}")
        if self.d < 1:
            raise ParamError(f"d must be >= 1, got {self.d}")
        if not (math.isfinite(self.clip_radius) and self.clip_radius > 0.0):
            raise ParamError(f"clip_radius must be a positive real, got {self.clip_radius!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise ParamError(f"sigma must be a positive real, got {self.sigma!r}")
        if not (math.isfinite(self.perturbation) and self.perturbation > 0.0):
            raise ParamError(f"perturbation must be a positive real, got {self.perturbation!r}")


@dataclass(frozen=True)
class McReport:
    scenario: str
    trials: int
    errors: int
    empirical_rate: float
    bound: float
    slack: float
    passed: bool
    elapsed_seconds: float

    def to_text(self) -> str:
        return (
            f"scenario = {self.scenario}\n"
            f"trials = {self.trials}\n"
            f"errors = {self.errors}\n"
            f"empirical_rate = {self.empirical_rate:.17g}\n"
            f"bound = {self.bound:.17g}\n"
            f"slack = {self.slack:.17g}\n"
            f"passed = {'true' if self.passed else 'false'}\n"
            f"elapsed_seconds = {self.elapsed_seconds:.17g}\n"
        )


def monte_carlo_error_rates(
    scenario: str,
    trials: int,
    gen: TrialGenerator,
    params: CertificationParams,
    cfg: KsgConfig = KsgConfig(),
    threads: int = 1,
) -> McReport:
    """Replay the decision rule on synthetic pairs and compare the observed
    error frequency against the certified bound plus three binomial
    standard errors (taken at the bound value)."""
    if scenario not in (SCENARIO_INDEPENDENT, SCENARIO_SURROGATE):
        raise ParamError(
            f"scenario must be {SCENARIO_INDEPENDENT!r} or {SCENARIO_SURROGATE!r}, got {scenario!r}"
        )
    if trials < 100:
        raise ParamError(f"need at least 100 trials for a stable rate, got {trials}")
    if gen.n != params.v_size:
        raise ParamError(f"generator n={gen.n} must equal params v_size={params.v_size}")

    tau = credit_threshold(params)
    c_k = bounded_difference_constant(params.k, params.v_size)
    if scenario == SCENARIO_INDEPENDENT:
        bound = type1_bound(tau, params.v_size, c_k, params.mu_ind)
        bad_decision = DECISION_SURROGATE
    else:
        i_sur = params.beta if params.i_sur is None else params.i_sur
        bound = type2_bound(tau, params.v_size, c_k, i_sur)
        bad_decision = DECISION_INDEPENDENT

    defense_template = DefenseParams(
        sigma=gen.sigma, delta_sensitivity=2.0 * gen.clip_radius, d=gen.d, seed=0
    )
    started = time.perf_counter()
    errors = 0
    for t in range(trials):
        streams = np.random.SeedSequence(entropy=gen.base_seed, spawn_key=(t,)).spawn(3)
        data_rng = np.random.default_rng(streams[0])
        base = clip_embeddings(
            EmbeddingMatrix(data_rng.standard_normal((gen.n, gen.d))), gen.clip_radius
        )
        defense = DefenseParams(
            sigma=gen.sigma,
            delta_sensitivity=defense_template.delta_sensitivity,
            d=gen.d,
            seed=int(streams[1].generate_state(1, np.uint64)[0]),
        )
        defended = apply_mechanism(base, defense)
        suspect_rng = np.random.default_rng(streams[2])
        if scenario == SCENARIO_INDEPENDENT:
            suspect = clip_embeddings(
                EmbeddingMatrix(suspect_rng.standard_normal((gen.n, gen.d))), gen.clip_radius
            )
        else:
            scale = gen.perturbation * float(np.std(defended.values))
            suspect = EmbeddingMatrix(
                defended.values + suspect_rng.standard_normal((gen.n, gen.d)) * scale
            )
        cert = verify(suspect, defended, params, cfg, defense=defense, threads=threads)
        if cert.decision == bad_decision:
            errors += 1
    elapsed = time.perf_counter() - started
    rate = errors / trials
    slack = 3.0 * math.sqrt(bound * (1.0 - bound) / trials)
    return McReport(
        scenario=scenario,
        trials=trials,
        errors=errors,
        empirical_rate=rate,
        bound=bound,
        slack=slack,
        passed=rate <= bound + slack,
        elapsed_seconds=elapsed,
    )
