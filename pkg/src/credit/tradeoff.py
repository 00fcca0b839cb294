"""Utility-verifiability trade-off and noise-scale selection.

Adding isotropic noise with scale ``sigma`` inflates the differential
entropy of the released embeddings by

    dH_util(sigma) = 1/2 * sum_j ln(1 + sigma^2 / lambda_j)

over the covariance eigenvalues ``lambda_j``. On the verification side the
certified error bounds gamma1 and gamma2 induce a decision-uncertainty
entropy ``H_ver = pi0 h(gamma1) + pi1 h(gamma2)`` with ``h`` the natural
binary entropy. ``select_sigma`` minimises the weighted sum over a grid,
breaking ties toward the smaller noise scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .certification import (
    CertificationParams,
    bounded_difference_constant,
    credit_threshold,
    type1_bound,
    type2_bound,
)
from .embedding_io import EmbeddingMatrix
from .errors import CalibrationError, DomainError, MarginError, ParamError
from .gaussian_mechanism import DefenseParams, mi_upper_bound

# Floor applied to covariance eigenvalues so rank-deficient spectra stay
# usable in the entropy formula.
SPECTRUM_FLOOR = 1e-12


def covariance_spectrum(m: EmbeddingMatrix) -> np.ndarray:
    """Eigenvalues of the sample covariance (divisor n - 1), descending,
    clamped below at ``SPECTRUM_FLOOR``."""
    if m.n < 2:
        raise ParamError(f"need at least 2 rows to estimate covariance, got {m.n}")
    cov = np.cov(m.values, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    eigenvalues = np.linalg.eigvalsh(cov)
    return np.maximum(eigenvalues, SPECTRUM_FLOOR)[::-1].copy()


def utility_entropy_gain(spectrum: Sequence[float] | np.ndarray, sigma: float) -> float:
    """Differential-entropy increase caused by noise at scale ``sigma``."""
    spec = np.asarray(spectrum, dtype=np.float64)
    if spec.size == 0:
        raise ParamError("spectrum must be nonempty")
    if not np.all(np.isfinite(spec)) or np.any(spec <= 0.0):
        raise ParamError("spectrum entries must be positive reals")
    if not (math.isfinite(sigma) and sigma >= 0.0):
        raise ParamError(f"sigma must be a nonnegative real, got {sigma!r}")
    if sigma == 0.0:
        return 0.0
    return 0.5 * float(np.log1p(sigma * sigma / spec).sum())


def binary_entropy(p: float) -> float:
    """Natural-log binary entropy with the h(0) = h(1) = 0 convention."""
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"binary_entropy needs p in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log(p) - (1.0 - p) * math.log(1.0 - p)


def verification_entropy(gamma1: float, gamma2: float, pi0: float = 0.5, pi1: float = 0.5) -> float:
    """Prior-weighted entropy of the two certified error bounds."""
    if abs(pi0 + pi1 - 1.0) > 1e-12:
        raise ParamError(f"priors must sum to 1, got {pi0!r} + {pi1!r}")
    if pi0 < 0.0 or pi1 < 0.0:
        raise ParamError("priors must be nonnegative")
    return pi0 * binary_entropy(gamma1) + pi1 * binary_entropy(gamma2)


@dataclass(frozen=True)
class TradeoffRow:
    """One evaluated grid point. ``vacuous`` rows could not be scored and
    carry an infinite objective."""

    sigma: float
    beta: float
    tau: float
    delta_h_util: float
    gamma1: float
    gamma2: float
    h_ver: float
    objective: float
    vacuous: bool


@dataclass(frozen=True)
class TradeoffConfig:
    """Grid, weights, priors, spectrum and the certification template whose
    ``beta`` is recomputed at every grid point."""

    sigma_grid: tuple[float, ...]
    spectrum: tuple[float, ...]
    cert_template: CertificationParams
    lambda_util: float = 1.0
    lambda_ver: float = 1.0
    pi0: float = 0.5
    pi1: float = 0.5
    n_comp: int = 1

    def __post_init__(self) -> None:
        grid = tuple(float(s) for s in self.sigma_grid)
        if len(grid) == 0:
            raise ParamError("sigma_grid must be nonempty")
        if any(not (math.isfinite(s) and s > 0.0) for s in grid):
            raise ParamError("sigma_grid entries must be positive reals")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ParamError("sigma_grid must be strictly increasing")
        spec = tuple(float(v) for v in self.spectrum)
        if len(spec) == 0:
            raise ParamError("spectrum must be nonempty")
        if any(not (math.isfinite(v) and v > 0.0) for v in spec):
            raise ParamError("spectrum entries must be positive reals")
        if self.lambda_util < 0.0 or self.lambda_ver < 0.0:
            raise ParamError("lambda weights must be nonnegative")
        if abs(self.pi0 + self.pi1 - 1.0) > 1e-12 or self.pi0 < 0.0 or self.pi1 < 0.0:
            raise ParamError(f"priors must be nonnegative and sum to 1, got {self.pi0!r}, {self.pi1!r}")
        if self.n_comp < 1:
            raise ParamError(f"n_comp must be >= 1, got {self.n_comp}")
        object.__setattr__(self, "sigma_grid", grid)
        object.__setattr__(self, "spectrum", spec)


def default_sigma_grid(low: float = 0.01, high: float = 1.0, points: int = 41) -> tuple[float, ...]:
    """Log-spaced grid used when the caller does not supply one."""
    if not (0.0 < low < high):
        raise ParamError(f"need 0 < low < high, got {low!r}, {high!r}")
    if points < 2:
        raise ParamError(f"need at least 2 grid points, got {points}")
    return tuple(float(s) for s in np.geomspace(low, high, points))


def evaluate_grid(cfg: TradeoffConfig, defense: DefenseParams) -> list[TradeoffRow]:
    """Score every grid point. ``defense`` supplies the sensitivity bound;
    its own sigma is ignored."""
    if len(cfg.spectrum) != cfg.cert_template.d:
        raise ParamError(
            f"spectrum has {len(cfg.spectrum)} eigenvalues but the certification "
            f"template declares d={cfg.cert_template.d}"
        )
    rows = []
    for sigma in cfg.sigma_grid:
        beta = mi_upper_bound(defense.delta_sensitivity, sigma, cfg.n_comp)
        params = replace(cfg.cert_template, beta=beta)
        tau = credit_threshold(params)
        c_k = bounded_difference_constant(params.k, params.v_size)
        dh = utility_entropy_gain(cfg.spectrum, sigma)
        i_sur = beta if params.i_sur is None else params.i_sur
        try:
            gamma1 = type1_bound(tau, params.v_size, c_k, params.mu_ind)
            gamma2 = type2_bound(tau, params.v_size, c_k, i_sur)
        except MarginError:
            rows.append(
                TradeoffRow(
                    sigma=sigma, beta=beta, tau=tau, delta_h_util=dh,
                    gamma1=1.0, gamma2=1.0, h_ver=0.0,
                    objective=math.inf, vacuous=True,
                )
            )
            continue
        h_ver = verification_entropy(gamma1, gamma2, cfg.pi0, cfg.pi1)
        objective = cfg.lambda_util * dh + cfg.lambda_ver * h_ver
        rows.append(
            TradeoffRow(
                sigma=sigma, beta=beta, tau=tau, delta_h_util=dh,
                gamma1=gamma1, gamma2=gamma2, h_ver=h_ver,
                objective=objective, vacuous=False,
            )
        )
    return rows


def select_sigma(cfg: TradeoffConfig, defense: DefenseParams) -> tuple[float, list[TradeoffRow]]:
    """Grid argmin of the weighted objective; ties go to the smaller sigma.

    Raises CalibrationError when every grid point is vacuous.
    """
    rows = evaluate_grid(cfg, defense)
    best = None
    for row in rows:
        if row.vacuous:
            continue
        if best is None or row.objective < best.objective:
            best = row
    if best is None:
        raise CalibrationError("every grid point yields a vacuous bound")
    return best.sigma, rows


_CSV_COLUMNS = ("sigma", "beta", "tau", "delta_h_util", "gamma1", "gamma2", "h_ver", "objective")


def tradeoff_table_csv(rows: Sequence[TradeoffRow]) -> str:
    """CSV rendering of the objective table, 17 significant digits."""
    lines = [",".join(_CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(format(getattr(row, col), ".17g") for col in _CSV_COLUMNS))
    return "\n".join(lines) + "\n"
