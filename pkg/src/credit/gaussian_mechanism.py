"""Additive isotropic Gaussian defense over embedding rows.

The released embedding is ``e_g(x) = e_f(x) + Z`` with ``Z ~ N(0, sigma^2 I_d)``.
Noise for row ``i`` is drawn from a generator derived from ``(seed, i)``, so a
row's noise never depends on how many rows accompany it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embedding_io import EmbeddingMatrix
from .errors import ParamError, SensitivityError

# Declared sensitivity may exceed the clipping diameter by at most this much.
SENSITIVITY_ABS_TOL = 1e-12


@dataclass(frozen=True)
class DefenseParams:
    """Noise scale, l2 sensitivity bound, dimensionality and seed."""

    sigma: float
    delta_sensitivity: float
    d: int
    seed: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise ParamError(f"sigma must be a positive real, got {self.sigma!r}")
        if not (math.isfinite(self.delta_sensitivity) and self.delta_sensitivity > 0.0):
            raise ParamError(
                f"delta_sensitivity must be a positive real, got {self.delta_sensitivity!r}"
            )
        if self.d < 1:
            raise ParamError(f"d must be >= 1, got {self.d}")
        if not 0 <= self.seed < 2**64:
            raise ParamError(f"seed must fit in an unsigned 64-bit word, got {self.seed}")


def row_noise(p: DefenseParams, row_index: int) -> np.ndarray:
    """The exact noise vector row ``row_index`` receives under ``p``."""
    if row_index < 0:
        raise ParamError(f"row_index must be nonnegative, got {row_index}")
    seq = np.random.SeedSequence(entropy=p.seed, spawn_key=(row_index,))
    return np.random.default_rng(seq).standard_normal(p.d) * p.sigma


def apply_mechanism(m: EmbeddingMatrix, p: DefenseParams) -> EmbeddingMatrix:
    """Add per-row Gaussian noise to a clipped matrix.

    Requires the matrix to carry a clip radius consistent with the declared
    sensitivity (diameter of the clipping ball, ``2 * clip_radius``). The
    result no longer carries a clip radius: noise is unbounded.
    """
    if m.clip_radius is None:
        raise SensitivityError("input matrix carries no clip radius; clip it first")
    if m.d != p.d:
        raise ParamError(f"matrix is {m.d}-dimensional but params declare d={p.d}")
    diameter = 2.0 * m.clip_radius
    if diameter > p.delta_sensitivity + SENSITIVITY_ABS_TOL:
        raise SensitivityError(
            f"clipping diameter {diameter:.17g} exceeds declared sensitivity "
            f"{p.delta_sensitivity:.17g}"
        )
    noise = np.empty((m.n, m.d), dtype=np.float64)
    for i in range(m.n):
        noise[i] = row_noise(p, i)
    return EmbeddingMatrix(values=m.values + noise, label=m.label, clip_radius=None)


def calibrate_sigma_dp(epsilon: float, delta_dp: float, delta_sensitivity: float) -> float:
    """Classical Gaussian-mechanism calibration.

    Returns ``sigma = sqrt(2 ln(1.25/delta_dp)) * delta_sensitivity / epsilon``
    for ``epsilon, delta_dp in (0, 1)``.
    """
    if not (0.0 < epsilon < 1.0):
        raise ParamError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not (0.0 < delta_dp < 1.0):
        raise ParamError(f"delta_dp must lie in (0, 1), got {delta_dp!r}")
    if not (math.isfinite(delta_sensitivity) and delta_sensitivity > 0.0):
        raise ParamError(
            f"delta_sensitivity must be a positive real, got {delta_sensitivity!r}"
        )
    return math.sqrt(2.0 * math.log(1.25 / delta_dp)) * delta_sensitivity / epsilon


def mi_upper_bound(delta_sensitivity: float, sigma: float, n_comp: int = 1) -> float:
    """Information ceiling of the mechanism, in nats.

    ``beta = delta_sensitivity^2 * n_comp / (2 sigma^2)``. ``n_comp`` counts
    adaptive compositions; the single-release bound (the default) is the one
    the matching lower-bound construction nearly attains.
    """
    if not (math.isfinite(delta_sensitivity) and delta_sensitivity > 0.0):
        raise ParamError(
            f"delta_sensitivity must be a positive real, got {delta_sensitivity!r}"
        )
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ParamError(f"sigma must be a positive real, got {sigma!r}")
    if n_comp < 1:
        raise ParamError(f"n_comp must be >= 1, got {n_comp}")
    return delta_sensitivity * delta_sensitivity * n_comp / (2.0 * sigma * sigma)
