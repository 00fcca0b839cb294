"""Decision threshold, finite-sample error bounds, and certificates.

The threshold interpolates between the information ceiling ``beta`` and a
query-budget discount:

    tau = beta * (1 - rho * exp(-Q beta / (eta d |V|)))

so ``tau`` always lies in ``[beta (1 - rho), beta)``. False-alarm and
missed-detection bounds follow from McDiarmid's inequality with the
bounded-difference constant ``C_k = 2 (2k + 1) ln n``: each is
``exp(-2 |V| margin^2 / C_k^2)`` for the respective margin. A nonpositive
margin makes a bound vacuous; ``verify`` records that in the certificate
instead of aborting.
"""

from __future__ import annotations

import datetime as _dt
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path

from ._version import __version__ as _tool_version
from .embedding_io import EmbeddingMatrix
from .errors import FormatError, IoError, MarginError, ParamError
from .gaussian_mechanism import DefenseParams
from .ksg_mi import KsgConfig, ksg_estimate

# Number of significant digits for reals in certificate files; chosen so
# float64 values survive a parse round trip exactly.
_REAL_DIGITS = 17

DECISION_SURROGATE = "surrogate"
DECISION_INDEPENDENT = "independent"


@dataclass(frozen=True)
class CertificationParams:
    """Threshold and bound inputs: correlation discount ``rho``, efficiency
    ``eta``, query budget ``q_budget``, verification-set size ``v_size``,
    embedding dimension ``d``, neighbour order ``k``, information ceiling
    ``beta``, and the two hypothesis anchors ``mu_ind`` and ``i_sur``."""

    rho: float
    eta: float
    q_budget: int
    v_size: int
    d: int
    k: int
    beta: float
    mu_ind: float = 0.0
    i_sur: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.rho < 1.0):
            raise ParamError(f"rho must lie in (0, 1), got {self.rho!r}")
        if not (0.0 < self.eta < 1.0):
            raise ParamError(f"eta must lie in (0, 1), got {self.eta!r}")
        if self.q_budget < 1:
            raise ParamError(f"q_budget must be >= 1, got {self.q_budget}")
        if self.v_size < 2:
            raise ParamError(f"v_size must be >= 2, got {self.v_size}")
        if self.d < 1:
            raise ParamError(f"d must be >= 1, got {self.d}")
        if self.k < 1:
            raise ParamError(f"k must be >= 1, got {self.k}")
        if not (math.isfinite(self.beta) and self.beta >= 0.0):
            raise ParamError(f"beta must be a nonnegative real, got {self.beta!r}")
        if not math.isfinite(self.mu_ind) or self.mu_ind < 0.0:
            raise ParamError(f"mu_ind must be a nonnegative real, got {self.mu_ind!r}")
        if self.i_sur is not None and not (math.isfinite(self.i_sur) and self.i_sur > 0.0):
            raise ParamError(f"i_sur must be a positive real, got {self.i_sur!r}")


def credit_threshold(p: CertificationParams) -> float:
    """The decision threshold tau for the given parameters."""
    discount = p.rho * math.exp(-p.q_budget * p.beta / (p.eta * p.d * p.v_size))
    return p.beta * (1.0 - discount)


def bounded_difference_constant(k: int, n: int) -> float:
    """Per-sample influence bound ``C_k = 2 (2k + 1) ln n`` of the estimator."""
    if k < 1:
        raise ParamError(f"k must be >= 1, got {k}")
    if n < 2:
        raise ParamError(f"n must be >= 2, got {n}")
    return 2.0 * (2.0 * k + 1.0) * math.log(n)


def type1_bound(tau: float, v_size: int, c: float, mu_ind: float = 0.0) -> float:
    """False-alarm probability bound for independent models.

    Requires a positive margin ``tau - mu_ind``; the result is clamped to
    [0, 1].
    """
    if v_size < 1:
        raise ParamError(f"v_size must be >= 1, got {v_size}")
    if not (math.isfinite(c) and c > 0.0):
        raise ParamError(f"c must be a positive real, got {c!r}")
    margin = tau - mu_ind
    if margin <= 0.0:
        raise MarginError(
            f"type-1 margin tau - mu_ind = {margin:.17g} is nonpositive; bound is vacuous"
        )
    return min(1.0, max(0.0, math.exp(-2.0 * v_size * margin * margin / (c * c))))


def type2_bound(tau: float, v_size: int, c: float, i_sur: float) -> float:
    """Missed-detection probability bound for surrogates at MI ``i_sur``.

    Requires a positive margin ``i_sur - tau``; the result is clamped to
    [0, 1].
    """
    if v_size < 1:
        raise ParamError(f"v_size must be >= 1, got {v_size}")
    if not (math.isfinite(c) and c > 0.0):
        raise ParamError(f"c must be a positive real, got {c!r}")
    margin = i_sur - tau
    if margin <= 0.0:
        raise MarginError(
            f"type-2 margin i_sur - tau = {margin:.17g} is nonpositive; bound is vacuous"
        )
    return min(1.0, max(0.0, math.exp(-2.0 * v_size * margin * margin / (c * c))))


@dataclass(frozen=True)
class Certificate:
    """Auditable record of one verification decision.

    ``gamma2_hypothetical`` marks that ``i_sur`` was not measured but
    defaulted to ``beta`` (the ceiling a surrogate could at most attain);
    the vacuous flags mark bounds whose margin was nonpositive, in which
    case the bound is reported as the trivial 1.
    """

    mi_estimate: float
    tau: float
    beta: float
    c_k: float
    gamma1: float
    gamma2: float
    gamma1_vacuous: bool
    gamma2_vacuous: bool
    gamma2_hypothetical: bool
    decision: str
    rho: float
    eta: float
    q_budget: int
    v_size: int
    d: int
    k: int
    mu_ind: float
    i_sur: float
    sigma: float | None
    delta_sensitivity: float | None
    noise_seed: int | None
    tool_version: str
    timestamp: str


def _default_timestamp() -> str:
    """UTC ISO-8601; honours SOURCE_DATE_EPOCH for reproducible runs."""
    raw = os.environ.get("SOURCE_DATE_EPOCH")
    if raw is not None:
        try:
            moment = _dt.datetime.fromtimestamp(int(raw), tz=_dt.timezone.utc)
        except (ValueError, OverflowError, OSError) as exc:
            raise ParamError(f"SOURCE_DATE_EPOCH must be an epoch integer, got {raw!r}") from exc
    else:
        moment = _dt.datetime.now(tz=_dt.timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def verify(
    suspect: EmbeddingMatrix,
    defended: EmbeddingMatrix,
    params: CertificationParams,
    cfg: KsgConfig = KsgConfig(),
    defense: DefenseParams | None = None,
    threads: int = 1,
    timestamp: str | None = None,
) -> Certificate:
    """Estimate MI between suspect and defended embeddings and decide.

    Both matrices must cover the same verification inputs in the same row
    order; that correspondence is the caller's responsibility. The decision
    is ``surrogate`` exactly when the estimate exceeds tau.
    """
    if suspect.n != defended.n:
        raise ParamError(
            f"suspect has {suspect.n} rows but defended has {defended.n}"
        )
    if suspect.n != params.v_size:
        raise ParamError(
            f"matrices have {suspect.n} rows but params declare v_size={params.v_size}"
        )
    if params.k != cfg.k:
        raise ParamError(
            f"certification k={params.k} disagrees with estimator k={cfg.k}"
        )
    if defense is not None and defense.d != defended.d:
        raise ParamError(
            f"defended matrix is {defended.d}-dimensional but defense declares d={defense.d}"
        )

    mi = ksg_estimate(suspect, defended, cfg, threads=threads)
    tau = credit_threshold(params)
    c_k = bounded_difference_constant(params.k, params.v_size)

    try:
        gamma1 = type1_bound(tau, params.v_size, c_k, params.mu_ind)
        gamma1_vacuous = False
    except MarginError:
        gamma1, gamma1_vacuous = 1.0, True

    i_sur = params.beta if params.i_sur is None else params.i_sur
    try:
        gamma2 = type2_bound(tau, params.v_size, c_k, i_sur)
        gamma2_vacuous = False
    except MarginError:
        gamma2, gamma2_vacuous = 1.0, True

    return Certificate(
        mi_estimate=mi,
        tau=tau,
        beta=params.beta,
        c_k=c_k,
        gamma1=gamma1,
        gamma2=gamma2,
        gamma1_vacuous=gamma1_vacuous,
        gamma2_vacuous=gamma2_vacuous,
        gamma2_hypothetical=params.i_sur is None,
        decision=DECISION_SURROGATE if mi > tau else DECISION_INDEPENDENT,
        rho=params.rho,
        eta=params.eta,
        q_budget=params.q_budget,
        v_size=params.v_size,
        d=params.d,
        k=params.k,
        mu_ind=params.mu_ind,
        i_sur=i_sur,
        sigma=None if defense is None else defense.sigma,
        delta_sensitivity=None if defense is None else defense.delta_sensitivity,
        noise_seed=None if defense is None else defense.seed,
        tool_version=_tool_version,
        timestamp=timestamp if timestamp is not None else _default_timestamp(),
    )


def _render_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, f".{_REAL_DIGITS}g")
    return str(v)


def render_certificate(cert: Certificate) -> str:
    """Canonical text: one ``key = value`` line per field, keys sorted."""
    lines = []
    for f in sorted(fields(Certificate), key=lambda f: f.name):
        lines.append(f"{f.name} = {_render_value(getattr(cert, f.name))}")
    return "\n".join(lines) + "\n"


def write_certificate(cert: Certificate, path: str | Path) -> None:
    try:
        Path(path).write_text(render_certificate(cert))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


_INT_FIELDS = {"q_budget", "v_size", "d", "k", "noise_seed"}
_BOOL_FIELDS = {"gamma1_vacuous", "gamma2_vacuous", "gamma2_hypothetical"}
_STR_FIELDS = {"decision", "tool_version", "timestamp"}
_OPTIONAL_FIELDS = {"sigma", "delta_sensitivity", "noise_seed"}


def parse_certificate(text: str) -> Certificate:
    """Inverse of :func:`render_certificate`."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if " = " not in line:
            raise FormatError(f"certificate line {lineno}: expected 'key = value'")
        key, raw = line.split(" = ", 1)
        values[key] = raw
    expected = {f.name for f in fields(Certificate)}
    if set(values) != expected:
        missing = expected - set(values)
        extra = set(values) - expected
        raise FormatError(
            f"certificate fields mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}"
        )
    kwargs: dict[str, object] = {}
    for key, raw in values.items():
        if raw == "none" and key in _OPTIONAL_FIELDS:
            kwargs[key] = None
        elif key in _BOOL_FIELDS:
            if raw not in ("true", "false"):
                raise FormatError(f"certificate field {key}: expected true/false, got {raw!r}")
            kwargs[key] = raw == "true"
        elif key in _INT_FIELDS:
            try:
                kwargs[key] = int(raw)
            except ValueError:
                raise FormatError(f"certificate field {key}: expected integer, got {raw!r}") from None
        elif key in _STR_FIELDS:
            kwargs[key] = raw
        else:
            try:
                kwargs[key] = float(raw)
            except ValueError:
                raise FormatError(f"certificate field {key}: expected real, got {raw!r}") from None
    return Certificate(**kwargs)
