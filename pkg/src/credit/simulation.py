"""Desk-scale attack simulation with linear teacher models.

A teacher maps inputs through ``e(x) = W^T x`` followed by l2 clipping. An
attacker fits a surrogate by least squares on averaged noisy responses; an
independent party draws fresh weights. The separation experiment scores
both populations by their MI with the defended embeddings on a shared
verification set and summarises the ranking as an exact AUC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._pmap import ordered_map
from .certification import Certificate, CertificationParams, credit_threshold, verify
from .embedding_io import EmbeddingMatrix, clip_embeddings
from .errors import ParamError, RankError
from .gaussian_mechanism import DefenseParams, apply_mechanism, mi_upper_bound
from .ksg_mi import KsgConfig, ksg_estimate

_SEED_CAP = 2**64


def _spawn_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SyntheticModel:
    """A linear embedding map with clipped outputs."""

    weight: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        w = np.asarray(self.weight, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ParamError(f"weight must be a d_in x d matrix, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ParamError("weight contains non-finite entries")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weight", w)

    @property
    def d_in(self) -> int:
        return int(self.weight.shape[0])

    @property
    def d(self) -> int:
        return int(self.weight.shape[1])

    def embed(self, inputs: np.ndarray, clip_radius: float, label: str = "") -> EmbeddingMatrix:
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ParamError(
                f"inputs must be n x {self.d_in}, got shape {x.shape}"
            )
        raw = EmbeddingMatrix(values=x @ self.weight, label=label)
        return clip_embeddings(raw, clip_radius)


def make_teacher(d_in: int, d: int, seed: int) -> SyntheticModel:
    """Reference model with weight entries ~ N(0, 1/d_in)."""
    if d_in < 1 or d < 1:
        raise ParamError(f"d_in and d must be >= 1, got {d_in}, {d}")
    rng = np.random.default_rng(seed)
    weight = rng.normal(0.0, 1.0 / math.sqrt(d_in), size=(d_in, d))
    return SyntheticModel(weight=weight, seed=seed)


def make_independent(d_in: int, d: int, seed: int) -> SyntheticModel:
    """A model with fresh weights, unrelated to any teacher's seed stream."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xD1F,)))
    weight = rng.normal(0.0, 1.0 / math.sqrt(d_in), size=(d_in, d))
    return SyntheticModel(weight=weight, seed=seed)


def extract_surrogate(
    teacher: SyntheticModel,
    defense: DefenseParams,
    clip_radius: float,
    q_budget: int,
    m: int,
    seed: int,
) -> SyntheticModel:
    """Fit a surrogate by least squares on defended query responses.

    The attacker spends ``q_budget`` queries on ``q_budget / m`` distinct
    inputs, asking each ``m`` times and averaging the noisy responses.
    Input draws are a prefix of one seeded stream and response noise is
    keyed by (input index, repeat), so runs at different ``m`` under the
    same seed share their randomness.
    """
    if m < 1:
        raise ParamError(f"repeat factor m must be >= 1, got {m}")
    if q_budget < 1:
        raise ParamError(f"q_budget must be >= 1, got {q_budget}")
    if q_budget % m != 0:
        raise ParamError(f"q_budget={q_budget} must be divisible by m={m}")
    distinct = q_budget // m
    if distinct < teacher.d_in:
        raise RankError(
            f"{distinct} distinct queries cannot determine a {teacher.d_in}-input map"
        )
    root = np.random.SeedSequence(entropy=seed)
    inputs = np.random.default_rng(root.spawn(1)[0]).standard_normal(
        (distinct, teacher.d_in)
    )
    clean = teacher.embed(inputs, clip_radius)
    accumulated = np.zeros((distinct, teacher.d), dtype=np.float64)
    for rep in range(m):
        noise_seed = _spawn_seed(
            np.random.SeedSequence(entropy=seed, spawn_key=(0xA3, rep))
        )
        rep_defense = DefenseParams(
            sigma=defense.sigma,
            delta_sensitivity=defense.delta_sensitivity,
            d=defense.d,
            seed=noise_seed,
        )
        accumulated += apply_mechanism(clean, rep_defense).values
    averaged = accumulated / m
    weight, _, rank, _ = np.linalg.lstsq(inputs, averaged, rcond=None)
    if rank < teacher.d_in:
        raise RankError(
            f"query matrix has rank {rank} < d_in={teacher.d_in}; fit is underdetermined"
        )
    return SyntheticModel(weight=weight, seed=seed)


def relative_fit_error(model: SyntheticModel, teacher: SyntheticModel) -> float:
    """Frobenius distance between weights, relative to the teacher's."""
    if model.weight.shape != teacher.weight.shape:
        raise ParamError(
            f"weight shapes differ: {model.weight.shape} vs {teacher.weight.shape}"
        )
    return float(
        np.linalg.norm(model.weight - teacher.weight) / np.linalg.norm(teacher.weight)
    )


def relative_output_error(
    model: SyntheticModel,
    reference: EmbeddingMatrix,
    inputs: np.ndarray,
    clip_radius: float,
) -> float:
    """Relative Frobenius error of the model's outputs against a reference."""
    produced = model.embed(inputs, clip_radius)
    if produced.values.shape != reference.values.shape:
        raise ParamError("reference shape does not match the model's output shape")
    return float(
        np.linalg.norm(produced.values - reference.values) / np.linalg.norm(reference.values)
    )


@dataclass(frozen=True)
class DecorrelationResult:
    """Outcome of the utility-budgeted weight-mixing attack."""

    model: SyntheticModel
    requested_budget: float
    achieved_degradation: float
    mixing_angle: float


def decorrelation_attack(
    surrogate: SyntheticModel,
    reference: EmbeddingMatrix,
    inputs: np.ndarray,
    clip_radius: float,
    utility_budget: float,
    seed: int = 0,
) -> DecorrelationResult:
    """Mix the surrogate's weights toward a random direction, spending at
    most ``utility_budget`` of additional output error against the
    reference embeddings.

    The mixing angle is pushed as far as the budget allows (bisection); if
    even a quarter turn stays within budget the closest achievable point is
    reported rather than an error raised.
    """
    if not (0.0 <= utility_budget <= 0.2):
        raise ParamError(f"utility budget must lie in [0, 0.2], got {utility_budget!r}")
    if utility_budget == 0.0:
        return DecorrelationResult(
            model=surrogate,
            requested_budget=0.0,
            achieved_degradation=0.0,
            mixing_angle=0.0,
        )
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xDEC0,)))
    direction = rng.standard_normal(surrogate.weight.shape)
    direction *= np.linalg.norm(surrogate.weight) / np.linalg.norm(direction)

    def mixed(theta: float) -> SyntheticModel:
        weight = math.cos(theta) * surrogate.weight + math.sin(theta) * direction
        return SyntheticModel(weight=weight, seed=surrogate.seed)

    def degradation(theta: float) -> float:
        return relative_output_error(mixed(theta), reference, inputs, clip_radius) - baseline

    baseline = relative_output_error(surrogate, reference, inputs, clip_radius)
    top = math.pi / 2.0
    if degradation(top) <= utility_budget:
        return DecorrelationResult(
            model=mixed(top),
            requested_budget=utility_budget,
            achieved_degradation=degradation(top),
            mixing_angle=top,
        )
    lo, hi = 0.0, top
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if degradation(mid) <= utility_budget:
            lo = mid
        else:
            hi = mid
    return DecorrelationResult(
        model=mixed(lo),
        requested_budget=utility_budget,
        achieved_degradation=degradation(lo),
        mixing_angle=lo,
    )


def auc_score(positives, negatives) -> float:
    """Exact pairwise AUC with half credit for ties."""
    pos = np.asarray(positives, dtype=np.float64)
    neg = np.asarray(negatives, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ParamError("both score collections must be nonempty")
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return float(wins / (pos.size * neg.size))


@dataclass(frozen=True)
class ExperimentConfig:
    """Defaults for the separation experiment, tuned so that the default
    run separates perfectly while a tenfold noise inflation does not."""

    d_in: int = 64
    d: int = 4
    v_size: int = 1000
    clip_radius: float = 1.0
    sigma: float = 0.5
    rho: float = 0.98
    eta: float = 0.5
    q_budget: int = 10
    k: int = 3
    attack_budget: int = 640
    repeat_factor: int = 1
    mu_ind: float = 0.0
    seed: int = 20260819

    def __post_init__(self) -> None:
        if self.d_in < 1 or self.d < 1:
            raise ParamError(f"d_in and d must be >= 1, got {self.d_in}, {self.d}")
        if self.v_size < 2:
            raise ParamError(f"v_size must be >= 2, got {self.v_size}")
        if not (math.isfinite(self.clip_radius) and self.clip_radius > 0.0):
            raise ParamError(f"clip_radius must be a positive real, got {self.clip_radius!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise ParamError(f"sigma must be a positive real, got {self.sigma!r}")

    def defense(self, seed: int) -> DefenseParams:
        return DefenseParams(
            sigma=self.sigma,
            delta_sensitivity=2.0 * self.clip_radius,
            d=self.d,
            seed=seed,
        )

    def certification(self) -> CertificationParams:
        beta = mi_upper_bound(2.0 * self.clip_radius, self.sigma)
        return CertificationParams(
            rho=self.rho,
            eta=self.eta,
            q_budget=self.q_budget,
            v_size=self.v_size,
            d=self.d,
            k=self.k,
            beta=beta,
            mu_ind=self.mu_ind,
        )


@dataclass(frozen=True)
class SuspectRecord:
    kind: str
    index: int
    mi: float
    decision: str
    certificate: Certificate


@dataclass(frozen=True)
class SeparationResult:
    auc: float
    tau: float
    surrogates: tuple[SuspectRecord, ...]
    independents: tuple[SuspectRecord, ...]
    config: ExperimentConfig


def run_separation_experiment(
    n_surrogates: int,
    n_independents: int,
    config: ExperimentConfig = ExperimentConfig(),
    threads: int = 1,
) -> SeparationResult:
    """Score surrogate and independent populations against one defended
    teacher and summarise their separation as an exact AUC."""
    if n_surrogates < 10 or n_independents < 10:
        raise ParamError(
            f"need at least 10 suspects per population, got {n_surrogates} and {n_independents}"
        )
    root = np.random.SeedSequence(entropy=config.seed)
    teacher_seq, verify_seq, defense_seq, suspects_seq = root.spawn(4)
    teacher = make_teacher(config.d_in, config.d, _spawn_seed(teacher_seq))
    inputs = np.random.default_rng(verify_seq).standard_normal(
        (config.v_size, config.d_in)
    )
    defense = config.defense(_spawn_seed(defense_seq))
    defended = apply_mechanism(teacher.embed(inputs, config.clip_radius), defense)
    params = config.certification()
    cfg = KsgConfig(k=config.k)

    def score(task: tuple[str, int, int]) -> SuspectRecord:
        kind, index, suspect_seed = task
        if kind == "surrogate":
            model = extract_surrogate(
                teacher,
                defense,
                config.clip_radius,
                config.attack_budget,
                config.repeat_factor,
                suspect_seed,
            )
        else:
            model = make_independent(config.d_in, config.d, suspect_seed)
        suspect = model.embed(inputs, config.clip_radius)
        cert = verify(suspect, defended, params, cfg, defense=defense)
        return SuspectRecord(
            kind=kind, index=index, mi=cert.mi_estimate,
            decision=cert.decision, certificate=cert,
        )

    tasks = [
        ("surrogate", i, _spawn_seed(seq))
        for i, seq in enumerate(suspects_seq.spawn(n_surrogates))
    ]
    independents_seq = root.spawn(1)[0]
    tasks += [
        ("independent", j, _spawn_seed(seq))
        for j, seq in enumerate(independents_seq.spawn(n_independents))
    ]
    records = ordered_map(score, tasks, threads)
    surrogates = tuple(r for r in records if r.kind == "surrogate")
    independents = tuple(r for r in records if r.kind == "independent")
    auc = auc_score([r.mi for r in surrogates], [r.mi for r in independents])
    return SeparationResult(
        auc=auc,
        tau=credit_threshold(params),
        surrogates=surrogates,
        independents=independents,
        config=config,
    )
