import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from credit.errors import ParamError, RankError
from credit.gaussian_mechanism import DefenseParams, apply_mechanism
from credit.ksg_mi import KsgConfig, ksg_estimate
from credit.simulation import (
    ExperimentConfig,
    auc_score,
    decorrelation_attack,
    extract_surrogate,
    make_independent,
    make_teacher,
    relative_fit_error,
    relative_output_error,
    run_separation_experiment,
)


def teacher():
    return make_teacher(64, 4, seed=21)


def lenient_defense(sigma=0.5, radius=8.0):
    # generous radius keeps the clip inactive so the linear theory applies
    return DefenseParams(sigma=sigma, delta_sensitivity=2.0 * radius, d=4, seed=0)


# ---------------------------------------------------------------- models

def test_teacher_embeddings_respect_clip(rng):
    model = teacher()
    out = model.embed(rng.standard_normal((50, 64)), clip_radius=1.0)
    assert out.clip_radius == 1.0
    assert np.all(np.linalg.norm(out.values, axis=1) <= 1.0 + 1e-12)


def test_teacher_seed_reproducible():
    a = make_teacher(32, 4, seed=5)
    b = make_teacher(32, 4, seed=5)
    assert np.array_equal(a.weight, b.weight)


def test_independent_differs_from_teacher():
    a = make_teacher(32, 4, seed=5)
    b = make_independent(32, 4, seed=5)
    assert not np.allclose(a.weight, b.weight)


def test_model_weight_read_only():
    with pytest.raises(ValueError):
        teacher().weight[0, 0] = 1.0


# ------------------------------------------------------------- surrogate

def test_surrogate_recovers_teacher_at_low_noise():
    """Least squares on 640 responses under sigma=0.1 noise."""
    sur = extract_surrogate(teacher(), lenient_defense(sigma=0.1), 8.0, 640, 1, seed=42)
    assert relative_fit_error(sur, teacher()) < 0.1


def test_surrogate_fit_error_grows_with_noise():
    errs = [
        float(
            np.median(
                [
                    relative_fit_error(
                        extract_surrogate(
                            teacher(), lenient_defense(sigma=s), 8.0, 640, 1, seed=seed
                        ),
                        teacher(),
                    )
                    for seed in range(5)
                ]
            )
        )
        for s in (0.05, 0.2, 0.8)
    ]
    assert errs[0] < errs[1] < errs[2]


def test_repeat_factor_wastes_distinct_queries():
    """Averaging m responses per input shrinks the distinct input pool."""
    base = extract_surrogate(teacher(), lenient_defense(), 8.0, 640, 1, seed=3)
    averaged = extract_surrogate(teacher(), lenient_defense(), 8.0, 640, 8, seed=3)
    assert relative_fit_error(averaged, teacher()) > relative_fit_error(
        base, teacher()
    )


def test_surrogate_requires_enough_distinct_queries():
    with pytest.raises(RankError):
        extract_surrogate(teacher(), lenient_defense(), 8.0, 63, 1, seed=0)
    with pytest.raises(RankError):
        # 640 raw queries collapse to 40 distinct once averaged 16-fold
        extract_surrogate(teacher(), lenient_defense(), 8.0, 640, 16, seed=0)


def test_surrogate_budget_validation():
    with pytest.raises(ParamError):
        extract_surrogate(teacher(), lenient_defense(), 8.0, 0, 1, seed=0)
    with pytest.raises(ParamError):
        extract_surrogate(teacher(), lenient_defense(), 8.0, 640, 0, seed=0)
    with pytest.raises(ParamError):
        # budget must split evenly across repeats
        extract_surrogate(teacher(), lenient_defense(), 8.0, 640, 7, seed=0)


def test_relative_output_error_zero_for_same_model(rng):
    t = teacher()
    inputs = rng.standard_normal((100, 64))
    reference = t.embed(inputs, 1.0)
    assert relative_output_error(t, reference, inputs, 1.0) == 0.0


# ---------------------------------------------------------- decorrelation

def test_decorrelation_zero_budget_is_identity(rng):
    t = teacher()
    inputs = rng.standard_normal((200, 64))
    reference = t.embed(inputs, 1.0)
    result = decorrelation_attack(t, reference, inputs, 1.0, 0.0, seed=1)
    assert np.array_equal(result.model.weight, t.weight)
    assert result.achieved_degradation == 0.0
    assert result.mixing_angle == 0.0


def test_decorrelation_stays_within_budget(rng):
    t = teacher()
    inputs = rng.standard_normal((400, 64))
    reference = t.embed(inputs, 1.0)
    for budget in (0.03, 0.05, 0.10):
        result = decorrelation_attack(t, reference, inputs, 1.0, budget, seed=1)
        assert result.achieved_degradation <= budget + 1e-9
        assert 0.0 < result.mixing_angle <= np.pi / 2.0


def test_decorrelation_monotone_in_budget(rng):
    t = teacher()
    inputs = rng.standard_normal((400, 64))
    reference = t.embed(inputs, 1.0)
    angles = [
        decorrelation_attack(t, reference, inputs, 1.0, b, seed=1).mixing_angle
        for b in (0.01, 0.05, 0.10)
    ]
    assert angles[0] < angles[1] < angles[2]


def test_decorrelation_budget_domain(rng):
    t = teacher()
    inputs = rng.standard_normal((50, 64))
    reference = t.embed(inputs, 1.0)
    with pytest.raises(ParamError):
        decorrelation_attack(t, reference, inputs, 1.0, -0.01, seed=1)
    with pytest.raises(ParamError):
        decorrelation_attack(t, reference, inputs, 1.0, 0.25, seed=1)


# ------------------------------------------------------------------- auc

def test_auc_perfect_separation():
    assert auc_score([3.0, 4.0, 5.0], [0.0, 1.0, 2.0]) == 1.0


def test_auc_reversed_separation():
    assert auc_score([0.0, 1.0], [5.0, 6.0]) == 0.0


def test_auc_ties_get_half_credit():
    assert auc_score([1.0, 1.0], [1.0, 1.0]) == 0.5


def test_auc_matches_sklearn(rng):
    pos = list(rng.standard_normal(40) + 0.8)
    neg = list(rng.standard_normal(55))
    labels = [1] * len(pos) + [0] * len(neg)
    ours = auc_score(pos, neg)
    theirs = float(roc_auc_score(labels, pos + neg))
    assert ours == pytest.approx(theirs, abs=1e-12)


def test_auc_rejects_empty():
    with pytest.raises(ParamError):
        auc_score([], [1.0])


# ------------------------------------------------------------ experiment

def test_experiment_config_derivations():
    cfg = ExperimentConfig()
    assert cfg.certification().beta == pytest.approx(8.0)
    assert cfg.defense(seed=9).delta_sensitivity == pytest.approx(2.0)


def test_separation_experiment_shape_and_determinism():
    cfg = ExperimentConfig(v_size=400)
    a = run_separation_experiment(10, 10, cfg)
    b = run_separation_experiment(10, 10, cfg)
    assert len(a.surrogates) == 10 and len(a.independents) == 10
    assert a.auc == b.auc
    assert [r.mi for r in a.surrogates] == [r.mi for r in b.surrogates]
    for rec in a.surrogates + a.independents:
        assert rec.certificate.decision == rec.decision


def test_separation_experiment_threads_agree():
    cfg = ExperimentConfig(v_size=400)
    serial = run_separation_experiment(10, 10, cfg, threads=1)
    pooled = run_separation_experiment(10, 10, cfg, threads=4)
    assert serial.auc == pooled.auc
    assert [r.mi for r in serial.independents] == [r.mi for r in pooled.independents]


def test_separation_experiment_minimum_population():
    with pytest.raises(ParamError):
        run_separation_experiment(9, 10)


def test_mi_monotone_under_query_averaging():
    """More averaging, less faithful surrogate, lower MI against defended."""
    cfg = ExperimentConfig()
    root = np.random.SeedSequence(entropy=cfg.seed)
    teacher_seq, verify_seq, defense_seq, _ = root.spawn(4)
    t = make_teacher(cfg.d_in, cfg.d, int(teacher_seq.generate_state(1, np.uint64)[0]))
    inputs = np.random.default_rng(verify_seq).standard_normal((cfg.v_size, cfg.d_in))
    defense = cfg.defense(int(defense_seq.generate_state(1, np.uint64)[0]))
    defended = apply_mechanism(t.embed(inputs, cfg.clip_radius), defense)
    medians = []
    for m in (1, 4, 10):
        vals = [
            ksg_estimate(
                extract_surrogate(
                    t, defense, cfg.clip_radius, cfg.attack_budget, m, 2000 + s
                ).embed(inputs, cfg.clip_radius),
                defended,
                KsgConfig(k=cfg.k),
            )
            for s in range(5)
        ]
        medians.append(float(np.median(vals)))
    assert medians[0] >= medians[1] >= medians[2]
