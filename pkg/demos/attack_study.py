"""Stress the verifier against the three attacks it claims to survive.

First the headline separation: a population of distilled surrogates
against a population of independent models, summarized as an exact AUC.
Then query averaging, where an attacker spends a fixed budget on fewer,
cleaner queries, and loses fit accuracy for it. Last, decorrelation:
deliberately mixing the stolen weights toward a random direction inside a
utility budget, which lowers the estimate but not past the threshold.
"""

import numpy as np

from credit.certification import credit_threshold, verify
from credit.gaussian_mechanism import DefenseParams, apply_mechanism
from credit.ksg_mi import KsgConfig
from credit.simulation import (
    ExperimentConfig,
    decorrelation_attack,
    extract_surrogate,
    make_teacher,
    relative_fit_error,
    run_separation_experiment,
)

print("== population separation ==")
result = run_separation_experiment(10, 10, ExperimentConfig())
print(f"threshold tau = {result.tau:.4f} nats")
for record in result.surrogates[:3] + result.independents[:3]:
    print(f"  {record.kind:<11} #{record.index}: mi={record.mi:.4f} -> {record.decision}")
print(f"AUC over 10 surrogates vs 10 independents: {result.auc}")

print("\n== query averaging ==")
teacher = make_teacher(64, 4, seed=21)
defense = DefenseParams(sigma=0.5, delta_sensitivity=16.0, d=4, seed=0)
print("budget fixed at 640 queries; m repeats per input, 640/m distinct inputs")
for m in (1, 2, 4, 8, 10):
    errs = [
        relative_fit_error(extract_surrogate(teacher, defense, 8.0, 640, m, 1000 + s), teacher)
        for s in range(10)
    ]
    print(f"  m={m:>2}: median fit error {np.median(errs):.4f}")

print("\n== decorrelation ==")
cfg = ExperimentConfig()
teacher = make_teacher(cfg.d_in, cfg.d, seed=cfg.seed)
inputs = np.random.default_rng(cfg.seed + 1).standard_normal((cfg.v_size, cfg.d_in))
live_defense = cfg.defense(seed=3)
defended = apply_mechanism(teacher.embed(inputs, cfg.clip_radius), live_defense)
stolen = extract_surrogate(teacher, live_defense, cfg.clip_radius, cfg.attack_budget, 1, 777)
params = cfg.certification()
print(f"threshold tau = {credit_threshold(params):.4f} nats")
for budget in (0.0, 0.03, 0.05, 0.10):
    attacked = decorrelation_attack(stolen, defended, inputs, cfg.clip_radius, budget, seed=5)
    cert = verify(
        attacked.model.embed(inputs, cfg.clip_radius),
        defended,
        params,
        KsgConfig(k=cfg.k),
        defense=live_defense,
    )
    print(
        f"  utility budget {budget:0.2f}: spent {attacked.achieved_degradation:0.4f}, "
        f"mi={cert.mi_estimate:.4f} -> {cert.decision}"
    )
