"""Audit the guarantees themselves rather than any one decision.

Two independent checks. The quadrature study integrates the exact rate of
the worst-case binary channel and confirms the closed-form ceiling is
neither violated nor hopelessly loose. The Monte-Carlo study replays the
full decision rule on hundreds of synthetic pairs and compares the
observed error frequencies against the certified bounds plus three
binomial standard errors.
"""

from credit.oracles import (
    SCENARIO_INDEPENDENT,
    SCENARIO_SURROGATE,
    ChannelSpec,
    TrialGenerator,
    monte_carlo_error_rates,
    tightness_check,
)
from credit.simulation import ExperimentConfig

print("== ceiling tightness ==")
report = tightness_check(tuple(ChannelSpec(delta=1.0, sigma=s) for s in (2.0, 4.0, 8.0)))
for e in report.entries:
    print(
        f"  sigma/delta={e.sigma:>3.0f}: rate {e.mi:.6f} of ceiling {e.beta:.6f} "
        f"(ratio {e.ratio:.3f}, guaranteed floor {e.lower:.6f})"
    )

print("\n== Monte-Carlo error rates ==")
cfg = ExperimentConfig(v_size=400)
gen = TrialGenerator(n=400)
for scenario in (SCENARIO_INDEPENDENT, SCENARIO_SURROGATE):
    mc = monte_carlo_error_rates(scenario, 100, gen, cfg.certification())
    print(mc.to_text())
