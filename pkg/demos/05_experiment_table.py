"""
A small copy of the disambiguation experiment
=============================================

Runs three interaction policies on the same scenes with the same noisy
segmenter: ambiguity-targeted pushes, random pushes, and random pushes
scored only on the final frame without carrying belief across frames.
The full-size run (20 scenes, 3 pushes, 5 seeds) lives in the acceptance
tests; this one is sized to finish in a few seconds.
"""

from uncseg.harness import ExperimentConfig, records_to_csv, run_experiment, report_text

config = ExperimentConfig(scenes=4, steps=2, seed=1)
print(f"{config.scenes} scenes, {config.steps} pushes, "
      f"methods {', '.join(config.methods)}\n")

records, summaries = run_experiment(config)
print(report_text(summaries, config.steps))

print("\nfirst records as csv:")
for line in records_to_csv(records).splitlines()[:5]:
    print(" ", line)
print(f"  ... {len(records)} records total")
