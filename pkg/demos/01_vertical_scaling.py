"""Walk through the p-value -> logit easiness rescaling.

A grade-3 item that 60% of third graders answer correctly is easier than a
grade-8 item with the same 60% rate, because eighth graders are stronger
readers.  Rescaling against published grade-ability norms makes the two
comparable on one logit scale.
"""
from itemdiff.scales import (
    BUILTIN_SCALES,
    get_scale,
    invert_easiness,
    rescale_pvalue,
    simulate_grade_pvalue,
)

spring = BUILTIN_SCALES["nwea2020-spring"]

print("NWEA 2020 spring reading norms (raw RIT):")
for grade in spring.grades:
    print(f"  grade {grade}: {spring.grade_means[grade]:7.2f}"
          f"   normalized {spring.normalized_theta(grade):+.3f}")

print("\nThe anchor calibration pins p=0.6 to easiness 0.30 at grade 3 and")
print("-1.69 at grade 8:")
for grade in (3, 8):
    print(f"  rescale_pvalue(0.6, grade {grade}) = "
          f"{rescale_pvalue(0.6, grade, spring):+.3f}")

print("\nSame p-value, every grade (easiness falls as the cohort strengthens):")
for grade in spring.grades:
    b = rescale_pvalue(0.6, grade, spring)
    print(f"  grade {grade}: b = {b:+.3f}")

print("\nRound trip: inverting easiness recovers the p-value exactly.")
p = 0.67
b = rescale_pvalue(p, 6, spring)
print(f"  p={p} -> b={b:+.4f} -> p={invert_easiness(b, 6, spring):.10f}")

print("\nSimulation check: draw Bernoulli responses at a known easiness and")
print("rescale the aggregate p-value back (respondents at the grade mean):")
for b_true in (-1.0, 0.0, 1.0):
    p_hat = simulate_grade_pvalue(b_true, 5, spring, n_respondents=10_000,
                                  ability_sd=0.0, seed=7)
    b_hat = rescale_pvalue(p_hat, 5, spring)
    print(f"  true b={b_true:+.1f}: simulated p={p_hat:.3f}, recovered b={b_hat:+.3f}")

print("\nAlternate norms tables give similar but not identical scalings:")
for name in ("nwea2015-literary", "nwea2020-fall", "texas2023-meets"):
    scale = get_scale(name)
    print(f"  {name:24s} grade 5, p=0.6 -> {rescale_pvalue(0.6, 5, scale):+.3f}")
