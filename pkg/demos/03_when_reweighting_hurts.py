"""
When can reweighting make things worse?
=======================================

Write q_j for the share of a class inside stratum j in the reference
population and q'_j for the model. After rejection the class has
probability p.q' instead of p'.q', so it shrinks exactly when
q'.(p' - p) > 0. Random instances show how often that happens.
"""

import numpy as np

from stratfair import StratumComposition, analyze_class
from stratfair.analysis import random_instance

# A worked case where the class is hurt.
report = analyze_class([0.6, 0.4], [0.4, 0.6], StratumComposition([0.5, 0.5], [0.1, 0.9], "C"))
print(report.to_json())

# On unstructured random instances the sign of q'.(p' - p) is a coin flip.
rng = np.random.default_rng(2)
hurt = both = 0
n = 5000
for _ in range(n):
    p, pp, comp = random_instance(rng, 8)
    r = analyze_class(p, pp, comp)
    hurt += r.detrimental
    both += r.condition_i and r.condition_ii
print(f"class probability drops in {hurt / n:.1%} of random instances")
print(f"it drops and also ends below its target in {both / n:.1%}")

# If the strata say nothing about the class (q' constant), nothing moves.
p, pp, comp = random_instance(rng, 8, constant_q_prime=True)
r = analyze_class(p, pp, comp)
print(f"unrelated strata: {r.prob_before:.6f} -> {r.prob_after:.6f}")
