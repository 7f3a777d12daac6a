"""
Pareto selectors can hide a whole class
=======================================

If every point of a big class A beats every point of a small class B
on all losses, a selector that only looks at the Pareto front will
never show B. Multiple single runs with random weights, or covering
the whole domain, still do.
"""

import numpy as np

from stratfair.harness import dominated_class_problem, user_request
from stratfair.synthgen import oracle_user

problem = dominated_class_problem(minority_fraction=0.3)
rng = np.random.default_rng(3)
requests = 40

for selector in ("msr", "hv", "igd", "eps", "domain-covering", "random"):
    hits = 0
    for _ in range(requests):
        labels = user_request(problem, 9, "gaussian-es", 30, selector, rng, reference=(10.0, 10.0))
        hits += oracle_user(labels, "B") is not None
    print(f"{selector:16s} user found a class-B candidate in {hits / requests:5.0%} of requests")
