"""
Measuring diversity loss
========================

A generator that favours its most common class drifts away from the
population it was trained on. Diversity loss summarises the drift by
the class that suffers most.
"""

import numpy as np

from stratfair import FrequencyVector, class_frequencies, diversity_loss
from stratfair.synthgen import CollapsedModelSpec, PopulationSpec, model_frequencies, sample_population

# Four classes with the frequencies of a face dataset annotated by
# hair colour. They sum to 0.999, so renormalize explicitly.
target = FrequencyVector.normalized("ABCD", [0.178, 0.522, 0.175, 0.124])
print("target     ", target.as_dict())

# Mode collapse is modelled as a power law on frequencies: gamma = 0
# reproduces the population, larger gamma starves the rare classes.
population = PopulationSpec(target, n_features=4)
for gamma in (0.0, 0.5, 1.0, 2.0):
    model = model_frequencies(CollapsedModelSpec(population, gamma))
    dl = diversity_loss(target, model)
    print(f"gamma={gamma:3.1f}  delta={dl.delta:.3f}  worst class={dl.worst_class}")

# The same numbers from samples: draw from the collapsed model and count
# the hidden labels. Labels are for evaluation only.
rng = np.random.default_rng(0)
batch = sample_population(CollapsedModelSpec(population, 1.0), rng, 50_000)
observed = class_frequencies(batch.reveal_labels().tolist(), target.class_ids)
dl = diversity_loss(target, observed)
print("observed   ", {c: round(v, 4) for c, v in observed.as_dict().items()})
print(f"empirical delta={dl.delta:.3f}; ratios", {c: round(r, 3) for c, r in dl.per_class_ratio.items()})
