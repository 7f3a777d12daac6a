"""When can stratified reweighting hurt a class?

For a class ``C`` write ``q_j = P(C | stratum j)`` in the reference
population and ``q'_j`` for the model. The class probability is ``p.q`` in
the reference, ``p'.q'`` under the raw model and ``p.q'`` after
reweighting (reweighting moves stratum mass but keeps within-stratum
composition). Reweighting lowers the class probability exactly when
``q'.(p' - p) > 0``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Hashable, Sequence

import numpy as np

from .metrics import DiversityLoss, FrequencyVector, diversity_loss
from .strata import StratumDistribution

TIE_TOL = 1e-12


@dataclass(frozen=True)
class StratumComposition:
    """Within-stratum probability of one class, for reference (``q``) and model (``q_prime``)."""

    q: np.ndarray
    q_prime: np.ndarray
    class_id: Hashable = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        qp = np.asarray(self.q_prime, dtype=float)
        if q.shape != qp.shape or q.ndim != 1:
            raise ValueError("q and q_prime must be vectors of equal length")
        for name, v in (("q", q), ("q_prime", qp)):
            if np.any(v < 0) or np.any(v > 1):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "q_prime", qp)


@dataclass(frozen=True)
class DetrimentReport:
    prob_target: float
    prob_before: float
    prob_after: float
    dl_term_before: float
    dl_term_after: float
    condition_i: bool
    condition_ii: bool
    detrimental: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _probs(x) -> np.ndarray:
    return x.probs if isinstance(x, StratumDistribution) else np.asarray(x, dtype=float)


def analyze_class(p, p_prime, comp: StratumComposition) -> DetrimentReport:
    """Class probability before and after reweighting, and whether it drops.

    ``detrimental`` is the strict test ``q'.(p' - p) > 0``; inner products
    within ``1e-12`` of zero count as ties and are not detrimental.
    """
    p, pp = _probs(p), _probs(p_prime)
    if not (p.shape == pp.shape == comp.q.shape):
        raise ValueError(f"length mismatch: p {p.shape}, p' {pp.shape}, q {comp.q.shape}")
    prob_target = float(p @ comp.q)
    if prob_target <= 0:
        raise ValueError(f"class absent from target: {comp.class_id!r}")
    prob_before = float(pp @ comp.q_prime)
    prob_after = float(p @ comp.q_prime)
    cond_i = float(p @ (comp.q - comp.q_prime))
    cond_ii = float(comp.q_prime @ (pp - p))
    return DetrimentReport(
        prob_target=prob_target,
        prob_before=prob_before,
        prob_after=prob_after,
        dl_term_before=1.0 - prob_before / prob_target,
        dl_term_after=1.0 - prob_after / prob_target,
        condition_i=cond_i > TIE_TOL,
        condition_ii=cond_ii > TIE_TOL,
        detrimental=cond_ii > TIE_TOL,
    )


def dl_after_reweighting(
    p, p_prime, compositions: Sequence[StratumComposition]
) -> tuple[DiversityLoss, DiversityLoss]:
    """Diversity loss of the raw and of the reweighted model, from compositions.

    ``compositions`` holds one entry per class; the class probabilities
    ``p.q_c`` must form a simplex (they do whenever the ``q`` vectors sum to
    one in every stratum).
    """
    p, pp = _probs(p), _probs(p_prime)
    ids = [c.class_id if c.class_id is not None else k for k, c in enumerate(compositions)]
    Q = np.array([c.q for c in compositions])
    Qp = np.array([c.q_prime for c in compositions])
    if Q.shape[1] != p.size or pp.size != p.size:
        raise ValueError("composition length differs from stratum count")
    target = FrequencyVector(ids, Q @ p)
    before = FrequencyVector(ids, Qp @ pp)
    after = FrequencyVector(ids, Qp @ p)
    return diversity_loss(target, before), diversity_loss(target, after)


def random_instance(rng: np.random.Generator, n_strata: int, *, equal_p: bool = False, constant_q_prime: bool = False):
    """Random ``(p, p', q, q')``: ``p, p'`` uniform on the simplex, ``q, q'`` uniform in the cube."""
    p = rng.dirichlet(np.ones(n_strata))
    pp = p.copy() if equal_p else rng.dirichlet(np.ones(n_strata))
    q = rng.random(n_strata)
    qp = np.full(n_strata, rng.random()) if constant_q_prime else rng.random(n_strata)
    return p, pp, StratumComposition(q, qp)
