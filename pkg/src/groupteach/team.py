"""Common and joint team beliefs built from members' constraint evidence."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bec import DEFAULT_SAMPLES, ConstraintSet, sphere_points
from .belief import DEFAULT_ETA, Belief, LikelihoodParams, log_likelihood_ratio, resample, reweight

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TeamEvidence:
    """Per-member constraint sets for one test set.

    ``members`` keeps the original member indices, so evidence that went
    through conflict resolution still says whose constraints survived.
    """

    per_member: tuple[ConstraintSet, ...]
    members: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "per_member", tuple(self.per_member))
        if not self.members:
            object.__setattr__(self, "members", tuple(range(len(self.per_member))))
        if len(self.members) != len(self.per_member):
            raise ValueError("members and per_member differ in length")

    def __len__(self):
        return len(self.per_member)

    def pooled(self) -> ConstraintSet:
        out = ConstraintSet()
        for cs in self.per_member:
            out = out + cs
        return out


def _inside_counts(ev: TeamEvidence, pts: np.ndarray) -> list[np.ndarray]:
    return [cs.satisfied_by(pts) for cs in ev.per_member]


def resolve_conflicts(ev: TeamEvidence, n_samples: int = DEFAULT_SAMPLES) -> TeamEvidence:
    """Drop members until everyone's constraint regions share a point.

    Members whose own region is empty go first.  After that the member whose
    removal leaves the largest shared area is dropped, keeping the lower
    index on ties.
    """
    pts = sphere_points(n_samples)
    inside = _inside_counts(ev, pts)
    keep = []
    for k, mask in enumerate(inside):
        if len(ev.per_member[k]) and not mask.any():
            log.warning("member %d has self-contradictory evidence; dropped", ev.members[k])
        else:
            keep.append(k)

    def shared(ids):
        if not ids:
            return np.zeros(len(pts), dtype=bool)
        return np.logical_and.reduce([inside[i] for i in ids])

    while len(keep) > 1 and not shared(keep).any():
        best_k, best_area = None, -1.0
        # scanning from the highest index makes ties drop the highest index
        for k in reversed(keep):
            area = shared([i for i in keep if i != k]).mean()
            if area > best_area:
                best_k, best_area = k, area
        keep.remove(best_k)
    return TeamEvidence(tuple(ev.per_member[i] for i in keep), tuple(ev.members[i] for i in keep))


def common_factor(particles: np.ndarray, ev: TeamEvidence, lp: LikelihoodParams) -> np.ndarray:
    return log_likelihood_ratio(particles, ev.pooled(), lp.kappa)


def joint_factor(particles: np.ndarray, ev: TeamEvidence, lp: LikelihoodParams) -> np.ndarray:
    if len(ev) == 0:
        return np.zeros(len(particles))
    per = [log_likelihood_ratio(particles, cs, lp.kappa) for cs in ev.per_member]
    return np.max(per, axis=0)


def common_update(b: Belief, ev: TeamEvidence, lp: LikelihoodParams, rng=None,
                  eta: float = DEFAULT_ETA, resolve: bool = True,
                  resample_degenerate: bool = True) -> Belief:
    """Product of every member's every constraint likelihood."""
    if resolve:
        ev = resolve_conflicts(ev)
    if len(ev) == 0 or len(ev.pooled()) == 0:
        return b
    out = reweight(b, common_factor(b.particles, ev, lp))
    return resample(out, eta, rng) if resample_degenerate else out


def joint_update(b: Belief, ev: TeamEvidence, lp: LikelihoodParams, rng=None,
                 eta: float = DEFAULT_ETA, resample_degenerate: bool = True) -> Belief:
    """Per particle, the largest of the members' likelihood products."""
    if len(ev) == 0 or len(ev.pooled()) == 0:
        return b
    out = reweight(b, joint_factor(b.particles, ev, lp))
    return resample(out, eta, rng) if resample_degenerate else out
