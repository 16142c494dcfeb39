"""Study configuration, loadable from JSON or TOML."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .learner import NOVICE, PROFICIENT, LearnerProfile
from .mdp import DEFAULT_W_STAR

STRATEGIES = ("baseline", "individual_low", "individual_high", "common", "joint")
GROUP_STRATEGIES = STRATEGIES[1:]
COMPOSITIONS = ("NNN", "NNP", "NPP", "PPP")


@dataclass
class StudyConfig:
    # domain
    gamma: float = 0.95
    horizon: int = 25
    w_star: tuple = DEFAULT_W_STAR
    pool_size: int = 64
    pool_seed: int | None = None
    pool_min_size: int = 5
    pool_max_size: int = 7
    max_rubble_density: float = 0.3
    charger_fraction: float = 0.5
    # beliefs
    n_particles: int = 500
    eta: float = 0.02
    nu: float = 0.01
    teacher_mass: float = 0.76
    teacher_models_feedback: bool = False
    response_mass: float | None = 0.9
    # learners
    profiles: dict = field(default_factory=lambda: {"N": NOVICE, "P": PROFICIENT})
    point_increments: bool = False
    # curriculum
    n_demos: int = 2
    n_tests: int = 1
    n_cf: int = 8
    # study grid
    strategies: tuple = STRATEGIES
    compositions: tuple = COMPOSITIONS
    replicates: int = 15
    period_cap: int = 30
    master_seed: int = 0

    def __post_init__(self):
        self.w_star = tuple(float(v) for v in self.w_star)
        self.strategies = tuple(self.strategies)
        self.compositions = tuple(normalize_composition(c) for c in self.compositions)
        self.profiles = {k: v if isinstance(v, LearnerProfile) else LearnerProfile(**v)
                         for k, v in self.profiles.items()}
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies: {sorted(unknown)}")
        for comp in self.compositions:
            if set(comp) - set(self.profiles):
                raise ValueError(f"composition {comp} uses an unknown learner kind")
        if self.period_cap < 1 or self.replicates < 1:
            raise ValueError("period_cap and replicates must be positive")

    @property
    def resolved_pool_seed(self) -> int:
        return self.master_seed if self.pool_seed is None else self.pool_seed

    def to_dict(self) -> dict:
        d = asdict(self)
        d["w_star"] = list(self.w_star)
        d["strategies"] = list(self.strategies)
        d["compositions"] = list(self.compositions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> StudyConfig:
        flat = {}
        for k, v in d.items():
            # section tables such as [domain] or {"belief": {...}} are flattened
            if isinstance(v, dict) and k != "profiles":
                flat.update(v)
            else:
                flat[k] = v
        names = {f.name for f in fields(cls)}
        unknown = set(flat) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**flat)


def normalize_composition(comp) -> str:
    if isinstance(comp, str):
        comp = comp.replace(",", "").replace(" ", "").strip("[]")
    return "".join(str(k).upper() for k in comp)


def load_config(path) -> StudyConfig:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:  # Python < 3.11
            import tomli as tomllib

        return StudyConfig.from_dict(tomllib.loads(text))
    return StudyConfig.from_dict(json.loads(text))
