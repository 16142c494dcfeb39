"""Item-delivery gridworld, its planner and discounted feature counts.

States are ``(x, y, charged)`` triples; ``charged`` records whether the
charger cell has been entered earlier in the episode, which makes the
recharge feature a one-shot reward.  Features per transition are
``[rubble, recharge, steps]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

ACTIONS = ("up", "down", "left", "right")
MOVES = ((0, 1), (0, -1), (-1, 0), (1, 0))
FEATURES = ("rubble", "recharge", "steps")
N_FEATURES = 3

VI_TOL = 1e-10
VI_MAX_ITER = 10_000
TIE_TOL = 1e-9

DEFAULT_W_STAR = (-3.0, 3.5, -1.0)


def normalize(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return w / norm


def _cells(seq) -> frozenset:
    return frozenset((int(x), int(y)) for x, y in seq)


@dataclass(frozen=True)
class GridEnvironment:
    width: int
    height: int
    start: tuple[int, int]
    goal: tuple[int, int]
    rubble: frozenset = frozenset()
    charger: tuple[int, int] | None = None
    gamma: float = 0.95
    horizon: int = 25
    blocked: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))
        object.__setattr__(self, "goal", tuple(int(v) for v in self.goal))
        object.__setattr__(self, "rubble", _cells(self.rubble))
        object.__setattr__(self, "blocked", _cells(self.blocked))
        if self.charger is not None:
            object.__setattr__(self, "charger", tuple(int(v) for v in self.charger))
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have positive size")
        if self.start == self.goal:
            raise ValueError("start and goal must differ")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        special = [self.start, self.goal, *self.rubble, *self.blocked]
        if self.charger is not None:
            special.append(self.charger)
        for x, y in special:
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ValueError(f"cell {(x, y)} is outside the grid")
        if {self.start, self.goal, self.charger} & self.blocked:
            raise ValueError("start, goal and charger cannot be blocked")

    # -- indexing -------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return self.width * self.height

    @property
    def n_states(self) -> int:
        return 2 * self.n_cells

    @property
    def start_state(self) -> tuple[int, int, int]:
        return (*self.start, 0)

    def state_index(self, state) -> int:
        x, y, charged = state
        return int(charged) * self.n_cells + y * self.width + x

    def state_of(self, index: int) -> tuple[int, int, int]:
        charged, cell = divmod(int(index), self.n_cells)
        y, x = divmod(cell, self.width)
        return (x, y, charged)

    def is_goal(self, state) -> bool:
        return (state[0], state[1]) == self.goal

    # -- transition tables (deterministic) -------------------------------
    @cached_property
    def _tables(self):
        S, A = self.n_states, len(ACTIONS)
        nxt = np.zeros((S, A), dtype=np.int64)
        phi = np.zeros((S, A, N_FEATURES))
        terminal = np.zeros(S, dtype=bool)
        for s in range(S):
            x, y, charged = self.state_of(s)
            if (x, y) == self.goal:
                terminal[s] = True
                nxt[s, :] = s
                continue
            for a, (dx, dy) in enumerate(MOVES):
                tx, ty = x + dx, y + dy
                if not (0 <= tx < self.width and 0 <= ty < self.height) or (tx, ty) in self.blocked:
                    tx, ty = x, y
                recharged = (tx, ty) == self.charger and not charged
                nxt[s, a] = self.state_index((tx, ty, int(charged or recharged)))
                phi[s, a] = ((tx, ty) in self.rubble, recharged, 1.0)
        for arr in (nxt, phi, terminal):
            arr.setflags(write=False)
        return nxt, phi, terminal

    @property
    def next_state(self) -> np.ndarray:
        return self._tables[0]

    @property
    def phi(self) -> np.ndarray:
        return self._tables[1]

    @property
    def terminal(self) -> np.ndarray:
        return self._tables[2]

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "start": list(self.start),
            "goal": list(self.goal),
            "rubble": sorted([list(c) for c in self.rubble]),
            "charger": None if self.charger is None else list(self.charger),
            "gamma": self.gamma,
            "horizon": self.horizon,
            "blocked": sorted([list(c) for c in self.blocked]),
        }

    @classmethod
    def from_dict(cls, d: dict) -> GridEnvironment:
        return cls(
            width=d["width"],
            height=d["height"],
            start=tuple(d["start"]),
            goal=tuple(d["goal"]),
            rubble=d.get("rubble", ()),
            charger=None if d.get("charger") is None else tuple(d["charger"]),
            gamma=d.get("gamma", 0.95),
            horizon=d.get("horizon", 25),
            blocked=d.get("blocked", ()),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> GridEnvironment:
        return cls.from_dict(json.loads(text))

    def render(self) -> str:
        rows = []
        for y in reversed(range(self.height)):
            row = ""
            for x in range(self.width):
                c = (x, y)
                row += ("S" if c == self.start else "G" if c == self.goal else "B" if c == self.charger
                        else "#" if c in self.blocked else "r" if c in self.rubble else ".")
            rows.append(row)
        return "\n".join(rows)


@dataclass(eq=False)
class Policy:
    action_for: np.ndarray
    q_values: np.ndarray
    weights: np.ndarray

    def __call__(self, state_index: int) -> int:
        return int(self.action_for[state_index])


@dataclass(eq=False)
class Trajectory:
    """Deterministic state-action sequence with discounted feature counts.

    A rollout ends at the goal or when it re-enters a state it already
    left; in the latter case ``cycle_start`` marks the first step of the
    loop and the features include its infinitely repeated tail.
    """

    steps: tuple
    features: np.ndarray
    cycle_start: int | None = None

    def __len__(self):
        return len(self.steps)

    def same_behavior(self, other: Trajectory, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.features - other.features) <= tol))

    def to_dict(self) -> dict:
        return {
            "steps": [[list(s), ACTIONS[a], list(s2)] for s, a, s2 in self.steps],
            "features": self.features.tolist(),
            "cycle_start": self.cycle_start,
        }


def discounted_features(phis, gamma: float, cycle_start: int | None = None) -> np.ndarray:
    phis = np.asarray(phis, dtype=float).reshape(-1, N_FEATURES)
    T = len(phis)
    if T == 0:
        return np.zeros(N_FEATURES)
    disc = gamma ** np.arange(T)
    if gamma == 0.0:
        disc[1:] = 0.0
    if cycle_start is None:
        return disc @ phis
    k = cycle_start
    if gamma >= 1.0:
        raise ValueError("a looping trajectory has unbounded features when gamma = 1")
    return disc[:k] @ phis[:k] + (disc[k:] @ phis[k:]) / (1.0 - gamma ** (T - k))


def trajectory_features(env: GridEnvironment, steps, cycle_start=None) -> np.ndarray:
    """Recompute discounted features from a step list."""
    phis = [env.phi[env.state_index(s), a] for s, a, _ in steps]
    return discounted_features(phis, env.gamma, cycle_start)


def _value_iteration(env: GridEnvironment, W: np.ndarray) -> np.ndarray:
    """Batched value iteration; returns Q of shape (k, S, A)."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    nxt, term = env.next_state, env.terminal
    R = np.einsum("saf,kf->ksa", env.phi, W)
    V = np.zeros((len(W), env.n_states))
    for _ in range(VI_MAX_ITER):
        Q = R + env.gamma * V[:, nxt]
        Q[:, term, :] = 0.0
        V_new = Q.max(axis=-1)
        delta = np.max(np.abs(V_new - V))
        V = V_new
        if delta < VI_TOL:
            break
    else:
        raise RuntimeError("value iteration did not converge")
    Q = R + env.gamma * V[:, nxt]
    Q[:, term, :] = 0.0
    return Q


def _greedy(Q: np.ndarray) -> np.ndarray:
    best = Q.max(axis=-1, keepdims=True)
    return np.argmax(Q >= best - TIE_TOL, axis=-1)


def solve_policy(env: GridEnvironment, w) -> Policy:
    w = np.asarray(w, dtype=float)
    Q = _value_iteration(env, w[None])[0]
    return Policy(action_for=_greedy(Q), q_values=Q, weights=w)


def rollout(env: GridEnvironment, pol: Policy, s0=None, first_action: int | None = None) -> Trajectory:
    s = env.state_index(env.start_state if s0 is None else s0)
    return _rollout_index(env, pol.action_for, s, first_action)


def _rollout_index(env, action_for, s: int, first_action=None) -> Trajectory:
    nxt, phi, term = env.next_state, env.phi, env.terminal
    steps, phis = [], []
    if term[s]:
        return Trajectory(steps=(), features=np.zeros(N_FEATURES))
    # a forced first action does not tie s to the policy, so s may be revisited
    seen = {} if first_action is not None else {s: 0}
    cycle_start = None
    a = int(action_for[s]) if first_action is None else int(first_action)
    while True:
        s2 = int(nxt[s, a])
        steps.append((env.state_of(s), a, env.state_of(s2)))
        phis.append(phi[s, a])
        if term[s2]:
            break
        if s2 in seen:
            cycle_start = seen[s2]
            break
        seen[s2] = len(steps)
        s, a = s2, int(action_for[s2])
    features = discounted_features(phis, env.gamma, cycle_start)
    return Trajectory(steps=tuple(steps), features=features, cycle_start=cycle_start)


def feature_expectations(env: GridEnvironment, pol: Policy, s, a: int) -> np.ndarray:
    """Discounted features from taking ``a`` in ``s`` and following ``pol`` after."""
    return rollout(env, pol, s, first_action=a).features


def optimal_trajectory(env: GridEnvironment, w) -> Trajectory:
    return rollout(env, solve_policy(env, w))


def _optimal_start_trajectories(env: GridEnvironment, W: np.ndarray) -> list[Trajectory]:
    actions = _greedy(_value_iteration(env, W))
    s0 = env.state_index(env.start_state)
    return [_rollout_index(env, act, s0) for act in actions]


def _unit_directions() -> np.ndarray:
    g = np.array([(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)
                  if (i, j, k) != (0, 0, 0)], dtype=float)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(eq=False)
class TrajectorySet:
    """Start-state trajectories that are optimal for some weight vector.

    The discounted feature vectors of these trajectories are the vertices
    of the convex hull of everything the start state can achieve, so the
    optimal behavior for any ``w`` is the vertex maximizing ``w . f``.
    """

    env: GridEnvironment
    trajectories: list
    features: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.trajectories)

    def best_index(self, w) -> int:
        return int(self.best_indices(np.asarray(w)[None])[0])

    def best_indices(self, W) -> np.ndarray:
        scores = np.atleast_2d(W) @ self.features.T
        best = scores.max(axis=1, keepdims=True)
        return np.argmax(scores >= best - TIE_TOL, axis=1)

    def best(self, w) -> Trajectory:
        return self.trajectories[self.best_index(w)]

    def index_of(self, traj: Trajectory, tol: float = 1e-9) -> int | None:
        hits = np.flatnonzero(np.all(np.abs(self.features - traj.features) <= tol, axis=1))
        return int(hits[0]) if len(hits) else None


def build_trajectory_set(env: GridEnvironment, max_rounds: int = 200) -> TrajectorySet:
    """Recover every hull vertex of achievable start features with the planner.

    Facet normals of the current hull are fed back to the planner as reward
    weights; a returned point beyond its facet is a new vertex, otherwise the
    facet is confirmed.  Lower-dimensional hulls also probe the directions
    orthogonal to their affine span.
    """
    found: dict[tuple, Trajectory] = {}
    confirmed: set[tuple] = set()

    def key(v):
        return tuple(np.round(v, 9) + 0.0)

    def query(D):
        D = np.asarray(D, dtype=float)
        out = _optimal_start_trajectories(env, D)
        for traj in out:
            found.setdefault(key(traj.features), traj)
        return out

    query(_unit_directions())
    for _ in range(max_rounds):
        P = np.array([t.features for t in found.values()])
        normals, offsets = _hull_facets(P)
        pending = [(n, h) for n, h in zip(normals, offsets) if key(n) not in confirmed]
        if not pending:
            break
        results = query([n for n, _ in pending])
        for (n, h), traj in zip(pending, results):
            if n @ traj.features <= h + 1e-7:
                confirmed.add(key(n))
    else:
        raise RuntimeError("trajectory set construction did not terminate")

    P = np.array([t.features for t in found.values()])
    trajs = list(found.values())
    keep = _hull_vertices(P)
    order = sorted(keep, key=lambda i: key(P[i]))
    return TrajectorySet(env=env, trajectories=[trajs[i] for i in order], features=P[order].copy())


def _affine_frame(P: np.ndarray):
    center = P.mean(axis=0)
    X = P - center
    if len(P) == 1:
        return center, np.zeros((0, 3)), np.eye(3)
    _, s, vt = np.linalg.svd(X, full_matrices=True)
    rank = int(np.sum(s > 1e-9 * max(1.0, s[0])))
    return center, vt[:rank], vt[rank:]


def _hull_facets(P: np.ndarray):
    """Outward unit normals and support offsets of the hull of ``P``.

    Normals orthogonal to the affine span are included in both signs.
    """
    center, basis, comp = _affine_frame(P)
    normals = [c for c in comp] + [-c for c in comp]
    rank = len(basis)
    if rank == 1:
        normals += [basis[0], -basis[0]]
    elif rank >= 2:
        Y = (P - center) @ basis.T
        try:
            hull = ConvexHull(Y)
        except QhullError:
            hull = ConvexHull(Y, qhull_options="QJ")
        for eq in hull.equations:
            n = eq[:-1] @ basis
            normals.append(n / np.linalg.norm(n))
    normals = np.array(normals)
    return normals, (P @ normals.T).max(axis=0)


def _hull_vertices(P: np.ndarray) -> list[int]:
    center, basis, _ = _affine_frame(P)
    rank = len(basis)
    if rank == 0:
        return [0]
    Y = (P - center) @ basis.T
    if rank == 1:
        return sorted({int(np.argmin(Y[:, 0])), int(np.argmax(Y[:, 0]))})
    return sorted(int(i) for i in ConvexHull(Y).vertices)
