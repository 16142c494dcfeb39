"""Slow reference computations used to check the fast paths.

Nothing here touches the planner's transition tables: moves, features and
discounting are re-derived from the environment's fields.
"""
from __future__ import annotations

import numpy as np

_MOVES = {"up": (0, 1), "down": (0, -1), "left": (-1, 0), "right": (1, 0)}


def step(env, state, action: str):
    """One deterministic move; returns (next_state, (rubble, recharge, steps))."""
    x, y, charged = state
    dx, dy = _MOVES[action]
    tx, ty = x + dx, y + dy
    if not (0 <= tx < env.width and 0 <= ty < env.height) or (tx, ty) in env.blocked:
        tx, ty = x, y
    recharge = int((tx, ty) == env.charger and not charged)
    return (tx, ty, int(charged or recharge)), (int((tx, ty) in env.rubble), recharge, 1)


def enumerate_trajectories(env, start=None):
    """Every behavior a deterministic stationary policy can show from ``start``.

    Each is a simple path ending at the goal or a simple path closing into
    a loop that then repeats forever.  Yields (discounted features, n_steps,
    loop_start or None).
    """
    g = env.gamma
    s0 = tuple(start) if start is not None else (*env.start, 0)
    if (s0[0], s0[1]) == env.goal:
        yield np.zeros(3), 0, None
        return
    # stack entries: state, features so far, discount, index of each visited state
    stack = [(s0, np.zeros(3), 1.0, {s0: (0, np.zeros(3))})]
    while stack:
        s, acc, disc, seen = stack.pop()
        t = len(seen)
        for a in _MOVES:
            s2, phi = step(env, s, a)
            acc2 = acc + disc * np.array(phi, dtype=float)
            if (s2[0], s2[1]) == env.goal:
                yield acc2, t, None
            elif s2 in seen:
                k, acc_k = seen[s2]
                loop = (acc2 - acc_k) / (1.0 - g ** (t - k))
                yield acc_k + loop, t, k
            else:
                seen2 = dict(seen)
                seen2[s2] = (t, acc2)
                stack.append((s2, acc2, disc * g, seen2))


def best_return(env, w) -> float:
    """Largest discounted return over all enumerated behaviors."""
    w = np.asarray(w, dtype=float)
    return max(float(w @ f) for f, _, _ in enumerate_trajectories(env))


def truncated_features(env, policy_action, state, first_action: str, n_steps: int = 5000) -> np.ndarray:
    """Plain discounted accumulation along a long truncated rollout.

    ``policy_action`` maps a state triple to an action name.
    """
    out, disc, s, a = np.zeros(3), 1.0, tuple(state), first_action
    for _ in range(n_steps):
        if (s[0], s[1]) == env.goal:
            break
        s, phi = step(env, s, a)
        out += disc * np.array(phi, dtype=float)
        disc *= env.gamma
        a = policy_action(s)
    return out


def brute_p_bec(particles, weights, normals) -> float:
    """Belief mass inside the closed constraint region, one particle at a time."""
    total = 0.0
    for x, p in zip(np.asarray(particles, float), np.asarray(weights, float)):
        if all(float(np.dot(n, x)) >= 0.0 for n in normals):
            total += p
    return total / float(np.sum(weights))


def uniform_sphere(n: int, rng) -> np.ndarray:
    g = rng.standard_normal((n, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)
