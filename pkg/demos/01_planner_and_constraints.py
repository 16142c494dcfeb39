"""A rubble detour, the constraints its demonstration implies, and their area."""
import numpy as np

from groupteach import oracles
from groupteach.bec import constraints_from_demo, minimize, spherical_area
from groupteach.mdp import GridEnvironment, normalize, optimal_trajectory, rollout, solve_policy

w_star = normalize((-3.0, 3.5, -1.0))
env = GridEnvironment(5, 3, (0, 1), (4, 1), rubble=[(1, 1), (2, 1), (3, 1)], charger=(2, 0))
print(env.render(), "\n")

pol = solve_policy(env, w_star)
demo = rollout(env, pol)
print("demo:", " ".join(f"{s[:2]}" for s, _, _ in demo.steps), "-> goal")
print("discounted features [rubble, recharge, steps]:", np.round(demo.features, 4))
print("matches brute-force optimum:", np.isclose(w_star @ demo.features, oracles.best_return(env, w_star)))

# someone who only counts steps walks straight through the rubble
greedy = optimal_trajectory(env, (0.0, 0.0, -1.0))
print("step-only features:", np.round(greedy.features, 4))

cs = constraints_from_demo(env, demo, pol)
small = minimize(cs)
print(f"\n{len(cs)} demo constraints, {len(small)} after removing redundant ones")
for c in small:
    print("  normal", np.round(c.vector, 3), "admits w*:", c.satisfied_by(w_star))
area = spherical_area(small)
print(f"area of the consistent region: {area.fraction:.4f} (+/- {area.stderr:.4f})")
