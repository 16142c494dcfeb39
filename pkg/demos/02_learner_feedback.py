"""How one novice learner's belief and learning ability respond to demos and feedback."""
import numpy as np

from groupteach.bec import p_bec
from groupteach.belief import init_uniform_with_prior
from groupteach.config import StudyConfig
from groupteach.curriculum import select_demos, select_tests
from groupteach.learner import CONFIRMATORY, CORRECTIVE, NOVICE, make_learner, observe_demos, receive_feedback, respond_to_test
from groupteach.study import build_domain

domain = build_domain(StudyConfig(pool_size=32))
kc = domain.kcs[0]
print(f"KC{kc.id}: {kc.description}")

learner = make_learner(NOVICE, 500, seed=3)
print(f"beta0 = {learner.beta0:.3f}, prior knowledge of KC1 = {p_bec(learner.self_belief, kc.target_constraints):.3f}")

teacher_view = init_uniform_with_prior(500, 0)
for period in range(1, 5):
    plan = select_demos(kc, teacher_view, domain.pool, seed=period)
    observe_demos(learner, plan.conveyed)
    test = select_tests(kc, domain.pool, exclude=set(plan.env_indices), used={})[0]
    before = p_bec(learner.self_belief, test.discriminating)
    response, correct = respond_to_test(learner, test)
    receive_feedback(learner, test, response, CONFIRMATORY if correct else CORRECTIVE)
    print(f"period {period}: demo envs {plan.env_indices} area {plan.area:.3f} | "
          f"{'correct' if correct else 'wrong  '} | p_bec on test {before:.3f} -> "
          f"{p_bec(learner.self_belief, test.discriminating):.3f} | beta {learner.beta:.3f}")

print("beta history:", np.round(learner.beta_history, 3))
