"""Trace a single team session under the joint strategy."""
import sys

from groupteach.config import StudyConfig
from groupteach.study import build_domain, run_session

strategy = sys.argv[1] if len(sys.argv) > 1 else "joint"
composition = sys.argv[2] if len(sys.argv) > 2 else "NNP"

domain = build_domain(StudyConfig())
rec = run_session(strategy, composition, 0, domain)
for p in rec.periods:
    who = f"member {p['member']} " if "member" in p else ""
    marks = "".join("+" if all(c) else "-" for c in p["correct"])
    print(f"{who}period {p['period']:2d} KC{p['kc']} demos {p['demos']['env_indices']} "
          f"area {p['demos']['area']:.3f} answers {marks} beta {[round(b, 3) for b in p['beta']]}")
print(f"\n{strategy} {composition}: N_i = {rec.n_interactions}, team knowledge = {rec.team_knowledge:.3f}, "
      f"converged = {rec.converged}")
