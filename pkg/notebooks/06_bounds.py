"""
Analytic bounds with placeholder constants
==========================================

The min-entropy bound grows like delta**9 * n and pays gamma * n for the
leaked test outputs. Its constants are parameters; the defaults are
placeholders and every report prints them.
"""

from fractions import Fraction

from pdiqkd import BoundConstants, concentration_audit, min_entropy_bound

consts = BoundConstants()
print(consts)

# %%
# With the optimistic C* = 1/9 the gain per round is about delta**9 ~ 2e-9
# nats, so the test fraction has to be far smaller than that before the
# bound turns positive, and n has to be huge for eps_s to become small.
for n in (10**12, 10**15, 10**18):
    rep = min_entropy_bound(n, epsilon=0.001, gamma=1e-10, p_a=0.5, c_star=1 / 9, constants=consts)
    print("n=%.0e  h_min >= %.4g bits  eps_s=%.3g" % (n, rep.h_min_bound, rep.epsilon_s))

# %%
# Exhaustive check of the sampling bound on a tiny instance
audit = concentration_audit(12, 4, Fraction(1, 4))
print("worst pass probability %.4f, bound %.4f" % (audit.max_violation, audit.bound))
