"""
Threshold repetition by Monte Carlo
===================================

n rounds in parallel, won when at least a fraction t are won. For i.i.d.
rounds the pass probability is a binomial tail, which the simulation matches.
"""

import math
from fractions import Fraction

from pdiqkd import StrategyBundle, ThresholdGameSpec, monte_carlo_threshold, magic_square, ideal_ms_strategy
from pdiqkd.quantum import NoiseModel, calibrate_noise
from pdiqkd.repetition import binomial_tail

game, _ = magic_square()
bundle = StrategyBundle(game, ideal_ms_strategy(), NoiseModel.depolarizing(calibrate_noise(0.95)))

for n in (100, 400, 1000):
    spec = ThresholdGameSpec(n, Fraction(19, 20))
    est = monte_carlo_threshold(bundle, spec, trials=500, seed=1)
    exact = binomial_tail(n, 0.95, math.ceil(spec.t * n))
    print("n=%4d  mc=%.3f [%.3f, %.3f]  tail=%.3f" % (n, est.estimate, est.ci_low, est.ci_high, exact))
