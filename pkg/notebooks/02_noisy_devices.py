"""
Depolarizing noise
==================

Mixing the shared state with the maximally mixed one lowers the win
probability linearly, from 1 at q=0 down to 1/2 at q=1.
"""

import numpy as np

from pdiqkd import NoiseModel, calibrate_noise, ideal_ms_strategy, win_probability

strategy = ideal_ms_strategy()
for q in np.linspace(0, 1, 6):
    print("q=%.1f  win=%.4f" % (q, win_probability(strategy, NoiseModel.depolarizing(q))))

# %%
# Calibrate a device to a target win probability
q = calibrate_noise(0.95)
print("q for 0.95:", q)
