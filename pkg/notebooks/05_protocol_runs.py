"""
Running the protocol
====================

Seeded runs against honest and classical devices. A classical device cannot
keep up with a 95% test threshold once the test set is large.
"""

from fractions import Fraction

from pdiqkd import (
    ClassicalDevice,
    OmniscientClassicalEve,
    ProtocolConfig,
    QuantumDevice,
    RandomGuessEve,
    empirical_guessing_probability,
    run_protocol,
)

cfg = ProtocolConfig(1000, epsilon=Fraction(1, 10), master_seed=7)
res = run_protocol(cfg, QuantumDevice.calibrated(0.95), RandomGuessEve())
print(res.record())

# %%
# Honest noisy device: Eve guessing at random gets about half of the bits
stats = empirical_guessing_probability(cfg, QuantumDevice.calibrated(0.95), RandomGuessEve(), runs=50)
print("acceptance %.2f  per-bit %.3f" % (stats.acceptance_rate, stats.per_bit_success))

# %%
# Deterministic device with an Eve who knows its tables
dev = ClassicalDevice()
for n in (40, 200, 1000):
    cfg = ProtocolConfig(n, epsilon=Fraction(1, 20))
    runs = [run_protocol(cfg, dev, OmniscientClassicalEve(dev), i) for i in range(100)]
    print("n=%4d  accepted %d/100" % (n, sum(not r.aborted for r in runs)))
