"""
The eta-guessing game
=====================

Eve gets both inputs except on anchor rounds, and tries to guess the common
bit. Classical players cannot beat 8/9. With the ideal quantum strategy the
common bit is uniform, so a blind Eve only wins 9/16 of the time.
"""

from fractions import Fraction

from pdiqkd import (
    ClassicalEveStrategy,
    anchoring_check,
    build_guessing_game,
    c_star_bounds,
    classical_guessing_value,
    ideal_ms_strategy,
    magic_square,
    strategy_guessing_value,
)

game, maps = magic_square()
g = build_guessing_game(game, maps, Fraction(1, 8))
print("anchored:", anchoring_check(g))

classical = classical_guessing_value(g)
quantum_blind = strategy_guessing_value(g, ideal_ms_strategy(), ClassicalEveStrategy.uniform(g))
print("classical guessing value:", classical)
print("ideal strategy vs uniform Eve: %.4f" % quantum_blind)

# %%
# Everything evaluated so far caps the gap C* at 1 - max(values)
print(c_star_bounds([classical, quantum_blind]))
