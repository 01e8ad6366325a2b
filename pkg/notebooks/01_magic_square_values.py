"""
Magic Square: classical versus quantum
======================================

Brute force over all 4096 deterministic strategy pairs gives the exact
classical value. The Mermin-Peres operators on two EPR pairs win every round.
"""

# %%
# Build the game and its common-bit maps
from pdiqkd import magic_square, classical_value, ideal_ms_strategy, win_probability
from pdiqkd.games import best_strategy

game, maps = magic_square()
print("winning tuples:", int(game.table.sum()), "of", game.table.size)

# %%
# Exact classical value, as a Fraction
value, pair = best_strategy(game)
print("omega_c =", classical_value(game))
print("an optimal pair:", [game.alice_outputs[i] for i in pair.alice_map], [game.bob_outputs[i] for i in pair.bob_map])

# %%
# The ideal quantum strategy wins with probability one
print("omega* (ideal) = %.12f" % win_probability(ideal_ms_strategy()))
