import itertools
import json
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdiqkd.errors import CapacityError, DomainError
from pdiqkd.games import (
    MS_ALICE_OUTPUTS,
    MS_BOB_OUTPUTS,
    DeterministicStrategyPair,
    TwoPlayerFreeGame,
    best_strategy,
    classical_value,
    enumerate_strategies,
    evaluate_predicate,
    game_from_dict,
    game_to_dict,
    load_game,
    magic_square,
    save_game,
    strategy_value,
)


@pytest.fixture(scope="module")
def ms():
    return magic_square()


def brute_force_value(game):
    return max(strategy_value(game, pair) for pair in enumerate_strategies(game))


def test_ms_sets(ms):
    game, _ = ms
    assert game.alice_inputs == game.bob_inputs == (0, 1, 2)
    assert len(game.alice_outputs) == len(game.bob_outputs) == 4
    assert all(sum(a) % 2 == 0 for a in game.alice_outputs)
    assert all(sum(b) % 2 == 1 for b in game.bob_outputs)
    assert game.alice_input_dist == (Fraction(1, 3),) * 3
    assert game.bob_input_dist == (Fraction(1, 3),) * 3


def test_ms_winning_tuple(ms):
    game, maps = ms
    a, b = (0, 0, 0), (0, 0, 1)
    assert evaluate_predicate(game, 0, 0, a, b)
    ai, bi = game.index("a", a), game.index("b", b)
    assert maps.f(0, 0, ai) == 0
    assert maps.g(0, 0, bi) == 0


def test_ms_losing_tuple(ms):
    game, _ = ms
    assert not evaluate_predicate(game, 0, 0, (0, 0, 0), (1, 0, 0))


def test_even_parity_triple_is_not_a_bob_output(ms):
    game, _ = ms
    with pytest.raises(DomainError):
        evaluate_predicate(game, 0, 0, (0, 0, 0), (0, 1, 1))


@pytest.mark.parametrize("args", [(3, 0, (0, 0, 0), (0, 0, 1)), (0, -1, (0, 0, 0), (0, 0, 1)), (0, 0, (1, 1, 1), (0, 0, 1))])
def test_ms_domain_errors(ms, args):
    with pytest.raises(DomainError):
        evaluate_predicate(ms[0], *args)


def test_ms_winning_count_by_scan(ms):
    game, _ = ms
    wins = 0
    for x, y in itertools.product(range(3), repeat=2):
        for a in itertools.product((0, 1), repeat=3):
            for b in itertools.product((0, 1), repeat=3):
                if sum(a) % 2 or not sum(b) % 2:
                    continue
                wins += evaluate_predicate(game, x, y, a, b)
    assert wins == 72
    assert int(game.table.sum()) == 72


def test_common_bit_law_exhaustive(ms):
    game, maps = ms
    for x, y, a, b in itertools.product(range(3), range(3), range(4), range(4)):
        if game.table[x, y, a, b]:
            assert maps.f(x, y, a) == maps.g(x, y, b)
    assert maps.matches(game)


def test_common_bits_are_the_shared_cell(ms):
    game, maps = ms
    for x, y in itertools.product(range(3), repeat=2):
        for ai, a in enumerate(MS_ALICE_OUTPUTS):
            assert maps.f(x, y, ai) == a[y]
        for bi, b in enumerate(MS_BOB_OUTPUTS):
            assert maps.g(x, y, bi) == b[x]


def test_ms_classical_value(ms):
    game, _ = ms
    value = classical_value(game)
    assert value == Fraction(8, 9)
    assert isinstance(value, Fraction)
    assert value < 1
    assert brute_force_value(game) == value


def test_best_strategy_attains_value(ms):
    game, _ = ms
    value, pair = best_strategy(game)
    assert strategy_value(game, pair) == value


def test_enumerate_counts(ms):
    game, _ = ms
    pairs = list(enumerate_strategies(game))
    assert len(pairs) == 4096
    assert len(set(pairs)) == 4096


def test_trivial_games():
    always = TwoPlayerFreeGame.from_predicate((0, 1), (0,), (0, 1), (0,), lambda *t: True)
    never = TwoPlayerFreeGame.from_predicate((0, 1), (0,), (0, 1), (0,), lambda *t: False)
    assert classical_value(always) == 1
    assert classical_value(never) == 0
    single = TwoPlayerFreeGame.from_predicate((0,), (0,), (0,), (0,), lambda *t: True)
    assert len(list(enumerate_strategies(single))) == 1


def test_enumeration_guard(ms):
    game, _ = ms
    with pytest.raises(CapacityError):
        list(enumerate_strategies(game, guard=100))
    with pytest.raises(CapacityError):
        classical_value(game, guard=100)


def test_distribution_must_sum_to_one():
    with pytest.raises(DomainError):
        TwoPlayerFreeGame.from_predicate(
            (0, 1), (0,), (0,), (0,), lambda *t: True, alice_input_dist=[Fraction(1, 2), Fraction(1, 3)]
        )


def test_table_shape_checked():
    with pytest.raises(DomainError):
        TwoPlayerFreeGame((0,), (0,), (0,), (0,), (1,), (1,), np.ones((2, 1, 1, 1), bool))


def _relabel(game, rng):
    px = list(range(len(game.alice_inputs)))
    py = list(range(len(game.bob_inputs)))
    pa = list(range(len(game.alice_outputs)))
    pb = list(range(len(game.bob_outputs)))
    for p in (px, py, pa, pb):
        rng.shuffle(p)
    table = game.table[np.ix_(px, py, pa, pb)]
    return TwoPlayerFreeGame(
        tuple(f"x{i}" for i in px),
        tuple(f"y{i}" for i in py),
        tuple(f"a{i}" for i in pa),
        tuple(f"b{i}" for i in pb),
        tuple(game.alice_input_dist[i] for i in px),
        tuple(game.bob_input_dist[i] for i in py),
        table,
    )


def test_value_invariant_under_relabeling(ms):
    game, _ = ms
    rng = random.Random(11)
    for _ in range(5):
        assert classical_value(_relabel(game, rng)) == Fraction(8, 9)


@st.composite
def small_games(draw):
    nx, ny = draw(st.integers(1, 3)), draw(st.integers(1, 3))
    na, nb = draw(st.integers(1, 3)), draw(st.integers(1, 3))
    bits = draw(st.lists(st.booleans(), min_size=nx * ny * na * nb, max_size=nx * ny * na * nb))
    wx = draw(st.lists(st.integers(1, 5), min_size=nx, max_size=nx))
    wy = draw(st.lists(st.integers(1, 5), min_size=ny, max_size=ny))
    return TwoPlayerFreeGame(
        tuple(range(nx)),
        tuple(range(ny)),
        tuple(range(na)),
        tuple(range(nb)),
        tuple(Fraction(w, sum(wx)) for w in wx),
        tuple(Fraction(w, sum(wy)) for w in wy),
        np.array(bits).reshape(nx, ny, na, nb),
    )


@settings(max_examples=60, deadline=None)
@given(small_games())
def test_classical_value_matches_brute_force(game):
    assert classical_value(game) == brute_force_value(game)


@settings(max_examples=25, deadline=None)
@given(small_games(), st.randoms(use_true_random=False))
def test_relabeling_property(game, rnd):
    assert classical_value(_relabel(game, rnd)) == classical_value(game)


def test_json_round_trip(ms, tmp_path):
    game, maps = ms
    path = tmp_path / "ms.json"
    save_game(path, game, maps)
    doc = json.loads(path.read_text())
    assert doc["alice_input_dist"] == [[1, 3]] * 3
    assert doc["alice_outputs"] == ["000", "011", "101", "110"]
    loaded, loaded_maps = load_game(path)
    assert np.array_equal(loaded.table, game.table)
    assert classical_value(loaded) == Fraction(8, 9)
    assert np.array_equal(loaded_maps.f_table, maps.f_table)


def test_json_rejects_bad_common_bits(ms):
    game, maps = ms
    doc = game_to_dict(game, maps)
    doc["common_bits"]["f"][0][0][0] = 1
    with pytest.raises(DomainError):
        game_from_dict(doc)


def test_json_rejects_missing_fields():
    with pytest.raises(DomainError):
        game_from_dict({"alice_inputs": ["0"]})


def test_strategy_value_exact(ms):
    game, _ = ms
    # all-zero Alice rows vs all-(0,0,1) Bob columns: the cell bit of Bob is 1 only in row 2
    pair = DeterministicStrategyPair((0, 0, 0), (0, 0, 0))
    assert strategy_value(game, pair) == Fraction(6, 9)
