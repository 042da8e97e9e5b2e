import numpy as np
import pytest
from scipy import stats

from featsel import ga
from featsel.dataset import FeatureMask, SplitSpec, SyntheticSpec, split, synthesize
from featsel.seeding import derive_seed


def pop_with(fitnesses, n=10):
    rng = np.random.default_rng(99)
    masks = []
    while len(masks) < len(fitnesses):
        m = ga.random_mask(n, rng)
        if m not in masks:
            masks.append(m)
    return [ga.Chromosome(m, f) for m, f in zip(masks, fitnesses)]


def frequencies(draw, pop, n_draws, seed=0):
    rng = np.random.default_rng(seed)
    index = {c.mask: i for i, c in enumerate(pop)}
    counts = np.zeros(len(pop))
    for _ in range(n_draws):
        counts[index[draw(pop, rng).mask]] += 1
    return counts / n_draws


def test_init_population():
    cfg = ga.GaConfig(population_size=60)
    a = ga.init_population(cfg, np.random.default_rng(1))
    b = ga.init_population(cfg, np.random.default_rng(1))
    assert len(a) == 60 and a == b
    assert all(m.popcount > 0 for m in a)


def test_init_bit_frequencies_uniform():
    cfg = ga.GaConfig(population_size=1000)
    bits = np.array([m.bits for m in ga.init_population(cfg, np.random.default_rng(2))])
    np.testing.assert_allclose(bits.mean(0), 0.5, atol=0.05)


def test_proportional_frequencies():
    pop = pop_with([0.8, 0.2])
    np.testing.assert_allclose(frequencies(ga.select_proportional, pop, 10_000), [0.8, 0.2], atol=0.03)
    flat = pop_with([0.4] * 4)
    np.testing.assert_allclose(frequencies(ga.select_proportional, flat, 10_000), 0.25, atol=0.03)


def test_proportional_chi_square():
    fit = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
    pop = pop_with(fit)
    counts = frequencies(ga.select_proportional, pop, 10_000, seed=3) * 10_000
    assert stats.chisquare(counts, fit / fit.sum() * 10_000).pvalue > 0.01


def test_selection_probabilities():
    p = ga.selection_probabilities([0.0, 0.0, 0.0])
    np.testing.assert_allclose(p, 1 / 3)
    assert ga.selection_probabilities([0.1, 0.7, 0.2]).sum() == pytest.approx(1.0, abs=1e-15)


def test_full_tournament_returns_global_best():
    pop = pop_with([0.3, 0.9, 0.5, 0.1])
    rng = np.random.default_rng(0)
    assert all(ga.select_tournament(pop, 4, rng).fitness == 0.9 for _ in range(50))
    with pytest.raises(ValueError):
        ga.select_tournament(pop, 5, rng)


def test_tournament_ties_prefer_smaller_mask_value():
    a = ga.Chromosome(FeatureMask.from_string("0011"), 0.5)
    b = ga.Chromosome(FeatureMask.from_string("0001"), 0.5)
    assert ga.select_tournament([a, b], 2, np.random.default_rng(0)) is b


def test_default_tournament_size():
    assert ga.GaConfig(population_size=60).effective_tournament_size == 36
    assert ga.GaConfig(population_size=20).effective_tournament_size == 12


def test_tournament_favours_best_more_than_proportional():
    fit = [0.50, 0.52, 0.54, 0.56, 0.58, 0.60]
    pop = pop_with(fit)
    best = int(np.argmax(fit))
    prop = frequencies(ga.select_proportional, pop, 5000)[best]
    tour = frequencies(lambda p, r: ga.select_tournament(p, 4, r), pop, 5000)[best]
    assert tour > prop


def test_hall_of_fame_selection():
    pop = pop_with([0.2, 0.4, 0.6])
    hof = [pop[2]]
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = ga.select_hall_of_fame(hof, pop, rng)
        assert a is pop[2] and b in pop
    with pytest.raises(ValueError):
        ga.select_hall_of_fame([], pop, rng)


def test_crossover_rate_zero_is_identity():
    a, b = FeatureMask.from_string("1100110011"), FeatureMask.from_string("0011001100")
    c1, c2, rep = ga.crossover(a, b, 0.0, np.random.default_rng(0))
    assert (c1, c2, rep) == (a, b, 0)


def test_crossover_cut_and_repair():
    a, b = FeatureMask.from_string("1111100000"), FeatureMask.from_string("0000011111")
    c1, c2, rep = ga.crossover(a, b, 1.0, np.random.default_rng(0), cut=5)
    assert str(c1) == "1111111111"
    assert rep == 1 and c2.popcount > 0


def test_crossover_conserves_bits():
    rng = np.random.default_rng(4)
    for _ in range(200):
        a, b = ga.random_mask(10, rng), ga.random_mask(10, rng)
        c1, c2, rep = ga.crossover(a, b, 1.0, rng)
        if rep == 0:
            assert np.array_equal(c1.as_array().astype(int) + c2.as_array(), a.as_array().astype(int) + b.as_array())


def test_mutation():
    rng = np.random.default_rng(0)
    m = FeatureMask.from_string("1010011100")
    assert ga.mutate(m, 0.0, rng)[0] == m
    assert str(ga.mutate(m, 1.0, rng)[0]) == "0101100011"
    full = FeatureMask.full(10)
    repaired, rep = ga.mutate(full, 1.0, rng)
    assert rep == 1 and repaired.popcount > 0


def test_mutation_flip_frequency():
    rng = np.random.default_rng(1)
    m = FeatureMask.from_string("1010101010")
    flips = 0
    for _ in range(10_000):
        flips += sum(x != y for x, y in zip(ga.mutate(m, 0.15, rng)[0].bits, m.bits))
    assert flips / 100_000 == pytest.approx(0.15, abs=0.02)


def test_fitness_cache_memoises():
    calls = []

    def fit(mask):
        calls.append(mask)
        return ga.onemax(mask)

    cache = ga.FitnessCache(fit)
    m = FeatureMask.from_string("1100000000")
    assert cache(m) == 0.2
    assert cache(m) == 0.2
    assert cache.evaluations == 1 and len(calls) == 1


def test_fitness_cache_rejects_out_of_range():
    with pytest.raises(ValueError):
        ga.FitnessCache(lambda m: 1.5)(FeatureMask.full(3))


@pytest.mark.parametrize("strategy", ga.STRATEGIES)
def test_evolve_invariants(strategy):
    cfg = ga.GaConfig(population_size=12, generations=12, master_seed=3, strategy=strategy)
    seen = set()

    def fit(mask):
        assert mask.popcount > 0
        seen.add(mask)
        return ga.onemax(mask)

    best, log = ga.evolve(cfg, fit)
    assert len(log.generations) == 12
    curve = log.best_fitness_curve
    assert all(b >= a for a, b in zip(curve, curve[1:]))
    assert log.generations[-1].evaluations == len(seen)
    assert len(log.hall_of_fame) == 12
    assert best.fitness == max(curve)
    assert log.test_accuracy is None


def test_evolve_deterministic_and_thread_independent():
    cfg = ga.GaConfig(population_size=16, generations=8, master_seed=5, strategy="hof")
    _, a = ga.evolve(cfg, ga.onemax)
    _, b = ga.evolve(cfg, ga.onemax, threads=4)
    assert a.generations == b.generations
    assert a.best == b.best


def test_onemax_finds_optimum():
    hits = 0
    for seed in range(10):
        cfg = ga.GaConfig(population_size=20, generations=30, master_seed=seed, tournament_size=12)
        best, _ = ga.evolve(cfg, ga.onemax)
        hits += str(best.mask) == "1111111111"
    assert hits >= 9


def test_config_validation():
    with pytest.raises(ValueError):
        ga.GaConfig(population_size=3)
    with pytest.raises(ValueError):
        ga.GaConfig(strategy="roulette")
    with pytest.raises(ValueError):
        ga.GaConfig(population_size=10, tournament_size=11)
    assert ga.GaConfig().effective_mutation_rate == 0.1


@pytest.fixture(scope="module")
def wrapper_setup():
    ds = synthesize(SyntheticSpec(300, 4, 6, 2.0, 0.05, seed=1))
    dev, test = split(ds, SplitSpec(0.7, True, derive_seed(0, "split")))
    return dev, test


def test_wrapper_evaluator_svm(wrapper_setup):
    dev, test = wrapper_setup
    ev = ga.WrapperEvaluator(dev, test, "svm", 0)
    full = FeatureMask.full(10)
    assert ev(full) == ev(full)
    assert 0.5 < ev(full) <= 1.0
    noise = FeatureMask.from_string("0000111111")
    assert ev(noise) == pytest.approx(0.5, abs=0.15)
    assert 0 <= ev.test_accuracy(full) <= 1


def test_wrapper_evaluator_ann_and_evolve(wrapper_setup):
    dev, test = wrapper_setup
    ev = ga.WrapperEvaluator(dev, test, "ann", 1, train_cfg=ga.mlp.TrainConfig(epochs=50))
    cfg = ga.GaConfig(population_size=6, generations=2, master_seed=1)
    best, log = ga.evolve(cfg, ev)
    assert best.fitness == ev(best.mask)
    assert log.test_accuracy == ev.test_accuracy(best.mask)


def test_divergent_fitness_is_zero_and_flagged():
    def boom(mask):
        raise ga.mlp.TrainingDiverged(3)

    cache = ga.FitnessCache(boom)
    assert cache(FeatureMask.full(4)) == 0.0
    assert cache.flagged == [FeatureMask.full(4)]
