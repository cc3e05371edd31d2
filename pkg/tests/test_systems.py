import numpy as np
import pytest

import oracles
from ergolab.core import Partition
from ergolab.errors import (
    DimensionError,
    ParameterError,
    ReturnTimeOverflowError,
    ValidationError,
)
from ergolab.seeds import derive_seed
from ergolab.systems import (
    BernoulliShift,
    CocycleSpec,
    FinitePermutation,
    Induced,
    MarkovShift,
    RelIndepProduct,
    RotationCoding,
    SkewProduct,
    TfTriple,
    cell_driven_cocycle,
    conditional_expectation,
    constant_cocycle,
    dyadic_fiber_partition,
    frozen_cocycle,
    generator_partition,
    induce,
    lifted_base_partition,
    load_system,
    product_partition,
    random_permutation_cocycle,
    random_rotation_cocycle,
    read_cocycle_csv,
    read_trajectory,
    sample_trajectory,
    write_cocycle_csv,
    write_trajectory,
)

GOLDEN = 0.6180339887498949


class TestBernoulliShift:
    def test_frequencies(self):
        model = BernoulliShift([0.2, 0.3, 0.5])
        states = model.sample_states(200_000, seed=1)
        freq = np.bincount(states, minlength=3) / states.size
        assert np.allclose(freq, [0.2, 0.3, 0.5], atol=0.01)

    def test_determinism_and_burn_in(self):
        model = BernoulliShift([0.5, 0.5])
        a = model.sample_states(100, seed=9)
        b = model.sample_states(100, seed=9)
        assert np.array_equal(a, b)
        # burn_in drops a prefix of the same underlying draw
        c = model.sample_states(80, seed=9, burn_in=20)
        assert np.array_equal(c, a[20:])

    def test_validation(self):
        with pytest.raises(ValidationError):
            BernoulliShift([0.7, 0.7])
        model = BernoulliShift([1.0])
        with pytest.raises(ParameterError):
            model.sample_states(0, seed=1)
        with pytest.raises(ParameterError):
            model.sample_states(10, seed=1, burn_in=-1)


class TestMarkovShift:
    P = np.array([[0.9, 0.1], [0.4, 0.6]])

    def test_stationary_solves_balance(self):
        model = MarkovShift(self.P)
        # independent computation: solve (P^T - I) pi = 0 with sum 1
        A = np.vstack([self.P.T - np.eye(2), np.ones(2)])
        pi, *_ = np.linalg.lstsq(A, np.array([0.0, 0.0, 1.0]), rcond=None)
        assert np.allclose(model.stationary, pi, atol=1e-12)
        assert np.allclose(model.state_weights(), pi, atol=1e-12)

    def test_empirical_transitions(self):
        model = MarkovShift(self.P)
        states = model.sample_states(200_000, seed=2)
        for i in (0, 1):
            here = states[:-1] == i
            freq = np.mean(states[1:][here] == 1)
            assert freq == pytest.approx(self.P[i, 1], abs=0.01)

    def test_rejects_bad_matrix(self):
        with pytest.raises(ValidationError):
            MarkovShift([[0.5, 0.4], [0.5, 0.5]])
        with pytest.raises(DimensionError):
            MarkovShift(np.ones((2, 3)) / 3)

    def test_rejects_nonstationary_vector(self):
        with pytest.raises(ValidationError):
            MarkovShift(self.P, stationary=[0.5, 0.5])


class TestRotationCoding:
    def test_angle_snapping(self):
        assert RotationCoding(0.25, grid=2).angle.denominator == 4
        assert RotationCoding((3, 7), grid=2).angle.numerator == 3
        assert RotationCoding(1.25, grid=2).angle.numerator == 1

    def test_golden_snap_is_exact_for_the_float(self):
        rot = RotationCoding(GOLDEN, grid=2)
        assert rot.q == 857761409
        assert rot.p / rot.q == GOLDEN
        assert rot.q <= 2**31

    def test_grid_validation(self):
        with pytest.raises(ParameterError):
            RotationCoding(0.25, grid=5)

    def test_orbit_matches_integer_reference(self):
        """Bit-exact agreement with a pure-python integer orbit."""
        rot = RotationCoding(GOLDEN, grid=2)
        seed = 23
        rng = np.random.default_rng(seed)
        n0 = int(rng.integers(rot.q))
        expected = oracles.rotation_labels_brute(rot.p, rot.q, n0, 2000, rot.grid)
        got = rot.sample_states(2000, seed=seed)
        assert np.array_equal(got, np.asarray(expected))

    def test_cell_weights(self):
        rot = RotationCoding((2, 7), grid=3)
        w = rot.state_weights()
        assert w.sum() == pytest.approx(1.0)
        # cells get ceil-split fine points: 3, 2, 2 out of 7
        assert np.allclose(w, [3 / 7, 2 / 7, 2 / 7])

    def test_label_frequencies_near_uniform(self, sturmian_traj):
        freq = np.mean(sturmian_traj.labels)
        assert freq == pytest.approx(0.5, abs=0.01)

    def test_factor_complexity_is_two_n(self, sturmian_traj):
        # a two-cut circle coding admits exactly 2n distinct n-blocks
        sample = sturmian_traj.labels[:200_000]
        for n in range(1, 11):
            assert oracles.distinct_factor_count(sample, n) == 2 * n


class TestFinitePermutation:
    def test_orbit_follows_permutation(self):
        model = FinitePermutation([2, 0, 1, 3])
        states = model.sample_states(50, seed=4)
        assert np.array_equal(states[1:], model.perm[states[:-1]])

    def test_inverse(self):
        model = FinitePermutation([2, 0, 1])
        inv = model.inverse()
        assert np.array_equal(inv[model.perm], np.arange(3))

    def test_rejects_non_permutation(self):
        with pytest.raises(ValidationError):
            FinitePermutation([0, 0, 1])


class TestCocycleSpec:
    def test_exactly_one_of_steps_perms(self):
        driver = Partition.trivial(2)
        with pytest.raises(ValidationError):
            CocycleSpec("constant", 4, driver)
        with pytest.raises(ValidationError):
            CocycleSpec("constant", 4, driver, steps=np.array([1]), perms=np.eye(4, dtype=int))

    def test_steps_are_reduced_mod_m(self):
        spec = constant_cocycle(3, 4, steps=7)
        assert spec.steps.tolist() == [3]
        assert spec.is_rotation

    def test_shape_validation(self):
        driver = Partition.identity(3)
        with pytest.raises(DimensionError):
            cell_driven_cocycle(driver, 4, steps=[1, 2])
        with pytest.raises(ValidationError):
            cell_driven_cocycle(driver, 2, perms=[[0, 0], [0, 1], [1, 0]])

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            CocycleSpec("weird", 2, Partition.trivial(1), steps=np.array([1]))

    def test_step_sequence_needs_rotation(self):
        driver = Partition.identity(2)
        spec = cell_driven_cocycle(driver, 3, perms=[[1, 2, 0], [0, 2, 1]])
        with pytest.raises(ParameterError):
            spec.step_sequence(np.zeros(4, dtype=np.int64))


class TestFiberEvolution:
    def path_by_hand(self, spec, base_states, u0):
        out = [u0]
        for x in base_states[:-1]:
            cell = spec.driver.labels[x]
            if spec.is_rotation:
                out.append((out[-1] + int(spec.steps[cell])) % spec.m)
            else:
                out.append(int(spec.perms[cell, out[-1]]))
        return np.asarray(out)

    def test_rotation_path(self):
        driver = Partition.identity(2)
        spec = cell_driven_cocycle(driver, 5, steps=[1, 3])
        rng = np.random.default_rng(6)
        base = rng.integers(0, 2, size=200)
        for u0 in (0, 2):
            assert np.array_equal(spec.fiber_path(base, u0), self.path_by_hand(spec, base, u0))

    def test_permutation_path(self):
        driver = Partition.identity(2)
        spec = cell_driven_cocycle(driver, 4, perms=[[1, 0, 3, 2], [2, 3, 0, 1]])
        rng = np.random.default_rng(7)
        base = rng.integers(0, 2, size=150)
        assert np.array_equal(spec.fiber_path(base, 3), self.path_by_hand(spec, base, 3))

    def test_paths_all_agrees_with_single(self):
        driver = Partition.identity(3)
        rng = np.random.default_rng(8)
        base = rng.integers(0, 3, size=60)
        for spec in (
            cell_driven_cocycle(driver, 6, steps=[0, 2, 5]),
            random_permutation_cocycle(driver, 6, seed=12),
        ):
            table = spec.fiber_paths_all(base)
            for u0 in range(6):
                assert np.array_equal(table[:, u0], spec.fiber_path(base, u0))


class TestCocycleBuilders:
    def test_frozen_is_identity(self):
        spec = frozen_cocycle(4, 8)
        assert spec.steps.tolist() == [0]
        base = np.zeros(10, dtype=np.int64)
        assert np.array_equal(spec.fiber_path(base, 5), np.full(10, 5))

    def test_random_rotation_reproducible(self):
        driver = Partition.identity(4)
        a = random_rotation_cocycle(driver, 8, seed=31)
        b = random_rotation_cocycle(driver, 8, seed=31)
        c = random_rotation_cocycle(driver, 8, seed=32)
        assert np.array_equal(a.steps, b.steps)
        assert not np.array_equal(a.steps, c.steps)

    def test_random_permutation_rows_are_bijections(self):
        driver = Partition.identity(3)
        spec = random_permutation_cocycle(driver, 5, seed=44)
        for row in spec.perms:
            assert np.array_equal(np.sort(row), np.arange(5))


class TestSkewProduct:
    def build(self):
        base = BernoulliShift([0.5, 0.5])
        driver = Partition.identity(2)
        return SkewProduct(base, cell_driven_cocycle(driver, 4, steps=[1, 3]))

    def test_driver_must_match_base(self):
        base = BernoulliShift([0.5, 0.5])
        with pytest.raises(DimensionError):
            SkewProduct(base, cell_driven_cocycle(Partition.identity(3), 4, steps=[1, 2, 3]))

    def test_state_encoding(self):
        ext = self.build()
        states = ext.sample_states(500, seed=10)
        b, u = ext.split_states(states)
        bb, uu = ext.sample_components(500, seed=10)
        assert np.array_equal(b, bb)
        assert np.array_equal(u, uu)

    def test_base_marginal_is_bit_identical(self):
        ext = self.build()
        b, _ = ext.sample_components(300, seed=11)
        assert np.array_equal(b, ext.base.sample_states(300, seed=11))

    def test_fiber_obeys_cocycle(self):
        ext = self.build()
        b, u = ext.sample_components(400, seed=12)
        steps = ext.cocycle.step_sequence(b)
        assert np.array_equal(u[1:], (u[:-1] + steps[:-1]) % 4)

    def test_state_weights(self):
        ext = self.build()
        w = ext.state_weights()
        assert w.shape == (8,)
        assert np.allclose(w, 1 / 8)


class TestRelIndepProduct:
    def test_marginal_matches_skew(self):
        base = BernoulliShift([0.5, 0.5])
        ext = SkewProduct(base, random_rotation_cocycle(Partition.identity(2), 8, seed=3))
        rel = RelIndepProduct(ext)
        b, u = ext.sample_components(400, seed=21)
        rb, ru, rv = rel.sample_components(400, seed=21)
        assert np.array_equal(b, rb)
        assert np.array_equal(u, ru)
        # the second copy obeys the same cocycle over the same base orbit
        steps = ext.cocycle.step_sequence(rb)
        assert np.array_equal(rv[1:], (rv[:-1] + steps[:-1]) % 8)

    def test_state_encoding(self):
        base = BernoulliShift([0.5, 0.5])
        ext = SkewProduct(base, frozen_cocycle(2, 4))
        rel = RelIndepProduct(ext)
        states = rel.sample_states(100, seed=5)
        b, u, v = rel.sample_components(100, seed=5)
        assert np.array_equal(states, (b * 4 + u) * 4 + v)


class TestTfTriple:
    def build(self):
        base = BernoulliShift([0.2, 0.2, 0.6])
        return TfTriple(base, [0], [1], angle=0.25, m=8)

    def test_rotation_steps(self):
        assert self.build().rotation_steps == 2

    def test_coordinates_move_together(self):
        tf = self.build()
        b, z1, z2 = tf.sample_components(500, seed=33)
        inc = tf.f_values[b] * tf.rotation_steps
        assert np.array_equal(z1[1:], (z1[:-1] + inc[:-1]) % 8)
        # the offset between the coordinates is invariant
        assert np.unique((z1 - z2) % 8).size == 1

    def test_validation(self):
        base = BernoulliShift([0.2, 0.2, 0.6])
        with pytest.raises(ValidationError):
            TfTriple(base, [0], [0], angle=0.25, m=8)
        with pytest.raises(ValidationError):
            TfTriple(base, [0], [2], angle=0.25, m=8)
        heavy = BernoulliShift([0.3, 0.3, 0.4])
        with pytest.raises(ValidationError):
            TfTriple(heavy, [0], [1], angle=0.25, m=8)


class TestInduced:
    def test_kac_on_coin_cylinder(self):
        base = BernoulliShift([0.5, 0.5])
        ind = induce(base, [0])
        _, times = ind.sample_returns(20_000, seed=14)
        assert times.mean() == pytest.approx(2.0, rel=0.05)

    def test_return_states_are_relabelled(self):
        base = BernoulliShift([0.25, 0.25, 0.25, 0.25])
        ind = induce(base, [1, 3])
        states, times = ind.sample_returns(5000, seed=15)
        assert set(np.unique(states)) <= {0, 1}
        assert times.min() >= 1
        # conditioned law on the return set is uniform over its two members
        assert np.mean(states == 0) == pytest.approx(0.5, abs=0.03)

    def test_deterministic_cycle_returns(self):
        ind = induce(FinitePermutation([1, 2, 0]), [0])
        _, times = ind.sample_returns(10, seed=16)
        assert np.array_equal(times, np.full(10, 3))

    def test_overflow_guard(self):
        base = BernoulliShift([1.0 - 1e-6, 1e-6])
        ind = Induced(base, [1], horizon=1000)
        with pytest.raises(ReturnTimeOverflowError):
            ind.sample_returns(5, seed=17)

    def test_empty_set_rejected(self):
        with pytest.raises(ValidationError):
            induce(BernoulliShift([0.5, 0.5]), [])


class TestPartitionHelpers:
    def test_dyadic_fiber_partition(self):
        part = dyadic_fiber_partition(8, 2)
        assert part.labels.tolist() == [0, 0, 1, 1, 2, 2, 3, 3]
        with pytest.raises(ParameterError):
            dyadic_fiber_partition(6, 2)

    def test_product_partition(self):
        bp = Partition.identity(2)
        fp = Partition.from_labels([0, 0, 1, 1])
        part = product_partition(bp, fp)
        assert part.cell_count == 4
        assert part.labels.tolist() == [0, 0, 1, 1, 2, 2, 3, 3]

    def test_lifted_base_ignores_fiber(self):
        part = lifted_base_partition(Partition.identity(2), 3)
        assert part.labels.tolist() == [0, 0, 0, 1, 1, 1]

    def test_generator_partition_shapes(self):
        base = BernoulliShift([0.5, 0.5])
        ext = SkewProduct(base, frozen_cocycle(2, 8))
        part = generator_partition(ext, fiber_depth=2)
        assert part.n_states == 16
        assert part.cell_count == 8
        rel = RelIndepProduct(ext)
        assert generator_partition(rel).cell_count == 8
        assert generator_partition(base) == Partition.identity(2)


class TestConditionalExpectation:
    def test_array_and_callable_agree(self):
        base = BernoulliShift([0.5, 0.5])
        ext = SkewProduct(base, frozen_cocycle(2, 4))
        table = np.arange(8, dtype=float).reshape(2, 4)
        for x in (0, 1):
            want = conditional_expectation(ext, table, x)
            got = conditional_expectation(ext, lambda b, u: table[b, u], x)
            assert got == pytest.approx(want)
            assert want == pytest.approx(table[x].mean())

    def test_shape_check(self):
        base = BernoulliShift([0.5, 0.5])
        ext = SkewProduct(base, frozen_cocycle(2, 4))
        with pytest.raises(DimensionError):
            conditional_expectation(ext, np.zeros((3, 4)), 0)


class TestFileFormats:
    def test_trajectory_round_trip(self, tmp_path):
        base = BernoulliShift([0.5, 0.5])
        traj = sample_trajectory(base, Partition.identity(2), 50, seed=8)
        path = tmp_path / "traj.txt"
        write_trajectory(path, traj)
        back = read_trajectory(path)
        assert np.array_equal(back.labels, traj.labels)
        assert back.alphabet.size == 2

    def test_trajectory_header_checks(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("alphabet=two length=3\n0\n1\n0\n")
        with pytest.raises(ValidationError):
            read_trajectory(bad)
        short = tmp_path / "short.txt"
        short.write_text("alphabet=2 length=5\n0\n1\n")
        with pytest.raises(ValidationError):
            read_trajectory(short)
        outside = tmp_path / "outside.txt"
        outside.write_text("alphabet=2 length=2\n0\n7\n")
        with pytest.raises(ValidationError):
            read_trajectory(outside)

    def test_cocycle_csv_round_trip(self, tmp_path):
        path = tmp_path / "coc.csv"
        write_cocycle_csv(path, [3, 0, 5])
        assert read_cocycle_csv(path) == {0: 3, 1: 0, 2: 5}

    def test_cocycle_csv_header_check(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("cell,steps\n0,1\n")
        with pytest.raises(ValidationError):
            read_cocycle_csv(path)


class TestLoadSystem:
    def write(self, tmp_path, text, name="sys.toml"):
        path = tmp_path / name
        path.write_text(text)
        return path

    def test_plain_variants(self, tmp_path):
        model = load_system(self.write(tmp_path, """
[system]
variant = "bernoulli"
p = [0.25, 0.75]
"""))
        assert isinstance(model, BernoulliShift)
        assert np.allclose(model.p, [0.25, 0.75])

        model = load_system(self.write(tmp_path, """
[system]
variant = "markov"
transition = [[0.9, 0.1], [0.2, 0.8]]
"""))
        assert isinstance(model, MarkovShift)

        model = load_system(self.write(tmp_path, """
[system]
variant = "rotation"
angle = [3, 8]
grid = 4
"""))
        assert isinstance(model, RotationCoding)
        assert model.angle.denominator == 8

        model = load_system(self.write(tmp_path, """
[system]
variant = "permutation"
perm = [1, 0]
"""))
        assert isinstance(model, FinitePermutation)

    def test_skew_with_inline_cells(self, tmp_path):
        model = load_system(self.write(tmp_path, """
[system]
variant = "skew"

[base]
variant = "bernoulli"
p = [0.5, 0.5]

[cocycle]
kind = "cell_driven"
m = 8
cells = [[0, 1], [1, 2]]
"""))
        assert isinstance(model, SkewProduct)
        assert model.cocycle.steps.tolist() == [1, 2]

    def test_skew_with_table_file(self, tmp_path):
        write_cocycle_csv(tmp_path / "steps.csv", [2, 5])
        model = load_system(self.write(tmp_path, """
[system]
variant = "skew"

[base]
variant = "bernoulli"
p = [0.5, 0.5]

[cocycle]
kind = "cell_driven"
m = 8
table = "steps.csv"
"""))
        assert model.cocycle.steps.tolist() == [2, 5]

    def test_random_cocycle_kinds(self, tmp_path):
        for kind in ("random", "random_permutation"):
            model = load_system(self.write(tmp_path, f"""
[system]
variant = "skew"

[base]
variant = "bernoulli"
p = [0.5, 0.5]

[cocycle]
kind = "{kind}"
m = 4
seed = 99
"""))
            assert isinstance(model, SkewProduct)
            assert model.cocycle.is_rotation == (kind == "random")

    def test_rel_product_and_induced_and_tf(self, tmp_path):
        model = load_system(self.write(tmp_path, """
[system]
variant = "rel_product"

[base]
variant = "bernoulli"
p = [0.5, 0.5]

[cocycle]
kind = "frozen"
m = 4
"""))
        assert isinstance(model, RelIndepProduct)

        model = load_system(self.write(tmp_path, """
[system]
variant = "induced"

[base]
variant = "bernoulli"
p = [0.5, 0.5]

[induce]
set = [0]
"""))
        assert isinstance(model, Induced)

        model = load_system(self.write(tmp_path, """
[system]
variant = "tf_triple"

[base]
variant = "bernoulli"
p = [0.2, 0.2, 0.6]

[tf]
plus_cells = [0]
minus_cells = [1]
angle = 0.25
m = 8
"""))
        assert isinstance(model, TfTriple)

    def test_unknown_variant(self, tmp_path):
        with pytest.raises(ValidationError):
            load_system(self.write(tmp_path, """
[system]
variant = "mystery"
"""))

    def test_unknown_cocycle_kind(self, tmp_path):
        with pytest.raises(ValidationError):
            load_system(self.write(tmp_path, """
[system]
variant = "skew"

[base]
variant = "bernoulli"
p = [0.5, 0.5]

[cocycle]
kind = "sideways"
m = 4
"""))


class TestSeedRoles:
    def test_fiber_streams_are_distinct(self):
        base = BernoulliShift([0.5, 0.5])
        ext = SkewProduct(base, frozen_cocycle(2, 64))
        rel = RelIndepProduct(ext)
        _, u, v = rel.sample_components(1, seed=77)
        # frozen cocycle keeps the start points; streams must disagree
        # for at least one seed in a small scan
        starts = [(int(uu[0]), int(vv[0]))
                  for uu, vv in (rel.sample_components(1, seed=s)[1:] for s in range(20))]
        assert any(a != b for a, b in starts)

    def test_trial_seeds_do_not_collide(self):
        seen = {derive_seed(20260825, i, role=3) for i in range(1000)}
        assert len(seen) == 1000
