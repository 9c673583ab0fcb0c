import numpy as np
import pytest

from semsplat.errors import InvalidParameterError, NotFoundError
from semsplat.guidance import (
    AnalyticOracle,
    NoiseSchedule,
    RecordedOracle,
    add_noise,
    compose_scores,
    decode_tensor,
    encode_tensor,
    plain_sds_grad,
    semantic_sds_grad,
)


@pytest.fixture
def schedule():
    return NoiseSchedule()


class TestSchedule:
    def test_invariants(self, schedule):
        assert np.all(schedule.betas > 0)
        assert np.all(schedule.betas < 1)
        assert np.all(np.diff(schedule.betas) > 0)
        assert np.all(np.diff(schedule.alpha_bars) < 0)
        for t in (1, 500, 1000):
            assert schedule.weight(t) > 0

    def test_bad_parameters(self):
        with pytest.raises(InvalidParameterError):
            NoiseSchedule(beta_start=0.5, beta_end=0.1)
        with pytest.raises(InvalidParameterError):
            NoiseSchedule(total_steps=0)

    def test_t_range_checked(self, schedule):
        with pytest.raises(InvalidParameterError):
            schedule.alpha_bar(0)
        with pytest.raises(InvalidParameterError):
            schedule.alpha_bar(1001)


class TestAddNoise:
    def test_near_identity_at_t1(self, schedule):
        x0 = np.ones((4, 4, 3))
        eps = np.zeros_like(x0)
        x_t = add_noise(x0, 1, eps, schedule)
        assert np.allclose(x_t, x0, atol=1e-3)

    def test_zero_noise_scales_input(self, schedule):
        rng = np.random.default_rng(0)
        x0 = rng.standard_normal((3, 5, 2))
        x_t = add_noise(x0, 400, np.zeros_like(x0), schedule)
        assert np.allclose(x_t, np.sqrt(schedule.alpha_bar(400)) * x0)

    def test_algebraic_inversion(self, schedule):
        rng = np.random.default_rng(1)
        x0 = rng.standard_normal((6, 6, 3))
        eps = rng.standard_normal((6, 6, 3))
        t = 500
        x_t = add_noise(x0, t, eps, schedule)
        ab = schedule.alpha_bar(t)
        recovered = (x_t - np.sqrt(1 - ab) * eps) / np.sqrt(ab)
        assert np.max(np.abs(recovered - x0)) < 1e-12

    def test_shape_mismatch(self, schedule):
        with pytest.raises(InvalidParameterError):
            add_noise(np.zeros((2, 2)), 10, np.zeros((3, 3)), schedule)


def constant_oracle_targets(shape, values):
    return {name: np.full(shape, v) if np.isscalar(v) else v for name, v in values.items()}


class TestComposeScores:
    def test_single_allones_mask_is_exact(self, schedule):
        rng = np.random.default_rng(2)
        x_t = rng.standard_normal((8, 8, 3))
        oracle = AnalyticOracle({"a": np.zeros((8, 8, 3))}, schedule)
        mask = np.ones((1, 8, 8), dtype=np.uint8)
        out = compose_scores(x_t, [(0, 0, "a")], mask, oracle, t=300)
        expected = oracle.predict_noise(x_t, "a", "", 300)
        assert np.array_equal(out.epsilon, expected)
        assert out.oracle_calls == 1

    def test_left_right_halves_cell_exact(self, schedule):
        rng = np.random.default_rng(3)
        x_t = rng.standard_normal((8, 8, 3))
        targets = {"left": np.full((8, 8, 3), 0.2), "right": np.full((8, 8, 3), 0.9)}
        oracle = AnalyticOracle(targets, schedule)
        masks = np.zeros((2, 8, 8), dtype=np.uint8)
        masks[0, :, :4] = 1
        masks[1, :, 4:] = 1
        out = compose_scores(
            x_t, [(0, 0, "left"), (0, 1, "right")], masks, oracle, t=100
        )
        pl = oracle.predict_noise(x_t, "left", "", 100)
        pr = oracle.predict_noise(x_t, "right", "", 100)
        assert np.array_equal(out.epsilon[:, :4], pl[:, :4])
        assert np.array_equal(out.epsilon[:, 4:], pr[:, 4:])

    def test_random_partition_matches_cell_loop_oracle(self, schedule):
        rng = np.random.default_rng(4)
        h = w = 6
        x_t = rng.standard_normal((h, w, 3))
        names = ["p0", "p1", "p2", "p3"]
        targets = {n: rng.standard_normal((h, w, 3)) for n in names}
        oracle = AnalyticOracle(targets, schedule)
        owner = rng.integers(0, 4, (h, w))
        masks = np.stack([(owner == j).astype(np.uint8) for j in range(4)])
        subprompts = [(0, j, n) for j, n in enumerate(names)]
        out = compose_scores(x_t, subprompts, masks, oracle, t=700)
        preds = {n: oracle.predict_noise(x_t, n, "", 700) for n in names}
        for i in range(h):
            for j in range(w):
                assert np.array_equal(out.epsilon[i, j], preds[names[owner[i, j]]][i, j])

    def test_empty_masks_skip_oracle_calls(self, schedule):
        x_t = np.zeros((4, 4, 3))
        oracle = AnalyticOracle(
            {"a": np.zeros((4, 4, 3)), "b": np.zeros((4, 4, 3))}, schedule
        )
        masks = np.zeros((2, 4, 4), dtype=np.uint8)
        masks[0] = 1
        out = compose_scores(x_t, [(0, 0, "a"), (0, 1, "b")], masks, oracle, t=10)
        assert out.oracle_calls == 1
        assert out.masks_used == [(0, 0, "a")]

    def test_uncovered_cells_use_null_prompt(self, schedule):
        rng = np.random.default_rng(5)
        x_t = rng.standard_normal((4, 4, 3))
        oracle = AnalyticOracle(
            {"a": np.full((4, 4, 3), 0.1), "scene": np.full((4, 4, 3), 0.7)},
            schedule,
        )
        masks = np.zeros((1, 4, 4), dtype=np.uint8)
        masks[0, :2] = 1
        out = compose_scores(
            x_t, [(0, 0, "a")], masks, oracle, t=50, null_prompt="scene"
        )
        pa = oracle.predict_noise(x_t, "a", "", 50)
        ps = oracle.predict_noise(x_t, "scene", "", 50)
        assert np.array_equal(out.epsilon[:2], pa[:2])
        assert np.array_equal(out.epsilon[2:], ps[2:])
        with pytest.raises(InvalidParameterError):
            compose_scores(x_t, [(0, 0, "a")], masks, oracle, t=50)

    def test_overlapping_masks_average(self, schedule):
        # dilated masks may overlap; agreement must keep the value exact
        rng = np.random.default_rng(6)
        x_t = rng.standard_normal((4, 4, 3))
        target = rng.standard_normal((4, 4, 3))
        oracle = AnalyticOracle({"a": target, "b": target}, schedule)
        masks = np.ones((2, 4, 4), dtype=np.uint8)
        out = compose_scores(x_t, [(0, 0, "a"), (0, 1, "b")], masks, oracle, t=20)
        assert np.array_equal(out.epsilon, oracle.predict_noise(x_t, "a", "", 20))

    def test_identical_predictions_no_op(self, schedule):
        rng = np.random.default_rng(7)
        x_t = rng.standard_normal((6, 6, 3))
        target = rng.standard_normal((6, 6, 3))
        oracle = AnalyticOracle({f"p{j}": target for j in range(3)}, schedule)
        owner = rng.integers(0, 3, (6, 6))
        masks = np.stack([(owner == j).astype(np.uint8) for j in range(3)])
        out = compose_scores(
            x_t, [(0, j, f"p{j}") for j in range(3)], masks, oracle, t=40
        )
        assert np.array_equal(out.epsilon, oracle.predict_noise(x_t, "p0", "", 40))

    def test_mask_shape_mismatch(self, schedule):
        oracle = AnalyticOracle({"a": np.zeros((4, 4, 3))}, schedule)
        with pytest.raises(InvalidParameterError):
            compose_scores(
                np.zeros((4, 4, 3)), [(0, 0, "a")],
                np.ones((1, 8, 8), dtype=np.uint8), oracle, t=10,
            )


class TestSdsGradients:
    def test_fixed_point_gives_zero_gradient(self, schedule):
        rng = np.random.default_rng(8)
        x = rng.uniform(0, 1, (8, 8, 3))
        oracle = AnalyticOracle({"a": x.copy()}, schedule)
        eps = rng.standard_normal(x.shape)
        out = plain_sds_grad(x, "a", oracle, schedule, t=321, epsilon=eps)
        assert np.max(np.abs(out.grad)) < 1e-12

    def test_analytic_gradient_formula(self):
        schedule = NoiseSchedule(weighting="constant")
        rng = np.random.default_rng(9)
        x = rng.uniform(0, 1, (6, 6, 3))
        target = rng.uniform(0, 1, (6, 6, 3))
        oracle = AnalyticOracle({"a": target}, schedule)
        eps = rng.standard_normal(x.shape)
        t = 444
        out = plain_sds_grad(x, "a", oracle, schedule, t=t, epsilon=eps)
        ab = schedule.alpha_bar(t)
        expected = np.sqrt(ab) / np.sqrt(1 - ab) * (x - target)
        assert np.max(np.abs(out.grad - expected)) < 1e-9

    def test_regional_decomposition(self, schedule):
        rng = np.random.default_rng(10)
        x = rng.uniform(0, 1, (8, 8, 3))
        ta, tb = np.full((8, 8, 3), 0.2), np.full((8, 8, 3), 0.8)
        oracle = AnalyticOracle({"a": ta, "b": tb}, schedule)
        eps = rng.standard_normal(x.shape)
        masks = np.zeros((2, 8, 8), dtype=np.uint8)
        masks[0, :4], masks[1, 4:] = 1, 1
        t = 250
        both = semantic_sds_grad(
            x, [(0, 0, "a"), (0, 1, "b")], masks, oracle, schedule, t, eps
        )
        only_a = plain_sds_grad(x, "a", oracle, schedule, t, eps)
        only_b = plain_sds_grad(x, "b", oracle, schedule, t, eps)
        assert np.array_equal(both.grad[:4], only_a.grad[:4])
        assert np.array_equal(both.grad[4:], only_b.grad[4:])

    def test_single_subprompt_reduction_bit_identical(self, schedule):
        rng = np.random.default_rng(11)
        x = rng.uniform(0, 1, (8, 8, 3))
        target = rng.uniform(0, 1, (8, 8, 3))
        oracle = AnalyticOracle({"a": target}, schedule)
        eps = rng.standard_normal(x.shape)
        mask = np.ones((1, 8, 8), dtype=np.uint8)
        semantic = semantic_sds_grad(
            x, [(0, 0, "a")], mask, oracle, schedule, 600, eps,
            view_descriptors={0: ""},
        )
        plain = plain_sds_grad(x, "a", oracle, schedule, 600, eps)
        assert np.array_equal(semantic.grad, plain.grad)

    def test_oracle_call_budget(self, schedule):
        rng = np.random.default_rng(12)
        x = rng.uniform(0, 1, (8, 8, 3))
        oracle = AnalyticOracle(
            {f"p{j}": np.zeros((8, 8, 3)) for j in range(5)}, schedule
        )
        masks = np.zeros((5, 8, 8), dtype=np.uint8)
        masks[0, :4], masks[1, 4:] = 1, 1  # only two nonempty
        eps = rng.standard_normal(x.shape)
        out = semantic_sds_grad(
            x, [(0, j, f"p{j}") for j in range(5)], masks, oracle, schedule, 77, eps
        )
        assert out.oracle_calls <= 2


class TestOracles:
    def test_analytic_missing_prompt(self, schedule):
        oracle = AnalyticOracle({"a": np.zeros((2, 2, 3))}, schedule)
        with pytest.raises(NotFoundError):
            oracle.predict_noise(np.zeros((2, 2, 3)), "b", "", 10)

    def test_recorded_replay(self, schedule, tmp_path):
        rng = np.random.default_rng(13)
        x_t = rng.standard_normal((4, 4, 3))
        source = AnalyticOracle({"a": np.zeros((4, 4, 3))}, schedule)
        recorder = RecordedOracle(source=source)
        first = recorder.predict_noise(x_t, "a", "front view", 42)
        recorder.save(tmp_path / "fixtures.pkl")
        replay = RecordedOracle.load(tmp_path / "fixtures.pkl")
        second = replay.predict_noise(x_t, "a", "front view", 42)
        assert np.array_equal(first, second)
        with pytest.raises(NotFoundError):
            replay.predict_noise(x_t, "a", "front view", 43)


class TestWire:
    def test_roundtrip_lossless_f32(self):
        rng = np.random.default_rng(14)
        arr = rng.standard_normal((3, 5, 2)).astype(np.float32)
        back = decode_tensor(encode_tensor(arr))
        assert back.shape == (3, 5, 2)
        assert np.array_equal(back.astype(np.float32), arr)

    def test_size_mismatch_rejected(self):
        payload = encode_tensor(np.zeros((2, 2)))
        payload["shape"] = [3, 3]
        with pytest.raises(InvalidParameterError):
            decode_tensor(payload)
