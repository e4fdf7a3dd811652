import numpy as np
import pytest
from quarma.quat_core import assemble, decompose, lift, qmul
from quarma.signal_model import (
    GeneratorDivergence,
    NoiseSpec,
    QarmaSpec,
    augmented_gradient,
    generate_qarma,
    ghr_gradient,
    ma_inverse_radius,
    ma_lambda_max,
    qar_predict,
    read_series_csv,
    squared_loss,
    truncated_qar_predict,
    truncated_qar_series,
    window,
    write_series_csv,
)

from conftest import EXAMPLE1_ALPHA, EXAMPLE1_BETA


def loss_of_real_coords(r, win, x):
    return squared_loss(x, qar_predict(assemble(r), win))


def central_difference(r, win, x, h=1e-6):
    g = np.empty_like(r)
    for k in range(r.size):
        e = np.zeros_like(r)
        e[k] = h
        g[k] = (loss_of_real_coords(r + e, win, x) - loss_of_real_coords(r - e, win, x)) / (2 * h)
    return g


# --- generator -------------------------------------------------------------


def test_white_noise_model_returns_the_noise():
    spec = QarmaSpec([[0, 0, 0, 0]])
    x, eps = generate_qarma(spec, NoiseSpec("gaussian", 0.7, seed=4), 200)
    np.testing.assert_array_equal(x, eps)


def test_generator_is_deterministic(example1_spec, gaussian_noise):
    a, ea = generate_qarma(example1_spec, gaussian_noise, 500)
    b, eb = generate_qarma(example1_spec, gaussian_noise, 500)
    assert a.tobytes() == b.tobytes() and ea.tobytes() == eb.tobytes()
    c, _ = generate_qarma(example1_spec, gaussian_noise.with_seed(1), 500)
    assert not np.array_equal(a, c)


def test_generator_satisfies_the_recursion_with_left_coefficients(example1_spec, gaussian_noise):
    x, eps = generate_qarma(example1_spec, gaussian_noise, 300)
    for t in range(4, 300):
        ar = sum(qmul(example1_spec.alpha[i], x[t - 1 - i]) for i in range(4))
        ma = sum(qmul(example1_spec.beta[i], eps[t - 1 - i]) for i in range(2))
        np.testing.assert_allclose(x[t], ar + ma + eps[t], atol=1e-9)


def test_left_multiplication_side_matters():
    # x_t = j x_{t-1} + eps_t; starting from i, the next noiseless value is j i = -k
    spec = QarmaSpec([[0, 0, 1, 0]])
    x, eps = generate_qarma(spec, NoiseSpec("gaussian", 0.1, seed=0), 50, burn_in=0)
    np.testing.assert_allclose(x[1] - eps[1], qmul([0, 0, 1, 0], x[0]), atol=1e-15)


def test_divergence_guard():
    spec = QarmaSpec([[1.5, 0, 0, 0]])
    with pytest.raises(GeneratorDivergence):
        generate_qarma(spec, NoiseSpec("gaussian", 1.0, seed=0), 10_000)


def test_argument_validation(example1_spec, gaussian_noise):
    with pytest.raises(ValueError):
        generate_qarma(example1_spec, gaussian_noise, 0)
    with pytest.raises(ValueError):
        NoiseSpec("laplace", 1.0)
    with pytest.raises(ValueError):
        QarmaSpec(np.zeros((0, 4)))


def test_radius_check(example1_spec):
    example1_spec.check_radius(2.0)
    with pytest.raises(ValueError):
        example1_spec.check_radius(1.5)


@pytest.mark.parametrize("law, scale, moment", [("gaussian", 0.3, 0.36), ("uniform", 0.5, 1.0 / 3.0)])
def test_noise_moments(law, scale, moment):
    noise = NoiseSpec(law, scale, seed=11)
    assert noise.second_moment == pytest.approx(moment)
    N = 100_000
    eps = noise.draw(N)
    sd = scale if law == "gaussian" else scale / np.sqrt(3.0)
    assert np.all(np.abs(eps.mean(axis=0)) <= 3 * sd / np.sqrt(N))
    emp = np.mean(np.sum(eps**2, axis=1))
    assert abs(emp - moment) <= 0.03 * moment
    assert abs(emp - moment) <= 0.01


def test_example1_noise_energy(example1_spec):
    _, eps = generate_qarma(example1_spec, NoiseSpec("gaussian", 0.3, seed=2), 100_000)
    assert np.mean(np.sum(eps**2, axis=1)) == pytest.approx(0.36, abs=0.01)


def test_uniform_noise_energy(example1_spec):
    _, eps = generate_qarma(example1_spec, NoiseSpec("uniform", 0.5, seed=2), 100_000)
    assert np.mean(np.sum(eps**2, axis=1)) == pytest.approx(1.0 / 3.0, abs=0.01)


# --- prediction, loss, gradient ---------------------------------------------


def test_predict_examples():
    w = np.array([[0.5, -1, 2, 0.25], [3, 0, 0, 1]])
    np.testing.assert_array_equal(qar_predict(np.zeros((2, 4)), w), np.zeros(4))
    np.testing.assert_array_equal(qar_predict(np.array([[1.0, 0, 0, 0], [0, 0, 0, 0]]), w), w[0])
    np.testing.assert_array_equal(qar_predict(np.array([[0, 0, 1.0, 0]]), np.array([[0, 1.0, 0, 0]])), [0, 0, 0, -1])
    with pytest.raises(ValueError):
        qar_predict(np.zeros((3, 4)), w)


def test_loss_examples():
    q = np.array([0.1, 0.2, 0.3, 0.4])
    assert squared_loss(q, q) == 0.0
    assert squared_loss([1, 1, 0, 0], [0, 0, 0, 0]) == 2.0
    assert squared_loss([0, 0, 0, 0], [0.3, 0.3, 0.3, 0.3]) == pytest.approx(0.36, abs=1e-15)


def test_window_is_most_recent_first_and_zero_padded():
    series = np.arange(12.0).reshape(3, 4)
    w = window(series, 2, 4)
    np.testing.assert_array_equal(w[0], series[1])
    np.testing.assert_array_equal(w[1], series[0])
    np.testing.assert_array_equal(w[2:], 0.0)


def test_gradient_examples():
    g = ghr_gradient(np.zeros((1, 4)), np.array([[0, 1.0, 0, 0]]), np.array([1.0, 0, 0, 0]))
    np.testing.assert_allclose(g, [[0, 0.5, 0, 0]])
    gamma = np.array([[0.2, 0.1, 0, 0]])
    win = np.array([[1.0, 2.0, 0.5, 0]])
    x = qar_predict(gamma, win)
    np.testing.assert_array_equal(ghr_gradient(gamma, win, x), 0.0)


def test_gradient_matches_exact_oracle(frozen):
    for case in frozen["gradients"]:
        gamma, win, x = (np.array(case[k]) for k in ("gamma", "window", "x"))
        grad_r = np.array(case["real_gradient"])
        # the conjugate gradient is one quarter of J times the real gradient, block 0
        np.testing.assert_allclose(ghr_gradient(gamma, win, x), assemble(grad_r) / 4, atol=1e-12)
        assert squared_loss(x, qar_predict(gamma, win)) == pytest.approx(case["loss"], rel=1e-12)


def test_gradient_finite_differences(rng):
    for _ in range(100):
        n = int(rng.integers(1, 11))
        gamma = rng.normal(size=(n, 4))
        win = rng.normal(size=(n, 4))
        x = rng.normal(size=4)
        fd = central_difference(decompose(gamma), win, x)
        closed = 4.0 * decompose(ghr_gradient(gamma, win, x))
        assert np.linalg.norm(closed - fd) <= 1e-6 * np.linalg.norm(fd)


def test_augmented_gradient_examples():
    np.testing.assert_array_equal(augmented_gradient(np.array([[1.0, 0, 0, 0]])), np.tile([1.0, 0, 0, 0], (4, 1)))
    np.testing.assert_array_equal(
        augmented_gradient(np.array([[0, 1.0, 0, 0]])),
        [[0, 1, 0, 0], [0, 1, 0, 0], [0, -1, 0, 0], [0, -1, 0, 0]],
    )


def test_augmented_gradient_two_routes(frozen):
    from quarma.quat_core import j_matrix
    from quarma.quat_linalg import hermitian_transpose, qmatmul

    for case in frozen["gradients"]:
        gamma, win, x = (np.array(case[k]) for k in ("gamma", "window", "x"))
        grad_r = np.array(case["real_gradient"])
        n = gamma.shape[0]
        by_involution = augmented_gradient(ghr_gradient(gamma, win, x))
        by_mapping = lift(grad_r).as_flat() / 4
        np.testing.assert_allclose(by_involution, by_mapping, atol=1e-10)
        Jh = hermitian_transpose(j_matrix(n))
        back = qmatmul(Jh, by_involution[:, None, :])[:, 0, :]
        np.testing.assert_allclose(back[:, 1:], 0.0, atol=1e-12)
        np.testing.assert_allclose(back[:, 0], grad_r, atol=1e-8)


# --- truncated predictor ----------------------------------------------------


def test_truncation_base_case(example1_spec, gaussian_noise):
    x, _ = generate_qarma(example1_spec, gaussian_noise, 30)
    for m in (0, -3):
        np.testing.assert_array_equal(truncated_qar_predict(example1_spec, x, 10, m), x[9])


def test_truncation_without_ma_is_qar(gaussian_noise):
    spec = QarmaSpec(EXAMPLE1_ALPHA)
    x, _ = generate_qarma(spec, gaussian_noise, 30)
    got = truncated_qar_predict(spec, x, 12, 5)
    np.testing.assert_allclose(got, qar_predict(spec.alpha, window(x, 11, 4)), atol=1e-14)


def test_truncation_vectorised_matches_recursion(example1_spec, gaussian_noise):
    x, _ = generate_qarma(example1_spec, gaussian_noise, 60)
    for m in (1, 2, 5, 6):
        levels = truncated_qar_series(example1_spec, x, m)
        for t in (1, 2, 7, 33, 60):
            np.testing.assert_allclose(levels[t - 1], truncated_qar_predict(example1_spec, x, t, m), atol=1e-10)
    with pytest.raises(IndexError):
        truncated_qar_predict(example1_spec, x, 61, 3)


def _truncation_loss(spec, m, seed=0, T=20_000):
    x, _ = generate_qarma(spec, NoiseSpec("gaussian", 0.3, seed=seed), T)
    return float(np.mean(np.sum((x - truncated_qar_series(spec, x, m)) ** 2, axis=1)))


def _truncation_gaps(spec, seed=0, T=5_000):
    x, _ = generate_qarma(spec, NoiseSpec("gaussian", 0.3, seed=seed), T)
    lv = {m: truncated_qar_series(spec, x, m) for m in (2, 4, 6, 8)}
    return {(a, b): float(np.mean(np.linalg.norm(lv[a] - lv[b], axis=1))) for a in lv for b in lv if a < b}


def test_truncated_predictor_loss_near_floor_example1(example1_spec):
    # stated target for the example model at m = 6
    assert _truncation_loss(example1_spec, 6) == pytest.approx(0.36, rel=0.05)


def test_truncation_gaps_shrink_example1(example1_spec):
    gaps = _truncation_gaps(example1_spec)
    # pairs ordered by min(m, m'); every gap must not exceed any gap with a smaller minimum
    for (a, b), v in gaps.items():
        for (c, d), w in gaps.items():
            if a > c:
                assert v <= w + 1e-12, f"gap{(a, b)} = {v:.3f} exceeds gap{(c, d)} = {w:.3f}"


def test_ma_radius_of_example1(example1_spec, example1_negated_spec):
    # the moving-average moduli sum to more than 1, so the bound on |beta| fails for either sign
    assert ma_lambda_max(EXAMPLE1_BETA) == pytest.approx(1.4734, abs=1e-4)
    assert ma_inverse_radius(example1_spec.beta) > 1.0
    assert ma_inverse_radius(example1_negated_spec.beta) < 1.0


def test_truncated_predictor_reaches_floor_when_invertible(example1_negated_spec):
    losses = [_truncation_loss(example1_negated_spec, m) for m in (6, 10, 20, 40)]
    assert all(a > b for a, b in zip(losses, losses[1:]))
    assert losses[2] == pytest.approx(0.36, rel=0.05)
    assert losses[3] == pytest.approx(0.36, rel=0.01)


def test_ma_radii_of_pure_ar_are_zero():
    assert ma_lambda_max(np.zeros((0, 4))) == 0.0
    assert ma_inverse_radius(np.zeros((0, 4))) == 0.0


# --- CSV ------------------------------------------------------------------------


def test_series_csv_round_trip(tmp_path, example1_spec, gaussian_noise):
    x, eps = generate_qarma(example1_spec, gaussian_noise, 50)
    path = write_series_csv(tmp_path / "s.csv", x, eps)
    assert path.read_text().splitlines()[0] == "t,x_a,x_b,x_c,x_d,eps_a,eps_b,eps_c,eps_d"
    x2, eps2 = read_series_csv(path)
    np.testing.assert_array_equal(x2, x)
    np.testing.assert_array_equal(eps2, eps)
    x3, none = read_series_csv(write_series_csv(tmp_path / "t.csv", x))
    np.testing.assert_array_equal(x3, x)
    assert none is None


def test_series_csv_rejects_foreign_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,a,b,c,d\n1,0,0,0,0\n")
    with pytest.raises(ValueError):
        read_series_csv(p)
