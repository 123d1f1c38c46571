"""Recording rule, data aggregates, and the rank/definiteness equivalence."""

import numpy as np
import pytest

from hotuner import DataBuffer, DataSample, b_term, buffer_csv, maybe_record, p_matrix, richness


def rank_by_elimination(mat, tol=1e-10):
    """Row-reduction rank with partial pivoting; independent of the svd path."""
    a = np.array(mat, dtype=float)
    rows, cols = a.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivot = rank + int(np.argmax(np.abs(a[rank:, col])))
        if abs(a[pivot, col]) <= tol:
            continue
        a[[rank, pivot]] = a[[pivot, rank]]
        a[rank] = a[rank] / a[rank, col]
        for r in range(rows):
            if r != rank:
                a[r] = a[r] - a[r, col] * a[rank]
        rank += 1
    return rank


def test_sample_validation():
    s = DataSample(t_k=1, phi_k=[1, 2], y_star_k=3)
    assert s.t_k == 1.0 and s.y_star_k == 3.0
    assert s.phi_k.dtype == float
    with pytest.raises(ValueError):
        DataSample(t_k=0.0, phi_k=[[1.0]], y_star_k=0.0)


def test_buffer_validation():
    with pytest.raises(ValueError, match="capacity"):
        DataBuffer.empty(capacity=0, epsilon=1.0)
    with pytest.raises(ValueError, match="epsilon"):
        DataBuffer.empty(capacity=3, epsilon=0.0)
    # capacity below the regressor dimension can never become sufficient
    with pytest.raises(ValueError, match="capacity"):
        DataBuffer.from_samples([[1.0, 0.0]], [0.0], capacity=1)
    with pytest.raises(ValueError, match="strictly increasing"):
        DataBuffer.from_samples([[1.0], [2.0]], [0.0, 0.0], times=[1.0, 1.0])
    with pytest.raises(ValueError, match="more samples than capacity"):
        DataBuffer.from_samples([[1.0], [2.0], [3.0]], [0.0, 0.0, 0.0], capacity=2)


def test_from_samples_defaults():
    buf = DataBuffer.from_samples([[1.0, 0.0], [0.0, 1.0]], [1.0, 2.0])
    assert len(buf) == 2
    assert buf.capacity == 2
    assert buf.frozen
    assert buf.dimension == 2
    assert buf.last.t_k == 1.0
    single = DataBuffer.from_samples([[1.0, 0.0]], [1.0])
    assert single.capacity == 2
    assert not single.frozen


def test_empty_buffer_accessors():
    buf = DataBuffer.empty(capacity=3, epsilon=1.0)
    assert len(buf) == 0
    assert not buf.frozen
    with pytest.raises(ValueError):
        buf.dimension
    with pytest.raises(ValueError):
        buf.last
    with pytest.raises(ValueError):
        p_matrix(buf, 0.0)
    with pytest.raises(ValueError):
        b_term(buf, np.zeros(3), 0.0)
    with pytest.raises(ValueError):
        richness(buf, 0.0)


def test_maybe_record_walkthrough():
    """Step the recording rule through record/skip/zero/freeze by hand."""
    buf = DataBuffer.empty(capacity=3, epsilon=1.0)

    buf, kept = maybe_record(buf, 0.0, [1.0, 0.0], 1.0)
    assert kept and len(buf) == 1  # first sample is unconditional

    buf, kept = maybe_record(buf, 1.0, [1.0, 0.0], 1.0)
    assert not kept  # zero movement

    # |[-1, 2]|^2 / |[0, 2]| = 5 / 2 = 2.5 >= 1
    buf, kept = maybe_record(buf, 2.0, [0.0, 2.0], 0.5)
    assert kept and len(buf) == 2

    buf, kept = maybe_record(buf, 3.0, [0.0, 0.0], 0.0)
    assert not kept  # near-zero regressor is skipped

    # |[0, 0.4]|^2 / 2.4 = 0.0667 < 1
    buf, kept = maybe_record(buf, 3.5, [0.0, 2.4], 0.5)
    assert not kept

    buf, kept = maybe_record(buf, 4.0, [3.0, 0.0], 2.0)
    assert kept and buf.frozen

    frozen_again, kept = maybe_record(buf, 5.0, [9.0, 9.0], 0.0)
    assert not kept
    assert frozen_again is buf  # idempotent once frozen


def test_maybe_record_time_and_shape_errors():
    buf = DataBuffer.empty(capacity=3, epsilon=1.0)
    buf, _ = maybe_record(buf, 1.0, [1.0, 0.0], 0.0)
    with pytest.raises(ValueError, match="time must increase"):
        maybe_record(buf, 1.0, [5.0, 0.0], 0.0)
    with pytest.raises(ValueError, match="dimension"):
        maybe_record(buf, 2.0, [5.0, 0.0, 1.0], 0.0)


def test_p_matrix_hand_values():
    basis = DataBuffer.from_samples([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
    assert np.allclose(p_matrix(basis, 0.0), np.eye(2), atol=1e-15)
    assert np.allclose(p_matrix(basis, 1.0), 0.5 * np.eye(2), atol=1e-15)
    single = DataBuffer.from_samples([[1.0, 2.0]], [0.0])
    assert np.allclose(p_matrix(single, 0.0), [[1.0, 2.0], [2.0, 4.0]], atol=1e-15)
    # |phi|^2 = 5, so mu = 0.25 weights the sample by 4/9
    assert np.allclose(
        p_matrix(single, 0.25), np.array([[1.0, 2.0], [2.0, 4.0]]) * 4.0 / 9.0, atol=1e-15
    )
    with pytest.raises(ValueError, match="mu"):
        p_matrix(single, -0.1)


def test_b_term_hand_values():
    buf = DataBuffer.from_samples([[1.0, 0.0], [0.0, 2.0]], [2.0, 2.0])
    theta = np.array([3.0, 1.0])
    # residuals are 1 and 0
    assert np.allclose(b_term(buf, theta, 0.0), [1.0, 0.0], atol=1e-15)
    theta = np.array([3.0, 3.0])
    # residuals 1 and 4, damped by 1/(1 + mu) and 1/(1 + 4 mu) respectively
    assert np.allclose(b_term(buf, theta, 1.0), [0.5, 1.6], atol=1e-15)
    with pytest.raises(ValueError, match="dimension"):
        b_term(buf, np.zeros(3), 0.0)
    with pytest.raises(ValueError, match="mu"):
        b_term(buf, theta, -1.0)


def test_b_term_is_p_matrix_times_error():
    """With consistent outputs the correction factors through P_mu exactly."""
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(1, 5))
        count = int(rng.integers(1, 7))
        phis = rng.uniform(-1, 1, (count, n))
        theta_star = rng.uniform(-2, 2, n)
        buf = DataBuffer.from_samples(phis, phis @ theta_star)
        theta = rng.uniform(-3, 3, n)
        mu = float(rng.uniform(0, 2))
        lhs = b_term(buf, theta, mu)
        rhs = p_matrix(buf, mu) @ (theta - theta_star)
        assert np.abs(lhs - rhs).max() < 1e-10


def test_p_matrix_mu_monotone():
    # raising mu only shrinks the weights, so quadratic forms shrink too
    rng = np.random.default_rng(5)
    phis = rng.uniform(-1, 1, (5, 3))
    buf = DataBuffer.from_samples(phis, np.zeros(5))
    v = rng.uniform(-1, 1, 3)
    values = [float(v @ p_matrix(buf, mu) @ v) for mu in (0.0, 0.1, 0.5, 2.0)]
    assert all(a >= b - 1e-15 for a, b in zip(values, values[1:]))


def test_richness_reports():
    deficient = DataBuffer.from_samples([[1.0, 2.0]], [0.0])
    report = richness(deficient, 0.2)
    assert report.N == 1
    assert report.rank_D == 1
    assert not report.sufficient
    assert report.delta_mu <= 1e-12

    full = DataBuffer.from_samples([[1.0, 0.0], [1.0, 1.0]], [0.0, 0.0])
    report = richness(full, 0.2)
    assert report.rank_D == 2
    assert report.sufficient
    assert report.min_eig_P > 1e-10
    assert report.delta_mu == report.min_eig_P


def test_rank_eigenvalue_equivalence_fuzz():
    """Full row rank of the stacked samples matches definiteness of P_mu."""
    rng = np.random.default_rng(17)
    for _ in range(200):
        count = int(rng.integers(1, 7))
        phis = rng.uniform(-1, 1, (count, 3))
        buf = DataBuffer.from_samples(phis, np.zeros(count), capacity=max(count, 3))
        oracle = rank_by_elimination(phis)
        for mu in (0.0, 0.2, 1.0):
            report = richness(buf, mu)
            assert report.rank_D == oracle
            assert (report.min_eig_P > 1e-10) == (oracle == 3)
            assert report.sufficient == (oracle == 3)


def test_buffer_csv_round_trip():
    buf = DataBuffer.from_samples(
        [[1.0, 0.5], [0.25, -2.0]], [0.125, 3.5], times=[0.1, 0.9]
    )
    text = buffer_csv(buf)
    lines = text.strip().split("\n")
    assert lines[0] == "k,t_k,phi_k_1,phi_k_2,y_star_k"
    assert len(lines) == 3
    cells = lines[2].split(",")
    assert int(cells[0]) == 2
    assert float(cells[1]) == 0.9
    assert float(cells[2]) == 0.25
    assert float(cells[4]) == 3.5
