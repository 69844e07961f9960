import numpy as np
import pytest

from proteach.ema import ema_update, init_teacher
from proteach.errors import ContractViolationError
from proteach.net import NetConfig, init_params

from gradcheck import random_net


def test_alpha_zero_copies_student():
    rng = np.random.default_rng(0)
    cfg, student = random_net(rng)
    teacher = init_teacher(init_params(cfg, rng))
    updated = ema_update(teacher, student, 0.0)
    for a, b in zip(updated.weights.weights + updated.weights.biases,
                    student.weights + student.biases):
        assert np.array_equal(a, b)


def test_geometric_closed_form():
    rng = np.random.default_rng(1)
    cfg, w0 = random_net(rng)
    w = init_params(cfg, rng)
    alpha = 0.9
    teacher = init_teacher(w0)
    for _ in range(25):
        teacher = ema_update(teacher, w, alpha)
    a_k = alpha**25
    for got, p0, p in zip(teacher.weights.weights, w0.weights, w.weights):
        np.testing.assert_allclose(got, a_k * p0 + (1 - a_k) * p, atol=1e-12)
    assert teacher.updates_applied == 25


def test_single_step_arithmetic():
    from proteach.net import ParamSet

    teacher = init_teacher(ParamSet([np.array([[1.0]])], [np.array([1.0])]))
    student = ParamSet([np.array([[0.0]])], [np.array([0.0])])
    updated = ema_update(teacher, student, 0.999)
    assert updated.weights.weights[0][0, 0] == pytest.approx(0.999, abs=1e-15)


def test_init_is_copy_and_counter_zero():
    rng = np.random.default_rng(2)
    _, student = random_net(rng)
    teacher = init_teacher(student)
    assert teacher.updates_applied == 0
    for a, b in zip(teacher.weights.weights, student.weights):
        assert np.array_equal(a, b)
        assert a is not b  # value semantics
    # fixed point: averaging with the same student changes nothing
    updated = ema_update(teacher, student, 0.5)
    for a, b in zip(updated.weights.weights, student.weights):
        assert np.array_equal(a, b)


def test_first_update_with_scheduled_alpha_overwrites_init():
    # alpha(iter=0) = 0, so the initialization is immaterial after one step
    rng = np.random.default_rng(3)
    cfg, student = random_net(rng)
    other_init = init_params(cfg, rng)
    updated = ema_update(init_teacher(other_init), student, 0.0)
    for a, b in zip(updated.weights.weights, student.weights):
        assert np.array_equal(a, b)


def test_teacher_stays_in_convex_hull():
    rng = np.random.default_rng(4)
    cfg, student = random_net(rng)
    teacher = init_teacher(student)
    lo = [w.copy() for w in student.weights]
    hi = [w.copy() for w in student.weights]
    for _ in range(40):
        student = init_params(cfg, rng)
        for i, w in enumerate(student.weights):
            lo[i] = np.minimum(lo[i], w)
            hi[i] = np.maximum(hi[i], w)
        teacher = ema_update(teacher, student, float(rng.uniform(0, 0.99)))
        for w, l, h in zip(teacher.weights.weights, lo, hi):
            assert np.all(w >= l - 1e-12) and np.all(w <= h + 1e-12)


def test_shape_mismatch_raises():
    a = init_params(NetConfig(2, (), 2), np.random.default_rng(0))
    b = init_params(NetConfig(3, (), 2), np.random.default_rng(0))
    with pytest.raises(ContractViolationError):
        ema_update(init_teacher(a), b, 0.5)
    with pytest.raises(ContractViolationError):
        ema_update(init_teacher(a), a, 1.0)
