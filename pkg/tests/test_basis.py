import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nbfts.basis import (build_spline_basis, orthonormalize, project_to_basis, smoothness_logprior,
                         smoothness_logprior_grad)
from nbfts.errors import DegenerateBasisError, InvalidInputError


@pytest.fixture(scope="module")
def basis():
    return build_spline_basis(np.arange(50.0), 10)


def test_shape_and_rank(basis):
    assert basis.B.shape == (50, 10)
    assert np.linalg.matrix_rank(basis.B) == 10


def test_lines_are_unpenalised(basis):
    line = 3.0 - 2.0 * basis.grid
    psi = project_to_basis(line, basis)
    np.testing.assert_allclose(basis.B @ psi, line, atol=1e-10)
    assert abs(psi @ basis.Omega @ psi) < 1e-12


def test_penalty_psd(basis):
    assert np.linalg.eigvalsh(basis.Omega).min() >= -1e-10
    assert basis.penalty_rank == 8


def test_invalid_grids():
    with pytest.raises(InvalidInputError):
        build_spline_basis(np.array([0.0, 1.0, 1.0, 2.0, 3.0]), 4)
    with pytest.raises(InvalidInputError):
        build_spline_basis(np.arange(5.0), 6)
    with pytest.raises(InvalidInputError):
        build_spline_basis(np.zeros((3, 3)))


def test_default_size_is_used():
    assert build_spline_basis(np.arange(52.0)).size == 13


def test_orthonormalize_identity_block():
    eye = np.eye(8)[:, :3]
    np.testing.assert_allclose(orthonormalize(eye), eye, atol=1e-14)


def test_rank_deficient_input():
    F = np.ones((6, 2))
    with pytest.raises(DegenerateBasisError):
        orthonormalize(F)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (12, 3), elements=st.floats(-10, 10)))
def test_orthonormal_output_spans_input(F_raw):
    sv = np.linalg.svd(F_raw, compute_uv=False)
    if sv[-1] < 1e-3 * max(sv[0], 1.0):
        return
    O, M = orthonormalize(F_raw, return_transform=True)
    np.testing.assert_allclose(O.T @ O, np.eye(3), atol=1e-10)
    # brute-force least-squares projector onto the output span
    coef, *_ = np.linalg.lstsq(O, F_raw, rcond=None)
    np.testing.assert_allclose(O @ coef, F_raw, atol=1e-8)
    beta = np.arange(15.0).reshape(5, 3)
    np.testing.assert_allclose(F_raw @ beta.T, O @ (beta @ M.T).T, atol=1e-8)


def test_smoothness_prior_algebra(basis):
    rng = np.random.default_rng(0)
    psi = rng.standard_normal(10)
    null = np.r_[1.5, -0.5, np.zeros(8)]
    assert smoothness_logprior(null, 2.0, basis.Omega) == pytest.approx(0.5 * 8 * math.log(2.0))
    lam = 0.7
    quad = psi @ basis.Omega @ psi
    diff = smoothness_logprior(psi, 2 * lam, basis.Omega) - smoothness_logprior(psi, lam, basis.Omega)
    assert diff == pytest.approx(4 * math.log(2) - 0.5 * lam * quad)


def test_smoothness_gradient_finite_differences(basis):
    rng = np.random.default_rng(1)
    psi = rng.standard_normal(10)
    grad = smoothness_logprior_grad(psi, 1.3, basis.Omega)
    h = 1e-6
    fd = np.array([(smoothness_logprior(psi + h * e, 1.3, basis.Omega)
                    - smoothness_logprior(psi - h * e, 1.3, basis.Omega)) / (2 * h) for e in np.eye(10)])
    np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-8)
