import numpy as np
import pytest
from scipy import sparse

from spdhg.harness.reference import certify_reference
from spdhg.problems import (GeneratorSpec, gen_basis_pursuit, generate, load_libsvm,
                            problem_from_data, write_libsvm)
from spdhg.problems.generators import ar1_covariance
from spdhg.problems.libsvm import LibSVMFormatError, parse_libsvm_lines


def test_basis_pursuit_planted_point_is_feasible():
    spec = GeneratorSpec(kind="basis_pursuit", n=40, p=80, sparsity=8, seed=11)
    prob, x_planted = gen_basis_pursuit(spec)
    assert (prob.m, prob.p, prob.n) == (40, 80, 40)
    assert np.count_nonzero(x_planted) == 8
    assert np.array_equal(prob.A.full_apply(x_planted) - prob.b, np.zeros(40))
    assert prob.constrained and prob.reference is None


def test_generation_is_deterministic():
    spec = GeneratorSpec(kind="lasso", n=20, p=10, sparsity=3, seed=5, block_size=4)
    a, b = generate(spec), generate(spec)
    assert np.array_equal(a.A.toarray(), b.A.toarray())
    assert np.array_equal(a.meta["b"], b.meta["b"])
    assert a.n == 5
    c = generate(GeneratorSpec(kind="lasso", n=20, p=10, sparsity=3, seed=6))
    assert not np.array_equal(a.A.toarray(), c.A.toarray())


def test_row_covariance():
    assert np.array_equal(ar1_covariance(3, 0.5), [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])
    for rho in (0.0, 0.6):
        prob = generate(GeneratorSpec(kind="basis_pursuit", n=10_000, p=5, rho=rho, sparsity=0,
                                      seed=2))
        M = prob.A.toarray()
        emp = M.T @ M / M.shape[0]
        assert np.max(np.abs(emp - ar1_covariance(5, rho))) < 0.05


def test_invalid_specs():
    for kw in ({"kind": "nope"}, {"rho": 1.0}, {"sparsity": 300}, {"kind": "ridge", "lam": 0.0},
               {"n": 0}, {"block_size": 0}):
        with pytest.raises(ValueError):
            GeneratorSpec(**kw)


def test_ridge_objective_and_normal_equations():
    prob = generate(GeneratorSpec(kind="ridge", n=30, p=8, sparsity=3, lam=0.5, seed=1))
    b = prob.meta["b"]
    assert abs(prob.objective(np.zeros(8)) - 0.5 * b @ b) <= 1e-12 * (b @ b)
    certify_reference(prob, "pdhg_oracle", 1e-12)
    M = prob.A.toarray()
    x_ne = np.linalg.solve(M.T @ M + 0.5 * np.eye(8), M.T @ b)
    assert np.max(np.abs(prob.reference.x_star - x_ne)) <= 1e-8


def test_lasso_large_weight_gives_zero_solution():
    prob = generate(GeneratorSpec(kind="lasso", n=25, p=10, sparsity=3, lam=1.0,
                                  lam_relative=True, seed=4))
    assert prob.meta["lam"] == np.abs(prob.A.full_adjoint(prob.meta["b"])).max()
    certify_reference(prob, "pdhg_oracle", 1e-12)
    assert np.max(np.abs(prob.reference.x_star)) <= 1e-9


def test_lasso_objective_matches_direct_formula(rng):
    prob = generate(GeneratorSpec(kind="lasso", n=15, p=6, sparsity=2, lam=0.3, seed=9))
    x = rng.standard_normal(6)
    M, b = prob.A.toarray(), prob.meta["b"]
    direct = 0.5 * np.sum((M @ x - b) ** 2) + 0.3 * np.sum(np.abs(x))
    assert abs(prob.objective(x) - direct) <= 1e-12 * direct


def test_svm_objective_and_separation():
    prob = generate(GeneratorSpec(kind="svm_hinge", n=60, p=5, sparsity=0, lam=1e-4, seed=2))
    assert abs(prob.objective(np.zeros(5)) - 1.0) <= 1e-15
    M = prob.A.toarray()
    certify_reference(prob, "pdhg_oracle", 1e-10)
    x = prob.reference.x_star
    hinge = np.mean(np.maximum(0.0, 1.0 - M @ x))
    assert hinge < 1e-3
    strong = generate(GeneratorSpec(kind="svm_hinge", n=60, p=5, sparsity=0, lam=100.0, seed=2))
    certify_reference(strong, "pdhg_oracle", 1e-10)
    assert np.linalg.norm(strong.reference.x_star) < 0.05 * np.linalg.norm(x)


def test_svm_rows_carry_labels():
    X = np.array([[1.0, 2.0], [3.0, -1.0]])
    prob = problem_from_data(X, [1.0, -1.0], "svm_hinge", 0.1)
    assert np.array_equal(prob.A.toarray(), [[1.0, 2.0], [-3.0, 1.0]])
    with pytest.raises(ValueError):
        problem_from_data(X, [1.0, 0.0], "svm_hinge", 0.1)
    with pytest.raises(ValueError):
        problem_from_data(X, [1.0], "ridge", 0.1)


def test_libsvm_line_parsing():
    rows, cols, vals, labels, max_index = parse_libsvm_lines(["+1 1:0.5 3:2", "-1", ""])
    assert rows == [0, 0] and cols == [0, 2] and vals == [0.5, 2.0]
    assert np.array_equal(labels, [1.0, -1.0]) and max_index == 3


def test_libsvm_load_dense_view(tmp_path):
    path = tmp_path / "d.libsvm"
    path.write_text("+1 3:2 1:0.5\n-1\n# comment\n2.5 2:-1e-3\n")
    X, y = load_libsvm(path)
    assert np.array_equal(X.toarray(), [[0.5, 0, 2], [0, 0, 0], [0, -1e-3, 0]])
    assert np.array_equal(y, [1.0, -1.0, 2.5])
    X5, _ = load_libsvm(path, p_override=5)
    assert X5.shape == (3, 5)
    with pytest.raises(ValueError):
        load_libsvm(path, p_override=2)
    Xn, _ = load_libsvm(path, normalize=True)
    norms = np.sqrt(np.asarray(Xn.multiply(Xn).sum(axis=1)).ravel())
    assert np.allclose(norms, [1.0, 0.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("line, lineno", [("1 0:1", 2), ("1 a:1", 2), ("1 1:x", 2),
                                          ("1 1:1 1:2", 2), ("x 1:1", 2), ("1 1=2", 2)])
def test_libsvm_errors_report_line(line, lineno):
    with pytest.raises(LibSVMFormatError) as err:
        parse_libsvm_lines(["+1 1:1", line])
    assert err.value.lineno == lineno and f"line {lineno}" in str(err.value)


def test_libsvm_round_trip(tmp_path, rng):
    X = sparse.random(100, 12, density=0.3, random_state=3, format="csr")
    X.data = rng.standard_normal(X.data.size) * 10.0 ** rng.integers(-8, 8, X.data.size)
    labels = np.where(rng.random(100) < 0.5, -1.0, 1.0)
    labels[:3] = [0.125, 3.0, -2.75]
    path = tmp_path / "r.libsvm"
    write_libsvm(path, X, labels)
    X2, y2 = load_libsvm(path, p_override=12)
    assert np.array_equal(X2.toarray(), X.toarray())
    assert np.array_equal(y2, labels)
