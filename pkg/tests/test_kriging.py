import numpy as np
import pytest

from fuzzy_tilc.kriging import (
    DatabaseError,
    ExperimentDatabase,
    OracleError,
    SingularSystemError,
    build_database,
    build_model,
    fit_cell,
    generate_tuples,
    kriging_matrix,
    read_database_csv,
    residual_diagnostics,
    solve_dense,
    write_database_csv,
)
from fuzzy_tilc.partition import make_partition, uniform_partition
from oracles import affine_lstsq, assembled_kriging


def unit_corners(m):
    return np.array(np.meshgrid(*[[0.0, 1.0]] * m, indexing="ij")).reshape(m, -1).T


class TestSolveDense:
    def test_identity(self, rng):
        rhs = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(solve_dense(np.eye(5), rhs), rhs)

    def test_random_71(self, rng):
        A = rng.normal(size=(71, 71)) + 10 * np.eye(71)
        b = rng.normal(size=71)
        x = solve_dense(A, b)
        assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-9

    def test_zero_row(self, rng):
        A = rng.normal(size=(4, 4))
        A[2] = 0.0
        with pytest.raises(SingularSystemError):
            solve_dense(A, np.ones(4))

    def test_rank_deficient(self):
        A = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(SingularSystemError):
            solve_dense(A, np.ones(2))

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            solve_dense(np.ones((2, 3)), np.ones(2))
        with pytest.raises(ValueError):
            solve_dense(np.eye(2), np.ones(3))


class TestFitCell:
    def test_two_input_affine(self):
        theta = unit_corners(2) * [2.0, 3.0] + [1.0, -1.0]
        y = 5 + 2 * theta[:, 0] + 3 * theta[:, 1]
        C, D, B = fit_cell(theta, np.column_stack([y, y]))
        np.testing.assert_allclose(C, [5, 5], atol=1e-12)
        np.testing.assert_allclose(D, [[2, 3], [2, 3]], atol=1e-12)
        np.testing.assert_allclose(B, 0, atol=1e-12)
        C_ls, D_ls = affine_lstsq(theta, np.column_stack([y, y]))
        np.testing.assert_allclose(C, C_ls, atol=1e-9)
        np.testing.assert_allclose(D, D_ls, atol=1e-9)

    def test_line_through_two_points(self):
        C, D, B = fit_cell(np.array([[0.0], [1.0]]), np.array([[0.0], [1.0]]))
        np.testing.assert_allclose(C, [0], atol=1e-15)
        np.testing.assert_allclose(D, [[1]])
        np.testing.assert_allclose(B, 0, atol=1e-15)

    def test_bilinear_has_residual(self):
        theta = unit_corners(2)
        y = theta[:, 0] * theta[:, 1]
        Y = np.column_stack([y, y])
        C, D, B = fit_cell(theta, Y)
        assert np.abs(B).max() > 0.1
        C_o, D_o, B_o = assembled_kriging(theta, Y)
        np.testing.assert_allclose(C, C_o, atol=1e-12)
        np.testing.assert_allclose(D, D_o, atol=1e-12)
        np.testing.assert_allclose(B, B_o, atol=1e-12)
        # residuals sum to zero and are orthogonal to the inputs
        np.testing.assert_allclose(B.sum(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(theta.T @ B, 0, atol=1e-12)

    def test_matrix_layout(self):
        theta = unit_corners(2)
        M = kriging_matrix(theta)
        assert M.shape == (7, 7)
        np.testing.assert_array_equal(M, M.T)
        np.testing.assert_array_equal(M[:4, :4], np.eye(4))
        np.testing.assert_array_equal(M[4:, 4:], 0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            fit_cell(unit_corners(2), np.zeros((4, 3)))


class TestDatabase:
    def test_oven_scale_tuple_count(self):
        assert len(generate_tuples([uniform_partition(300, 450, 3)] * 6)) == 4096

    def test_small_counts(self):
        p = make_partition(0, 1, [0, 1])
        assert len(generate_tuples([p, p])) == 9
        np.testing.assert_allclose([t[0] for _, t in generate_tuples([p])], [0, 0.5, 1])

    def test_lexicographic_order(self):
        p = make_partition(0, 1, [0, 1])
        idx = [i for i, _ in generate_tuples([p, p])]
        assert idx[:4] == [(1, 1), (1, 2), (1, 3), (2, 1)]

    def test_exact_oracle(self):
        parts = [uniform_partition(0, 1, 2)] * 2
        G = np.array([[1.0, 2.0], [3.0, 4.0]])
        db = build_database(parts, lambda u: G @ u + 1.0)
        np.testing.assert_allclose(db.phi, db.theta @ G.T + 1.0)
        assert len(db) == 9 and db.dims == (2, 2) and db.m == 2

    def test_batch_matches_single(self):
        parts = [uniform_partition(0, 1, 3)] * 2
        f = lambda U: np.sin(np.asarray(U)) + np.asarray(U)[..., ::-1] ** 2
        a = build_database(parts, f)
        b = build_database(parts, f, batch=True)
        np.testing.assert_array_equal(a.phi, b.phi)

    def test_noise_mean_clt(self):
        parts = [make_partition(0, 1, [0, 1])]
        db = build_database(parts, lambda u: np.array([7.0]), repeats=10000, noise_sd=2.0, seed=3)
        assert np.all(np.abs(db.phi - 7.0) <= 4 * 2.0 / np.sqrt(10000))

    def test_same_seed_identical(self):
        parts = [uniform_partition(0, 1, 2)] * 2
        f = lambda u: u.copy()
        a = build_database(parts, f, noise_sd=1.0, seed=9)
        b = build_database(parts, f, noise_sd=1.0, seed=9)
        c = build_database(parts, f, noise_sd=1.0, seed=10)
        np.testing.assert_array_equal(a.phi, b.phi)
        assert not np.array_equal(a.phi, c.phi)

    def test_precomputed_outputs(self):
        parts = [uniform_partition(0, 1, 2)] * 2
        db = build_database(parts, lambda u: u * 2)
        again = build_database(parts, None, outputs=db.phi.reshape(-1, 2))
        np.testing.assert_array_equal(again.phi, db.phi)
        with pytest.raises(DatabaseError):
            build_database(parts, None, outputs=np.zeros((3, 2)))

    def test_oracle_failure(self):
        def bad(u):
            if u[0] > 0.7:
                raise RuntimeError("boom")
            return u

        with pytest.raises(OracleError) as exc:
            build_database([uniform_partition(0, 1, 2)], bad)
        assert exc.value.index == (3,)

    @pytest.mark.parametrize("kw", [{"repeats": 0}, {"noise_sd": -1.0}])
    def test_invalid_arguments(self, kw):
        with pytest.raises(ValueError):
            build_database([uniform_partition(0, 1, 2)], lambda u: u, **kw)

    def test_csv_round_trip(self, tmp_path):
        parts = [uniform_partition(0, 1, 2), uniform_partition(-1, 1, 3)]
        db = build_database(parts, lambda u: np.array([u[0] * u[1], u[0] + u[1]]))
        write_database_csv(db, tmp_path / "db.csv")
        back = read_database_csv(tmp_path / "db.csv", parts)
        np.testing.assert_array_equal(back.phi, db.phi)
        np.testing.assert_array_equal(back.theta, db.theta)

    def test_csv_missing_tuple(self, tmp_path):
        parts = [uniform_partition(0, 1, 2)] * 2
        db = build_database(parts, lambda u: u)
        write_database_csv(db, tmp_path / "db.csv")
        lines = (tmp_path / "db.csv").read_text().splitlines()
        (tmp_path / "db.csv").write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DatabaseError, match="incomplete database"):
            read_database_csv(tmp_path / "db.csv", parts)

    def test_csv_theta_mismatch(self, tmp_path):
        parts = [uniform_partition(0, 1, 2)]
        (tmp_path / "db.csv").write_text("i1,u1,y1\n1,0.0,1\n2,0.51,1\n3,1.0,1\n")
        with pytest.raises(DatabaseError, match="do not match"):
            read_database_csv(tmp_path / "db.csv", parts)

    def test_csv_tolerates_small_theta_error(self, tmp_path):
        parts = [uniform_partition(0, 1, 2)]
        (tmp_path / "db.csv").write_text("i1,u1,y1\n1,0.0,1\n2,0.5000001,2\n3,1.0,3\n")
        db = read_database_csv(tmp_path / "db.csv", parts)
        np.testing.assert_array_equal(db.theta.ravel(), [0, 0.5, 1])


class TestBuildModel:
    def test_chords_of_square(self):
        p = make_partition(0, 1, [0, 1])
        db = build_database([p], lambda u: u**2)
        # abscissae 0, 0.5, 1: cell 1 spans [0, 0.5], cell 2 spans [0.5, 1]
        model = build_model(db, [p])
        C1, D1 = model.rule((1,))
        C2, D2 = model.rule((2,))
        np.testing.assert_allclose([C1[0], D1[0, 0]], [0.0, 0.5], atol=1e-14)
        np.testing.assert_allclose([C2[0], D2[0, 0]], [-0.5, 1.5], atol=1e-14)

    def test_affine_every_cell_identical(self, rng):
        parts = [uniform_partition(300, 450, 3)] * 3
        G = rng.normal(size=(3, 3))
        g0 = rng.normal(size=3)
        model = build_model(build_database(parts, lambda u: G @ u + g0), parts)
        np.testing.assert_allclose(model.C, np.broadcast_to(g0, model.C.shape), atol=1e-8)
        np.testing.assert_allclose(model.D, np.broadcast_to(G, model.D.shape), atol=1e-10)
        assert residual_diagnostics(model).max() < 1e-9

    def test_incomplete_database(self):
        parts = [uniform_partition(0, 1, 3)] * 2
        db = build_database([uniform_partition(0, 1, 2)] * 2, lambda u: u)
        with pytest.raises(DatabaseError, match="incomplete database"):
            build_model(db, parts)

    def test_nan_entries(self):
        parts = [uniform_partition(0, 1, 2)]
        db = build_database(parts, lambda u: u)
        phi = db.phi.copy()
        phi[1] = np.nan
        with pytest.raises(DatabaseError):
            build_model(ExperimentDatabase(db.theta, phi), parts)

    def test_deterministic(self, rng):
        parts = [uniform_partition(0, 1, 3)] * 2
        db = build_database(parts, lambda u: np.array([np.exp(u[0]) * u[1], u[0] - u[1] ** 3]))
        a, b = build_model(db, parts), build_model(db, parts)
        assert a.to_json() == b.to_json()

    def test_database_points_are_blends(self):
        parts = [uniform_partition(0, 1, 3)] * 2
        f = lambda u: np.array([np.exp(u[0]) * u[1], u[0] - u[1] ** 3])
        db = build_database(parts, f)
        model = build_model(db, parts)
        # at the box corners a single cell fires and its kriging fit interpolates up to B
        for index, theta, phi in db.entries():
            y = model.evaluate(theta)
            assert np.all(np.isfinite(y))
        corner = np.array([0.0, 0.0])
        cell_b = model.B[0, 0][0]
        np.testing.assert_allclose(model.evaluate(corner) + cell_b, f(corner), atol=1e-12)
