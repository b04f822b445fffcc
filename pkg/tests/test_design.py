import numpy as np
import pytest

from distreg.design import (MRF, AdjacencyMap, Dataset, DesignError, ExtrapolationError,
                            Linear, ModelSpec, ParamSpec, PSpline, RandomEffect, Spatial,
                            VaryingCoefficient, assemble_predictors, bspline_knots,
                            build_bspline_block, build_difference_penalty, build_mrf_block,
                            build_random_effect_block, center_block, numerical_rank)
from distreg.simulation import grid_adjacency


def cox_de_boor(x, t, k):
    """Textbook recursion, used as an independent basis oracle."""
    n = len(t) - k - 1
    B = np.zeros((x.size, len(t) - 1))
    for i in range(len(t) - 1):
        B[:, i] = (t[i] <= x) & (x < t[i + 1])
    for d in range(1, k + 1):
        Bn = np.zeros((x.size, len(t) - 1 - d))
        for i in range(len(t) - 1 - d):
            left = (x - t[i]) / (t[i + d] - t[i]) * B[:, i]
            right = (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * B[:, i + 1]
            Bn[:, i] = left + right
        B = Bn
    return B[:, :n]


def test_default_basis_dimension_and_knots():
    x = np.linspace(0, 1, 200)
    blk = build_bspline_block(x)
    assert blk.n_coef == 22
    t = blk.meta["knots"]
    assert t.size == 20 + 2 * 3
    assert np.allclose(np.diff(t), t[1] - t[0])
    assert t[3] == pytest.approx(0) and t[-4] == pytest.approx(1)


def test_bspline_matches_recursion():
    rng = np.random.default_rng(0)
    x = np.sort(rng.uniform(2, 5, 300))
    x = x[x < x.max()]  # half-open recursion excludes the right end
    blk = build_bspline_block(np.r_[x, 2.0, 5.0], degree=3, inner_knots=8)
    Z = blk.Z[:-2]
    ref = cox_de_boor(x, bspline_knots(2.0, 5.0, 8, 3), 3)
    assert np.allclose(Z, ref, atol=1e-12)
    assert np.allclose(blk.Z.sum(axis=1), 1.0)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_difference_penalty_quadratic_form(order):
    rng = np.random.default_rng(order)
    K = build_difference_penalty(12, order)
    for _ in range(5):
        beta = rng.normal(size=12)
        brute = np.sum(np.diff(beta, n=order) ** 2)
        assert beta @ K @ beta == pytest.approx(brute, rel=1e-12)
    assert numerical_rank(K) == 12 - order
    assert np.allclose(K @ np.arange(12.0) ** (order - 1), 0)


def test_penalty_order_validation():
    with pytest.raises(DesignError):
        build_difference_penalty(5, 5)
    with pytest.raises(DesignError):
        build_bspline_block(np.linspace(0, 1, 10), inner_knots=2, penalty_order=2)
    with pytest.raises(DesignError):
        build_bspline_block(np.ones(10))


def test_centering_constraint_and_idempotence():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 1, 150)
    raw = build_bspline_block(x, inner_knots=10)
    c = center_block(raw)
    assert c.n_coef == raw.n_coef - 1
    assert np.allclose(c.Z.sum(axis=0), 0, atol=1e-10)
    assert c.rank == raw.rank == numerical_rank(c.K)
    assert center_block(c) is c
    # centered column space lies inside the raw one
    coef, *_ = np.linalg.lstsq(raw.Z, c.Z, rcond=None)
    assert np.allclose(raw.Z @ coef, c.Z, atol=1e-10)


def test_block_products_agree_with_dense():
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, 120)
    g = rng.integers(0, 6, 120)
    for blk in (build_bspline_block(x, inner_knots=9, center=True),
                build_random_effect_block(g)):
        Z = blk.Z
        beta = rng.normal(size=blk.n_coef)
        v = rng.normal(size=120)
        w = rng.uniform(0.1, 2, 120)
        assert np.allclose(blk.matvec(beta), Z @ beta)
        assert np.allclose(blk.rmatvec(v), Z.T @ v)
        assert np.allclose(blk.gram(w), Z.T @ (w[:, None] * Z))


def test_extrapolation_policy():
    blk = build_bspline_block(np.linspace(0, 1, 50), inner_knots=6, column="x", center=True)
    new = Dataset({"x": np.array([0.5, 1.2])})
    with pytest.raises(ExtrapolationError):
        blk.design(new)
    Z = blk.design(new, extrapolate=True)
    assert Z.shape == (2, blk.n_coef) and np.all(np.isfinite(Z))
    assert list(blk.in_range(new)) == [True, False]


def test_random_effect_indicators():
    g = np.array(["b", "a", "c", "a"], dtype=object)
    blk = build_random_effect_block(g)
    assert blk.meta["levels"] == ["a", "b", "c"]
    assert np.array_equal(blk.Z, np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1], [1, 0, 0]]))
    assert np.array_equal(blk.K, np.eye(3)) and blk.rank == 3


def test_mrf_laplacian_and_conditional_mean():
    adj = grid_adjacency(3)
    K = adj.laplacian()
    assert numerical_rank(K) == adj.size - 1
    rng = np.random.default_rng(3)
    gamma = rng.normal(size=adj.size)
    for s, r in enumerate(adj.regions):
        # conditional mean under precision K: -sum_{t != s} K_st gamma_t / K_ss
        cond = -(K[s] @ gamma - K[s, s] * gamma[s]) / K[s, s]
        nb = [adj.index[q] for q in adj.neighbors[r]]
        assert cond == pytest.approx(gamma[nb].mean())


def test_mrf_disconnected_rank_and_islands():
    nb = {"a": ["b"], "b": ["a"], "c": ["d"], "d": ["c"], "e": []}
    adj = AdjacencyMap(list(nb), nb)
    assert adj.n_components() == 3 and adj.islands == ["e"]
    with pytest.raises(DesignError, match="island"):
        build_mrf_block(["a", "b", "c", "d"], adj)
    blk = build_mrf_block(["a", "b", "c", "d", "e"], adj)
    assert blk.rank == 2


def test_adjacency_validation_and_file_roundtrip(tmp_path):
    with pytest.raises(DesignError, match="asymmetric"):
        AdjacencyMap(["a", "b"], {"a": ["b"], "b": []})
    with pytest.raises(DesignError):
        AdjacencyMap(["a"], {"a": ["a"]})
    adj = grid_adjacency(3)
    p = tmp_path / "g.adj"
    adj.to_file(p)
    back = AdjacencyMap.from_file(p)
    assert back.regions == adj.regions and back.neighbors == adj.neighbors


def test_dataset_csv_roundtrip(tmp_path):
    d = Dataset({"y": np.array([1.5, 2.25]), "r": np.array(["x", "y"], dtype=object)},
                categorical={"r"})
    p = tmp_path / "d.csv"
    d.to_csv(p)
    back = Dataset.from_csv(p, categorical=["r"])
    assert np.array_equal(back["y"], d["y"]) and list(back["r"]) == ["x", "y"]
    with pytest.raises(DesignError):
        back.numeric("r")


def _toy_data(n=200, seed=0):
    rng = np.random.default_rng(seed)
    adj = grid_adjacency(3)
    reg = np.asarray(adj.regions, dtype=object)[np.arange(n) % adj.size]
    east = np.array([float(r.endswith("0")) for r in reg])
    d = Dataset({"x": rng.uniform(0, 1, n), "z": rng.normal(size=n), "east": east,
                 "reg": reg, "y": rng.uniform(1, 2, n)}, categorical={"reg"})
    return d, adj


def test_assembly_order_and_labels():
    d, adj = _toy_data()
    spec = ModelSpec("lognormal", {
        "mu": ParamSpec([Linear("z"), PSpline("x", knots=8), VaryingCoefficient("x", "z", knots=8),
                         RandomEffect("reg"), Spatial("reg", covariates=("east",))]),
    })
    preds = assemble_predictors(spec, d, adj)
    labels = [b.label for b in preds["mu"].blocks]
    assert labels == ["(Intercept)", "z", "f(x)", "z*f(x)", "re(reg)", "spat(reg):east",
                      "spat(reg):str", "spat(reg):unstr"]
    assert [b.label for b in preds["sigma2"].blocks] == ["(Intercept)"]
    vc = preds["mu"].blocks[3]
    assert np.allclose(vc.Z, d["z"][:, None] * preds["mu"].blocks[2].Z)


def test_assembly_errors():
    d, adj = _toy_data()
    with pytest.raises(DesignError, match="duplicate"):
        assemble_predictors(ModelSpec("gamma", {"mu": ParamSpec([Linear("z"), Linear("z")])}), d)
    d2 = Dataset({**d.columns, "z2": 2 * d["z"]}, categorical={"reg"})
    with pytest.raises(DesignError, match="rank deficient"):
        assemble_predictors(ModelSpec("gamma", {"mu": ParamSpec([Linear("z"), Linear("z2")])}), d2)
    with pytest.raises(DesignError, match="adjacency"):
        assemble_predictors(ModelSpec("gamma", {"mu": ParamSpec([MRF("reg")])}), d)
    with pytest.raises(DesignError, match="varies within region"):
        assemble_predictors(ModelSpec("gamma", {"mu": ParamSpec([Spatial("reg", ("z",))])}), d, adj)
    with pytest.raises(DesignError):
        ModelSpec("gamma", {"shape": ParamSpec()}).validate()


def test_income_model_block_count():
    # linear education, three smooths, a region term with a region-level
    # covariate plus an unstructured effect, and a random year effect.
    # Every flattened component is its own block, giving 8 blocks.
    rng = np.random.default_rng(3)
    d, adj = _toy_data()
    cols = {**d.columns, "age": rng.uniform(20, 60, d.n), "hours": rng.uniform(10, 50, d.n),
            "year": np.array([f"y{i % 5}" for i in range(d.n)], dtype=object)}
    data = Dataset(cols, categorical={"reg", "year"})
    spec = ModelSpec("dagum", {"b": ParamSpec([
        Linear("z"), PSpline("x"), PSpline("age"), PSpline("hours"),
        Spatial("reg", covariates=("east",), structured=False), RandomEffect("year")])})
    blocks = assemble_predictors(spec, data, adj)["b"].blocks
    assert [b.label for b in blocks] == ["(Intercept)", "z", "f(x)", "f(age)", "f(hours)",
                                         "spat(reg):east", "spat(reg):unstr", "re(year)"]
