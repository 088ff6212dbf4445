import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzygrad.autodiff import binary_op, constant
from fuzzygrad.errors import FisError
from fuzzygrad.fis import (
    EvalReport,
    addmf,
    addrule,
    addvar,
    aggregate,
    defuzz_centroid,
    evalfis,
    gensurf,
    newfis,
    rule_firing,
    sample_mf_curves,
)
from fuzzygrad.membership import evalmf
from fuzzygrad.training import IRIS_THETA0

from oracles import IRIS_OUT, closed_form_trapmf, quad_centroid, reference_iris


def _grades(fis, x):
    x = np.atleast_2d(x)
    return [[evalmf(x[:, j], mf) for mf in var.mfs] for j, var in enumerate(fis.inputs)]


def _firing(fis, x):
    g = _grades(fis, x)
    return [rule_firing(fis, g, r).data for r in fis.rules]


def _tiny(and_method="min", or_method="max"):
    fis = newfis("tiny", and_method=and_method, or_method=or_method)
    fis = addvar(fis, "input", "a", (0, 1))
    fis = addvar(fis, "input", "b", (0, 1))
    fis = addvar(fis, "output", "y", (0, 1))
    for io, i in (("input", 1), ("input", 2)):
        fis = addmf(fis, io, i, "lo", "trapmf", [0, 0, 0.2, 0.8])
        fis = addmf(fis, io, i, "hi", "trapmf", [0.2, 0.8, 1, 1])
    fis = addmf(fis, "output", 1, "lo", "trapmf", [0, 0, 0, 0.6])
    fis = addmf(fis, "output", 1, "hi", "trapmf", [0.4, 1, 1, 1])
    return fis


class TestBuilders:
    def test_iris_methods(self, initial_fis):
        assert initial_fis.name == "Iris Classification"
        assert initial_fis.and_method == "prod"

    def test_defaults(self):
        f = newfis("x")
        assert (f.and_method, f.or_method, f.imp_method, f.agg_method, f.defuzz_method) == (
            "min", "max", "min", "max", "centroid")

    def test_bad_method(self):
        with pytest.raises(FisError, match="bogus"):
            newfis("x", and_method="bogus")

    def test_iris_rules(self, initial_fis):
        assert len(initial_fis.rules) == 5
        assert all(r.connective == "AND" for r in initial_fis.rules)
        assert [r.weight for r in initial_fis.rules] == [1, 2, 3, 3, 3]

    def test_or_code(self):
        fis = addrule(_tiny(), [[1, 2, 1, 1, 2]])
        assert fis.rules[0].connective == "OR"

    def test_missing_mf(self, initial_fis):
        with pytest.raises(FisError, match="MF 4"):
            addrule(initial_fis, [[4, 1, 1, 1, 1]])

    @pytest.mark.parametrize("row", [[1, 1, 1, 1], [1, 1, 1, 0, 1], [1, 1, 1, 1, 3], [1.5, 1, 1, 1, 1]])
    def test_malformed_rows(self, initial_fis, row):
        with pytest.raises(FisError):
            addrule(initial_fis, [row])

    def test_builders_are_pure(self):
        base = newfis("x")
        with_var = addvar(base, "input", "a", (0, 1))
        assert base.inputs == ()
        addmf(with_var, "input", 1, "lo", "trapmf", [0, 0, 0.5, 1])
        assert with_var.inputs[0].mfs == ()

    def test_bad_var_index(self):
        with pytest.raises(FisError):
            addmf(newfis("x"), "input", 1, "lo", "trapmf", [0, 0, 0.5, 1])

    def test_duplicate_label(self):
        fis = addmf(addvar(newfis("x"), "input", "a", (0, 1)), "input", 1, "lo", "trapmf", [0, 0, 0.5, 1])
        with pytest.raises(FisError, match="lo"):
            addmf(fis, "input", 1, "lo", "trapmf", [0, 0, 0.5, 1])

    def test_empty_range(self):
        with pytest.raises(FisError):
            addvar(newfis("x"), "input", "a", (1, 1))

    def test_incomplete_system(self):
        with pytest.raises(FisError):
            evalfis([[0.1, 0.2]], _tiny())


class TestRuleFiring:
    def test_low_low(self, initial_fis):
        fire = [float(f[0]) for f in _firing(initial_fis, [0.05, 0.05])]
        assert fire == [1.0, 0.0, 0.0, 0.0, 0.0]

    def test_mid_mid(self, initial_fis):
        # Mid x Mid on the plateau, scaled by rule weight 2
        fire = [float(f[0]) for f in _firing(initial_fis, [0.5, 0.5])]
        assert fire == [0.0, 2.0, 0.0, 0.0, 0.0]

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1))
    def test_prod_below_min(self, initial_fis, x1, x2):
        g = _grades(initial_fis, [x1, x2])
        for rule in initial_fis.rules:
            fire = rule_firing(initial_fis, g, rule).item() / rule.weight
            grades = [g[j][i - 1].item() for j, i in enumerate(rule.antecedent)]
            assert fire <= min(grades) + 1e-15

    def test_min_and_max_or(self):
        fis = addrule(_tiny(), [[1, 2, 1, 1, 1], [1, 2, 1, 1, 2]])
        g = _grades(fis, [0.5, 0.7])
        lo, hi = g[0][0].item(), g[1][1].item()
        assert rule_firing(fis, g, fis.rules[0]).item() == min(lo, hi)
        assert rule_firing(fis, g, fis.rules[1]).item() == max(lo, hi)

    def test_probor(self):
        fis = addrule(_tiny(or_method="probor"), [[1, 2, 1, 1, 2]])
        g = _grades(fis, [0.5, 0.7])
        lo, hi = g[0][0].item(), g[1][1].item()
        assert rule_firing(fis, g, fis.rules[0]).item() == pytest.approx(lo + hi - lo * hi, rel=1e-15)

    def test_dont_care(self):
        fis = addrule(_tiny(), [[0, 2, 1, 1, 1]])
        g = _grades(fis, [0.0, 0.7])
        assert rule_firing(fis, g, fis.rules[0]).item() == g[1][1].item()

    def test_weight_scales(self):
        fis = addrule(_tiny(), [[1, 1, 1, 0.5, 1]])
        assert _firing(fis, [0.1, 0.1])[0][0] == 0.5


class TestDefuzz:
    def test_setosa_shoulder(self):
        z = np.linspace(0.5, 3.5, 501)
        mu = constant(closed_form_trapmf(z, *IRIS_OUT[0]))
        crisp, flag = defuzz_centroid(z, mu)
        assert abs(crisp.item() - 1.0) < 1e-3
        assert quad_centroid(lambda t: closed_form_trapmf([t], *IRIS_OUT[0])[0], 0.5, 3.5, (2.0,)) == (
            pytest.approx(1.0, abs=1e-9))
        assert not flag.any()

    def test_symmetric_triangle(self):
        z = np.linspace(0.5, 3.5, 501)
        crisp, _ = defuzz_centroid(z, constant(closed_form_trapmf(z, *IRIS_OUT[1])))
        assert crisp.item() == pytest.approx(2.0, abs=1e-12)

    def test_zero_cover(self):
        z = np.linspace(0.5, 3.5, 11)
        crisp, flag = defuzz_centroid(z, constant(np.zeros((2, 11))))
        assert crisp.data.tolist() == [2.0, 2.0]
        assert flag.tolist() == [True, True]

    def test_short_grid(self):
        with pytest.raises(FisError):
            defuzz_centroid([1.0], constant([1.0]))


class TestEvalfis:
    def test_low_low_gives_setosa(self, initial_fis):
        y = evalfis([[0.05, 0.05]], initial_fis).item()
        assert abs(y - 1.0) < 1e-3
        assert y == pytest.approx(reference_iris([[0.05, 0.05]], IRIS_THETA0, IRIS_THETA0)[0], abs=1e-12)

    def test_mid_mid_gives_versicolor(self, initial_fis):
        assert evalfis([[0.5, 0.5]], initial_fis).item() == pytest.approx(2.0, abs=1e-12)

    def test_uncovered_input_flagged(self, initial_fis):
        report = EvalReport()
        y = evalfis([[0.5, 0.05], [0.05, 0.05]], initial_fis, report=report)
        assert y.data[0] == 2.0
        assert report.degenerate.tolist() == [True, False]

    def test_iris_matches_reference(self, initial_fis, iris_x):
        y = evalfis(iris_x, initial_fis).data
        ref = reference_iris(iris_x, IRIS_THETA0, IRIS_THETA0)
        assert y.shape == (150,)
        np.testing.assert_allclose(y, ref, rtol=0, atol=1e-12)
        assert np.all((y >= 0.5) & (y <= 3.5))

    def test_batch_equals_rows(self, initial_fis, iris_x):
        batch = evalfis(iris_x, initial_fis).data
        rows = np.array([evalfis(iris_x[i:i + 1], initial_fis).item() for i in range(len(iris_x))])
        assert np.array_equal(batch, rows)

    def test_clamps_out_of_range(self, initial_fis):
        report = EvalReport()
        y = evalfis([[-0.5, 1.2]], initial_fis, report=report)
        assert report.clamped == 2
        assert y.item() == evalfis([[0.0, 1.0]], initial_fis).item()

    @pytest.mark.parametrize("x", [[[0.1, 0.2, 0.3]], [[np.nan, 0.1]], np.zeros((0, 2))])
    def test_bad_inputs(self, initial_fis, x):
        with pytest.raises(FisError):
            evalfis(x, initial_fis)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=6))
    def test_output_bound(self, initial_fis, rows):
        y = evalfis(np.array(rows), initial_fis, grid_points=101).data
        assert np.all((y >= 0.5) & (y <= 3.5))

    def test_prod_implication(self, iris_x):
        from fuzzygrad.training import build_iris_fis
        y = evalfis(iris_x, build_iris_fis(IRIS_THETA0, IRIS_THETA0, imp_method="prod")).data
        assert np.all((y >= 0.5) & (y <= 3.5))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 4), st.floats(0, 1), st.floats(0.0, 2.0))
def test_aggregation_is_monotone(initial_fis, rule, x, bump):
    z = np.linspace(0.5, 3.5, 61)
    g = _grades(initial_fis, [x, 1 - x])
    fire = [rule_firing(initial_fis, g, r) for r in initial_fis.rules]
    before = aggregate(initial_fis, fire, 0, z).data
    fire[rule] = binary_op("add", fire[rule], constant(bump))
    after = aggregate(initial_fis, fire, 0, z).data
    assert np.all(after >= before)


class TestSurfaceAndCurves:
    def test_gensurf(self, initial_fis):
        s = gensurf(initial_fis, 21)
        assert s.shape == (441, 3)
        assert np.all((s[:, 2] >= 0.5) & (s[:, 2] <= 3.5))
        corner = {(r[0], r[1]): r[2] for r in s}
        assert abs(corner[(0.0, 0.0)] - 1.0) < 1e-3
        assert abs(corner[(1.0, 1.0)] - 3.0) < 1e-3

    def test_gensurf_arity(self):
        fis = addrule(_tiny(), [[1, 1, 1, 1, 1]])
        fis = addvar(fis, "input", "c", (0, 1))
        with pytest.raises(FisError):
            gensurf(fis)

    def test_curves(self, initial_fis):
        rows = sample_mf_curves(initial_fis, "input", 1, 101)
        assert len(rows) == 303
        assert {r[1] for r in rows} == {"Low", "Mid", "High"}
        assert all(0.0 <= r[2] <= 1.0 for r in rows)
        by = {(r[0], r[1]): r[2] for r in rows}
        assert by[(0.0, "Low")] == 1.0
        assert by[(1.0, "High")] == 1.0

    @pytest.mark.parametrize("args", [("input", 3, 101), ("input", 1, 1), ("sideways", 1, 101)])
    def test_curve_errors(self, initial_fis, args):
        with pytest.raises(FisError):
            sample_mf_curves(initial_fis, *args)
