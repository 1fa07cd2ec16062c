import numpy as np
import pytest

from levylibor.driver import LevyDriverSpec, NigParams
from levylibor.market import (
    MarketModel,
    TenorStructure,
    VolatilityStructure,
    check_conditions,
    initial_forward_rates,
    libor_weight,
    reference_model,
    validate_model,
)
from oracles import L0, LR1_FIRST_FAILING_N, LR1_SLACK_N60, W0


def test_tenor_basics():
    t = TenorStructure.uniform(20, 0.5)
    assert t.n_rates == 20
    assert t.maturity == 10.5
    assert np.allclose(t.accruals, 0.5)
    assert TenorStructure(np.array([0.0, 0.25])).n_rates == 0
    for bad in ([0.1, 0.5, 1.0], [0.0, 0.5, 0.5], [0.0]):
        with pytest.raises(ValueError):
            TenorStructure(np.array(bad))


def test_initial_forwards_flat_curve():
    m = reference_model()
    assert np.allclose(m.curve.forwards, L0, rtol=0, atol=1e-15)
    assert m.curve.discount[0] == 1.0
    assert m.curve.terminal_bond == pytest.approx(np.exp(-0.04 * 10.5))
    assert libor_weight(L0, 0.5) == pytest.approx(W0, rel=1e-14)


def test_initial_forwards_reject_bad_curves():
    with pytest.raises(ValueError):
        initial_forward_rates([0.99, 0.99, 0.98], [0.5, 0.5])
    with pytest.raises(ValueError):
        initial_forward_rates([0.99, -0.1], [0.5])
    with pytest.raises(ValueError):
        initial_forward_rates([0.99, 0.98, 0.97], [0.5])
    c = initial_forward_rates([0.99, 0.98, 0.97], [0.5, 0.5, 0.5])  # delta_0 is dropped
    assert c.forwards.size == 2


def test_weight_domain():
    with pytest.raises(ValueError):
        libor_weight(-3.0, 0.5)
    assert libor_weight(np.array([0.0, L0]), 0.5).shape == (2,)


def test_volatility_table_and_lookup():
    v = VolatilityStructure(np.arange(9.0).reshape(3, 3) + 1)
    assert v.table[2, 0] == 0.0  # rate T_1 is dead in the last interval
    tenor = TenorStructure.uniform(3, 0.5)
    assert v(0.2, 2, tenor) == v.table[0, 1]
    assert v(0.7, 2, tenor) == v.table[1, 1]
    assert v(1.2, 2, tenor) == 0.0
    with pytest.raises(ValueError):
        VolatilityStructure(np.ones((2, 3)))


def test_model_size_mismatch():
    m = reference_model(4)
    with pytest.raises(ValueError):
        MarketModel(m.tenor, m.curve, VolatilityStructure.flat(3), m.driver)


def test_reference_setup_validates():
    report = validate_model(reference_model())
    assert report.ok
    assert report["LR1"].slack == pytest.approx(12 - 0.18 * 20)


def test_lr1_slack_and_failure():
    assert validate_model(reference_model(60))["LR1"].slack == pytest.approx(LR1_SLACK_N60)
    assert validate_model(reference_model(LR1_FIRST_FAILING_N - 1)).ok
    report = validate_model(reference_model(LR1_FIRST_FAILING_N))
    assert not report.ok
    assert [c.code for c in report.failures] == ["LR1"]
    assert "FAIL LR1" in str(report)


def test_lr1_uses_driver_bound():
    skew = LevyDriverSpec(NigParams(12.0, -4.0, 0.0, 12.0))
    assert not validate_model(reference_model(50, driver=skew)).ok  # 9 > 8


def test_lr2_increasing_curve_fails():
    tenor = TenorStructure.uniform(3)
    report = check_conditions(tenor, [0.99, 0.995, 0.98, 0.97], VolatilityStructure.flat(3), LevyDriverSpec())
    assert not report["LR2"].passed
    assert report["LR1"].passed


def test_empty_tenor_reported():
    report = check_conditions(TenorStructure.uniform(0), [0.99], None, LevyDriverSpec())
    assert not report.ok
    assert report.failures[0].code == "EMPTY_TENOR"
