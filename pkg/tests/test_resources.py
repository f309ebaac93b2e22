import csv

import pytest

from hybridlgt import resources as R


def test_register_width():
    assert [R.register_width(c) for c in (1, 2, 3, 4, 7, 8)] == [1, 2, 2, 3, 3, 4]
    with pytest.raises(ValueError):
        R.register_width(0)


def test_sqrt_count_components():
    # m = 0 keeps the iteration-free part
    assert R.sqrt_count(1, 0) == 126 + 96
    assert R.sqrt_count(1, 2) == 1194


@pytest.mark.parametrize("n", range(1, 9))
def test_component_sum_equals_closed_form(n):
    assert R.fock_binary_bs_count(n) == R.fock_binary_bs_closed_form(n)


def test_golden_counts():
    assert R.schwinger_cnot_count(2) == 56
    assert R.schwinger_cnot_count(1) == 36
    assert R.fock_binary_bs_count(2, conditional=True) == 155736
    assert R.hybrid_counts("z2") == 2 and R.hybrid_counts("u1") == 8 and R.hybrid_counts("plaquette") == 1152


def test_ratio_exceeds_ten_thousand_z2():
    rep = R.CostReport("z2", cutoff=3)
    assert rep.n == 2 and rep.ratio > 1e4


def test_quadratic_scaling():
    ns = [4, 8, 16, 32, 64]
    assert R.loglog_slope(ns, [R.z2_cnot_count(n) for n in ns]) == pytest.approx(2.0, abs=0.05)


def test_circuit_fidelity_and_csv(tmp_path):
    rows = R.fidelity_curves([0.999, 1.0], [1, 3])
    assert {r.model for r in rows} == {"z2", "u1"}
    one = [r for r in rows if r.f == 1.0]
    assert all(r.F_qubit == 1.0 and r.F_hybrid == 1.0 for r in one)
    r = next(r for r in rows if r.model == "z2" and r.cutoff == 3 and r.f == 0.999)
    assert r.F_hybrid == pytest.approx(0.999 ** 2)
    path = tmp_path / "fid.csv"
    R.write_fidelity_csv(rows, path)
    with open(path) as fh:
        data = list(csv.reader(fh))
    assert tuple(data[0]) == R.FIDELITY_COLUMNS and len(data) == len(rows) + 1
    with pytest.raises(ValueError):
        R.circuit_fidelity(1.2, 3)


def test_unknown_model():
    with pytest.raises(ValueError):
        R.hybrid_counts("su3")
