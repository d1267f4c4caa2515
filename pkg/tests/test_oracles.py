import numpy as np
import pytest

from mrmc.cli import main
from mrmc.oracles import (
    OracleReport,
    brute_force_par,
    fd_conj_gradient,
    fd_gradient_check,
    scalar_link_suite,
)


def test_report_pass_flag_follows_error():
    ok = OracleReport.make("x", 1e-6, 1e-5, "inst")
    bad = OracleReport.make("x", 1e-4, 1e-5, "inst")
    assert ok.passed and not bad.passed
    assert "PASS" in ok.line() and "FAIL" in bad.line()
    with pytest.raises(ValueError):
        OracleReport("x", 1.0, 0.1, True, "inst")


def test_fd_on_squared_norm_and_constant():
    X = np.array([[1.0 + 2j, -0.5], [0.3j, 2.0]])
    assert fd_gradient_check(lambda Y: float(np.sum(np.abs(Y) ** 2)), X, X, tolerance=1e-9).passed
    assert fd_gradient_check(lambda Y: 7.0, X, np.zeros_like(X), tolerance=1e-9).passed
    assert np.allclose(fd_conj_gradient(lambda Y: float(np.real(np.sum(Y))), X, 1e-6), 0.5, atol=1e-9)


def test_fd_detects_a_wrong_gradient():
    X = np.array([[1.0 + 1j]])
    assert not fd_gradient_check(lambda Y: float(np.abs(Y[0, 0]) ** 2), X, 2 * X, tolerance=1e-5).passed


def test_brute_force_par_trivial_cases():
    a = np.array([1.0, 1.0j])
    assert np.allclose(brute_force_par(a, 2.0, 1.5, resolution=2001), a, atol=2e-3)
    out = brute_force_par(np.array([3.0, 0.5j]), 2.0, 1.0, resolution=2001)
    assert np.allclose(np.abs(out), 1.0, atol=1e-12)


def test_scalar_links():
    reports = scalar_link_suite()
    assert len(reports) >= 4 and all(r.passed for r in reports)


def test_verify_command(capsys):
    assert main(["verify", "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert "checks passed" in out and "FAIL" not in out
