import pytest

from qbm import CheckResult, ValidationReport, run_suite


class TestReportStructures:
    def test_line_format(self):
        c = CheckResult("demo-check", 1.2e-5, 1e-4, detail="two routes")
        assert c.passed
        assert c.line() == "[PASS] demo-check: 1.200e-05 (limit 1.0e-04)"
        bad = CheckResult("demo-check", 2e-4, 1e-4)
        assert not bad.passed
        assert bad.line().startswith("[FAIL]")

    def test_report_aggregation(self):
        rep = ValidationReport([CheckResult("a", 0.0, 1.0), CheckResult("b", 2.0, 1.0)])
        assert not rep.passed
        d = rep.to_dict()
        assert d["passed"] is False
        assert [c["name"] for c in d["checks"]] == ["a", "b"]
        assert d["checks"][1]["passed"] is False


class TestSuites:
    @pytest.mark.parametrize("regime", ["under", "crit"])
    def test_classical_quick_other_regimes(self, regime, request):
        p = request.getfixturevalue(f"p_{regime}")
        rep = run_suite(p, mode="classical", quick=True)
        assert rep.passed, "\n".join(rep.lines())

    def test_quantum_quick_overdamped(self, pq_over):
        rep = run_suite(pq_over, mode="quantum", quick=True)
        assert rep.passed, "\n".join(rep.lines())
        names = {c.name for c in rep.checks}
        assert any(n.startswith("xi-q0-routes") for n in names)
        assert "noise-kernel-routes" in names
        assert "quantum-variance-rate" in names
        # quantum suites still run every classical cross-check
        assert "classical-variance-routes" in names
        assert "fpe-vs-analytic" in names
