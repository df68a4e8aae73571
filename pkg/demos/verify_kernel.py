# # Checking the kernel facts numerically
#
# Each check runs a recorded sweep and reports its worst discrepancy together
# with empirical stand-ins for the constants in the localization and
# positivity bounds.

from hermpio.verify import run_suite

for report in run_suite(q=1):
    status = "pass" if report.passed else "FAIL"
    print(f"{report.name:20s} {status}  worst={report.worst:.3g}")
    if report.name == "near_diag_sign":
        for n, c in report.constants.items():
            print(f"    n={n}: radius {c['rho']:.4f}, alpha {c['alpha']:.2f}")
    if report.name == "localization":
        for n, c in report.constants.items():
            print(f"    n={n}: envelope decays {c['decay']:.1f}x over [2/n, 4]")
