"""Print a report's table next to the published reference values."""
import json
import os
import sys

report_path = sys.argv[1] if len(sys.argv) > 1 else os.path.join("runs", "report.json")
if not os.path.exists(report_path):
    print(f"Report not found at {report_path}")
    sys.exit(1)

with open(report_path, encoding="utf-8") as fh:
    report = json.load(fh)

reference = report.get("reference", {}).get("table", {})
print(f"{report['problem']} (seed {report['seed']})")
print(f"{'strategy':<16}{'lambda':>10}{'mean eps_v':>14}{'std eps_v':>14}{'failed':>8}{'reference':>14}")
for row in report["table"]:
    ref = reference.get(row["strategy"], {}).get("mean_eps_v")
    lam = "-" if row["lambda"] is None else f"{row['lambda']:.0e}"
    mean = "-" if row["mean_eps_v"] is None else f"{row['mean_eps_v']:.4e}"
    std = "-" if row["std_eps_v"] is None else f"{row['std_eps_v']:.4e}"
    print(f"{row['strategy']:<16}{lam:>10}{mean:>14}{std:>14}{row['n_failed']:>8}"
          f"{'-' if ref is None else f'{ref:.4e}':>14}")

print("Checks:")
for name, check in report.get("checks", {}).items():
    if "status" in check:
        print(f" - {name}: {check['status']}")
    else:
        for label, entry in check.items():
            ratio = entry.get("ratio_to_none")
            print(f" - {name} {label}: {entry['status']} (ratio {'-' if ratio is None else f'{ratio:.3f}'})")
