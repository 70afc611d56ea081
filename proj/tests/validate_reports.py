"""Run the CLI on the fixture files and validate every JSON report against
the published schema."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def main() -> int:
    cli, schema_path, data = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    schema = json.loads(schema_path.read_text())
    validator = jsonschema.Draft202012Validator(schema)
    runs = [
        ["--case", "c6", "--data", data / "c6_p2_n20.csv"],
        ["--case", "c1", "--data", data / "c6_p2_n20.csv", "--methods", "dt,lrt,bc,sko1,sko2", "--bc-reps", "60"],
        ["--case", "c2", "--data", data / "c6_p2_n20.csv", "--blocks", "1,1"],
        ["--case", "c3", "--data", data / "two_groups.csv", "--group-col", "grp"],
        ["--case", "c4", "--data", data / "two_groups.csv", "--group-col", "grp"],
        ["--case", "c5", "--data", data / "p3_n25.csv", "--mu0", data / "mu0.csv", "--lambda0", data / "lambda0.csv"],
        ["--case", "pattern", "--data", data / "p3_n25.csv", "--pattern", data / "pattern.csv"],
        ["--case", "c4", "--data", data / "c6_p2_n20.csv", "--data", data / "c6_p2_n20.csv"],
        ["--case", "c6", "--data", data / "constant.csv"],
    ]
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        for i, args in enumerate(runs):
            out = pathlib.Path(tmp) / f"report{i}.json"
            proc = subprocess.run([cli, "test", *map(str, args), "--out", str(out)], capture_output=True, text=True)
            if proc.returncode not in (0, 2):
                print(f"FAIL run {args}: exit {proc.returncode}: {proc.stderr.strip()}")
                failures += 1
                continue
            report = json.loads(out.read_text())
            errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
            for e in errors:
                print(f"FAIL run {args}: {list(e.path)}: {e.message}")
            failures += bool(errors)
            if not errors:
                print(f"ok   {report['case']} status={report['status']}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
