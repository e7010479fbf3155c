"""Black-box checks of the clairaut executable: exit codes, JSON schemas, CSV shape."""

import csv
import io
import json
import math
import pathlib
import subprocess
import sys

import jsonschema

exe, models, schemas = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
failures = []


def run(*args):
    return subprocess.run([exe, *map(str, args)], capture_output=True, text=True)


def check(name, cond, detail=""):
    print(("ok   " if cond else "FAIL ") + name + ("" if cond else ": " + detail))
    if not cond:
        failures.append(name)


def schema(kind):
    return json.loads((schemas / f"{kind}.schema.json").read_text())


def valid(kind, text):
    try:
        doc = json.loads(text)
        jsonschema.validate(doc, schema(kind))
        return doc, ""
    except (json.JSONDecodeError, jsonschema.ValidationError) as e:
        return None, str(e).splitlines()[0]


for name in sorted(p.stem for p in models.glob("*.lag")):
    r = run("analyze", models / f"{name}.lag")
    doc, err = valid("analyze", r.stdout)
    check(f"analyze {name} schema", r.returncode == 0 and doc is not None, err or r.stderr)
    r = run("verify", models / f"{name}.lag")
    doc, err = valid("verify", r.stdout)
    check(f"verify {name} schema and pass", r.returncode == 0 and doc is not None and doc["pass"], err or r.stdout[-400:])

r = run("analyze", models / "cawley.lag")
doc = json.loads(r.stdout)
check("analyze cawley", doc["hessian_rank"] == 2 and doc["degenerate"] == ["z"]
      and doc["classification"]["kind"] == "limit", r.stdout)

r = run("analyze", "missing.lag")
check("analyze missing exits 2", r.returncode == 2 and r.stderr.strip() != "", r.stderr)

r = run("transform", models / "particle.lag", "--at", "x0=0,x=0,y=0,z=0,p_x=3,p_y=0,p_z=4")
doc, err = valid("transform", r.stdout)
check("transform particle schema", doc is not None, err)
if doc:
    check("transform particle B_x0", abs(doc["B"]["x0"] + math.sqrt(50)) < 1e-9, str(doc["B"]))
    check("transform particle H_phys", abs(doc["H_phys"]) < 1e-9, str(doc["H_phys"]))

r = run("transform", models / "cawley.lag", "--at", "x=1,y=0,z=2,p_x=0.5,p_y=-1,q=1")
check("transform unbound symbol exits 2", r.returncode == 2 and "'q'" in r.stderr, r.stderr)

r = run("simulate", models / "oscillator.lag", "--init", "x=1,p_x=0")
rows = list(csv.reader(io.StringIO(r.stdout)))
check("simulate oscillator exit 0", r.returncode == 0, r.stderr)
check("simulate csv rows have header width", all(len(row) == len(rows[0]) for row in rows), "ragged rows")
check("simulate oscillator x(1)", abs(float(rows[-1][1]) - math.cos(1.0)) < 1e-6, rows[-1][1])

r = run("simulate", models / "particle.lag", "--init", "x0=0,x=0,y=0,z=0,p_x=3,p_y=0,p_z=4",
        "--gauge", "x0=1", "--t1", "10", "--dt", "1e-3")
rows = list(csv.reader(io.StringIO(r.stdout)))
pcols = [k for k, h in enumerate(rows[0]) if h.startswith("p:")]
drift = max(abs(float(row[k]) - float(rows[1][k])) for row in rows[1:] for k in pcols)
check("simulate particle momenta constant", r.returncode == 0 and drift <= 1e-7, f"drift {drift}")

for dt in ("0", "-0.1"):
    r = run("simulate", models / "oscillator.lag", "--init", "x=1,p_x=0", "--dt", dt)
    check(f"simulate dt={dt} exits 2", r.returncode == 2, r.stderr)

a = run("verify", models / "christ_lee.lag", "--seed", "7").stdout
b = run("verify", models / "christ_lee.lag", "--seed", "7").stdout
check("verify deterministic for a fixed seed", a == b and a != "")

r = run("pde", "--f", "z1^2+z2^2+z3", "--mode", "mixed", "--s", "2", "--c", "c3=1", "--at", "x1=2,x2=2,x3=3")
doc, err = valid("pde", r.stdout)
check("pde mixed", doc is not None and abs(doc["value"] - 4) < 1e-10, err or r.stdout)
r = run("pde", "--f", "z1^2+z2^2+z3", "--mode", "envelope", "--at", "x1=2,x2=2,x3=3")
check("pde envelope on rank-deficient f exits 3", r.returncode == 3 and "rank" in r.stderr, r.stderr)
r = run("pde", "--f", "z1^2", "--mode", "envelope", "--at", "x1=3")
doc, err = valid("pde", r.stdout)
check("pde z1^2 envelope", doc is not None and abs(doc["value"] - 2.25) < 1e-12, err or r.stdout)

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
