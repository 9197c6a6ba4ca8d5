"""
Running the experiments from the command line
=============================================

The same pipeline is available as ``torusproj <subcommand>``.  This script
drives it through ``main`` so the outputs land in a scratch directory.
"""
import json
import tempfile
from pathlib import Path

from torusproj.cli import main

work = Path(tempfile.mkdtemp())
lat = work / "z2.json"
lat.write_text(json.dumps({"n": 2, "basis": [[1, 0], [0, 1]], "name": "Z2"}))

rc = main(["census", "--lattice", str(lat), "--dyadic", "5:10", "--eta", "0.1", "--out", str(work / "census")])
print("census exit", rc)
print((work / "census" / "census.csv").read_text())

rc = main(["fit", "--lattice", str(lat), "--dyadic", "5:12", "--family", "knapp", "--out", str(work / "fit")])
print("fit exit", rc, json.loads((work / "fit" / "fit.json").read_text())["slope"])

rc = main(["whitney", "--lattice", str(lat), "--theta0", "0.05", "--out", str(work / "whitney")])
manifest = json.loads((work / "whitney" / "manifest.json").read_text())
print("whitney exit", rc, manifest["notes"], [a["path"] for a in manifest["artifacts"]])
