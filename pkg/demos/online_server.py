"""Drive the query server in-process, restart it and query again."""

import json
import tempfile
from pathlib import Path

import numpy as np

from gpdp import Dataset, PrivacyParams, kde_build, kde_sensitivity_gaussian, release_function
from gpdp.server import OnlineServer

rng = np.random.default_rng(0)
f = kde_build(Dataset(rng.uniform(size=(100, 2))), 0.2)


def make_release():
    return release_function(f, kde_sensitivity_gaussian(100, 0.2, 2), PrivacyParams(1.0, 0.1),
                            seed=42)


with tempfile.TemporaryDirectory() as tmp:
    state = Path(tmp) / "noise.state"
    server = OnlineServer(make_release(), state)
    req = json.dumps({"op": "eval", "x": [0.4, 0.6]})
    print("first run :", server.handle(req))
    server.close()

    server = OnlineServer(make_release(), state)
    print("restarted :", server.handle(req))
    print("bad input :", server.handle(json.dumps({"op": "eval", "x": [0.4]})))
    print("info      :", server.handle(json.dumps({"op": "info"})))
    server.close()
