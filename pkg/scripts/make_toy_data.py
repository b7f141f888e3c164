"""Regenerate the bundled toy LPDO pair and its dense reference values."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from fidcert import lpdo as lp
from fidcert import oracle

DATA = Path(__file__).resolve().parents[1] / "src" / "fidcert" / "data"


def main() -> None:
    rng = np.random.default_rng(2024)
    rho = lp.random_lpdo(4, 2, 2, 2, rng)
    sigma = lp.random_lpdo(4, 2, 2, 2, rng)
    lp.save_lpdo(DATA / "toy_rho.lpdo", rho)
    lp.save_lpdo(DATA / "toy_sigma.lpdo", sigma)
    r, s = rho.to_dense(), sigma.to_dense()
    sub, sup = lp.dense_moment_bounds(r, s)
    expected = {
        "fidelity": oracle.dense_fidelity(r, s),
        "trace_norm": oracle.dense_trace_norm(r, s),
        "subfidelity": sub,
        "superfidelity": sup,
    }
    (DATA / "toy_expected.json").write_text(json.dumps(expected, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(expected)


if __name__ == "__main__":
    main()
