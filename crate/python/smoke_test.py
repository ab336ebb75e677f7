"""Smoke test for the condrisk Python module.

Uses an installed `condrisk` when available, otherwise loads the library
built by `cargo build -p condrisk-py` from target/.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import condrisk

        return condrisk
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libcondrisk_py.so", "libcondrisk_py.dylib", "condrisk_py.dll"):
            lib = ROOT / "target" / profile / name
            if lib.exists():
                loader = importlib.machinery.ExtensionFileLoader("condrisk", str(lib))
                spec = importlib.util.spec_from_file_location("condrisk", str(lib), loader=loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    sys.exit("condrisk module not found; run `cargo build -p condrisk-py` first")


def main():
    cr = load()
    names = cr.scenarios()
    assert "table1-c2-15x15" in names, names

    x1, x2, y = cr.simulate("table1-c2-15x15", field=0)
    assert len(x1) == len(x2) == len(y) > 100
    again = cr.simulate("table1-c2-15x15", field=0)
    assert again[2] == y, "simulation is not reproducible"

    # Round trip through the CSV reader.
    with tempfile.TemporaryDirectory() as d:
        path = pathlib.Path(d) / "sample.csv"
        rows = "\n".join(f"{a!r},{b!r},{c!r}" for a, b, c in zip(x1, x2, y))
        path.write_text("x1,x2,y\n" + rows + "\n")
        r1, r2, ry = cr.read_csv(str(path))
        assert ry == y

    tx1 = [0.25, 0.5, 0.75]
    tx2 = [0.5, 0.5, 0.5]
    fit = cr.fit(x1, x2, y, tx1, tx2)
    assert len(fit.trend) == len(y)
    assert all(v > 0 for v in fit.variance)
    nugget, nodes, weights = fit.variogram
    assert abs(nugget + sum(weights) - 1.0) < 1e-6
    print(fit, "H =", fit.trend_bandwidth)

    maps = fit.risk_map([2.0, 3.0], mode="conditional", b=100, seed=7)
    assert [m.threshold for m in maps] == [2.0, 3.0]
    for m in maps:
        assert len(m) == 3 and all(0.0 <= p <= 1.0 for p in m.prob)
    assert maps[0].prob == fit.risk_map([2.0], b=100, seed=7)[0].prob

    clamped, raw = cr.indicator_kriging(x1, x2, y, tx1, tx2, 2.0)
    assert all(0.0 <= p <= 1.0 for p in clamped) and len(raw) == 3

    try:
        cr.fit([0.0, 1.0, 0.0, 1.0], [0.0, 0.0, 1.0, 1.0], [1.0, 2.0, 3.0, math.nan])
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("NaN input accepted")

    try:
        cr.simulate("no-such-scenario")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown scenario accepted")

    print("python smoke test OK")


if __name__ == "__main__":
    main()
