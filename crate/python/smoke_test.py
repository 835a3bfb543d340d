#!/usr/bin/env python3
"""Smoke test for the dieudonne_py extension module.

Build the module first (see README):
    cargo build --release -p dieudonne-py
Then run:
    python3 python/smoke_test.py
The script locates the compiled cdylib in target/{release,debug} and
imports it under the proper module name via a symlink in a temp dir.
"""

import os
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def locate_library():
    names = ["libdieudonne_py.so", "libdieudonne_py.dylib", "dieudonne_py.dll"]
    for profile in ("release", "debug"):
        for name in names:
            cand = ROOT / "target" / profile / name
            if cand.exists():
                return cand
    sys.exit(
        "dieudonne_py library not found; run `cargo build --release -p dieudonne-py` first"
    )


def import_module():
    lib = locate_library()
    tmp = tempfile.mkdtemp(prefix="dieudonne-py-")
    link = os.path.join(tmp, "dieudonne_py.so")
    os.symlink(lib, link)
    sys.path.insert(0, tmp)
    import dieudonne_py

    return dieudonne_py


def main():
    d = import_module()

    # fractions
    assert d.oort_invariant(6, 8) == "3/2"
    assert d.oort_invariant(5, 4) == "5/2"

    # classification of graded symmetric types
    c6 = d.classify_graded_symmetric(6)
    assert len(c6) == 2
    shown = sorted(str(t) for t in c6)
    assert "G_{1,1}^3" in shown

    # isogeny type algebra
    ghost = d.IsogenyType("G_{1,7} + G_{7,1}")
    assert ghost.is_self_dual()
    assert not ghost.decomposable_into_self_duals()
    assert ghost.height() == 16
    assert d.IsogenyType("G_{1,2}").dual() == d.IsogenyType("G_{2,1}")

    # local arithmetic
    assert d.hilbert_symbol(5, 1, 2, 5) == -1
    assert d.hilbert_symbol(5, 1, 1, 7) == 1
    assert not d.ternary_anisotropic(5, 1, [1, 1, 1])
    assert d.ternary_anisotropic(5, 1, [1, 5, 10])
    triple = d.search_anisotropic_triple(2, 5)
    assert len(triple) == 3

    # Newton slopes
    assert d.newton_slopes(5, 1, 16, [[0, 5], [1, 0]]) == ["1/2", "1/2"]
    assert d.newton_slopes(5, 1, 16, [[1, 0], [0, 5]]) == ["0/1", "1/1"]

    # the supersingular height-6 module and its skeleton
    ex = d.height6_example()
    assert ex["slopes"] == ["1/2"] * 6
    assert ex["skeleton_dim"] == 3
    assert ex["skeleton_anisotropic"] is True

    # octonions
    assert d.derivation_dimension("division") == 14
    assert d.derivation_dimension("split") == 14
    assert d.long_root_weights() == [-1, -1, 0, 0, 0, 1, 1]
    assert d.lambda2_ranks() == (14, 7)
    assert d.commutant_dims() == (1, 2)

    # ghosts
    assert d.ghost_dim("so3") == 2
    assert d.ghost_dim("so5") == 1
    assert d.ghost_dim("g2", 8) == 8

    # the two-window construction certificates
    tw = d.two_window_summary()
    assert tuple(tw["lengths"]) == (5, 2)
    assert min(tw["hodge_profile"]) >= 6
    assert tw["k_special_slopes"] == ["1/8"] * 16

    print("smoke test: OK")


if __name__ == "__main__":
    main()
