"""Phase recipes and the gauge-fixed substitution machinery."""

import numpy as np

from bfcg.constraints import constraint_density, gauge_fixed_density
from bfcg.crossed_module import builtin_module
from bfcg.lattice import EPS3_PAIR, Lattice, pairs
from bfcg.localpoly import evaluate_density
from bfcg.phase import make_phase_recipe, onshell_momenta, random_phase_point

CM = builtin_module("adjoint(su2)")
LAT = Lattice(D=3, n=5, a=0.2)


def test_phase_recipe_resolution_consistent():
    rec = make_phase_recipe(CM, 1, seed=5, rule="random")
    p1 = rec.realize_with(CM, Lattice(D=3, n=6, a=0.2))
    p2 = rec.realize_with(CM, Lattice(D=3, n=12, a=0.1))
    assert np.max(np.abs(p1.blocks["A"] - p2.blocks["A"][..., ::2, ::2, ::2])) < 1e-12
    assert np.max(np.abs(p1.blocks["pbe"] - p2.blocks["pbe"][..., ::2, ::2, ::2])) < 1e-12


def test_onshell_recipe_is_onshell_at_every_resolution():
    rec = make_phase_recipe(CM, 1, seed=6, rule="on_shell")
    for n in (5, 10):
        pt = rec.realize_with(CM, Lattice(D=3, n=n, a=1.0 / n))
        for fam in ("P(A)_i", "P(beta)_jk", "P(B)_jk", "P(C)_k"):
            arr = evaluate_density(constraint_density(CM, fam), pt.blocks,
                                   pt.lattice)
            assert np.max(np.abs(arr)) < 1e-13, fam


def test_gauge_fixed_substitution_matches_manual():
    """gf densities equal the originals evaluated at substituted B, C."""
    pt = random_phase_point(CM, LAT, seed=9, rule="random")
    S3 = EPS3_PAIR
    P3 = pairs(3)
    # rebuild B, C from the momenta the way the gf map defines them
    sub = pt.copy()
    B = np.zeros_like(pt.blocks["B"])
    C = np.zeros_like(pt.blocks["C"])
    pA_up = np.einsum("ab,ib...->ia...", np.linalg.inv(CM.Q), pt.blocks["pA"])
    pbe_up = np.einsum("xy,Py...->Px...", np.linalg.inv(CM.qf), pt.blocks["pbe"])
    for P, (j, k) in enumerate(P3):
        d = 3 - j - k
        B[P] = S3[d, P] * pA_up[d]
    for m in range(3):
        Pm = next(P for P, pr in enumerate(P3) if m not in pr)
        C[m] = -S3[m, Pm] * pbe_up[Pm]
    sub.blocks["B"] = B
    sub.blocks["C"] = C
    for fam in ("S(CB)", "S(BCbeta)"):
        gf = evaluate_density(gauge_fixed_density(CM, fam), pt.blocks, LAT)
        manual = evaluate_density(constraint_density(CM, fam), sub.blocks, LAT)
        assert np.max(np.abs(gf - manual)) < 1e-12, fam


def test_onshell_momenta_invert_the_elimination():
    """on-shell momenta followed by the gf substitution return B and C."""
    pt = random_phase_point(CM, LAT, seed=11, rule="random")
    mom = onshell_momenta(CM, pt.blocks, LAT)
    S3 = EPS3_PAIR
    P3 = pairs(3)
    pA_up = np.einsum("ab,ib...->ia...", np.linalg.inv(CM.Q), mom["pA"])
    for P, (j, k) in enumerate(P3):
        d = 3 - j - k
        assert np.max(np.abs(S3[d, P] * pA_up[d] - pt.blocks["B"][P])) < 1e-12
