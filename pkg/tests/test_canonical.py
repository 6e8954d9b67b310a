"""Phase space, constraint densities, Hamiltonians, multipliers."""

import numpy as np
import pytest

from bfcg.constraints import (canonical_hamiltonian, constraint_density,
                              determine_multipliers, evaluate_constraint,
                              regrouping_residual, total_hamiltonian,
                              total_hamiltonian_functional)
from bfcg.crossed_module import builtin_module
from bfcg.lattice import EPS3_PAIR, Lattice, pair_index, pairs, sample_smooth_fields
from bfcg.localpoly import poisson_bracket, smear
from bfcg.phase import (CANONICAL_PAIRS, dump_phase_point, load_phase_point,
                        phase_from_config, random_phase_point,
                        zero_phase_point)

CM = builtin_module("adjoint(su2)")
LAT = Lattice(D=3, n=4, a=0.25)
P3 = pairs(3)
PIDX = pair_index(3)
S3 = EPS3_PAIR

PRIMARY_FAMILIES = ("P(B)_0i", "P(B)_jk", "P(C)_0", "P(C)_k",
                    "P(A)_0", "P(A)_i", "P(beta)_0i", "P(beta)_jk")


def test_zero_point_zero_constraints():
    pt = zero_phase_point(CM, LAT)
    for fam in PRIMARY_FAMILIES + ("S(H)", "S(G)", "S(CB)", "S(BCbeta)",
                                   "phi(H)", "phi(G)", "phi(CB)", "phi(BCbeta)"):
        arr = evaluate_constraint(CM, fam, pt)
        assert np.max(np.abs(arr)) == 0.0 if arr.size else True


def test_onshell_point_kills_primaries():
    lat4 = Lattice(D=4, n=4, a=0.25)
    cfg = sample_smooth_fields(CM, lat4, 1, 13)
    pt = phase_from_config(CM, cfg, momentum_rule="on_shell")
    for fam in PRIMARY_FAMILIES:
        arr = evaluate_constraint(CM, fam, pt)
        assert np.max(np.abs(arr)) < 1e-13, fam


def test_random_momenta_violate_primaries():
    lat4 = Lattice(D=4, n=4, a=0.25)
    cfg = sample_smooth_fields(CM, lat4, 1, 13)
    pt = phase_from_config(CM, cfg, momentum_rule="random", seed=5)
    worst = max(np.max(np.abs(evaluate_constraint(CM, fam, pt)))
                for fam in PRIMARY_FAMILIES)
    assert worst > 1e-3


def test_phase_from_config_requires_D4():
    cfg3 = sample_smooth_fields(CM, LAT, 1, 1)
    with pytest.raises(ValueError):
        phase_from_config(CM, cfg3)


def test_phase_point_round_trip():
    pt = random_phase_point(CM, LAT, seed=3, rule="random")
    back = load_phase_point(dump_phase_point(pt, CM.name))
    for name, arr in pt.blocks.items():
        assert np.array_equal(back.blocks[name], arr)


# ---------------------------------------------------------------------------
# duplicate-implementation oracle for phi(H)
# ---------------------------------------------------------------------------

def _phiH_loop_oracle(cm, pt):
    """Plain-loop reimplementation of the phi(H) density."""
    lat = pt.lattice
    n, a = lat.n, lat.a
    A, be = pt.blocks["A"], pt.blocks["be"]
    pB, pC = pt.blocks["pB"], pt.blocks["pC"]
    out = np.zeros((3, cm.p) + lat.shape)

    def D(field, ax):
        return (np.roll(field, -1, axis=field.ndim - 3 + ax)
                - np.roll(field, 1, axis=field.ndim - 3 + ax)) / (2 * a)

    for i in range(3):
        for aa in range(cm.p):
            acc = np.zeros(lat.shape)
            for P, (j, k) in enumerate(P3):
                s = S3[i, P]
                if not s:
                    continue
                for b in range(cm.p):
                    acc += s * cm.Q[aa, b] * (D(A[k, b], j) - D(A[j, b], k))
                for b in range(cm.p):
                    for c in range(cm.p):
                        acc += s * cm.flow[aa, b, c] * A[j, b] * A[k, c]
                for al in range(cm.q):
                    acc -= s * cm.dlow[al, aa] * be[P, al]
            for j in range(3):
                if j == i:
                    continue
                P, sig = PIDX[(i, j)]
                acc -= sig * D(pB[P, aa], j)
                for c in range(cm.p):
                    for b in range(cm.p):
                        acc -= sig * cm.f[c, aa, b] * A[j, b] * pB[P, c]
            for al in range(cm.q):
                acc -= cm.dup[al, aa] * pC[i, al]
            out[i, aa] = acc
    return out


def test_phiH_matches_loop_oracle():
    pt = random_phase_point(CM, LAT, seed=17, rule="random")
    engine = evaluate_constraint(CM, "phi(H)", pt)
    oracle = _phiH_loop_oracle(CM, pt)
    assert np.max(np.abs(engine - oracle)) < 1e-12


def test_sigma_H_abelian_stencil():
    """Abelian S(H) is the plain discrete curl of A."""
    cm = builtin_module("abelian(2,2)")
    pt = random_phase_point(cm, LAT, seed=19, rule="random")
    arr = evaluate_constraint(cm, "S(H)", pt)
    A = pt.blocks["A"]
    for P, (j, k) in enumerate(P3):
        dA = ((np.roll(A[k], -1, axis=1 + j) - np.roll(A[k], 1, axis=1 + j))
              - (np.roll(A[j], -1, axis=1 + k) - np.roll(A[j], 1, axis=1 + k))) / (2 * LAT.a)
        assert np.max(np.abs(arr[P] - dA)) < 1e-13


# ---------------------------------------------------------------------------
# smearing and gradients on real densities
# ---------------------------------------------------------------------------

def test_smeared_PC0_gradient_is_test_field():
    dens = constraint_density(CM, "P(C)_0")
    rng = np.random.default_rng(3)
    t = rng.normal(size=(CM.q,) + LAT.shape)
    fn = smear(dens, t, LAT)
    pt = random_phase_point(CM, LAT, seed=23, rule="random")
    grad = fn.gradient(pt.blocks)
    assert np.max(np.abs(grad["pC0"] - LAT.a ** 3 * t)) < 1e-15
    for name, arr in grad.items():
        if name != "pC0":
            assert np.max(np.abs(arr)) == 0.0


def test_constraint_gradient_matches_finite_differences():
    dens = constraint_density(CM, "phi(BCbeta)")
    rng = np.random.default_rng(29)
    t = rng.normal(size=(CM.p,) + LAT.shape)
    fn = smear(dens, t, LAT)
    pt = random_phase_point(CM, LAT, seed=31, rule="random")
    grad = fn.gradient(pt.blocks)
    h = 1e-6
    worst = 0.0
    for block in ("A", "B", "C", "be", "pA", "pB", "pC", "pbe"):
        idx = (0, 1, 2, 1, 3) if pt.blocks[block].ndim == 5 else (1, 2, 1, 3)
        pt.blocks[block][idx] += h
        up = fn.value(pt.blocks)
        pt.blocks[block][idx] -= 2 * h
        dn = fn.value(pt.blocks)
        pt.blocks[block][idx] += h
        worst = max(worst, abs((up - dn) / (2 * h) - grad[block][idx]))
    assert worst < 1e-7


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

def test_Hc_zero_point():
    assert canonical_hamiltonian(CM, zero_phase_point(CM, LAT)) == 0.0


def test_Hc_vanishes_without_temporal_components():
    pt = random_phase_point(CM, LAT, seed=37, rule="on_shell")
    for name in ("A0", "B0", "C0", "be0"):
        pt.blocks[name] = np.zeros_like(pt.blocks[name])
    assert abs(canonical_hamiltonian(CM, pt)) < 1e-14


def test_HT_minus_Hc_is_multiplier_sum():
    pt = random_phase_point(CM, LAT, seed=41, rule="random")
    rng = np.random.default_rng(43)
    lam0 = dict(
        lamA0=rng.normal(size=(CM.p,) + LAT.shape),
        lamB0=rng.normal(size=(3, CM.p) + LAT.shape),
        lamC0=rng.normal(size=(CM.q,) + LAT.shape),
        lambe0=rng.normal(size=(3, CM.q) + LAT.shape),
    )
    ht = total_hamiltonian(CM, pt, **lam0)
    hc = canonical_hamiltonian(CM, pt)
    mset = determine_multipliers(CM, pt, **lam0)
    blocks = pt.blocks
    a3 = LAT.a ** 3

    def _pair_sum(lam, fam):
        dens = constraint_density(CM, fam)
        from bfcg.localpoly import evaluate_density
        arr = evaluate_density(dens, blocks, LAT)
        return float(np.sum(lam * arr))

    direct = 0.0
    direct += _pair_sum(mset.lamA0, "P(A)_0")
    direct += _pair_sum(mset.lamB0, "P(B)_0i")
    direct += _pair_sum(mset.lamC0, "P(C)_0")
    direct += _pair_sum(mset.lambe0, "P(beta)_0i")
    direct += _pair_sum(mset.lamA, "P(A)_i")
    direct += _pair_sum(mset.lamB, "P(B)_jk")
    direct += _pair_sum(mset.lamC, "P(C)_k")
    direct += _pair_sum(mset.lambe, "P(beta)_jk")
    assert abs((ht - hc) - a3 * direct) < 1e-11 * max(1.0, abs(ht))


def test_regrouping_identity_exact():
    """H_T equals the first-class regrouping to machine precision."""
    for name in ("adjoint(su2)", "vector_poincare", "abelian(2,2)"):
        cm = builtin_module(name)
        pt = random_phase_point(cm, LAT, seed=47, rule="random")
        rng = np.random.default_rng(53)
        lam0 = dict(
            lamA0=rng.normal(size=(cm.p,) + LAT.shape),
            lamB0=rng.normal(size=(3, cm.p) + LAT.shape),
            lamC0=rng.normal(size=(cm.q,) + LAT.shape),
            lambe0=rng.normal(size=(3, cm.q) + LAT.shape),
        )
        assert regrouping_residual(cm, pt, **lam0) < 1e-10


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------

def test_multipliers_zero_point():
    mset = determine_multipliers(CM, zero_phase_point(CM, LAT))
    for arr in (mset.lamA, mset.lamB, mset.lamC, mset.lambe):
        assert np.max(np.abs(arr)) == 0.0


def test_lamA_hand_formula_with_A_zero():
    """With A = 0, lam(A)^a_i = del_g^a beta^g_{0i} (abelian: zero)."""
    pt = random_phase_point(CM, LAT, seed=59, rule="random")
    pt.blocks["A"] = np.zeros_like(pt.blocks["A"])
    pt.blocks["A0"] = np.zeros_like(pt.blocks["A0"])
    mset = determine_multipliers(CM, pt)
    expect = np.einsum("ga,ig...->ia...", CM.del_, pt.blocks["be0"])
    assert np.max(np.abs(mset.lamA - expect)) < 1e-13
    cm_ab = builtin_module("abelian(2,2)")
    pt2 = random_phase_point(cm_ab, LAT, seed=61, rule="random")
    pt2.blocks["A"] = np.zeros_like(pt2.blocks["A"])
    pt2.blocks["A0"] = np.zeros_like(pt2.blocks["A0"])
    assert np.max(np.abs(determine_multipliers(cm_ab, pt2).lamA)) < 1e-13


def test_spatial_consistency_brackets_vanish_on_shell():
    pt = random_phase_point(CM, LAT, seed=67, rule="on_shell")
    ht = total_hamiltonian_functional(CM, LAT)
    rng = np.random.default_rng(71)
    for fam in ("chi(B)", "chi(C)", "chi(A)", "chi(beta)"):
        dens = constraint_density(CM, fam)
        shape = (3, CM.p) if fam in ("chi(B)", "chi(A)") else (3, CM.q)
        t = rng.normal(size=shape + LAT.shape)
        fn = smear(dens, t, LAT)
        val = poisson_bracket(fn, ht, pt.blocks, CANONICAL_PAIRS)
        assert abs(val) < 1e-10, fam
