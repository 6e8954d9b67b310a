"""Catalog of constraint-algebra relations and their numerical checks.

Every bracket relation is stated distributionally as

    {Fam_A(x), Fam_B(y)} = (structure-tensor combination) . Fam_C(x) d(x,y)

and verified in smeared form: the left side is an exact lattice Poisson
bracket of two smeared functionals, the right side an independent direct
lattice sum of the density arrays against the product of test fields.

The catalog also fixes each relation's class:

    exact       LHS - RHS vanishes identically on the lattice and is
                asserted at machine precision.
    refinement  LHS - RHS carries an O(a^2) discrete-Leibniz defect and is
                checked to converge to zero at second order under lattice
                refinement instead.

Every bracket relation in the tables below turns out to be lattice-exact:
their derivations need only pointwise algebra, exact summation by parts,
and the commutativity of lattice shifts, never the product rule.  The
discrete-Leibniz defect appears only in the off-shell dependency
identities and in consistency brackets evaluated away from the
second-class surface, which is why those are handled by the refinement
harness (and are exactly zero for abelian modules, where every
structure-constant coefficient dies).

Relations live in two canonical systems: the full Dirac phase space
("full", all eight conjugate block pairs) and the gauge-fixed picture
("gf", pairs (A, pi(A)) and (beta, pi(beta)) with B, C eliminated through
the on-shell momentum map).

See docs/relations.md for the table in human-readable form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import (FAMILY_SHAPES, constraint_density, evaluate_constraint,
                          gauge_fixed_density, total_hamiltonian_functional)
from .lattice import (EPS3_PAIR, Lattice, _random_recipe, discrete_derivative,
                      fit_order, pair_index, pairs)
from .localpoly import evaluate_density, poisson_bracket, smear
from .phase import (CANONICAL_PAIRS, GAUGE_FIXED_PAIRS, PhasePoint,
                    make_phase_recipe, onshell_momenta)

__all__ = [
    "RELATIONS",
    "RelationResult",
    "check_algebra_relation",
    "relation_refinement",
    "fundamental_bracket_residuals",
    "consistency_residuals",
    "offshell_relations",
    "reduction_residual",
    "classification_table",
]

P3 = pairs(3)
PIDX3 = pair_index(3)
S3 = EPS3_PAIR


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _density(cm, name, system):
    if system == "gf":
        return gauge_fixed_density(cm, name)
    return constraint_density(cm, name)


def _array(cm, point, name, system):
    dens = _density(cm, name, system)
    return evaluate_density(dens, point.blocks, point.lattice)


def _vol_sum(lat, site_array):
    return float(lat.a ** 3 * np.sum(site_array))


def make_test(cm, shape, lattice, seed, mode_count=1):
    rng = np.random.default_rng(seed)
    return _random_recipe(rng, 3, shape, mode_count).realize(lattice)


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

def _rhs_prim1(cm, point, lat, tA, tB):
    acc = np.zeros(lat.shape)
    for i in range(3):
        for P in range(3):
            s = S3[i, P]
            if s:
                acc += s * np.einsum("a...,ab,b...->...", tA[P], cm.Q, tB[i])
    return _vol_sum(lat, acc)


def _rhs_prim2(cm, point, lat, tA, tB):
    acc = np.zeros(lat.shape)
    for k in range(3):
        for P in range(3):
            s = S3[k, P]
            if s:
                acc -= s * np.einsum("x...,xy,y...->...", tA[k], cm.qf, tB[P])
    return _vol_sum(lat, acc)


def _rhs_sc1(cm, point, lat, tA, tB):
    SH = _array(cm, point, "S(H)", "gf")
    acc = np.einsum("abc,Pa...,b...,Pc...->...", cm.f, tA, tB, SH)
    return _vol_sum(lat, acc)


def _rhs_sc2(cm, point, lat, tA, tB):
    SH = _array(cm, point, "S(H)", "gf")
    acc = -2.0 * np.einsum("x...,xby,Py...,Pb...->...", tA, cm.act, tB, SH)
    return _vol_sum(lat, acc)


def _rhs_sc3(cm, point, lat, tA, tB):
    SB = _array(cm, point, "S(BCbeta)", "gf")
    acc = np.einsum("cab,a...,b...,c...->...", cm.f, tA, tB, SB)
    return _vol_sum(lat, acc)


def _rhs_sc4(cm, point, lat, tA, tB):
    SG = _array(cm, point, "S(G)", "gf")
    acc = np.einsum("x...,xay,a...,y...->...", tA, cm.act, tB, SG)
    return _vol_sum(lat, acc)


def _rhs_sc5(cm, point, lat, tA, tB):
    SCB = _array(cm, point, "S(CB)", "gf")
    acc = np.einsum("Px...,xay,a...,Py...->...", tA, cm.actmix, tB, SCB)
    return _vol_sum(lat, acc)


def _rhs_zero(cm, point, lat, tA, tB):
    return 0.0


def _rhs_fc1(cm, point, lat, tA, tB):
    phiH = _array(cm, point, "phi(H)", "full")
    phiH_up = np.einsum("ca,la...->lc...", cm.Qinv, phiH)
    acc = -2.0 * np.einsum("x...,xcy,ly...,lc...->...",
                           tA, cm.actlow, tB, phiH_up)
    return _vol_sum(lat, acc)


def _rhs_fc2(cm, point, lat, tA, tB):
    phiG = _array(cm, point, "phi(G)", "full")
    acc = np.einsum("x...,xay,a...,y...->...", tA, cm.actmix, tB, phiG)
    return _vol_sum(lat, acc)


def _rhs_fc3(cm, point, lat, tA, tB):
    phiCB = _array(cm, point, "phi(CB)", "full")
    acc = np.einsum("kx...,xay,a...,ky...->...", tA, cm.actmix, tB, phiCB)
    return _vol_sum(lat, acc)


def _rhs_fc4(cm, point, lat, tA, tB):
    phiH = _array(cm, point, "phi(H)", "full")
    acc = np.einsum("cab,ia...,b...,ic...->...", cm.f, tA, tB, phiH)
    return _vol_sum(lat, acc)


def _rhs_fc5(cm, point, lat, tA, tB):
    phiB = _array(cm, point, "phi(BCbeta)", "full")
    acc = np.einsum("cab,a...,b...,c...->...", cm.f, tA, tB, phiB)
    return _vol_sum(lat, acc)


def _rhs_mixed1(cm, point, lat, tA, tB):
    chiB = _array(cm, point, "chi(B)", "full")
    acc = np.zeros(lat.shape)
    for i in range(3):
        for l in range(3):
            if l == i:
                continue
            Pil, sig = PIDX3[(i, l)]
            acc -= sig * np.einsum("cae,a...,e...,c...->...",
                                   cm.f, tA[i], tB[l], chiB[Pil])
    return _vol_sum(lat, acc)


def _rhs_mixed2(cm, point, lat, tA, tB):
    chiC = _array(cm, point, "chi(C)", "full")
    acc = 2.0 * np.einsum("x...,xey,le...,ly...->...",
                          tA, cm.actmix, tB, chiC)
    return _vol_sum(lat, acc)


def _rhs_mixed3(cm, point, lat, tA, tB):
    chiB = _array(cm, point, "chi(B)", "full")
    acc = -2.0 * np.einsum("x...,xey,Py...,Pe...->...", tA, cm.actQ, tB, chiB)
    return _vol_sum(lat, acc)


def _rhs_mixed4(cm, point, lat, tA, tB):
    chibe = _array(cm, point, "chi(beta)", "full")
    chibe_up = np.einsum("xy,Py...->Px...", cm.qfinv, chibe)
    acc = np.zeros(lat.shape)
    for k in range(3):
        for l in range(3):
            if l == k:
                continue
            Plk, sig = PIDX3[(l, k)]
            acc += sig * np.einsum("xay,x...,a...,y...->...",
                                   cm.actlow, tA[k], tB[l], chibe_up[Plk])
    return _vol_sum(lat, acc)


def _rhs_mixed5(cm, point, lat, tA, tB):
    chiB = _array(cm, point, "chi(B)", "full")
    acc = np.zeros(lat.shape)
    for k in range(3):
        for l in range(3):
            if l == k:
                continue
            Plk, sig = PIDX3[(l, k)]
            acc -= sig * np.einsum("xey,x...,y...,e...->...",
                                   cm.actQ, tA[k], tB[l], chiB[Plk])
    return _vol_sum(lat, acc)


def _rhs_mixed6(cm, point, lat, tA, tB):
    chiA = _array(cm, point, "chi(A)", "full")
    acc = np.einsum("cae,a...,le...,lc...->...", cm.f, tA, tB, chiA)
    return _vol_sum(lat, acc)


def _rhs_mixed7(cm, point, lat, tA, tB):
    chibe = _array(cm, point, "chi(beta)", "full")
    acc = np.einsum("a...,xay,Py...,Px...->...", tA, cm.act, tB, chibe)
    return _vol_sum(lat, acc)


def _rhs_mixed8(cm, point, lat, tA, tB):
    chiC = _array(cm, point, "chi(C)", "full")
    acc = np.einsum("a...,xay,ly...,lx...->...", tA, cm.act, tB, chiC)
    return _vol_sum(lat, acc)


def _rhs_mixed9(cm, point, lat, tA, tB):
    chiB = _array(cm, point, "chi(B)", "full")
    acc = np.einsum("a...,cae,Pe...,Pc...->...", tA, cm.f, tB, chiB)
    return _vol_sum(lat, acc)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelationSpec:
    rid: str
    system: str
    famA: str
    famB: str
    cls: str
    rhs: callable
    note: str


RELATIONS = {}


def _rel(rid, system, famA, famB, cls, rhs, note):
    RELATIONS[rid] = RelationSpec(rid, system, famA, famB, cls, rhs, note)


_rel("prim1", "full", "P(B)_jk", "P(A)_i", "exact", _rhs_prim1,
     "{P(B)_a^{jk}, P(A)_b^i} = eps^{ijk} Q_ab d")
_rel("prim2", "full", "P(C)_k", "P(beta)_jk", "exact", _rhs_prim2,
     "{P(C)_al^k, P(beta)_be^{ij}} = -eps^{ijk} q_{al be} d")

_rel("sc1", "gf", "S(H)", "S(BCbeta)", "exact", _rhs_sc1,
     "{S(H)^a_{ij}, S(BCb)_b} = f^a_{bc} S(H)^c_{ij} d")
_rel("sc2", "gf", "S(G)", "S(CB)", "exact", _rhs_sc2,
     "{S(G)^al, S(CB)_{de ij}} = -2 act^al_{b de} S(H)^b_{ij} d")
_rel("sc3", "gf", "S(BCbeta)", "S(BCbeta)", "exact", _rhs_sc3,
     "{S(BCb)_a, S(BCb)_b} = f^c_{ab} S(BCb)_c d")
_rel("sc4", "gf", "S(G)", "S(BCbeta)", "exact", _rhs_sc4,
     "{S(G)^al, S(BCb)_a} = act^al_{a be} S(G)^be d")
_rel("sc5", "gf", "S(CB)", "S(BCbeta)", "exact", _rhs_sc5,
     "{S(CB)_{al ij}, S(BCb)_a} = act_{al a}^de S(CB)_{de ij} d")

_rel("sc0_HH", "gf", "S(H)", "S(H)", "exact", _rhs_zero, "{S(H), S(H)} = 0")
_rel("sc0_HG", "gf", "S(H)", "S(G)", "exact", _rhs_zero, "{S(H), S(G)} = 0")
_rel("sc0_GG", "gf", "S(G)", "S(G)", "exact", _rhs_zero, "{S(G), S(G)} = 0")
_rel("sc0_HCB", "gf", "S(H)", "S(CB)", "exact", _rhs_zero,
     "{S(H), S(CB)} = 0 (needs equivariance)")
_rel("sc0_CBCB", "gf", "S(CB)", "S(CB)", "exact", _rhs_zero,
     "{S(CB), S(CB)} = 0 (needs total antisymmetry of lowered phi)")

_rel("fc1", "full", "phi(G)", "phi(CB)", "exact", _rhs_fc1,
     "{phi(G)_al, phi(CB)_de^l} = -2 act_{al c de} phi(H)^{cl} d")
_rel("fc2", "full", "phi(G)", "phi(BCbeta)", "exact", _rhs_fc2,
     "{phi(G)_al, phi(BCb)_a} = act_{al a}^de phi(G)_de d")
_rel("fc3", "full", "phi(CB)", "phi(BCbeta)", "exact", _rhs_fc3,
     "{phi(CB)_al^k, phi(BCb)_a} = act_{al a}^de phi(CB)_de^k d")
_rel("fc4", "full", "phi(H)", "phi(BCbeta)", "exact", _rhs_fc4,
     "{phi(H)_a^i, phi(BCb)_b} = f^c_{ab} phi(H)_c^i d")
_rel("fc5", "full", "phi(BCbeta)", "phi(BCbeta)", "exact", _rhs_fc5,
     "{phi(BCb)_a, phi(BCb)_b} = f^c_{ab} phi(BCb)_c d")

_rel("mixed1", "full", "phi(H)", "chi(A)", "exact", _rhs_mixed1,
     "{phi(H)_a^i, chi(A)_e^l} = -f^c_{ae} chi(B)_c^{il} d")
_rel("mixed2", "full", "phi(G)", "chi(A)", "exact", _rhs_mixed2,
     "{phi(G)_al, chi(A)_e^l} = 2 act_{al e}^de chi(C)_de^l d")
_rel("mixed3", "full", "phi(G)", "chi(beta)", "exact", _rhs_mixed3,
     "{phi(G)_al, chi(beta)_ga^{jk}} = -2 act_al^e_ga chi(B)_e^{jk} d")
_rel("mixed4", "full", "phi(CB)", "chi(A)", "exact", _rhs_mixed4,
     "{phi(CB)_al^k, chi(A)_a^l} = act_{al a ga} chi(beta)^{ga lk} d")
_rel("mixed5", "full", "phi(CB)", "chi(C)", "exact", _rhs_mixed5,
     "{phi(CB)_al^k, chi(C)_de^l} = -act_al^e_de chi(B)_e^{lk} d")
_rel("mixed6", "full", "phi(BCbeta)", "chi(A)", "exact", _rhs_mixed6,
     "{phi(BCb)_a, chi(A)_e^l} = f^c_{ae} chi(A)_c^l d")
_rel("mixed7", "full", "phi(BCbeta)", "chi(beta)", "exact", _rhs_mixed7,
     "{phi(BCb)_a, chi(beta)_ga^{jk}} = act^de_{a ga} chi(beta)_de^{jk} d")
_rel("mixed8", "full", "phi(BCbeta)", "chi(C)", "exact", _rhs_mixed8,
     "{phi(BCb)_a, chi(C)_de^l} = act^ga_{a de} chi(C)_ga^l d")
_rel("mixed9", "full", "phi(BCbeta)", "chi(B)", "exact", _rhs_mixed9,
     "{phi(BCb)_a, chi(B)_e^{jk}} = f^c_{ae} chi(B)_c^{jk} d")


PRIMARY_RELATIONS = ("prim1", "prim2")
SECONDARY_RELATIONS = tuple(f"sc{i}" for i in range(1, 6))
FIRSTCLASS_RELATIONS = tuple(f"fc{i}" for i in range(1, 6))
MIXED_RELATIONS = tuple(f"mixed{i}" for i in range(1, 10))
ZERO_RELATIONS = ("sc0_HH", "sc0_HG", "sc0_GG", "sc0_HCB", "sc0_CBCB")


def classification_table() -> list:
    """(relation id, class, statement) for every cataloged relation."""
    return [(r.rid, r.cls, r.note) for r in RELATIONS.values()]


@dataclass
class RelationResult:
    rid: str
    lhs: float
    rhs: float
    residual: float
    cls: str
    scale: float


def check_algebra_relation(cm, rel_id: str, point: PhasePoint, seed: int = 0,
                           mode_count: int = 1) -> RelationResult:
    """Evaluate one relation at a phase point with smooth smearings."""
    if rel_id not in RELATIONS:
        raise KeyError(f"unknown relation id {rel_id!r}")
    rel = RELATIONS[rel_id]
    lat = point.lattice
    shapes = FAMILY_SHAPES(cm)
    tA = make_test(cm, shapes[rel.famA], lat, seed=seed * 7919 + 11,
                   mode_count=mode_count)
    tB = make_test(cm, shapes[rel.famB], lat, seed=seed * 7919 + 23,
                   mode_count=mode_count)
    pairs_ = GAUGE_FIXED_PAIRS if rel.system == "gf" else CANONICAL_PAIRS
    densA = _density(cm, rel.famA, rel.system)
    densB = _density(cm, rel.famB, rel.system)
    fnA = smear(densA, tA, lat)
    fnB = smear(densB, tB, lat)
    gA = fnA.gradient(point.blocks)
    gB = fnB.gradient(point.blocks)
    lhs = 0.0
    scale = 1.0
    for qb, pb in pairs_:
        lhs += float(np.sum(gA[qb] * gB[pb]) - np.sum(gA[pb] * gB[qb]))
        scale += float(np.sum(np.abs(gA[qb] * gB[pb])) +
                       np.sum(np.abs(gA[pb] * gB[qb])))
    lhs /= lat.a ** 3
    scale /= lat.a ** 3
    rhs = rel.rhs(cm, point, lat, tA, tB)
    return RelationResult(rid=rel_id, lhs=lhs, rhs=rhs,
                          residual=abs(lhs - rhs), cls=rel.cls, scale=scale)


def relation_refinement(cm, rel_id: str, n_list, seed: int = 0,
                        extent: float = 1.0, mode_count: int = 1):
    """Residual ladder of a relation over resolutions at fixed physical box."""
    recipe = make_phase_recipe(cm, mode_count, seed=seed * 131 + 5, rule="random")
    residuals, spacings = [], []
    for n in n_list:
        lat = Lattice(D=3, n=n, a=extent / n)
        point = recipe.realize_with(cm, lat)
        res = check_algebra_relation(cm, rel_id, point, seed=seed,
                                     mode_count=mode_count)
        residuals.append(res.residual)
        spacings.append(lat.a)
    return {
        "relation": rel_id,
        "n": list(n_list),
        "residuals": residuals,
        "order": fit_order(spacings, residuals),
    }


# ---------------------------------------------------------------------------
# fundamental brackets
# ---------------------------------------------------------------------------

def fundamental_bracket_residuals(cm, point: PhasePoint, seed: int = 0) -> dict:
    """Reproduce the fundamental PB table: {q[f], p[g]} = a^3 sum f.g,
    all cross-block brackets zero."""
    lat = point.lattice
    rng = np.random.default_rng(seed)
    shapes = {name: point.blocks[name].shape[:-3] for name, _ in CANONICAL_PAIRS}
    shapes.update({p_: point.blocks[p_].shape[:-3] for _, p_ in CANONICAL_PAIRS})
    fns = {}
    for qb, pb in CANONICAL_PAIRS:
        for name in (qb, pb):
            t = _random_recipe(rng, 3, point.blocks[name].shape[:-3], 1).realize(lat)
            dens = _mono_density(name, point.blocks[name].shape[:-3])
            fns[name] = (smear(dens, t, lat), t)
    worst_pair = 0.0
    worst_zero = 0.0
    for qb, pb in CANONICAL_PAIRS:
        fq, tq = fns[qb]
        fp, tp = fns[pb]
        val = poisson_bracket(fq, fp, point.blocks, CANONICAL_PAIRS)
        expect = _vol_sum(lat, np.sum(tq * tp, axis=tuple(range(tq.ndim - 3))))
        worst_pair = max(worst_pair, abs(val - expect))
    names = [n for pr in CANONICAL_PAIRS for n in pr]
    for i, na in enumerate(names):
        for nb in names[i + 1:]:
            if (na, nb) in CANONICAL_PAIRS or (nb, na) in CANONICAL_PAIRS:
                continue
            val = poisson_bracket(fns[na][0], fns[nb][0], point.blocks,
                                  CANONICAL_PAIRS)
            worst_zero = max(worst_zero, abs(val))
    return {"conjugate": worst_pair, "cross": worst_zero}


def _mono_density(block, comp_shape):
    from .localpoly import Density, term as _t
    d = Density(comp_shape)
    for fc in np.ndindex(*comp_shape):
        d.add(fc, [_t(1.0, (block, fc))])
    return d


# ---------------------------------------------------------------------------
# consistency conditions
# ---------------------------------------------------------------------------

_TEMPORAL_ROWS = (
    ("P(B)_0i", "phi(H)", "S(H)_dual"),
    ("P(C)_0", "phi(G)", "S(G)_low"),
    ("P(beta)_0i", "phi(CB)", "S(CB)_dual"),
    ("P(A)_0", "phi(BCbeta)", "S(BCbeta)"),
)

_SPATIAL_ROWS = ("chi(B)", "chi(C)", "chi(A)", "chi(beta)")


def _secondary_dual(cm, point, kind):
    """Epsilon-dualized secondary density matching each temporal primary."""
    if kind == "S(H)_dual":
        arr = _array(cm, point, "S(H)_low", "full")
        out = np.zeros((3, cm.p) + point.lattice.shape)
        for i in range(3):
            for P in range(3):
                if S3[i, P]:
                    out[i] += S3[i, P] * arr[P]
        return out
    if kind == "S(CB)_dual":
        arr = _array(cm, point, "S(CB)", "full")
        out = np.zeros((3, cm.q) + point.lattice.shape)
        for k in range(3):
            for P in range(3):
                if S3[k, P]:
                    out[k] += S3[k, P] * arr[P]
        return out
    return _array(cm, point, kind, "full")


def consistency_residuals(cm, point: PhasePoint, lamA0=None, lamB0=None,
                          lamC0=None, lambe0=None, seed: int = 0) -> list:
    """Rows (label, residual) for every primary-constraint consistency bracket.

    Temporal primaries: {P[f], H_T} equals the first-class smearing exactly,
    and equals the secondary-constraint smearing wherever the second-class
    constraints vanish (in particular at on-shell points).  Spatial
    primaries: {chi[g], H_T} is an exact linear combination of second-class
    values, hence vanishes at on-shell points; the raw bracket is reported.
    Secondary rows report the raw bracket value {S[f], H_T} (identically
    zero for abelian modules).
    """
    lat = point.lattice
    ht = total_hamiltonian_functional(cm, lat, lamA0, lamB0, lamC0, lambe0)
    shapes = FAMILY_SHAPES(cm)
    rows = []
    fam_offset = {fam: 101 * (i + 1) for i, fam in enumerate(
        [r[0] for r in _TEMPORAL_ROWS] + list(_SPATIAL_ROWS)
        + ["S(H)", "S(G)", "S(CB)", "S(BCbeta)"])}
    for fam, phi_fam, sec_kind in _TEMPORAL_ROWS:
        t = make_test(cm, shapes[fam], lat, seed=seed * 9176 + fam_offset[fam])
        fn = smear(constraint_density(cm, fam), t, lat)
        br = poisson_bracket(fn, ht, point.blocks, CANONICAL_PAIRS)
        phi_arr = evaluate_constraint(cm, phi_fam, point)
        phi_val = _vol_sum(lat, np.sum(
            t * phi_arr, axis=tuple(range(t.ndim - 3))))
        sec_arr = _secondary_dual(cm, point, sec_kind)
        sec_val = _vol_sum(lat, np.sum(
            t * sec_arr, axis=tuple(range(t.ndim - 3))))
        rows.append((f"{fam} vs {phi_fam}", abs(br - phi_val)))
        rows.append((f"{fam} vs secondary", abs(br - sec_val)))
    for fam in _SPATIAL_ROWS:
        t = make_test(cm, shapes[fam], lat, seed=seed * 9176 + fam_offset[fam])
        fn = smear(constraint_density(cm, fam), t, lat)
        br = poisson_bracket(fn, ht, point.blocks, CANONICAL_PAIRS)
        rows.append((f"{fam} preservation", abs(br)))
    for fam in ("S(H)", "S(G)", "S(CB)", "S(BCbeta)"):
        t = make_test(cm, shapes[fam], lat, seed=seed * 9176 + fam_offset[fam])
        fn = smear(constraint_density(cm, fam), t, lat)
        br = poisson_bracket(fn, ht, point.blocks, CANONICAL_PAIRS)
        rows.append((f"{fam} preservation (weak)", abs(br)))
    return rows


# ---------------------------------------------------------------------------
# off-shell dependencies of the first-class constraints
# ---------------------------------------------------------------------------

def _spatial_F(cm, point):
    lat = point.lattice
    A = point.blocks["A"]
    out = np.zeros((3, cm.p) + lat.shape)
    for P, (j, k) in enumerate(P3):
        out[P] = (discrete_derivative(A[k], j, lat)
                  - discrete_derivative(A[j], k, lat)
                  + np.einsum("abc,b...,c...->a...", cm.f, A[j], A[k]))
    return out


def _spatial_T(cm, point):
    lat = point.lattice
    A, C = point.blocks["A"], point.blocks["C"]
    out = np.zeros((3, cm.q) + lat.shape)
    for P, (j, k) in enumerate(P3):
        out[P] = (discrete_derivative(C[k], j, lat)
                  - discrete_derivative(C[j], k, lat))
        if cm.q:
            out[P] += np.einsum("xay,a...,y...->x...", cm.act, A[j], C[k])
            out[P] -= np.einsum("xay,a...,y...->x...", cm.act, A[k], C[j])
    return out


def _cov_div_g_low(cm, point, field):
    """sum_i nabla_i X_a^i for a lowered-index (3, p) density array."""
    lat = point.lattice
    A = point.blocks["A"]
    out = np.zeros((cm.p,) + lat.shape)
    for i in range(3):
        out += discrete_derivative(field[i], i, lat)
        out += np.einsum("cab,b...,c...->a...", cm.f, A[i], field[i])
    return out


def _cov_div_h_low(cm, point, field):
    """sum_k nabla^act_k X_al^k for a lowered-index (3, q) density array."""
    lat = point.lattice
    A = point.blocks["A"]
    out = np.zeros((cm.q,) + lat.shape)
    for k in range(3):
        out += discrete_derivative(field[k], k, lat)
        if cm.q:
            up = np.einsum("xy,y...->x...", cm.qfinv, field[k])
            out += np.einsum("xay,a...,y...->x...", cm.actlow, A[k], up)
    return out


def offshell_relations(cm, point: PhasePoint) -> dict:
    """Residuals of the two off-shell dependency identities.

    Each identity pairs a divergence of first-class densities (plus
    second-class tails) against half the lambda=0 component of the
    corresponding Bianchi identity; both sides vanish in the continuum, and
    the difference vanishes exactly for abelian modules and at O(a^2)
    otherwise.
    """
    lat = point.lattice
    A = point.blocks["A"]
    be = point.blocks["be"]
    C = point.blocks["C"]
    B = point.blocks["B"]
    F3 = _spatial_F(cm, point)
    F3_low = np.einsum("ab,Pb...->Pa...", cm.Q, F3)
    chiB = evaluate_constraint(cm, "chi(B)", point)
    phiH = evaluate_constraint(cm, "phi(H)", point)
    phiG = evaluate_constraint(cm, "phi(G)", point)

    # first dependency (g sector)
    lhs_a = _cov_div_g_low(cm, point, phiH)
    if cm.q:
        lhs_a += 0.5 * np.einsum("ga,g...->a...", cm.dup, phiG)
        mix1 = np.einsum("ga,ged->aed", cm.dup, cm.actQ)
        for P in range(3):
            lhs_a += np.einsum("aed,d...,e...->a...", mix1, be[P], chiB[P])
    for P in range(3):
        lhs_a += np.einsum("cab,b...,c...->a...", cm.f, F3[P], chiB[P])
    rhs_a = np.zeros((cm.p,) + lat.shape)
    for i in range(3):
        for P in range(3):
            s = S3[i, P]
            if not s:
                continue
            rhs_a += s * (discrete_derivative(F3_low[P], i, lat)
                          + np.einsum("abc,b...,c...->a...", cm.flow, A[i], F3[P]))

    out = {
        "ra_residual": float(np.max(np.abs(lhs_a - rhs_a))),
        "ra_bianchi_norm": float(np.max(np.abs(rhs_a))),
    }

    if cm.q == 0:
        out["rb_residual"] = 0.0
        out["rb_bianchi_norm"] = 0.0
        return out

    T3 = _spatial_T(cm, point)
    T3_low = np.einsum("xy,Py...->Px...", cm.qf, T3)
    SH = evaluate_constraint(cm, "S(H)", point)
    phiCB = evaluate_constraint(cm, "phi(CB)", point)
    phiBCb = evaluate_constraint(cm, "phi(BCbeta)", point)
    chiC = evaluate_constraint(cm, "chi(C)", point)
    chibe = evaluate_constraint(cm, "chi(beta)", point)

    lhs_b = _cov_div_h_low(cm, point, phiCB)
    lhs_b += np.einsum("xa,a...->x...", cm.del_, phiBCb)
    chibe_up = np.einsum("xy,Py...->Px...", cm.qfinv, chibe)
    for P in range(3):
        lhs_b += np.einsum("xby,b...,y...->x...", cm.actlow, F3[P], chibe_up[P])
        lhs_b -= np.einsum("xa,ead,d...,e...->x...", cm.del_, cm.f, B[P], chiB[P])
        lhs_b -= np.einsum("gxb,b...,g...->x...", cm.phi, be[P], chibe[P])
    for k in range(3):
        lhs_b -= np.einsum("gxd,d...,g...->x...", cm.phi, C[k], chiC[k])
    for k in range(3):
        for m in range(3):
            if m == k:
                continue
            Pmk, sig = PIDX3[(m, k)]
            gradC = (discrete_derivative(C[m], k, lat)
                     + np.einsum("day,a...,y...->d...", cm.act, A[k], C[m]))
            lhs_b += sig * np.einsum("xed,d...,e...->x...",
                                     cm.actQ, gradC, chiB[Pmk])
            covchi = (discrete_derivative(chiB[Pmk], k, lat)
                      + np.einsum("ceb,b...,c...->e...", cm.f, A[k], chiB[Pmk]))
            lhs_b += sig * np.einsum("xed,d...,e...->x...",
                                     cm.actQ, C[m], covchi)
    for k in range(3):
        for P in range(3):
            s = S3[k, P]
            if s:
                lhs_b -= s * np.einsum("xbg,b...,g...->x...",
                                       cm.actlow, SH[P], C[k])

    rhs_b = np.zeros((cm.q,) + lat.shape)
    for i in range(3):
        for P in range(3):
            s = S3[i, P]
            if not s:
                continue
            up = T3[P]
            rhs_b += s * (discrete_derivative(T3_low[P], i, lat)
                          + np.einsum("xay,a...,y...->x...", cm.actlow, A[i], up))
            rhs_b -= s * np.einsum("xbg,b...,g...->x...",
                                   cm.actlow, F3[P], C[i])
    out["rb_residual"] = float(np.max(np.abs(lhs_b - rhs_b)))
    out["rb_bianchi_norm"] = float(np.max(np.abs(rhs_b)))
    return out


def offshell_refinement(cm, n_list, seed: int = 0, extent: float = 1.0,
                        mode_count: int = 1) -> dict:
    recipe = make_phase_recipe(cm, mode_count, seed=seed * 433 + 7, rule="random")
    res_a, res_b, norm_a, norm_b, spac = [], [], [], [], []
    for n in n_list:
        lat = Lattice(D=3, n=n, a=extent / n)
        point = recipe.realize_with(cm, lat)
        out = offshell_relations(cm, point)
        res_a.append(out["ra_residual"])
        res_b.append(out["rb_residual"])
        norm_a.append(out["ra_bianchi_norm"])
        norm_b.append(out["rb_bianchi_norm"])
        spac.append(lat.a)
    return {
        "n": list(n_list),
        "ra_residuals": res_a,
        "ra_order": fit_order(spac, res_a),
        "rb_residuals": res_b,
        "rb_order": fit_order(spac, res_b),
        "ra_bianchi_order": fit_order(spac, norm_a),
        "rb_bianchi_order": fit_order(spac, norm_b),
    }


# ---------------------------------------------------------------------------
# gauge-fixed reduction of the first-class constraints
# ---------------------------------------------------------------------------

def reduction_residual(cm, point: PhasePoint) -> float:
    """Impose chi = 0 and compare each phi density to its Sigma dual.

    Setting the second-class constraints to zero (spatial momenta on shell)
    must reduce phi(H), phi(G), phi(CB), phi(BCbeta) componentwise to the
    epsilon-dualized secondary densities.
    """
    reduced = point.copy()
    reduced.blocks["pB"] = np.zeros_like(reduced.blocks["pB"])
    reduced.blocks["pC"] = np.zeros_like(reduced.blocks["pC"])
    reduced.blocks.update(onshell_momenta(cm, reduced.blocks, point.lattice))
    worst = 0.0
    for phi_fam, sec_kind in (("phi(H)", "S(H)_dual"), ("phi(G)", "S(G)_low"),
                              ("phi(CB)", "S(CB)_dual"),
                              ("phi(BCbeta)", "S(BCbeta)")):
        phi_arr = evaluate_constraint(cm, phi_fam, reduced)
        sec_arr = _secondary_dual(cm, reduced, sec_kind)
        if phi_arr.size:
            worst = max(worst, float(np.max(np.abs(phi_arr - sec_arr))))
    return worst
