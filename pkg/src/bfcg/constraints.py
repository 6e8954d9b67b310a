"""Constraint densities, Hamiltonians, and Lagrange multipliers.

All densities are built as explicit term lists (see localpoly) from the
structure tensors of a crossed module, on the phase-space blocks of
phase.PhasePoint.  Spatial epsilon bookkeeping uses the stored-pair signs
s(i, P) = eps^{i j k} for P = (j, k), j < k.

Families (free components in brackets; Lie indices on momenta and on all
phi/chi densities are lowered):

  primary        P(B)^{0i} [i,a]   P(B)^{jk} [P,a]   P(C)^0 [al]  P(C)^k [k,al]
                 P(A)^0 [a]        P(A)^i [i,a]      P(beta)^{0i} [i,al]
                 P(beta)^{jk} [P,al]
  secondary      S(H)^a_{jk} [P,a] (upper a),  S(G)^al [al] (upper),
                 S(CB)_{al ij} [P,al],         S(BCbeta)_a [a]
  first class    phi(B) phi(C) phi(beta) phi(A) = temporal primaries, and

    phi(H)_a^i   = 1/2 eps^{ijk} S(H)_{a jk} - nabla_j P(B)_a^{ij}
                   - del^al_a P(C)_al^i
    phi(G)_al    = S(G)_al + 2 nabla^act_k P(C)_al^k
                   - beta^de_{mn} act_al^e_de P(B)_e^{mn}        (all pairs)
    phi(CB)_al^k = 1/2 eps^{ijk} S(CB)_{al ij} + nabla^act_j P(beta)_al^{jk}
                   - del_al^a P(A)_a^k - C^de_m act_al^e_de P(B)_e^{mk}
    phi(BCb)_a   = S(BCbeta)_a + nabla_i P(A)_a^i
                   + 1/2 f^e_{ad} B^d_{mn} P(B)_e^{mn}           (all pairs)
                   + C^g_k act^al_{ag} P(C)_al^k
                   + 1/2 beta^be_{jk} act^al_{a be} P(beta)_al^{jk}

  second class   chi(B), chi(C), chi(A), chi(beta) = spatial primaries.

The canonical Hamiltonian is the velocity-free form

  H_c = - sum_x [ 1/2 eps^{ijk} B_{a 0i} S(H)^a_{jk} + C_{al 0} S(G)^al
                  + 1/2 eps^{ijk} beta^al_{0k} S(CB)_{al ij}
                  + A^a_0 S(BCbeta)_a ] a^3,

and the determined multipliers (solving the spatial-primary consistency
conditions exactly on the lattice) are

  lam(A)^a_i     = nabla_i A^a_0 + del_g^a beta^g_{0i}
  lam(beta)^al_{ij} = nabla^act_[i beta^al_{0 j]} - act^al_{a be} A^a_0 beta^be_{ij}
  lam(C)^al_k    = 2 nabla^act_k C^al_0 + del^al_a B^a_{0k}
                   - act^al_{ag} A^a_0 C^g_k
  lam(B)^a_{ij}  = nabla_[i B^a_{0 j]} + 2 C_{g0} act^{g a}_de beta^de_{ij}
                   + act_g^a_de ( C^de_i beta^g_{0j} - C^de_j beta^g_{0i} )
                   - f^a_{bd} A^b_0 B^d_{ij}.

With these definitions H_T regroups exactly (a lattice identity, tested) as

  H_T = int [ lam(B)_{0i} phi(B)^i + lam(C)_0 phi(C) + lam(beta)_{0i} phi(beta)^i
              + lam(A)_0 phi(A) - B^a_{0i} phi(H)_a^i - C^al_0 phi(G)_al
              - beta^al_{0k} phi(CB)_al^k - A^a_0 phi(BCb)_a ].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import EPS3_PAIR, Lattice, pair_index, pairs
from .localpoly import (Density, LocalFunctional, evaluate_density, mul_terms,
                        scale_terms, smear, term)
from .phase import PhasePoint

__all__ = [
    "constraint_density",
    "FAMILY_SHAPES",
    "FAMILIES",
    "evaluate_constraint",
    "gauge_fixed_density",
    "hamiltonian_density",
    "canonical_hamiltonian",
    "MultiplierSet",
    "determine_multipliers",
    "total_hamiltonian_functional",
    "total_hamiltonian",
    "regrouping_residual",
]

P3 = pairs(3)
PIDX3 = pair_index(3)
S3 = EPS3_PAIR


def _dual(P: int) -> int:
    j, k = P3[P]
    return 3 - j - k


def _nz(x) -> bool:
    return abs(float(x)) > 1e-15


# ---------------------------------------------------------------------------
# primary constraints
# ---------------------------------------------------------------------------

def _dens_momentum(block, comp_shape):
    d = Density(comp_shape)
    for fc in np.ndindex(*comp_shape):
        d.add(fc, [term(1.0, (block, fc))])
    return d


def _dens_P_A(cm):
    d = Density((3, cm.p))
    for i in range(3):
        for a in range(cm.p):
            terms = [term(1.0, ("pA", (i, a)))]
            for P in range(3):
                s = S3[i, P]
                if not s:
                    continue
                for b in range(cm.p):
                    if _nz(cm.Q[a, b]):
                        terms.append(term(-s * cm.Q[a, b], ("B", (P, b))))
            d.add((i, a), terms)
    return d


def _dens_P_be(cm):
    d = Density((3, cm.q))
    for P in range(3):
        l = _dual(P)
        for al in range(cm.q):
            terms = [term(1.0, ("pbe", (P, al)))]
            for be in range(cm.q):
                c = S3[l, P] * cm.qf[al, be]
                if _nz(c):
                    terms.append(term(c, ("C", (l, be))))
            d.add((P, al), terms)
    return d


# ---------------------------------------------------------------------------
# secondary constraint densities
# ---------------------------------------------------------------------------

def _dens_S_H(cm, lowered: bool):
    """S(H)^a_{jk} (or its Q-lowered version) on stored pairs."""
    d = Density((3, cm.p))
    for P, (j, k) in enumerate(P3):
        for a in range(cm.p):
            terms = []
            if lowered:
                for b in range(cm.p):
                    if _nz(cm.Q[a, b]):
                        terms.append(term(cm.Q[a, b], ("A", (k, b), j)))
                        terms.append(term(-cm.Q[a, b], ("A", (j, b), k)))
                fabc = cm.flow
            else:
                terms.append(term(1.0, ("A", (k, a), j)))
                terms.append(term(-1.0, ("A", (j, a), k)))
                fabc = cm.f
            for b in range(cm.p):
                for c in range(cm.p):
                    if _nz(fabc[a, b, c]):
                        terms.append(term(fabc[a, b, c], ("A", (j, b)), ("A", (k, c))))
            dtens = cm.dlow if lowered else cm.del_
            for al in range(cm.q):
                if _nz(dtens[al, a]):
                    terms.append(term(-dtens[al, a], ("be", (P, al))))
            d.add((P, a), terms)
    return d


def _dens_S_G(cm, lowered: bool):
    """S(G)^al = eps^{ijk}(D_i beta_{jk} + A_i act beta_{jk}) (6-term form)."""
    d = Density((cm.q,))
    met = cm.qf if lowered else np.eye(cm.q)
    acts = cm.actlow if lowered else cm.act
    for al in range(cm.q):
        terms = []
        for i in range(3):
            for P in range(3):
                s = 2.0 * S3[i, P]
                if not s:
                    continue
                for be in range(cm.q):
                    if _nz(met[al, be]):
                        terms.append(term(s * met[al, be], ("be", (P, be), i)))
                for a in range(cm.p):
                    for ga in range(cm.q):
                        c = s * acts[al, a, ga]
                        if _nz(c):
                            terms.append(term(c, ("A", (i, a)), ("be", (P, ga))))
        d.add((al,), terms)
    return d


def _dens_S_CB(cm):
    """S(CB)_{al ij} = cov curl of C minus del . B, on stored pairs."""
    d = Density((3, cm.q))
    for P, (j, k) in enumerate(P3):
        for al in range(cm.q):
            terms = []
            for be in range(cm.q):
                if _nz(cm.qf[al, be]):
                    terms.append(term(cm.qf[al, be], ("C", (k, be), j)))
                    terms.append(term(-cm.qf[al, be], ("C", (j, be), k)))
            for a in range(cm.p):
                for ga in range(cm.q):
                    c = cm.actlow[al, a, ga]
                    if _nz(c):
                        terms.append(term(c, ("A", (j, a)), ("C", (k, ga))))
                        terms.append(term(-c, ("A", (k, a)), ("C", (j, ga))))
            for b in range(cm.p):
                if _nz(cm.dlow[al, b]):
                    terms.append(term(-cm.dlow[al, b], ("B", (P, b))))
            d.add((P, al), terms)
    return d


def _dens_S_BCb(cm):
    """S(BCbeta)_a = 1/2 eps^{ijk}(nabla_i B_{a jk} - C act beta)."""
    d = Density((cm.p,))
    for a in range(cm.p):
        terms = []
        for i in range(3):
            for P in range(3):
                s = S3[i, P]
                if not s:
                    continue
                for b in range(cm.p):
                    if _nz(cm.Q[a, b]):
                        terms.append(term(s * cm.Q[a, b], ("B", (P, b), i)))
                for b in range(cm.p):
                    for c in range(cm.p):
                        if _nz(cm.flow[a, b, c]):
                            terms.append(term(s * cm.flow[a, b, c],
                                              ("A", (i, b)), ("B", (P, c))))
                for ga in range(cm.q):
                    for be in range(cm.q):
                        c = -s * cm.actlow[ga, a, be]
                        if _nz(c):
                            terms.append(term(c, ("C", (i, ga)), ("be", (P, be))))
        d.add((a,), terms)
    return d


# ---------------------------------------------------------------------------
# first-class completions
# ---------------------------------------------------------------------------

def _dens_phi_H(cm):
    d = Density((3, cm.p))
    SHlow = _dens_S_H(cm, lowered=True)
    for i in range(3):
        for a in range(cm.p):
            terms = []
            for P in range(3):
                s = S3[i, P]
                if s:
                    terms.extend(scale_terms(SHlow.per_comp[(P, a)], s))
            for j in range(3):
                if j == i:
                    continue
                Pij, sig = PIDX3[(i, j)]
                terms.append(term(-sig, ("pB", (Pij, a), j)))
                for c in range(cm.p):
                    for b in range(cm.p):
                        cf = -sig * cm.f[c, a, b]
                        if _nz(cf):
                            terms.append(term(cf, ("A", (j, b)), ("pB", (Pij, c))))
            for al in range(cm.q):
                if _nz(cm.dup[al, a]):
                    terms.append(term(-cm.dup[al, a], ("pC", (i, al))))
            d.add((i, a), terms)
    return d


def _dens_phi_G(cm):
    d = Density((cm.q,))
    SGlow = _dens_S_G(cm, lowered=True)
    for al in range(cm.q):
        terms = list(SGlow.per_comp[(al,)])
        for k in range(3):
            terms.append(term(2.0, ("pC", (k, al), k)))
            for a in range(cm.p):
                for de in range(cm.q):
                    c = 2.0 * cm.actmix[al, a, de]
                    if _nz(c):
                        terms.append(term(c, ("A", (k, a)), ("pC", (k, de))))
        for P in range(3):
            for e in range(cm.p):
                for de in range(cm.q):
                    c = -2.0 * cm.actQ[al, e, de]
                    if _nz(c):
                        terms.append(term(c, ("be", (P, de)), ("pB", (P, e))))
        d.add((al,), terms)
    return d


def _dens_phi_CB(cm):
    d = Density((3, cm.q))
    SCB = _dens_S_CB(cm)
    for k in range(3):
        for al in range(cm.q):
            terms = []
            for P in range(3):
                s = S3[k, P]
                if s:
                    terms.extend(scale_terms(SCB.per_comp[(P, al)], s))
            for j in range(3):
                if j == k:
                    continue
                Pjk, sig = PIDX3[(j, k)]
                l = _dual(Pjk)
                terms.append(term(sig, ("pbe", (Pjk, al), j)))
                for be in range(cm.q):
                    c = sig * S3[l, Pjk] * cm.qf[al, be]
                    if _nz(c):
                        terms.append(term(c, ("C", (l, be), j)))
                for a in range(cm.p):
                    for de in range(cm.q):
                        c = sig * cm.actmix[al, a, de]
                        if _nz(c):
                            terms.append(term(c, ("A", (j, a)), ("pbe", (Pjk, de))))
                    for ga in range(cm.q):
                        c = sig * S3[l, Pjk] * cm.actlow[al, a, ga]
                        if _nz(c):
                            terms.append(term(c, ("A", (j, a)), ("C", (l, ga))))
            for a in range(cm.p):
                if _nz(cm.del_[al, a]):
                    terms.append(term(-cm.del_[al, a], ("pA", (k, a))))
            for P in range(3):
                s = S3[k, P]
                if not s:
                    continue
                for b in range(cm.p):
                    if _nz(cm.dlow[al, b]):
                        terms.append(term(s * cm.dlow[al, b], ("B", (P, b))))
            for m in range(3):
                if m == k:
                    continue
                Pmk, sig = PIDX3[(m, k)]
                for e in range(cm.p):
                    for de in range(cm.q):
                        c = -sig * cm.actQ[al, e, de]
                        if _nz(c):
                            terms.append(term(c, ("C", (m, de)), ("pB", (Pmk, e))))
            d.add((k, al), terms)
    return d


def _dens_phi_BCb(cm):
    d = Density((cm.p,))
    SBCb = _dens_S_BCb(cm)
    for a in range(cm.p):
        terms = list(SBCb.per_comp[(a,)])
        for i in range(3):
            terms.append(term(1.0, ("pA", (i, a), i)))
            for P in range(3):
                s = S3[i, P]
                if not s:
                    continue
                for b in range(cm.p):
                    if _nz(cm.Q[a, b]):
                        terms.append(term(-s * cm.Q[a, b], ("B", (P, b), i)))
            for c in range(cm.p):
                for b in range(cm.p):
                    if _nz(cm.f[c, a, b]):
                        terms.append(term(cm.f[c, a, b], ("A", (i, b)), ("pA", (i, c))))
                        for P in range(3):
                            s = S3[i, P]
                            if not s:
                                continue
                            for dd in range(cm.p):
                                cf = -cm.f[c, a, b] * s * cm.Q[c, dd]
                                if _nz(cf):
                                    terms.append(term(cf, ("A", (i, b)), ("B", (P, dd))))
        for P in range(3):
            for e in range(cm.p):
                for dd in range(cm.p):
                    if _nz(cm.f[e, a, dd]):
                        terms.append(term(cm.f[e, a, dd], ("B", (P, dd)), ("pB", (P, e))))
        for k in range(3):
            for al in range(cm.q):
                for ga in range(cm.q):
                    if _nz(cm.act[al, a, ga]):
                        terms.append(term(cm.act[al, a, ga],
                                          ("C", (k, ga)), ("pC", (k, al))))
        for P in range(3):
            l = _dual(P)
            for al in range(cm.q):
                for be in range(cm.q):
                    c = cm.act[al, a, be]
                    if not _nz(c):
                        continue
                    terms.append(term(c, ("be", (P, be)), ("pbe", (P, al))))
                    for ga in range(cm.q):
                        cf = c * S3[l, P] * cm.qf[al, ga]
                        if _nz(cf):
                            terms.append(term(cf, ("be", (P, be)), ("C", (l, ga))))
        d.add((a,), terms)
    return d


# ---------------------------------------------------------------------------
# family registry
# ---------------------------------------------------------------------------

def _build_family(cm, name: str) -> Density:
    p, q = cm.p, cm.q
    if name == "P(B)_0i" or name == "phi(B)":
        return _dens_momentum("pB0", (3, p))
    if name == "P(B)_jk" or name == "chi(B)":
        return _dens_momentum("pB", (3, p))
    if name == "P(C)_0" or name == "phi(C)":
        return _dens_momentum("pC0", (q,))
    if name == "P(C)_k" or name == "chi(C)":
        return _dens_momentum("pC", (3, q))
    if name == "P(A)_0" or name == "phi(A)":
        return _dens_momentum("pA0", (p,))
    if name == "P(A)_i" or name == "chi(A)":
        return _dens_P_A(cm)
    if name == "P(beta)_0i" or name == "phi(beta)":
        return _dens_momentum("pbe0", (3, q))
    if name == "P(beta)_jk" or name == "chi(beta)":
        return _dens_P_be(cm)
    if name == "S(H)":
        return _dens_S_H(cm, lowered=False)
    if name == "S(H)_low":
        return _dens_S_H(cm, lowered=True)
    if name == "S(G)":
        return _dens_S_G(cm, lowered=False)
    if name == "S(G)_low":
        return _dens_S_G(cm, lowered=True)
    if name == "S(CB)":
        return _dens_S_CB(cm)
    if name == "S(BCbeta)":
        return _dens_S_BCb(cm)
    if name == "phi(H)":
        return _dens_phi_H(cm)
    if name == "phi(G)":
        return _dens_phi_G(cm)
    if name == "phi(CB)":
        return _dens_phi_CB(cm)
    if name == "phi(BCbeta)":
        return _dens_phi_BCb(cm)
    raise KeyError(f"unknown constraint family {name!r}")


FAMILIES = (
    "P(B)_0i", "P(B)_jk", "P(C)_0", "P(C)_k", "P(A)_0", "P(A)_i",
    "P(beta)_0i", "P(beta)_jk",
    "S(H)", "S(G)", "S(CB)", "S(BCbeta)",
    "phi(B)", "phi(C)", "phi(beta)", "phi(A)",
    "phi(H)", "phi(G)", "phi(CB)", "phi(BCbeta)",
    "chi(B)", "chi(C)", "chi(A)", "chi(beta)",
)


def FAMILY_SHAPES(cm) -> dict:
    p, q = cm.p, cm.q
    return {
        "P(B)_0i": (3, p), "P(B)_jk": (3, p), "P(C)_0": (q,), "P(C)_k": (3, q),
        "P(A)_0": (p,), "P(A)_i": (3, p), "P(beta)_0i": (3, q),
        "P(beta)_jk": (3, q),
        "S(H)": (3, p), "S(G)": (q,), "S(CB)": (3, q), "S(BCbeta)": (p,),
        "phi(B)": (3, p), "phi(C)": (q,), "phi(beta)": (3, q), "phi(A)": (p,),
        "phi(H)": (3, p), "phi(G)": (q,), "phi(CB)": (3, q), "phi(BCbeta)": (p,),
        "chi(B)": (3, p), "chi(C)": (3, q), "chi(A)": (3, p), "chi(beta)": (3, q),
    }


def constraint_density(cm, name: str) -> Density:
    key = ("density", name)
    if key not in cm._cache:
        cm._cache[key] = _build_family(cm, name).compress()
    return cm._cache[key]


def evaluate_constraint(cm, family: str, point: PhasePoint) -> np.ndarray:
    """Per-site values of a constraint density at a phase point."""
    dens = constraint_density(cm, family)
    return evaluate_density(dens, point.blocks, point.lattice)


# ---------------------------------------------------------------------------
# gauge-fixed substitution (section-4 picture)
# ---------------------------------------------------------------------------

def gauge_fixed_density(cm, name: str) -> Density:
    """Rewrite a density on the (A, beta; pi(A), pi(beta)) phase space.

    The eliminated fields are B_{a jk} = eps_{jkl} pi(A)_a^l and
    C_{al k} = -1/2 eps_{kmn} pi(beta)_al^{mn}; upper-index occurrences pick
    up the inverse metrics.
    """
    key = ("gf_density", name)
    if key in cm._cache:
        return cm._cache[key]
    src = constraint_density(cm, name)
    out = Density(src.comp_shape)
    for fc, terms in src.items():
        new_terms = []
        for coeff, factors in terms:
            expanded = [(coeff, ())]
            for block, comp, dax in factors:
                subs = []
                if block == "B":
                    P, b = comp
                    dP = _dual(P)
                    for c in range(cm.p):
                        cf = S3[dP, P] * cm.Qinv[b, c]
                        if _nz(cf):
                            subs.append((cf, ("pA", (dP, c), dax)))
                elif block == "C":
                    m, ga = comp
                    Pm = next(Pi for Pi, pr in enumerate(P3) if m not in pr)
                    for de in range(cm.q):
                        cf = -S3[m, Pm] * cm.qfinv[ga, de]
                        if _nz(cf):
                            subs.append((cf, ("pbe", (Pm, de), dax)))
                else:
                    subs = [(1.0, (block, comp, dax))]
                expanded = [(c0 * cs, f0 + (fs,))
                            for c0, f0 in expanded for cs, fs in subs]
            new_terms.extend((c0, f0) for c0, f0 in expanded if _nz(c0))
        out.add(fc, new_terms)
    out.compress()
    cm._cache[key] = out
    return out


# ---------------------------------------------------------------------------
# Hamiltonians and multipliers
# ---------------------------------------------------------------------------

def hamiltonian_density(cm) -> Density:
    """Scalar density of the canonical (velocity-free) Hamiltonian H_c."""
    key = ("density", "H_c")
    if key in cm._cache:
        return cm._cache[key]
    d = Density(())
    SH = constraint_density(cm, "S(H)")
    SG = constraint_density(cm, "S(G)")
    SCB = constraint_density(cm, "S(CB)")
    SBCb = constraint_density(cm, "S(BCbeta)")
    terms = []
    for i in range(3):
        for P in range(3):
            s = S3[i, P]
            if not s:
                continue
            for a in range(cm.p):
                for b in range(cm.p):
                    c = -s * cm.Q[a, b]
                    if _nz(c):
                        terms.extend(mul_terms(
                            SH.per_comp[(P, a)], [term(1.0, ("B0", (i, b)))], c))
    for al in range(cm.q):
        for be in range(cm.q):
            c = -cm.qf[al, be]
            if _nz(c):
                terms.extend(mul_terms(
                    SG.per_comp[(al,)], [term(1.0, ("C0", (be,)))], c))
    for k in range(3):
        for P in range(3):
            s = S3[k, P]
            if not s:
                continue
            for al in range(cm.q):
                terms.extend(mul_terms(
                    SCB.per_comp[(P, al)], [term(1.0, ("be0", (k, al)))], -s))
    for a in range(cm.p):
        terms.extend(mul_terms(
            SBCb.per_comp[(a,)], [term(1.0, ("A0", (a,)))], -1.0))
    d.add((), terms)
    d.compress()
    cm._cache[key] = d
    return d


def canonical_hamiltonian(cm, point: PhasePoint) -> float:
    fn = smear(hamiltonian_density(cm), None, point.lattice)
    return fn.value(point.blocks)


def _dens_lam_A(cm):
    d = Density((3, cm.p))
    for i in range(3):
        for a in range(cm.p):
            terms = [term(1.0, ("A0", (a,), i))]
            for b in range(cm.p):
                for c in range(cm.p):
                    if _nz(cm.f[a, b, c]):
                        terms.append(term(cm.f[a, b, c], ("A", (i, b)), ("A0", (c,))))
            for ga in range(cm.q):
                if _nz(cm.del_[ga, a]):
                    terms.append(term(cm.del_[ga, a], ("be0", (i, ga))))
            d.add((i, a), terms)
    return d


def _dens_lam_be(cm):
    d = Density((3, cm.q))
    for P, (j, k) in enumerate(P3):
        for al in range(cm.q):
            terms = [term(1.0, ("be0", (k, al), j)), term(-1.0, ("be0", (j, al), k))]
            for a in range(cm.p):
                for ga in range(cm.q):
                    c = cm.act[al, a, ga]
                    if _nz(c):
                        terms.append(term(c, ("A", (j, a)), ("be0", (k, ga))))
                        terms.append(term(-c, ("A", (k, a)), ("be0", (j, ga))))
                for be in range(cm.q):
                    c = cm.act[al, a, be]
                    if _nz(c):
                        terms.append(term(-c, ("A0", (a,)), ("be", (P, be))))
            d.add((P, al), terms)
    return d


def _dens_lam_C(cm):
    d = Density((3, cm.q))
    for k in range(3):
        for al in range(cm.q):
            terms = [term(2.0, ("C0", (al,), k))]
            for a in range(cm.p):
                for ga in range(cm.q):
                    c = cm.act[al, a, ga]
                    if _nz(c):
                        terms.append(term(2.0 * c, ("A", (k, a)), ("C0", (ga,))))
                        terms.append(term(-c, ("A0", (a,)), ("C", (k, ga))))
                if _nz(cm.dup[al, a]):
                    terms.append(term(cm.dup[al, a], ("B0", (k, a))))
            d.add((k, al), terms)
    return d


def _dens_lam_B(cm):
    d = Density((3, cm.p))
    for P, (m, n) in enumerate(P3):
        for a in range(cm.p):
            terms = [term(1.0, ("B0", (n, a), m)), term(-1.0, ("B0", (m, a), n))]
            for b in range(cm.p):
                for c in range(cm.p):
                    if _nz(cm.f[a, b, c]):
                        terms.append(term(cm.f[a, b, c], ("A", (m, b)), ("B0", (n, c))))
                        terms.append(term(-cm.f[a, b, c], ("A", (n, b)), ("B0", (m, c))))
            for ep in range(cm.q):
                for de in range(cm.q):
                    c = 2.0 * cm.actQ[ep, a, de]
                    if _nz(c):
                        terms.append(term(c, ("C0", (ep,)), ("be", (P, de))))
            for ga in range(cm.q):
                for de in range(cm.q):
                    c = cm.actQ[ga, a, de]
                    if _nz(c):
                        terms.append(term(c, ("C", (m, de)), ("be0", (n, ga))))
                        terms.append(term(-c, ("C", (n, de)), ("be0", (m, ga))))
            for b in range(cm.p):
                for dd in range(cm.p):
                    if _nz(cm.f[a, b, dd]):
                        terms.append(term(-cm.f[a, b, dd], ("A0", (b,)), ("B", (P, dd))))
            d.add((P, a), terms)
    return d


_LAM_BUILDERS = {
    "A": (_dens_lam_A, "P(A)_i"),
    "beta": (_dens_lam_be, "P(beta)_jk"),
    "C": (_dens_lam_C, "P(C)_k"),
    "B": (_dens_lam_B, "P(B)_jk"),
}


def _lam_density(cm, which: str) -> Density:
    key = ("density", f"lam({which})")
    if key not in cm._cache:
        cm._cache[key] = _LAM_BUILDERS[which][0](cm).compress()
    return cm._cache[key]


@dataclass
class MultiplierSet:
    """Determined spatial multipliers plus free temporal components."""

    lamA: np.ndarray
    lamB: np.ndarray
    lamC: np.ndarray
    lambe: np.ndarray
    lamA0: np.ndarray
    lamB0: np.ndarray
    lamC0: np.ndarray
    lambe0: np.ndarray


def determine_multipliers(cm, point: PhasePoint, lamA0=None, lamB0=None,
                          lamC0=None, lambe0=None) -> MultiplierSet:
    """Fill the spatial multipliers from their closed forms.

    Temporal components are free inputs (default zero).
    """
    lat = point.lattice
    shape = lat.shape

    def _free(arr, comp):
        if arr is None:
            return np.zeros(comp + shape)
        arr = np.asarray(arr, dtype=float)
        if arr.shape != comp + shape:
            raise ValueError(f"free multiplier has shape {arr.shape}")
        return arr

    return MultiplierSet(
        lamA=evaluate_density(_lam_density(cm, "A"), point.blocks, lat),
        lamB=evaluate_density(_lam_density(cm, "B"), point.blocks, lat),
        lamC=evaluate_density(_lam_density(cm, "C"), point.blocks, lat),
        lambe=evaluate_density(_lam_density(cm, "beta"), point.blocks, lat),
        lamA0=_free(lamA0, (cm.p,)),
        lamB0=_free(lamB0, (3, cm.p)),
        lamC0=_free(lamC0, (cm.q,)),
        lambe0=_free(lambe0, (3, cm.q)),
    )


def total_hamiltonian_functional(cm, lattice: Lattice, lamA0=None, lamB0=None,
                                 lamC0=None, lambe0=None) -> LocalFunctional:
    """H_T = H_c + sum of multiplier terms as one local functional.

    Spatial multipliers are expanded symbolically (they are phase-space
    polynomials), so brackets with H_T see their field dependence exactly;
    temporal multipliers enter as fixed weight arrays.
    """
    entries = list(smear(hamiltonian_density(cm), None, lattice).entries)
    for which, (_, pfam) in _LAM_BUILDERS.items():
        lam = _lam_density(cm, which)
        pdens = constraint_density(cm, pfam)
        for fc, lterms in lam.items():
            prod = mul_terms(lterms, pdens.per_comp[fc])
            entries.extend((c, None, f) for c, f in prod)
    shape = lattice.shape
    p, q = cm.p, cm.q

    def _weight(arr, comp):
        if arr is None:
            return None
        arr = np.asarray(arr, dtype=float)
        if arr.shape == comp:
            arr = np.broadcast_to(
                arr.reshape(comp + (1, 1, 1)), comp + shape).copy()
        if arr.shape != comp + shape:
            raise ValueError(f"free multiplier has shape {arr.shape}")
        return arr

    lamA0 = _weight(lamA0, (p,))
    lamB0 = _weight(lamB0, (3, p))
    lamC0 = _weight(lamC0, (q,))
    lambe0 = _weight(lambe0, (3, q))
    if lamA0 is not None:
        for a in range(p):
            entries.append((1.0, lamA0[a], term(1.0, ("pA0", (a,)))[1]))
    if lamB0 is not None:
        for i in range(3):
            for a in range(p):
                entries.append((1.0, lamB0[i, a], term(1.0, ("pB0", (i, a)))[1]))
    if lamC0 is not None:
        for al in range(q):
            entries.append((1.0, lamC0[al], term(1.0, ("pC0", (al,)))[1]))
    if lambe0 is not None:
        for i in range(3):
            for al in range(q):
                entries.append((1.0, lambe0[i, al], term(1.0, ("pbe0", (i, al)))[1]))
    return LocalFunctional(lattice, entries)


def total_hamiltonian(cm, point: PhasePoint, lamA0=None, lamB0=None,
                      lamC0=None, lambe0=None) -> float:
    fn = total_hamiltonian_functional(cm, point.lattice, lamA0, lamB0,
                                      lamC0, lambe0)
    return fn.value(point.blocks)


def regrouping_residual(cm, point: PhasePoint, lamA0=None, lamB0=None,
                        lamC0=None, lambe0=None) -> float:
    """|H_T - (free-multiplier terms - temporal fields . first-class)|.

    This lattice identity ties together H_c, the determined multipliers and
    every first-class density; it holds to machine precision.
    """
    lat = point.lattice
    a3 = lat.a ** 3
    ht = total_hamiltonian(cm, point, lamA0, lamB0, lamC0, lambe0)
    blocks = point.blocks
    phiH = evaluate_constraint(cm, "phi(H)", point)
    phiG = evaluate_constraint(cm, "phi(G)", point)
    phiCB = evaluate_constraint(cm, "phi(CB)", point)
    phiBCb = evaluate_constraint(cm, "phi(BCbeta)", point)
    rhs = 0.0
    rhs -= float(np.sum(blocks["B0"] * phiH))
    rhs -= float(np.sum(blocks["C0"] * phiG))
    rhs -= float(np.sum(blocks["be0"] * phiCB))
    rhs -= float(np.sum(blocks["A0"] * phiBCb))

    def _w(arr, comp):
        if arr is None:
            return None
        arr = np.asarray(arr, dtype=float)
        if arr.shape == comp:
            arr = np.broadcast_to(arr.reshape(comp + (1, 1, 1)),
                                  comp + lat.shape)
        return arr

    wA = _w(lamA0, (cm.p,))
    if wA is not None:
        rhs += float(np.sum(wA * blocks["pA0"]))
    wB = _w(lamB0, (3, cm.p))
    if wB is not None:
        rhs += float(np.sum(wB * blocks["pB0"]))
    wC = _w(lamC0, (cm.q,))
    if wC is not None:
        rhs += float(np.sum(wC * blocks["pC0"]))
    wbe = _w(lambe0, (3, cm.q))
    if wbe is not None:
        rhs += float(np.sum(wbe * blocks["pbe0"]))
    return abs(ht - a3 * rhs)
