"""Acceptance suite: one test per criterion, at the stated tolerances.

Run with `pytest -s tests/test_acceptance.py` to see one pass/fail line per
criterion; the same checks back the `bfcg full-report` command.
"""

import time
from pathlib import Path

import numpy as np

from bfcg.crossed_module import builtin_module, validate_crossed_module
from bfcg.curvature import (bianchi_residuals, curvature_F,
                            eom_gradient_check, evaluate_action)
from bfcg.dof import dof_count
from bfcg.gauge import expm_batched, fat_gauge_transform, thin_gauge_transform
from bfcg.lattice import (Lattice, _random_recipe, fit_order,
                          make_config_recipe)
from bfcg.phase import random_phase_point
from bfcg.relations import (SECONDARY_RELATIONS, FIRSTCLASS_RELATIONS, MIXED_RELATIONS,
                            PRIMARY_RELATIONS, RELATIONS,
                            check_algebra_relation, consistency_residuals,
                            fundamental_bracket_residuals, offshell_refinement,
                            offshell_relations, reduction_residual)

LADDER = (8, 16, 32)
ORDER_WINDOW = (1.8, 2.2)
TABLE_RELATIONS = PRIMARY_RELATIONS + SECONDARY_RELATIONS + FIRSTCLASS_RELATIONS + MIXED_RELATIONS

_CONFIG_CACHE = {}


def _su2_config(n):
    if n not in _CONFIG_CACHE:
        cm = builtin_module("adjoint(su2)")
        recipe = make_config_recipe(cm, 4, 1, seed=1, scale=0.4)
        _CONFIG_CACHE[n] = recipe.realize(Lattice(D=4, n=n, a=1.0 / n))
    return _CONFIG_CACHE[n]


def _report(tag, ok, detail=""):
    print(f"ACCEPT {tag}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"{tag} failed: {detail}"


def test_criterion_01_crossed_module_axiom_suite():
    t0 = time.perf_counter()
    catalog = ["trivial_bf(1)", "trivial_bf(3)", "adjoint(su2)",
               "vector_poincare", "abelian(2,3)"]
    worst = 0.0
    for name in catalog:
        rep = validate_crossed_module(builtin_module(name), tol=1e-10)
        assert rep.passed, (name, rep.failures())
        worst = max(worst, max(v for _, v, _ in rep.entries))
    missed = []
    # every single-entry 0.1 perturbation of a structure tensor is caught;
    # the only mathematically undetectable cell is (abelian, del): a
    # del-perturbed abelian module is itself a valid crossed module
    for name in ("adjoint(su2)", "vector_poincare", "trivial_bf(3)"):
        cm = builtin_module(name)
        for attr in ("f", "phi", "del_", "act"):
            base = getattr(cm, attr)
            for idx in np.ndindex(*base.shape):
                tensor = base.copy()
                tensor[idx] += 0.1
                if validate_crossed_module(cm.replace_tensor(attr, tensor)).passed:
                    missed.append((name, attr, idx))
    elapsed = time.perf_counter() - t0
    _report("C01 crossed-module axioms", worst <= 1e-10 and not missed
            and elapsed < 1.0,
            f"worst={worst:.2e} missed={len(missed)} time={elapsed:.2f}s")


def test_criterion_02_dof_reproduction():
    t0 = time.perf_counter()
    t = dof_count(6, 4)
    ok = (t.N, t.F, t.S, t.n) == (100, 70, 60, 0)
    ok = ok and all(dof_count(p, q).n == 0
                    for p in range(1, 51) for q in range(0, 51))
    elapsed = time.perf_counter() - t0
    _report("C02 dof counting", ok and elapsed < 1.0,
            f"(N,F,S,n)=({t.N},{t.F},{t.S},{t.n}) time={elapsed:.2f}s")


def test_criterion_03_bianchi_convergence():
    t0 = time.perf_counter()
    cm = builtin_module("adjoint(su2)")
    keys = ("bianchi_F", "bianchi_T", "bianchi_GB", "bianchi_G")
    table = {k: [] for k in keys}
    spacings = []
    for n in LADDER:
        res = bianchi_residuals(cm, _su2_config(n))
        for k in keys:
            table[k].append(res[k])
        spacings.append(1.0 / n)
    orders = {k: fit_order(spacings, v) for k, v in table.items()}
    ok = all(ORDER_WINDOW[0] <= o <= ORDER_WINDOW[1] for o in orders.values())
    ok = ok and all(v[0] > 1e-2 for v in table.values())
    elapsed = time.perf_counter() - t0
    _report("C03 bianchi identities",
            ok and elapsed < 60.0,
            " ".join(f"{k}={orders[k]:.3f}" for k in keys)
            + f" time={elapsed:.1f}s")


def test_criterion_04_gauge_invariance():
    cm = builtin_module("adjoint(su2)")
    rng = np.random.default_rng(100)
    eps_rec = _random_recipe(rng, 4, (cm.p,), 1, scale=0.3)
    eta_rec = _random_recipe(rng, 4, (4, cm.q), 1, scale=0.3)
    dthin, dfat, spacings = [], [], []
    for n in LADDER:
        lat = Lattice(D=4, n=n, a=1.0 / n)
        cfg = _su2_config(n)
        S0 = evaluate_action(cm, cfg)
        ct = thin_gauge_transform(cm, cfg, eps_rec.realize(lat))
        cf = fat_gauge_transform(cm, cfg, eta_rec.realize(lat))
        dthin.append(abs(evaluate_action(cm, ct) - S0))
        dfat.append(abs(evaluate_action(cm, cf) - S0))
        spacings.append(lat.a)
    o_thin = fit_order(spacings, dthin)
    o_fat = fit_order(spacings, dfat)
    cfg = _su2_config(8)
    lat8 = cfg.lattice
    eps_c = np.broadcast_to(np.array([0.4, -0.3, 0.2]).reshape(3, 1, 1, 1, 1),
                            (3,) + lat8.shape).copy()
    ct = thin_gauge_transform(cm, cfg, eps_c)
    Rg = expm_batched(-np.einsum("abc,b...->...ac", cm.f, eps_c))
    F0 = curvature_F(cm, cfg)
    rot = np.stack([np.einsum("...ab,b...->a...", Rg, F0[P]) for P in range(6)])
    cov = float(np.max(np.abs(curvature_F(cm, ct) - rot)))
    ok_thin = o_thin != "exact" and o_thin >= 1.8
    ok_fat = o_fat == "exact" or o_fat >= 1.8
    _report("C04 gauge invariance", ok_thin and ok_fat and cov <= 1e-10,
            f"thin_order={o_thin:.3f} fat={o_fat} const-covariance={cov:.2e}")


def test_criterion_05_eom_cross_check():
    cm = builtin_module("adjoint(su2)")
    worst = eom_gradient_check(cm, _su2_config(8), n_samples=24, seed=5)
    _report("C05 eom finite-difference", worst <= 1e-6, f"relerr={worst:.2e}")


def test_criterion_06_fundamental_and_primary_brackets():
    cm = builtin_module("adjoint(su2)")
    lat = Lattice(D=3, n=6, a=1.0 / 6)
    worst = 0.0
    for seed in (1, 2):
        pt = random_phase_point(cm, lat, seed=seed, rule="random")
        fb = fundamental_bracket_residuals(cm, pt, seed=seed)
        worst = max(worst, fb["conjugate"], fb["cross"])
        for rid in PRIMARY_RELATIONS:
            res = check_algebra_relation(cm, rid, pt, seed=seed)
            worst = max(worst, res.residual)
    _report("C06 fundamental brackets", worst <= 1e-12, f"worst={worst:.2e}")


def test_criterion_07_constraint_algebra_tables():
    t0 = time.perf_counter()
    cm = builtin_module("adjoint(su2)")
    table_path = Path(__file__).resolve().parents[1] / "docs" / "relations.md"
    committed = table_path.read_text(encoding="utf-8")
    assert all(rid in committed for rid in TABLE_RELATIONS), \
        "classification table must list every relation"
    worst_exact = 0.0
    failed = []
    for nn, npoints in ((8, 3), (16, 3), (32, 3)):
        lat = Lattice(D=3, n=nn, a=1.0 / nn)
        for k in range(npoints):
            pt = random_phase_point(cm, lat, seed=1000 * nn + k, rule="random")
            for rid in TABLE_RELATIONS:
                spec = RELATIONS[rid]
                res = check_algebra_relation(cm, rid, pt, seed=k)
                if spec.cls == "exact":
                    worst_exact = max(worst_exact, res.residual)
                    if res.residual > 1e-10:
                        failed.append((rid, nn, k, res.residual))
                else:  # pragma: no cover - catalog currently all exact
                    out = __import__("bfcg.relations", fromlist=["relation_refinement"]) \
                        .relation_refinement(cm, rid, LADDER, seed=k)
                    if not (out["order"] == "exact" or out["order"] >= 1.8):
                        failed.append((rid, out["order"]))
        if nn == 8:
            continue
    elapsed = time.perf_counter() - t0
    _report("C07 constraint algebra tables",
            not failed and elapsed < 600.0,
            f"21 relations x 3 points x n={LADDER}, worst={worst_exact:.2e}, "
            f"time={elapsed:.1f}s")


def test_criterion_08_multiplier_consistency():
    cm = builtin_module("adjoint(su2)")
    lat = Lattice(D=3, n=8, a=1.0 / 8)
    worst_spatial = 0.0
    worst_secondary = 0.0
    worst_phi = 0.0
    for seed in (3, 4):
        pt_on = random_phase_point(cm, lat, seed=seed, rule="on_shell")
        rows = dict(consistency_residuals(cm, pt_on, seed=seed))
        for label, r in rows.items():
            if "preservation" in label and "weak" not in label:
                worst_spatial = max(worst_spatial, r)
            if "vs secondary" in label:
                worst_secondary = max(worst_secondary, r)
        pt_rnd = random_phase_point(cm, lat, seed=seed + 50, rule="random")
        rows = dict(consistency_residuals(cm, pt_rnd, seed=seed))
        for label, r in rows.items():
            if "vs phi" in label:
                worst_phi = max(worst_phi, r)
    ok = worst_spatial <= 1e-10 and worst_secondary <= 1e-10 and worst_phi <= 1e-10
    _report("C08 multiplier consistency", ok,
            f"spatial={worst_spatial:.2e} temporal-vs-secondary="
            f"{worst_secondary:.2e} first-class={worst_phi:.2e}")


def test_criterion_09_offshell_dependencies():
    ab = builtin_module("abelian(2,2)")
    lat = Lattice(D=3, n=8, a=1.0 / 8)
    pt = random_phase_point(ab, lat, seed=9, rule="random")
    out_ab = offshell_relations(ab, pt)
    ok_ab = out_ab["ra_residual"] <= 1e-10 and out_ab["rb_residual"] <= 1e-10
    cm = builtin_module("adjoint(su2)")
    out = offshell_refinement(cm, (16, 24, 32), seed=648)
    o_ra, o_rb = out["ra_order"], out["rb_order"]
    ok_su2 = all(o == "exact" or o >= 1.8 for o in (o_ra, o_rb))
    ok_su2 = ok_su2 and out["ra_residuals"][0] > 1e-3
    _report("C09 off-shell dependencies", ok_ab and ok_su2,
            f"abelian=({out_ab['ra_residual']:.1e},{out_ab['rb_residual']:.1e}) "
            f"su2 orders=({o_ra:.3f},{o_rb:.3f})")


def test_criterion_10_gauge_fixed_reduction():
    worst = 0.0
    lat = Lattice(D=3, n=6, a=1.0 / 6)
    for name in ("adjoint(su2)", "vector_poincare", "abelian(2,2)"):
        cm = builtin_module(name)
        for seed in (11, 12):
            pt = random_phase_point(cm, lat, seed=seed, rule="random")
            worst = max(worst, reduction_residual(cm, pt))
    _report("C10 gauge-fixed reduction", worst <= 1e-12, f"worst={worst:.2e}")
