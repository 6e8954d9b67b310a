"""Differential crossed modules as explicit structure tensors.

A differential crossed module (g, h, ∂, ▷) is stored componentwise:

    f[a, b, c]   = f^a_{bc}     structure constants of g,   [T_b, T_c] = f^a_{bc} T_a
    phi[g, a, b] = φ^γ_{αβ}     structure constants of h
    del_[al, a]  = ∂_α{}^a      components of the map ∂: h → g
    act[be, a, al] = ▷^β_{aα}   action of g on h,  T_a ▷ τ_α = ▷^β_{aα} τ_β
    Q[a, b]      = Q_{ab}       invariant bilinear form on g
    qf[al, be]   = q_{αβ}       invariant bilinear form on h

Index placement is always the "natural" one above; raising/lowering is done
explicitly with Q, qf and their inverses.  Lowered combinations that appear
all over the component formulas are cached on the instance:

    flow[a, b, c]    = Q_{ad} f^d_{bc}                (totally antisymmetric)
    actlow[al, a, be] = q_{αγ} ▷^γ_{aβ}               (antisymmetric in α, β)
    actmix[al, a, de] = ▷_{αa}{}^δ = actlow · qf⁻¹
    actQ[al, e, de]  = ▷_α{}^e{}_δ = Q⁻¹ · actlow     (equals -T^e_{αδ})
    dlow[al, b]      = ∂_{αb} = ∂_α{}^a Q_{ab}
    dup[al, a]       = ∂^α{}_a = q^{αβ} ∂_β{}^b Q_{ba}

Metrics may be indefinite (Minkowski, Killing form of so(3,1)); nothing here
assumes positivity.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DifferentialCrossedModule",
    "ValidationReport",
    "builtin_module",
    "validate_crossed_module",
    "t_map",
    "lower_raise",
    "load_crossed_module",
    "dump_crossed_module",
    "BUILTIN_NAMES",
]

# relative spectral threshold for "non-degenerate"
NONDEGENERACY_RATIO = 1e-8
DEFAULT_TOL = 1e-10


class CrossedModuleError(ValueError):
    """Malformed crossed-module data (shapes, finiteness, file format)."""


@dataclass(frozen=True)
class DifferentialCrossedModule:
    """Structure tensors of a differential crossed module."""

    p: int
    q: int
    f: np.ndarray
    phi: np.ndarray
    del_: np.ndarray
    act: np.ndarray
    Q: np.ndarray
    qf: np.ndarray
    name: str = "unnamed"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        p, q = self.p, self.q
        if p < 1 or q < 0:
            raise CrossedModuleError(f"bad dimensions p={p}, q={q}")
        shapes = {
            "f": (p, p, p),
            "phi": (q, q, q),
            "del_": (q, p),
            "act": (q, p, q),
            "Q": (p, p),
            "qf": (q, q),
        }
        for attr, want in shapes.items():
            arr = np.asarray(getattr(self, attr), dtype=float)
            if arr.shape != want:
                raise CrossedModuleError(
                    f"tensor {attr!r} has shape {arr.shape}, expected {want}"
                )
            if arr.size and not np.all(np.isfinite(arr)):
                raise CrossedModuleError(f"tensor {attr!r} has non-finite entries")
            object.__setattr__(self, attr, arr)

    # -- cached derived tensors ------------------------------------------

    def _derived(self, key):
        if key not in self._cache:
            self._cache.update(_build_derived(self))
        return self._cache[key]

    @property
    def Qinv(self):
        return self._derived("Qinv")

    @property
    def qfinv(self):
        return self._derived("qfinv")

    @property
    def flow(self):
        return self._derived("flow")

    @property
    def actlow(self):
        return self._derived("actlow")

    @property
    def actmix(self):
        return self._derived("actmix")

    @property
    def actQ(self):
        return self._derived("actQ")

    @property
    def dlow(self):
        return self._derived("dlow")

    @property
    def dup(self):
        return self._derived("dup")

    def replace_tensor(self, attr: str, value: np.ndarray) -> "DifferentialCrossedModule":
        """Copy of the module with one tensor replaced (no validation)."""
        data = {
            "p": self.p,
            "q": self.q,
            "f": self.f,
            "phi": self.phi,
            "del_": self.del_,
            "act": self.act,
            "Q": self.Q,
            "qf": self.qf,
            "name": self.name,
        }
        data[attr] = value
        return DifferentialCrossedModule(**data)


def _build_derived(cm: DifferentialCrossedModule) -> dict:
    q = cm.q
    Qinv = np.linalg.inv(cm.Q)
    qfinv = np.linalg.inv(cm.qf) if q else np.zeros((0, 0))
    flow = np.einsum("ad,dbc->abc", cm.Q, cm.f)
    actlow = np.einsum("ag,gbd->abd", cm.qf, cm.act) if q else cm.act.copy()
    actmix = np.einsum("abd,dg->abg", actlow, qfinv) if q else cm.act.copy()
    actQ = np.einsum("eb,abd->aed", Qinv, actlow) if q else cm.act.copy()
    dlow = np.einsum("ab,bc->ac", cm.del_, cm.Q) if q else cm.del_.copy()
    dup = np.einsum("ag,gb,bc->ac", qfinv, cm.del_, cm.Q) if q else cm.del_.copy()
    return {
        "Qinv": Qinv,
        "qfinv": qfinv,
        "flow": flow,
        "actlow": actlow,
        "actmix": actmix,
        "actQ": actQ,
        "dlow": dlow,
        "dup": dup,
    }


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    """One line per identity: (name, max absolute violation, pass flag)."""

    entries: list
    tol: float

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.entries)

    def violation(self, name: str) -> float:
        for n, v, _ in self.entries:
            if n == name:
                return v
        raise KeyError(name)

    def failures(self) -> list:
        return [n for n, _, ok in self.entries if not ok]

    def to_text(self) -> str:
        lines = [
            f"{name} {viol:.6e} {'PASS' if ok else 'FAIL'}"
            for name, viol, ok in self.entries
        ]
        lines.append(f"overall {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _maxabs(arr) -> float:
    arr = np.asarray(arr)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def _nondegeneracy_violation(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    s = np.linalg.svd(M, compute_uv=False)
    smax, smin = float(s[0]), float(s[-1])
    return max(0.0, NONDEGENERACY_RATIO * smax - smin)


def validate_crossed_module(cm: DifferentialCrossedModule,
                            tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check every algebraic identity a crossed module must satisfy.

    A failing module produces a failing report, never an exception.  All
    residuals are max-abs values of the identity written as LHS - RHS = 0.
    """
    f, phi, del_, act = cm.f, cm.phi, cm.del_, cm.act
    Q, qf = cm.Q, cm.qf
    # computed locally so degenerate metrics still produce a report
    actlow = np.einsum("ag,gbd->abd", qf, act) if cm.q else act
    checks = []

    checks.append(("f_antisymmetry", _maxabs(f + np.swapaxes(f, 1, 2))))
    checks.append(("phi_antisymmetry", _maxabs(phi + np.swapaxes(phi, 1, 2))))

    # Jacobi: f^d_{ac} f^c_{be} = f^c_{ab} f^d_{ce} - f^c_{ae} f^d_{cb}
    jac_g = (np.einsum("dac,cbe->dabe", f, f)
             - np.einsum("cab,dce->dabe", f, f)
             + np.einsum("cae,dcb->dabe", f, f))
    checks.append(("jacobi_g", _maxabs(jac_g)))
    if cm.q:
        jac_h = (np.einsum("dac,cbe->dabe", phi, phi)
                 - np.einsum("cab,dce->dabe", phi, phi)
                 + np.einsum("cae,dcb->dabe", phi, phi))
        checks.append(("jacobi_h", _maxabs(jac_h)))
    else:
        checks.append(("jacobi_h", 0.0))

    # equivariance: ▷^β_{aα} ∂_β{}^b = ∂_α{}^c f^b_{ac}
    if cm.q:
        equi = (np.einsum("gad,gb->bad", act, del_)
                - np.einsum("dc,bac->bad", del_, f))
        checks.append(("equivariance", _maxabs(equi)))
        # composition (Peiffer, algebra level): ∂_α{}^a ▷^γ_{aβ} = φ^γ_{αβ}
        comp = np.einsum("da,gab->gdb", del_, act) - phi
        checks.append(("composition_peiffer", _maxabs(comp)))
        # mixed relation: f^a_{bc} ▷_{αaβ} = ▷_{α[b|γ} ▷^γ_{|c]β}
        mixed = (np.einsum("abc,dae->dbce", f, actlow)
                 - np.einsum("dbg,gce->dbce", actlow, act)
                 + np.einsum("dcg,gbe->dbce", actlow, act))
        checks.append(("mixed_representation", _maxabs(mixed)))
        # invariance of q: ▷_{αaβ} antisymmetric in (α, β)
        checks.append(("act_antisymmetry", _maxabs(actlow + np.swapaxes(actlow, 0, 2))))
    else:
        checks.append(("equivariance", 0.0))
        checks.append(("composition_peiffer", 0.0))
        checks.append(("mixed_representation", 0.0))
        checks.append(("act_antisymmetry", 0.0))

    checks.append(("Q_symmetric", _maxabs(Q - Q.T)))
    checks.append(("q_symmetric", _maxabs(qf - qf.T)))
    checks.append(("Q_nondegenerate", _nondegeneracy_violation(Q)))
    checks.append(("q_nondegenerate", _nondegeneracy_violation(qf)))

    # invariance of Q: f^c_{ab} Q_{cd} + f^c_{ad} Q_{cb} = 0
    qinv = np.einsum("cab,cd->abd", f, Q) + np.einsum("cad,cb->abd", f, Q)
    checks.append(("Q_invariance", _maxabs(qinv)))

    entries = [(name, viol, viol <= tol) for name, viol in checks]
    return ValidationReport(entries=entries, tol=tol)


# ---------------------------------------------------------------------------
# T map and index gymnastics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TMapTensor:
    """Antisymmetric map T: h × h → g with Q_{ba} T^b_{αβ} = -▷_{αaβ}."""

    T: np.ndarray  # T[a, al, be] = T^a_{αβ}

    @property
    def antisymmetry_violation(self) -> float:
        return _maxabs(self.T + np.swapaxes(self.T, 1, 2))


def t_map(cm: DifferentialCrossedModule) -> TMapTensor:
    """Solve Q_{ba} T^b_{αβ} = -▷_{αaβ} for T (Q must be non-degenerate)."""
    if _nondegeneracy_violation(cm.Q) > 0:
        raise np.linalg.LinAlgError("Q is numerically singular")
    if cm.q == 0:
        return TMapTensor(T=np.zeros((cm.p, 0, 0)))
    # actlow[al, a, be] = ▷_{αaβ};  T^b_{αβ} = -(Q^{-1})^{ba} ▷_{αaβ}
    rhs = -np.einsum("abd->bad", cm.actlow).reshape(cm.p, -1)
    T = np.linalg.solve(cm.Q.T, rhs).reshape(cm.p, cm.q, cm.q)
    return TMapTensor(T=T)


_METRIC_OPS = {
    ("g", "lower"): lambda cm: cm.Q,
    ("g", "raise"): lambda cm: cm.Qinv,
    ("h", "lower"): lambda cm: cm.qf,
    ("h", "raise"): lambda cm: cm.qfinv,
}


def lower_raise(cm: DifferentialCrossedModule, tensor: np.ndarray, index_spec):
    """Raise/lower tensor slots with Q, qf and their inverses.

    index_spec is a sequence, one entry per tensor axis: None to leave the
    axis alone, or a pair ("g"|"h", "lower"|"raise").  Lowering contracts
    with the metric, raising with its inverse, so lower-then-raise is the
    identity.
    """
    tensor = np.asarray(tensor, dtype=float)
    if len(index_spec) != tensor.ndim:
        raise CrossedModuleError(
            f"index_spec has {len(index_spec)} entries for a rank-{tensor.ndim} tensor"
        )
    out = tensor
    for axis, spec in enumerate(index_spec):
        if spec is None:
            continue
        kind, direction = spec
        if (kind, direction) not in _METRIC_OPS:
            raise CrossedModuleError(f"bad index spec {spec!r}")
        metric = _METRIC_OPS[(kind, direction)](cm)
        dim = cm.p if kind == "g" else cm.q
        if out.shape[axis] != dim:
            raise CrossedModuleError(
                f"axis {axis} has size {out.shape[axis]}, expected {dim} for {kind!r}"
            )
        out = np.moveaxis(np.tensordot(metric, out, axes=(1, axis)), 0, axis)
    return out


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

BUILTIN_NAMES = ("trivial_bf(p)", "adjoint(su2)", "vector_poincare", "abelian(p,q)")

_EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
    _EPS3[_i, _j, _k] = 1.0
for _i, _j, _k in [(0, 2, 1), (2, 1, 0), (1, 0, 2)]:
    _EPS3[_i, _j, _k] = -1.0


def _su2() -> tuple:
    """su(2) with f^a_{bc} = ε_{abc} and Q = identity (our normalization)."""
    return _EPS3.copy(), np.eye(3)


def _so31_vector() -> tuple:
    """so(3,1) structure constants, invariant form, and the vector action.

    Basis: M_{AB} with (A,B) in lexicographic pair order
    (01, 02, 03, 12, 13, 23); η = diag(-1, 1, 1, 1).  The invariant form is
    Q(M_{AB}, M_{CD}) = η_{AC} η_{BD} - η_{AD} η_{BC} = -tr(M_{AB} M_{CD})/2.
    """
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    gens = []
    for A, B in pairs:
        M = np.zeros((4, 4))
        M[A, :] += eta[B, :]
        M[B, :] -= eta[A, :]
        gens.append(M)
    gens = np.array(gens)  # gens[a, C, D] = (M_a)^C{}_D
    # structure constants from the (faithful) vector representation
    basis_flat = gens.reshape(6, 16).T
    f = np.zeros((6, 6, 6))
    for b in range(6):
        for c in range(6):
            comm = gens[b] @ gens[c] - gens[c] @ gens[b]
            coeff, res, *_ = np.linalg.lstsq(basis_flat, comm.reshape(16), rcond=None)
            f[:, b, c] = coeff
    f[np.abs(f) < 1e-13] = 0.0
    Q = -0.5 * np.einsum("aCD,bDC->ab", gens, gens)
    Q[np.abs(Q) < 1e-13] = 0.0
    act = np.einsum("aCD->CaD", gens)  # ▷^β_{aα} = (M_a)^β{}_α
    return f, Q, act, eta


def builtin_module(name: str) -> DifferentialCrossedModule:
    """Return a catalog crossed module by name.

    Accepted names: "trivial_bf(p)" with p in {1, 3}, "adjoint(su2)",
    "vector_poincare", "abelian(p,q)".
    """
    name = name.strip().replace(" ", "")
    if name == "adjoint(su2)" or name == "adjoint(su(2))":
        f, Q = _su2()
        return DifferentialCrossedModule(
            p=3, q=3, f=f, phi=f.copy(), del_=np.eye(3), act=f.copy(),
            Q=Q, qf=Q.copy(), name="adjoint(su2)")
    if name == "vector_poincare":
        f, Q, act, eta = _so31_vector()
        return DifferentialCrossedModule(
            p=6, q=4, f=f, phi=np.zeros((4, 4, 4)), del_=np.zeros((4, 6)),
            act=act, Q=Q, qf=eta, name="vector_poincare")
    if name.startswith("trivial_bf(") and name.endswith(")"):
        p = int(name[len("trivial_bf("):-1])
        if p == 1:
            f, Q = np.zeros((1, 1, 1)), np.eye(1)
        elif p == 3:
            f, Q = _su2()
        else:
            raise KeyError(f"trivial_bf supports p in {{1, 3}}, got {p}")
        zq = np.zeros
        return DifferentialCrossedModule(
            p=p, q=0, f=f, phi=zq((0, 0, 0)), del_=zq((0, p)), act=zq((0, p, 0)),
            Q=Q, qf=zq((0, 0)), name=f"trivial_bf({p})")
    if name.startswith("abelian(") and name.endswith(")"):
        try:
            p, q = (int(s) for s in name[len("abelian("):-1].split(","))
        except ValueError as exc:
            raise KeyError(f"cannot parse {name!r}") from exc
        return DifferentialCrossedModule(
            p=p, q=q, f=np.zeros((p, p, p)), phi=np.zeros((q, q, q)),
            del_=np.zeros((q, p)), act=np.zeros((q, p, q)),
            Q=np.eye(p), qf=np.eye(q), name=f"abelian({p},{q})")
    raise KeyError(f"unknown builtin crossed module {name!r}")


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

_HEADER = """\
# crossed-module spec v1
# index conventions (row-major flattening):
#   f[a,b,c]   = f^a_{bc}        phi[g,a,b] = phi^g_{ab}
#   del[al,a]  = del_al^a        act[be,a,al] = act^be_{a al}
#   Q[a,b]     = Q_ab            qf[al,be]  = q_{al be}
"""

_TENSOR_ORDER = ("f", "phi", "del", "act", "Q", "qf")


def dump_crossed_module(cm: DifferentialCrossedModule) -> str:
    """Serialize a crossed module to the self-describing text format."""
    out = io.StringIO()
    out.write(_HEADER)
    out.write(f"name {cm.name}\n")
    out.write(f"p {cm.p}\n")
    out.write(f"q {cm.q}\n")
    tensors = {"f": cm.f, "phi": cm.phi, "del": cm.del_, "act": cm.act,
               "Q": cm.Q, "qf": cm.qf}
    for key in _TENSOR_ORDER:
        arr = tensors[key]
        dims = " ".join(str(d) for d in arr.shape)
        out.write(f"tensor {key} {dims}\n")
        flat = arr.reshape(-1)
        for start in range(0, flat.size, 6):
            out.write(" ".join(repr(float(v)) for v in flat[start:start + 6]) + "\n")
    return out.getvalue()


def load_crossed_module(text: str) -> DifferentialCrossedModule:
    """Parse the text format; shapes and finiteness are checked, identities
    are not (validation is a separate step so broken inputs can be tested)."""
    tokens = []
    name = None
    p = q = None
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    tensors = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        key = parts[0]
        if key == "name":
            name = " ".join(parts[1:]) if len(parts) > 1 else "unnamed"
            i += 1
        elif key in ("p", "q"):
            try:
                val = int(parts[1])
            except (IndexError, ValueError) as exc:
                raise CrossedModuleError(f"bad {key} line: {lines[i]!r}") from exc
            if key == "p":
                p = val
            else:
                q = val
            i += 1
        elif key == "tensor":
            if len(parts) < 2:
                raise CrossedModuleError(f"bad tensor line: {lines[i]!r}")
            tname = parts[1]
            try:
                shape = tuple(int(s) for s in parts[2:])
            except ValueError as exc:
                raise CrossedModuleError(f"bad tensor shape: {lines[i]!r}") from exc
            need = int(np.prod(shape)) if shape else 1
            vals = []
            i += 1
            while len(vals) < need:
                if i >= len(lines) or lines[i].split()[0] in ("tensor", "name", "p", "q"):
                    raise CrossedModuleError(
                        f"tensor {tname!r}: expected {need} entries, got {len(vals)}")
                for tok in lines[i].split():
                    try:
                        vals.append(float(tok))
                    except ValueError as exc:
                        raise CrossedModuleError(
                            f"tensor {tname!r}: bad numeric entry {tok!r}") from exc
                i += 1
            if len(vals) != need:
                raise CrossedModuleError(
                    f"tensor {tname!r}: expected {need} entries, got {len(vals)}")
            tensors[tname] = np.array(vals).reshape(shape)
        else:
            raise CrossedModuleError(f"unrecognized line: {lines[i]!r}")
    del tokens
    if p is None or q is None:
        raise CrossedModuleError("document must declare p and q")
    missing = [k for k in _TENSOR_ORDER if k not in tensors]
    if missing:
        raise CrossedModuleError(f"missing tensors: {missing}")
    return DifferentialCrossedModule(
        p=p, q=q, f=tensors["f"], phi=tensors["phi"], del_=tensors["del"],
        act=tensors["act"], Q=tensors["Q"], qf=tensors["qf"],
        name=name or "unnamed")
