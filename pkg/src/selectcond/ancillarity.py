"""Finite-model checkers for ancillarity preservation under selection.

Two notions are audited on tabulated families f_A(a; psi, chi) over
finite grids. Completeness-type ancillarity (for each interest value,
the nuisance family is complete) reduces to a rank condition over the
support. Mode-type ancillarity requires the nuisance family to place an
approximate mode at every sample point. Conditioning on a selection with
strictly positive probabilities rescales the table by positive row and
column factors, which preserves the rank condition exactly and the mode
condition up to a computable tolerance inflation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "FiniteModel",
    "FiniteSelection",
    "GAncillarityResult",
    "MAncillarityResult",
    "GPreservationReport",
    "MPreservationReport",
    "is_G_ancillary",
    "apply_selection",
    "check_G_preservation",
    "is_M_ancillary",
    "check_M_preservation",
    "random_finite_model",
    "random_positive_selection",
    "g_counterexample",
]

RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FiniteModel:
    """Tabulated family: table[p, c, k] = f_A(a_k; psi_p, chi_c)."""

    a_space: tuple
    psi_grid: tuple
    chi_grid: tuple
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float).copy()
        P, C, K = len(self.psi_grid), len(self.chi_grid), len(self.a_space)
        if table.shape != (P, C, K):
            raise ValueError(f"table shape {table.shape} != {(P, C, K)}")
        if np.any(table < 0):
            raise ValueError("probabilities must be nonnegative")
        sums = table.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > 1e-12):
            raise ValueError("each (psi, chi) slice must sum to 1 within 1e-12")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "a_space", tuple(self.a_space))
        object.__setattr__(self, "psi_grid", tuple(self.psi_grid))
        object.__setattr__(self, "chi_grid", tuple(self.chi_grid))

    @property
    def shape(self):
        return self.table.shape


@dataclass(frozen=True, eq=False)
class FiniteSelection:
    """Selection probabilities phi[p, k] = phi(psi_p; a_k) in [0, 1]."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).copy()
        if phi.ndim != 2:
            raise ValueError("phi must be a (psi, a) matrix")
        if np.any(phi < 0) or np.any(phi > 1):
            raise ValueError("selection probabilities must lie in [0, 1]")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.phi > 0))


@dataclass
class GAncillarityResult:
    ancillary: bool
    rank: int
    support: tuple
    witness: Optional[np.ndarray] = None

    def __bool__(self):
        return self.ancillary


def is_G_ancillary(model: FiniteModel, psi_index: int,
                   tol: float = RANK_TOL) -> GAncillarityResult:
    """Grid-completeness of the nuisance family at one interest value.

    Complete iff no nonzero g supported on the union support satisfies
    E_chi[g(A)] = 0 for every chi: the chi-by-support matrix must have
    full column rank. A failing witness g is returned from the null
    space. Completeness over a finite chi grid is a necessary-condition
    proxy for completeness over a continuum.
    """
    M = model.table[psi_index]
    support = tuple(int(k) for k in np.flatnonzero(M.max(axis=0) > 0.0))
    if not support:
        raise ValueError("empty support")
    Ms = M[:, support]
    u, s, vt = np.linalg.svd(Ms)
    rank = int(np.sum(s > tol * (s[0] if s.size and s[0] > 0 else 1.0)))
    complete = rank == len(support)
    witness = None
    if not complete:
        g = np.zeros(len(model.a_space))
        g[list(support)] = vt[-1]
        witness = g
    return GAncillarityResult(complete, rank, support, witness)


def apply_selection(model: FiniteModel, sel: FiniteSelection) -> FiniteModel:
    """Selective table f_S(a; psi, chi) = phi(psi; a) f_A(a; psi, chi) / phi(psi, chi)."""
    if sel.phi.shape != (model.shape[0], model.shape[2]):
        raise ValueError("selection shape must be (n_psi, n_a)")
    weighted = model.table * sel.phi[:, None, :]
    denom = weighted.sum(axis=2)
    if np.any(denom <= 0.0):
        raise ValueError("zero total selection probability at some (psi, chi)")
    new = weighted / denom[:, :, None]
    new = new / new.sum(axis=2, keepdims=True)
    return FiniteModel(model.a_space, model.psi_grid, model.chi_grid, new)


@dataclass
class GPreservationReport:
    hypothesis_ok: bool
    per_psi: list = field(default_factory=list)
    notes: str = ""

    @property
    def preserved(self) -> Optional[bool]:
        if not self.hypothesis_ok:
            return None
        return all(base.ancillary == sel.ancillary for base, sel in self.per_psi)

    @property
    def passed(self) -> bool:
        return self.hypothesis_ok and bool(self.preserved)


def check_G_preservation(model: FiniteModel, sel: FiniteSelection) -> GPreservationReport:
    """Audit: completeness of A holds before selection iff it holds after.

    Requires phi > 0 everywhere; otherwise the check is skipped and the
    report says so (this is exactly the hypothesis a counterexample
    violates).
    """
    if not sel.strictly_positive:
        return GPreservationReport(False, [], "hypothesis violated: phi has zeros")
    selective = apply_selection(model, sel)
    per_psi = [
        (is_G_ancillary(model, p), is_G_ancillary(selective, p))
        for p in range(model.shape[0])
    ]
    return GPreservationReport(True, per_psi)


@dataclass
class MAncillarityResult:
    ancillary: bool
    failing_points: tuple = ()

    def __bool__(self):
        return self.ancillary


def is_M_ancillary(model: FiniteModel, psi_index: int, eps: float) -> MAncillarityResult:
    """Mode condition: every a admits a chi whose pmf nearly peaks there."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    M = model.table[psi_index]
    row_max = M.max(axis=1)
    ok = M > (1.0 - eps) * row_max[:, None]
    anywhere = ok.any(axis=0)
    failing = tuple(int(k) for k in np.flatnonzero(~anywhere))
    return MAncillarityResult(len(failing) == 0, failing)


@dataclass
class MPreservationReport:
    hypothesis_ok: bool
    eps: float
    per_psi: list = field(default_factory=list)
    notes: str = ""

    @property
    def passed(self) -> bool:
        if not self.hypothesis_ok:
            return False
        return all(
            (not base.ancillary) or sel.ancillary
            for base, sel, _ in self.per_psi
        )


def check_M_preservation(model: FiniteModel, sel: FiniteSelection,
                         eps: float) -> MPreservationReport:
    """One-sided audit of mode-ancillarity preservation.

    Reweighting by phi in [phi_min, phi_max] turns an eps-mode into an
    eps'-mode with eps' = 1 - (1 - eps) * phi_min / phi_max, computed per
    interest value. For selection constant in a the two notions coincide
    at the original eps, and the audit checks both directions there.
    """
    if not sel.strictly_positive:
        return MPreservationReport(False, eps, [], "hypothesis violated: phi has zeros")
    selective = apply_selection(model, sel)
    per_psi = []
    for p in range(model.shape[0]):
        row = sel.phi[p]
        ratio = float(row.min() / row.max())
        constant = math.isclose(ratio, 1.0, rel_tol=0.0, abs_tol=1e-14)
        eps_prime = eps if constant else 1.0 - (1.0 - eps) * ratio
        base = is_M_ancillary(model, p, eps)
        sel_res = is_M_ancillary(selective, p, eps_prime)
        per_psi.append((base, sel_res, eps_prime))
    return MPreservationReport(True, eps, per_psi)


def random_finite_model(rng: np.random.Generator, n_psi: int = None,
                        n_chi: int = None, n_a: int = None) -> FiniteModel:
    """Random strictly positive tabulated family with dimensions up to 6."""
    P = int(n_psi) if n_psi else int(rng.integers(1, 4))
    C = int(n_chi) if n_chi else int(rng.integers(1, 7))
    K = int(n_a) if n_a else int(rng.integers(2, 7))
    raw = rng.random((P, C, K)) + 0.05
    table = raw / raw.sum(axis=2, keepdims=True)
    return FiniteModel(
        a_space=tuple(range(K)),
        psi_grid=tuple(range(P)),
        chi_grid=tuple(range(C)),
        table=table,
    )


def random_positive_selection(rng: np.random.Generator, model: FiniteModel,
                              low: float = 0.05, high: float = 1.0) -> FiniteSelection:
    P, _, K = model.shape
    return FiniteSelection(rng.uniform(low, high, size=(P, K)))


def g_counterexample():
    """A zero-phi selection that breaks completeness equivalence.

    The base family on three points has a rank-2 chi matrix, hence a null
    vector whose only distinguishing coordinate is the third point.
    Selection annihilates exactly that point, and the induced selective
    family on the surviving support is complete: the equivalence fails,
    showing the positivity hypothesis is necessary.
    """
    table = np.array([[[0.2, 0.3, 0.5],
                       [0.4, 0.1, 0.5]]])
    model = FiniteModel(("a1", "a2", "a3"), ("psi",), ("chi1", "chi2"), table)
    sel = FiniteSelection(np.array([[1.0, 1.0, 0.0]]))
    return model, sel
