"""Bases of equivariant linear maps for generalized permutation groups.

Two independent routes are provided on purpose:

* ``orbit_basis`` traces the orbits of the flat coordinates of vec(W) under
  the group action on linear maps, in O(|G| m n) time and without ever
  materializing an (mn x mn) matrix.
* ``dense_nullspace_oracle`` stacks the fix-point constraints into one dense
  system and solves it by Gaussian elimination.  It exists solely to check
  the orbit route and is capped in size.

``burnside_rank`` gives the rank a third way, as a group-averaged signed
trace, so the three can be cross-checked in tests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import CapExceeded, GroupMismatch, NonIntegralRank
from .groups import Representation, tensor_on_linear_maps

ORACLE_CAP = 4096
ORACLE_TOL = 1e-10


@dataclass(frozen=True)
class SignedOrbit:
    """One orbit of flat vec(W) coordinates, with the sign each carries.

    Materialized as a vector with entries[k] = (index, sign), the orbit is a
    fixed point of the group action on linear maps.  The smallest index has
    sign +1 by construction.
    """

    entries: tuple[tuple[int, int], ...]

    @property
    def canonical_index(self) -> int:
        return self.entries[0][0]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class EquivBasis:
    """Signed-orbit basis of the space of equivariant m x n linear maps.

    ``orbits`` hold one free coefficient each; ``zero_forced`` orbits are
    coordinates pinned to zero by a sign contradiction and carry no
    coefficient.  For bias bases use n = 1.
    """

    m: int
    n: int
    orbits: tuple[SignedOrbit, ...]
    zero_forced: tuple[SignedOrbit, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.orbits)

    @property
    def total_entries(self) -> int:
        """Sum of squared basis entries; every entry is +-1."""
        return sum(len(o) for o in self.orbits)

    def materialize(self, k: int) -> np.ndarray:
        """Dense m x n matrix of basis vector k."""
        w = np.zeros(self.m * self.n)
        for idx, sgn in self.orbits[k].entries:
            w[idx] = sgn
        return w.reshape(self.m, self.n)

    def materialize_flat(self, k: int) -> np.ndarray:
        w = np.zeros(self.m * self.n)
        for idx, sgn in self.orbits[k].entries:
            w[idx] = sgn
        return w


def _trace_orbits(rep_w: Representation, dim: int) -> tuple[list[SignedOrbit], list[SignedOrbit]]:
    targets = [m.target for m in rep_w.matrices]
    signs = [m.sign for m in rep_w.matrices]
    visited = bytearray(dim)
    orbits: list[SignedOrbit] = []
    dead: list[SignedOrbit] = []
    for seed in range(dim):
        if visited[seed]:
            continue
        reached: dict[int, int] = {}
        consistent = True
        for tgt, sgn in zip(targets, signs):
            i, s = tgt[seed], sgn[seed]
            prev = reached.get(i)
            if prev is None:
                reached[i] = s
            elif prev != s:
                consistent = False
        for i in reached:
            visited[i] = 1
        orbit = SignedOrbit(tuple(sorted(reached.items())))
        (orbits if consistent else dead).append(orbit)
    return orbits, dead


def orbit_basis(rep_in: Representation, rep_out: Representation) -> EquivBasis:
    """Equivariant-map basis via orbit tracing, O(|G| m n).

    Each flat coordinate of vec(W) is visited once; its orbit under the
    group action on linear maps becomes one basis vector, unless some
    element maps a coordinate onto another with contradictory signs, in
    which case the whole orbit is forced to zero.  Output orbits are sorted
    by their smallest flat index.
    """
    if rep_in.group != rep_out.group:
        raise GroupMismatch("input and output representations must share a group")
    m, n = rep_out.dim, rep_in.dim
    rep_w = tensor_on_linear_maps(rep_in, rep_out)
    orbits, dead = _trace_orbits(rep_w, m * n)
    return EquivBasis(m, n, tuple(orbits), tuple(dead))


def bias_basis(rep_out: Representation) -> EquivBasis:
    """Basis of the fixed subspace rho_out(g) b = b, as orbits over R^m."""
    orbits, dead = _trace_orbits(rep_out, rep_out.dim)
    return EquivBasis(rep_out.dim, 1, tuple(orbits), tuple(dead))


def burnside_rank(rep_in: Representation, rep_out: Representation) -> int:
    """Orbit count as the group-averaged product of signed traces.

    For unsigned permutation representations this equals the average number
    of fixed points; the signed traces extend the count to representations
    with -1 entries, where it equals the equivariant-subspace dimension.
    Raises NonIntegralRank when the average is not a non-negative integer,
    which signals that the inputs are not representations of the group.
    """
    if rep_in.group != rep_out.group:
        raise GroupMismatch("input and output representations must share a group")
    group = rep_in.group
    total = sum(
        rep_out.matrices[g].trace() * rep_in.matrices[group.inverse[g]].trace()
        for g in group.elements()
    )
    if total % group.order != 0 or total < 0:
        raise NonIntegralRank(
            f"trace average {total}/{group.order} is not a non-negative integer"
        )
    return total // group.order


def _nullspace_by_elimination(c: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal nullspace basis via Gauss-Jordan with partial pivoting."""
    rows, cols = c.shape
    a = c.astype(float).copy()
    pivot_cols: list[int] = []
    r = 0
    for col in range(cols):
        if r >= rows:
            break
        p = int(np.argmax(np.abs(a[r:, col]))) + r
        if abs(a[p, col]) <= tol:
            continue
        a[[r, p]] = a[[p, r]]
        a[r] /= a[r, col]
        mask = np.abs(a[:, col]) > 0
        mask[r] = False
        a[mask] -= np.outer(a[mask, col], a[r])
        pivot_cols.append(col)
        r += 1
    pivot_set = set(pivot_cols)
    free_cols = [c_ for c_ in range(cols) if c_ not in pivot_set]
    basis = np.zeros((cols, len(free_cols)))
    for j, fc in enumerate(free_cols):
        basis[fc, j] = 1.0
        for i, pc in enumerate(pivot_cols):
            basis[pc, j] = -a[i, fc]
    if basis.shape[1] == 0:
        return basis
    q, _ = np.linalg.qr(basis)
    return q


def dense_nullspace_oracle(
    rep_in: Representation,
    rep_out: Representation,
    tol: float = ORACLE_TOL,
    cap: int = ORACLE_CAP,
) -> np.ndarray:
    """Brute-force equivariant basis: nullspace of the stacked constraints.

    Stacks (rho_W(g) - I) for every non-identity g into one system and
    eliminates.  Returns an orthonormal (mn x r') basis of the nullspace.
    Verification-only; refuses problems with mn above ``cap``.
    """
    if rep_in.group != rep_out.group:
        raise GroupMismatch("input and output representations must share a group")
    mn = rep_in.dim * rep_out.dim
    if mn > cap:
        raise CapExceeded(f"mn = {mn} exceeds oracle cap {cap}")
    group = rep_in.group
    rep_w = tensor_on_linear_maps(rep_in, rep_out)
    blocks = [
        rep_w.matrices[g].as_dense().astype(float) - np.eye(mn)
        for g in group.elements()
        if g != group.identity
    ]
    if not blocks:
        return np.eye(mn)
    return _nullspace_by_elimination(np.vstack(blocks), tol)


@dataclass
class BasisReport:
    passed: bool
    rank: int
    burnside: int
    zero_forced: int
    max_residual: float
    first_violation: tuple[int, int, tuple[int, int]] | None = None

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        line = (
            f"{status}: rank {self.rank} (burnside {self.burnside}), "
            f"{self.zero_forced} zero-forced orbit(s), max residual {self.max_residual:.3e}"
        )
        if self.rank != self.burnside:
            line += "; orbit count disagrees with the trace count"
        elif self.first_violation is not None:
            g, k, (i, j) = self.first_violation
            line += f"; first violation at element {g}, orbit {k}, entry ({i},{j})"
        return line


def validate_basis(
    basis: EquivBasis,
    rep_in: Representation,
    rep_out: Representation,
    tol: float = ORACLE_TOL,
) -> BasisReport:
    """Check every orbit vector satisfies rho_out(g) W = W rho_in(g).

    Also checks the orbit count against the Burnside rank.  Violations are
    reported, not raised.
    """
    group = rep_out.group
    worst = 0.0
    violation = None
    for k in range(basis.rank):
        w = basis.materialize(k)
        for g in group.elements():
            resid = rep_out.apply_matrix_left(g, w) - rep_in.apply_matrix_right(w, g)
            local = float(np.abs(resid).max()) if resid.size else 0.0
            if local > worst:
                worst = local
                if local > tol and violation is None:
                    i, j = np.unravel_index(int(np.abs(resid).argmax()), resid.shape)
                    violation = (g, k, (int(i), int(j)))
    try:
        expected = burnside_rank(rep_in, rep_out)
    except NonIntegralRank:
        expected = -1
    passed = worst <= tol and basis.rank == expected
    if basis.rank != expected and violation is None:
        violation = (group.identity, -1, (-1, -1))
    return BasisReport(passed, basis.rank, expected, len(basis.zero_forced), worst, violation)


def span_residual(basis: EquivBasis, oracle: np.ndarray) -> float:
    """Largest distance of any orbit vector from the oracle's span.

    Orbit vectors are normalized before projection; residual is the 2-norm
    of the component outside the span.
    """
    worst = 0.0
    for k in range(basis.rank):
        v = basis.materialize_flat(k)
        v = v / np.linalg.norm(v)
        resid = v - oracle @ (oracle.T @ v)
        worst = max(worst, float(np.linalg.norm(resid)))
    return worst


def basis_to_dict(basis: EquivBasis) -> dict:
    return {
        "m": basis.m,
        "n": basis.n,
        "orbits": [{"entries": [[i, s] for i, s in o.entries]} for o in basis.orbits],
        "zero_forced": [
            {"entries": [[i, s] for i, s in o.entries]} for o in basis.zero_forced
        ],
    }


def basis_from_dict(data: dict) -> EquivBasis:
    def parse(os):
        return tuple(
            SignedOrbit(tuple((int(i), int(s)) for i, s in o["entries"])) for o in os
        )

    return EquivBasis(
        int(data["m"]),
        int(data["n"]),
        parse(data["orbits"]),
        parse(data.get("zero_forced", [])),
    )


def basis_fingerprint(basis: EquivBasis) -> str:
    """Stable content hash used to pair weights files with their basis."""
    payload = json.dumps(basis_to_dict(basis), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def oracle_to_dict(oracle: np.ndarray, m: int, n: int) -> dict:
    """Oracle output in the basis-file shape, with dense vectors instead of
    sparse entries, so the two files can be diffed."""
    return {
        "m": m,
        "n": n,
        "orbits": [{"vector": oracle[:, k].tolist()} for k in range(oracle.shape[1])],
    }
