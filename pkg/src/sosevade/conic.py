"""Conic (PSD feasibility) form of an SOS program.

compile() turns coefficient-matching equalities into sparse rows over free
scalars and upper-triangular PSD-block entries.  solve() hands small
instances to a primal-dual interior-point method (cvxopt's conelp); large
instances are exported in SDPA sparse format instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .soscomp import FREE, GRAM, SosProgram

# Internal-solver size guardrails (dense Schur complement).
MAX_BLOCK_SIDE = 150
MAX_ROWS = 20000

TRACE_PENALTY = 1e-6
INFEAS_RATIO = 1e-6

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
MAX_ITER = "MaxIter"
NUMERICAL_FAILURE = "NumericalFailure"


class ProgramTooLarge(RuntimeError):
    pass


@dataclass
class ConicProgram:
    """Standard-form feasibility program: A z = b, PSD blocks, free scalars."""

    free_var_count: int
    psd_blocks: list[int]                       # side lengths
    rows: list[dict[int, float]]                # column -> coefficient
    rhs: list[float]
    row_labels: list[str]
    objective: dict[int, float] = field(default_factory=dict)
    inconsistent: bool = False                  # a row reduced to 0 = nonzero

    def __post_init__(self):
        self.block_offsets = []
        off = self.free_var_count
        for side in self.psd_blocks:
            self.block_offsets.append(off)
            off += side * (side + 1) // 2
        self.n_cols = off

    def col_of_entry(self, block: int, i: int, j: int) -> int:
        side = self.psd_blocks[block]
        if not 0 <= i <= j < side:
            raise IndexError("bad triangular index")
        # upper-triangular row-major within the block
        return self.block_offsets[block] + i * side - i * (i - 1) // 2 + (j - i)

    def entry_of_col(self, col: int) -> tuple[int, int, int]:
        for b, side in enumerate(self.psd_blocks):
            off = self.block_offsets[b]
            n = side * (side + 1) // 2
            if off <= col < off + n:
                k = col - off
                for i in range(side):
                    rowlen = side - i
                    if k < rowlen:
                        return b, i, i + k
                    k -= rowlen
        raise IndexError("column is not a PSD entry")

    def default_objective(self) -> dict[int, float]:
        """Tiny trace penalty: regularizes pure feasibility problems."""
        obj = dict(self.objective)
        if not obj:
            for b, side in enumerate(self.psd_blocks):
                for i in range(side):
                    obj[self.col_of_entry(b, i, i)] = TRACE_PENALTY
        return obj


@dataclass
class Solution:
    status: str
    free_values: np.ndarray
    psd_matrices: list[np.ndarray]
    primal_residual: float
    dual_residual: float
    min_eigenvalues: list[float]
    iterations: int = 0
    message: str = ""

    def summary(self) -> str:
        lines = [
            f"status={self.status}",
            f"primal_residual={self.primal_residual:.6e}",
            f"dual_residual={self.dual_residual:.6e}",
            f"iterations={self.iterations}",
        ]
        for k, ev in enumerate(self.min_eigenvalues):
            lines.append(f"min_eig[{k}]={ev:.6e}")
        return "\n".join(lines)


def compile(prog: SosProgram) -> ConicProgram:
    """Lower the symbolic program to sparse equality rows over conic columns."""
    free_ids = prog.free_var_ids()
    free_index = {vid: k for k, vid in enumerate(free_ids)}
    sides = [b.side for b in prog.gram_blocks]
    cp = ConicProgram(
        free_var_count=len(free_ids),
        psd_blocks=sides,
        rows=[], rhs=[], row_labels=[],
    )
    for label, expr in prog.equalities:
        monos = sorted(set(expr.const) | set(expr.terms))
        for mono in monos:
            row: dict[int, float] = {}
            for vid, c in expr.terms.get(mono, {}).items():
                kind = prog.var_kinds[vid]
                if kind[0] == FREE:
                    col = free_index[vid]
                elif kind[0] == GRAM:
                    _, b, i, j = kind
                    col = cp.col_of_entry(b, i, j)
                else:
                    raise AssertionError(kind)
                if abs(c) >= 1e-15:
                    row[col] = row.get(col, 0.0) + c
            rhs = -expr.const.get(mono, 0.0)
            if not row:
                if abs(rhs) > 1e-12:
                    cp.inconsistent = True
                continue
            cp.rows.append(row)
            cp.rhs.append(rhs)
            cp.row_labels.append(f"{label}:{','.join(map(str, mono))}")
    return cp


def _normalized_system(cp: ConicProgram) -> tuple[np.ndarray, np.ndarray]:
    m = len(cp.rows)
    A = np.zeros((m, cp.n_cols))
    b = np.array(cp.rhs, dtype=float)
    for r, row in enumerate(cp.rows):
        for col, c in row.items():
            A[r, col] = c
    scale = np.maximum(np.abs(A).max(axis=1), 1e-300)
    A /= scale[:, None]
    b /= scale
    return A, b


def _independent_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-9):
    """Select a maximal independent row subset; detect inconsistent drops.

    Coefficient matching of products like V * p produces structurally
    redundant rows; interior-point methods need a full-rank equality block.
    """
    import scipy.linalg

    m = A.shape[0]
    if m == 0:
        return np.array([], dtype=int), False
    _, r, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int((diag > tol * max(diag[0], 1.0)).sum()) if diag.size else 0
    keep = np.sort(piv[:rank])
    if rank < m:
        # dropped rows are combinations of kept ones; their right-hand sides
        # must agree or the system is contradictory
        drop = np.setdiff1d(np.arange(m), keep)
        coeffs, *_ = np.linalg.lstsq(A[keep].T, A[drop].T, rcond=None)
        implied = coeffs.T @ b[keep]
        if drop.size and np.abs(implied - b[drop]).max() > 1e-7 * max(1.0, np.abs(b).max()):
            return keep, True
    return keep, False


def solve(cp: ConicProgram, tol: float = 1e-8, max_iter: int = 100) -> Solution:
    """Primal-dual interior-point solve of the compiled program.

    Deterministic for identical inputs.  Infeasibility is reported via the
    homogeneous self-dual embedding of the underlying method.
    """
    if cp.inconsistent:
        return Solution(INFEASIBLE, np.zeros(cp.free_var_count), [], np.inf, np.inf, [],
                        message="contradictory constant row")
    if max(cp.psd_blocks, default=0) > MAX_BLOCK_SIDE or len(cp.rows) > MAX_ROWS:
        raise ProgramTooLarge(
            f"blocks up to {max(cp.psd_blocks, default=0)} and {len(cp.rows)} rows "
            f"exceed internal-solver limits; use the SDPA export path")
    if not cp.rows and not cp.psd_blocks:
        return Solution(OPTIMAL, np.zeros(cp.free_var_count), [], 0.0, 0.0, [])

    from cvxopt import matrix, solvers, spmatrix

    A_full, b_full = _normalized_system(cp)
    keep, contradictory = _independent_rows(A_full, b_full)
    if contradictory:
        return Solution(INFEASIBLE, np.zeros(cp.free_var_count), [], np.inf, np.inf, [],
                        message="linearly dependent rows with inconsistent right-hand sides")
    A = A_full[keep]
    b = b_full[keep]

    # G maps columns to the stacked -vec(X_k); PSD slack s equals the blocks.
    gi, gj, gv = [], [], []
    row_off = 0
    for bidx, side in enumerate(cp.psd_blocks):
        for i in range(side):
            for j in range(i, side):
                col = cp.col_of_entry(bidx, i, j)
                gi.append(row_off + j * side + i)
                gj.append(col)
                gv.append(-1.0)
                if i != j:
                    gi.append(row_off + i * side + j)
                    gj.append(col)
                    gv.append(-1.0)
        row_off += side * side
    n = cp.n_cols
    G = spmatrix(gv, gi, gj, (row_off, n)) if gi else spmatrix([], [], [], (row_off, n))
    h = matrix(np.zeros(row_off))
    obj = cp.default_objective()
    c = np.zeros(n)
    for col, val in obj.items():
        c[col] = val

    opts = {
        "show_progress": False,
        "maxiters": int(max_iter),
        "abstol": tol,
        "reltol": tol,
        "feastol": tol,
    }
    try:
        sol = solvers.conelp(
            matrix(c), G, h, dims={"l": 0, "q": [], "s": list(cp.psd_blocks)},
            A=matrix(A) if A.size else matrix(np.zeros((0, n))),
            b=matrix(b),
            options=opts,
        )
    except (ValueError, ArithmeticError, ZeroDivisionError) as exc:
        return Solution(NUMERICAL_FAILURE, np.zeros(cp.free_var_count), [], np.inf, np.inf, [],
                        message=f"interior-point failure: {exc}")

    status = sol["status"]
    if status in ("primal infeasible", "dual infeasible"):
        return Solution(INFEASIBLE, np.zeros(cp.free_var_count), [], np.inf, np.inf, [],
                        iterations=int(sol.get("iterations", 0)), message=status)
    if sol["x"] is None:
        return Solution(NUMERICAL_FAILURE, np.zeros(cp.free_var_count), [], np.inf, np.inf, [],
                        message="no iterate returned")

    z = np.array(sol["x"]).ravel()
    free_values = z[: cp.free_var_count]
    mats = []
    min_eigs = []
    for bidx, side in enumerate(cp.psd_blocks):
        M = np.zeros((side, side))
        for i in range(side):
            for j in range(i, side):
                val = z[cp.col_of_entry(bidx, i, j)]
                M[i, j] = M[j, i] = val
        mats.append(M)
        min_eigs.append(float(np.linalg.eigvalsh(M)[0]) if side else 0.0)

    # Residuals recomputed directly, not trusted from the solver.
    primal_res = float(np.abs(A_full @ z - b_full).max()) if len(b_full) else 0.0
    dual_res = float(sol.get("gap", np.nan) or np.nan)

    if status == "optimal":
        st = OPTIMAL
    elif status == "unknown":
        # distinguish slow convergence from breakdown by the achieved residual
        st = MAX_ITER if primal_res < 1e-4 else NUMERICAL_FAILURE
    else:
        st = NUMERICAL_FAILURE
    if st == OPTIMAL and (primal_res > 100 * tol or (min_eigs and min(min_eigs) < -100 * tol)):
        st = NUMERICAL_FAILURE
    return Solution(st, free_values, mats, primal_res, dual_res, min_eigs,
                    iterations=int(sol.get("iterations", 0)), message=status)


# ---------------------------------------------------------------------------
# SDPA sparse interchange format (.dat-s)
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.17g}"


def export_sdpa(cp: ConicProgram) -> str:
    """Render the program in SDPA sparse format.

    The dual-side convention is used: each equality row k becomes the data
    matrix F_k, the right-hand side becomes the cost vector, and F_0 holds
    the trace-penalty objective.  Free scalar variables are encoded in one
    trailing negative (diagonal) block via the split f = f+ - f-.
    """
    m = len(cp.rows)
    nfree = cp.free_var_count
    blocks = list(cp.psd_blocks)
    if nfree:
        blocks.append(-2 * nfree)
    lines = [str(m), str(len(blocks))]
    lines.append(" ".join(str(s) for s in blocks))
    lines.append(" ".join(_fmt(v) for v in cp.rhs) if m else "")
    entries: list[str] = []
    obj = cp.default_objective()
    free_block = len(cp.psd_blocks) + 1  # 1-based
    for col, val in sorted(obj.items()):
        if col < nfree:
            entries.append(f"0 {free_block} {col + 1} {col + 1} {_fmt(val)}")
            entries.append(f"0 {free_block} {nfree + col + 1} {nfree + col + 1} {_fmt(-val)}")
        else:
            b, i, j = cp.entry_of_col(col)
            v = val if i == j else val / 2.0
            entries.append(f"0 {b + 1} {i + 1} {j + 1} {_fmt(v)}")
    for k, row in enumerate(cp.rows, start=1):
        for col in sorted(row):
            val = row[col]
            if col < nfree:
                entries.append(f"{k} {free_block} {col + 1} {col + 1} {_fmt(val)}")
                entries.append(f"{k} {free_block} {nfree + col + 1} {nfree + col + 1} {_fmt(-val)}")
            else:
                b, i, j = cp.entry_of_col(col)
                v = val if i == j else val / 2.0
                entries.append(f"{k} {b + 1} {i + 1} {j + 1} {_fmt(v)}")
    return "\n".join(lines + entries) + "\n"


class SdpaParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def import_sdpa(text: str) -> ConicProgram:
    """Parse a .dat-s file back into an equivalent ConicProgram."""
    raw = text.splitlines()
    body = []
    for lineno, ln in enumerate(raw, start=1):
        s = ln.split("*")[0].split('"')[0].strip()
        body.append((lineno, s))

    def next_nonempty(idx):
        while idx < len(body) and body[idx][1] == "":
            idx += 1
        return idx

    idx = next_nonempty(0)
    try:
        lineno, s = body[idx]
        m = int(s.split()[0])
    except (IndexError, ValueError):
        raise SdpaParseError(body[idx][0] if idx < len(body) else 0, "expected constraint count")
    idx = next_nonempty(idx + 1)
    lineno, s = body[idx]
    nblocks = int(s.split()[0])
    idx = next_nonempty(idx + 1)
    lineno, s = body[idx]
    sizes = [int(tok.strip("{}(),")) for tok in s.replace(",", " ").split()]
    if len(sizes) != nblocks:
        raise SdpaParseError(lineno, f"expected {nblocks} block sizes, got {len(sizes)}")
    if m > 0:
        idx = next_nonempty(idx + 1)
        lineno, s = body[idx]
        rhs = [float(tok) for tok in s.replace(",", " ").split()]
        if len(rhs) != m:
            raise SdpaParseError(lineno, f"expected {m} right-hand sides, got {len(rhs)}")
    else:
        rhs = []
        idx = idx  # header-only file may omit the RHS line
    nfree = 0
    psd_sizes = list(sizes)
    if psd_sizes and psd_sizes[-1] < 0:
        neg = -psd_sizes.pop()
        if neg % 2:
            raise SdpaParseError(lineno, "free-variable block size must be even")
        nfree = neg // 2
    cp = ConicProgram(free_var_count=nfree, psd_blocks=psd_sizes,
                      rows=[{} for _ in range(m)], rhs=rhs,
                      row_labels=[f"row{k}" for k in range(m)])
    free_block = len(psd_sizes) + 1
    for lineno, s in body[idx + 1:]:
        if not s:
            continue
        toks = s.replace(",", " ").split()
        if len(toks) != 5:
            raise SdpaParseError(lineno, f"expected 5 fields, got {len(toks)}")
        try:
            k, blk, i, j, val = int(toks[0]), int(toks[1]), int(toks[2]), int(toks[3]), float(toks[4])
        except ValueError:
            raise SdpaParseError(lineno, "malformed entry")
        if not 0 <= k <= m:
            raise SdpaParseError(lineno, f"constraint index {k} out of range")
        if not 1 <= blk <= len(sizes):
            raise SdpaParseError(lineno, f"block index {blk} out of range")
        if blk == free_block and nfree:
            if i != j:
                raise SdpaParseError(lineno, "free-variable block must be diagonal")
            # the split f = f+ - f- writes each coefficient twice; the f+
            # half carries the value, the mirrored f- half is redundant
            if i > nfree:
                continue
            col, coeff = i - 1, val
            if k == 0:
                cp.objective[col] = cp.objective.get(col, 0.0) + coeff
            else:
                cp.rows[k - 1][col] = cp.rows[k - 1].get(col, 0.0) + coeff
        else:
            side = sizes[blk - 1]
            if not (1 <= i <= j <= side):
                raise SdpaParseError(lineno, f"entry ({i},{j}) outside block of side {side}")
            col = cp.col_of_entry(blk - 1, i - 1, j - 1)
            coeff = val if i == j else 2.0 * val
            if k == 0:
                cp.objective[col] = cp.objective.get(col, 0.0) + coeff
            else:
                cp.rows[k - 1][col] = cp.rows[k - 1].get(col, 0.0) + coeff
    return cp


def import_solution(text: str, cp: ConicProgram) -> Solution:
    """Parse an SDPA solver output (xVec then block matrices) for ``cp``."""
    lines = text.splitlines()
    xvec: list[float] = []
    mats: list[np.ndarray] = []
    mode = None
    current: list[float] = []

    def close_matrix(lineno):
        # entries may be broken across lines arbitrarily; a solution block is
        # always square, so the side is recovered from the count
        nonlocal current
        if current:
            side = math.isqrt(len(current))
            if side * side != len(current):
                raise SdpaParseError(lineno, "non-square solution block")
            mats.append(np.array(current).reshape(side, side))
            current = []

    for lineno, ln in enumerate(lines, start=1):
        s = ln.strip()
        if not s:
            continue
        low = s.lower()
        if low.startswith("xvec"):
            mode = "xvec"
            continue
        if low.startswith("xmat") or low.startswith("ymat"):
            close_matrix(lineno)
            mode = "mat"
            continue
        if mode is None:
            continue
        cleaned = s.replace("{", " ").replace("}", " ").replace(",", " ")
        try:
            vals = [float(tok) for tok in cleaned.split()]
        except ValueError:
            raise SdpaParseError(lineno, f"malformed numeric line: {s!r}")
        if mode == "xvec":
            xvec.extend(vals)
        else:
            current.extend(vals)
    close_matrix(len(lines))

    psd = [M for M in mats]
    # drop a trailing free-variable diagonal block if present
    if cp.free_var_count and psd and psd[-1].shape[0] == 2 * cp.free_var_count:
        fb = psd.pop()
        diag = np.diag(fb)
        free_values = diag[: cp.free_var_count] - diag[cp.free_var_count:]
    else:
        free_values = np.zeros(cp.free_var_count)
    if len(psd) != len(cp.psd_blocks):
        raise SdpaParseError(0, f"expected {len(cp.psd_blocks)} PSD blocks, found {len(psd)}")
    for M, side in zip(psd, cp.psd_blocks):
        if M.shape[0] != side:
            raise SdpaParseError(0, f"block of side {M.shape[0]} does not match program side {side}")
    z = np.zeros(cp.n_cols)
    z[: cp.free_var_count] = free_values
    for bidx, M in enumerate(psd):
        for i in range(M.shape[0]):
            for j in range(i, M.shape[0]):
                z[cp.col_of_entry(bidx, i, j)] = 0.5 * (M[i, j] + M[j, i])
    A, b = _normalized_system(cp)
    primal_res = float(np.abs(A @ z - b).max()) if len(b) else 0.0
    min_eigs = [float(np.linalg.eigvalsh(M)[0]) for M in psd]
    return Solution(OPTIMAL, free_values, psd, primal_res, np.nan, min_eigs,
                    message="imported")
