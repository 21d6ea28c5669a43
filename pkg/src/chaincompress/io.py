"""File formats: Matrix Market, CSV and JSON reports, atomic writes."""

import csv
import hashlib
import io as _io
import json
import os
import tempfile

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import AsymmetricInput, ParseError

SYMMETRY_ATOL = 0.0


def atomic_write(path, data: bytes):
    """Write via a temporary file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write(path, text.encode("utf-8"))


def load_matrix_market(path, *, require_symmetric=True) -> sp.csr_array:
    """Read a coordinate Matrix Market file; duplicate entries are summed.

    Files in ``general`` mode must still contain symmetric entries when
    ``require_symmetric``.
    """
    try:
        raw = scipy.io.mmread(path)
    except (ValueError, TypeError, OSError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise ParseError(f"{path}: {exc}") from None
    matrix = sp.csr_array(sp.coo_array(raw))
    if require_symmetric:
        residual = abs(matrix - matrix.T)
        if residual.nnz and residual.max() > SYMMETRY_ATOL:
            raise AsymmetricInput(f"{path}: entries are not symmetric")
    return matrix


def save_matrix_market(path, matrix, *, symmetry="general", comment=""):
    buffer = _io.BytesIO()
    scipy.io.mmwrite(buffer, sp.coo_array(matrix), comment=comment,
                     symmetry=symmetry, precision=17)
    atomic_write(path, buffer.getvalue())


def load_edge_list(path, *, n=None, undirected=True) -> sp.csr_array:
    """Read an ``i,j,value`` CSV (header required) into a sparse matrix.

    Undirected mode mirrors each entry; directed mode stores entries as
    given (used for rate matrices). Duplicates are summed.
    """
    rows, cols, vals = [], [], []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(header) < 3:
            raise ParseError(f"{path}: expected header i,j,value")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                i, j, v = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError):
                raise ParseError(f"{path}:{lineno}: malformed edge row {row!r}") from None
            rows.append(i)
            cols.append(j)
            vals.append(v)
            if undirected and i != j:
                rows.append(j)
                cols.append(i)
                vals.append(v)
    if not rows:
        raise ParseError(f"{path}: no edges")
    size = n if n is not None else max(max(rows), max(cols)) + 1
    return sp.csr_array(sp.coo_array((vals, (rows, cols)), shape=(size, size)))


def _csv_text(header, rows) -> str:
    out = _io.StringIO()
    writer = csv.writer(out, quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    writer.writerows(rows)
    return out.getvalue()


def export_indexed_matrix_csv(path, matrix, indices):
    """Matrix whose columns correspond to selected states; the header names
    them (used for committor and hitting-time blocks)."""
    header = ["state"] + [f"sel_{i}" for i in indices]
    rows = [[r] + [repr(float(v)) for v in row] for r, row in enumerate(np.asarray(matrix))]
    atomic_write_text(path, _csv_text(header, rows))


def export_selection_csv(path, trace):
    header = ["k", "index", "eps_nuclear", "score", "spectral_lower_bound"]
    rows = [
        [k + 1, trace.indices[k], repr(float(trace.eps_nuclear[k])),
         repr(float(trace.scores[k])), repr(float(trace.spectral_lower_bound[k]))]
        for k in range(trace.k)
    ]
    atomic_write_text(path, _csv_text(header, rows))


def selection_to_dict(trace) -> dict:
    return {
        "indices": list(trace.indices),
        "eps_nuclear": [float(v) for v in trace.eps_nuclear],
        "scores": [float(v) for v in trace.scores],
        "spectral_lower_bound": [float(v) for v in trace.spectral_lower_bound],
        "trace_k": float(trace.trace_k),
    }


BOUND_REPORT_COLUMNS = (
    "t", "err2_proj", "errnuc_proj", "err2_sp", "errnuc_sp",
    "bound2_thm2", "boundnuc_thm2", "bound2_thm3s", "boundnuc_thm3s",
    "boundnuc_thm3",
)


def export_bound_report_csv(path, report):
    """Serialize a BoundReport with the documented column schema."""
    columns = [
        report.t_grid, report.err2_proj, report.errnuc_proj,
        report.err2_sp, report.errnuc_sp,
        report.bound2_proj, report.boundnuc_proj,
        report.bound2_composite, report.boundnuc_composite,
        report.boundnuc_apriori,
    ]
    rows = [[repr(float(col[k])) for col in columns]
            for k in range(report.t_grid.size)]
    atomic_write_text(path, _csv_text(BOUND_REPORT_COLUMNS, rows))


def bound_report_summary(report) -> dict:
    return {
        "indices": list(report.indices),
        "eps_spectral": report.nystrom.spectral,
        "eps_nuclear": report.nystrom.nuclear,
        "psi_spectral": report.obliqueness.spectral,
        "psi_nuclear": report.obliqueness.nuclear,
        "max_tightness": report.tightness(),
        "violations": [list(v) for v in report.violations],
        "passed": report.passed,
    }


def export_induced_chain(mm_path, csv_path, ic):
    save_matrix_market(mm_path, ic.rates, comment="induced rate matrix")
    header = ["index", "stationary"]
    rows = [[ic.indices[r], repr(float(ic.stationary[r]))]
            for r in range(ic.n_selected)]
    atomic_write_text(csv_path, _csv_text(header, rows))


def export_marked_chain(mm_path, sidecar_path, mc):
    save_matrix_market(mm_path, mc.rates, comment="marked rate matrix")
    sidecar = {
        "states": [{"marking": int(i), "position": int(j)} for i, j in mc.states],
        "pruned": [{"marking": int(i), "position": int(j)} for i, j in mc.pruned_states],
    }
    atomic_write_text(sidecar_path, json.dumps(sidecar, indent=2))


def content_hash(matrix) -> str:
    """Stable hash of a sparse matrix's structure and values."""
    coo = sp.coo_array(matrix)
    order = np.lexsort((coo.col, coo.row))
    digest = hashlib.sha256()
    digest.update(np.asarray(coo.shape, dtype=np.int64).tobytes())
    digest.update(coo.row[order].astype(np.int64).tobytes())
    digest.update(coo.col[order].astype(np.int64).tobytes())
    digest.update(coo.data[order].astype(np.float64).tobytes())
    return digest.hexdigest()


def save_spectral_cache(directory, key: str, lap):
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"spectral-{key}.npz")
    buffer = _io.BytesIO()
    np.savez_compressed(
        buffer,
        matrix=lap.matrix,
        eigenvalues=lap.eigenvalues,
        eigenvectors=lap.eigenvectors,
        pseudoinverse=lap.pseudoinverse,
        null_rank=np.array([lap.null_rank]),
        sqrt_stationary=lap.sqrt_stationary,
    )
    atomic_write(path, buffer.getvalue())
    return path


def load_spectral_cache(directory, key: str):
    from .spectral import SpectralLaplacian

    path = os.path.join(directory, f"spectral-{key}.npz")
    if not os.path.exists(path):
        return None
    with np.load(path) as data:
        return SpectralLaplacian(
            matrix=data["matrix"],
            eigenvalues=data["eigenvalues"],
            eigenvectors=data["eigenvectors"],
            pseudoinverse=data["pseudoinverse"],
            null_rank=int(data["null_rank"][0]),
            sqrt_stationary=data["sqrt_stationary"],
        )
