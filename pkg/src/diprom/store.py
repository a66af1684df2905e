"""On-disk artifact store for the offline/online pipeline.

Layout under one root directory:

    config.ini            effective configuration (canonical text)
    triangulation.json    anchor points and triangle index triples
    index.json            per-element records, per-triangle horizons
    manifest.json         sha256 + size of every artifact above and below
    hfm/anchor_NN.traj    anchor trajectories (binary)
    basis/el_LL_mMMM.basis  local bases (binary, column-major)
    ops/el_LL_mMMM.ops    projected operator data (binary)
    pod/el_LL_mMMM.csv    singular-value spectra (after reduction)

All binary payloads are little-endian IEEE float64 behind small struct
headers carrying a magic tag and version, so every file round-trips
bit-identically.  The flux tensor of an unreduced element is not stored
(it is cubic in the basis size); OfflineStore assembles it lazily from
the basis and keeps a bounded cache.  Reduced elements are small, so
their files carry the tensor.

Manifests list content hashes only — no timestamps or absolute paths —
making offline outputs content-addressable: reruns of the same
configuration produce bit-identical manifests.
"""
from __future__ import annotations

import hashlib
import json
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .basis import LocalBasis
from .config import PipelineConfig
from .errors import StoreIntegrityError
from .hfm import Grid1D, ParamPoint, Trajectory
from .param_space import Triangulation, delaunay
from .rom import RomOperators, build_flux_tensor, build_shifted_flux_tensor

_TRAJ_MAGIC = b"DIPTRAJ1"
_BASIS_MAGIC = b"DIPBASE1"
_OPS_MAGIC = b"DIPOPS01"
_VERSION = 1

MANIFEST_NAME = "manifest.json"


# ---------------------------------------------------------------------------
# binary primitives
# ---------------------------------------------------------------------------

def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise StoreIntegrityError(f"{what}: truncated file")
    return data


def _expect_magic(f, magic: bytes, path) -> None:
    got = _read_exact(f, len(magic), str(path))
    if got != magic:
        raise StoreIntegrityError(
            f"{path}: bad magic {got!r} (expected {magic!r})")
    (version,) = struct.unpack("<I", _read_exact(f, 4, str(path)))
    if version != _VERSION:
        raise StoreIntegrityError(f"{path}: unsupported version {version}")


def _array_bytes(a: np.ndarray, order: str = "C") -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes() if order == "C" \
        else np.asfortranarray(a, dtype="<f8").tobytes(order="F")


# ---------------------------------------------------------------------------
# trajectory files
# ---------------------------------------------------------------------------

def write_trajectory(path, traj: Trajectory) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = traj.grid
    with open(path, "wb") as f:
        f.write(_TRAJ_MAGIC)
        f.write(struct.pack("<III", _VERSION, grid.n_cells, len(traj.steps)))
        f.write(struct.pack("<ddddd", grid.dx, grid.x_lo, traj.dt,
                            traj.mu.mu1, traj.mu.mu2))
        for i, step in enumerate(traj.steps):
            f.write(struct.pack("<q", int(step)))
            f.write(_array_bytes(traj.states[i]))


def read_trajectory(path) -> Trajectory:
    path = Path(path)
    with open(path, "rb") as f:
        _expect_magic(f, _TRAJ_MAGIC, path)
        n_cells, count = struct.unpack("<II", _read_exact(f, 8, str(path)))
        dx, x_lo, dt, mu1, mu2 = struct.unpack(
            "<ddddd", _read_exact(f, 40, str(path)))
        steps = np.empty(count, dtype=np.int64)
        states = np.empty((count, n_cells))
        row = 8 * n_cells
        for i in range(count):
            (steps[i],) = struct.unpack("<q", _read_exact(f, 8, str(path)))
            states[i] = np.frombuffer(
                _read_exact(f, row, str(path)), dtype="<f8")
    return Trajectory(
        mu=ParamPoint(mu1, mu2),
        grid=Grid1D(n_cells=n_cells, dx=dx, x_lo=x_lo),
        dt=dt, steps=steps, states=states,
    )


def trajectory_csv(traj: Trajectory) -> str:
    """CSV export: header of cell centers, one row per recorded step."""
    centers = traj.grid.centers
    lines = ["step,t," + ",".join(repr(float(c)) for c in centers)]
    for i, step in enumerate(traj.steps):
        cells = ",".join(repr(float(v)) for v in traj.states[i])
        lines.append(f"{int(step)},{float(step * traj.dt)!r},{cells}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# basis files
# ---------------------------------------------------------------------------

def write_basis(path, basis: LocalBasis, reduced: bool = False) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sig = basis.signature if basis.signature is not None else ()
    with open(path, "wb") as f:
        f.write(_BASIS_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        f.write(struct.pack("<IIII", basis.ell, basis.m,
                            basis.w.shape[0], basis.w.shape[1]))
        f.write(struct.pack("<BBBB", int(reduced), int(basis.fallback),
                            int(basis.signature is not None), 0))
        f.write(struct.pack("<II", basis.n_candidates, len(sig)))
        f.write(struct.pack("<d", basis.dx))
        f.write(struct.pack(f"<{len(sig)}b", *sig) if sig else b"")
        f.write(_array_bytes(basis.w, order="F"))


def read_basis(path) -> tuple[LocalBasis, bool]:
    path = Path(path)
    with open(path, "rb") as f:
        _expect_magic(f, _BASIS_MAGIC, path)
        ell, m, n_cells, n_funcs = struct.unpack(
            "<IIII", _read_exact(f, 16, str(path)))
        reduced, fallback, has_sig, _ = struct.unpack(
            "<BBBB", _read_exact(f, 4, str(path)))
        n_candidates, sig_len = struct.unpack(
            "<II", _read_exact(f, 8, str(path)))
        (dx,) = struct.unpack("<d", _read_exact(f, 8, str(path)))
        sig = struct.unpack(f"<{sig_len}b",
                            _read_exact(f, sig_len, str(path))) if sig_len \
            else ()
        w = np.frombuffer(
            _read_exact(f, 8 * n_cells * n_funcs, str(path)), dtype="<f8"
        ).reshape((n_cells, n_funcs), order="F")
    basis = LocalBasis(
        ell=ell, m=m, w=np.array(w), dx=dx,
        signature=tuple(int(s) for s in sig) if has_sig else None,
        fallback=bool(fallback), n_candidates=n_candidates,
    )
    return basis, bool(reduced)


# ---------------------------------------------------------------------------
# operator files
# ---------------------------------------------------------------------------

def write_operators(path, ell: int, m: int, boundary: np.ndarray,
                    source: np.ndarray, transition: np.ndarray | None,
                    flux: np.ndarray | None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_funcs = len(boundary)
    m_prev = 0 if transition is None else transition.shape[1]
    with open(path, "wb") as f:
        f.write(_OPS_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        f.write(struct.pack("<IIIII", ell, m, n_funcs,
                            source.shape[1], m_prev))
        f.write(struct.pack("<BBBB", int(transition is not None),
                            int(flux is not None), 0, 0))
        f.write(_array_bytes(boundary))
        f.write(_array_bytes(source))
        if transition is not None:
            f.write(_array_bytes(transition))
        if flux is not None:
            f.write(_array_bytes(flux))


def read_operators(path) -> dict:
    path = Path(path)
    with open(path, "rb") as f:
        _expect_magic(f, _OPS_MAGIC, path)
        ell, m, n_funcs, q_terms, m_prev = struct.unpack(
            "<IIIII", _read_exact(f, 20, str(path)))
        has_transition, has_flux, _, _ = struct.unpack(
            "<BBBB", _read_exact(f, 4, str(path)))

        def arr(shape):
            n = int(np.prod(shape))
            return np.frombuffer(
                _read_exact(f, 8 * n, str(path)), dtype="<f8"
            ).reshape(shape).copy()

        boundary = arr((n_funcs,))
        source = arr((n_funcs, q_terms))
        transition = arr((n_funcs, m_prev)) if has_transition else None
        flux = arr((n_funcs, n_funcs, n_funcs)) if has_flux else None
    return {"ell": ell, "m": m, "boundary": boundary, "source": source,
            "transition": transition, "flux": flux}


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_canonical_json(obj))


def write_manifest(root, relpaths) -> dict:
    """Hash the given artifacts and write manifest.json (not self-listed)."""
    root = Path(root)
    artifacts = {}
    for rel in sorted(set(str(r) for r in relpaths)):
        p = root / rel
        artifacts[rel] = {"sha256": sha256_file(p),
                          "bytes": p.stat().st_size}
    manifest = {"format": _VERSION, "artifacts": artifacts}
    (root / MANIFEST_NAME).write_text(_canonical_json(manifest))
    return manifest


def verify_store(root) -> dict:
    """Check every manifest artifact; raise naming the first bad one."""
    root = Path(root)
    mpath = root / MANIFEST_NAME
    if not root.is_dir():
        # a path that is not a store at all is a usage error, not tampering
        raise FileNotFoundError(f"no store directory at {root}")
    if not mpath.is_file():
        raise StoreIntegrityError(f"{MANIFEST_NAME}: missing from {root}")
    manifest = json.loads(mpath.read_text())
    for rel, meta in manifest.get("artifacts", {}).items():
        p = root / rel
        if not p.is_file():
            raise StoreIntegrityError(f"artifact {rel}: file missing")
        if p.stat().st_size != meta["bytes"]:
            raise StoreIntegrityError(
                f"artifact {rel}: size {p.stat().st_size} != "
                f"recorded {meta['bytes']}")
        if sha256_file(p) != meta["sha256"]:
            raise StoreIntegrityError(f"artifact {rel}: sha256 mismatch")
    return manifest


# ---------------------------------------------------------------------------
# path helpers
# ---------------------------------------------------------------------------

def anchor_rel(i: int) -> str:
    return f"hfm/anchor_{i:02d}.traj"


def basis_rel(ell: int, m: int) -> str:
    return f"basis/el_{ell:02d}_m{m:03d}.basis"


def ops_rel(ell: int, m: int) -> str:
    return f"ops/el_{ell:02d}_m{m:03d}.ops"


def spectrum_rel(ell: int, m: int) -> str:
    return f"pod/el_{ell:02d}_m{m:03d}.csv"


# ---------------------------------------------------------------------------
# offline store
# ---------------------------------------------------------------------------

class OfflineStore:
    """Read side of a completed offline build.

    Provides the element-database protocol consumed by rom_solve: grid,
    dt, partition, triangulation, param_box, basis(ell, m),
    operators(ell, m), covered_slabs(ell).  Bases are cached permanently
    (they are small); operators go through a bounded LRU cache because
    unreduced flux tensors are assembled on demand and are cubic in the
    basis size.
    """

    def __init__(self, root, verify: bool = True, ops_cache: int = 56):
        self.root = Path(root)
        if verify:
            verify_store(self.root)
        cfg_path = self.root / "config.ini"
        if not cfg_path.is_file():
            raise StoreIntegrityError("artifact config.ini: file missing")
        self.config = PipelineConfig.from_ini(cfg_path)
        self.grid = self.config.grid()
        self.dt = self.config.dt
        self.partition = self.config.partition()
        self.param_box = self.config.param_box

        tri_path = self.root / "triangulation.json"
        if not tri_path.is_file():
            raise StoreIntegrityError(
                "artifact triangulation.json: file missing")
        tri_data = json.loads(tri_path.read_text())
        self.triangulation: Triangulation = delaunay(tri_data["points"])
        if [list(t) for t in self.triangulation.triangles] \
                != tri_data["triangles"]:
            raise StoreIntegrityError(
                "artifact triangulation.json: stored triangles do not match "
                "a rebuild from the stored points")

        index_path = self.root / "index.json"
        if not index_path.is_file():
            raise StoreIntegrityError("artifact index.json: file missing")
        self.index = json.loads(index_path.read_text())

        self._bases: dict[tuple[int, int], LocalBasis] = {}
        self._reduced: dict[tuple[int, int], bool] = {}
        self._ops: OrderedDict[tuple[int, int], RomOperators] = OrderedDict()
        self._ops_cache = max(2, int(ops_cache))
        self._anchors: dict[int, Trajectory] = {}

    # -- protocol ---------------------------------------------------------
    def covered_slabs(self, ell: int) -> int:
        return int(self.index["horizon_slabs"][str(ell)])

    def basis(self, ell: int, m: int) -> LocalBasis:
        key = (ell, m)
        if key not in self._bases:
            basis, reduced = read_basis(self.root / basis_rel(ell, m))
            if (basis.ell, basis.m) != key:
                raise StoreIntegrityError(
                    f"artifact {basis_rel(ell, m)}: header says element "
                    f"({basis.ell}, {basis.m})")
            self._bases[key] = basis
            self._reduced[key] = reduced
        return self._bases[key]

    def is_reduced(self, ell: int, m: int) -> bool:
        self.basis(ell, m)
        return self._reduced[(ell, m)]

    def operators(self, ell: int, m: int) -> RomOperators:
        key = (ell, m)
        if key in self._ops:
            self._ops.move_to_end(key)
            return self._ops[key]
        data = read_operators(self.root / ops_rel(ell, m))
        if (data["ell"], data["m"]) != key:
            raise StoreIntegrityError(
                f"artifact {ops_rel(ell, m)}: header says element "
                f"({data['ell']}, {data['m']})")
        flux = data["flux"]
        if flux is None:
            w = self.basis(ell, m).w
            flux = build_flux_tensor(w, self.grid.dx) \
                - build_shifted_flux_tensor(w, self.grid.dx)
        ops = RomOperators(ell=ell, m=m, flux=flux,
                           boundary=data["boundary"], source=data["source"],
                           transition=data["transition"])
        self._ops[key] = ops
        if len(self._ops) > self._ops_cache:
            self._ops.popitem(last=False)
        return ops

    # -- extras -----------------------------------------------------------
    @property
    def anchors(self) -> list[ParamPoint]:
        return [ParamPoint(*p) for p in self.index["anchors"]]

    def anchor_trajectory(self, i: int) -> Trajectory:
        if i not in self._anchors:
            self._anchors[i] = read_trajectory(self.root / anchor_rel(i))
        return self._anchors[i]

    def element_record(self, ell: int, m: int) -> dict:
        return self.index["elements"][f"{ell},{m}"]

    @property
    def n_triangles(self) -> int:
        return self.triangulation.n_triangles
