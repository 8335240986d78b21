"""Serialization: raster binary + JSON sidecar, PGM maps, CSV tables, models.

Rasters are raw little-endian float32 payloads in band-interleaved-by-pixel
order with a JSON sidecar at `<path>.json` describing the shape. Models are
a directory holding `manifest.json` plus little-endian float64 blobs that
are CRC32-checked on load. All writers are deterministic byte-for-byte for
identical inputs.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np

from .detectors import DetectorConfig, FittedDetector, KernelTerm, LinearTerm
from .kernels import KernelSpec
from .linalg import SpdFactor
from .metrics import RocCurve
from .raster import BandStats, ImageCube

__all__ = [
    "RasterFormatError",
    "CorruptModelError",
    "UnsupportedVersionError",
    "write_raster",
    "read_raster",
    "labels_to_cube",
    "cube_to_labels",
    "write_pgm",
    "write_roc_csv",
    "write_trace_csv",
    "save_model",
    "load_model",
]

FORMAT_VERSION = 1


class RasterFormatError(Exception):
    """Raster payload or sidecar is malformed."""


class CorruptModelError(Exception):
    """A model blob failed its checksum."""


class UnsupportedVersionError(Exception):
    """The model manifest declares an unknown format version."""


# ---------------------------------------------------------------------------
# rasters
# ---------------------------------------------------------------------------

def write_raster(cube: ImageCube, path) -> None:
    path = Path(path)
    payload = cube.data.astype("<f4").tobytes(order="C")
    sidecar = {
        "height": cube.height,
        "width": cube.width,
        "bands": cube.bands,
        "dtype": "f32",
        "interleave": "bip",
    }
    path.write_bytes(payload)
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def read_raster(path) -> ImageCube:
    path = Path(path)
    sidecar_path = Path(str(path) + ".json")
    if not path.exists() or not sidecar_path.exists():
        raise FileNotFoundError(f"raster {path} or its sidecar is missing")
    try:
        meta = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as e:
        raise RasterFormatError(f"bad sidecar {sidecar_path}: {e}") from e
    for key in ("height", "width", "bands", "dtype", "interleave"):
        if key not in meta:
            raise RasterFormatError(f"sidecar missing {key!r}")
    if meta["dtype"] != "f32" or meta["interleave"] != "bip":
        raise RasterFormatError("unsupported raster dtype or interleave")
    h, w, d = int(meta["height"]), int(meta["width"]), int(meta["bands"])
    payload = path.read_bytes()
    if len(payload) != h * w * d * 4:
        raise RasterFormatError(
            f"payload is {len(payload)} bytes, expected {h * w * d * 4}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, d)
    return ImageCube.from_array(data.astype(np.float64))


def labels_to_cube(labels: np.ndarray, height: int, width: int) -> ImageCube:
    """Pack a flat binary label vector as a 1-band cube."""
    labels = np.asarray(labels).ravel()
    if labels.size != height * width:
        raise ValueError("label count does not match height*width")
    return ImageCube.from_array(
        (labels > 0).astype(np.float64).reshape(height, width, 1)
    )


def cube_to_labels(cube: ImageCube) -> np.ndarray:
    """Flatten a 1-band cube back to a binary label vector."""
    if cube.bands != 1:
        raise RasterFormatError("label raster must have exactly one band")
    return (cube.data.ravel() > 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------

def write_pgm(values: np.ndarray, path, mode: str = "binary") -> None:
    """Render an (H, W) map as an 8-bit P5 PGM.

    binary mode maps {0, 1} to {0, 255}; scaled mode min-max scales to
    0..255, with constant inputs rendered as all zeros.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("expected an (H, W) map")
    if mode == "binary":
        pixels = np.where(values > 0, 255, 0).astype(np.uint8)
    elif mode == "scaled":
        lo, hi = values.min(), values.max()
        if hi == lo:
            pixels = np.zeros(values.shape, dtype=np.uint8)
        else:
            pixels = np.rint((values - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        raise ValueError(f"unknown pgm mode {mode!r}")
    h, w = values.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes(order="C"))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def write_roc_csv(curve: RocCurve, path) -> None:
    lines = ["fpr,tpr,threshold"]
    for f, t, thr in zip(curve.fpr, curve.tpr, curve.thresholds):
        lines.append(f"{_fmt(f)},{_fmt(t)},{_fmt(thr)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_trace_csv(trace, path) -> None:
    lines = ["nu,sigma,lambda,val_auc"]
    for point, auc in trace:
        lines.append(f"{_fmt(point.nu)},{_fmt(point.sigma)},{_fmt(point.lam)},{_fmt(auc)}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def _write_blob(directory: Path, name: str, arr: np.ndarray) -> dict:
    payload = np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C")
    (directory / name).write_bytes(payload)
    return {
        "path": name,
        "count": int(arr.size),
        "shape": list(arr.shape),
        "crc32": zlib.crc32(payload) & 0xFFFFFFFF,
    }


def _read_blob(directory: Path, ref: dict) -> np.ndarray:
    blob_path = directory / ref["path"]
    if not blob_path.exists():
        raise CorruptModelError(f"missing blob {ref['path']}")
    payload = blob_path.read_bytes()
    if (zlib.crc32(payload) & 0xFFFFFFFF) != ref["crc32"]:
        raise CorruptModelError(f"corrupt model: checksum mismatch in {ref['path']}")
    arr = np.frombuffer(payload, dtype="<f8")
    if arr.size != ref["count"]:
        raise CorruptModelError(f"corrupt model: wrong element count in {ref['path']}")
    return arr.reshape(ref["shape"]).astype(np.float64)


def _spec_dict(spec: KernelSpec | None):
    if spec is None:
        return None
    return {"kind": spec.kind, "sigma": spec.sigma}


def _spec_from(d) -> KernelSpec | None:
    if d is None:
        return None
    return KernelSpec(kind=d["kind"], sigma=d["sigma"])


def _config_dict(config: DetectorConfig) -> dict:
    return {
        "beta_x": config.beta_x,
        "beta_y": config.beta_y,
        "distribution": config.distribution,
        "nu": config.nu,
        "mode": config.mode,
        "kernel": _spec_dict(config.kernel),
        "lam": config.lam,
        "kernel_x": _spec_dict(config.kernel_x),
        "kernel_y": _spec_dict(config.kernel_y),
        "kernel_z": _spec_dict(config.kernel_z),
        "ridge_scale": config.ridge_scale,
    }


def _config_from(d) -> DetectorConfig:
    return DetectorConfig(
        beta_x=d["beta_x"],
        beta_y=d["beta_y"],
        distribution=d["distribution"],
        nu=d["nu"],
        mode=d["mode"],
        kernel=_spec_from(d["kernel"]),
        lam=d["lam"],
        kernel_x=_spec_from(d["kernel_x"]),
        kernel_y=_spec_from(d["kernel_y"]),
        kernel_z=_spec_from(d["kernel_z"]),
        ridge_scale=d["ridge_scale"],
    )


def save_model(det: FittedDetector, directory, metadata: dict | None = None) -> None:
    """Write manifest.json plus float64 blobs; load_model restores bit-exactly."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    manifest = {
        "format_version": FORMAT_VERSION,
        "config": _config_dict(det.config),
        "d_x": det.d_x,
        "d_y": det.d_y,
        "band_stats": {},
        "terms": {},
    }
    for axis, stats in (("x", det.band_stats_x), ("y", det.band_stats_y)):
        manifest["band_stats"][axis] = {
            "mean": _write_blob(directory, f"band_stats_{axis}_mean.bin", stats.mean),
            "std": _write_blob(directory, f"band_stats_{axis}_std.bin", stats.std),
        }
    for name, term in (("x", det.term_x), ("y", det.term_y), ("z", det.term_z)):
        if isinstance(term, LinearTerm):
            manifest["terms"][name] = {
                "type": "linear",
                "mean": _write_blob(directory, f"term_{name}_mean.bin", term.mean),
                "factor": _write_blob(directory, f"term_{name}_factor.bin", term.factor.L),
                "ridge": term.factor.ridge,
            }
        else:
            manifest["terms"][name] = {
                "type": "kernel",
                "train": _write_blob(directory, f"term_{name}_train.bin", term.train),
                "factor": _write_blob(directory, f"term_{name}_factor.bin",
                                      term.solve_factor.L),
                "ridge": term.solve_factor.ridge,
                "lam": term.lam,
                "kernel": _spec_dict(term.spec),
            }
    if metadata is not None:
        manifest["metadata"] = metadata
    (directory / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    )


def _term_from(directory: Path, entry: dict):
    factor_l = _read_blob(directory, entry["factor"])
    factor = SpdFactor(dim=factor_l.shape[0], L=factor_l, ridge=entry["ridge"])
    if entry["type"] == "linear":
        return LinearTerm(mean=_read_blob(directory, entry["mean"]), factor=factor)
    if entry["type"] == "kernel":
        return KernelTerm(
            train=_read_blob(directory, entry["train"]),
            spec=_spec_from(entry["kernel"]),
            lam=entry["lam"],
            solve_factor=factor,
        )
    raise CorruptModelError(f"unknown term type {entry['type']!r}")


def load_model(directory) -> FittedDetector:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {directory}")
    manifest = json.loads(manifest_path.read_text())
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported version {version!r}")

    stats = {}
    for axis in ("x", "y"):
        entry = manifest["band_stats"][axis]
        stats[axis] = BandStats(
            mean=_read_blob(directory, entry["mean"]),
            std=_read_blob(directory, entry["std"]),
        )
    terms = {name: _term_from(directory, manifest["terms"][name]) for name in ("x", "y", "z")}
    return FittedDetector(
        config=_config_from(manifest["config"]),
        band_stats_x=stats["x"],
        band_stats_y=stats["y"],
        d_x=manifest["d_x"],
        d_y=manifest["d_y"],
        term_x=terms["x"],
        term_y=terms["y"],
        term_z=terms["z"],
    )
