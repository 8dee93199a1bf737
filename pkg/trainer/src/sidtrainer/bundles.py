"""Bundle archive writer.

Mirrors the documented interface format (docs/bundle_format.md in the
toolkit repo): an uncompressed ZIP with manifest.json and, per array, raw
little-endian blobs `blobs/<name>.f64` and `blobs/<name>.i32`, where the
i32 view is the Q16.16 quantization raw = clip(rint(v * 2^16), int32).
"""

from __future__ import annotations

import json
import zipfile

import numpy as np

from . import __version__
from .luts import Lut

FORMAT_VERSION = 1


def quantize_q16(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    raw = np.rint(v * 65536.0)
    return np.clip(raw, -(2 ** 31), 2 ** 31 - 1).astype(np.int32)


def base_manifest(kind: str, window: int, user_id: int | None,
                  dataset_seed: int | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": kind,
        "window": window,
        "user_id": user_id,
        "error_norm": "sq_l2",
        "quantization": "Q16.16",
        "provenance": {"trainer": f"sidtrainer {__version__}",
                       "dataset_seed": dataset_seed},
    }


def add_luts(manifest: dict, arrays: dict, luts: dict[str, Lut]) -> None:
    manifest["luts"] = {}
    for name, table in luts.items():
        arrays[f"lut.{name}.k"] = table.k
        arrays[f"lut.{name}.b"] = table.b
        manifest["luts"][name] = {"lo": table.lo, "hi": table.hi,
                                  "segments": table.segments}


def write_bundle(path, manifest: dict, arrays: dict[str, np.ndarray]) -> None:
    manifest = dict(manifest)
    manifest["arrays"] = {k: list(np.asarray(v).shape) for k, v in arrays.items()}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
        for name in sorted(arrays):
            arr = np.asarray(arrays[name], dtype=np.float64)
            zf.writestr(f"blobs/{name}.f64", arr.astype("<f8").tobytes())
            zf.writestr(f"blobs/{name}.i32", quantize_q16(arr).astype("<i4").tobytes())
