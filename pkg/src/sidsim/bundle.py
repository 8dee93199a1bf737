"""ModelBundle: the self-describing archive a trainer hands to the toolkit.

Container: an uncompressed ZIP holding

  manifest.json        model kind, dimensions, thresholds, normalization
                       stats, LUT geometry, an index of array shapes, and
                       provenance
  blobs/<name>.f64     raw little-endian float64 array data
  blobs/<name>.i32     the same array pre-quantized to Q16.16 raw words

Every array ships in both views; on load the i32 view must equal
quantize(f64 view) element-wise, so a bundle can never silently disagree
with the fixed-point image compiled from it. Array names are dotted paths
(e.g. "lstm.w_cand", "ped.03.boundaries", "lut.sigmoid.k"); the full layout
is documented in docs/bundle_format.md.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass, field

import numpy as np

from . import fixedpoint as fx
from .detection import LstmParams, MlpParams, PedReference, SvmParams
from .errors import (
    BundleFormatError,
    QuantizationMismatchError,
    ShapeMismatchError,
    UnknownModelKindError,
)
from .lut import LutTable, default_luts

FORMAT_VERSION = 1
MODEL_KINDS = ("mlp", "svm", "ocsvm", "lstm_th", "ped_lstm_vote")

_LSTM_FIELDS = (
    "w_cand", "w_forget", "w_input", "w_output",
    "u_cand", "u_forget", "u_input", "u_output",
    "b_cand", "b_forget", "b_input", "b_output",
    "proj", "proj_bias",
)


@dataclass
class ModelBundle:
    manifest: dict
    arrays: dict[str, np.ndarray] = field(default_factory=dict)       # float64
    quantized: dict[str, np.ndarray] = field(default_factory=dict)    # int32 raw

    # -- manifest shorthands ------------------------------------------------

    @property
    def model_kind(self) -> str:
        return self.manifest["model_kind"]

    @property
    def window(self) -> int:
        return self.manifest["window"]

    @property
    def user_id(self) -> int | None:
        return self.manifest.get("user_id")

    @property
    def alpha(self) -> float | None:
        return self.manifest.get("alpha")

    # -- typed views ---------------------------------------------------------

    def norm_stats(self) -> tuple[np.ndarray, np.ndarray]:
        return self.arrays["norm.mu"], self.arrays["norm.sigma"]

    def lstm_params(self) -> LstmParams:
        return LstmParams(**{f: self.arrays[f"lstm.{f}"] for f in _LSTM_FIELDS})

    def mlp_params(self) -> MlpParams:
        n = self.manifest["mlp_layers"]
        return MlpParams(
            weights=tuple(self.arrays[f"mlp.w{i}"] for i in range(n)),
            biases=tuple(self.arrays[f"mlp.b{i}"] for i in range(n)),
        )

    def svm_params(self) -> SvmParams:
        return SvmParams(
            support=self.arrays["svm.support"],
            duals=self.arrays["svm.duals"],
            bias=self.manifest["svm_bias"],
            gamma=self.manifest["svm_gamma"],
            one_class=self.model_kind == "ocsvm",
        )

    def ped_references(self) -> list[PedReference]:
        meta = self.manifest["ped"]
        refs = []
        for j in range(meta["count"]):
            refs.append(PedReference(
                boundaries=self.arrays[f"ped.{j:02d}.boundaries"],
                cum_ref=np.asarray(self.arrays[f"ped.{j:02d}.cum"], dtype=np.int64),
                n=meta["n"],
                m=meta["m"],
                threshold=meta["thresholds"][j],
            ))
        return refs

    def lut_tables(self) -> dict[str, LutTable]:
        tables = {}
        for name, geo in self.manifest.get("luts", {}).items():
            tables[name] = LutTable(
                func_id=name, lo=geo["lo"], hi=geo["hi"], segments=geo["segments"],
                k=self.arrays[f"lut.{name}.k"], b=self.arrays[f"lut.{name}.b"],
                k_raw=self.quantized[f"lut.{name}.k"],
                b_raw=self.quantized[f"lut.{name}.b"],
            )
        return tables

    def image_bytes(self) -> int:
        """Model-constant payload size: what the compiled image stores.

        LUT tables are excluded; they live in the lookup hardware, not in
        datapath RAM.
        """
        return sum(4 * a.size for name, a in self.quantized.items()
                   if not name.startswith("lut."))


def _validate(bundle: ModelBundle) -> None:
    man = bundle.manifest
    if man.get("format_version") != FORMAT_VERSION:
        raise BundleFormatError(
            f"unsupported bundle format version {man.get('format_version')!r}"
        )
    if man.get("model_kind") not in MODEL_KINDS:
        raise UnknownModelKindError(f"model kind {man.get('model_kind')!r}")
    index = man.get("arrays", {})
    if set(index) != set(bundle.arrays) or set(index) != set(bundle.quantized):
        raise ShapeMismatchError("manifest array index does not match blobs")
    for name, shape in index.items():
        arr = bundle.arrays[name]
        q = bundle.quantized[name]
        if list(arr.shape) != list(shape):
            raise ShapeMismatchError(f"{name}: blob shape {arr.shape} != declared {shape}")
        if list(q.shape) != list(shape):
            raise ShapeMismatchError(f"{name}: i32 view shape {q.shape} != declared {shape}")
        expect = fx.quantize_arr(arr.reshape(-1)).reshape(arr.shape)
        if not np.array_equal(expect, q):
            raise QuantizationMismatchError(f"{name}: i32 view is not quantize(f64 view)")


def write_bundle(bundle: ModelBundle, path) -> None:
    _validate(bundle)
    manifest = dict(bundle.manifest)
    manifest["arrays"] = {k: list(v.shape) for k, v in bundle.arrays.items()}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
        for name in sorted(bundle.arrays):
            zf.writestr(f"blobs/{name}.f64", bundle.arrays[name].astype("<f8").tobytes())
            zf.writestr(f"blobs/{name}.i32", bundle.quantized[name].astype("<i4").tobytes())


def read_bundle(path) -> ModelBundle:
    try:
        zf = zipfile.ZipFile(path, "r")
    except (FileNotFoundError, zipfile.BadZipFile) as exc:
        raise BundleFormatError(f"cannot open bundle {path}: {exc}") from exc
    with zf:
        try:
            manifest = json.loads(zf.read("manifest.json"))
        except KeyError:
            raise BundleFormatError(f"{path}: no manifest.json") from None
        arrays = {}
        quantized = {}
        for name, shape in manifest.get("arrays", {}).items():
            count = int(np.prod(shape)) if shape else 1
            try:
                f64 = zf.read(f"blobs/{name}.f64")
                i32 = zf.read(f"blobs/{name}.i32")
            except KeyError as exc:
                raise ShapeMismatchError(f"{path}: missing blob for {name}") from exc
            if len(f64) != 8 * count:
                raise ShapeMismatchError(
                    f"{name}: f64 blob is {len(f64)} bytes, shape {shape} needs {8 * count}"
                )
            if len(i32) != 4 * count:
                raise ShapeMismatchError(
                    f"{name}: i32 blob is {len(i32)} bytes, shape {shape} needs {4 * count}"
                )
            arrays[name] = np.frombuffer(f64, dtype="<f8").reshape(shape).copy()
            quantized[name] = np.frombuffer(i32, dtype="<i4").reshape(shape).copy()
    bundle = ModelBundle(manifest, arrays, quantized)
    _validate(bundle)
    return bundle


# ---------------------------------------------------------------------------
# Builders (used by tests, fixtures, and anything that is not the trainer)

def _base_manifest(kind, window, user_id, provenance) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": kind,
        "window": window,
        "user_id": user_id,
        "error_norm": "sq_l2",
        "quantization": "Q16.16",
        "provenance": provenance or {},
    }


def _with_common(arrays: dict, norm_mu, norm_sigma, luts) -> dict:
    arrays["norm.mu"] = np.asarray(norm_mu, dtype=np.float64)
    arrays["norm.sigma"] = np.asarray(norm_sigma, dtype=np.float64)
    lut_meta = {}
    for name, table in (luts or default_luts()).items():
        arrays[f"lut.{name}.k"] = np.asarray(table.k, dtype=np.float64)
        arrays[f"lut.{name}.b"] = np.asarray(table.b, dtype=np.float64)
        lut_meta[name] = {"lo": table.lo, "hi": table.hi, "segments": table.segments}
    return lut_meta


def _finish(manifest, arrays) -> ModelBundle:
    manifest["arrays"] = {k: list(v.shape) for k, v in arrays.items()}
    quantized = {k: fx.quantize_arr(v.reshape(-1)).reshape(v.shape) for k, v in arrays.items()}
    return ModelBundle(manifest, arrays, quantized)


def make_lstm_bundle(kind: str, lstm: LstmParams, window: int, *,
                     alpha: float | None = None,
                     ped_refs: list[PedReference] | None = None,
                     threshold: float | None = None,
                     norm_mu=None, norm_sigma=None, luts=None,
                     user_id=None, provenance=None) -> ModelBundle:
    if kind not in ("lstm_th", "ped_lstm_vote"):
        raise UnknownModelKindError(kind)
    manifest = _base_manifest(kind, window, user_id, provenance)
    manifest["hidden_size"] = lstm.hidden_size
    manifest["alpha"] = alpha
    manifest["threshold"] = threshold
    arrays = {f"lstm.{f}": np.asarray(getattr(lstm, f), dtype=np.float64)
              for f in _LSTM_FIELDS}
    if kind == "ped_lstm_vote":
        if not ped_refs:
            raise ShapeMismatchError("ped_lstm_vote bundle needs reference PEDs")
        manifest["ped"] = {
            "count": len(ped_refs),
            "n": ped_refs[0].n,
            "m": ped_refs[0].m,
            "thresholds": [r.threshold for r in ped_refs],
        }
        for j, ref in enumerate(ped_refs):
            arrays[f"ped.{j:02d}.boundaries"] = np.asarray(ref.boundaries, dtype=np.float64)
            arrays[f"ped.{j:02d}.cum"] = np.asarray(ref.cum_ref, dtype=np.float64)
    manifest["luts"] = _with_common(
        arrays,
        norm_mu if norm_mu is not None else np.zeros(6),
        norm_sigma if norm_sigma is not None else np.ones(6),
        luts,
    )
    return _finish(manifest, arrays)


def make_mlp_bundle(mlp: MlpParams, window: int, *, norm_mu=None, norm_sigma=None,
                    luts=None, user_id=None, provenance=None) -> ModelBundle:
    manifest = _base_manifest("mlp", window, user_id, provenance)
    manifest["mlp_layers"] = len(mlp.weights)
    arrays = {}
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        arrays[f"mlp.w{i}"] = np.asarray(w, dtype=np.float64)
        arrays[f"mlp.b{i}"] = np.asarray(b, dtype=np.float64)
    manifest["luts"] = _with_common(
        arrays,
        norm_mu if norm_mu is not None else np.zeros(6),
        norm_sigma if norm_sigma is not None else np.ones(6),
        luts,
    )
    return _finish(manifest, arrays)


def make_svm_bundle(svm: SvmParams, window: int, *, norm_mu=None, norm_sigma=None,
                    luts=None, user_id=None, provenance=None) -> ModelBundle:
    manifest = _base_manifest("ocsvm" if svm.one_class else "svm", window, user_id, provenance)
    manifest["svm_gamma"] = svm.gamma
    manifest["svm_bias"] = svm.bias
    arrays = {
        "svm.support": np.asarray(svm.support, dtype=np.float64),
        "svm.duals": np.asarray(svm.duals, dtype=np.float64),
    }
    manifest["luts"] = _with_common(
        arrays,
        norm_mu if norm_mu is not None else np.zeros(6),
        norm_sigma if norm_sigma is not None else np.ones(6),
        luts,
    )
    return _finish(manifest, arrays)
