"""Compile model bundles into macro-instruction programs and memory images.

Memory map of a compiled image: [sensor buffer][model constants][workspace].
The image (sensor region zeroed plus constants) becomes the program's data
segment; workspace lives above it and is zero on load. The verdict is one
Q16.16 word at the "verdict" symbol: 1.0 = impostor, 0.0 = normal.

Matrices wider than the scratchpad (64 partial-sum words at 256 bytes) are
split into row chunks of at most 64 rows, each chunk a separate MVmul whose
output lands at the right slice of the destination vector.

LSTM-family detectors compile in two layouts:

  window     the whole W-reading window is unrolled: W-1 cell steps, then
             the histogram-KS votes (or the mean compare for the threshold
             detector). One invocation per window; used for batch evaluation.

  streaming  the deployed form: each sensor reading resets the PC and the
             program performs one cell step, scores the previous prediction,
             shifts the error ring, and recomputes the vote. State (h, c,
             prediction, error buffer) persists in datapath RAM. After W
             invocations the verdict equals the window layout's bit for bit;
             per-invocation cycles are what the latency budget constrains.

There are no branches, so every emitted program is straight-line and ends
with Halt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fixedpoint as fx
from .bundle import ModelBundle
from .errors import CapacityExceededError, ExpRangeError, UnknownModelKindError
from .isa import HALT, INSTRUCTION_BYTES, MacroInstruction, OperationMode, Program
from .simulator import MachineConfig

M = OperationMode


@dataclass
class CompiledProgram:
    program: Program
    symbols: dict[str, tuple[int, int]]      # name -> (byte address, byte length)
    workspace_top: int                       # high-water mark, bytes
    result_addr: int                         # the verdict word
    sensor_capacity_bytes: int
    layout: str                              # "window" | "streaming" | "stateless"
    model_kind: str

    @property
    def image_bytes(self) -> int:
        return len(self.program.data)

    @property
    def instruction_bytes(self) -> int:
        return len(self.program.instructions) * INSTRUCTION_BYTES

    def symbol_map_text(self) -> str:
        lines = [f"{name} {addr:#010x} {size}" for name, (addr, size) in sorted(self.symbols.items())]
        return "\n".join(lines) + "\n"


class _Builder:
    """Allocates the [sensor][constants][workspace] map and emits code."""

    def __init__(self, config: MachineConfig):
        self.config = config
        self.cursor = 0
        self.symbols: dict[str, tuple[int, int]] = {}
        self.constants: list[tuple[int, np.ndarray]] = []
        self.constants_end = 0
        self.insts: list[MacroInstruction] = []
        self._workspace_open = False

    def _alloc(self, name: str, n_words: int) -> int:
        addr = self.cursor
        if addr + 4 * n_words > self.config.datapath_ram_bytes:
            raise CapacityExceededError(
                f"{name}: image needs more than the {self.config.datapath_ram_bytes}-byte "
                "datapath RAM"
            )
        self.symbols[name] = (addr, 4 * n_words)
        self.cursor = addr + 4 * n_words
        return addr

    def sensor(self, name: str, n_words: int) -> int:
        return self._alloc(name, n_words)

    def constant(self, name: str, raw: np.ndarray) -> int:
        if self._workspace_open:
            raise RuntimeError("constants must be allocated before workspace")
        raw = np.asarray(raw, dtype=np.int32).reshape(-1)
        addr = self._alloc(name, raw.size)
        self.constants.append((addr, raw))
        self.constants_end = self.cursor
        return addr

    def workspace(self, name: str, n_words: int) -> int:
        self._workspace_open = True
        return self._alloc(name, n_words)

    # -- emission helpers --------------------------------------------------

    def emit(self, mode, length, addr_x, addr_y, addr_z, width=0):
        self.insts.append(MacroInstruction(mode, length, width, addr_x, addr_y, addr_z))

    def mvmul(self, mat_addr, vec_addr, out_addr, rows, cols):
        """MVmul split into row chunks that fit the scratchpad."""
        max_rows = self.config.scratchpad_bytes // 4
        r0 = 0
        while r0 < rows:
            chunk = min(max_rows, rows - r0)
            self.emit(M.MVMUL, cols, mat_addr + 4 * r0 * cols, vec_addr,
                      out_addr + 4 * r0, width=chunk)
            r0 += chunk

    def finish(self, result_addr, sensor_capacity, layout, kind) -> CompiledProgram:
        self.insts.append(HALT)
        size = len(self.insts) * INSTRUCTION_BYTES
        if size > self.config.instruction_ram_bytes:
            raise CapacityExceededError(
                f"{kind}/{layout}: program is {size} bytes, instruction RAM holds "
                f"{self.config.instruction_ram_bytes}"
            )
        image = np.zeros(self.constants_end // 4, dtype=np.int32)
        for addr, raw in self.constants:
            image[addr // 4 : addr // 4 + raw.size] = raw
        return CompiledProgram(
            program=Program(self.insts, image.astype("<i4").tobytes()),
            symbols=self.symbols,
            workspace_top=self.cursor,
            result_addr=result_addr,
            sensor_capacity_bytes=sensor_capacity,
            layout=layout,
            model_kind=kind,
        )


def _q(values) -> np.ndarray:
    return fx.quantize_arr(np.asarray(values, dtype=np.float64).reshape(-1))


def _norm_constants(b: _Builder, bundle: ModelBundle, tile: int, prefix="norm"):
    """Per-channel z-score as subtract + multiply-by-reciprocal constants."""
    mu, sigma = bundle.norm_stats()
    mu_t = np.tile(mu, tile)
    isig_t = np.tile(1.0 / sigma, tile)
    return b.constant(f"{prefix}.mu", _q(mu_t)), b.constant(f"{prefix}.isig", _q(isig_t))


# ---------------------------------------------------------------------------
# MLP

def compile_mlp(bundle: ModelBundle, config: MachineConfig) -> CompiledProgram:
    params = bundle.mlp_params()
    w = bundle.window
    d = w * 6
    if params.input_size != d:
        raise CapacityExceededError(
            f"bundle window {w} gives input {d}, model expects {params.input_size}"
        )
    b = _Builder(config)
    sensor = b.sensor("sensor", d)
    mu, isig = _norm_constants(b, bundle, tile=w)
    layers = []
    for i in range(bundle.manifest["mlp_layers"]):
        wq = bundle.quantized[f"mlp.w{i}"]
        bq = bundle.quantized[f"mlp.b{i}"]
        layers.append((b.constant(f"w{i}", wq.reshape(-1)), b.constant(f"b{i}", bq), wq.shape))
    xn = b.workspace("xn", d)
    widest = max(shape[0] for _, _, shape in layers)
    act = b.workspace("act", widest)
    act2 = b.workspace("act2", widest)
    verdict = b.workspace("verdict", 1)

    b.emit(M.VSUB, d, sensor, mu, xn)
    b.emit(M.VMUL, d, xn, isig, xn)
    src = xn
    for i, (w_addr, b_addr, shape) in enumerate(layers):
        rows, cols = shape
        dst = act if src is not act else act2
        b.mvmul(w_addr, src, dst, rows, cols)
        b.emit(M.VADD, rows, dst, b_addr, dst)
        if i < len(layers) - 1:
            b.emit(M.VSIG, rows, dst, 0, dst)
        src = dst
    # impostor iff score[1] > score[0]
    b.symbols["scores"] = (src, 8)
    b.emit(M.VSGT, 1, src + 4, src, verdict)
    return b.finish(verdict, 4 * d, "stateless", "mlp")


# ---------------------------------------------------------------------------
# SVM / OCSVM

def compile_svm(bundle: ModelBundle, config: MachineConfig) -> CompiledProgram:
    if bundle.manifest["svm_gamma"] <= 0:
        # kernel exponent is -gamma * dist^2; it must stay <= 0 for the LUT
        raise ExpRangeError(
            f"gamma={bundle.manifest['svm_gamma']} would give positive exponents"
        )
    params = bundle.svm_params()
    w = bundle.window
    d = w * 6
    if params.input_size != d:
        raise CapacityExceededError(
            f"bundle window {w} gives input {d}, model expects {params.input_size}"
        )
    n_sv = params.support.shape[0]
    b = _Builder(config)
    sensor = b.sensor("sensor", d)
    mu, isig = _norm_constants(b, bundle, tile=w)
    sv = b.constant("support", bundle.quantized["svm.support"].reshape(-1))
    duals = b.constant("duals", bundle.quantized["svm.duals"])
    # elementwise scale by -gamma; no scalar-broadcast mode exists
    neg_gamma = b.constant("neg_gamma", _q(np.full(n_sv, -params.gamma)))
    if params.one_class:
        rho = b.constant("rho", _q([-params.bias]))
    else:
        neg_bias = b.constant("neg_bias", _q([-params.bias]))
    xn = b.workspace("xn", d)
    diff = b.workspace("diff", d)
    d2 = b.workspace("d2", n_sv)
    kvec = b.workspace("kvec", n_sv)
    ksum = b.workspace("ksum", 1)
    verdict = b.workspace("verdict", 1)

    b.emit(M.VSUB, d, sensor, mu, xn)
    b.emit(M.VMUL, d, xn, isig, xn)
    for i in range(n_sv):
        b.emit(M.VSUB, d, xn, sv + 4 * i * d, diff)
        b.emit(M.VSQNORM, d, diff, 0, d2 + 4 * i)
    b.emit(M.VMUL, n_sv, d2, neg_gamma, d2)
    b.emit(M.VEXP, n_sv, d2, 0, kvec)
    b.mvmul(duals, kvec, ksum, rows=1, cols=n_sv)
    if params.one_class:
        # impostor iff the kernel sum falls below rho
        b.emit(M.VSGT, 1, rho, ksum, verdict)
    else:
        b.emit(M.VSSGT, 1, ksum, neg_bias, verdict)
    return b.finish(verdict, 4 * d, "stateless", bundle.model_kind)


# ---------------------------------------------------------------------------
# LSTM family

def _lstm_constants(b: _Builder, bundle: ModelBundle):
    h = bundle.manifest["hidden_size"]
    gates = {}
    for gate in ("cand", "forget", "input", "output"):
        gates[gate] = (
            b.constant(f"w_{gate}", bundle.quantized[f"lstm.w_{gate}"].reshape(-1)),
            b.constant(f"u_{gate}", bundle.quantized[f"lstm.u_{gate}"].reshape(-1)),
            b.constant(f"b_{gate}", bundle.quantized[f"lstm.b_{gate}"]),
        )
    proj = b.constant("proj", bundle.quantized["lstm.proj"].reshape(-1))
    proj_bias = b.constant("proj_bias", bundle.quantized["lstm.proj_bias"])
    return h, gates, proj, proj_bias


def _lstm_workspace(b: _Builder, h: int):
    return {
        "h": b.workspace("h", h),
        "c": b.workspace("c", h),
        "wx": b.workspace("wx", h),
        "cand": b.workspace("g_cand", h),
        "forget": b.workspace("g_forget", h),
        "input": b.workspace("g_input", h),
        "output": b.workspace("g_output", h),
        "tmp": b.workspace("tmp", h),
        "pred": b.workspace("pred", 6),
        "pdiff": b.workspace("pdiff", 6),
    }


def _emit_lstm_step(b: _Builder, h: int, gates, proj, proj_bias, ws, x_addr: int):
    """One cell update from the reading at x_addr; leaves the next-reading
    prediction in ws['pred']."""
    for gate, act in (("cand", M.VTANH), ("forget", M.VSIG),
                      ("input", M.VSIG), ("output", M.VSIG)):
        w_addr, u_addr, b_addr = gates[gate]
        g = ws[gate]
        b.mvmul(w_addr, x_addr, ws["wx"], rows=h, cols=6)
        b.mvmul(u_addr, ws["h"], g, rows=h, cols=h)
        b.emit(M.VADD, h, g, ws["wx"], g)
        b.emit(M.VADD, h, g, b_addr, g)
        b.emit(act, h, g, 0, g)
    b.emit(M.VMUL, h, ws["forget"], ws["c"], ws["tmp"])   # f (.) c_prev
    b.emit(M.VMUL, h, ws["input"], ws["cand"], ws["c"])   # i (.) cand
    b.emit(M.VADD, h, ws["tmp"], ws["c"], ws["c"])
    b.emit(M.VTANH, h, ws["c"], 0, ws["tmp"])
    b.emit(M.VMUL, h, ws["output"], ws["tmp"], ws["h"])
    b.mvmul(proj, ws["h"], ws["pred"], rows=6, cols=h)
    b.emit(M.VADD, 6, ws["pred"], proj_bias, ws["pred"])


def _ped_constants(b: _Builder, bundle: ModelBundle):
    """Boundaries are stored nudged +1 LSB so the strict hardware compare
    realizes 'error <= boundary' exactly on quantized values."""
    meta = bundle.manifest["ped"]
    refs = []
    for j in range(meta["count"]):
        bq = bundle.quantized[f"ped.{j:02d}.boundaries"].astype(np.int64) + 1
        bplus = b.constant(f"ped{j:02d}.bounds", np.minimum(bq, fx.RAW_MAX))
        cum = b.constant(f"ped{j:02d}.cum", bundle.quantized[f"ped.{j:02d}.cum"])
        thr = b.constant(f"ped{j:02d}.T", _q([meta["thresholds"][j]]))
        refs.append((bplus, cum, thr))
    return meta["n"], meta["m"], refs


def _emit_ks_votes(b: _Builder, n, m, refs, errors):
    """Per reference: the five-step histogram compare; votes accumulate into
    a running count which the caller compares against half the vote count."""
    acc = b.workspace("ks_acc", m)
    bits = b.workspace("ks_bits", m)
    kdiff = b.workspace("ks_diff", m)
    nd = b.workspace("ks_nd", 1)
    vote = b.workspace("vote", 1)
    vote_acc = b.workspace("vote_acc", 1)
    for j, (bplus, cum, thr) in enumerate(refs):
        for i in range(n):
            if i == 0:
                b.emit(M.VSSGT, m, bplus, errors, acc)
            else:
                b.emit(M.VSSGT, m, bplus, errors + 4 * i, bits)
                b.emit(M.VADD, m, acc, bits, acc)
        b.emit(M.VSUB, m, acc, cum, kdiff)
        b.emit(M.VMAXABS, m, kdiff, 0, nd)
        if j == 0:
            b.emit(M.VSSGT, 1, nd, thr, vote_acc)
        else:
            b.emit(M.VSSGT, 1, nd, thr, vote)
            b.emit(M.VADD, 1, vote_acc, vote, vote_acc)
    return vote_acc


def compile_ped_lstm_vote(bundle: ModelBundle, config: MachineConfig,
                          window_size: int | None = None,
                          layout: str = "window") -> CompiledProgram:
    return _compile_lstm_kind(bundle, config, window_size, layout, voting=True)


def compile_lstm_th(bundle: ModelBundle, config: MachineConfig,
                    window_size: int | None = None,
                    layout: str = "window") -> CompiledProgram:
    return _compile_lstm_kind(bundle, config, window_size, layout, voting=False)


def _compile_lstm_kind(bundle, config, window_size, layout, voting):
    w = window_size or bundle.window
    n_err = w - 1
    if layout == "auto":
        layout = "window"
        try:
            return _compile_lstm_kind(bundle, config, window_size, "window", voting)
        except CapacityExceededError:
            return _compile_lstm_kind(bundle, config, window_size, "streaming", voting)
    if layout not in ("window", "streaming"):
        raise ValueError(f"unknown layout {layout!r}")

    b = _Builder(config)
    if layout == "window":
        sensor = b.sensor("sensor", w * 6)
        mu, isig = _norm_constants(b, bundle, tile=w)
    else:
        sensor = b.sensor("sensor", 6)
        mu, isig = _norm_constants(b, bundle, tile=1)
    h, gates, proj, proj_bias = _lstm_constants(b, bundle)
    if voting:
        n, m, refs = _ped_constants(b, bundle)
        if n != n_err:
            raise CapacityExceededError(
                f"reference PEDs expect {n} errors, window {w} produces {n_err}"
            )
        half = b.constant("half_votes", _q([len(refs) / 2.0]))
    else:
        theta = bundle.manifest["threshold"]
        sum_threshold = b.constant("sum_threshold", _q([n_err * theta]))
        ones_row = b.constant("ones_row", _q(np.ones(n_err)))
    if layout == "streaming" and n_err > 1:
        zeros_shift = b.constant("zeros_shift", np.zeros(n_err - 1, dtype=np.int32))

    ws = _lstm_workspace(b, h)
    errors = b.workspace("errors", n_err)
    if layout == "window":
        xn = b.workspace("xn", w * 6)
        b.emit(M.VSUB, w * 6, sensor, mu, xn)
        b.emit(M.VMUL, w * 6, xn, isig, xn)
        for t in range(n_err):
            _emit_lstm_step(b, h, gates, proj, proj_bias, ws, xn + 4 * 6 * t)
            b.emit(M.VSUB, 6, ws["pred"], xn + 4 * 6 * (t + 1), ws["pdiff"])
            b.emit(M.VSQNORM, 6, ws["pdiff"], 0, errors + 4 * t)
    else:
        xn = b.workspace("xn", 6)
        b.emit(M.VSUB, 6, sensor, mu, xn)
        b.emit(M.VMUL, 6, xn, isig, xn)
        # score the previous invocation's prediction, then slide the ring
        b.emit(M.VSUB, 6, xn, ws["pred"], ws["pdiff"])
        if n_err > 1:
            b.emit(M.VADD, n_err - 1, errors + 4, zeros_shift, errors)
        b.emit(M.VSQNORM, 6, ws["pdiff"], 0, errors + 4 * (n_err - 1))
        _emit_lstm_step(b, h, gates, proj, proj_bias, ws, xn)

    verdict = b.workspace("verdict", 1)
    if voting:
        vote_acc = _emit_ks_votes(b, n_err, m, refs, errors)
        b.emit(M.VSSGT, 1, vote_acc, half, verdict)
        kind = "ped_lstm_vote"
    else:
        errsum = b.workspace("errsum", 1)
        b.mvmul(ones_row, errors, errsum, rows=1, cols=n_err)
        b.emit(M.VSSGT, 1, errsum, sum_threshold, verdict)
        kind = "lstm_th"
    sensor_cap = (w * 6 * 4) if layout == "window" else 24
    return b.finish(verdict, sensor_cap, layout, kind)


# ---------------------------------------------------------------------------

def compile_bundle(bundle: ModelBundle, config: MachineConfig,
                   layout: str = "window") -> CompiledProgram:
    """Route a bundle to its compiler. Layout applies to LSTM-family kinds."""
    kind = bundle.model_kind
    if kind == "mlp":
        return compile_mlp(bundle, config)
    if kind in ("svm", "ocsvm"):
        return compile_svm(bundle, config)
    if kind == "ped_lstm_vote":
        return compile_ped_lstm_vote(bundle, config, layout=layout)
    if kind == "lstm_th":
        return compile_lstm_th(bundle, config, layout=layout)
    raise UnknownModelKindError(kind)
