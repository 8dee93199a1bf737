"""Run detectors in reference (float64) and simulated (fixed-point) modes.

The reference path is the accuracy ground truth; the simulated path boots a
machine per window, injects raw quantized readings, runs the compiled
program, and reads the verdict word. Both paths share the bundle, so any
disagreement is quantization (weights, LUT segments, Q16.16 arithmetic),
which the fidelity report measures as a decision-margin band.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import detection as det
from . import fixedpoint as fx
from .bundle import ModelBundle
from .codegen import CompiledProgram, compile_bundle
from .errors import UnknownModelKindError
from .simulator import MachineConfig, MachineState, boot


def normalize_window(bundle: ModelBundle, window: np.ndarray) -> np.ndarray:
    mu, sigma = bundle.norm_stats()
    return (np.asarray(window, dtype=np.float64) - mu) / sigma


@dataclass
class Verdict:
    impostor: bool
    statistic: float     # signed decision statistic, > 0 means impostor
    cycles: int = 0
    wall_time_s: float = 0.0
    overflow: bool = False


def reference_verdict(bundle: ModelBundle, window: np.ndarray) -> Verdict:
    """Float64 reference decision for one raw (W, 6) window."""
    xn = normalize_window(bundle, window)
    kind = bundle.model_kind
    if kind == "mlp":
        scores = det.mlp_forward(bundle.mlp_params(), xn)
        return Verdict(bool(scores[1] > scores[0]), float(scores[1] - scores[0]))
    if kind in ("svm", "ocsvm"):
        score = det.svm_decision(bundle.svm_params(), xn)
        return Verdict(score > 0.0, score)
    if kind == "lstm_th":
        errors = det.prediction_errors(bundle.lstm_params(), xn)
        theta = bundle.manifest["threshold"]
        mean = float(np.mean(errors))
        return Verdict(mean > theta, mean - theta)
    if kind == "ped_lstm_vote":
        errors = det.prediction_errors(bundle.lstm_params(), xn)
        refs = bundle.ped_references()
        votes = sum(s > r.threshold for r in refs
                    for s, _ in [det.hardware_ks(errors, r)])
        return Verdict(2 * votes > len(refs), votes - len(refs) / 2.0)
    raise UnknownModelKindError(kind)


class SimulatedRunner:
    """Owns one machine and a compiled program; evaluates raw windows."""

    def __init__(self, bundle: ModelBundle, config: MachineConfig,
                 compiled: CompiledProgram | None = None, layout: str = "window"):
        self.bundle = bundle
        self.config = config
        self.compiled = compiled or compile_bundle(bundle, config, layout=layout)
        self._luts = bundle.lut_tables()

    def _boot(self) -> MachineState:
        return boot(self.config, self.compiled.program, luts=self._luts,
                    sensor_capacity_bytes=self.compiled.sensor_capacity_bytes)

    def _read_statistic(self, state: MachineState) -> float:
        sym = self.compiled.symbols
        kind = self.compiled.model_kind

        def word(name):
            return float(fx.dequantize(int(state.ram[sym[name][0] // 4])))

        if kind == "mlp":
            addr = sym["scores"][0] // 4
            return float(fx.dequantize(int(state.ram[addr + 1]))
                         - fx.dequantize(int(state.ram[addr])))
        if kind == "svm":
            return word("ksum") - word("neg_bias")
        if kind == "ocsvm":
            return word("rho") - word("ksum")
        if kind == "lstm_th":
            # same units as the reference statistic: mean error minus theta
            return (word("errsum") - word("sum_threshold")) / (self.bundle.window - 1)
        if kind == "ped_lstm_vote":
            return word("vote_acc") - word("half_votes")
        raise UnknownModelKindError(kind)

    def evaluate(self, window: np.ndarray, max_cycles: int = 2_000_000_000) -> Verdict:
        """Verdict for one raw window. Streaming programs are invoked once
        per reading, as the hardware would be; cycles report the final
        (worst, vote-carrying) invocation."""
        state = self._boot()
        window = np.atleast_2d(np.asarray(window, dtype=np.float64))
        if self.compiled.layout == "streaming":
            result = None
            for t in range(window.shape[0]):
                before = state.cycles
                state.inject_sensor_window(window[t : t + 1])
                result = state.run(max_cycles=max_cycles)
                last_invocation = result.cycles - before
            cycles = last_invocation
        else:
            state.inject_sensor_window(window)
            result = state.run(max_cycles=max_cycles)
            cycles = result.cycles
        raw = int(state.ram[self.compiled.result_addr // 4])
        return Verdict(
            impostor=raw == fx.ONE,
            statistic=self._read_statistic(state),
            cycles=cycles,
            wall_time_s=cycles / self.config.clock_hz,
            overflow=result.overflow,
        )


@dataclass
class FidelityReport:
    """Agreement between simulated and reference verdicts over many windows."""

    windows: int = 0
    agreements: int = 0
    band: float = 0.0                      # max |sim stat - ref stat| observed
    disagreement_margins: list = field(default_factory=list)

    @property
    def agreement_rate(self) -> float:
        return self.agreements / self.windows if self.windows else 1.0

    def disagreements_inside_band(self) -> bool:
        return all(abs(m) <= self.band for m in self.disagreement_margins)


def measure_fidelity(bundle: ModelBundle, config: MachineConfig,
                     windows: np.ndarray, layout: str = "window") -> FidelityReport:
    runner = SimulatedRunner(bundle, config, layout=layout)
    report = FidelityReport()
    for window in windows:
        ref = reference_verdict(bundle, window)
        sim = runner.evaluate(window)
        report.windows += 1
        report.band = max(report.band, abs(sim.statistic - ref.statistic))
        if sim.impostor == ref.impostor:
            report.agreements += 1
        else:
            report.disagreement_margins.append(ref.statistic)
    return report


def apply_alpha(bundle: ModelBundle, alpha: float) -> ModelBundle:
    """Copy of a PED-vote bundle with thresholds re-derived for alpha.

    Boundaries and cumulative histograms stay put; only the pre-scaled
    rejection thresholds depend on the significance level.
    """
    if bundle.model_kind != "ped_lstm_vote" or bundle.alpha == alpha:
        return bundle
    manifest = json.loads(json.dumps(bundle.manifest))
    meta = manifest["ped"]
    meta["thresholds"] = [det.scaled_ks_threshold(alpha, meta["n"], meta["m"])
                          for _ in range(meta["count"])]
    manifest["alpha"] = alpha
    return ModelBundle(manifest, bundle.arrays, bundle.quantized)


# ---------------------------------------------------------------------------
# Pair protocol: every registered user's model against every user's windows

@dataclass
class PairResult:
    registered: int
    candidate: int
    counts: det.MetricCounts
    max_cycles: int = 0
    overflow: bool = False


@dataclass
class EvaluationReport:
    model_kind: str
    mode: str                       # "reference" | "simulated"
    window: int
    tracks: int
    clock_hz: int
    pairs: list[PairResult] = field(default_factory=list)
    image_bytes: int = 0            # compiled data segment (constants)
    instruction_bytes: int = 0
    bundle_bytes: int = 0           # quantized model payload in the bundle

    @property
    def aggregate_counts(self) -> det.MetricCounts:
        total = det.MetricCounts()
        for p in self.pairs:
            total = total + p.counts
        return total

    def rates(self) -> dict:
        """TNR over same-user pairs, TPR over impostor pairs, and the
        balanced accuracy (TNR+TPR)/2 the tables report."""
        same = det.MetricCounts()
        diff = det.MetricCounts()
        for p in self.pairs:
            if p.registered == p.candidate:
                same = same + p.counts
            else:
                diff = diff + p.counts
        tnr = det.compute_metrics(same).tnr
        tpr = det.compute_metrics(diff).tpr
        balanced = None if tnr is None or tpr is None else (tnr + tpr) / 2.0
        out = {"tnr": tnr, "tpr": tpr, "balanced_accuracy": balanced}
        out.update({f"overall_{k}": v for k, v in
                    det.compute_metrics(self.aggregate_counts).as_dict().items()})
        return out

    @property
    def max_cycles(self) -> int:
        return max((p.max_cycles for p in self.pairs), default=0)

    @property
    def wall_time_s(self) -> float:
        return self.max_cycles / self.clock_hz

    def report_lines(self) -> list[str]:
        rates = self.rates()
        agg = self.aggregate_counts
        lines = [
            f"model={self.model_kind}",
            f"mode={self.mode}",
            f"window={self.window}",
            f"tracks={self.tracks}",
            f"pairs={len(self.pairs)}",
            f"tn={agg.tn}", f"fp={agg.fp}", f"tp={agg.tp}", f"fn={agg.fn}",
        ]
        for key, value in rates.items():
            lines.append(f"{key}={'nan' if value is None else f'{value:.6f}'}")
        lines += [
            f"image_bytes={self.image_bytes}",
            f"instruction_bytes={self.instruction_bytes}",
            f"bundle_bytes={self.bundle_bytes}",
            f"max_cycles={self.max_cycles}",
            f"wall_time_s={self.wall_time_s:.9f}",
        ]
        return lines


def _evaluate_pair_group(task):
    """All pairs of one registered user's model; runs in its own process
    when jobs > 1 (machines share no state, so this is embarrassingly
    parallel)."""
    bundle, group, mode, config, layout = task
    runner = SimulatedRunner(bundle, config, layout=layout) if mode == "simulated" else None
    results = []
    for u, v, windows in group:
        counts = det.MetricCounts()
        max_cycles = 0
        overflow = False
        for win in windows:
            if runner is None:
                verdict = reference_verdict(bundle, win)
            else:
                verdict = runner.evaluate(win)
                max_cycles = max(max_cycles, verdict.cycles)
                overflow = overflow or verdict.overflow
            if u == v:
                counts = counts + (det.MetricCounts(fp=1) if verdict.impostor
                                   else det.MetricCounts(tn=1))
            else:
                counts = counts + (det.MetricCounts(tp=1) if verdict.impostor
                                   else det.MetricCounts(fn=1))
        results.append(PairResult(u, v, counts, max_cycles, overflow))
    compiled = runner.compiled if runner else None
    sizes = (compiled.image_bytes, compiled.instruction_bytes) if compiled else (0, 0)
    return results, sizes


def evaluate_pairs(bundles: dict[int, ModelBundle], dataset, split, window: int,
                   mode: str = "reference", config: MachineConfig | None = None,
                   pairs: list[tuple[int, int]] | None = None,
                   alpha: float | None = None,
                   layout: str = "window", jobs: int = 1) -> EvaluationReport:
    """Run the pair protocol. `bundles` maps registered user -> ModelBundle;
    same-user pairs contribute negatives, impostor pairs positives. With
    jobs > 1, per-user pair groups run on parallel worker processes; report
    assembly stays single-threaded and the pair order deterministic."""
    from . import data as dat
    from .errors import MissingBundleError

    config = config or MachineConfig()
    pairs = pairs if pairs is not None else split.pairs()
    report = EvaluationReport(
        model_kind=next(iter(bundles.values())).model_kind if bundles else "?",
        mode=mode, window=window, tracks=config.n_tracks, clock_hz=config.clock_hz,
    )
    windows_cache: dict[int, list] = {}
    grouped: dict[int, list] = {}
    order = []
    for u, v in pairs:
        if u not in bundles:
            raise MissingBundleError(f"no bundle for registered user {u}")
        if v not in windows_cache:
            windows_cache[v] = dat.partition_windows(dataset, v, "test", window, split)
        grouped.setdefault(u, []).append((u, v, windows_cache[v]))
        order.append((u, v))

    adjusted = {u: (bundles[u] if alpha is None else apply_alpha(bundles[u], alpha))
                for u in grouped}
    tasks = [(adjusted[u], group, mode, config, layout) for u, group in grouped.items()]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate_pair_group, tasks))
    else:
        outcomes = [_evaluate_pair_group(t) for t in tasks]

    by_pair = {}
    for (results, sizes) in outcomes:
        for r in results:
            by_pair[(r.registered, r.candidate)] = r
        report.image_bytes = max(report.image_bytes, sizes[0])
        report.instruction_bytes = max(report.instruction_bytes, sizes[1])
    for u in grouped:
        report.bundle_bytes = max(report.bundle_bytes, adjusted[u].image_bytes())
    report.pairs = [by_pair[key] for key in order]
    return report
