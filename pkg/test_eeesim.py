#!/usr/bin/env python3
"""
Test script for the eeesim link policy simulator.

This script checks the simulator components end to end: unit handling,
trace synthesis and ingestion, Hurst estimation, the traffic predictor,
the link simulation under all three policies, the closed forms and the
command-line surface. Each section collects problems into an error list
and asserts it is empty, so the file runs both under pytest and directly
with ``python test_eeesim.py``.
"""

import asyncio
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Callable, List, Tuple

import numpy as np

# Add src to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

# Small windows keep randomized runs fast: 6 windows of 10 ms, 1 ms burst units
SMALL_T, SMALL_T_PRIME, SMALL_T_B = 0.010, 0.005, 0.001


def _finish(errors: List[str]) -> None:
    assert not errors, "\n".join(errors)


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def _random_trace(rng: np.random.Generator, duration: float, max_packets: int = 80):
    from src.engine.traffic_model import TrafficTrace

    duration_ns = int(round(duration * 1e9))
    n = int(rng.integers(0, max_packets + 1))
    arrivals = np.sort(rng.integers(0, duration_ns, n))
    sizes = rng.integers(64, 12001, n)
    return TrafficTrace(arrivals, sizes, duration, 1_000_000_000, 'random')


def _small_strategy(theta: float = 2.0, H_bar: float = 0.6, hurst_override=0.9,
                    p_tau: float = 0.0, faithful: bool = True):
    from src.engine.link_sim import StrategyConfig
    from src.engine.predictor import PredictionConfig

    return StrategyConfig(
        T=SMALL_T,
        T_prime=SMALL_T_PRIME,
        T_B=SMALL_T_B,
        prediction=PredictionConfig(theta=theta, H_bar=H_bar, p_tau=p_tau,
                                    hurst_override=hurst_override),
        model_faithful_eee=faithful,
    )


def test_imports() -> None:
    """Test that all modules can be imported successfully."""
    errors = []

    modules = [
        ('src.config.settings', 'settings'),
        ('src.config.experiment', 'ExperimentConfig'),
        ('src.utils.units', 'UnitParser'),
        ('src.utils.validators', 'InputValidator'),
        ('src.utils.formatters', 'ReportFormatter'),
        ('src.utils.presets', 'PresetManager'),
        ('src.engine.traffic_model', 'synthesize_trace'),
        ('src.engine.selfsimilarity', 'estimate_hurst'),
        ('src.engine.predictor', 'TrafficPredictor'),
        ('src.engine.link_sim', 'simulate_policy'),
        ('src.engine.theory', 'bounds_report'),
        ('src.commands.base', 'BaseCommand'),
        ('src.cli', 'build_parser'),
    ]
    for module, attr in modules:
        try:
            imported = __import__(module, fromlist=[attr])
            getattr(imported, attr)
            print(f"✓ {module} imported successfully")
        except Exception as e:
            errors.append(f"{module} import failed: {e}")

    _finish(errors)


def test_units_and_validators() -> None:
    """Test unit conversion, value lists and validators."""
    from src.utils.units import UnitFormatError, UnitParser
    from src.utils.validators import InputValidator, ValidationError

    errors = []

    conversions = [
        (UnitParser.seconds_to_ns(0.000202), 202000),
        (UnitParser.ms_to_ns(0.0165), 16500),
        (UnitParser.serialization_ns(8000, 1_000_000_000), 8000),
        (UnitParser.serialization_ns(1, 3), 333333334),
    ]
    for got, expected in conversions:
        if got != expected:
            errors.append(f"Conversion gave {got}, expected {expected}")
    print("✓ Unit conversions")

    if UnitParser.format_duration(202000) != '0.202 ms':
        errors.append(f"format_duration(202000) -> {UnitParser.format_duration(202000)}")

    ranges = [
        ("0:0.8:0.1", ['0', '0.1', '0.2', '0.3', '0.4', '0.5', '0.6', '0.7', '0.8']),
        ("1,5, 10", ['1', '5', '10']),
        ("2:2:1", ['2']),
    ]
    for text, expected in ranges:
        got = UnitParser.parse_value_list(text)
        if got != expected:
            errors.append(f"parse_value_list({text!r}) -> {got}, expected {expected}")
        else:
            print(f"✓ Value list {text!r} -> {len(got)} values")

    for bad in ["", "1:2", "0:1:0", "5:1:1", "a:b:c"]:
        try:
            UnitParser.parse_value_list(bad)
            errors.append(f"Should have rejected value list {bad!r}")
        except UnitFormatError:
            pass

    rejected = [
        lambda: InputValidator.validate_positive("x", 0),
        lambda: InputValidator.validate_non_negative("x", -1),
        lambda: InputValidator.validate_number("x", "nan"),
        lambda: InputValidator.validate_number("x", True),
        lambda: InputValidator.validate_int("x", 2.5),
        lambda: InputValidator.validate_bool("x", "maybe"),
        lambda: InputValidator.validate_choice("x", "z", ['a', 'b']),
        lambda: InputValidator.validate_multiple_of("T", 1500, "T_B", 1000),
    ]
    for check in rejected:
        try:
            check()
            errors.append("Validator accepted an invalid value")
        except ValidationError:
            pass
    print("✓ Validators reject invalid input")

    if InputValidator.validate_bool("x", "yes") is not True:
        errors.append("validate_bool('yes') should be True")
    if InputValidator.validate_int("x", "7") != 7:
        errors.append("validate_int('7') should be 7")

    _finish(errors)


def test_traffic_model() -> None:
    """Test Pareto sampling, synthesis, binning, aggregation and trace files."""
    from src.engine.traffic_model import (LoadSeries, ParetoSourceConfig, TraceFormatError,
                                          TrafficTrace, aggregate_series, bin_trace,
                                          export_trace_file, ingest_trace_file, pareto_sample,
                                          synthesize_poisson_trace, synthesize_trace, trace_stats)
    from src.utils.validators import ValidationError

    errors = []

    if pareto_sample(1.0, 1.0, 0.5) != 2.0:
        errors.append(f"pareto_sample(1, 1, 0.5) -> {pareto_sample(1.0, 1.0, 0.5)}")
    if not _close(pareto_sample(2.0, 3.0, 0.25), 6.0, 1e-12):
        errors.append("pareto_sample(2, 3, 0.25) should be 6")
    for bad_u in [0.0, -0.1, 1.5]:
        try:
            pareto_sample(1.0, 1.0, bad_u)
            errors.append(f"pareto_sample accepted u={bad_u}")
        except ValidationError:
            pass
    samples = pareto_sample(1.5, 1.0, 1.0 - np.random.default_rng(3).random(20000))
    if samples.min() < 1.0:
        errors.append("Pareto samples below the location b")
    tail = float(np.mean(samples > 4.0))
    if not _close(tail, 4.0 ** -1.5, 0.01):
        errors.append(f"Pareto tail P[X>4] = {tail:.4f}, expected {4.0 ** -1.5:.4f}")
    print("✓ Pareto sampling")

    cfg = ParetoSourceConfig(M=10, alpha=1.2, seed=11)
    first = synthesize_trace(cfg, 2.0, 0.001, 1_000_000_000)
    again = synthesize_trace(cfg, 2.0, 0.001, 1_000_000_000)
    other = synthesize_trace(ParetoSourceConfig(M=10, alpha=1.2, seed=12), 2.0, 0.001, 1_000_000_000)
    if first != again:
        errors.append("Synthesis is not deterministic for a fixed seed")
    if first == other:
        errors.append("Different seeds produced the same trace")
    counts = np.bincount(first.arrival_ns // 1_000_000, minlength=2000)
    if counts.max() > cfg.M:
        errors.append(f"More packets per tick ({counts.max()}) than sources ({cfg.M})")
    if np.any(first.arrival_ns % 1_000_000 != 0):
        errors.append("Pareto packets must start on tick boundaries")
    print(f"✓ Deterministic synthesis ({len(first)} packets)")

    empty = synthesize_trace(ParetoSourceConfig(M=0), 1.0, 0.001, 1_000_000_000)
    if len(empty) != 0:
        errors.append("M=0 must give an empty trace")
    else:
        print("✓ M=0 gives an empty trace")

    poisson = synthesize_poisson_trace(5.0, 8000, 10.0, 0.001, 1_000_000_000, seed=2)
    if not _close(len(poisson) / 10000, 5.0, 0.1):
        errors.append(f"Poisson trace has {len(poisson) / 10000:.3f} packets per tick")

    series = LoadSeries(tick=0.001, values=[1, 2, 3, 4])
    if list(aggregate_series(series, 2).values) != [1.5, 3.5]:
        errors.append(f"aggregate [1,2,3,4] a=2 -> {aggregate_series(series, 2).values}")
    if list(aggregate_series(series, 1).values) != [1, 2, 3, 4]:
        errors.append("aggregate with a=1 must be the identity")
    if len(aggregate_series(LoadSeries(0.001, np.arange(7)), 3)) != 2:
        errors.append("Trailing partial block must be dropped")
    try:
        aggregate_series(series, 0)
        errors.append("aggregate_series accepted a=0")
    except ValidationError:
        pass
    print("✓ Aggregation")

    binned = bin_trace(first, 0.001)
    if int(binned.values.sum()) != first.total_bits or len(binned) != 2000:
        errors.append("bin_trace must conserve bits over ceil(L/tick) bins")
    partial = bin_trace(first, 0.003)
    if len(partial) != 667 or int(partial.values.sum()) != first.total_bits:
        errors.append("bin_trace with a partial last bin lost packets")
    print("✓ Binning conserves bits")

    stats = trace_stats(poisson, 0.001)
    if not _close(stats.n_bar, len(poisson) / 10000, 1e-12) or stats.mean_size_bits != 8000:
        errors.append(f"trace_stats gave {stats}")
    if not _close(stats.t_pack_bar, 8e-6, 1e-15):
        errors.append(f"t_pack_bar {stats.t_pack_bar}")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)

        path = export_trace_file(first, tmp / 'trace.csv')
        reread = ingest_trace_file(path)
        if reread != first:
            errors.append("Export followed by ingest changed the trace")
        else:
            print("✓ Exported trace reads back unchanged")

        (tmp / 'plain.csv').write_text("time_ns,size_bits\n500,100\n700,200\n")
        plain = ingest_trace_file(tmp / 'plain.csv')
        if list(plain.arrival_ns) != [0, 200] or plain.duration_ns != 201:
            errors.append(f"Header-less trace not normalized: {list(plain.arrival_ns)}, "
                          f"{plain.duration_ns} ns")

        (tmp / 'unsorted.csv').write_text("time_ns,size_bits\n0,100\n900,200\n300,300\n")
        relaxed = ingest_trace_file(tmp / 'unsorted.csv')
        if list(relaxed.size_bits) != [100, 300, 200]:
            errors.append("Unsorted trace was not sorted in lenient mode")
        try:
            ingest_trace_file(tmp / 'unsorted.csv', strict=True)
            errors.append("Strict mode accepted unsorted timestamps")
        except TraceFormatError as e:
            if 'line 4' not in str(e):
                errors.append(f"Strict error should name line 4: {e}")

        bad_files = {
            'empty.csv': ("", None),
            'noheader.csv': ("0,100\n", 'line 1'),
            'columns.csv': ("time_ns,size_bits\n0,100,5\n", 'line 2'),
            'text.csv': ("time_ns,size_bits\n0,100\nabc,5\n", 'line 3'),
            'zero.csv': ("time_ns,size_bits\n0,0\n", 'line 2'),
        }
        for name, (body, where) in bad_files.items():
            (tmp / name).write_text(body)
            try:
                ingest_trace_file(tmp / name)
                errors.append(f"{name} should have been rejected")
            except TraceFormatError as e:
                if where and where not in str(e):
                    errors.append(f"{name}: error should name {where}: {e}")
        print("✓ Malformed trace files rejected with line numbers")

    try:
        TrafficTrace(np.array([5, 2]), np.array([1, 1]), 1.0, 1_000_000_000)
        errors.append("TrafficTrace accepted unsorted arrivals")
    except ValidationError:
        pass

    _finish(errors)


def test_selfsimilarity() -> None:
    """Test autocovariances, variance-time points and Hurst estimates."""
    from src.engine.selfsimilarity import (DegenerateSeriesError, estimate_hurst,
                                           exact_ss_autocovariance, fit_slope,
                                           sample_autocovariance, variance_time_points,
                                           VarianceTimePoint)
    from src.engine.traffic_model import LoadSeries, ParetoSourceConfig, bin_trace, synthesize_trace

    errors = []

    x = LoadSeries(0.001, np.random.default_rng(5).normal(size=1000))
    if not _close(sample_autocovariance(x, 0), float(np.var(x.values)), 1e-12):
        errors.append("Lag-0 autocovariance must equal the biased variance")

    n = 1000
    alternating = LoadSeries(0.001, np.tile([1.0, -1.0], n // 2))
    if not _close(sample_autocovariance(alternating, 1), -(n - 1) / n, 1e-12):
        errors.append(f"Alternating series lag 1 -> {sample_autocovariance(alternating, 1)}")
    for bad_k in [-1, n]:
        try:
            sample_autocovariance(alternating, bad_k)
            errors.append(f"Lag {bad_k} should be rejected")
        except DegenerateSeriesError:
            pass
    print("✓ Sample autocovariance")

    exact = [
        ((1, 0.5, 1.0), 0.0),
        ((1, 1.0, 1.0), 1.0),
        ((2, 0.75, 1.0), 0.5 * (3 ** 1.5 - 2 * 2 ** 1.5 + 1)),
    ]
    for args, expected in exact:
        got = exact_ss_autocovariance(*args)
        if not _close(got, expected, 1e-9):
            errors.append(f"exact_ss_autocovariance{args} -> {got}, expected {expected}")
    if not _close(exact_ss_autocovariance(2, 0.75, 1.0), 0.26965, 1e-5):
        errors.append("exact_ss_autocovariance(2, 0.75) should be about 0.26965")
    print("✓ Exact self-similar autocovariance")

    points = [VarianceTimePoint(a, math.log10(a), 2.0 - 0.4 * math.log10(a)) for a in (1, 2, 4, 8)]
    if not _close(fit_slope(points), -0.4, 1e-12):
        errors.append(f"fit_slope on an exact line -> {fit_slope(points)}")

    for degenerate in [LoadSeries(0.001, np.full(1000, 3.0)), LoadSeries(0.001, np.arange(15.0))]:
        try:
            estimate_hurst(degenerate)
            errors.append("Degenerate series should not yield a Hurst estimate")
        except DegenerateSeriesError:
            pass
    try:
        variance_time_points(LoadSeries(0.001, np.arange(10.0)), [1, 8])
        errors.append("Aggregation leaving one value should be rejected")
    except DegenerateSeriesError:
        pass
    print("✓ Degenerate series rejected")

    iid = LoadSeries(0.001, np.random.default_rng(42).random(100_000))
    h_iid = estimate_hurst(iid).H_hat
    if not _close(h_iid, 0.5, 0.05):
        errors.append(f"i.i.d. series: H = {h_iid:.3f}, expected 0.50 ± 0.05")
    else:
        print(f"✓ i.i.d. series H = {h_iid:.3f}")

    low = bin_trace(synthesize_trace(ParetoSourceConfig(M=10, alpha=1.8, seed=1),
                                     200.0, 0.001, 1_000_000_000), 0.001)
    h_low = estimate_hurst(low).H_hat
    if not 0.60 <= h_low <= 0.72:
        errors.append(f"alpha=1.8 trace: H = {h_low:.3f}, expected in [0.60, 0.72]")
    else:
        print(f"✓ alpha=1.8 trace H = {h_low:.3f}")

    high = bin_trace(synthesize_trace(ParetoSourceConfig(M=10, alpha=1.0, seed=1),
                                      200.0, 0.001, 1_000_000_000), 0.001)
    estimate = estimate_hurst(high)
    if estimate.H_hat < 0.85:
        errors.append(f"alpha=1 trace: H = {estimate.H_hat:.3f}, expected >= 0.85")
    else:
        print(f"✓ alpha=1 trace H = {estimate.H_hat:.3f}")
    if not 0.0 <= estimate.H_clamped <= 1.0:
        errors.append("Clamped H outside [0, 1]")
    if not _close(estimate.H_hat, 1.0 + estimate.beta_hat / 2.0, 1e-12):
        errors.append("H_hat must be exactly 1 + beta/2")

    _finish(errors)


def test_predictor() -> None:
    """Test quantization, table updates, convergence and predictions."""
    from src.engine.predictor import (CondProbTable, PredictionConfig, QuantizerState,
                                      TrafficPredictor, WindowObservation, compute_tau,
                                      diagonal_concentration, expected_future_load,
                                      has_converged, observe_window, quantize_level)

    errors = []

    q = QuantizerState(h=10, v_min=0.0, v_max=100.0, initialized=True)
    levels = [(55, 6), (0, 1), (9.99, 1), (10, 2), (100, 10), (1e9, 10), (-5, 1)]
    for v, expected in levels:
        if quantize_level(v, q) != expected:
            errors.append(f"quantize_level({v}) -> {quantize_level(v, q)}, expected {expected}")
    flat = QuantizerState(h=10, v_min=7.0, v_max=7.0, initialized=True)
    if quantize_level(123.0, flat) != 1:
        errors.append("A zero-width quantizer must map everything to level 1")

    rng = np.random.default_rng(9)
    for _ in range(1000):
        low, width = rng.uniform(0, 1e6), rng.uniform(0, 1e6)
        state = QuantizerState(h=int(rng.integers(2, 20)), v_min=low, v_max=low + width,
                               initialized=True)
        level = quantize_level(rng.uniform(-1e6, 3e6), state)
        if not 1 <= level <= state.h:
            errors.append(f"Level {level} outside [1, {state.h}]")
            break
    print("✓ Quantizer is total over [1, h]")

    table, quant = CondProbTable(h=10), QuantizerState(h=10)
    if has_converged(table, 0.05):
        errors.append("An empty table cannot have converged")
    if expected_future_load(table, quant, 1) is not None:
        errors.append("An unpopulated row must give no prediction")

    for v1, v2 in rng.uniform(0, 1e6, size=(200, 2)):
        observe_window(table, quant, WindowObservation(v1, v2))
        sums = table.probs.sum(axis=1)
        populated = table.populated_rows()
        if not np.allclose(sums[populated], 1.0) or np.any(sums[~populated] != 0):
            errors.append("P is not row-stochastic over populated rows")
            break
    if table.observations != 200 or int(table.counts.sum()) != 200:
        errors.append("Every observation must add exactly one count")
    print("✓ Conditional table stays row-stochastic")

    fresh, fq = CondProbTable(h=4), QuantizerState(h=4)
    observe_window(fresh, fq, WindowObservation(100.0, 100.0))
    if not has_converged(fresh, 1.0) or has_converged(fresh, 0.5):
        errors.append("First observation moves its row by exactly 1 in L1")

    steady, sq = CondProbTable(h=4), QuantizerState(h=4)
    for _ in range(200):
        observe_window(steady, sq, WindowObservation(10.0, 10.0))
    if not has_converged(steady, 0.01):
        errors.append("Repeated identical windows must converge")

    q2 = QuantizerState(h=10, v_min=0.0, v_max=100.0, initialized=True)
    t2 = CondProbTable(h=10)
    t2.counts[4, 2] = 1
    t2.counts[4, 9] = 1
    t2.rebuild()
    expected = expected_future_load(t2, q2, 5)
    if not _close(expected, 0.5 * 25.0 + 0.5 * 100.0, 1e-9):
        errors.append(f"Expected load {expected}, wanted 62.5 (midpoint 25, top level v_max)")

    tau, delta = compute_tau(1e6, 1e9, 0.2)
    if not (_close(tau, 0.001, 1e-15) and _close(delta, 0.0002, 1e-15)):
        errors.append(f"compute_tau(1e6, 1e9, 0.2) -> {(tau, delta)}")
    scaled = compute_tau(3e6, 1e9, 0.2)
    if not (_close(scaled[0], 3 * tau, 1e-15) and _close(scaled[1], 3 * delta, 1e-15)):
        errors.append("compute_tau must be linear in the bits")
    if compute_tau(0.0, 1e9, 0.5) != (0.0, 0.0):
        errors.append("No expected bits means no tail")
    print("✓ Tau prediction")

    diagonal, anti = CondProbTable(h=5), CondProbTable(h=5)
    for i in range(5):
        diagonal.counts[i, i] = 3
        anti.counts[i, 4 - i] = 3
    diagonal.rebuild()
    anti.rebuild()
    if diagonal_concentration(CondProbTable(h=5)) is not None:
        errors.append("Empty table has no diagonal concentration")
    if diagonal_concentration(diagonal) != 0.0:
        errors.append("A diagonal table has concentration 0")
    if not diagonal_concentration(anti) > diagonal_concentration(diagonal):
        errors.append("Anti-diagonal table should be less concentrated than a diagonal one")
    print("✓ Diagonal concentration ordering")

    predictor = TrafficPredictor(config=PredictionConfig(h=4, theta=1.0))
    predictor.observe(0.0, 5.0)
    predictor.observe(10.0, 5.0)
    level, prediction = predictor.predict(10.0)
    if level != 4 or prediction is None:
        errors.append(f"TrafficPredictor.predict(10) -> {(level, prediction)}")

    _finish(errors)


def test_link_state_machine() -> None:
    """Test transitions, energy accounting and the Always-On baseline."""
    from src.engine.link_sim import (LinkEvent, LinkParams, LinkState, StrategyConfig,
                                     TransitionError, advance_state, energy_accumulate,
                                     run_always_on, run_eee_burst)
    from src.engine.traffic_model import TrafficTrace
    from src.utils.validators import ValidationError

    errors = []

    if advance_state(LinkState.QUIET, LinkEvent.WAKE_REQUEST) is not LinkState.WAKING:
        errors.append("Quiet + wake_request should give Waking")
    if advance_state(LinkState.ACTIVE, LinkEvent.SLEEP_REQUEST) is not LinkState.GOING_TO_SLEEP:
        errors.append("Active + sleep_request should give GoingToSleep")
    for state, event in [(LinkState.ACTIVE, LinkEvent.WAKE_REQUEST),
                         (LinkState.WAKING, LinkEvent.SLEEP_REQUEST),
                         (LinkState.GOING_TO_SLEEP, LinkEvent.WAKE_DONE)]:
        try:
            advance_state(state, event)
            errors.append(f"{event.value} in {state.value} should be illegal")
        except TransitionError:
            pass
    print("✓ Link state machine")

    params = LinkParams()
    if not _close(energy_accumulate({LinkState.ACTIVE: 200.0}, params), 139.4, 1e-9):
        errors.append("200 s Active should cost 139.4 J")
    mixed = energy_accumulate({LinkState.QUIET: 1.0, LinkState.WAKING: 1.0}, params)
    if not _close(mixed, 0.053 + 0.697, 1e-12):
        errors.append("Transitions are charged at pw_on, Quiet at pw_off")
    try:
        energy_accumulate({LinkState.QUIET: -1.0}, params)
        errors.append("Negative residency should be rejected")
    except ValidationError:
        pass

    empty = TrafficTrace(np.array([], dtype=np.int64), np.array([], dtype=np.int64),
                         200.0, 1_000_000_000)
    on = run_always_on(empty, params)
    if not _close(on.energy_J, 139.4, 0.05) or on.quiet_fraction_p != 0.0:
        errors.append(f"Always-On over 200 s: {on.energy_J} J, quiet {on.quiet_fraction_p}")
    else:
        print(f"✓ Always-On energy {on.energy_J:.2f} J")

    short = TrafficTrace(np.array([], dtype=np.int64), np.array([], dtype=np.int64),
                         2.0, 1_000_000_000)
    faithful = run_eee_burst(short, params, StrategyConfig())
    if not _close(faithful.quiet_fraction_p, 0.7815, 1e-9):
        errors.append(f"Empty faithful EEE quiet fraction {faithful.quiet_fraction_p}, expected 0.7815")
    realistic = run_eee_burst(short, params, StrategyConfig(model_faithful_eee=False))
    if realistic.quiet_fraction_p != 1.0:
        errors.append(f"Empty realistic EEE should stay Quiet, got {realistic.quiet_fraction_p}")
    print("✓ Empty-trace EEE in both modes")

    for bad in [StrategyConfig(T=0.1005), StrategyConfig(T_prime=0.1),
                StrategyConfig(T_B=0.0002, T=0.1, T_prime=0.05)]:
        try:
            bad.validate(params)
            errors.append(f"StrategyConfig {bad.T}/{bad.T_prime}/{bad.T_B} should be invalid")
        except ValidationError:
            pass

    _finish(errors)


def test_eee_against_closed_form() -> None:
    """Test simulated EEE against the closed-form quiet fraction and energy."""
    from src.engine.link_sim import LinkParams, StrategyConfig, run_eee_burst
    from src.engine.theory import TheoryInputs, energy_from_quiet_fraction, p_eee_theory
    from src.engine.traffic_model import synthesize_poisson_trace, trace_stats

    errors = []

    # About 7.5% load: 13.3 packets of 5680 bits per millisecond
    trace = synthesize_poisson_trace(13.3, 5680, 20.0, 0.001, 1_000_000_000, seed=7)
    params, cfg = LinkParams(), StrategyConfig()
    stats = trace_stats(trace, cfg.T_B)

    result = run_eee_burst(trace, params, cfg)
    inputs = TheoryInputs(N_bar=stats.n_bar, T_pack_bar=stats.t_pack_bar, L=trace.duration_L)
    p_theory = p_eee_theory(inputs)

    if abs(result.quiet_fraction_p - p_theory) > 0.02:
        errors.append(f"Simulated p_EEE {result.quiet_fraction_p:.4f} vs theory {p_theory:.4f}")
    else:
        print(f"✓ p_EEE simulated {result.quiet_fraction_p:.4f}, theory {p_theory:.4f}")

    energy = energy_from_quiet_fraction(result.quiet_fraction_p, inputs)
    if abs(result.energy_J - energy) > 0.2:
        errors.append(f"Simulated energy {result.energy_J:.3f} J vs {energy:.3f} J")
    if result.overflow:
        errors.append("A 7.5% load must not overflow a burst unit")

    _finish(errors)


def test_overflow() -> None:
    """Test that an overloaded burst unit is flagged and no bits are lost."""
    from src.engine.link_sim import LinkParams, StrategyConfig, run_eee_burst
    from src.engine.traffic_model import TrafficTrace

    errors = []

    # 100 x 8000 bits = 800 us of service, more than T_B - T_trans
    arrivals = np.zeros(100, dtype=np.int64)
    trace = TrafficTrace(arrivals, np.full(100, 8000), 0.01, 1_000_000_000)
    result = run_eee_burst(trace, LinkParams(), StrategyConfig(), record_packets=True)

    if not result.overflow or result.overflow_units != 1:
        errors.append(f"Expected one overflowed unit, got {result.overflow_units}")
    if result.transmitted_bits + result.queued_bits != result.total_bits:
        errors.append("Overflow lost bits")
    if result.transmitted_bits != 800_000:
        errors.append(f"Overflowed unit should still send everything, sent {result.transmitted_bits}")
    print("✓ Overflow flagged")

    _finish(errors)


def _check_invariants(result, trace, params, cfg, errors: List[str], case: int) -> None:
    from src.engine.link_sim import LinkState

    if result.transmitted_bits + result.queued_bits != result.total_bits:
        errors.append(f"case {case} {result.policy}: bits not conserved")
    if sum(result.residency_ns.values()) != trace.duration_ns:
        errors.append(f"case {case} {result.policy}: residencies do not partition the run")
    L = trace.duration_L
    if not (params.pw_off * L - 1e-9 <= result.energy_J <= params.pw_on * L + 1e-9):
        errors.append(f"case {case} {result.policy}: energy {result.energy_J} out of bounds")
    if not 0.0 <= result.quiet_fraction_p <= 1.0:
        errors.append(f"case {case} {result.policy}: quiet fraction {result.quiet_fraction_p}")
    if result.policy == 'on' and result.residency_ns[LinkState.QUIET.value] != 0:
        errors.append(f"case {case}: Always-On spent time Quiet")

    log = result.packet_log
    if [p.arrival_ns for p in log] != trace.arrival_ns[:len(log)].tolist():
        errors.append(f"case {case} {result.policy}: packets not sent in FIFO order")
    previous_end = 0
    for rec, size in zip(log, trace.size_bits.tolist()):
        if rec.start_ns < rec.arrival_ns or rec.start_ns < previous_end:
            errors.append(f"case {case} {result.policy}: overlapping or early transmission")
            break
        if rec.end_ns - rec.start_ns != -(-size * 1_000_000_000 // params.line_rate_f):
            errors.append(f"case {case} {result.policy}: wrong serialization time")
            break
        previous_end = rec.end_ns
    if sum(trace.size_bits[:len(log)].tolist()) != result.transmitted_bits:
        errors.append(f"case {case} {result.policy}: packet log disagrees with transmitted bits")

    if result.policy == 'eeep':
        if result.table is not None:
            sums = result.table.probs.sum(axis=1)[result.table.populated_rows()]
            if not np.allclose(sums, 1.0):
                errors.append(f"case {case}: predictor table not row-stochastic")

        T_ns = int(round(cfg.T * 1e9))
        T1_ns = int(round(cfg.T_prime * 1e9))
        for w in result.windows:
            if w.strategy_used != 'EEEP' or w.delayed:
                continue
            mid, end = w.index * T_ns + T1_ns, (w.index + 1) * T_ns
            for rec in log:
                if mid <= rec.arrival_ns < end and (rec.end_ns > end
                                                    or rec.end_ns - rec.arrival_ns > T_ns - T1_ns):
                    errors.append(f"case {case}: window {w.index} delay bound violated")
                    break


def test_randomized_invariants() -> None:
    """Test conservation, FIFO, residency, energy and delay bounds on random traces."""
    from src.engine.link_sim import POLICIES, LinkParams, simulate_policy

    errors = []
    rng = np.random.default_rng(2024)
    params = LinkParams()
    tails = 0

    for case in range(1000):
        trace = _random_trace(rng, 0.06)
        cfg = _small_strategy(p_tau=float(rng.uniform(0, 1)), faithful=bool(rng.integers(0, 2)))
        for policy in POLICIES:
            result = simulate_policy(policy, trace, params, cfg, record_packets=True)
            _check_invariants(result, trace, params, cfg, errors, case)
            if policy == 'eeep':
                tails += sum(w.strategy_used == 'EEEP' for w in result.windows)
        if len(errors) > 10:
            break

    if tails == 0:
        errors.append("No randomized case exercised the predictive tail")
    print(f"✓ Invariants hold over 1000 random traces ({tails} predictive tails)")

    _finish(errors)


def test_eeep_behaviour() -> None:
    """Test the predictive strategy: gate, window records and savings."""
    from src.engine.link_sim import LinkParams, StrategyConfig, run_eee_burst, run_eeep
    from src.engine.predictor import PredictionConfig
    from src.engine.traffic_model import synthesize_poisson_trace

    errors = []
    params = LinkParams()
    trace = synthesize_poisson_trace(13.3, 5680, 10.0, 0.001, 1_000_000_000, seed=3)

    confident = StrategyConfig(prediction=PredictionConfig(theta=2.0, hurst_override=0.9))
    eee = run_eee_burst(trace, params, confident)
    eeep = run_eeep(trace, params, confident)

    if len(eeep.windows) != 100:
        errors.append(f"Expected 100 window records, got {len(eeep.windows)}")
    if [w.index for w in eeep.windows] != list(range(len(eeep.windows))):
        errors.append("Window records must be in order")
    used = [w for w in eeep.windows if w.strategy_used == 'EEEP']
    if not used or not _close(eeep.U, len(used) / 100, 1e-12):
        errors.append(f"U = {eeep.U} with {len(used)} predictive windows")
    elif eeep.quiet_fraction_p <= eee.quiet_fraction_p or eeep.energy_J >= eee.energy_J:
        errors.append(f"EEEP quiet {eeep.quiet_fraction_p:.4f} should beat EEE {eee.quiet_fraction_p:.4f}")
    else:
        print(f"✓ EEEP U = {eeep.U:.2f}, quiet {eeep.quiet_fraction_p:.4f} vs EEE {eee.quiet_fraction_p:.4f}")
    if eeep.windows[0].strategy_used != 'EEE' or eeep.windows[0].H_hat_at_decision is not None:
        errors.append("The first window is always a setup window")
    for w in used:
        if w.predicted_bits is None or not _close(w.tau, w.predicted_bits / 1e9, 1e-15):
            errors.append(f"Window {w.index} used the tail without a valid prediction")
            break
        if w.H_hat_at_decision != 0.9 or w.delta_tau != 0.0:
            errors.append(f"Window {w.index} recorded H {w.H_hat_at_decision}, delta {w.delta_tau}")
            break
    if eeep.table is None or eeep.table.observations != 100:
        errors.append("Predictor should observe every window")

    weak = StrategyConfig(prediction=PredictionConfig(theta=2.0, hurst_override=0.55))
    gated = run_eeep(trace, params, weak)
    if gated.U != 0.0 or gated.scalars() != run_eee_burst(trace, params, weak).scalars():
        errors.append("With H below H_bar EEEP must behave exactly like EEE")
    else:
        print("✓ Weak self-similarity closes the gate")

    _finish(errors)


def test_degenerate_gate_equivalence() -> None:
    """Test that H_bar = 1 makes EEEP scalar-identical to EEE on random traces."""
    from src.engine.link_sim import LinkParams, StrategyConfig, run_eee_burst, run_eeep
    from src.engine.predictor import PredictionConfig

    errors = []
    rng = np.random.default_rng(77)
    params = LinkParams()

    for case in range(20):
        trace = _random_trace(rng, 0.5, max_packets=2000)
        cfg = StrategyConfig(T=0.02, T_prime=0.01, T_B=0.001,
                             prediction=PredictionConfig(theta=2.0, H_bar=1.0),
                             model_faithful_eee=bool(case % 2))
        eeep = run_eeep(trace, params, cfg).scalars()
        eee = run_eee_burst(trace, params, cfg).scalars()
        if eeep != eee:
            errors.append(f"case {case}: EEEP {eeep} differs from EEE {eee}")
            break
    print("✓ EEEP with H_bar = 1 equals EEE on 20 random traces")

    _finish(errors)


def _front_loaded_trace(rng: np.random.Generator, duration: float, max_packets: int = 80):
    """Random packets confined to the first T' - T_B of every small window, so T2 stays empty."""
    from src.engine.traffic_model import TrafficTrace

    T_ns = int(round(SMALL_T * 1e9))
    n = int(rng.integers(0, max_packets + 1))
    windows = rng.integers(0, int(round(duration / SMALL_T)), n)
    offsets = rng.integers(0, int(round((SMALL_T_PRIME - SMALL_T_B) * 1e9)), n)
    arrivals = np.sort(windows * T_ns + offsets)
    sizes = rng.integers(64, 12001, n)
    return TrafficTrace(arrivals, sizes, duration, 1_000_000_000, 'front-loaded')


def test_eeep_dominance() -> None:
    """Test that EEEP never spends less time Quiet than EEE, in both EEE modes."""
    from src.engine.link_sim import LinkParams, run_eee_burst, run_eeep
    from src.engine.traffic_model import TrafficTrace

    errors = []
    rng = np.random.default_rng(606)
    params = LinkParams()
    limit = (SMALL_T - SMALL_T_PRIME) - params.T_trans
    checked = {True: 0, False: 0}
    tails = {True: 0, False: 0}

    for case in range(600):
        faithful = bool(case % 2)
        # realistic EEE sleeps through empty units, so its traces keep T2 empty
        trace = _random_trace(rng, 0.06) if faithful else _front_loaded_trace(rng, 0.06)
        cfg = _small_strategy(p_tau=float(rng.uniform(0, 1)), faithful=faithful)

        eee = run_eee_burst(trace, params, cfg)
        eeep = run_eeep(trace, params, cfg)
        if eee.overflow or eeep.overflow:
            continue
        if any(w.tau + w.delta_tau > limit for w in eeep.windows if w.strategy_used == 'EEEP'):
            continue

        checked[faithful] += 1
        tails[faithful] += eeep.U > 0
        if eeep.quiet_fraction_p < eee.quiet_fraction_p:
            errors.append(
                f"case {case} (faithful={faithful}): EEEP quiet {eeep.quiet_fraction_p:.6f} "
                f"below EEE {eee.quiet_fraction_p:.6f}"
            )
            break

    for faithful in (True, False):
        if tails[faithful] == 0:
            errors.append(f"No predictive tail exercised with faithful={faithful}")
    print(f"✓ EEEP quiet time dominates EEE ({checked[True]} faithful, {checked[False]} realistic cases)")

    # a tail with nothing queued or arriving must not wake a realistic link
    T_ns = int(round(SMALL_T * 1e9))
    counts = [1, 2] * 10
    arrivals = np.repeat([i * T_ns + 500_000 for i in range(len(counts))], counts)
    trace = TrafficTrace(arrivals, np.full(len(arrivals), 8000), len(counts) * SMALL_T,
                         1_000_000_000, 'empty-tails')
    cfg = _small_strategy(faithful=False)
    eee = run_eee_burst(trace, params, cfg)
    eeep = run_eeep(trace, params, cfg)
    if eeep.U == 0:
        errors.append("Expected the gate to open on alternating one and two packet windows")
    elif eeep.quiet_fraction_p != eee.quiet_fraction_p:
        errors.append(
            f"Empty tails: EEEP quiet {eeep.quiet_fraction_p:.6f} vs EEE {eee.quiet_fraction_p:.6f}"
        )
    else:
        print(f"✓ Empty tails stay Quiet in realistic mode (U = {eeep.U:.2f})")

    _finish(errors)


def test_saturated_tail() -> None:
    """Test that a tail covering all of T2 keeps the link Active with no sleep."""
    from src.engine.link_sim import LinkParams, LinkState, _EeepRun
    from src.engine.predictor import compute_tau
    from src.engine.traffic_model import TrafficTrace

    errors = []
    params = LinkParams()
    T_ns = int(round(SMALL_T * 1e9))
    T1_ns = int(round(SMALL_T_PRIME * 1e9))
    trace = TrafficTrace(np.array([500_000]), np.array([8000]), SMALL_T, 1_000_000_000, 'one')

    def run_tail(expected_bits: float, p_tau: float):
        cfg = _small_strategy(p_tau=p_tau)
        run = _EeepRun(trace, params, cfg, record_packets=False)
        for k in range(T1_ns // int(round(SMALL_T_B * 1e9))):
            run.eee_unit(k)
        before = dict(run.timeline.residency)
        tau, delta_tau = compute_tau(expected_bits, params.line_rate_f, p_tau)
        run.eeep_tail(0, tau, delta_tau)
        return run, before, tau + delta_tau

    # 2.5 Mbit at 1 Gbit/s doubled by p_tau = 1 fills T - T' = 5 ms
    run, before, tail = run_tail(2_500_000, 1.0)
    tl = run.timeline
    if tail < SMALL_T - SMALL_T_PRIME - 1e-12:
        errors.append(f"Tail {tail} s should reach T - T'")
    if tl.state is not LinkState.ACTIVE or tl.clock != T_ns:
        errors.append(f"Saturated tail ended in {tl.state} at {tl.clock} ns")
    for state in (LinkState.GOING_TO_SLEEP, LinkState.QUIET, LinkState.WAKING):
        if tl.residency[state] != before[state]:
            errors.append(f"Saturated tail spent time in {state.value}")
    if tl.residency[LinkState.ACTIVE] - before[LinkState.ACTIVE] != T_ns - T1_ns:
        errors.append("Saturated tail should stay Active from T' to T")
    else:
        print("✓ Saturated tail stays Active to the window end")

    run, before, _ = run_tail(10_000, 0.0)
    if run.timeline.residency[LinkState.QUIET] <= before[LinkState.QUIET]:
        errors.append("A short tail should leave Quiet time in T2")
    else:
        print("✓ Short tail sleeps before waking")

    _finish(errors)


def test_eeep_on_self_similar_presets() -> None:
    """Test EEEP with online Hurst estimation and the default theta on synthesized traffic."""
    from src.config.experiment import ExperimentConfig
    from src.commands.base import BaseCommand
    from src.engine.link_sim import run_eee_burst, run_eeep
    from src.engine.predictor import diagonal_concentration

    errors = []
    concentration = {}

    for preset in ('A-high', 'A-low'):
        config = ExperimentConfig.from_sources(overrides=[f'trace.preset={preset}', 'run.seed=1'])
        trace = BaseCommand.load_trace(config)
        params, cfg = config.link_params(), config.strategy_config()
        if cfg.prediction.hurst_override is not None:
            errors.append("Presets should estimate H online")

        eeep = run_eeep(trace, params, cfg)
        concentration[preset] = diagonal_concentration(eeep.table)

        if preset == 'A-high':
            eee = run_eee_burst(trace, params, cfg)
            eg = (eee.energy_J - eeep.energy_J) / eee.energy_J
            if eeep.U <= 0 or eeep.quiet_fraction_p <= eee.quiet_fraction_p or eg <= 0:
                errors.append(
                    f"A-high: U {eeep.U:.3f}, p_EEEP {eeep.quiet_fraction_p:.4f}, "
                    f"p_EEE {eee.quiet_fraction_p:.4f}, EG {eg:.4f}"
                )
            else:
                print(f"✓ A-high: p_EEEP {eeep.quiet_fraction_p:.4f} > p_EEE "
                      f"{eee.quiet_fraction_p:.4f}, EG {eg * 100:.1f}%")

    high, low = concentration['A-high'], concentration['A-low']
    if high is None or low is None or not high < low:
        errors.append(f"Diagonal concentration alpha=1 {high} should be below alpha=1.8 {low}")
    else:
        print(f"✓ Table concentrates on the diagonal for alpha=1 ({high:.2f} vs {low:.2f})")

    _finish(errors)


def test_theory() -> None:
    """Test the closed forms against the reference figures."""
    from src.engine.theory import (OverloadError, TheoryError, TheoryInputs, back_derive_n_bar,
                                   bounds_report, efficiencies, efficiency_bounds,
                                   efficiency_curves, eg_vs_ptau_sweep, energy_from_quiet_fraction,
                                   energy_gain, energy_gain_components, load_limits,
                                   load_limits_exact, load_reference_traces, mix_u, optimal_loads,
                                   p_eee_theory, reference_inputs, time_gain)

    errors = []

    defaults = TheoryInputs(N_bar=13.3, T_pack_bar=5.68e-6, tau_bar=0.0038, U=0.827)
    if not _close(energy_from_quiet_fraction(0.0, defaults), 139.4, 0.05):
        errors.append("Always-On energy over 200 s should be 139.4 J")
    if not _close(defaults.kappa, 0.51, 1e-12):
        errors.append(f"kappa = {defaults.kappa}")

    bound_eee, bound_eeep = efficiency_bounds(defaults)
    if not (_close(bound_eee, 0.7815, 1e-6) and _close(bound_eeep, 0.888565, 1e-6)):
        errors.append(f"Efficiency ceilings {bound_eee}, {bound_eeep}")
    else:
        print(f"✓ Efficiency ceilings {bound_eee:.4f} / {bound_eeep:.4f}")

    eta = efficiencies(defaults)
    for got, expected in zip(eta, (0.07554, 0.2569, 0.4040)):
        if not _close(got, expected, 5e-4):
            errors.append(f"Efficiency {got:.5f}, expected {expected}")

    if load_limits(defaults) != (137, 156):
        errors.append(f"Load limits {load_limits(defaults)}, expected (137, 156)")
    exact = load_limits_exact(defaults)
    if not (_close(exact[0], 137.588, 1e-3) and _close(exact[1], 156.437, 1e-3)):
        errors.append(f"Un-floored load limits {exact}")
    if optimal_loads(defaults) != (43, 39):
        errors.append(f"Optimal loads {optimal_loads(defaults)}, expected (43, 39)")
    print("✓ Load limits and optimal loads")

    # Integer scan of the efficiency gain over Always-On
    gains = []
    for n in range(1, 157):
        eta_on, eta_eee, eta_eeep = efficiencies(TheoryInputs(N_bar=n, T_pack_bar=5.68e-6))
        gains.append((n, eta_eee - eta_on, eta_eeep - eta_on))
    argmax_eee = max(gains, key=lambda g: g[1])[0]
    argmax_eeep = max(gains, key=lambda g: g[2])[0]
    cross_eee = max(n for n, d, _ in gains if d >= 0)
    cross_eeep = max(n for n, _, d in gains if d >= 0)
    n_star = optimal_loads(defaults)
    limits = load_limits(defaults)
    if abs(argmax_eee - n_star[0]) > 1 or abs(argmax_eeep - n_star[1]) > 1:
        errors.append(f"Scan optimum {argmax_eee}/{argmax_eeep} vs closed form {n_star}")
    if abs(cross_eee - limits[0]) > 1 or abs(cross_eeep - limits[1]) > 1:
        errors.append(f"Scan crossings {cross_eee}/{cross_eeep} vs closed form {limits}")
    if not cross_eee < cross_eeep:
        errors.append("EEE must cross Always-On before EEEP")
    print(f"✓ Brute-force scan: optimum {argmax_eee}, crossings {cross_eee}/{cross_eeep}")

    fixture = load_reference_traces()
    if len(fixture['traces']) != 5:
        errors.append(f"Fixture should hold 5 traces, got {len(fixture['traces'])}")
    ref = fixture['traces']['Real #1']
    inputs = reference_inputs(ref, fixture)
    report = bounds_report(inputs)

    if not _close(inputs.N_bar, back_derive_n_bar(0.706, 5.68e-6), 1e-12):
        errors.append("Reference inputs must back-derive N_bar from p_EEE")
    targets = [
        ('p_eee', report.p_eee, ref.theory['p_eee'], 0.003),
        ('e_eee', report.e_eee, ref.theory['e_eee_J'], 0.3),
        ('p_u', report.p_u, ref.theory['p_u'], 0.003),
        ('e_u', report.e_u, ref.theory['e_u_J'], 0.3),
        ('eg', report.eg, ref.theory['eg'], 0.003),
    ]
    for name, got, expected, tol in targets:
        if not _close(got, expected, tol):
            errors.append(f"Real #1 {name} = {got:.4f}, expected {expected}")
        else:
            print(f"✓ Real #1 {name} = {got:.4f}")
    if not _close(energy_gain(inputs), (report.e_eee - report.e_u) / report.e_eee, 1e-9):
        errors.append("Energy gain forms disagree")
    parts = energy_gain_components(TheoryInputs(N_bar=13.3, T_pack_bar=5.68e-6))
    if not _close(parts['X'], 0.144837, 1e-5):
        errors.append(f"X = {parts['X']}")

    sweep = eg_vs_ptau_sweep(inputs, [i / 10 for i in range(9)])
    reference = [row['eg_theory'] for row in fixture['p_tau_sweep']['rows']]
    for (p_tau, eg), expected in zip(sweep, reference):
        if not _close(eg, expected, 0.003):
            errors.append(f"EG at p_tau={p_tau}: {eg:.4f}, expected {expected}")
    diffs = [b[1] - a[1] for a, b in zip(sweep, sweep[1:])]
    if max(diffs) - min(diffs) > 1e-9 or not diffs[0] < 0:
        errors.append("EG must fall linearly in p_tau")
    if not _close(diffs[0] * 100, -0.835, 0.01):
        errors.append(f"EG slope {diffs[0] * 100:.3f} pt per 0.1")
    print(f"✓ EG falls {diffs[0] * 100:.3f} pt per 0.1 of p_tau")

    flat = eg_vs_ptau_sweep(TheoryInputs(N_bar=13.3, T_pack_bar=5.68e-6, U=0.5), [0, 0.5, 1.0])
    if len({round(eg, 12) for _, eg in flat}) != 1:
        errors.append("With no tail the p_tau sweep must be flat")

    for U in np.linspace(0, 1, 11):
        p_u, eta_u = mix_u(0.7, 0.8, 0.25, 0.4, float(U))
        if not (0.7 - 1e-12 <= p_u <= 0.8 + 1e-12 and 0.25 - 1e-12 <= eta_u <= 0.4 + 1e-12):
            errors.append(f"mix_u left its endpoints at U={U}")
            break

    curves = efficiency_curves(defaults, [10, 20, 40])
    if [row['n_bar'] for row in curves] != [10.0, 20.0, 40.0]:
        errors.append("efficiency_curves must keep the scan order")
    if not all(a['eta_eee'] < b['eta_eee'] for a, b in zip(curves, curves[1:])):
        errors.append("eta_EEE must grow with the load")

    try:
        p_eee_theory(TheoryInputs(N_bar=200, T_pack_bar=5.68e-6))
        errors.append("N_bar = 200 should overload EEE")
    except OverloadError:
        pass
    try:
        time_gain(0.0, 0.5, 0.5)
        errors.append("Time gain with p_EEE = 0 should be undefined")
    except TheoryError:
        pass

    _finish(errors)


def test_configuration() -> None:
    """Test settings and experiment configuration layering."""
    from src.config.experiment import ExperimentConfig
    from src.config.settings import settings
    from src.utils.presets import PresetManager
    from src.utils.validators import ValidationError

    errors = []

    for setting in ['DEBUG', 'LOG_FILE', 'WORKERS', 'OUT_DIR']:
        if not hasattr(settings, setting):
            errors.append(f"Missing setting: {setting}")
    if settings.WORKERS < 1:
        errors.append("WORKERS must be at least 1")

    config = ExperimentConfig.from_sources(overrides=['link.t_s_ms=0.3', 'strategy.T_ms=200'])
    if config['link.t_s_ms'] != 0.3 or config.strategy_config().T != 0.2:
        errors.append("Overrides were not applied")
    if config.preset != 'A-high' or config['synth.alpha'] != 1.0:
        errors.append("Default preset should be A-high")
    if config.policies() != ['on', 'eee', 'eeep']:
        errors.append(f"Default policies {config.policies()}")
    print("✓ Overrides and default preset")

    low = ExperimentConfig.from_sources(overrides=['trace.preset=A-low', 'synth.alpha=1.5'])
    if low['synth.alpha'] != 1.5:
        errors.append("Explicit values must win over preset values")

    drawn = [PresetManager.resolve_preset('B-random', seed) for seed in (1, 1, 2)]
    if drawn[0] != drawn[1]:
        errors.append("Randomized preset is not deterministic for a seed")
    if not (30 <= drawn[0]['synth.M'] <= 70 and 1.2 <= drawn[0]['synth.alpha'] <= 1.6
            and drawn[0]['synth.packet_size_bits'] % 8 == 0):
        errors.append(f"B-random draw out of range: {drawn[0]}")

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / 'experiment.conf'
        path.write_text(
            "# sweep the tail extension\n"
            "trace.preset=A-low\n"
            "prediction.p_tau=0.2\n"
            "sweep.prediction.p_tau=0:0.4:0.2\n"
        )
        from_file = ExperimentConfig.from_sources(config_path=str(path), flags={'run.seed': 5})
        if from_file['prediction.p_tau'] != 0.2 or from_file.seed != 5:
            errors.append("Config file values or flags were not applied")
        if from_file.sweep_axes != [('prediction.p_tau', ['0', '0.2', '0.4'])]:
            errors.append(f"Sweep axes {from_file.sweep_axes}")
        point = from_file.with_values({'prediction.p_tau': '0.4'})
        if point['prediction.p_tau'] != 0.4 or point.sweep_axes:
            errors.append("with_values should replace a key and drop the axes")
        print("✓ Config file with a sweep axis")

    invalid = [
        ['nosuch.key=1'],
        ['trace.preset=A-low', 'trace.path=x.csv'],
        ['trace.preset=nope'],
        ['strategy.T_prime_ms=100'],
        ['strategy.T_ms=100.5'],
        ['strategy.T_B_ms=0.1'],
        ['link.pw_off_w=1.0'],
        ['sweep.run.seed=1,2'],
        ['sweep.nosuch=1,2'],
        ['prediction.H_bar=0.4'],
        ['missing-equals'],
    ]
    for overrides in invalid:
        try:
            ExperimentConfig.from_sources(overrides=overrides)
            errors.append(f"Config {overrides} should be rejected")
        except ValidationError:
            pass
    try:
        ExperimentConfig.from_sources(config_path='/nonexistent/experiment.conf')
        errors.append("Missing config file should be rejected")
    except ValidationError:
        pass
    print("✓ Invalid configurations rejected")

    _finish(errors)


def _cli(argv: List[str]) -> int:
    from src.cli import main
    return asyncio.run(main(argv))


def test_cli() -> None:
    """Test the four commands end to end on short traces."""
    from src.config.settings import settings

    errors = []
    quick = ['--set', 'synth.duration_s=2', '--set', 'strategy.T_ms=20', '--set', 'strategy.T_prime_ms=10']

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)

        code = _cli(['synth', '--out', str(out), '--name', 'trace.csv', '--seed', '3'] + quick)
        if code != 0 or not (out / 'trace.csv').is_file():
            errors.append(f"synth exited {code}")
        else:
            print("✓ synth writes a trace file")

        code = _cli(['analyze', '--trace', str(out / 'trace.csv'), '--out', str(out)])
        hurst = json.loads((out / 'hurst.json').read_text()) if code == 0 else {}
        if code != 0 or 'H_hat' not in hurst or 'params' not in hurst:
            errors.append(f"analyze exited {code}")
        elif not (out / 'variance_time.csv').is_file():
            errors.append("analyze did not write variance_time.csv")
        else:
            print(f"✓ analyze: H = {hurst['H_hat']:.3f}")

        sim_args = ['simulate', '--trace', str(out / 'trace.csv'), '--out', str(out)] + quick[2:]
        code = _cli(sim_args)
        expected = ['result_on.json', 'result_eee.json', 'result_eeep.json',
                    'windows.csv', 'predictor_table.csv', 'bounds.json']
        missing = [name for name in expected if not (out / name).is_file()]
        if code != 0 or missing:
            errors.append(f"simulate exited {code}, missing {missing}")
        else:
            bounds = json.loads((out / 'bounds.json').read_text())
            if set(bounds) != {'inputs', 'theory', 'simulation', 'deltas', 'params', 'kind'}:
                errors.append(f"bounds.json keys {sorted(bounds)}")
            print("✓ simulate writes results, windows, table and bounds")

            first = (out / 'result_eeep.json').read_bytes()
            _cli(sim_args)
            if (out / 'result_eeep.json').read_bytes() != first:
                errors.append("simulate output is not reproducible")

        saved_workers = settings.WORKERS
        for workers in (1, 2):
            settings.WORKERS = workers
            sweep_dir = out / f"sweep{workers}"
            code = _cli(['sweep', '--mode', 'theory', '--out', str(sweep_dir),
                         '--set', 'sweep.theory.n_bar=10,50,200'])
            lines = (sweep_dir / 'sweep.csv').read_text().splitlines()
            if code != 3 or len(lines) != 4:
                errors.append(f"theory sweep with {workers} worker(s): exit {code}, {len(lines)} lines")
                continue
            header = lines[0].split(',')
            rows = [dict(zip(header, line.split(','))) for line in lines[1:]]
            if [r['theory.n_bar'] for r in rows] != ['10', '50', '200']:
                errors.append("Sweep rows out of grid order")
            if [r['status'] for r in rows] != ['ok', 'ok', 'overload'] or not rows[2]['eta_eee']:
                errors.append(f"Sweep statuses {[r['status'] for r in rows]}")
        settings.WORKERS = saved_workers
        print("✓ theory sweep in grid order with an overloaded point")

        settings.WORKERS = 1
        code = _cli(['sweep', '--out', str(out / 'simsweep'), '--policy', 'eee'] + quick
                    + ['--set', 'sweep.link.t_s_ms=0.1,0.2'])
        settings.WORKERS = saved_workers
        lines = (out / 'simsweep' / 'sweep.csv').read_text().splitlines() if code == 0 else []
        if code != 0 or len(lines) != 3 or 'eee_quiet_fraction_p' not in lines[0]:
            errors.append(f"simulation sweep exited {code}")
        else:
            print("✓ simulation sweep")

        failures: List[Tuple[List[str], int]] = [
            (['simulate', '--out', str(out), '--set', 'nosuch.key=1'], 2),
            (['sweep', '--out', str(out)], 2),
            (['synth', '--trace', str(out / 'trace.csv'), '--out', str(out)], 2),
            (['analyze', '--trace', str(out / 'missing.csv'), '--out', str(out)], 1),
        ]
        for argv, expected_code in failures:
            code = _cli(argv)
            if code != expected_code:
                errors.append(f"{argv[0]} {argv[1:]} exited {code}, expected {expected_code}")
        print("✓ Failures map to exit codes")

    _finish(errors)


SECTIONS: List[Tuple[str, Callable[[], None]]] = [
    ("📦 Testing Imports...", test_imports),
    ("📏 Testing Units and Validators...", test_units_and_validators),
    ("🚦 Testing Traffic Model...", test_traffic_model),
    ("📈 Testing Self-Similarity...", test_selfsimilarity),
    ("🔮 Testing Predictor...", test_predictor),
    ("🔌 Testing Link State Machine...", test_link_state_machine),
    ("📐 Testing EEE Against Closed Form...", test_eee_against_closed_form),
    ("⚠️ Testing Overflow...", test_overflow),
    ("🎲 Testing Randomized Invariants...", test_randomized_invariants),
    ("🧠 Testing EEEP Behaviour...", test_eeep_behaviour),
    ("🟰 Testing Degenerate Gate...", test_degenerate_gate_equivalence),
    ("⚖️ Testing EEEP Dominance...", test_eeep_dominance),
    ("🔋 Testing Saturated Tail...", test_saturated_tail),
    ("🌊 Testing EEEP on Self-Similar Presets...", test_eeep_on_self_similar_presets),
    ("📐 Testing Closed Forms...", test_theory),
    ("⚙️ Testing Configuration...", test_configuration),
    ("💻 Testing Command Line...", test_cli),
]


def run_tests() -> None:
    """Run all tests and report results."""
    print("🔋 eeesim - Test Suite")
    print("=" * 50)

    all_errors = []
    for title, section in SECTIONS:
        print(f"\n{title}")
        try:
            section()
        except AssertionError as e:
            all_errors.extend(str(e).splitlines())
        except Exception as e:
            all_errors.append(f"{section.__name__} crashed: {e}")

    print("\n" + "=" * 50)
    if all_errors:
        print("❌ Tests Failed!")
        print(f"Found {len(all_errors)} error(s):")
        for i, error in enumerate(all_errors, 1):
            print(f"  {i}. {error}")
        sys.exit(1)
    else:
        print("✅ All tests passed!")


if __name__ == "__main__":
    try:
        run_tests()
    except KeyboardInterrupt:
        print("\n⏹️ Tests interrupted by user")
        sys.exit(1)
