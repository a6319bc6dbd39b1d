"""Benchmark the interface itself: readout spacing and external update rate.

A simulated device is read in a tight loop; the trace then yields the
spacing histogram of the readout loop and the rate at which the interface
actually exposes new values, which is far below the internal sampling rate.
"""

from occtool.occ_sim import WorkloadSignal, standard_config, run_experiment
from occtool.reader import estimate_external_update_rate, latency_histogram

config = standard_config(signals={"PWRSYS": WorkloadSignal.constant(612.0)})

print("reading PWRSYS every 1 ms for 30 simulated seconds...")
trace = run_experiment(config, duration=30.0, readout_period=0.001, sensor="PWRSYS")
print(f"  {len(trace.entries)} readouts, {trace.failed_reads} failed")

hist = latency_histogram(trace, bin_width=1e-4)
print(f"\nreadout spacing: mean {hist.mean * 1e3:.3f} ms over {hist.count} gaps, "
      f"{len(hist.bins)} populated bin(s)")

estimate = estimate_external_update_rate(trace, change_window=0.060)
print(
    f"\nexternal update rate: {estimate.rate_sa_s:.2f} Sa/s "
    f"(mean interval {estimate.mean_interval_s * 1e3:.2f} ms, "
    f"{estimate.changes} value changes, {estimate.dropped_gaps} gaps dropped)"
)
print(
    "\nthe device samples internally at "
    f"{config.effective_rate:.2f} Sa/s, yet the published sample only "
    f"changes every {estimate.mean_interval_s * 1e3:.1f} ms: everything in "
    "between is only visible through the accumulator."
)
