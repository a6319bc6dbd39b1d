"""In-band power telemetry toolkit.

Codec for the OCC-IMAGE v1 sensor-image format, a high-rate sampling client
with interface benchmarks, a deterministic device simulator, and analyses
for energy accounting, consistency statistics, and aliasing effects.
"""

from . import aliasing, occ_image, occ_sim, power_analysis, reader
from .aliasing import (
    AliasingReport,
    PatternEstimate,
    RateEstimate,
    estimate_internal_rate,
    pattern_frequency,
    spread_stats,
    worst_case_error,
)
from .occ_image import (
    BLOCK_SIZE,
    BufferChoice,
    ReadingBuffer,
    SensorDataBlock,
    SensorImage,
    SensorNameEntry,
    SensorRecord,
    encode_image,
    locate_sensor,
    parse_image,
    read_record_at,
    select_buffer,
    ticks_to_seconds,
)
from .occ_sim import (
    OccSimulator,
    SimConfig,
    SimSensor,
    SimulatorSource,
    WorkloadSignal,
    ground_truth_energy,
    load_config,
    run_experiment,
    signal_power,
    standard_config,
    standard_sensors,
)
from .power_analysis import (
    ErrorStats,
    PowerKind,
    PowerSeries,
    QuadraticFit,
    component_sum_check,
    derive_pfe_series,
    energy_from_accumulator,
    error_stats,
    power_from_energy,
    quadratic_fit,
)
from .reader import (
    FileSource,
    LatencyHistogram,
    RawTrace,
    ReadMode,
    ReplaySource,
    estimate_external_update_rate,
    latency_histogram,
    load_trace,
    sample_loop,
    save_trace,
)

__version__ = "0.1.0"
