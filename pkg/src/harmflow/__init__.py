"""Quasi-static time-series harmonic power flow for radial feeders."""

__version__ = "0.1.0"

from .devices import (
    EVModel,
    EVState,
    NortonLoadModel,
    PVModel,
    der_harmonic_source,
    ev_step,
    norton_equivalent,
    pv_operating_point,
)
from .errors import (
    HarmflowError,
    NonConvergence,
    NumericalError,
    SingularNetwork,
    ValidationError,
)
from .feeder import load_feeder, load_resources
from .harmonics import (
    HarmonicInjection,
    HarmonicSolution,
    ImpedanceCurve,
    frequency_scan,
    injection_from_spectrum,
    parallel_resonance_impedance,
    resonant_frequency,
    solve_harmonic,
)
from .metrics import (
    HarmonicSet,
    SeriesSummary,
    eddy_current_loss,
    summarize,
    thd,
)
from .network import (
    Branch,
    Bus,
    CapacitorBank,
    Network,
    SourceEquivalent,
    TransformerBranch,
    branch_admittance,
    build_admittance,
    capacitor_admittance,
    transformer_admittance,
    validate_network,
)
from .powerflow import (
    FundamentalSolution,
    PowerInjection,
    nodal_current,
    solve_fundamental,
)
from .qsts import (
    LoadProfile,
    Monitor,
    QstsResult,
    run_qsts,
    thd_propagation,
)
from .spectrum import (
    HarmonicSpectrum,
    WaveformRecord,
    extract_spectrum,
    synthesize_waveform,
)

__all__ = [name for name in dir() if not name.startswith("_")]
