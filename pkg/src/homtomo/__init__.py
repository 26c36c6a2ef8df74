"""Time-resolved single-photon measurement by two-photon interference with short reference pulses."""

from .counts import RateRecord, TrialPlan, sample_rate
from .grid import (
    DensityMatrix,
    MeasurementOperator,
    SpectralState,
    TemporalState,
    TimeGrid,
    expectation,
    inner,
    time_eigenstate,
    to_frequency,
    to_time,
)
from .measurement import (
    CoherenceSetting,
    bunching_operator,
    coherence_operator,
    delayed_operator,
    g2_bruteforce,
    hom_scan,
    superposition_operator,
)
from .reference import (
    FilterOperator,
    ReferenceSpec,
    filter_from_pulse,
    make_pulse,
    sigma_overlap,
    superposition_reference,
    time_shift,
)
from .tomography import (
    TemporalTomography,
    TomographySchedule,
    assemble_density,
    fidelity,
    reconstruct_diagonal,
    reconstruct_offdiagonal,
    simulate_records,
)
from .twophoton import (
    BipartiteState,
    PairSetting,
    entanglement_timescale,
    entanglement_witness,
    fourfold_probability,
    pdc_model,
    projector_matrix,
    two_photon_coherence,
)

__version__ = "0.1.0"
