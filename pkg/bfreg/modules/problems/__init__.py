"""Bi-fidelity physics problems: composite beam and dual-throat nozzle."""
from bfreg.modules.problems.models import (
    BeamGeometry, BeamSample, NozzleSample, Split, BiFidelityDataset, BEAM_RANGES, UNITS,
    NOZZLE_LO_GRID, NOZZLE_HI_GRID,
)
from bfreg.modules.problems.beam_service import (
    DEFAULT_GEOMETRY, beam_section_stiffness, beam_lofi_profile, beam_lofi_deflection, beam_hifi_proxy,
    sample_beam_inputs, beam_samples, to_si,
)
from bfreg.modules.problems.nozzle_service import (
    MarchResult, nozzle_grid, nozzle_delta, nozzle_shock_position, nozzle_field, nozzle_shock_from_field,
    nozzle_samples, march_burgers,
)
from bfreg.modules.problems.dataset_service import (
    generate_bifidelity_dataset, read_beam_csv, read_nozzle_csv, read_tabular_csv, write_dataset_csv,
    write_dataset_bundle, read_dataset_bundle,
)
