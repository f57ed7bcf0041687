"""Axisymmetric multiphysics model of subcutaneous antibody injection.

Couples electroneutral Nernst-Planck ion transport, Darcy porous-media flow
with capillary/lymphatic exchange, and pH-dependent matrix binding on a
graded (r, z) grid, with a coarse-mesh reduced model for multi-hour horizons.
"""

from .binding import advance_binding, binding_sink, exchange_rate
from .config import SimulationConfig, default_config, load_config, load_config_text
from .flow import (InjectionProtocol, PressureSolver, SolverError,
                   injection_source, node_speed, solve_pressure,
                   starling_blood, starling_lymph, velocity_from_pressure)
from .mesh import (AxiMesh, FieldState, build_graded_mesh, integrate,
                   project_field)
from .metrics import (MetricSeries, ball_average, domain_average,
                      dose_fractions, net_charge_density, plume_volume)
from .orchestrator import (DoseLedger, PhasePlan, PipelineResult, Simulation,
                           StaggeredStepper, step_staggered)
from .params import (BindingParams, ConfigurationError, PhCurve,
                     PhysicalConstants, SpeciesSpec, SpeciesTable,
                     StarlingParams, TissueLayer, TissueLayers, charge_at_ph,
                     default_layers, default_species, load_drug_curves,
                     ph_from_hydrogen, rates_at_ph, recover_chloride,
                     syringe_composition)
from .potential import PotentialCoefficients, assemble_potential, solve_potential
from .transport import (TransportStepInputs, advance_species, species_flux,
                        update_tissue_ph)

__version__ = "0.1.0"
