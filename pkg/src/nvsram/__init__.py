"""Transient simulation of an STT-MTJ non-volatile SRAM cell with self write termination."""

from .cell import (CORRUPT, CellConfig, CellInstance, build_cell, decode_mtj, decode_sram, detect_termination_time,
                   divider_levels, run_operation, script_backup, script_power_down, script_power_up, script_read,
                   script_restore, script_write)
from .engine import TransientConfig, dc_operating_point, kcl_residual, mosfet_current, transient
from .errors import (CalibrationError, ConfigError, DecodeError, NumericError, NvsramError, ParameterError,
                     SolverError)
from .montecarlo import McConfig, McStats, switching_ensemble, termination_savings_ensemble, write_error_rate
from .mtj import (MagnetizationState, MtjDevice, MtjParams, calibrate_spin_efficiency, conductance,
                  critical_current, derive_anisotropy_field, llg_step, sample_thermal_field, switching_time)
from .netlist import Netlist, Waveform
from .power import backup_comparison, element_energy, energy_balance

__version__ = "0.1.0"
