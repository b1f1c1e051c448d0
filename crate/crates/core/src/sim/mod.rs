//! Deterministic cycle-level simulation of the accelerator.
//!
//! The engine replays the ideal weight-stationary trace against the
//! scratchpad plan. SHIFT banks carry head positions and charge modular
//! seek distances; random arrays accept one request per bank per service
//! period and serialize conflicts; DRAM is a single bandwidth/latency
//! channel. With a compiled [`Schedule`] the accesses follow the per-edge
//! placements and the scheduled transfers overlap compute. Cycle
//! accounting is exact by construction: the clock only ever advances by
//! ideal (busy) cycles or attributed stall cycles.

mod engine;

pub use engine::{batch_run, simulate};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::htree::PipelinedArrayDesign;
use crate::memtech::MemTechParams;
use crate::workload::LayerConfig;

/// Default DRAM access latency (the published spec gives only bandwidth).
pub const DEFAULT_DRAM_LATENCY_S: f64 = 100e-9;
/// Wall-power multiplier of a 4 K cryocooler.
pub const DEFAULT_COOLING_FACTOR: f64 = 400.0;
/// Matrix energy per MAC, calibrated so a full-scale 64×256 array at
/// 52.6 GHz running at 40% of its 861.6 TMAC/s computed peak dissipates
/// about 1.9 W.
pub const DEFAULT_MATRIX_ENERGY_PER_MAC_J: f64 = 5.5e-15;

/// One SHIFT scratchpad: `banks` rings of serially connected cells.
#[derive(Debug, Clone, Serialize)]
pub struct ShiftSpmCfg {
    pub capacity_bytes: u64,
    pub banks: u64,
    pub cell_shift_time_s: f64,
    pub cell_energy_j: f64,
}

impl ShiftSpmCfg {
    pub fn new(capacity_bytes: u64, banks: u64) -> Self {
        ShiftSpmCfg {
            capacity_bytes,
            banks,
            cell_shift_time_s: 0.02e-9,
            cell_energy_j: 0.1e-15,
        }
    }

    pub fn entries_per_bank(&self) -> u64 {
        (self.capacity_bytes / self.banks).max(1)
    }
}

/// A random-access scratchpad array with per-bank service periods.
#[derive(Debug, Clone, Serialize)]
pub struct RandomSpmCfg {
    pub capacity_bytes: u64,
    pub banks: u64,
    /// Service period of a read at one bank.
    pub read_period_s: f64,
    /// Service period of a write at one bank.
    pub write_period_s: f64,
    /// End-to-end fill latency charged once per consuming node (pipeline
    /// depth of the pipelined array; zero for plain arrays whose period is
    /// the whole access).
    pub fill_latency_s: f64,
    pub read_energy_j: f64,
    pub write_energy_j: f64,
    pub leakage_w: f64,
}

impl RandomSpmCfg {
    /// A plain (non-pipelined) array of one technology: the service
    /// period is the whole access latency. SNM's destructive reads carry
    /// their restore write in both the period and the energy.
    pub fn from_tech(tech: &MemTechParams, capacity_bytes: u64, banks: u64) -> Self {
        let cfg = crate::memtech::ArrayConfig::new(tech.clone(), capacity_bytes, banks);
        RandomSpmCfg {
            capacity_bytes,
            banks,
            read_period_s: crate::memtech::array_access_latency(&cfg, crate::memtech::AccessKind::Read),
            write_period_s: crate::memtech::array_access_latency(&cfg, crate::memtech::AccessKind::Write),
            fill_latency_s: 0.0,
            read_energy_j: crate::memtech::array_access_energy(
                &cfg,
                crate::memtech::AccessKind::Read,
                1,
            ),
            write_energy_j: crate::memtech::array_access_energy(
                &cfg,
                crate::memtech::AccessKind::Write,
                1,
            ),
            leakage_w: crate::memtech::array_leakage_power(&cfg),
        }
    }

    /// The pipelined CMOS-SFQ array: one new request per bank per stage,
    /// pipeline-depth fill latency, per-access energy and leakage from the
    /// constructed design.
    pub fn from_pipelined_design(d: &PipelinedArrayDesign) -> Self {
        RandomSpmCfg {
            capacity_bytes: d.capacity_bytes,
            banks: d.banks,
            read_period_s: d.pipeline_stage_time_s,
            write_period_s: d.pipeline_stage_time_s,
            fill_latency_s: d.access_latency_s,
            read_energy_j: d.access_energy_j,
            write_energy_j: d.access_energy_j,
            leakage_w: d.leakage_w,
        }
    }
}

/// The scratchpad plan of one accelerator.
#[derive(Debug, Clone, Serialize)]
pub enum SpmPlan {
    /// Zero-latency, zero-energy scratchpads (engine oracle).
    Ideal,
    /// SHIFT-only: private input, output/PSum and weight SHIFT arrays.
    ShiftOnly {
        weight: ShiftSpmCfg,
        input: ShiftSpmCfg,
        output: ShiftSpmCfg,
    },
    /// Every scratchpad built from one random-access technology.
    TechRandom {
        tech_name: String,
        weight: RandomSpmCfg,
        input: RandomSpmCfg,
        output: RandomSpmCfg,
    },
    /// Three small SHIFT arrays plus one shared RANDOM array driven by a
    /// compiled schedule.
    Heterogeneous {
        /// Weight, input, output arrays (in `shift_array_index` order).
        shift: [ShiftSpmCfg; 3],
        random: RandomSpmCfg,
    },
}

impl SpmPlan {
    pub fn label(&self) -> &str {
        match self {
            SpmPlan::Ideal => "ideal",
            SpmPlan::ShiftOnly { .. } => "shift-only",
            SpmPlan::TechRandom { tech_name, .. } => tech_name,
            SpmPlan::Heterogeneous { .. } => "heterogeneous",
        }
    }

    pub fn total_leakage_w(&self) -> f64 {
        match self {
            SpmPlan::Ideal | SpmPlan::ShiftOnly { .. } => 0.0,
            SpmPlan::TechRandom {
                weight,
                input,
                output,
                ..
            } => weight.leakage_w + input.leakage_w + output.leakage_w,
            SpmPlan::Heterogeneous { random, .. } => random.leakage_w,
        }
    }
}

/// Full accelerator configuration.
#[derive(Debug, Clone, Serialize)]
pub struct AcceleratorConfig {
    pub name: String,
    pub matrix_frequency_hz: f64,
    pub pe_rows: u32,
    pub pe_cols: u32,
    pub spm_plan: SpmPlan,
    pub dram_bandwidth_bps: f64,
    pub dram_latency_s: f64,
    pub cooling_factor: f64,
    pub matrix_energy_per_mac_j: f64,
    pub dram_energy_per_byte_j: f64,
    /// Published peak carried as metadata next to the computed peak.
    pub nominal_peak_tmacs: Option<f64>,
}

impl AcceleratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.matrix_frequency_hz <= 0.0 || self.pe_rows == 0 || self.pe_cols == 0 {
            return Err(Error::InvalidConfig(
                "matrix frequency and PE dimensions must be positive".into(),
            ));
        }
        if self.dram_bandwidth_bps <= 0.0 {
            return Err(Error::InvalidConfig("DRAM bandwidth must be positive".into()));
        }
        Ok(())
    }

    /// Computed peak MAC rate (PEs × frequency), TMAC/s.
    pub fn peak_tmacs(&self) -> f64 {
        self.pe_rows as f64 * self.pe_cols as f64 * self.matrix_frequency_hz / 1e12
    }
}

/// Stall cycles by cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StallBreakdown {
    pub shift_seek: u64,
    pub random_latency: u64,
    pub dram: u64,
    pub bank_conflict: u64,
}

impl StallBreakdown {
    pub fn total(&self) -> u64 {
        self.shift_seek + self.random_latency + self.dram + self.bank_conflict
    }
}

/// Energy by component, joules. `cooling` is the cryocooler wall energy
/// for the on-chip components (matrix + SPM dynamic + SPM static).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub matrix_j: f64,
    pub spm_dynamic_j: f64,
    pub spm_static_j: f64,
    pub dram_j: f64,
    pub cooling_j: f64,
}

impl EnergyBreakdown {
    pub fn on_chip_j(&self) -> f64 {
        self.matrix_j + self.spm_dynamic_j + self.spm_static_j
    }

    pub fn total_j(&self) -> f64 {
        self.on_chip_j() + self.dram_j + self.cooling_j
    }
}

/// Per-layer slice of a run.
#[derive(Debug, Clone, Serialize)]
pub struct LayerSimResult {
    pub name: String,
    pub total_cycles: u64,
    pub busy_cycles: u64,
    pub stalls: StallBreakdown,
    pub macs: u64,
}

/// Result of one simulation run.
#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub config_name: String,
    pub spm_label: String,
    pub batch_size: u32,
    pub total_cycles: u64,
    pub busy_cycles: u64,
    pub stalls: StallBreakdown,
    pub energy: EnergyBreakdown,
    pub total_macs: u64,
    pub runtime_s: f64,
    pub throughput_tmacs: f64,
    pub peak_tmacs: f64,
    pub utilization: f64,
    /// Bytes moved between SHIFT arrays and the RANDOM array.
    pub swap_traffic_bytes: u64,
    pub dram_traffic_bytes: u64,
    pub per_layer: Vec<LayerSimResult>,
}

impl SimResult {
    /// Cycle conservation: total = busy + Σ stalls.
    pub fn conserves_cycles(&self) -> bool {
        self.total_cycles == self.busy_cycles + self.stalls.total()
            && self
                .per_layer
                .iter()
                .all(|l| l.total_cycles == l.busy_cycles + l.stalls.total())
    }

    /// CSV row (units in the header).
    pub fn csv_header() -> &'static str {
        "config,spm,batch,total_cycles,busy_cycles,stall_shift_seek_cycles,\
         stall_random_latency_cycles,stall_dram_cycles,stall_bank_conflict_cycles,\
         runtime_s,throughput_tmacs,peak_tmacs,utilization,\
         energy_matrix_j,energy_spm_dynamic_j,energy_spm_static_j,energy_dram_j,\
         energy_cooling_j,energy_total_j,swap_traffic_bytes,dram_traffic_bytes"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.9e},{:.6},{:.6},{:.6},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{},{}",
            self.config_name,
            self.spm_label,
            self.batch_size,
            self.total_cycles,
            self.busy_cycles,
            self.stalls.shift_seek,
            self.stalls.random_latency,
            self.stalls.dram,
            self.stalls.bank_conflict,
            self.runtime_s,
            self.throughput_tmacs,
            self.peak_tmacs,
            self.utilization,
            self.energy.matrix_j,
            self.energy.spm_dynamic_j,
            self.energy.spm_static_j,
            self.energy.dram_j,
            self.energy.cooling_j,
            self.energy.total_j(),
            self.swap_traffic_bytes,
            self.dram_traffic_bytes
        )
    }

    /// Human-readable summary block.
    pub fn summary(&self) -> String {
        let s = &self.stalls;
        format!(
            "{} [{}] batch={}\n\
             cycles: total {} = busy {} + stalls {} (seek {}, random {}, dram {}, conflict {})\n\
             throughput: {:.4} TMAC/s of {:.4} peak ({:.1}% utilization)\n\
             energy: total {:.4e} J (matrix {:.3e}, spm dyn {:.3e}, spm static {:.3e}, dram {:.3e}, cooling {:.3e})\n",
            self.config_name,
            self.spm_label,
            self.batch_size,
            self.total_cycles,
            self.busy_cycles,
            s.total(),
            s.shift_seek,
            s.random_latency,
            s.dram,
            s.bank_conflict,
            self.throughput_tmacs,
            self.peak_tmacs,
            self.utilization * 100.0,
            self.energy.total_j(),
            self.energy.matrix_j,
            self.energy.spm_dynamic_j,
            self.energy.spm_static_j,
            self.energy.dram_j,
            self.energy.cooling_j,
        )
    }
}

/// Re-derives the itemized energy report from a run: cooling is exactly
/// `cooling_factor ×` the on-chip component sum, and all components add up
/// to the total.
pub fn energy_report(result: &SimResult, cfg: &AcceleratorConfig) -> EnergyBreakdown {
    let mut e = result.energy;
    e.cooling_j = cfg.cooling_factor * e.on_chip_j();
    e
}

/// The workload the simulator runs: named layers on this accelerator.
#[derive(Debug, Clone)]
pub struct SimWorkload {
    pub name: String,
    pub layers: Vec<LayerConfig>,
}
