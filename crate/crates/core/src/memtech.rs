//! Cryogenic memory technology parameters and closed-form array models.
//!
//! Latency/energy/area records for the five 4 K memory technologies
//! (SHIFT, VTM, Josephson-CMOS SRAM, SHE-MRAM, SNM), plus array-level
//! composition: seek cost of shift-register rings, decoder area scaling,
//! per-access energy and leakage.
//!
//! Units: seconds, joules, watts, meters, bytes throughout. Cell areas are
//! kept in F² (the technology's own feature size squared) and resolved to
//! m² only when an [`ArrayConfig`] supplies the feature size.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Qualitative leakage classes; densities are resolved by
/// [`leakage_density_w_per_byte`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakageClass {
    None,
    Tiny,
    Medium,
}

/// Leakage density anchor: a 28 MB SRAM-cell (medium class) array leaks
/// 102 mW at 4 K. "Tiny" is 1% of medium by convention; the sources give
/// only qualitative classes plus this one absolute anchor.
pub const MEDIUM_LEAKAGE_ANCHOR_W: f64 = 0.102;
pub const MEDIUM_LEAKAGE_ANCHOR_BYTES: u64 = 28 * 1024 * 1024;

/// Resolves a leakage class to watts per byte.
pub fn leakage_density_w_per_byte(class: LeakageClass) -> f64 {
    let medium = MEDIUM_LEAKAGE_ANCHOR_W / MEDIUM_LEAKAGE_ANCHOR_BYTES as f64;
    match class {
        LeakageClass::None => 0.0,
        LeakageClass::Tiny => 0.01 * medium,
        LeakageClass::Medium => medium,
    }
}

/// One memory technology row: latency, energy, cell size, access capability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemTechParams {
    pub name: String,
    /// Read latency in seconds (the configured point value).
    pub read_latency: f64,
    /// Write latency in seconds (the configured point value).
    pub write_latency: f64,
    /// Published read latency range [lo, hi] in seconds, when the source
    /// gives a range rather than a point (SRAM: 2~4 ns).
    pub read_latency_range: Option<[f64; 2]>,
    pub write_latency_range: Option<[f64; 2]>,
    /// Cell area in F², where F is this technology's own feature size.
    pub cell_area_f2: f64,
    /// Energy per cell access, joules.
    pub read_energy: f64,
    pub write_energy: f64,
    pub leakage_class: LeakageClass,
    /// Watts per byte, resolved from `leakage_class`.
    pub leakage_power_density: f64,
    pub random_access: bool,
    /// Reads destroy the stored value and force a restore write (SNM only).
    pub destructive_read: bool,
    /// Demonstrated functional density in bit/m², where published (VTM:
    /// 0.9 Mbit/cm²). Not reconciled with `cell_area_f2`; both are exposed.
    pub functional_density_bits_per_m2: Option<f64>,
}

impl MemTechParams {
    pub fn validate(&self) -> Result<()> {
        if self.read_latency <= 0.0 || self.write_latency <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "{}: latencies must be > 0",
                self.name
            )));
        }
        if self.read_energy < 0.0 || self.write_energy < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "{}: energies must be >= 0",
                self.name
            )));
        }
        if self.cell_area_f2 <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "{}: cell area must be > 0",
                self.name
            )));
        }
        if !self.random_access && self.name != "SHIFT" {
            return Err(Error::InvalidConfig(format!(
                "{}: only SHIFT lacks random access",
                self.name
            )));
        }
        Ok(())
    }
}

/// Default SRAM access latency, the midpoint of the published 2~4 ns range.
pub const SRAM_DEFAULT_LATENCY_S: f64 = 3e-9;

/// The built-in technology table.
///
/// SHIFT 0.02 ns / 0.1 fJ / 39 F²; VTM 0.1 ns / 0.1 pJ / 203 F²; SRAM
/// 2~4 ns / 0.1 pJ / 146 F²; MRAM 0.1 ns read, 2 ns write / 1 pJ read,
/// 8 pJ write / 89 F²; SNM 0.1 ns read, 3 ns write / 10 fJ / 54 F² with
/// destructive reads.
pub fn builtin_tech_table() -> BTreeMap<String, MemTechParams> {
    let mut table = BTreeMap::new();
    let mut insert = |p: MemTechParams| {
        table.insert(p.name.clone(), p);
    };
    insert(MemTechParams {
        name: "SHIFT".into(),
        read_latency: 0.02e-9,
        write_latency: 0.02e-9,
        read_latency_range: None,
        write_latency_range: None,
        cell_area_f2: 39.0,
        read_energy: 0.1e-15,
        write_energy: 0.1e-15,
        leakage_class: LeakageClass::None,
        leakage_power_density: leakage_density_w_per_byte(LeakageClass::None),
        random_access: false,
        destructive_read: false,
        functional_density_bits_per_m2: None,
    });
    insert(MemTechParams {
        name: "VTM".into(),
        read_latency: 0.1e-9,
        write_latency: 0.1e-9,
        read_latency_range: None,
        write_latency_range: None,
        cell_area_f2: 203.0,
        read_energy: 0.1e-12,
        write_energy: 0.1e-12,
        leakage_class: LeakageClass::Tiny,
        leakage_power_density: leakage_density_w_per_byte(LeakageClass::Tiny),
        random_access: true,
        destructive_read: false,
        // 0.9 Mbit/cm² = 0.9e6 bit / 1e-4 m²
        functional_density_bits_per_m2: Some(0.9e6 / 1e-4),
    });
    insert(MemTechParams {
        name: "SRAM".into(),
        read_latency: SRAM_DEFAULT_LATENCY_S,
        write_latency: SRAM_DEFAULT_LATENCY_S,
        read_latency_range: Some([2e-9, 4e-9]),
        write_latency_range: Some([2e-9, 4e-9]),
        cell_area_f2: 146.0,
        read_energy: 0.1e-12,
        write_energy: 0.1e-12,
        leakage_class: LeakageClass::Medium,
        leakage_power_density: leakage_density_w_per_byte(LeakageClass::Medium),
        random_access: true,
        destructive_read: false,
        functional_density_bits_per_m2: None,
    });
    insert(MemTechParams {
        name: "MRAM".into(),
        read_latency: 0.1e-9,
        write_latency: 2e-9,
        read_latency_range: None,
        write_latency_range: None,
        cell_area_f2: 89.0,
        read_energy: 1e-12,
        write_energy: 8e-12,
        leakage_class: LeakageClass::Tiny,
        leakage_power_density: leakage_density_w_per_byte(LeakageClass::Tiny),
        random_access: true,
        destructive_read: false,
        functional_density_bits_per_m2: None,
    });
    insert(MemTechParams {
        name: "SNM".into(),
        read_latency: 0.1e-9,
        write_latency: 3e-9,
        read_latency_range: None,
        write_latency_range: None,
        cell_area_f2: 54.0,
        read_energy: 10e-15,
        write_energy: 10e-15,
        leakage_class: LeakageClass::Tiny,
        leakage_power_density: leakage_density_w_per_byte(LeakageClass::Tiny),
        random_access: true,
        destructive_read: true,
        functional_density_bits_per_m2: None,
    });
    table
}

/// Raw, string-valued technology override as it appears in a config file.
#[derive(Debug, Clone, Deserialize)]
pub struct MemTechOverride {
    pub name: String,
    pub read_latency: Option<String>,
    pub write_latency: Option<String>,
    pub cell_area_f2: Option<f64>,
    pub read_energy: Option<String>,
    pub write_energy: Option<String>,
    pub leakage_class: Option<LeakageClass>,
    pub random_access: Option<bool>,
    pub destructive_read: Option<bool>,
}

/// Applies a TOML override document on top of the built-in table. The
/// document holds `[[tech]]` entries with SI-unit strings:
///
/// ```toml
/// [[tech]]
/// name = "SRAM"
/// read_latency = "2ns"
/// write_latency = "2ns"
/// ```
pub fn tech_table_with_overrides(document: &str) -> Result<BTreeMap<String, MemTechParams>> {
    #[derive(Deserialize)]
    struct Doc {
        #[serde(default)]
        tech: Vec<MemTechOverride>,
    }
    let doc: Doc = toml::from_str(document)?;
    let mut table = builtin_tech_table();
    for ov in doc.tech {
        let entry = table.entry(ov.name.clone()).or_insert_with(|| MemTechParams {
            name: ov.name.clone(),
            read_latency: 1e-9,
            write_latency: 1e-9,
            read_latency_range: None,
            write_latency_range: None,
            cell_area_f2: 100.0,
            read_energy: 0.0,
            write_energy: 0.0,
            leakage_class: LeakageClass::None,
            leakage_power_density: 0.0,
            random_access: true,
            destructive_read: false,
            functional_density_bits_per_m2: None,
        });
        if let Some(s) = &ov.read_latency {
            entry.read_latency = units::parse_seconds(s)?;
        }
        if let Some(s) = &ov.write_latency {
            entry.write_latency = units::parse_seconds(s)?;
        }
        if let Some(a) = ov.cell_area_f2 {
            entry.cell_area_f2 = a;
        }
        if let Some(s) = &ov.read_energy {
            entry.read_energy = units::parse_joules(s)?;
        }
        if let Some(s) = &ov.write_energy {
            entry.write_energy = units::parse_joules(s)?;
        }
        if let Some(c) = ov.leakage_class {
            entry.leakage_class = c;
            entry.leakage_power_density = leakage_density_w_per_byte(c);
        }
        if let Some(r) = ov.random_access {
            entry.random_access = r;
        }
        if let Some(d) = ov.destructive_read {
            entry.destructive_read = d;
        }
        entry.validate()?;
    }
    Ok(table)
}

/// Decoder implementation style for an array's peripherals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderStyle {
    Sfq,
    Cmos,
}

/// Read or write access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

/// Default feature size: JJs assumed scalable to the 28 nm node.
pub const DEFAULT_FEATURE_SIZE_M: f64 = 28e-9;

/// Reference decoder areas: a 4-to-16 SFQ decoder occupies 77 kF² (the
/// splitter tree dominates), a synthesized CMOS 4-to-16 decoder 23 kF².
/// Larger decoders scale linearly with their 2^N output-line count.
pub const SFQ_DECODER_4TO16_AREA_F2: f64 = 77_000.0;
pub const CMOS_DECODER_4TO16_AREA_F2: f64 = 23_000.0;
const DECODER_REFERENCE_LINES: f64 = 16.0;

/// One memory array built from a technology.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub tech: MemTechParams,
    pub capacity_bytes: u64,
    pub banks: u64,
    /// Bytes transferred per access.
    pub line_width_bytes: u64,
    /// Feature size in meters: JJ diameter for SFQ cell technologies,
    /// transistor node for CMOS SRAM.
    pub feature_size_m: f64,
    pub decoder_style: DecoderStyle,
}

impl ArrayConfig {
    pub fn new(tech: MemTechParams, capacity_bytes: u64, banks: u64) -> Self {
        let decoder_style = if tech.name == "SRAM" {
            DecoderStyle::Cmos
        } else {
            DecoderStyle::Sfq
        };
        ArrayConfig {
            tech,
            capacity_bytes,
            banks,
            line_width_bytes: 1,
            feature_size_m: DEFAULT_FEATURE_SIZE_M,
            decoder_style,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tech.validate()?;
        if self.capacity_bytes == 0 {
            return Err(Error::InvalidConfig("capacity must be > 0".into()));
        }
        if self.banks == 0 || self.capacity_bytes % self.banks != 0 {
            return Err(Error::InvalidConfig(format!(
                "capacity {} not divisible by banks {}",
                self.capacity_bytes, self.banks
            )));
        }
        if self.line_width_bytes == 0 {
            return Err(Error::InvalidConfig("line width must be >= 1".into()));
        }
        // CMOS peripherals only make sense around SRAM cells; SFQ cell
        // technologies keep SFQ decoders.
        if self.decoder_style == DecoderStyle::Cmos && self.tech.name != "SRAM" {
            return Err(Error::InvalidConfig(format!(
                "cmos decoders are only permitted for SRAM-cell arrays, not {}",
                self.tech.name
            )));
        }
        Ok(())
    }

    pub fn bytes_per_bank(&self) -> u64 {
        self.capacity_bytes / self.banks
    }
}

/// Effective access latency for one access of `kind`.
///
/// SNM reads are destructive, so the restore write is folded into the
/// effective read latency. For SHIFT this is the per-cell shift time; seek
/// cost over a rotation distance is [`shift_seek_cost`].
pub fn array_access_latency(cfg: &ArrayConfig, kind: AccessKind) -> f64 {
    let t = &cfg.tech;
    match kind {
        AccessKind::Read => {
            if t.destructive_read {
                t.read_latency + t.write_latency
            } else {
                t.read_latency
            }
        }
        AccessKind::Write => t.write_latency,
    }
}

/// State of one shift-register ring: serially connected DFFs closed by a
/// feedback loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftArrayState {
    /// Ring length in cells.
    pub length: u64,
    /// Cell index currently at the access port.
    pub head_position: u64,
    /// Seconds per single-cell shift (stored as integer femtoseconds to
    /// keep state comparisons exact; constructor takes seconds).
    cell_shift_time_fs: u64,
}

impl ShiftArrayState {
    pub fn new(length: u64, cell_shift_time_s: f64) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidConfig("shift ring length must be > 0".into()));
        }
        if cell_shift_time_s <= 0.0 {
            return Err(Error::InvalidConfig("cell shift time must be > 0".into()));
        }
        Ok(ShiftArrayState {
            length,
            head_position: 0,
            cell_shift_time_fs: (cell_shift_time_s * 1e15).round() as u64,
        })
    }

    pub fn cell_shift_time(&self) -> f64 {
        self.cell_shift_time_fs as f64 * 1e-15
    }

    /// Forward rotation distance to bring `target` to the port. The
    /// feedback loop is unidirectional, so distance is modular and
    /// forward-only.
    pub fn seek_distance(&self, target: u64) -> u64 {
        debug_assert!(target < self.length);
        (target + self.length - self.head_position) % self.length
    }

    /// Rotates the ring so `target` is at the port.
    pub fn seek(&mut self, target: u64) -> u64 {
        let d = self.seek_distance(target);
        self.head_position = target;
        d
    }
}

/// Seconds to rotate the ring from its current head to `target`.
pub fn shift_seek_cost(state: &ShiftArrayState, target: u64) -> f64 {
    state.seek_distance(target) as f64 * state.cell_shift_time()
}

/// Area report in square meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaBreakdown {
    pub cells_m2: f64,
    pub decoders_m2: f64,
    pub other_peripherals_m2: f64,
}

impl AreaBreakdown {
    pub fn total_m2(&self) -> f64 {
        self.cells_m2 + self.decoders_m2 + self.other_peripherals_m2
    }
}

/// Unit area of an N-output decoder in F², scaled linearly in output-line
/// count from the 4-to-16 reference (the SFQ splitter tree grows as
/// O(2^N)).
pub fn decoder_area_f2(style: DecoderStyle, output_lines: u64) -> f64 {
    let reference = match style {
        DecoderStyle::Sfq => SFQ_DECODER_4TO16_AREA_F2,
        DecoderStyle::Cmos => CMOS_DECODER_4TO16_AREA_F2,
    };
    reference * output_lines as f64 / DECODER_REFERENCE_LINES
}

/// Total array area with a cells/decoders/other breakdown.
///
/// Cells: capacity·8·cell_area·F². Decoders: one line decoder per bank
/// (selecting among the bank's lines) plus one bank-select decoder. SHIFT
/// arrays need only the bank select — each bank is one long lane. "Other"
/// covers the reply-path multiplexers, modeled at half the decoder cost.
pub fn array_area(cfg: &ArrayConfig) -> Result<AreaBreakdown> {
    cfg.validate()?;
    let f2 = cfg.feature_size_m * cfg.feature_size_m;
    let bits = cfg.capacity_bytes as f64 * 8.0;
    let cells_m2 = bits * cfg.tech.cell_area_f2 * f2;

    let bank_select_f2 = decoder_area_f2(cfg.decoder_style, cfg.banks.max(2));
    let decoders_f2 = if cfg.tech.random_access {
        let lines_per_bank = (cfg.bytes_per_bank() / cfg.line_width_bytes).max(2);
        bank_select_f2 + cfg.banks as f64 * decoder_area_f2(cfg.decoder_style, lines_per_bank)
    } else {
        // SHIFT: few decoders/multiplexers, bank select only.
        bank_select_f2
    };
    let decoders_m2 = decoders_f2 * f2;
    let other_peripherals_m2 = 0.5 * decoders_m2;
    Ok(AreaBreakdown {
        cells_m2,
        decoders_m2,
        other_peripherals_m2,
    })
}

/// Energy of one access.
///
/// Random-access technologies pay the per-cell energy for each byte of the
/// line touched. SHIFT pays per cell *moved*: rotating the ring by
/// `cells_moved` positions clocks that many byte-granule stages, so a
/// 128-position seek costs 128 × 0.1 fJ.
pub fn array_access_energy(cfg: &ArrayConfig, kind: AccessKind, cells_moved: u64) -> f64 {
    let per_cell = match kind {
        AccessKind::Read => {
            if cfg.tech.destructive_read {
                cfg.tech.read_energy + cfg.tech.write_energy
            } else {
                cfg.tech.read_energy
            }
        }
        AccessKind::Write => cfg.tech.write_energy,
    };
    if cfg.tech.random_access {
        per_cell * cfg.line_width_bytes as f64
    } else {
        per_cell * cells_moved.max(1) as f64
    }
}

/// Static power of the whole array.
pub fn array_leakage_power(cfg: &ArrayConfig) -> f64 {
    cfg.tech.leakage_power_density * cfg.capacity_bytes as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tech(name: &str) -> MemTechParams {
        builtin_tech_table().remove(name).unwrap()
    }

    #[test]
    fn table_matches_published_values() {
        let t = builtin_tech_table();
        assert_eq!(t.len(), 5);
        for name in ["SHIFT", "VTM", "SRAM", "MRAM", "SNM"] {
            assert!(t.contains_key(name), "missing {name}");
            t[name].validate().unwrap();
        }
        let shift = &t["SHIFT"];
        assert_eq!(shift.read_latency, 0.02e-9);
        assert_eq!(shift.read_energy, 0.1e-15);
        assert_eq!(shift.cell_area_f2, 39.0);
        assert!(!shift.random_access);
        let mram = &t["MRAM"];
        assert_eq!(mram.write_latency, 2e-9);
        assert_eq!(mram.write_energy, 8e-12);
        let snm = &t["SNM"];
        assert_eq!(snm.write_latency, 3e-9);
        assert!(snm.destructive_read);
        let sram = &t["SRAM"];
        assert_eq!(sram.read_latency_range, Some([2e-9, 4e-9]));
        assert_eq!(sram.read_latency, 3e-9);
    }

    #[test]
    fn snm_read_includes_restore_write() {
        let cfg = ArrayConfig::new(tech("SNM"), 1024, 1);
        // Destructive read forces the restore: 0.1 ns + 3 ns.
        assert!((array_access_latency(&cfg, AccessKind::Read) - 3.1e-9).abs() < 1e-21);
        let vtm = ArrayConfig::new(tech("VTM"), 1024, 1);
        assert_eq!(array_access_latency(&vtm, AccessKind::Read), 0.1e-9);
        let shift = ArrayConfig::new(tech("SHIFT"), 1024, 1);
        assert_eq!(array_access_latency(&shift, AccessKind::Read), 0.02e-9);
        // SNM effective read ends up slower than MRAM's.
        let mram = ArrayConfig::new(tech("MRAM"), 1024, 1);
        assert!(
            array_access_latency(&cfg, AccessKind::Read)
                > array_access_latency(&mram, AccessKind::Read)
        );
    }

    #[test]
    fn seek_cost_is_modular_distance() {
        let mut s = ShiftArrayState::new(1024, 0.02e-9).unwrap();
        s.head_position = 10;
        assert!((shift_seek_cost(&s, 11) - 0.02e-9).abs() < 1e-24);
        assert_eq!(shift_seek_cost(&s, 10), 0.0);
        s.head_position = 1023;
        assert!((shift_seek_cost(&s, 0) - 0.02e-9).abs() < 1e-24);
    }

    #[test]
    fn sequential_scan_costs_one_shift_per_cell() {
        let mut s = ShiftArrayState::new(256, 0.02e-9).unwrap();
        let mut total = 0u64;
        for i in 1..=255u64 {
            total += s.seek(i % 256);
        }
        assert_eq!(total, 255);
    }

    #[test]
    fn shift_area_carries_almost_no_decoders() {
        let cfg = ArrayConfig::new(tech("SHIFT"), 24 * 1024 * 1024, 64);
        let a = array_area(&cfg).unwrap();
        // 24·2^20·8·39·(28nm)²
        let expect = 24.0 * 1024.0 * 1024.0 * 8.0 * 39.0 * 28e-9 * 28e-9;
        assert!((a.cells_m2 - expect).abs() / expect < 1e-12);
        assert!(a.cells_m2 > 6.1e-6 && a.cells_m2 < 6.2e-6, "≈6.16 mm²");
        assert!(a.decoders_m2 < 0.01 * a.cells_m2);
    }

    #[test]
    fn decoder_reference_area_scales_quadratically_with_feature() {
        // At F = 1 µm the 4-to-16 SFQ reference is 77,000 µm².
        let f = 1e-6;
        let area = decoder_area_f2(DecoderStyle::Sfq, 16) * f * f;
        assert!((area - 77_000e-12).abs() / 77_000e-12 < 1e-12);
    }

    #[test]
    fn area_monotone_in_capacity_and_banks() {
        let base = ArrayConfig::new(tech("SRAM"), 1024 * 1024, 16);
        let a0 = array_area(&base).unwrap().total_m2();
        let mut bigger = base.clone();
        bigger.capacity_bytes *= 2;
        assert!(array_area(&bigger).unwrap().total_m2() > a0);
        let mut more_banks = base.clone();
        more_banks.banks *= 4;
        assert!(array_area(&more_banks).unwrap().total_m2() > a0);
    }

    #[test]
    fn zero_capacity_rejected() {
        let cfg = ArrayConfig::new(tech("SRAM"), 0, 1);
        assert!(array_area(&cfg).is_err());
    }

    #[test]
    fn shift_access_energy_scales_with_cells_moved() {
        let cfg = ArrayConfig::new(tech("SHIFT"), 32 * 1024, 256);
        let e = array_access_energy(&cfg, AccessKind::Read, 128);
        assert!((e - 12.8e-15).abs() < 1e-24);
    }

    #[test]
    fn leakage_anchor_and_ersfq_shift() {
        let shift = ArrayConfig::new(tech("SHIFT"), 24 * 1024 * 1024, 64);
        assert_eq!(array_leakage_power(&shift), 0.0);
        let sram = ArrayConfig::new(tech("SRAM"), 28 * 1024 * 1024, 256);
        assert!((array_leakage_power(&sram) - 0.102).abs() < 1e-12);
    }

    #[test]
    fn cmos_decoders_rejected_on_sfq_cells() {
        let mut cfg = ArrayConfig::new(tech("VTM"), 1024, 1);
        cfg.decoder_style = DecoderStyle::Cmos;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn override_table_parses_si_strings() {
        let doc = r#"
            [[tech]]
            name = "SRAM"
            read_latency = "2ns"
            write_latency = "2ns"
        "#;
        let t = tech_table_with_overrides(doc).unwrap();
        assert_eq!(t["SRAM"].read_latency, 2e-9);
        // untouched rows keep their defaults
        assert_eq!(t["SHIFT"].read_latency, 0.02e-9);
    }
}
