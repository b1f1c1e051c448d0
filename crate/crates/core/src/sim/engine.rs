//! The replay engine.
//!
//! The clock only advances through `busy` (ideal trace cycles) or one of
//! the attributed stall counters, which makes cycle conservation an
//! identity rather than a property to hope for. All service state is
//! integer cycles.

use std::collections::BTreeMap;

use crate::compiler::{shift_array_index, Schedule, TransferAction};
use crate::error::{Error, Result};
use crate::workload::{
    dag_from_trace, generate_trace, ObjectExtraction, ObjectIndex, ObjectKind, TraceRecord,
    INPUT_BASE, OUTPUT_BASE, PSUM_BASE, WEIGHT_BASE,
};

use super::{
    AcceleratorConfig, EnergyBreakdown, LayerSimResult, RandomSpmCfg, ShiftSpmCfg, SimResult,
    SimWorkload, SpmPlan, StallBreakdown,
};

fn cycles_ceil(seconds: f64, freq: f64) -> u64 {
    (seconds * freq).ceil().max(0.0) as u64
}

fn cycles_round_at_least_one(seconds: f64, freq: f64) -> u64 {
    ((seconds * freq).round() as u64).max(1)
}

struct ShiftState {
    banks: u64,
    entries_per_bank: u64,
    step_cycles: u64,
    cell_energy_j: f64,
    heads: Vec<u64>,
    bank_next: Vec<u64>,
}

impl ShiftState {
    fn new(cfg: &ShiftSpmCfg, freq: f64) -> Self {
        ShiftState {
            banks: cfg.banks.max(1),
            entries_per_bank: cfg.entries_per_bank(),
            step_cycles: cycles_round_at_least_one(cfg.cell_shift_time_s, freq),
            cell_energy_j: cfg.cell_energy_j,
            heads: vec![0; cfg.banks.max(1) as usize],
            bank_next: vec![0; cfg.banks.max(1) as usize],
        }
    }

    /// Serves one access at `issue`; returns (ready_cycle, energy).
    fn serve(&mut self, local_entry: u64, issue: u64) -> (u64, f64) {
        let bank = (local_entry % self.banks) as usize;
        let pos = (local_entry / self.banks) % self.entries_per_bank;
        let head = self.heads[bank];
        let steps = (pos + self.entries_per_bank - head) % self.entries_per_bank;
        self.heads[bank] = pos;
        let occupancy = (steps * self.step_cycles).max(1);
        let start = issue.max(self.bank_next[bank]);
        self.bank_next[bank] = start + occupancy;
        let energy = steps.max(1) as f64 * self.cell_energy_j;
        (start + occupancy, energy)
    }
}

struct RandomState {
    banks: u64,
    read_period: u64,
    write_period: u64,
    fill_cycles: u64,
    read_energy_j: f64,
    write_energy_j: f64,
    bank_next: Vec<u64>,
    bank_last_issue: Vec<u64>,
    warm: bool,
}

impl RandomState {
    fn new(cfg: &RandomSpmCfg, freq: f64) -> Self {
        RandomState {
            banks: cfg.banks.max(1),
            read_period: cycles_round_at_least_one(cfg.read_period_s, freq),
            write_period: cycles_round_at_least_one(cfg.write_period_s, freq),
            fill_cycles: cycles_ceil(cfg.fill_latency_s, freq),
            read_energy_j: cfg.read_energy_j,
            write_energy_j: cfg.write_energy_j,
            bank_next: vec![0; cfg.banks.max(1) as usize],
            bank_last_issue: vec![u64::MAX; cfg.banks.max(1) as usize],
            warm: false,
        }
    }

    /// Serves one access; returns (ready, same-cycle-conflict, energy).
    fn serve(&mut self, local_entry: u64, issue: u64, write: bool) -> (u64, bool, f64) {
        let bank = (local_entry % self.banks) as usize;
        let period = if write {
            self.write_period
        } else {
            self.read_period
        };
        let conflict = self.bank_last_issue[bank] == issue;
        self.bank_last_issue[bank] = issue;
        let start = issue.max(self.bank_next[bank]);
        self.bank_next[bank] = start + period;
        let mut ready = start + period;
        if !self.warm {
            ready += self.fill_cycles;
            self.warm = true;
        }
        let energy = if write {
            self.write_energy_j
        } else {
            self.read_energy_j
        };
        (ready, conflict, energy)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Port {
    Ideal,
    Shift(usize),
    Random(usize),
    Dram,
}

struct Engine<'a> {
    cfg: &'a AcceleratorConfig,
    freq: f64,
    shifts: Vec<ShiftState>,
    randoms: Vec<RandomState>,
    /// kind (as index) → port for the static plans.
    static_route: [Port; 4],
    heterogeneous: bool,
    dram_next: u64,
    dram_latency_cycles: u64,
    swap_next: u64,
    clock: u64,
    busy: u64,
    stalls: StallBreakdown,
    spm_dynamic_j: f64,
    dram_bytes: u64,
    swap_bytes: u64,
    total_macs: u64,
}

fn kind_index(kind: ObjectKind) -> usize {
    match kind {
        ObjectKind::Weight => 0,
        ObjectKind::Input => 1,
        ObjectKind::Output => 2,
        ObjectKind::Psum => 3,
    }
}

fn kind_base(kind: ObjectKind) -> u64 {
    match kind {
        ObjectKind::Weight => WEIGHT_BASE,
        ObjectKind::Input => INPUT_BASE,
        ObjectKind::Output => OUTPUT_BASE,
        ObjectKind::Psum => PSUM_BASE,
    }
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a AcceleratorConfig) -> Result<Self> {
        cfg.validate()?;
        let freq = cfg.matrix_frequency_hz;
        let mut shifts = Vec::new();
        let mut randoms = Vec::new();
        let mut heterogeneous = false;
        let static_route: [Port; 4] = match &cfg.spm_plan {
            SpmPlan::Ideal => [Port::Ideal; 4],
            SpmPlan::ShiftOnly {
                weight,
                input,
                output,
            } => {
                shifts.push(ShiftState::new(weight, freq));
                shifts.push(ShiftState::new(input, freq));
                shifts.push(ShiftState::new(output, freq));
                [
                    Port::Shift(0),
                    Port::Shift(1),
                    Port::Shift(2),
                    Port::Shift(2),
                ]
            }
            SpmPlan::TechRandom {
                weight,
                input,
                output,
                ..
            } => {
                randoms.push(RandomState::new(weight, freq));
                randoms.push(RandomState::new(input, freq));
                randoms.push(RandomState::new(output, freq));
                [
                    Port::Random(0),
                    Port::Random(1),
                    Port::Random(2),
                    Port::Random(2),
                ]
            }
            SpmPlan::Heterogeneous { shift, random } => {
                heterogeneous = true;
                for s in shift {
                    shifts.push(ShiftState::new(s, freq));
                }
                randoms.push(RandomState::new(random, freq));
                // Without a schedule everything is served by the RANDOM
                // array.
                [Port::Random(0); 4]
            }
        };
        Ok(Engine {
            cfg,
            freq,
            shifts,
            randoms,
            static_route,
            heterogeneous,
            dram_next: 0,
            dram_latency_cycles: cycles_ceil(cfg.dram_latency_s, freq),
            swap_next: 0,
            clock: 0,
            busy: 0,
            stalls: StallBreakdown::default(),
            spm_dynamic_j: 0.0,
            dram_bytes: 0,
            swap_bytes: 0,
            total_macs: 0,
        })
    }

    fn dram_cycles_for_bytes(&self, bytes: u64) -> u64 {
        self.dram_latency_cycles + cycles_ceil(bytes as f64 / self.cfg.dram_bandwidth_bps, self.freq)
    }

    /// Serializes one transfer on the DRAM channel; returns completion.
    fn dram_transfer(&mut self, issue: u64, bytes: u64) -> u64 {
        let start = issue.max(self.dram_next);
        let done = start + self.dram_cycles_for_bytes(bytes);
        self.dram_next = done;
        self.dram_bytes += bytes;
        done
    }

    /// Serializes one SHIFT↔RANDOM copy; returns completion.
    fn swap_transfer(&mut self, issue: u64, bytes: u64) -> u64 {
        let random = &self.randoms[0];
        let per_wave = random.banks.max(1);
        let waves = bytes.div_ceil(per_wave);
        let duration = waves * random.read_period + random.fill_cycles;
        let start = issue.max(self.swap_next);
        let done = start + duration;
        self.swap_next = done;
        self.swap_bytes += bytes;
        done
    }

    fn stall(&mut self, cause: Cause, cycles: u64) {
        if cycles == 0 {
            return;
        }
        match cause {
            Cause::ShiftSeek => self.stalls.shift_seek += cycles,
            Cause::RandomLatency => self.stalls.random_latency += cycles,
            Cause::Dram => self.stalls.dram += cycles,
            Cause::BankConflict => self.stalls.bank_conflict += cycles,
        }
        self.clock += cycles;
    }

    fn advance_busy(&mut self, cycles: u64) {
        self.busy += cycles;
        self.clock += cycles;
    }

    /// Pipeline fill is charged once per consuming node.
    fn reset_warm(&mut self) {
        for r in &mut self.randoms {
            r.warm = false;
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Cause {
    ShiftSeek,
    RandomLatency,
    Dram,
    BankConflict,
}

/// Replay context of one layer.
struct LayerRun<'a> {
    index: &'a ObjectIndex,
    schedule: Option<&'a Schedule>,
    /// Completion cycle of the load feeding each object (u64::MAX when no
    /// transfer feeds it).
    object_ready: Vec<u64>,
}

impl LayerRun<'_> {
    /// Port serving a record, given the current in/out edges.
    fn route(&self, engine: &Engine, rec: &TraceRecord, in_edge: usize, out_edge: usize) -> Port {
        if !engine.heterogeneous || self.schedule.is_none() {
            return engine.static_route[kind_index(rec.kind)];
        }
        let schedule = self.schedule.unwrap();
        let obj = self
            .index
            .find(rec.kind, rec.addr)
            .expect("traced address must map to an object");
        let edge = if rec.write { out_edge } else { in_edge };
        let (h, r) = schedule.entries[obj].placement_at(edge);
        if h {
            Port::Shift(shift_array_index(rec.kind))
        } else if r {
            Port::Random(0)
        } else {
            Port::Dram
        }
    }
}

/// Runs one phase (weight or stream) of a fold: advances busy by the ideal
/// cycle count and adds the attributed stalls of each cycle group.
#[allow(clippy::too_many_arguments)]
fn run_phase(
    engine: &mut Engine,
    run: &LayerRun,
    records: &[TraceRecord],
    phase_base_cycle: u64,
    phase_cycles: u64,
    in_edge: usize,
    out_edge: usize,
    image_offsets: (u64, u64, u64),
) {
    let phase_start = engine.clock;
    engine.advance_busy(phase_cycles);
    let mut delay = 0u64;
    let mut i = 0;
    while i < records.len() {
        let group_cycle = records[i].cycle;
        let mut j = i;
        while j < records.len() && records[j].cycle == group_cycle {
            j += 1;
        }
        let issue = phase_start + (group_cycle - phase_base_cycle) + delay;
        let mut worst: Option<(u64, Cause)> = None;
        for rec in &records[i..j] {
            let port = run.route(engine, rec, in_edge, out_edge);
            let offset = match rec.kind {
                ObjectKind::Weight => 0,
                ObjectKind::Input => image_offsets.0,
                ObjectKind::Output => image_offsets.1,
                ObjectKind::Psum => image_offsets.2,
            };
            let local = rec.addr - kind_base(rec.kind) + offset;
            let (ready, cause, energy) = match port {
                Port::Ideal => (issue + 1, Cause::ShiftSeek, 0.0),
                Port::Shift(s) => {
                    let (ready, e) = engine.shifts[s].serve(local, issue);
                    (ready, Cause::ShiftSeek, e)
                }
                Port::Random(ridx) => {
                    let (ready, conflict, e) = engine.randoms[ridx].serve(local, issue, rec.write);
                    let cause = if conflict {
                        Cause::BankConflict
                    } else {
                        Cause::RandomLatency
                    };
                    (ready, cause, e)
                }
                Port::Dram => {
                    // Not resident anywhere: a straggler DRAM access.
                    let done = engine.dram_transfer(issue, 1);
                    (done, Cause::Dram, 0.0)
                }
            };
            engine.spm_dynamic_j += energy;
            let extra = ready.saturating_sub(issue + 1);
            if worst.map_or(true, |(w, c)| extra > w || (extra == w && cause < c)) {
                worst = Some((extra, cause));
            }
        }
        if let Some((extra, cause)) = worst {
            engine.stall(cause, extra);
            delay += extra;
        }
        i = j;
    }
}

/// Node wait until every read operand's feeding transfer has landed.
fn wait_for_operands(engine: &mut Engine, run: &LayerRun, reads: &[usize]) {
    let mut latest = engine.clock;
    for &obj in reads {
        let ready = run.object_ready[obj];
        if ready != u64::MAX {
            latest = latest.max(ready);
        }
    }
    let wait = latest - engine.clock;
    engine.stall(Cause::Dram, wait);
}

/// Transfer energy charged on the arrays' ports.
fn transfer_energy(engine: &Engine, action: TransferAction, bytes: u64) -> f64 {
    let b = bytes as f64;
    let shift_e = match &engine.cfg.spm_plan {
        SpmPlan::ShiftOnly { weight, .. } => weight.cell_energy_j,
        SpmPlan::Heterogeneous { shift, .. } => shift[0].cell_energy_j,
        _ => 0.0,
    };
    let (r_read, r_write) = engine
        .randoms
        .first()
        .map(|r| (r.read_energy_j, r.write_energy_j))
        .unwrap_or((0.0, 0.0));
    match action {
        TransferAction::LoadDramToShift => b * shift_e,
        TransferAction::LoadDramToRandom => b * r_write,
        TransferAction::LoadRandomToShift => b * (r_read + shift_e),
        TransferAction::StoreShiftToDram => b * shift_e,
        TransferAction::StoreRandomToDram => b * r_read,
        TransferAction::StoreShiftToRandom => b * (shift_e + r_write),
    }
}

/// Simulates one image batch of a whole workload.
pub fn batch_run(
    workload: &SimWorkload,
    schedules: Option<&[Schedule]>,
    batch_size: u32,
    cfg: &AcceleratorConfig,
) -> Result<SimResult> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be >= 1".into()));
    }
    let mut engine = Engine::new(cfg)?;
    let mut per_layer = Vec::with_capacity(workload.layers.len());
    // Entry clock of the previous layer's last compute node; transfers on
    // the next layer's first edges may start here (one layer of
    // double-buffering).
    let mut early_issue: Option<u64> = None;

    if let Some(s) = schedules {
        if s.len() != workload.layers.len() {
            return Err(Error::InvalidConfig(format!(
                "{} schedules for {} layers",
                s.len(),
                workload.layers.len()
            )));
        }
    }

    for (li, layer) in workload.layers.iter().enumerate() {
        let trace = generate_trace(layer, cfg.pe_rows, cfg.pe_cols)?;
        let dag = dag_from_trace(&trace, ObjectExtraction::default());
        let index = ObjectIndex::new(&dag.objects);
        let schedule = schedules.map(|s| &s[li]);
        if let Some(s) = schedule {
            if s.edge_count != dag.edge_count() || s.entries.len() != dag.objects.len() {
                return Err(Error::InvalidConfig(format!(
                    "schedule for layer '{}' does not match this PE configuration",
                    layer.name
                )));
            }
        }
        let layer_clock0 = engine.clock;
        let layer_busy0 = engine.busy;
        let layer_stalls0 = engine.stalls;
        let layer_macs0 = engine.total_macs;

        let mut run = LayerRun {
            index: &index,
            schedule,
            object_ready: vec![u64::MAX; dag.objects.len()],
        };

        // Transfers grouped by edge.
        let mut transfers: BTreeMap<usize, Vec<(usize, TransferAction)>> = BTreeMap::new();
        match schedule {
            Some(s) => {
                for e in &s.entries {
                    for &(edge, action) in &e.transfers {
                        transfers.entry(edge).or_default().push((e.object, action));
                    }
                }
                for v in transfers.values_mut() {
                    v.sort_unstable_by_key(|&(o, a)| (o, a as u8));
                }
            }
            None => {
                // Static plans: bulk load at layer entry, bulk store at the
                // end. Object granularity keeps ready-times per object.
                let shifty = matches!(cfg.spm_plan, SpmPlan::ShiftOnly { .. });
                let (load_a, store_a) = if shifty {
                    (
                        TransferAction::LoadDramToShift,
                        TransferAction::StoreShiftToDram,
                    )
                } else {
                    (
                        TransferAction::LoadDramToRandom,
                        TransferAction::StoreRandomToDram,
                    )
                };
                let mut loads: Vec<(usize, TransferAction)> = dag
                    .objects
                    .iter()
                    .filter(|o| !o.is_produced())
                    .map(|o| (o.id, load_a))
                    .collect();
                loads.sort_unstable_by_key(|&(o, _)| o);
                transfers.insert(1, loads);
                let mut stores: Vec<(usize, TransferAction)> = dag
                    .objects
                    .iter()
                    .filter(|o| o.kind == ObjectKind::Output)
                    .map(|o| (o.id, store_a))
                    .collect();
                stores.sort_unstable_by_key(|&(o, _)| o);
                transfers.insert(dag.edge_count(), stores);
            }
        }

        let last_compute_node = dag.nodes.len() - 3; // final MatrixMultiply
        for edge in 1..=dag.edge_count() {
            // Issue this edge's transfers.
            if let Some(list) = transfers.get(&edge) {
                for &(obj, action) in list {
                    let o = &dag.objects[obj];
                    let scale = if o.kind == ObjectKind::Weight {
                        1
                    } else {
                        batch_size as u64
                    };
                    let bytes = o.size_bytes * scale;
                    let issue = if edge <= 2 {
                        early_issue.unwrap_or(engine.clock).min(engine.clock)
                    } else {
                        engine.clock
                    };
                    let done = match action {
                        TransferAction::LoadDramToShift
                        | TransferAction::LoadDramToRandom
                        | TransferAction::StoreShiftToDram
                        | TransferAction::StoreRandomToDram => engine.dram_transfer(issue, bytes),
                        TransferAction::LoadRandomToShift
                        | TransferAction::StoreShiftToRandom => engine.swap_transfer(issue, bytes),
                    };
                    engine.spm_dynamic_j += transfer_energy(&engine, action, bytes);
                    if action.is_load() {
                        run.object_ready[obj] = run.object_ready[obj].min(done);
                    }
                }
            }

            // Execute the node this edge leads into.
            let node_idx = edge;
            if node_idx == last_compute_node {
                early_issue = Some(engine.clock);
            }
            let node = &dag.nodes[node_idx];
            match node.opcode {
                crate::workload::Opcode::ReadWeights => {
                    let fold = node.fold.unwrap() as usize;
                    let f = &trace.folds[fold];
                    engine.reset_warm();
                    wait_for_operands(&mut engine, &run, &node.reads);
                    run_phase(
                        &mut engine,
                        &run,
                        &f.weight_phase,
                        f.start_cycle,
                        f.weight_phase_cycles,
                        edge,
                        edge + 1,
                        (0, 0, 0),
                    );
                }
                crate::workload::Opcode::MatrixMultiply => {
                    let fold = node.fold.unwrap() as usize;
                    let f = &trace.folds[fold];
                    engine.reset_warm();
                    wait_for_operands(&mut engine, &run, &node.reads);
                    let stream_base = f.start_cycle + f.weight_phase_cycles;
                    for img in 0..batch_size as u64 {
                        let offsets = (
                            img * layer.input_bytes(),
                            img * layer.output_bytes(),
                            img * layer.output_bytes(),
                        );
                        run_phase(
                            &mut engine,
                            &run,
                            &f.stream_phase,
                            stream_base,
                            f.stream_phase_cycles,
                            edge,
                            edge + 1,
                            offsets,
                        );
                    }
                    engine.total_macs += f.macs * batch_size as u64;
                }
                crate::workload::Opcode::ReadHostMemory
                | crate::workload::Opcode::Activate
                | crate::workload::Opcode::WriteHostMemory => {}
            }
        }

        if li + 1 == workload.layers.len() {
            // Drain outstanding DRAM/swap traffic at the workload end.
            let drain = engine
                .dram_next
                .max(engine.swap_next)
                .saturating_sub(engine.clock);
            engine.stall(Cause::Dram, drain);
        }

        per_layer.push(LayerSimResult {
            name: layer.name.clone(),
            total_cycles: engine.clock - layer_clock0,
            busy_cycles: engine.busy - layer_busy0,
            stalls: StallBreakdown {
                shift_seek: engine.stalls.shift_seek - layer_stalls0.shift_seek,
                random_latency: engine.stalls.random_latency - layer_stalls0.random_latency,
                dram: engine.stalls.dram - layer_stalls0.dram,
                bank_conflict: engine.stalls.bank_conflict - layer_stalls0.bank_conflict,
            },
            macs: engine.total_macs - layer_macs0,
        });
    }

    let runtime_s = engine.clock as f64 / cfg.matrix_frequency_hz;
    let matrix_j = engine.total_macs as f64 * cfg.matrix_energy_per_mac_j;
    let spm_static_j = cfg.spm_plan.total_leakage_w() * runtime_s;
    let dram_j = engine.dram_bytes as f64 * cfg.dram_energy_per_byte_j;
    let on_chip = matrix_j + engine.spm_dynamic_j + spm_static_j;
    let energy = EnergyBreakdown {
        matrix_j,
        spm_dynamic_j: engine.spm_dynamic_j,
        spm_static_j,
        dram_j,
        cooling_j: cfg.cooling_factor * on_chip,
    };
    let throughput_tmacs = if runtime_s > 0.0 {
        engine.total_macs as f64 / runtime_s / 1e12
    } else {
        0.0
    };
    let peak = cfg.peak_tmacs();
    let result = SimResult {
        config_name: cfg.name.clone(),
        spm_label: cfg.spm_plan.label().to_string(),
        batch_size,
        total_cycles: engine.clock,
        busy_cycles: engine.busy,
        stalls: engine.stalls,
        energy,
        total_macs: engine.total_macs,
        runtime_s,
        throughput_tmacs,
        peak_tmacs: peak,
        utilization: if peak > 0.0 {
            (throughput_tmacs / peak).min(1.0)
        } else {
            0.0
        },
        swap_traffic_bytes: engine.swap_bytes,
        dram_traffic_bytes: engine.dram_bytes,
        per_layer,
    };
    debug_assert!(result.conserves_cycles());
    Ok(result)
}

/// Single-image run.
pub fn simulate(
    workload: &SimWorkload,
    schedules: Option<&[Schedule]>,
    cfg: &AcceleratorConfig,
) -> Result<SimResult> {
    batch_run(workload, schedules, 1, cfg)
}
