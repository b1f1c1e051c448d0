//! Construction of the per-layer 0/1 program.
//!
//! Variables exist only inside each object's prefetch-extended lifespan
//! window; everything outside is identically zero and omitted. Objective
//! coefficients are quantized to integer femtoseconds so that solver
//! arithmetic is exact and mode-independent.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::workload::{lifespan_analysis, LayerDag, LiveWindow, ObjectId, ObjectKind};

use super::{shift_array_index, CompileMeta, CostCoefficients, SpmSpec};

/// The eight variables of one (object, edge) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VarType {
    PlaceH,
    PlaceR,
    LoadHD,
    LoadRD,
    LoadHR,
    StoreHD,
    StoreRD,
    StoreHR,
}

impl VarType {
    pub const ALL: [VarType; 8] = [
        VarType::PlaceH,
        VarType::PlaceR,
        VarType::LoadHD,
        VarType::LoadRD,
        VarType::LoadHR,
        VarType::StoreHD,
        VarType::StoreRD,
        VarType::StoreHR,
    ];

    pub fn suffix(self) -> &'static str {
        match self {
            VarType::PlaceH => "H",
            VarType::PlaceR => "R",
            VarType::LoadHD => "HDl",
            VarType::LoadRD => "RDl",
            VarType::LoadHR => "HRl",
            VarType::StoreHD => "HDs",
            VarType::StoreRD => "RDs",
            VarType::StoreHR => "HRs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VarKey {
    pub object: ObjectId,
    pub edge: usize,
    pub var: VarType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintOp {
    Le,
    Eq,
    Ge,
}

/// Constraint families, mirroring the validator's independent checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintFamily {
    /// Placement/transfer consistency across adjacent edges.
    Consistency,
    /// Residency on use edges, materialization, final disposition.
    Window,
    /// Per-edge, per-array capacity.
    Capacity,
    /// Per-edge byte budgets on DRAM and array ports.
    Bandwidth,
    /// Per-edge, per-sub-bank transfer exclusivity.
    Subbank,
}

impl ConstraintFamily {
    /// Families that couple different objects; the per-object relaxation
    /// drops exactly these.
    pub fn is_coupling(self) -> bool {
        matches!(
            self,
            ConstraintFamily::Capacity | ConstraintFamily::Bandwidth | ConstraintFamily::Subbank
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Constraint {
    pub terms: Vec<(usize, i64)>,
    pub op: ConstraintOp,
    pub rhs: i64,
    pub family: ConstraintFamily,
}

impl Constraint {
    pub fn holds(&self, values: &[bool]) -> bool {
        let lhs: i64 = self
            .terms
            .iter()
            .map(|&(v, c)| if values[v] { c } else { 0 })
            .sum();
        match self.op {
            ConstraintOp::Le => lhs <= self.rhs,
            ConstraintOp::Eq => lhs == self.rhs,
            ConstraintOp::Ge => lhs >= self.rhs,
        }
    }
}

/// Per-object attributes the solver needs.
#[derive(Debug, Clone)]
pub struct ObjectIlpMeta {
    pub kind: ObjectKind,
    pub size_bytes: u64,
    pub shift_array: usize,
    pub home_bank: u64,
    pub use_edges: Vec<usize>,
    pub produced_edge: Option<usize>,
    pub starts_in_random: bool,
    pub retain_to_end: bool,
    /// Needs a DRAM store unless retained (outputs).
    pub needs_disposition: bool,
}

/// The built program.
#[derive(Debug, Clone)]
pub struct IlpModel {
    pub dag_edge_count: usize,
    pub prefetch_a: u32,
    pub vars: Vec<VarKey>,
    /// Objective coefficients per variable, femtoseconds (maximize).
    pub objective_fs: Vec<i64>,
    pub constraints: Vec<Constraint>,
    pub windows: Vec<LiveWindow>,
    pub object_meta: Vec<ObjectIlpMeta>,
    /// First variable id of each object's block.
    pub object_base: Vec<usize>,
}

impl IlpModel {
    /// Variable id of (object, edge, type); the edge must lie inside the
    /// object's window.
    pub fn var_id(&self, object: ObjectId, edge: usize, var: VarType) -> usize {
        let w = &self.windows[object];
        debug_assert!(edge >= w.first_edge && edge <= w.last_edge);
        self.object_base[object]
            + (edge - w.first_edge) * 8
            + VarType::ALL.iter().position(|&v| v == var).unwrap()
    }

    pub fn var_name(&self, id: usize) -> String {
        let k = &self.vars[id];
        let letter = self.object_meta[k.object].kind.letter();
        format!("{}{}_e{}_{}", letter, k.object, k.edge, k.var.suffix())
    }

    /// Objective value of an assignment, femtoseconds.
    pub fn objective_value_fs(&self, values: &[bool]) -> i64 {
        values
            .iter()
            .zip(&self.objective_fs)
            .map(|(&v, &c)| if v { c } else { 0 })
            .sum()
    }

    /// Number of set transfer variables (the first tie-break key).
    pub fn transfer_count(&self, values: &[bool]) -> usize {
        self.vars
            .iter()
            .zip(values)
            .filter(|(k, &v)| v && !matches!(k.var, VarType::PlaceH | VarType::PlaceR))
            .count()
    }

    pub fn is_feasible(&self, values: &[bool]) -> bool {
        self.constraints.iter().all(|c| c.holds(values))
    }
}

const FEMTO: f64 = 1e15;

fn to_fs(seconds: f64) -> i64 {
    (seconds * FEMTO).round() as i64
}

/// Builds the allocation program for one layer.
///
/// Constraint families: (a) adjacent-edge consistency (the three published
/// lines plus store-source residency and the produced-data
/// load-after-store rule), (b) lifespan windows with use-edge residency,
/// materialization and output disposition, (c) per-edge capacities,
/// (d) per-edge byte budgets, (e) per-sub-bank transfer exclusivity,
/// (f) the prefetch window, enforced by variable existence.
pub fn build_ilp(
    dag: &LayerDag,
    spm: &SpmSpec,
    coeffs: &[CostCoefficients],
    prefetch_a: u32,
    meta: &CompileMeta,
) -> Result<IlpModel> {
    spm.validate()?;
    if coeffs.len() != dag.objects.len() {
        return Err(Error::InvalidConfig(
            "one coefficient record per object required".into(),
        ));
    }
    for (e, edge) in dag.edges.iter().enumerate() {
        if edge.from != e || edge.to != e + 1 {
            return Err(Error::InvalidConfig("DAG must be the unrolled chain".into()));
        }
    }
    let windows = lifespan_analysis(dag, prefetch_a)?;
    let edge_count = dag.edge_count();

    let mut object_meta = Vec::with_capacity(dag.objects.len());
    for o in &dag.objects {
        let shift_array = shift_array_index(o.kind);
        let fits_shift = o.size_bytes <= spm.shift_capacity_bytes[shift_array];
        let fits_random = o.size_bytes <= spm.random_capacity_bytes;
        if !fits_shift && !fits_random && (!o.required_edges.is_empty() || o.is_produced()) {
            return Err(Error::InfeasibleIlp(format!(
                "object {} ({} B, kind {:?}) exceeds both its SHIFT array ({} B) and the RANDOM \
                 array ({} B); there is no DRAM-resident execution path",
                o.id,
                o.size_bytes,
                o.kind,
                spm.shift_capacity_bytes[shift_array],
                spm.random_capacity_bytes
            )));
        }
        object_meta.push(ObjectIlpMeta {
            kind: o.kind,
            size_bytes: o.size_bytes,
            shift_array,
            home_bank: spm.home_bank(o.addr_start),
            use_edges: o.required_edges.clone(),
            produced_edge: o.produced_edge,
            starts_in_random: meta.starts_in_random.contains(&o.id),
            retain_to_end: meta.retain_to_end.contains(&o.id),
            needs_disposition: o.kind == ObjectKind::Output,
        });
    }

    // Variable layout: object-major, edge-minor, VarType::ALL order.
    let mut vars = Vec::new();
    let mut object_base = Vec::with_capacity(dag.objects.len());
    for (oid, w) in windows.iter().enumerate() {
        object_base.push(vars.len());
        for edge in w.first_edge..=w.last_edge {
            for var in VarType::ALL {
                vars.push(VarKey {
                    object: oid,
                    edge,
                    var,
                });
            }
        }
    }

    let mut model = IlpModel {
        dag_edge_count: edge_count,
        prefetch_a,
        vars,
        objective_fs: Vec::new(),
        constraints: Vec::new(),
        windows,
        object_meta,
        object_base,
    };

    // Objective.
    let mut objective = vec![0i64; model.vars.len()];
    for (i, key) in model.vars.iter().enumerate() {
        let c = &coeffs[key.object];
        objective[i] = match key.var {
            VarType::PlaceH => to_fs(c.t_s_h),
            VarType::PlaceR => to_fs(c.t_s_r),
            VarType::LoadHD => -to_fs(c.t_r_hd),
            VarType::LoadRD => -to_fs(c.t_r_rd),
            VarType::LoadHR => -to_fs(c.t_r_hr),
            VarType::StoreHD => -to_fs(c.t_w_hd),
            VarType::StoreRD => -to_fs(c.t_w_rd),
            VarType::StoreHR => -to_fs(c.t_w_hr),
        };
    }
    model.objective_fs = objective;

    let mut rows: Vec<Constraint> = Vec::new();
    let id = |m: &IlpModel, o: ObjectId, e: usize, v: VarType| m.var_id(o, e, v) as usize;

    // Per-object consistency and window rows.
    for oid in 0..dag.objects.len() {
        let w = model.windows[oid];
        let m = &model.object_meta[oid];
        let produced_at = m.produced_edge;
        for edge in w.first_edge..=w.last_edge {
            let h = id(&model, oid, edge, VarType::PlaceH);
            let r = id(&model, oid, edge, VarType::PlaceR);
            let lhd = id(&model, oid, edge, VarType::LoadHD);
            let lrd = id(&model, oid, edge, VarType::LoadRD);
            let lhr = id(&model, oid, edge, VarType::LoadHR);
            let shd = id(&model, oid, edge, VarType::StoreHD);
            let srd = id(&model, oid, edge, VarType::StoreRD);
            let shr = id(&model, oid, edge, VarType::StoreHR);
            let at_start = edge == w.first_edge;
            let is_production = produced_at == Some(edge);

            if is_production {
                // Materialization: the producing node writes exactly one
                // array; no loads can exist yet.
                rows.push(Constraint {
                    terms: vec![(h, 1), (r, 1)],
                    op: ConstraintOp::Eq,
                    rhs: 1,
                    family: ConstraintFamily::Window,
                });
                for v in [lhd, lrd, lhr] {
                    rows.push(Constraint {
                        terms: vec![(v, 1)],
                        op: ConstraintOp::Eq,
                        rhs: 0,
                        family: ConstraintFamily::Consistency,
                    });
                }
            } else if at_start {
                if m.starts_in_random {
                    // Granted residency from the previous layer: in RANDOM
                    // with no load; SHIFT entry only via a DRAM load.
                    rows.push(Constraint {
                        terms: vec![(r, 1)],
                        op: ConstraintOp::Eq,
                        rhs: 1,
                        family: ConstraintFamily::Window,
                    });
                    for v in [lrd, lhr] {
                        rows.push(Constraint {
                            terms: vec![(v, 1)],
                            op: ConstraintOp::Eq,
                            rhs: 0,
                            family: ConstraintFamily::Consistency,
                        });
                    }
                    rows.push(Constraint {
                        terms: vec![(h, 1), (lhd, -1)],
                        op: ConstraintOp::Eq,
                        rhs: 0,
                        family: ConstraintFamily::Consistency,
                    });
                } else {
                    // External data: entry only by loading from DRAM.
                    rows.push(Constraint {
                        terms: vec![(h, 1), (lhd, -1)],
                        op: ConstraintOp::Eq,
                        rhs: 0,
                        family: ConstraintFamily::Consistency,
                    });
                    rows.push(Constraint {
                        terms: vec![(r, 1), (lrd, -1)],
                        op: ConstraintOp::Eq,
                        rhs: 0,
                        family: ConstraintFamily::Consistency,
                    });
                    rows.push(Constraint {
                        terms: vec![(lhr, 1)],
                        op: ConstraintOp::Eq,
                        rhs: 0,
                        family: ConstraintFamily::Consistency,
                    });
                }
            } else {
                let ph = id(&model, oid, edge - 1, VarType::PlaceH);
                let pr = id(&model, oid, edge - 1, VarType::PlaceR);
                // H_j − HD_j − HR_j − H_{j-1} = 0
                rows.push(Constraint {
                    terms: vec![(h, 1), (lhd, -1), (lhr, -1), (ph, -1)],
                    op: ConstraintOp::Eq,
                    rhs: 0,
                    family: ConstraintFamily::Consistency,
                });
                // R_j − RD_j − R_{j-1} = 0
                rows.push(Constraint {
                    terms: vec![(r, 1), (lrd, -1), (pr, -1)],
                    op: ConstraintOp::Eq,
                    rhs: 0,
                    family: ConstraintFamily::Consistency,
                });
                // HR_j − R_{j-1} ≤ 0
                rows.push(Constraint {
                    terms: vec![(lhr, 1), (pr, -1)],
                    op: ConstraintOp::Le,
                    rhs: 0,
                    family: ConstraintFamily::Consistency,
                });
            }

            // Stores require source residency.
            rows.push(Constraint {
                terms: vec![(shd, 1), (h, -1)],
                op: ConstraintOp::Le,
                rhs: 0,
                family: ConstraintFamily::Consistency,
            });
            rows.push(Constraint {
                terms: vec![(shr, 1), (h, -1)],
                op: ConstraintOp::Le,
                rhs: 0,
                family: ConstraintFamily::Consistency,
            });
            rows.push(Constraint {
                terms: vec![(srd, 1), (r, -1)],
                op: ConstraintOp::Le,
                rhs: 0,
                family: ConstraintFamily::Consistency,
            });

            // Produced data can only be reloaded from DRAM after a store
            // put it there.
            if produced_at.is_some() && !is_production {
                let mut terms = vec![(lhd, 1i64), (lrd, 1)];
                for j in w.first_edge..edge {
                    terms.push((id(&model, oid, j, VarType::StoreHD), -1));
                    terms.push((id(&model, oid, j, VarType::StoreRD), -1));
                }
                rows.push(Constraint {
                    terms,
                    op: ConstraintOp::Le,
                    rhs: 0,
                    family: ConstraintFamily::Consistency,
                });
            }
        }

        // Residency on every use edge.
        for &u in &m.use_edges {
            let h = id(&model, oid, u, VarType::PlaceH);
            let r = id(&model, oid, u, VarType::PlaceR);
            rows.push(Constraint {
                terms: vec![(h, 1), (r, 1)],
                op: ConstraintOp::Ge,
                rhs: 1,
                family: ConstraintFamily::Window,
            });
        }

        // Output disposition: reach DRAM, or be retained in RANDOM.
        if m.needs_disposition {
            if m.retain_to_end {
                let r_end = id(&model, oid, w.last_edge, VarType::PlaceR);
                rows.push(Constraint {
                    terms: vec![(r_end, 1)],
                    op: ConstraintOp::Eq,
                    rhs: 1,
                    family: ConstraintFamily::Window,
                });
            } else {
                let terms: Vec<(usize, i64)> = (w.first_edge..=w.last_edge)
                    .flat_map(|e| {
                        [
                            (id(&model, oid, e, VarType::StoreHD), 1i64),
                            (id(&model, oid, e, VarType::StoreRD), 1),
                        ]
                    })
                    .collect();
                rows.push(Constraint {
                    terms,
                    op: ConstraintOp::Ge,
                    rhs: 1,
                    family: ConstraintFamily::Window,
                });
            }
        }
    }

    // Coupling rows, per edge.
    for edge in 1..=edge_count {
        let live: Vec<ObjectId> = (0..dag.objects.len())
            .filter(|&o| {
                let w = model.windows[o];
                edge >= w.first_edge && edge <= w.last_edge
            })
            .collect();
        if live.is_empty() {
            continue;
        }

        // (c) capacity
        for array in 0..3 {
            let terms: Vec<(usize, i64)> = live
                .iter()
                .filter(|&&o| model.object_meta[o].shift_array == array)
                .map(|&o| {
                    (
                        id(&model, o, edge, VarType::PlaceH),
                        model.object_meta[o].size_bytes as i64,
                    )
                })
                .collect();
            if !terms.is_empty() {
                rows.push(Constraint {
                    terms,
                    op: ConstraintOp::Le,
                    rhs: spm.shift_capacity_bytes[array] as i64,
                    family: ConstraintFamily::Capacity,
                });
            }
        }
        let r_terms: Vec<(usize, i64)> = live
            .iter()
            .map(|&o| {
                (
                    id(&model, o, edge, VarType::PlaceR),
                    model.object_meta[o].size_bytes as i64,
                )
            })
            .collect();
        rows.push(Constraint {
            terms: r_terms,
            op: ConstraintOp::Le,
            rhs: spm.random_capacity_bytes as i64,
            family: ConstraintFamily::Capacity,
        });

        // (d) byte budgets
        let mut budget_row = |vars_of: &dyn Fn(ObjectId) -> Vec<VarType>, budget: u64| {
            let terms: Vec<(usize, i64)> = live
                .iter()
                .flat_map(|&o| {
                    vars_of(o)
                        .into_iter()
                        .map(move |v| (o, v))
                        .collect::<Vec<_>>()
                })
                .map(|(o, v)| (id(&model, o, edge, v), model.object_meta[o].size_bytes as i64))
                .collect();
            if !terms.is_empty() {
                rows.push(Constraint {
                    terms,
                    op: ConstraintOp::Le,
                    rhs: budget as i64,
                    family: ConstraintFamily::Bandwidth,
                });
            }
        };
        budget_row(
            &|_| vec![VarType::LoadHD, VarType::LoadRD],
            spm.dram_load_budget_bytes,
        );
        budget_row(
            &|_| vec![VarType::StoreHD, VarType::StoreRD],
            spm.dram_store_budget_bytes,
        );
        budget_row(
            &|_| vec![VarType::LoadRD, VarType::StoreHR],
            spm.random_load_budget_bytes,
        );
        budget_row(
            &|_| vec![VarType::LoadHR, VarType::StoreRD],
            spm.random_store_budget_bytes,
        );
        for array in 0..3 {
            let meta_ref = &model.object_meta;
            budget_row(
                &|o| {
                    if meta_ref[o].shift_array == array {
                        vec![VarType::LoadHD, VarType::LoadHR]
                    } else {
                        vec![]
                    }
                },
                spm.shift_load_budget_bytes[array],
            );
            budget_row(
                &|o| {
                    if meta_ref[o].shift_array == array {
                        vec![VarType::StoreHD, VarType::StoreHR]
                    } else {
                        vec![]
                    }
                },
                spm.shift_store_budget_bytes[array],
            );
        }

        // (e) one RANDOM-array transfer per sub-bank per edge.
        let mut by_bank: std::collections::BTreeMap<u64, Vec<(usize, i64)>> = Default::default();
        for &o in &live {
            let bank = model.object_meta[o].home_bank;
            let entry = by_bank.entry(bank).or_default();
            for v in [
                VarType::LoadRD,
                VarType::LoadHR,
                VarType::StoreRD,
                VarType::StoreHR,
            ] {
                entry.push((id(&model, o, edge, v), 1));
            }
        }
        for (_, terms) in by_bank {
            if terms.len() > 1 {
                rows.push(Constraint {
                    terms,
                    op: ConstraintOp::Le,
                    rhs: 1,
                    family: ConstraintFamily::Subbank,
                });
            }
        }
    }

    model.constraints = rows;
    Ok(model)
}
