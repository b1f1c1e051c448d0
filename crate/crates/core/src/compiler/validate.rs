//! Independent schedule validation.
//!
//! The validator re-derives every constraint family from the decoded
//! [`Schedule`], the DAG and the scratchpad shape alone — it never trusts
//! the solver or the built model. Each violation is reported as a
//! human-readable string tagged with its family.

use std::collections::BTreeMap;

use crate::workload::{lifespan_analysis, LayerDag, ObjectKind};

use super::{shift_array_index, Schedule, SpmSpec, TransferAction, SHIFT_ARRAY_NAMES};

/// Re-checks windows, consistency, residency, capacity, bandwidth and
/// sub-bank exclusivity. `Ok(())` or the full violation list.
pub fn validate_schedule(
    schedule: &Schedule,
    dag: &LayerDag,
    spm: &SpmSpec,
) -> Result<(), Vec<String>> {
    let mut violations = Vec::new();
    let mut bad = |s: String| violations.push(s);

    let windows = match lifespan_analysis(dag, schedule.prefetch_a) {
        Ok(w) => w,
        Err(e) => return Err(vec![format!("lifespan: {e}")]),
    };
    if schedule.edge_count != dag.edge_count() {
        bad(format!(
            "window: schedule has {} edges, DAG has {}",
            schedule.edge_count,
            dag.edge_count()
        ));
    }
    if schedule.entries.len() != dag.objects.len() {
        bad(format!(
            "window: schedule covers {} objects, DAG has {}",
            schedule.entries.len(),
            dag.objects.len()
        ));
    }

    // Per-edge aggregates for the coupling families.
    let edge_count = dag.edge_count();
    let mut shift_usage = vec![[0u64; 3]; edge_count + 1];
    let mut random_usage = vec![0u64; edge_count + 1];
    let mut dram_load = vec![0u64; edge_count + 1];
    let mut dram_store = vec![0u64; edge_count + 1];
    let mut random_in = vec![0u64; edge_count + 1];
    let mut random_out = vec![0u64; edge_count + 1];
    let mut shift_in = vec![[0u64; 3]; edge_count + 1];
    let mut shift_out = vec![[0u64; 3]; edge_count + 1];
    let mut bank_requests: BTreeMap<(usize, u64), u64> = BTreeMap::new();

    for entry in &schedule.entries {
        let obj = &dag.objects[entry.object];
        let w = windows[entry.object];
        let arr = shift_array_index(obj.kind);
        if entry.window != w {
            bad(format!(
                "window: object {} window {:?} does not match lifespan {:?}",
                entry.object, entry.window, w
            ));
            continue;
        }
        let len = w.last_edge - w.first_edge + 1;
        if entry.in_shift.len() != len || entry.in_random.len() != len {
            bad(format!(
                "window: object {} placement vectors have wrong length",
                entry.object
            ));
            continue;
        }

        // Transfer lookup per edge.
        let mut at: BTreeMap<usize, Vec<TransferAction>> = BTreeMap::new();
        for &(edge, action) in &entry.transfers {
            if edge < w.first_edge || edge > w.last_edge {
                bad(format!(
                    "window: object {} transfer {:?} on edge {} outside window {:?}",
                    entry.object, action, edge, w
                ));
                continue;
            }
            at.entry(edge).or_default().push(action);
        }
        let has = |edge: usize, action: TransferAction| -> bool {
            at.get(&edge).is_some_and(|v| v.contains(&action))
        };

        let produced = obj.produced_edge;
        let mut stored_before = false;
        for (t, edge) in (w.first_edge..=w.last_edge).enumerate() {
            let h = entry.in_shift[t];
            let r = entry.in_random[t];
            let lhd = has(edge, TransferAction::LoadDramToShift);
            let lrd = has(edge, TransferAction::LoadDramToRandom);
            let lhr = has(edge, TransferAction::LoadRandomToShift);
            let shd = has(edge, TransferAction::StoreShiftToDram);
            let srd = has(edge, TransferAction::StoreRandomToDram);
            let shr = has(edge, TransferAction::StoreShiftToRandom);

            let at_start = t == 0;
            let prev_h = !at_start && entry.in_shift[t - 1];
            let prev_r = !at_start && entry.in_random[t - 1];

            if produced == Some(edge) {
                if (h as u8) + (r as u8) != 1 {
                    bad(format!(
                        "residency: object {} must materialize in exactly one array on edge {edge}",
                        entry.object
                    ));
                }
                if lhd || lrd || lhr {
                    bad(format!(
                        "consistency: object {} loaded on its producing edge {edge}",
                        entry.object
                    ));
                }
            } else if at_start {
                if entry.starts_in_random {
                    if !r {
                        bad(format!(
                            "residency: object {} granted from previous layer must start in RANDOM",
                            entry.object
                        ));
                    }
                    if lrd || lhr {
                        bad(format!(
                            "consistency: object {} carries a load it does not need on edge {edge}",
                            entry.object
                        ));
                    }
                    if h != lhd {
                        bad(format!(
                            "consistency: object {} SHIFT entry without DRAM load on edge {edge}",
                            entry.object
                        ));
                    }
                } else {
                    if h != lhd {
                        bad(format!(
                            "consistency: object {} SHIFT placement ≠ DRAM load on start edge {edge}",
                            entry.object
                        ));
                    }
                    if r != lrd {
                        bad(format!(
                            "consistency: object {} RANDOM placement ≠ DRAM load on start edge {edge}",
                            entry.object
                        ));
                    }
                    if lhr {
                        bad(format!(
                            "consistency: object {} RANDOM→SHIFT copy with empty RANDOM on edge {edge}",
                            entry.object
                        ));
                    }
                }
            } else {
                // The three adjacent-edge consistency lines.
                if (h as i8) - (lhd as i8) - (lhr as i8) - (prev_h as i8) != 0 {
                    bad(format!(
                        "consistency: object {} SHIFT line violated on edge {edge}",
                        entry.object
                    ));
                }
                if (r as i8) - (lrd as i8) - (prev_r as i8) != 0 {
                    bad(format!(
                        "consistency: object {} RANDOM line violated on edge {edge}",
                        entry.object
                    ));
                }
                if lhr && !prev_r {
                    bad(format!(
                        "consistency: object {} RANDOM→SHIFT copy without RANDOM residency on edge {edge}",
                        entry.object
                    ));
                }
            }

            if shd && !h {
                bad(format!(
                    "consistency: object {} stores from SHIFT while absent on edge {edge}",
                    entry.object
                ));
            }
            if shr && !h {
                bad(format!(
                    "consistency: object {} SHIFT→RANDOM store while absent on edge {edge}",
                    entry.object
                ));
            }
            if srd && !r {
                bad(format!(
                    "consistency: object {} stores from RANDOM while absent on edge {edge}",
                    entry.object
                ));
            }
            if produced.is_some() && produced != Some(edge) && (lhd || lrd) && !stored_before {
                bad(format!(
                    "consistency: object {} reloaded from DRAM before any store on edge {edge}",
                    entry.object
                ));
            }
            stored_before = stored_before || shd || srd;

            // Aggregates.
            let z = obj.size_bytes;
            if h {
                shift_usage[edge][arr] += z;
            }
            if r {
                random_usage[edge] += z;
            }
            if lhd || lrd {
                dram_load[edge] += z;
            }
            if shd || srd {
                dram_store[edge] += z;
            }
            if lrd || shr {
                random_in[edge] += z;
            }
            if lhr || srd {
                random_out[edge] += z;
            }
            if lhd || lhr {
                shift_in[edge][arr] += z;
            }
            if shd || shr {
                shift_out[edge][arr] += z;
            }
            let touches_random = lrd || lhr || srd || shr;
            if touches_random {
                *bank_requests
                    .entry((edge, spm.home_bank(obj.addr_start)))
                    .or_insert(0) += (lrd as u64) + (lhr as u64) + (srd as u64) + (shr as u64);
            }
        }

        // Residency on every use edge.
        for &u in &obj.required_edges {
            let (h, r) = entry.placement_at(u);
            if !h && !r {
                bad(format!(
                    "residency: object {} not resident on consuming edge {u}",
                    entry.object
                ));
            }
        }

        // Output disposition.
        if obj.kind == ObjectKind::Output {
            if entry.retain_to_end {
                let (_, r) = entry.placement_at(w.last_edge);
                if !r {
                    bad(format!(
                        "disposition: retained output {} absent from RANDOM at layer end",
                        entry.object
                    ));
                }
            } else {
                let stored = entry.transfers.iter().any(|&(_, a)| {
                    matches!(
                        a,
                        TransferAction::StoreShiftToDram | TransferAction::StoreRandomToDram
                    )
                });
                if !stored {
                    bad(format!(
                        "disposition: output {} never reaches DRAM and is not retained",
                        entry.object
                    ));
                }
            }
        }
    }

    for edge in 1..=edge_count {
        for arr in 0..3 {
            if shift_usage[edge][arr] > spm.shift_capacity_bytes[arr] {
                bad(format!(
                    "capacity: edge {edge} {} SHIFT array holds {} B > {} B",
                    SHIFT_ARRAY_NAMES[arr], shift_usage[edge][arr], spm.shift_capacity_bytes[arr]
                ));
            }
            if shift_in[edge][arr] > spm.shift_load_budget_bytes[arr] {
                bad(format!(
                    "bandwidth: edge {edge} {} SHIFT writes {} B > budget {} B",
                    SHIFT_ARRAY_NAMES[arr], shift_in[edge][arr], spm.shift_load_budget_bytes[arr]
                ));
            }
            if shift_out[edge][arr] > spm.shift_store_budget_bytes[arr] {
                bad(format!(
                    "bandwidth: edge {edge} {} SHIFT reads {} B > budget {} B",
                    SHIFT_ARRAY_NAMES[arr], shift_out[edge][arr], spm.shift_store_budget_bytes[arr]
                ));
            }
        }
        if random_usage[edge] > spm.random_capacity_bytes {
            bad(format!(
                "capacity: edge {edge} RANDOM array holds {} B > {} B",
                random_usage[edge], spm.random_capacity_bytes
            ));
        }
        if dram_load[edge] > spm.dram_load_budget_bytes {
            bad(format!(
                "bandwidth: edge {edge} DRAM loads {} B > budget {} B",
                dram_load[edge], spm.dram_load_budget_bytes
            ));
        }
        if dram_store[edge] > spm.dram_store_budget_bytes {
            bad(format!(
                "bandwidth: edge {edge} DRAM stores {} B > budget {} B",
                dram_store[edge], spm.dram_store_budget_bytes
            ));
        }
        if random_in[edge] > spm.random_load_budget_bytes {
            bad(format!(
                "bandwidth: edge {edge} RANDOM writes {} B > budget {} B",
                random_in[edge], spm.random_load_budget_bytes
            ));
        }
        if random_out[edge] > spm.random_store_budget_bytes {
            bad(format!(
                "bandwidth: edge {edge} RANDOM reads {} B > budget {} B",
                random_out[edge], spm.random_store_budget_bytes
            ));
        }
    }
    for ((edge, bank), count) in bank_requests {
        if count > 1 {
            bad(format!(
                "subbank: edge {edge} schedules {count} transfers on RANDOM bank {bank}"
            ));
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
