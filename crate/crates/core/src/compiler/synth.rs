//! Deterministic synthetic allocation instances for oracle and property
//! tests: hand-assembled chain DAGs with randomized objects, windows and
//! scratchpad shapes. A splitmix64 stream keeps the crate free of RNG
//! dependencies and the instances byte-reproducible from their seed.

use crate::workload::{
    DagEdge, Instruction, LayerConfig, LayerDag, MemoryObject, ObjectKind, Opcode,
};

use super::SpmSpec;

/// Minimal deterministic PRNG (splitmix64).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, bound).
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound.max(1)
    }

    pub fn chance(&mut self, percent: u64) -> bool {
        self.below(100) < percent
    }
}

/// Shape knobs for instance generation.
#[derive(Debug, Clone, Copy)]
pub struct SynthShape {
    pub max_folds: u32,
    pub max_objects: usize,
    pub max_object_bytes: u64,
    /// Reject instances whose variable count under `prefetch_a` exceeds
    /// this (0 disables the cap). Callers use 24 for the exhaustive
    /// oracle.
    pub var_cap: usize,
}

impl SynthShape {
    pub fn oracle() -> Self {
        SynthShape {
            max_folds: 2,
            max_objects: 2,
            max_object_bytes: 48,
            var_cap: 24,
        }
    }

    pub fn property() -> Self {
        SynthShape {
            max_folds: 4,
            max_objects: 6,
            max_object_bytes: 96,
            var_cap: 0,
        }
    }
}

/// One generated instance.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub dag: LayerDag,
    pub spm: SpmSpec,
    pub prefetch_a: u32,
}

fn chain_nodes_edges(folds: u32) -> (Vec<Instruction>, Vec<DagEdge>) {
    let f = folds as usize;
    let mut nodes = Vec::with_capacity(2 * f + 3);
    nodes.push(Instruction {
        opcode: Opcode::ReadHostMemory,
        fold: None,
        reads: vec![],
        writes: vec![],
    });
    for i in 0..f {
        nodes.push(Instruction {
            opcode: Opcode::ReadWeights,
            fold: Some(i as u32),
            reads: vec![],
            writes: vec![],
        });
        nodes.push(Instruction {
            opcode: Opcode::MatrixMultiply,
            fold: Some(i as u32),
            reads: vec![],
            writes: vec![],
        });
    }
    nodes.push(Instruction {
        opcode: Opcode::Activate,
        fold: None,
        reads: vec![],
        writes: vec![],
    });
    nodes.push(Instruction {
        opcode: Opcode::WriteHostMemory,
        fold: None,
        reads: vec![],
        writes: vec![],
    });
    let edges = (0..2 * f + 2)
        .map(|i| DagEdge {
            index: i + 1,
            from: i,
            to: i + 1,
            required: vec![],
            produced: vec![],
        })
        .collect();
    (nodes, edges)
}

/// Builds one synthetic instance from a seed. The DAG is a valid unrolled
/// chain; objects carry kind-appropriate use/produce edges so the lifespan
/// analysis accepts them.
pub fn synth_instance(seed: u64, shape: SynthShape) -> SynthInstance {
    let mut rng = SplitMix64::new(seed);
    loop {
        let folds = 1 + rng.below(shape.max_folds as u64) as u32;
        let edge_count = 2 * folds as usize + 2;
        let (mut nodes, mut edges) = chain_nodes_edges(folds);
        let n_objects = 1 + rng.below(shape.max_objects as u64) as usize;
        let mut objects = Vec::new();
        let mut addr = 0u64;
        for id in 0..n_objects {
            let size = 1 + rng.below(shape.max_object_bytes);
            let kind = match rng.below(4) {
                0 => ObjectKind::Weight,
                1 => ObjectKind::Input,
                2 if folds >= 2 => ObjectKind::Psum,
                _ => ObjectKind::Output,
            };
            let (required, produced, live): (Vec<usize>, Option<usize>, (usize, usize)) =
                match kind {
                    ObjectKind::Weight => {
                        let n = 1 + rng.below(folds as u64) as usize;
                        (vec![2 * n - 1], None, (2 * n - 1, 2 * n - 1))
                    }
                    ObjectKind::Input => {
                        // One or two consuming folds.
                        let n1 = 1 + rng.below(folds as u64) as usize;
                        let mut req = vec![2 * n1];
                        if folds >= 2 && rng.chance(40) {
                            let n2 = 1 + rng.below(folds as u64) as usize;
                            if n2 != n1 {
                                req.push(2 * n2);
                            }
                        }
                        req.sort_unstable();
                        req.dedup();
                        let first = *req.first().unwrap();
                        let last = *req.last().unwrap();
                        (req, None, (first, last))
                    }
                    ObjectKind::Psum => {
                        // Produced by fold n, consumed by fold n+1.
                        let n = 1 + rng.below(folds as u64 - 1) as usize;
                        let p = 2 * n + 1;
                        (vec![2 * (n + 1)], Some(p), (p, 2 * (n + 1)))
                    }
                    ObjectKind::Output => {
                        let n = 1 + rng.below(folds as u64) as usize;
                        let p = 2 * n + 1;
                        (vec![], Some(p), (p, edge_count))
                    }
                };
            for &r in &required {
                edges[r - 1].required.push(id);
            }
            if let Some(p) = produced {
                edges[p - 1].produced.push(id);
                nodes[p - 1].writes.push(id);
            }
            objects.push(MemoryObject {
                id,
                kind,
                addr_start: addr,
                addr_end: addr + size,
                size_bytes: size,
                folds: vec![],
                required_edges: required,
                produced_edge: produced,
                live_range: live,
                access_count: 1 + rng.below(64),
            });
            addr += size + rng.below(64);
        }

        let layer = LayerConfig {
            name: format!("synth-{seed}"),
            input_h: 4,
            input_w: 4,
            in_channels: 1,
            out_channels: 1,
            kernel_h: 1,
            kernel_w: 1,
            stride: 1,
            padding: 0,
            data_width: 1,
        };
        let dag = LayerDag {
            layer,
            pe_rows: 1,
            pe_cols: 1,
            fold_count: folds,
            ideal_cycles: 64,
            total_macs: 16,
            nodes,
            edges,
            objects,
        };

        let max_size = dag.objects.iter().map(|o| o.size_bytes).max().unwrap();
        let total_size: u64 = dag.objects.iter().map(|o| o.size_bytes).sum();
        // Capacities between "one object fits" and "everything fits":
        // tight enough to exercise the coupling rows.
        let cap = |rng: &mut SplitMix64| max_size + rng.below(total_size.max(2));
        let spm = SpmSpec {
            shift_capacity_bytes: [cap(&mut rng), cap(&mut rng), cap(&mut rng)],
            shift_load_budget_bytes: [max_size + rng.below(128); 3],
            shift_store_budget_bytes: [max_size + rng.below(128); 3],
            random_capacity_bytes: cap(&mut rng),
            random_banks: 1 + rng.below(4),
            random_load_budget_bytes: max_size + rng.below(128),
            random_store_budget_bytes: max_size + rng.below(128),
            dram_load_budget_bytes: max_size + rng.below(160),
            dram_store_budget_bytes: max_size + rng.below(160),
        };
        let prefetch_a = 1 + rng.below(3) as u32;

        let instance = SynthInstance {
            dag,
            spm,
            prefetch_a,
        };
        if shape.var_cap > 0 {
            // Reject instances too large for the exhaustive oracle.
            if let Ok(windows) =
                crate::workload::lifespan_analysis(&instance.dag, instance.prefetch_a)
            {
                let vars: usize = windows
                    .iter()
                    .map(|w| (w.last_edge - w.first_edge + 1) * 8)
                    .sum();
                if vars > shape.var_cap {
                    // draw fresh randomness and retry
                    continue;
                }
            }
        }
        return instance;
    }
}
