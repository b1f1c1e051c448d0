//! Solver modes over the built program.
//!
//! `ExactBnb` is a branch-and-bound over the binaries. The node bound
//! relaxes the coupling rows (capacity/bandwidth/sub-bank) and solves each
//! object's subproblem exactly by dynamic programming over its
//! (in-SHIFT, in-RANDOM, stored) state lattice — residency is monotone
//! inside a window, so the per-object state space is tiny and its polytope
//! integral. Branching fixes a variable out of the most violated coupling
//! row; a greedy repair pass seeds the incumbent. All arithmetic is in
//! integer femtoseconds, so objectives are exact and runs deterministic.
//!
//! `ExhaustiveSmall` enumerates every assignment (≤ 24 variables) and is
//! the oracle the branch-and-bound is tested against. `ExportOnly` writes
//! the LP interchange text and decodes an externally produced solution.

use std::path::PathBuf;

use crate::error::{Error, Result};

use super::model::{ConstraintOp, IlpModel, VarType};
use super::{lp_format, CostCoefficients};

/// Deterministic work budget: `--time-budget` seconds are converted to
/// node expansions at this rate so that reruns are byte-identical
/// regardless of host speed.
pub const NODES_PER_SECOND: u64 = 20_000;

const NEG_INF: i64 = i64::MIN / 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    ExactBnb,
    ExhaustiveSmall,
    ExportOnly,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub mode: SolveMode,
    /// Maximum branch-and-bound node expansions.
    pub max_nodes: u64,
    /// LP text destination for `ExportOnly`.
    pub lp_path: Option<PathBuf>,
    /// Solution file consumed by `ExportOnly`.
    pub solution_path: Option<PathBuf>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mode: SolveMode::ExactBnb,
            max_nodes: 400_000,
            lp_path: None,
            solution_path: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IlpSolution {
    pub values: Vec<bool>,
    pub objective_fs: i64,
    pub objective_s: f64,
    pub provably_optimal: bool,
    /// Upper-bound gap in femtoseconds when the node budget ran out.
    pub gap_fs: Option<i64>,
    pub nodes_explored: u64,
}

/// Variable-count cap of the exhaustive oracle mode.
pub const EXHAUSTIVE_VAR_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fix {
    Free,
    Zero,
    One,
}

/// Per-edge fixing view of one object's eight variables.
#[derive(Debug, Clone, Copy)]
struct EdgeFix {
    h: Fix,
    r: Fix,
    lhd: Fix,
    lrd: Fix,
    lhr: Fix,
    shd: Fix,
    srd: Fix,
    shr: Fix,
}

impl EdgeFix {
    fn gather(model: &IlpModel, fixes: &[Fix], object: usize, edge: usize) -> Self {
        let g = |v: VarType| fixes[model.var_id(object, edge, v)];
        EdgeFix {
            h: g(VarType::PlaceH),
            r: g(VarType::PlaceR),
            lhd: g(VarType::LoadHD),
            lrd: g(VarType::LoadRD),
            lhr: g(VarType::LoadHR),
            shd: g(VarType::StoreHD),
            srd: g(VarType::StoreRD),
            shr: g(VarType::StoreHR),
        }
    }
}

fn matches_fix(value: bool, fix: Fix) -> bool {
    match fix {
        Fix::Free => true,
        Fix::Zero => !value,
        Fix::One => value,
    }
}

/// Backtracking record: predecessor state plus the transfer choices taken
/// entering this edge.
#[derive(Debug, Clone, Copy, Default)]
struct Choice {
    prev_state: u8,
    load_h: u8, // 0 none, 1 HD, 2 HR
    load_r: bool,
    s_hd: bool,
    s_rd: bool,
    s_hr: bool,
}

struct ObjectDp<'a> {
    model: &'a IlpModel,
    coeff_ts_h: i64,
    coeff_ts_r: i64,
    cost: [i64; 6], // lhd, lrd, lhr, shd, srd, shr (positive costs)
}

/// Outcome of one per-object solve: best gain and the object's variable
/// block values.
struct ObjectPlan {
    gain_fs: i64,
    values: Vec<bool>,
}

impl<'a> ObjectDp<'a> {
    fn new(model: &'a IlpModel, object: usize) -> Self {
        let w = model.windows[object];
        let base = model.var_id(object, w.first_edge, VarType::PlaceH);
        let obj = |v: VarType| {
            model.objective_fs[base + VarType::ALL.iter().position(|&x| x == v).unwrap()]
        };
        ObjectDp {
            model,
            coeff_ts_h: obj(VarType::PlaceH),
            coeff_ts_r: obj(VarType::PlaceR),
            cost: [
                -obj(VarType::LoadHD),
                -obj(VarType::LoadRD),
                -obj(VarType::LoadHR),
                -obj(VarType::StoreHD),
                -obj(VarType::StoreRD),
                -obj(VarType::StoreHR),
            ],
        }
    }

    /// Solves one object's subproblem under the fixings; None = infeasible.
    fn solve(&self, object: usize, fixes: &[Fix]) -> Option<ObjectPlan> {
        let model = self.model;
        let w = model.windows[object];
        let meta = &model.object_meta[object];
        let len = w.last_edge - w.first_edge + 1;
        let produced_at_start = meta.produced_edge == Some(w.first_edge);
        let is_use = |edge: usize| meta.use_edges.binary_search(&edge).is_ok();
        let external = meta.produced_edge.is_none();

        // state index: h + 2r + 4st
        let mut value = vec![[NEG_INF; 8]; len];
        let mut choice = vec![[Choice::default(); 8]; len];

        // Entry states at the window's first edge.
        let f0 = EdgeFix::gather(model, fixes, object, w.first_edge);
        for h in [false, true] {
            for r in [false, true] {
                if !matches_fix(h, f0.h) || !matches_fix(r, f0.r) {
                    continue;
                }
                if produced_at_start && h == r {
                    continue; // materialize in exactly one array
                }
                if meta.starts_in_random && !r {
                    continue;
                }
                if is_use(w.first_edge) && !h && !r {
                    continue;
                }
                let mut gain = 0i64;
                let mut c = Choice::default();
                // Entry loads.
                if produced_at_start || meta.starts_in_random {
                    // r comes free; h needs a DRAM load unless produced.
                    if h && !produced_at_start {
                        if f0.lhd == Fix::Zero {
                            continue;
                        }
                        gain -= self.cost[0];
                        c.load_h = 1;
                    } else if f0.lhd == Fix::One {
                        continue;
                    }
                } else {
                    if h {
                        if f0.lhd == Fix::Zero {
                            continue;
                        }
                        gain -= self.cost[0];
                        c.load_h = 1;
                    } else if f0.lhd == Fix::One {
                        continue;
                    }
                    if r {
                        if f0.lrd == Fix::Zero {
                            continue;
                        }
                        gain -= self.cost[1];
                        c.load_r = true;
                    } else if f0.lrd == Fix::One {
                        continue;
                    }
                }
                if f0.lhr == Fix::One {
                    continue; // no RANDOM→SHIFT copy exists at entry
                }
                if f0.lrd == Fix::One && !c.load_r && !(produced_at_start || meta.starts_in_random)
                {
                    continue;
                }
                gain += if h { self.coeff_ts_h } else { 0 };
                gain += if r { self.coeff_ts_r } else { 0 };
                // Stores at the first edge.
                let Some((extra, st, sc)) = self.apply_stores(&f0, h, r, false, false) else {
                    continue;
                };
                let mut c = c;
                c.s_hd = sc.0;
                c.s_rd = sc.1;
                c.s_hr = sc.2;
                let s = (h as usize) + 2 * (r as usize) + 4 * (st as usize);
                if gain - extra > value[0][s] {
                    value[0][s] = gain - extra;
                    choice[0][s] = c;
                }
                // Also consider voluntarily storing right away (distinct
                // st=1 state) when not already covered.
                if let Some((extra, st, sc)) = self.apply_stores(&f0, h, r, false, true) {
                    let mut c2 = c;
                    c2.s_hd = sc.0;
                    c2.s_rd = sc.1;
                    c2.s_hr = sc.2;
                    let s2 = (h as usize) + 2 * (r as usize) + 4 * (st as usize);
                    if gain - extra > value[0][s2] {
                        value[0][s2] = gain - extra;
                        choice[0][s2] = c2;
                    }
                }
            }
        }

        // Forward transitions.
        for t in 1..len {
            let edge = w.first_edge + t;
            let f = EdgeFix::gather(model, fixes, object, edge);
            for prev_s in 0..8usize {
                if value[t - 1][prev_s] <= NEG_INF {
                    continue;
                }
                let (h0, r0, st0) = (prev_s & 1 == 1, prev_s & 2 == 2, prev_s & 4 == 4);
                for h1 in [h0, true] {
                    for r1 in [r0, true] {
                        if !matches_fix(h1, f.h) || !matches_fix(r1, f.r) {
                            continue;
                        }
                        if is_use(edge) && !h1 && !r1 {
                            continue;
                        }
                        let mut gain = value[t - 1][prev_s];
                        let mut c = Choice {
                            prev_state: prev_s as u8,
                            ..Default::default()
                        };
                        // Load into SHIFT.
                        if h1 && !h0 {
                            let hd_ok = f.lhd != Fix::Zero && (external || st0);
                            let hr_ok = f.lhr != Fix::Zero && r0;
                            let use_hr = match (f.lhd, f.lhr) {
                                (Fix::One, Fix::One) => continue, // both impossible
                                (Fix::One, _) if hd_ok => false,
                                (Fix::One, _) => continue,
                                (_, Fix::One) if hr_ok => true,
                                (_, Fix::One) => continue,
                                _ => {
                                    if hd_ok && hr_ok {
                                        self.cost[2] < self.cost[0]
                                    } else if hd_ok {
                                        false
                                    } else if hr_ok {
                                        true
                                    } else {
                                        continue;
                                    }
                                }
                            };
                            if use_hr {
                                gain -= self.cost[2];
                                c.load_h = 2;
                            } else {
                                gain -= self.cost[0];
                                c.load_h = 1;
                            }
                        } else {
                            if f.lhd == Fix::One || f.lhr == Fix::One {
                                continue;
                            }
                        }
                        // Load into RANDOM.
                        if r1 && !r0 {
                            if f.lrd == Fix::Zero || !(external || st0) {
                                continue;
                            }
                            gain -= self.cost[1];
                            c.load_r = true;
                        } else if f.lrd == Fix::One {
                            continue;
                        }
                        gain += if h1 { self.coeff_ts_h } else { 0 };
                        gain += if r1 { self.coeff_ts_r } else { 0 };
                        // Stores: forced ones always, a voluntary DRAM
                        // store explored as a second branch.
                        for voluntary in [false, true] {
                            let Some((extra, st_set, sc)) =
                                self.apply_stores(&f, h1, r1, st0, voluntary)
                            else {
                                continue;
                            };
                            let st1 = st0 || st_set;
                            let mut c2 = c;
                            c2.s_hd = sc.0;
                            c2.s_rd = sc.1;
                            c2.s_hr = sc.2;
                            let s = (h1 as usize) + 2 * (r1 as usize) + 4 * (st1 as usize);
                            let g = gain - extra;
                            if g > value[t][s] {
                                value[t][s] = g;
                                choice[t][s] = c2;
                            }
                        }
                    }
                }
            }
        }

        // Terminal acceptance.
        let mut best_state = None;
        let mut best_gain = NEG_INF;
        for s in 0..8usize {
            let (_, r, st) = (s & 1 == 1, s & 2 == 2, s & 4 == 4);
            if meta.needs_disposition {
                if meta.retain_to_end {
                    if !r {
                        continue;
                    }
                } else if !st {
                    continue;
                }
            }
            if value[len - 1][s] > best_gain {
                best_gain = value[len - 1][s];
                best_state = Some(s);
            }
        }
        let mut state = best_state?;

        // Backtrack into the object's variable block.
        let mut values = vec![false; len * 8];
        let pos = |v: VarType| VarType::ALL.iter().position(|&x| x == v).unwrap();
        for t in (0..len).rev() {
            let c = choice[t][state];
            let (h, r, _) = (state & 1 == 1, state & 2 == 2, state & 4 == 4);
            let b = t * 8;
            values[b + pos(VarType::PlaceH)] = h;
            values[b + pos(VarType::PlaceR)] = r;
            values[b + pos(VarType::LoadHD)] = c.load_h == 1;
            values[b + pos(VarType::LoadHR)] = c.load_h == 2;
            values[b + pos(VarType::LoadRD)] = c.load_r;
            values[b + pos(VarType::StoreHD)] = c.s_hd;
            values[b + pos(VarType::StoreRD)] = c.s_rd;
            values[b + pos(VarType::StoreHR)] = c.s_hr;
            state = c.prev_state as usize;
        }
        Some(ObjectPlan {
            gain_fs: best_gain,
            values,
        })
    }

    /// Applies stores at one edge: forced stores always; when `voluntary`
    /// is set, additionally the cheapest allowed DRAM store (to reach the
    /// stored state). Returns (cost, any-DRAM-store, (shd, srd, shr)) or
    /// None when a forced store lacks residency.
    fn apply_stores(
        &self,
        f: &EdgeFix,
        h: bool,
        r: bool,
        st0: bool,
        voluntary: bool,
    ) -> Option<(i64, bool, (bool, bool, bool))> {
        let mut cost = 0i64;
        let mut shd = false;
        let mut srd = false;
        let mut shr = false;
        if f.shd == Fix::One {
            if !h {
                return None;
            }
            shd = true;
            cost += self.cost[3];
        }
        if f.srd == Fix::One {
            if !r {
                return None;
            }
            srd = true;
            cost += self.cost[4];
        }
        if f.shr == Fix::One {
            if !h {
                return None;
            }
            shr = true;
            cost += self.cost[5];
        }
        let mut stored = shd || srd;
        if voluntary && !stored && !st0 {
            let hd_ok = h && f.shd != Fix::Zero;
            let rd_ok = r && f.srd != Fix::Zero;
            match (hd_ok, rd_ok) {
                (true, true) => {
                    if self.cost[4] < self.cost[3] {
                        srd = true;
                        cost += self.cost[4];
                    } else {
                        shd = true;
                        cost += self.cost[3];
                    }
                }
                (true, false) => {
                    shd = true;
                    cost += self.cost[3];
                }
                (false, true) => {
                    srd = true;
                    cost += self.cost[4];
                }
                (false, false) => return None,
            }
            stored = true;
        }
        Some((cost, stored, (shd, srd, shr)))
    }
}

/// Shared search state of the branch-and-bound.
struct Search<'a> {
    model: &'a IlpModel,
    dps: Vec<ObjectDp<'a>>,
    fixes: Vec<Fix>,
    /// Current per-object plans under `fixes`.
    plans: Vec<Option<ObjectPlan>>,
    /// Flattened assignment mirror of `plans`.
    values: Vec<bool>,
    best: Option<(i64, usize, Vec<bool>)>, // objective, transfers, values
    nodes: u64,
    max_nodes: u64,
    budget_hit: bool,
}

impl<'a> Search<'a> {
    fn new(model: &'a IlpModel, max_nodes: u64) -> Self {
        let dps = (0..model.object_meta.len())
            .map(|o| ObjectDp::new(model, o))
            .collect();
        Search {
            model,
            dps,
            fixes: vec![Fix::Free; model.vars.len()],
            plans: (0..model.object_meta.len()).map(|_| None).collect(),
            values: vec![false; model.vars.len()],
            best: None,
            nodes: 0,
            max_nodes,
            budget_hit: false,
        }
    }

    fn recompute_object(&mut self, o: usize) -> bool {
        let plan = self.dps[o].solve(o, &self.fixes);
        let base = self.model.object_base[o];
        match &plan {
            Some(p) => self.values[base..base + p.values.len()].copy_from_slice(&p.values),
            None => {}
        }
        let ok = plan.is_some();
        self.plans[o] = plan;
        ok
    }

    fn recompute_all(&mut self) -> bool {
        (0..self.plans.len()).all(|o| self.recompute_object(o))
    }

    fn bound_fs(&self) -> i64 {
        self.plans
            .iter()
            .map(|p| p.as_ref().map_or(NEG_INF, |p| p.gain_fs))
            .sum()
    }

    /// Index of the most violated coupling row, if any.
    fn most_violated(&self) -> Option<usize> {
        let mut worst: Option<(i64, usize)> = None;
        for (i, c) in self.model.constraints.iter().enumerate() {
            if !c.family.is_coupling() {
                debug_assert!(
                    c.holds(&self.values),
                    "per-object families must hold under the DP"
                );
                continue;
            }
            let lhs: i64 = c
                .terms
                .iter()
                .map(|&(v, k)| if self.values[v] { k } else { 0 })
                .sum();
            debug_assert!(matches!(c.op, ConstraintOp::Le));
            let excess = lhs - c.rhs;
            if excess > 0 && worst.map_or(true, |(w, _)| excess > w) {
                worst = Some((excess, i));
            }
        }
        worst.map(|(_, i)| i)
    }

    fn offer_incumbent(&mut self, objective: i64, values: Vec<bool>) {
        let transfers = self.model.transfer_count(&values);
        let better = match &self.best {
            None => true,
            Some((bo, bt, bv)) => {
                objective > *bo
                    || (objective == *bo && transfers < *bt)
                    || (objective == *bo && transfers == *bt && values < *bv)
            }
        };
        if better {
            self.best = Some((objective, transfers, values));
        }
    }

    fn branch(&mut self) {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            self.budget_hit = true;
            return;
        }
        let bound = self.bound_fs();
        if bound <= NEG_INF / 2 {
            return; // some object infeasible under the fixings
        }
        if let Some((best_obj, _, _)) = &self.best {
            if bound <= *best_obj {
                return;
            }
        }
        let Some(row) = self.most_violated() else {
            // Coupling-feasible: the relaxation solution is the node
            // optimum.
            self.offer_incumbent(bound, self.values.clone());
            return;
        };
        // Branch on the largest active free variable of the violated row.
        let cand = self.model.constraints[row]
            .terms
            .iter()
            .filter(|&&(v, _)| self.values[v] && self.fixes[v] == Fix::Free)
            .max_by_key(|&&(v, k)| (k, std::cmp::Reverse(v)))
            .map(|&(v, _)| v);
        let Some(var) = cand else {
            return; // violation pinned by fixings: infeasible subtree
        };
        let object = self.model.vars[var].object;
        let saved_plan_values = self.plans[object].as_ref().map(|p| p.values.clone());
        let saved_gain = self.plans[object].as_ref().map(|p| p.gain_fs);

        for fix in [Fix::Zero, Fix::One] {
            if self.budget_hit {
                break;
            }
            self.fixes[var] = fix;
            if self.recompute_object(object) {
                self.branch();
            }
            // restore
            self.fixes[var] = Fix::Free;
            if let (Some(v), Some(g)) = (&saved_plan_values, saved_gain) {
                let base = self.model.object_base[object];
                self.values[base..base + v.len()].copy_from_slice(v);
                self.plans[object] = Some(ObjectPlan {
                    gain_fs: g,
                    values: v.clone(),
                });
            }
        }
    }

    /// Repairs the root relaxation into a feasible incumbent by forcing
    /// off, one at a time, the cheapest contributor of the most violated
    /// row. Fixings applied here are temporary to the repair.
    fn greedy_incumbent(&mut self) {
        let saved_fixes = self.fixes.clone();
        let mut iterations = 0usize;
        loop {
            iterations += 1;
            if iterations > self.model.vars.len() + 8 {
                break;
            }
            let Some(row) = self.most_violated() else {
                let obj = self.model.objective_value_fs(&self.values);
                if self.model.is_feasible(&self.values) {
                    self.offer_incumbent(obj, self.values.clone());
                }
                break;
            };
            // Candidates: active, free vars of the row; drop the one whose
            // removal loses the least objective.
            let cands: Vec<usize> = self.model.constraints[row]
                .terms
                .iter()
                .filter(|&&(v, _)| self.values[v] && self.fixes[v] == Fix::Free)
                .map(|&(v, _)| v)
                .collect();
            if cands.is_empty() {
                break;
            }
            let mut best: Option<(i64, usize)> = None;
            for &v in &cands {
                let o = self.model.vars[v].object;
                let before = self.plans[o].as_ref().map_or(NEG_INF, |p| p.gain_fs);
                self.fixes[v] = Fix::Zero;
                let after = self.dps[o]
                    .solve(o, &self.fixes)
                    .map_or(NEG_INF, |p| p.gain_fs);
                self.fixes[v] = Fix::Free;
                let loss = before - after;
                if after > NEG_INF / 2 && best.map_or(true, |(l, _)| loss < l) {
                    best = Some((loss, v));
                }
            }
            let Some((_, v)) = best else { break };
            self.fixes[v] = Fix::Zero;
            let o = self.model.vars[v].object;
            if !self.recompute_object(o) {
                break;
            }
        }
        self.fixes = saved_fixes;
        self.recompute_all();
    }
}

/// Exhaustive depth-first enumeration with per-row completion checks.
fn solve_exhaustive(model: &IlpModel) -> Result<IlpSolution> {
    let n = model.vars.len();
    if n > EXHAUSTIVE_VAR_CAP {
        return Err(Error::Solver(format!(
            "exhaustive mode supports ≤ {EXHAUSTIVE_VAR_CAP} variables, model has {n}"
        )));
    }
    // Row bookkeeping: which rows each var belongs to.
    let mut var_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ri, c) in model.constraints.iter().enumerate() {
        for &(v, _) in &c.terms {
            var_rows[v].push(ri);
        }
    }
    let nonneg: Vec<bool> = model
        .constraints
        .iter()
        .map(|c| matches!(c.op, ConstraintOp::Le) && c.terms.iter().all(|&(_, k)| k >= 0))
        .collect();

    struct Enum<'a> {
        model: &'a IlpModel,
        var_rows: &'a [Vec<usize>],
        nonneg: &'a [bool],
        lhs: Vec<i64>,
        remaining: Vec<usize>,
        values: Vec<bool>,
        best: Option<(i64, usize, Vec<bool>)>,
    }

    impl Enum<'_> {
        fn assign(&mut self, var: usize, value: bool) -> bool {
            self.values[var] = value;
            let mut ok = true;
            for &ri in &self.var_rows[var] {
                let c = &self.model.constraints[ri];
                if value {
                    let k = c
                        .terms
                        .iter()
                        .find(|&&(v, _)| v == var)
                        .map(|&(_, k)| k)
                        .unwrap();
                    self.lhs[ri] += k;
                }
                self.remaining[ri] -= 1;
                let complete = self.remaining[ri] == 0;
                let violated = match c.op {
                    ConstraintOp::Le => {
                        (self.nonneg[ri] && self.lhs[ri] > c.rhs)
                            || (complete && self.lhs[ri] > c.rhs)
                    }
                    ConstraintOp::Eq => complete && self.lhs[ri] != c.rhs,
                    ConstraintOp::Ge => complete && self.lhs[ri] < c.rhs,
                };
                if violated {
                    ok = false;
                }
            }
            ok
        }

        fn unassign(&mut self, var: usize) {
            let value = self.values[var];
            for &ri in &self.var_rows[var] {
                if value {
                    let k = self.model.constraints[ri]
                        .terms
                        .iter()
                        .find(|&&(v, _)| v == var)
                        .map(|&(_, k)| k)
                        .unwrap();
                    self.lhs[ri] -= k;
                }
                self.remaining[ri] += 1;
            }
            self.values[var] = false;
        }

        fn dfs(&mut self, var: usize) {
            if var == self.values.len() {
                let obj = self.model.objective_value_fs(&self.values);
                let transfers = self.model.transfer_count(&self.values);
                let better = match &self.best {
                    None => true,
                    Some((bo, bt, bv)) => {
                        obj > *bo
                            || (obj == *bo && transfers < *bt)
                            || (obj == *bo && transfers == *bt && self.values < *bv)
                    }
                };
                if better {
                    self.best = Some((obj, transfers, self.values.clone()));
                }
                return;
            }
            for value in [false, true] {
                let ok = self.assign(var, value);
                if ok {
                    self.dfs(var + 1);
                }
                self.unassign(var);
            }
        }
    }

    let mut e = Enum {
        model,
        var_rows: &var_rows,
        nonneg: &nonneg,
        lhs: vec![0; model.constraints.len()],
        remaining: model.constraints.iter().map(|c| c.terms.len()).collect(),
        values: vec![false; n],
        best: None,
    };
    e.dfs(0);
    let (objective_fs, _, values) = e
        .best
        .ok_or_else(|| Error::InfeasibleIlp("no feasible assignment exists".into()))?;
    Ok(IlpSolution {
        objective_s: objective_fs as f64 * 1e-15,
        objective_fs,
        values,
        provably_optimal: true,
        gap_fs: None,
        nodes_explored: 0,
    })
}

fn solve_bnb(model: &IlpModel, max_nodes: u64) -> Result<IlpSolution> {
    if model.vars.is_empty() {
        return Ok(IlpSolution {
            values: Vec::new(),
            objective_fs: 0,
            objective_s: 0.0,
            provably_optimal: true,
            gap_fs: None,
            nodes_explored: 0,
        });
    }
    let mut search = Search::new(model, max_nodes);
    if !search.recompute_all() {
        return Err(Error::InfeasibleIlp(
            "an object has no feasible placement under the window constraints".into(),
        ));
    }
    let root_bound = search.bound_fs();
    search.greedy_incumbent();
    search.branch();
    let budget_hit = search.budget_hit;
    let nodes = search.nodes;
    let Some((objective_fs, _, values)) = search.best else {
        return Err(if budget_hit {
            Error::Solver(format!(
                "node budget {max_nodes} exhausted before any feasible incumbent"
            ))
        } else {
            Error::InfeasibleIlp("no feasible assignment exists".into())
        });
    };
    debug_assert!(model.is_feasible(&values));
    Ok(IlpSolution {
        objective_s: objective_fs as f64 * 1e-15,
        objective_fs,
        values,
        provably_optimal: !budget_hit,
        gap_fs: budget_hit.then_some(root_bound - objective_fs),
        nodes_explored: nodes,
    })
}

/// Solves the program in the requested mode. Every mode returns a
/// feasible, constraint-satisfying assignment; the exact modes return
/// provably optimal ones (the branch-and-bound reports an incumbent and
/// gap instead when the node budget runs out).
pub fn solve_ilp(model: &IlpModel, options: &SolveOptions) -> Result<IlpSolution> {
    match options.mode {
        SolveMode::ExactBnb => solve_bnb(model, options.max_nodes),
        SolveMode::ExhaustiveSmall => solve_exhaustive(model),
        SolveMode::ExportOnly => {
            let lp = options
                .lp_path
                .as_ref()
                .ok_or_else(|| Error::Solver("export mode needs an LP path".into()))?;
            std::fs::write(lp, lp_format::write_lp_string(model))?;
            let sol = options.solution_path.as_ref().ok_or_else(|| {
                Error::Solver("export mode needs a solution file to read back".into())
            })?;
            let text = std::fs::read_to_string(sol)?;
            let values = lp_format::parse_solution_file(model, &text)?;
            if !model.is_feasible(&values) {
                return Err(Error::Solver(
                    "imported solution violates the model constraints".into(),
                ));
            }
            let objective_fs = model.objective_value_fs(&values);
            Ok(IlpSolution {
                objective_s: objective_fs as f64 * 1e-15,
                objective_fs,
                values,
                provably_optimal: false,
                gap_fs: None,
                nodes_explored: 0,
            })
        }
    }
}

/// Converts a wall-clock budget request into the deterministic node
/// budget.
pub fn nodes_for_seconds(seconds: f64) -> u64 {
    ((seconds.max(0.0)) * NODES_PER_SECOND as f64).round() as u64
}

impl IlpModel {
    /// Convenience for tests: per-object coefficient view reconstructed
    /// from the objective (femtoseconds → seconds).
    pub fn coefficients_of(&self, object: usize) -> CostCoefficients {
        let w = self.windows[object];
        let g = |v: VarType| self.objective_fs[self.var_id(object, w.first_edge, v)] as f64 * 1e-15;
        CostCoefficients {
            t_s_h: g(VarType::PlaceH),
            t_s_r: g(VarType::PlaceR),
            t_r_hd: -g(VarType::LoadHD),
            t_r_rd: -g(VarType::LoadRD),
            t_r_hr: -g(VarType::LoadHR),
            t_w_hd: -g(VarType::StoreHD),
            t_w_rd: -g(VarType::StoreRD),
            t_w_hr: -g(VarType::StoreHR),
        }
    }
}
