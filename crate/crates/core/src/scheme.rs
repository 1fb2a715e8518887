//! Linear programs for joint placement/delivery design over layered files.
//!
//! Layer `l` (0-based) is needed by users `l..K`, written `U_l`. Its content
//! is split into subfiles indexed by the set `S ⊆ U_l` of users caching them
//! (`a[l][S]`, the empty set being the uncached part). A multicast to `T`
//! carries, for every `j ∈ T`, pieces of the file user `j` wants that are
//! cached by all of `T \ {j}`; `u[l][T][S]` sizes the piece taken from
//! subfile `S` of layer `l`. Unicasts `v[l][{k}]` complete the rest.
//!
//! Worst-case demands (all distinct, `N ≥ K`) are handled structurally: the
//! constraints never mention a demand vector.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus};
use crate::model::{MemoryConstraint, ProblemInstance, RateProfile};
use crate::subset::UserSet;

/// Largest supported user count; the variable count grows roughly as `3^K`.
pub const MAX_USERS: usize = 10;
/// Above this many users the CLI warns about problem size.
pub const WARN_USERS: usize = 6;

const FAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    Alloc {
        layer: usize,
        set: UserSet,
    },
    Assign {
        layer: usize,
        target: UserSet,
        cached: UserSet,
    },
    /// `layer` is set only for intra-layer delivery, where each layer has its own signals.
    Multicast {
        layer: Option<usize>,
        target: UserSet,
    },
    Unicast {
        user: usize,
        layer: usize,
    },
    LayerMem {
        user: usize,
        layer: usize,
    },
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKey::Alloc { layer, set } => write!(f, "a[{}][{set}]", layer + 1),
            VarKey::Assign { layer, target, cached } => write!(f, "u[{}][{target}][{cached}]", layer + 1),
            VarKey::Multicast { layer: None, target } => write!(f, "v[{target}]"),
            VarKey::Multicast { layer: Some(l), target } => write!(f, "v[{}][{target}]", l + 1),
            VarKey::Unicast { user, layer } => write!(f, "w[{}][{{{}}}]", layer + 1, user + 1),
            VarKey::LayerMem { user, layer } => write!(f, "m[{}][{}]", layer + 1, user + 1),
        }
    }
}

/// Bijection between scheme variables and dense LP columns.
#[derive(Debug, Clone, Default)]
pub struct VariableIndex {
    keys: Vec<VarKey>,
    lookup: HashMap<VarKey, usize>,
}

impl VariableIndex {
    fn push(&mut self, key: VarKey) -> usize {
        let col = self.keys.len();
        let prev = self.lookup.insert(key, col);
        debug_assert!(prev.is_none(), "duplicate variable {key}");
        self.keys.push(key);
        col
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, key: &VarKey) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    pub fn col(&self, key: VarKey) -> usize {
        self.lookup[&key]
    }

    pub fn key(&self, col: usize) -> VarKey {
        self.keys[col]
    }

    pub fn keys(&self) -> &[VarKey] {
        &self.keys
    }

    pub fn count_where(&self, pred: impl Fn(&VarKey) -> bool) -> usize {
        self.keys.iter().filter(|k| pred(k)).count()
    }
}

/// `B_j^{(l),T}`: subsets of `U_l \ {j}` that contain `T \ {j}`.
pub fn side_info_sets(layer_users: UserSet, target: UserSet, j: usize) -> impl Iterator<Item = UserSet> {
    let base = target.without(j);
    let free = layer_users.minus(target);
    let ok = base.is_subset_of(layer_users);
    free.subsets().filter(move |_| ok).map(move |x| UserSet(base.0 | x.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    /// Multicasts may mix pieces from every layer a recipient set needs.
    Joint,
    /// Every multicast carries a single layer.
    IntraLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemoryMode {
    Budget(f64),
    PerUser(Vec<f64>),
    /// `m[k][l]`, fixed per user and layer.
    PerLayer(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub sense: Sense,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
    pub label: String,
}

impl Row {
    fn new(sense: Sense, terms: Vec<(usize, f64)>, rhs: f64, label: impl Into<String>) -> Self {
        Self { sense, terms, rhs, label: label.into() }
    }

    /// Signed violation at `x` (positive means violated).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.terms.iter().map(|&(j, a)| a * x[j]).sum();
        match self.sense {
            Sense::Eq => (lhs - self.rhs).abs(),
            Sense::Le => lhs - self.rhs,
            Sense::Ge => self.rhs - lhs,
        }
    }
}

/// An assembled scheme-design problem: variable index plus the data needed
/// to emit each constraint family.
#[derive(Debug, Clone)]
pub struct SchemeModel {
    pub users: usize,
    pub rates: RateProfile,
    pub layers: Vec<usize>,
    pub delivery: Delivery,
    pub memory: MemoryMode,
    pub index: VariableIndex,
}

impl SchemeModel {
    pub fn new(rates: &RateProfile, layers: Vec<usize>, delivery: Delivery, memory: MemoryMode) -> Result<Self> {
        let users = rates.users();
        if users > MAX_USERS {
            return Err(Error::Domain(format!("K = {users} exceeds the supported maximum of {MAX_USERS}")));
        }
        if let Some(&l) = layers.iter().find(|&&l| l >= users) {
            return Err(Error::Domain(format!("layer {} out of range for K = {users}", l + 1)));
        }
        let mut model = Self { users, rates: rates.clone(), layers, delivery, memory, index: VariableIndex::default() };
        model.index = model.build_index();
        Ok(model)
    }

    pub fn layer_users(&self, l: usize) -> UserSet {
        UserSet::range(l, self.users)
    }

    fn all_users(&self) -> UserSet {
        UserSet::range(0, self.users)
    }

    /// Layers whose pieces may travel in the multicast to `target`.
    fn signal_layers(&self, signal: Option<usize>, target: UserSet) -> Vec<usize> {
        let last = target.min().unwrap_or(0);
        match signal {
            Some(l) => vec![l],
            None => self.layers.iter().copied().filter(|&l| l <= last).collect(),
        }
    }

    fn multicast_targets(&self) -> Vec<(Option<usize>, UserSet)> {
        let mut out = Vec::new();
        match self.delivery {
            Delivery::Joint => {
                for t in self.all_users().subsets().filter(|t| t.len() >= 2) {
                    if !self.signal_layers(None, t).is_empty() {
                        out.push((None, t));
                    }
                }
            }
            Delivery::IntraLayer => {
                for &l in &self.layers {
                    for t in self.layer_users(l).subsets().filter(|t| t.len() >= 2) {
                        out.push((Some(l), t));
                    }
                }
            }
        }
        out
    }

    fn build_index(&self) -> VariableIndex {
        let mut idx = VariableIndex::default();
        for &l in &self.layers {
            for s in self.layer_users(l).subsets() {
                idx.push(VarKey::Alloc { layer: l, set: s });
            }
        }
        for &l in &self.layers {
            let ul = self.layer_users(l);
            for t in ul.subsets().filter(|t| t.len() >= 2) {
                for j in t.iter() {
                    for s in side_info_sets(ul, t, j) {
                        idx.push(VarKey::Assign { layer: l, target: t, cached: s });
                    }
                }
            }
        }
        for (layer, target) in self.multicast_targets() {
            idx.push(VarKey::Multicast { layer, target });
        }
        for &l in &self.layers {
            for k in self.layer_users(l).iter() {
                idx.push(VarKey::Unicast { user: k, layer: l });
            }
        }
        for &l in &self.layers {
            for k in self.layer_users(l).iter() {
                idx.push(VarKey::LayerMem { user: k, layer: l });
            }
        }
        idx
    }

    fn bounds(&self, key: &VarKey) -> (f64, f64) {
        let f = |l: usize| self.rates.layer_size(l);
        match *key {
            VarKey::Alloc { layer, .. } | VarKey::Assign { layer, .. } | VarKey::Unicast { layer, .. } => {
                (0.0, f(layer))
            }
            VarKey::Multicast { layer: Some(l), .. } => (0.0, f(l)),
            VarKey::Multicast { layer: None, target } => {
                let hi: f64 = self.signal_layers(None, target).iter().map(|&l| f(l)).sum();
                (0.0, hi)
            }
            VarKey::LayerMem { user, layer } => match &self.memory {
                MemoryMode::PerLayer(m) => {
                    let v = m[user][layer].max(0.0);
                    (v, v)
                }
                _ => (0.0, f(layer)),
            },
        }
    }

    fn cost(key: &VarKey) -> f64 {
        match key {
            VarKey::Multicast { .. } | VarKey::Unicast { .. } => 1.0,
            _ => 0.0,
        }
    }

    fn alloc(&self, l: usize, s: UserSet) -> usize {
        self.index.col(VarKey::Alloc { layer: l, set: s })
    }

    fn assign(&self, l: usize, t: UserSet, s: UserSet) -> usize {
        self.index.col(VarKey::Assign { layer: l, target: t, cached: s })
    }

    /// Subfile partition of layer `l` and the per-user layer memory limits.
    pub fn placement_rows(&self, l: usize) -> Vec<Row> {
        let ul = self.layer_users(l);
        let mut rows = Vec::new();
        let terms = ul.subsets().map(|s| (self.alloc(l, s), 1.0)).collect();
        rows.push(Row::new(Sense::Eq, terms, self.rates.layer_size(l), format!("partition[{}]", l + 1)));
        for k in ul.iter() {
            let mut terms: Vec<(usize, f64)> =
                ul.subsets().filter(|s| s.contains(k)).map(|s| (self.alloc(l, s), 1.0)).collect();
            terms.push((self.index.col(VarKey::LayerMem { user: k, layer: l }), -1.0));
            rows.push(Row::new(Sense::Le, terms, 0.0, format!("cache[{}][{}]", l + 1, k + 1)));
        }
        rows
    }

    /// Total-budget or per-user memory rows. Per-layer memories are pinned by
    /// bounds instead.
    pub fn memory_rows(&self) -> Vec<Row> {
        let mem = |k: usize, l: usize| self.index.col(VarKey::LayerMem { user: k, layer: l });
        match &self.memory {
            MemoryMode::Budget(m_tot) => {
                let mut terms = Vec::new();
                for &l in &self.layers {
                    for k in self.layer_users(l).iter() {
                        terms.push((mem(k, l), 1.0));
                    }
                }
                vec![Row::new(Sense::Eq, terms, *m_tot, "budget")]
            }
            MemoryMode::PerUser(m) => (0..self.users)
                .map(|k| {
                    let terms = self.layers.iter().filter(|&&l| l <= k).map(|&l| (mem(k, l), 1.0)).collect();
                    Row::new(Sense::Eq, terms, m[k], format!("memory[{}]", k + 1))
                })
                .collect(),
            MemoryMode::PerLayer(_) => Vec::new(),
        }
    }

    /// Every recipient of a multicast receives exactly the signal length.
    pub fn structural_rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        for (signal, t) in self.multicast_targets() {
            let v = self.index.col(VarKey::Multicast { layer: signal, target: t });
            for j in t.iter() {
                let mut terms = vec![(v, 1.0)];
                for l in self.signal_layers(signal, t) {
                    for s in side_info_sets(self.layer_users(l), t, j) {
                        terms.push((self.assign(l, t, s), -1.0));
                    }
                }
                let label = match signal {
                    None => format!("structure[{t}][{}]", j + 1),
                    Some(l) => format!("structure[{}][{t}][{}]", l + 1, j + 1),
                };
                rows.push(Row::new(Sense::Eq, terms, 0.0, label));
            }
        }
        rows
    }

    /// Every user receives all of every layer it needs.
    pub fn completion_rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        for &l in &self.layers {
            let ul = self.layer_users(l);
            for k in ul.iter() {
                let mut terms = vec![(self.index.col(VarKey::Unicast { user: k, layer: l }), 1.0)];
                for t in ul.subsets().filter(|t| t.len() >= 2 && t.contains(k)) {
                    for s in side_info_sets(ul, t, k) {
                        terms.push((self.assign(l, t, s), 1.0));
                    }
                }
                for s in ul.subsets().filter(|s| s.contains(k)) {
                    terms.push((self.alloc(l, s), 1.0));
                }
                rows.push(Row::new(
                    Sense::Ge,
                    terms,
                    self.rates.layer_size(l),
                    format!("complete[{}][{}]", l + 1, k + 1),
                ));
            }
        }
        rows
    }

    /// No bit of a subfile reaches the same user twice, and no piece exceeds
    /// its subfile. Rows of the second kind are only emitted where the first
    /// kind does not already imply them (pieces of single-user subfiles).
    pub fn redundancy_rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        for &l in &self.layers {
            let ul = self.layer_users(l);
            let width = ul.len();
            for s in ul.subsets().filter(|s| s.len() >= 2 && s.len() < width) {
                let a = self.alloc(l, s);
                for j in ul.minus(s).iter() {
                    let mut terms: Vec<(usize, f64)> = s
                        .subsets()
                        .filter(|x| !x.is_empty())
                        .map(|x| self.assign(l, x.with(j), s))
                        .map(|c| (c, 1.0))
                        .collect();
                    terms.push((a, -1.0));
                    rows.push(Row::new(Sense::Le, terms, 0.0, format!("redundant[{}][{s}][{}]", l + 1, j + 1)));
                }
            }
            for t in ul.subsets().filter(|t| t.len() == 2) {
                for j in t.iter() {
                    let s = t.without(j);
                    let terms = vec![(self.assign(l, t, s), 1.0), (self.alloc(l, s), -1.0)];
                    rows.push(Row::new(Sense::Le, terms, 0.0, format!("piece[{}][{t}][{s}]", l + 1)));
                }
            }
        }
        rows
    }

    pub fn all_rows(&self) -> Vec<Row> {
        let mut rows = Vec::new();
        for &l in &self.layers {
            rows.extend(self.placement_rows(l));
        }
        rows.extend(self.memory_rows());
        rows.extend(self.structural_rows());
        rows.extend(self.completion_rows());
        rows.extend(self.redundancy_rows());
        rows
    }

    pub fn to_lp(&self) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for key in self.index.keys() {
            let (lo, hi) = self.bounds(key);
            lp.add_var(Self::cost(key), lo, hi, key.to_string());
        }
        for row in self.all_rows() {
            match row.sense {
                Sense::Eq => lp.add_eq(row.terms, row.rhs),
                Sense::Le => lp.add_le(row.terms, row.rhs),
                Sense::Ge => lp.add_ge(row.terms, row.rhs),
            }
        }
        lp
    }

    pub fn solve(&self) -> Result<SchemeSolution> {
        let lp = self.to_lp();
        let sol = solve_lp(&lp)?;
        extract_scheme(&sol, self)
    }
}

fn all_layers(k: usize) -> Vec<usize> {
    (0..k).collect()
}

fn checked(inst: &ProblemInstance) -> Result<()> {
    inst.validate().map_err(Error::Invalid)
}

/// Budgeted design: cache sizes, placement and delivery chosen jointly.
pub fn build_o1(inst: &ProblemInstance) -> Result<SchemeModel> {
    checked(inst)?;
    let MemoryConstraint::Budget(m_tot) = inst.constraint else {
        return Err(Error::Domain("O1 needs a budget instance".into()));
    };
    SchemeModel::new(&inst.rates, all_layers(inst.users), Delivery::Joint, MemoryMode::Budget(m_tot))
}

/// Fixed cache sizes; the split of each cache over layers is optimized.
pub fn build_o2(inst: &ProblemInstance) -> Result<SchemeModel> {
    checked(inst)?;
    let MemoryConstraint::Fixed(m) = &inst.constraint else {
        return Err(Error::Domain("O2 needs a fixed-memory instance".into()));
    };
    SchemeModel::new(&inst.rates, all_layers(inst.users), Delivery::Joint, MemoryMode::PerUser(m.clone()))
}

/// The instance's own problem (O1 or O2) with the given delivery mode.
pub fn build_for(inst: &ProblemInstance, delivery: Delivery) -> Result<SchemeModel> {
    checked(inst)?;
    let memory = match &inst.constraint {
        MemoryConstraint::Budget(b) => MemoryMode::Budget(*b),
        MemoryConstraint::Fixed(m) => MemoryMode::PerUser(m.clone()),
    };
    SchemeModel::new(&inst.rates, all_layers(inst.users), delivery, memory)
}

/// One independent single-layer problem per layer, with `per_layer[k][l]`
/// pinned. The restricted load is the sum of the per-layer optima.
pub fn build_intra_layer(rates: &RateProfile, per_layer: &[Vec<f64>]) -> Result<Vec<SchemeModel>> {
    let k = rates.users();
    if per_layer.len() != k || per_layer.iter().any(|row| row.len() != k) {
        return Err(Error::Domain(format!("per-layer memory matrix must be {k}×{k}")));
    }
    (0..k)
        .map(|l| SchemeModel::new(rates, vec![l], Delivery::IntraLayer, MemoryMode::PerLayer(per_layer.to_vec())))
        .collect()
}

/// Total intra-layer load for pinned per-layer memories.
pub fn intra_layer_load(rates: &RateProfile, per_layer: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for model in build_intra_layer(rates, per_layer)? {
        total += model.solve()?.objective;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSolution {
    pub users: usize,
    pub rates: Vec<f64>,
    /// `(layer, S) -> a`
    pub allocation: BTreeMap<(usize, UserSet), f64>,
    /// `(layer, T, S) -> u`
    pub assignments: BTreeMap<(usize, UserSet, UserSet), f64>,
    /// `T -> v_T`; intra-layer signals to the same `T` are summed.
    pub multicast_sizes: BTreeMap<UserSet, f64>,
    /// `(user, layer) -> unicast size`
    pub unicast_sizes: BTreeMap<(usize, usize), f64>,
    /// `(user, layer) -> m`
    pub layer_memories: BTreeMap<(usize, usize), f64>,
    pub objective: f64,
}

pub fn extract_scheme(sol: &LpSolution, model: &SchemeModel) -> Result<SchemeSolution> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::NotOptimal(sol.status));
    }
    if sol.x.len() != model.index.len() {
        return Err(Error::Extraction(format!(
            "solution has {} entries, index has {}",
            sol.x.len(),
            model.index.len()
        )));
    }
    let mut out = SchemeSolution {
        users: model.users,
        rates: model.rates.rates().to_vec(),
        allocation: BTreeMap::new(),
        assignments: BTreeMap::new(),
        multicast_sizes: BTreeMap::new(),
        unicast_sizes: BTreeMap::new(),
        layer_memories: BTreeMap::new(),
        objective: 0.0,
    };
    for (col, key) in model.index.keys().iter().enumerate() {
        let raw = sol.x[col];
        if raw < -FAULT_TOL {
            return Err(Error::Extraction(format!("{key} = {raw:e} is negative")));
        }
        // values this small are solver round-off
        let v = if raw.abs() < 1e-12 { 0.0 } else { raw.max(0.0) };
        match *key {
            VarKey::Alloc { layer, set } => {
                out.allocation.insert((layer, set), v);
            }
            VarKey::Assign { layer, target, cached } => {
                out.assignments.insert((layer, target, cached), v);
            }
            VarKey::Multicast { target, .. } => {
                *out.multicast_sizes.entry(target).or_insert(0.0) += v;
            }
            VarKey::Unicast { user, layer } => {
                out.unicast_sizes.insert((user, layer), v);
            }
            VarKey::LayerMem { user, layer } => {
                out.layer_memories.insert((user, layer), v);
            }
        }
    }
    out.objective = out.load();
    if (out.objective - sol.objective).abs() > 1e-8 * (1.0 + sol.objective.abs()) {
        return Err(Error::Extraction(format!(
            "objective {} disagrees with LP objective {}",
            out.objective, sol.objective
        )));
    }
    Ok(out)
}

impl SchemeSolution {
    /// `Σ v_T + Σ unicasts`.
    pub fn load(&self) -> f64 {
        self.multicast_sizes.values().sum::<f64>() + self.unicast_sizes.values().sum::<f64>()
    }

    pub fn variable_count(&self) -> usize {
        self.allocation.len()
            + self.assignments.len()
            + self.multicast_sizes.len()
            + self.unicast_sizes.len()
            + self.layer_memories.len()
    }

    pub fn layer_size(&self, l: usize) -> f64 {
        if l == 0 {
            self.rates[0]
        } else {
            self.rates[l] - self.rates[l - 1]
        }
    }

    pub fn alloc(&self, l: usize, s: UserSet) -> f64 {
        self.allocation.get(&(l, s)).copied().unwrap_or(0.0)
    }

    pub fn assign(&self, l: usize, t: UserSet, s: UserSet) -> f64 {
        self.assignments.get(&(l, t, s)).copied().unwrap_or(0.0)
    }

    pub fn multicast(&self, t: UserSet) -> f64 {
        self.multicast_sizes.get(&t).copied().unwrap_or(0.0)
    }

    pub fn unicast(&self, user: usize, layer: usize) -> f64 {
        self.unicast_sizes.get(&(user, layer)).copied().unwrap_or(0.0)
    }

    /// Per-user cache size implied by the layer memories.
    pub fn user_memories(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.users];
        for (&(k, _), &v) in &self.layer_memories {
            m[k] += v;
        }
        m
    }

    /// Largest gap between `v_T` and the pieces any recipient `j ∈ T` gets.
    pub fn structural_gap(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (&t, &v) in &self.multicast_sizes {
            let last = t.min().unwrap_or(0);
            for j in t.iter() {
                let mut got = 0.0;
                for l in 0..=last {
                    for s in side_info_sets(UserSet::range(l, self.users), t, j) {
                        got += self.assign(l, t, s);
                    }
                }
                worst = worst.max((v - got).abs());
            }
        }
        worst
    }

    pub fn to_json(&self) -> Value {
        let section = |pairs: Vec<(String, f64)>| -> Value {
            let mut m = Map::new();
            for (k, v) in pairs {
                m.insert(k, json!(v));
            }
            Value::Object(m)
        };
        json!({
            "K": self.users,
            "rates": self.rates,
            "objective": self.objective,
            "allocation": section(self.allocation.iter()
                .map(|(&(l, s), &v)| (VarKey::Alloc { layer: l, set: s }.to_string(), v)).collect()),
            "assignment": section(self.assignments.iter()
                .map(|(&(l, t, s), &v)| (VarKey::Assign { layer: l, target: t, cached: s }.to_string(), v)).collect()),
            "multicast": section(self.multicast_sizes.iter()
                .map(|(&t, &v)| (VarKey::Multicast { layer: None, target: t }.to_string(), v)).collect()),
            "unicast": section(self.unicast_sizes.iter()
                .map(|(&(k, l), &v)| (VarKey::Unicast { user: k, layer: l }.to_string(), v)).collect()),
            "layer_memory": section(self.layer_memories.iter()
                .map(|(&(k, l), &v)| (VarKey::LayerMem { user: k, layer: l }.to_string(), v)).collect()),
        })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("scheme JSON: {what}"));
        let users = value.get("K").and_then(Value::as_u64).ok_or_else(|| bad("missing K"))? as usize;
        let rates: Vec<f64> = serde_json::from_value(value.get("rates").cloned().ok_or_else(|| bad("missing rates"))?)?;
        let objective = value.get("objective").and_then(Value::as_f64).ok_or_else(|| bad("missing objective"))?;
        if rates.len() != users || users == 0 || users > 64 {
            return Err(bad("rates length does not match K"));
        }
        let entries = |name: &str| -> Result<Vec<(String, f64)>> {
            let obj = value.get(name).and_then(Value::as_object).ok_or_else(|| bad(&format!("missing {name}")))?;
            obj.iter()
                .map(|(k, v)| {
                    v.as_f64().map(|x| (k.clone(), x)).ok_or_else(|| bad(&format!("non-numeric value for {k}")))
                })
                .collect()
        };
        let layer = |s: &str| -> Result<usize> {
            let l: usize = s.parse().map_err(|_| bad(&format!("bad layer {s}")))?;
            if l == 0 || l > users {
                return Err(bad(&format!("layer {l} out of range")));
            }
            Ok(l - 1)
        };
        let set = |s: &str| -> Result<UserSet> {
            let u = UserSet::parse(s).ok_or_else(|| bad(&format!("bad user set {s}")))?;
            if !u.is_subset_of(UserSet::range(0, users)) {
                return Err(bad(&format!("user set {s} out of range")));
            }
            Ok(u)
        };
        let single = |s: &str| -> Result<usize> {
            let u = set(s)?;
            if u.len() != 1 {
                return Err(bad(&format!("expected a single user, got {s}")));
            }
            Ok(u.min().unwrap_or(0))
        };

        let mut out = SchemeSolution {
            users,
            rates,
            allocation: BTreeMap::new(),
            assignments: BTreeMap::new(),
            multicast_sizes: BTreeMap::new(),
            unicast_sizes: BTreeMap::new(),
            layer_memories: BTreeMap::new(),
            objective,
        };
        for (key, v) in entries("allocation")? {
            match split_key(&key).as_deref() {
                Some(["a", l, s]) => {
                    out.allocation.insert((layer(l)?, set(s)?), v);
                }
                _ => return Err(bad(&format!("bad allocation key {key}"))),
            }
        }
        for (key, v) in entries("assignment")? {
            match split_key(&key).as_deref() {
                Some(["u", l, t, s]) => {
                    out.assignments.insert((layer(l)?, set(t)?, set(s)?), v);
                }
                _ => return Err(bad(&format!("bad assignment key {key}"))),
            }
        }
        for (key, v) in entries("multicast")? {
            match split_key(&key).as_deref() {
                Some(["v", t]) => {
                    out.multicast_sizes.insert(set(t)?, v);
                }
                _ => return Err(bad(&format!("bad multicast key {key}"))),
            }
        }
        for (key, v) in entries("unicast")? {
            match split_key(&key).as_deref() {
                Some(["w", l, k]) => {
                    out.unicast_sizes.insert((single(k)?, layer(l)?), v);
                }
                _ => return Err(bad(&format!("bad unicast key {key}"))),
            }
        }
        for (key, v) in entries("layer_memory")? {
            match split_key(&key).as_deref() {
                Some(["m", l, k]) => {
                    let k: usize = k.parse().map_err(|_| bad(&format!("bad user in {key}")))?;
                    if k == 0 || k > users {
                        return Err(bad(&format!("user out of range in {key}")));
                    }
                    out.layer_memories.insert((k - 1, layer(l)?), v);
                }
                _ => return Err(bad(&format!("bad layer memory key {key}"))),
            }
        }
        Ok(out)
    }
}

/// Splits `u[1][{1,3}][{1,2}]` into `["u", "1", "{1,3}", "{1,2}"]`.
fn split_key(key: &str) -> Option<Vec<&str>> {
    let open = key.find('[')?;
    let mut parts = vec![&key[..open]];
    let mut rest = &key[open..];
    while !rest.is_empty() {
        let inner = rest.strip_prefix('[')?;
        let close = inner.find(']')?;
        parts.push(&inner[..close]);
        rest = &inner[close + 1..];
    }
    Some(parts)
}
