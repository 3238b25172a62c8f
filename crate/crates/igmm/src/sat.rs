//! A small deterministic CDCL SAT solver: two watched literals, first-UIP
//! clause learning, activity-based branching with index tie-breaking and Luby
//! restarts.  Clauses can be added between `solve` calls; the clause set only
//! grows, so an unsatisfiable solver stays unsatisfiable.
//!
//! The seed only influences branching phases, never soundness; two runs with
//! the same seed and clause sequence take identical paths.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Var = u32;

/// A propositional literal, encoded as `2 * var + sign`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, negated: bool) -> Self {
        Lit(var << 1 | negated as u32)
    }

    pub fn pos(var: Var) -> Self {
        Lit::new(var, false)
    }

    pub fn neg(var: Var) -> Self {
        Lit::new(var, true)
    }

    pub fn var(self) -> Var {
        self.0 >> 1
    }

    pub fn is_neg(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn negated(self) -> Self {
        Lit(self.0 ^ 1)
    }

    /// 1-based signed variable number as used by the DIMACS format.
    pub fn dimacs(self) -> i64 {
        let v = (self.var() + 1) as i64;
        if self.is_neg() {
            -v
        } else {
            v
        }
    }

    fn code(self) -> usize {
        self.0 as usize
    }
}

/// Result of a `solve` call.  A model maps every variable to a value;
/// unconstrained variables take their default phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatOutcome {
    Sat(Vec<bool>),
    Unsat,
    Timeout,
}

struct Clause {
    lits: Vec<Lit>,
}

const VAR_DECAY: f64 = 1.0 / 0.95;
const RESTART_BASE: u64 = 64;

pub struct Solver {
    clauses: Vec<Clause>,
    /// Clause indices watching each literal code.
    watches: Vec<Vec<u32>>,
    /// Per variable: 0 unassigned, 1 true, -1 false.
    assign: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    prop_head: usize,
    activity: Vec<f64>,
    var_inc: f64,
    phase: Vec<bool>,
    rng: ChaCha8Rng,
    unsat: bool,
    conflicts: u64,
    /// Clauses as handed to `add_clause`, kept verbatim for DIMACS export.
    input_clauses: Vec<Vec<Lit>>,
}

impl Solver {
    pub fn new(seed: u64) -> Self {
        Solver {
            clauses: Vec::new(),
            watches: Vec::new(),
            assign: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            prop_head: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            phase: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            unsat: false,
            conflicts: 0,
            input_clauses: Vec::new(),
        }
    }

    pub fn new_var(&mut self) -> Var {
        let v = self.assign.len() as Var;
        self.assign.push(0);
        self.level.push(0);
        self.reason.push(None);
        self.activity.push(0.0);
        self.phase.push(self.rng.gen());
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        v
    }

    pub fn n_vars(&self) -> usize {
        self.assign.len()
    }

    /// Number of clauses added through [`add_clause`](Self::add_clause);
    /// learned clauses are not counted.
    pub fn n_input_clauses(&self) -> usize {
        self.input_clauses.len()
    }

    pub fn n_conflicts(&self) -> u64 {
        self.conflicts
    }

    fn value(&self, l: Lit) -> i8 {
        let v = self.assign[l.var() as usize];
        if l.is_neg() {
            -v
        } else {
            v
        }
    }

    /// Adds a clause; must be called with the solver at decision level 0
    /// (which `solve` restores before returning).
    pub fn add_clause(&mut self, lits: &[Lit]) {
        debug_assert!(self.trail_lim.is_empty());
        debug_assert!(lits.iter().all(|l| (l.var() as usize) < self.n_vars()));
        self.input_clauses.push(lits.to_vec());
        if self.unsat {
            return;
        }

        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        if c.windows(2).any(|w| w[0].var() == w[1].var()) {
            return; // tautology
        }
        // Drop literals already false at level 0, skip clauses already true.
        if c.iter().any(|&l| self.value(l) == 1) {
            return;
        }
        c.retain(|&l| self.value(l) == 0);
        match c.len() {
            0 => self.unsat = true,
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.unsat = true;
                }
            }
            _ => {
                self.attach(c);
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>) -> u32 {
        let ci = self.clauses.len() as u32;
        self.watches[lits[0].code()].push(ci);
        self.watches[lits[1].code()].push(ci);
        self.clauses.push(Clause { lits });
        ci
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        debug_assert_eq!(self.value(l), 0);
        let v = l.var() as usize;
        self.assign[v] = if l.is_neg() { -1 } else { 1 };
        self.level[v] = self.trail_lim.len() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn propagate(&mut self) -> Option<u32> {
        while self.prop_head < self.trail.len() {
            let false_lit = self.trail[self.prop_head].negated();
            self.prop_head += 1;
            let ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut kept = Vec::with_capacity(ws.len());
            let mut conflict = None;
            for (wi, &ci) in ws.iter().enumerate() {
                {
                    let clause = &mut self.clauses[ci as usize];
                    if clause.lits[0] == false_lit {
                        clause.lits.swap(0, 1);
                    }
                    debug_assert_eq!(clause.lits[1], false_lit);
                }
                let first = self.clauses[ci as usize].lits[0];
                if self.value(first) == 1 {
                    kept.push(ci);
                    continue;
                }
                let len = self.clauses[ci as usize].lits.len();
                let other =
                    (2..len).find(|&k| self.value(self.clauses[ci as usize].lits[k]) != -1);
                match other {
                    Some(k) => {
                        self.clauses[ci as usize].lits.swap(1, k);
                        let w = self.clauses[ci as usize].lits[1];
                        self.watches[w.code()].push(ci);
                    }
                    None => {
                        kept.push(ci);
                        if self.value(first) == -1 {
                            kept.extend_from_slice(&ws[wi + 1..]);
                            conflict = Some(ci);
                            break;
                        }
                        self.enqueue(first, Some(ci));
                    }
                }
            }
            self.watches[false_lit.code()] = kept;
            if conflict.is_some() {
                self.prop_head = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
    }

    /// First-UIP conflict analysis; returns the learned clause with the
    /// asserting literal first and the backtrack level.
    fn analyze(&mut self, conflict: u32) -> (Vec<Lit>, u32) {
        let current = self.trail_lim.len() as u32;
        let mut seen = vec![false; self.n_vars()];
        let mut learned: Vec<Lit> = vec![Lit::pos(0)]; // slot for the UIP
        let mut counter = 0usize;
        let mut confl = conflict;
        let mut skip: Option<Lit> = None;
        let mut idx = self.trail.len();
        loop {
            let lits = self.clauses[confl as usize].lits.clone();
            for q in lits {
                if Some(q) == skip {
                    continue;
                }
                let v = q.var() as usize;
                if !seen[v] && self.level[v] > 0 {
                    seen[v] = true;
                    self.bump(v);
                    if self.level[v] == current {
                        counter += 1;
                    } else {
                        learned.push(q);
                    }
                }
            }
            let p = loop {
                idx -= 1;
                let p = self.trail[idx];
                if seen[p.var() as usize] {
                    break p;
                }
            };
            counter -= 1;
            if counter == 0 {
                learned[0] = p.negated();
                break;
            }
            confl = self.reason[p.var() as usize].expect("non-UIP literal has a reason");
            skip = Some(p);
        }
        let bt = if learned.len() == 1 {
            0
        } else {
            // put a literal of the second-highest level into the watch slot
            let k = (1..learned.len())
                .max_by_key(|&k| self.level[learned[k].var() as usize])
                .unwrap();
            learned.swap(1, k);
            self.level[learned[1].var() as usize]
        };
        (learned, bt)
    }

    fn backtrack(&mut self, target: u32) {
        while self.trail_lim.len() as u32 > target {
            let mark = self.trail_lim.pop().unwrap();
            for &l in &self.trail[mark..] {
                let v = l.var() as usize;
                self.phase[v] = !l.is_neg();
                self.assign[v] = 0;
                self.reason[v] = None;
            }
            self.trail.truncate(mark);
        }
        self.prop_head = self.prop_head.min(self.trail.len());
    }

    fn decide(&mut self) -> bool {
        let mut best: Option<usize> = None;
        for v in 0..self.n_vars() {
            if self.assign[v] == 0 && best.is_none_or(|b| self.activity[v] > self.activity[b]) {
                best = Some(v);
            }
        }
        match best {
            None => false,
            Some(v) => {
                self.trail_lim.push(self.trail.len());
                self.enqueue(Lit::new(v as Var, !self.phase[v]), None);
                true
            }
        }
    }

    pub fn solve(&mut self, deadline: Option<Instant>) -> SatOutcome {
        if self.unsat {
            return SatOutcome::Unsat;
        }
        if self.propagate().is_some() {
            self.unsat = true;
            return SatOutcome::Unsat;
        }
        let mut restart_count = 0u32;
        let mut since_restart = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                since_restart += 1;
                if self.trail_lim.is_empty() {
                    self.unsat = true;
                    return SatOutcome::Unsat;
                }
                let (learned, bt) = self.analyze(confl);
                self.backtrack(bt);
                let assert_lit = learned[0];
                let reason = if learned.len() == 1 {
                    None
                } else {
                    Some(self.attach(learned))
                };
                self.enqueue(assert_lit, reason);
                self.var_inc *= VAR_DECAY;
                if self.conflicts % 256 == 0 && past(deadline) {
                    self.backtrack(0);
                    return SatOutcome::Timeout;
                }
                if since_restart > luby(restart_count) * RESTART_BASE {
                    restart_count += 1;
                    since_restart = 0;
                    self.backtrack(0);
                }
            } else if !self.decide() {
                let model = (0..self.n_vars())
                    .map(|v| match self.assign[v] {
                        0 => self.phase[v],
                        a => a == 1,
                    })
                    .collect();
                self.backtrack(0);
                return SatOutcome::Sat(model);
            }
        }
    }

    /// The input clauses in DIMACS CNF format.
    pub fn dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.n_vars(), self.input_clauses.len());
        for c in &self.input_clauses {
            for &l in c {
                out.push_str(&l.dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

fn past(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// Luby restart sequence: 1 1 2 1 1 2 4 1 1 2 1 1 2 4 8 ...
fn luby(i: u32) -> u64 {
    let mut k = 1u32;
    while (1u64 << k) < (i as u64 + 2) {
        k += 1;
    }
    if (1u64 << k) - 1 == i as u64 + 1 {
        return 1 << (k - 1);
    }
    luby(i + 1 - (1 << (k - 1)))
}
