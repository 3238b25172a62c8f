//! Exact minimization: a CNF encoding of the cover and closure conditions
//! over `n` candidate classes, solved per `n` from the partial-solution lower
//! bound upwards.  The nonemptiness condition is not encoded up front;
//! class systems violating it are refuted lazily by adding sharing (`sc`),
//! cube-activation (`a`) and cube-disjointness clauses for the states and
//! inputs involved (counterexample-guided refinement).
//!
//! Variables: `s[q][j]` (state `q` in class `j`), `z[i][k][j]` (successors of
//! class `k` under input `i` land in class `j`), `a[q][i][c]` (cube `c` of the
//! disjoint cover of the output set of `(q, i)` is active) and `sc[q][q']`
//! (the two states share a class).  With a partial solution seeded, the
//! pinned memberships become constants and clauses simplify away before
//! reaching the solver.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::boolset::{disjoint_cube_cover, Cube, ValuationSet};
use crate::machine::{Igmm, MachineError};
use crate::relations::{partial_solution, variation_matrix, VariationMatrix};
use crate::sat::{Lit, SatOutcome, Solver, Var};

#[derive(Debug, Error)]
pub enum MinimizeError {
    #[error("solver timed out after {} ms", report.wall.as_millis())]
    Timeout { report: Box<MinimizeReport> },
    #[error("{partial} pinned states do not fit in {classes} classes")]
    PartialExceedsClasses { partial: usize, classes: usize },
    #[error("invalid class system: {0}")]
    ClassSystem(String),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Candidate solution: a list of (possibly overlapping) state classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSystem {
    /// Members of each class, sorted ascending.
    pub members: Vec<Vec<usize>>,
}

impl ClassSystem {
    pub fn n_classes(&self) -> usize {
        self.members.len()
    }

    /// Lowest class containing `q`.
    pub fn class_of(&self, q: usize) -> Option<usize> {
        self.members.iter().position(|c| c.contains(&q))
    }
}

/// Union of the defined transition targets of a class under one input.
pub fn succ(m: &Igmm, class: &[usize], i: usize) -> Vec<usize> {
    let mut s: Vec<usize> = class.iter().filter_map(|&q| m.delta(q, i)).collect();
    s.sort_unstable();
    s.dedup();
    s
}

/// Intersection of the output sets of a class under one input; undefined
/// entries contribute the full set.
pub fn out(m: &Igmm, class: &[usize], i: usize) -> ValuationSet {
    let mut o = ValuationSet::top(m.outputs().arity());
    for &q in class {
        o = o
            .intersect(&m.lambda_unchecked(q, i))
            .expect("outputs share one arity");
    }
    o
}

/// All `(class, input)` pairs whose common output set is empty.  An empty
/// result means the class system induces a well-formed machine.
pub fn check_nonemptiness(m: &Igmm, cs: &ClassSystem) -> Vec<(usize, usize)> {
    let mut viol = Vec::new();
    for (k, class) in cs.members.iter().enumerate() {
        for i in 0..m.n_inputs() {
            if out(m, class, i).is_empty() {
                viol.push((k, i));
            }
        }
    }
    viol
}

fn validate(m: &Igmm, cs: &ClassSystem) -> Result<(), MinimizeError> {
    for q in 0..m.n_states() {
        if cs.class_of(q).is_none() {
            return Err(MinimizeError::ClassSystem(format!(
                "state {q} is in no class"
            )));
        }
    }
    for (k, class) in cs.members.iter().enumerate() {
        for i in 0..m.n_inputs() {
            let s = succ(m, class, i);
            if !s.is_empty() && !cs.members.iter().any(|c| s.iter().all(|q| c.contains(q))) {
                return Err(MinimizeError::ClassSystem(format!(
                    "successors of class {k} under input {i} fit in no class"
                )));
            }
            if out(m, class, i).is_empty() {
                return Err(MinimizeError::ClassSystem(format!(
                    "class {k} has empty output under input {i}"
                )));
            }
        }
    }
    Ok(())
}

/// One machine state per class: the transition goes to the lowest class
/// containing the successor set (undefined when that set is empty), the
/// output is the class intersection.  The initial state is the lowest class
/// containing the original initial state.
pub fn build_machine(m: &Igmm, cs: &ClassSystem) -> Result<Igmm, MinimizeError> {
    validate(m, cs)?;
    let names = cs
        .members
        .iter()
        .enumerate()
        .map(|(k, class)| {
            if class.is_empty() {
                format!("c{k}")
            } else {
                class
                    .iter()
                    .map(|&q| m.state_name(q))
                    .collect::<Vec<_>>()
                    .join("+")
            }
        })
        .collect();
    let init = cs
        .class_of(m.init())
        .expect("validated cover includes the initial state");
    let mut b = Igmm::builder(m.inputs().clone(), m.outputs().clone(), cs.n_classes())
        .init(init)
        .names(names);
    for (k, class) in cs.members.iter().enumerate() {
        for i in 0..m.n_inputs() {
            let s = succ(m, class, i);
            if s.is_empty() {
                continue;
            }
            let target = cs
                .members
                .iter()
                .position(|c| s.iter().all(|q| c.contains(q)))
                .expect("validated closure");
            b = b.entry(k, i, target, out(m, class, i));
        }
    }
    Ok(b.build()?)
}

/// Truth status of a named variable: pinned constant, not yet referenced by
/// any clause, or allocated in the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    True,
    False,
    Unalloc,
    Alloc(Var),
}

#[derive(Debug, Clone, Copy)]
enum CLit {
    True,
    False,
    Lit(Lit),
}

pub struct Encoder<'a> {
    m: &'a Igmm,
    n_classes: usize,
    solver: Solver,
    var_names: Vec<String>,
    s: Vec<Vec<Cell>>,
    z: Vec<Vec<Vec<Cell>>>,
    sc: HashMap<(usize, usize), Var>,
    /// Disjoint cube cover and activation variables per defined `(q, i)`.
    a: HashMap<(usize, usize), (Vec<Cube>, Vec<Var>)>,
    eq6_done: HashSet<(usize, usize)>,
    eq7_done: HashSet<(usize, usize, usize)>,
}

impl<'a> Encoder<'a> {
    pub fn new(m: &'a Igmm, n_classes: usize, seed: u64) -> Self {
        Encoder {
            m,
            n_classes,
            solver: Solver::new(seed),
            var_names: Vec::new(),
            s: vec![vec![Cell::Unalloc; n_classes]; m.n_states()],
            z: vec![vec![vec![Cell::Unalloc; n_classes]; n_classes]; m.n_inputs()],
            sc: HashMap::new(),
            a: HashMap::new(),
            eq6_done: HashSet::new(),
            eq7_done: HashSet::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.solver.n_vars()
    }

    pub fn n_clauses(&self) -> usize {
        self.solver.n_input_clauses()
    }

    /// Names of the allocated variables, in allocation order.
    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn dimacs(&self) -> String {
        self.solver.dimacs()
    }

    /// Sidecar text mapping 1-based DIMACS variable numbers to names.
    pub fn varmap(&self) -> String {
        let mut out = String::new();
        for (v, name) in self.var_names.iter().enumerate() {
            out.push_str(&format!("{} {name}\n", v + 1));
        }
        out
    }

    fn alloc(&mut self, name: String) -> Var {
        let v = self.solver.new_var();
        self.var_names.push(name);
        v
    }

    fn s_lit(&mut self, q: usize, j: usize, pos: bool) -> CLit {
        let v = match self.s[q][j] {
            Cell::True => return if pos { CLit::True } else { CLit::False },
            Cell::False => return if pos { CLit::False } else { CLit::True },
            Cell::Alloc(v) => v,
            Cell::Unalloc => {
                let v = self.alloc(format!("s q{q} c{j}"));
                self.s[q][j] = Cell::Alloc(v);
                v
            }
        };
        CLit::Lit(Lit::new(v, !pos))
    }

    fn z_lit(&mut self, i: usize, k: usize, j: usize, pos: bool) -> CLit {
        let v = match self.z[i][k][j] {
            Cell::True => return if pos { CLit::True } else { CLit::False },
            Cell::False => return if pos { CLit::False } else { CLit::True },
            Cell::Alloc(v) => v,
            Cell::Unalloc => {
                let v = self.alloc(format!("z i{i} c{k} c{j}"));
                self.z[i][k][j] = Cell::Alloc(v);
                v
            }
        };
        CLit::Lit(Lit::new(v, !pos))
    }

    fn emit(&mut self, lits: &[CLit]) {
        let mut clause = Vec::with_capacity(lits.len());
        for &l in lits {
            match l {
                CLit::True => return,
                CLit::False => {}
                CLit::Lit(l) => clause.push(l),
            }
        }
        self.solver.add_clause(&clause);
    }

    /// Cover and closure clauses.  Each pinned state is a constant member of
    /// its own class; memberships excluded by the variation matrix against a
    /// pinned class are constant false, and closure clauses whose
    /// implications all hold by constants are dropped together with their
    /// selector variable.
    pub fn encode_cover_closure(
        &mut self,
        vm: &VariationMatrix,
        partial: &[usize],
    ) -> Result<(), MinimizeError> {
        let n = self.n_classes;
        if partial.len() > n {
            return Err(MinimizeError::PartialExceedsClasses {
                partial: partial.len(),
                classes: n,
            });
        }
        let n_states = self.m.n_states();
        for (p, &qp) in partial.iter().enumerate() {
            self.s[qp][p] = Cell::True;
        }
        for q in 0..n_states {
            for (j, &qj) in partial.iter().enumerate() {
                if q != qj && vm.get(q, qj) {
                    self.s[q][j] = Cell::False;
                }
            }
        }

        // cover: each state in at least one class
        for q in 0..n_states {
            let lits: Vec<CLit> = (0..n).map(|j| self.s_lit(q, j, true)).collect();
            self.emit(&lits);
        }
        // separation: non-variations never share a class
        for q in 0..n_states {
            for q2 in q + 1..n_states {
                if !vm.get(q, q2) {
                    continue;
                }
                for j in 0..n {
                    let lits = [self.s_lit(q, j, false), self.s_lit(q2, j, false)];
                    self.emit(&lits);
                }
            }
        }
        // closure: successors of every class land in a common class
        for i in 0..self.m.n_inputs() {
            let edges: Vec<(usize, usize)> = (0..n_states)
                .filter_map(|q| self.m.delta(q, i).map(|t| (q, t)))
                .collect();
            for k in 0..n {
                // constant-propagate each selector before emitting anything
                let mut satisfied = false;
                for j in 0..n {
                    let mut all_hold = true;
                    for &(q, t) in &edges {
                        if self.s[q][k] == Cell::False || self.s[t][j] == Cell::True {
                            continue;
                        }
                        all_hold = false;
                        if self.s[q][k] == Cell::True && self.s[t][j] == Cell::False {
                            self.z[i][k][j] = Cell::False;
                            break;
                        }
                    }
                    if all_hold {
                        self.z[i][k][j] = Cell::True;
                        satisfied = true;
                        break;
                    }
                }
                if satisfied {
                    continue;
                }
                let open: Vec<usize> =
                    (0..n).filter(|&j| self.z[i][k][j] != Cell::False).collect();
                let sel: Vec<CLit> = open
                    .iter()
                    .map(|&j| self.z_lit(i, k, j, true))
                    .collect();
                self.emit(&sel);
                for j in 0..n {
                    if self.z[i][k][j] == Cell::False {
                        continue;
                    }
                    for &(q, t) in &edges {
                        let lits = [
                            self.z_lit(i, k, j, false),
                            self.s_lit(q, k, false),
                            self.s_lit(t, j, true),
                        ];
                        self.emit(&lits);
                    }
                }
            }
        }
        Ok(())
    }

    fn ensure_a(&mut self, q: usize, i: usize) {
        if self.a.contains_key(&(q, i)) {
            return;
        }
        let set = self.m.lambda_unchecked(q, i);
        let cubes = disjoint_cube_cover(&set).expect("output sets are non-empty");
        let vars: Vec<Var> = (0..cubes.len())
            .map(|c| self.alloc(format!("a q{q} i{i} cube{c}")))
            .collect();
        self.a.insert((q, i), (cubes, vars));
    }

    /// At least one cube of the output cover of `(q, i)` is active.
    fn emit_cube_choice(&mut self, q: usize, i: usize) {
        if !self.eq6_done.insert((q, i)) {
            return;
        }
        self.ensure_a(q, i);
        let lits: Vec<CLit> = self.a[&(q, i)]
            .1
            .iter()
            .map(|&v| CLit::Lit(Lit::pos(v)))
            .collect();
        self.emit(&lits);
    }

    /// Two states in a common class force their sharing variable.
    fn emit_sharing(&mut self, q: usize, q2: usize) -> Var {
        debug_assert!(q < q2);
        if let Some(&v) = self.sc.get(&(q, q2)) {
            return v;
        }
        let v = self.alloc(format!("sc q{q} q{q2}"));
        self.sc.insert((q, q2), v);
        for j in 0..self.n_classes {
            let lits = [
                self.s_lit(q, j, false),
                self.s_lit(q2, j, false),
                CLit::Lit(Lit::pos(v)),
            ];
            self.emit(&lits);
        }
        v
    }

    /// Disjoint cubes of two sharing states cannot both be active.
    fn emit_disjointness(&mut self, q: usize, q2: usize, i: usize) {
        debug_assert!(q < q2);
        if !self.eq7_done.insert((q, q2, i)) {
            return;
        }
        let sc = self.emit_sharing(q, q2);
        self.ensure_a(q, i);
        self.ensure_a(q2, i);
        let (cubes, vars) = self.a[&(q, i)].clone();
        let (cubes2, vars2) = self.a[&(q2, i)].clone();
        for (c, &v) in cubes.iter().zip(&vars) {
            for (c2, &v2) in cubes2.iter().zip(&vars2) {
                if !c.intersects(c2) {
                    self.emit(&[
                        CLit::Lit(Lit::neg(v)),
                        CLit::Lit(Lit::neg(v2)),
                        CLit::Lit(Lit::neg(sc)),
                    ]);
                }
            }
        }
    }

    /// Refutes one empty-output violation: for the class members defined on
    /// `i`, force a cube choice per state and forbid disjoint choices for
    /// states sharing a class.  Emission is idempotent per state, pair and
    /// input, so repeated rounds only grow the problem.
    pub fn refine(&mut self, class: &[usize], i: usize) {
        let defined: Vec<usize> = class
            .iter()
            .copied()
            .filter(|&q| self.m.delta(q, i).is_some())
            .collect();
        for &q in &defined {
            self.emit_cube_choice(q, i);
        }
        for (a, &q) in defined.iter().enumerate() {
            for &q2 in &defined[a + 1..] {
                self.emit_disjointness(q.min(q2), q.max(q2), i);
            }
        }
    }

    /// Emits every nonemptiness clause up front: a cube choice for each
    /// defined entry, sharing and disjointness for every pair of states the
    /// variation matrix allows to share a class.
    pub fn encode_nonemptiness_eager(&mut self, vm: &VariationMatrix) {
        let n_states = self.m.n_states();
        for q in 0..n_states {
            for i in 0..self.m.n_inputs() {
                if self.m.delta(q, i).is_some() {
                    self.emit_cube_choice(q, i);
                }
            }
        }
        for q in 0..n_states {
            for q2 in q + 1..n_states {
                if vm.get(q, q2) {
                    continue;
                }
                self.emit_sharing(q, q2);
                for i in 0..self.m.n_inputs() {
                    if self.m.delta(q, i).is_some() && self.m.delta(q2, i).is_some() {
                        self.emit_disjointness(q, q2, i);
                    }
                }
            }
        }
    }

    pub fn solve(&mut self, deadline: Option<Instant>) -> SatOutcome {
        self.solver.solve(deadline)
    }

    pub fn extract(&self, model: &[bool]) -> ClassSystem {
        let members = (0..self.n_classes)
            .map(|j| {
                (0..self.m.n_states())
                    .filter(|&q| match self.s[q][j] {
                        Cell::True => true,
                        Cell::Alloc(v) => model[v as usize],
                        Cell::False | Cell::Unalloc => false,
                    })
                    .collect()
            })
            .collect();
        ClassSystem { members }
    }
}

/// Method tag used in reports and benchmark rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sat,
    BisimOa,
    Bisim,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Sat => "sat",
            Method::BisimOa => "bisim-oa",
            Method::Bisim => "bisim",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Timeout,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunStatus::Ok => "ok",
            RunStatus::Timeout => "timeout",
        })
    }
}

/// Size, effort and timing summary of one minimization run.  Variable and
/// clause counts are summed over every class count tried.
#[derive(Debug, Clone)]
pub struct MinimizeReport {
    pub method: Method,
    pub input_states: usize,
    pub output_states: usize,
    pub n_tried: Vec<usize>,
    pub rounds_per_n: Vec<usize>,
    pub sat_vars: usize,
    pub sat_clauses: usize,
    pub cegar_rounds: usize,
    pub wall: Duration,
    pub status: RunStatus,
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    pub seed: u64,
    pub timeout: Option<Duration>,
    /// Pin the greedy partial solution to fixed classes.
    pub seed_partial: bool,
    /// Emit all nonemptiness clauses up front instead of refining lazily.
    pub eager: bool,
    pub keep_unreachable: bool,
    /// Dump `n{n}_r{round}.cnf` plus a `.varmap` sidecar before every solve.
    pub dimacs_dir: Option<PathBuf>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            seed: 0,
            timeout: None,
            seed_partial: true,
            eager: false,
            keep_unreachable: false,
            dimacs_dir: None,
        }
    }
}

/// A successful minimization: the machine, the class system it was built
/// from (absent when the input was already minimal) and the run report.
/// Unless `keep_unreachable` was set, class members index the pruned input.
#[derive(Debug, Clone)]
pub struct Minimization {
    pub machine: Igmm,
    pub classes: Option<ClassSystem>,
    pub report: MinimizeReport,
}

fn past(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

fn dump_dimacs(dir: &Path, n: usize, round: usize, enc: &Encoder) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("n{n}_r{round}.cnf")), enc.dimacs())?;
    std::fs::write(dir.join(format!("n{n}_r{round}.varmap")), enc.varmap())
}

/// Finds a smallest valid class system and builds its machine.  Class counts
/// run from the partial-solution size to one below the state count; if every
/// count is unsatisfiable the (pruned) input is already minimal and a copy is
/// returned.
pub fn minimize(m: &Igmm, opts: &MinimizeOptions) -> Result<Minimization, MinimizeError> {
    let start = Instant::now();
    let deadline = opts.timeout.map(|t| start + t);
    let base = if opts.keep_unreachable {
        m.clone()
    } else {
        m.reachable_prune().0
    };
    let vm = variation_matrix(&base);
    let partial = partial_solution(&vm);
    let pins: &[usize] = if opts.seed_partial { &partial } else { &[] };

    let mut report = MinimizeReport {
        method: Method::Sat,
        input_states: m.n_states(),
        output_states: 0,
        n_tried: Vec::new(),
        rounds_per_n: Vec::new(),
        sat_vars: 0,
        sat_clauses: 0,
        cegar_rounds: 0,
        wall: Duration::ZERO,
        status: RunStatus::Ok,
    };
    let finish = |mut report: MinimizeReport, status: RunStatus| {
        report.status = status;
        report.wall = start.elapsed();
        report
    };

    for n in partial.len()..base.n_states() {
        if past(deadline) {
            return Err(MinimizeError::Timeout {
                report: Box::new(finish(report, RunStatus::Timeout)),
            });
        }
        let mut enc = Encoder::new(&base, n, opts.seed);
        enc.encode_cover_closure(&vm, pins)?;
        if opts.eager {
            enc.encode_nonemptiness_eager(&vm);
        }
        report.n_tried.push(n);
        let mut rounds = 0;
        let solution = loop {
            if let Some(dir) = &opts.dimacs_dir {
                dump_dimacs(dir, n, rounds, &enc)?;
            }
            match enc.solve(deadline) {
                SatOutcome::Sat(model) => {
                    let cs = enc.extract(&model);
                    let violations = check_nonemptiness(&base, &cs);
                    if violations.is_empty() {
                        break Some(cs);
                    }
                    for (k, i) in violations {
                        enc.refine(&cs.members[k], i);
                    }
                    rounds += 1;
                }
                SatOutcome::Unsat => break None,
                SatOutcome::Timeout => {
                    report.rounds_per_n.push(rounds);
                    report.cegar_rounds += rounds;
                    report.sat_vars += enc.n_vars();
                    report.sat_clauses += enc.n_clauses();
                    return Err(MinimizeError::Timeout {
                        report: Box::new(finish(report, RunStatus::Timeout)),
                    });
                }
            }
        };
        report.rounds_per_n.push(rounds);
        report.cegar_rounds += rounds;
        report.sat_vars += enc.n_vars();
        report.sat_clauses += enc.n_clauses();
        if let Some(cs) = solution {
            let machine = build_machine(&base, &cs)?;
            report.output_states = machine.n_states();
            return Ok(Minimization {
                machine,
                classes: Some(cs),
                report: finish(report, RunStatus::Ok),
            });
        }
    }
    // every smaller class count refuted: the input is already minimal
    if past(deadline) {
        return Err(MinimizeError::Timeout {
            report: Box::new(finish(report, RunStatus::Timeout)),
        });
    }
    report.output_states = base.n_states();
    Ok(Minimization {
        machine: base,
        classes: None,
        report: finish(report, RunStatus::Ok),
    })
}
