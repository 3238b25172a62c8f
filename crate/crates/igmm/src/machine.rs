//! The IGMM data model: states, a partial input-deterministic transition
//! function and a set-valued output function, plus normalization passes
//! (input completion, reachability pruning) and statistics.
//!
//! Entries are stored per `(state, input valuation)`.  An absent entry means
//! the transition is undefined and the output is implicitly the full set;
//! the table never stores a non-full output without a defined target.

use std::collections::VecDeque;

use thiserror::Error;

use crate::boolset::{disjoint_cube_cover, BoolSetError, PropSet, ValuationSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error("state index {state} out of range (machine has {n_states} states)")]
    StateOutOfRange { state: usize, n_states: usize },
    #[error("input valuation {input} out of range (machine has {n_inputs} input valuations)")]
    InputOutOfRange { input: usize, n_inputs: usize },
    #[error("output set for ({state}, {input}) is empty")]
    EmptyOutput { state: usize, input: usize },
    #[error("output arity mismatch for ({state}, {input})")]
    OutputArity { state: usize, input: usize },
    #[error(transparent)]
    BoolSet(#[from] BoolSetError),
}

/// A defined transition: target state and allowed output valuations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub target: usize,
    pub out: ValuationSet,
}

/// An incompletely specified generalized Mealy machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Igmm {
    inputs: PropSet,
    outputs: PropSet,
    init: usize,
    /// `table[q][i]` for state `q` and input valuation index `i`.
    table: Vec<Vec<Option<Entry>>>,
    /// Display names, canonical identity stays the index.
    names: Vec<String>,
}

/// Builder-style construction; the machine is immutable afterwards.
pub struct IgmmBuilder {
    inputs: PropSet,
    outputs: PropSet,
    init: usize,
    table: Vec<Vec<Option<Entry>>>,
    names: Vec<String>,
}

impl IgmmBuilder {
    pub fn new(inputs: PropSet, outputs: PropSet, n_states: usize) -> Self {
        let n_in = inputs.n_valuations();
        IgmmBuilder {
            inputs,
            outputs,
            init: 0,
            table: vec![vec![None; n_in]; n_states],
            names: (0..n_states).map(|q| format!("s{q}")).collect(),
        }
    }

    pub fn init(mut self, init: usize) -> Self {
        self.init = init;
        self
    }

    pub fn name(mut self, q: usize, name: impl Into<String>) -> Self {
        self.names[q] = name.into();
        self
    }

    pub fn names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.table.len());
        self.names = names;
        self
    }

    /// Sets `delta(q, i) = target` with output set `out`.
    pub fn entry(mut self, q: usize, i: usize, target: usize, out: ValuationSet) -> Self {
        self.table[q][i] = Some(Entry { target, out });
        self
    }

    pub fn build(self) -> Result<Igmm, MachineError> {
        let m = Igmm {
            inputs: self.inputs,
            outputs: self.outputs,
            init: self.init,
            table: self.table,
            names: self.names,
        };
        m.validate()?;
        Ok(m)
    }
}

impl Igmm {
    pub fn builder(inputs: PropSet, outputs: PropSet, n_states: usize) -> IgmmBuilder {
        IgmmBuilder::new(inputs, outputs, n_states)
    }

    fn validate(&self) -> Result<(), MachineError> {
        let n = self.n_states();
        if self.init >= n {
            return Err(MachineError::StateOutOfRange {
                state: self.init,
                n_states: n,
            });
        }
        for (q, row) in self.table.iter().enumerate() {
            for (i, e) in row.iter().enumerate() {
                if let Some(e) = e {
                    if e.target >= n {
                        return Err(MachineError::StateOutOfRange {
                            state: e.target,
                            n_states: n,
                        });
                    }
                    if e.out.arity() != self.outputs.arity() {
                        return Err(MachineError::OutputArity { state: q, input: i });
                    }
                    if e.out.is_empty() {
                        return Err(MachineError::EmptyOutput { state: q, input: i });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> &PropSet {
        &self.inputs
    }

    pub fn outputs(&self) -> &PropSet {
        &self.outputs
    }

    pub fn n_states(&self) -> usize {
        self.table.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.n_valuations()
    }

    pub fn init(&self) -> usize {
        self.init
    }

    pub fn state_name(&self, q: usize) -> &str {
        &self.names[q]
    }

    pub fn state_names(&self) -> &[String] {
        &self.names
    }

    pub fn entry(&self, q: usize, i: usize) -> Option<&Entry> {
        self.table[q][i].as_ref()
    }

    /// Transition target, if defined.
    pub fn delta(&self, q: usize, i: usize) -> Option<usize> {
        self.table[q][i].as_ref().map(|e| e.target)
    }

    /// Output set: the stored set if the entry is present, the full set
    /// otherwise.  Never empty.
    pub fn lambda(&self, q: usize, i: usize) -> Result<ValuationSet, MachineError> {
        if q >= self.n_states() {
            return Err(MachineError::StateOutOfRange {
                state: q,
                n_states: self.n_states(),
            });
        }
        if i >= self.n_inputs() {
            return Err(MachineError::InputOutOfRange {
                input: i,
                n_inputs: self.n_inputs(),
            });
        }
        Ok(match &self.table[q][i] {
            Some(e) => e.out.clone(),
            None => ValuationSet::top(self.outputs.arity()),
        })
    }

    /// Like [`lambda`](Self::lambda) but with indices known to be in range.
    pub(crate) fn lambda_unchecked(&self, q: usize, i: usize) -> ValuationSet {
        match &self.table[q][i] {
            Some(e) => e.out.clone(),
            None => ValuationSet::top(self.outputs.arity()),
        }
    }

    pub fn is_input_complete(&self) -> bool {
        self.table
            .iter()
            .all(|row| row.iter().all(|e| e.is_some()))
    }

    /// Input-completes the machine by routing every undefined `(q, i)` to a
    /// fresh sink state with full-output self-loops.  Returns the machine
    /// unchanged when already complete; the second component is the sink
    /// index when one was added.
    ///
    /// Semantics are preserved: an undefined transition already allows any
    /// output from then on.
    pub fn complete_with_sink(&self) -> (Igmm, Option<usize>) {
        if self.is_input_complete() {
            return (self.clone(), None);
        }
        let sink = self.n_states();
        let top = ValuationSet::top(self.outputs.arity());
        let mut table = self.table.clone();
        for row in table.iter_mut() {
            for e in row.iter_mut() {
                if e.is_none() {
                    *e = Some(Entry {
                        target: sink,
                        out: top.clone(),
                    });
                }
            }
        }
        table.push(
            (0..self.n_inputs())
                .map(|_| {
                    Some(Entry {
                        target: sink,
                        out: top.clone(),
                    })
                })
                .collect(),
        );
        let mut names = self.names.clone();
        names.push(fresh_name(&names, "sink"));
        let m = Igmm {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            init: self.init,
            table,
            names,
        };
        (m, Some(sink))
    }

    /// Restricts the machine to states reachable from the initial state via
    /// defined transitions, compacting indices.  Returns the mapping
    /// `old index -> new index` for survivors.
    pub fn reachable_prune(&self) -> (Igmm, Vec<Option<usize>>) {
        let n = self.n_states();
        let mut seen = vec![false; n];
        let mut order = Vec::new();
        let mut queue = VecDeque::from([self.init]);
        seen[self.init] = true;
        while let Some(q) = queue.pop_front() {
            order.push(q);
            for i in 0..self.n_inputs() {
                if let Some(t) = self.delta(q, i) {
                    if !seen[t] {
                        seen[t] = true;
                        queue.push_back(t);
                    }
                }
            }
        }
        let mut map = vec![None; n];
        for (new, &old) in order.iter().enumerate() {
            map[old] = Some(new);
        }
        let table = order
            .iter()
            .map(|&old| {
                self.table[old]
                    .iter()
                    .map(|e| {
                        e.as_ref().map(|e| Entry {
                            target: map[e.target].expect("target of reachable state"),
                            out: e.out.clone(),
                        })
                    })
                    .collect()
            })
            .collect();
        let m = Igmm {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            init: map[self.init].unwrap(),
            table,
            names: order.iter().map(|&old| self.names[old].clone()).collect(),
        };
        (m, map)
    }

    pub fn stats(&self) -> MachineStats {
        let n_defined = self
            .table
            .iter()
            .map(|row| row.iter().filter(|e| e.is_some()).count())
            .sum();
        MachineStats {
            n_states: self.n_states(),
            n_defined_transitions: n_defined,
            n_edges_merged: self.merged_edges().len(),
            is_input_complete: self.is_input_complete(),
        }
    }

    /// Groups defined entries by `(state, target, output set)` and represents
    /// each group's input valuations as disjoint input cubes; this is the
    /// merged-edge view used by the writers and by [`MachineStats`].
    pub fn merged_edges(&self) -> Vec<MergedEdge> {
        let mut edges = Vec::new();
        for q in 0..self.n_states() {
            let mut groups: Vec<(usize, ValuationSet, Vec<usize>)> = Vec::new();
            for i in 0..self.n_inputs() {
                if let Some(e) = &self.table[q][i] {
                    match groups
                        .iter_mut()
                        .find(|(t, out, _)| *t == e.target && *out == e.out)
                    {
                        Some((_, _, inputs)) => inputs.push(i),
                        None => groups.push((e.target, e.out.clone(), vec![i])),
                    }
                }
            }
            for (target, out, inputs) in groups {
                let in_set = ValuationSet::from_indices(self.inputs.arity(), &inputs);
                let cubes = disjoint_cube_cover(&in_set).expect("group is non-empty");
                for input_cube in cubes {
                    edges.push(MergedEdge {
                        source: q,
                        target,
                        input_cube,
                        out: out.clone(),
                    });
                }
            }
        }
        edges
    }
}

/// One line of the merged-edge view: an input cube from `source` to `target`
/// with a common output set.
#[derive(Debug, Clone)]
pub struct MergedEdge {
    pub source: usize,
    pub target: usize,
    pub input_cube: crate::boolset::Cube,
    pub out: ValuationSet,
}

/// Size and definedness summary of a machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineStats {
    pub n_states: usize,
    pub n_defined_transitions: usize,
    pub n_edges_merged: usize,
    pub is_input_complete: bool,
}

impl std::fmt::Display for MachineStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} states, {} defined transitions, {} merged edges, input-complete: {}",
            self.n_states, self.n_defined_transitions, self.n_edges_merged, self.is_input_complete
        )
    }
}

fn fresh_name(names: &[String], base: &str) -> String {
    if !names.iter().any(|n| n == base) {
        return base.to_string();
    }
    (0..)
        .map(|k| format!("{base}{k}"))
        .find(|cand| !names.iter().any(|n| n == cand))
        .unwrap()
}
