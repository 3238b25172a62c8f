//! Independent oracles: a semantic specialization check over reachable state
//! pairs, a bisimilarity check, an exhaustive minimal-class-count search and
//! a seeded random machine generator for differential testing.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::boolset::{BoolSetError, PropSet, Valuation, ValuationSet};
use crate::machine::{Igmm, MachineError};
use crate::relations::variation_matrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("machines use different input or output propositions")]
    PropositionMismatch,
    #[error("instance too large for the exhaustive oracle ({states} states, {inputs} input valuations)")]
    TooLarge { states: usize, inputs: usize },
    #[error("invalid generator parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    BoolSet(#[from] BoolSetError),
    #[error(transparent)]
    Machine(#[from] MachineError),
}

/// Witness that the implementation shows a behavior the specification
/// forbids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// Input valuation indices; the last one triggers the failure.
    pub word: Vec<usize>,
    /// An output valuation the implementation allows here and the
    /// specification does not.  `None` when the implementation becomes
    /// unconstrained while the specification still restricts later steps.
    pub output: Option<usize>,
}

fn bit_text(index: usize, arity: usize) -> String {
    (0..arity)
        .map(|j| if index >> j & 1 == 1 { '1' } else { '0' })
        .collect()
}

impl Counterexample {
    pub fn describe(&self, inputs: &PropSet, outputs: &PropSet) -> String {
        let word: Vec<String> = self
            .word
            .iter()
            .map(|&i| bit_text(i, inputs.arity()))
            .collect();
        match self.output {
            Some(o) => format!(
                "after inputs [{}]: output {} is allowed by the implementation but not by the specification",
                word.join(" "),
                bit_text(o, outputs.arity())
            ),
            None => format!(
                "after inputs [{}]: the implementation is unconstrained while the specification is not",
                word.join(" ")
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecCheck {
    Holds,
    Fails(Counterexample),
}

impl SpecCheck {
    pub fn holds(&self) -> bool {
        matches!(self, SpecCheck::Holds)
    }
}

/// States from which a machine never constrains anything again: all outputs
/// full, all defined successors equally unconstrained.
fn universal_states(m: &Igmm) -> Vec<bool> {
    let n = m.n_states();
    let mut u: Vec<bool> = (0..n)
        .map(|q| (0..m.n_inputs()).all(|i| m.lambda_unchecked(q, i).is_top()))
        .collect();
    loop {
        let mut changed = false;
        for q in 0..n {
            if !u[q] {
                continue;
            }
            let broken =
                (0..m.n_inputs()).any(|i| m.delta(q, i).is_some_and(|t| !u[t]));
            if broken {
                u[q] = false;
                changed = true;
            }
        }
        if !changed {
            return u;
        }
    }
}

/// Checks that every behavior of `imp` is allowed by `spec`, by BFS over
/// reachable state pairs.  Per pair and input: an undefined specification
/// entry allows anything; a defined specification entry requires the
/// implementation's outputs to be included and the successor pair to pass in
/// turn.  An implementation entry that is undefined where the specification
/// constrains something (now or later) is a failure, except when the
/// specification's entry is full-output with a never-constraining successor.
pub fn check_specialization(imp: &Igmm, spec: &Igmm) -> Result<SpecCheck, VerifyError> {
    if imp.inputs().names() != spec.inputs().names()
        || imp.outputs().names() != spec.outputs().names()
    {
        return Err(VerifyError::PropositionMismatch);
    }
    let universal = universal_states(spec);
    let n_spec = spec.n_states();
    let pair = |a: usize, b: usize| a * n_spec + b;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; imp.n_states() * n_spec];
    let mut seen = vec![false; imp.n_states() * n_spec];
    let root = pair(imp.init(), spec.init());
    seen[root] = true;
    let mut queue = VecDeque::from([(imp.init(), spec.init())]);

    let trace = |parent: &[Option<(usize, usize)>], mut p: usize, last: usize| {
        let mut word = vec![last];
        while let Some((prev, i)) = parent[p] {
            word.push(i);
            p = prev;
        }
        word.reverse();
        word
    };

    while let Some((a, b)) = queue.pop_front() {
        for i in 0..imp.n_inputs() {
            let Some(tb) = spec.delta(b, i) else {
                continue;
            };
            let lb = spec.lambda_unchecked(b, i);
            match imp.delta(a, i) {
                None => {
                    if lb.is_top() && universal[tb] {
                        continue;
                    }
                    let output = lb
                        .complement()
                        .iter()
                        .next()
                        .map(|v: Valuation| v.index());
                    return Ok(SpecCheck::Fails(Counterexample {
                        word: trace(&parent, pair(a, b), i),
                        output,
                    }));
                }
                Some(ta) => {
                    let la = imp.lambda_unchecked(a, i);
                    if !la.is_subset(&lb)? {
                        let output = la
                            .difference(&lb)?
                            .iter()
                            .next()
                            .map(|v| v.index());
                        return Ok(SpecCheck::Fails(Counterexample {
                            word: trace(&parent, pair(a, b), i),
                            output,
                        }));
                    }
                    let p = pair(ta, tb);
                    if !seen[p] {
                        seen[p] = true;
                        parent[p] = Some((pair(a, b), i));
                        queue.push_back((ta, tb));
                    }
                }
            }
        }
    }
    Ok(SpecCheck::Holds)
}

/// True iff the initial states have identical output sets, definedness and
/// blockwise-matching successors on every reachable pair.
pub fn check_bisimilar(m1: &Igmm, m2: &Igmm) -> Result<bool, VerifyError> {
    if m1.inputs().names() != m2.inputs().names()
        || m1.outputs().names() != m2.outputs().names()
    {
        return Err(VerifyError::PropositionMismatch);
    }
    let n2 = m2.n_states();
    let mut seen = vec![false; m1.n_states() * n2];
    seen[m1.init() * n2 + m2.init()] = true;
    let mut queue = VecDeque::from([(m1.init(), m2.init())]);
    while let Some((a, b)) = queue.pop_front() {
        for i in 0..m1.n_inputs() {
            if m1.lambda_unchecked(a, i) != m2.lambda_unchecked(b, i) {
                return Ok(false);
            }
            match (m1.delta(a, i), m2.delta(b, i)) {
                (None, None) => {}
                (Some(ta), Some(tb)) => {
                    if !seen[ta * n2 + tb] {
                        seen[ta * n2 + tb] = true;
                        queue.push_back((ta, tb));
                    }
                }
                _ => return Ok(false),
            }
        }
    }
    Ok(true)
}

/// Exhaustive search for the smallest number of (possibly overlapping)
/// classes satisfying cover, pairwise compatibility, closure and
/// nonemptiness.  Guarded to small instances; returns the state count when
/// nothing smaller than `cap` exists.
pub fn brute_force_min_size(m: &Igmm, cap: usize) -> Result<usize, VerifyError> {
    let n = m.n_states();
    if n > 8 || m.n_inputs() > 4 {
        return Err(VerifyError::TooLarge {
            states: n,
            inputs: m.n_inputs(),
        });
    }
    let vm = variation_matrix(m);
    let n_in = m.n_inputs();

    // candidate classes: non-empty, pairwise compatible, non-empty outputs
    let mut cands: Vec<u16> = Vec::new();
    let mut cand_succ: Vec<Vec<u16>> = Vec::new();
    'subset: for mask in 1u16..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&q| mask >> q & 1 == 1).collect();
        for (ai, &a) in members.iter().enumerate() {
            for &b in &members[ai + 1..] {
                if vm.get(a, b) {
                    continue 'subset;
                }
            }
        }
        let mut succs = Vec::with_capacity(n_in);
        for i in 0..n_in {
            let mut o = ValuationSet::top(m.outputs().arity());
            let mut s = 0u16;
            for &q in &members {
                o = o.intersect(&m.lambda_unchecked(q, i))?;
                if let Some(t) = m.delta(q, i) {
                    s |= 1 << t;
                }
            }
            if o.is_empty() {
                continue 'subset;
            }
            succs.push(s);
        }
        cands.push(mask);
        cand_succ.push(succs);
    }

    let all = (1u16 << n) - 1;
    // first closure violation: a successor set no chosen class contains
    let violation = |chosen: &[usize]| -> Option<u16> {
        for &c in chosen {
            for s in &cand_succ[c] {
                if *s != 0 && !chosen.iter().any(|&c2| cands[c2] & s == *s) {
                    return Some(*s);
                }
            }
        }
        None
    };

    fn search(
        chosen: &mut Vec<usize>,
        limit: usize,
        cands: &[u16],
        all: u16,
        violation: &dyn Fn(&[usize]) -> Option<u16>,
    ) -> bool {
        let covered = chosen.iter().fold(0u16, |acc, &c| acc | cands[c]);
        if covered == all {
            match violation(chosen) {
                None => return true,
                Some(s) => {
                    if chosen.len() == limit {
                        return false;
                    }
                    for c in 0..cands.len() {
                        if cands[c] & s == s && !chosen.contains(&c) {
                            chosen.push(c);
                            if search(chosen, limit, cands, all, violation) {
                                return true;
                            }
                            chosen.pop();
                        }
                    }
                    return false;
                }
            }
        }
        if chosen.len() == limit {
            return false;
        }
        let u = (!covered & all).trailing_zeros() as u16;
        for c in 0..cands.len() {
            if cands[c] >> u & 1 == 1 {
                chosen.push(c);
                if search(chosen, limit, cands, all, violation) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }

    for limit in 1..=cap.min(n) {
        if search(&mut Vec::new(), limit, &cands, all, &violation) {
            return Ok(limit);
        }
    }
    Ok(n)
}

/// Deterministic random machine: each entry defined with probability
/// `density`, each output valuation included with probability `output_bias`
/// (forced non-empty), initial state 0.
pub fn random_igmm(
    seed: u64,
    n_states: usize,
    n_in_props: usize,
    n_out_props: usize,
    density: f64,
    output_bias: f64,
) -> Result<Igmm, VerifyError> {
    if n_states == 0 {
        return Err(VerifyError::BadParameter("need at least one state".into()));
    }
    for (name, p) in [("density", density), ("output_bias", output_bias)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(VerifyError::BadParameter(format!(
                "{name} must be within [0, 1], got {p}"
            )));
        }
    }
    let inputs = PropSet::numbered("i", n_in_props, crate::boolset::DEFAULT_MAX_PROPS)?;
    let outputs = PropSet::numbered("o", n_out_props, crate::boolset::DEFAULT_MAX_PROPS)?;
    let n_in = inputs.n_valuations();
    let n_out = outputs.n_valuations();
    let out_arity = outputs.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Igmm::builder(inputs, outputs, n_states);
    for q in 0..n_states {
        for i in 0..n_in {
            if !rng.gen_bool(density) {
                continue;
            }
            let target = rng.gen_range(0..n_states);
            let mut out = ValuationSet::empty(out_arity);
            for v in 0..n_out {
                if rng.gen_bool(output_bias) {
                    out.insert(Valuation(v as u32));
                }
            }
            if out.is_empty() {
                out.insert(Valuation(rng.gen_range(0..n_out) as u32));
            }
            b = b.entry(q, i, target, out);
        }
    }
    Ok(b.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::satmin::{build_machine, ClassSystem};

    fn fig1_minimal() -> Igmm {
        let src = fixtures::fig1();
        Igmm::builder(src.inputs().clone(), src.outputs().clone(), 1)
            .entry(0, 0b11, 0, ValuationSet::from_indices(2, &[1]))
            .entry(0, 0b01, 0, ValuationSet::from_indices(2, &[2]))
            .entry(0, 0b00, 0, ValuationSet::from_indices(2, &[0]))
            .build()
            .unwrap()
    }

    fn fig2_minimal() -> Igmm {
        let cs = ClassSystem {
            members: vec![vec![0], vec![1, 3, 6], vec![2, 4, 5]],
        };
        build_machine(&fixtures::fig2(), &cs).unwrap()
    }

    #[test]
    fn minimal_machines_specialize_their_sources() {
        assert!(check_specialization(&fig1_minimal(), &fixtures::fig1())
            .unwrap()
            .holds());
        assert!(check_specialization(&fig2_minimal(), &fixtures::fig2())
            .unwrap()
            .holds());
    }

    #[test]
    fn reflexive_on_fixtures() {
        for m in [fixtures::fig1(), fixtures::fig2(), fixtures::gadget()] {
            assert!(check_specialization(&m, &m).unwrap().holds());
        }
    }

    #[test]
    fn single_step_output_violation() {
        // change the āb̄ output of the minimal machine to xy
        let src = fixtures::fig1();
        let bad = Igmm::builder(src.inputs().clone(), src.outputs().clone(), 1)
            .entry(0, 0b11, 0, ValuationSet::from_indices(2, &[1]))
            .entry(0, 0b01, 0, ValuationSet::from_indices(2, &[2]))
            .entry(0, 0b00, 0, ValuationSet::from_indices(2, &[3]))
            .build()
            .unwrap();
        match check_specialization(&bad, &fixtures::fig1()).unwrap() {
            SpecCheck::Fails(ce) => {
                assert_eq!(ce.word, vec![0]);
                assert_eq!(ce.output, Some(3));
            }
            SpecCheck::Holds => panic!("perturbed machine should fail"),
        }
    }

    #[test]
    fn reverse_direction_fails_with_trace() {
        match check_specialization(&fixtures::fig2(), &fig2_minimal()).unwrap() {
            SpecCheck::Fails(ce) => {
                // ā reaches state 2, whose a-output grew from z to ⊤
                assert_eq!(ce.word, vec![0, 1]);
                assert!(ce.output.is_some());
            }
            SpecCheck::Holds => panic!("source must not specialize its minimization"),
        }
    }

    #[test]
    fn counterexample_description_is_readable() {
        let ce = Counterexample {
            word: vec![0, 1],
            output: Some(0),
        };
        let m = fixtures::fig2();
        let text = ce.describe(m.inputs(), m.outputs());
        assert!(text.contains("[0 1]"));
        assert!(text.contains("000"));
    }

    #[test]
    fn sink_completion_is_mutual_specialization() {
        let m = fixtures::fig1();
        let (mc, _) = m.complete_with_sink();
        assert!(check_specialization(&m, &mc).unwrap().holds());
        assert!(check_specialization(&mc, &m).unwrap().holds());
    }

    #[test]
    fn proposition_mismatch_is_an_error() {
        assert_eq!(
            check_specialization(&fixtures::fig1(), &fixtures::fig2()).unwrap_err(),
            VerifyError::PropositionMismatch
        );
        assert_eq!(
            check_bisimilar(&fixtures::fig1(), &fixtures::fig2()).unwrap_err(),
            VerifyError::PropositionMismatch
        );
    }

    #[test]
    fn bisimilarity_checks() {
        let m = fixtures::fig2();
        let q = crate::reduce::bisim_quotient(&m);
        assert!(check_bisimilar(&q, &m).unwrap());
        assert!(check_bisimilar(&m, &m).unwrap());
        assert!(!check_bisimilar(&fig2_minimal(), &m).unwrap());
    }

    #[test]
    fn brute_force_on_fixtures() {
        assert_eq!(brute_force_min_size(&fixtures::fig1(), 3).unwrap(), 1);
        assert_eq!(brute_force_min_size(&fixtures::fig2(), 7).unwrap(), 3);
        assert_eq!(brute_force_min_size(&fixtures::gadget(), 3).unwrap(), 2);
    }

    #[test]
    fn brute_force_guard() {
        let m = random_igmm(0, 9, 1, 1, 1.0, 0.5).unwrap();
        assert!(matches!(
            brute_force_min_size(&m, 9),
            Err(VerifyError::TooLarge { .. })
        ));
    }

    #[test]
    fn generator_is_deterministic() {
        let a = random_igmm(7, 5, 2, 2, 0.5, 0.6).unwrap();
        let b = random_igmm(7, 5, 2, 2, 0.5, 0.6).unwrap();
        assert_eq!(a, b);
        let c = random_igmm(8, 5, 2, 2, 0.5, 0.6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_density_extremes() {
        let full = random_igmm(1, 4, 2, 1, 1.0, 0.5).unwrap();
        assert!(full.is_input_complete());
        let empty = random_igmm(1, 4, 2, 1, 0.0, 0.5).unwrap();
        assert_eq!(empty.stats().n_defined_transitions, 0);
        assert_eq!(brute_force_min_size(&empty, 4).unwrap(), 1);
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        assert!(random_igmm(0, 0, 1, 1, 0.5, 0.5).is_err());
        assert!(random_igmm(0, 2, 1, 1, 1.5, 0.5).is_err());
        assert!(random_igmm(0, 2, 1, 1, 0.5, -0.1).is_err());
    }
}
