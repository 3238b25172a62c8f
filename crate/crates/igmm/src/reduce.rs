//! Polynomial-time reductions: the bisimulation quotient and the
//! specialization-based output-assignment reduction, which remaps every
//! state to a representative that specializes it and redirects transitions
//! accordingly.  The result is always a specialization of the input and
//! never larger than the bisimulation quotient.

use crate::machine::Igmm;
use crate::relations::{
    bisimulation_partition, representatives_with, spec_graph, specialization_relation,
    RepresentativeChoice,
};

/// One state per bisimulation block; transition and output functions lifted
/// blockwise, undefined entries stay undefined.
pub fn bisim_quotient(m: &Igmm) -> Igmm {
    let blocks = bisimulation_partition(m);
    let mut block_of = vec![0usize; m.n_states()];
    for (b, block) in blocks.iter().enumerate() {
        for &q in block {
            block_of[q] = b;
        }
    }
    let mut b = Igmm::builder(m.inputs().clone(), m.outputs().clone(), blocks.len())
        .init(block_of[m.init()])
        .names(
            blocks
                .iter()
                .map(|block| m.state_name(block[0]).to_string())
                .collect(),
        );
    for (bi, block) in blocks.iter().enumerate() {
        let rep = block[0];
        for i in 0..m.n_inputs() {
            if let Some(e) = m.entry(rep, i) {
                b = b.entry(bi, i, block_of[e.target], e.out.clone());
            }
        }
    }
    b.build().expect("quotient of a valid machine is valid")
}

/// Output-assignment reduction with the default representative rule.
pub fn reduce_with_output_assignment(m: &Igmm) -> Igmm {
    reduce_with_output_assignment_pinned(m, &[])
}

/// Output-assignment reduction with explicit `(state, representative)` pins
/// for the representative choice.
///
/// The machine is sink-completed for the specialization computation; the
/// sink is avoided as a representative unless forced and dropped again when
/// unreachable.  Surviving states keep their original output sets and
/// partiality; only transition targets are remapped.
pub fn reduce_with_output_assignment_pinned(m: &Igmm, pins: &[(usize, usize)]) -> Igmm {
    let (mc, sink) = m.complete_with_sink();
    let rel = specialization_relation(&mc).expect("machine was just completed");
    let g = spec_graph(&rel).expect("specialization is a preorder");
    let choice = RepresentativeChoice {
        pins: pins.to_vec(),
        avoid: sink.into_iter().collect(),
    };
    let r = representatives_with(&g, &choice);

    let n_orig = m.n_states();
    let mut survivors: Vec<usize> = (0..n_orig).map(|q| r[q]).collect();
    survivors.sort_unstable();
    survivors.dedup();
    let mut new_index = vec![None; mc.n_states()];
    for (ni, &s) in survivors.iter().enumerate() {
        new_index[s] = Some(ni);
    }

    let mut b = Igmm::builder(m.inputs().clone(), m.outputs().clone(), survivors.len())
        .init(new_index[r[m.init()]].expect("image of init survives"))
        .names(
            survivors
                .iter()
                .map(|&s| mc.state_name(s).to_string())
                .collect(),
        );
    for (ni, &s) in survivors.iter().enumerate() {
        if Some(s) == sink {
            // a forced sink keeps no defined transitions: it allows anything
            continue;
        }
        for i in 0..m.n_inputs() {
            if let Some(e) = m.entry(s, i) {
                let t = new_index[r[e.target]].expect("image of a target survives");
                b = b.entry(ni, i, t, e.out.clone());
            }
        }
    }
    let reduced = b.build().expect("remapped machine is valid");
    reduced.reachable_prune().0
}
