//! State relations: the variation matrix (which state pairs can never share
//! a class), the greedy partial-solution lower bound, the specialization
//! preorder with its condensation graph and representative mapping, and the
//! plain bisimulation partition.

use std::collections::HashMap;

use thiserror::Error;

use crate::machine::Igmm;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelationError {
    #[error("specialization requires an input-complete machine; complete with a sink first")]
    NotInputComplete,
    #[error("relation is not a preorder (reflexivity or transitivity fails)")]
    NotPreorder,
}

/// Symmetric matrix over state pairs: `get(k, l)` is true iff the two states
/// are *not* variations of one another, i.e. they can never share a class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariationMatrix {
    n: usize,
    mat: Vec<bool>,
}

impl VariationMatrix {
    fn new(n: usize) -> Self {
        VariationMatrix {
            n,
            mat: vec![false; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, l: usize) -> bool {
        self.mat[k * self.n + l]
    }

    fn set(&mut self, k: usize, l: usize) -> bool {
        if k == l || self.get(k, l) {
            return false;
        }
        self.mat[k * self.n + l] = true;
        self.mat[l * self.n + k] = true;
        true
    }

    /// Number of states that `q` is not a variation of.
    pub fn non_variation_count(&self, q: usize) -> usize {
        (0..self.n).filter(|&l| self.get(q, l)).count()
    }
}

/// Marks every pair reachable (backwards) from a pair with disjoint outputs
/// under some input: initialize to zero, mark pairs whose outputs are
/// disjoint for some input valuation, then propagate marks to predecessor
/// pairs under the same input until a fixpoint.
pub fn variation_matrix(m: &Igmm) -> VariationMatrix {
    let n = m.n_states();
    let n_in = m.n_inputs();
    let mut vm = VariationMatrix::new(n);

    // Predecessor index per (input, state).
    let mut pred: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); n]; n_in];
    for q in 0..n {
        for i in 0..n_in {
            if let Some(t) = m.delta(q, i) {
                pred[i][t].push(q);
            }
        }
    }

    let mut worklist: Vec<(usize, usize)> = Vec::new();
    for k in 0..n {
        for l in k + 1..n {
            let disjoint = (0..n_in).any(|i| {
                m.lambda_unchecked(k, i)
                    .intersect(&m.lambda_unchecked(l, i))
                    .expect("equal arity")
                    .is_empty()
            });
            if disjoint && vm.set(k, l) {
                worklist.push((k, l));
            }
        }
    }
    while let Some((k, l)) = worklist.pop() {
        for i in 0..n_in {
            for &p in &pred[i][k] {
                for &q in &pred[i][l] {
                    if vm.set(p, q) {
                        worklist.push((p.min(q), p.max(q)));
                    }
                }
            }
        }
    }
    vm
}

/// Greedy independent set in the variation-complement: states are inserted
/// by descending non-variation count (ties: lowest index), skipping any state
/// that is a variation of one already inserted.  The result is pairwise
/// non-variations, so its size is a lower bound on the minimal class count.
pub fn partial_solution(vm: &VariationMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vm.n()).collect();
    order.sort_by_key(|&q| (std::cmp::Reverse(vm.non_variation_count(q)), q));
    let mut sol: Vec<usize> = Vec::new();
    for q in order {
        if sol.iter().all(|&p| vm.get(q, p)) {
            sol.push(q);
        }
    }
    sol.sort_unstable();
    sol
}

/// The specialization preorder: `get(a, b)` is true iff every input/output
/// behavior of `a` is allowed from `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecRelation {
    n: usize,
    rel: Vec<bool>,
}

impl SpecRelation {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `a` specializes `b`.
    pub fn get(&self, a: usize, b: usize) -> bool {
        self.rel[a * self.n + b]
    }

    pub fn is_preorder(&self) -> bool {
        let n = self.n;
        (0..n).all(|a| self.get(a, a))
            && (0..n).all(|a| {
                (0..n).all(|b| {
                    !self.get(a, b) || (0..n).all(|c| !self.get(b, c) || self.get(a, c))
                })
            })
    }
}

/// Greatest fixpoint computation of the specialization preorder on an
/// input-complete machine: start from pointwise output inclusion, then
/// remove pairs whose successors under some input are not related.
pub fn specialization_relation(m: &Igmm) -> Result<SpecRelation, RelationError> {
    if !m.is_input_complete() {
        return Err(RelationError::NotInputComplete);
    }
    let n = m.n_states();
    let n_in = m.n_inputs();
    let mut rel = vec![true; n * n];
    for a in 0..n {
        for b in 0..n {
            let included = (0..n_in).all(|i| {
                m.lambda_unchecked(a, i)
                    .is_subset(&m.lambda_unchecked(b, i))
                    .expect("equal arity")
            });
            rel[a * n + b] = included;
        }
    }
    loop {
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if !rel[a * n + b] {
                    continue;
                }
                let broken = (0..n_in).any(|i| {
                    let ta = m.delta(a, i).expect("input-complete");
                    let tb = m.delta(b, i).expect("input-complete");
                    !rel[ta * n + tb]
                });
                if broken {
                    rel[a * n + b] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(SpecRelation { n, rel });
        }
    }
}

/// Condensation of the specialization preorder.  Nodes partition the states
/// into mutual-specialization classes; an edge `v -> w` means the members of
/// `w` specialize the members of `v`.  Leaves (no outgoing edge) hold the
/// minimal elements of the preorder.
#[derive(Debug, Clone)]
pub struct SpecGraph {
    /// Members of each node, sorted; nodes ordered by smallest member.
    pub nodes: Vec<Vec<usize>>,
    /// Successor node indices (targets contain more-special states).
    pub edges: Vec<Vec<usize>>,
    /// Node index of each state.
    pub node_of: Vec<usize>,
    /// Nodes without outgoing edges.
    pub leaves: Vec<usize>,
}

pub fn spec_graph(rel: &SpecRelation) -> Result<SpecGraph, RelationError> {
    if !rel.is_preorder() {
        return Err(RelationError::NotPreorder);
    }
    let n = rel.n();
    let mut node_of = vec![usize::MAX; n];
    let mut nodes: Vec<Vec<usize>> = Vec::new();
    for q in 0..n {
        if node_of[q] != usize::MAX {
            continue;
        }
        let id = nodes.len();
        let members: Vec<usize> = (q..n)
            .filter(|&p| rel.get(q, p) && rel.get(p, q))
            .collect();
        for &p in &members {
            node_of[p] = id;
        }
        nodes.push(members);
    }
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (v, vm) in nodes.iter().enumerate() {
        for (w, wm) in nodes.iter().enumerate() {
            if v != w && rel.get(wm[0], vm[0]) {
                edges[v].push(w);
            }
        }
    }
    let leaves = (0..nodes.len()).filter(|&v| edges[v].is_empty()).collect();
    Ok(SpecGraph {
        nodes,
        edges,
        node_of,
        leaves,
    })
}

impl SpecGraph {
    /// Leaves reachable from `v` (including `v` itself when it is a leaf),
    /// in node order.
    pub fn reachable_leaves(&self, v: usize) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(u) = stack.pop() {
            for &w in &self.edges[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        self.leaves
            .iter()
            .copied()
            .filter(|&l| seen[l])
            .collect()
    }
}

/// Controls the representative choice where the default tie-breaking rule
/// (lowest smallest-member leaf, then smallest member) is not wanted.
#[derive(Debug, Clone, Default)]
pub struct RepresentativeChoice {
    /// Explicit `(state, representative)` pins; the representative must be a
    /// member of a leaf reachable from the state's node.
    pub pins: Vec<(usize, usize)>,
    /// States never chosen as representative of another state unless every
    /// reachable leaf consists of such states only.
    pub avoid: Vec<usize>,
}

/// Maps each state to a member of a leaf reachable from its node; states in
/// a leaf map to the leaf's smallest member, merging mutual specializations.
pub fn representatives(g: &SpecGraph) -> Vec<usize> {
    representatives_with(g, &RepresentativeChoice::default())
}

pub fn representatives_with(g: &SpecGraph, choice: &RepresentativeChoice) -> Vec<usize> {
    let pins: HashMap<usize, usize> = choice.pins.iter().copied().collect();
    let n = g.node_of.len();
    let mut r = Vec::with_capacity(n);
    for q in 0..n {
        let v = g.node_of[q];
        if g.edges[v].is_empty() {
            // inside a leaf: collapse mutual specializations onto the
            // smallest non-avoided member
            if let Some(&rep) = pins.get(&q) {
                r.push(rep);
            } else {
                let members = &g.nodes[v];
                r.push(
                    members
                        .iter()
                        .copied()
                        .filter(|s| !choice.avoid.contains(s))
                        .min()
                        .unwrap_or(members[0]),
                );
            }
            continue;
        }
        let leaves = g.reachable_leaves(v);
        debug_assert!(!leaves.is_empty(), "condensation graphs always reach a leaf");
        if let Some(&rep) = pins.get(&q) {
            debug_assert!(
                leaves.iter().any(|&l| g.nodes[l].contains(&rep)),
                "pinned representative {rep} is not in a reachable leaf of state {q}"
            );
            r.push(rep);
            continue;
        }
        let pick = |skip_avoided: bool| -> Option<usize> {
            leaves
                .iter()
                .flat_map(|&l| g.nodes[l].iter().copied())
                .filter(|s| !skip_avoided || !choice.avoid.contains(s))
                .min()
        };
        r.push(pick(true).or_else(|| pick(false)).unwrap());
    }
    r
}

/// Coarsest partition where blockmates have identical output sets and
/// blockwise-equal successors for every input; undefined transitions count
/// as a distinct successor class.  Blocks are sorted by smallest member.
pub fn bisimulation_partition(m: &Igmm) -> Vec<Vec<usize>> {
    let n = m.n_states();
    let n_in = m.n_inputs();

    // Initial split on the full output/definedness row.
    let mut block_of = vec![0usize; n];
    {
        let mut key_to_block: HashMap<Vec<_>, usize> = HashMap::new();
        for q in 0..n {
            let key: Vec<_> = (0..n_in)
                .map(|i| (m.lambda_unchecked(q, i), m.delta(q, i).is_some()))
                .collect();
            let next = key_to_block.len();
            block_of[q] = *key_to_block.entry(key).or_insert(next);
        }
    }
    loop {
        let mut key_to_block: HashMap<(usize, Vec<Option<usize>>), usize> = HashMap::new();
        let mut next_of = vec![0usize; n];
        for q in 0..n {
            let key: Vec<Option<usize>> =
                (0..n_in).map(|i| m.delta(q, i).map(|t| block_of[t])).collect();
            let next = key_to_block.len();
            next_of[q] = *key_to_block.entry((block_of[q], key)).or_insert(next);
        }
        if next_of == block_of {
            break;
        }
        block_of = next_of;
    }

    let n_blocks = block_of.iter().max().map_or(0, |&b| b + 1);
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
    for q in 0..n {
        blocks[block_of[q]].push(q);
    }
    blocks.sort_by_key(|b| b[0]);
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn variation_matrix_on_reference_machine() {
        let m = fixtures::fig2();
        let vm = variation_matrix(&m);
        // outputs of 0 and 2 on ā are disjoint
        assert!(vm.get(0, 2));
        // 1, 3 and 6 are pairwise variations
        for &(a, b) in &[(1, 3), (1, 6), (3, 6)] {
            assert!(!vm.get(a, b), "({a}, {b}) should be variations");
        }
        // (1, 2) only becomes a non-variation by propagation from (3, 5)
        assert!(vm.get(3, 5));
        assert!(vm.get(1, 2));
        // diagonal stays false
        for q in 0..m.n_states() {
            assert!(!vm.get(q, q));
        }
    }

    #[test]
    fn partial_solution_on_reference_machine() {
        let m = fixtures::fig2();
        let vm = variation_matrix(&m);
        let p = partial_solution(&vm);
        assert_eq!(p.len(), 3);
        for (ai, &a) in p.iter().enumerate() {
            for &b in &p[ai + 1..] {
                assert!(vm.get(a, b), "partial solution must be pairwise non-variations");
            }
        }
        // one member from each variation class of the minimal solution
        let classes = [vec![0], vec![1, 3, 6], vec![2, 4, 5]];
        for class in &classes {
            assert_eq!(p.iter().filter(|q| class.contains(q)).count(), 1);
        }
    }

    #[test]
    fn partial_solution_degenerate_cases() {
        // all pairwise variations -> singleton
        let mut vm = VariationMatrix::new(3);
        assert_eq!(partial_solution(&vm), vec![0]);
        // no variations at all -> all states
        for k in 0..3 {
            for l in k + 1..3 {
                vm.set(k, l);
            }
        }
        assert_eq!(partial_solution(&vm), vec![0, 1, 2]);
    }

    #[test]
    fn specialization_requires_completeness() {
        let m = fixtures::fig1();
        assert_eq!(
            specialization_relation(&m).unwrap_err(),
            RelationError::NotInputComplete
        );
    }

    #[test]
    fn specialization_on_reference_machine() {
        let m = fixtures::fig2();
        let rel = specialization_relation(&m).unwrap();
        assert!(rel.is_preorder());
        for q in 0..m.n_states() {
            assert!(rel.get(q, q));
        }
        assert!(rel.get(1, 3));
        assert!(!rel.get(3, 1));
        assert!(rel.get(4, 6) && rel.get(6, 4));
        assert!(rel.get(0, 3));
        // everything specializes the all-allowing loop states
        for q in 0..m.n_states() {
            assert!(rel.get(q, 4) && rel.get(q, 6));
        }
    }

    #[test]
    fn spec_graph_on_reference_machine() {
        let m = fixtures::fig2();
        let g = spec_graph(&specialization_relation(&m).unwrap()).unwrap();
        assert_eq!(
            g.nodes,
            vec![vec![0], vec![1], vec![2], vec![3], vec![4, 6], vec![5]]
        );
        let leaf_members: Vec<_> = g.leaves.iter().map(|&l| g.nodes[l].clone()).collect();
        assert_eq!(leaf_members, vec![vec![0], vec![1], vec![2], vec![5]]);
        // {4, 6} reaches every leaf, {3} reaches {0} and {1}
        let node46 = g.node_of[4];
        assert_eq!(g.reachable_leaves(node46).len(), 4);
        let node3 = g.node_of[3];
        let from3: Vec<_> = g
            .reachable_leaves(node3)
            .iter()
            .map(|&l| g.nodes[l][0])
            .collect();
        assert_eq!(from3, vec![0, 1]);
    }

    #[test]
    fn representatives_default_rule() {
        let m = fixtures::fig2();
        let g = spec_graph(&specialization_relation(&m).unwrap()).unwrap();
        // default rule prefers the leaf with the lowest member, here {0}
        assert_eq!(representatives(&g), vec![0, 1, 2, 0, 0, 5, 0]);
    }

    #[test]
    fn representatives_pinned_mapping() {
        let m = fixtures::fig2();
        let g = spec_graph(&specialization_relation(&m).unwrap()).unwrap();
        let choice = RepresentativeChoice {
            pins: vec![(3, 1), (4, 1), (6, 1)],
            avoid: vec![],
        };
        assert_eq!(
            representatives_with(&g, &choice),
            vec![0, 1, 2, 1, 1, 5, 1]
        );
    }

    #[test]
    fn bisimulation_partition_on_reference_machine() {
        let m = fixtures::fig2();
        let blocks = bisimulation_partition(&m);
        assert_eq!(blocks.len(), 6);
        assert!(blocks.contains(&vec![4, 6]));
    }

    #[test]
    fn bisimulation_blocks_refine_spec_nodes() {
        let m = fixtures::fig2();
        let g = spec_graph(&specialization_relation(&m).unwrap()).unwrap();
        for block in bisimulation_partition(&m) {
            let node = g.node_of[block[0]];
            assert!(block.iter().all(|&q| g.node_of[q] == node));
        }
    }

    #[test]
    fn bisimulation_merges_identical_copies() {
        let m = crate::format::parse_xkiss(
            ".i 1\n.o 1\n.r a\n1 a b 1\n0 a c 1\n1 b b 0\n1 c c 0\n",
        )
        .unwrap();
        let blocks = bisimulation_partition(&m);
        // b and c are identical (same outputs, same shape)
        assert_eq!(blocks.len(), 2);
    }
}
