use std::collections::{BTreeMap, BTreeSet, HashSet};

use proptest::prelude::*;
use twa_core::{EdgeId, EqualityFactor, FactorGraph, FactorId, GraphEdit, PriorFactor, VariableId};

/// Abstract edit choices; indices are resolved against the live graph.
#[derive(Debug, Clone)]
enum Op {
    AddVariable,
    AddFactor(Vec<usize>),
    AddEdge(usize, usize),
    RemoveEdge(usize),
    RemoveFactor(usize),
    Reparameterize(usize, bool),
    Stale,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        2 => Just(Op::AddVariable),
        3 => proptest::collection::vec(0usize..64, 1..4).prop_map(Op::AddFactor),
        2 => (0usize..64, 0usize..64).prop_map(|(f, v)| Op::AddEdge(f, v)),
        3 => (0usize..64).prop_map(Op::RemoveEdge),
        2 => (0usize..64).prop_map(Op::RemoveFactor),
        1 => (0usize..64, any::<bool>()).prop_map(|(f, b)| Op::Reparameterize(f, b)),
        1 => Just(Op::Stale),
    ]
}

/// Independent bookkeeping of which edges exist.
#[derive(Default)]
struct Shadow {
    variables: BTreeSet<VariableId>,
    factors: BTreeSet<FactorId>,
    edges: BTreeMap<EdgeId, (FactorId, VariableId)>,
}

impl Shadow {
    fn degree(&self, v: VariableId) -> usize {
        self.edges.values().filter(|(_, x)| *x == v).count()
    }
}

fn pick<T: Copy>(items: &[T], i: usize) -> Option<T> {
    (!items.is_empty()).then(|| items[i % items.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_edit_sequences_keep_graph_valid(batches in proptest::collection::vec(proptest::collection::vec(op(), 1..6), 1..8)) {
        let mut g = FactorGraph::new();
        let mut shadow = Shadow::default();
        let mut ever_seen_v: HashSet<VariableId> = HashSet::new();
        let mut ever_seen_f: HashSet<FactorId> = HashSet::new();
        let mut ever_seen_e: HashSet<EdgeId> = HashSet::new();
        let mut removed_f: Vec<FactorId> = Vec::new();
        let mut had_edge: HashSet<VariableId> = HashSet::new();
        for _ in 0..3 {
            let v = g.add_variable(0.0);
            shadow.variables.insert(v);
            ever_seen_v.insert(v);
        }

        for batch in batches {
            let vars: Vec<VariableId> = shadow.variables.iter().copied().collect();
            let factors: Vec<FactorId> = shadow.factors.iter().copied().collect();
            let edges: Vec<EdgeId> = shadow.edges.keys().copied().collect();
            // resolve against the state at batch start, skipping edits that
            // would reference entities removed earlier in the same batch
            let mut dead_f = HashSet::new();
            let mut dead_e = HashSet::new();
            let mut edits = Vec::new();
            let mut expect_error = false;
            for o in batch {
                let edit = match o {
                    Op::AddVariable => GraphEdit::AddVariable { initial: 0.5 },
                    Op::AddFactor(idx) => {
                        let vs: Vec<VariableId> = idx.iter().filter_map(|&i| pick(&vars, i)).collect();
                        if vs.is_empty() { continue; }
                        GraphEdit::AddFactor { factor: Box::new(EqualityFactor), variables: vs }
                    }
                    Op::AddEdge(f, v) => match (pick(&factors, f), pick(&vars, v)) {
                        (Some(f), Some(v)) if !dead_f.contains(&f) => GraphEdit::AddEdge { factor: f, variable: v },
                        _ => continue,
                    },
                    Op::RemoveEdge(e) => match pick(&edges, e) {
                        Some(e) if !dead_e.contains(&e) && !dead_f.contains(&shadow.edges[&e].0) => {
                            dead_e.insert(e);
                            GraphEdit::RemoveEdge(e)
                        }
                        _ => continue,
                    },
                    Op::RemoveFactor(f) => match pick(&factors, f) {
                        Some(f) if !dead_f.contains(&f) => {
                            dead_f.insert(f);
                            GraphEdit::RemoveFactor(f)
                        }
                        _ => continue,
                    },
                    Op::Reparameterize(f, same_kind) => match pick(&factors, f) {
                        Some(f) if !dead_f.contains(&f) => {
                            let params: Box<dyn twa_core::Factor> = if same_kind {
                                Box::new(EqualityFactor)
                            } else {
                                Box::new(PriorFactor { target: 0.0, stiffness: 1.0 })
                            };
                            if !same_kind { expect_error = true; }
                            GraphEdit::Reparameterize { factor: f, params }
                        }
                        _ => continue,
                    },
                    Op::Stale => match removed_f.last() {
                        Some(&f) => { expect_error = true; GraphEdit::RemoveFactor(f) }
                        None => continue,
                    },
                };
                edits.push(edit);
                if expect_error { break; }
            }

            let before_factors = shadow.factors.clone();
            let result = g.apply_edits(edits);
            prop_assert_eq!(result.is_err(), expect_error);
            // rebuild the shadow from the graph only through public ids, then
            // cross-check against independent expectations
            let report = match &result {
                Ok(r) => r.clone(),
                Err(_) => Default::default(),
            };
            let before_vars = shadow.variables.clone();
            let before_edges: BTreeSet<EdgeId> = shadow.edges.keys().copied().collect();
            shadow.variables = g.variables().map(|v| v.id).collect();
            shadow.factors = g.factors().map(|f| f.id).collect();
            shadow.edges = g.edges().map(|(id, e)| (id, (e.factor, e.variable))).collect();
            for f in before_factors.difference(&shadow.factors) { removed_f.push(*f); }

            // ids that appeared in this batch were never handed out before
            for v in shadow.variables.difference(&before_vars) { prop_assert!(ever_seen_v.insert(*v), "variable id reissued"); }
            for f in shadow.factors.difference(&before_factors) { prop_assert!(ever_seen_f.insert(*f), "factor id reissued"); }
            for e in shadow.edges.keys() {
                if !before_edges.contains(e) { prop_assert!(ever_seen_e.insert(*e), "edge id reissued"); }
            }
            for v in &report.created_variables { prop_assert!(shadow.variables.contains(v)); }
            for (_, v) in shadow.edges.values() { had_edge.insert(*v); }

            prop_assert!(g.validate().is_ok(), "{:?}", g.validate());
            for v in &report.pruned_variables {
                prop_assert!(!g.contains_variable(*v));
            }
            for e in &report.pruned_edges {
                prop_assert!(!g.contains_edge(*e));
            }
            // a variable without edges has never had one; losing the last edge prunes it
            for v in &shadow.variables {
                prop_assert!(shadow.degree(*v) > 0 || !had_edge.contains(v));
            }
            let counts = g.counts();
            prop_assert_eq!(counts.variables, shadow.variables.len());
            prop_assert_eq!(counts.factors, shadow.factors.len());
            prop_assert_eq!(counts.edges, shadow.edges.len());
            // every edge appears in its endpoints' adjacency exactly once
            for (id, (f, v)) in &shadow.edges {
                prop_assert_eq!(g.factor(*f).unwrap().edges.iter().filter(|e| *e == id).count(), 1);
                prop_assert_eq!(g.variable(*v).unwrap().edges.iter().filter(|e| *e == id).count(), 1);
            }
        }
    }
}

#[test]
fn removed_ids_stay_dead_after_slot_reuse() {
    let mut g = FactorGraph::new();
    let a = g.add_variable(0.0);
    let f = g.add_factor(Box::new(EqualityFactor), &[a]).unwrap();
    let e = g.factor(f).unwrap().edges[0];
    let report = g.apply_edits([GraphEdit::RemoveFactor(f)]).unwrap();
    assert_eq!(report.pruned_variables, vec![a]);
    let b = g.add_variable(0.0);
    let f2 = g.add_factor(Box::new(EqualityFactor), &[b]).unwrap();
    let e2 = g.factor(f2).unwrap().edges[0];
    assert_ne!(a, b);
    assert_ne!(f, f2);
    assert_ne!(e, e2);
    assert_eq!(a.raw_index(), b.raw_index());
    assert!(!g.contains_variable(a) && !g.contains_factor(f) && !g.contains_edge(e));
    assert!(g.apply_edits([GraphEdit::RemoveEdge(e)]).is_err());
}
