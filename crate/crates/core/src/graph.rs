//! Factor-graph data model and the edit operations global reasoners use to
//! reshape it between iterations.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::arena::{Arena, Key};
use crate::factor::Factor;
use crate::weight::WeightClass;

macro_rules! node_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub(crate) Key);

        impl $name {
            /// Slot index; stable for the lifetime of the entity but may be
            /// shared with entities removed earlier.
            pub fn raw_index(self) -> u32 {
                self.0.index
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{:?}"), self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Debug::fmt(self, f)
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
    };
}

node_id!(VariableId, "v");
node_id!(FactorId, "f");
node_id!(EdgeId, "e");

/// Message state carried by one factor–variable edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeState {
    pub factor: FactorId,
    pub variable: VariableId,
    /// Variable → factor message (`n`).
    pub msg_to_factor: f64,
    /// Factor → variable message (`m`): local assignment plus accumulated error.
    pub msg_to_variable: f64,
    /// The factor's most recent local assignment for this edge (`x`).
    pub local: f64,
    pub weight_to_factor: WeightClass,
    pub weight_to_variable: WeightClass,
    /// Accumulated disagreement between local assignments and the concurred value (`u`).
    pub error_accum: f64,
    pub prev_msg_to_factor: f64,
}

impl EdgeState {
    fn fresh(factor: FactorId, variable: VariableId, z: f64) -> Self {
        EdgeState {
            factor,
            variable,
            msg_to_factor: z,
            msg_to_variable: z,
            local: z,
            weight_to_factor: WeightClass::STANDARD,
            weight_to_variable: WeightClass::STANDARD,
            error_accum: 0.0,
            prev_msg_to_factor: z,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariableNode {
    pub id: VariableId,
    /// Concurred value `z`, or the initial value before the first concur.
    pub concurred: f64,
    /// Weight the variable attached to its outgoing messages at the last concur.
    pub weight: WeightClass,
    pub edges: Vec<EdgeId>,
}

#[derive(Debug)]
pub struct FactorNode {
    pub id: FactorId,
    pub factor: Box<dyn Factor>,
    pub edges: Vec<EdgeId>,
}

impl FactorNode {
    pub fn kind(&self) -> &'static str {
        self.factor.kind()
    }
}

/// One structural change. Edits are queued during an iteration and applied
/// in order at the iteration boundary.
#[derive(Debug)]
pub enum GraphEdit {
    AddVariable {
        initial: f64,
    },
    AddFactor {
        factor: Box<dyn Factor>,
        variables: Vec<VariableId>,
    },
    AddEdge {
        factor: FactorId,
        variable: VariableId,
    },
    RemoveEdge(EdgeId),
    RemoveFactor(FactorId),
    Reparameterize {
        factor: FactorId,
        params: Box<dyn Factor>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EditReport {
    pub applied: usize,
    /// Variables removed because their last edge went away.
    pub pruned_variables: Vec<VariableId>,
    /// Every edge removed by the batch, explicitly or via factor removal.
    pub pruned_edges: Vec<EdgeId>,
    pub created_variables: Vec<VariableId>,
    pub created_factors: Vec<FactorId>,
    pub created_edges: Vec<EdgeId>,
}

impl EditReport {
    pub fn is_empty(&self) -> bool {
        self.applied == 0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown variable {0}")]
    UnknownVariable(VariableId),
    #[error("unknown factor {0}")]
    UnknownFactor(FactorId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("cannot re-parameterize a `{expected}` factor with `{found}` parameters")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid `{kind}` parameters: {reason}")]
    InvalidParams { kind: &'static str, reason: String },
    #[error("no concur phase has run yet")]
    NotYetConcurred,
    #[error("edit {index} failed: {source}")]
    Edit {
        index: usize,
        #[source]
        source: Box<GraphError>,
    },
}

/// Live entity counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GraphCounts {
    pub variables: usize,
    pub factors: usize,
    pub edges: usize,
}

/// Bipartite graph of variables and factors joined by stateful edges.
#[derive(Debug, Default)]
pub struct FactorGraph {
    pub(crate) variables: Arena<VariableNode>,
    pub(crate) factors: Arena<FactorNode>,
    pub(crate) edges: Arena<EdgeState>,
    revision: u64,
    concurred: bool,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bumped on every structural change or re-parameterization.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn has_concurred(&self) -> bool {
        self.concurred
    }

    pub(crate) fn mark_concurred(&mut self) {
        self.concurred = true;
    }

    pub fn counts(&self) -> GraphCounts {
        GraphCounts {
            variables: self.variables.len(),
            factors: self.factors.len(),
            edges: self.edges.len(),
        }
    }

    pub fn add_variable(&mut self, initial: f64) -> VariableId {
        self.revision += 1;
        VariableId(self.variables.insert_with(|key| VariableNode {
            id: VariableId(key),
            concurred: initial,
            weight: WeightClass::Zero,
            edges: Vec::new(),
        }))
    }

    pub fn add_factor(&mut self, factor: Box<dyn Factor>, variables: &[VariableId]) -> Result<FactorId, GraphError> {
        for &v in variables {
            if !self.variables.contains(v.0) {
                return Err(GraphError::UnknownVariable(v));
            }
        }
        factor.validate().map_err(|reason| GraphError::InvalidParams {
            kind: factor.kind(),
            reason,
        })?;
        self.revision += 1;
        let id = FactorId(self.factors.insert_with(|key| FactorNode {
            id: FactorId(key),
            factor,
            edges: Vec::with_capacity(variables.len()),
        }));
        for &v in variables {
            self.connect(id, v);
        }
        Ok(id)
    }

    pub fn add_edge(&mut self, factor: FactorId, variable: VariableId) -> Result<EdgeId, GraphError> {
        if !self.factors.contains(factor.0) {
            return Err(GraphError::UnknownFactor(factor));
        }
        if !self.variables.contains(variable.0) {
            return Err(GraphError::UnknownVariable(variable));
        }
        self.revision += 1;
        Ok(self.connect(factor, variable))
    }

    fn connect(&mut self, factor: FactorId, variable: VariableId) -> EdgeId {
        let z = self.variables.get(variable.0).map_or(0.0, |v| v.concurred);
        let edge = EdgeId(self.edges.insert_with(|_| EdgeState::fresh(factor, variable, z)));
        self.factors
            .get_mut(factor.0)
            .expect("factor checked by caller")
            .edges
            .push(edge);
        self.variables
            .get_mut(variable.0)
            .expect("variable checked by caller")
            .edges
            .push(edge);
        edge
    }

    fn disconnect(&mut self, edge: EdgeId, touched: &mut Vec<VariableId>) -> Result<(), GraphError> {
        let state = self.edges.remove(edge.0).ok_or(GraphError::UnknownEdge(edge))?;
        if let Some(f) = self.factors.get_mut(state.factor.0) {
            f.edges.retain(|&e| e != edge);
        }
        if let Some(v) = self.variables.get_mut(state.variable.0) {
            v.edges.retain(|&e| e != edge);
            touched.push(state.variable);
        }
        self.revision += 1;
        Ok(())
    }

    /// Applies `edits` in order. Variables that lose their last edge during the
    /// batch are pruned once the batch completes. Stops at the first failing
    /// edit; earlier edits stay applied and pruning still runs.
    pub fn apply_edits(&mut self, edits: impl IntoIterator<Item = GraphEdit>) -> Result<EditReport, GraphError> {
        let mut report = EditReport::default();
        let mut touched = Vec::new();
        let mut failure = None;
        for (index, edit) in edits.into_iter().enumerate() {
            if let Err(e) = self.apply_one(edit, &mut report, &mut touched) {
                failure = Some(GraphError::Edit {
                    index,
                    source: Box::new(e),
                });
                break;
            }
            report.applied += 1;
        }
        let mut seen = HashSet::new();
        for v in touched {
            if !seen.insert(v) {
                continue;
            }
            let orphan = self.variables.get(v.0).is_some_and(|n| n.edges.is_empty());
            if orphan {
                self.variables.remove(v.0);
                self.revision += 1;
                report.pruned_variables.push(v);
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(report),
        }
    }

    fn apply_one(
        &mut self,
        edit: GraphEdit,
        report: &mut EditReport,
        touched: &mut Vec<VariableId>,
    ) -> Result<(), GraphError> {
        match edit {
            GraphEdit::AddVariable { initial } => {
                report.created_variables.push(self.add_variable(initial));
            }
            GraphEdit::AddFactor { factor, variables } => {
                let id = self.add_factor(factor, &variables)?;
                report.created_factors.push(id);
                report
                    .created_edges
                    .extend(self.factors.get(id.0).expect("just added").edges.iter().copied());
            }
            GraphEdit::AddEdge { factor, variable } => {
                report.created_edges.push(self.add_edge(factor, variable)?);
            }
            GraphEdit::RemoveEdge(edge) => {
                self.disconnect(edge, touched)?;
                report.pruned_edges.push(edge);
            }
            GraphEdit::RemoveFactor(factor) => {
                let node = self.factors.get(factor.0).ok_or(GraphError::UnknownFactor(factor))?;
                let edges = node.edges.clone();
                for e in edges {
                    self.disconnect(e, touched)?;
                    report.pruned_edges.push(e);
                }
                self.factors.remove(factor.0);
                self.revision += 1;
            }
            GraphEdit::Reparameterize { factor, params } => {
                let node = self
                    .factors
                    .get_mut(factor.0)
                    .ok_or(GraphError::UnknownFactor(factor))?;
                if node.factor.kind() != params.kind() {
                    return Err(GraphError::KindMismatch {
                        expected: node.factor.kind(),
                        found: params.kind(),
                    });
                }
                params.validate().map_err(|reason| GraphError::InvalidParams {
                    kind: params.kind(),
                    reason,
                })?;
                node.factor = params;
                self.revision += 1;
            }
        }
        Ok(())
    }

    pub fn variable(&self, id: VariableId) -> Option<&VariableNode> {
        self.variables.get(id.0)
    }

    pub fn factor(&self, id: FactorId) -> Option<&FactorNode> {
        self.factors.get(id.0)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&EdgeState> {
        self.edges.get(id.0)
    }

    pub fn contains_variable(&self, id: VariableId) -> bool {
        self.variables.contains(id.0)
    }

    pub fn contains_factor(&self, id: FactorId) -> bool {
        self.factors.contains(id.0)
    }

    pub fn contains_edge(&self, id: EdgeId) -> bool {
        self.edges.contains(id.0)
    }

    pub fn variables(&self) -> impl Iterator<Item = &VariableNode> + '_ {
        self.variables.iter().map(|(_, v)| v)
    }

    pub fn factors(&self) -> impl Iterator<Item = &FactorNode> + '_ {
        self.factors.iter().map(|(_, f)| f)
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &EdgeState)> + '_ {
        self.edges.iter().map(|(k, e)| (EdgeId(k), e))
    }

    /// Current concurred value, or the initial value before any concur.
    pub fn value(&self, id: VariableId) -> Option<f64> {
        self.variables.get(id.0).map(|v| v.concurred)
    }

    /// Concurred values of every live variable.
    pub fn snapshot(&self) -> Result<BTreeMap<VariableId, f64>, GraphError> {
        if !self.concurred {
            return Err(GraphError::NotYetConcurred);
        }
        Ok(self.variables().map(|v| (v.id, v.concurred)).collect())
    }

    /// Hard-constraint factors whose constraint fails on the concurred values.
    pub fn unsatisfied_factors(&self, tolerance: f64) -> Vec<FactorId> {
        let mut values = Vec::new();
        self.factors()
            .filter(|node| {
                values.clear();
                values.extend(node.edges.iter().map(|&e| {
                    let edge = self.edges.get(e.0).expect("validated graph");
                    self.variables.get(edge.variable.0).map_or(f64::NAN, |v| v.concurred)
                }));
                !node.factor.is_satisfied(&values, tolerance)
            })
            .map(|node| node.id)
            .collect()
    }

    /// Full walk checking bipartiteness and referential integrity.
    pub fn validate(&self) -> Result<(), String> {
        for (key, edge) in self.edges.iter() {
            let id = EdgeId(key);
            let f = self
                .factors
                .get(edge.factor.0)
                .ok_or_else(|| format!("{id} references missing factor {}", edge.factor))?;
            let v = self
                .variables
                .get(edge.variable.0)
                .ok_or_else(|| format!("{id} references missing variable {}", edge.variable))?;
            if f.edges.iter().filter(|&&e| e == id).count() != 1 {
                return Err(format!("{id} not listed exactly once by {}", edge.factor));
            }
            if v.edges.iter().filter(|&&e| e == id).count() != 1 {
                return Err(format!("{id} not listed exactly once by {}", edge.variable));
            }
            if !edge.error_accum.is_finite() {
                return Err(format!("{id} has non-finite error term"));
            }
            if !edge.weight_to_factor.is_valid() || !edge.weight_to_variable.is_valid() {
                return Err(format!("{id} carries an invalid weight"));
            }
        }
        for (key, f) in self.factors.iter() {
            if f.id.0 != key {
                return Err(format!("factor slot {key:?} holds id {}", f.id));
            }
            for &e in &f.edges {
                let edge = self
                    .edges
                    .get(e.0)
                    .ok_or_else(|| format!("{} lists dangling {e}", f.id))?;
                if edge.factor != f.id {
                    return Err(format!("{} lists {e} owned by {}", f.id, edge.factor));
                }
            }
        }
        for (key, v) in self.variables.iter() {
            if v.id.0 != key {
                return Err(format!("variable slot {key:?} holds id {}", v.id));
            }
            for &e in &v.edges {
                let edge = self
                    .edges
                    .get(e.0)
                    .ok_or_else(|| format!("{} lists dangling {e}", v.id))?;
                if edge.variable != v.id {
                    return Err(format!("{} lists {e} owned by {}", v.id, edge.variable));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{ConstantFactor, EqualityFactor};

    fn pin(v: f64) -> Box<dyn Factor> {
        Box::new(ConstantFactor::pin(v))
    }

    #[test]
    fn empty_batch_is_identity() {
        let mut g = FactorGraph::new();
        let v = g.add_variable(0.0);
        g.add_factor(pin(1.0), &[v]).unwrap();
        let before = g.counts();
        let report = g.apply_edits(Vec::new()).unwrap();
        assert_eq!(report, EditReport::default());
        assert_eq!(g.counts(), before);
    }

    #[test]
    fn removing_sole_factor_prunes_variable() {
        let mut g = FactorGraph::new();
        let v = g.add_variable(0.0);
        let f = g.add_factor(pin(1.0), &[v]).unwrap();
        let report = g.apply_edits([GraphEdit::RemoveFactor(f)]).unwrap();
        assert_eq!(report.pruned_variables, vec![v]);
        assert_eq!(report.pruned_edges.len(), 1);
        assert_eq!(g.counts(), GraphCounts::default());
        g.validate().unwrap();
    }

    #[test]
    fn variable_reconnected_within_batch_survives() {
        let mut g = FactorGraph::new();
        let v = g.add_variable(0.0);
        let f = g.add_factor(Box::new(EqualityFactor), &[v]).unwrap();
        let e = g.factor(f).unwrap().edges[0];
        let report = g
            .apply_edits([GraphEdit::RemoveEdge(e), GraphEdit::AddEdge { factor: f, variable: v }])
            .unwrap();
        assert!(report.pruned_variables.is_empty());
        assert_eq!(report.created_edges.len(), 1);
        assert_ne!(report.created_edges[0], e);
        g.validate().unwrap();
    }

    #[test]
    fn unknown_ids_are_rejected() {
        let mut g = FactorGraph::new();
        let v = g.add_variable(0.0);
        let f = g.add_factor(pin(1.0), &[v]).unwrap();
        g.apply_edits([GraphEdit::RemoveFactor(f)]).unwrap();
        let err = g.apply_edits([GraphEdit::RemoveFactor(f)]).unwrap_err();
        assert!(matches!(
            err,
            GraphError::Edit { index: 0, ref source } if **source == GraphError::UnknownFactor(f)
        ));
        let err = g
            .apply_edits([GraphEdit::AddEdge { factor: f, variable: v }])
            .unwrap_err();
        assert!(matches!(err, GraphError::Edit { .. }));
    }

    #[test]
    fn reparameterize_checks_kind_and_keeps_identity() {
        let mut g = FactorGraph::new();
        let v = g.add_variable(0.0);
        let f = g.add_factor(pin(1.0), &[v]).unwrap();
        let edges = g.factor(f).unwrap().edges.clone();
        g.apply_edits([GraphEdit::Reparameterize {
            factor: f,
            params: pin(2.0),
        }])
        .unwrap();
        let node = g.factor(f).unwrap();
        assert_eq!(node.edges, edges);
        let c = node.factor.as_any().downcast_ref::<ConstantFactor>().unwrap();
        assert_eq!(c.message.value, 2.0);

        let err = g
            .apply_edits([GraphEdit::Reparameterize {
                factor: f,
                params: Box::new(EqualityFactor),
            }])
            .unwrap_err();
        match err {
            GraphError::Edit { source, .. } => assert!(matches!(
                *source,
                GraphError::KindMismatch {
                    expected: "constant",
                    found: "equality"
                }
            )),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn new_edges_seed_from_current_value() {
        let mut g = FactorGraph::new();
        let v = g.add_variable(0.25);
        let f = g.add_factor(Box::new(EqualityFactor), &[v]).unwrap();
        let e = g.edge(g.factor(f).unwrap().edges[0]).unwrap();
        assert_eq!(e.msg_to_factor, 0.25);
        assert_eq!(e.error_accum, 0.0);
        assert_eq!(e.weight_to_factor, WeightClass::STANDARD);
        assert_eq!(e.weight_to_variable, WeightClass::STANDARD);
    }

    #[test]
    fn snapshot_requires_concur() {
        let mut g = FactorGraph::new();
        g.add_variable(0.0);
        assert_eq!(g.snapshot().unwrap_err(), GraphError::NotYetConcurred);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut g = FactorGraph::new();
        let v = g.add_variable(0.0);
        let err = g.add_factor(pin(f64::NAN), &[v]).unwrap_err();
        assert!(matches!(err, GraphError::InvalidParams { kind: "constant", .. }));
    }
}
