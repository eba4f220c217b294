//! The iteration loop: minimize, concur, local reasoning, global reasoning,
//! graph edits, convergence check.
//!
//! Minimize and concur run over statically scheduled work queues, one per
//! thread, separated by barriers. Each factor writes only its own slice of
//! the factor-output buffer and each variable only its own slot of the
//! variable-output buffer; edge state is updated afterwards in a separate
//! pass over the edge storage, so no phase shares mutable state.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arena::Slot;
use crate::factor::{FactorError, MinimizeContext};
use crate::graph::{
    EdgeState, EditReport, FactorGraph, FactorId, GraphCounts, GraphEdit, GraphError, VariableId, VariableNode,
};
use crate::messages::{concur_variable, factor_message, update_edge, CertaintyConflict};
use crate::reasoner::{
    EmissionRequest, GlobalContext, GlobalReasoner, LocalReasoner, LocalReasonerId, LocalView, Outbox,
};
use crate::schedule::schedule;
use crate::weight::{Message, WeightClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Magnitude of the standard weight.
    pub rho_standard: f64,
    /// Convergence threshold on variable→factor message changes; also the
    /// tolerance within which certain values must agree.
    pub epsilon_convergence: f64,
    pub max_iterations: u64,
    pub thread_count: usize,
    /// Telemetry/snapshot cadence for observers.
    pub snapshot_every: u64,
    pub rng_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            rho_standard: 1.0,
            epsilon_convergence: 1e-5,
            max_iterations: 10_000,
            thread_count: 1,
            snapshot_every: 1,
            rng_seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |what: &str| Err(EngineError::Config(what.to_string()));
        if !(self.rho_standard.is_finite() && self.rho_standard > 0.0) {
            return bad("rho_standard must be positive and finite");
        }
        if !(self.epsilon_convergence.is_finite() && self.epsilon_convergence > 0.0) {
            return bad("epsilon_convergence must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if self.thread_count == 0 {
            return bad("thread_count must be at least 1");
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("iteration {iteration}: factor {factor} ({kind}): {source}")]
    Infeasible {
        iteration: u64,
        factor: FactorId,
        kind: &'static str,
        #[source]
        source: FactorError,
    },
    #[error("iteration {iteration}: variable {variable}: {source}")]
    Conflict {
        iteration: u64,
        variable: VariableId,
        #[source]
        source: CertaintyConflict,
    },
    #[error("iteration {iteration}: {source}")]
    Edit {
        iteration: u64,
        #[source]
        source: GraphError,
    },
    #[error("local reasoner {reasoner} has {len} slots, emission requested for slot {slot}")]
    BadEmission { reasoner: usize, slot: usize, len: usize },
    #[error("unknown variable {0} attached to a local reasoner")]
    UnknownVariable(VariableId),
}

impl EngineError {
    pub fn iteration(&self) -> Option<u64> {
        match self {
            EngineError::Infeasible { iteration, .. }
            | EngineError::Conflict { iteration, .. }
            | EngineError::Edit { iteration, .. } => Some(*iteration),
            _ => None,
        }
    }
}

/// Wall-clock microseconds spent in each phase of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub plan_us: u64,
    pub minimize_us: u64,
    pub concur_us: u64,
    pub local_us: u64,
    pub global_us: u64,
    pub edit_us: u64,
}

impl PhaseTimings {
    pub fn total_us(&self) -> u64 {
        self.plan_us + self.minimize_us + self.concur_us + self.local_us + self.global_us + self.edit_us
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationStatus {
    pub iteration: u64,
    pub converged: bool,
    pub halted_by: Option<String>,
    pub max_message_delta: f64,
    /// Live counts after this iteration's edits.
    pub counts: GraphCounts,
    pub edits_applied: usize,
    pub timings: PhaseTimings,
}

impl IterationStatus {
    pub fn finished(&self) -> bool {
        self.converged || self.halted_by.is_some()
    }

    /// Telemetry record as one line of JSON (no trailing newline).
    pub fn telemetry_line(&self) -> String {
        serde_json::to_string(self).expect("status serializes")
    }
}

struct LocalSlot<Ev> {
    reasoner: Box<dyn LocalReasoner<Ev>>,
    attached: Vec<VariableId>,
    outbox: Outbox,
    events: Vec<Ev>,
}

/// Work layout derived from one graph revision.
struct Plan {
    revision: u64,
    locals: usize,
    factor_queues: Vec<Vec<u32>>,
    /// Length of each factor queue's chunk in the output buffer.
    factor_chunk: Vec<usize>,
    /// Factor-output index per edge slot.
    edge_out: Vec<u32>,
    var_queues: Vec<Vec<u32>>,
    /// Variable-output index per variable slot.
    var_out: Vec<u32>,
    /// Local-reasoner emitters per variable slot: (reasoner, outbox slot).
    emitters: Vec<Vec<(u32, u32)>>,
}

const NONE: u32 = u32::MAX;

impl Plan {
    fn build<Ev>(graph: &FactorGraph, locals: &[LocalSlot<Ev>], threads: usize) -> Plan {
        let factor_nodes: Vec<(u32, usize)> = graph
            .factors
            .iter()
            .map(|(k, f)| (k.index, f.edges.len().max(1)))
            .collect();
        let factor_queues = schedule(&factor_nodes, threads);
        let mut edge_out = vec![NONE; graph.edges.slots().len()];
        let mut factor_chunk = Vec::with_capacity(factor_queues.len());
        let mut next = 0u32;
        for queue in &factor_queues {
            let start = next;
            for &slot in queue {
                let node = graph.factors.slots()[slot as usize].get().expect("live factor");
                for e in &node.edges {
                    edge_out[e.0.index as usize] = next;
                    next += 1;
                }
            }
            factor_chunk.push((next - start) as usize);
        }

        let var_nodes: Vec<(u32, usize)> = graph
            .variables
            .iter()
            .map(|(k, v)| (k.index, v.edges.len().max(1)))
            .collect();
        let var_queues = schedule(&var_nodes, threads);
        let mut var_out = vec![NONE; graph.variables.slots().len()];
        let mut n = 0u32;
        for queue in &var_queues {
            for &slot in queue {
                var_out[slot as usize] = n;
                n += 1;
            }
        }

        let mut emitters = vec![Vec::new(); graph.variables.slots().len()];
        for (r, local) in locals.iter().enumerate() {
            for (s, v) in local.attached.iter().enumerate() {
                if graph.contains_variable(*v) {
                    emitters[v.0.index as usize].push((r as u32, s as u32));
                }
            }
        }

        Plan {
            revision: graph.revision(),
            locals: locals.len(),
            factor_queues,
            factor_chunk,
            edge_out,
            var_queues,
            var_out,
            emitters,
        }
    }
}

/// Splits `buf` into consecutive mutable chunks of the given lengths.
fn split_chunks<'a, T>(mut buf: &'a mut [T], lens: &[usize]) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(lens.len());
    for &len in lens {
        let (head, tail) = buf.split_at_mut(len);
        out.push(head);
        buf = tail;
    }
    out
}

type MinimizeFailure = (FactorId, &'static str, FactorError);

fn minimize_queue(
    graph: &FactorGraph,
    queue: &[u32],
    out: &mut [Message],
    iteration: u64,
    rho: f64,
    seed: u64,
) -> Result<(), MinimizeFailure> {
    let mut incoming = Vec::new();
    let mut offset = 0;
    for &slot in queue {
        let node = graph.factors.slots()[slot as usize]
            .get()
            .expect("planned factor is live");
        let arity = node.edges.len();
        if arity == 0 {
            continue;
        }
        incoming.clear();
        incoming.extend(node.edges.iter().map(|e| {
            let edge = graph.edges.slots()[e.0.index as usize]
                .get()
                .expect("planned edge is live");
            Message::new(edge.msg_to_factor, edge.weight_to_factor)
        }));
        let ctx = MinimizeContext {
            factor: node.id,
            iteration,
            rho,
            seed,
        };
        let chunk = &mut out[offset..offset + arity];
        node.factor
            .minimize(&incoming, chunk, &ctx)
            .map_err(|e| (node.id, node.factor.kind(), e))?;
        debug_assert!(
            chunk.iter().all(|m| m.value.is_finite() && m.weight.is_valid()),
            "factor {} ({}) produced an invalid message",
            node.id,
            node.factor.kind()
        );
        offset += arity;
    }
    Ok(())
}

type ConcurFailure = (VariableId, CertaintyConflict);

#[allow(clippy::too_many_arguments)]
fn concur_queue(
    graph: &FactorGraph,
    plan: &Plan,
    outboxes: &[&Outbox],
    fout: &[Message],
    queue: &[u32],
    out: &mut [(f64, WeightClass)],
    rho: f64,
    tolerance: f64,
) -> Result<(), ConcurFailure> {
    for (i, &slot) in queue.iter().enumerate() {
        let node = graph.variables.slots()[slot as usize]
            .get()
            .expect("planned variable is live");
        if node.edges.is_empty() {
            out[i] = (node.concurred, WeightClass::Zero);
            continue;
        }
        let from_factors = node.edges.iter().map(|e| {
            let edge = graph.edges.slots()[e.0.index as usize]
                .get()
                .expect("planned edge is live");
            let x = fout[plan.edge_out[e.0.index as usize] as usize];
            Message::new(factor_message(x.value, edge.error_accum, x.weight), x.weight)
        });
        let from_reasoners = plan.emitters[slot as usize]
            .iter()
            .map(|&(r, s)| outboxes[r as usize].get(s as usize));
        out[i] = concur_variable(from_factors.chain(from_reasoners), node.concurred, rho, tolerance)
            .map_err(|e| (node.id, e))?;
    }
    Ok(())
}

fn update_edges(
    slots: &mut [Slot<EdgeState>],
    base: usize,
    plan: &Plan,
    fout: &[Message],
    vout: &[(f64, WeightClass)],
) -> f64 {
    let mut max_delta = 0.0f64;
    for (i, slot) in slots.iter_mut().enumerate() {
        let Some(edge) = slot.get_mut() else { continue };
        let x = fout[plan.edge_out[base + i] as usize];
        let (z, wv) = vout[plan.var_out[edge.variable.0.index as usize] as usize];
        update_edge(edge, x.value, z, x.weight, wv);
        max_delta = max_delta.max((edge.msg_to_factor - edge.prev_msg_to_factor).abs());
    }
    max_delta
}

fn write_variables(slots: &mut [Slot<VariableNode>], base: usize, plan: &Plan, vout: &[(f64, WeightClass)]) {
    for (i, slot) in slots.iter_mut().enumerate() {
        if let Some(node) = slot.get_mut() {
            let (z, w) = vout[plan.var_out[base + i] as usize];
            node.concurred = z;
            node.weight = w;
        }
    }
}

/// Drives the three-weight iteration over a graph with attached reasoners.
///
/// `Ev` is the event type local reasoners raise for global reasoners.
pub struct Engine<Ev: Send + 'static = ()> {
    graph: FactorGraph,
    config: EngineConfig,
    locals: Vec<LocalSlot<Ev>>,
    globals: Vec<Box<dyn GlobalReasoner<Ev>>>,
    plan: Option<Plan>,
    pool: Option<rayon::ThreadPool>,
    fout: Vec<Message>,
    vout: Vec<(f64, WeightClass)>,
    iteration: u64,
    last: Option<IterationStatus>,
}

impl<Ev: Send + 'static> Engine<Ev> {
    pub fn new(graph: FactorGraph, config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let pool = if config.thread_count > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.thread_count)
                    .build()
                    .map_err(|e| EngineError::Config(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Engine {
            graph,
            config,
            locals: Vec::new(),
            globals: Vec::new(),
            plan: None,
            pool,
            fout: Vec::new(),
            vout: Vec::new(),
            iteration: 0,
            last: None,
        })
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    /// Direct mutable access between iterations.
    pub fn graph_mut(&mut self) -> &mut FactorGraph {
        &mut self.graph
    }

    pub fn into_graph(self) -> FactorGraph {
        self.graph
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Iterations completed so far.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn last_status(&self) -> Option<&IterationStatus> {
        self.last.as_ref()
    }

    pub fn add_local_reasoner(
        &mut self,
        attached: Vec<VariableId>,
        reasoner: impl LocalReasoner<Ev> + 'static,
    ) -> Result<LocalReasonerId, EngineError> {
        if let Some(&v) = attached.iter().find(|v| !self.graph.contains_variable(**v)) {
            return Err(EngineError::UnknownVariable(v));
        }
        self.locals.push(LocalSlot {
            reasoner: Box::new(reasoner),
            outbox: Outbox::new(attached.len()),
            attached,
            events: Vec::new(),
        });
        Ok(LocalReasonerId(self.locals.len() - 1))
    }

    pub fn add_global_reasoner(&mut self, reasoner: impl GlobalReasoner<Ev> + 'static) {
        self.globals.push(Box::new(reasoner));
    }

    pub fn outbox(&self, id: LocalReasonerId) -> Option<&Outbox> {
        self.locals.get(id.0).map(|l| &l.outbox)
    }

    fn ensure_plan(&mut self) {
        let stale = match &self.plan {
            Some(p) => p.revision != self.graph.revision() || p.locals != self.locals.len(),
            None => true,
        };
        if stale {
            let plan = Plan::build(&self.graph, &self.locals, self.config.thread_count);
            self.fout.resize(plan.factor_chunk.iter().sum(), Message::zero(0.0));
            self.vout
                .resize(plan.var_queues.iter().map(Vec::len).sum(), (0.0, WeightClass::Zero));
            self.plan = Some(plan);
        }
    }

    /// Runs one full iteration.
    pub fn step(&mut self) -> Result<IterationStatus, EngineError> {
        let iteration = self.iteration + 1;
        let mut timings = PhaseTimings::default();
        let clock = Instant::now();
        self.ensure_plan();
        timings.plan_us = clock.elapsed().as_micros() as u64;

        let rho = self.config.rho_standard;
        let eps = self.config.epsilon_convergence;
        let seed = self.config.rng_seed;
        let plan = self.plan.as_ref().expect("plan built");
        let graph = &mut self.graph;
        let locals = &mut self.locals;
        let pool = self.pool.as_ref();

        // Minimize.
        let clock = Instant::now();
        {
            let g: &FactorGraph = graph;
            let chunks = split_chunks(&mut self.fout, &plan.factor_chunk);
            let results: Vec<Result<(), MinimizeFailure>> = match pool {
                None => plan
                    .factor_queues
                    .iter()
                    .zip(chunks)
                    .map(|(q, out)| minimize_queue(g, q, out, iteration, rho, seed))
                    .collect(),
                Some(pool) => pool.install(|| {
                    plan.factor_queues
                        .par_iter()
                        .zip(chunks)
                        .map(|(q, out)| minimize_queue(g, q, out, iteration, rho, seed))
                        .collect()
                }),
            };
            if let Some((factor, kind, source)) = results.into_iter().filter_map(Result::err).min_by_key(|f| f.0) {
                return Err(EngineError::Infeasible {
                    iteration,
                    factor,
                    kind,
                    source,
                });
            }
        }
        timings.minimize_us = clock.elapsed().as_micros() as u64;

        // Concur, then push the concurred values back onto edges and variables.
        let clock = Instant::now();
        let max_delta;
        {
            let g: &FactorGraph = graph;
            let fout = &self.fout;
            let lens: Vec<usize> = plan.var_queues.iter().map(Vec::len).collect();
            let chunks = split_chunks(&mut self.vout, &lens);
            let outboxes: Vec<&Outbox> = locals.iter().map(|l| &l.outbox).collect();
            let outboxes = &outboxes[..];
            let results: Vec<Result<(), ConcurFailure>> = match pool {
                None => plan
                    .var_queues
                    .iter()
                    .zip(chunks)
                    .map(|(q, out)| concur_queue(g, plan, outboxes, fout, q, out, rho, eps))
                    .collect(),
                Some(pool) => pool.install(|| {
                    plan.var_queues
                        .par_iter()
                        .zip(chunks)
                        .map(|(q, out)| concur_queue(g, plan, outboxes, fout, q, out, rho, eps))
                        .collect()
                }),
            };
            if let Some((variable, source)) = results.into_iter().filter_map(Result::err).min_by_key(|f| f.0) {
                return Err(EngineError::Conflict {
                    iteration,
                    variable,
                    source,
                });
            }

            let vout = &self.vout;
            let edge_slots = graph.edges.slots_mut();
            max_delta = match pool {
                None => update_edges(edge_slots, 0, plan, fout, vout),
                Some(pool) => {
                    let chunk = edge_slots.len().div_ceil(self.config.thread_count).max(1);
                    pool.install(|| {
                        edge_slots
                            .par_chunks_mut(chunk)
                            .enumerate()
                            .map(|(i, s)| update_edges(s, i * chunk, plan, fout, vout))
                            .reduce(|| 0.0, f64::max)
                    })
                }
            };
            let var_slots = graph.variables.slots_mut();
            match pool {
                None => write_variables(var_slots, 0, plan, vout),
                Some(pool) => {
                    let chunk = var_slots.len().div_ceil(self.config.thread_count).max(1);
                    pool.install(|| {
                        var_slots
                            .par_chunks_mut(chunk)
                            .enumerate()
                            .for_each(|(i, s)| write_variables(s, i * chunk, plan, vout))
                    })
                }
            }
            graph.mark_concurred();
        }
        timings.concur_us = clock.elapsed().as_micros() as u64;

        // Local reasoners.
        let clock = Instant::now();
        {
            let g: &FactorGraph = graph;
            let run = |local: &mut LocalSlot<Ev>| {
                let view = LocalView {
                    graph: g,
                    attached: &local.attached,
                    iteration,
                };
                local.reasoner.reason(&view, &mut local.outbox, &mut local.events);
            };
            match pool {
                None => locals.iter_mut().for_each(run),
                Some(pool) => pool.install(|| locals.par_iter_mut().for_each(run)),
            }
        }
        let mut events = Vec::new();
        for local in locals.iter_mut() {
            events.append(&mut local.events);
        }
        timings.local_us = clock.elapsed().as_micros() as u64;

        // Global reasoners, in registration order.
        let clock = Instant::now();
        let mut edits: Vec<GraphEdit> = Vec::new();
        let mut requests: Vec<EmissionRequest> = Vec::new();
        let mut halted_by = None;
        for global in self.globals.iter_mut() {
            let mut halt = false;
            let mut ctx = GlobalContext {
                iteration,
                graph,
                events: &events,
                edits: &mut edits,
                requests: &mut requests,
                halt: &mut halt,
            };
            global.reason(&mut ctx);
            if halt && halted_by.is_none() {
                halted_by = Some(global.name().to_string());
            }
        }
        timings.global_us = clock.elapsed().as_micros() as u64;

        // Emission requests and graph edits at the iteration boundary.
        let clock = Instant::now();
        let mut emissions_changed = false;
        for req in requests {
            let local = &mut locals[req.reasoner.0];
            if req.slot >= local.outbox.len() {
                return Err(EngineError::BadEmission {
                    reasoner: req.reasoner.0,
                    slot: req.slot,
                    len: local.outbox.len(),
                });
            }
            emissions_changed |= local.outbox.set(req.slot, req.message);
        }
        let report = if edits.is_empty() {
            EditReport::default()
        } else {
            let report = graph
                .apply_edits(edits)
                .map_err(|source| EngineError::Edit { iteration, source })?;
            for global in self.globals.iter_mut() {
                global.edits_applied(&report);
            }
            report
        };
        timings.edit_us = clock.elapsed().as_micros() as u64;

        self.iteration = iteration;
        let converged = halted_by.is_none() && report.applied == 0 && !emissions_changed && max_delta < eps;
        let status = IterationStatus {
            iteration,
            converged,
            halted_by,
            max_message_delta: max_delta,
            counts: self.graph.counts(),
            edits_applied: report.applied,
            timings,
        };
        self.last = Some(status.clone());
        Ok(status)
    }

    /// Iterates until convergence, a halt, or `max_iterations` total
    /// iterations, reporting every status to `observer`.
    pub fn run_with(
        &mut self,
        mut observer: impl FnMut(&IterationStatus, &FactorGraph),
    ) -> Result<IterationStatus, EngineError> {
        loop {
            let status = self.step()?;
            observer(&status, &self.graph);
            if status.finished() || self.iteration >= self.config.max_iterations {
                return Ok(status);
            }
        }
    }

    pub fn run(&mut self) -> Result<IterationStatus, EngineError> {
        self.run_with(|_, _| {})
    }

    /// Runs to completion and collects every status.
    pub fn run_collect(&mut self) -> Result<Vec<IterationStatus>, EngineError> {
        let mut out = Vec::new();
        self.run_with(|s, _| out.push(s.clone()))?;
        Ok(out)
    }
}
