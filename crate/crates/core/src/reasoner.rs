//! Local and global reasoner hooks.
//!
//! Local reasoners sit next to a fixed set of variables, see only their
//! concurred values, and contribute one message per attached variable to the
//! next concur phase. The default message carries zero weight, so an idle
//! local reasoner has no effect on the solution. Global reasoners see the
//! whole graph and the events raised by local reasoners; they act only by
//! queueing graph edits, asking local reasoners to emit weighted messages, or
//! halting the run.

use crate::graph::{EditReport, FactorGraph, GraphEdit, VariableId};
use crate::weight::{Message, WeightClass};

/// Handle returned when a local reasoner is registered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalReasonerId(pub(crate) usize);

impl LocalReasonerId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Read-only view of the variables a local reasoner is attached to.
pub struct LocalView<'a> {
    pub(crate) graph: &'a FactorGraph,
    pub(crate) attached: &'a [VariableId],
    pub(crate) iteration: u64,
}

impl<'a> LocalView<'a> {
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn len(&self) -> usize {
        self.attached.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attached.is_empty()
    }

    pub fn variable(&self, slot: usize) -> VariableId {
        self.attached[slot]
    }

    /// Concurred value and outgoing weight, or `None` once the variable has been pruned.
    pub fn concurred(&self, slot: usize) -> Option<(f64, WeightClass)> {
        self.graph
            .variable(self.attached[slot])
            .map(|v| (v.concurred, v.weight))
    }
}

/// Messages a local reasoner sends to its attached variables, one per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Outbox {
    messages: Vec<Message>,
}

impl Outbox {
    pub(crate) fn new(len: usize) -> Self {
        Outbox {
            messages: vec![Message::zero(0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn get(&self, slot: usize) -> Message {
        self.messages[slot]
    }

    /// Returns whether the stored message changed.
    pub fn set(&mut self, slot: usize, message: Message) -> bool {
        let old = std::mem::replace(&mut self.messages[slot], message);
        old != message
    }

    pub fn clear(&mut self, slot: usize) -> bool {
        self.set(slot, Message::zero(0.0))
    }
}

pub trait LocalReasoner<Ev>: Send {
    /// Runs after the concur phase. May update the outbox and raise events for
    /// global reasoners.
    fn reason(&mut self, view: &LocalView<'_>, outbox: &mut Outbox, events: &mut Vec<Ev>);
}

/// An emission requested by a global reasoner, applied before the next iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionRequest {
    pub reasoner: LocalReasonerId,
    pub slot: usize,
    pub message: Message,
}

pub struct GlobalContext<'a, Ev> {
    pub(crate) iteration: u64,
    pub(crate) graph: &'a FactorGraph,
    pub(crate) events: &'a [Ev],
    pub(crate) edits: &'a mut Vec<GraphEdit>,
    pub(crate) requests: &'a mut Vec<EmissionRequest>,
    pub(crate) halt: &'a mut bool,
}

impl<'a, Ev> GlobalContext<'a, Ev> {
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn graph(&self) -> &FactorGraph {
        self.graph
    }

    /// Events raised by local reasoners this iteration, in registration order.
    pub fn events(&self) -> &[Ev] {
        self.events
    }

    pub fn queue_edit(&mut self, edit: GraphEdit) {
        self.edits.push(edit);
    }

    pub fn queued_edits(&self) -> usize {
        self.edits.len()
    }

    pub fn request_emission(&mut self, reasoner: LocalReasonerId, slot: usize, message: Message) {
        self.requests.push(EmissionRequest {
            reasoner,
            slot,
            message,
        });
    }

    pub fn halt(&mut self) {
        *self.halt = true;
    }
}

pub trait GlobalReasoner<Ev>: Send {
    fn name(&self) -> &str;

    fn reason(&mut self, ctx: &mut GlobalContext<'_, Ev>);

    /// Called after the iteration's queued edits were applied, with the ids
    /// created in edit order.
    fn edits_applied(&mut self, _report: &EditReport) {}
}
