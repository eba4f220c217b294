//! Interactive steering: drag a circle towards a cursor, or transport the most
//! overlapped circle to a vacant point for a short burst.
//!
//! Steering attaches a pair of prior factors (one per coordinate) to the
//! target circle while active and removes them afterwards. With nothing
//! active the graph is untouched.

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use twa_core::{EditReport, FactorId, GlobalContext, GlobalReasoner, GraphEdit, PriorFactor};

use crate::instance::CircleVars;
use crate::maintain::PairStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SteerCommand {
    DragStart(usize),
    DragMove { id: usize, x: f64, y: f64 },
    DragEnd(usize),
    Vacancy { x: f64, y: f64 },
    SetParam { key: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SteerError {
    #[error("unknown circle {0}")]
    UnknownCircle(usize),
    #[error("point ({0}, {1}) outside the unit square")]
    OutOfBox(f64, f64),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("invalid value {value} for `{key}`")]
    InvalidParam { key: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteerParams {
    pub drag_weight: f64,
    pub transport_weight: f64,
    pub transport_burst: u64,
}

impl Default for SteerParams {
    fn default() -> Self {
        SteerParams {
            drag_weight: 1.0,
            transport_weight: 1.0,
            transport_burst: 25,
        }
    }
}

/// Validating command queue shared between a front end and the reasoner.
#[derive(Debug, Clone)]
pub struct SteerHandle {
    circles: usize,
    queue: Arc<Mutex<VecDeque<SteerCommand>>>,
}

impl SteerHandle {
    pub fn send(&self, cmd: SteerCommand) -> Result<(), SteerError> {
        let point = |x: f64, y: f64| {
            if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
                Ok(())
            } else {
                Err(SteerError::OutOfBox(x, y))
            }
        };
        match &cmd {
            SteerCommand::DragStart(id) | SteerCommand::DragEnd(id) => self.circle(*id)?,
            SteerCommand::DragMove { id, x, y } => {
                self.circle(*id)?;
                point(*x, *y)?;
            }
            SteerCommand::Vacancy { x, y } => point(*x, *y)?,
            SteerCommand::SetParam { key, value } => {
                let ok = match key.as_str() {
                    "drag_weight" | "transport_weight" => *value > 0.0 && value.is_finite(),
                    "transport_burst" => *value >= 1.0 && value.fract() == 0.0 && *value < 1e9,
                    _ => return Err(SteerError::UnknownParam(key.clone())),
                };
                if !ok {
                    return Err(SteerError::InvalidParam {
                        key: key.clone(),
                        value: *value,
                    });
                }
            }
        }
        self.queue.lock().expect("steer queue").push_back(cmd);
        Ok(())
    }

    fn circle(&self, id: usize) -> Result<(), SteerError> {
        if id < self.circles {
            Ok(())
        } else {
            Err(SteerError::UnknownCircle(id))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pull {
    target: [f64; 2],
    weight: f64,
    /// Iteration whose global section ends a transport burst; `None` for drags.
    until: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
struct Attached {
    factors: [FactorId; 2],
    target: [f64; 2],
    weight: f64,
}

/// Applies queued steering commands in the global section. Must be
/// registered after [`crate::PairMaintainer`].
#[derive(Debug)]
pub struct SteeringReasoner {
    vars: Arc<CircleVars>,
    queue: Arc<Mutex<VecDeque<SteerCommand>>>,
    pairs: Arc<Mutex<PairStats>>,
    params: SteerParams,
    wanted: BTreeMap<usize, Pull>,
    attached: BTreeMap<usize, Attached>,
    pending: Vec<(usize, Pull)>,
}

impl SteeringReasoner {
    pub fn new(vars: Arc<CircleVars>, pairs: Arc<Mutex<PairStats>>) -> (Self, SteerHandle) {
        let queue = Arc::new(Mutex::new(VecDeque::new()));
        let handle = SteerHandle {
            circles: vars.len(),
            queue: queue.clone(),
        };
        let reasoner = SteeringReasoner {
            vars,
            queue,
            pairs,
            params: SteerParams::default(),
            wanted: BTreeMap::new(),
            attached: BTreeMap::new(),
            pending: Vec::new(),
        };
        (reasoner, handle)
    }

    fn apply(&mut self, cmd: SteerCommand, ctx: &GlobalContext<'_, ()>) {
        let now = ctx.iteration();
        match cmd {
            SteerCommand::DragStart(id) => {
                let [x, y] = self.vars.all()[id];
                let graph = ctx.graph();
                let here = [graph.value(x).unwrap_or(0.5), graph.value(y).unwrap_or(0.5)];
                self.wanted.insert(
                    id,
                    Pull {
                        target: here,
                        weight: self.params.drag_weight,
                        until: None,
                    },
                );
            }
            SteerCommand::DragMove { id, x, y } => {
                self.wanted.insert(
                    id,
                    Pull {
                        target: [x, y],
                        weight: self.params.drag_weight,
                        until: None,
                    },
                );
            }
            SteerCommand::DragEnd(id) => {
                if self.wanted.get(&id).is_some_and(|p| p.until.is_none()) {
                    self.wanted.remove(&id);
                }
            }
            SteerCommand::Vacancy { x, y } => {
                let distressed = self.pairs.lock().expect("stats lock").overlap.circle;
                if let Some(id) = distressed {
                    self.wanted.insert(
                        id,
                        Pull {
                            target: [x, y],
                            weight: self.params.transport_weight,
                            until: Some(now + self.params.transport_burst),
                        },
                    );
                }
            }
            SteerCommand::SetParam { key, value } => match key.as_str() {
                "drag_weight" => self.params.drag_weight = value,
                "transport_weight" => self.params.transport_weight = value,
                "transport_burst" => self.params.transport_burst = value as u64,
                _ => {}
            },
        }
    }
}

fn priors(target: [f64; 2], weight: f64) -> [PriorFactor; 2] {
    target.map(|t| PriorFactor {
        target: t,
        stiffness: weight,
    })
}

impl GlobalReasoner<()> for SteeringReasoner {
    fn name(&self) -> &str {
        "steering"
    }

    fn reason(&mut self, ctx: &mut GlobalContext<'_, ()>) {
        let commands: Vec<_> = self.queue.lock().expect("steer queue").drain(..).collect();
        for cmd in commands {
            self.apply(cmd, ctx);
        }
        let now = ctx.iteration();
        self.wanted.retain(|_, p| p.until.is_none_or(|u| now < u));

        let gone: Vec<usize> = self
            .attached
            .keys()
            .filter(|id| !self.wanted.contains_key(id))
            .copied()
            .collect();
        for id in gone {
            for f in self.attached.remove(&id).expect("attached").factors {
                ctx.queue_edit(GraphEdit::RemoveFactor(f));
            }
        }
        for (&id, pull) in &self.wanted {
            match self.attached.get_mut(&id) {
                Some(a) => {
                    if a.target != pull.target || a.weight != pull.weight {
                        for (f, p) in a.factors.iter().zip(priors(pull.target, pull.weight)) {
                            ctx.queue_edit(GraphEdit::Reparameterize {
                                factor: *f,
                                params: Box::new(p),
                            });
                        }
                        a.target = pull.target;
                        a.weight = pull.weight;
                    }
                }
                None => {
                    let coords = self.vars.all()[id];
                    for (v, p) in coords.iter().zip(priors(pull.target, pull.weight)) {
                        ctx.queue_edit(GraphEdit::AddFactor {
                            factor: Box::new(p),
                            variables: vec![*v],
                        });
                    }
                    self.pending.push((id, *pull));
                }
            }
        }
    }

    fn edits_applied(&mut self, report: &EditReport) {
        if self.pending.is_empty() {
            return;
        }
        // registered last, so its factors end the created list
        let ours = &report.created_factors[report.created_factors.len() - 2 * self.pending.len()..];
        for ((id, pull), f) in self.pending.drain(..).zip(ours.chunks(2)) {
            self.attached.insert(
                id,
                Attached {
                    factors: [f[0], f[1]],
                    target: pull.target,
                    weight: pull.weight,
                },
            );
        }
    }
}
