//! Deterministic peer-to-peer message-passing harness that executes RBCD
//! block updates as decentralized agents.
//!
//! Each agent owns exactly its robot's lifted blocks plus a cache of neighbor
//! separator blocks, refreshed only through explicit [`Message`]s. A
//! discrete-tick scheduler with a single seeded random source drives delivery,
//! seeded latency, drops, and 3-tick retransmission, so identical inputs give
//! bitwise-identical runs. In `SynchronousRounds` mode a token makes agents
//! update in round-robin order; with zero latency and zero drops the data flow
//! (and hence the arithmetic) matches the centralized solver update for
//! update.
//!
//! The initial state is scattered to the agents out of band (bootstrap is not
//! counted as traffic), and certification/rounding happen centrally on the
//! gathered result.

use crate::error::{Error, Result};
use crate::graph::MultiRobotGraph;
use crate::laplacian::{self, block_submatrices, ConnectionLaplacian, LiftedState, NodeBlock, RobotBlocks};
use crate::solver::{
    block_gradient_norm, update_block_with_coupling, SolveTrace, SolverOptions, SweepStat,
    TerminationReason,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

/// Ticks a sender waits for an acknowledgment before retransmitting.
pub const RETRANSMIT_TIMEOUT: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetMode {
    SynchronousRounds,
    Asynchronous,
}

/// Delivery model: latency drawn uniformly from the inclusive tick range,
/// drops decided per transmission attempt.
#[derive(Clone, Copy, Debug)]
pub struct NetworkProfile {
    pub latency: (u64, u64),
    pub drop_prob: f64,
    pub mode: NetMode,
}

impl NetworkProfile {
    pub fn lossless_sync() -> Self {
        NetworkProfile {
            latency: (0, 0),
            drop_prob: 0.0,
            mode: NetMode::SynchronousRounds,
        }
    }

    fn check(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.drop_prob) {
            return Err(Error::UnsupportedOptions(format!(
                "drop probability {} must lie in [0, 1) for eventual delivery",
                self.drop_prob
            )));
        }
        if self.latency.0 > self.latency.1 {
            return Err(Error::UnsupportedOptions(
                "latency range must be min <= max".into(),
            ));
        }
        Ok(())
    }
}

/// Separator-pose exchange between two agents. The payload may carry only
/// poses of the sender that are incident to edges shared with the receiver;
/// the constructor enforces it.
#[derive(Clone, Debug)]
pub struct Message {
    pub from_robot: usize,
    pub to_robot: usize,
    pub sweep_number: usize,
    pub sequence: u64,
    /// Global node index and lifted block of each separator pose.
    pub payload: Vec<(usize, NodeBlock)>,
}

impl Message {
    pub fn new(
        from_robot: usize,
        to_robot: usize,
        sweep_number: usize,
        sequence: u64,
        payload: Vec<(usize, NodeBlock)>,
        allowed: &[usize],
    ) -> Result<Self> {
        for (g, _) in &payload {
            if !allowed.contains(g) {
                return Err(Error::KeyMismatch(format!(
                    "message {from_robot}->{to_robot} leaks non-separator pose {g}"
                )));
            }
        }
        Ok(Message {
            from_robot,
            to_robot,
            sweep_number,
            sequence,
            payload,
        })
    }

    /// Number of modeled floats in the payload.
    pub fn payload_floats(&self) -> usize {
        self.payload
            .iter()
            .map(|(_, b)| b.y.len() + b.p.len())
            .sum()
    }
}

/// One line of the message log: tick, endpoints, sweep, modeled size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MessageLogEntry {
    pub tick: u64,
    pub from_robot: usize,
    pub to_robot: usize,
    pub sweep: usize,
    pub payload_floats: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrafficStats {
    /// Data messages sent, including retransmissions.
    pub messages_sent: u64,
    pub retransmissions: u64,
    pub acks_sent: u64,
    /// Payload entries x 8 bytes, summed over data messages.
    pub bytes_modeled: u64,
    pub per_robot_sent: Vec<u64>,
}

impl TrafficStats {
    /// Recomputes the data-message counters from a log (consistency oracle).
    pub fn from_log(log: &[MessageLogEntry], num_robots: usize) -> TrafficStats {
        let mut stats = TrafficStats {
            per_robot_sent: vec![0; num_robots],
            ..Default::default()
        };
        for entry in log {
            stats.messages_sent += 1;
            stats.bytes_modeled += entry.payload_floats as u64 * 8;
            stats.per_robot_sent[entry.from_robot] += 1;
        }
        stats
    }
}

/// Result of a decentralized run: the gathered state, the per-round trace as
/// seen by an outside observer, traffic counters, the full message log, and
/// the messages themselves (for ownership checks).
#[derive(Clone, Debug)]
pub struct DecentralizedRun {
    pub state: LiftedState,
    pub trace: SolveTrace,
    pub traffic: TrafficStats,
    pub log: Vec<MessageLogEntry>,
    pub messages: Vec<Message>,
    pub final_tick: u64,
}

/// Traffic counters of a completed run, cross-checkable against its log via
/// [`TrafficStats::from_log`].
pub fn traffic_report(run: &DecentralizedRun) -> &TrafficStats {
    &run.traffic
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum EventKind {
    Deliver(u64),
    AckDeliver(u64),
    TimeoutCheck(u64),
    Token(usize),
    Wake(usize),
}

/// Total event order: tick, then class (deliveries before acks before
/// timeouts before agent turns), then sequence number.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Scheduled {
    tick: u64,
    class: u8,
    seq: u64,
    kind: EventKind,
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.tick, self.class, self.seq).cmp(&(other.tick, other.class, other.seq))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct Agent {
    rb: RobotBlocks,
    own: Vec<NodeBlock>,
    cache: BTreeMap<usize, NodeBlock>,
    cache_sweep: BTreeMap<usize, usize>,
    /// Messages received per neighbor since this agent last updated. Updating
    /// is gated on having heard from every neighbor, which bounds the
    /// staleness an update can act on to one in-flight exchange and prevents
    /// limit cycles between agents optimizing against each other's old state.
    fresh: BTreeMap<usize, usize>,
    local_grad_norm: f64,
    updates_done: usize,
    consec_converged: usize,
}

impl Agent {
    fn coupling(&self, rank: usize) -> Vec<NodeBlock> {
        self.rb.coupling_terms(rank, |g| {
            self.cache
                .get(&g)
                .expect("cache covers all remote separators")
        })
    }

    fn all_neighbors_fresh(&self) -> bool {
        self.rb
            .coupling
            .keys()
            .all(|nb| self.fresh.get(nb).copied().unwrap_or(0) > 0)
    }

    /// Runs the block update if every neighbor has been heard from; always
    /// refreshes the local gradient estimate. Returns whether an update ran.
    fn update(&mut self, rank: usize, inner_steps: usize) -> bool {
        let ran = if self.all_neighbors_fresh() {
            update_block_with_coupling(&self.rb, &mut self.own, &self.cache, inner_steps);
            for c in self.fresh.values_mut() {
                *c = 0;
            }
            self.updates_done += 1;
            true
        } else {
            false
        };
        let coupling = self.coupling(rank);
        self.local_grad_norm = block_gradient_norm(&self.rb, &self.own, &coupling);
        ran
    }
}

struct InFlight {
    msg: Message,
    delivered_or_dead: bool,
}

struct Sim<'a> {
    lap: &'a ConnectionLaplacian,
    options: &'a SolverOptions,
    profile: NetworkProfile,
    rng: ChaCha8Rng,
    agents: Vec<Agent>,
    heap: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    msg_seq: u64,
    in_flight: BTreeMap<u64, InFlight>,
    traffic: TrafficStats,
    log: Vec<MessageLogEntry>,
    messages: Vec<Message>,
    grad_tol: f64,
    round: usize,
    consec_rounds_converged: usize,
    trace: SolveTrace,
    rank: usize,
    finished: Option<TerminationReason>,
}

impl<'a> Sim<'a> {
    fn schedule(&mut self, tick: u64, class: u8, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse(Scheduled {
            tick,
            class,
            seq,
            kind,
        }));
    }

    fn latency(&mut self) -> u64 {
        let (lo, hi) = self.profile.latency;
        if lo == hi {
            lo
        } else {
            self.rng.gen_range(lo..=hi)
        }
    }

    fn dropped(&mut self) -> bool {
        self.profile.drop_prob > 0.0 && self.rng.gen::<f64>() < self.profile.drop_prob
    }

    /// Sends one data message (or a retransmission of it).
    fn transmit(&mut self, tick: u64, msg_id: u64, retransmission: bool) {
        let msg = &self.in_flight[&msg_id].msg;
        self.traffic.messages_sent += 1;
        self.traffic.bytes_modeled += msg.payload_floats() as u64 * 8;
        self.traffic.per_robot_sent[msg.from_robot] += 1;
        if retransmission {
            self.traffic.retransmissions += 1;
        }
        self.log.push(MessageLogEntry {
            tick,
            from_robot: msg.from_robot,
            to_robot: msg.to_robot,
            sweep: msg.sweep_number,
            payload_floats: msg.payload_floats(),
        });
        self.messages.push(msg.clone());
        let lat = self.latency();
        if !self.dropped() {
            self.schedule(tick + lat, 0, EventKind::Deliver(msg_id));
        }
        self.schedule(tick + RETRANSMIT_TIMEOUT, 2, EventKind::TimeoutCheck(msg_id));
    }

    /// Queues separator updates from `robot` to every coupled neighbor.
    fn broadcast_separators(&mut self, tick: u64, robot: usize, sweep: usize) {
        let neighbors: Vec<usize> = self.agents[robot].rb.coupling.keys().cloned().collect();
        for nb in neighbors {
            let (payload, allowed) = {
                let agent = &self.agents[robot];
                let locals = agent.rb.own_separators_with(nb);
                let allowed: Vec<usize> =
                    locals.iter().map(|l| agent.rb.first + l).collect();
                let payload: Vec<(usize, NodeBlock)> = locals
                    .iter()
                    .map(|&l| (agent.rb.first + l, agent.own[l].clone()))
                    .collect();
                (payload, allowed)
            };
            let msg_id = self.msg_seq;
            self.msg_seq += 1;
            let msg = Message::new(robot, nb, sweep, msg_id, payload, &allowed)
                .expect("payload built from separator set");
            self.in_flight.insert(
                msg_id,
                InFlight {
                    msg,
                    delivered_or_dead: false,
                },
            );
            self.transmit(tick, msg_id, false);
        }
    }

    fn gathered_state(&self) -> LiftedState {
        let mut blocks = Vec::with_capacity(self.lap.num_nodes());
        for agent in &self.agents {
            blocks.extend(agent.own.iter().cloned());
        }
        LiftedState::new(self.lap.d(), self.rank, blocks)
    }

    /// Observer-side instrumentation: global cost and gradient for the trace.
    fn record_trace(&mut self, sweep: usize) {
        let state = self.gathered_state();
        let cost = laplacian::cost(self.lap, &state).unwrap_or(f64::NAN);
        let grad_norm = laplacian::gradient_norm(self.lap, &state).unwrap_or(f64::NAN);
        self.trace.sweeps.push(SweepStat {
            sweep,
            cost,
            grad_norm,
            rank: self.rank,
        });
    }

    fn on_deliver(&mut self, tick: u64, msg_id: u64) {
        let (from, to, sweep, payload) = {
            let Some(inflight) = self.in_flight.get(&msg_id) else {
                return;
            };
            let m = &inflight.msg;
            (m.from_robot, m.to_robot, m.sweep_number, m.payload.clone())
        };
        let agent = &mut self.agents[to];
        let newest = agent.cache_sweep.get(&from).copied();
        if newest.map_or(true, |s| sweep >= s) {
            for (g, block) in payload {
                agent.cache.insert(g, block);
            }
            agent.cache_sweep.insert(from, sweep);
            *agent.fresh.entry(from).or_insert(0) += 1;
        }
        // acknowledge (acks ride the same lossy channel; retransmission
        // covers lost acks)
        self.traffic.acks_sent += 1;
        let lat = self.latency();
        if !self.dropped() {
            self.schedule(tick + lat, 1, EventKind::AckDeliver(msg_id));
        }
    }

    fn on_token(&mut self, tick: u64, robot: usize, round_flags: &mut Vec<bool>) {
        let inner = self.options.inner_steps;
        let rank = self.rank;
        let ran = self.agents[robot].update(rank, inner);
        // a skipped (stale-view) update cannot attest convergence
        round_flags[robot] = ran && self.agents[robot].local_grad_norm <= self.grad_tol;
        self.broadcast_separators(tick, robot, self.round);

        let last = robot + 1 == self.agents.len();
        if !last {
            self.schedule(tick + 1, 3, EventKind::Token(robot + 1));
            return;
        }
        // end of round
        self.record_trace(self.round);
        if round_flags.iter().all(|&f| f) {
            self.consec_rounds_converged += 1;
        } else {
            self.consec_rounds_converged = 0;
        }
        round_flags.iter_mut().for_each(|f| *f = false);
        self.round += 1;
        if self.consec_rounds_converged >= 2 {
            self.finished = Some(TerminationReason::Converged);
        } else if self.round >= self.options.max_sweeps {
            self.finished = Some(TerminationReason::MaxSweeps);
        } else {
            self.schedule(tick + 1, 3, EventKind::Token(0));
        }
    }

    fn on_wake(&mut self, tick: u64, robot: usize) {
        let inner = self.options.inner_steps;
        let rank = self.rank;
        let ran = self.agents[robot].update(rank, inner);
        let converged_now = ran && self.agents[robot].local_grad_norm <= self.grad_tol;
        let agent = &mut self.agents[robot];
        agent.consec_converged = if converged_now {
            agent.consec_converged + 1
        } else if ran {
            0
        } else {
            agent.consec_converged
        };
        let sweep = self.agents[robot].updates_done;
        self.broadcast_separators(tick, robot, sweep);
        if robot == 0 {
            self.record_trace(sweep);
        }

        // Two consecutive settled updates per agent. Outstanding
        // retransmissions at this point carry the settled separator values,
        // so they cannot reopen the caches.
        let everyone_settled = self
            .agents
            .iter()
            .all(|a| a.consec_converged >= 2 && a.updates_done >= 1);
        if everyone_settled {
            self.finished = Some(TerminationReason::Converged);
            return;
        }
        if self.agents[robot].updates_done >= self.options.max_sweeps {
            self.finished = Some(TerminationReason::MaxSweeps);
            return;
        }
        let jitter = self.rng.gen_range(0..3u64);
        self.schedule(tick + 1 + jitter, 3, EventKind::Wake(robot));
    }
}

/// Runs the RBCD solve at the initial rank with agents exchanging only
/// separator poses. Deterministic given (graph, options, profile, seed).
///
/// `init` defaults to the spanning-tree initialization at rank
/// `options.r_init` when not supplied.
pub fn run_decentralized(
    graph: &MultiRobotGraph,
    options: &SolverOptions,
    profile: &NetworkProfile,
    seed: u64,
    init: Option<LiftedState>,
) -> Result<DecentralizedRun> {
    profile.check()?;
    if profile.mode == NetMode::SynchronousRounds
        && options.block_rule != crate::solver::BlockRule::RoundRobin
    {
        return Err(Error::UnsupportedOptions(
            "synchronous rounds require the round-robin block rule (token passing)".into(),
        ));
    }
    let lap = laplacian::assemble(graph)?;
    let init = match init {
        Some(x) => x,
        None => crate::solver::initialize(
            graph,
            &crate::solver::InitStrategy::SpanningTree,
            options.r_init_for(graph.dim),
            options.seed,
        )?,
    };
    run_decentralized_with(&lap, options, profile, seed, init)
}

/// [`run_decentralized`] against a prebuilt Laplacian and explicit initial
/// state (used by the staircase pipeline between rank increases).
pub fn run_decentralized_with(
    lap: &ConnectionLaplacian,
    options: &SolverOptions,
    profile: &NetworkProfile,
    seed: u64,
    init: LiftedState,
) -> Result<DecentralizedRun> {
    profile.check()?;
    let num_robots = lap.num_robots();
    let rank = init.rank();
    let init_cost = laplacian::cost(lap, &init)?;
    let grad_tol = options.grad_tol_for(init_cost);

    // bootstrap: agents receive their own blocks and the neighbor separator
    // blocks of the initial state out of band
    let mut agents = Vec::with_capacity(num_robots);
    for robot in 0..num_robots {
        let rb = block_submatrices(lap, robot)?;
        let own: Vec<NodeBlock> = init.blocks()[rb.first..rb.first + rb.count].to_vec();
        let mut cache = BTreeMap::new();
        let mut fresh = BTreeMap::new();
        for (nb, list) in &rb.coupling {
            fresh.insert(*nb, 1); // bootstrap state counts as heard-from
            for c in list {
                cache.insert(c.remote, init.blocks()[c.remote].clone());
            }
        }
        agents.push(Agent {
            rb,
            own,
            cache,
            cache_sweep: BTreeMap::new(),
            fresh,
            local_grad_norm: f64::INFINITY,
            updates_done: 0,
            consec_converged: 0,
        });
    }

    let mut sim = Sim {
        lap,
        options,
        profile: *profile,
        rng: ChaCha8Rng::seed_from_u64(seed),
        agents,
        heap: BinaryHeap::new(),
        seq: 0,
        msg_seq: 0,
        in_flight: BTreeMap::new(),
        traffic: TrafficStats {
            per_robot_sent: vec![0; num_robots],
            ..Default::default()
        },
        log: Vec::new(),
        messages: Vec::new(),
        grad_tol,
        round: 0,
        consec_rounds_converged: 0,
        trace: SolveTrace {
            sweeps: Vec::new(),
            termination: TerminationReason::MaxSweeps,
            null_steps: 0,
            grad_tol,
        },
        rank,
        finished: None,
    };

    let mut round_flags = vec![false; num_robots];
    match profile.mode {
        NetMode::SynchronousRounds => sim.schedule(0, 3, EventKind::Token(0)),
        NetMode::Asynchronous => {
            for robot in 0..num_robots {
                sim.schedule(1 + robot as u64, 3, EventKind::Wake(robot));
            }
        }
    }
    if num_robots <= 1 && profile.mode == NetMode::Asynchronous {
        // a single agent trivially converges after two quiet updates
    }

    let mut final_tick = 0;
    while sim.finished.is_none() {
        let Some(Reverse(ev)) = sim.heap.pop() else {
            break;
        };
        final_tick = ev.tick;
        match ev.kind {
            EventKind::Deliver(id) => sim.on_deliver(ev.tick, id),
            EventKind::AckDeliver(id) => {
                if let Some(m) = sim.in_flight.get_mut(&id) {
                    m.delivered_or_dead = true;
                }
            }
            EventKind::TimeoutCheck(id) => {
                let pending = sim
                    .in_flight
                    .get(&id)
                    .map_or(false, |m| !m.delivered_or_dead);
                if pending && sim.finished.is_none() {
                    sim.transmit(ev.tick, id, true);
                }
            }
            EventKind::Token(robot) => sim.on_token(ev.tick, robot, &mut round_flags),
            EventKind::Wake(robot) => sim.on_wake(ev.tick, robot),
        }
    }

    let termination = sim.finished.unwrap_or(TerminationReason::MaxSweeps);
    let state = sim.gathered_state();
    let mut trace = sim.trace;
    trace.termination = termination;
    Ok(DecentralizedRun {
        state,
        trace,
        traffic: sim.traffic,
        log: sim.log,
        messages: sim.messages,
        final_tick,
    })
}
