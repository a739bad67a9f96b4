//! Deterministic cluster: nodes, a virtual clock and an event queue.
//!
//! Everything runs on one thread. Events are ordered by virtual time and then
//! by enqueue sequence number, so a given config, seed and input set always
//! produces the same trace.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};

use crate::channel::{
    decode_envelope, encode_envelope, ChannelConfig, Envelope, KeyEpochState, MsgType,
};
use crate::cis::profile_source;
use crate::detection::{
    make_offer, AlertEvent, Confirmation, ConsensusState, OfferPayload, Outcome, WorkerInbox,
};
use crate::NodeId;

use super::config::{ClusterConfig, CostModel, TimingMode};
use super::metrics::{overhead_percent, MetricsReport, ProcessReport};
use super::patch::{SourceText, TamperPatch};
use super::SimError;

/// A process to run on its primary node and every replica.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledProcess {
    pub process_id: String,
    /// Each hosting node's copy of the listing.
    pub sources: BTreeMap<NodeId, String>,
    pub primary: NodeId,
    pub replicas: Vec<NodeId>,
    /// Simulated run time of the process itself.
    pub exec_time: Duration,
    pub start_at: Duration,
    /// Extra virtual time before a node's profile is ready.
    pub profile_delay: BTreeMap<NodeId, Duration>,
}

impl ScheduledProcess {
    /// Same listing on every hosting node, starting immediately.
    pub fn replicated(
        process_id: impl Into<String>,
        source: &str,
        primary: NodeId,
        replicas: Vec<NodeId>,
        exec_time: Duration,
    ) -> Self {
        let sources = std::iter::once(primary)
            .chain(replicas.iter().copied())
            .map(|n| (n, source.to_string()))
            .collect();
        Self {
            process_id: process_id.into(),
            sources,
            primary,
            replicas,
            exec_time,
            start_at: Duration::ZERO,
            profile_delay: BTreeMap::new(),
        }
    }

    pub fn hosts(&self) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::once(self.primary).chain(self.replicas.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessResult {
    pub process_id: String,
    pub outcome: Outcome,
    pub alert: Option<AlertEvent>,
}

#[derive(Debug)]
enum Event {
    Rotate(NodeId),
    Start(usize),
    ProfileReady { node: NodeId, process: usize },
    Deliver { to: NodeId, bytes: Vec<u8> },
    ConsensusDeadline(usize),
    WorkerDeadline { node: NodeId, process: usize },
}

#[derive(Debug)]
struct Scheduled {
    at: Duration,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

struct Node {
    id: NodeId,
    channel: KeyEpochState,
    inbox: WorkerInbox,
    rng: ChaCha20Rng,
    rotations: u64,
    worker_deadlines: BTreeMap<usize, u64>,
}

struct ProcessRun {
    spec: ScheduledProcess,
    started: bool,
    consensus: Option<ConsensusState>,
    outcome: Outcome,
    alert: Option<AlertEvent>,
    detect_ns: u128,
    cfi_count: usize,
    total_instructions: usize,
    node_errors: Vec<(NodeId, String)>,
    deadline_seq: Option<u64>,
}

/// Wall-clock timer when timing is measured, nothing when modeled.
struct Stopwatch(Option<Instant>);

pub struct Cluster {
    config: ClusterConfig,
    warnings: Vec<String>,
    nodes: Vec<Node>,
    processes: Vec<ProcessRun>,
    index: BTreeMap<String, usize>,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    now: Duration,
    live_work: usize,
    cancelled: BTreeSet<u64>,
    net_rng: ChaCha8Rng,
    trace: Vec<String>,
}

impl Cluster {
    /// Creates the nodes and completes one key exchange at time zero so every
    /// ordered pair of nodes holds a key.
    pub fn build(config: ClusterConfig) -> Result<Self, SimError> {
        let warnings = config.validate()?;
        let ids: Vec<NodeId> = (0..config.node_count as u32).map(NodeId).collect();
        let mut nodes = Vec::with_capacity(ids.len());
        for &id in &ids {
            let channel_config = ChannelConfig {
                node_id: id,
                rotation_period: config.rotation_period,
                key_history_depth: config.key_history_depth,
            };
            let channel = KeyEpochState::new(channel_config, ids.iter().copied())
                .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
            let mut rng = ChaCha20Rng::seed_from_u64(config.rng_seed);
            rng.set_stream(u64::from(id.0) + 1);
            nodes.push(Node {
                id,
                channel,
                inbox: WorkerInbox::new(id, config.consensus_timeout),
                rng,
                rotations: 0,
                worker_deadlines: BTreeMap::new(),
            });
        }

        let mut announces = Vec::new();
        for node in &mut nodes {
            announces.extend(node.channel.rotate_epoch(Duration::ZERO, &mut node.rng));
        }
        for a in announces {
            nodes[a.to.0 as usize]
                .channel
                .accept_announce(&a.envelope)
                .expect("fresh announce is well formed");
        }

        let mut cluster = Self {
            net_rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            config,
            warnings,
            nodes,
            processes: Vec::new(),
            index: BTreeMap::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            now: Duration::ZERO,
            live_work: 0,
            cancelled: BTreeSet::new(),
            trace: Vec::new(),
        };
        for w in cluster.warnings.clone() {
            cluster.log(None, format!("warning {w}"));
        }
        cluster.log(None, format!("initial key exchange, {} nodes", ids.len()));
        for id in ids {
            let at = cluster.config.rotation_period;
            cluster.push(at, Event::Rotate(id));
        }
        Ok(cluster)
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn now(&self) -> Duration {
        self.now
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn channel(&self, node: NodeId) -> Option<&KeyEpochState> {
        self.nodes.get(node.0 as usize).map(|n| &n.channel)
    }

    /// Rotations performed by the event loop (not counting the initial exchange).
    pub fn rotations(&self, node: NodeId) -> Option<u64> {
        self.nodes.get(node.0 as usize).map(|n| n.rotations)
    }

    pub fn source(&self, process_id: &str, node: NodeId) -> Option<&str> {
        let p = self.index.get(process_id)?;
        self.processes[*p].spec.sources.get(&node).map(String::as_str)
    }

    fn node_exists(&self, id: NodeId) -> bool {
        (id.0 as usize) < self.nodes.len()
    }

    /// Registers a process. Profiling starts at `start_at` once the loop runs.
    pub fn schedule_process(&mut self, sp: ScheduledProcess) -> Result<usize, SimError> {
        if self.index.contains_key(&sp.process_id) {
            return Err(SimError::DuplicateProcess(sp.process_id));
        }
        if let Some(bad) = sp.hosts().find(|n| !self.node_exists(*n)) {
            return Err(SimError::UnknownNode(bad));
        }
        let invalid = |m: String| Err(SimError::InvalidProcess(sp.process_id.clone(), m));
        if sp.replicas.contains(&sp.primary) {
            return invalid(format!("primary {} is also listed as a replica", sp.primary));
        }
        let distinct: BTreeSet<_> = sp.replicas.iter().collect();
        if distinct.len() != sp.replicas.len() {
            return invalid("replicas are not distinct".into());
        }
        if sp.replicas.len() + 1 != self.config.replication_factor {
            return invalid(format!(
                "{} replicas given, replication factor {} needs {}",
                sp.replicas.len(),
                self.config.replication_factor,
                self.config.replication_factor - 1
            ));
        }
        if let Some(missing) = sp.hosts().find(|n| !sp.sources.contains_key(n)) {
            return invalid(format!("no source for node {missing}"));
        }
        let idx = self.processes.len();
        let at = sp.start_at.max(self.now);
        self.index.insert(sp.process_id.clone(), idx);
        self.processes.push(ProcessRun {
            spec: sp,
            started: false,
            consensus: None,
            outcome: Outcome::Pending,
            alert: None,
            detect_ns: 0,
            cfi_count: 0,
            total_instructions: 0,
            node_errors: Vec::new(),
            deadline_seq: None,
        });
        self.push(at, Event::Start(idx));
        Ok(idx)
    }

    /// Patches one node's copy of a process that has not started yet.
    pub fn inject_tamper(&mut self, patch: &TamperPatch) -> Result<(), SimError> {
        if !self.node_exists(patch.target_node) {
            return Err(SimError::UnknownNode(patch.target_node));
        }
        let idx = *self
            .index
            .get(&patch.process_id)
            .ok_or_else(|| SimError::UnknownProcess(patch.process_id.clone()))?;
        let run = &mut self.processes[idx];
        if run.started {
            return Err(SimError::AlreadyStarted(patch.process_id.clone()));
        }
        let source = run.spec.sources.get_mut(&patch.target_node).ok_or_else(|| {
            SimError::NotHosting {
                node: patch.target_node,
                process_id: patch.process_id.clone(),
            }
        })?;
        let (patched, _) = patch.apply(&SourceText::parse(source))?;
        *source = patched.render();
        let summary = format!(
            "tamper process={} +{} -{} lines",
            patch.process_id,
            patch.insertions.len(),
            patch.deletions.len()
        );
        self.log(Some(patch.target_node), summary);
        Ok(())
    }

    /// Processes events until no protocol work is outstanding (only periodic
    /// key rotations remain) or the next event lies beyond `max_time`.
    pub fn run_until_quiet(&mut self, max_time: Duration) -> Vec<ProcessResult> {
        while self.live_work > 0 {
            match self.queue.peek() {
                Some(Reverse(next)) if next.at <= max_time => {}
                _ => break,
            }
            self.step();
        }
        self.results()
    }

    /// Processes every event up to `now + span`, rotations included, and
    /// leaves the clock at that instant.
    pub fn run_for(&mut self, span: Duration) -> Vec<ProcessResult> {
        let target = self.now + span;
        while matches!(self.queue.peek(), Some(Reverse(next)) if next.at <= target) {
            self.step();
        }
        self.now = target;
        self.results()
    }

    pub fn results(&self) -> Vec<ProcessResult> {
        self.processes
            .iter()
            .map(|p| ProcessResult {
                process_id: p.spec.process_id.clone(),
                outcome: p.outcome,
                alert: p.alert.clone(),
            })
            .collect()
    }

    pub fn result(&self, process_id: &str) -> Option<ProcessResult> {
        let p = &self.processes[*self.index.get(process_id)?];
        Some(ProcessResult {
            process_id: p.spec.process_id.clone(),
            outcome: p.outcome,
            alert: p.alert.clone(),
        })
    }

    /// Per-process overhead and the aggregate fit over completed processes.
    pub fn report_metrics(&self) -> Result<MetricsReport, SimError> {
        let reports: Vec<ProcessReport> = self
            .processes
            .iter()
            .filter(|p| p.outcome != Outcome::Pending)
            .map(|p| {
                let consensus = p.consensus.as_ref();
                let time_detect_s = p.detect_ns as f64 / 1e9;
                let time_execute_s = p.spec.exec_time.as_secs_f64();
                ProcessReport {
                    process_id: p.spec.process_id.clone(),
                    coordinator: p.spec.primary,
                    replicas: p.spec.replicas.clone(),
                    outcome: p.outcome,
                    unsafe_workers: consensus.map(|c| c.unsafe_workers()).unwrap_or_default(),
                    missing_workers: consensus.map(|c| c.missing_workers()).unwrap_or_default(),
                    cfi_count: p.cfi_count,
                    total_instructions: p.total_instructions,
                    time_execute_s,
                    time_detect_s,
                    overhead_percent: overhead_percent(time_detect_s, time_execute_s),
                    timing: self.config.timing.label().to_string(),
                }
            })
            .collect();
        if reports.is_empty() {
            return Err(SimError::NoCompletedProcesses);
        }
        Ok(MetricsReport::from_processes(reports))
    }

    /// Parse failures per node for a process.
    pub fn node_errors(&self, process_id: &str) -> Vec<(NodeId, String)> {
        self.index
            .get(process_id)
            .map(|i| self.processes[*i].node_errors.clone())
            .unwrap_or_default()
    }

    // ---- event loop ----

    fn push(&mut self, at: Duration, event: Event) -> u64 {
        let seq = self.seq;
        self.seq += 1;
        if !matches!(event, Event::Rotate(_)) {
            self.live_work += 1;
        }
        self.queue.push(Reverse(Scheduled { at, seq, event }));
        seq
    }

    fn cancel(&mut self, seq: u64) {
        if self.cancelled.insert(seq) {
            self.live_work -= 1;
        }
    }

    fn step(&mut self) {
        let Some(Reverse(next)) = self.queue.pop() else {
            return;
        };
        self.now = next.at;
        if self.cancelled.remove(&next.seq) {
            return;
        }
        if !matches!(next.event, Event::Rotate(_)) {
            self.live_work -= 1;
        }
        match next.event {
            Event::Rotate(node) => self.on_rotate(node),
            Event::Start(p) => self.on_start(p),
            Event::ProfileReady { node, process } => self.on_profile_ready(node, process),
            Event::Deliver { to, bytes } => self.on_deliver(to, bytes),
            Event::ConsensusDeadline(p) => self.on_consensus_deadline(p),
            Event::WorkerDeadline { node, process } => self.on_worker_deadline(node, process),
        }
    }

    fn log(&mut self, node: Option<NodeId>, msg: String) {
        let mut line = String::new();
        let _ = write!(line, "{}.{:06}", self.now.as_secs(), self.now.subsec_micros());
        match node {
            Some(n) => {
                let _ = write!(line, " n{n} {msg}");
            }
            None => {
                let _ = write!(line, " -- {msg}");
            }
        }
        self.trace.push(line);
    }

    fn cost(&self) -> CostModel {
        match self.config.timing {
            TimingMode::Modeled(c) => c,
            TimingMode::Measured => CostModel::default(),
        }
    }

    fn stopwatch(&self) -> Stopwatch {
        match self.config.timing {
            TimingMode::Measured => Stopwatch(Some(Instant::now())),
            TimingMode::Modeled(_) => Stopwatch(None),
        }
    }

    fn charge(&mut self, process: usize, sw: Stopwatch, modeled_ns: u64) {
        let ns = match sw.0 {
            Some(t) => t.elapsed().as_nanos(),
            None => u128::from(modeled_ns),
        };
        self.processes[process].detect_ns += ns;
    }

    fn send(&mut self, from: NodeId, to: NodeId, env: Envelope) {
        let bytes = match encode_envelope(&env) {
            Ok(b) => b,
            Err(e) => {
                self.log(Some(from), format!("encode failed: {e}"));
                return;
            }
        };
        let latency = self.config.latency.sample(&mut self.net_rng);
        self.push(self.now + latency, Event::Deliver { to, bytes });
    }

    fn on_rotate(&mut self, id: NodeId) {
        let now = self.now;
        let node = &mut self.nodes[id.0 as usize];
        let announces = node.channel.rotate_epoch(now, &mut node.rng);
        node.rotations += 1;
        let epoch = node.channel.current_epoch();
        self.log(Some(id), format!("rotate epoch={epoch}"));
        for a in announces {
            self.send(id, a.to, a.envelope);
        }
        let next = now + self.config.rotation_period;
        self.push(next, Event::Rotate(id));
    }

    fn on_start(&mut self, p: usize) {
        let now = self.now;
        let run = &mut self.processes[p];
        run.started = true;
        let pid = run.spec.process_id.clone();
        let ready: Vec<(NodeId, Duration)> = run
            .spec
            .hosts()
            .map(|n| (n, now + run.spec.profile_delay.get(&n).copied().unwrap_or_default()))
            .collect();
        self.log(Some(self.processes[p].spec.primary), format!("start process={pid}"));
        for (node, at) in ready {
            self.push(at, Event::ProfileReady { node, process: p });
        }
    }

    fn on_profile_ready(&mut self, node: NodeId, p: usize) {
        let opts = self.config.profile;
        let cost = self.cost();
        let spec = &self.processes[p].spec;
        let pid = spec.process_id.clone();
        let is_primary = spec.primary == node;
        let text = spec.sources[&node].clone();

        let sw = self.stopwatch();
        let profiled = profile_source(&text, &pid, opts);
        let modeled = match &profiled {
            Ok((prog, cis, _)) => {
                cost.per_instruction_ns * prog.len() as u64
                    + cost.per_control_token_ns * cis.total_len() as u64
            }
            Err(_) => 0,
        };
        self.charge(p, sw, modeled);

        let fp = match profiled {
            Ok((prog, cis, fp)) => {
                self.log(
                    Some(node),
                    format!(
                        "profiled process={pid} instructions={} cfi={} digest={}",
                        prog.len(),
                        cis.total_len(),
                        fp.combined
                    ),
                );
                if is_primary {
                    self.processes[p].cfi_count = cis.total_len();
                    self.processes[p].total_instructions = prog.len();
                }
                Some(fp)
            }
            Err(e) => {
                self.log(Some(node), format!("profile failed process={pid}: {e}"));
                self.processes[p].node_errors.push((node, e.to_string()));
                None
            }
        };

        if is_primary {
            self.coordinate(node, p, fp.as_ref());
        } else if let Some(fp) = fp {
            let answers = self.nodes[node.0 as usize].inbox.set_local(fp);
            if !answers.is_empty() {
                if let Some(seq) = self.nodes[node.0 as usize].worker_deadlines.remove(&p) {
                    self.cancel(seq);
                }
            }
            for (coordinator, c) in answers {
                self.confirm(node, coordinator, p, c);
            }
        }
    }

    fn coordinate(&mut self, node: NodeId, p: usize, fp: Option<&crate::cis::Fingerprint>) {
        let now = self.now;
        let timeout = self.config.consensus_timeout;
        let replicas: BTreeSet<NodeId> = self.processes[p].spec.replicas.iter().copied().collect();
        let pid = self.processes[p].spec.process_id.clone();

        let Some(fp) = fp else {
            // nothing to offer: every replica will be missing at the deadline
            let state = ConsensusState::new(&pid, node, replicas, now + timeout);
            self.open_consensus(p, state);
            return;
        };
        if replicas.is_empty() {
            self.processes[p].outcome = Outcome::NoAttack;
            self.log(Some(node), format!("no workers process={pid} outcome=no_attack"));
            return;
        }

        let crypto_ns = self.cost().per_crypto_op_ns;
        let sw = self.stopwatch();
        let n = &mut self.nodes[node.0 as usize];
        let offer = make_offer(fp, &replicas, &n.channel, now, timeout, &mut n.rng)
            .expect("replica set is non-empty");
        self.charge(p, sw, crypto_ns * offer.envelopes.len() as u64);

        for (replica, err) in &offer.unreachable {
            self.log(Some(node), format!("offer to n{replica} skipped: {err}"));
        }
        for a in offer.envelopes {
            self.log(
                Some(node),
                format!("offer process={pid} to=n{} epoch={}", a.to, a.envelope.key_epoch),
            );
            self.send(node, a.to, a.envelope);
        }
        self.open_consensus(p, offer.state);
    }

    fn open_consensus(&mut self, p: usize, state: ConsensusState) {
        let deadline = state.deadline;
        self.processes[p].consensus = Some(state);
        let seq = self.push(deadline, Event::ConsensusDeadline(p));
        self.processes[p].deadline_seq = Some(seq);
    }

    fn confirm(&mut self, worker: NodeId, coordinator: NodeId, p: usize, c: Confirmation) {
        let crypto_ns = self.cost().per_crypto_op_ns;
        let sw = self.stopwatch();
        let n = &mut self.nodes[worker.0 as usize];
        let sealed = n.channel.encrypt_for(
            coordinator,
            MsgType::Confirmation,
            &c.process_id,
            &c.payload(),
            &mut n.rng,
        );
        self.charge(p, sw, crypto_ns);
        match sealed {
            Ok(env) => {
                self.log(
                    Some(worker),
                    format!("confirm process={} verdict={:?} to=n{coordinator}", c.process_id, c.verdict),
                );
                self.send(worker, coordinator, env);
            }
            Err(e) => self.log(Some(worker), format!("confirmation dropped: {e}")),
        }
    }

    fn on_deliver(&mut self, to: NodeId, bytes: Vec<u8>) {
        let env = match decode_envelope(&bytes) {
            Ok(env) => env,
            Err(e) => {
                self.log(Some(to), format!("undecodable frame dropped: {e}"));
                return;
            }
        };
        match env.msg_type {
            MsgType::KeyAnnounce => {
                let accepted = self.nodes[to.0 as usize].channel.accept_announce(&env);
                let note = match accepted {
                    Ok(true) => "accepted",
                    Ok(false) => "ignored stale",
                    Err(_) => "rejected",
                };
                self.log(
                    Some(to),
                    format!("key from n{} epoch={} {note}", env.sender_id, env.key_epoch),
                );
            }
            MsgType::FingerprintOffer => self.on_offer(to, env),
            MsgType::Confirmation => self.on_confirmation(to, env),
            MsgType::Alert => {
                let msg = match self.nodes[to.0 as usize].channel.decrypt(&env) {
                    Ok(body) => format!("alert received {}", String::from_utf8_lossy(&body)),
                    Err(e) => format!("alert undecryptable: {e}"),
                };
                self.log(Some(to), msg);
            }
        }
    }

    fn on_offer(&mut self, to: NodeId, env: Envelope) {
        let Some(&p) = self.index.get(&env.process_id) else {
            self.log(Some(to), format!("offer for unknown process {:?} dropped", env.process_id));
            return;
        };
        let now = self.now;
        let cost = self.cost();
        let sw = self.stopwatch();
        let node = &mut self.nodes[to.0 as usize];
        let opened = node
            .channel
            .decrypt(&env)
            .map_err(|e| e.to_string())
            .and_then(|plain| OfferPayload::from_bytes(&plain).map_err(|e| e.to_string()));
        let answer = opened
            .as_ref()
            .ok()
            .map(|digests| node.inbox.receive_offer(env.sender_id, &env.process_id, *digests, now));
        let held_until = node.inbox.pending(&env.process_id).map(|o| o.deadline);
        self.charge(p, sw, cost.per_crypto_op_ns + cost.per_match_ns);

        match (opened, answer) {
            (Err(e), _) => self.log(Some(to), format!("offer from n{} dropped: {e}", env.sender_id)),
            (Ok(_), Some(Some((coordinator, c)))) => self.confirm(to, coordinator, p, c),
            (Ok(_), _) => {
                let deadline = held_until.unwrap_or(now);
                self.log(Some(to), format!("offer process={} held until local profile", env.process_id));
                if !self.nodes[to.0 as usize].worker_deadlines.contains_key(&p) {
                    let seq = self.push(deadline, Event::WorkerDeadline { node: to, process: p });
                    self.nodes[to.0 as usize].worker_deadlines.insert(p, seq);
                }
            }
        }
    }

    fn on_confirmation(&mut self, to: NodeId, env: Envelope) {
        let Some(&p) = self.index.get(&env.process_id) else {
            self.log(Some(to), format!("confirmation for unknown process {:?} dropped", env.process_id));
            return;
        };
        if self.processes[p].spec.primary != to || self.processes[p].consensus.is_none() {
            self.log(Some(to), format!("confirmation for {:?} not coordinated here", env.process_id));
            return;
        }
        let cost = self.cost();
        let sw = self.stopwatch();
        let plain = self.nodes[to.0 as usize].channel.decrypt(&env);
        let recorded = plain.map_err(|e| e.to_string()).and_then(|bytes| {
            let c = Confirmation::from_payload(&env.process_id, env.sender_id, &bytes)
                .map_err(|e| e.to_string())?;
            let state = self.processes[p].consensus.as_mut().expect("checked above");
            state.record_confirmation(&c).map(|o| (c.verdict, o)).map_err(|e| e.to_string())
        });
        self.charge(p, sw, cost.per_crypto_op_ns);
        match recorded {
            Ok((verdict, outcome)) => {
                self.log(
                    Some(to),
                    format!("recorded process={} from=n{} verdict={verdict:?}", env.process_id, env.sender_id),
                );
                if outcome != Outcome::Pending {
                    self.conclude(p);
                }
            }
            Err(e) => self.log(Some(to), format!("confirmation from n{} rejected: {e}", env.sender_id)),
        }
    }

    fn on_consensus_deadline(&mut self, p: usize) {
        self.processes[p].deadline_seq = None;
        self.conclude(p);
    }

    fn on_worker_deadline(&mut self, node: NodeId, p: usize) {
        let now = self.now;
        let n = &mut self.nodes[node.0 as usize];
        n.worker_deadlines.remove(&p);
        let expired = n.inbox.expire(now);
        for (coordinator, c) in expired {
            self.log(Some(node), format!("no local profile for process={} by deadline", c.process_id));
            let idx = self.index.get(&c.process_id).copied().unwrap_or(p);
            self.confirm(node, coordinator, idx, c);
        }
    }

    fn conclude(&mut self, p: usize) {
        let now = self.now;
        let Some(state) = self.processes[p].consensus.as_mut() else {
            return;
        };
        let (outcome, alert) = state.finalize(now);
        let coordinator = state.coordinator_id;
        if outcome == Outcome::Pending {
            return;
        }
        let first = self.processes[p].outcome == Outcome::Pending;
        self.processes[p].outcome = outcome;
        if first {
            if let Some(seq) = self.processes[p].deadline_seq.take() {
                self.cancel(seq);
            }
            let pid = self.processes[p].spec.process_id.clone();
            self.log(Some(coordinator), format!("decided process={pid} outcome={outcome:?}"));
        }
        if let Some(alert) = alert {
            self.log(
                Some(coordinator),
                format!(
                    "ALERT process={} unsafe={:?} missing={:?}",
                    alert.process_id, alert.unsafe_workers, alert.missing_workers
                ),
            );
            self.forward_alert(coordinator, p, &alert);
            self.processes[p].alert = Some(alert);
        }
    }

    fn forward_alert(&mut self, coordinator: NodeId, p: usize, alert: &AlertEvent) {
        let Some(master) = self.config.master_node else {
            return;
        };
        if master == coordinator {
            return;
        }
        let n = &mut self.nodes[coordinator.0 as usize];
        let sealed = n.channel.encrypt_for(
            master,
            MsgType::Alert,
            &alert.process_id,
            &alert.payload_json(),
            &mut n.rng,
        );
        match sealed {
            Ok(env) => self.send(coordinator, master, env),
            Err(e) => self.log(Some(coordinator), format!("alert to master dropped: {e}")),
        }
        let _ = p;
    }
}

impl std::fmt::Debug for Cluster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cluster")
            .field("nodes", &self.nodes.iter().map(|n| n.id).collect::<Vec<_>>())
            .field("now", &self.now)
            .field("processes", &self.processes.len())
            .field("queued", &self.queue.len())
            .finish()
    }
}
