//! The m-participant controlled-teleportation engine.
//!
//! A run is driven by a [`ProtocolPlan`] derived from the configuration and
//! proceeds in four rounds:
//!
//! 1. every message holder Bell-measures its message qubit against its
//!    resource qubit of the same instance, in ascending instance order;
//! 2. every other non-receiver resource qubit is measured in the X basis
//!    (Hadamard then Z) by its holder, ascending participant then instance;
//! 3. the classical bits are routed to the receiver, minus any withheld bits;
//! 4. the receiver corrects each output qubit with `Z^{c_j} X^{c_{n+j}} Z^{⊕ controllers}`.
//!
//! Bit ids follow the Bell-pair numbering: `c_j` is the phase bit and
//! `c_{n+j}` the flip bit for message qubit `j`; the controller bits of
//! instance `j` are `c_{in+j}` for controller rank `i = 2, 3, ...`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{fidelity, DensityMatrix, Gate, StateVector};
use crate::resource::{compose, make_resource, MessageState, Mode, ResourceLayout};

/// Largest total qubit count the engine will simulate.
pub const QUBIT_CAP: usize = 22;

/// Classical bit `c_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitId(pub usize);

impl fmt::Display for BitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl FromStr for BitId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('c')
            .and_then(|k| k.parse().ok())
            .map(BitId)
            .ok_or_else(|| Error::Parse {
                what: "bit id",
                input: s.to_string(),
            })
    }
}

impl Serialize for BitId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub m: usize,
    pub n: usize,
    pub mode: Mode,
    pub receiver: usize,
    /// Participant holding each message qubit.
    pub allocation: Vec<usize>,
    pub seed: u64,
    #[serde(default)]
    pub withheld: BTreeSet<BitId>,
}

impl ProtocolConfig {
    /// Standard configuration: participant 0 sends, participant m-1 receives.
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            mode: Mode::Standard,
            receiver: m.saturating_sub(1),
            allocation: vec![0; n],
            seed: 0,
            withheld: BTreeSet::new(),
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_receiver(mut self, receiver: usize) -> Self {
        self.receiver = receiver;
        self
    }

    pub fn with_allocation(mut self, allocation: Vec<usize>) -> Self {
        self.allocation = allocation;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn withholding<I: IntoIterator<Item = BitId>>(mut self, bits: I) -> Self {
        self.withheld.extend(bits);
        self
    }

    pub fn layout(&self) -> Result<ResourceLayout> {
        ResourceLayout::new(self.m, self.n, self.mode, self.receiver, self.allocation.clone())
    }

    /// Validates the configuration and derives its measurement schedule.
    pub fn plan(&self) -> Result<ProtocolPlan> {
        let layout = self.layout()?;
        if layout.total_qubits() > QUBIT_CAP {
            return Err(Error::SizeCapExceeded {
                total: layout.total_qubits(),
                cap: QUBIT_CAP,
            });
        }
        let plan = ProtocolPlan::new(layout)?;
        if let Some(bad) = self.withheld.iter().find(|b| b.0 >= plan.num_bits) {
            return Err(Error::InvalidConfig(format!(
                "withheld bit {bad} is outside the {}-bit budget",
                plan.num_bits
            )));
        }
        Ok(plan)
    }
}

/// Parses a holder list such as `"0:0,1:1"` (participant:message qubit).
/// Message qubits not listed stay with participant 0.
pub fn parse_allocation(spec: &str, n: usize) -> Result<Vec<usize>> {
    let bad = || Error::Parse {
        what: "allocation",
        input: spec.to_string(),
    };
    let mut allocation = vec![0; n];
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (p, j) = item.split_once(':').ok_or_else(bad)?;
        let p: usize = p.trim().parse().map_err(|_| bad())?;
        let j: usize = j.trim().parse().map_err(|_| bad())?;
        if j >= n {
            return Err(Error::InvalidConfig(format!(
                "allocation names message qubit {j}, but n = {n}"
            )));
        }
        allocation[j] = p;
    }
    Ok(allocation)
}

/// Bell measurement of a message qubit against a resource qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BellStep {
    pub participant: usize,
    pub instance: usize,
    pub message_qubit: usize,
    pub resource_qubit: usize,
    pub phase_bit: BitId,
    pub flip_bit: BitId,
}

/// X-basis measurement of one resource qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControllerStep {
    pub participant: usize,
    pub qubit: usize,
    pub bit: BitId,
}

/// Which bits drive the correction of one receiver qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionRule {
    pub instance: usize,
    pub qubit: usize,
    pub phase_bit: BitId,
    pub flip_bit: BitId,
    pub controller_bits: Vec<BitId>,
}

impl CorrectionRule {
    pub fn required_bits(&self) -> impl Iterator<Item = BitId> + '_ {
        [self.phase_bit, self.flip_bit]
            .into_iter()
            .chain(self.controller_bits.iter().copied())
    }
}

/// Measurement schedule and correction rules for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolPlan {
    layout: ResourceLayout,
    pub bell: Vec<BellStep>,
    pub controllers: Vec<ControllerStep>,
    pub rules: Vec<CorrectionRule>,
    num_bits: usize,
}

impl ProtocolPlan {
    pub fn new(layout: ResourceLayout) -> Result<Self> {
        let (m, n, receiver) = (layout.m(), layout.n(), layout.receiver());
        let mut bell = Vec::with_capacity(n);
        let mut controllers = Vec::new();
        let mut rules = Vec::with_capacity(n);

        match layout.mode() {
            Mode::Standard | Mode::DistributedMessage => {
                let mut per_instance: Vec<Vec<BitId>> = vec![Vec::new(); n];
                for j in 0..n {
                    let holder = layout.allocation()[j];
                    bell.push(BellStep {
                        participant: holder,
                        instance: j,
                        message_qubit: j,
                        resource_qubit: layout.qubit_of(holder, j)?,
                        phase_bit: BitId(j),
                        flip_bit: BitId(n + j),
                    });
                    let ranked = (0..m).filter(|&p| p != receiver && p != holder);
                    for (rank, p) in (2..).zip(ranked) {
                        let bit = BitId(rank * n + j);
                        per_instance[j].push(bit);
                        controllers.push(ControllerStep {
                            participant: p,
                            qubit: layout.qubit_of(p, j)?,
                            bit,
                        });
                    }
                }
                controllers.sort_by_key(|c| (c.participant, c.qubit));
                for (j, bits) in per_instance.into_iter().enumerate() {
                    rules.push(CorrectionRule {
                        instance: j,
                        qubit: layout.qubit_of(receiver, j)?,
                        phase_bit: BitId(j),
                        flip_bit: BitId(n + j),
                        controller_bits: bits,
                    });
                }
            }
            Mode::MinimalResource => {
                let available: Vec<(usize, usize)> = (0..m)
                    .filter(|&p| p != receiver)
                    .map(|p| (p, layout.holdings(p)[0]))
                    .collect();
                if n > available.len() {
                    return Err(Error::InvalidLayout(format!(
                        "minimal resource has {} sender-side qubits for {n} message qubits",
                        available.len()
                    )));
                }
                let mut paired = vec![false; available.len()];
                for j in 0..n {
                    let holder = layout.allocation()[j];
                    let own = available.iter().position(|&(p, _)| p == holder);
                    let slot = match own {
                        Some(i) if !paired[i] => i,
                        _ => paired.iter().position(|used| !used).expect("n <= available"),
                    };
                    paired[slot] = true;
                    bell.push(BellStep {
                        participant: available[slot].0,
                        instance: j,
                        message_qubit: j,
                        resource_qubit: available[slot].1,
                        phase_bit: BitId(j),
                        flip_bit: BitId(n + j),
                    });
                }
                let free = available
                    .iter()
                    .zip(&paired)
                    .filter(|(_, used)| !**used)
                    .map(|(slot, _)| *slot);
                for (k, (p, q)) in free.enumerate() {
                    controllers.push(ControllerStep {
                        participant: p,
                        qubit: q,
                        bit: BitId(2 * n + k),
                    });
                }
                let bits: Vec<BitId> = controllers.iter().map(|c| c.bit).collect();
                for (j, &q) in layout.receiver_qubits().iter().enumerate() {
                    rules.push(CorrectionRule {
                        instance: j,
                        qubit: q,
                        phase_bit: BitId(j),
                        flip_bit: BitId(n + j),
                        controller_bits: bits.clone(),
                    });
                }
            }
        }

        let num_bits = 2 * bell.len() + controllers.len();
        Ok(Self {
            layout,
            bell,
            controllers,
            rules,
            num_bits,
        })
    }

    pub fn layout(&self) -> &ResourceLayout {
        &self.layout
    }

    /// Number of classical bits the schedule produces.
    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    /// The participant that produces `bit`.
    pub fn owner_of_bit(&self, bit: BitId) -> Option<usize> {
        self.bell
            .iter()
            .find(|b| b.phase_bit == bit || b.flip_bit == bit)
            .map(|b| b.participant)
            .or_else(|| {
                self.controllers
                    .iter()
                    .find(|c| c.bit == bit)
                    .map(|c| c.participant)
            })
    }

    /// Measured qubit producing each bit, indexed by bit id.
    pub fn bit_qubits(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_bits];
        for b in &self.bell {
            out[b.phase_bit.0] = b.message_qubit;
            out[b.flip_bit.0] = b.resource_qubit;
        }
        for c in &self.controllers {
            out[c.bit.0] = c.qubit;
        }
        out
    }
}

/// CNOT(message → resource) followed by H on the message qubit.
pub fn bell_circuit(state: &mut StateVector, message_qubit: usize, resource_qubit: usize) -> Result<()> {
    state.apply_cnot(message_qubit, resource_qubit)?;
    state.apply_single(message_qubit, &Gate::H)
}

/// Bell-basis measurement of `(a, b)`; returns `(c_phase, c_flip)`.
pub fn bell_measure<R: Rng + ?Sized>(
    state: &mut StateVector,
    a: usize,
    b: usize,
    rng: &mut R,
) -> Result<(u8, u8)> {
    bell_circuit(state, a, b)?;
    let phase = state.measure_z(a, rng)?;
    let flip = state.measure_z(b, rng)?;
    Ok((phase, flip))
}

/// Hadamard then Z measurement.
pub fn controller_measure<R: Rng + ?Sized>(
    state: &mut StateVector,
    qubit: usize,
    rng: &mut R,
) -> Result<u8> {
    state.apply_single(qubit, &Gate::H)?;
    state.measure_z(qubit, rng)
}

/// Gates for one receiver qubit, in application order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionOps {
    pub qubit: usize,
    pub gates: Vec<Gate>,
}

impl CorrectionOps {
    /// Operator-product label, e.g. `ZXZ` for Z·X·Z; `I` when empty.
    pub fn label(&self) -> String {
        if self.gates.is_empty() {
            "I".to_string()
        } else {
            self.gates.iter().rev().map(Gate::name).collect()
        }
    }

    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        self.gates
            .iter()
            .try_for_each(|g| state.apply_single(self.qubit, g))
    }
}

fn folded_gates(phase: bool, flip: bool, parity: bool) -> Vec<Gate> {
    match (phase, flip, parity) {
        (true, false, true) => Vec::new(),
        _ => {
            let mut gates = Vec::with_capacity(3);
            if parity {
                gates.push(Gate::Z);
            }
            if flip {
                gates.push(Gate::X);
            }
            if phase {
                gates.push(Gate::Z);
            }
            gates
        }
    }
}

fn lookup(bits: &BTreeMap<BitId, u8>, id: BitId) -> Result<bool> {
    bits.get(&id)
        .map(|&v| v == 1)
        .ok_or(Error::MissingClassicalBit(id))
}

/// XOR-folded correction for receiver qubit `j`.
pub fn correction_ops(
    plan: &ProtocolPlan,
    bits: &BTreeMap<BitId, u8>,
    j: usize,
) -> Result<CorrectionOps> {
    let rule = plan.rules.get(j).ok_or(Error::NoSuchQubit {
        participant: plan.layout.receiver(),
        instance: j,
    })?;
    let phase = lookup(bits, rule.phase_bit)?;
    let flip = lookup(bits, rule.flip_bit)?;
    let mut parity = false;
    for &b in &rule.controller_bits {
        parity ^= lookup(bits, b)?;
    }
    Ok(CorrectionOps {
        qubit: rule.qubit,
        gates: folded_gates(phase, flip, parity),
    })
}

/// One Z per set controller bit, without XOR folding or cancellation.
pub fn per_bit_correction_ops(
    plan: &ProtocolPlan,
    bits: &BTreeMap<BitId, u8>,
    j: usize,
) -> Result<CorrectionOps> {
    let rule = &plan.rules[j];
    let mut gates = Vec::new();
    for &b in rule.controller_bits.iter().rev() {
        if lookup(bits, b)? {
            gates.push(Gate::Z);
        }
    }
    if lookup(bits, rule.flip_bit)? {
        gates.push(Gate::X);
    }
    if lookup(bits, rule.phase_bit)? {
        gates.push(Gate::Z);
    }
    Ok(CorrectionOps {
        qubit: rule.qubit,
        gates,
    })
}

/// Correction built from whatever bits arrived; each missing bit's factor is
/// dropped and reported.
pub fn partial_correction_ops(
    plan: &ProtocolPlan,
    bits: &BTreeMap<BitId, u8>,
    j: usize,
) -> (CorrectionOps, Vec<BitId>) {
    let rule = &plan.rules[j];
    let missing: Vec<BitId> = rule.required_bits().filter(|b| !bits.contains_key(b)).collect();
    let get = |b: BitId| bits.get(&b).copied() == Some(1);
    let parity = rule.controller_bits.iter().fold(false, |acc, &b| acc ^ get(b));
    let ops = CorrectionOps {
        qubit: rule.qubit,
        gates: folded_gates(get(rule.phase_bit), get(rule.flip_bit), parity),
    };
    (ops, missing)
}

/// A classical bit in flight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub bit: BitId,
    pub value: u8,
    pub sender: usize,
    pub recipients: Vec<usize>,
    pub sequence_no: usize,
}

/// Transcript events. `round` is 1 for Bell measurements, 2 for controller
/// measurements, 3 for routing and 4 for corrections and the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    BellOutcome {
        round: u8,
        participant: usize,
        instance: usize,
        pair: [usize; 2],
        phase_bit: BitId,
        flip_bit: BitId,
        values: [u8; 2],
    },
    ControllerOutcome {
        round: u8,
        participant: usize,
        qubit: usize,
        bit: BitId,
        value: u8,
    },
    Withheld {
        round: u8,
        participant: usize,
        bit: BitId,
    },
    Message {
        round: u8,
        bit: BitId,
        value: u8,
        sender: usize,
        recipients: Vec<usize>,
        sequence_no: usize,
    },
    MissingClassicalBit {
        round: u8,
        qubit: usize,
        bit: BitId,
    },
    Correction {
        round: u8,
        qubit: usize,
        gates: Vec<String>,
        label: String,
    },
    Result {
        round: u8,
        fidelity: f64,
        /// Receiver's reduced density matrix, rows of `[re, im]` pairs.
        output: Vec<Vec<[f64; 2]>>,
    },
}

impl Event {
    pub fn round(&self) -> u8 {
        match self {
            Event::BellOutcome { round, .. }
            | Event::ControllerOutcome { round, .. }
            | Event::Withheld { round, .. }
            | Event::Message { round, .. }
            | Event::MissingClassicalBit { round, .. }
            | Event::Correction { round, .. }
            | Event::Result { round, .. } => *round,
        }
    }

    /// `(sender, bit, value)` for measurement events, one entry per bit.
    fn measured_bits(&self) -> Vec<(usize, BitId, u8)> {
        match self {
            Event::BellOutcome {
                participant,
                phase_bit,
                flip_bit,
                values,
                ..
            } => vec![
                (*participant, *phase_bit, values[0]),
                (*participant, *flip_bit, values[1]),
            ],
            Event::ControllerOutcome {
                participant,
                bit,
                value,
                ..
            } => vec![(*participant, *bit, *value)],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub config: ProtocolConfig,
    pub message: MessageState,
    pub events: Vec<Event>,
    pub fidelity: f64,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serialization is infallible")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Receiver's output density matrix from the `result` event.
    pub fn output_density(&self) -> Option<Result<DensityMatrix>> {
        self.events.iter().rev().find_map(|e| match e {
            Event::Result { output, .. } => Some(matrix_from_rows(output)),
            _ => None,
        })
    }
}

pub(crate) fn matrix_rows(rho: &DensityMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..rho.dim())
        .map(|r| {
            (0..rho.dim())
                .map(|c| {
                    let v = rho.get(r, c);
                    [v.re, v.im]
                })
                .collect()
        })
        .collect()
}

fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<DensityMatrix> {
    let dim = rows.len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidDensityMatrix("matrix is not square".into()));
    }
    let m = nalgebra::DMatrix::from_fn(dim, dim, |r, c| {
        crate::qstate::Complex::new(rows[r][c][0], rows[r][c][1])
    });
    DensityMatrix::new(m)
}

/// Who gets which bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryPlan {
    pub messages: Vec<ClassicalMessage>,
    /// `(participant, bit)` pairs that were not forwarded.
    pub withheld: Vec<(usize, BitId)>,
}

/// Addresses every measured, non-withheld bit to the receiver alone,
/// preserving each sender's measurement order.
pub fn route_bits(config: &ProtocolConfig, transcript_events: &[Event]) -> DeliveryPlan {
    let mut messages = Vec::new();
    let mut withheld = Vec::new();
    for (sender, bit, value) in transcript_events.iter().flat_map(Event::measured_bits) {
        if config.withheld.contains(&bit) {
            withheld.push((sender, bit));
            continue;
        }
        messages.push(ClassicalMessage {
            bit,
            value,
            sender,
            recipients: vec![config.receiver],
            sequence_no: messages.len(),
        });
    }
    DeliveryPlan { messages, withheld }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub transcript: Transcript,
    pub fidelity: f64,
    /// All measured bits, including withheld ones.
    pub bits: BTreeMap<BitId, u8>,
    /// Global state after all measurements, before corrections.
    pub measured_state: StateVector,
    /// Global state after corrections.
    pub final_state: StateVector,
    pub output: DensityMatrix,
}

/// Executes one seeded protocol run.
pub fn run_protocol(config: &ProtocolConfig, message: &MessageState) -> Result<ProtocolRun> {
    let plan = config.plan()?;
    if message.n() != config.n {
        return Err(Error::InvalidConfig(format!(
            "message has {} qubits, configuration expects {}",
            message.n(),
            config.n
        )));
    }
    let layout = plan.layout();
    let mut state = compose(message, &make_resource(layout));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut events = Vec::new();
    let mut bits = BTreeMap::new();

    for step in &plan.bell {
        let (phase, flip) = bell_measure(&mut state, step.message_qubit, step.resource_qubit, &mut rng)?;
        bits.insert(step.phase_bit, phase);
        bits.insert(step.flip_bit, flip);
        events.push(Event::BellOutcome {
            round: 1,
            participant: step.participant,
            instance: step.instance,
            pair: [step.message_qubit, step.resource_qubit],
            phase_bit: step.phase_bit,
            flip_bit: step.flip_bit,
            values: [phase, flip],
        });
    }
    for step in &plan.controllers {
        let value = controller_measure(&mut state, step.qubit, &mut rng)?;
        bits.insert(step.bit, value);
        events.push(Event::ControllerOutcome {
            round: 2,
            participant: step.participant,
            qubit: step.qubit,
            bit: step.bit,
            value,
        });
    }

    let delivery = route_bits(config, &events);
    for &(participant, bit) in &delivery.withheld {
        events.push(Event::Withheld {
            round: 3,
            participant,
            bit,
        });
    }
    let mut delivered = BTreeMap::new();
    for msg in &delivery.messages {
        delivered.insert(msg.bit, msg.value);
        events.push(Event::Message {
            round: 3,
            bit: msg.bit,
            value: msg.value,
            sender: msg.sender,
            recipients: msg.recipients.clone(),
            sequence_no: msg.sequence_no,
        });
    }

    let measured_state = state.clone();
    for j in 0..plan.rules.len() {
        let (ops, missing) = partial_correction_ops(&plan, &delivered, j);
        for bit in missing {
            events.push(Event::MissingClassicalBit {
                round: 4,
                qubit: ops.qubit,
                bit,
            });
        }
        ops.apply(&mut state)?;
        events.push(Event::Correction {
            round: 4,
            qubit: ops.qubit,
            gates: ops.gates.iter().map(|g| g.name().to_string()).collect(),
            label: ops.label(),
        });
    }

    let output = state.reduced_density(layout.receiver_qubits())?;
    let fid = fidelity(&message.state().density_matrix(), &output)?;
    events.push(Event::Result {
        round: 4,
        fidelity: fid,
        output: matrix_rows(&output),
    });

    Ok(ProtocolRun {
        transcript: Transcript {
            config: config.clone(),
            message: message.clone(),
            events,
            fidelity: fid,
        },
        fidelity: fid,
        bits,
        measured_state,
        final_state: state,
        output,
    })
}
