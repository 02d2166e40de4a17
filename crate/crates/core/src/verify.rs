//! Brute-force outcome enumeration and symbolic table regeneration.
//!
//! Every protocol step is linear in the message amplitudes, so the effect of
//! one measurement branch on the message is fully described by what it does
//! to each basis message `|j⟩`. The oracle pushes those basis "probes"
//! through the same projections as the real state, without renormalizing,
//! and reads the result off as a [`SignedPermutation`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocol::{
    bell_circuit, correction_ops, partial_correction_ops, BitId, ProtocolConfig, ProtocolPlan,
};
use crate::qstate::{fidelity, ket_index, ket_string, Complex, Gate, StateVector};
use crate::resource::{compose, make_resource, random_message, MessageState};

/// Largest total qubit count the enumeration oracle accepts.
pub const ENUMERATION_CAP: usize = 18;

/// Unit phases that can multiply a basis ket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Phase {
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl Phase {
    fn from_complex(z: Complex, tol: f64) -> Option<Phase> {
        [
            (Phase::Plus, Complex::new(1.0, 0.0)),
            (Phase::Minus, Complex::new(-1.0, 0.0)),
            (Phase::PlusI, Complex::new(0.0, 1.0)),
            (Phase::MinusI, Complex::new(0.0, -1.0)),
        ]
        .into_iter()
        .find(|(_, v)| (z - v).norm() <= tol)
        .map(|(p, _)| p)
    }

    fn quarter_turns(self) -> u8 {
        match self {
            Phase::Plus => 0,
            Phase::PlusI => 1,
            Phase::Minus => 2,
            Phase::MinusI => 3,
        }
    }

    fn from_quarter_turns(k: u8) -> Phase {
        match k % 4 {
            0 => Phase::Plus,
            1 => Phase::PlusI,
            2 => Phase::Minus,
            _ => Phase::MinusI,
        }
    }

    pub fn negate(self) -> Phase {
        Phase::from_quarter_turns(self.quarter_turns() + 2)
    }
}

/// Exact action of one branch on the message basis: basis message `j` is
/// sent to output ket `entries[j].0` with phase `entries[j].1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SignedPermutation {
    input_width: usize,
    output_width: usize,
    entries: Vec<(usize, Phase)>,
}

const GREEK: [&str; 4] = ["α", "β", "γ", "δ"];

/// Message basis index named by coefficient symbol number `s`. Symbols are
/// numbered by reading the message ket string as a binary number.
fn basis_of_symbol(s: usize, width: usize) -> usize {
    (0..width).fold(0, |acc, k| acc | (((s >> (width - 1 - k)) & 1) << k))
}

fn symbol_name(s: usize, width: usize) -> String {
    if width <= 2 {
        GREEK[s].to_string()
    } else {
        format!("α_{}", ket_string(basis_of_symbol(s, width), width))
    }
}

impl SignedPermutation {
    pub fn new(input_width: usize, output_width: usize, entries: Vec<(usize, Phase)>) -> Result<Self> {
        if entries.len() != 1 << input_width {
            return Err(Error::InvalidLength(entries.len()));
        }
        let mut targets: Vec<usize> = entries.iter().map(|e| e.0).collect();
        targets.sort_unstable();
        targets.dedup();
        if targets.len() != entries.len() || targets.iter().any(|&t| t >> output_width != 0) {
            return Err(Error::NonPermutation("targets are not distinct kets".into()));
        }
        Ok(Self {
            input_width,
            output_width,
            entries,
        })
    }

    pub fn identity(width: usize) -> Self {
        Self {
            input_width: width,
            output_width: width,
            entries: (0..1 << width).map(|j| (j, Phase::Plus)).collect(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    pub fn entries(&self) -> &[(usize, Phase)] {
        &self.entries
    }

    /// True when the map is a bijection on the message basis.
    pub fn is_bijection(&self) -> bool {
        self.input_width == self.output_width
    }

    /// Applies a Pauli (or identity) to local output qubit `qubit`.
    pub fn apply_pauli(&mut self, qubit: usize, gate: Gate) -> Result<()> {
        if qubit >= self.output_width {
            return Err(Error::QubitOutOfRange {
                qubit,
                num_qubits: self.output_width,
            });
        }
        for (target, phase) in &mut self.entries {
            match gate {
                Gate::I => {}
                Gate::X => *target ^= 1 << qubit,
                Gate::Z => {
                    if (*target >> qubit) & 1 == 1 {
                        *phase = phase.negate();
                    }
                }
                _ => return Err(Error::NonPermutation(format!("{} is not a Pauli", gate.name()))),
            }
        }
        Ok(())
    }

    /// Identity up to one common phase.
    pub fn is_identity_up_to_phase(&self) -> bool {
        let first = self.entries[0].1;
        self.is_bijection()
            && self
                .entries
                .iter()
                .enumerate()
                .all(|(j, &(t, p))| t == j && p == first)
    }

    /// Renders in table notation, e.g. `α|11⟩ - β|00⟩`. Terms are listed in
    /// coefficient order; kets list output qubits lowest label first.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in 0..self.entries.len() {
            let (target, phase) = self.entries[basis_of_symbol(s, self.input_width)];
            let (sign, unit) = match phase {
                Phase::Plus => ('+', ""),
                Phase::Minus => ('-', ""),
                Phase::PlusI => ('+', "i"),
                Phase::MinusI => ('-', "i"),
            };
            if s == 0 {
                if sign == '-' {
                    out.push('-');
                }
            } else {
                let _ = write!(out, " {sign} ");
            }
            let _ = write!(
                out,
                "{unit}{}|{}⟩",
                symbol_name(s, self.input_width),
                ket_string(target, self.output_width)
            );
        }
        out
    }

    /// Parses table notation for messages of width 1 or 2. Accepts `+`, `-`
    /// and `−` signs, an optional leading `+`, and an optional `i` factor.
    pub fn parse(text: &str, input_width: usize) -> Result<Self> {
        let err = || Error::Parse {
            what: "signed permutation",
            input: text.to_string(),
        };
        if input_width == 0 || input_width > 2 {
            return Err(err());
        }
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut chars = compact.chars().peekable();
        let mut entries: Vec<Option<(usize, Phase)>> = vec![None; 1 << input_width];
        let mut output_width = None;
        while chars.peek().is_some() {
            let mut quarter = 0u8;
            match chars.peek() {
                Some('+') => {
                    chars.next();
                }
                Some('-') | Some('−') => {
                    chars.next();
                    quarter = 2;
                }
                _ => {}
            }
            if chars.peek() == Some(&'i') {
                chars.next();
                quarter += 1;
            }
            let sym = chars.next().ok_or_else(err)?;
            let s = GREEK
                .iter()
                .position(|g| g.starts_with(sym))
                .filter(|&s| s < 1 << input_width)
                .ok_or_else(err)?;
            if chars.next() != Some('|') {
                return Err(err());
            }
            let ket: String = chars.by_ref().take_while(|&c| c != '⟩').collect();
            let width = ket.chars().count();
            if *output_width.get_or_insert(width) != width {
                return Err(err());
            }
            let j = basis_of_symbol(s, input_width);
            if entries[j].is_some() {
                return Err(err());
            }
            entries[j] = Some((ket_index(&ket)?, Phase::from_quarter_turns(quarter)));
        }
        let entries = entries.into_iter().collect::<Option<Vec<_>>>().ok_or_else(err)?;
        Self::new(input_width, output_width.ok_or_else(err)?, entries)
    }
}

/// How far along the schedule a symbolic state is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// After the Bell measurements only.
    PreController,
    /// After every measurement, before the receiver's corrections.
    PostController,
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" | "pre_controller" => Ok(Stage::PreController),
            "post" | "post_controller" => Ok(Stage::PostController),
            _ => Err(Error::Parse {
                what: "stage",
                input: s.to_string(),
            }),
        }
    }
}

/// One projective measurement in schedule order.
#[derive(Debug, Clone, Copy)]
struct Slot {
    qubit: usize,
    bit: BitId,
    before: Before,
}

#[derive(Debug, Clone, Copy)]
enum Before {
    Nothing,
    Bell { resource: usize },
    Hadamard,
}

impl Slot {
    fn prepare(&self, state: &mut StateVector) -> Result<()> {
        match self.before {
            Before::Nothing => Ok(()),
            Before::Bell { resource } => bell_circuit(state, self.qubit, resource),
            Before::Hadamard => state.apply_single(self.qubit, &Gate::H),
        }
    }
}

fn schedule(plan: &ProtocolPlan, stage: Stage) -> Vec<Slot> {
    let mut slots = Vec::new();
    for b in &plan.bell {
        slots.push(Slot {
            qubit: b.message_qubit,
            bit: b.phase_bit,
            before: Before::Bell {
                resource: b.resource_qubit,
            },
        });
        slots.push(Slot {
            qubit: b.resource_qubit,
            bit: b.flip_bit,
            before: Before::Nothing,
        });
    }
    if stage == Stage::PostController {
        for c in &plan.controllers {
            slots.push(Slot {
                qubit: c.qubit,
                bit: c.bit,
                before: Before::Hadamard,
            });
        }
    }
    slots
}

/// Qubits still unmeasured at `stage`, ascending.
fn remaining_qubits(plan: &ProtocolPlan, stage: Stage) -> Vec<usize> {
    match stage {
        Stage::PostController => plan.layout().receiver_qubits().to_vec(),
        Stage::PreController => {
            let measured: Vec<usize> = schedule(plan, stage).iter().map(|s| s.qubit).collect();
            (0..plan.layout().total_qubits())
                .filter(|q| !measured.contains(q))
                .collect()
        }
    }
}

fn initial_state(plan: &ProtocolPlan, message: &MessageState) -> StateVector {
    compose(message, &make_resource(plan.layout()))
}

/// Reads the probe vectors of one branch as a signed permutation over
/// `remaining` qubits. `fixed` is the index pattern of measured qubits.
fn read_permutation(
    probes: &[StateVector],
    fixed: usize,
    remaining: &[usize],
    width: usize,
    label: &str,
) -> Result<SignedPermutation> {
    let non_perm = |why: &str| Error::NonPermutation(format!("{label}: {why}"));
    let mut scale: Option<f64> = None;
    let mut entries = Vec::with_capacity(probes.len());
    for probe in probes {
        let mut hit: Option<(usize, Complex)> = None;
        for t in 0..(1usize << remaining.len()) {
            let idx = remaining
                .iter()
                .enumerate()
                .filter(|(i, _)| (t >> i) & 1 == 1)
                .fold(fixed, |acc, (_, &q)| acc | (1 << q));
            let a = probe.amplitude(idx);
            if a.norm() > 1e-9 {
                if hit.is_some() {
                    return Err(non_perm("basis message spreads over several kets"));
                }
                hit = Some((t, a));
            }
        }
        let (t, a) = hit.ok_or_else(|| non_perm("basis message is annihilated"))?;
        let s = *scale.get_or_insert(a.norm());
        if (a.norm() - s).abs() > 1e-9 * s.max(1.0) {
            return Err(non_perm("basis messages carry unequal weight"));
        }
        let phase = Phase::from_complex(a / s, 1e-9).ok_or_else(|| non_perm("phase is not a unit"))?;
        entries.push((t, phase));
    }
    SignedPermutation::new(width, remaining.len(), entries).map_err(|_| non_perm("targets collide"))
}

/// Index pattern of the measured qubits; `values` is in schedule order.
fn fixed_pattern(slots: &[Slot], values: &[u8]) -> usize {
    slots
        .iter()
        .zip(values)
        .filter(|(_, &v)| v == 1)
        .fold(0, |acc, (s, _)| acc | (1 << s.qubit))
}

fn basis_probes(plan: &ProtocolPlan) -> Vec<StateVector> {
    let n = plan.layout().n();
    (0..1usize << n)
        .map(|j| initial_state(plan, &MessageState::basis(n, j)))
        .collect()
}

/// Symbolic post-measurement state for one assignment of the bits measured
/// up to `stage`; `values[k]` is the value of `c_k`.
pub fn extract_signed_permutation(
    config: &ProtocolConfig,
    values: &[u8],
    stage: Stage,
) -> Result<SignedPermutation> {
    let plan = config.plan()?;
    check_cap(&plan)?;
    let slots = schedule(&plan, stage);
    if values.len() != slots.len() {
        return Err(Error::InvalidConfig(format!(
            "expected {} measured bits, got {}",
            slots.len(),
            values.len()
        )));
    }
    if slots.iter().any(|s| s.bit.0 >= values.len()) {
        return Err(Error::InvalidConfig("bit ids exceed the supplied values".into()));
    }
    let ordered: Vec<u8> = slots.iter().map(|s| values[s.bit.0]).collect();
    let mut probes = basis_probes(&plan);
    for (slot, &v) in slots.iter().zip(&ordered) {
        for p in probes.iter_mut() {
            slot.prepare(p)?;
            p.discard_branch(slot.qubit, v)?;
        }
    }
    read_permutation(
        &probes,
        fixed_pattern(&slots, &ordered),
        &remaining_qubits(&plan, stage),
        plan.layout().n(),
        &pattern(values),
    )
}

/// Bits as a digit string in schedule order.
pub fn pattern(values: &[u8]) -> String {
    values.iter().map(|v| char::from(b'0' + v)).collect()
}

fn check_cap(plan: &ProtocolPlan) -> Result<()> {
    let total = plan.layout().total_qubits();
    if total > ENUMERATION_CAP {
        Err(Error::SizeCapExceeded {
            total,
            cap: ENUMERATION_CAP,
        })
    } else {
        Ok(())
    }
}

/// One complete measurement record with its probability and post-state.
#[derive(Debug, Clone)]
pub struct OutcomeBranch {
    /// `bits[k]` is the value of `c_k`.
    pub bits: Vec<u8>,
    pub probability: f64,
    /// Normalized global state after all measurements, before corrections.
    pub post_state: StateVector,
    /// Branch action on the message, or `None` when it is not a signed
    /// permutation.
    pub symbolic: Option<SignedPermutation>,
}

impl OutcomeBranch {
    pub fn bit_map(&self) -> BTreeMap<BitId, u8> {
        self.bits.iter().enumerate().map(|(k, &v)| (BitId(k), v)).collect()
    }

    pub fn pattern(&self) -> String {
        pattern(&self.bits)
    }
}

struct Walker<'a> {
    slots: &'a [Slot],
    remaining: &'a [usize],
    width: usize,
    out: Vec<OutcomeBranch>,
}

impl Walker<'_> {
    fn walk(
        &mut self,
        depth: usize,
        state: StateVector,
        probes: Vec<StateVector>,
        probability: f64,
        values: &mut Vec<u8>,
    ) -> Result<()> {
        if depth == self.slots.len() {
            let symbolic = read_permutation(
                &probes,
                fixed_pattern(self.slots, values),
                self.remaining,
                self.width,
                "",
            )
            .ok();
            let mut bits = vec![0; values.len()];
            for (slot, &v) in self.slots.iter().zip(values.iter()) {
                bits[slot.bit.0] = v;
            }
            self.out.push(OutcomeBranch {
                bits,
                probability,
                post_state: state,
                symbolic,
            });
            return Ok(());
        }
        let slot = self.slots[depth];
        let mut state = state;
        let mut probes = probes;
        slot.prepare(&mut state)?;
        for p in probes.iter_mut() {
            slot.prepare(p)?;
        }
        for v in 0..2u8 {
            let (p, next) = match state.project_z(slot.qubit, v) {
                Ok(pair) => pair,
                Err(Error::ZeroProbabilityBranch { .. }) => continue,
                Err(e) => return Err(e),
            };
            let mut next_probes = probes.clone();
            for probe in next_probes.iter_mut() {
                probe.discard_branch(slot.qubit, v)?;
            }
            values.push(v);
            self.walk(depth + 1, next, next_probes, probability * p, values)?;
            values.pop();
        }
        Ok(())
    }
}

/// Every branch of the full measurement schedule with nonzero probability,
/// ordered by bit pattern with `c_0` most significant.
pub fn enumerate_outcomes(config: &ProtocolConfig, message: &MessageState) -> Result<Vec<OutcomeBranch>> {
    let plan = config.plan()?;
    check_cap(&plan)?;
    if message.n() != config.n {
        return Err(Error::InvalidConfig("message width does not match n".into()));
    }
    let slots = schedule(&plan, Stage::PostController);
    let remaining = remaining_qubits(&plan, Stage::PostController);
    let mut walker = Walker {
        slots: &slots,
        remaining: &remaining,
        width: config.n,
        out: Vec::new(),
    };
    walker.walk(
        0,
        initial_state(&plan, message),
        basis_probes(&plan),
        1.0,
        &mut Vec::with_capacity(slots.len()),
    )?;
    let mut out = walker.out;
    out.sort_by(|a, b| a.bits.cmp(&b.bits));
    Ok(out)
}

/// Restricts a product state `|fixed⟩ ⊗ |out⟩` to the qubits in `keep`.
/// Returns `None` when the state is not of that form.
pub fn restrict(state: &StateVector, keep: &[usize]) -> Option<StateVector> {
    let (peak, _) = state
        .amplitudes()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))?;
    let keep_mask = keep.iter().fold(0, |acc, q| acc | (1 << q));
    let base = peak & !keep_mask;
    let amps: Vec<Complex> = (0..1usize << keep.len())
        .map(|t| {
            let idx = keep
                .iter()
                .enumerate()
                .filter(|(i, _)| (t >> i) & 1 == 1)
                .fold(base, |acc, (_, &q)| acc | (1 << q));
            state.amplitude(idx)
        })
        .collect();
    StateVector::from_amplitudes(amps).ok()
}

/// Largest amplitude-wise deviation between `a` and `b` after aligning the
/// global phase of `a` to `b`.
pub fn phase_aligned_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    let overlap = a.inner(b)?;
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        Complex::new(1.0, 0.0)
    };
    Ok(a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x * phase - y).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionReport {
    pub m: usize,
    pub n: usize,
    pub mode: String,
    pub branches_checked: usize,
    /// Bit patterns whose corrected state differs from the message.
    pub failures: Vec<String>,
}

impl CorrectionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn passing(&self) -> usize {
        self.branches_checked - self.failures.len()
    }
}

/// Applies the receiver's corrections to every branch and checks the result
/// against the message, numerically and symbolically.
pub fn verify_corrections(config: &ProtocolConfig) -> Result<CorrectionReport> {
    let plan = config.plan()?;
    let message = random_message(config.n, config.seed ^ 0x5eed_0f_7e57)?;
    let branches = enumerate_outcomes(config, &message)?;
    let receiver = plan.layout().receiver_qubits();
    let mut failures = Vec::new();
    for branch in &branches {
        let bits = branch.bit_map();
        let mut state = branch.post_state.clone();
        let mut symbolic = branch.symbolic.clone();
        for j in 0..plan.rules.len() {
            let ops = correction_ops(&plan, &bits, j)?;
            ops.apply(&mut state)?;
            if let Some(sym) = symbolic.as_mut() {
                for g in &ops.gates {
                    sym.apply_pauli(j, *g)?;
                }
            }
        }
        let numeric_ok = restrict(&state, receiver)
            .and_then(|out| phase_aligned_distance(message.state(), &out).ok())
            .is_some_and(|d| d <= 1e-12);
        let symbolic_ok = symbolic.map(|s| s.is_identity_up_to_phase()).unwrap_or(false);
        if !(numeric_ok && symbolic_ok) {
            failures.push(branch.pattern());
        }
    }
    Ok(CorrectionReport {
        m: config.m,
        n: config.n,
        mode: config.mode.to_string(),
        branches_checked: branches.len(),
        failures,
    })
}

/// Branch-weighted mean fidelity when the receiver corrects with only the
/// delivered (non-withheld) bits.
pub fn branch_average_fidelity(config: &ProtocolConfig, message: &MessageState) -> Result<f64> {
    let plan = config.plan()?;
    let rho_in = message.state().density_matrix();
    let receiver = plan.layout().receiver_qubits();
    let mut total = 0.0;
    for branch in enumerate_outcomes(config, message)? {
        let delivered: BTreeMap<BitId, u8> = branch
            .bit_map()
            .into_iter()
            .filter(|(b, _)| !config.withheld.contains(b))
            .collect();
        let mut state = branch.post_state.clone();
        for j in 0..plan.rules.len() {
            partial_correction_ops(&plan, &delivered, j).0.apply(&mut state)?;
        }
        let rho_out = state.reduced_density(receiver)?;
        total += branch.probability * fidelity(&rho_in, &rho_out)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    /// Bell-measurement bits `c_0 .. c_{2n-1}`.
    pub bell_bits: String,
    /// Controller bits `c_{2n} ..`; empty before the controllers act.
    pub controller_bits: String,
    pub state: String,
    pub permutation: Option<SignedPermutation>,
    /// Receiver correction label, per qubit joined with `⊗`.
    pub correction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub m: usize,
    pub n: usize,
    pub stage: Stage,
    /// Qubit labels of the kets in the state column.
    pub state_qubits: Vec<usize>,
    pub num_bell_bits: usize,
    pub num_bits: usize,
    pub rows: Vec<TableRow>,
}

/// Regenerates the post-measurement table for `config` at `stage`.
pub fn regen_table(config: &ProtocolConfig, stage: Stage) -> Result<Table> {
    let plan = config.plan()?;
    check_cap(&plan)?;
    let num_bell_bits = 2 * plan.bell.len();
    let num_bits = match stage {
        Stage::PreController => num_bell_bits,
        Stage::PostController => plan.num_bits(),
    };
    let mut rows = Vec::with_capacity(1 << num_bits);
    for assignment in 0..1usize << num_bits {
        let values: Vec<u8> = (0..num_bits)
            .map(|k| ((assignment >> (num_bits - 1 - k)) & 1) as u8)
            .collect();
        let permutation = match extract_signed_permutation(config, &values, stage) {
            Ok(p) => Some(p),
            Err(Error::NonPermutation(_)) => None,
            Err(e) => return Err(e),
        };
        let correction = match stage {
            Stage::PreController => None,
            Stage::PostController => {
                let bits: BTreeMap<BitId, u8> =
                    values.iter().enumerate().map(|(k, &v)| (BitId(k), v)).collect();
                let labels = (0..plan.rules.len())
                    .map(|j| correction_ops(&plan, &bits, j).map(|o| o.label()))
                    .collect::<Result<Vec<_>>>()?;
                Some(labels.join("⊗"))
            }
        };
        rows.push(TableRow {
            bell_bits: pattern(&values[..num_bell_bits]),
            controller_bits: pattern(&values[num_bell_bits..]),
            state: permutation
                .as_ref()
                .map(SignedPermutation::render)
                .unwrap_or_else(|| "(not a signed permutation)".to_string()),
            permutation,
            correction,
        });
    }
    Ok(Table {
        m: config.m,
        n: config.n,
        stage,
        state_qubits: remaining_qubits(&plan, stage),
        num_bell_bits,
        num_bits,
        rows,
    })
}

fn bit_header(range: std::ops::Range<usize>) -> String {
    format!(
        "({})",
        range.map(|k| format!("c{k}")).collect::<Vec<_>>().join(",")
    )
}

impl Table {
    fn headers(&self) -> Vec<String> {
        let ket = format!(
            "|{}⟩",
            self.state_qubits
                .iter()
                .map(|q| format!("q{q}"))
                .collect::<String>()
        );
        let mut h = vec![bit_header(0..self.num_bell_bits)];
        if self.stage == Stage::PostController {
            h.push(bit_header(self.num_bell_bits..self.num_bits));
        }
        h.push(ket);
        if self.stage == Stage::PostController {
            h.push("correction".to_string());
        }
        h
    }

    fn cells(&self, row: &TableRow) -> Vec<String> {
        let mut c = vec![row.bell_bits.clone()];
        if self.stage == Stage::PostController {
            c.push(row.controller_bits.clone());
        }
        c.push(row.state.clone());
        if let Some(label) = &row.correction {
            c.push(label.clone());
        }
        c
    }

    /// Column-aligned plain text.
    pub fn render_text(&self) -> String {
        let headers = self.headers();
        let body: Vec<Vec<String>> = self.rows.iter().map(|r| self.cells(r)).collect();
        let widths: Vec<usize> = (0..headers.len())
            .map(|i| {
                body.iter()
                    .map(|r| r[i].chars().count())
                    .chain([headers[i].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = line(&headers);
        out.push('\n');
        for r in &body {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    /// Pipe-delimited Markdown; literal `|` inside kets is escaped.
    pub fn render_markdown(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|");
        let headers = self.headers();
        let mut out = format!(
            "| {} |\n|{}|\n",
            headers.iter().map(|h| esc(h)).collect::<Vec<_>>().join(" | "),
            vec!["---"; headers.len()].join("|")
        );
        for r in &self.rows {
            let cells: Vec<String> = self.cells(r).iter().map(|c| esc(c)).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub m: usize,
    pub n: usize,
    pub mode: String,
    pub receiver: usize,
    pub withheld: Vec<String>,
    pub seed: u64,
    pub trials: usize,
    pub min: f64,
    pub mean: f64,
    pub fidelities: Vec<f64>,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

/// Runs `trials` seeded protocol executions on Haar-random messages. Trial
/// seeds are drawn from one generator so results do not depend on thread
/// scheduling.
pub fn fidelity_audit(config: &ProtocolConfig, trials: usize, seed: u64) -> Result<AuditReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("audit needs at least one trial".into()));
    }
    config.plan()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<(u64, u64)> = (0..trials).map(|_| (rng.gen(), rng.gen())).collect();
    let run_one = |&(message_seed, run_seed): &(u64, u64)| -> Result<f64> {
        let message = random_message(config.n, message_seed)?;
        let cfg = config.clone().with_seed(run_seed);
        Ok(crate::protocol::run_protocol(&cfg, &message)?.fidelity)
    };
    #[cfg(feature = "parallel")]
    let fidelities: Vec<f64> = {
        use rayon::prelude::*;
        seeds.par_iter().map(run_one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let fidelities: Vec<f64> = seeds.iter().map(run_one).collect::<Result<_>>()?;

    let min = fidelities.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = fidelities.iter().sum::<f64>() / trials as f64;
    Ok(AuditReport {
        m: config.m,
        n: config.n,
        mode: config.mode.to_string(),
        receiver: config.receiver,
        withheld: config.withheld.iter().map(BitId::to_string).collect(),
        seed,
        trials,
        min,
        mean,
        fidelities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::Mode;

    #[test]
    fn render_and_parse_agree() {
        let p = SignedPermutation::parse("α|11⟩ − β|00⟩", 1).unwrap();
        assert_eq!(p.entries(), &[(0b11, Phase::Plus), (0b00, Phase::Minus)]);
        assert_eq!(p.render(), "α|11⟩ - β|00⟩");
        let q = SignedPermutation::parse("-α|01⟩+β|00⟩-γ|11⟩+δ|10⟩", 2).unwrap();
        assert_eq!(SignedPermutation::parse(&q.render(), 2).unwrap(), q);
        assert_eq!(
            SignedPermutation::parse("+α|10⟩+β|11⟩+γ|00⟩+δ|01⟩", 2).unwrap().render(),
            "α|10⟩ + β|11⟩ + γ|00⟩ + δ|01⟩"
        );
        assert!(SignedPermutation::parse("α|0⟩ + α|1⟩", 1).is_err());
        assert!(SignedPermutation::parse("α|0⟩", 1).is_err());
        assert!(SignedPermutation::parse("α|0⟩ + β|00⟩", 1).is_err());
        assert!(SignedPermutation::parse("α|0⟩ + β|0⟩", 1).is_err());
    }

    #[test]
    fn greek_symbols_follow_ket_order() {
        // β is the coefficient of |q0 q1⟩ = |01⟩, i.e. little-endian index 2.
        assert_eq!(basis_of_symbol(1, 2), 0b10);
        assert_eq!(basis_of_symbol(2, 2), 0b01);
        assert_eq!(symbol_name(3, 3), "α_011");
    }

    #[test]
    fn pauli_action_on_permutation() {
        let mut p = SignedPermutation::parse("-α|1⟩ + β|0⟩", 1).unwrap();
        p.apply_pauli(0, Gate::Z).unwrap();
        p.apply_pauli(0, Gate::X).unwrap();
        assert!(p.is_identity_up_to_phase());
        assert!(p.apply_pauli(0, Gate::H).is_err());
        assert!(p.apply_pauli(1, Gate::X).is_err());
    }

    #[test]
    fn three_participant_branches() {
        let msg = random_message(1, 2).unwrap();
        let branches = enumerate_outcomes(&ProtocolConfig::new(3, 1), &msg).unwrap();
        assert_eq!(branches.len(), 8);
        for b in &branches {
            assert!((b.probability - 0.125).abs() < 1e-12);
        }
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn four_participant_pre_controller_row() {
        let cfg = ProtocolConfig::new(4, 1);
        let msg = random_message(1, 2).unwrap();
        assert_eq!(enumerate_outcomes(&cfg, &msg).unwrap().len(), 16);
        let p = extract_signed_permutation(&cfg, &[1, 1], Stage::PreController).unwrap();
        assert_eq!(p, SignedPermutation::parse("α|111⟩ - β|000⟩", 1).unwrap());
    }

    #[test]
    fn two_qubit_pre_controller_row() {
        let cfg = ProtocolConfig::new(3, 2);
        let p = extract_signed_permutation(&cfg, &[0, 1, 0, 1], Stage::PreController).unwrap();
        assert_eq!(
            p,
            SignedPermutation::parse("α|0101⟩ - β|0000⟩ + γ|1111⟩ - δ|1010⟩", 2).unwrap()
        );
    }

    #[test]
    fn extract_examples() {
        let cfg = ProtocolConfig::new(3, 1);
        let p = extract_signed_permutation(&cfg, &[1, 1, 0], Stage::PostController).unwrap();
        assert_eq!(p.render(), "α|1⟩ - β|0⟩");
        let id = extract_signed_permutation(&cfg, &[0, 0, 0], Stage::PostController).unwrap();
        assert_eq!(id, SignedPermutation::identity(1));
        assert!(extract_signed_permutation(&cfg, &[0, 0], Stage::PostController).is_err());
    }

    #[test]
    fn minimal_two_qubit_branches_are_not_permutations() {
        let cfg = ProtocolConfig::new(3, 2).with_mode(Mode::MinimalResource);
        let plan = cfg.plan().unwrap();
        for assignment in 0..1usize << plan.num_bits() {
            let values: Vec<u8> = (0..plan.num_bits())
                .map(|k| ((assignment >> k) & 1) as u8)
                .collect();
            assert!(matches!(
                extract_signed_permutation(&cfg, &values, Stage::PostController),
                Err(Error::NonPermutation(_))
            ));
        }
    }

    #[test]
    fn verify_small_sweep() {
        for (m, n, expected) in [(3, 1, 8), (4, 1, 16), (3, 2, 64)] {
            let report = verify_corrections(&ProtocolConfig::new(m, n)).unwrap();
            assert_eq!(report.branches_checked, expected);
            assert!(report.passed(), "{:?}", report.failures);
        }
    }

    #[test]
    fn enumeration_cap() {
        let msg = random_message(2, 0).unwrap();
        assert!(matches!(
            enumerate_outcomes(&ProtocolConfig::new(9, 2), &msg),
            Err(Error::SizeCapExceeded { cap: 18, .. })
        ));
    }

    #[test]
    fn table_shapes() {
        let t = regen_table(&ProtocolConfig::new(3, 1), Stage::PostController).unwrap();
        let labels: Vec<_> = t.rows.iter().map(|r| r.correction.clone().unwrap()).collect();
        assert_eq!(labels, ["I", "Z", "X", "XZ", "Z", "I", "ZX", "ZXZ"]);
        assert_eq!(t.state_qubits, vec![3]);
        let t = regen_table(&ProtocolConfig::new(3, 2), Stage::PreController).unwrap();
        assert_eq!(t.rows.len(), 16);
        assert_eq!(t.state_qubits, vec![4, 5, 6, 7]);
        assert!(t.render_text().starts_with("(c0,c1,c2,c3)  |q4q5q6q7⟩"));
        assert!(t.render_markdown().contains("| 0101 | α\\|0101⟩ - β\\|0000⟩ + γ\\|1111⟩ - δ\\|1010⟩ |"));
    }

    #[test]
    fn withheld_controller_average() {
        let cfg = ProtocolConfig::new(3, 1).withholding([BitId(2)]);
        let msg = MessageState::qubit(0.6, 0.8).unwrap();
        let f = branch_average_fidelity(&cfg, &msg).unwrap();
        assert!((f - 0.5392).abs() < 1e-9, "{f}");
    }

    #[test]
    fn audit_report_fields() {
        let r = fidelity_audit(&ProtocolConfig::new(3, 1), 5, 1).unwrap();
        assert_eq!(r.fidelities.len(), 5);
        assert!(r.min >= 1.0 - 1e-10);
        assert_eq!(r, fidelity_audit(&ProtocolConfig::new(3, 1), 5, 1).unwrap());
        assert!(fidelity_audit(&ProtocolConfig::new(3, 1), 0, 1).is_err());
    }
}
