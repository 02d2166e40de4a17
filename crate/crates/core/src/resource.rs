//! GHZ resources, message states and the global qubit layout.
//!
//! Message qubits always occupy `q_0 .. q_{n-1}`. In the GHZ-per-instance
//! modes participant `p` owns the contiguous block `q_{(p+1)n} .. q_{(p+1)n+n-1}`
//! and GHZ instance `j` spans `q_{n+j}, q_{2n+j}, ..., q_{mn+j}`. In the
//! minimal-resource mode a single GHZ state spans all resource qubits, laid
//! out in participant order with one qubit per non-receiver and `n` at the
//! receiver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{Complex, StateVector};

/// The unknown n-qubit input `Σ_j α_j |j⟩`, indexed with the qstate convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MessageJson", into = "MessageJson")]
pub struct MessageState {
    state: StateVector,
}

#[derive(Serialize, Deserialize)]
struct MessageJson {
    n: usize,
    amplitudes: Vec<[f64; 2]>,
}

impl TryFrom<MessageJson> for MessageState {
    type Error = Error;

    fn try_from(json: MessageJson) -> Result<Self> {
        let msg = MessageState::new(
            json.amplitudes
                .iter()
                .map(|[re, im]| Complex::new(*re, *im))
                .collect(),
        )?;
        if msg.n() != json.n {
            return Err(Error::InvalidLength(json.amplitudes.len()));
        }
        Ok(msg)
    }
}

impl From<MessageState> for MessageJson {
    fn from(msg: MessageState) -> Self {
        MessageJson {
            n: msg.n(),
            amplitudes: msg.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
        }
    }
}

impl MessageState {
    pub fn new(amplitudes: Vec<Complex>) -> Result<Self> {
        Ok(Self {
            state: StateVector::from_amplitudes(amplitudes)?,
        })
    }

    /// Real single-qubit message `α|0⟩ + β|1⟩`.
    pub fn qubit(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![Complex::new(alpha, 0.0), Complex::new(beta, 0.0)])
    }

    pub fn basis(n: usize, index: usize) -> Self {
        Self {
            state: StateVector::basis(n, index),
        }
    }

    pub fn n(&self) -> usize {
        self.state.num_qubits()
    }

    pub fn amplitudes(&self) -> &[Complex] {
        self.state.amplitudes()
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("message serialization is infallible")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Haar-random n-qubit message: a normalized vector of complex Gaussians.
pub fn random_message(n: usize, seed: u64) -> Result<MessageState> {
    if n < 1 {
        return Err(Error::InvalidConfig("message needs at least one qubit".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<Complex> = (0..1usize << n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex::new(re, im)
        })
        .collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    MessageState::new(raw.into_iter().map(|a| a / norm).collect())
}

/// `(|0…0⟩ + |1…1⟩)/√2` on `k` qubits.
pub fn make_ghz(k: usize) -> Result<StateVector> {
    if k < 2 {
        return Err(Error::GhzTooSmall(k));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![Complex::new(0.0, 0.0); 1 << k];
    amps[0] = Complex::new(h, 0.0);
    amps[(1 << k) - 1] = Complex::new(h, 0.0);
    StateVector::from_amplitudes(amps)
}

/// `|ψ⟩ ⊗ |resource⟩` with the message on the low labels.
pub fn compose(message: &MessageState, resource: &StateVector) -> StateVector {
    message.state().tensor(resource)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// All message qubits with participant 0; n GHZ states of m qubits.
    Standard,
    /// Message qubits spread over non-receiver participants; n GHZ states of m qubits.
    DistributedMessage,
    /// One GHZ state of m+n-1 qubits.
    MinimalResource,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Mode::Standard),
            "distributed" | "distributed_message" => Ok(Mode::DistributedMessage),
            "minimal" | "minimal_resource" => Ok(Mode::MinimalResource),
            _ => Err(Error::Parse {
                what: "mode",
                input: s.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Standard => "standard",
            Mode::DistributedMessage => "distributed",
            Mode::MinimalResource => "minimal",
        })
    }
}

/// Who holds which global qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceLayout {
    m: usize,
    n: usize,
    mode: Mode,
    receiver: usize,
    /// `allocation[j]` is the participant holding message qubit `j`.
    allocation: Vec<usize>,
    /// Resource qubits per participant, in instance order.
    holdings: Vec<Vec<usize>>,
    /// Qubits of each GHZ factor, in participant order.
    ghz_groups: Vec<Vec<usize>>,
    total_qubits: usize,
}

impl ResourceLayout {
    pub fn standard(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, Mode::Standard, m.saturating_sub(1), vec![0; n])
    }

    pub fn new(
        m: usize,
        n: usize,
        mode: Mode,
        receiver: usize,
        allocation: Vec<usize>,
    ) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidLayout(format!("need at least 3 participants, got {m}")));
        }
        if n < 1 {
            return Err(Error::InvalidLayout("need at least one message qubit".into()));
        }
        if receiver == 0 || receiver >= m {
            return Err(Error::InvalidLayout(format!(
                "receiver {receiver} must lie in 1..={}",
                m - 1
            )));
        }
        if allocation.len() != n {
            return Err(Error::InvalidLayout(format!(
                "allocation lists {} message qubits, expected {n}",
                allocation.len()
            )));
        }
        for (j, &p) in allocation.iter().enumerate() {
            if p >= m {
                return Err(Error::InvalidLayout(format!(
                    "message qubit {j} assigned to unknown participant {p}"
                )));
            }
            if p == receiver {
                return Err(Error::InvalidLayout(format!(
                    "message qubit {j} assigned to the receiver"
                )));
            }
        }
        if mode == Mode::Standard && allocation.iter().any(|&p| p != 0) {
            return Err(Error::InvalidLayout(
                "standard mode keeps every message qubit with participant 0".into(),
            ));
        }

        let (holdings, ghz_groups, total_qubits) = match mode {
            Mode::Standard | Mode::DistributedMessage => {
                let holdings: Vec<Vec<usize>> = (0..m)
                    .map(|p| (0..n).map(|j| (p + 1) * n + j).collect())
                    .collect();
                let groups = (0..n)
                    .map(|j| (0..m).map(|p| (p + 1) * n + j).collect())
                    .collect();
                (holdings, groups, m * n + n)
            }
            Mode::MinimalResource => {
                let mut next = n;
                let holdings: Vec<Vec<usize>> = (0..m)
                    .map(|p| {
                        let count = if p == receiver { n } else { 1 };
                        let block = (next..next + count).collect();
                        next += count;
                        block
                    })
                    .collect();
                let group = holdings.iter().flatten().copied().collect();
                (holdings, vec![group], (m + n - 1) + n)
            }
        };

        Ok(Self {
            m,
            n,
            mode,
            receiver,
            allocation,
            holdings,
            ghz_groups,
            total_qubits,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn receiver(&self) -> usize {
        self.receiver
    }

    pub fn allocation(&self) -> &[usize] {
        &self.allocation
    }

    pub fn total_qubits(&self) -> usize {
        self.total_qubits
    }

    pub fn resource_qubits(&self) -> usize {
        self.total_qubits - self.n
    }

    /// Resource qubits held by `participant`, in instance order.
    pub fn holdings(&self, participant: usize) -> &[usize] {
        &self.holdings[participant]
    }

    pub fn ghz_groups(&self) -> &[Vec<usize>] {
        &self.ghz_groups
    }

    /// The receiver's qubits; output qubit `j` is `receiver_qubits()[j]`.
    pub fn receiver_qubits(&self) -> &[usize] {
        &self.holdings[self.receiver]
    }

    /// Global index of `participant`'s resource qubit for instance `instance`.
    pub fn qubit_of(&self, participant: usize, instance: usize) -> Result<usize> {
        self.holdings
            .get(participant)
            .and_then(|h| h.get(instance))
            .copied()
            .ok_or(Error::NoSuchQubit {
                participant,
                instance,
            })
    }

    /// `(participant, instance)` owning a resource qubit, or `None` for
    /// message qubits and out-of-range labels.
    pub fn owner_of(&self, qubit: usize) -> Option<(usize, usize)> {
        self.holdings.iter().enumerate().find_map(|(p, h)| {
            h.iter().position(|&q| q == qubit).map(|j| (p, j))
        })
    }
}

/// The resource state over labels `n ..` of the layout, re-based so that
/// global qubit `n` is local qubit 0.
pub fn make_resource(layout: &ResourceLayout) -> StateVector {
    let offset = layout.n;
    let groups = layout.ghz_groups();
    let masks: Vec<usize> = groups
        .iter()
        .map(|g| g.iter().fold(0, |acc, q| acc | (1 << (q - offset))))
        .collect();
    let mut amps = vec![Complex::new(0.0, 0.0); 1 << layout.resource_qubits()];
    let weight = (2f64).powf(-(groups.len() as f64) / 2.0);
    for choice in 0..(1usize << groups.len()) {
        let index = masks
            .iter()
            .enumerate()
            .filter(|(g, _)| (choice >> g) & 1 == 1)
            .fold(0, |acc, (_, m)| acc | m);
        amps[index] = Complex::new(weight, 0.0);
    }
    StateVector::from_amplitudes(amps).expect("GHZ products are normalized")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::ket_index;

    fn amp_at(s: &StateVector, ket: &str) -> Complex {
        s.amplitude(ket_index(ket).unwrap())
    }

    #[test]
    fn ghz_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let g3 = make_ghz(3).unwrap();
        assert_eq!(amp_at(&g3, "000"), Complex::new(h, 0.0));
        assert_eq!(amp_at(&g3, "111"), Complex::new(h, 0.0));
        assert_eq!(g3.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 2);
        let g2 = make_ghz(2).unwrap();
        assert_eq!(amp_at(&g2, "11"), Complex::new(h, 0.0));
        let g4 = make_ghz(4).unwrap();
        assert_eq!(amp_at(&g4, "1111"), Complex::new(h, 0.0));
        assert_eq!(make_ghz(1), Err(Error::GhzTooSmall(1)));
    }

    #[test]
    fn two_instance_resource_interleaves() {
        let layout = ResourceLayout::standard(3, 2).unwrap();
        let r = make_resource(&layout);
        assert_eq!(r.num_qubits(), 6);
        // Kets over q2..q7.
        for ket in ["000000", "010101", "101010", "111111"] {
            assert!((amp_at(&r, ket) - Complex::new(0.5, 0.0)).norm() < 1e-15, "{ket}");
        }
        assert_eq!(r.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 4);
    }

    #[test]
    fn single_instance_resource_is_ghz() {
        let layout = ResourceLayout::standard(3, 1).unwrap();
        assert_eq!(make_resource(&layout), make_ghz(3).unwrap());
    }

    #[test]
    fn resource_support_matches_tensor_product() {
        // Oracle: explicit tensor product of three 4-qubit GHZ states, then
        // the interleaving permutation of labels.
        let layout = ResourceLayout::standard(4, 3).unwrap();
        let r = make_resource(&layout);
        let g = make_ghz(4).unwrap();
        let product = g.tensor(&g).tensor(&g); // instance j on local 4j..4j+3, participant order
        let (m, n) = (4, 3);
        for idx in 0..product.amplitudes().len() {
            let mut mapped = 0usize;
            for j in 0..n {
                for p in 0..m {
                    if (idx >> (4 * j + p)) & 1 == 1 {
                        mapped |= 1 << (p * n + j);
                    }
                }
            }
            assert!((product.amplitude(idx) - r.amplitude(mapped)).norm() < 1e-15);
        }
        let support: Vec<_> = r.amplitudes().iter().filter(|a| a.norm() > 1e-15).collect();
        assert_eq!(support.len(), 8);
        for a in support {
            assert!((a.norm() - 8f64.sqrt().recip()).abs() < 1e-15);
        }
    }

    #[test]
    fn compose_examples() {
        let (a, b) = (0.6, 0.8);
        let msg = MessageState::qubit(a, b).unwrap();
        let s = compose(&msg, &make_ghz(3).unwrap());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (ket, v) in [("0000", a), ("0111", a), ("1000", b), ("1111", b)] {
            assert!((amp_at(&s, ket) - Complex::new(v * h, 0.0)).norm() < 1e-15);
        }
        let s = compose(&msg, &make_ghz(4).unwrap());
        for (ket, v) in [("00000", a), ("01111", a), ("10000", b), ("11111", b)] {
            assert!((amp_at(&s, ket) - Complex::new(v * h, 0.0)).norm() < 1e-15);
        }
        let zz = compose(&MessageState::basis(1, 0), &StateVector::new(1));
        assert_eq!(zz, StateVector::new(2));
    }

    #[test]
    fn random_message_contract() {
        let a = random_message(3, 17).unwrap();
        assert!((a.state().norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(a, random_message(3, 17).unwrap());
        assert_ne!(a, random_message(3, 18).unwrap());
        assert!(random_message(0, 1).is_err());
    }

    #[test]
    fn random_message_haar_first_moment() {
        let mean: f64 = (0..10_000u64)
            .map(|s| random_message(1, s).unwrap().amplitudes()[0].norm_sqr())
            .sum::<f64>()
            / 10_000.0;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn qubit_of_examples() {
        let l = ResourceLayout::standard(3, 2).unwrap();
        assert_eq!(l.qubit_of(1, 0).unwrap(), 4);
        assert_eq!(l.qubit_of(1, 1).unwrap(), 5);
        for (m, n) in [(3, 1), (4, 2), (5, 3)] {
            let l = ResourceLayout::standard(m, n).unwrap();
            for j in 0..n {
                assert_eq!(l.qubit_of(m - 1, j).unwrap(), m * n + j);
            }
        }
        assert_eq!(ResourceLayout::standard(3, 1).unwrap().qubit_of(0, 0).unwrap(), 1);
        assert!(l.qubit_of(9, 0).is_err());
        assert!(l.qubit_of(0, 7).is_err());
    }

    #[test]
    fn qubit_of_is_a_bijection_onto_resource_labels() {
        for (m, n) in [(3, 1), (3, 2), (4, 3), (6, 2)] {
            let l = ResourceLayout::standard(m, n).unwrap();
            let mut all: Vec<usize> = (0..m)
                .flat_map(|p| (0..n).map(move |j| (p, j)))
                .map(|(p, j)| l.qubit_of(p, j).unwrap())
                .collect();
            all.sort_unstable();
            assert_eq!(all, (n..l.total_qubits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn minimal_layout_counts() {
        let l = ResourceLayout::new(4, 2, Mode::MinimalResource, 3, vec![0, 0]).unwrap();
        assert_eq!(l.total_qubits(), (4 + 2 - 1) + 2);
        for p in 0..3 {
            assert_eq!(l.holdings(p).len(), 1);
        }
        assert_eq!(l.receiver_qubits(), &[5, 6]);
        assert_eq!(l.ghz_groups().len(), 1);
        assert!(l.qubit_of(0, 1).is_err());

        // Receiver in the middle keeps participant order.
        let l = ResourceLayout::new(4, 2, Mode::MinimalResource, 1, vec![0, 0]).unwrap();
        assert_eq!(l.holdings(0), &[2]);
        assert_eq!(l.holdings(1), &[3, 4]);
        assert_eq!(l.holdings(2), &[5]);
        assert_eq!(l.holdings(3), &[6]);
    }

    #[test]
    fn layout_validation() {
        assert!(ResourceLayout::standard(2, 1).is_err());
        assert!(ResourceLayout::standard(3, 0).is_err());
        assert!(ResourceLayout::new(3, 1, Mode::Standard, 0, vec![0]).is_err());
        assert!(ResourceLayout::new(3, 1, Mode::Standard, 3, vec![0]).is_err());
        assert!(ResourceLayout::new(3, 2, Mode::Standard, 2, vec![0, 1]).is_err());
        assert!(ResourceLayout::new(3, 2, Mode::DistributedMessage, 2, vec![0, 2]).is_err());
        assert!(ResourceLayout::new(3, 2, Mode::DistributedMessage, 2, vec![1, 0]).is_ok());
        assert!(ResourceLayout::new(3, 2, Mode::DistributedMessage, 2, vec![0]).is_err());
    }

    #[test]
    fn message_json_round_trip() {
        let msg = random_message(2, 4).unwrap();
        let text = msg.to_json();
        assert!(text.starts_with("{\"n\":2,\"amplitudes\":[["));
        assert_eq!(MessageState::from_json(&text).unwrap(), msg);
        assert!(MessageState::from_json(r#"{"n":2,"amplitudes":[[1,0],[0,0]]}"#).is_err());
        assert!(MessageState::from_json(r#"{"n":1,"amplitudes":[[1,0],[1,0]]}"#).is_err());
    }
}
