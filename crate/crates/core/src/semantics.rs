//! Dense state-vector simulator, used as an oracle for circuit identities
//! before they are turned into braids.
//!
//! Qubit 0 is the most significant bit of the basis index, so `|10>` on two
//! qubits is index 2.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::circuit::{Circuit, GateOp};

pub const MAX_QUBITS: usize = 16;
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("qubit index {index} out of range for {qubits} qubits")]
    IndexOutOfRange { index: usize, qubits: usize },
    #[error("control and target are the same qubit ({0})")]
    SameQubit(usize),
    #[error("{0} qubits exceeds the simulator limit of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("outcome {outcome} has probability {probability:e}; state is corrupt")]
    ZeroProbabilityBranch { outcome: u8, probability: f64 },
    #[error("state is not normalised (norm^2 = {0})")]
    NotNormalised(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Z,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateName {
    H,
    P,
    T,
    Cnot,
}

/// Fixed unitary for one of the named gates.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    pub name: GateName,
    pub dim: usize,
    pub entries: Vec<Complex64>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl GateMatrix {
    pub fn h() -> Self {
        let s = FRAC_1_SQRT_2;
        Self { name: GateName::H, dim: 2, entries: vec![c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)] }
    }

    pub fn p() -> Self {
        Self { name: GateName::P, dim: 2, entries: vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)] }
    }

    pub fn t() -> Self {
        let phase = Complex64::from_polar(1.0, FRAC_PI_4);
        Self { name: GateName::T, dim: 2, entries: vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), phase] }
    }

    pub fn cnot() -> Self {
        let mut entries = vec![c(0.0, 0.0); 16];
        for (row, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            entries[row * 4 + col] = c(1.0, 0.0);
        }
        Self { name: GateName::Cnot, dim: 4, entries }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn mul(&self, other: &GateMatrix) -> Vec<Complex64> {
        let n = self.dim;
        let mut out = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum();
            }
        }
        out
    }

    /// Largest entry of `|U^dagger U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s: Complex64 = (0..n).map(|k| self.get(k, i).conj() * self.get(k, j)).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - expected).norm());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `qubits` qubits.
    pub fn zero(qubits: usize) -> Result<Self, SimError> {
        if qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(qubits));
        }
        let mut amps = vec![c(0.0, 0.0); 1 << qubits];
        amps[0] = c(1.0, 0.0);
        Ok(Self { qubits, amps })
    }

    pub fn basis(qubits: usize, index: usize) -> Result<Self, SimError> {
        let mut s = Self::zero(qubits)?;
        if index >= s.amps.len() {
            return Err(SimError::IndexOutOfRange { index, qubits });
        }
        s.amps[0] = c(0.0, 0.0);
        s.amps[index] = c(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, SimError> {
        let qubits = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << qubits {
            return Err(SimError::IndexOutOfRange { index: amps.len(), qubits });
        }
        if qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(qubits));
        }
        let s = Self { qubits, amps };
        let n = s.norm_sqr();
        if (n - 1.0).abs() > 1e-9 {
            return Err(SimError::NotNormalised(n));
        }
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, q: usize) -> Result<usize, SimError> {
        if q >= self.qubits {
            return Err(SimError::IndexOutOfRange { index: q, qubits: self.qubits });
        }
        Ok(1 << (self.qubits - 1 - q))
    }

    pub fn apply_cnot(&self, control: usize, target: usize) -> Result<Self, SimError> {
        if control == target {
            return Err(SimError::SameQubit(control));
        }
        let cm = self.mask(control)?;
        let tm = self.mask(target)?;
        let mut out = self.clone();
        for i in 0..self.amps.len() {
            if i & cm != 0 {
                out.amps[i] = self.amps[i ^ tm];
            }
        }
        Ok(out)
    }

    pub fn apply_single(&self, g: &GateMatrix, q: usize) -> Result<Self, SimError> {
        assert_eq!(g.dim, 2, "apply_single needs a one-qubit gate");
        self.apply_2x2([g.get(0, 0), g.get(0, 1), g.get(1, 0), g.get(1, 1)], q)
    }

    fn apply_2x2(&self, m: [Complex64; 4], q: usize) -> Result<Self, SimError> {
        let qm = self.mask(q)?;
        let mut out = self.clone();
        for i in 0..self.amps.len() {
            if i & qm == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | qm];
                out.amps[i] = m[0] * a0 + m[1] * a1;
                out.amps[i | qm] = m[2] * a0 + m[3] * a1;
            }
        }
        Ok(out)
    }

    pub fn apply_x(&self, q: usize) -> Result<Self, SimError> {
        let (z, o) = (c(0.0, 0.0), c(1.0, 0.0));
        self.apply_2x2([z, o, o, z], q)
    }

    pub fn apply_z(&self, q: usize) -> Result<Self, SimError> {
        let (z, o) = (c(0.0, 0.0), c(1.0, 0.0));
        self.apply_2x2([o, z, z, -o], q)
    }

    /// Probability of reading `outcome` on qubit `q` in `basis`.
    pub fn probability(&self, q: usize, basis: Basis, outcome: u8) -> Result<f64, SimError> {
        let s = match basis {
            Basis::Z => self.clone(),
            Basis::X => self.apply_single(&GateMatrix::h(), q)?,
        };
        let qm = s.mask(q)?;
        Ok(s.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| ((i & qm) != 0) == (outcome == 1))
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Project onto `outcome` and renormalise. X-basis outcomes 0/1 are
    /// the `(|0> +/- |1>)/sqrt(2)` projectors.
    pub fn project(&self, q: usize, basis: Basis, outcome: u8) -> Result<Self, SimError> {
        let mut s = match basis {
            Basis::Z => self.clone(),
            Basis::X => self.apply_single(&GateMatrix::h(), q)?,
        };
        let qm = s.mask(q)?;
        let p: f64 = s
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| ((i & qm) != 0) == (outcome == 1))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if p < 1e-15 {
            return Err(SimError::ZeroProbabilityBranch { outcome, probability: p });
        }
        let scale = 1.0 / p.sqrt();
        for (i, a) in s.amps.iter_mut().enumerate() {
            if ((i & qm) != 0) == (outcome == 1) {
                *a *= scale;
            } else {
                *a = c(0.0, 0.0);
            }
        }
        match basis {
            Basis::Z => Ok(s),
            Basis::X => s.apply_single(&GateMatrix::h(), q),
        }
    }

    pub fn measure_qubit<R: Rng + ?Sized>(
        &self,
        q: usize,
        basis: Basis,
        rng: &mut R,
    ) -> Result<(u8, Self), SimError> {
        let p0 = self.probability(q, basis, 0)?;
        let outcome = if rng.gen::<f64>() < p0 { 0 } else { 1 };
        Ok((outcome, self.project(q, basis, outcome)?))
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

pub fn apply_cnot(s: &StateVector, control: usize, target: usize) -> Result<StateVector, SimError> {
    s.apply_cnot(control, target)
}

pub fn apply_single(s: &StateVector, g: &GateMatrix, q: usize) -> Result<StateVector, SimError> {
    s.apply_single(g, q)
}

pub fn measure_qubit<R: Rng + ?Sized>(
    s: &StateVector,
    q: usize,
    basis: Basis,
    rng: &mut R,
) -> Result<(u8, StateVector), SimError> {
    s.measure_qubit(q, basis, rng)
}

// ---------------------------------------------------------------------------
// Ancilla-mediated CNOT between two same-type qubits.
//
// Register layout for the four-qubit fragment:
//   0: common-control ancilla, prepared |+>, measured in X
//   1: control input, measured in Z
//   2: target input, passes through as the target output
//   3: ancilla prepared |0>, becomes the control output
// Three CNOTs all controlled by qubit 0 act on qubits 1, 2 and 3.

pub const FRAGMENT_COMMON: usize = 0;
pub const FRAGMENT_CONTROL_IN: usize = 1;
pub const FRAGMENT_TARGET: usize = 2;
pub const FRAGMENT_CONTROL_OUT: usize = 3;

/// A Pauli on one output qubit, applied as `X^x Z^z` (Z first).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PauliFix {
    pub x: bool,
    pub z: bool,
}

impl PauliFix {
    pub const I: PauliFix = PauliFix { x: false, z: false };
    pub const X: PauliFix = PauliFix { x: true, z: false };
    pub const Z: PauliFix = PauliFix { x: false, z: true };
    pub const XZ: PauliFix = PauliFix { x: true, z: true };

    pub fn apply(self, s: &StateVector, q: usize) -> Result<StateVector, SimError> {
        let mut out = s.clone();
        if self.z {
            out = out.apply_z(q)?;
        }
        if self.x {
            out = out.apply_x(q)?;
        }
        Ok(out)
    }
}

/// Corrections indexed by `(x_outcome_of_common << 1) | z_outcome_of_control_in`,
/// as `(fix on control output, fix on target output)`. Derived by enumeration;
/// see `fragment_corrections_match_enumeration` in the tests.
pub const FRAGMENT_CORRECTIONS: [(PauliFix, PauliFix); 4] = [
    (PauliFix::I, PauliFix::I),
    (PauliFix::X, PauliFix::X),
    (PauliFix::Z, PauliFix::I),
    (PauliFix::XZ, PauliFix::X),
];

/// Run the fragment on a two-qubit input `(control, target)`, post-select the
/// given outcome pair, and return the normalised two-qubit output before
/// corrections. `None` when the branch has zero probability.
pub fn fragment_branch(
    input: &StateVector,
    x_outcome: u8,
    z_outcome: u8,
) -> Result<Option<StateVector>, SimError> {
    assert_eq!(input.num_qubits(), 2);
    // |+>_0 (x) input_{1,2} (x) |0>_3
    let mut amps = vec![c(0.0, 0.0); 16];
    for (k, a) in input.amplitudes().iter().enumerate() {
        for anc in 0..2usize {
            let idx = (anc << 3) | (k << 1);
            amps[idx] = a * FRAC_1_SQRT_2;
        }
    }
    let mut s = StateVector::from_amplitudes(amps)?;
    for t in [FRAGMENT_CONTROL_IN, FRAGMENT_TARGET, FRAGMENT_CONTROL_OUT] {
        s = s.apply_cnot(FRAGMENT_COMMON, t)?;
    }
    if s.probability(FRAGMENT_COMMON, Basis::X, x_outcome)? < 1e-14
        || s.project(FRAGMENT_COMMON, Basis::X, x_outcome)?
            .probability(FRAGMENT_CONTROL_IN, Basis::Z, z_outcome)?
            < 1e-14
    {
        return Ok(None);
    }
    let s = s
        .project(FRAGMENT_COMMON, Basis::X, x_outcome)?
        .project(FRAGMENT_CONTROL_IN, Basis::Z, z_outcome)?;
    Ok(Some(extract_outputs(&s, x_outcome, z_outcome)))
}

/// Contract the measured qubits against their post-measurement states and
/// return the (control_out, target) two-qubit state.
fn extract_outputs(s: &StateVector, x_outcome: u8, z_outcome: u8) -> StateVector {
    let sign = if x_outcome == 0 { 1.0 } else { -1.0 };
    let bra_common = [FRAC_1_SQRT_2, sign * FRAC_1_SQRT_2];
    let mut out = vec![c(0.0, 0.0); 4];
    for (idx, a) in s.amplitudes().iter().enumerate() {
        let b0 = (idx >> 3) & 1;
        let b1 = (idx >> 2) & 1;
        let b2 = (idx >> 1) & 1;
        let b3 = idx & 1;
        if b1 != z_outcome as usize {
            continue;
        }
        // output order: control_out (qubit 3) then target (qubit 2)
        out[(b3 << 1) | b2] += a * bra_common[b0];
    }
    let n: f64 = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut out {
        *a /= n;
    }
    StateVector { qubits: 2, amps: out }
}

/// Distance between two states after removing a global phase.
pub fn phase_insensitive_distance(a: &StateVector, b: &StateVector) -> f64 {
    let overlap = a.inner(b);
    let phase = if overlap.norm() > 1e-15 { overlap / overlap.norm() } else { c(1.0, 0.0) };
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x * phase - y).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub inputs_checked: usize,
    pub branches_checked: usize,
    pub max_deviation: f64,
}

impl IdentityReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_deviation < tolerance
    }
}

fn check_fragment_on(input: &StateVector, report: &mut IdentityReport) -> Result<(), SimError> {
    let expected = input.apply_cnot(0, 1)?;
    for branch in 0..4u8 {
        let (xo, zo) = (branch >> 1, branch & 1);
        let Some(raw) = fragment_branch(input, xo, zo)? else { continue };
        let (fix_c, fix_t) = FRAGMENT_CORRECTIONS[branch as usize];
        let fixed = fix_t.apply(&fix_c.apply(&raw, 0)?, 1)?;
        report.max_deviation = report.max_deviation.max(phase_insensitive_distance(&fixed, &expected));
        report.branches_checked += 1;
    }
    report.inputs_checked += 1;
    Ok(())
}

/// Random normalised state with amplitudes drawn from a seeded source.
pub fn random_state<R: Rng + ?Sized>(qubits: usize, rng: &mut R) -> StateVector {
    let mut amps: Vec<Complex64> =
        (0..1usize << qubits).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= n;
    }
    StateVector { qubits, amps }
}

/// Check the ancilla-mediated CNOT against the 4x4 CNOT on every
/// computational basis input, every outcome branch, and `random_inputs`
/// seeded random states.
pub fn verify_cnot_identity_with(random_inputs: usize, seed: u64) -> IdentityReport {
    use rand::SeedableRng;
    let mut report = IdentityReport { inputs_checked: 0, branches_checked: 0, max_deviation: 0.0 };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut inputs: Vec<StateVector> = (0..4).map(|k| StateVector::basis(2, k).expect("2 qubits")).collect();
    inputs.extend((0..random_inputs).map(|_| random_state(2, &mut rng)));
    for input in &inputs {
        check_fragment_on(input, &mut report).expect("fragment simulation is in range");
    }
    report
}

pub fn verify_cnot_identity() -> IdentityReport {
    verify_cnot_identity_with(20, 0)
}

// ---------------------------------------------------------------------------
// Whole-circuit sampling for the `simulate` subcommand.

#[derive(Debug, Error)]
pub enum CircuitSimError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unknown qubit `{0}`")]
    UnknownQubit(String),
}

/// One shot: returns measurement outcomes in op order as `(qubit, bit)`.
pub fn run_shot<R: Rng + ?Sized>(c: &Circuit, rng: &mut R) -> Result<Vec<(String, u8)>, CircuitSimError> {
    let index = |q: &str| {
        c.declarations.iter().position(|d| d.id == q).ok_or_else(|| CircuitSimError::UnknownQubit(q.into()))
    };
    let mut s = StateVector::zero(c.num_qubits())?;
    let mut outcomes = Vec::new();
    for step in &c.steps {
        for op in step {
            match op {
                GateOp::InitZ(_) | GateOp::Identity(_) => {}
                GateOp::InitX(q) => s = s.apply_single(&GateMatrix::h(), index(q)?)?,
                GateOp::InjectY(q) => {
                    let i = index(q)?;
                    s = s.apply_single(&GateMatrix::h(), i)?.apply_single(&GateMatrix::t(), i)?;
                }
                GateOp::MeasZ(q) | GateOp::MeasX(q) => {
                    let basis = if matches!(op, GateOp::MeasZ(_)) { Basis::Z } else { Basis::X };
                    let (bit, next) = s.measure_qubit(index(q)?, basis, rng)?;
                    s = next;
                    outcomes.push((q.clone(), bit));
                }
                GateOp::Cnot { control, target } => s = s.apply_cnot(index(control)?, index(target)?)?,
                GateOp::MultiTargetCnot { control, targets } => {
                    for t in targets {
                        s = s.apply_cnot(index(control)?, index(t)?)?;
                    }
                }
            }
        }
    }
    Ok(outcomes)
}
