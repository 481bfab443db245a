//! Partitioned N-port network parameters (Z, Y, S), port terminations and
//! the conversions between them.
//!
//! Ports are ordered transmitter (T), RIS (I), receiver (R). All matrices are
//! taken at a single frequency and referenced to one real characteristic
//! impedance `z0` shared by every port.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, identity, real, CMatrix, CVector, RMatrix, C64};

/// Characteristic impedance used when none is given, in ohms.
pub const DEFAULT_Z0: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamKind {
    Z,
    Y,
    S,
}

/// Port group of the RIS-aided link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    T,
    I,
    R,
}

impl Port {
    pub const ALL: [Port; 3] = [Port::T, Port::I, Port::R];

    fn index(self) -> usize {
        match self {
            Port::T => 0,
            Port::I => 1,
            Port::R => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PortPartition {
    pub n_t: usize,
    pub n_i: usize,
    pub n_r: usize,
}

impl PortPartition {
    pub fn new(n_t: usize, n_i: usize, n_r: usize) -> Result<Self> {
        if n_t == 0 || n_i == 0 || n_r == 0 {
            return Err(Error::Dimension(format!(
                "port counts must be positive, got ({n_t}, {n_i}, {n_r})"
            )));
        }
        Ok(Self { n_t, n_i, n_r })
    }

    pub fn total(&self) -> usize {
        self.n_t + self.n_i + self.n_r
    }

    pub fn len(&self, port: Port) -> usize {
        match port {
            Port::T => self.n_t,
            Port::I => self.n_i,
            Port::R => self.n_r,
        }
    }

    pub fn offset(&self, port: Port) -> usize {
        match port {
            Port::T => 0,
            Port::I => self.n_t,
            Port::R => self.n_t + self.n_i,
        }
    }

    pub fn range(&self, port: Port) -> Range<usize> {
        let o = self.offset(port);
        o..o + self.len(port)
    }
}

/// An N-port parameter matrix tagged with its kind and port partition.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMatrix {
    kind: ParamKind,
    values: CMatrix,
    partition: PortPartition,
    z0: f64,
}

impl NetworkMatrix {
    pub fn new(kind: ParamKind, values: CMatrix, partition: PortPartition, z0: f64) -> Result<Self> {
        let n = partition.total();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::Dimension(format!(
                "{kind:?}-matrix is {}x{}, partition needs {n}x{n}",
                values.nrows(),
                values.ncols()
            )));
        }
        if !(z0 > 0.0 && z0.is_finite()) {
            return Err(Error::Dimension(format!("z0 must be positive, got {z0}")));
        }
        Ok(Self { kind, values, partition, z0 })
    }

    /// Assembles a matrix from its nine blocks, indexed `[row][col]` in T, I, R order.
    pub fn from_blocks(
        kind: ParamKind,
        partition: PortPartition,
        z0: f64,
        blocks: &[[CMatrix; 3]; 3],
    ) -> Result<Self> {
        let n = partition.total();
        let mut values = CMatrix::zeros(n, n);
        for row in Port::ALL {
            for col in Port::ALL {
                let b = &blocks[row.index()][col.index()];
                if b.nrows() != partition.len(row) || b.ncols() != partition.len(col) {
                    return Err(Error::Dimension(format!(
                        "block {row:?}{col:?} is {}x{}, expected {}x{}",
                        b.nrows(),
                        b.ncols(),
                        partition.len(row),
                        partition.len(col)
                    )));
                }
                values
                    .view_mut((partition.offset(row), partition.offset(col)), b.shape())
                    .copy_from(b);
            }
        }
        Self::new(kind, values, partition, z0)
    }

    pub fn kind(&self) -> ParamKind {
        self.kind
    }

    pub fn values(&self) -> &CMatrix {
        &self.values
    }

    pub fn partition(&self) -> PortPartition {
        self.partition
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn y0(&self) -> f64 {
        1.0 / self.z0
    }

    pub fn block(&self, row: Port, col: Port) -> CMatrix {
        let p = &self.partition;
        self.values
            .view((p.offset(row), p.offset(col)), (p.len(row), p.len(col)))
            .into_owned()
    }

    pub fn blocks(&self) -> [[CMatrix; 3]; 3] {
        Port::ALL.map(|r| Port::ALL.map(|c| self.block(r, c)))
    }

    /// Frobenius norms of the TI, TR and IR blocks, the ones zeroed by the
    /// unilateral approximation.
    pub fn upper_block_norms(&self) -> [(&'static str, f64); 3] {
        [
            ("TI", self.block(Port::T, Port::I).norm()),
            ("TR", self.block(Port::T, Port::R).norm()),
            ("IR", self.block(Port::I, Port::R).norm()),
        ]
    }

    /// Copy with the TI, TR and IR blocks set to zero.
    pub fn unilateral(&self) -> Self {
        let mut out = self.clone();
        let p = self.partition;
        for (r, c) in [(Port::T, Port::I), (Port::T, Port::R), (Port::I, Port::R)] {
            out.values
                .view_mut((p.offset(r), p.offset(c)), (p.len(r), p.len(c)))
                .fill(C64::new(0.0, 0.0));
        }
        out
    }

    fn expect(&self, kind: ParamKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch { expected: kind, found: self.kind })
        }
    }

    fn with(&self, kind: ParamKind, values: CMatrix) -> Self {
        Self { kind, values, partition: self.partition, z0: self.z0 }
    }

    /// Converts to any kind, going through Z when needed.
    pub fn to_kind(&self, kind: ParamKind) -> Result<Self> {
        use ParamKind::*;
        match (self.kind, kind) {
            (a, b) if a == b => Ok(self.clone()),
            (Z, Y) => z_to_y(self),
            (Z, S) => z_to_s(self),
            (Y, Z) => y_to_z(self),
            (S, Z) => s_to_z(self),
            (Y, S) => z_to_s(&y_to_z(self)?),
            (S, Y) => z_to_y(&s_to_z(self)?),
            _ => unreachable!(),
        }
    }
}

/// `S = (Z + Z₀I)⁻¹ (Z − Z₀I)`.
pub fn z_to_s(z: &NetworkMatrix) -> Result<NetworkMatrix> {
    z.expect(ParamKind::Z)?;
    let shifted = reflection(&z.values, z.z0, "Z + Z0 I")?;
    Ok(z.with(ParamKind::S, shifted))
}

/// `Z = 2Z₀(I − S)⁻¹ − Z₀I`.
pub fn s_to_z(s: &NetworkMatrix) -> Result<NetworkMatrix> {
    s.expect(ParamKind::S)?;
    let n = s.values.nrows();
    let inv = linalg::inv_conversion(&(identity(n) - &s.values), "I - S")?;
    let z = inv.scale(2.0 * s.z0) - identity(n).scale(s.z0);
    Ok(s.with(ParamKind::Z, z))
}

pub fn z_to_y(z: &NetworkMatrix) -> Result<NetworkMatrix> {
    z.expect(ParamKind::Z)?;
    Ok(z.with(ParamKind::Y, linalg::inv_conversion(&z.values, "Z")?))
}

pub fn y_to_z(y: &NetworkMatrix) -> Result<NetworkMatrix> {
    y.expect(ParamKind::Y)?;
    Ok(y.with(ParamKind::Z, linalg::inv_conversion(&y.values, "Y")?))
}

fn reflection(z: &CMatrix, z0: f64, what: &'static str) -> Result<CMatrix> {
    let n = z.nrows();
    let shift = identity(n).scale(z0);
    let inv = linalg::inv_conversion(&(z + &shift), what)?;
    Ok(inv * (z - shift))
}

/// A port termination: a finite impedance matrix or an ideal open circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Impedance(CMatrix),
    /// All ports open (`Z → ∞`, `Y = 0`, `Γ = I`), kept exact rather than
    /// approximated by a large impedance.
    OpenCircuit { ports: usize },
}

impl Termination {
    pub fn ports(&self) -> usize {
        match self {
            Termination::Impedance(z) => z.nrows(),
            Termination::OpenCircuit { ports } => *ports,
        }
    }

    pub fn is_open(&self) -> bool {
        matches!(self, Termination::OpenCircuit { .. })
    }

    /// Admittance `Z⁻¹`; zero for the open circuit.
    pub fn admittance(&self) -> Result<CMatrix> {
        match self {
            Termination::Impedance(z) => linalg::inv_conversion(z, "termination impedance"),
            Termination::OpenCircuit { ports } => Ok(CMatrix::zeros(*ports, *ports)),
        }
    }
}

/// Reflection coefficient matrix `(Z + Z₀I)⁻¹(Z − Z₀I)`; the identity for an open circuit.
pub fn reflection_of(term: &Termination, z0: f64) -> Result<CMatrix> {
    match term {
        Termination::Impedance(z) => reflection(z, z0, "termination + Z0 I"),
        Termination::OpenCircuit { ports } => Ok(identity(*ports)),
    }
}

/// Source, RIS and load terminations of the link.
///
/// `z_t` and `z_r` are diagonal (one series impedance per antenna) and stored
/// as their diagonals; every other view is derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminationSet {
    pub z0: f64,
    pub z_t: CVector,
    pub z_i: Termination,
    pub z_r: CVector,
}

impl TerminationSet {
    pub fn new(z_t: CVector, z_i: Termination, z_r: CVector, z0: f64) -> Result<Self> {
        if z_t.is_empty() || z_r.is_empty() || z_i.ports() == 0 {
            return Err(Error::Dimension("terminations need at least one port each".into()));
        }
        if let Termination::Impedance(z) = &z_i {
            if !z.is_square() {
                return Err(Error::Dimension("RIS impedance must be square".into()));
            }
        }
        Ok(Self { z0, z_t, z_i, z_r })
    }

    /// Sources and loads equal to `z0`, with the given RIS network.
    pub fn matched(partition: PortPartition, z_i: Termination, z0: f64) -> Result<Self> {
        Self::new(
            CVector::from_element(partition.n_t, real(z0)),
            z_i,
            CVector::from_element(partition.n_r, real(z0)),
            z0,
        )
    }

    pub fn partition(&self) -> PortPartition {
        PortPartition { n_t: self.z_t.len(), n_i: self.z_i.ports(), n_r: self.z_r.len() }
    }

    pub fn z_t_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.z_t)
    }

    pub fn z_r_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.z_r)
    }

    pub fn y_t(&self) -> Result<CMatrix> {
        diag_inverse(&self.z_t, "Z_T")
    }

    pub fn y_i(&self) -> Result<CMatrix> {
        self.z_i.admittance()
    }

    pub fn y_r(&self) -> Result<CMatrix> {
        diag_inverse(&self.z_r, "Z_R")
    }

    pub fn gamma_t(&self) -> Result<CMatrix> {
        reflection_of(&Termination::Impedance(self.z_t_matrix()), self.z0)
    }

    pub fn theta(&self) -> Result<CMatrix> {
        reflection_of(&self.z_i, self.z0)
    }

    pub fn gamma_r(&self) -> Result<CMatrix> {
        reflection_of(&Termination::Impedance(self.z_r_matrix()), self.z0)
    }
}

fn diag_inverse(d: &CVector, what: &'static str) -> Result<CMatrix> {
    let scale = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut out = CMatrix::zeros(d.len(), d.len());
    for (k, z) in d.iter().enumerate() {
        let rcond = z.norm() / scale;
        if !(rcond >= linalg::RCOND_THRESHOLD) {
            return Err(Error::SingularConversion { what, rcond: if rcond.is_nan() { 0.0 } else { rcond } });
        }
        out[(k, k)] = z.inv();
    }
    Ok(out)
}

/// Source voltage with its current- and wave-source equivalents.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceExcitation {
    pub v_s: CVector,
    pub i_s: CVector,
    pub b_s: CVector,
}

/// Equivalent current source `i_s = Y_T v_s` and wave source `b_s = (I − Γ_T) v_s / 2`.
pub fn source_equivalents(v_s: &CVector, z_t: &CMatrix, z0: f64) -> Result<SourceExcitation> {
    if !linalg::is_diagonal(z_t) {
        return Err(Error::Dimension("source impedance Z_T must be diagonal".into()));
    }
    if v_s.len() != z_t.nrows() {
        return Err(Error::Dimension(format!(
            "source vector has {} entries, Z_T is {}x{}",
            v_s.len(),
            z_t.nrows(),
            z_t.ncols()
        )));
    }
    let y_t = diag_inverse(&z_t.diagonal(), "Z_T")?;
    let gamma_t = reflection_of(&Termination::Impedance(z_t.clone()), z0)?;
    let n = v_s.len();
    Ok(SourceExcitation {
        v_s: v_s.clone(),
        i_s: &y_t * v_s,
        b_s: (identity(n) - gamma_t) * v_s * real(0.5),
    })
}

/// Deterministic passive, reciprocal Z-matrix fixture.
///
/// `Z = R + jX` with `X` real symmetric and `R = MMᵀ + εI`, `ε = 10⁻³ Z₀`,
/// so the Hermitian part is positive definite: `Z + Z₀I` and `I − S` are
/// always invertible and `S` is strictly contractive.
pub fn random_passive_network(partition: PortPartition, seed: u64, z0: f64) -> NetworkMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = partition.total();
    let x = random_symmetric(&mut rng, n, z0);
    let m = RMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) * z0 / (n as f64).sqrt());
    let r = &m * m.transpose() + RMatrix::identity(n, n) * (1e-3 * z0);
    let z = CMatrix::from_fn(n, n, |i, j| c64(r[(i, j)], x[(i, j)]));
    NetworkMatrix::new(ParamKind::Z, z, partition, z0).expect("fixture dimensions are consistent")
}

/// Deterministic passive terminations: source/load with resistance in
/// `[0.2, 2]·Z₀` and reactance in `[−Z₀, Z₀]`, and a passive (not
/// necessarily lossless) RIS network built like [`random_passive_network`].
pub fn random_passive_terminations(partition: PortPartition, seed: u64, z0: f64) -> TerminationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_7E57);
    let mut diag = |n: usize| {
        CVector::from_fn(n, |_, _| c64(rng.random_range(0.2..2.0) * z0, rng.random_range(-1.0..1.0) * z0))
    };
    let z_t = diag(partition.n_t);
    let z_r = diag(partition.n_r);
    let ris = random_passive_network(
        PortPartition { n_t: partition.n_i, n_i: 0, n_r: 0 },
        seed.wrapping_add(0x9E37_79B9),
        z0,
    );
    TerminationSet { z0, z_t, z_i: Termination::Impedance(ris.values().clone()), z_r }
}

pub(crate) fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> RMatrix {
    let mut x = RMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0) * scale;
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    x
}
