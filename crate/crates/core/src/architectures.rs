//! Lossless, reciprocal RIS architectures: single-, group-, fully-, tree- and
//! forest-connected reconfigurable impedance networks.
//!
//! A configuration is stored in one parameterization (reactance `X_I`,
//! susceptance `B_I`, or scattering `Θ`) and the others are derived on
//! demand. Group and forest families split the `N_I` ports into consecutive
//! groups of `N_G`; tree and forest constrain the susceptance matrix of each
//! group to be tridiagonal.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, asymmetry, c64, identity, real, CMatrix, CVector, RMatrix, C64, J};
use crate::netparams::{reflection_of, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Single,
    Group,
    Fully,
    Tree,
    Forest,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Single => "single",
            Family::Group => "group",
            Family::Fully => "fully",
            Family::Tree => "tree",
            Family::Forest => "forest",
        }
    }

    pub fn is_tridiagonal(self) -> bool {
        matches!(self, Family::Tree | Family::Forest)
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(Family::Single),
            "group" => Ok(Family::Group),
            "fully" => Ok(Family::Fully),
            "tree" => Ok(Family::Tree),
            "forest" => Ok(Family::Forest),
            other => Err(Error::InvalidArchitecture(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArchitectureSpec {
    family: Family,
    n_i: usize,
    group_size: usize,
}

impl ArchitectureSpec {
    /// `group_size` is required for group and forest, ignored otherwise.
    pub fn new(family: Family, n_i: usize, group_size: Option<usize>) -> Result<Self> {
        if n_i == 0 {
            return Err(Error::InvalidArchitecture("n_i must be positive".into()));
        }
        let group_size = match family {
            Family::Single => 1,
            Family::Fully | Family::Tree => n_i,
            Family::Group | Family::Forest => {
                let g = group_size.ok_or_else(|| {
                    Error::InvalidArchitecture(format!("{family}-connected needs a group size"))
                })?;
                if g == 0 || !n_i.is_multiple_of(g) {
                    return Err(Error::InvalidArchitecture(format!(
                        "group size {g} does not divide n_i = {n_i}"
                    )));
                }
                g
            }
        };
        Ok(Self { family, n_i, group_size })
    }

    pub fn single(n_i: usize) -> Self {
        Self::new(Family::Single, n_i, None).expect("n_i > 0")
    }

    pub fn fully(n_i: usize) -> Self {
        Self::new(Family::Fully, n_i, None).expect("n_i > 0")
    }

    pub fn tree(n_i: usize) -> Self {
        Self::new(Family::Tree, n_i, None).expect("n_i > 0")
    }

    pub fn group(n_i: usize, group_size: usize) -> Result<Self> {
        Self::new(Family::Group, n_i, Some(group_size))
    }

    pub fn forest(n_i: usize, group_size: usize) -> Result<Self> {
        Self::new(Family::Forest, n_i, Some(group_size))
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n_i(&self) -> usize {
        self.n_i
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn groups(&self) -> usize {
        self.n_i / self.group_size
    }

    pub fn group_ranges(&self) -> Vec<Range<usize>> {
        (0..self.groups())
            .map(|g| g * self.group_size..(g + 1) * self.group_size)
            .collect()
    }

    /// Whether entry `(i, j)` may be nonzero in the family's canonical
    /// parameterization (block-diagonal; tridiagonal within blocks for
    /// tree/forest).
    pub fn allows(&self, i: usize, j: usize) -> bool {
        let same_group = i / self.group_size == j / self.group_size;
        same_group && (!self.family.is_tridiagonal() || i.abs_diff(j) <= 1)
    }

    /// Number of tunable circuit components.
    pub fn parameter_count(&self) -> usize {
        let g = self.group_size;
        let per_group = if self.family.is_tridiagonal() { 2 * g - 1 } else { g * (g + 1) / 2 };
        self.groups() * per_group
    }

    /// The unrestricted-within-group family with the same grouping: group for
    /// forest, fully for tree.
    pub fn dense_counterpart(&self) -> Self {
        let family = match self.family {
            Family::Tree => Family::Fully,
            Family::Forest => Family::Group,
            f => f,
        };
        Self { family, ..*self }
    }
}

/// Storage form of an RIS configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum RisParam {
    /// `Z_I = jX_I`, ohms.
    Reactance(RMatrix),
    /// `Y_I = jB_I`, siemens.
    Susceptance(RMatrix),
    Scattering(CMatrix),
    /// General (possibly lossy) impedance network.
    Impedance(CMatrix),
    /// General (possibly lossy) admittance network.
    Admittance(CMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RisConfiguration {
    pub param: RisParam,
    pub spec: ArchitectureSpec,
    pub z0: f64,
}

impl RisConfiguration {
    pub fn new(param: RisParam, spec: ArchitectureSpec, z0: f64) -> Self {
        Self { param, spec, z0 }
    }

    pub fn n_i(&self) -> usize {
        self.spec.n_i
    }

    /// `Z_I`, or the open-circuit sentinel when it does not exist.
    pub fn impedance(&self) -> Result<Termination> {
        match &self.param {
            RisParam::Reactance(x) => Ok(Termination::Impedance(x.map(|v| c64(0.0, v)))),
            RisParam::Impedance(z) => Ok(Termination::Impedance(z.clone())),
            RisParam::Susceptance(b) => admittance_to_impedance(&b.map(|v| c64(0.0, v))),
            RisParam::Admittance(y) => admittance_to_impedance(y),
            RisParam::Scattering(theta) => impedance_from_theta(theta, self.z0),
        }
    }

    /// `Y_I`.
    pub fn admittance(&self) -> Result<CMatrix> {
        match &self.param {
            RisParam::Susceptance(b) => Ok(b.map(|v| c64(0.0, v))),
            RisParam::Admittance(y) => Ok(y.clone()),
            RisParam::Reactance(x) => linalg::inv_conversion(&x.map(|v| c64(0.0, v)), "jX_I"),
            RisParam::Impedance(z) => linalg::inv_conversion(z, "Z_I"),
            RisParam::Scattering(theta) => {
                // Y_I = Y₀(I − Θ)(I + Θ)⁻¹
                let n = theta.nrows();
                let inv = linalg::inv_conversion(&(identity(n) + theta), "I + Theta")?;
                Ok((identity(n) - theta) * inv * real(1.0 / self.z0))
            }
        }
    }

    /// `Θ = (Z_I + Z₀I)⁻¹(Z_I − Z₀I)`.
    pub fn theta(&self) -> Result<CMatrix> {
        match &self.param {
            RisParam::Scattering(theta) => Ok(theta.clone()),
            RisParam::Susceptance(_) | RisParam::Admittance(_) => {
                // Θ = (Y₀I + Y_I)⁻¹(Y₀I − Y_I), defined even when Y_I is singular
                let y = self.admittance()?;
                let n = y.nrows();
                let y0 = identity(n) * real(1.0 / self.z0);
                Ok(linalg::inv_conversion(&(&y0 + &y), "Y0 I + Y_I")? * (y0 - y))
            }
            _ => theta_from_impedance(&self.impedance()?, self.z0),
        }
    }

    /// Real matrix `X_I` when the configuration is lossless.
    pub fn reactance(&self) -> Result<RMatrix> {
        match &self.param {
            RisParam::Reactance(x) => Ok(x.clone()),
            _ => match self.impedance()? {
                Termination::Impedance(z) => Ok(z.map(|v| v.im)),
                Termination::OpenCircuit { .. } => Err(Error::SingularConversion { what: "X_I (open circuit)", rcond: 0.0 }),
            },
        }
    }

    /// Real matrix `B_I` when the configuration is lossless.
    pub fn susceptance(&self) -> Result<RMatrix> {
        match &self.param {
            RisParam::Susceptance(b) => Ok(b.clone()),
            _ => Ok(self.admittance()?.map(|v| v.im)),
        }
    }

    fn raw_matrix(&self) -> CMatrix {
        match &self.param {
            RisParam::Reactance(x) | RisParam::Susceptance(x) => linalg::to_complex(x),
            RisParam::Scattering(m) | RisParam::Impedance(m) | RisParam::Admittance(m) => m.clone(),
        }
    }

    /// Dimensionless scale used by validation: ohms are divided by `z0`,
    /// siemens multiplied by it.
    fn normalizer(&self) -> f64 {
        match &self.param {
            RisParam::Reactance(_) | RisParam::Impedance(_) => 1.0 / self.z0,
            RisParam::Susceptance(_) | RisParam::Admittance(_) => self.z0,
            RisParam::Scattering(_) => 1.0,
        }
    }
}

fn admittance_to_impedance(y: &CMatrix) -> Result<Termination> {
    if y.iter().all(|v| *v == C64::new(0.0, 0.0)) {
        return Ok(Termination::OpenCircuit { ports: y.nrows() });
    }
    linalg::inv_conversion(y, "Y_I").map(Termination::Impedance)
}

pub fn theta_from_impedance(z_i: &Termination, z0: f64) -> Result<CMatrix> {
    reflection_of(z_i, z0)
}

/// `Z_I = Z₀(I + Θ)(I − Θ)⁻¹`.
///
/// A unit eigenvalue of `Θ` is an open circuit. That is representable when it
/// affects every port uniformly (`Θ = I`, or any 1-port); other singular
/// cases are rejected.
pub fn impedance_from_theta(theta: &CMatrix, z0: f64) -> Result<Termination> {
    let n = theta.nrows();
    match linalg::inverse_with_rcond(&(identity(n) - theta)) {
        Ok((inv, _)) => Ok(Termination::Impedance((identity(n) + theta) * inv * real(z0))),
        Err(_) if n == 1 || (theta - identity(n)).norm() < 1e-12 => Ok(Termination::OpenCircuit { ports: n }),
        Err(rcond) => Err(Error::SingularConversion { what: "I - Theta", rcond }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Shape,
    Symmetry,
    Unitarity,
    /// Real part of an impedance/admittance that should be purely imaginary.
    Lossless,
    Sparsity,
    /// The configuration cannot be expressed in the form the constraint needs.
    Conversion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    fn check(&mut self, constraint: Constraint, magnitude: f64, tol: f64) {
        if !(magnitude <= tol) {
            self.violations.push(Violation { constraint, magnitude });
        }
    }
}

/// Checks the lossless-reciprocal constraints and sparsity pattern of the
/// configuration's family. All magnitudes are dimensionless (impedances in
/// units of `z0`, admittances in units of `1/z0`).
///
/// Tree and forest patterns only exist in the susceptance domain, so for
/// those families the pattern is checked on `B_I` whatever the storage form.
pub fn validate(config: &RisConfiguration, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let spec = &config.spec;
    let m = config.raw_matrix();
    let n = spec.n_i;
    if m.nrows() != n || m.ncols() != n {
        report.check(Constraint::Shape, f64::INFINITY, tol);
        return report;
    }
    let scaled = &m * real(config.normalizer());
    report.check(Constraint::Symmetry, asymmetry(&scaled), tol);
    match &config.param {
        RisParam::Scattering(theta) => report.check(Constraint::Unitarity, linalg::unitarity_defect(theta), tol),
        RisParam::Impedance(_) | RisParam::Admittance(_) => {
            report.check(Constraint::Lossless, scaled.iter().map(|v| v.re.abs()).fold(0.0, f64::max), tol)
        }
        _ => {}
    }
    let pattern_source = if spec.family.is_tridiagonal()
        && !matches!(config.param, RisParam::Susceptance(_) | RisParam::Admittance(_))
    {
        match config.admittance() {
            Ok(y) => Some(y * real(config.z0)),
            Err(_) => {
                report.check(Constraint::Conversion, f64::INFINITY, tol);
                None
            }
        }
    } else {
        Some(scaled)
    };
    if let Some(p) = pattern_source {
        report.check(Constraint::Sparsity, masked_magnitude(&p, spec), tol);
    }
    report
}

fn masked_magnitude(m: &CMatrix, spec: &ArchitectureSpec) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !spec.allows(i, j) {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// Deterministic feasible configuration in the family's canonical form:
/// unit-modulus diagonal `Θ` for single, block-diagonal `X_I` with entries
/// in `[−Z₀, Z₀]` for group/fully, tridiagonal-per-block `B_I` with entries
/// in `[−Y₀, Y₀]` for tree/forest.
pub fn random_feasible(spec: &ArchitectureSpec, seed: u64, z0: f64) -> RisConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_i;
    let param = match spec.family {
        Family::Single => RisParam::Scattering(CMatrix::from_diagonal(&CVector::from_fn(n, |_, _| {
            C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
        }))),
        Family::Group | Family::Fully => RisParam::Reactance(random_patterned(&mut rng, spec, z0)),
        Family::Tree | Family::Forest => RisParam::Susceptance(random_patterned(&mut rng, spec, 1.0 / z0)),
    };
    RisConfiguration::new(param, *spec, z0)
}

fn random_patterned(rng: &mut ChaCha8Rng, spec: &ArchitectureSpec, scale: f64) -> RMatrix {
    let n = spec.n_i;
    let mut m = RMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            if spec.allows(i, j) {
                let v = rng.random_range(-1.0..1.0) * scale;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    }
    m
}

/// Nearest feasible configuration for the pattern and lossless constraints.
///
/// Reactance/susceptance are symmetrized and masked; `Θ` is projected per
/// group onto the symmetric unitary matrices (unit-modulus normalization for
/// single); lossy impedances/admittances keep their imaginary part. Tree and
/// forest always come back as a susceptance. Feasible inputs are returned
/// unchanged, so the map is idempotent.
pub fn project(config: &RisConfiguration, spec: &ArchitectureSpec) -> RisConfiguration {
    let candidate = RisConfiguration { spec: *spec, ..config.clone() };
    if validate(&candidate, 1e-12).is_feasible() {
        return candidate;
    }
    let z0 = config.z0;
    let param = if spec.family.is_tridiagonal() {
        let b = match &config.param {
            RisParam::Susceptance(b) => b.clone(),
            RisParam::Admittance(y) => y.map(|v| v.im),
            _ => {
                // go through the unpatterned lossless form first
                let dense = project(config, &spec.dense_counterpart());
                dense.admittance().map(|y| y.map(|v| v.im)).unwrap_or_else(|_| RMatrix::zeros(spec.n_i, spec.n_i))
            }
        };
        RisParam::Susceptance(mask_real(&b, spec))
    } else {
        match &config.param {
            RisParam::Reactance(x) => RisParam::Reactance(mask_real(x, spec)),
            RisParam::Susceptance(b) => RisParam::Susceptance(mask_real(b, spec)),
            RisParam::Impedance(z) => RisParam::Reactance(mask_real(&z.map(|v| v.im), spec)),
            RisParam::Admittance(y) => RisParam::Susceptance(mask_real(&y.map(|v| v.im), spec)),
            RisParam::Scattering(theta) => RisParam::Scattering(project_theta(theta, spec)),
        }
    };
    RisConfiguration::new(param, *spec, z0)
}

fn mask_real(m: &RMatrix, spec: &ArchitectureSpec) -> RMatrix {
    let sym = (m + m.transpose()) * 0.5;
    RMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if spec.allows(i, j) { sym[(i, j)] } else { 0.0 })
}

fn project_theta(theta: &CMatrix, spec: &ArchitectureSpec) -> CMatrix {
    let n = spec.n_i;
    let mut out = CMatrix::zeros(n, n);
    if spec.family == Family::Single {
        for k in 0..n {
            let v = theta[(k, k)];
            out[(k, k)] = if v.norm() > 0.0 { v / v.norm() } else { real(1.0) };
        }
        return out;
    }
    for r in spec.group_ranges() {
        let block = theta.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let p = linalg::nearest_symmetric_unitary(&block);
        out.view_mut((r.start, r.start), p.shape()).copy_from(&p);
    }
    out
}

/// Circuit components of a symmetric admittance network: the grounding
/// admittance `Y_n` at each port and the admittance `Y_{n,m}` linking ports
/// `n < m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceComponents {
    pub grounding: Vec<C64>,
    /// Strictly upper triangular: `links[(n, m)]` for `n < m`.
    pub links: CMatrix,
}

/// `Y_{n,m} = −[Y_I]_{n,m}` and `Y_n = [Y_I]_{n,n} − Σ_{k≠n} Y_{n,k}`.
pub fn components_from_admittance(y_i: &CMatrix) -> Result<AdmittanceComponents> {
    let asym = asymmetry(y_i);
    if asym != 0.0 {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = y_i.nrows();
    let mut links = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            links[(i, j)] = -y_i[(i, j)];
        }
    }
    let grounding = (0..n)
        .map(|i| {
            let coupled: C64 = (0..n).filter(|&k| k != i).map(|k| link(&links, i, k)).sum();
            y_i[(i, i)] - coupled
        })
        .collect();
    Ok(AdmittanceComponents { grounding, links })
}

fn link(links: &CMatrix, i: usize, k: usize) -> C64 {
    if i < k {
        links[(i, k)]
    } else {
        links[(k, i)]
    }
}

impl AdmittanceComponents {
    /// Inverse of [`components_from_admittance`]: `[Y_I]_{n,n} = Y_n + Σ_{k≠n} Y_{n,k}`,
    /// `[Y_I]_{n,m} = −Y_{n,m}`. Exact whenever the sums involved are exactly
    /// representable; otherwise equal to rounding.
    pub fn reassemble(&self) -> CMatrix {
        let n = self.grounding.len();
        CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                let coupled: C64 = (0..n).filter(|&k| k != i).map(|k| link(&self.links, i, k)).sum();
                self.grounding[i] + coupled
            } else {
                -link(&self.links, i, j)
            }
        })
    }
}

/// `J·x` helper used by the optimizers when building `jX` / `jB`.
pub fn imag_matrix(m: &RMatrix) -> CMatrix {
    m.map(|v| J * v)
}
