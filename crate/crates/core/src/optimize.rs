//! Received-power maximization for RIS-aided MIMO links by alternating
//! optimization of precoder `w`, combiner `g` and RIS configuration.
//!
//! Three formulations are covered:
//!
//! * S-parameters, single/group/fully-connected (`Θ` symmetric unitary per group),
//! * Y-parameters, tree/forest-connected (`B_I` tridiagonal per group),
//! * Z-parameters with RIS mutual coupling `Z_II`, single/group/fully-connected.
//!
//! Every outer iteration takes the dominant singular pair of the current
//! channel, then updates the RIS for those beamformers. A RIS update is kept
//! only when it does not lower the objective, so the power trace is
//! nondecreasing.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::architectures::{random_feasible, validate, ArchitectureSpec, Family, RisConfiguration, RisParam};
use crate::channel::{map_matched, matched_channel, LinkBlocks};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, identity, real, CMatrix, CVector, RMatrix, C64, J};
use crate::netparams::ParamKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Z-parameters with RIS mutual coupling.
    Z,
    /// Y-parameters, no coupling.
    Y,
    /// S-parameters, no coupling.
    S,
}

/// Channel blocks of one link in all three parameter forms.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoScenario {
    pub z0: f64,
    /// Transmit power, W.
    pub p_t: f64,
    pub z: LinkBlocks,
    /// RIS mutual-coupling block; `Z₀I` when coupling is ignored.
    pub z_ii: CMatrix,
    pub y: LinkBlocks,
    pub s: LinkBlocks,
}

impl MimoScenario {
    /// Builds the Y- and S-forms from Z-form blocks with the matched
    /// mappings.
    pub fn new(z: LinkBlocks, z_ii: Option<CMatrix>, z0: f64, p_t: f64) -> Result<Self> {
        if !(p_t > 0.0) {
            return Err(Error::InvalidConfig(vec![format!("transmit power must be positive, got {p_t}")]));
        }
        let n_i = z.it.nrows();
        let z_ii = z_ii.unwrap_or_else(|| identity(n_i) * real(z0));
        if z_ii.shape() != (n_i, n_i) || z.ri.ncols() != n_i || z.ri.nrows() != z.rt.nrows() || z.it.ncols() != z.rt.ncols() {
            return Err(Error::Dimension("inconsistent scenario blocks".into()));
        }
        let m = map_matched(&z, z0);
        Ok(Self { z0, p_t, z, z_ii, y: m.y, s: m.s })
    }

    pub fn n_t(&self) -> usize {
        self.z.rt.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.z.rt.nrows()
    }

    pub fn n_i(&self) -> usize {
        self.z.it.nrows()
    }

    pub fn blocks(&self, f: Formulation) -> &LinkBlocks {
        match f {
            Formulation::Z => &self.z,
            Formulation::Y => &self.y,
            Formulation::S => &self.s,
        }
    }

    pub fn channel(&self, f: Formulation, ris: &RisConfiguration) -> Result<CMatrix> {
        let h = match f {
            Formulation::Z => matched_channel(ParamKind::Z, &self.z, ris, Some(&self.z_ii))?,
            Formulation::Y => matched_channel(ParamKind::Y, &self.y, ris, None)?,
            Formulation::S => matched_channel(ParamKind::S, &self.s, ris, None)?,
        };
        Ok(h.h)
    }

    /// `P_T |g H w|²`.
    pub fn received_power(&self, f: Formulation, ris: &RisConfiguration, w: &CVector, g: &CVector) -> Result<f64> {
        Ok(self.p_t * gain(&self.channel(f, ris)?, w, g).norm_sqr())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_outer: usize,
    /// Stop when the relative objective change of an outer iteration falls below this.
    pub tol: f64,
    /// Seed of the random feasible initialization.
    pub seed: u64,
    /// Iterations/sweeps allowed to the iterative inner solvers.
    pub inner_budget: usize,
    /// Start from this configuration instead of a random one.
    pub init: Option<RisConfiguration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_outer: 100, tol: 1e-8, seed: 0, inner_budget: 30, init: None }
    }
}

impl SolveOptions {
    fn check(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.max_outer == 0 {
            bad.push("max_outer must be positive".to_string());
        }
        if self.inner_budget == 0 {
            bad.push("inner_budget must be positive".to_string());
        }
        if !(self.tol > 0.0) {
            bad.push("tol must be positive".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    /// Unit-norm precoder.
    pub w: CVector,
    /// Unit-norm combiner, as the entries of the row vector `g`.
    pub g: CVector,
    pub ris: RisConfiguration,
    /// Received power after each outer iteration, W; the first entry is the
    /// initialization with optimal beamformers.
    pub trace: Vec<f64>,
    pub converged: bool,
    /// Largest architecture-constraint violation seen over all iterates.
    pub max_violation: f64,
}

impl BeamformingSolution {
    pub fn power(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }

    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// `g H w` with `g` given by its entries.
pub fn gain(h: &CMatrix, w: &CVector, g: &CVector) -> C64 {
    (g.transpose() * h * w)[(0, 0)]
}

/// Dominant right/left singular vectors `(w, g)`, `g = u₁ᴴ`, so that
/// `g H w = σ_max`. The phase is fixed by making the first nonzero entry of
/// `w` real positive. A zero matrix gives `(e₁, e₁)`.
pub fn update_beamformers(h: &CMatrix) -> (CVector, CVector) {
    let (n_r, n_t) = h.shape();
    if h.iter().all(|v| v.norm() == 0.0) {
        return (unit(n_t, 0), unit(n_r, 0));
    }
    let (_, u, v) = linalg::dominant_singular(h);
    let lead = v.iter().find(|z| z.norm() > 1e-12 * v.norm()).copied().unwrap_or(real(1.0));
    let phase = C64::from_polar(1.0, -lead.arg());
    let w = (&v * phase).unscale((&v * phase).norm());
    let u = &u * phase;
    let g = u.conjugate().unscale(u.norm());
    (w, g)
}

fn unit(n: usize, k: usize) -> CVector {
    let mut e = CVector::zeros(n);
    e[k] = real(1.0);
    e
}

/// Effective scalars `(g·RT·w, g·RI, IT·w)` of one formulation.
pub fn effective(blocks: &LinkBlocks, w: &CVector, g: &CVector) -> (C64, CVector, CVector) {
    let rt = gain(&blocks.rt, w, g);
    let ri = (g.transpose() * &blocks.ri).transpose();
    let it = &blocks.it * w;
    (rt, ri, it)
}

fn alternate<F>(
    scn: &MimoScenario,
    f: Formulation,
    init: RisConfiguration,
    opts: &SolveOptions,
    mut inner: F,
) -> Result<BeamformingSolution>
where
    F: FnMut(&RisConfiguration, &CVector, &CVector) -> Result<RisConfiguration>,
{
    let violation = |ris: &RisConfiguration| {
        validate(ris, 0.0).violations.iter().map(|v| v.magnitude).fold(0.0, f64::max)
    };
    let mut ris = init;
    let mut max_violation = violation(&ris);
    let (mut w, mut g) = update_beamformers(&scn.channel(f, &ris)?);
    let mut power = scn.received_power(f, &ris, &w, &g)?;
    let mut trace = vec![power];
    let mut converged = false;
    for _ in 0..opts.max_outer {
        let current = scn.received_power(f, &ris, &w, &g)?;
        // a candidate the channel cannot be evaluated at is rejected
        if let Ok(cand) = inner(&ris, &w, &g) {
            if let Ok(p) = scn.received_power(f, &cand, &w, &g) {
                if p > current {
                    ris = cand;
                    max_violation = max_violation.max(violation(&ris));
                }
            }
        }
        let (nw, ng) = update_beamformers(&scn.channel(f, &ris)?);
        let next = scn.received_power(f, &ris, &nw, &ng)?;
        // keep the previous pair if the SVD is not better by rounding
        let next = if next >= power {
            w = nw;
            g = ng;
            next
        } else {
            scn.received_power(f, &ris, &w, &g)?.max(next)
        };
        trace.push(next);
        let change = (next - power) / next.max(f64::MIN_POSITIVE);
        power = next;
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok(BeamformingSolution { w, g, ris, trace, converged, max_violation })
}

fn require(spec: &ArchitectureSpec, scn: &MimoScenario, allowed: &[Family], solver: &str) -> Result<()> {
    if !allowed.contains(&spec.family()) {
        return Err(Error::InvalidArchitecture(format!("{solver} does not handle {}-connected RIS", spec.family())));
    }
    if spec.n_i() != scn.n_i() {
        return Err(Error::Dimension(format!("architecture has {} elements, scenario {}", spec.n_i(), scn.n_i())));
    }
    Ok(())
}

fn initial(scn: &MimoScenario, spec: &ArchitectureSpec, opts: &SolveOptions) -> RisConfiguration {
    opts.init.clone().unwrap_or_else(|| random_feasible(spec, opts.seed, scn.z0))
}

// ---------------------------------------------------------------------------
// S-parameters

/// `|s_RT| + Σ_g ‖s_RI,g‖ ‖s_IT,g‖`, the largest `|s_RT + Σ_g s_RI,g Θ_g s_IT,g|`
/// over symmetric unitary `Θ_g`.
pub fn s_inner_bound(s_rt: C64, s_ri: &CVector, s_it: &CVector, spec: &ArchitectureSpec) -> f64 {
    s_rt.norm() + spec.group_ranges().iter().map(|r| s_ri.rows_range(r.clone()).norm() * s_it.rows_range(r.clone()).norm()).sum::<f64>()
}

/// Symmetric unitary `Θ_g` per group with `Θ_g ŝ_IT,g = e^{j arg s_RT} conj(ŝ_RI,g)`,
/// which puts every group term in phase with the direct term and attains
/// [`s_inner_bound`]. Groups without a RIS path keep their current block.
pub fn s_inner_step(s_rt: C64, s_ri: &CVector, s_it: &CVector, spec: &ArchitectureSpec, current: &CMatrix) -> CMatrix {
    let phase = if s_rt.norm() > 0.0 { C64::from_polar(1.0, s_rt.arg()) } else { real(1.0) };
    let mut theta = current.clone();
    for r in spec.group_ranges() {
        let (ri, it) = (s_ri.rows_range(r.clone()).into_owned(), s_it.rows_range(r.clone()).into_owned());
        if ri.norm() == 0.0 || it.norm() == 0.0 {
            continue;
        }
        let target = ri.conjugate() * phase;
        let block = linalg::symmetric_unitary_mapping(&it, &target);
        theta.view_mut((r.start, r.start), block.shape()).copy_from(&block);
    }
    theta
}

/// Alternating optimization over `(w, g, Θ)` for single-, group- and
/// fully-connected RIS in the S-parameter form without coupling.
pub fn optimize_s_group(scn: &MimoScenario, spec: &ArchitectureSpec, opts: &SolveOptions) -> Result<BeamformingSolution> {
    opts.check()?;
    require(spec, scn, &[Family::Single, Family::Group, Family::Fully], "S-parameter solver")?;
    let init = initial(scn, spec, opts);
    let init = RisConfiguration::new(RisParam::Scattering(init.theta()?), *spec, scn.z0);
    alternate(scn, Formulation::S, init, opts, |ris, w, g| {
        let (rt, ri, it) = effective(&scn.s, w, g);
        let current = ris.theta()?;
        let theta = s_inner_step(rt, &ri, &it, spec, &current);
        Ok(RisConfiguration::new(RisParam::Scattering(theta), *spec, scn.z0))
    })
}

// ---------------------------------------------------------------------------
// Shared coordinate machinery

/// `c + σ·a M⁻¹ b` along the symmetric coordinate direction
/// `M → M + jδ(e_k e_lᵀ + e_l e_kᵀ)` (or `jδ e_k e_kᵀ` when `k = l`),
/// evaluated in O(1) per point by a low-rank update of `M⁻¹`.
struct CoordinateLine {
    base: C64,
    sigma: f64,
    diag: bool,
    p: [C64; 2],
    q: [C64; 2],
    inv: [[C64; 2]; 2],
}

impl CoordinateLine {
    fn new(base: C64, sigma: f64, p: &CVector, q: &CVector, m_inv: &CMatrix, k: usize, l: usize) -> Self {
        Self {
            base,
            sigma,
            diag: k == l,
            p: [p[k], p[l]],
            q: [q[k], q[l]],
            inv: [[m_inv[(k, k)], m_inv[(k, l)]], [m_inv[(l, k)], m_inv[(l, l)]]],
        }
    }

    fn value(&self, delta: f64) -> C64 {
        if delta == 0.0 {
            return self.base;
        }
        let c_inv = (J * delta).inv();
        let corr = if self.diag {
            self.p[0] * self.q[0] / (c_inv + self.inv[0][0])
        } else {
            // Woodbury with U = V = [e_k e_l], C = jδ[[0,1],[1,0]]
            let k = [[self.inv[0][0], c_inv + self.inv[0][1]], [c_inv + self.inv[1][0], self.inv[1][1]]];
            let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
            if det.norm() == 0.0 || !det.is_finite() {
                return c64(f64::NAN, f64::NAN);
            }
            let x0 = (k[1][1] * self.q[0] - k[0][1] * self.q[1]) / det;
            let x1 = (-k[1][0] * self.q[0] + k[0][0] * self.q[1]) / det;
            self.p[0] * x0 + self.p[1] * x1
        };
        self.base - corr * self.sigma
    }

    /// Applies the step to `M⁻¹`, `p` and `q` (Woodbury, O(N²)). `false`
    /// when the update is ill-defined.
    fn update(&self, delta: f64, k: usize, l: usize, inv: &mut CMatrix, p: &mut CVector, q: &mut CVector) -> bool {
        let c_inv = (J * delta).inv();
        let idx: &[usize] = if self.diag { &[k] } else { &[k, l] };
        // K⁻¹ for K = C⁻¹ + VᵀM⁻¹U
        let kinv = if self.diag {
            let d = c_inv + self.inv[0][0];
            CMatrix::from_element(1, 1, d.inv())
        } else {
            let m = CMatrix::from_row_slice(2, 2, &[self.inv[0][0], c_inv + self.inv[0][1], c_inv + self.inv[1][0], self.inv[1][1]]);
            match m.try_inverse() {
                Some(v) => v,
                None => return false,
            }
        };
        if !kinv.iter().all(|v| v.is_finite()) {
            return false;
        }
        let cols = inv.select_columns(idx);
        let rows = inv.select_rows(idx);
        let pk = CVector::from_iterator(idx.len(), idx.iter().map(|&i| p[i]));
        let qk = CVector::from_iterator(idx.len(), idx.iter().map(|&i| q[i]));
        *p -= (pk.transpose() * &kinv * &rows).transpose();
        *q -= &cols * (&kinv * qk);
        *inv -= &cols * kinv * rows;
        true
    }
}

/// Maximizes `|line(δ)|` over `δ = scale·tan τ − current`, `τ ∈ (−π/2, π/2)`:
/// coarse scan, then golden-section refinement around the best sample.
/// Returns the new coordinate value if it beats the current one.
fn coordinate_search(line: &CoordinateLine, current: f64, scale: f64) -> Option<f64> {
    const SCAN: usize = 64;
    let objective = |tau: f64| {
        let v = line.value(scale * tau.tan() - current).norm_sqr();
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let now = line.base.norm_sqr();
    let step = std::f64::consts::PI / SCAN as f64;
    let (mut best_tau, mut best) = ((current / scale).atan(), now);
    for i in 0..SCAN {
        let tau = -FRAC_PI_2 + (i as f64 + 0.5) * step;
        let v = objective(tau);
        if v > best {
            best = v;
            best_tau = tau;
        }
    }
    let (lo, hi) = ((best_tau - step).max(-FRAC_PI_2 + 1e-12), (best_tau + step).min(FRAC_PI_2 - 1e-12));
    let (tau, v) = golden_max(objective, lo, hi, 1e-12);
    let (tau, v) = if v > best { (tau, v) } else { (best_tau, best) };
    if v > now * (1.0 + 1e-15) {
        Some(scale * tau.tan())
    } else {
        None
    }
}

/// Golden-section search for a maximum of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Free entries `(k, l)`, `k ≤ l`, of the architecture pattern.
fn free_entries(spec: &ArchitectureSpec) -> Vec<(usize, usize)> {
    let n = spec.n_i();
    (0..n).flat_map(|k| (k..n).map(move |l| (k, l))).filter(|&(k, l)| spec.allows(k, l)).collect()
}

// ---------------------------------------------------------------------------
// Y-parameters

/// `|−y_RT + Σ_g y_RI,g (jB_g + Y₀I)⁻¹ y_IT,g|`.
fn y_objective(y_rt: C64, y_ri: &CVector, y_it: &CVector, b: &RMatrix, y0: f64) -> Option<f64> {
    let n = b.nrows();
    let m = b.map(|v| c64(0.0, v)) + identity(n) * real(y0);
    let inv = linalg::inv_system(&m, "jB + Y0 I").ok()?;
    Some((-y_rt + (y_ri.transpose() * inv * y_it)[(0, 0)]).norm())
}

/// `|c| + Σ_g ‖y_RI,g‖ ‖y_IT,g‖ / 2Y₀` with `c = −y_RT + Σ_g y_RI,g y_IT,g / 2Y₀`,
/// the largest achievable `|−y_RT + y_RI (jB + Y₀I)⁻¹ y_IT|` over lossless
/// reciprocal networks with the architecture's grouping.
pub fn y_inner_bound(y_rt: C64, y_ri: &CVector, y_it: &CVector, spec: &ArchitectureSpec, y0: f64) -> f64 {
    let c = -y_rt + (y_ri.transpose() * y_it)[(0, 0)] / (2.0 * y0);
    c.norm()
        + spec.group_ranges().iter().map(|r| y_ri.rows_range(r.clone()).norm() * y_it.rows_range(r.clone()).norm()).sum::<f64>()
            / (2.0 * y0)
}

/// Susceptance update for fixed beamformers.
///
/// Since `(jB + Y₀I)⁻¹ = (I + Θ)/2Y₀`, the objective is
/// `|c + Σ_g y_RI,g Θ_g y_IT,g / 2Y₀|`, maximized when `Θ_g` sends `ŷ_IT,g` to
/// `e^{j arg c} conj(ŷ_RI,g)`. For `u ↦ v` that condition is linear in the
/// susceptances, `B(u + v) = −jY₀(u − v)`, and is solved over the pattern's
/// free entries by least squares. When the solve does not reach the bound,
/// cyclic coordinate ascent with a golden-section line search continues from
/// the better of the solve and the current point.
pub fn y_inner_step(
    y_rt: C64,
    y_ri: &CVector,
    y_it: &CVector,
    spec: &ArchitectureSpec,
    current: &RMatrix,
    y0: f64,
    budget: usize,
) -> RMatrix {
    let bound = y_inner_bound(y_rt, y_ri, y_it, spec, y0);
    let score = |b: &RMatrix| y_objective(y_rt, y_ri, y_it, b, y0).unwrap_or(f64::NEG_INFINITY);
    let c = -y_rt + (y_ri.transpose() * y_it)[(0, 0)] / (2.0 * y0);
    let phase = if c.norm() > 0.0 { C64::from_polar(1.0, c.arg()) } else { real(1.0) };

    let mut closed = current.clone();
    for r in spec.group_ranges() {
        let (ri, it) = (y_ri.rows_range(r.clone()).into_owned(), y_it.rows_range(r.clone()).into_owned());
        if ri.norm() == 0.0 || it.norm() == 0.0 {
            continue;
        }
        let u = it.unscale(it.norm());
        let v = ri.conjugate().unscale(ri.norm()) * phase;
        if let Some(block) = tridiagonal_mapping(&u, &v, spec, r.start, y0) {
            closed.view_mut((r.start, r.start), block.shape()).copy_from(&block);
        }
    }
    let mut best = if score(&closed) >= score(current) { closed } else { current.clone() };
    if score(&best) >= bound * (1.0 - 1e-12) {
        return best;
    }
    coordinate_ascent(&mut best, spec, y0, budget, |b| {
        let n = b.nrows();
        let m = b.map(|v| c64(0.0, v)) + identity(n) * real(y0);
        let inv = linalg::inv_system(&m, "jB + Y0 I").ok()?;
        let p = (y_ri.transpose() * &inv).transpose();
        let q = &inv * y_it;
        Some((-y_rt + (y_ri.transpose() * &q)[(0, 0)], 1.0, p, q, inv))
    });
    best
}

/// Solves `B(u + v) = −jY₀(u − v)` for the real symmetric block of one group
/// restricted to the architecture pattern. `None` when the system cannot be
/// solved to working accuracy.
fn tridiagonal_mapping(u: &CVector, v: &CVector, spec: &ArchitectureSpec, offset: usize, y0: f64) -> Option<RMatrix> {
    let n = u.len();
    let unknowns: Vec<(usize, usize)> = (0..n)
        .flat_map(|k| (k..n).map(move |l| (k, l)))
        .filter(|&(k, l)| spec.allows(offset + k, offset + l))
        .collect();
    let s = u + v;
    let rhs_c = (u - v) * c64(0.0, -1.0);
    let mut a = RMatrix::zeros(2 * n, unknowns.len());
    for (col, &(k, l)) in unknowns.iter().enumerate() {
        let mut add = |row: usize, coef: C64| {
            a[(row, col)] += coef.re;
            a[(row + n, col)] += coef.im;
        };
        add(k, s[l]);
        if k != l {
            add(l, s[k]);
        }
    }
    let rhs = DVector::from_iterator(2 * n, rhs_c.iter().map(|z| z.re).chain(rhs_c.iter().map(|z| z.im)));
    let svd = a.clone().svd(true, true);
    let beta = svd.solve(&rhs, 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE)).ok()?;
    if (&a * &beta - &rhs).norm() > 1e-9 * (1.0 + rhs.norm()) {
        return None;
    }
    let mut block = RMatrix::zeros(n, n);
    for (&(k, l), &b) in unknowns.iter().zip(beta.iter()) {
        block[(k, l)] = b * y0;
        block[(l, k)] = b * y0;
    }
    block.iter().all(|v| v.is_finite()).then_some(block)
}

/// Cyclic coordinate ascent over the pattern's free entries of the real
/// symmetric `x`. `state(x)` returns `(h, σ, p, q, M⁻¹)` for
/// `h = c + σ a M⁻¹ b`, `p = (a M⁻¹)ᵀ`, `q = M⁻¹ b` at the current point.
fn coordinate_ascent<F>(x: &mut RMatrix, spec: &ArchitectureSpec, scale: f64, sweeps: usize, state: F)
where
    F: Fn(&RMatrix) -> Option<(C64, f64, CVector, CVector, CMatrix)>,
{
    let entries = free_entries(spec);
    for _ in 0..sweeps {
        // fresh factorization once per sweep, rank-2 updates in between
        let Some((mut h, sigma, mut p, mut q, mut inv)) = state(x) else { return };
        let (start, saved) = (h.norm(), x.clone());
        for &(k, l) in &entries {
            let line = CoordinateLine::new(h, sigma, &p, &q, &inv, k, l);
            if let Some(value) = coordinate_search(&line, x[(k, l)], scale) {
                let delta = value - x[(k, l)];
                let next = line.value(delta);
                if next.norm() > h.norm() && line.update(delta, k, l, &mut inv, &mut p, &mut q) {
                    h = next;
                    x[(k, l)] = value;
                    x[(l, k)] = value;
                }
            }
        }
        let Some(end) = state(x).map(|s| s.0.norm()) else {
            *x = saved;
            return;
        };
        if end < start {
            // accumulated round-off in the updates; keep the sweep's start
            *x = saved;
            return;
        }
        if end <= start * (1.0 + 1e-12) {
            return;
        }
    }
}

/// Alternating optimization over `(w, g, B_I)` in the Y-parameter form
/// without coupling. Meant for tree- and forest-connected RIS; any family
/// is accepted, with `B_I` restricted to its pattern.
pub fn optimize_y_forest(scn: &MimoScenario, spec: &ArchitectureSpec, opts: &SolveOptions) -> Result<BeamformingSolution> {
    opts.check()?;
    require(
        spec,
        scn,
        &[Family::Tree, Family::Forest, Family::Single, Family::Group, Family::Fully],
        "Y-parameter solver",
    )?;
    let y0 = 1.0 / scn.z0;
    let init = initial(scn, spec, opts);
    let init = RisConfiguration::new(RisParam::Susceptance(init.susceptance()?), *spec, scn.z0);
    alternate(scn, Formulation::Y, init, opts, |ris, w, g| {
        let (rt, ri, it) = effective(&scn.y, w, g);
        let b = y_inner_step(rt, &ri, &it, spec, &ris.susceptance()?, y0, opts.inner_budget);
        Ok(RisConfiguration::new(RisParam::Susceptance(b), *spec, scn.z0))
    })
}

// ---------------------------------------------------------------------------
// Z-parameters with mutual coupling

/// `(h, p, q, M⁻¹)` for `h = z_RT − z_RI M⁻¹ z_IT`, `M = jX + Z_II`.
fn z_state(z_rt: C64, z_ri: &CVector, z_it: &CVector, z_ii: &CMatrix, x: &RMatrix) -> Option<(C64, CVector, CVector, CMatrix)> {
    let m = x.map(|v| c64(0.0, v)) + z_ii;
    let inv = linalg::inv_system(&m, "jX + Z_II").ok()?;
    let p = (z_ri.transpose() * &inv).transpose();
    let q = &inv * z_it;
    let h = z_rt - (z_ri.transpose() * &q)[(0, 0)];
    Some((h, p, q, inv))
}

/// Gradient of `|z_RT − z_RI (jX + Z_II)⁻¹ z_IT|²` with respect to the free
/// entries of symmetric `X` (each off-diagonal pair moves together).
pub fn z_objective_gradient(
    z_rt: C64,
    z_ri: &CVector,
    z_it: &CVector,
    z_ii: &CMatrix,
    x: &RMatrix,
    spec: &ArchitectureSpec,
) -> Option<(f64, RMatrix)> {
    let (h, p, q, _) = z_state(z_rt, z_ri, z_it, z_ii, x)?;
    let n = x.nrows();
    let mut grad = RMatrix::zeros(n, n);
    for (k, l) in free_entries(spec) {
        let dh = if k == l { J * p[k] * q[k] } else { J * (p[k] * q[l] + p[l] * q[k]) };
        let d = 2.0 * (h.conj() * dh).re;
        grad[(k, l)] = d;
        grad[(l, k)] = d;
    }
    Some((h.norm_sqr(), grad))
}

/// Reactance update for fixed beamformers and RIS coupling `Z_II`.
///
/// Fully-connected RIS with `Re Z_II` positive definite has an exact
/// solution ([`coupled_fully_reactance`]). Otherwise the candidates are the
/// current point and the closed-form optimum of the coupling-free problem;
/// the better one is refined by exact block-coordinate ascent over the
/// groups (`budget` sweeps at most).
#[allow(clippy::too_many_arguments)]
pub fn z_inner_step(
    z_rt: C64,
    z_ri: &CVector,
    z_it: &CVector,
    z_ii: &CMatrix,
    spec: &ArchitectureSpec,
    current: &RMatrix,
    z0: f64,
    budget: usize,
) -> RMatrix {
    let score = |x: &RMatrix| z_state(z_rt, z_ri, z_it, z_ii, x).map(|s| s.0.norm()).unwrap_or(f64::NEG_INFINITY);
    if spec.groups() == 1 && spec.allows(0, spec.n_i() - 1) {
        if let Some((x, bound)) = coupled_fully_reactance(z_rt, z_ri, z_it, z_ii) {
            if score(&x) >= bound * (1.0 - 1e-9) {
                return x;
            }
        }
    }
    let mut best = current.clone();
    if let Some(x) = uncoupled_reactance(z_rt, z_ri, z_it, spec, current, z0) {
        if score(&x) > score(&best) {
            best = x;
        }
    }
    block_ascent(z_rt, z_ri, z_it, z_ii, spec, &mut best, budget);
    best
}

/// Exact maximizer of `|z_RT − z_RI (jX + Z_II)⁻¹ z_IT|` over all real
/// symmetric `X`, with the attained bound.
///
/// Write `Z_II = R + jX_II` and `X′ = X + X_II` (free). With `R = S²`,
/// `(R + jX′)⁻¹ = S⁻¹(I + jS⁻¹X′S⁻¹)⁻¹S⁻¹`, which is the coupling-free
/// problem at unit reference impedance for `a = S⁻¹z_RI`, `b = S⁻¹z_IT`.
/// `None` when `R` is not positive definite.
pub fn coupled_fully_reactance(z_rt: C64, z_ri: &CVector, z_it: &CVector, z_ii: &CMatrix) -> Option<(RMatrix, f64)> {
    let n = z_ii.nrows();
    let r = z_ii.map(|v| v.re);
    let r = (&r + r.transpose()) * 0.5;
    let x_ii = z_ii.map(|v| v.im);
    let x_ii = (&x_ii + x_ii.transpose()) * 0.5;
    let eig = r.symmetric_eigen();
    let top = eig.eigenvalues.max();
    if !(eig.eigenvalues.min() > 1e-12 * top) {
        return None;
    }
    let root = |p: f64| &eig.eigenvectors * RMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.powf(p))) * eig.eigenvectors.transpose();
    let (s, s_inv) = (root(0.5), linalg::to_complex(&root(-0.5)));
    let (a, b) = (&s_inv * z_ri, &s_inv * z_it);
    let c = z_rt - (a.transpose() * &b)[(0, 0)] / 2.0;
    let fully = ArchitectureSpec::fully(n);
    let theta = s_inner_step(c, &a, &b, &fully, &identity(n));
    let inv = linalg::inv_conversion(&(identity(n) - &theta), "I - Theta").ok()?;
    // jX″ = (I + Θ)(I − Θ)⁻¹ at unit reference impedance
    let z = (identity(n) + &theta) * inv;
    let x2 = RMatrix::from_fn(n, n, |i, j| 0.5 * (z[(i, j)].im + z[(j, i)].im));
    let x = &s * x2 * &s - x_ii;
    let bound = c.norm() + a.norm() * b.norm() / 2.0;
    x.iter().all(|v| v.is_finite()).then_some((x, bound))
}

/// Closed-form reactance for `Z_II = Z₀I`, where
/// `z_RT − z_RI(jX + Z₀I)⁻¹z_IT = c + z_RI Θ z_IT / 2Z₀`.
fn uncoupled_reactance(z_rt: C64, z_ri: &CVector, z_it: &CVector, spec: &ArchitectureSpec, current: &RMatrix, z0: f64) -> Option<RMatrix> {
    let n = current.nrows();
    let c = z_rt - (z_ri.transpose() * z_it)[(0, 0)] / (2.0 * z0);
    let cur = RisConfiguration::new(RisParam::Reactance(current.clone()), *spec, z0).theta().ok()?;
    let theta = s_inner_step(c, z_ri, z_it, spec, &cur);
    let inv = linalg::inv_conversion(&(identity(n) - &theta), "I - Theta").ok()?;
    // jX = Z₀(I + Θ)(I − Θ)⁻¹
    let z = (identity(n) + &theta) * inv * real(z0);
    let x = RMatrix::from_fn(n, n, |i, j| if spec.allows(i, j) { 0.5 * (z[(i, j)].im + z[(j, i)].im) } else { 0.0 });
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Block-coordinate ascent over the groups of `X`, each block set to its
/// exact optimum with the others fixed.
///
/// For group `g` with `P = M⁻¹`, the partitioned inverse gives
/// `z_RI M⁻¹ z_IT = κ + ãᵀ(jX_g + Z̃)⁻¹b̃` with `Z̃ = P_gg⁻¹ − jX_g`
/// (a Schur complement of `M`, so `Re Z̃` stays positive definite),
/// `ã = P_gg⁻¹p_g`, `b̃ = P_gg⁻¹q_g` and `κ = z_RI q − p_gᵀP_gg⁻¹q_g`; the
/// block problem is then solved by [`coupled_fully_reactance`]. `P`, `p`,
/// `q` follow each step by a rank-`|g|` Woodbury update.
fn block_ascent(z_rt: C64, z_ri: &CVector, z_it: &CVector, z_ii: &CMatrix, spec: &ArchitectureSpec, x: &mut RMatrix, sweeps: usize) {
    for _ in 0..sweeps {
        let Some((start, mut p, mut q, mut inv)) = z_state(z_rt, z_ri, z_it, z_ii, x) else { return };
        let saved = x.clone();
        let mut h = start;
        for r in spec.group_ranges() {
            let g = r.len();
            let pgg = inv.view((r.start, r.start), (g, g)).into_owned();
            let Ok(pgg_inv) = linalg::inv_system(&pgg, "group block of (jX + Z_II)^-1") else { continue };
            let (pg, qg) = (p.rows_range(r.clone()).into_owned(), q.rows_range(r.clone()).into_owned());
            let xg = x.view((r.start, r.start), (g, g)).into_owned();
            let z_t = &pgg_inv - linalg::to_complex(&xg) * J;
            let (a_t, b_t) = (&pgg_inv * &pg, &pgg_inv * &qg);
            let kappa = (z_ri.transpose() * &q)[(0, 0)] - (pg.transpose() * &b_t)[(0, 0)];
            let Some((xg_new, bound)) = coupled_fully_reactance(z_rt - kappa, &a_t, &b_t, &z_t) else { continue };
            if bound <= h.norm() * (1.0 + 1e-14) {
                continue;
            }
            let jd = linalg::to_complex(&(&xg_new - &xg)) * J;
            let Some(k) = (identity(g) + &pgg * &jd).try_inverse() else { continue };
            let w = &jd * k;
            let cols = inv.columns_range(r.clone()).into_owned();
            let rows = inv.rows_range(r.clone()).into_owned();
            q -= &cols * (&w * &qg);
            p -= (pg.transpose() * &w * &rows).transpose();
            inv -= cols * w * rows;
            x.view_mut((r.start, r.start), (g, g)).copy_from(&xg_new);
            h = z_rt - (z_ri.transpose() * &q)[(0, 0)];
        }
        let Some(end) = z_state(z_rt, z_ri, z_it, z_ii, x).map(|s| s.0.norm()) else {
            *x = saved;
            return;
        };
        if end < start.norm() {
            *x = saved;
            return;
        }
        if end <= start.norm() * (1.0 + 1e-12) {
            return;
        }
    }
}

/// Alternating optimization over `(w, g, X_I)` in the Z-parameter form with
/// the scenario's RIS mutual coupling `Z_II`.
pub fn optimize_z_group_mc(scn: &MimoScenario, spec: &ArchitectureSpec, opts: &SolveOptions) -> Result<BeamformingSolution> {
    opts.check()?;
    require(spec, scn, &[Family::Single, Family::Group, Family::Fully], "Z-parameter solver")?;
    let init = initial(scn, spec, opts);
    let init = RisConfiguration::new(RisParam::Reactance(init.reactance()?), *spec, scn.z0);
    alternate(scn, Formulation::Z, init, opts, |ris, w, g| {
        let (rt, ri, it) = effective(&scn.z, w, g);
        let x = z_inner_step(rt, &ri, &it, &scn.z_ii, spec, &ris.reactance()?, scn.z0, opts.inner_budget);
        Ok(RisConfiguration::new(RisParam::Reactance(x), *spec, scn.z0))
    })
}
