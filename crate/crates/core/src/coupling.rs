//! Mutual coupling between the elements of a uniform linear array of thin,
//! parallel, side-by-side dipoles.
//!
//! Mutual impedances come from the induced-EMF method with sinusoidal
//! current distributions, evaluated in closed form through the cosine and
//! sine integrals, and referred to the feed terminals.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{c64, real, CMatrix, C64, J};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Intrinsic impedance of free space, ohms.
pub const ETA0: f64 = 376.730_313_668;
/// Default carrier frequency, Hz.
pub const DEFAULT_FREQUENCY: f64 = 28e9;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Cosine and sine integrals `(Ci(x), Si(x))` for `x > 0`.
///
/// Power series for small arguments, Lentz's continued fraction for
/// `E₁(jx)` otherwise.
pub fn cisi(x: f64) -> (f64, f64) {
    const MAXIT: usize = 200;
    const EPS: f64 = f64::EPSILON;
    const FPMIN: f64 = 1e-300;
    let t = x.abs();
    if t == 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let (ci, mut si) = if t > 2.0 {
        let mut b = c64(1.0, t);
        let mut c = real(1.0 / FPMIN);
        let mut d = b.inv();
        let mut h = d;
        for i in 1..MAXIT {
            let a = -((i * i) as f64);
            b += 2.0;
            d = (d * a + b).inv();
            c = b + c.inv() * a;
            let del = c * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < EPS {
                break;
            }
        }
        h *= c64(t.cos(), -t.sin());
        (-h.re, FRAC_PI_2 + h.im)
    } else {
        let (mut sum, mut sums, mut sumc) = (0.0, 0.0, 0.0);
        let (mut sign, mut fact) = (1.0, 1.0);
        let mut odd = true;
        for k in 1..MAXIT {
            let kf = k as f64;
            fact *= t / kf;
            let term = fact / kf;
            sum += sign * term;
            let err = term / f64::abs(sum);
            if odd {
                sign = -sign;
                sums = sum;
                sum = sumc;
            } else {
                sumc = sum;
                sum = sums;
            }
            if err < EPS {
                break;
            }
            odd = !odd;
        }
        (sumc + t.ln() + EULER_GAMMA, sums)
    };
    if x < 0.0 {
        si = -si;
    }
    (ci, si)
}

/// `E(x) = Ci(x) − j·Si(x)`, an antiderivative of `e^{−jx}/x`.
fn e_int(x: f64) -> C64 {
    let (ci, si) = cisi(x);
    c64(ci, -si)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub n_i: usize,
    /// Inter-element spacing, m.
    pub spacing: f64,
    /// Dipole length, m.
    pub length: f64,
    /// Hz.
    pub frequency: f64,
}

impl ArrayGeometry {
    pub fn new(n_i: usize, spacing: f64, length: f64, frequency: f64) -> Result<Self> {
        let g = Self { n_i, spacing, length, frequency };
        g.check()?;
        Ok(g)
    }

    /// Quarter-wavelength dipoles at quarter-wavelength spacing.
    pub fn quarter_wave(n_i: usize, frequency: f64) -> Result<Self> {
        let lambda = SPEED_OF_LIGHT / frequency;
        Self::new(n_i, lambda / 4.0, lambda / 4.0, frequency)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    fn check(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_i == 0 {
            bad.push("n_i must be positive".to_string());
        }
        for (name, v) in [("spacing", self.spacing), ("length", self.length), ("frequency", self.frequency)] {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be positive, got {v}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGeometry(bad.join("; ")))
        }
    }
}

/// Mutual impedance between two parallel side-by-side dipoles of length
/// `length` at distance `d`, in ohms, referred to the feed currents.
///
/// With half-length `h`, `k = 2π/λ`, the induced EMF gives
///
/// ```text
/// Z₂₁ = jη/(4π sin²kh) ∫_{−h}^{h} [e^{−jkR₁}/R₁ + e^{−jkR₂}/R₂ − 2cos(kh) e^{−jkr}/r] sin(k(h−|z|)) dz
/// ```
///
/// with `R₁,₂` the distances to the dipole ends and `r` to its centre.
pub fn dipole_mutual_impedance(length: f64, d: f64, wavelength: f64) -> Result<C64> {
    for (name, v) in [("length", length), ("distance", d), ("wavelength", wavelength)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidGeometry(format!("{name} must be positive, got {v}")));
        }
    }
    let k = 2.0 * PI / wavelength;
    let h = length / 2.0;
    let s = (k * h).sin();
    if s.abs() < 1e-8 {
        return Err(Error::InvalidGeometry(format!(
            "dipole length {length} is a multiple of the wavelength; feed current vanishes"
        )));
    }
    let field = weighted(k, d, h, h) + weighted(k, d, h, -h) - weighted(k, d, h, 0.0) * (2.0 * (k * h).cos());
    Ok(J * ETA0 / (4.0 * PI) * field / (s * s))
}

/// `∫_{−h}^{h} e^{−jkR}/R · sin(k(h − |z|)) dz` with `R = √(d² + (z − z₀)²)`.
fn weighted(k: f64, d: f64, h: f64, z0: f64) -> C64 {
    let up = C64::from_polar(1.0, k * h);
    let down = up.conj();
    let terms = up * exp_integral(k, d, z0, -1.0, 0.0, h) - down * exp_integral(k, d, z0, 1.0, 0.0, h)
        + up * exp_integral(k, d, z0, 1.0, -h, 0.0)
        - down * exp_integral(k, d, z0, -1.0, -h, 0.0);
    terms / c64(0.0, 2.0)
}

/// `∫_a^b e^{−jkR}/R · e^{jσkz} dz` in closed form.
///
/// With `t = z − z₀`, `e^{−jk(R∓t)}/R` has antiderivative `∓E(k(R∓t))`.
fn exp_integral(k: f64, d: f64, z0: f64, sigma: f64, a: f64, b: f64) -> C64 {
    let anti = |z: f64| {
        let t = z - z0;
        let r = d.hypot(t);
        if sigma > 0.0 {
            // R − t without cancellation for t ≫ d
            let u = if t > 0.0 { d * d / (r + t) } else { r - t };
            -e_int(k * u)
        } else {
            let u = if t < 0.0 { d * d / (r - t) } else { r + t };
            e_int(k * u)
        }
    };
    C64::from_polar(1.0, sigma * k * z0) * (anti(b) - anti(a))
}

/// Mutual-coupling matrix `Z_II` of the array: `Z₀` on the diagonal
/// (perfectly matched elements), `Z_m(|n − m|·d)` off it.
pub fn ris_coupling_matrix(geom: &ArrayGeometry, z0: f64) -> Result<CMatrix> {
    geom.check()?;
    let n = geom.n_i;
    let lambda = geom.wavelength();
    let lags = (1..n)
        .map(|m| dipole_mutual_impedance(geom.length, m as f64 * geom.spacing, lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(CMatrix::from_fn(n, n, |i, j| if i == j { real(z0) } else { lags[i.abs_diff(j) - 1] }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architectures::{random_feasible, ArchitectureSpec};
    use crate::channel::{matched_channel, LinkBlocks};
    use crate::linalg::rel_frobenius;
    use crate::netparams::DEFAULT_Z0;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Composite Simpson on the induced-EMF integrand.
    fn quadrature(length: f64, d: f64, lambda: f64) -> C64 {
        let k = 2.0 * PI / lambda;
        let h = length / 2.0;
        let f = |z: f64| {
            let g = |r: f64| C64::from_polar(1.0 / r, -k * r);
            let (r1, r2, r0) = (d.hypot(z - h), d.hypot(z + h), d.hypot(z));
            (g(r1) + g(r2) - g(r0) * (2.0 * (k * h).cos())) * (k * (h - z.abs())).sin()
        };
        let n = 20_000;
        let step = 2.0 * h / n as f64;
        let mut acc = f(-h) + f(h);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += f(-h + i as f64 * step) * w;
        }
        J * ETA0 / (4.0 * PI) * acc * (step / 3.0) / (k * h).sin().powi(2)
    }

    #[test]
    fn sine_cosine_integrals() {
        for (x, ci, si) in [
            (0.5, -0.177_784_078_806_612_9, 0.493_107_418_043_066_7),
            (1.0, 0.337_403_922_900_968_1, 0.946_083_070_367_183),
            (2.0, 0.422_980_828_774_865, 1.605_412_976_802_694_8),
            (5.0, -0.190_029_749_656_643_9, 1.549_931_244_944_674),
            (20.0, 0.044_419_820_845_353_3, 1.548_241_701_043_439_8),
        ] {
            let (c, s) = cisi(x);
            assert!((c - ci).abs() < 1e-13, "Ci({x}) = {c}");
            assert!((s - si).abs() < 1e-13, "Si({x}) = {s}");
        }
        assert_eq!(cisi(-1.0).1, -cisi(1.0).1);
    }

    #[test]
    fn half_wave_matches_quadrature() {
        let lambda = 1.0;
        for d in [0.1, 0.25, 0.5, 1.0, 1.7] {
            let closed = dipole_mutual_impedance(0.5, d, lambda).unwrap();
            let numeric = quadrature(0.5, d, lambda);
            assert!((closed - numeric).norm() < 5e-3 * numeric.norm(), "d = {d}: {closed} vs {numeric}");
        }
        // textbook value for half-wave dipoles half a wavelength apart
        let z = dipole_mutual_impedance(0.5, 0.5, 1.0).unwrap();
        assert!((z - c64(-12.5, -29.9)).norm() < 0.5, "{z}");
    }

    #[test]
    fn quarter_wave_matches_quadrature() {
        for d in [0.05, 0.25, 0.5, 2.0] {
            let closed = dipole_mutual_impedance(0.25, d, 1.0).unwrap();
            let numeric = quadrature(0.25, d, 1.0);
            assert!((closed - numeric).norm() < 1e-6 * numeric.norm(), "d = {d}");
        }
    }

    #[test]
    fn far_separation_decays() {
        let z = dipole_mutual_impedance(0.25, 1e4, 1.0).unwrap();
        assert!(z.norm() < 1e-3, "{z}");
    }

    #[test]
    fn continuous_in_distance() {
        // successive samples 1e-4 λ apart differ by O(δ)
        let delta = 1e-4;
        let mut d = 0.05;
        while d < 5.0 {
            let a = dipole_mutual_impedance(0.25, d, 1.0).unwrap();
            let b = dipole_mutual_impedance(0.25, d + delta, 1.0).unwrap();
            let c = dipole_mutual_impedance(0.25, d + delta / 2.0, 1.0).unwrap();
            assert!((b - a).norm() < 1e-2 * a.norm().max(1.0), "jump at d = {d}");
            assert!((c - a).norm() < 0.6 * (b - a).norm() + 1e-12, "not Lipschitz at d = {d}");
            d += 0.01;
        }
    }

    #[test]
    fn far_field_asymptote() {
        // all path lengths ≈ d: |Z₂₁| → η(1 − cos kh)²/(π k d sin²kh)
        let (k, h) = (2.0 * PI, 0.125);
        for d in [100.0, 1000.0] {
            let z = dipole_mutual_impedance(0.25, d, 1.0).unwrap();
            let asym = ETA0 * (1.0 - (k * h).cos()).powi(2) / (PI * k * d * (k * h).sin().powi(2));
            assert!((z.norm() - asym).abs() < 1e-2 * asym, "d = {d}: {} vs {asym}", z.norm());
        }
    }

    #[test]
    fn invalid_geometry() {
        assert!(matches!(dipole_mutual_impedance(0.25, 0.0, 1.0), Err(Error::InvalidGeometry(_))));
        assert!(matches!(dipole_mutual_impedance(1.0, 0.3, 1.0), Err(Error::InvalidGeometry(_))));
        assert!(ArrayGeometry::new(4, -1.0, 0.1, 1e9).is_err());
    }

    #[test]
    fn coupling_matrix_structure() {
        let g = ArrayGeometry::quarter_wave(1, DEFAULT_FREQUENCY).unwrap();
        assert_eq!(ris_coupling_matrix(&g, DEFAULT_Z0).unwrap(), CMatrix::from_element(1, 1, real(DEFAULT_Z0)));
        let g = ArrayGeometry::quarter_wave(6, DEFAULT_FREQUENCY).unwrap();
        let z = ris_coupling_matrix(&g, DEFAULT_Z0).unwrap();
        assert_eq!(z, z.transpose());
        for i in 0..6 {
            assert_eq!(z[(i, i)], real(DEFAULT_Z0));
            for j in 0..6 {
                if i > 0 && j > 0 {
                    assert_eq!(z[(i, j)], z[(i - 1, j - 1)]);
                }
            }
        }
        let direct = dipole_mutual_impedance(g.length, 2.0 * g.spacing, g.wavelength()).unwrap();
        assert_eq!(z[(0, 2)], direct);
    }

    #[test]
    fn coupling_fades_with_spacing() {
        let lambda = SPEED_OF_LIGHT / DEFAULT_FREQUENCY;
        let dev = |spacing: f64| {
            let g = ArrayGeometry::new(4, spacing, lambda / 4.0, DEFAULT_FREQUENCY).unwrap();
            let z = ris_coupling_matrix(&g, DEFAULT_Z0).unwrap();
            (z - CMatrix::identity(4, 4) * real(DEFAULT_Z0)).norm()
        };
        let grid: Vec<f64> = (0..=36).map(|k| (2.0 + 0.5 * k as f64) * lambda).collect();
        for w in grid.windows(2) {
            assert!(dev(w[1]) < dev(w[0]), "not decreasing at {}", w[1] / lambda);
        }
    }

    #[test]
    fn widely_spaced_array_is_decoupled() {
        let lambda = SPEED_OF_LIGHT / DEFAULT_FREQUENCY;
        let off_diagonal = |spacing: f64| {
            let g = ArrayGeometry::new(4, spacing * lambda, lambda / 4.0, DEFAULT_FREQUENCY).unwrap();
            let z_ii = ris_coupling_matrix(&g, DEFAULT_Z0).unwrap();
            let off = (&z_ii - CMatrix::identity(4, 4) * real(DEFAULT_Z0)).iter().map(|v| v.norm()).fold(0.0, f64::max);
            (z_ii, off)
        };
        // radiative coupling decays only as 1/d: about 0.033 Ω at 100 λ
        let (z_ii, off) = off_diagonal(100.0);
        assert!(off < 0.04, "{off}");
        assert!(off_diagonal(400.0).1 < 1e-2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rc = |r, c| CMatrix::from_fn(r, c, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let blocks = LinkBlocks { rt: CMatrix::zeros(2, 2), ri: rc(2, 4), it: rc(4, 2) };
        let ris = random_feasible(&ArchitectureSpec::fully(4), 3, DEFAULT_Z0);
        let with = matched_channel(crate::netparams::ParamKind::Z, &blocks, &ris, Some(&z_ii)).unwrap().h;
        let without = matched_channel(crate::netparams::ParamKind::Z, &blocks, &ris, None).unwrap().h;
        assert!(rel_frobenius(&with, &without) < 1e-3);
    }
}
