//! Dense complex linear-algebra helpers shared by the network, channel and
//! optimization modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Inverses whose reciprocal condition number falls below this are rejected.
pub const RCOND_THRESHOLD: f64 = 1e-12;

pub const J: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse together with its 1-norm reciprocal condition number.
///
/// Returns `Err(rcond)` when the factorization breaks down or the matrix is
/// too ill-conditioned to trust.
pub fn inverse_with_rcond(m: &CMatrix) -> std::result::Result<(CMatrix, f64), f64> {
    assert!(m.is_square(), "inverse of non-square {}x{}", m.nrows(), m.ncols());
    if m.nrows() == 0 {
        return Ok((m.clone(), 1.0));
    }
    let anorm = norm1(m);
    if anorm == 0.0 || !anorm.is_finite() {
        return Err(0.0);
    }
    let inv = m.clone().lu().try_inverse().ok_or(0.0)?;
    let inorm = norm1(&inv);
    if !inorm.is_finite() {
        return Err(0.0);
    }
    let rcond = 1.0 / (anorm * inorm);
    if rcond < RCOND_THRESHOLD {
        Err(rcond)
    } else {
        Ok((inv, rcond))
    }
}

/// Inverse used by parameter conversions (Z/Y/S, reflection coefficients).
pub fn inv_conversion(m: &CMatrix, what: &'static str) -> Result<CMatrix> {
    inverse_with_rcond(m)
        .map(|(inv, _)| inv)
        .map_err(|rcond| Error::SingularConversion { what, rcond })
}

/// Inverse used when solving the coupled port equations.
pub fn inv_system(m: &CMatrix, what: &'static str) -> Result<CMatrix> {
    inverse_with_rcond(m)
        .map(|(inv, _)| inv)
        .map_err(|rcond| Error::SingularSystem { what, rcond })
}

/// `‖a − b‖_F / ‖b‖_F`, falling back to the absolute difference when `b = 0`.
pub fn rel_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Largest `|m_ij − m_ji|`.
pub fn asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    worst
}

pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.transpose()).scale(0.5)
}

/// `‖mᴴm − I‖_F`.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    (m.adjoint() * m - identity(m.ncols())).norm()
}

pub fn is_diagonal(m: &CMatrix) -> bool {
    m.iter()
        .enumerate()
        .all(|(k, z)| k % m.nrows() == k / m.nrows() || *z == C64::new(0.0, 0.0))
}

pub fn diag(entries: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(entries))
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(real)
}

/// Extends an orthonormal set of columns to an orthonormal basis of `C^n`
/// by Gram–Schmidt against the standard basis.
pub fn complete_orthonormal(columns: &[CVector], n: usize) -> CMatrix {
    let mut basis: Vec<CVector> = columns.to_vec();
    let mut k = 0;
    while basis.len() < n && k < n {
        let mut cand = CVector::zeros(n);
        cand[k] = real(1.0);
        // two passes keep the completion orthogonal to working precision
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&cand);
                cand -= b * proj;
            }
        }
        let nrm = cand.norm();
        if nrm > 1e-8 {
            basis.push(cand.unscale(nrm));
        }
        k += 1;
    }
    CMatrix::from_columns(&basis)
}

/// Takagi factorization `M = U Σ Uᵀ` of a complex symmetric matrix.
///
/// Computed from the real symmetric eigenproblem of `[[A, B], [B, −A]]`
/// with `M = A + jB`, whose positive eigenvalues are the Takagi values and
/// whose eigenvectors `[x; y]` give the Takagi vectors `x + jy`. Directions
/// belonging to (numerically) zero Takagi values are filled in by an
/// orthonormal completion. Values are returned in descending order.
pub fn takagi(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let mut k = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            k[(i, j)] = z.re;
            k[(i, j + n)] = z.im;
            k[(i + n, j)] = z.im;
            k[(i + n, j + n)] = -z.re;
        }
    }
    let eig = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let cutoff = top * 1e-13;

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for &idx in order.iter().take(n) {
        let lambda = eig.eigenvalues[idx];
        if lambda <= cutoff || lambda <= 0.0 {
            break;
        }
        let col = eig.eigenvectors.column(idx);
        let u = CVector::from_fn(n, |r, _| c64(col[r], col[r + n]));
        let nrm = u.norm();
        values.push(lambda);
        vectors.push(u.unscale(nrm));
    }
    values.resize(n, 0.0);
    (values, complete_orthonormal(&vectors, n))
}

/// Nearest symmetric unitary matrix (Frobenius) to the symmetric part of `m`:
/// with `sym(m) = U Σ Uᵀ`, the projection is `U Uᵀ`.
pub fn nearest_symmetric_unitary(m: &CMatrix) -> CMatrix {
    let (_, u) = takagi(&symmetrize(m));
    symmetrize(&(&u * u.transpose()))
}

/// Builds a symmetric unitary `Θ = Q Qᵀ` with `Θ u = v` for unit vectors `u`, `v`.
///
/// Such a `Θ` also maps `v̄` to `ū`. The Takagi factor `Q` is chosen to send a
/// reference pair `(s, s̄)` to `(v, ū)`, where `s` lives in the first two
/// coordinates and has `sᵀs = vᵀu`; matching Gram matrices make `Q` unitary.
pub fn symmetric_unitary_mapping(u: &CVector, v: &CVector) -> CMatrix {
    let n = u.len();
    assert_eq!(n, v.len());
    let u = u.unscale(u.norm());
    let v = v.unscale(v.norm());
    if n == 1 {
        return CMatrix::from_element(1, 1, v[0] / u[0]);
    }
    let gamma = v.transpose() * &u;
    let gamma = gamma[(0, 0)];
    let mag = gamma.norm().min(1.0);
    let half_phase = C64::from_polar(1.0, gamma.arg() / 2.0);
    let c = ((1.0 + mag) / 2.0).sqrt();
    let d = ((1.0 - mag) / 2.0).sqrt();

    let mut s = CVector::zeros(n);
    s[0] = half_phase * c;
    s[1] = half_phase * J * d;

    let s_bar = s.conjugate();
    let u_bar = u.conjugate();

    // Identical Gram–Schmidt coefficients on both sides.
    let mut left = vec![s.clone()];
    let mut right = vec![v.clone()];
    let proj = s.dotc(&s_bar);
    let e2 = &s_bar - &s * proj;
    let f2 = &u_bar - &v * proj;
    let nrm = e2.norm();
    if nrm > 1e-10 {
        left.push(e2.unscale(nrm));
        right.push(f2.unscale(nrm));
    }
    let bs = complete_orthonormal(&left, n);
    let bv = complete_orthonormal(&right, n);
    let q = bv * bs.adjoint();
    symmetrize(&(&q * q.transpose()))
}

/// Largest singular value with its left and right singular vectors.
pub fn dominant_singular(h: &CMatrix) -> (f64, CVector, CVector) {
    let svd = h.clone().svd(true, true);
    let (k, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, s)| if s > best.1 { (i, s) } else { best });
    let u = svd.u.expect("svd u").column(k).into_owned();
    let v = svd.v_t.expect("svd v_t").row(k).adjoint();
    (sigma, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_c(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn takagi_reconstructs_symmetric_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            let a = random_c(&mut rng, n, n);
            let m = symmetrize(&a);
            let (sigma, u) = takagi(&m);
            let recon = &u * CMatrix::from_diagonal(&CVector::from_iterator(n, sigma.iter().map(|&s| real(s)))) * u.transpose();
            assert!(rel_frobenius(&recon, &m) < 1e-12, "n={n}");
            assert!(unitarity_defect(&u) < 1e-12);
            assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn takagi_handles_rank_deficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_c(&mut rng, 4, 1);
        let m = &x * x.transpose();
        let (sigma, u) = takagi(&m);
        assert!(sigma[1..].iter().all(|&s| s == 0.0));
        assert!(unitarity_defect(&u) < 1e-12);
        let recon = (u.column(0) * u.column(0).transpose()).scale(sigma[0]);
        assert!(rel_frobenius(&recon, &m) < 1e-12);
    }

    #[test]
    fn symmetric_unitary_mapping_hits_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..7 {
            for _ in 0..20 {
                let u = random_c(&mut rng, n, 1).column(0).into_owned();
                let v = random_c(&mut rng, n, 1).column(0).into_owned();
                let theta = symmetric_unitary_mapping(&u, &v);
                let un = u.unscale(u.norm());
                let vn = v.unscale(v.norm());
                assert!((&theta * &un - &vn).norm() < 1e-12);
                assert!(asymmetry(&theta) == 0.0);
                assert!(unitarity_defect(&theta) < 1e-12);
            }
        }
    }

    #[test]
    fn mapping_with_conjugate_aligned_vectors() {
        // |vᵀu| = 1 collapses the reference pair to a single direction.
        let u = CVector::from_vec(vec![c64(0.6, 0.0), c64(0.0, 0.8)]);
        let v = u.conjugate() * C64::from_polar(1.0, 0.3);
        let theta = symmetric_unitary_mapping(&u, &v);
        assert!((&theta * &u - &v).norm() < 1e-12);
        assert!(unitarity_defect(&theta) < 1e-12);
    }

    #[test]
    fn singular_inverse_is_rejected() {
        let m = CMatrix::from_row_slice(2, 2, &[real(1.0), real(2.0), real(2.0), real(4.0)]);
        assert!(matches!(inv_conversion(&m, "m"), Err(Error::SingularConversion { .. })));
        let nearly = CMatrix::from_row_slice(2, 2, &[real(1.0), real(1.0), real(1.0), real(1.0 + 1e-14)]);
        assert!(inv_system(&nearly, "m").is_err());
    }

    #[test]
    fn dominant_pair_of_diagonal() {
        let h = diag(&[real(1.0), real(3.0)]);
        let (s, u, v) = dominant_singular(&h);
        assert!((s - 3.0).abs() < 1e-14);
        assert!((u[1].norm() - 1.0).abs() < 1e-14 && (v[1].norm() - 1.0).abs() < 1e-14);
    }
}
