//! The universal linear-termination system
//!
//! ```text
//! y = A x,    x = c + Ā y,    Ā = blkdiag(A₁, A₂, A₃),    c = [c₁; 0; 0]
//! ```
//!
//! which describes a three-group N-port network (transmitter, RIS, receiver)
//! closed by linear terminations, whichever of Z, Y or S is used. Solved
//! densely, either in general or via the block cascade available when `A` is
//! block lower triangular.

use crate::error::{Error, Result};
use crate::linalg::{self, identity, CMatrix, CVector};

/// Termination of the middle port group.
#[derive(Debug, Clone, PartialEq)]
pub enum MiddleTermination {
    Matrix(CMatrix),
    /// `A₂ = 0` reached as the open-circuit limit in the admittance form.
    /// The unilateral cascade drops the middle term, since
    /// `(A₂⁻¹ − A₂₂)⁻¹ → 0`.
    Open { ports: usize },
}

impl MiddleTermination {
    pub fn ports(&self) -> usize {
        match self {
            MiddleTermination::Matrix(m) => m.nrows(),
            MiddleTermination::Open { ports } => *ports,
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            MiddleTermination::Matrix(m) => m.clone(),
            MiddleTermination::Open { ports } => CMatrix::zeros(*ports, *ports),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminationProblem {
    a: CMatrix,
    c1: CVector,
    a1: CMatrix,
    a2: MiddleTermination,
    a3: CMatrix,
}

impl TerminationProblem {
    pub fn new(a: CMatrix, c1: CVector, a1: CMatrix, a2: MiddleTermination, a3: CMatrix) -> Result<Self> {
        let (n1, n2, n3) = (a1.nrows(), a2.ports(), a3.nrows());
        let n = n1 + n2 + n3;
        let mut bad = Vec::new();
        if !a1.is_square() || !a3.is_square() {
            bad.push("A1 and A3 must be square".to_string());
        }
        if let MiddleTermination::Matrix(m) = &a2 {
            if !m.is_square() {
                bad.push("A2 must be square".to_string());
            }
        }
        if a.nrows() != n || a.ncols() != n {
            bad.push(format!("A is {}x{}, terminations need {n}x{n}", a.nrows(), a.ncols()));
        }
        if c1.len() != n1 {
            bad.push(format!("c1 has {} entries, A1 is {n1}x{n1}", c1.len()));
        }
        if n1 == 0 || n3 == 0 {
            bad.push("first and third groups must be non-empty".to_string());
        }
        if !bad.is_empty() {
            return Err(Error::Dimension(bad.join("; ")));
        }
        Ok(Self { a, c1, a1, a2, a3 })
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.a1.nrows(), self.a2.ports(), self.a3.nrows()]
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn c1(&self) -> &CVector {
        &self.c1
    }

    fn offsets(&self) -> [usize; 3] {
        let [n1, n2, _] = self.sizes();
        [0, n1, n1 + n2]
    }

    /// Block `A_ij`, zero-based group indices.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let (n, o) = (self.sizes(), self.offsets());
        self.a.view((o[i], o[j]), (n[i], n[j])).into_owned()
    }

    pub fn a_bar(&self) -> CMatrix {
        let n = self.a.nrows();
        let o = self.offsets();
        let mut out = CMatrix::zeros(n, n);
        for (k, m) in [self.a1.clone(), self.a2.matrix(), self.a3.clone()].iter().enumerate() {
            out.view_mut((o[k], o[k]), m.shape()).copy_from(m);
        }
        out
    }

    /// Largest Frobenius norm among `A₁₂`, `A₁₃`, `A₂₃`.
    pub fn upper_block_norm(&self) -> f64 {
        [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| self.block(i, j).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameworkSolution {
    pub x1: CVector,
    pub x2: CVector,
    pub x3: CVector,
    pub y: CVector,
}

impl FrameworkSolution {
    pub fn x(&self) -> CVector {
        stack(&[&self.x1, &self.x2, &self.x3])
    }

    /// Residuals of `y = Ax` and the three termination equations, in that order.
    pub fn residuals(&self, p: &TerminationProblem) -> [f64; 4] {
        let o = p.offsets();
        let [n1, n2, n3] = p.sizes();
        let y1 = self.y.rows(o[0], n1);
        let y2 = self.y.rows(o[1], n2);
        let y3 = self.y.rows(o[2], n3);
        [
            (&self.y - &p.a * self.x()).norm(),
            (&self.x1 - &p.c1 - &p.a1 * y1).norm(),
            (&self.x2 - p.a2.matrix() * y2).norm(),
            (&self.x3 - &p.a3 * y3).norm(),
        ]
    }
}

/// Linear response to the excitation: `x_i = X_i c₁` and `y_i = Y_i c₁`.
///
/// `X_i` are the blocks `Ã_{i1}` of `Ã = (I − ĀA)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub x: [CMatrix; 3],
    pub y: [CMatrix; 3],
}

/// `x = (I − ĀA)⁻¹ c`.
pub fn solve_general(p: &TerminationProblem) -> Result<FrameworkSolution> {
    let x = general_blocks(p, &column(&p.c1))?;
    Ok(solution(p, x))
}

pub fn general_response(p: &TerminationProblem) -> Result<Response> {
    let x = general_blocks(p, &identity(p.sizes()[0]))?;
    Ok(response(p, x))
}

/// Block cascade for block-lower-triangular `A`:
///
/// ```text
/// x₁ = (I − A₁A₁₁)⁻¹ c₁
/// x₂ = (I − A₂A₂₂)⁻¹ A₂A₂₁ x₁
/// x₃ = (A₃⁻¹ − A₃₃)⁻¹ (A₃₁ + A₃₂(A₂⁻¹ − A₂₂)⁻¹A₂₁) x₁
/// ```
///
/// `(A₂⁻¹ − A₂₂)⁻¹` is evaluated as `(I − A₂A₂₂)⁻¹A₂`, which is the same
/// matrix but stays defined when `A₂` is singular.
pub fn solve_unilateral(p: &TerminationProblem) -> Result<FrameworkSolution> {
    let x = unilateral_blocks(p, &column(&p.c1))?;
    Ok(solution(p, x))
}

pub fn unilateral_response(p: &TerminationProblem) -> Result<Response> {
    let x = unilateral_blocks(p, &identity(p.sizes()[0]))?;
    Ok(response(p, x))
}

fn general_blocks(p: &TerminationProblem, rhs: &CMatrix) -> Result<[CMatrix; 3]> {
    let n = p.a.nrows();
    let [n1, n2, n3] = p.sizes();
    let system = identity(n) - p.a_bar() * &p.a;
    let inv = linalg::inv_system(&system, "I - A_bar A")?;
    let x = inv.columns(0, n1) * rhs;
    Ok([
        x.rows(0, n1).into_owned(),
        x.rows(n1, n2).into_owned(),
        x.rows(n1 + n2, n3).into_owned(),
    ])
}

fn unilateral_blocks(p: &TerminationProblem, rhs: &CMatrix) -> Result<[CMatrix; 3]> {
    let tol = 1e-14 * p.a.norm().max(f64::MIN_POSITIVE);
    let upper = p.upper_block_norm();
    if upper > tol {
        return Err(Error::NotBlockLowerTriangular { norm: upper });
    }
    let [n1, n2, n3] = p.sizes();
    let (a11, a21, a22) = (p.block(0, 0), p.block(1, 0), p.block(1, 1));
    let (a31, a32, a33) = (p.block(2, 0), p.block(2, 1), p.block(2, 2));

    let x1 = linalg::inv_system(&(identity(n1) - &p.a1 * a11), "I - A1 A11")? * rhs;

    // (A₂⁻¹ − A₂₂)⁻¹, or nothing for the open sentinel
    let middle = match &p.a2 {
        MiddleTermination::Open { .. } => None,
        MiddleTermination::Matrix(a2) => {
            Some(linalg::inv_system(&(identity(n2) - a2 * &a22), "I - A2 A22")? * a2)
        }
    };
    let (x2, forward) = match &middle {
        Some(m) => (m * &a21 * &x1, a31 + a32 * m * &a21),
        None => (CMatrix::zeros(n2, rhs.ncols()), a31),
    };

    let a3_inv = linalg::inv_system(&p.a3, "A3")?;
    let x3 = linalg::inv_system(&(a3_inv - a33), "A3^-1 - A33")? * forward * &x1;
    debug_assert_eq!(x3.nrows(), n3);
    Ok([x1, x2, x3])
}

fn solution(p: &TerminationProblem, x: [CMatrix; 3]) -> FrameworkSolution {
    let [x1, x2, x3] = x.map(|m| m.column(0).into_owned());
    let y = &p.a * stack(&[&x1, &x2, &x3]);
    FrameworkSolution { x1, x2, x3, y }
}

fn response(p: &TerminationProblem, x: [CMatrix; 3]) -> Response {
    let [n1, n2, n3] = p.sizes();
    let mut full = CMatrix::zeros(n1 + n2 + n3, n1);
    full.rows_mut(0, n1).copy_from(&x[0]);
    full.rows_mut(n1, n2).copy_from(&x[1]);
    full.rows_mut(n1 + n2, n3).copy_from(&x[2]);
    let y = &p.a * full;
    Response {
        y: [
            y.rows(0, n1).into_owned(),
            y.rows(n1, n2).into_owned(),
            y.rows(n1 + n2, n3).into_owned(),
        ],
        x,
    }
}

fn column(v: &CVector) -> CMatrix {
    CMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn stack(parts: &[&CVector]) -> CVector {
    CVector::from_iterator(
        parts.iter().map(|p| p.len()).sum(),
        parts.iter().flat_map(|p| p.iter().copied()),
    )
}
