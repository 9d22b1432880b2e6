//! Exact cross-checks for the floating-point machinery.
//!
//! Rank decisions drive every extremality verdict, so this module recomputes
//! them with tolerance-free arithmetic over the complex rationals whenever
//! the inputs allow it: matrix entries are recognized as small-denominator
//! rationals, denominators are cleared row by row, and a fraction-free
//! Gaussian elimination over the Gaussian integers yields the exact rank.
//! A second, independent check verifies non-extremality witnesses directly
//! from their defining convex split.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::duality::KrausFamily;
use crate::error::{MargextError, Result};
use crate::extremality::{build_joint_family, ExtremalityReport, Verdict, WitnessDecomposition};
use crate::numerics::{ComplexMatrix, ComplexScalar};
use crate::states::{BipartiteState, MarginalPair};

/// Largest denominator accepted when recognizing a float as rational.
pub const RATIONALIZE_MAX_DENOMINATOR: u64 = 1_000_000;

/// Largest distance between a float and its rational candidate.
pub const RATIONALIZE_TOL: f64 = 1e-12;

/// Complex number with exact rational components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalComplex {
    /// Real part; `BigRational` keeps denominators positive and reduced.
    pub re: BigRational,
    /// Imaginary part.
    pub im: BigRational,
}

impl RationalComplex {
    /// Builds from integer numerator/denominator pairs.
    pub fn from_integers(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        Self {
            re: BigRational::new(BigInt::from(re_num), BigInt::from(re_den)),
            im: BigRational::new(BigInt::from(im_num), BigInt::from(im_den)),
        }
    }

    /// Real rational from a numerator/denominator pair.
    pub fn real(num: i64, den: i64) -> Self {
        Self::from_integers(num, den, 0, 1)
    }

    /// Additive identity.
    pub fn zero() -> Self {
        Self {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    /// Multiplicative identity.
    pub fn one() -> Self {
        Self {
            re: BigRational::one(),
            im: BigRational::zero(),
        }
    }

    /// True when both components vanish.
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// Complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    fn add(&self, rhs: &Self) -> Self {
        Self {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
        }
    }

    fn sub(&self, rhs: &Self) -> Self {
        Self {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
        }
    }

    fn mul(&self, rhs: &Self) -> Self {
        Self {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }

    /// Nearest float approximation; the boundary back to inexact arithmetic.
    pub fn to_complex(&self) -> ComplexScalar {
        ComplexScalar::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

/// Dense matrix over the complex rationals, row-major like [`ComplexMatrix`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<RationalComplex>,
}

impl RationalMatrix {
    /// Builds from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<RationalComplex>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(MargextError::InvalidParameter(
                "matrix dimensions must be positive".into(),
            ));
        }
        if entries.len() != rows * cols {
            return Err(MargextError::DimensionMismatch(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![RationalComplex::zero(); n * n];
        for k in 0..n {
            entries[k * n + k] = RationalComplex::one();
        }
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry accessor; panics on out-of-range indices.
    pub fn get(&self, row: usize, col: usize) -> &RationalComplex {
        &self.entries[row * self.cols + col]
    }

    /// Exact matrix product.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(MargextError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut entries = vec![RationalComplex::zero(); self.rows * rhs.cols];
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc = RationalComplex::zero();
                for k in 0..self.cols {
                    acc = acc.add(&self.get(r, k).mul(rhs.get(k, c)));
                }
                entries[r * rhs.cols + c] = acc;
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: rhs.cols,
            entries,
        })
    }

    /// Exact entrywise difference.
    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(MargextError::DimensionMismatch(format!(
                "cannot subtract {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    /// Exact scalar multiple by a rational.
    pub fn scale(&self, s: &RationalComplex) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.mul(s)).collect(),
        }
    }

    /// True when every entry vanishes.
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(RationalComplex::is_zero)
    }

    /// Float conversion at the boundary back to inexact arithmetic.
    pub fn to_complex_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c).to_complex())
    }
}

/// Gaussian integer used inside the fraction-free elimination.
#[derive(Clone, Debug, PartialEq, Eq)]
struct GaussInt {
    re: BigInt,
    im: BigInt,
}

impl GaussInt {
    fn zero() -> Self {
        Self {
            re: BigInt::zero(),
            im: BigInt::zero(),
        }
    }

    fn one() -> Self {
        Self {
            re: BigInt::one(),
            im: BigInt::zero(),
        }
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn mul(&self, rhs: &Self) -> Self {
        Self {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }

    fn sub(&self, rhs: &Self) -> Self {
        Self {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
        }
    }

    /// Exact division; the elimination below only ever divides evenly, so a
    /// nonzero remainder is an algorithmic bug and panics.
    fn div_exact(&self, rhs: &Self) -> Self {
        let denom = &rhs.re * &rhs.re + &rhs.im * &rhs.im;
        let num = self.mul(&rhs.conj());
        let (q_re, r_re) = num_integer::Integer::div_rem(&num.re, &denom);
        let (q_im, r_im) = num_integer::Integer::div_rem(&num.im, &denom);
        assert!(
            r_re.is_zero() && r_im.is_zero(),
            "fraction-free elimination produced an inexact division"
        );
        Self { re: q_re, im: q_im }
    }

    fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }
}

/// Exact rank over the field of complex rationals.
///
/// Each row is scaled by the least common multiple of its denominators
/// (rank-preserving), then a fraction-free Gaussian elimination with row and
/// column pivoting runs over the Gaussian integers; every division in that
/// scheme is exact, so no rounding enters at any point.
pub fn exact_rank(m: &RationalMatrix) -> usize {
    let mut work: Vec<Vec<GaussInt>> = (0..m.rows())
        .map(|r| {
            let mut lcm = BigInt::one();
            for c in 0..m.cols() {
                let e = m.get(r, c);
                lcm = num_integer::lcm(lcm.clone(), e.re.denom().clone());
                lcm = num_integer::lcm(lcm, e.im.denom().clone());
            }
            (0..m.cols())
                .map(|c| {
                    let e = m.get(r, c);
                    GaussInt {
                        re: e.re.numer() * (&lcm / e.re.denom()),
                        im: e.im.numer() * (&lcm / e.im.denom()),
                    }
                })
                .collect()
        })
        .collect();

    let (rows, cols) = (m.rows(), m.cols());
    let mut rank = 0;
    let mut prev_pivot = GaussInt::one();
    let mut col = 0;
    while rank < rows && col < cols {
        let Some(pivot_row) = (rank..rows).find(|&r| !work[r][col].is_zero()) else {
            col += 1;
            continue;
        };
        work.swap(rank, pivot_row);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                let a = work[rank][col].mul(&work[r][c]);
                let b = work[r][col].mul(&work[rank][c]);
                work[r][c] = a.sub(&b).div_exact(&prev_pivot);
            }
            work[r][col] = GaussInt::zero();
        }
        prev_pivot = work[rank][col].clone();
        rank += 1;
        col += 1;
    }
    rank
}

/// Recognizes a float as a rational with denominator at most
/// [`RATIONALIZE_MAX_DENOMINATOR`] lying within [`RATIONALIZE_TOL`] of it.
///
/// Runs the continued-fraction expansion and returns the first convergent
/// (or the final admissible semiconvergent) inside the tolerance, so the
/// smallest qualifying denominator wins. The distance test is carried out in
/// exact rational arithmetic on the float's binary value.
pub fn rationalize(x: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let target = BigRational::from_float(x)?;
    let tol = BigRational::new(BigInt::one(), BigInt::from(10u64).pow(12));
    let max_den = BigInt::from(RATIONALIZE_MAX_DENOMINATOR);

    let within = |p: &BigInt, q: &BigInt| -> bool {
        let cand = BigRational::new(p.clone(), q.clone());
        (&target - cand).abs() <= tol
    };

    // Convergents p_k/q_k of the continued fraction of x.
    let mut y = x;
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (BigInt::from_f64(y.floor())?, BigInt::one());
    if within(&p, &q) {
        return Some(BigRational::new(p, q));
    }
    for _ in 0..64 {
        let frac = y - y.floor();
        if frac.abs() < f64::EPSILON * y.abs().max(1.0) {
            break;
        }
        y = 1.0 / frac;
        let a = BigInt::from_f64(y.floor())?;
        let p_next = &a * &p + &p_prev;
        let q_next = &a * &q + &q_prev;
        if q_next > max_den {
            // Largest semiconvergent coefficient keeping the denominator
            // admissible; it is the only remaining candidate.
            let k = (&max_den - &q_prev) / &q;
            if !k.is_zero() {
                let p_semi = &k * &p + &p_prev;
                let q_semi = &k * &q + &q_prev;
                if within(&p_semi, &q_semi) {
                    return Some(BigRational::new(p_semi, q_semi));
                }
            }
            return None;
        }
        if within(&p_next, &q_next) {
            return Some(BigRational::new(p_next, q_next));
        }
        (p_prev, q_prev) = (p, q);
        (p, q) = (p_next, q_next);
    }
    None
}

/// Entrywise rationalization of a float matrix; `None` when any component
/// fails to qualify.
pub fn rationalize_matrix(m: &ComplexMatrix) -> Option<RationalMatrix> {
    let mut entries = Vec::with_capacity(m.rows() * m.cols());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let z = m.get(r, c);
            entries.push(RationalComplex {
                re: rationalize(z.re)?,
                im: rationalize(z.im)?,
            });
        }
    }
    RationalMatrix::new(m.rows(), m.cols(), entries).ok()
}

/// Outcome of certifying a floating-point verdict against the exact rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certification {
    /// The exact rank reproduces both the reported rank and the verdict.
    Confirmed,
    /// The exact rank contradicts the report; a tolerance failed somewhere.
    Refuted,
    /// The inputs are not recognizably rational (or the report abstained), so
    /// exact arithmetic has nothing to certify.
    NotApplicable,
}

/// Certifies an extremality report by recomputing the joint-family rank in
/// exact rational arithmetic.
///
/// Applies only when every entry of the stacked joint family is within
/// [`RATIONALIZE_TOL`] of a rational with denominator at most
/// [`RATIONALIZE_MAX_DENOMINATOR`]; irrational inputs (and reports that
/// abstained with an inconclusive verdict) yield
/// [`Certification::NotApplicable`].
pub fn certify_verdict(k: &KrausFamily, report: &ExtremalityReport) -> Certification {
    let jf = build_joint_family(k);
    let Some(stacked) = rationalize_matrix(jf.stacked()) else {
        return Certification::NotApplicable;
    };
    let exact = exact_rank(&stacked);
    let ell_sq = k.ell() * k.ell();
    let exact_extremal = exact == ell_sq;
    let verdict_matches = match report.verdict {
        Verdict::Extremal => exact_extremal,
        Verdict::NotExtremal => !exact_extremal,
        Verdict::Inconclusive => return Certification::NotApplicable,
    };
    if exact == report.joint_rank && verdict_matches {
        Certification::Confirmed
    } else {
        Certification::Refuted
    }
}

/// Threshold below which two witness halves count as the same state, i.e.
/// the split is trivial and certifies nothing.
pub use crate::extremality::WITNESS_DISTINCTNESS_TOL;

/// Directly verifies a non-extremality witness from its definition: the two
/// halves must average back to ϱ within `tol`, both must be positive
/// semidefinite members of C(ρ₁, ρ₂) within `tol`, and they must differ by
/// more than [`WITNESS_DISTINCTNESS_TOL`] in max norm.
pub fn verify_decomposition(
    rho: &BipartiteState,
    w: &WitnessDecomposition,
    marginals: &MarginalPair,
    tol: f64,
) -> bool {
    let plus = w.state_plus.matrix();
    let minus = w.state_minus.matrix();
    let Ok(avg) = plus.add(minus) else {
        return false;
    };
    let Ok(recombination) = avg
        .scale(crate::numerics::re(0.5))
        .max_abs_diff(rho.matrix())
    else {
        return false;
    };
    if recombination > tol {
        return false;
    }
    for half in [&w.state_plus, &w.state_minus] {
        let Ok(eig) = half.matrix().hermitian_eig(1e-8) else {
            return false;
        };
        if eig.values.last().copied().unwrap_or(0.0) < -1e-10 {
            return false;
        }
        match half.in_c(marginals, tol) {
            Ok(check) if check.ok => {}
            _ => return false,
        }
    }
    match plus.max_abs_diff(minus) {
        Ok(distance) => distance > WITNESS_DISTINCTNESS_TOL,
        Err(_) => false,
    }
}
