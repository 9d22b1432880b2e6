//! Dense complex-matrix kernel.
//!
//! Everything downstream — partial traces, Choi matrices, joint-independence
//! ranks, witness factorizations — reduces to the handful of operations here:
//! products, adjoints, canonical (non-conjugating) transposition, Hermitian
//! eigendecomposition with deterministic ordering, singular value
//! decomposition, tolerance-based rank decisions, the Hermitian PSD square
//! root, and row-major vectorization.
//!
//! All values are immutable after construction and every operation is a pure
//! function, so the types are safe to share across threads.

use nalgebra::{Complex, DMatrix};

use crate::error::{MargextError, Result};

/// Complex scalar with 64-bit float components. NaN and infinities are
/// rejected at [`ComplexMatrix`] construction, so finite components may be
/// assumed everywhere else.
pub type ComplexScalar = Complex<f64>;

/// Shorthand for a real-valued scalar promoted to [`ComplexScalar`].
pub fn re(x: f64) -> ComplexScalar {
    Complex::new(x, 0.0)
}

/// Dense complex matrix; the universal carrier for operators, states, and
/// stacked vectorizations.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<ComplexScalar>,
}

/// Result of a Hermitian eigendecomposition: eigenvalues in descending order
/// and matching orthonormal eigenvector columns.
///
/// Within a degenerate cluster the individual vectors are canonicalized (see
/// [`ComplexMatrix::hermitian_eig`]) but only the spanned projector is a
/// well-defined function of the input; consumers must not attach meaning to
/// single vectors inside a cluster.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Columns are orthonormal eigenvectors, ordered like `values`.
    pub vectors: ComplexMatrix,
}

/// Thin singular value decomposition a = U·diag(s)·W†.
#[derive(Clone, Debug)]
pub struct SvdParts {
    /// Left singular vectors, orthonormal columns.
    pub u: ComplexMatrix,
    /// Singular values, descending.
    pub singular_values: Vec<f64>,
    /// Right singular vectors (not conjugated), orthonormal columns.
    pub w: ComplexMatrix,
}

/// Outcome of a tolerance-based rank decision, with the two singular values
/// that bracket the cut so callers can judge how close the call was.
#[derive(Clone, Copy, Debug)]
pub struct RankDecision {
    /// Number of singular values above the relative threshold.
    pub rank: usize,
    /// Smallest singular value counted into the rank (0 when rank is 0).
    pub smallest_kept: f64,
    /// Largest singular value dropped below the threshold (0 when full rank).
    pub largest_dropped: f64,
}

impl RankDecision {
    /// True when the rank decision sits within a factor 10 of the threshold
    /// on either side, i.e. too close to the tolerance to be trusted.
    pub fn is_margin_tight(&self, rel_tol: f64, sigma_max: f64) -> bool {
        if sigma_max <= 0.0 {
            return false;
        }
        let threshold = rel_tol * sigma_max;
        let kept_tight = self.rank > 0 && self.smallest_kept < 10.0 * threshold;
        let dropped_tight = self.largest_dropped > 0.1 * threshold;
        kept_tight || dropped_tight
    }
}

/// Threshold below which a vector component is treated as zero when fixing
/// the global phase of eigenvectors and Kraus operators.
pub(crate) const PHASE_FIX_MIN_MODULUS: f64 = 1e-8;

/// Maximum relative reconstruction residual accepted from the dense
/// eigendecomposition. A correct factorization lands near n·ε ≈ 1e-14 of the
/// spectral scale; anything above this bound means the returned columns are
/// not eigenvectors and triggers the cyclic Jacobi fallback.
const EIG_RECONSTRUCTION_TOL: f64 = 1e-12;

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN/infinite
    /// components and length mismatches.
    pub fn new(rows: usize, cols: usize, entries: Vec<ComplexScalar>) -> Result<Self> {
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
        for (idx, z) in entries.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(MargextError::NonFiniteEntry(idx));
            }
        }
        Ok(Self {
            inner: DMatrix::from_fn(rows, cols, |r, c| entries[r * cols + c]),
        })
    }

    /// Builds a matrix by evaluating `f(row, col)`. Intended for internal
    /// construction where finiteness is structural; debug builds still check.
    pub fn from_fn<F: FnMut(usize, usize) -> ComplexScalar>(
        rows: usize,
        cols: usize,
        f: F,
    ) -> Self {
        let inner = DMatrix::from_fn(rows, cols, f);
        debug_assert!(inner.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        Self { inner }
    }

    /// Zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    /// Square matrix with the given real diagonal.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), diag.len(), |r, c| {
            if r == c {
                re(diag[r])
            } else {
                re(0.0)
            }
        })
    }

    pub(crate) fn as_dmatrix(&self) -> &DMatrix<ComplexScalar> {
        &self.inner
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    /// Entry accessor; panics on out-of-range indices.
    pub fn get(&self, row: usize, col: usize) -> ComplexScalar {
        self.inner[(row, col)]
    }

    /// Entries in row-major order.
    pub fn entries_row_major(&self) -> Vec<ComplexScalar> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                out.push(self.inner[(r, c)]);
            }
        }
        out
    }

    /// Standard matrix product.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(MargextError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self {
            inner: &self.inner * &rhs.inner,
        })
    }

    /// Entrywise sum.
    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs, "add")?;
        Ok(Self {
            inner: &self.inner + &rhs.inner,
        })
    }

    /// Entrywise difference.
    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs, "subtract")?;
        Ok(Self {
            inner: &self.inner - &rhs.inner,
        })
    }

    /// Scalar multiple.
    pub fn scale(&self, s: ComplexScalar) -> Self {
        Self {
            inner: self.inner.map(|z| z * s),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    /// Entrywise index swap with no conjugation — transposition with respect
    /// to the canonical real basis.
    pub fn transpose_canonical(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    /// Entrywise complex conjugate.
    pub fn conjugate(&self) -> Self {
        Self {
            inner: self.inner.map(|z| z.conj()),
        }
    }

    /// Trace of a square matrix.
    pub fn trace(&self) -> Result<ComplexScalar> {
        self.check_square()?;
        Ok(self.inner.trace())
    }

    /// Kronecker product; the row-major index of the result follows the
    /// lexicographic product-basis convention |i⟩⊗|j⟩ ↦ i·cols(rhs-block)+j.
    pub fn kron(&self, rhs: &Self) -> Self {
        Self {
            inner: self.inner.kronecker(&rhs.inner),
        }
    }

    /// Row-major flattening into a (rows·cols)×1 column vector:
    /// vec(a)[r·cols + c] = a[r][c].
    pub fn vec(&self) -> Self {
        let (rows, cols) = (self.rows(), self.cols());
        Self::from_fn(rows * cols, 1, |k, _| self.inner[(k / cols, k % cols)])
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of the difference.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        self.check_same_shape(rhs, "compare")?;
        Ok((&self.inner - &rhs.inner)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.inner.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of a − a†; 0 for exactly Hermitian input.
    pub fn hermitian_deviation(&self) -> Result<f64> {
        self.check_square()?;
        let adj = self.adjoint();
        self.max_abs_diff(&adj)
    }

    /// Single column as a d×1 matrix.
    pub fn column(&self, j: usize) -> Self {
        Self::from_fn(self.rows(), 1, |r, _| self.inner[(r, j)])
    }

    fn check_square(&self) -> Result<()> {
        if self.rows() != self.cols() {
            return Err(MargextError::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            });
        }
        Ok(())
    }

    fn check_same_shape(&self, rhs: &Self, verb: &str) -> Result<()> {
        if self.rows() != rhs.rows() || self.cols() != rhs.cols() {
            return Err(MargextError::DimensionMismatch(format!(
                "cannot {} {}x{} and {}x{}",
                verb,
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(())
    }

    /// Hermitian eigendecomposition with deterministic output.
    ///
    /// The input must be Hermitian within `hermiticity_tol` (max-norm of
    /// a − a†); it is symmetrized before factorization so rounding in the
    /// caller cannot leak into the decomposition. Eigenvalues are sorted
    /// descending. Vectors inside a degenerate cluster (relative gap below
    /// 1e-9) are replaced by the projections of the canonical basis vectors
    /// onto the cluster's eigenspace, orthonormalized in index order, so a
    /// fully degenerate input like 𝟙/d yields exactly the canonical basis.
    /// Every vector's first component of modulus above 1e-8 is made real
    /// positive.
    pub fn hermitian_eig(&self, hermiticity_tol: f64) -> Result<EigenSystem> {
        self.check_square()?;
        let deviation = self.hermitian_deviation()?;
        if deviation > hermiticity_tol {
            return Err(MargextError::NotHermitian {
                deviation,
                tol: hermiticity_tol,
            });
        }
        let n = self.rows();
        let sym = (&self.inner + self.inner.adjoint()).map(|z| z * re(0.5));
        let eig = nalgebra::SymmetricEigen::new(sym.clone());

        // The dense factorization can silently return orthonormal columns
        // that are not eigenvectors on near-reducible inputs (e.g. a first
        // row equal to a canonical basis vector up to 1e-16 dust). Verify the
        // reconstruction and fall back to an unconditionally stable cyclic
        // Jacobi diagonalization when it fails.
        let raw_scale = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let reconstruction = &eig.eigenvectors
            * DMatrix::from_fn(n, n, |r, c| {
                if r == c {
                    re(eig.eigenvalues[r])
                } else {
                    re(0.0)
                }
            })
            * eig.eigenvectors.adjoint();
        let residual = (&reconstruction - &sym)
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        let (raw_values, raw_vectors) = if residual > EIG_RECONSTRUCTION_TOL * raw_scale.max(1e-300)
        {
            jacobi_hermitian(&sym)
        } else {
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        };

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| raw_values[b].total_cmp(&raw_values[a]));
        let values: Vec<f64> = order.iter().map(|&k| raw_values[k]).collect();
        let mut vectors: Vec<DMatrix<ComplexScalar>> = order
            .iter()
            .map(|&k| DMatrix::from_fn(n, 1, |r, _| raw_vectors[(r, k)]))
            .collect();

        // Canonicalize degenerate clusters: the factorization's choice of
        // basis inside an eigenspace is arbitrary, so replace it with the
        // deterministic projection of the canonical basis.
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let cluster_gap = 1e-9 * scale;
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && values[end - 1] - values[end] < cluster_gap {
                end += 1;
            }
            if end - start > 1 {
                canonicalize_cluster(&mut vectors[start..end])?;
            }
            start = end;
        }
        for v in &mut vectors {
            fix_phase(v);
        }

        let mat = ComplexMatrix::from_fn(n, n, |r, c| vectors[c][(r, 0)]);
        Ok(EigenSystem {
            values,
            vectors: mat,
        })
    }

    /// Thin singular value decomposition a = U·diag(s)·W† with singular
    /// values sorted descending.
    pub fn svd(&self) -> SvdParts {
        let svd = self.inner.clone().svd(true, true);
        let u = svd.u.expect("left singular vectors requested");
        let v_t = svd.v_t.expect("right singular vectors requested");
        SvdParts {
            u: Self { inner: u },
            singular_values: svd.singular_values.iter().copied().collect(),
            w: Self {
                inner: v_t.adjoint(),
            },
        }
    }

    /// Singular values only, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        self.inner
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect()
    }

    /// Numerical rank: the number of singular values σ with
    /// σ > rel_tol · σ_max (rank 0 when σ_max = 0), together with the
    /// bracketing singular values so the caller can judge the margin.
    pub fn rank_with_tol(&self, rel_tol: f64) -> Result<RankDecision> {
        if rel_tol <= 0.0 {
            return Err(MargextError::InvalidParameter(format!(
                "rank tolerance must be positive, got {rel_tol:e}"
            )));
        }
        let sigma = self.singular_values();
        let sigma_max = sigma.first().copied().unwrap_or(0.0);
        if sigma_max == 0.0 {
            return Ok(RankDecision {
                rank: 0,
                smallest_kept: 0.0,
                largest_dropped: 0.0,
            });
        }
        let threshold = rel_tol * sigma_max;
        let rank = sigma.iter().take_while(|&&s| s > threshold).count();
        Ok(RankDecision {
            rank,
            smallest_kept: if rank > 0 { sigma[rank - 1] } else { 0.0 },
            largest_dropped: if rank < sigma.len() { sigma[rank] } else { 0.0 },
        })
    }

    /// Hermitian positive semidefinite square root.
    ///
    /// Eigenvalues in [−1e-10, 0) are clamped to zero; anything lower is
    /// rejected as significantly negative.
    pub fn psd_sqrt(&self) -> Result<Self> {
        let eig = self.hermitian_eig(1e-10)?;
        let mut clamped = Vec::with_capacity(eig.values.len());
        for &v in &eig.values {
            if v < -1e-10 {
                return Err(MargextError::NegativeEigenvalue(v));
            }
            clamped.push(v.max(0.0).sqrt());
        }
        let n = self.rows();
        let diag = DMatrix::from_fn(n, n, |r, c| if r == c { re(clamped[r]) } else { re(0.0) });
        let v = &eig.vectors.inner;
        Ok(Self {
            inner: v * diag * v.adjoint(),
        })
    }

    /// Orthonormal basis of the column space, as columns, using the given
    /// relative rank tolerance. Useful for comparing operator spans.
    pub fn orthonormal_column_basis(&self, rel_tol: f64) -> Result<Self> {
        let decision = self.rank_with_tol(rel_tol)?;
        let parts = self.svd();
        Ok(Self::from_fn(
            self.rows(),
            decision.rank.max(1).min(parts.u.cols()),
            |r, c| {
                if decision.rank == 0 {
                    re(0.0)
                } else {
                    parts.u.get(r, c)
                }
            },
        ))
    }
}

/// Diagonalizes a complex Hermitian matrix by cyclic Jacobi sweeps.
///
/// Each pivot (p, q) is annihilated by the unitary D·G, where D absorbs the
/// phase of the pivot entry and G is the classical real rotation with the
/// smaller-angle root t = sign(τ)/(|τ| + √(1+τ²)), τ = (a_qq − a_pp)/(2|a_pq|).
/// The method is unconditionally stable and fully deterministic; it serves as
/// the fallback when the dense factorization fails its reconstruction check.
/// Returns unsorted eigenvalues alongside the matching eigenvector columns.
fn jacobi_hermitian(sym: &DMatrix<ComplexScalar>) -> (Vec<f64>, DMatrix<ComplexScalar>) {
    let n = sym.nrows();
    let mut a = sym.clone();
    let mut v: DMatrix<ComplexScalar> = DMatrix::identity(n, n);
    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return (vec![0.0; n], v);
    }
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].norm());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let pivot = a[(p, q)];
                let modulus = pivot.norm();
                if modulus <= 1e-18 * scale {
                    continue;
                }
                let phase = pivot / re(modulus);
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * modulus);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = t * cos;
                // Unitary restricted to coordinates (p, q):
                //   [ cos                sin              ]
                //   [ -sin·conj(phase)   cos·conj(phase)  ]
                let u_pp = re(cos);
                let u_pq = re(sin);
                let u_qp = re(-sin) * phase.conj();
                let u_qq = re(cos) * phase.conj();
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                // Exact by construction of the rotation; clearing the dust
                // keeps the Hermitian invariant bit-exact across sweeps.
                a[(p, q)] = re(0.0);
                a[(q, p)] = re(0.0);
                a[(p, p)] = re(a[(p, p)].re);
                a[(q, q)] = re(a[(q, q)].re);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }
    ((0..n).map(|k| a[(k, k)].re).collect(), v)
}

/// Replaces a degenerate cluster's vectors by the canonical-basis projections
/// onto the cluster eigenspace, orthonormalized in index order (modified
/// Gram-Schmidt, two passes for stability).
fn canonicalize_cluster(vectors: &mut [DMatrix<ComplexScalar>]) -> Result<()> {
    let n = vectors[0].nrows();
    let size = vectors.len();
    // Projector onto the cluster eigenspace.
    let mut projector = DMatrix::<ComplexScalar>::zeros(n, n);
    for v in vectors.iter() {
        projector += v * v.adjoint();
    }
    let mut accepted: Vec<DMatrix<ComplexScalar>> = Vec::with_capacity(size);
    for j in 0..n {
        if accepted.len() == size {
            break;
        }
        let mut u = DMatrix::from_fn(n, 1, |r, _| projector[(r, j)]);
        for _ in 0..2 {
            for a in &accepted {
                let overlap = (a.adjoint() * &u)[(0, 0)];
                u -= a * overlap;
            }
        }
        let norm = u.norm();
        if norm > 1e-6 {
            u /= re(norm);
            accepted.push(u);
        }
    }
    if accepted.len() != size {
        return Err(MargextError::InvalidParameter(
            "degenerate eigenspace canonicalization failed to span the cluster".into(),
        ));
    }
    for (slot, u) in vectors.iter_mut().zip(accepted) {
        *slot = DMatrix::from_fn(n, 1, |r, _| u[(r, 0)]);
    }
    Ok(())
}

/// Multiplies the vector by a unit scalar so its first component of modulus
/// above [`PHASE_FIX_MIN_MODULUS`] becomes real positive.
fn fix_phase(v: &mut DMatrix<ComplexScalar>) {
    for r in 0..v.nrows() {
        let z = v[(r, 0)];
        if z.norm() > PHASE_FIX_MIN_MODULUS {
            let phase = z.conj() / re(z.norm());
            for k in 0..v.nrows() {
                v[(k, 0)] *= phase;
            }
            return;
        }
    }
}
