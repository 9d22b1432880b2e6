//! Single-system and bipartite state types.
//!
//! A [`DensityMatrix`] is a positive unit-trace operator; a
//! [`BipartiteState`] lives on a d·d-dimensional product space with the
//! lexicographic basis |i⟩⊗|j⟩ ↦ i·d + j (all storage is 0-based). A
//! [`MarginalPair`] carries the prescribed marginals (ρ₁, ρ₂) together with
//! the eigenbasis of ρ₂ that fixes the identification used by the duality
//! module; for degenerate ρ₂ the default is the deterministic canonical
//! completion, and any other admissible choice can be supplied explicitly.

use crate::error::{MargextError, Result};
use crate::numerics::{re, ComplexMatrix, ComplexScalar};
use crate::DEFAULT_TOL;

/// Max-norm tolerance for the Hermiticity of a density matrix.
pub const DENSITY_HERMITICITY_TOL: f64 = 1e-10;
/// Tolerance for |trace − 1| of a density matrix.
pub const DENSITY_TRACE_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a density matrix.
pub const DENSITY_MIN_EIGENVALUE: f64 = -1e-10;
/// Max-norm tolerance for ‖B†B − 𝟙‖ of a unitary basis.
pub const UNITARY_TOL: f64 = 1e-10;
/// Max-norm tolerance for the eigenvector residual of a supplied eigenbasis.
pub const EIGENBASIS_RESIDUAL_TOL: f64 = 1e-9;

/// Positive operator with unit trace.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace, and positivity, then wraps.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if mat.rows() != mat.cols() {
            return Err(MargextError::NotSquare {
                rows: mat.rows(),
                cols: mat.cols(),
            });
        }
        let deviation = mat.hermitian_deviation()?;
        if deviation > DENSITY_HERMITICITY_TOL {
            return Err(MargextError::InvalidDensity(format!(
                "Hermiticity deviation {deviation:e} exceeds {DENSITY_HERMITICITY_TOL:e}"
            )));
        }
        let trace = mat.trace()?;
        if (trace.re - 1.0).abs() > DENSITY_TRACE_TOL || trace.im.abs() > DENSITY_TRACE_TOL {
            return Err(MargextError::InvalidDensity(format!(
                "trace {} + {}i is not 1 within {DENSITY_TRACE_TOL:e}",
                trace.re, trace.im
            )));
        }
        let eig = mat.hermitian_eig(DENSITY_HERMITICITY_TOL)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < DENSITY_MIN_EIGENVALUE {
            return Err(MargextError::InvalidDensity(format!(
                "minimum eigenvalue {min:e} below {DENSITY_MIN_EIGENVALUE:e}"
            )));
        }
        Ok(Self { mat })
    }

    /// Wraps without validation.
    ///
    /// For callers that construct the matrix in a way that guarantees the
    /// invariants structurally (e.g. normalized Gram matrices); everything
    /// downstream assumes they hold.
    pub fn new_unchecked(mat: ComplexMatrix) -> Self {
        Self { mat }
    }

    /// Maximally mixed state 𝟙/d.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            mat: ComplexMatrix::identity(d).scale(re(1.0 / d as f64)),
        }
    }

    /// System dimension.
    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    /// The underlying matrix.
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }
}

/// Result of a marginal membership test, with the residuals that justify it.
#[derive(Clone, Copy, Debug)]
pub struct MembershipCheck {
    /// True when both residuals are within tolerance.
    pub ok: bool,
    /// ‖tr₂(ϱ) − ρ₁‖_max (or the Kraus-sum analogue).
    pub residual1: f64,
    /// ‖tr₁(ϱ) − ρ₂‖_max (or the Kraus-sum analogue).
    pub residual2: f64,
}

/// State on a d ⊗ d product space, stored over the lexicographic product
/// basis.
#[derive(Clone, Debug)]
pub struct BipartiteState {
    d: usize,
    density: DensityMatrix,
}

impl BipartiteState {
    /// Validates the density-matrix invariants and the d² shape, then wraps.
    pub fn new(d: usize, mat: ComplexMatrix) -> Result<Self> {
        if d == 0 {
            return Err(MargextError::InvalidParameter(
                "local dimension must be positive".into(),
            ));
        }
        if mat.rows() != d * d || mat.cols() != d * d {
            return Err(MargextError::DimensionMismatch(format!(
                "expected a {}x{} matrix for local dimension {}, got {}x{}",
                d * d,
                d * d,
                d,
                mat.rows(),
                mat.cols()
            )));
        }
        Ok(Self {
            d,
            density: DensityMatrix::new(mat)?,
        })
    }

    /// Wraps without validation; see [`DensityMatrix::new_unchecked`].
    pub fn new_unchecked(d: usize, mat: ComplexMatrix) -> Self {
        Self {
            d,
            density: DensityMatrix::new_unchecked(mat),
        }
    }

    /// Local dimension d.
    pub fn local_dim(&self) -> usize {
        self.d
    }

    /// The underlying d²×d² matrix.
    pub fn matrix(&self) -> &ComplexMatrix {
        self.density.matrix()
    }

    /// Marginal on the first factor: (ϱ₁)_{ab} = Σ_j ϱ_{(a,j),(b,j)}.
    pub fn partial_trace_2(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(partial_trace_2_matrix(self.matrix(), self.d))
    }

    /// Marginal on the second factor: (ϱ₂)_{ik} = Σ_a ϱ_{(a,i),(a,k)}.
    pub fn partial_trace_1(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(partial_trace_1_matrix(self.matrix(), self.d))
    }

    /// Transposition of the second-factor indices only; Hermitian output
    /// with the same trace, and an involution.
    pub fn partial_transpose_2(&self) -> ComplexMatrix {
        let d = self.d;
        let m = self.matrix();
        ComplexMatrix::from_fn(d * d, d * d, |row, col| {
            let (a, i) = (row / d, row % d);
            let (b, k) = (col / d, col % d);
            m.get(a * d + k, b * d + i)
        })
    }

    /// Tests membership in C(ρ₁, ρ₂): both partial traces must match the
    /// prescribed marginals within `tol` in max norm.
    pub fn in_c(&self, marginals: &MarginalPair, tol: f64) -> Result<MembershipCheck> {
        if self.d != marginals.dim() {
            return Err(MargextError::DimensionMismatch(format!(
                "state has local dimension {} but marginals have dimension {}",
                self.d,
                marginals.dim()
            )));
        }
        let residual1 = partial_trace_2_matrix(self.matrix(), self.d)
            .max_abs_diff(marginals.rho1().matrix())?;
        let residual2 = partial_trace_1_matrix(self.matrix(), self.d)
            .max_abs_diff(marginals.rho2().matrix())?;
        Ok(MembershipCheck {
            ok: residual1 <= tol && residual2 <= tol,
            residual1,
            residual2,
        })
    }

    /// True when the state is a rank-1 projector whose marginals are both
    /// maximally mixed within `tol` — i.e. the projector onto a maximally
    /// entangled vector. Rank is decided at the default relative tolerance.
    pub fn is_max_entangled_projector(&self, tol: f64) -> Result<bool> {
        let rank = self.matrix().rank_with_tol(DEFAULT_TOL)?.rank;
        if rank != 1 {
            return Ok(false);
        }
        let max_mixed = DensityMatrix::maximally_mixed(self.d);
        let r1 = partial_trace_2_matrix(self.matrix(), self.d).max_abs_diff(max_mixed.matrix())?;
        let r2 = partial_trace_1_matrix(self.matrix(), self.d).max_abs_diff(max_mixed.matrix())?;
        Ok(r1 <= tol && r2 <= tol)
    }
}

/// Raw partial trace over the second factor, without density validation.
pub(crate) fn partial_trace_2_matrix(mat: &ComplexMatrix, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |a, b| {
        (0..d)
            .map(|j| mat.get(a * d + j, b * d + j))
            .sum::<ComplexScalar>()
    })
}

/// Raw partial trace over the first factor, without density validation.
pub(crate) fn partial_trace_1_matrix(mat: &ComplexMatrix, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, k| {
        (0..d)
            .map(|a| mat.get(a * d + i, a * d + k))
            .sum::<ComplexScalar>()
    })
}

/// Prescribed marginal pair (ρ₁, ρ₂) plus the eigenbasis of ρ₂ that fixes
/// the coordinates in which states are identified with maps.
#[derive(Clone, Debug)]
pub struct MarginalPair {
    rho1: DensityMatrix,
    rho2: DensityMatrix,
    eigenbasis2: ComplexMatrix,
}

impl MarginalPair {
    /// Builds with the deterministic default eigenbasis of ρ₂ (descending
    /// eigenvalues; degenerate eigenspaces completed canonically, so ρ₂ = 𝟙/d
    /// yields exactly the canonical basis).
    pub fn new(rho1: DensityMatrix, rho2: DensityMatrix) -> Result<Self> {
        if rho1.dim() != rho2.dim() {
            return Err(MargextError::DimensionMismatch(format!(
                "marginals have different dimensions: {} vs {}",
                rho1.dim(),
                rho2.dim()
            )));
        }
        let eigenbasis2 = rho2
            .matrix()
            .hermitian_eig(DENSITY_HERMITICITY_TOL)?
            .vectors;
        Ok(Self {
            rho1,
            rho2,
            eigenbasis2,
        })
    }

    /// Builds with an explicitly chosen eigenbasis of ρ₂; the columns must be
    /// orthonormal eigenvectors. Verdicts downstream do not depend on the
    /// choice within degenerate eigenspaces, but the identified coordinates
    /// do, so round-trips must reuse the same basis.
    pub fn with_basis(
        rho1: DensityMatrix,
        rho2: DensityMatrix,
        eigenbasis2: ComplexMatrix,
    ) -> Result<Self> {
        if rho1.dim() != rho2.dim() {
            return Err(MargextError::DimensionMismatch(format!(
                "marginals have different dimensions: {} vs {}",
                rho1.dim(),
                rho2.dim()
            )));
        }
        check_unitary(&eigenbasis2, rho2.dim())?;
        for col in 0..rho2.dim() {
            let v = eigenbasis2.column(col);
            let rv = rho2.matrix().matmul(&v)?;
            // Rayleigh quotient as the eigenvalue estimate; for a true
            // eigenvector the residual vanishes.
            let r = v.adjoint().matmul(&rv)?.get(0, 0).re;
            let residual = rv.max_abs_diff(&v.scale(re(r)))?;
            if residual > EIGENBASIS_RESIDUAL_TOL {
                return Err(MargextError::NotEigenbasis { col, residual });
            }
        }
        Ok(Self {
            rho1,
            rho2,
            eigenbasis2,
        })
    }

    /// The pair (𝟙/d, 𝟙/d) with the canonical eigenbasis.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            rho1: DensityMatrix::maximally_mixed(d),
            rho2: DensityMatrix::maximally_mixed(d),
            eigenbasis2: ComplexMatrix::identity(d),
        }
    }

    /// Common dimension of the marginals.
    pub fn dim(&self) -> usize {
        self.rho1.dim()
    }

    /// First marginal ρ₁.
    pub fn rho1(&self) -> &DensityMatrix {
        &self.rho1
    }

    /// Second marginal ρ₂.
    pub fn rho2(&self) -> &DensityMatrix {
        &self.rho2
    }

    /// Columns are the chosen orthonormal eigenvectors of ρ₂.
    pub fn eigenbasis2(&self) -> &ComplexMatrix {
        &self.eigenbasis2
    }

    /// ρ₂ re-expressed in its chosen eigenbasis, B†ρ₂B — diagonal with the
    /// eigenvalues, up to the eigenvector residual tolerance.
    pub fn rho2_in_eigenbasis(&self) -> ComplexMatrix {
        self.eigenbasis2
            .adjoint()
            .matmul(self.rho2.matrix())
            .and_then(|m| m.matmul(&self.eigenbasis2))
            .expect("dimensions validated at construction")
    }
}

pub(crate) fn check_unitary(basis: &ComplexMatrix, d: usize) -> Result<()> {
    if basis.rows() != d || basis.cols() != d {
        return Err(MargextError::DimensionMismatch(format!(
            "expected a {}x{} basis, got {}x{}",
            d,
            d,
            basis.rows(),
            basis.cols()
        )));
    }
    let gram = basis.adjoint().matmul(basis)?;
    let deviation = gram.max_abs_diff(&ComplexMatrix::identity(d))?;
    if deviation > UNITARY_TOL {
        return Err(MargextError::NotUnitary(deviation));
    }
    Ok(())
}

/// Unit vector (1/√d) Σᵢ |i⟩ ⊗ (basis·|i⟩); its projector has maximally
/// mixed marginals on both factors.
#[derive(Clone, Debug)]
pub struct MaxEntangledVector {
    d: usize,
    vec: ComplexMatrix,
}

impl MaxEntangledVector {
    /// Local dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// The d²×1 component vector.
    pub fn vector(&self) -> &ComplexMatrix {
        &self.vec
    }

    /// Rank-1 projector onto the vector, as a bipartite state.
    pub fn projector(&self) -> BipartiteState {
        let proj = self
            .vec
            .matmul(&self.vec.adjoint())
            .expect("projector dimensions are consistent by construction");
        BipartiteState::new_unchecked(self.d, proj)
    }
}

/// Builds the maximally entangled vector (1/√d) Σᵢ |i⟩ ⊗ (basis·|i⟩) for a
/// unitary `basis`.
pub fn max_entangled(d: usize, basis: &ComplexMatrix) -> Result<MaxEntangledVector> {
    if d == 0 {
        return Err(MargextError::InvalidParameter(
            "local dimension must be positive".into(),
        ));
    }
    check_unitary(basis, d)?;
    let scale = 1.0 / (d as f64).sqrt();
    let vec = ComplexMatrix::from_fn(d * d, 1, |row, _| {
        let (i, j) = (row / d, row % d);
        basis.get(j, i) * re(scale)
    });
    Ok(MaxEntangledVector { d, vec })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re_: f64, im_: f64) -> ComplexScalar {
        ComplexScalar::new(re_, im_)
    }

    fn random_density(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
        let g = ComplexMatrix::from_fn(n, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let psd = g.matmul(&g.adjoint()).unwrap();
        let trace = psd.trace().unwrap().re;
        DensityMatrix::new(psd.scale(re(1.0 / trace))).unwrap()
    }

    fn random_bipartite(rng: &mut ChaCha8Rng, d: usize) -> BipartiteState {
        let rho = random_density(rng, d * d);
        BipartiteState::new(d, rho.matrix().clone()).unwrap()
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::new(
            2,
            2,
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn density_matrix_rejects_invalid_inputs() {
        // Non-Hermitian.
        let bad = ComplexMatrix::new(
            2,
            2,
            vec![c(0.5, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(0.5, 0.0)],
        )
        .unwrap();
        assert!(matches!(
            DensityMatrix::new(bad).unwrap_err(),
            MargextError::InvalidDensity(_)
        ));
        // Wrong trace.
        let bad = ComplexMatrix::identity(2);
        assert!(matches!(
            DensityMatrix::new(bad).unwrap_err(),
            MargextError::InvalidDensity(_)
        ));
        // Negative eigenvalue.
        let bad = ComplexMatrix::from_real_diagonal(&[1.5, -0.5]);
        assert!(matches!(
            DensityMatrix::new(bad).unwrap_err(),
            MargextError::InvalidDensity(_)
        ));
    }

    #[test]
    fn partial_traces_of_max_entangled_projector_are_maximally_mixed() {
        let psi = max_entangled(2, &ComplexMatrix::identity(2)).unwrap();
        let proj = psi.projector();
        let half = DensityMatrix::maximally_mixed(2);
        let t2 = proj.partial_trace_2().unwrap();
        let t1 = proj.partial_trace_1().unwrap();
        assert!(t2.matrix().max_abs_diff(half.matrix()).unwrap() < 1e-12);
        assert!(t1.matrix().max_abs_diff(half.matrix()).unwrap() < 1e-12);
    }

    #[test]
    fn partial_traces_of_product_state_recover_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigma = random_density(&mut rng, 3);
        let tau = random_density(&mut rng, 3);
        let product = BipartiteState::new(3, sigma.matrix().kron(tau.matrix())).unwrap();
        let t2 = product.partial_trace_2().unwrap();
        let t1 = product.partial_trace_1().unwrap();
        assert!(t2.matrix().max_abs_diff(sigma.matrix()).unwrap() < 1e-12);
        assert!(t1.matrix().max_abs_diff(tau.matrix()).unwrap() < 1e-12);
    }

    #[test]
    fn partial_traces_preserve_total_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2usize, 3] {
            let rho = random_bipartite(&mut rng, d);
            let t1 = rho.partial_trace_1().unwrap().matrix().trace().unwrap();
            let t2 = rho.partial_trace_2().unwrap().matrix().trace().unwrap();
            assert!((t1.re - 1.0).abs() < 1e-12 && t1.im.abs() < 1e-12);
            assert!((t2.re - 1.0).abs() < 1e-12 && t2.im.abs() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_2_is_local_to_the_first_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 3;
        let rho = random_bipartite(&mut rng, d);
        let a = ComplexMatrix::from_fn(d, d, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let b = ComplexMatrix::from_fn(d, d, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let id = ComplexMatrix::identity(d);
        let sandwiched = a
            .kron(&id)
            .matmul(rho.matrix())
            .unwrap()
            .matmul(&b.kron(&id))
            .unwrap();
        let lhs = partial_trace_2_matrix(&sandwiched, d);
        let rhs = a
            .matmul(&partial_trace_2_matrix(rho.matrix(), d))
            .unwrap()
            .matmul(&b)
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn max_entangled_components_match_basis_columns() {
        let psi = max_entangled(2, &ComplexMatrix::identity(2)).unwrap();
        let s = 0.5f64.sqrt();
        let expect = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)];
        for (k, e) in expect.iter().enumerate() {
            assert!((psi.vector().get(k, 0) - e).norm() < 1e-15);
        }

        let psi3 = max_entangled(3, &ComplexMatrix::identity(3)).unwrap();
        let s3 = (1.0f64 / 3.0).sqrt();
        for k in 0..9 {
            let expect = if k % 4 == 0 { s3 } else { 0.0 };
            assert!((psi3.vector().get(k, 0) - c(expect, 0.0)).norm() < 1e-15);
        }

        let psi_x = max_entangled(2, &pauli_x()).unwrap();
        let expect = [c(0.0, 0.0), c(s, 0.0), c(s, 0.0), c(0.0, 0.0)];
        for (k, e) in expect.iter().enumerate() {
            assert!((psi_x.vector().get(k, 0) - e).norm() < 1e-15);
        }
    }

    #[test]
    fn max_entangled_rejects_non_unitary_basis() {
        let not_unitary = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert!(matches!(
            max_entangled(2, &not_unitary).unwrap_err(),
            MargextError::NotUnitary(_)
        ));
    }

    #[test]
    fn in_c_accepts_product_of_the_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho1 = random_density(&mut rng, 3);
        let rho2 = random_density(&mut rng, 3);
        let product = BipartiteState::new(3, rho1.matrix().kron(rho2.matrix())).unwrap();
        let marginals = MarginalPair::new(rho1, rho2).unwrap();
        let check = product.in_c(&marginals, 1e-10).unwrap();
        assert!(check.ok);
        assert!(check.residual1 < 1e-12 && check.residual2 < 1e-12);
    }

    #[test]
    fn in_c_rejects_pure_product_state_against_mixed_marginals() {
        let mut mat = vec![c(0.0, 0.0); 16];
        mat[0] = c(1.0, 0.0);
        let rho = BipartiteState::new(2, ComplexMatrix::new(4, 4, mat).unwrap()).unwrap();
        let marginals = MarginalPair::maximally_mixed(2);
        let check = rho.in_c(&marginals, 1e-10).unwrap();
        assert!(!check.ok);
        assert!((check.residual1 - 0.5).abs() < 1e-12);
        assert!((check.residual2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn in_c_rejects_dimension_mismatch() {
        let rho = max_entangled(2, &ComplexMatrix::identity(2))
            .unwrap()
            .projector();
        let marginals = MarginalPair::maximally_mixed(3);
        assert!(matches!(
            rho.in_c(&marginals, 1e-9).unwrap_err(),
            MargextError::DimensionMismatch(_)
        ));
    }

    #[test]
    fn partial_transpose_of_product_state_transposes_second_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sigma = random_density(&mut rng, 2);
        let tau = random_density(&mut rng, 2);
        let product = BipartiteState::new(2, sigma.matrix().kron(tau.matrix())).unwrap();
        let pt = product.partial_transpose_2();
        let expect = sigma.matrix().kron(&tau.matrix().transpose_canonical());
        assert!(pt.max_abs_diff(&expect).unwrap() < 1e-14);
        // Separable states stay positive under partial transposition.
        let min = pt
            .hermitian_eig(1e-10)
            .unwrap()
            .values
            .last()
            .copied()
            .unwrap();
        assert!(min > -1e-12);
    }

    #[test]
    fn partial_transpose_of_max_entangled_projector_has_minus_half_eigenvalue() {
        let proj = max_entangled(2, &ComplexMatrix::identity(2))
            .unwrap()
            .projector();
        let pt = proj.partial_transpose_2();
        let eig = pt.hermitian_eig(1e-10).unwrap();
        let min = eig.values.last().copied().unwrap();
        assert!((min + 0.5).abs() < 1e-12);
    }

    #[test]
    fn partial_transpose_is_a_trace_preserving_hermitian_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rho = random_bipartite(&mut rng, 3);
        let pt = rho.partial_transpose_2();
        assert!(pt.hermitian_deviation().unwrap() < 1e-12);
        let trace = pt.trace().unwrap();
        assert!((trace.re - 1.0).abs() < 1e-12 && trace.im.abs() < 1e-12);
        let back = BipartiteState::new_unchecked(3, pt).partial_transpose_2();
        assert!(back.max_abs_diff(rho.matrix()).unwrap() == 0.0);
    }

    #[test]
    fn max_entangled_projector_detection() {
        for d in [2usize, 3, 4] {
            let proj = max_entangled(d, &ComplexMatrix::identity(d))
                .unwrap()
                .projector();
            assert!(proj.is_max_entangled_projector(1e-10).unwrap());
        }
        let mixed = BipartiteState::new(2, ComplexMatrix::identity(4).scale(re(0.25))).unwrap();
        assert!(!mixed.is_max_entangled_projector(1e-10).unwrap());
    }

    #[test]
    fn marginal_pair_default_basis_is_canonical_for_degenerate_rho2() {
        let pair = MarginalPair::new(
            DensityMatrix::maximally_mixed(3),
            DensityMatrix::maximally_mixed(3),
        )
        .unwrap();
        assert!(
            pair.eigenbasis2()
                .max_abs_diff(&ComplexMatrix::identity(3))
                .unwrap()
                < 1e-12
        );
    }

    #[test]
    fn marginal_pair_with_basis_validates_eigenvectors() {
        let rho1 = DensityMatrix::maximally_mixed(2);
        let rho2 = DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.75, 0.25])).unwrap();
        // Hadamard-like columns are unitary but not eigenvectors of diag(.75,.25).
        let s = 0.5f64.sqrt();
        let h =
            ComplexMatrix::new(2, 2, vec![c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]).unwrap();
        assert!(matches!(
            MarginalPair::with_basis(rho1.clone(), rho2.clone(), h).unwrap_err(),
            MargextError::NotEigenbasis { .. }
        ));
        // The canonical basis is a valid eigenbasis here.
        let pair = MarginalPair::with_basis(rho1, rho2, ComplexMatrix::identity(2)).unwrap();
        let diag = pair.rho2_in_eigenbasis();
        assert!(
            diag.max_abs_diff(&ComplexMatrix::from_real_diagonal(&[0.75, 0.25]))
                .unwrap()
                < 1e-12
        );
    }

    #[test]
    fn marginal_pair_rejects_unequal_dimensions() {
        let rho1 = DensityMatrix::maximally_mixed(2);
        let rho2 = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            MarginalPair::new(rho1, rho2).unwrap_err(),
            MargextError::DimensionMismatch(_)
        ));
    }
}
