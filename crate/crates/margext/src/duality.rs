//! The bijection between bipartite states and completely positive maps
//! normalized by tr(Λ(𝟙/d)) = 1, plus Kraus extraction, map application,
//! dualization, the marginal membership conditions in Kraus form, and the
//! isometry relating any two Kraus families of the same map.
//!
//! # Coordinates
//!
//! Everything here works in *identified coordinates*: the chosen eigenbasis
//! {|rᵢ⟩} of ρ₂ (columns of [`MarginalPair::eigenbasis2`]) is identified with
//! the canonical real basis. The Choi matrix of a map is the state matrix
//! with the second factor rotated into that eigenbasis,
//! C = (𝟙⊗B†)·ϱ·(𝟙⊗B), and a Kraus operator V maps the first factor
//! (storage coordinates) into the second (eigenbasis coordinates). Hence
//! [`apply_map`] takes its input in eigenbasis coordinates and returns the
//! output in storage coordinates of system 1; when ρ₂ is maximally mixed the
//! default eigenbasis is canonical and the distinction disappears.

use crate::error::{MargextError, Result};
use crate::numerics::{re, ComplexMatrix, ComplexScalar};
use crate::states::{BipartiteState, MarginalPair, MembershipCheck};
use crate::DEFAULT_TOL;

/// Max-norm tolerance for PSD / trace validation of a Choi matrix.
pub const CHOI_TOL: f64 = 1e-10;

/// Ordered linearly independent family (V₁, …, V_ℓ) of d×d Kraus operators.
#[derive(Clone, Debug)]
pub struct KrausFamily {
    d: usize,
    ops: Vec<ComplexMatrix>,
}

impl KrausFamily {
    /// Validates shapes and linear independence (rank of the stacked
    /// vectorizations must equal ℓ at the default relative tolerance).
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let family = Self::new_unchecked(ops)?;
        let ell = family.ell();
        let rank = family.stacked_vecs().rank_with_tol(DEFAULT_TOL)?.rank;
        if rank != ell {
            return Err(MargextError::DependentKrausFamily { rank, ell });
        }
        Ok(family)
    }

    /// Validates shapes only, admitting linearly dependent families; the
    /// independence-dependent operations are documented on the free
    /// functions that require it.
    pub fn new_unchecked(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| {
            MargextError::InvalidParameter("a Kraus family needs at least one operator".into())
        })?;
        let d = first.rows();
        if d == 0 {
            return Err(MargextError::InvalidParameter(
                "Kraus operators must be nonempty".into(),
            ));
        }
        for (j, op) in ops.iter().enumerate() {
            if op.rows() != d || op.cols() != d {
                return Err(MargextError::DimensionMismatch(format!(
                    "Kraus operator {} is {}x{}, expected {}x{}",
                    j,
                    op.rows(),
                    op.cols(),
                    d,
                    d
                )));
            }
        }
        Ok(Self { d, ops })
    }

    /// Local dimension d.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of operators ℓ.
    pub fn ell(&self) -> usize {
        self.ops.len()
    }

    /// The operators in order.
    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    /// ℓ×d² matrix whose row j is the row-major vectorization of V_j.
    pub fn stacked_vecs(&self) -> ComplexMatrix {
        let d = self.d;
        ComplexMatrix::from_fn(self.ops.len(), d * d, |j, c| self.ops[j].get(c / d, c % d))
    }
}

/// A completely positive map with tr(Λ(𝟙/d)) = 1, represented by its Choi
/// matrix (in identified coordinates) and optionally a Kraus family.
#[derive(Clone, Debug)]
pub struct CPMapRep {
    d: usize,
    choi: ComplexMatrix,
    kraus: Option<KrausFamily>,
}

impl CPMapRep {
    /// Wraps a d²×d² Choi matrix; validates PSD and unit trace.
    pub fn from_choi(d: usize, choi: ComplexMatrix) -> Result<Self> {
        validate_choi(d, &choi)?;
        Ok(Self {
            d,
            choi,
            kraus: None,
        })
    }

    /// Builds the Choi matrix of Λ(x) = Σ V_j†·x·V_j and caches the family.
    pub fn from_kraus(kraus: KrausFamily) -> Result<Self> {
        let choi = choi_from_ops(kraus.d(), kraus.ops());
        validate_choi(kraus.d(), &choi)?;
        Ok(Self {
            d: kraus.d(),
            choi,
            kraus: Some(kraus),
        })
    }

    /// Local dimension d.
    pub fn d(&self) -> usize {
        self.d
    }

    /// The Choi matrix in identified coordinates.
    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    /// The cached Kraus family, when one is attached.
    pub fn kraus(&self) -> Option<&KrausFamily> {
        self.kraus.as_ref()
    }
}

fn validate_choi(d: usize, choi: &ComplexMatrix) -> Result<()> {
    if d == 0 {
        return Err(MargextError::InvalidParameter(
            "local dimension must be positive".into(),
        ));
    }
    if choi.rows() != d * d || choi.cols() != d * d {
        return Err(MargextError::DimensionMismatch(format!(
            "expected a {}x{} Choi matrix for local dimension {}, got {}x{}",
            d * d,
            d * d,
            d,
            choi.rows(),
            choi.cols()
        )));
    }
    let trace = choi.trace()?;
    if (trace.re - 1.0).abs() > CHOI_TOL || trace.im.abs() > CHOI_TOL {
        return Err(MargextError::InvalidParameter(format!(
            "Choi trace {} + {}i is not 1 within {CHOI_TOL:e}",
            trace.re, trace.im
        )));
    }
    let eig = choi.hermitian_eig(CHOI_TOL)?;
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -CHOI_TOL {
        return Err(MargextError::NegativeEigenvalue(min));
    }
    Ok(())
}

/// Choi matrix of the map with Kraus operators `ops`:
/// C[(a,i),(b,k)] = (1/d)·Σ_j conj(V_j[i,a])·V_j[k,b].
///
/// Accepts any shape-consistent list, independent or not; this is the
/// componentwise form of building the state from the family, and is reused
/// for the raw perturbed families arising in witness construction.
pub(crate) fn choi_from_ops(d: usize, ops: &[ComplexMatrix]) -> ComplexMatrix {
    let scale = 1.0 / d as f64;
    ComplexMatrix::from_fn(d * d, d * d, |row, col| {
        let (a, i) = (row / d, row % d);
        let (b, k) = (col / d, col % d);
        ops.iter()
            .map(|v| v.get(i, a).conj() * v.get(k, b))
            .sum::<ComplexScalar>()
            * re(scale)
    })
}

/// (𝟙 ⊗ B)·m·(𝟙 ⊗ B†): rotates the second factor out of eigenbasis
/// coordinates back into storage coordinates.
fn rotate_out(m: &ComplexMatrix, basis: &ComplexMatrix, d: usize) -> ComplexMatrix {
    let big = ComplexMatrix::identity(d).kron(basis);
    big.matmul(m)
        .and_then(|x| x.matmul(&big.adjoint()))
        .expect("rotation dimensions are consistent")
}

/// (𝟙 ⊗ B†)·m·(𝟙 ⊗ B): rotates the second factor into eigenbasis
/// coordinates.
fn rotate_in(m: &ComplexMatrix, basis: &ComplexMatrix, d: usize) -> ComplexMatrix {
    let big = ComplexMatrix::identity(d).kron(&basis.adjoint());
    big.matmul(m)
        .and_then(|x| x.matmul(&big.adjoint()))
        .expect("rotation dimensions are consistent")
}

/// The bipartite state (Λ⊗id)(|ψ₊⟩⟨ψ₊|) of a map, with ψ₊ built on the
/// chosen eigenbasis of ρ₂: the Choi matrix rotated back to storage
/// coordinates on the second factor.
pub fn state_from_map(map: &CPMapRep, marginals_basis: &MarginalPair) -> Result<BipartiteState> {
    if map.d() != marginals_basis.dim() {
        return Err(MargextError::DimensionMismatch(format!(
            "map dimension {} does not match marginal dimension {}",
            map.d(),
            marginals_basis.dim()
        )));
    }
    let rho = rotate_out(map.choi(), marginals_basis.eigenbasis2(), map.d());
    BipartiteState::new(map.d(), rho)
}

/// The completely positive map of a state: the state matrix with the second
/// factor re-expressed in the chosen eigenbasis of ρ₂ becomes the Choi
/// matrix. Inverse of [`state_from_map`] for the same basis choice.
pub fn map_from_state(rho: &BipartiteState, marginals_basis: &MarginalPair) -> Result<CPMapRep> {
    if rho.local_dim() != marginals_basis.dim() {
        return Err(MargextError::DimensionMismatch(format!(
            "state dimension {} does not match marginal dimension {}",
            rho.local_dim(),
            marginals_basis.dim()
        )));
    }
    let choi = rotate_in(rho.matrix(), marginals_basis.eigenbasis2(), rho.local_dim());
    CPMapRep::from_choi(rho.local_dim(), choi)
}

/// Reconstructs the bipartite state of the map with Kraus operators `ops`
/// under the given basis identification, without independence checks.
pub(crate) fn state_from_ops(
    d: usize,
    ops: &[ComplexMatrix],
    marginals_basis: &MarginalPair,
) -> ComplexMatrix {
    rotate_out(&choi_from_ops(d, ops), marginals_basis.eigenbasis2(), d)
}

/// Applies the map: Λ(x) = Σ_j V_j†·x·V_j via the cached Kraus family, or
/// the equivalent Choi contraction Λ(x)_{ab} = d·Σ_{i,m} x_{im}·C[(a,i),(b,m)]
/// when none is cached. The input is taken in eigenbasis coordinates of the
/// second factor; the output lives on the first factor.
pub fn apply_map(map: &CPMapRep, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = map.d();
    if x.rows() != d || x.cols() != d {
        return Err(MargextError::DimensionMismatch(format!(
            "map acts on {}x{} inputs, got {}x{}",
            d,
            d,
            x.rows(),
            x.cols()
        )));
    }
    if let Some(k) = map.kraus() {
        let mut out = ComplexMatrix::zeros(d, d);
        for v in k.ops() {
            out = out.add(&v.adjoint().matmul(x)?.matmul(v)?)?;
        }
        return Ok(out);
    }
    let choi = map.choi();
    Ok(ComplexMatrix::from_fn(d, d, |a, b| {
        let mut acc = ComplexScalar::new(0.0, 0.0);
        for i in 0..d {
            for m in 0..d {
                acc += x.get(i, m) * choi.get(a * d + i, b * d + m);
            }
        }
        acc * re(d as f64)
    }))
}

/// The canonical dual Λ′, defined by tr(Λ′(x)·y) = tr(x·Λ(y)): in Kraus form
/// Λ′(y) = Σ_j V_j·y·V_j†, i.e. the family of adjoints. A Choi-only
/// representation has a Kraus family extracted first, so the dual always
/// carries one.
pub fn dual_map(map: &CPMapRep) -> Result<CPMapRep> {
    let ops: Vec<ComplexMatrix> = match map.kraus() {
        Some(k) => k.ops().iter().map(ComplexMatrix::adjoint).collect(),
        None => kraus_from_choi(map.d(), map.choi(), DEFAULT_TOL)?
            .ops()
            .iter()
            .map(ComplexMatrix::adjoint)
            .collect(),
    };
    CPMapRep::from_kraus(KrausFamily::new(ops)?)
}

/// Extracts the canonical Kraus family of a state: eigendecompose d·C for
/// the Choi matrix C, keep eigenvalues μ > rel_tol·μ_max, and reshape each
/// kept eigenvector w (scaled by √μ) into the operator V[i,a] =
/// √μ·conj(w[(a,i)]); phases are fixed by making each operator's
/// largest-magnitude entry real positive. The family size equals the rank of
/// the state, and rebuilding the state from it reproduces the input.
pub fn kraus_from_state(
    rho: &BipartiteState,
    marginals_basis: &MarginalPair,
    rel_tol: f64,
) -> Result<KrausFamily> {
    let map = map_from_state(rho, marginals_basis)?;
    kraus_from_choi(map.d(), map.choi(), rel_tol)
}

pub(crate) fn kraus_from_choi(d: usize, choi: &ComplexMatrix, rel_tol: f64) -> Result<KrausFamily> {
    if rel_tol <= 0.0 {
        return Err(MargextError::InvalidParameter(format!(
            "relative tolerance must be positive, got {rel_tol}"
        )));
    }
    let eig = choi.hermitian_eig(DEFAULT_TOL)?;
    let mu_max = eig.values.first().copied().unwrap_or(0.0).max(0.0) * d as f64;
    let mut ops = Vec::new();
    for (j, &value) in eig.values.iter().enumerate() {
        let mu = value * d as f64;
        if mu <= rel_tol * mu_max || mu <= 0.0 {
            break;
        }
        let w = eig.vectors.column(j);
        let s = mu.sqrt();
        let op = ComplexMatrix::from_fn(d, d, |i, a| w.get(a * d + i, 0).conj() * re(s));
        ops.push(fix_op_phase(op));
    }
    if ops.is_empty() {
        return Err(MargextError::InvalidParameter(
            "state has no eigenvalue above the rank cutoff".into(),
        ));
    }
    KrausFamily::new(ops)
}

/// Rotates the operator's global phase so its largest-magnitude entry is
/// real positive; ties are broken by the first such entry in row-major
/// order.
fn fix_op_phase(op: ComplexMatrix) -> ComplexMatrix {
    let mut best = ComplexScalar::new(0.0, 0.0);
    let mut best_norm = 0.0;
    for r in 0..op.rows() {
        for c in 0..op.cols() {
            let e = op.get(r, c);
            if e.norm() > best_norm + 1e-14 {
                best_norm = e.norm();
                best = e;
            }
        }
    }
    if best_norm <= 1e-14 {
        return op;
    }
    let phase = best.conj() / re(best_norm);
    op.scale(phase)
}

/// Checks the marginal conditions in Kraus form: Σ V_j†V_j = d·ρ₁ (storage
/// coordinates) and Σ V_jV_j† = d·ρ₂ᵀ (eigenbasis coordinates, transposition
/// in the canonical real basis — immaterial for a true eigenbasis, where ρ₂
/// is diagonal there).
pub fn check_membership_conditions(
    k: &KrausFamily,
    marginals: &MarginalPair,
    tol: f64,
) -> Result<MembershipCheck> {
    let d = k.d();
    if d != marginals.dim() {
        return Err(MargextError::DimensionMismatch(format!(
            "Kraus family dimension {} does not match marginal dimension {}",
            d,
            marginals.dim()
        )));
    }
    let mut sum_adj_v = ComplexMatrix::zeros(d, d);
    let mut sum_v_adj = ComplexMatrix::zeros(d, d);
    for v in k.ops() {
        sum_adj_v = sum_adj_v.add(&v.adjoint().matmul(v)?)?;
        sum_v_adj = sum_v_adj.add(&v.matmul(&v.adjoint())?)?;
    }
    let ds = re(d as f64);
    let target1 = marginals.rho1().matrix().scale(ds);
    let target2 = marginals
        .rho2_in_eigenbasis()
        .transpose_canonical()
        .scale(ds);
    let residual1 = sum_adj_v.max_abs_diff(&target1)?;
    let residual2 = sum_v_adj.max_abs_diff(&target2)?;
    Ok(MembershipCheck {
        ok: residual1 <= tol && residual2 <= tol,
        residual1,
        residual2,
    })
}

/// When `a` and `b` represent the same map (Choi matrices equal within
/// `tol` in max norm), returns the isometry μ with b_p = Σᵢ μ_{pi}·a_i and
/// μ†μ = 𝟙; otherwise `None`. Solved by least squares on the vectorized
/// operators and verified before returning.
pub fn kraus_isometry(a: &KrausFamily, b: &KrausFamily, tol: f64) -> Result<Option<ComplexMatrix>> {
    if a.d() != b.d() {
        return Err(MargextError::DimensionMismatch(format!(
            "families act on different dimensions: {} vs {}",
            a.d(),
            b.d()
        )));
    }
    let d = a.d();
    let choi_a = choi_from_ops(d, a.ops());
    let choi_b = choi_from_ops(d, b.ops());
    if choi_a.max_abs_diff(&choi_b)? > tol {
        return Ok(None);
    }
    // Columns of x are vec(a_i); columns of y are vec(b_p). Solving
    // x·μᵀ = y by pseudoinverse gives the coefficients row by row.
    let x = a.stacked_vecs().transpose_canonical();
    let y = b.stacked_vecs().transpose_canonical();
    let mu_t = pinv(&x)?.matmul(&y)?;
    let mu = mu_t.transpose_canonical();
    // Verify both Lemma-type conditions rather than trusting least squares.
    let gram = mu.adjoint().matmul(&mu)?;
    if gram.max_abs_diff(&ComplexMatrix::identity(a.ell()))? > DEFAULT_TOL {
        return Ok(None);
    }
    for (p, bp) in b.ops().iter().enumerate() {
        let mut rebuilt = ComplexMatrix::zeros(d, d);
        for (i, ai) in a.ops().iter().enumerate() {
            rebuilt = rebuilt.add(&ai.scale(mu.get(p, i)))?;
        }
        if rebuilt.max_abs_diff(bp)? > tol.max(DEFAULT_TOL) {
            return Ok(None);
        }
    }
    Ok(Some(mu))
}

/// Moore–Penrose pseudoinverse via SVD, dropping singular values below the
/// default relative tolerance.
fn pinv(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let parts = m.svd();
    let smax = parts.singular_values.first().copied().unwrap_or(0.0);
    let k = parts.singular_values.len();
    let inv_diag = ComplexMatrix::from_fn(k, k, |r, c| {
        if r == c && parts.singular_values[r] > DEFAULT_TOL * smax {
            re(1.0 / parts.singular_values[r])
        } else {
            re(0.0)
        }
    });
    parts
        .w
        .matmul(&inv_diag)
        .and_then(|x| x.matmul(&parts.u.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use crate::states::{max_entangled, DensityMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re_: f64, im_: f64) -> ComplexScalar {
        ComplexScalar::new(re_, im_)
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::new(
            2,
            2,
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap()
    }

    fn identity_x_family() -> KrausFamily {
        let s = re(0.5f64.sqrt());
        KrausFamily::new(vec![
            ComplexMatrix::identity(2).scale(s),
            pauli_x().scale(s),
        ])
        .unwrap()
    }

    #[test]
    fn kraus_family_rejects_dependent_operators() {
        let ops = vec![
            ComplexMatrix::identity(2),
            ComplexMatrix::identity(2).scale(c(2.0, 1.0)),
        ];
        match KrausFamily::new(ops).unwrap_err() {
            MargextError::DependentKrausFamily { rank, ell } => {
                assert_eq!(rank, 1);
                assert_eq!(ell, 2);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn identity_map_corresponds_to_max_entangled_projector() {
        for d in [2usize, 3] {
            // A single 𝟙 already satisfies tr(Λ(𝟙/d)) = 1: ‖𝟙‖²_F/d = 1.
            let k = KrausFamily::new(vec![ComplexMatrix::identity(d)]).unwrap();
            let map = CPMapRep::from_kraus(k).unwrap();
            let marginals = MarginalPair::maximally_mixed(d);
            let rho = state_from_map(&map, &marginals).unwrap();
            let expect = max_entangled(d, &ComplexMatrix::identity(d))
                .unwrap()
                .projector();
            assert!(rho.matrix().max_abs_diff(expect.matrix()).unwrap() < 1e-12);

            // And back: the state of the identity map acts as the identity.
            let back = map_from_state(&rho, &marginals).unwrap();
            for (i, j) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
                let e = ComplexMatrix::from_fn(d, d, |r, cc| {
                    if (r, cc) == (i, j) {
                        c(1.0, 0.0)
                    } else {
                        c(0.0, 0.0)
                    }
                });
                let out = apply_map(&back, &e).unwrap();
                assert!(out.max_abs_diff(&e).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn unitary_kraus_map_yields_max_entangled_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for d in [2usize, 3] {
            let u = sampling::haar_unitary(&mut rng, d);
            let map = CPMapRep::from_kraus(KrausFamily::new(vec![u]).unwrap()).unwrap();
            let rho = state_from_map(&map, &MarginalPair::maximally_mixed(d)).unwrap();
            assert!(rho.is_max_entangled_projector(1e-9).unwrap());
        }
    }

    #[test]
    fn maximally_mixed_state_is_the_depolarizing_map() {
        let d = 2;
        let rho = BipartiteState::new(d, ComplexMatrix::identity(4).scale(re(0.25))).unwrap();
        let map = map_from_state(&rho, &MarginalPair::maximally_mixed(d)).unwrap();
        for (i, j) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
            let e = ComplexMatrix::from_fn(d, d, |r, cc| {
                if (r, cc) == (i, j) {
                    c(1.0, 0.0)
                } else {
                    c(0.0, 0.0)
                }
            });
            let out = apply_map(&map, &e).unwrap();
            let expect = ComplexMatrix::identity(d).scale(re(if i == j { 0.5 } else { 0.0 }));
            assert!(out.max_abs_diff(&expect).unwrap() < 1e-12);
        }
    }

    #[test]
    fn identity_x_family_applied_to_excited_projector_is_maximally_mixed() {
        let map = CPMapRep::from_kraus(identity_x_family()).unwrap();
        let x = ComplexMatrix::from_real_diagonal(&[1.0, 0.0]);
        let out = apply_map(&map, &x).unwrap();
        assert!(
            out.max_abs_diff(&ComplexMatrix::identity(2).scale(re(0.5)))
                .unwrap()
                < 1e-14
        );
    }

    #[test]
    fn choi_and_kraus_application_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let k = sampling::random_kraus_family(&mut rng, 3, 4);
        let with_kraus = CPMapRep::from_kraus(k).unwrap();
        let choi_only = CPMapRep::from_choi(3, with_kraus.choi().clone()).unwrap();
        let x = ComplexMatrix::from_fn(3, 3, |r, cc| c((r + 1) as f64, cc as f64 - 1.0));
        let a = apply_map(&with_kraus, &x).unwrap();
        let b = apply_map(&choi_only, &x).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn dual_map_satisfies_the_trace_pairing_and_is_involutive() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let map = CPMapRep::from_kraus(sampling::random_kraus_family(&mut rng, 3, 2)).unwrap();
        let dual = dual_map(&map).unwrap();
        for _ in 0..10 {
            let x = sampling::random_density(&mut rng, 3);
            let y = sampling::random_density(&mut rng, 3);
            let lhs = apply_map(&dual, x.matrix())
                .unwrap()
                .matmul(y.matrix())
                .unwrap()
                .trace()
                .unwrap();
            let rhs = x
                .matrix()
                .matmul(&apply_map(&map, y.matrix()).unwrap())
                .unwrap()
                .trace()
                .unwrap();
            assert!((lhs - rhs).norm() < 1e-10);
        }
        let double = dual_map(&dual).unwrap();
        assert!(double.choi().max_abs_diff(map.choi()).unwrap() < 1e-12);
    }

    #[test]
    fn dual_of_identity_map_is_identity_and_membership_family_dual_preserves_unit() {
        let id = CPMapRep::from_kraus(KrausFamily::new(vec![ComplexMatrix::identity(2)]).unwrap())
            .unwrap();
        let dual = dual_map(&id).unwrap();
        assert!(dual.choi().max_abs_diff(id.choi()).unwrap() < 1e-12);

        // For a family satisfying the marginal sums with ρ₂ = 𝟙/2, the dual
        // maps 𝟙 to 𝟙.
        let family = CPMapRep::from_kraus(identity_x_family()).unwrap();
        let out = apply_map(&dual_map(&family).unwrap(), &ComplexMatrix::identity(2)).unwrap();
        assert!(out.max_abs_diff(&ComplexMatrix::identity(2)).unwrap() < 1e-12);
    }

    #[test]
    fn kraus_from_state_of_max_entangled_projector_is_one_unitary() {
        let marginals = MarginalPair::maximally_mixed(2);
        let rho = max_entangled(2, &pauli_x()).unwrap().projector();
        let k = kraus_from_state(&rho, &marginals, DEFAULT_TOL).unwrap();
        assert_eq!(k.ell(), 1);
        let v = &k.ops()[0];
        let gram = v.adjoint().matmul(v).unwrap();
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(2)).unwrap() < 1e-10);
    }

    #[test]
    fn kraus_from_state_of_maximally_mixed_state_has_full_length() {
        let marginals = MarginalPair::maximally_mixed(2);
        let rho = BipartiteState::new(2, ComplexMatrix::identity(4).scale(re(0.25))).unwrap();
        let k = kraus_from_state(&rho, &marginals, DEFAULT_TOL).unwrap();
        assert_eq!(k.ell(), 4);
    }

    #[test]
    fn state_map_round_trips_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut trips = 0usize;
        for d in [2usize, 3, 4] {
            for _ in 0..67 {
                let rho = sampling::random_bipartite_state(&mut rng, d);
                let marginals = MarginalPair::new(
                    rho.partial_trace_2().unwrap(),
                    rho.partial_trace_1().unwrap(),
                )
                .unwrap();
                // State → map → state.
                let map = map_from_state(&rho, &marginals).unwrap();
                let back = state_from_map(&map, &marginals).unwrap();
                assert!(back.matrix().max_abs_diff(rho.matrix()).unwrap() < 1e-10);
                // State → Kraus → state, locking the reshape convention.
                let k = kraus_from_state(&rho, &marginals, DEFAULT_TOL).unwrap();
                let rebuilt = state_from_ops(d, k.ops(), &marginals);
                assert!(rebuilt.max_abs_diff(rho.matrix()).unwrap() < 1e-9);
                assert_eq!(
                    k.ell(),
                    rho.matrix().rank_with_tol(DEFAULT_TOL).unwrap().rank
                );
                trips += 1;
            }
        }
        assert_eq!(trips, 201);
    }

    #[test]
    fn map_round_trips_through_its_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for d in [2usize, 3] {
            let map = CPMapRep::from_kraus(sampling::random_kraus_family(&mut rng, d, 2)).unwrap();
            let marginals = MarginalPair::maximally_mixed(d);
            let rho = state_from_map(&map, &marginals).unwrap();
            let back = map_from_state(&rho, &marginals).unwrap();
            assert!(back.choi().max_abs_diff(map.choi()).unwrap() < 1e-10);
        }
    }

    #[test]
    fn membership_conditions_hold_exactly_when_marginals_match() {
        let marginals = MarginalPair::maximally_mixed(2);
        let single = KrausFamily::new(vec![ComplexMatrix::identity(2)]).unwrap();
        let check = check_membership_conditions(&single, &marginals, 1e-10).unwrap();
        assert!(check.ok && check.residual1 < 1e-15 && check.residual2 < 1e-15);

        let pair = identity_x_family();
        let check = check_membership_conditions(&pair, &marginals, 1e-10).unwrap();
        assert!(check.ok);

        // Against the wrong first marginal the residual is the exact gap
        // between 𝟙 and d·diag(3/4, 1/4).
        let wrong = MarginalPair::new(
            DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.75, 0.25])).unwrap(),
            DensityMatrix::maximally_mixed(2),
        )
        .unwrap();
        let check = check_membership_conditions(&pair, &wrong, 1e-10).unwrap();
        assert!(!check.ok);
        assert!((check.residual1 - 0.5).abs() < 1e-14);
        assert!(check.residual2 < 1e-15);
    }

    #[test]
    fn membership_matches_state_marginal_test_on_random_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for d in [2usize, 3] {
            let marginals = MarginalPair::maximally_mixed(d);
            for _ in 0..10 {
                let rho = sampling::random_bell_mixture(&mut rng, d, 3);
                assert!(rho.in_c(&marginals, 1e-9).unwrap().ok);
                let k = kraus_from_state(&rho, &marginals, DEFAULT_TOL).unwrap();
                assert!(
                    check_membership_conditions(&k, &marginals, 1e-8)
                        .unwrap()
                        .ok
                );
            }
            // A state outside C(𝟙/d, 𝟙/d) fails the Kraus-sum form too.
            let pure = {
                let mut entries = vec![c(0.0, 0.0); d * d * d * d];
                entries[0] = c(1.0, 0.0);
                BipartiteState::new(d, ComplexMatrix::new(d * d, d * d, entries).unwrap()).unwrap()
            };
            let own_marginals = MarginalPair::new(
                pure.partial_trace_2().unwrap(),
                pure.partial_trace_1().unwrap(),
            )
            .unwrap();
            let k = kraus_from_state(&pure, &own_marginals, DEFAULT_TOL).unwrap();
            assert!(
                !check_membership_conditions(&k, &marginals, 1e-9)
                    .unwrap()
                    .ok
            );
        }
    }

    #[test]
    fn kraus_isometry_on_identical_and_phase_rotated_families() {
        let a = identity_x_family();
        let mu = kraus_isometry(&a, &a, 1e-10).unwrap().unwrap();
        assert!(mu.max_abs_diff(&ComplexMatrix::identity(2)).unwrap() < 1e-10);

        let phases = [c(0.6, 0.8), c(0.0, 1.0)];
        let b = KrausFamily::new(
            a.ops()
                .iter()
                .zip(phases.iter())
                .map(|(op, &p)| op.scale(p))
                .collect(),
        )
        .unwrap();
        let mu = kraus_isometry(&a, &b, 1e-10).unwrap().unwrap();
        for (p, &phase) in phases.iter().enumerate() {
            assert!((mu.get(p, p) - phase).norm() < 1e-10);
            assert!(mu.get(p, 1 - p).norm() < 1e-10);
        }
    }

    #[test]
    fn kraus_isometry_relates_the_two_standard_qubit_families() {
        let a = identity_x_family();
        let half = re(0.5);
        let b = KrausFamily::new(vec![
            ComplexMatrix::identity(2)
                .add(&pauli_x())
                .unwrap()
                .scale(half),
            ComplexMatrix::identity(2)
                .sub(&pauli_x())
                .unwrap()
                .scale(half),
        ])
        .unwrap();
        let mu = kraus_isometry(&a, &b, 1e-10).unwrap().unwrap();
        let gram = mu.adjoint().matmul(&mu).unwrap();
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(2)).unwrap() < 1e-9);
        // Entries of the rotation all have magnitude 1/√2.
        for p in 0..2 {
            for i in 0..2 {
                assert!((mu.get(p, i).norm() - 0.5f64.sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kraus_isometry_returns_none_for_different_maps() {
        let a = identity_x_family();
        let z = ComplexMatrix::from_real_diagonal(&[1.0, -1.0]);
        let s = re(0.5f64.sqrt());
        let b = KrausFamily::new(vec![ComplexMatrix::identity(2).scale(s), z.scale(s)]).unwrap();
        assert!(kraus_isometry(&a, &b, 1e-10).unwrap().is_none());
    }

    #[test]
    fn choi_validation_rejects_non_positive_and_wrong_trace() {
        let proj = max_entangled(2, &ComplexMatrix::identity(2))
            .unwrap()
            .projector();
        let pt = proj.partial_transpose_2();
        assert!(matches!(
            CPMapRep::from_choi(2, pt).unwrap_err(),
            MargextError::NegativeEigenvalue(_)
        ));
        assert!(matches!(
            CPMapRep::from_choi(2, ComplexMatrix::identity(4)).unwrap_err(),
            MargextError::InvalidParameter(_)
        ));
    }
}
