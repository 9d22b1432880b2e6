//! The extremality decision procedure.
//!
//! A state ϱ ∈ C(ρ₁, ρ₂) with Kraus operators (V₁, …, V_ℓ) is an extreme
//! point exactly when the ℓ² direct sums V_i†V_j ⊕ V_jV_i† form a linearly
//! independent family. This module builds that joint family, decides its
//! rank, classifies which sufficient independence condition applies, and —
//! when the family is dependent — turns a kernel element into an explicit
//! convex decomposition ϱ = ½(ϱ₊ + ϱ₋) whose halves both satisfy the
//! marginal constraints: a machine-checkable certificate of
//! non-extremality.

use crate::duality::{
    check_membership_conditions, choi_from_ops, kraus_from_choi, kraus_from_state, state_from_ops,
    KrausFamily,
};
use crate::error::{MargextError, Result};
use crate::numerics::{re, ComplexMatrix, ComplexScalar};
use crate::states::{BipartiteState, MarginalPair};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Max-norm bound for the kernel annihilation sums of an accepted witness.
pub const WITNESS_ANNIHILATION_TOL: f64 = 1e-8;
/// Max-norm bound for ‖ϱ − ½(ϱ₊ + ϱ₋)‖ of an accepted witness.
pub const WITNESS_RECOMBINATION_TOL: f64 = 1e-9;
/// Minimum max-norm distance between the two witness states.
pub const WITNESS_DISTINCTNESS_TOL: f64 = 1e-6;

/// The ℓ² products V_i†V_j and V_jV_i† of a Kraus family, together with
/// their stacked vectorizations.
#[derive(Clone, Debug)]
pub struct JointFamily {
    ell: usize,
    d: usize,
    left: Vec<ComplexMatrix>,
    right: Vec<ComplexMatrix>,
    stacked: ComplexMatrix,
}

impl JointFamily {
    /// Assembles a joint family from explicit product lists, in the same
    /// row-major (i, j) order used by [`build_joint_family`]. Intended for
    /// probing the independence classifiers on direct-sum families that need
    /// not come from any Kraus family.
    pub fn from_parts(left: Vec<ComplexMatrix>, right: Vec<ComplexMatrix>) -> Result<Self> {
        if left.len() != right.len() || left.is_empty() {
            return Err(MargextError::InvalidParameter(format!(
                "need equally many left and right members, got {} and {}",
                left.len(),
                right.len()
            )));
        }
        let ell = (left.len() as f64).sqrt().round() as usize;
        if ell * ell != left.len() {
            return Err(MargextError::InvalidParameter(format!(
                "family size {} is not a perfect square",
                left.len()
            )));
        }
        let d = left[0].rows();
        for m in left.iter().chain(right.iter()) {
            if m.rows() != d || m.cols() != d {
                return Err(MargextError::DimensionMismatch(format!(
                    "family members must all be {}x{}, got {}x{}",
                    d,
                    d,
                    m.rows(),
                    m.cols()
                )));
            }
        }
        let stacked = stack_pairs(&left, &right, d);
        Ok(Self {
            ell,
            d,
            left,
            right,
            stacked,
        })
    }

    /// Number of underlying Kraus operators ℓ (the family has ℓ² rows).
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Local dimension d.
    pub fn d(&self) -> usize {
        self.d
    }

    /// The products V_i†V_j in row-major (i, j) order.
    pub fn left(&self) -> &[ComplexMatrix] {
        &self.left
    }

    /// The products V_jV_i† in the same (i, j) order.
    pub fn right(&self) -> &[ComplexMatrix] {
        &self.right
    }

    /// ℓ²×2d² matrix whose row (i·ℓ+j) is vec(V_i†V_j) ⊕ vec(V_jV_i†).
    pub fn stacked(&self) -> &ComplexMatrix {
        &self.stacked
    }

    /// Stack of the left halves only, ℓ²×d².
    fn left_stacked(&self) -> ComplexMatrix {
        stack_single(&self.left, self.d)
    }

    /// Stack of the right halves only, ℓ²×d².
    fn right_stacked(&self) -> ComplexMatrix {
        stack_single(&self.right, self.d)
    }
}

fn stack_single(mats: &[ComplexMatrix], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(mats.len(), d * d, |r, c| mats[r].get(c / d, c % d))
}

fn stack_pairs(left: &[ComplexMatrix], right: &[ComplexMatrix], d: usize) -> ComplexMatrix {
    let dd = d * d;
    ComplexMatrix::from_fn(left.len(), 2 * dd, |r, c| {
        if c < dd {
            left[r].get(c / d, c % d)
        } else {
            let c = c - dd;
            right[r].get(c / d, c % d)
        }
    })
}

/// Builds the joint family of a Kraus family: row (i, j) pairs V_i†V_j with
/// V_jV_i†.
pub fn build_joint_family(k: &KrausFamily) -> JointFamily {
    let ell = k.ell();
    let d = k.d();
    let mut left = Vec::with_capacity(ell * ell);
    let mut right = Vec::with_capacity(ell * ell);
    for i in 0..ell {
        for j in 0..ell {
            let vi = &k.ops()[i];
            let vj = &k.ops()[j];
            left.push(
                vi.adjoint()
                    .matmul(vj)
                    .expect("family operators share one dimension"),
            );
            right.push(
                vj.matmul(&vi.adjoint())
                    .expect("family operators share one dimension"),
            );
        }
    }
    let stacked = stack_pairs(&left, &right, d);
    JointFamily {
        ell,
        d,
        left,
        right,
        stacked,
    }
}

/// Outcome of the joint linear-independence test.
#[derive(Clone, Debug)]
pub struct JointIndependence {
    /// True iff the stacked family has full rank ℓ².
    pub independent: bool,
    /// Numerical rank of the stacked family.
    pub joint_rank: usize,
    /// Smallest singular value counted into the rank.
    pub smallest_kept: f64,
    /// Largest singular value dropped below the threshold.
    pub largest_dropped: f64,
    /// Largest singular value, the scale the relative threshold refers to.
    pub sigma_max: f64,
    /// Unit-Frobenius-norm coefficients (λᵢⱼ) with
    /// Σᵢⱼ λᵢⱼ·(V_i†V_j ⊕ V_jV_i†) = 0; present exactly when dependent.
    pub kernel: Option<ComplexMatrix>,
    /// True when the rank decision fell within a factor 10 of the threshold.
    pub margin_tight: bool,
}

/// Decides joint linear independence of the stacked family at a relative
/// rank tolerance, and extracts a kernel coefficient matrix when dependent.
///
/// The rank comes from the singular values of the stacked matrix M. The
/// kernel direction is the eigenvector for the smallest eigenvalue of the
/// Gram matrix conj(M)·Mᵀ — the best-conditioned null direction — which
/// works uniformly even when M has more rows than columns (ℓ² > 2d²), where
/// a thin SVD of M would not expose the left null space.
pub fn jointly_independent(jf: &JointFamily, rel_tol: f64) -> Result<JointIndependence> {
    let m = jf.stacked();
    let decision = m.rank_with_tol(rel_tol)?;
    let sigma_max = m.singular_values().first().copied().unwrap_or(0.0);
    let full = jf.ell() * jf.ell();
    let independent = decision.rank == full;
    let kernel = if independent {
        None
    } else {
        let gram = m
            .conjugate()
            .matmul(&m.transpose_canonical())
            .expect("Gram product of a matrix with its own transpose");
        let eig = gram.hermitian_eig(crate::DEFAULT_TOL)?;
        let y = eig.vectors.column(eig.values.len() - 1);
        let ell = jf.ell();
        Some(ComplexMatrix::from_fn(ell, ell, |i, j| {
            y.get(i * ell + j, 0)
        }))
    };
    Ok(JointIndependence {
        independent,
        joint_rank: decision.rank,
        smallest_kept: decision.smallest_kept,
        largest_dropped: decision.largest_dropped,
        sigma_max,
        kernel,
        margin_tight: decision.is_margin_tight(rel_tol, sigma_max),
    })
}

/// Which sufficient condition for joint independence applies, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lemma2Outcome {
    /// The products V_i†V_j alone are linearly independent (this already
    /// implies joint independence); reported even when the right half is
    /// independent too.
    LeftIndependent,
    /// Only the products V_jV_i† are linearly independent.
    RightIndependent,
    /// Neither half is independent on its own, yet the direct sums are —
    /// the converse of the sufficient condition fails in general.
    NeitherButJoint,
    /// The direct sums are linearly dependent.
    NotJoint,
}

/// Classifies a joint family by which independence condition holds,
/// checking the left half, then the right, then the direct sums.
pub fn lemma2_check(jf: &JointFamily, rel_tol: f64) -> Result<Lemma2Outcome> {
    let full = jf.ell() * jf.ell();
    let left_rank = jf.left_stacked().rank_with_tol(rel_tol)?.rank;
    if left_rank == full {
        return Ok(Lemma2Outcome::LeftIndependent);
    }
    let right_rank = jf.right_stacked().rank_with_tol(rel_tol)?.rank;
    if right_rank == full {
        return Ok(Lemma2Outcome::RightIndependent);
    }
    if jointly_independent(jf, rel_tol)?.independent {
        Ok(Lemma2Outcome::NeitherButJoint)
    } else {
        Ok(Lemma2Outcome::NotJoint)
    }
}

/// Verdict of the extremality decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// The joint family has full rank ℓ²: the state is an extreme point.
    Extremal,
    /// The joint family is dependent; a witness decomposition is attached.
    NotExtremal,
    /// The rank decision fell too close to the tolerance to be trusted.
    Inconclusive,
}

/// An explicit convex split certifying non-extremality.
#[derive(Clone, Debug)]
pub struct WitnessDecomposition {
    /// Hermitian ℓ×ℓ coefficients with spectrum in [−1, 1] (extreme
    /// eigenvalue of modulus 1) annihilating both joint-family sums.
    pub lambda: ComplexMatrix,
    /// Canonical Kraus family of the perturbed map Φ₊ (related to the raw
    /// perturbed operators Σᵢ(α₊)ₚᵢVᵢ by an isometry).
    pub kraus_plus: KrausFamily,
    /// Canonical Kraus family of Φ₋.
    pub kraus_minus: KrausFamily,
    /// State of Φ₊; a member of C(ρ₁, ρ₂).
    pub state_plus: BipartiteState,
    /// State of Φ₋; a member of C(ρ₁, ρ₂), distinct from `state_plus`.
    pub state_minus: BipartiteState,
}

/// Full outcome of an extremality decision.
#[derive(Clone, Debug)]
pub struct ExtremalityReport {
    /// The decision.
    pub verdict: Verdict,
    /// Local dimension d.
    pub d: usize,
    /// Number of Kraus operators ℓ.
    pub ell: usize,
    /// Numerical rank of the ℓ²-row joint family.
    pub joint_rank: usize,
    /// (smallest kept, largest dropped) singular values of the rank call.
    pub rank_margins: (f64, f64),
    /// ℓ² ≤ 2d², the bound every extreme point satisfies.
    pub bound_sqrt2d: bool,
    /// ℓ² ≤ 2d² − 1, the slightly stronger bound (tightness unknown).
    pub bound_parthasarathy: bool,
    /// Rank of the state (= ℓ for an independent family).
    pub state_rank: usize,
    /// Certificate attached exactly to NotExtremal verdicts.
    pub witness: Option<WitnessDecomposition>,
}

impl ExtremalityReport {
    /// True when the state cannot be of full rank (state rank < d²); every
    /// extreme point of the marginal set is singular in this sense.
    pub fn is_singular_state(&self) -> bool {
        self.state_rank < self.d * self.d
    }
}

/// Evaluates ℓ² ≤ 2d² and ℓ² ≤ 2d² − 1 exactly in integer arithmetic.
pub fn check_rank_bounds(ell: usize, d: usize) -> (bool, bool) {
    let ell2 = (ell as u128) * (ell as u128);
    let two_d2 = 2 * (d as u128) * (d as u128);
    (ell2 <= two_d2, ell2 < two_d2)
}

/// Decides extremality of the map with the given Kraus family inside
/// C(ρ₁, ρ₂).
///
/// `rel_tol` is the single tolerance knob: it drives the joint-family rank
/// decision and, as an absolute max-norm bound, the precondition that the
/// family satisfies the marginal sums (violations are an error, not a
/// verdict). The verdict is Inconclusive when the rank margins fall within
/// a factor 10 of the threshold — too close to the tolerance for either
/// answer to be trustworthy.
pub fn is_extremal_kraus(
    k: &KrausFamily,
    marginals: &MarginalPair,
    rel_tol: f64,
) -> Result<ExtremalityReport> {
    extremality_core(k, marginals, rel_tol, rel_tol)
}

fn extremality_core(
    k: &KrausFamily,
    marginals: &MarginalPair,
    rel_tol: f64,
    membership_tol: f64,
) -> Result<ExtremalityReport> {
    let membership = check_membership_conditions(k, marginals, membership_tol)?;
    if !membership.ok {
        return Err(MargextError::MarginalViolation {
            residual1: membership.residual1,
            residual2: membership.residual2,
        });
    }
    let jf = build_joint_family(k);
    let indep = jointly_independent(&jf, rel_tol)?;
    let (bound_sqrt2d, bound_parthasarathy) = check_rank_bounds(k.ell(), k.d());
    let (verdict, witness) = if indep.margin_tight {
        (Verdict::Inconclusive, None)
    } else if indep.independent {
        (Verdict::Extremal, None)
    } else {
        let kernel = indep
            .kernel
            .as_ref()
            .expect("dependent family always yields a kernel direction");
        (
            Verdict::NotExtremal,
            Some(build_witness(k, kernel, marginals)?),
        )
    };
    Ok(ExtremalityReport {
        verdict,
        d: k.d(),
        ell: k.ell(),
        joint_rank: indep.joint_rank,
        rank_margins: (indep.smallest_kept, indep.largest_dropped),
        bound_sqrt2d,
        bound_parthasarathy,
        state_rank: k.ell(),
        witness,
    })
}

/// Decides extremality of a state in C(ρ₁, ρ₂): verifies membership,
/// extracts the canonical Kraus family, and delegates to the family check.
///
/// The state's own marginal residuals are compared at `rel_tol`; the
/// equivalent Kraus-sum residuals scale by d, so the delegated membership
/// precondition is checked at 2d·rel_tol to keep the two gates consistent.
pub fn is_extremal_state(
    rho: &BipartiteState,
    marginals: &MarginalPair,
    rel_tol: f64,
) -> Result<ExtremalityReport> {
    let check = rho.in_c(marginals, rel_tol)?;
    if !check.ok {
        return Err(MargextError::MarginalViolation {
            residual1: check.residual1,
            residual2: check.residual2,
        });
    }
    let k = kraus_from_state(rho, marginals, rel_tol)?;
    let membership_tol = 2.0 * rho.local_dim() as f64 * rel_tol;
    extremality_core(&k, marginals, rel_tol, membership_tol)
}

/// Turns a kernel element of the joint family into an explicit convex
/// decomposition.
///
/// The raw kernel is Hermitized — both candidates (λ+λ†)/2 and (λ−λ†)/(2i)
/// are formed, tried in descending Frobenius-norm order — and the first
/// candidate that still annihilates both joint sums is scaled by its
/// spectral norm so −𝟙 ≤ λ ≤ 𝟙 with an extreme eigenvalue of modulus 1.
/// Then α± = √(𝟙±λ) define the perturbed operators W±ₚ = Σᵢ(α±)ₚᵢVᵢ, whose
/// states split the input as ϱ = ½(ϱ₊ + ϱ₋). All certificate invariants
/// (annihilation, recombination, membership of both halves, distinctness)
/// are verified before returning.
pub fn build_witness(
    k: &KrausFamily,
    kernel_raw: &ComplexMatrix,
    marginals: &MarginalPair,
) -> Result<WitnessDecomposition> {
    let ell = k.ell();
    let d = k.d();
    if kernel_raw.rows() != ell || kernel_raw.cols() != ell {
        return Err(MargextError::DimensionMismatch(format!(
            "kernel coefficients must be {}x{}, got {}x{}",
            ell,
            ell,
            kernel_raw.rows(),
            kernel_raw.cols()
        )));
    }
    let jf = build_joint_family(k);
    let lambda = hermitize_kernel(&jf, kernel_raw)?;

    let alpha_plus = shifted_sqrt(&lambda, 1.0)?;
    let alpha_minus = shifted_sqrt(&lambda, -1.0)?;
    let ops_plus = perturbed_ops(k, &alpha_plus)?;
    let ops_minus = perturbed_ops(k, &alpha_minus)?;

    let mat_plus = state_from_ops(d, &ops_plus, marginals);
    let mat_minus = state_from_ops(d, &ops_minus, marginals);
    let original = state_from_ops(d, k.ops(), marginals);
    let mixed = mat_plus.add(&mat_minus)?.scale(re(0.5));
    let recombination = mixed.max_abs_diff(&original)?;
    if recombination > WITNESS_RECOMBINATION_TOL {
        return Err(MargextError::WitnessConstructionFailure(format!(
            "perturbed states average to the input only within {recombination:e}"
        )));
    }
    let distance = mat_plus.max_abs_diff(&mat_minus)?;
    if distance <= WITNESS_DISTINCTNESS_TOL {
        return Err(MargextError::WitnessConstructionFailure(format!(
            "perturbed states are numerically identical (distance {distance:e})"
        )));
    }

    let state_plus = BipartiteState::new(d, mat_plus).map_err(|e| {
        MargextError::WitnessConstructionFailure(format!("positive half is not a state: {e}"))
    })?;
    let state_minus = BipartiteState::new(d, mat_minus).map_err(|e| {
        MargextError::WitnessConstructionFailure(format!("negative half is not a state: {e}"))
    })?;
    for (name, half) in [("positive", &state_plus), ("negative", &state_minus)] {
        let check = half.in_c(marginals, WITNESS_ANNIHILATION_TOL)?;
        if !check.ok {
            return Err(MargextError::WitnessConstructionFailure(format!(
                "{name} half leaves the marginal set (residuals {:e}, {:e})",
                check.residual1, check.residual2
            )));
        }
    }

    let kraus_plus = kraus_from_choi(d, &choi_from_ops(d, &ops_plus), crate::DEFAULT_TOL)?;
    let kraus_minus = kraus_from_choi(d, &choi_from_ops(d, &ops_minus), crate::DEFAULT_TOL)?;

    Ok(WitnessDecomposition {
        lambda,
        kraus_plus,
        kraus_minus,
        state_plus,
        state_minus,
    })
}

/// Hermitizes a raw kernel and normalizes it to spectral norm 1, verifying
/// that the result still annihilates both joint sums.
fn hermitize_kernel(jf: &JointFamily, kernel_raw: &ComplexMatrix) -> Result<ComplexMatrix> {
    let adj = kernel_raw.adjoint();
    let h1 = kernel_raw.add(&adj)?.scale(re(0.5));
    let h2 = kernel_raw.sub(&adj)?.scale(ComplexScalar::new(0.0, -0.5));
    let mut candidates = [h1, h2];
    if candidates[1].frobenius_norm() > candidates[0].frobenius_norm() {
        candidates.swap(0, 1);
    }
    let mut worst = f64::INFINITY;
    for h in candidates {
        if h.frobenius_norm() < 1e-10 {
            continue;
        }
        let eig = h.hermitian_eig(crate::DEFAULT_TOL)?;
        let spectral = eig.values.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if spectral <= 0.0 {
            continue;
        }
        let scaled = h.scale(re(1.0 / spectral));
        let residual = annihilation_residual(jf, &scaled)?;
        if residual <= WITNESS_ANNIHILATION_TOL {
            return Ok(scaled);
        }
        worst = worst.min(residual);
    }
    Err(MargextError::KernelAnnihilationFailure {
        residual: worst,
        tol: WITNESS_ANNIHILATION_TOL,
    })
}

/// Max-norm of Σᵢⱼ λᵢⱼ·V_i†V_j and Σᵢⱼ λᵢⱼ·V_jV_i†, the two sums a kernel
/// element must annihilate.
fn annihilation_residual(jf: &JointFamily, lambda: &ComplexMatrix) -> Result<f64> {
    let d = jf.d();
    let ell = jf.ell();
    let mut left_sum = ComplexMatrix::zeros(d, d);
    let mut right_sum = ComplexMatrix::zeros(d, d);
    for i in 0..ell {
        for j in 0..ell {
            let c = lambda.get(i, j);
            left_sum = left_sum.add(&jf.left()[i * ell + j].scale(c))?;
            right_sum = right_sum.add(&jf.right()[i * ell + j].scale(c))?;
        }
    }
    Ok(left_sum.max_abs().max(right_sum.max_abs()))
}

/// α = √(𝟙 + sign·λ) for Hermitian λ with spectrum in [−1, 1].
fn shifted_sqrt(lambda: &ComplexMatrix, sign: f64) -> Result<ComplexMatrix> {
    ComplexMatrix::identity(lambda.rows())
        .add(&lambda.scale(re(sign)))?
        .psd_sqrt()
}

/// The raw perturbed operators W_p = Σᵢ α_{pi}·V_i; rows of α with vanishing
/// coefficients yield zero operators, which is fine — these lists feed the
/// componentwise state construction, not a validated family.
fn perturbed_ops(k: &KrausFamily, alpha: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    let d = k.d();
    let ell = k.ell();
    let mut out = Vec::with_capacity(ell);
    for p in 0..ell {
        let mut w = ComplexMatrix::zeros(d, d);
        for (i, v) in k.ops().iter().enumerate() {
            w = w.add(&v.scale(alpha.get(p, i)))?;
        }
        out.push(w);
    }
    Ok(out)
}

/// Runs [`is_extremal_state`] over a batch of states, in parallel when the
/// `parallel` feature is enabled; results are in input order either way.
#[cfg(feature = "parallel")]
pub fn batch_is_extremal_state(
    states: &[BipartiteState],
    marginals: &MarginalPair,
    rel_tol: f64,
) -> Result<Vec<ExtremalityReport>> {
    states
        .par_iter()
        .map(|rho| is_extremal_state(rho, marginals, rel_tol))
        .collect()
}

/// Runs [`is_extremal_state`] over a batch of states, in parallel when the
/// `parallel` feature is enabled; results are in input order either way.
#[cfg(not(feature = "parallel"))]
pub fn batch_is_extremal_state(
    states: &[BipartiteState],
    marginals: &MarginalPair,
    rel_tol: f64,
) -> Result<Vec<ExtremalityReport>> {
    batch_is_extremal_state_sequential(states, marginals, rel_tol)
}

/// Single-threaded batch driver; available regardless of the `parallel`
/// feature so the two execution paths can be compared directly.
pub fn batch_is_extremal_state_sequential(
    states: &[BipartiteState],
    marginals: &MarginalPair,
    rel_tol: f64,
) -> Result<Vec<ExtremalityReport>> {
    states
        .iter()
        .map(|rho| is_extremal_state(rho, marginals, rel_tol))
        .collect()
}
