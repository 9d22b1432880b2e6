//! Named reference objects — Bell-type projectors, the cyclic Kraus triple in
//! dimension 3 with its exact 9×9 state matrix, the cyclic quadruple in
//! dimension 4 — plus a randomized search for further extremal candidates.
//!
//! The fixed matrices are stored as exact rational constants and converted to
//! floating point at the boundary, so every one of them can be cross-checked
//! by the exact-arithmetic oracle.

use crate::duality::KrausFamily;
use crate::error::{MargextError, Result};
use crate::extremality::{is_extremal_kraus, ExtremalityReport, Verdict};
use crate::numerics::{re, ComplexMatrix};
use crate::oracle::{certify_verdict, Certification, RationalComplex, RationalMatrix};
use crate::states::{max_entangled, BipartiteState, MarginalPair};
use crate::DEFAULT_TOL;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Identifier for one of the named fixtures. Each value maps to exactly one
/// deterministic object; the names double as CLI identifiers.
#[derive(Clone, Debug)]
pub enum FixtureId {
    /// Rank-one projector onto the maximally entangled vector built from the
    /// given 2×2 unitary basis.
    QubitBell(ComplexMatrix),
    /// The cyclic three-operator family in dimension 3.
    D3Cyclic,
    /// The exact 9×9 state matrix of the dimension-3 cyclic family.
    D3StateMatrix,
    /// The cyclic four-operator family in dimension 4.
    D4Cyclic,
}

impl FixtureId {
    /// Local dimension of the fixture's marginals.
    pub fn local_dim(&self) -> usize {
        match self {
            FixtureId::QubitBell(_) => 2,
            FixtureId::D3Cyclic | FixtureId::D3StateMatrix => 3,
            FixtureId::D4Cyclic => 4,
        }
    }

    /// The marginal pair the fixture belongs to (always maximally mixed).
    pub fn marginals(&self) -> MarginalPair {
        MarginalPair::maximally_mixed(self.local_dim())
    }

    /// The bipartite state this fixture denotes.
    pub fn state(&self) -> Result<BipartiteState> {
        match self {
            FixtureId::QubitBell(basis) => bell_projector(basis),
            FixtureId::D3Cyclic => {
                let family = d3_kraus();
                let marginals = self.marginals();
                let map = crate::duality::CPMapRep::from_kraus(family)?;
                crate::duality::state_from_map(&map, &marginals)
            }
            FixtureId::D3StateMatrix => Ok(d3_state_matrix()),
            FixtureId::D4Cyclic => {
                let family = d4_kraus();
                let marginals = self.marginals();
                let map = crate::duality::CPMapRep::from_kraus(family)?;
                crate::duality::state_from_map(&map, &marginals)
            }
        }
    }

    /// The Kraus family of the fixture, when it is defined by one.
    pub fn kraus(&self) -> Option<KrausFamily> {
        match self {
            FixtureId::D3Cyclic | FixtureId::D3StateMatrix => Some(d3_kraus()),
            FixtureId::D4Cyclic => Some(d4_kraus()),
            FixtureId::QubitBell(_) => None,
        }
    }
}

/// Builds a d×d matrix with value `scale` at each listed (row, col) position
/// and zeros elsewhere.
fn pattern_matrix(d: usize, scale: f64, positions: &[(usize, usize)]) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |r, c| {
        if positions.contains(&(r, c)) {
            re(scale)
        } else {
            re(0.0)
        }
    })
}

/// The cyclic three-operator family in dimension 3 (0-based indices):
///
/// ```text
/// V₁ = (|0⟩⟨0| + |1⟩⟨2|)/√2
/// V₂ = (|1⟩⟨1| + |2⟩⟨0|)/√2
/// V₃ = (|2⟩⟨2| + |0⟩⟨1|)/√2
/// ```
///
/// Each operator covers each row and column index at most once, and the three
/// together cover every row and column exactly twice, so the family satisfies
/// Σ V†V = Σ VV† = 𝟙 by construction.
pub fn d3_kraus() -> KrausFamily {
    let s = 1.0 / 2.0_f64.sqrt();
    let ops = vec![
        pattern_matrix(3, s, &[(0, 0), (1, 2)]),
        pattern_matrix(3, s, &[(1, 1), (2, 0)]),
        pattern_matrix(3, s, &[(2, 2), (0, 1)]),
    ];
    KrausFamily::new(ops).expect("the fixed cyclic family is linearly independent")
}

/// Nonzero positions of the 9×9 state of the dimension-3 cyclic family in the
/// lexicographic product basis: six diagonal entries and three symmetric
/// off-diagonal pairs, twelve positions in total, every entry equal to 1/6.
const D3_STATE_DIAGONAL: [usize; 6] = [0, 2, 3, 4, 7, 8];
const D3_STATE_OFF_DIAGONAL: [(usize, usize); 3] = [(0, 7), (2, 4), (3, 8)];

/// The exact 9×9 state matrix of the dimension-3 cyclic family, with entries
/// in {0, 1/6}, as rational constants.
pub fn d3_state_rational() -> RationalMatrix {
    let mut entries = vec![RationalComplex::zero(); 81];
    let sixth = RationalComplex::real(1, 6);
    for &k in &D3_STATE_DIAGONAL {
        entries[k * 9 + k] = sixth.clone();
    }
    for &(r, c) in &D3_STATE_OFF_DIAGONAL {
        entries[r * 9 + c] = sixth.clone();
        entries[c * 9 + r] = sixth.clone();
    }
    RationalMatrix::new(9, 9, entries).expect("9×9 constant table is well-formed")
}

/// The 9×9 state matrix of the dimension-3 cyclic family as a validated
/// bipartite state (floating-point image of [`d3_state_rational`]).
pub fn d3_state_matrix() -> BipartiteState {
    BipartiteState::new(3, d3_state_rational().to_complex_matrix())
        .expect("the hard-coded state matrix is a valid density matrix")
}

/// The cyclic four-operator family in dimension 4 (0-based indices):
///
/// ```text
/// V₁ = (|0⟩⟨0| + |1⟩⟨3| + |2⟩⟨1|)/√3
/// V₂ = (|1⟩⟨1| + |2⟩⟨0| + |3⟩⟨2|)/√3
/// V₃ = (|2⟩⟨2| + |3⟩⟨1| + |0⟩⟨3|)/√3
/// V₄ = (|3⟩⟨3| + |0⟩⟨2| + |1⟩⟨0|)/√3
/// ```
pub fn d4_kraus() -> KrausFamily {
    let s = 1.0 / 3.0_f64.sqrt();
    let ops = vec![
        pattern_matrix(4, s, &[(0, 0), (1, 3), (2, 1)]),
        pattern_matrix(4, s, &[(1, 1), (2, 0), (3, 2)]),
        pattern_matrix(4, s, &[(2, 2), (3, 1), (0, 3)]),
        pattern_matrix(4, s, &[(3, 3), (0, 2), (1, 0)]),
    ];
    KrausFamily::new(ops).expect("the fixed cyclic family is linearly independent")
}

/// Rank-one projector onto the maximally entangled qubit vector
/// (1/√2)(|0⟩|φ₀⟩ + |1⟩|φ₁⟩) whose second-factor basis columns are `basis`.
///
/// Errors when `basis` is not a 2×2 unitary.
pub fn bell_projector(basis: &ComplexMatrix) -> Result<BipartiteState> {
    Ok(max_entangled(2, basis)?.projector())
}

/// Validates the search-space bounds 2 ≤ ℓ and ℓ² ≤ 2d².
fn validate_search_params(d: usize, ell: usize) -> Result<()> {
    let ell_sq = (ell as u128) * (ell as u128);
    let two_d_sq = 2 * (d as u128) * (d as u128);
    if ell < 2 || ell_sq > two_d_sq {
        return Err(MargextError::InvalidParameter(format!(
            "candidate family size must satisfy 2 <= ell and ell^2 <= 2*d^2; got ell = {ell}, d = {d}"
        )));
    }
    Ok(())
}

/// Samples one structured candidate: `s` random permutation matrices of size
/// d×d are cut into `ell` disjoint partial-isometry patterns scaled by 1/√s.
///
/// Each row and column index of the d×d grid is covered exactly once per
/// permutation, hence exactly `s` times overall, so Σ V†V = Σ VV† = 𝟙 holds
/// by construction for every successful sample. Returns `None` when the
/// greedy unit assignment dead-ends or leaves an operator empty.
fn sample_patterned_ops<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    ell: usize,
) -> Option<Vec<ComplexMatrix>> {
    let s_max = d.min(ell);
    if s_max < 2 {
        return None;
    }
    // s = 1 is excluded: a single permutation split into partial isometries
    // has all cross products V_i†V_j (i ≠ j) equal to zero, so the joint
    // family is dependent whenever ell ≥ 2 and the candidate is never
    // extremal.
    let s = rng.gen_range(2..=s_max);
    if s * d < ell {
        return None;
    }
    let mut row_used = vec![vec![false; d]; ell];
    let mut col_used = vec![vec![false; d]; ell];
    let mut units: Vec<Vec<(usize, usize)>> = vec![Vec::new(); ell];
    for _ in 0..s {
        let perm = random_permutation(rng, d);
        for (r, &c) in perm.iter().enumerate() {
            let candidates: Vec<usize> = (0..ell)
                .filter(|&k| !row_used[k][r] && !col_used[k][c])
                .collect();
            if candidates.is_empty() {
                return None;
            }
            let k = candidates[rng.gen_range(0..candidates.len())];
            row_used[k][r] = true;
            col_used[k][c] = true;
            units[k].push((r, c));
        }
    }
    if units.iter().any(|u| u.is_empty()) {
        return None;
    }
    let scale = 1.0 / (s as f64).sqrt();
    Some(units.iter().map(|u| pattern_matrix(d, scale, u)).collect())
}

/// Fisher–Yates shuffle of 0..d.
fn random_permutation<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// One search attempt with its own deterministic seed. Accepts a candidate
/// only when the float checker reports Extremal, the resulting state is not a
/// maximally entangled projector, and the exact-arithmetic oracle confirms
/// the verdict (the pattern entries always rationalize).
fn search_attempt(
    d: usize,
    ell: usize,
    seed: u64,
    index: u64,
) -> Option<(KrausFamily, ExtremalityReport)> {
    let attempt_seed = seed.wrapping_add((index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed);
    let ops = sample_patterned_ops(&mut rng, d, ell)?;
    let family = KrausFamily::new(ops).ok()?;
    let marginals = MarginalPair::maximally_mixed(d);
    let report = is_extremal_kraus(&family, &marginals, DEFAULT_TOL).ok()?;
    if report.verdict != Verdict::Extremal {
        return None;
    }
    let state = BipartiteState::new_unchecked(
        d,
        crate::duality::state_from_ops(d, family.ops(), &marginals),
    );
    if state.is_max_entangled_projector(DEFAULT_TOL).ok()? {
        return None;
    }
    if certify_verdict(&family, &report) != Certification::Confirmed {
        return None;
    }
    Some((family, report))
}

/// Searches `attempts` structured random candidates in C(𝟙/d, 𝟙/d) for an
/// extremal family whose state is not a maximally entangled projector.
///
/// Returns the hit with the lowest attempt index, or `None` when every
/// attempt misses; the outcome is deterministic under a fixed seed and
/// identical whether attempts run in parallel or sequentially. Every returned
/// report carries verdict Extremal re-verified in exact arithmetic; no claim
/// is made beyond that attached report.
///
/// Errors when ℓ violates 2 ≤ ℓ and ℓ² ≤ 2d² (no extreme point exists beyond
/// that bound). For d = 2 the call is valid but always comes back empty:
/// extreme points of C(𝟙/2, 𝟙/2) are exactly the maximally entangled
/// projectors, which the search filters out.
#[cfg(feature = "parallel")]
pub fn search_extremal_candidate(
    d: usize,
    ell: usize,
    attempts: u64,
    seed: u64,
) -> Result<Option<(KrausFamily, ExtremalityReport)>> {
    validate_search_params(d, ell)?;
    Ok((0..attempts)
        .into_par_iter()
        .find_map_first(|i| search_attempt(d, ell, seed, i)))
}

/// See [`search_extremal_candidate_sequential`]; this build has the parallel
/// scheduler disabled, so the two entry points coincide.
#[cfg(not(feature = "parallel"))]
pub fn search_extremal_candidate(
    d: usize,
    ell: usize,
    attempts: u64,
    seed: u64,
) -> Result<Option<(KrausFamily, ExtremalityReport)>> {
    search_extremal_candidate_sequential(d, ell, attempts, seed)
}

/// Sequential twin of [`search_extremal_candidate`] with identical results;
/// always available regardless of the parallel feature.
pub fn search_extremal_candidate_sequential(
    d: usize,
    ell: usize,
    attempts: u64,
    seed: u64,
) -> Result<Option<(KrausFamily, ExtremalityReport)>> {
    validate_search_params(d, ell)?;
    Ok((0..attempts).find_map(|i| search_attempt(d, ell, seed, i)))
}
