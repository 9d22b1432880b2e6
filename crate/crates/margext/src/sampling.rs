//! Seeded random generators for unitaries, density matrices, bipartite
//! states, and Kraus families.
//!
//! Everything is deterministic under a caller-supplied RNG, so test suites
//! and benchmarks can freeze their inputs by seed. Unitaries are
//! Haar-distributed (QR of a Ginibre matrix with the standard phase
//! correction); densities are normalized Wishart matrices, which are full
//! rank almost surely.

use rand::Rng;

use crate::duality::{CPMapRep, KrausFamily};
use crate::numerics::{re, ComplexMatrix, ComplexScalar};
use crate::states::{max_entangled, BipartiteState, DensityMatrix};

/// Standard-normal complex Ginibre matrix.
fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    // Box–Muller from uniform draws keeps the dependency surface small.
    let normal = |rng: &mut R| {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let entries: Vec<ComplexScalar> = (0..rows * cols)
        .map(|_| ComplexScalar::new(normal(rng), normal(rng)))
        .collect();
    ComplexMatrix::new(rows, cols, entries).expect("Gaussian draws are finite")
}

/// Haar-distributed d×d unitary.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let g = ginibre(rng, d, d);
    let qr = g.as_dmatrix().clone().qr();
    let q = qr.q();
    let r = qr.r();
    // Multiplying each column by the phase of the matching R diagonal entry
    // makes the distribution exactly Haar and the factorization unique.

    ComplexMatrix::from_fn(d, d, |i, j| {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / re(rjj.norm())
        } else {
            re(1.0)
        };
        q[(i, j)] * phase
    })
}

/// Full-rank random density matrix on an n-dimensional system.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DensityMatrix {
    let g = ginibre(rng, n, n);
    let wishart = g.matmul(&g.adjoint()).expect("square product");
    let trace = wishart.trace().expect("square").re;
    DensityMatrix::new(wishart.scale(re(1.0 / trace))).expect("normalized Wishart is a state")
}

/// Random bipartite state with local dimension d (no marginal constraint).
pub fn random_bipartite_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> BipartiteState {
    let rho = random_density(rng, d * d);
    BipartiteState::new(d, rho.matrix().clone()).expect("dimension is d² by construction")
}

/// Projector onto a Haar-random maximally entangled vector; both marginals
/// are exactly 𝟙/d.
pub fn random_max_entangled_projector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> BipartiteState {
    let basis = haar_unitary(rng, d);
    max_entangled(d, &basis)
        .expect("Haar unitary is unitary")
        .projector()
}

/// Mixture Σ wᵢ·Pᵢ of `k` pairwise distinct random maximally entangled
/// projectors with weights bounded below by 0.1, so every component is a
/// nontrivial part of the mixture. Requires 2 ≤ k ≤ 9.
pub fn random_bell_mixture<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> BipartiteState {
    assert!((2..=9).contains(&k), "mixture size must be in 2..=9");
    let mut projectors: Vec<BipartiteState> = Vec::with_capacity(k);
    while projectors.len() < k {
        let p = random_max_entangled_projector(rng, d);
        let distinct = projectors
            .iter()
            .all(|q| p.matrix().max_abs_diff(q.matrix()).expect("equal shapes") > 1e-3);
        if distinct {
            projectors.push(p);
        }
    }
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let slack = 1.0 - 0.1 * k as f64;
    let weights: Vec<f64> = raw.iter().map(|g| 0.1 + slack * g / total).collect();
    let mut mix = ComplexMatrix::zeros(d * d, d * d);
    for (w, p) in weights.iter().zip(&projectors) {
        mix = mix.add(&p.matrix().scale(re(*w))).expect("equal shapes");
    }
    BipartiteState::new_unchecked(d, mix)
}

/// Linearly independent Kraus family of `ell` Ginibre operators, scaled
/// jointly so the associated Choi matrix has unit trace.
pub fn random_kraus_family<R: Rng + ?Sized>(rng: &mut R, d: usize, ell: usize) -> KrausFamily {
    assert!(ell >= 1 && ell <= d * d, "need 1 ≤ ell ≤ d²");
    loop {
        let ops: Vec<ComplexMatrix> = (0..ell).map(|_| ginibre(rng, d, d)).collect();
        let total_sq: f64 = ops
            .iter()
            .map(|v| {
                let f = v.frobenius_norm();
                f * f
            })
            .sum();
        let s = re((d as f64 / total_sq).sqrt());
        let scaled = ops.into_iter().map(|v| v.scale(s)).collect();
        // Ginibre draws are independent almost surely; retry on the null set.
        if let Ok(family) = KrausFamily::new(scaled) {
            return family;
        }
    }
}

/// Random CP map with tr(Λ(𝟙/d)) = 1, with its Kraus family attached.
pub fn random_cp_map<R: Rng + ?Sized>(rng: &mut R, d: usize, ell: usize) -> CPMapRep {
    CPMapRep::from_kraus(random_kraus_family(rng, d, ell))
        .expect("family is normalized to unit Choi trace")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::MarginalPair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_unitary_is_unitary_and_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = haar_unitary(&mut rng, 4);
        let gram = u.adjoint().matmul(&u).unwrap();
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(4)).unwrap() < 1e-12);

        let mut rng2 = ChaCha8Rng::seed_from_u64(1);
        let v = haar_unitary(&mut rng2, 4);
        assert!(u.max_abs_diff(&v).unwrap() == 0.0);
    }

    #[test]
    fn random_density_is_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(&mut rng, 5);
        let rank = rho.matrix().rank_with_tol(1e-9).unwrap().rank;
        assert_eq!(rank, 5);
    }

    #[test]
    fn random_max_entangled_projector_passes_the_detector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2usize, 3] {
            let p = random_max_entangled_projector(&mut rng, d);
            assert!(p.is_max_entangled_projector(1e-10).unwrap());
        }
    }

    #[test]
    fn random_bell_mixture_stays_in_the_marginal_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_bell_mixture(&mut rng, 2, 2);
        let check = rho.in_c(&MarginalPair::maximally_mixed(2), 1e-10).unwrap();
        assert!(check.ok);
        // A two-component mixture with weights in (0.1, 0.9) has rank 2.
        assert_eq!(rho.matrix().rank_with_tol(1e-9).unwrap().rank, 2);
    }

    #[test]
    fn random_kraus_family_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = random_kraus_family(&mut rng, 3, 4);
        assert_eq!(k.ell(), 4);
        let map = CPMapRep::from_kraus(k).unwrap();
        let trace = map.choi().trace().unwrap();
        assert!((trace.re - 1.0).abs() < 1e-12);
    }
}
