//! Seeded random instances and a brute-force decoherence oracle.
#![allow(dead_code)]

use std::sync::Arc;

use cohist::linalg::{DensityOperator, Operator, StateVector, Unitary, C64};
use cohist::{Decomposition, Dynamics, Family, History, Slot, Tolerances};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex(rng: &mut impl Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn unit_vector3(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0f64..1.0),
        ];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.map(|x| x / n);
        }
    }
}

pub fn random_state(rng: &mut impl Rng, dim: usize) -> StateVector {
    StateVector::normalized((0..dim).map(|_| complex(rng)).collect()).unwrap()
}

pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> Operator {
    let a = Operator::from_vec(dim, (0..dim * dim).map(|_| complex(rng)).collect()).unwrap();
    (&a + &a.adjoint()).scale_real(0.5)
}

pub fn random_unitary(rng: &mut impl Rng, dim: usize) -> Unitary {
    let h = random_hermitian(rng, dim);
    Unitary::from_hamiltonian(&h, 2.0, &Tolerances::default()).unwrap()
}

/// Pure half of the time, otherwise a mixture of up to three pure states.
pub fn random_density(rng: &mut impl Rng, dim: usize) -> DensityOperator {
    if rng.gen_bool(0.5) {
        return DensityOperator::pure(random_state(rng, dim));
    }
    let k = rng.gen_range(2..=3);
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut rho = Operator::zeros(dim);
    for w in weights {
        let s = random_state(rng, dim);
        rho = &rho + &s.projector().scale_real(w / total);
    }
    DensityOperator::mixed(rho, &Tolerances::default()).unwrap()
}

/// Orthonormal basis from the columns of a random unitary.
pub fn random_basis(rng: &mut impl Rng, dim: usize) -> Vec<StateVector> {
    let u = random_unitary(rng, dim);
    (0..dim)
        .map(|j| StateVector::normalized((0..dim).map(|i| u.as_operator().get(i, j)).collect()).unwrap())
        .collect()
}

/// Random set partition of `0..n` into nonempty blocks.
pub fn random_partition(rng: &mut impl Rng, n: usize) -> Vec<Vec<usize>> {
    let k = rng.gen_range(1..=n);
    let mut blocks = vec![Vec::new(); k];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for (i, &x) in order.iter().enumerate() {
        // The first k elements seed every block so none is empty.
        let b = if i < k { i } else { rng.gen_range(0..k) };
        blocks[b].push(x);
    }
    for b in &mut blocks {
        b.sort_unstable();
    }
    blocks.sort();
    blocks
}

pub fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn random_decomposition(rng: &mut impl Rng, dim: usize, prefix: &str) -> Decomposition {
    let basis = random_basis(rng, dim);
    let fine = Decomposition::from_basis(&basis, labels(prefix, dim), &Tolerances::default()).unwrap();
    fine.coarse_grain(&random_partition(rng, dim)).unwrap()
}

pub fn random_dynamics(rng: &mut impl Rng, dim: usize, steps: usize) -> Dynamics {
    Dynamics::new(
        (0..steps)
            .map(|_| (rng.gen_range(0.1..2.0), random_unitary(rng, dim)))
            .collect(),
    )
    .unwrap()
}

/// Strictly increasing steps in `1..=steps`, `times` of them.
pub fn random_steps(rng: &mut impl Rng, steps: usize, times: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (1..=steps).collect();
    all.shuffle(rng);
    let mut chosen = all[..times].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Dimension in `2..=8`, one to three times, arbitrary (usually inconsistent).
pub fn random_family(rng: &mut impl Rng) -> Family {
    let dim = rng.gen_range(2..=8);
    let times = rng.gen_range(1..=3);
    random_family_with(rng, dim, times)
}

pub fn random_family_with(rng: &mut impl Rng, dim: usize, times: usize) -> Family {
    let steps = times + rng.gen_range(0..=1);
    let dynamics = Arc::new(random_dynamics(rng, dim, steps));
    let initial = Arc::new(random_density(rng, dim));
    let slots = random_steps(rng, steps, times)
        .into_iter()
        .enumerate()
        .map(|(k, step)| Slot::new(step, Arc::new(random_decomposition(rng, dim, &format!("s{k}_")))))
        .collect();
    Family::new(slots, dynamics, initial).unwrap()
}

/// Consistent by construction: every slot is a coarse-graining of one basis
/// carried to its time by the dynamics, so all chain operators are
/// `U · (orthogonal diagonal projectors)`.
pub fn consistent_family(rng: &mut impl Rng) -> Family {
    let dim = rng.gen_range(2..=8);
    let times = rng.gen_range(1..=3);
    consistent_family_with(rng, dim, times)
}

pub fn consistent_family_with(rng: &mut impl Rng, dim: usize, times: usize) -> Family {
    let tol = Tolerances::default();
    let steps = times + rng.gen_range(0..=1);
    let dynamics = Arc::new(random_dynamics(rng, dim, steps));
    let initial = Arc::new(random_density(rng, dim));
    let basis = random_basis(rng, dim);
    let fine = Decomposition::from_basis(&basis, labels("b", dim), &tol).unwrap();
    let slots = random_steps(rng, steps, times)
        .into_iter()
        .enumerate()
        .map(|(k, step)| {
            let coarse = fine.coarse_grain(&random_partition(rng, dim)).unwrap();
            let u = dynamics.propagator(0, step);
            let projectors = coarse
                .projectors()
                .iter()
                .map(|p| {
                    let op = u.matmul(p.op()).matmul(&u.adjoint());
                    cohist::Projector::new((&op + &op.adjoint()).scale_real(0.5), &tol).unwrap()
                })
                .collect();
            let d = Decomposition::new(projectors, labels(&format!("t{k}_"), coarse.len()), &tol).unwrap();
            Slot::new(step, Arc::new(d))
        })
        .collect();
    Family::new(slots, dynamics, initial).unwrap()
}

// ---------------------------------------------------------------------------
// Oracle: plain nalgebra products, no code shared with the engine.

pub fn dense(op: &Operator) -> DMatrix<C64> {
    DMatrix::from_fn(op.dim(), op.dim(), |i, j| op.get(i, j))
}

pub fn oracle_chain(f: &Family, h: &History) -> DMatrix<C64> {
    let dim = f.dim();
    let mut k = DMatrix::<C64>::identity(dim, dim);
    let mut step = 0;
    for (slot, &i) in f.slots().iter().zip(&h.indices) {
        for seg in &f.dynamics().segments()[step..slot.step] {
            k = dense(seg.unitary.as_operator()) * k;
        }
        k = dense(slot.decomposition.projector(i).op()) * k;
        step = slot.step;
    }
    k
}

/// `D(α, β) = Tr[K(α) ρ K(β)†]` for every pair.
pub fn oracle_decoherence(f: &Family) -> Vec<Vec<C64>> {
    let rho = dense(&f.initial().matrix());
    let chains: Vec<DMatrix<C64>> = f.histories().map(|h| oracle_chain(f, &h)).collect();
    chains
        .iter()
        .map(|ka| chains.iter().map(|kb| (ka * &rho * kb.adjoint()).trace()).collect())
        .collect()
}
