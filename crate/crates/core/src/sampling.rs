//! Seeded sampling of region points.
//!
//! Each variable is drawn from its box hull: bounded hulls uniformly (or
//! log-uniformly when they span more than two decades), half-lines as
//! `lo + 10^u` with `u` uniform in `[-3, 6]`. Index variables are rounded to
//! integers. Draws outside the region are rejected.

use crate::expr::Assignment;
use crate::interval::Interval;
use crate::region::{Region, VarRole};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x5eed_c0de;

/// Draws `n` region points, making at most `50 n` attempts.
pub fn sample_region(r: &Region, n: usize, seed: u64) -> Vec<Assignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hull = r.bounds();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n.saturating_mul(50) {
        if out.len() == n {
            break;
        }
        let mut a = Assignment::new();
        for d in &r.vars {
            let iv = hull.get(&d.name).copied().unwrap_or(Interval::ENTIRE);
            let mut x = draw(&mut rng, iv);
            if d.role == VarRole::Index {
                x = x.round().max(iv.lo.ceil());
            }
            a.insert(d.name.clone(), x);
        }
        if r.contains(&a) {
            out.push(a);
        }
    }
    out
}

/// One draw from an interval.
pub fn draw(rng: &mut impl Rng, iv: Interval) -> f64 {
    match (iv.lo.is_finite(), iv.hi.is_finite()) {
        (true, true) => {
            if iv.lo > 0.0 && iv.hi / iv.lo > 100.0 {
                (iv.lo.ln() + rng.gen::<f64>() * (iv.hi.ln() - iv.lo.ln())).exp()
            } else {
                iv.lo + rng.gen::<f64>() * (iv.hi - iv.lo)
            }
        }
        (true, false) => iv.lo + 10f64.powf(rng.gen_range(-3.0..6.0)),
        (false, true) => iv.hi - 10f64.powf(rng.gen_range(-3.0..6.0)),
        (false, false) => {
            let m = 10f64.powf(rng.gen_range(-3.0..6.0));
            if rng.gen::<bool>() {
                m
            } else {
                -m
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::{constraint, lower, Rel};

    #[test]
    fn samples_satisfy_constraints_and_are_reproducible() {
        let r = Region::reals(
            &["x", "y"],
            vec![lower("x", 1), lower("y", 0), constraint("y", Rel::Le, "(* 2 (log x))")],
        );
        let a = sample_region(&r, 200, 7);
        assert_eq!(a.len(), 200);
        assert!(a.iter().all(|p| r.contains(p)));
        assert_eq!(a, sample_region(&r, 200, 7));
    }
}
