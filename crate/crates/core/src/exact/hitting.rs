//! Mean hitting times and the average jump rate into a set.

use super::{GeneratorMatrix, Levels, StateSet};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

const DIRECT_LEVEL_CAP: usize = 1716;

/// `E_eta[H_A]` for every state: zero on `A`, and `(Q E)(eta) = -1` off `A`.
///
/// Off `A` the system is block tridiagonal in the particle number and is
/// solved by block elimination with dense LU; above 1716 states per level a
/// Gauss-Seidel iteration is used instead.
pub fn mean_hitting_exact(gen: &GeneratorMatrix, target: &StateSet) -> Result<Vec<f64>> {
    if target.n() != gen.n() {
        return Err(Error::InvalidArgument("set and generator sizes differ".into()));
    }
    if target.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let levels = Levels::new(gen.n(), |s| !target.contains(s));
    let widest = levels.members.iter().map(Vec::len).max().unwrap_or(0);
    let e = if widest <= DIRECT_LEVEL_CAP {
        block_thomas(gen, &levels)?
    } else {
        gauss_seidel(gen, target)?
    };
    // residual check on the complement
    let mut worst: f64 = 0.0;
    for s in 0..gen.states() {
        if target.contains(s) {
            continue;
        }
        let qe = gen.diag(s) * e[s] + gen.row(s).map(|(t, v)| v * e[t]).sum::<f64>();
        worst = worst.max((qe + 1.0).abs());
    }
    let scale = e.iter().copied().fold(1.0, f64::max) * gen.max_exit_rate();
    if !(worst <= 1e-9 * scale.max(1.0)) {
        return Err(Error::SolveFailure { residual: worst });
    }
    Ok(e)
}

fn sub_block(gen: &GeneratorMatrix, levels: &Levels, k: usize, kk: usize) -> DMatrix<f64> {
    let rows = &levels.members[k];
    let mut m = DMatrix::zeros(rows.len(), levels.members[kk].len());
    for (r, &s) in rows.iter().enumerate() {
        let s = s as usize;
        if k == kk {
            m[(r, r)] = gen.diag(s);
        }
        for (t, v) in gen.row(s) {
            let l = levels.local[t];
            if l != u32::MAX && t.count_ones() as usize == kk {
                m[(r, l as usize)] += v;
            }
        }
    }
    m
}

/// `S_k = A_k - D_k S_{k-1}^{-1} U_{k-1}`, `y_k = -1 - D_k S_{k-1}^{-1} y_{k-1}`,
/// then `E_k = S_k^{-1}(y_k - U_k E_{k+1})`. Empty levels decouple the system.
fn block_thomas(gen: &GeneratorMatrix, levels: &Levels) -> Result<Vec<f64>> {
    let n = gen.n();
    let fail = || Error::SolveFailure { residual: f64::INFINITY };
    let sizes: Vec<usize> = levels.members.iter().map(Vec::len).collect();
    let mut lus: Vec<Option<LU<f64, Dyn, Dyn>>> = Vec::with_capacity(n + 1);
    let mut ys: Vec<DVector<f64>> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut s = sub_block(gen, levels, k, k);
        let mut y = DVector::from_element(sizes[k], -1.0);
        if k > 0 && sizes[k] > 0 && sizes[k - 1] > 0 {
            let d = sub_block(gen, levels, k, k - 1);
            let u_prev = sub_block(gen, levels, k - 1, k);
            let lu_prev = lus[k - 1].as_ref().unwrap();
            let x = lu_prev.solve(&u_prev).ok_or_else(fail)?;
            let z = lu_prev.solve(&ys[k - 1]).ok_or_else(fail)?;
            s -= &d * x;
            y -= &d * z;
        }
        lus.push((sizes[k] > 0).then(|| s.lu()));
        ys.push(y);
    }
    let mut e = vec![0.0; gen.states()];
    let mut next: Option<DVector<f64>> = None;
    for k in (0..=n).rev() {
        if sizes[k] == 0 {
            next = None;
            continue;
        }
        let mut rhs = ys[k].clone();
        if let Some(en) = &next {
            rhs -= sub_block(gen, levels, k, k + 1) * en;
        }
        let ek = lus[k].as_ref().unwrap().solve(&rhs).ok_or_else(fail)?;
        for (i, &s) in levels.members[k].iter().enumerate() {
            e[s as usize] = ek[i];
        }
        next = Some(ek);
    }
    Ok(e)
}

fn gauss_seidel(gen: &GeneratorMatrix, target: &StateSet) -> Result<Vec<f64>> {
    const MAX_SWEEPS: usize = 200_000;
    let mut e = vec![0.0; gen.states()];
    let mut change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let mut worst: f64 = 0.0;
        let mut biggest: f64 = 0.0;
        for s in 0..gen.states() {
            if target.contains(s) {
                continue;
            }
            let inflow: f64 = gen.row(s).map(|(t, v)| v * e[t]).sum();
            let new = (1.0 + inflow) / -gen.diag(s);
            worst = worst.max((new - e[s]).abs());
            biggest = biggest.max(new);
            e[s] = new;
        }
        change = worst / biggest.max(1e-300);
        if change < 1e-13 {
            return Ok(e);
        }
    }
    Err(Error::SolveFailure { residual: change })
}

/// Average rate of jumps from `A^c` into `A` under `mu`, with the outer
/// boundary `{xi in A^c : R(xi, A) > 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetRate {
    pub rate: f64,
    /// `mu(A)`
    pub mass: f64,
    pub boundary: Vec<usize>,
}

/// `r(A^c, A) = mu(A^c)^{-1} sum_{xi in A^c} mu(xi) R(xi, A)`.
pub fn rate_into_set(gen: &GeneratorMatrix, mu: &[f64], set: &StateSet) -> Result<SetRate> {
    if set.n() != gen.n() || mu.len() != gen.states() {
        return Err(Error::InvalidArgument("set, law and generator sizes differ".into()));
    }
    let mass = set.mass(mu);
    let inside = set.len();
    if inside == 0 || inside == gen.states() || !(mass > 0.0 && mass < 1.0) {
        return Err(Error::DegenerateSet { mass });
    }
    let mut flow = 0.0;
    let mut outside = 0.0;
    let mut boundary = Vec::new();
    for s in 0..gen.states() {
        if set.contains(s) {
            continue;
        }
        outside += mu[s];
        let into: f64 = gen.row(s).filter(|(t, _)| set.contains(*t)).map(|e| e.1).sum();
        if into > 0.0 {
            boundary.push(s);
            flow += mu[s] * into;
        }
    }
    Ok(SetRate {
        rate: flow / outside,
        mass,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{build_generator, stationary_distribution, StationaryMethod};
    use crate::model::{total_rate_bound, LocalRate};

    #[test]
    fn two_state_hitting() {
        let gen = build_generator(1, &LocalRate::constant(0.5).unwrap()).unwrap();
        let target = StateSet::from_states(1, &[1]).unwrap();
        let e = mean_hitting_exact(&gen, &target).unwrap();
        assert_eq!(e[1], 0.0);
        assert!((e[0] - 2.0).abs() < 1e-12);
        let none = StateSet::from_states(1, &[]).unwrap();
        assert_eq!(mean_hitting_exact(&gen, &none).unwrap_err(), Error::EmptyTarget);
    }

    #[test]
    fn direct_matches_iteration() {
        let gen = build_generator(7, &LocalRate::example_2_1(0.6).unwrap()).unwrap();
        let target = StateSet::density_window(7, 0.8, 1.0).unwrap();
        let a = block_thomas(&gen, &Levels::new(7, |s| !target.contains(s))).unwrap();
        let b = gauss_seidel(&gen, &target).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn hitting_a_middle_level_with_gaps() {
        // target occupies a middle level, so the complement splits in two
        let gen = build_generator(6, &LocalRate::example_2_1(0.3).unwrap()).unwrap();
        let target = StateSet::density_window(6, 0.5, 0.5).unwrap();
        let e = mean_hitting_exact(&gen, &target).unwrap();
        assert!(e.iter().all(|x| x.is_finite() && *x >= 0.0));
        assert!(e[0] > e[0b000001]);
    }

    #[test]
    fn single_state_rate_by_hand() {
        // n = 4, c = 1: mu uniform; into {1111} only from the four 3-particle
        // states, each by one flip at rate 1.
        let gen = build_generator(4, &LocalRate::example_2_1(0.0).unwrap()).unwrap();
        let mu = stationary_distribution(&gen, StationaryMethod::Auto).unwrap();
        let a = StateSet::from_states(4, &[0b1111]).unwrap();
        let r = rate_into_set(&gen, &mu, &a).unwrap();
        let expected = (4.0 * (1.0 / 16.0) * 1.0) / (15.0 / 16.0);
        assert!((r.rate - expected).abs() < 1e-12);
        assert_eq!(r.boundary, vec![0b0111, 0b1011, 0b1101, 0b1110]);
        assert!(r.rate <= total_rate_bound(4, gen.rate()));
        let all = StateSet::density_window(4, 0.0, 1.0).unwrap();
        assert!(matches!(rate_into_set(&gen, &mu, &all), Err(Error::DegenerateSet { .. })));
    }
}
