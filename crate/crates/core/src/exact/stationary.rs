//! `mu Q = 0`, `sum mu = 1`.

use super::{GeneratorMatrix, Levels};
use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Largest particle-number level handled by dense elimination in `Auto` mode.
const DIRECT_LEVEL_CAP: usize = 1716;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StationaryMethod {
    /// Direct elimination when every level has at most 1716 states
    /// (`n <= 13`), iterative otherwise.
    #[default]
    Auto,
    /// Censoring the chain level by level with dense LU factorizations.
    Direct,
    /// Gauss-Seidel sweeps with aggregation over particle-number levels.
    Iterative,
}

/// Stationary law of the generator, checked through `||mu Q||_inf`.
///
/// Fails with [`Error::SolveFailure`] when the residual exceeds
/// `1e-10 * max exit rate` or an entry is not strictly positive.
pub fn stationary_distribution(gen: &GeneratorMatrix, method: StationaryMethod) -> Result<Vec<f64>> {
    let levels = Levels::new(gen.n(), |_| true);
    let widest = levels.members.iter().map(Vec::len).max().unwrap_or(0);
    let direct = match method {
        StationaryMethod::Auto => widest <= DIRECT_LEVEL_CAP,
        StationaryMethod::Direct => true,
        StationaryMethod::Iterative => false,
    };
    let mu = if direct {
        censored_elimination(gen, &levels)?
    } else {
        gauss_seidel_aggregation(gen, &levels)?
    };
    let residual = gen.residual(&mu);
    let scale = gen.max_exit_rate().max(1.0);
    if !(residual <= 1e-10 * scale) || mu.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::SolveFailure { residual });
    }
    Ok(mu)
}

/// Dense blocks `Q[level k, level k + offset]`.
fn block(gen: &GeneratorMatrix, levels: &Levels, k: usize, offset: isize) -> DMatrix<f64> {
    let rows = &levels.members[k];
    let kk = (k as isize + offset) as usize;
    let cols = levels.members[kk].len();
    let mut m = DMatrix::zeros(rows.len(), cols);
    for (r, &s) in rows.iter().enumerate() {
        let s = s as usize;
        if offset == 0 {
            m[(r, r)] = gen.diag(s);
        }
        for (t, v) in gen.row(s) {
            if t.count_ones() as usize == kk {
                m[(r, levels.local[t] as usize)] += v;
            }
        }
    }
    m
}

/// `M_0 = Q_00`, `W_k = Q_{k+1,k} (-M_k)^{-1}`, `M_{k+1} = Q_{k+1,k+1} + W_k Q_{k,k+1}`;
/// the top level is the single full state, and `mu_k = mu_{k+1} W_k`.
fn censored_elimination(gen: &GeneratorMatrix, levels: &Levels) -> Result<Vec<f64>> {
    let n = gen.n();
    let mut ws: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    let mut m = block(gen, levels, 0, 0);
    for k in 0..n {
        let down = block(gen, levels, k + 1, -1);
        let lu = (-&m).transpose().lu();
        let xt = lu
            .solve(&down.transpose())
            .ok_or(Error::SolveFailure { residual: f64::INFINITY })?;
        let w = xt.transpose();
        m = block(gen, levels, k + 1, 0) + &w * block(gen, levels, k, 1);
        ws.push(w);
    }
    let mut level_mu = vec![DMatrix::from_element(1, 1, 1.0)];
    for k in (0..n).rev() {
        let next = &level_mu[level_mu.len() - 1] * &ws[k];
        level_mu.push(next);
    }
    level_mu.reverse();
    let mut mu = vec![0.0; gen.states()];
    for (k, row) in level_mu.iter().enumerate() {
        for (i, &s) in levels.members[k].iter().enumerate() {
            mu[s as usize] = row[(0, i)];
        }
    }
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|p| *p /= total);
    Ok(mu)
}

fn gauss_seidel_aggregation(gen: &GeneratorMatrix, levels: &Levels) -> Result<Vec<f64>> {
    const MAX_SWEEPS: usize = 20_000;
    let states = gen.states();
    let n = gen.n();
    // incoming transitions
    let mut in_ptr = vec![0usize; states + 1];
    for i in 0..states {
        for (j, _) in gen.row(i) {
            in_ptr[j + 1] += 1;
        }
    }
    for j in 0..states {
        in_ptr[j + 1] += in_ptr[j];
    }
    let mut fill = in_ptr.clone();
    let mut in_src = vec![0u32; in_ptr[states]];
    let mut in_val = vec![0.0; in_ptr[states]];
    for i in 0..states {
        for (j, v) in gen.row(i) {
            in_src[fill[j]] = i as u32;
            in_val[fill[j]] = v;
            fill[j] += 1;
        }
    }
    let scale = gen.max_exit_rate().max(1.0);
    let mut mu = vec![1.0 / states as f64; states];
    let mut residual = f64::INFINITY;
    for sweep in 0..MAX_SWEEPS {
        for j in 0..states {
            let inflow: f64 = (in_ptr[j]..in_ptr[j + 1])
                .map(|k| mu[in_src[k] as usize] * in_val[k])
                .sum();
            mu[j] = inflow / -gen.diag(j);
        }
        // aggregate onto the birth-death chain of particle numbers
        let mut up = vec![0.0; n + 1];
        let mut down = vec![0.0; n + 1];
        let mut mass = vec![0.0; n + 1];
        for (k, members) in levels.members.iter().enumerate() {
            for &s in members {
                let s = s as usize;
                let p = mu[s];
                mass[k] += p;
                for (t, v) in gen.row(s) {
                    match (t.count_ones() as usize).cmp(&k) {
                        std::cmp::Ordering::Greater => up[k] += p * v,
                        std::cmp::Ordering::Less => down[k] += p * v,
                        std::cmp::Ordering::Equal => {}
                    }
                }
            }
        }
        let mut log_w = vec![0.0; n + 1];
        for k in 0..n {
            let a = up[k] / mass[k];
            let b = down[k + 1] / mass[k + 1];
            log_w[k + 1] = log_w[k] + a.ln() - b.ln();
        }
        let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = log_w.iter().map(|l| (l - top).exp()).sum();
        for (k, members) in levels.members.iter().enumerate() {
            let target = (log_w[k] - top).exp() / z;
            let f = target / mass[k];
            for &s in members {
                mu[s as usize] *= f;
            }
        }
        if sweep % 10 == 9 {
            residual = gen.residual(&mu);
            if residual <= 1e-12 * scale {
                return Ok(mu);
            }
        }
    }
    Err(Error::SolveFailure { residual })
}
