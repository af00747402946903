//! Exact computations on the full state space `{0,1}^n`, `n <= 20`.
//!
//! A state is a bit mask with bit `x` equal to `eta(x)`. Flips change the
//! particle number by one and exchanges keep it, so the generator is block
//! tridiagonal in the particle number. The direct solvers exploit this.

mod hitting;
mod stationary;
mod transient;

pub use hitting::{mean_hitting_exact, rate_into_set, SetRate};
pub use stationary::{stationary_distribution, StationaryMethod};
pub use transient::{mixing_time_exact, orbit_representatives, propagate, propagate_many, tv_curve, tv_distance, MixingOptions};

use crate::hydro::{fourier_metric, FourierCoeffs};
use crate::model::{exchange_rate, Configuration, LocalRate};
use crate::{Error, Result};

/// Largest `n` accepted by the exact module.
pub const SIZE_CAP: usize = 20;

/// Sparse generator `Q` of `L_N` in row-compressed form, diagonal kept apart.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    n: usize,
    rate: LocalRate,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    // transpose of the off-diagonal part, for gathers in `v Q`
    in_ptr: Vec<usize>,
    in_rows: Vec<u32>,
    in_vals: Vec<f64>,
}

/// Off-diagonal entries: `c(x, eta)` towards `eta^x`, `n^2/2` towards
/// `eta^{x,x+1}` for every bond with unequal endpoints. When `n = 2` both
/// bonds join the same pair of states and their rates add up.
pub fn build_generator(n: usize, rate: &LocalRate) -> Result<GeneratorMatrix> {
    if n > SIZE_CAP {
        return Err(Error::SizeCap { n, cap: SIZE_CAP });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("system size must be positive".into()));
    }
    rate.check_fits(n)?;
    let states = 1usize << n;
    let bond = exchange_rate(n);
    let mut row_ptr = Vec::with_capacity(states + 1);
    let mut cols = Vec::with_capacity(states * 2 * n);
    let mut vals = Vec::with_capacity(states * 2 * n);
    let mut diag = Vec::with_capacity(states);
    let mut row: Vec<(u32, f64)> = Vec::with_capacity(2 * n);
    row_ptr.push(0);
    for s in 0..states as u64 {
        row.clear();
        for x in 0..n {
            let c = rate.at(rate.window_index_mask(s, n, x));
            row.push(((s ^ (1 << x)) as u32, c));
        }
        for b in 0..n {
            let y = (b + 1) % n;
            if (s >> b) & 1 != (s >> y) & 1 {
                row.push(((s ^ (1 << b) ^ (1 << y)) as u32, bond));
            }
        }
        row.sort_unstable_by_key(|e| e.0);
        let mut total = 0.0;
        let mut i = 0;
        while i < row.len() {
            let (col, mut v) = row[i];
            i += 1;
            while i < row.len() && row[i].0 == col {
                v += row[i].1;
                i += 1;
            }
            total += v;
            cols.push(col);
            vals.push(v);
        }
        diag.push(-total);
        row_ptr.push(cols.len());
    }
    let mut in_ptr = vec![0usize; states + 1];
    for &c in &cols {
        in_ptr[c as usize + 1] += 1;
    }
    for i in 0..states {
        in_ptr[i + 1] += in_ptr[i];
    }
    let mut fill = in_ptr.clone();
    let mut in_rows = vec![0u32; cols.len()];
    let mut in_vals = vec![0.0; cols.len()];
    for s in 0..states {
        for e in row_ptr[s]..row_ptr[s + 1] {
            let c = cols[e] as usize;
            in_rows[fill[c]] = s as u32;
            in_vals[fill[c]] = vals[e];
            fill[c] += 1;
        }
    }
    Ok(GeneratorMatrix {
        n,
        rate: rate.clone(),
        row_ptr,
        cols,
        vals,
        diag,
        in_ptr,
        in_rows,
        in_vals,
    })
}

impl GeneratorMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> usize {
        1 << self.n
    }

    pub fn rate(&self) -> &LocalRate {
        &self.rate
    }

    /// Off-diagonal entries of row `i` as `(column, rate)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    /// `Q(i, j)` including the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn nnz_offdiag(&self) -> usize {
        self.cols.len()
    }

    /// `max_eta (-Q(eta, eta))`.
    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().map(|d| -d).fold(0.0, f64::max)
    }

    /// `max_i |sum_j Q(i, j)|`.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.states())
            .map(|i| (self.diag[i] + self.row(i).map(|e| e.1).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    /// `out = v Q` for a row vector `v`.
    pub fn left_mul(&self, v: &[f64], out: &mut [f64]) {
        for (o, (&vi, &d)) in out.iter_mut().zip(v.iter().zip(&self.diag)) {
            *o = vi * d;
        }
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k] as usize] += vi * self.vals[k];
            }
        }
    }

    /// One uniformization step for `k` row vectors interleaved as
    /// `v[s * k + j]`: `next = v (I + Q / lambda)`, then `acc += w * next`.
    pub(crate) fn uniformized_step(&self, v: &[f64], next: &mut [f64], acc: &mut [f64], k: usize, lambda: f64, w: f64) {
        match k {
            1 => self.step_fixed::<1>(v, next, acc, lambda, w),
            4 => self.step_fixed::<4>(v, next, acc, lambda, w),
            8 => self.step_fixed::<8>(v, next, acc, lambda, w),
            16 => self.step_fixed::<16>(v, next, acc, lambda, w),
            _ => {
                // other widths go one column at a time
                for j in 0..k {
                    let col: Vec<f64> = (0..self.diag.len()).map(|s| v[s * k + j]).collect();
                    let mut nx = vec![0.0; col.len()];
                    let mut ac: Vec<f64> = (0..self.diag.len()).map(|s| acc[s * k + j]).collect();
                    self.step_fixed::<1>(&col, &mut nx, &mut ac, lambda, w);
                    for s in 0..col.len() {
                        next[s * k + j] = nx[s];
                        acc[s * k + j] = ac[s];
                    }
                }
            }
        }
    }

    fn step_fixed<const K: usize>(&self, v: &[f64], next: &mut [f64], acc: &mut [f64], lambda: f64, w: f64) {
        let inv = 1.0 / lambda;
        let block = |x: &[f64], s: usize| -> [f64; K] { x[s * K..(s + 1) * K].try_into().unwrap() };
        for c in 0..self.diag.len() {
            let keep = 1.0 + self.diag[c] * inv;
            let mut out = block(v, c);
            for o in out.iter_mut() {
                *o *= keep;
            }
            for e in self.in_ptr[c]..self.in_ptr[c + 1] {
                let q = self.in_vals[e] * inv;
                let src = block(v, self.in_rows[e] as usize);
                for j in 0..K {
                    out[j] += q * src[j];
                }
            }
            next[c * K..(c + 1) * K].copy_from_slice(&out);
            if w > 0.0 {
                for (a, x) in acc[c * K..(c + 1) * K].iter_mut().zip(&out) {
                    *a += w * x;
                }
            }
        }
    }

    /// `||v Q||_inf`.
    pub fn residual(&self, v: &[f64]) -> f64 {
        let mut out = vec![0.0; v.len()];
        self.left_mul(v, &mut out);
        out.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// States grouped by particle number; `local[s]` is the position of `s`
/// within its level.
pub(crate) struct Levels {
    pub members: Vec<Vec<u32>>,
    pub local: Vec<u32>,
}

impl Levels {
    pub fn new(n: usize, keep: impl Fn(usize) -> bool) -> Self {
        let mut members = vec![Vec::new(); n + 1];
        let mut local = vec![u32::MAX; 1 << n];
        for s in 0..1usize << n {
            if keep(s) {
                let k = s.count_ones() as usize;
                local[s] = members[k].len() as u32;
                members[k].push(s as u32);
            }
        }
        Self { members, local }
    }
}

/// A set of states, stored as one flag per state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSet {
    n: usize,
    member: Vec<bool>,
}

impl StateSet {
    pub fn from_predicate(n: usize, pred: impl Fn(&Configuration) -> bool) -> Result<Self> {
        if n > SIZE_CAP {
            return Err(Error::SizeCap { n, cap: SIZE_CAP });
        }
        let member = (0..1u64 << n)
            .map(|s| pred(&Configuration::from_mask(s, n)))
            .collect();
        Ok(Self { n, member })
    }

    pub fn from_states(n: usize, states: &[usize]) -> Result<Self> {
        if n > SIZE_CAP {
            return Err(Error::SizeCap { n, cap: SIZE_CAP });
        }
        let mut member = vec![false; 1 << n];
        for &s in states {
            member[s] = true;
        }
        Ok(Self { n, member })
    }

    /// Configurations with particle density in `[lo, hi]`.
    pub fn density_window(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::from_predicate(n, |c| (lo..=hi).contains(&c.density()))
    }

    /// Configurations whose empirical measure lies within `radius` of
    /// `center` in the Fourier metric truncated at `k_max`.
    pub fn metric_ball(n: usize, center: &FourierCoeffs, radius: f64, k_max: usize) -> Result<Self> {
        Self::from_predicate(n, |c| {
            let pc = FourierCoeffs::of_configuration(c, k_max);
            fourier_metric(&pc, center, k_max).value <= radius
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, s: usize) -> bool {
        self.member[s]
    }

    pub fn len(&self) -> usize {
        self.member.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn complement(&self) -> Self {
        Self {
            n: self.n,
            member: self.member.iter().map(|b| !b).collect(),
        }
    }

    pub fn states(&self) -> Vec<usize> {
        (0..self.member.len()).filter(|&s| self.member[s]).collect()
    }

    pub fn mass(&self, mu: &[f64]) -> f64 {
        self.states().iter().map(|&s| mu[s]).sum()
    }
}
