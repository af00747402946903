//! Microscopic model: configurations on the discrete torus, the local flip
//! rate, the generator's elementary moves, and the reaction polynomials.

use crate::poly::Polynomial;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Occupation variables `eta(x) in {0, 1}` on `Z / nZ`. Serialized as a
/// string of `0`s and `1`s.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Configuration {
    bits: Vec<u8>,
}

impl From<Configuration> for String {
    fn from(c: Configuration) -> Self {
        c.to_string()
    }
}

impl TryFrom<String> for Configuration {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        Configuration::parse(&s).ok_or_else(|| format!("not a 0/1 string: {s:?}"))
    }
}

impl Configuration {
    pub fn empty(n: usize) -> Self {
        assert!(n > 0, "system size must be positive");
        Self { bits: vec![0; n] }
    }

    pub fn full(n: usize) -> Self {
        assert!(n > 0, "system size must be positive");
        Self { bits: vec![1; n] }
    }

    /// Panics on values other than 0 and 1.
    pub fn from_bits(bits: Vec<u8>) -> Self {
        assert!(!bits.is_empty(), "system size must be positive");
        assert!(bits.iter().all(|&b| b <= 1), "occupation values must be 0 or 1");
        Self { bits }
    }

    /// Parses strings like `"1010"`; site 0 is the leftmost character.
    pub fn parse(s: &str) -> Option<Self> {
        let bits: Option<Vec<u8>> = s
            .chars()
            .map(|c| match c {
                '0' => Some(0),
                '1' => Some(1),
                _ => None,
            })
            .collect();
        bits.filter(|b| !b.is_empty()).map(|bits| Self { bits })
    }

    /// Bit `x` of `mask` is `eta(x)`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        assert!(n > 0 && n <= 64);
        Self {
            bits: (0..n).map(|x| ((mask >> x) & 1) as u8).collect(),
        }
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.n() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |m, (x, &b)| m | ((b as u64) << x))
    }

    pub fn n(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Cyclic read: `get(x + n) == get(x)`, negative offsets allowed.
    pub fn get(&self, x: isize) -> u8 {
        self.bits[x.rem_euclid(self.n() as isize) as usize]
    }

    pub fn particles(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn density(&self) -> f64 {
        self.particles() as f64 / self.n() as f64
    }

    pub(crate) fn toggle(&mut self, x: usize) {
        self.bits[x] ^= 1;
    }

    pub(crate) fn swap(&mut self, x: usize) {
        let y = (x + 1) % self.n();
        self.bits.swap(x, y);
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// `eta^x`: the configuration with the occupation at `x` flipped.
pub fn flip_map(config: &Configuration, x: usize) -> Configuration {
    assert!(x < config.n(), "site {x} outside torus of size {}", config.n());
    let mut out = config.clone();
    out.toggle(x);
    out
}

/// `eta^{x,x+1}`: occupations at `x` and `x + 1 mod n` exchanged.
pub fn exchange_map(config: &Configuration, x: usize) -> Configuration {
    assert!(x < config.n(), "site {x} outside torus of size {}", config.n());
    let mut out = config.clone();
    out.swap(x);
    out
}

/// Translation-invariant local flip rate `c(x, eta) = c(eta(. + x))`.
///
/// The table is indexed by the window `(eta(-R), ..., eta(R))` read as a
/// binary numeral, `eta(-R)` being the most significant bit. The centre site
/// therefore sits at bit `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRate", into = "RawRate")]
pub struct LocalRate {
    radius: usize,
    table: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRate {
    radius: usize,
    table: Vec<f64>,
}

impl TryFrom<RawRate> for LocalRate {
    type Error = Error;
    fn try_from(raw: RawRate) -> Result<Self> {
        LocalRate::new(raw.radius, raw.table)
    }
}

impl From<LocalRate> for RawRate {
    fn from(rate: LocalRate) -> Self {
        RawRate {
            radius: rate.radius,
            table: rate.table,
        }
    }
}

/// Largest supported window half-width.
pub const MAX_RADIUS: usize = 8;

impl LocalRate {
    pub fn new(radius: usize, table: Vec<f64>) -> Result<Self> {
        if radius > MAX_RADIUS {
            return Err(Error::InvalidRate(format!(
                "radius {radius} exceeds {MAX_RADIUS}"
            )));
        }
        let len = 1usize << (2 * radius + 1);
        if table.len() != len {
            return Err(Error::InvalidRate(format!(
                "radius {radius} needs {len} entries, got {}",
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::InvalidRate(format!(
                "entries must be finite and strictly positive, found {bad}"
            )));
        }
        Ok(Self { radius, table })
    }

    /// Constant rate `c = value` with radius 0.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(0, vec![value, value])
    }

    /// The nearest-neighbour Ising-type rate
    /// `c = (1 - g s(0) s(1)) (1 - g s(0) s(-1))` with spins `s = 2 eta - 1`,
    /// i.e. `1 + 2g(1 - 2 eta(0))(eta(1) + eta(-1) - 1) + g^2 (2 eta(-1) - 1)(2 eta(1) - 1)`.
    /// Reversible for the Ising Glauber part with `g = tanh(beta)`, attractive
    /// for every `0 <= g < 1`, and its reaction terms are
    /// `B = (1 - rho){1 - 2g(1 - 2rho) + g^2 (1 - 2rho)^2}`,
    /// `D = rho{1 + 2g(1 - 2rho) + g^2 (1 - 2rho)^2}`.
    pub fn example_2_1(gamma: f64) -> Result<Self> {
        Self::nearest_neighbour(gamma, 2.0 * gamma)
    }

    /// The same family with a single `g` in the linear term,
    /// `c = 1 + g(1 - 2 eta(0))(eta(1) + eta(-1) - 1) + g^2 (2 eta(-1) - 1)(2 eta(1) - 1)`.
    /// Its reaction terms differ from [`LocalRate::example_2_1`] and it is
    /// attractive only for `g <= 1/2`.
    pub fn example_2_1_printed(gamma: f64) -> Result<Self> {
        Self::nearest_neighbour(gamma, gamma)
    }

    fn nearest_neighbour(gamma: f64, linear: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidRate(format!(
                "example-2.1 needs 0 <= gamma < 1, got {gamma}"
            )));
        }
        let table = (0..8usize)
            .map(|w| {
                let left = ((w >> 2) & 1) as f64;
                let centre = ((w >> 1) & 1) as f64;
                let right = (w & 1) as f64;
                1.0 + linear * (1.0 - 2.0 * centre) * (right + left - 1.0)
                    + gamma * gamma * (2.0 * left - 1.0) * (2.0 * right - 1.0)
            })
            .collect();
        Self::new(1, table)
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn width(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn centre_bit(&self) -> usize {
        self.radius
    }

    /// Rate for a window index.
    #[inline]
    pub fn at(&self, window: usize) -> f64 {
        self.table[window]
    }

    /// `||c||_inf`
    pub fn max_rate(&self) -> f64 {
        self.table.iter().copied().fold(0.0, f64::max)
    }

    /// Largest `0 -> 1` rate over windows with an empty centre.
    pub fn max_birth(&self) -> f64 {
        self.windows_with_centre(0).map(|w| self.table[w]).fold(0.0, f64::max)
    }

    /// Largest `1 -> 0` rate over windows with an occupied centre.
    pub fn max_death(&self) -> f64 {
        self.windows_with_centre(1).map(|w| self.table[w]).fold(0.0, f64::max)
    }

    fn windows_with_centre(&self, value: usize) -> impl Iterator<Item = usize> + '_ {
        let bit = self.centre_bit();
        (0..self.table.len()).filter(move |w| (w >> bit) & 1 == value)
    }

    /// Window index of `config` centred at `x`, read cyclically.
    pub fn window_index(&self, config: &Configuration, x: usize) -> usize {
        let r = self.radius as isize;
        (-r..=r).fold(0usize, |w, o| {
            (w << 1) | config.get(x as isize + o) as usize
        })
    }

    /// Window index for a state stored as a bit mask (bit `x` is `eta(x)`).
    pub fn window_index_mask(&self, mask: u64, n: usize, x: usize) -> usize {
        let r = self.radius as isize;
        (-r..=r).fold(0usize, |w, o| {
            let y = (x as isize + o).rem_euclid(n as isize) as usize;
            (w << 1) | ((mask >> y) & 1) as usize
        })
    }

    pub fn check_fits(&self, n: usize) -> Result<()> {
        if n < self.width() {
            Err(Error::WindowTooLarge {
                n,
                width: self.width(),
            })
        } else {
            Ok(())
        }
    }

    /// Invariant under reversal of the window.
    pub fn is_reflection_symmetric(&self) -> bool {
        let w = self.width();
        (0..self.table.len()).all(|idx| {
            let rev = (0..w).fold(0usize, |acc, b| (acc << 1) | ((idx >> b) & 1));
            self.table[idx] == self.table[rev]
        })
    }

    /// Invariant under particle-hole exchange of the window.
    pub fn is_spin_symmetric(&self) -> bool {
        let mask = self.table.len() - 1;
        (0..self.table.len()).all(|idx| self.table[idx] == self.table[idx ^ mask])
    }
}

/// `c(x, eta)`.
pub fn flip_rate(rate: &LocalRate, config: &Configuration, x: usize) -> Result<f64> {
    rate.check_fits(config.n())?;
    Ok(rate.at(rate.window_index(config, x)))
}

/// Which parts of the generator are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Dynamics {
    #[default]
    GlauberKawasaki,
    /// Flips disabled: pure symmetric exclusion at speed `n^2`.
    KawasakiOnly,
}

impl Dynamics {
    pub fn flips(self) -> bool {
        matches!(self, Dynamics::GlauberKawasaki)
    }
}

/// Per-site flip rates and per-bond exchange rates of `L_N` at one
/// configuration. Every bond carries rate `n^2 / 2`, including bonds whose
/// exchange is a no-op.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRates {
    pub flip: Vec<f64>,
    pub exchange: Vec<f64>,
    pub total_flip: f64,
    pub total_exchange: f64,
}

impl EventRates {
    pub fn total(&self) -> f64 {
        self.total_flip + self.total_exchange
    }
}

pub fn glauber_kawasaki_rates(
    config: &Configuration,
    rate: &LocalRate,
    dynamics: Dynamics,
) -> Result<EventRates> {
    let n = config.n();
    rate.check_fits(n)?;
    let flip: Vec<f64> = if dynamics.flips() {
        (0..n).map(|x| rate.at(rate.window_index(config, x))).collect()
    } else {
        vec![0.0; n]
    };
    let bond = exchange_rate(n);
    let exchange = vec![bond; n];
    Ok(EventRates {
        total_flip: flip.iter().sum(),
        total_exchange: bond * n as f64,
        flip,
        exchange,
    })
}

/// Per-bond exchange rate `n^2 / 2`.
#[inline]
pub fn exchange_rate(n: usize) -> f64 {
    (n * n) as f64 / 2.0
}

/// Upper bound `n^3 / 2 + n ||c||_inf` on the total jump rate out of any state.
pub fn total_rate_bound(n: usize, rate: &LocalRate) -> f64 {
    (n * n * n) as f64 / 2.0 + n as f64 * rate.max_rate()
}

/// Exact reaction polynomials of a local rate. `v` is the primitive of `-f`
/// normalised by `v(1/2) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionPolynomials {
    pub b: Polynomial,
    pub d: Polynomial,
    pub f: Polynomial,
    pub v: Polynomial,
}

impl ReactionPolynomials {
    pub fn birth(&self, rho: f64) -> f64 {
        self.b.eval(rho)
    }
    pub fn death(&self, rho: f64) -> f64 {
        self.d.eval(rho)
    }
    pub fn reaction(&self, rho: f64) -> f64 {
        self.f.eval(rho)
    }
    pub fn potential(&self, rho: f64) -> f64 {
        self.v.eval(rho)
    }

    /// `sup_{[0,1]} |F'|`, evaluated on a fine grid plus the endpoints.
    pub fn reaction_lipschitz(&self) -> f64 {
        let fp = self.f.derivative();
        (0..=4096)
            .map(|i| fp.eval(i as f64 / 4096.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `B(rho) = E[(1 - w(0)) c(w)]` and `D(rho) = E[w(0) c(w)]` under the
/// Bernoulli(rho) product law of the window, expanded exactly.
pub fn reaction_polynomials(rate: &LocalRate) -> ReactionPolynomials {
    let width = rate.width();
    let centre = rate.centre_bit();
    let occupied = Polynomial::linear(0.0, 1.0);
    let vacant = Polynomial::linear(1.0, -1.0);
    let mut b = Polynomial::zero();
    let mut d = Polynomial::zero();
    for w in 0..rate.table().len() {
        let weight = (0..width).fold(Polynomial::constant(1.0), |acc, bit| {
            if (w >> bit) & 1 == 1 {
                &acc * &occupied
            } else {
                &acc * &vacant
            }
        });
        let term = weight.scale(rate.at(w));
        if (w >> centre) & 1 == 1 {
            d = &d + &term;
        } else {
            b = &b + &term;
        }
    }
    let f = &b - &d;
    let prim = (-&f).integral();
    let v = &prim - &Polynomial::constant(prim.eval(0.5));
    ReactionPolynomials { b, d, f, v }
}

/// Local minima of `V` on `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialProfile {
    pub minima: Vec<f64>,
    /// Well depths `h_i`, one per minimum, once estimated.
    pub depths: Option<Vec<f64>>,
}

impl PotentialProfile {
    pub fn ell(&self) -> usize {
        self.minima.len()
    }
}

const ROOT_GRID: usize = 10_000;
const ROOT_TOL: f64 = 1e-12;

/// A simple root of `F` together with the direction of its sign change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionRoot {
    pub rho: f64,
    /// `true` when `F` goes from positive to negative (a minimum of `V`).
    pub stable: bool,
}

/// Sign-changing roots of `F` in `[0, 1]`, ascending.
pub fn reaction_roots(poly: &ReactionPolynomials) -> Vec<ReactionRoot> {
    let f = &poly.f;
    let grid: Vec<f64> = (0..=ROOT_GRID).map(|i| i as f64 / ROOT_GRID as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| f.eval(x)).collect();
    let mut roots: Vec<ReactionRoot> = Vec::new();
    let mut i = 0;
    while i < ROOT_GRID {
        let (a, fa) = (grid[i], vals[i]);
        let (b, fb) = (grid[i + 1], vals[i + 1]);
        if fa == 0.0 {
            // exact grid zero: classify by the neighbours
            let left = if i > 0 { vals[i - 1] } else { fb };
            let right = fb;
            if left.signum() != right.signum() && right != 0.0 {
                roots.push(ReactionRoot {
                    rho: a,
                    stable: left > 0.0,
                });
            }
        } else if fa * fb < 0.0 {
            roots.push(ReactionRoot {
                rho: bisect(|x| f.eval(x), a, b, fa),
                stable: fa > 0.0,
            });
        }
        i += 1;
    }
    roots.dedup_by(|x, y| (x.rho - y.rho).abs() < 1e-9);
    roots
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// Local minima of `V` in `(0, 1)` from the sign changes of `V' = -F`.
///
/// Fails with [`Error::DegenerateCritical`] when `|V''| < tol` at a critical
/// point instead of guessing its type.
pub fn potential_minima(poly: &ReactionPolynomials, tol: f64) -> Result<PotentialProfile> {
    let vpp = poly.v.derivative().derivative();
    let roots = reaction_roots(poly);
    for r in &roots {
        let curvature = vpp.eval(r.rho).abs();
        if curvature < tol {
            return Err(Error::DegenerateCritical {
                at: r.rho,
                curvature,
            });
        }
    }
    let minima = roots
        .iter()
        .filter(|r| r.stable && r.rho > 0.0 && r.rho < 1.0)
        .map(|r| r.rho)
        .collect();
    Ok(PotentialProfile {
        minima,
        depths: None,
    })
}

/// Exhaustive check of attractivity over all ordered window pairs
/// `eta >= xi`: occupied centres need `c(eta) <= c(xi)`, empty centres need
/// `c(eta) >= c(xi)`.
pub fn is_attractive(rate: &LocalRate) -> bool {
    const SLACK: f64 = 1e-12;
    let centre = rate.centre_bit();
    let len = rate.table().len();
    for eta in 0..len {
        let c_eta = rate.at(eta);
        // enumerate submasks xi of eta (xi <= eta pointwise)
        let mut xi = eta;
        loop {
            if (xi >> centre) & 1 == (eta >> centre) & 1 {
                let c_xi = rate.at(xi);
                let ok = if (eta >> centre) & 1 == 1 {
                    c_eta <= c_xi + SLACK
                } else {
                    c_eta + SLACK >= c_xi
                };
                if !ok {
                    return false;
                }
            }
            if xi == 0 {
                break;
            }
            xi = (xi - 1) & eta;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> Configuration {
        Configuration::parse(s).unwrap()
    }

    #[test]
    fn flip_examples() {
        let z = Configuration::empty(6);
        assert_eq!(flip_map(&z, 3), cfg("000100"));
        assert_eq!(flip_map(&cfg("1010"), 0), cfg("0010"));
    }

    #[test]
    fn exchange_examples() {
        assert_eq!(exchange_map(&cfg("1100"), 1), cfg("1010"));
        assert_eq!(exchange_map(&cfg("1100"), 0), cfg("1100"));
        // wrap-around bond (n-1, 0)
        assert_eq!(exchange_map(&cfg("1000"), 3), cfg("0001"));
    }

    #[test]
    fn cyclic_indexing() {
        let c = cfg("1001");
        assert_eq!(c.get(-1), 1);
        assert_eq!(c.get(4), 1);
        assert_eq!(c.get(5), 0);
        assert_eq!(Configuration::from_mask(c.to_mask(), 4), c);
    }

    #[test]
    fn example_rate_values() {
        let flat = LocalRate::example_2_1(0.0).unwrap();
        assert!(flat.table().iter().all(|&c| c == 1.0));
        let g: f64 = 0.5;
        let r = LocalRate::example_2_1(g).unwrap();
        // all spins aligned: (1 - g)^2; centre against both neighbours: (1 + g)^2
        assert!((r.at(0b111) - 0.25).abs() < 1e-15);
        assert!((r.at(0b000) - 0.25).abs() < 1e-15);
        assert!((r.at(0b010) - 2.25).abs() < 1e-15);
        assert!((r.at(0b110) - (1.0 - g * g)).abs() < 1e-15);
        let c = cfg("01110");
        assert!((flip_rate(&r, &c, 2).unwrap() - 0.25).abs() < 1e-15);

        let printed = LocalRate::example_2_1_printed(0.5).unwrap();
        assert!((printed.at(0b111) - 0.75).abs() < 1e-15);
        assert!((printed.at(0b000) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn ising_detailed_balance() {
        // c(eta) / c(eta^0) = exp(-2 beta s0 (s1 + s-1)) with g = tanh(beta)
        let beta: f64 = 0.4;
        let r = LocalRate::example_2_1(beta.tanh()).unwrap();
        for w in 0..8usize {
            let s = |b: usize| 2.0 * ((w >> b) & 1) as f64 - 1.0;
            let ratio = r.at(w) / r.at(w ^ 0b010);
            let expected = (-2.0 * beta * s(1) * (s(0) + s(2))).exp();
            assert!((ratio - expected).abs() < 1e-12, "window {w:03b}");
        }
    }

    #[test]
    fn window_must_fit() {
        let r = LocalRate::example_2_1(0.3).unwrap();
        assert_eq!(
            flip_rate(&r, &cfg("10"), 0),
            Err(Error::WindowTooLarge { n: 2, width: 3 })
        );
    }

    #[test]
    fn invalid_tables_rejected() {
        assert!(LocalRate::new(1, vec![1.0; 7]).is_err());
        assert!(LocalRate::new(0, vec![1.0, 0.0]).is_err());
        assert!(LocalRate::new(0, vec![1.0, f64::NAN]).is_err());
        assert!(LocalRate::example_2_1(1.0).is_err());
    }

    #[test]
    fn event_rate_summary() {
        let r = LocalRate::example_2_1(0.0).unwrap();
        let c = cfg("1100");
        let ev = glauber_kawasaki_rates(&c, &r, Dynamics::GlauberKawasaki).unwrap();
        assert_eq!(ev.total_flip, 4.0);
        assert!(ev.exchange.iter().all(|&e| e == 8.0));
        assert_eq!(ev.total_exchange, 32.0);
        let k = glauber_kawasaki_rates(&c, &r, Dynamics::KawasakiOnly).unwrap();
        assert_eq!(k.total_flip, 0.0);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let r = LocalRate::example_2_1(0.25).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"radius\":1"));
        let back: LocalRate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        let bad = r#"{"radius":0,"table":[1.0,-1.0]}"#;
        assert!(serde_json::from_str::<LocalRate>(bad).is_err());
    }

    #[test]
    fn symmetry_detection() {
        let r = LocalRate::example_2_1(0.4).unwrap();
        assert!(r.is_reflection_symmetric());
        assert!(r.is_spin_symmetric());
        let mut t = r.table().to_vec();
        t[0b100] += 0.1;
        let skew = LocalRate::new(1, t).unwrap();
        assert!(!skew.is_reflection_symmetric());
        assert!(!skew.is_spin_symmetric());
    }

    #[test]
    fn minima_for_example_rates() {
        let p = reaction_polynomials(&LocalRate::example_2_1(0.25).unwrap());
        let prof = potential_minima(&p, 1e-8).unwrap();
        assert_eq!(prof.ell(), 1);
        assert!((prof.minima[0] - 0.5).abs() < 1e-10);

        let g = 0.75;
        let p = reaction_polynomials(&LocalRate::example_2_1(g).unwrap());
        let prof = potential_minima(&p, 1e-8).unwrap();
        let off = (2.0 * g - 1.0f64).sqrt() / (2.0 * g);
        assert_eq!(prof.ell(), 2);
        assert!((prof.minima[0] - (0.5 - off)).abs() < 1e-10);
        assert!((prof.minima[1] - (0.5 + off)).abs() < 1e-10);
        assert!((prof.minima[0] - 0.0286).abs() < 1e-4);
        for &m in &prof.minima {
            assert!(p.reaction(m).abs() < 1e-10);
        }
    }

    #[test]
    fn critical_boundary_is_flagged() {
        let p = reaction_polynomials(&LocalRate::example_2_1(0.5).unwrap());
        match potential_minima(&p, 1e-6) {
            Err(Error::DegenerateCritical { at, .. }) => assert!((at - 0.5).abs() < 1e-4),
            other => panic!("expected degenerate flag, got {other:?}"),
        }
    }

    #[test]
    fn attractivity_of_example_rate() {
        for i in 0..10 {
            let g = i as f64 / 10.0;
            assert!(is_attractive(&LocalRate::example_2_1(g).unwrap()), "g = {g}");
        }
        // With a single g in the linear term the occupied-centre rates stop
        // being monotone above 1/2: c(1,1,0) = 1 - g^2 < c(1,1,1) = 1 - g + g^2.
        assert!(is_attractive(&LocalRate::example_2_1_printed(0.5).unwrap()));
        for g in [0.6, 0.75, 0.9] {
            let r = LocalRate::example_2_1_printed(g).unwrap();
            assert!(r.at(0b110) < r.at(0b111));
            assert!(!is_attractive(&r), "g = {g}");
        }
    }

    #[test]
    fn reaction_polynomials_match_closed_forms() {
        let rho = Polynomial::linear(0.0, 1.0);
        let one = Polynomial::constant(1.0);
        let u = Polynomial::linear(1.0, -2.0);
        let h = Polynomial::linear(-0.5, 1.0);
        for g in [0.0, 0.25, 0.5, 0.75] {
            let p = reaction_polynomials(&LocalRate::example_2_1(g).unwrap());
            let u2 = &u * &u;
            let b = &(&one - &rho) * &(&(&one - &u.scale(2.0 * g)) + &u2.scale(g * g));
            let d = &rho * &(&(&one + &u.scale(2.0 * g)) + &u2.scale(g * g));
            let h2 = &h * &h;
            let f = &h.scale(-2.0) * &(&Polynomial::constant(1.0 - 2.0 * g) + &h2.scale(4.0 * g * g));
            let v = &h2.scale(1.0 - 2.0 * g) + &(&h2 * &h2).scale(2.0 * g * g);
            assert!(p.b.max_coeff_diff(&b) < 1e-12, "B at g = {g}");
            assert!(p.d.max_coeff_diff(&d) < 1e-12, "D at g = {g}");
            assert!(p.f.max_coeff_diff(&f) < 1e-12, "F at g = {g}");
            assert!(p.v.max_coeff_diff(&v) < 1e-12, "V at g = {g}");
        }
    }

    #[test]
    fn crafted_non_attractive_table() {
        // occupied centre: c(0,1,0) < c(1,1,1) breaks c(eta) <= c(xi)
        let mut t = vec![1.0; 8];
        t[0b010] = 0.5;
        t[0b111] = 1.5;
        assert!(!is_attractive(&LocalRate::new(1, t).unwrap()));
        assert!(is_attractive(&LocalRate::constant(2.0).unwrap()));
    }
}
