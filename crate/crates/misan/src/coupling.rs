//! Increasing Markovian couplings of two marginal processes.
//!
//! Given the batch rates of two pairs of sites, the coupling rate
//! `G^{k;l}` moves `k` units in the first marginal and `l` in the second,
//! simultaneously. The table is built three independent ways that must
//! agree entry-by-entry:
//!
//! * a closed formula in terms of the partial sums `Sigma^k`,
//! * a staircase walk through `(k, l)` space that spends the total mass
//!   `Sigma^0 v Sigma^0` from the deepest batches downwards,
//! * the fixed point of a recursion peeling one row or column at a time.
//!
//! The same module decides attractiveness (two families of tail
//! inequalities), tracks how jumps move discrepancies between the two
//! marginals, and searches for exchanges of opposite-signed discrepancies.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Signed;

use crate::rates::{Disp, RateTable, S2epRates, ValueSet, IDENTITY_TOL};
use crate::{Error, Result};

fn tmin<T: PartialOrd>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

fn tmax<T: PartialOrd>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Batch rates of one marginal pair together with their suffix sums.
///
/// `sigma(k)` is built by suffix accumulation so that it is nonincreasing
/// in `k` even in floating point; every function in this module reads
/// `Sigma` through the same accumulation, keeping the three table
/// constructions mutually consistent to rounding.
#[derive(Clone, Debug)]
pub struct MarginalRates<T> {
    gamma: Vec<T>,
    sigma: Vec<T>,
}

impl<T: Signed + PartialOrd + Clone> MarginalRates<T> {
    /// `rates[k]` is the rate of a `k`-unit batch; index 0 is forced to zero.
    pub fn new(mut rates: Vec<T>) -> Self {
        if rates.is_empty() {
            rates.push(T::zero());
        }
        rates[0] = T::zero();
        let n = rates.len();
        let mut sigma = vec![T::zero(); n];
        for k in (0..n - 1).rev() {
            sigma[k] = rates[k + 1].clone() + sigma[k + 1].clone();
        }
        MarginalRates { gamma: rates, sigma }
    }

    pub fn gamma_at(&self, k: u32) -> T {
        self.gamma.get(k as usize).cloned().unwrap_or_else(T::zero)
    }

    /// `Sigma^k = sum of gamma over batches strictly larger than k`.
    pub fn sigma_at(&self, k: u32) -> T {
        self.sigma.get(k as usize).cloned().unwrap_or_else(T::zero)
    }

    /// Largest index carrying a rate (0 for an all-zero vector).
    pub fn kmax(&self) -> u32 {
        (self.gamma.len() - 1) as u32
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_at(0) <= T::zero()
    }
}

/// Closed-form coupling rate `G^{k;l}` between the `lo` and `hi` marginals.
///
/// All subtractions are of the form `a - (a min b)`, so the result is
/// nonnegative for any nonnegative inputs.
pub fn closed_rate<T: Signed + PartialOrd + Clone>(
    lo: &MarginalRates<T>,
    hi: &MarginalRates<T>,
    k: u32,
    l: u32,
) -> T {
    if k == 0 && l == 0 {
        return T::zero();
    }
    if k > 0 && l > 0 {
        let gk = lo.gamma_at(k);
        let gl = hi.gamma_at(l);
        let sk = lo.sigma_at(k);
        let sl = hi.sigma_at(l);
        let m = tmin(sk.clone(), sl.clone());
        let left = gk.clone() - tmin(gk, sl - m.clone());
        let right = gl.clone() - tmin(gl, sk - m);
        return tmin(left, right);
    }
    if k == 0 {
        let gl = hi.gamma_at(l);
        let s0 = lo.sigma_at(0);
        let sl = hi.sigma_at(l);
        return gl.clone() - tmin(gl, s0.clone() - tmin(s0, sl));
    }
    let gk = lo.gamma_at(k);
    let s0 = hi.sigma_at(0);
    let sk = lo.sigma_at(k);
    gk.clone() - tmin(gk, s0.clone() - tmin(sk, s0))
}

/// Staircase construction: a monotone path from `(0,0)` carrying all the
/// coupling mass. Ties between the two partial sums step in `k`.
///
/// Returns the visited points in order with their rates; zero-rate interior
/// points are kept, so consecutive points always differ by one unit in
/// exactly one coordinate.
pub fn staircase_path<T: Signed + PartialOrd + Clone>(
    lo: &MarginalRates<T>,
    hi: &MarginalRates<T>,
) -> Vec<(u32, u32, T)> {
    let mut k = 0u32;
    let mut l = 0u32;
    let mut out = Vec::new();
    loop {
        let sk = lo.sigma_at(k);
        let sl = hi.sigma_at(l);
        if sk <= T::zero() && sl <= T::zero() {
            return out;
        }
        let prev = tmax(sk.clone(), sl.clone());
        if sk >= sl {
            k += 1;
        } else {
            l += 1;
        }
        let cur = tmax(lo.sigma_at(k), hi.sigma_at(l));
        out.push((k, l, prev - cur));
    }
}

/// Largest absolute defect of `entries` against the peeling recursion
///
/// ```text
/// G^{k;l} = (Gamma^k_lo - sum_{l'>l} G^{k;l'}) min (Gamma^l_hi - sum_{k'>k} G^{k';l})
/// ```
///
/// with the boundary rows `k = 0` and `l = 0` reading the full marginal
/// remainder. A correct table has residual zero.
pub fn recursion_residual<T: Signed + PartialOrd + Clone>(
    lo: &MarginalRates<T>,
    hi: &MarginalRates<T>,
    entries: &BTreeMap<(u32, u32), T>,
) -> T {
    let kmax = lo.kmax();
    let lmax = hi.kmax();
    let get = |k: u32, l: u32| entries.get(&(k, l)).cloned().unwrap_or_else(T::zero);
    let mut worst = T::zero();
    for k in 0..=kmax {
        for l in 0..=lmax {
            let rhs = if k == 0 && l == 0 {
                T::zero()
            } else if k > 0 && l > 0 {
                let mut row = T::zero();
                for ll in l + 1..=lmax {
                    row = row + get(k, ll);
                }
                let mut col = T::zero();
                for kk in k + 1..=kmax {
                    col = col + get(kk, l);
                }
                tmin(lo.gamma_at(k) - row, hi.gamma_at(l) - col)
            } else if k == 0 {
                let mut col = T::zero();
                for kk in 1..=kmax {
                    col = col + get(kk, l);
                }
                hi.gamma_at(l) - col
            } else {
                let mut row = T::zero();
                for ll in 1..=lmax {
                    row = row + get(k, ll);
                }
                lo.gamma_at(k) - row
            };
            worst = tmax(worst, (get(k, l) - rhs).abs());
        }
    }
    worst
}

/// Largest absolute defect of the row and column sums of `entries` against
/// the two marginal rate vectors.
pub fn marginal_residual<T: Signed + PartialOrd + Clone>(
    lo: &MarginalRates<T>,
    hi: &MarginalRates<T>,
    entries: &BTreeMap<(u32, u32), T>,
) -> T {
    let kmax = lo.kmax();
    let lmax = hi.kmax();
    let get = |k: u32, l: u32| entries.get(&(k, l)).cloned().unwrap_or_else(T::zero);
    let mut worst = T::zero();
    for k in 1..=kmax {
        let mut row = T::zero();
        for l in 0..=lmax {
            row = row + get(k, l);
        }
        worst = tmax(worst, (row - lo.gamma_at(k)).abs());
    }
    for l in 1..=lmax {
        let mut col = T::zero();
        for k in 0..=kmax {
            col = col + get(k, l);
        }
        worst = tmax(worst, (col - hi.gamma_at(l)).abs());
    }
    worst
}

/// Exact-arithmetic view of a floating rate vector. Every finite `f64`
/// converts to a rational without loss, so identities that hold exactly for
/// the rationals certify the floating construction up to rounding only.
pub fn exact_marginals(rates: &[f64]) -> MarginalRates<BigRational> {
    let v = rates
        .iter()
        .map(|&r| BigRational::from_float(r).expect("finite rate"))
        .collect();
    MarginalRates::new(v)
}

// ---------------------------------------------------------------------------
// Table-level interface
// ---------------------------------------------------------------------------

/// The two site-value pairs being coupled: `(alpha, beta)` in the first
/// marginal and `(gamma, delta)` in the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quad {
    pub alpha: i64,
    pub beta: i64,
    pub gamma: i64,
    pub delta: i64,
}

impl Quad {
    pub fn new(alpha: i64, beta: i64, gamma: i64, delta: i64) -> Self {
        Quad { alpha, beta, gamma, delta }
    }

    /// Componentwise `(alpha, beta) <= (gamma, delta)`.
    pub fn le(&self) -> bool {
        self.alpha <= self.gamma && self.beta <= self.delta
    }

    pub fn ge(&self) -> bool {
        self.alpha >= self.gamma && self.beta >= self.delta
    }

    /// Ordered pairs carry no discrepancies of opposite sign.
    pub fn is_ordered(&self) -> bool {
        self.le() || self.ge()
    }

    fn validate(&self, x: ValueSet) -> Result<()> {
        for v in [self.alpha, self.beta, self.gamma, self.delta] {
            if !x.contains(v) {
                return Err(Error::ValueOutsideX { value: v, set: x });
            }
        }
        Ok(())
    }
}

pub(crate) fn marginals_for(table: &RateTable, a: i64, b: i64, z: Disp) -> MarginalRates<f64> {
    MarginalRates::new(table.rate_vec(a, b, z))
}

/// `Sigma^k`: total rate of batches strictly larger than `k` for the pair
/// `(a, b)` across `z`.
pub fn partial_sum(table: &RateTable, a: i64, b: i64, k: u32, z: Disp) -> Result<f64> {
    Quad::new(a, b, a, b).validate(table.value_set())?;
    Ok(marginals_for(table, a, b, z).sigma_at(k))
}

/// Closed-form coupling rate for one `(k, l)` cell.
pub fn coupling_rate_closed(table: &RateTable, quad: Quad, k: u32, l: u32, z: Disp) -> Result<f64> {
    quad.validate(table.value_set())?;
    let lo = marginals_for(table, quad.alpha, quad.beta, z);
    let hi = marginals_for(table, quad.gamma, quad.delta, z);
    Ok(closed_rate(&lo, &hi, k, l))
}

/// Monotone path of coupled batch sizes with the rate spent at each point.
#[derive(Clone, Debug, PartialEq)]
pub struct StaircasePath {
    pub points: Vec<(u32, u32)>,
    pub rates: Vec<f64>,
}

impl StaircasePath {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

pub fn staircase(table: &RateTable, quad: Quad, z: Disp) -> Result<StaircasePath> {
    quad.validate(table.value_set())?;
    let lo = marginals_for(table, quad.alpha, quad.beta, z);
    let hi = marginals_for(table, quad.gamma, quad.delta, z);
    let walk = staircase_path(&lo, &hi);
    let mut points = Vec::with_capacity(walk.len());
    let mut rates = Vec::with_capacity(walk.len());
    for (k, l, r) in walk {
        points.push((k, l));
        rates.push(r);
    }
    Ok(StaircasePath { points, rates })
}

/// Full coupling table of one quadruple across one displacement.
#[derive(Clone, Debug)]
pub struct CouplingTable {
    pub quad: Quad,
    pub z: Disp,
    /// Nonzero entries only, keyed `(k, l)`.
    pub entries: BTreeMap<(u32, u32), f64>,
}

impl CouplingTable {
    pub fn build(table: &RateTable, quad: Quad, z: Disp) -> Result<Self> {
        quad.validate(table.value_set())?;
        let lo = marginals_for(table, quad.alpha, quad.beta, z);
        let hi = marginals_for(table, quad.gamma, quad.delta, z);
        let mut entries = BTreeMap::new();
        for k in 0..=lo.kmax() {
            for l in 0..=hi.kmax() {
                let v = closed_rate(&lo, &hi, k, l);
                if v != 0.0 {
                    entries.insert((k, l), v);
                }
            }
        }
        Ok(CouplingTable { quad, z, entries })
    }

    pub fn rate(&self, k: u32, l: u32) -> f64 {
        self.entries.get(&(k, l)).copied().unwrap_or(0.0)
    }
}

/// Checks that the closed-form table is a fixed point of the peeling
/// recursion, within the library identity tolerance.
pub fn verify_recursion(table: &RateTable, quad: Quad, z: Disp) -> Result<bool> {
    let built = CouplingTable::build(table, quad, z)?;
    let lo = marginals_for(table, quad.alpha, quad.beta, z);
    let hi = marginals_for(table, quad.gamma, quad.delta, z);
    Ok(recursion_residual(&lo, &hi, &built.entries) <= IDENTITY_TOL)
}

// ---------------------------------------------------------------------------
// Attractiveness
// ---------------------------------------------------------------------------

/// Which of the two tail-inequality families failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationSide {
    /// The lower pair out-jumps the higher pair in deep batches:
    /// `Sigma_lo(delta - beta + level) > Sigma_hi(level)`.
    Upward,
    /// The higher pair's tail shifted by `gamma - alpha` exceeds the lower
    /// pair's: `Sigma_lo(level) < Sigma_hi(gamma - alpha + level)`.
    Downward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrderViolation {
    pub quad: Quad,
    pub level: u32,
    pub side: ViolationSide,
    pub z: Disp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Attractiveness {
    Attractive,
    Violation(OrderViolation),
}

pub(crate) fn window_values(x: ValueSet, window: i64) -> Vec<i64> {
    match x.bounds() {
        Some((lo, hi)) => (lo..=hi).collect(),
        None => (0..=window.max(0)).collect(),
    }
}

/// Scans every componentwise-ordered quadruple in the value window and both
/// tail-inequality families; the first failure is reported with its level.
/// `window` caps the scanned values for unbounded value sets and is ignored
/// for finite ones.
pub fn check_attractive(table: &RateTable, window: i64) -> Result<Attractiveness> {
    let values = window_values(table.value_set(), window);
    for &z in table.displacements() {
        for &a in &values {
            for &b in &values {
                let lo = marginals_for(table, a, b, z);
                for &c in &values {
                    if c < a {
                        continue;
                    }
                    for &d in &values {
                        if d < b {
                            continue;
                        }
                        let hi = marginals_for(table, c, d, z);
                        // beyond this level both sides of each inequality vanish
                        let levels =
                            lo.kmax().max(hi.kmax()) + ((d - b).max(c - a).max(0) as u32) + 1;
                        let quad = Quad::new(a, b, c, d);
                        for l in 0..=levels {
                            let shifted = l + (d - b) as u32;
                            if lo.sigma_at(shifted) > hi.sigma_at(l) + IDENTITY_TOL {
                                return Ok(Attractiveness::Violation(OrderViolation {
                                    quad,
                                    level: l,
                                    side: ViolationSide::Upward,
                                    z,
                                }));
                            }
                        }
                        for k in 0..=levels {
                            let shifted = k + (c - a) as u32;
                            if lo.sigma_at(k) + IDENTITY_TOL < hi.sigma_at(shifted) {
                                return Ok(Attractiveness::Violation(OrderViolation {
                                    quad,
                                    level: k,
                                    side: ViolationSide::Downward,
                                    z,
                                }));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Attractiveness::Attractive)
}

/// Direct evaluation of the three chained inequalities characterising
/// attractiveness of the two-species model; must agree with
/// [`check_attractive`] on every ten-rate vector.
pub fn s2ep_attractive_direct(r: &S2epRates) -> bool {
    for zi in 0..2 {
        let a = r.g1_0m1[zi];
        let b = r.g2_1m1[zi];
        let c = r.g1_1m1[zi];
        let d = r.g1_00[zi];
        let e = r.g1_10[zi];
        if !(b.max(d) <= a.min(e) && a.max(e) <= c + b) {
            return false;
        }
    }
    true
}

/// Draw a ten-rate vector that satisfies the chained inequalities by
/// construction: per direction, the middle pair dominates the outer pair
/// `{b, d}` and the long jump `c` absorbs whatever `max(a, e) - b` leaves.
pub fn random_attractive_rates(rng: &mut crate::simulate::SplitMix64) -> S2epRates {
    let mut g1_0m1 = [0.0; 2];
    let mut g2_1m1 = [0.0; 2];
    let mut g1_1m1 = [0.0; 2];
    let mut g1_00 = [0.0; 2];
    let mut g1_10 = [0.0; 2];
    for zi in 0..2 {
        let b = 0.05 + 0.95 * rng.next_f64();
        let d = 0.05 + 0.95 * rng.next_f64();
        let m = b.max(d);
        let a = m + rng.next_f64();
        let e = m + rng.next_f64();
        let c = a.max(e) - b + rng.next_f64();
        g1_0m1[zi] = a;
        g2_1m1[zi] = b;
        g1_1m1[zi] = c;
        g1_00[zi] = d;
        g1_10[zi] = e;
    }
    S2epRates { g1_0m1, g2_1m1, g1_1m1, g1_00, g1_10 }
}

// ---------------------------------------------------------------------------
// Discrepancy bookkeeping
// ---------------------------------------------------------------------------

fn pos(v: i64) -> i64 {
    v.max(0)
}

/// Change of the positive discrepancy count
/// `f = [alpha - gamma]+ + [beta - delta]+` when the first marginal moves
/// `k` units and the second moves `l`. The negative count changes by the
/// same amount, so the total discrepancy change is `2 * delta`.
pub fn delta(x: ValueSet, quad: Quad, k: u32, l: u32) -> Result<i64> {
    let (k, l) = (k as i64, l as i64);
    let after = [quad.alpha - k, quad.beta + k, quad.gamma - l, quad.delta + l];
    for v in after {
        if !x.contains(v) {
            return Err(Error::ValueOutsideX { value: v, set: x });
        }
    }
    let before = pos(quad.alpha - quad.gamma) + pos(quad.beta - quad.delta);
    let now = pos(after[0] - after[2]) + pos(after[1] - after[3]);
    Ok(now - before)
}

/// The window of increments a nonzero coupling rate may occupy:
/// `-[alpha-gamma]+ - [delta-beta]+ <= l - k <= [gamma-alpha]+ + [beta-delta]+`.
pub fn increment_window_ok(quad: Quad, k: u32, l: u32) -> bool {
    let d = l as i64 - k as i64;
    -pos(quad.alpha - quad.gamma) - pos(quad.delta - quad.beta) <= d
        && d <= pos(quad.gamma - quad.alpha) + pos(quad.beta - quad.delta)
}

/// Whether the move `(k, l)` on `quad` swaps a pair of opposite-signed
/// discrepancies past each other.
pub fn is_exchange(quad: Quad, k: u32, l: u32) -> bool {
    let da = quad.alpha - quad.gamma;
    let db = quad.beta - quad.delta;
    da * db < 0 && (k as i64 - l as i64).abs() > da.abs().max(db.abs())
}

/// How one coupled move acts on the discrepancy count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaClass {
    /// Ordered quadruple: the count is zero before and after.
    OrderedZero,
    /// Opposite-signed discrepancies move without net loss (parallel move
    /// or a total exchange).
    ExchangeZero,
    /// The move annihilates at least one discrepancy pair.
    StrictDecrease,
    /// Outside the allowed increment window, increases the count, or leaves
    /// the value set; never produced by a correctly built table.
    Flagged,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifiedEntry {
    pub k: u32,
    pub l: u32,
    pub rate: f64,
    pub class: DeltaClass,
}

/// Classifies arbitrary `(k, l, rate)` entries against `quad`; entries a
/// correct coupling could not produce come back [`DeltaClass::Flagged`].
pub fn classify_entries(
    x: ValueSet,
    quad: Quad,
    entries: &[(u32, u32, f64)],
) -> Vec<ClassifiedEntry> {
    entries
        .iter()
        .map(|&(k, l, rate)| {
            let class = match delta(x, quad, k, l) {
                Err(_) => DeltaClass::Flagged,
                Ok(_) if !increment_window_ok(quad, k, l) => DeltaClass::Flagged,
                Ok(d) if d > 0 => DeltaClass::Flagged,
                Ok(0) if quad.is_ordered() => DeltaClass::OrderedZero,
                Ok(0) => DeltaClass::ExchangeZero,
                Ok(_) => DeltaClass::StrictDecrease,
            };
            ClassifiedEntry { k, l, rate, class }
        })
        .collect()
}

/// Builds the coupling table of `quad` and classifies every nonzero entry.
pub fn classify_delta(table: &RateTable, quad: Quad, z: Disp) -> Result<Vec<ClassifiedEntry>> {
    let built = CouplingTable::build(table, quad, z)?;
    let entries: Vec<(u32, u32, f64)> = built
        .entries
        .iter()
        .filter(|&(_, &v)| v > IDENTITY_TOL)
        .map(|(&(k, l), &v)| (k, l, v))
        .collect();
    Ok(classify_entries(table.value_set(), quad, &entries))
}

// ---------------------------------------------------------------------------
// Exchange detection
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExchangeWitness {
    pub quad: Quad,
    pub k: u32,
    pub l: u32,
    pub z: Disp,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExchangeScan {
    None,
    Witness(ExchangeWitness),
}

/// Exhaustively scans the coupling tables of all quadruples in the value
/// window for a nonzero rate exchanging opposite-signed discrepancies.
pub fn detect_exchanges(table: &RateTable, window: i64) -> Result<ExchangeScan> {
    let values = window_values(table.value_set(), window);
    for &z in table.displacements() {
        for &a in &values {
            for &b in &values {
                for &c in &values {
                    for &d in &values {
                        let quad = Quad::new(a, b, c, d);
                        if (a - c) * (b - d) >= 0 {
                            continue;
                        }
                        let built = CouplingTable::build(table, quad, z)?;
                        for (&(k, l), &rate) in &built.entries {
                            if rate > IDENTITY_TOL && is_exchange(quad, k, l) {
                                return Ok(ExchangeScan::Witness(ExchangeWitness {
                                    quad,
                                    k,
                                    l,
                                    z,
                                    rate,
                                }));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ExchangeScan::None)
}

/// Sufficient partial-sum inequalities implying the coupling never
/// exchanges discrepancies:
///
/// ```text
/// Sigma_hi(l) >= Sigma_lo(l + [alpha-gamma]+ v [delta-beta]+)   for all l
/// Sigma_lo(k) >= Sigma_hi(k + [gamma-alpha]+ v [beta-delta]+)   for all k
/// ```
///
/// On ordered quadruples these reduce exactly to the attractiveness
/// inequalities; off order they are stronger. True implies
/// [`detect_exchanges`] reports none.
pub fn check_no_exchange_sufficient(table: &RateTable, window: i64) -> Result<bool> {
    let values = window_values(table.value_set(), window);
    for &z in table.displacements() {
        for &a in &values {
            for &b in &values {
                let lo = marginals_for(table, a, b, z);
                for &c in &values {
                    for &d in &values {
                        let hi = marginals_for(table, c, d, z);
                        let shift_l = pos(a - c).max(pos(d - b)) as u32;
                        let shift_k = pos(c - a).max(pos(b - d)) as u32;
                        let levels = lo.kmax().max(hi.kmax()) + shift_l.max(shift_k) + 1;
                        for l in 0..=levels {
                            if hi.sigma_at(l) + IDENTITY_TOL < lo.sigma_at(l + shift_l) {
                                return Ok(false);
                            }
                        }
                        for k in 0..=levels {
                            if lo.sigma_at(k) + IDENTITY_TOL < hi.sigma_at(k + shift_k) {
                                return Ok(false);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Two-species reference table
// ---------------------------------------------------------------------------

/// Hand-derived nonzero coupling rates of the two-species exclusion model
/// under the attractiveness conditions, keyed
/// `((alpha, beta), (k, l), (gamma, delta))` for a single displacement with
/// rates `a1 = G1(0,-1)`, `b2 = G2(1,-1)`, `c1 = G1(1,-1)`, `d1 = G1(0,0)`,
/// `e1 = G1(1,0)`.
///
/// This is an independent regression target for the generic construction;
/// the attractiveness conditions guarantee every listed expression is
/// nonnegative.
pub fn s2ep_reference_entries<T: Signed + PartialOrd + Clone>(
    a1: T,
    b2: T,
    c1: T,
    d1: T,
    e1: T,
) -> BTreeMap<((i64, i64), (u32, u32), (i64, i64)), T> {
    let p = |v: T| tmax(v, T::zero());
    let mut t = BTreeMap::new();
    let mut put = |xi: (i64, i64), kl: (u32, u32), zp: (i64, i64), v: T| {
        t.insert((xi, kl, zp), v);
    };
    // rows whose first pair cannot jump: each entry is the second marginal
    let passive: [((i64, i64), (u32, u32), T); 5] = [
        ((0, -1), (0, 1), a1.clone()),
        ((0, 0), (0, 1), d1.clone()),
        ((1, -1), (0, 1), c1.clone()),
        ((1, 0), (0, 1), e1.clone()),
        ((1, -1), (0, 2), b2.clone()),
    ];
    for xi in [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)] {
        for (zp, kl, v) in passive.clone() {
            put(xi, kl, zp, v);
        }
    }
    let (a, b, c, d, e) = (a1, b2, c1, d1, e1);
    // first pair (0,-1)
    put((0, -1), (0, 1), (1, -1), c.clone() + b.clone() - a.clone());
    put((0, -1), (0, 1), (1, 0), p(e.clone() - a.clone()));
    put((0, -1), (1, 0), (-1, -1), a.clone());
    put((0, -1), (1, 0), (-1, 0), a.clone());
    put((0, -1), (1, 0), (-1, 1), a.clone());
    put((0, -1), (1, 0), (0, 0), a.clone() - d.clone());
    put((0, -1), (1, 0), (0, 1), a.clone());
    put((0, -1), (1, 0), (1, 0), p(a.clone() - e.clone()));
    put((0, -1), (1, 0), (1, 1), a.clone());
    put((0, -1), (1, 1), (0, -1), a.clone());
    put((0, -1), (1, 1), (0, 0), d.clone());
    put((0, -1), (1, 1), (1, -1), a.clone() - b.clone());
    put((0, -1), (1, 1), (1, 0), tmin(e.clone(), a.clone()));
    put((0, -1), (1, 2), (1, -1), b.clone());
    // first pair (0,0)
    put((0, 0), (0, 1), (0, -1), a.clone() - d.clone());
    put((0, 0), (0, 1), (1, -1), c.clone() - p(d.clone() - b.clone()));
    put((0, 0), (0, 1), (1, 0), e.clone() - d.clone());
    put((0, 0), (0, 2), (1, -1), p(b.clone() - d.clone()));
    for zp in [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)] {
        put((0, 0), (1, 0), zp, d.clone());
    }
    put((0, 0), (1, 1), (0, -1), d.clone());
    put((0, 0), (1, 1), (0, 0), d.clone());
    put((0, 0), (1, 1), (1, -1), p(d.clone() - b.clone()));
    put((0, 0), (1, 1), (1, 0), d.clone());
    put((0, 0), (1, 2), (1, -1), tmin(d.clone(), b.clone()));
    // first pair (1,-1)
    put((1, -1), (1, 0), (-1, -1), c.clone());
    put((1, -1), (1, 0), (-1, 0), c.clone());
    put((1, -1), (1, 0), (0, -1), c.clone() + b.clone() - a.clone());
    put((1, -1), (1, 0), (-1, 1), c.clone());
    put((1, -1), (1, 0), (0, 0), c.clone() - p(d.clone() - b.clone()));
    put((1, -1), (1, 0), (0, 1), c.clone());
    put((1, -1), (1, 0), (1, 0), c.clone() + b.clone() - e.clone());
    put((1, -1), (1, 0), (1, 1), c.clone());
    put((1, -1), (1, 1), (0, -1), a.clone() - b.clone());
    put((1, -1), (1, 1), (0, 0), p(d.clone() - b.clone()));
    put((1, -1), (1, 1), (1, -1), c.clone());
    put((1, -1), (1, 1), (1, 0), e.clone() - b.clone());
    put((1, -1), (2, 0), (-1, -1), b.clone());
    put((1, -1), (2, 0), (-1, 0), b.clone());
    put((1, -1), (2, 0), (-1, 1), b.clone());
    put((1, -1), (2, 0), (0, 0), p(b.clone() - d.clone()));
    put((1, -1), (2, 0), (0, 1), b.clone());
    put((1, -1), (2, 0), (1, 1), b.clone());
    put((1, -1), (2, 1), (0, -1), b.clone());
    put((1, -1), (2, 1), (0, 0), tmin(b.clone(), d.clone()));
    put((1, -1), (2, 1), (1, 0), b.clone());
    put((1, -1), (2, 2), (1, -1), b.clone());
    // first pair (1,0)
    put((1, 0), (0, 1), (0, -1), p(a.clone() - e.clone()));
    put((1, 0), (0, 1), (1, -1), c.clone() + b.clone() - e.clone());
    put((1, 0), (1, 0), (-1, -1), e.clone());
    put((1, 0), (1, 0), (-1, 0), e.clone());
    put((1, 0), (1, 0), (0, -1), p(e.clone() - a.clone()));
    put((1, 0), (1, 0), (-1, 1), e.clone());
    put((1, 0), (1, 0), (0, 0), e.clone() - d.clone());
    put((1, 0), (1, 0), (0, 1), e.clone());
    put((1, 0), (1, 0), (1, 1), e.clone());
    put((1, 0), (1, 1), (0, -1), tmin(e.clone(), a.clone()));
    put((1, 0), (1, 1), (0, 0), d.clone());
    put((1, 0), (1, 1), (1, -1), e.clone() - b.clone());
    put((1, 0), (1, 1), (1, 0), e.clone());
    put((1, 0), (1, 2), (1, -1), b);
    t
}

/// All nine ordered site-value pairs of the two-species model.
pub const S2EP_PAIRS: [(i64, i64); 9] = [
    (-1, -1),
    (-1, 0),
    (0, -1),
    (-1, 1),
    (0, 0),
    (1, -1),
    (0, 1),
    (1, 0),
    (1, 1),
];
