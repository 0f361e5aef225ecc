//! Rate tables for conservative misanthrope-type dynamics.
//!
//! A table stores the marginal jump rates `gamma[k](a, b, z)`: the rate at
//! which `k` units leave a site holding `a` and land on a neighbour at
//! displacement `z` holding `b`. Conservation forces `gamma = 0` whenever
//! `a - k` or `b + k` leaves the value set, or `k = 0`; every stored family
//! has finitely many active `k` per pair, so all partial sums are finite.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Deserialize;

use crate::{Error, Result};

/// Lattice displacement, dimension 1 or 2. One-dimensional offsets use
/// `[z, 0]`.
pub type Disp = [i32; 2];

/// Nearest-neighbour displacements of the one-dimensional models.
pub const RIGHT: Disp = [1, 0];
pub const LEFT: Disp = [-1, 0];

/// Identity tolerance shared by every floating-point rate check in the
/// library (product condition, gradient condition, coupling identities).
pub const IDENTITY_TOL: f64 = 1e-12;

/// The set `X` of admissible site values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueSet {
    Interval { lo: i64, hi: i64 },
    Naturals,
}

impl ValueSet {
    pub fn contains(&self, v: i64) -> bool {
        match *self {
            ValueSet::Interval { lo, hi } => lo <= v && v <= hi,
            ValueSet::Naturals => v >= 0,
        }
    }

    /// Inclusive bounds when the set is finite.
    pub fn bounds(&self) -> Option<(i64, i64)> {
        match *self {
            ValueSet::Interval { lo, hi } => Some((lo, hi)),
            ValueSet::Naturals => None,
        }
    }
}

/// The ten rates of the two-species exclusion model. Index 0 holds the value
/// at displacement `+1`, index 1 the value at `-1`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct S2epRates {
    /// one unit, pair (0,-1)
    pub g1_0m1: [f64; 2],
    /// two units, pair (1,-1)
    pub g2_1m1: [f64; 2],
    /// one unit, pair (1,-1)
    pub g1_1m1: [f64; 2],
    /// one unit, pair (0,0)
    pub g1_00: [f64; 2],
    /// one unit, pair (1,0)
    pub g1_10: [f64; 2],
}

impl S2epRates {
    fn all(&self) -> [f64; 10] {
        [
            self.g1_0m1[0],
            self.g1_0m1[1],
            self.g2_1m1[0],
            self.g2_1m1[1],
            self.g1_1m1[0],
            self.g1_1m1[1],
            self.g1_00[0],
            self.g1_00[1],
            self.g1_10[0],
            self.g1_10[1],
        ]
    }

    /// Degenerate tables have either no (1,-1) activity or no (0,0)
    /// activity; several classification results assume both are present.
    pub fn is_degenerate(&self) -> bool {
        !(self.g1_1m1[0] + self.g1_1m1[1] > 0.0 && self.g1_00[0] + self.g1_00[1] > 0.0)
    }
}

fn z_index(z: Disp) -> Option<usize> {
    match z {
        [1, 0] => Some(0),
        [-1, 0] => Some(1),
        _ => None,
    }
}

type Fn1 = Arc<dyn Fn(i64) -> f64 + Send + Sync>;
type Fn2 = Arc<dyn Fn(i64, i64) -> f64 + Send + Sync>;

pub(crate) enum Kind {
    Sep { p: BTreeMap<Disp, f64> },
    Zrp { p: BTreeMap<Disp, f64>, g: Fn1 },
    Mp { p: BTreeMap<Disp, f64>, b: Fn2 },
    Stp { p1: f64, pm1: f64 },
    S2ep(S2epRates),
}

/// Immutable marginal-rate table; safe to share across threads.
pub struct RateTable {
    x: ValueSet,
    disps: Vec<Disp>,
    pub(crate) kind: Kind,
    degenerate: bool,
}

impl fmt::Debug for RateTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateTable")
            .field("x", &self.x)
            .field("disps", &self.disps)
            .field("family", &self.family_name())
            .finish()
    }
}

impl RateTable {
    pub fn value_set(&self) -> ValueSet {
        self.x
    }

    pub fn displacements(&self) -> &[Disp] {
        &self.disps
    }

    pub fn family_name(&self) -> &'static str {
        match self.kind {
            Kind::Sep { .. } => "sep",
            Kind::Zrp { .. } => "zrp",
            Kind::Mp { .. } => "mp",
            Kind::Stp { .. } => "stp",
            Kind::S2ep(_) => "s2ep",
        }
    }

    /// Whether the table was flagged degenerate at build time (two-species
    /// tables missing required activity). Never an error: checks still run.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn s2ep_rates(&self) -> Option<&S2epRates> {
        match &self.kind {
            Kind::S2ep(r) => Some(r),
            _ => None,
        }
    }

    /// Marginal rate for `k` units hopping from a site at `a` onto a site at
    /// `b` across displacement `z`. Zero for `k = 0`, for undeclared `z`, and
    /// whenever conservation would leave the value set.
    pub fn gamma(&self, a: i64, b: i64, k: u32, z: Disp) -> Result<f64> {
        for v in [a, b] {
            if !self.x.contains(v) {
                return Err(Error::ValueOutsideX { value: v, set: self.x });
            }
        }
        Ok(self.gamma_unchecked(a, b, k, z))
    }

    /// As [`gamma`](Self::gamma) but without the membership check; used by
    /// scans that already iterate over the value set.
    pub fn gamma_unchecked(&self, a: i64, b: i64, k: u32, z: Disp) -> f64 {
        if k == 0 || !self.x.contains(a - i64::from(k)) || !self.x.contains(b + i64::from(k)) {
            return 0.0;
        }
        match &self.kind {
            Kind::Sep { p } => {
                if (a, b, k) == (1, 0, 1) {
                    p.get(&z).copied().unwrap_or(0.0)
                } else {
                    0.0
                }
            }
            Kind::Zrp { p, g } => {
                if k == 1 {
                    p.get(&z).copied().unwrap_or(0.0) * g(a)
                } else {
                    0.0
                }
            }
            Kind::Mp { p, b: bf } => {
                if k == 1 {
                    p.get(&z).copied().unwrap_or(0.0) * bf(a, b)
                } else {
                    0.0
                }
            }
            Kind::Stp { p1, pm1 } => {
                let w = match z {
                    [1, 0] => *p1,
                    [-1, 0] => *pm1,
                    _ => 0.0,
                };
                if i64::from(k) <= a {
                    w
                } else {
                    0.0
                }
            }
            Kind::S2ep(r) => {
                let Some(zi) = z_index(z) else { return 0.0 };
                match (a, b, k) {
                    (0, -1, 1) => r.g1_0m1[zi],
                    (1, -1, 2) => r.g2_1m1[zi],
                    (1, -1, 1) => r.g1_1m1[zi],
                    (0, 0, 1) => r.g1_00[zi],
                    (1, 0, 1) => r.g1_10[zi],
                    _ => 0.0,
                }
            }
        }
    }

    /// Largest `k` with a possibly nonzero rate for the pair `(a, b)`.
    pub fn kmax_for(&self, a: i64, _b: i64) -> u32 {
        match &self.kind {
            Kind::Sep { .. } | Kind::Zrp { .. } | Kind::Mp { .. } => 1,
            Kind::Stp { .. } => a.clamp(0, u32::MAX as i64) as u32,
            Kind::S2ep(_) => 2,
        }
    }

    /// Rates for all batch sizes at once: index `k` holds `gamma(a, b, k, z)`,
    /// index 0 is zero. This is the raw input of the coupling algebra.
    pub fn rate_vec(&self, a: i64, b: i64, z: Disp) -> Vec<f64> {
        let kmax = self.kmax_for(a, _b_ignore(b));
        let mut v = vec![0.0; kmax as usize + 1];
        for (k, slot) in v.iter_mut().enumerate().skip(1) {
            *slot = self.gamma_unchecked(a, b, k as u32, z);
        }
        v
    }

    /// Total jump rate out of the pair `(a, b)` across `z`.
    pub fn total_rate(&self, a: i64, b: i64, z: Disp) -> f64 {
        let kmax = self.kmax_for(a, b);
        (1..=kmax).map(|k| self.gamma_unchecked(a, b, k, z)).sum()
    }
}

// `kmax_for` ignores `b` for every built-in family; the named helper keeps
// that visible at the call site.
fn _b_ignore(b: i64) -> i64 {
    b
}

fn validate_kernel(p: &[(Disp, f64)]) -> Result<BTreeMap<Disp, f64>> {
    let mut map = BTreeMap::new();
    for &(z, w) in p {
        if z == [0, 0] {
            return Err(Error::InvalidInput("kernel displacement must be nonzero".into()));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidInput(format!(
                "kernel weight {w} at displacement {z:?} must be finite and nonnegative"
            )));
        }
        if w > 0.0 && map.insert(z, w).is_some() {
            return Err(Error::InvalidInput(format!("duplicate kernel displacement {z:?}")));
        }
    }
    Ok(map)
}

/// Single-particle exclusion: values in `{0, 1}`, one unit hops from an
/// occupied site to an empty one at rate `p(z)`.
pub fn build_sep(p: &[(Disp, f64)]) -> Result<RateTable> {
    let p = validate_kernel(p)?;
    let disps: Vec<Disp> = p.keys().copied().collect();
    Ok(RateTable {
        x: ValueSet::Interval { lo: 0, hi: 1 },
        disps,
        kind: Kind::Sep { p },
        degenerate: false,
    })
}

/// Zero-range dynamics: one unit leaves a site holding `a` at rate
/// `p(z) g(a)`, regardless of the destination value. Requires `g(0) = 0`.
pub fn build_zrp(
    p: &[(Disp, f64)],
    g: impl Fn(i64) -> f64 + Send + Sync + 'static,
) -> Result<RateTable> {
    let p = validate_kernel(p)?;
    if g(0) != 0.0 {
        return Err(Error::InvalidInput("zero-range g(0) must be 0".into()));
    }
    for a in 1..=64 {
        let v = g(a);
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("g({a}) = {v} must be finite and nonnegative")));
        }
    }
    let disps: Vec<Disp> = p.keys().copied().collect();
    Ok(RateTable {
        x: ValueSet::Naturals,
        disps,
        kind: Kind::Zrp { p, g: Arc::new(g) },
        degenerate: false,
    })
}

/// Misanthrope dynamics: one unit hops at rate `p(z) b(a, b)` depending on
/// both endpoint values. Requires `b(0, .) = 0`.
pub fn build_mp(
    p: &[(Disp, f64)],
    b: impl Fn(i64, i64) -> f64 + Send + Sync + 'static,
) -> Result<RateTable> {
    let p = validate_kernel(p)?;
    for beta in 0..=16 {
        if b(0, beta) != 0.0 {
            return Err(Error::InvalidInput("misanthrope b(0, .) must vanish".into()));
        }
    }
    for a in 0..=16 {
        for beta in 0..=16 {
            let v = b(a, beta);
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "b({a}, {beta}) = {v} must be finite and nonnegative"
                )));
            }
        }
    }
    let disps: Vec<Disp> = p.keys().copied().collect();
    Ok(RateTable {
        x: ValueSet::Naturals,
        disps,
        kind: Kind::Mp { p, b: Arc::new(b) },
        degenerate: false,
    })
}

/// Stick dynamics: any batch of `k <= a` units hops one step, at rate `p1`
/// to the right and `pm1` to the left. The two weights must sum to 1.
pub fn build_stp(p1: f64, pm1: f64) -> Result<RateTable> {
    if !(p1 >= 0.0) || !(pm1 >= 0.0) {
        return Err(Error::InvalidInput("stick weights must be nonnegative".into()));
    }
    if (p1 + pm1 - 1.0).abs() > IDENTITY_TOL {
        return Err(Error::InvalidInput(format!(
            "stick weights must sum to 1, got {p1} + {pm1}"
        )));
    }
    let mut disps = Vec::new();
    if p1 > 0.0 {
        disps.push(RIGHT);
    }
    if pm1 > 0.0 {
        disps.push(LEFT);
    }
    Ok(RateTable {
        x: ValueSet::Naturals,
        disps,
        kind: Kind::Stp { p1, pm1 },
        degenerate: false,
    })
}

/// Two-species exclusion: values in `{-1, 0, 1}`, nearest neighbour, one or
/// two units per jump (two only from the pair `(1, -1)`).
pub fn build_s2ep(r: S2epRates) -> Result<RateTable> {
    for v in r.all() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "two-species rate {v} must be finite and nonnegative"
            )));
        }
    }
    let degenerate = r.is_degenerate();
    Ok(RateTable {
        x: ValueSet::Interval { lo: -1, hi: 1 },
        disps: vec![RIGHT, LEFT],
        kind: Kind::S2ep(r),
        degenerate,
    })
}

/// Two-species rates in detailed balance with a heat bath. The parameters
/// are `a = exp(-E/2)` (field) and `b = exp(-J)` (coupling); the returned
/// scalar is `c^2 = b^2 (a^-2 + a^2) / 2`, the constant governing the shape
/// of the macroscopic flux.
pub fn build_thermal_bath(a: f64, b: f64) -> Result<(RateTable, f64)> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidInput("thermal-bath parameters must be positive".into()));
    }
    let ai = 1.0 / a;
    let v2 = (a + ai) / 2.0;
    let v0 = (a * a + ai * ai) / (a * a + ai * ai + 1.0 / (b * b));
    let c2 = b * b * (ai * ai + a * a) / 2.0;
    let r = S2epRates {
        g1_10: [a * v2, ai * v2],
        g1_0m1: [a * v2, ai * v2],
        g1_00: [a * a * v0, ai * ai * v0],
        g2_1m1: [a * a * v0, ai * ai * v0],
        g1_1m1: [v0 / (b * b), v0 / (b * b)],
    };
    Ok((build_s2ep(r)?, c2))
}

/// Verdict of the two-species product-measure condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProductCondition {
    Holds,
    Violated { residual: f64 },
}

/// Checks the algebraic condition under which the two-species model admits
/// product invariant measures. Requires some (0,0) activity.
pub fn check_s2ep_product_condition(table: &RateTable) -> Result<ProductCondition> {
    let r = table.s2ep_rates().ok_or(Error::NotTwoSpecies)?;
    let denom = r.g1_00[0] + r.g1_00[1];
    if denom <= 0.0 {
        return Err(Error::Precondition(
            "product condition needs a positive (0,0) jump rate".into(),
        ));
    }
    let lhs = (r.g1_00[1] * r.g1_1m1[0] - r.g1_00[0] * r.g1_1m1[1]) / denom;
    let mut rhs = 0.0;
    for (zi, zsign) in [(0usize, 1.0f64), (1, -1.0)] {
        rhs += zsign * (r.g2_1m1[zi] + r.g1_1m1[zi] - r.g1_10[zi] - r.g1_0m1[zi]);
    }
    let residual = lhs - rhs;
    if residual.abs() <= IDENTITY_TOL {
        Ok(ProductCondition::Holds)
    } else {
        Ok(ProductCondition::Violated { residual })
    }
}

/// Verdict of the gradient-decomposition check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GradientCondition {
    /// The microscopic current is a spatial gradient of the local observable
    /// `q(eta) = q_linear * eta(0) + q_quadratic * eta(0)^2`.
    Gradient { q_linear: f64, q_quadratic: f64 },
    NotGradient,
}

/// Tests the five rate equalities making the two-species current a discrete
/// gradient, returning the coefficients of the witness observable.
pub fn check_gradient_condition(table: &RateTable) -> Result<GradientCondition> {
    let r = table.s2ep_rates().ok_or(Error::NotTwoSpecies)?;
    let sym = [
        r.g1_00[0] - r.g1_00[1],
        r.g1_10[0] - r.g1_10[1],
        r.g1_0m1[0] - r.g1_0m1[1],
        (r.g1_1m1[0] + 2.0 * r.g2_1m1[0]) - (r.g1_1m1[1] + 2.0 * r.g2_1m1[1]),
        (r.g1_1m1[0] + 2.0 * r.g2_1m1[0]) - (r.g1_0m1[0] + r.g1_10[0]),
    ];
    if sym.iter().all(|d| d.abs() <= IDENTITY_TOL) {
        Ok(GradientCondition::Gradient {
            q_linear: -(r.g1_10[0] + r.g1_0m1[0]) / 2.0,
            q_quadratic: (r.g1_0m1[0] - r.g1_10[0]) / 2.0,
        })
    } else {
        Ok(GradientCondition::NotGradient)
    }
}

// ---------------------------------------------------------------------------
// Structured-text model configuration
// ---------------------------------------------------------------------------

/// `[model]` section of a configuration file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: Family,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Sep,
    Zrp,
    Mp,
    Stp,
    S2ep,
    ThermalBath,
}

/// One kernel entry: displacement (1 or 2 coordinates) and weight.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub z: Vec<i32>,
    pub w: f64,
}

/// `[rates]` section: the union of the per-family keys. Unknown keys are
/// rejected by the parser; keys irrelevant to the chosen family are rejected
/// when building.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub p: Option<Vec<KernelEntry>>,
    /// zero-range `g`, indexed by occupancy; extended by its last value
    pub g: Option<Vec<f64>>,
    /// misanthrope `b(a, .)` rows; clamped at the table edges
    pub b_table: Option<Vec<Vec<f64>>>,
    pub p1: Option<f64>,
    pub pm1: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub g1_0m1: Option<[f64; 2]>,
    pub g2_1m1: Option<[f64; 2]>,
    pub g1_1m1: Option<[f64; 2]>,
    pub g1_00: Option<[f64; 2]>,
    pub g1_10: Option<[f64; 2]>,
}

/// Full model file: `[model]` plus `[rates]`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub rates: RatesSection,
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<RateTable> {
        build_from_sections(&self.model, &self.rates)
    }
}

fn kernel_from_entries(entries: &[KernelEntry]) -> Result<Vec<(Disp, f64)>> {
    entries
        .iter()
        .map(|e| {
            let z: Disp = match e.z.as_slice() {
                [z] => [*z, 0],
                [zx, zy] => [*zx, *zy],
                other => {
                    return Err(Error::Config(format!(
                        "kernel displacement must have 1 or 2 coordinates, got {other:?}"
                    )))
                }
            };
            Ok((z, e.w))
        })
        .collect()
}

fn require<T: Copy>(v: Option<T>, key: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("family {family} requires `rates.{key}`")))
}

fn forbid_unused(sec: &RatesSection, family: &str, used: &[&str]) -> Result<()> {
    let present: [(&str, bool); 12] = [
        ("p", sec.p.is_some()),
        ("g", sec.g.is_some()),
        ("b_table", sec.b_table.is_some()),
        ("p1", sec.p1.is_some()),
        ("pm1", sec.pm1.is_some()),
        ("a", sec.a.is_some()),
        ("b", sec.b.is_some()),
        ("g1_0m1", sec.g1_0m1.is_some()),
        ("g2_1m1", sec.g2_1m1.is_some()),
        ("g1_1m1", sec.g1_1m1.is_some()),
        ("g1_00", sec.g1_00.is_some()),
        ("g1_10", sec.g1_10.is_some()),
    ];
    for (key, is_set) in present {
        if is_set && !used.contains(&key) {
            return Err(Error::Config(format!("key `rates.{key}` is not used by family {family}")));
        }
    }
    Ok(())
}

/// Builds a table from already-parsed config sections.
pub fn build_from_sections(model: &ModelSection, rates: &RatesSection) -> Result<RateTable> {
    match model.family {
        Family::Sep => {
            forbid_unused(rates, "sep", &["p"])?;
            let p = rates
                .p
                .as_ref()
                .ok_or_else(|| Error::Config("family sep requires `rates.p`".into()))?;
            build_sep(&kernel_from_entries(p)?)
        }
        Family::Zrp => {
            forbid_unused(rates, "zrp", &["p", "g"])?;
            let p = rates
                .p
                .as_ref()
                .ok_or_else(|| Error::Config("family zrp requires `rates.p`".into()))?;
            let g = rates
                .g
                .clone()
                .ok_or_else(|| Error::Config("family zrp requires `rates.g`".into()))?;
            if g.is_empty() {
                return Err(Error::Config("`rates.g` must not be empty".into()));
            }
            let kernel = kernel_from_entries(p)?;
            build_zrp(&kernel, move |a| {
                let i = (a.max(0) as usize).min(g.len() - 1);
                g[i]
            })
        }
        Family::Mp => {
            forbid_unused(rates, "mp", &["p", "b_table"])?;
            let p = rates
                .p
                .as_ref()
                .ok_or_else(|| Error::Config("family mp requires `rates.p`".into()))?;
            let bt = rates
                .b_table
                .clone()
                .ok_or_else(|| Error::Config("family mp requires `rates.b_table`".into()))?;
            if bt.is_empty() || bt.iter().any(|row| row.is_empty() || row.len() != bt[0].len()) {
                return Err(Error::Config("`rates.b_table` must be a nonempty rectangle".into()));
            }
            let kernel = kernel_from_entries(p)?;
            build_mp(&kernel, move |a, b| {
                let i = (a.max(0) as usize).min(bt.len() - 1);
                let j = (b.max(0) as usize).min(bt[0].len() - 1);
                bt[i][j]
            })
        }
        Family::Stp => {
            forbid_unused(rates, "stp", &["p1", "pm1"])?;
            build_stp(require(rates.p1, "p1", "stp")?, require(rates.pm1, "pm1", "stp")?)
        }
        Family::S2ep => {
            forbid_unused(
                rates,
                "s2ep",
                &["g1_0m1", "g2_1m1", "g1_1m1", "g1_00", "g1_10"],
            )?;
            build_s2ep(S2epRates {
                g1_0m1: require(rates.g1_0m1, "g1_0m1", "s2ep")?,
                g2_1m1: require(rates.g2_1m1, "g2_1m1", "s2ep")?,
                g1_1m1: require(rates.g1_1m1, "g1_1m1", "s2ep")?,
                g1_00: require(rates.g1_00, "g1_00", "s2ep")?,
                g1_10: require(rates.g1_10, "g1_10", "s2ep")?,
            })
        }
        Family::ThermalBath => {
            forbid_unused(rates, "thermal-bath", &["a", "b"])?;
            let (table, _c2) = build_thermal_bath(
                require(rates.a, "a", "thermal-bath")?,
                require(rates.b, "b", "thermal-bath")?,
            )?;
            Ok(table)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nn_kernel(p1: f64, pm1: f64) -> Vec<(Disp, f64)> {
        vec![(RIGHT, p1), (LEFT, pm1)]
    }

    #[test]
    fn sep_stores_the_single_active_slot() {
        let t = build_sep(&nn_kernel(0.7, 0.3)).unwrap();
        assert_eq!(t.gamma(1, 0, 1, RIGHT).unwrap(), 0.7);
        assert_eq!(t.gamma(1, 0, 1, LEFT).unwrap(), 0.3);
        // departure value would leave {0,1}
        assert_eq!(t.gamma(0, 1, 1, RIGHT).unwrap(), 0.0);
        // arrival value would leave {0,1}
        assert_eq!(t.gamma(1, 1, 1, RIGHT).unwrap(), 0.0);
        assert!(t.gamma(2, 0, 1, RIGHT).is_err());
    }

    #[test]
    fn stick_rates_are_flat_up_to_the_departure_value() {
        let t = build_stp(1.0, 0.0).unwrap();
        assert_eq!(t.gamma(3, 5, 2, RIGHT).unwrap(), 1.0);
        assert_eq!(t.gamma(3, 5, 4, RIGHT).unwrap(), 0.0);
        assert_eq!(t.gamma(3, 5, 2, LEFT).unwrap(), 0.0);
        assert_eq!(t.displacements(), &[RIGHT]);
        assert_eq!(t.rate_vec(3, 0, RIGHT), vec![0.0, 1.0, 1.0, 1.0]);
        assert!(build_stp(0.6, 0.3).is_err());
    }

    #[test]
    fn zero_range_requires_idle_empty_sites() {
        assert!(build_zrp(&nn_kernel(1.0, 0.0), |_| 1.0).is_err());
        let t = build_zrp(&nn_kernel(1.0, 0.0), |a| (a.min(3)) as f64).unwrap();
        assert_eq!(t.gamma(5, 9, 1, RIGHT).unwrap(), 3.0);
        assert_eq!(t.gamma(5, 9, 2, RIGHT).unwrap(), 0.0);
        let zero = build_zrp(&nn_kernel(1.0, 0.0), |_| 0.0).unwrap();
        assert_eq!(zero.total_rate(7, 0, RIGHT), 0.0);
    }

    #[test]
    fn two_species_direct_storage_and_degeneracy() {
        let mut r = S2epRates::default();
        r.g2_1m1 = [1.0, 0.0];
        let t = build_s2ep(r).unwrap();
        assert_eq!(t.gamma(1, -1, 2, RIGHT).unwrap(), 1.0);
        assert_eq!(t.gamma(1, -1, 2, LEFT).unwrap(), 0.0);
        assert!(t.degenerate());
        let zero = build_s2ep(S2epRates::default()).unwrap();
        assert!(zero.degenerate());
        assert_eq!(zero.total_rate(1, -1, RIGHT), 0.0);
    }

    #[test]
    fn thermal_bath_special_values() {
        let (t, _c2) = build_thermal_bath(1.0, 0.5).unwrap();
        let r = t.s2ep_rates().unwrap();
        assert!((r.g1_10[0] - 1.0).abs() < 1e-15);
        assert!((r.g1_10[1] - 1.0).abs() < 1e-15);
        let (_t, c2) = build_thermal_bath(1.0, 1.0).unwrap();
        assert!((c2 - 1.0).abs() < 1e-15);
        assert!(build_thermal_bath(0.0, 1.0).is_err());
    }

    #[test]
    fn product_condition_on_known_tables() {
        let (t, _) = build_thermal_bath(0.8, 0.1382).unwrap();
        assert_eq!(check_s2ep_product_condition(&t).unwrap(), ProductCondition::Holds);

        let ones = S2epRates {
            g1_0m1: [1.0, 1.0],
            g2_1m1: [1.0, 1.0],
            g1_1m1: [1.0, 1.0],
            g1_00: [1.0, 1.0],
            g1_10: [1.0, 1.0],
        };
        let t = build_s2ep(ones).unwrap();
        assert_eq!(check_s2ep_product_condition(&t).unwrap(), ProductCondition::Holds);

        let mut skew = ones;
        skew.g1_10 = [2.0, 1.0];
        let t = build_s2ep(skew).unwrap();
        match check_s2ep_product_condition(&t).unwrap() {
            ProductCondition::Violated { residual } => assert!(residual.abs() > 0.5),
            other => panic!("expected violation, got {other:?}"),
        }

        let mut degenerate = ones;
        degenerate.g1_00 = [0.0, 0.0];
        let t = build_s2ep(degenerate).unwrap();
        assert!(check_s2ep_product_condition(&t).is_err());
    }

    #[test]
    fn gradient_condition_examples() {
        // symmetric rates with matched diagonal activity
        let r = S2epRates {
            g1_00: [1.0, 1.0],
            g1_10: [2.0, 2.0],
            g1_0m1: [3.0, 3.0],
            g1_1m1: [1.0, 1.0],
            g2_1m1: [2.0, 2.0],
        };
        let t = build_s2ep(r).unwrap();
        match check_gradient_condition(&t).unwrap() {
            GradientCondition::Gradient { q_linear, q_quadratic } => {
                assert!((q_linear + 2.5).abs() < 1e-15);
                assert!((q_quadratic - 0.5).abs() < 1e-15);
            }
            GradientCondition::NotGradient => panic!("expected gradient"),
        }

        let (t, _) = build_thermal_bath(0.8, 0.1382).unwrap();
        assert_eq!(check_gradient_condition(&t).unwrap(), GradientCondition::NotGradient);

        let zero = build_s2ep(S2epRates::default()).unwrap();
        match check_gradient_condition(&zero).unwrap() {
            GradientCondition::Gradient { q_linear, q_quadratic } => {
                assert_eq!(q_linear, 0.0);
                assert_eq!(q_quadratic, 0.0);
            }
            GradientCondition::NotGradient => panic!("zero table is trivially gradient"),
        }
    }

    #[test]
    fn toml_model_files_round_trip() {
        let t = ModelConfig::from_toml_str(
            r#"
            [model]
            family = "stp"
            [rates]
            p1 = 1.0
            pm1 = 0.0
            "#,
        )
        .unwrap()
        .build()
        .unwrap();
        assert_eq!(t.family_name(), "stp");

        let err = ModelConfig::from_toml_str(
            r#"
            [model]
            family = "stp"
            [rates]
            p1 = 1.0
            pm1 = 0.0
            bogus = 3
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));

        let missing = ModelConfig::from_toml_str(
            r#"
            [model]
            family = "s2ep"
            [rates]
            g1_0m1 = [1.0, 1.0]
            g2_1m1 = [1.0, 1.0]
            g1_1m1 = [1.0, 1.0]
            g1_00 = [1.0, 1.0]
            "#,
        )
        .unwrap()
        .build()
        .unwrap_err();
        assert!(missing.to_string().contains("g1_10"));

        let foreign = ModelConfig::from_toml_str(
            r#"
            [model]
            family = "sep"
            [rates]
            p = [{ z = [1], w = 1.0 }]
            g = [0.0, 1.0]
            "#,
        )
        .unwrap()
        .build()
        .unwrap_err();
        assert!(foreign.to_string().contains("not used"));
    }
}
