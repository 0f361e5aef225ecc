//! Macroscopic flux functions and entropy solutions of the limiting scalar
//! conservation law with step initial data.
//!
//! Three independent routes to the same objects keep each other honest: flux
//! values come from a closed form in the density, from the invariant-measure
//! parametrization through the auxiliary charge parameter, and from Monte
//! Carlo averaging of the instantaneous current; Riemann solutions come from
//! convex envelopes and from a finite-volume scheme with the exact Godunov
//! flux of the piecewise-linear interpolant.

use crate::rates::{check_s2ep_product_condition, ProductCondition, RateTable, S2epRates};
use crate::simulate::SplitMix64;
use crate::{Error, Result};

/// Grid resolution shared by the envelope construction and the
/// finite-volume oracle, so both discretize the same flux.
pub const RIEMANN_GRID: usize = 2001;

/// Every reported discontinuity must balance flux against speed this well.
pub const RH_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Instantaneous current and closed-form fluxes
// ---------------------------------------------------------------------------

fn require_nearest_neighbor(table: &RateTable) -> Result<()> {
    for &z in table.displacements() {
        if z[1] != 0 || z[0].abs() != 1 {
            return Err(Error::Unsupported(
                "current and flux operations need nearest-neighbor jumps".into(),
            ));
        }
    }
    Ok(())
}

fn current_unchecked(table: &RateTable, a: i64, b: i64) -> f64 {
    let mut j = 0.0;
    for (k, &r) in table.rate_vec(a, b, [1, 0]).iter().enumerate().skip(1) {
        j += k as f64 * r;
    }
    for (k, &r) in table.rate_vec(b, a, [-1, 0]).iter().enumerate().skip(1) {
        j -= k as f64 * r;
    }
    j
}

/// Expected instantaneous net transport across the bond between two sites
/// holding `a` and `b`: rightward batches count positive, leftward ones
/// negative, each weighted by its size.
pub fn microscopic_current(table: &RateTable, a: i64, b: i64) -> Result<f64> {
    require_nearest_neighbor(table)?;
    Ok(current_unchecked(table, a, b))
}

/// Flux of the stick model: the mean of `k` summed over admissible batch
/// sizes under the geometric marginal gives `(p - q) rho (1 + rho)`.
pub fn stp_flux(p1: f64, pm1: f64, rho: f64) -> f64 {
    (p1 - pm1) * rho * (1.0 + rho)
}

/// Squared ratio of center-pair to annihilating-pair activity; the single
/// parameter shaping the two-species invariant marginals.
pub fn s2ep_csq(table: &RateTable) -> Result<f64> {
    let r = table.s2ep_rates().ok_or(Error::NotTwoSpecies)?;
    let c_sum = r.g1_1m1[0] + r.g1_1m1[1];
    let d_sum = r.g1_00[0] + r.g1_00[1];
    if c_sum <= 0.0 || d_sum <= 0.0 {
        return Err(Error::Precondition(
            "the measure parametrization needs both (1,-1) and (0,0) activity".into(),
        ));
    }
    Ok(d_sum / c_sum)
}

/// Mean squared site value under the invariant marginal at mean value
/// `rho`, with the removable singularity at `4c^2 = 1` handled explicitly.
pub fn s2ep_phi(csq: f64, rho: f64) -> f64 {
    let q = 4.0 * csq;
    if (q - 1.0).abs() < 1e-10 {
        (rho * rho + 1.0) / 2.0
    } else {
        let psi = (q + rho * rho * (1.0 - q)).sqrt();
        (psi - q) / (1.0 - q)
    }
}

/// Site marginal `[P(1), P(0), P(-1)]` at mean value `rho`, through the
/// closed form for the mean square.
pub fn s2ep_marginals(table: &RateTable, rho: f64) -> Result<[f64; 3]> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("mean value {rho} outside [-1, 1]")));
    }
    let phi = s2ep_phi(s2ep_csq(table)?, rho);
    Ok([((phi + rho) / 2.0).max(0.0), (1.0 - phi).max(0.0), ((phi - rho) / 2.0).max(0.0)])
}

/// Auxiliary charge parameter `y` solving the mean-value equation
/// `rho = c (y - 1/y) / (1 + c (y + 1/y))`, found by bisection on a
/// logarithmic scale; the left side is strictly increasing in `y`.
pub fn s2ep_charge_parameter(csq: f64, rho: f64) -> f64 {
    let c = csq.sqrt();
    let f = |y: f64| {
        let denom = 1.0 + c * (y + 1.0 / y);
        c * (y - 1.0 / y) / denom - rho
    };
    let (mut lo, mut hi) = (1e-12_f64, 1e12_f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    (lo * hi).sqrt()
}

/// Site marginal computed through the charge parameter instead of the
/// closed form; the two routes agree and cross-check each other.
pub fn s2ep_marginals_via_charge(csq: f64, rho: f64) -> [f64; 3] {
    let c = csq.sqrt();
    let y = s2ep_charge_parameter(csq, rho);
    let denom = 1.0 + c * (y + 1.0 / y);
    [c * y / denom, 1.0 / denom, c / (y * denom)]
}

/// Macroscopic flux of the two-species model under its product invariant
/// measures. Errors when those measures do not exist, since the expression
/// would then average the current against a non-invariant law.
pub fn s2ep_flux(table: &RateTable, rho: f64) -> Result<f64> {
    match check_s2ep_product_condition(table)? {
        ProductCondition::Holds => {}
        ProductCondition::Violated { residual } => {
            return Err(Error::Precondition(format!(
                "no product invariant measures: residual {residual:.3e}"
            )));
        }
    }
    let r = *table.s2ep_rates().expect("product condition implies a two-species table");
    let phi = s2ep_phi(s2ep_csq(table)?, rho);
    Ok(s2ep_flux_from_parts(&r, phi, rho))
}

fn s2ep_flux_from_parts(r: &S2epRates, phi: f64, rho: f64) -> f64 {
    let empty = 1.0 - phi;
    let d = r.g1_00[0] - r.g1_00[1];
    let e = r.g1_10[0] - r.g1_10[1];
    let a = r.g1_0m1[0] - r.g1_0m1[1];
    let cb = (r.g1_1m1[0] - r.g1_1m1[1]) + 2.0 * (r.g2_1m1[0] - r.g2_1m1[1]);
    d * empty * empty
        + 0.5 * e * empty * (phi + rho)
        + 0.5 * a * empty * (phi - rho)
        + 0.25 * cb * (phi * phi - rho * rho)
}

/// Closed-form second derivative of the thermal-bath flux, used as the
/// analytic reference for curvature and inflexion computations.
pub fn thermal_flux_curvature(a: f64, csq: f64, rho: f64) -> f64 {
    let q = 4.0 * csq;
    let psi = (q + rho * rho * (1.0 - q)).sqrt();
    (a.powi(-2) - a.powi(2)) * (1.0 - 2.0 * csq / psi.powi(3))
}

// ---------------------------------------------------------------------------
// Site marginals as sampling distributions
// ---------------------------------------------------------------------------

/// Single-site law of the model's product family at a given density. The
/// two-species variant is defined from the mean-square closed form whether
/// or not the product measures are invariant; invariance is a separate
/// check owned by the operations that need it.
#[derive(Clone, Copy, Debug)]
pub enum SiteDist {
    Bernoulli { p: f64 },
    Geometric { theta: f64 },
    ThreePoint { p1: f64, p0: f64 },
}

impl SiteDist {
    pub fn draw(&self, rng: &mut SplitMix64) -> i64 {
        self.draw_from(rng.next_f64())
    }

    /// Invert the distribution at a fixed uniform `u`. Feeding the same `u`
    /// into two densities of the same family couples the draws monotonically,
    /// which is how ordered initial pairs are built.
    pub fn draw_from(&self, u: f64) -> i64 {
        match *self {
            SiteDist::Bernoulli { p } => i64::from(u < p),
            SiteDist::Geometric { theta } => {
                if theta <= 0.0 {
                    0
                } else {
                    ((1.0 - u).ln() / theta.ln()).floor() as i64
                }
            }
            SiteDist::ThreePoint { p1, p0 } => {
                if u < p1 {
                    1
                } else if u < p1 + p0 {
                    0
                } else {
                    -1
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            SiteDist::Bernoulli { p } => p,
            SiteDist::Geometric { theta } => theta / (1.0 - theta),
            SiteDist::ThreePoint { p1, p0 } => p1 - (1.0 - p1 - p0),
        }
    }
}

pub fn site_distribution(table: &RateTable, rho: f64) -> Result<SiteDist> {
    match table.family_name() {
        "sep" => {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::InvalidInput(format!("exclusion density {rho} outside [0, 1]")));
            }
            Ok(SiteDist::Bernoulli { p: rho })
        }
        "stp" => {
            if !(rho >= 0.0) {
                return Err(Error::InvalidInput(format!("stick density {rho} must be nonnegative")));
            }
            Ok(SiteDist::Geometric { theta: rho / (1.0 + rho) })
        }
        "s2ep" => {
            let m = s2ep_marginals(table, rho)?;
            Ok(SiteDist::ThreePoint { p1: m[0], p0: m[1] })
        }
        other => Err(Error::Unsupported(format!(
            "no closed product parametrization wired for the {other} family"
        ))),
    }
}

/// Monte Carlo estimate of the flux at density `rho`: the instantaneous
/// current averaged over independent site pairs drawn from the product
/// marginal. Returns the mean and its standard error; at deterministic
/// densities the standard error is exactly zero.
pub fn flux_from_measure(
    table: &RateTable,
    rho: f64,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    require_nearest_neighbor(table)?;
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let dist = site_distribution(table, rho)?;
    let mut rng = SplitMix64::new(seed ^ 0xF1DE_57A7_E5F1_0000);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for n in 1..=samples {
        let a = dist.draw(&mut rng);
        let b = dist.draw(&mut rng);
        let j = current_unchecked(table, a, b);
        let delta = j - mean;
        mean += delta / n as f64;
        m2 += delta * (j - mean);
    }
    let stderr = if samples > 1 { (m2 / (samples as f64 * (samples - 1) as f64)).sqrt() } else { 0.0 };
    Ok((mean, stderr))
}

// ---------------------------------------------------------------------------
// Inflexion structure of the flux
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct InflexionReport {
    /// Densities where the second derivative of the flux changes sign.
    pub locations: Vec<f64>,
}

/// Locates inflexion points of the two-species flux by sign changes of the
/// centered second difference on a dense density grid.
pub fn inflexion_report(table: &RateTable) -> Result<InflexionReport> {
    let h = 1e-3;
    let n = 1981;
    let rho_at = |i: usize| -0.99 + i as f64 * h;
    let g: Vec<f64> = (0..n).map(|i| s2ep_flux(table, rho_at(i))).collect::<Result<_>>()?;
    let mut locations = Vec::new();
    let mut last_sign = 0i8;
    for i in 1..n - 1 {
        let d2 = g[i + 1] - 2.0 * g[i] + g[i - 1];
        // The threshold sits far above rounding noise in the differences
        // and far below h^2 times any genuine curvature scale.
        let sign = if d2 > 1e-12 {
            1
        } else if d2 < -1e-12 {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                locations.push(rho_at(i));
            }
            last_sign = sign;
        }
    }
    Ok(InflexionReport { locations })
}

// ---------------------------------------------------------------------------
// Flux models and Riemann problems
// ---------------------------------------------------------------------------

/// A scalar flux `G` as used by the conservation law `u_t + G(u)_x = 0`.
pub struct FluxModel {
    pub label: String,
    g: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl FluxModel {
    pub fn from_fn(label: impl Into<String>, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        FluxModel { label: label.into(), g: Box::new(g) }
    }

    pub fn stick(p1: f64, pm1: f64) -> Self {
        FluxModel::from_fn("stick", move |rho| stp_flux(p1, pm1, rho))
    }

    /// Two-species flux, validated once so evaluation is total.
    pub fn two_species(table: &RateTable) -> Result<Self> {
        s2ep_flux(table, 0.0)?;
        let r = *table.s2ep_rates().expect("validated above");
        let csq = s2ep_csq(table)?;
        Ok(FluxModel::from_fn("two-species", move |rho| {
            s2ep_flux_from_parts(&r, s2ep_phi(csq, rho), rho)
        }))
    }

    pub fn eval(&self, rho: f64) -> f64 {
        (self.g)(rho)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Wave {
    Shock { speed: f64, left: f64, right: f64 },
    /// Discontinuity whose chord lies on the flux graph: characteristics
    /// run parallel to it on both sides.
    Contact { speed: f64, left: f64, right: f64 },
    Rarefaction { lo: f64, hi: f64, left: f64, right: f64 },
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    s_lo: f64,
    s_hi: f64,
    u_lo: f64,
    u_hi: f64,
    fan: bool,
}

/// Self-similar entropy solution `u(x/t)` of a Riemann problem.
#[derive(Clone, Debug)]
pub struct EntropySolution {
    pub lambda: f64,
    pub rho: f64,
    pub waves: Vec<Wave>,
    pieces: Vec<Piece>,
}

impl EntropySolution {
    /// Value at similarity coordinate `xi = x / t`. On a discontinuity line
    /// the right state is returned.
    pub fn eval(&self, xi: f64) -> f64 {
        let mut u = self.lambda;
        for p in &self.pieces {
            if xi < p.s_lo {
                return u;
            }
            if xi <= p.s_hi {
                if p.fan && p.s_hi > p.s_lo {
                    let w = (xi - p.s_lo) / (p.s_hi - p.s_lo);
                    return p.u_lo + w * (p.u_hi - p.u_lo);
                }
                return p.u_hi;
            }
            u = p.u_hi;
        }
        u
    }

    /// Worst flux-balance defect over all discontinuities.
    pub fn max_rankine_hugoniot_residual(&self, model: &FluxModel) -> f64 {
        let mut worst = 0.0f64;
        for w in &self.waves {
            if let Wave::Shock { speed, left, right } | Wave::Contact { speed, left, right } = *w {
                let defect = speed * (right - left) - (model.eval(right) - model.eval(left));
                worst = worst.max(defect.abs());
            }
        }
        worst
    }
}

fn lower_hull(us: &[f64], gs: &[f64]) -> Vec<usize> {
    let mut h: Vec<usize> = Vec::new();
    for i in 0..us.len() {
        while h.len() >= 2 {
            let p = h[h.len() - 2];
            let q = h[h.len() - 1];
            let cross = (us[q] - us[p]) * (gs[i] - gs[p]) - (gs[q] - gs[p]) * (us[i] - us[p]);
            // Collinear middle points are dropped, so affine stretches of
            // the envelope arrive as single long edges.
            if cross <= 0.0 {
                h.pop();
            } else {
                break;
            }
        }
        h.push(i);
    }
    h
}

/// Entropy solution of `u_t + G(u)_x = 0` with `u(x, 0) = lambda` for
/// `x < 0` and `rho` for `x > 0`, built from the convex envelope of the
/// flux between the two states: the lower envelope for increasing data,
/// the upper envelope for decreasing data.
pub fn riemann_solve(model: &FluxModel, lambda: f64, rho: f64) -> EntropySolution {
    if lambda == rho {
        return EntropySolution { lambda, rho, waves: Vec::new(), pieces: Vec::new() };
    }
    let (a, b) = (lambda.min(rho), lambda.max(rho));
    let n = RIEMANN_GRID;
    let du = (b - a) / (n - 1) as f64;
    let us: Vec<f64> = (0..n).map(|i| a + i as f64 * du).collect();
    let gs: Vec<f64> = us.iter().map(|&u| model.eval(u)).collect();
    let increasing = lambda < rho;

    let hull = if increasing {
        lower_hull(&us, &gs)
    } else {
        let neg: Vec<f64> = gs.iter().map(|g| -g).collect();
        lower_hull(&us, &neg)
    };

    // Edges ordered by ascending wave speed, each as (left state, right
    // state, speed) in solution orientation.
    let mut edges: Vec<(f64, f64, f64)> = Vec::with_capacity(hull.len() - 1);
    let slope = |i: usize, j: usize| (gs[j] - gs[i]) / (us[j] - us[i]);
    if increasing {
        for w in hull.windows(2) {
            edges.push((us[w[0]], us[w[1]], slope(w[0], w[1])));
        }
    } else {
        for w in hull.windows(2).rev() {
            edges.push((us[w[1]], us[w[0]], slope(w[0], w[1])));
        }
    }

    let scale = 1.0 + gs.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let chord_gap = |ul: f64, ur: f64, s: f64| -> f64 {
        let (lo, hi) = (ul.min(ur), ul.max(ur));
        let i0 = ((lo - a) / du).ceil() as usize;
        let i1 = ((hi - a) / du).floor() as usize;
        let g_lo = model.eval(lo);
        let mut gap = 0.0f64;
        for m in i0..=i1.min(n - 1) {
            gap = gap.max((gs[m] - (g_lo + s * (us[m] - lo))).abs());
        }
        gap
    };

    let mut waves: Vec<Wave> = Vec::new();
    let mut pieces: Vec<Piece> = Vec::new();
    let mut fan_run: Vec<(f64, f64, f64)> = Vec::new();
    let flush_fan = |waves: &mut Vec<Wave>, pieces: &mut Vec<Piece>, run: &mut Vec<(f64, f64, f64)>| {
        if run.is_empty() {
            return;
        }
        let left = run[0].0;
        let right = run[run.len() - 1].1;
        let lo = run[0].2;
        let hi = run[run.len() - 1].2;
        waves.push(Wave::Rarefaction { lo, hi, left, right });
        // Knot speeds: edge slopes at the run ends, averaged adjacent
        // slopes at interior vertices; linear interpolation through the
        // knots is second-order accurate for the self-similar profile.
        let mut prev_u = left;
        let mut prev_s = lo;
        for w in 0..run.len() {
            let (_, ur, s) = run[w];
            let s_at = if w + 1 == run.len() { s } else { (s + run[w + 1].2) / 2.0 };
            pieces.push(Piece { s_lo: prev_s, s_hi: s_at, u_lo: prev_u, u_hi: ur, fan: true });
            prev_u = ur;
            prev_s = s_at;
        }
        run.clear();
    };

    for &(ul, ur, s) in &edges {
        let span = (ur - ul).abs() / du;
        if span > 1.5 {
            flush_fan(&mut waves, &mut pieces, &mut fan_run);
            let wave = if chord_gap(ul, ur, s) <= 1e-9 * scale {
                Wave::Contact { speed: s, left: ul, right: ur }
            } else {
                Wave::Shock { speed: s, left: ul, right: ur }
            };
            waves.push(wave);
            pieces.push(Piece { s_lo: s, s_hi: s, u_lo: ul, u_hi: ur, fan: false });
        } else {
            fan_run.push((ul, ur, s));
        }
    }
    flush_fan(&mut waves, &mut pieces, &mut fan_run);

    let sol = EntropySolution { lambda, rho, waves, pieces };
    debug_assert!(sol.max_rankine_hugoniot_residual(model) <= RH_TOL);
    sol
}

/// Trapezoid distance between a block-averaged empirical profile (in
/// macroscopic coordinates `x`, at macroscopic time `t`) and the entropy
/// solution, restricted to `x` in `[lo, hi]`.
pub fn compare_profiles(
    profile: &[(f64, f64)],
    solution: &EntropySolution,
    t: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    assert!(t > 0.0, "profiles are compared at a positive macroscopic time");
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|p| p.0 >= lo && p.0 <= hi)
        .map(|&(x, v)| (x, (v - solution.eval(x / t)).abs()))
        .collect();
    let mut l1 = 0.0;
    for w in pts.windows(2) {
        l1 += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
    }
    l1
}

// ---------------------------------------------------------------------------
// Finite-volume oracle
// ---------------------------------------------------------------------------

struct SparseTable {
    rows: Vec<Vec<f64>>,
    min: bool,
}

impl SparseTable {
    fn new(xs: &[f64], min: bool) -> Self {
        let mut rows = vec![xs.to_vec()];
        let mut width = 1;
        while 2 * width <= xs.len() {
            let prev = &rows[rows.len() - 1];
            let row: Vec<f64> = (0..=xs.len() - 2 * width)
                .map(|i| if min { prev[i].min(prev[i + width]) } else { prev[i].max(prev[i + width]) })
                .collect();
            rows.push(row);
            width *= 2;
        }
        SparseTable { rows, min }
    }

    /// Extreme over the inclusive index range.
    fn query(&self, l: usize, r: usize) -> f64 {
        let k = (usize::BITS - 1 - (r - l + 1).leading_zeros()) as usize;
        let a = self.rows[k][l];
        let b = self.rows[k][r + 1 - (1 << k)];
        if self.min {
            a.min(b)
        } else {
            a.max(b)
        }
    }
}

/// Cell-centered profile of a finite-volume run.
#[derive(Clone, Debug)]
pub struct FvProfile {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

/// First-order Godunov scheme for the Riemann problem, with the exact
/// interface flux of the piecewise-linear interpolant of `G` on the shared
/// grid: extremes over an interval combine interior node values (range
/// queries) with the interpolated endpoints. The domain is sized from the
/// extreme characteristic speeds so no wave reaches the boundary.
pub fn godunov(model: &FluxModel, lambda: f64, rho: f64, t_end: f64, cells: usize) -> FvProfile {
    assert!(cells >= 2);
    let (a, b) = (lambda.min(rho), lambda.max(rho));
    let n = RIEMANN_GRID;
    if a == b {
        let xs: Vec<f64> = (0..cells).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / cells as f64).collect();
        return FvProfile { values: vec![lambda; cells], xs };
    }
    let du = (b - a) / (n - 1) as f64;
    let us: Vec<f64> = (0..n).map(|i| a + i as f64 * du).collect();
    let gs: Vec<f64> = us.iter().map(|&u| model.eval(u)).collect();
    let t_min = SparseTable::new(&gs, true);
    let t_max = SparseTable::new(&gs, false);

    let g_at = |u: f64| -> f64 {
        let pos = ((u - a) / du).clamp(0.0, (n - 1) as f64);
        let i = (pos as usize).min(n - 2);
        let frac = pos - i as f64;
        gs[i] + frac * (gs[i + 1] - gs[i])
    };
    let flux = |ul: f64, ur: f64| -> f64 {
        if ul == ur {
            return g_at(ul);
        }
        let (lo, hi, want_min) = if ul < ur { (ul, ur, true) } else { (ur, ul, false) };
        let i0 = ((lo - a) / du).ceil().max(0.0) as usize;
        let i1 = (((hi - a) / du).floor() as usize).min(n - 1);
        let ends = if want_min { g_at(lo).min(g_at(hi)) } else { g_at(lo).max(g_at(hi)) };
        if i0 > i1 {
            return ends;
        }
        let inner = if want_min { t_min.query(i0, i1) } else { t_max.query(i0, i1) };
        if want_min {
            ends.min(inner)
        } else {
            ends.max(inner)
        }
    };

    let (mut s_lo, mut s_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n - 1 {
        let s = (gs[i + 1] - gs[i]) / du;
        s_lo = s_lo.min(s);
        s_hi = s_hi.max(s);
    }
    let vmax = s_lo.abs().max(s_hi.abs()).max(1e-12);
    let margin = 0.1 * (s_hi - s_lo) + 0.1;
    let xa = (s_lo * t_end).min(0.0) - margin;
    let xb = (s_hi * t_end).max(0.0) + margin;
    let dx = (xb - xa) / cells as f64;
    let xs: Vec<f64> = (0..cells).map(|i| xa + (i as f64 + 0.5) * dx).collect();
    let mut u: Vec<f64> = xs.iter().map(|&x| if x < 0.0 { lambda } else { rho }).collect();

    let steps = (t_end * vmax / (0.4 * dx)).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let mut f = vec![0.0f64; cells + 1];
    for _ in 0..steps {
        f[0] = g_at(u[0]);
        f[cells] = g_at(u[cells - 1]);
        for i in 1..cells {
            f[i] = flux(u[i - 1], u[i]);
        }
        for i in 0..cells {
            u[i] -= dt / dx * (f[i + 1] - f[i]);
        }
    }
    FvProfile { xs, values: u }
}

/// Largest pointwise gap between the finite-volume run and the envelope
/// solution at time `t_end`, ignoring cells within `exclusion` of any
/// discontinuity line.
pub fn fv_envelope_gap(model: &FluxModel, lambda: f64, rho: f64, t_end: f64, exclusion: f64) -> f64 {
    let sol = riemann_solve(model, lambda, rho);
    let fv = godunov(model, lambda, rho, t_end, 4000);
    let mut fronts: Vec<f64> = Vec::new();
    for w in &sol.waves {
        if let Wave::Shock { speed, .. } | Wave::Contact { speed, .. } = *w {
            fronts.push(speed * t_end);
        }
    }
    let mut worst = 0.0f64;
    for (x, v) in fv.xs.iter().zip(&fv.values) {
        if fronts.iter().any(|f| (x - f).abs() <= exclusion) {
            continue;
        }
        worst = worst.max((v - sol.eval(x / t_end)).abs());
    }
    worst
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{build_s2ep, build_stp, build_thermal_bath};

    fn thermal_for(c: f64) -> (RateTable, f64) {
        let a = 0.8f64;
        let b = (2.0 * c * c / (a.powi(-2) + a.powi(2))).sqrt();
        build_thermal_bath(a, b).unwrap()
    }

    #[test]
    fn stick_current_is_the_triangular_sum() {
        let table = build_stp(0.7, 0.3).unwrap();
        for (a, b) in [(0i64, 0i64), (3, 2), (5, 0), (0, 4)] {
            let want = 0.7 * (a * (a + 1)) as f64 / 2.0 - 0.3 * (b * (b + 1)) as f64 / 2.0;
            assert!((microscopic_current(&table, a, b).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn stick_flux_matches_the_measure_route() {
        let table = build_stp(1.0, 0.0).unwrap();
        for (i, rho) in [0.25, 0.5, 1.0, 2.0].into_iter().enumerate() {
            let (mean, stderr) = flux_from_measure(&table, rho, 200_000, 90 + i as u64).unwrap();
            assert!(stderr > 0.0);
            let want = stp_flux(1.0, 0.0, rho);
            assert!(
                (mean - want).abs() < 4.0 * stderr,
                "rho {rho}: {mean} vs {want} (stderr {stderr})"
            );
        }
        let (mean, stderr) = flux_from_measure(&table, 0.0, 1000, 7).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(stderr, 0.0);
    }

    #[test]
    fn two_species_flux_matches_the_measure_route() {
        let (table, csq) = thermal_for(0.145);
        assert!((csq - 0.021025).abs() < 1e-12);
        for (i, rho) in [-0.8, -0.303, 0.0, 0.4, 0.9].into_iter().enumerate() {
            let closed = s2ep_flux(&table, rho).unwrap();
            let (mean, stderr) = flux_from_measure(&table, rho, 150_000, 40 + i as u64).unwrap();
            assert!(
                (mean - closed).abs() < 4.0 * stderr.max(1e-9),
                "rho {rho}: {mean} vs {closed} (stderr {stderr})"
            );
        }
    }

    #[test]
    fn charge_parameter_route_agrees_with_the_closed_form() {
        for csq in [0.021025, 0.25, 0.81] {
            let mut rho = -0.99;
            while rho <= 0.99 {
                let phi = s2ep_phi(csq, rho);
                let direct = [(phi + rho) / 2.0, 1.0 - phi, (phi - rho) / 2.0];
                let via_y = s2ep_marginals_via_charge(csq, rho);
                for (d, v) in direct.iter().zip(&via_y) {
                    assert!((d - v).abs() < 1e-9, "csq {csq} rho {rho}: {direct:?} vs {via_y:?}");
                }
                let y = s2ep_charge_parameter(csq, rho);
                let c = csq.sqrt();
                let residual = c * (y - 1.0 / y) / (1.0 + c * (y + 1.0 / y)) - rho;
                assert!(residual.abs() < 1e-12);
                rho += 0.11;
            }
        }
    }

    #[test]
    fn thermal_curvature_matches_centered_differences() {
        let (table, csq) = thermal_for(0.145);
        let h = 1e-4;
        for i in 0..=40 {
            let rho = -0.99 + i as f64 * (1.98 / 40.0);
            let want = thermal_flux_curvature(0.8, csq, rho);
            let g = |r: f64| s2ep_flux(&table, r).unwrap();
            let got = (g(rho + h) - 2.0 * g(rho) + g(rho - h)) / (h * h);
            assert!((got - want).abs() < 1e-6, "rho {rho}: {got} vs {want}");
        }
    }

    #[test]
    fn inflexion_counts_track_the_interaction_ratio() {
        let (half, _) = thermal_for(0.5);
        assert!(inflexion_report(&half).unwrap().locations.is_empty());

        let (low, _) = thermal_for(0.145);
        let locs = inflexion_report(&low).unwrap().locations;
        assert_eq!(locs.len(), 2, "{locs:?}");
        assert!(locs.iter().all(|l| l.abs() < 0.35), "{locs:?}");
        assert!(locs[0] < 0.0 && locs[1] > 0.0);

        let (high, _) = thermal_for(0.9);
        let locs = inflexion_report(&high).unwrap().locations;
        assert_eq!(locs.len(), 2, "{locs:?}");
        assert!(locs.iter().all(|l| l.abs() > 0.8), "{locs:?}");
    }

    #[test]
    fn product_violation_blocks_the_closed_form_but_not_the_measure_route() {
        // Asymmetric annihilation with symmetric center activity violates
        // the product condition.
        let table = build_s2ep(crate::rates::S2epRates {
            g1_0m1: [1.0, 1.0],
            g2_1m1: [0.5, 0.5],
            g1_1m1: [2.0, 0.25],
            g1_00: [1.0, 1.0],
            g1_10: [1.0, 1.0],
        })
        .unwrap();
        assert!(matches!(
            check_s2ep_product_condition(&table).unwrap(),
            ProductCondition::Violated { .. }
        ));
        assert!(s2ep_flux(&table, 0.2).is_err());
        assert!(FluxModel::two_species(&table).is_err());
        let (mean, stderr) = flux_from_measure(&table, 0.2, 20_000, 3).unwrap();
        assert!(mean.is_finite() && stderr > 0.0);
    }

    #[test]
    fn convex_flux_yields_one_shock_or_one_fan() {
        let model = FluxModel::stick(1.0, 0.0);
        let sol = riemann_solve(&model, 2.0, 0.0);
        assert_eq!(sol.waves.len(), 1);
        match sol.waves[0] {
            Wave::Shock { speed, left, right } => {
                assert!((speed - 3.0).abs() < 1e-9);
                assert_eq!((left, right), (2.0, 0.0));
            }
            ref w => panic!("expected a shock, got {w:?}"),
        }
        assert!((sol.eval(2.9) - 2.0).abs() < 1e-12);
        assert!(sol.eval(3.1).abs() < 1e-12);
        assert!(sol.max_rankine_hugoniot_residual(&model) <= RH_TOL);

        let sol = riemann_solve(&model, 0.0, 2.0);
        assert_eq!(sol.waves.len(), 1, "{:?}", sol.waves);
        match sol.waves[0] {
            Wave::Rarefaction { lo, hi, left, right } => {
                assert!((lo - 1.0).abs() < 5e-3 && (hi - 5.0).abs() < 5e-3);
                assert_eq!((left, right), (0.0, 2.0));
            }
            ref w => panic!("expected a fan, got {w:?}"),
        }
        // Speed 3 is carried by the state with G'(u) = 1 + 2u = 3.
        assert!((sol.eval(3.0) - 1.0).abs() < 5e-3);
        assert!(sol.eval(0.9).abs() < 1e-12);
        assert!((sol.eval(5.1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn double_shock_data_produce_shock_fan_shock() {
        let (table, _) = thermal_for(0.145);
        let model = FluxModel::two_species(&table).unwrap();
        let sol = riemann_solve(&model, 0.303, -0.303);
        let kinds: Vec<u8> = sol
            .waves
            .iter()
            .map(|w| match w {
                Wave::Shock { .. } => 0,
                Wave::Contact { .. } => 1,
                Wave::Rarefaction { .. } => 2,
            })
            .collect();
        assert_eq!(kinds, vec![0, 2, 0], "{:?}", sol.waves);
        if let Wave::Shock { speed, left, right } = sol.waves[0] {
            assert!((speed + 0.07584).abs() < 5e-3, "left shock speed {speed}");
            assert!((left - 0.303).abs() < 1e-12);
            assert!((right - 0.1518).abs() < 5e-3, "intermediate {right}");
        }
        if let Wave::Shock { speed, left, right } = sol.waves[2] {
            assert!((speed - 0.07584).abs() < 5e-3, "right shock speed {speed}");
            assert!((left + 0.1518).abs() < 5e-3);
            assert!((right + 0.303).abs() < 1e-12);
        }
        assert!(sol.max_rankine_hugoniot_residual(&model) <= RH_TOL);
        assert!((sol.eval(-0.2) - 0.303).abs() < 1e-12);
        assert!(sol.eval(0.0).abs() < 5e-3);
        assert!((sol.eval(0.2) + 0.303).abs() < 1e-12);
    }

    #[test]
    fn affine_flux_stretch_is_reported_as_a_contact() {
        // Flux affine on [0.25, 0.75]: the envelope edge there coincides
        // with the graph.
        let model = FluxModel::from_fn("kinked", |u| {
            if u < 0.25 {
                u * u
            } else if u <= 0.75 {
                0.0625 + 0.5 * (u - 0.25)
            } else {
                0.3125 + (u - 0.75) + (u - 0.75) * (u - 0.75)
            }
        });
        let sol = riemann_solve(&model, 0.0, 1.0);
        assert!(
            sol.waves.iter().any(|w| matches!(w, Wave::Contact { .. })),
            "{:?}",
            sol.waves
        );
        assert!(sol.max_rankine_hugoniot_residual(&model) <= RH_TOL);
    }

    #[test]
    fn finite_volume_run_matches_the_envelope_solution() {
        let stick = FluxModel::stick(1.0, 0.0);
        let gap = fv_envelope_gap(&stick, 0.7, 0.2, 1.0, 0.1);
        assert!(gap < 0.02, "stick gap {gap}");

        let (table, _) = thermal_for(0.145);
        let model = FluxModel::two_species(&table).unwrap();
        let gap = fv_envelope_gap(&model, 0.303, -0.303, 1.0, 0.1);
        assert!(gap < 0.02, "thermal gap {gap}");
    }

    #[test]
    fn profile_comparison_integrates_the_gap() {
        let model = FluxModel::stick(1.0, 0.0);
        let sol = riemann_solve(&model, 1.0, 1.0);
        let flat: Vec<(f64, f64)> = (0..21).map(|i| (-1.0 + 0.1 * i as f64, 1.25)).collect();
        let l1 = compare_profiles(&flat, &sol, 1.0, -1.0, 1.0);
        assert!((l1 - 0.5).abs() < 1e-12, "{l1}");
        let exact: Vec<(f64, f64)> = (0..21).map(|i| (-1.0 + 0.1 * i as f64, 1.0)).collect();
        assert_eq!(compare_profiles(&exact, &sol, 1.0, -1.0, 1.0), 0.0);
    }

    #[test]
    fn sampling_distributions_expose_their_means() {
        let table = build_stp(1.0, 0.0).unwrap();
        let d = site_distribution(&table, 1.5).unwrap();
        assert!((d.mean() - 1.5).abs() < 1e-12);
        let (table, _) = thermal_for(0.145);
        let d = site_distribution(&table, -0.3).unwrap();
        assert!((d.mean() + 0.3).abs() < 1e-12);
        assert!(site_distribution(&table, 1.5).is_err());
    }
}
