//! Event-driven simulation of single and coupled trajectories on finite
//! one-dimensional windows.
//!
//! Every directed bond carries its own exponential clock, running at the
//! bond's current total jump rate (single runs) or at the total coupled mass
//! of its local quadruple (coupled runs). When a clock fires, one uniform
//! selects the batch by cumulative partition of the actual rates, the jump
//! is applied, and the clocks of all bonds whose endpoint values changed are
//! redrawn; redrawing the residual clock of an exponential is exact by
//! memorylessness. Each bond consumes randomness from its own stream, keyed
//! by the seed and the bond's absolute coordinates, so a trajectory is
//! bit-reproducible given the seed, and the draws a bond consumes depend
//! only on events inside its own dependency cone. With frozen boundaries
//! this makes finite propagation checkable exactly: enlarging the window
//! leaves center trajectories literally identical.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::coupling::Quad;
use crate::hydro::site_distribution;
use crate::rates::{check_s2ep_product_condition, ProductCondition, RateTable, IDENTITY_TOL};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Keyed randomness
// ---------------------------------------------------------------------------

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Splittable 64-bit mixer; the per-bond streams are independent instances
/// keyed off the run seed.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential waiting time with the given positive rate.
    pub fn next_exp(&mut self, rate: f64) -> f64 {
        -(-self.next_f64()).ln_1p() / rate
    }
}

/// Stream for one keyed object: two mixing rounds decouple nearby keys.
fn keyed_stream(seed: u64, key: u64) -> SplitMix64 {
    let mut boot = SplitMix64::new(seed ^ key.wrapping_mul(GOLDEN));
    let s = boot.next_u64();
    SplitMix64::new(s)
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

/// Deterministic source of per-bond event randomness for one run.
#[derive(Clone, Copy, Debug)]
pub struct EventStream {
    pub seed: u64,
}

impl EventStream {
    pub fn new(seed: u64) -> Self {
        EventStream { seed }
    }
}

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Sites wrap around; total mass is conserved pathwise.
    Periodic,
    /// Jumps leaving the window are suppressed; total mass is conserved.
    Closed,
    /// Ghost sites beyond each end hold fixed values for the whole run;
    /// bonds touching them stay active, so mass flows in and out. `left[0]`
    /// sits immediately before the window, `right[0]` immediately after.
    Frozen { left: Vec<i64>, right: Vec<i64> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeConfiguration {
    /// Site coordinate of `values[0]`.
    pub origin: i64,
    pub values: Vec<i64>,
    pub boundary: Boundary,
}

impl LatticeConfiguration {
    pub fn torus(values: Vec<i64>) -> Self {
        LatticeConfiguration { origin: 0, values, boundary: Boundary::Periodic }
    }

    pub fn closed(origin: i64, values: Vec<i64>) -> Self {
        LatticeConfiguration { origin, values, boundary: Boundary::Closed }
    }

    pub fn frozen(origin: i64, values: Vec<i64>, left: Vec<i64>, right: Vec<i64>) -> Self {
        LatticeConfiguration { origin, values, boundary: Boundary::Frozen { left, right } }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total conserved quantity inside the window.
    pub fn total(&self) -> i64 {
        self.values.iter().sum()
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
struct Ev {
    t: f64,
    bond: u32,
    gen: u32,
}

impl PartialEq for Ev {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ev {}
impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ev {
    fn cmp(&self, other: &Self) -> Ordering {
        // Event times are finite by construction; ties break by bond then
        // generation for a deterministic order.
        self.t
            .partial_cmp(&other.t)
            .expect("event times are never NaN")
            .then(self.bond.cmp(&other.bond))
            .then(self.gen.cmp(&other.gen))
    }
}

#[derive(Clone, Copy, Debug)]
struct Bond {
    src: u32,
    dst: u32,
    disp: u8,
}

/// Window geometry shared by both marginals of a run: extended value array
/// (ghosts included), bond list, and per-site bond adjacency.
struct Geometry {
    origin: i64,
    ghost: usize,
    len: usize,
    z: Vec<i32>,
    bonds: Vec<Bond>,
    touching: Vec<Vec<u32>>,
    frozen: Vec<bool>,
}

fn displacements_1d(table: &RateTable) -> Result<Vec<i32>> {
    let mut out = Vec::new();
    for &d in table.displacements() {
        if d[1] != 0 {
            return Err(Error::Unsupported(
                "simulation runs on one-dimensional windows; planar kernels are check-only".into(),
            ));
        }
        out.push(d[0]);
    }
    Ok(out)
}

impl Geometry {
    fn build(table: &RateTable, config: &LatticeConfiguration) -> Result<Self> {
        let z = displacements_1d(table)?;
        let n = config.values.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty window".into()));
        }
        let reach = z.iter().map(|d| d.unsigned_abs() as usize).max().unwrap_or(0);
        let (ghost, frozen_vals) = match &config.boundary {
            Boundary::Periodic => {
                if !z.is_empty() && n <= reach {
                    return Err(Error::InvalidInput(format!(
                        "window of {n} sites cannot wrap jumps of range {reach}"
                    )));
                }
                (0, (Vec::new(), Vec::new()))
            }
            Boundary::Closed => (0, (Vec::new(), Vec::new())),
            Boundary::Frozen { left, right } => {
                if left.len() < reach || right.len() < reach {
                    return Err(Error::Config(format!(
                        "frozen boundary needs {reach} ghost values per side, got {} and {}",
                        left.len(),
                        right.len()
                    )));
                }
                (reach, (left.clone(), right.clone()))
            }
        };
        let len = n + 2 * ghost;
        let mut frozen = vec![false; len];
        for (i, f) in frozen.iter_mut().enumerate() {
            *f = i < ghost || i >= ghost + n;
        }
        let periodic = matches!(config.boundary, Boundary::Periodic);
        let mut bonds = Vec::new();
        for (di, &dz) in z.iter().enumerate() {
            for src in 0..len {
                let dst = if periodic {
                    (src as i64 + i64::from(dz)).rem_euclid(n as i64) as usize
                } else {
                    let d = src as i64 + i64::from(dz);
                    if d < 0 || d >= len as i64 {
                        continue;
                    }
                    d as usize
                };
                if frozen[src] && frozen[dst] {
                    continue;
                }
                bonds.push(Bond { src: src as u32, dst: dst as u32, disp: di as u8 });
            }
        }
        let mut touching = vec![Vec::new(); len];
        for (bi, b) in bonds.iter().enumerate() {
            touching[b.src as usize].push(bi as u32);
            if b.dst != b.src {
                touching[b.dst as usize].push(bi as u32);
            }
        }
        let _ = &frozen_vals;
        Ok(Geometry { origin: config.origin, ghost, len, z, bonds, touching, frozen })
    }

    /// Extended value array with ghost values in place.
    fn extend(&self, config: &LatticeConfiguration) -> Vec<i64> {
        let mut v = Vec::with_capacity(self.len);
        if let Boundary::Frozen { left, .. } = &config.boundary {
            for j in (0..self.ghost).rev() {
                v.push(left[j]);
            }
        }
        v.extend_from_slice(&config.values);
        if let Boundary::Frozen { right, .. } = &config.boundary {
            for j in 0..self.ghost {
                v.push(right[j]);
            }
        }
        v
    }

    fn window_of(&self, ext: &[i64], proto: &LatticeConfiguration) -> LatticeConfiguration {
        LatticeConfiguration {
            origin: proto.origin,
            values: ext[self.ghost..self.ghost + proto.values.len()].to_vec(),
            boundary: proto.boundary.clone(),
        }
    }

    /// Absolute-coordinate key of one bond, independent of the window size.
    fn key(&self, b: &Bond) -> u64 {
        let site = self.origin - self.ghost as i64 + i64::from(b.src);
        (zigzag(site) << 8) | u64::from(b.disp)
    }
}

/// Matches the tail-first accumulation used by the partial sums, so a
/// scheduled clock rate and the selection mass agree bit for bit.
fn mass(rates: &[f64]) -> f64 {
    rates.iter().skip(1).rev().fold(0.0, |acc, r| acc + r)
}

fn validate_initial(table: &RateTable, config: &LatticeConfiguration) -> Result<()> {
    let x = table.value_set();
    let mut all = config.values.clone();
    if let Boundary::Frozen { left, right } = &config.boundary {
        all.extend_from_slice(left);
        all.extend_from_slice(right);
    }
    for &v in &all {
        if !x.contains(v) {
            return Err(Error::ValueOutsideX { value: v, set: x });
        }
    }
    Ok(())
}

/// Every declared displacement must carry some rate somewhere, otherwise the
/// run has a dead clock family and the kernel is misconfigured.
fn validate_live_displacements(table: &RateTable, values: &[i64]) -> Result<()> {
    let probe: Vec<i64> = match table.value_set().bounds() {
        Some((lo, hi)) => (lo..=hi).collect(),
        None => {
            let cap = values.iter().copied().max().unwrap_or(0).max(8);
            (0..=cap).collect()
        }
    };
    for &z in table.displacements() {
        let mut live = false;
        'probe: for &a in &probe {
            for &b in &probe {
                if table.total_rate(a, b, z) > IDENTITY_TOL {
                    live = true;
                    break 'probe;
                }
            }
        }
        if !live {
            return Err(Error::Config(format!("displacement {z:?} carries no rate anywhere")));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Single runs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub final_config: LatticeConfiguration,
    pub events: u64,
    /// Net signed transport: each applied batch contributes `k * z`, which
    /// counts signed crossings summed over all unit cuts.
    pub transport: i64,
}

pub fn run(
    table: &RateTable,
    eta0: &LatticeConfiguration,
    t_end: f64,
    stream: &EventStream,
) -> Result<Trajectory> {
    validate_initial(table, eta0)?;
    validate_live_displacements(table, &eta0.values)?;
    let geo = Geometry::build(table, eta0)?;
    let mut values = geo.extend(eta0);

    let nb = geo.bonds.len();
    let mut streams: Vec<SplitMix64> =
        geo.bonds.iter().map(|b| keyed_stream(stream.seed, geo.key(b))).collect();
    let mut gen = vec![0u32; nb];
    let mut heap: BinaryHeap<std::cmp::Reverse<Ev>> = BinaryHeap::with_capacity(nb * 2);

    let rate_of = |values: &[i64], b: &Bond| -> f64 {
        let z = [geo.z[b.disp as usize], 0];
        mass(&table.rate_vec(values[b.src as usize], values[b.dst as usize], z))
    };
    for bi in 0..nb {
        let r = rate_of(&values, &geo.bonds[bi]);
        if r > 0.0 {
            let dt = streams[bi].next_exp(r);
            heap.push(std::cmp::Reverse(Ev { t: dt, bond: bi as u32, gen: 0 }));
        }
    }

    let mut events = 0u64;
    let mut transport = 0i64;
    let mut affected: Vec<u32> = Vec::new();
    while let Some(std::cmp::Reverse(ev)) = heap.pop() {
        let bi = ev.bond as usize;
        if ev.gen != gen[bi] {
            continue;
        }
        if ev.t > t_end {
            break;
        }
        let b = geo.bonds[bi];
        let z = [geo.z[b.disp as usize], 0];
        let rates = table.rate_vec(values[b.src as usize], values[b.dst as usize], z);
        let total = mass(&rates);
        let mut pick = streams[bi].next_f64() * total;
        let mut k = 0usize;
        for (i, &r) in rates.iter().enumerate().skip(1) {
            if r <= 0.0 {
                continue;
            }
            k = i;
            pick -= r;
            if pick < 0.0 {
                break;
            }
        }
        events += 1;
        transport += k as i64 * i64::from(z[0]);
        affected.clear();
        if !geo.frozen[b.src as usize] {
            values[b.src as usize] -= k as i64;
            affected.extend_from_slice(&geo.touching[b.src as usize]);
        }
        if !geo.frozen[b.dst as usize] {
            values[b.dst as usize] += k as i64;
            affected.extend_from_slice(&geo.touching[b.dst as usize]);
        }
        affected.sort_unstable();
        affected.dedup();
        for &ai in &affected {
            let ai = ai as usize;
            gen[ai] += 1;
            let r = rate_of(&values, &geo.bonds[ai]);
            if r > 0.0 {
                let dt = streams[ai].next_exp(r);
                heap.push(std::cmp::Reverse(Ev { t: ev.t + dt, bond: ai as u32, gen: gen[ai] }));
            }
        }
    }

    Ok(Trajectory { final_config: geo.window_of(&values, eta0), events, transport })
}

// ---------------------------------------------------------------------------
// Coupled runs
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default)]
pub struct CoupledMonitors {
    /// Assert coordinatewise order of the marginals after every event.
    pub order: bool,
    /// Track the total positive discrepancy width for monotonicity.
    pub width: bool,
    /// Track the partial-sum bound; needs nearest-neighbor jumps and a
    /// closed window.
    pub stability: bool,
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub initial: i64,
    pub peak: i64,
    pub violated: bool,
    pub first_violation: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CoupledTrajectory {
    pub xi: LatticeConfiguration,
    pub zeta: LatticeConfiguration,
    pub events: u64,
    pub order_intact: bool,
    pub first_order_violation: Option<f64>,
    pub width_monotone: bool,
    pub stability: Option<StabilityReport>,
}

pub fn run_coupled(
    table: &RateTable,
    xi0: &LatticeConfiguration,
    zeta0: &LatticeConfiguration,
    t_end: f64,
    stream: &EventStream,
    monitors: CoupledMonitors,
) -> Result<CoupledTrajectory> {
    if xi0.origin != zeta0.origin
        || xi0.values.len() != zeta0.values.len()
        || xi0.boundary != zeta0.boundary
    {
        return Err(Error::InvalidInput(
            "coupled marginals must share window, origin, and boundary".into(),
        ));
    }
    validate_initial(table, xi0)?;
    validate_initial(table, zeta0)?;
    validate_live_displacements(table, &xi0.values)?;
    let geo = Geometry::build(table, xi0)?;
    let mut xi = geo.extend(xi0);
    let mut zeta = geo.extend(zeta0);

    if monitors.stability {
        if !geo.z.iter().all(|&d| d.abs() == 1) {
            return Err(Error::Precondition(
                "the partial-sum monitor needs nearest-neighbor jumps".into(),
            ));
        }
        if !matches!(xi0.boundary, Boundary::Closed) {
            return Err(Error::Precondition("the partial-sum monitor needs a closed window".into()));
        }
    }

    let nb = geo.bonds.len();
    let mut streams: Vec<SplitMix64> =
        geo.bonds.iter().map(|b| keyed_stream(stream.seed, geo.key(b))).collect();
    let mut gen = vec![0u32; nb];
    let mut heap: BinaryHeap<std::cmp::Reverse<Ev>> = BinaryHeap::with_capacity(nb * 2);

    let pair_rate = |xi: &[i64], zeta: &[i64], b: &Bond| -> f64 {
        let z = [geo.z[b.disp as usize], 0];
        let lo = mass(&table.rate_vec(xi[b.src as usize], xi[b.dst as usize], z));
        let hi = mass(&table.rate_vec(zeta[b.src as usize], zeta[b.dst as usize], z));
        lo.max(hi)
    };
    for bi in 0..nb {
        let r = pair_rate(&xi, &zeta, &geo.bonds[bi]);
        if r > 0.0 {
            let dt = streams[bi].next_exp(r);
            heap.push(std::cmp::Reverse(Ev { t: dt, bond: bi as u32, gen: 0 }));
        }
    }

    // Positive discrepancy width, maintained incrementally.
    let mut width: i64 = xi.iter().zip(&zeta).map(|(&a, &b)| (a - b).max(0)).sum();
    let mut width_monotone = true;

    // Partial sums over window cuts; cut i sits between window sites i and
    // i+1, and the final cut carries the total difference.
    let n_win = xi0.values.len();
    let mut cuts = vec![0i64; n_win];
    let mut acc = 0i64;
    for i in 0..n_win {
        acc += xi[geo.ghost + i] - zeta[geo.ghost + i];
        cuts[i] = acc;
    }
    let s0 = cuts.iter().map(|c| c.abs()).max().unwrap_or(0);
    let mut peak = s0;
    let mut first_violation = None;

    let mut order_intact = xi.iter().zip(&zeta).all(|(&a, &b)| a <= b);
    let mut first_order_violation = None;

    let mut events = 0u64;
    let mut affected: Vec<u32> = Vec::new();
    let mut staircase_pts: Vec<(u32, u32)> = Vec::new();
    let mut staircase_rates: Vec<f64> = Vec::new();
    while let Some(std::cmp::Reverse(ev)) = heap.pop() {
        let bi = ev.bond as usize;
        if ev.gen != gen[bi] {
            continue;
        }
        if ev.t > t_end {
            break;
        }
        let b = geo.bonds[bi];
        let (s, d) = (b.src as usize, b.dst as usize);
        let z = [geo.z[b.disp as usize], 0];
        let quad = Quad::new(xi[s], xi[d], zeta[s], zeta[d]);
        let path = crate::coupling::staircase(table, quad, z)?;
        staircase_pts.clear();
        staircase_pts.extend_from_slice(&path.points);
        staircase_rates.clear();
        staircase_rates.extend_from_slice(&path.rates);
        let total = pair_rate(&xi, &zeta, &b);
        let mut pick = streams[bi].next_f64() * total;
        let (mut k, mut l) = (0u32, 0u32);
        for (i, &(pk, pl)) in staircase_pts.iter().enumerate() {
            let r = staircase_rates[i];
            if r <= 0.0 {
                continue;
            }
            k = pk;
            l = pl;
            pick -= r;
            if pick < 0.0 {
                break;
            }
        }
        events += 1;
        let (k64, l64) = (i64::from(k), i64::from(l));
        affected.clear();
        let mut width_delta = 0i64;
        let before_src = (xi[s] - zeta[s]).max(0);
        let before_dst = (xi[d] - zeta[d]).max(0);
        if !geo.frozen[s] {
            xi[s] -= k64;
            zeta[s] -= l64;
            affected.extend_from_slice(&geo.touching[s]);
        }
        if !geo.frozen[d] {
            xi[d] += k64;
            zeta[d] += l64;
            affected.extend_from_slice(&geo.touching[d]);
        }
        width_delta += (xi[s] - zeta[s]).max(0) - before_src;
        width_delta += (xi[d] - zeta[d]).max(0) - before_dst;

        if monitors.width {
            width += width_delta;
            if width_delta > 0 {
                width_monotone = false;
            }
        }
        if monitors.order && order_intact && (xi[s] > zeta[s] || xi[d] > zeta[d]) {
            order_intact = false;
            first_order_violation = Some(ev.t);
        }
        if monitors.stability && k64 != l64 {
            // One batch crossing one unit cut shifts exactly one partial sum.
            let cut = s.min(d) - geo.ghost;
            let into_left = if d < s { k64 - l64 } else { l64 - k64 };
            cuts[cut] += into_left;
            let a = cuts[cut].abs();
            if a > peak {
                peak = a;
            }
            if a > s0 && first_violation.is_none() {
                first_violation = Some(ev.t);
            }
        }

        affected.sort_unstable();
        affected.dedup();
        for &ai in &affected {
            let ai = ai as usize;
            gen[ai] += 1;
            let r = pair_rate(&xi, &zeta, &geo.bonds[ai]);
            if r > 0.0 {
                let dt = streams[ai].next_exp(r);
                heap.push(std::cmp::Reverse(Ev { t: ev.t + dt, bond: ai as u32, gen: gen[ai] }));
            }
        }
    }
    let _ = width;

    Ok(CoupledTrajectory {
        xi: geo.window_of(&xi, xi0),
        zeta: geo.window_of(&zeta, zeta0),
        events,
        order_intact,
        first_order_violation,
        width_monotone,
        stability: monitors.stability.then_some(StabilityReport {
            initial: s0,
            peak,
            violated: peak > s0,
            first_violation,
        }),
    })
}

// ---------------------------------------------------------------------------
// Profiles and sampling
// ---------------------------------------------------------------------------

/// Block-averaged density on the macroscopic scale `x / n`. Full blocks
/// only; a trailing remainder shorter than `block` is dropped.
pub fn empirical_profile(config: &LatticeConfiguration, n: f64, block: usize) -> Vec<(f64, f64)> {
    assert!(block >= 1, "block size must be positive");
    let mut out = Vec::with_capacity(config.values.len() / block);
    let mut start = 0usize;
    while start + block <= config.values.len() {
        let sum: i64 = config.values[start..start + block].iter().sum();
        let center = config.origin as f64 + start as f64 + (block as f64 - 1.0) / 2.0;
        out.push((center / n, sum as f64 / block as f64));
        start += block;
    }
    out
}

/// Independent site values with the model's product marginal at density
/// `rho`; the window is closed so the draw can be used directly in runs
/// that conserve mass. For two-species tables the product family must
/// actually be invariant, otherwise the draw would misrepresent the
/// stationary state it claims to sample.
pub fn sample_product_measure(
    table: &RateTable,
    rho: f64,
    origin: i64,
    len: usize,
    seed: u64,
) -> Result<LatticeConfiguration> {
    if table.family_name() == "s2ep" {
        if let ProductCondition::Violated { residual } = check_s2ep_product_condition(table)? {
            return Err(Error::Precondition(format!(
                "no product invariant measures to sample: residual {residual:.3e}"
            )));
        }
    }
    let dist = site_distribution(table, rho)?;
    let mut rng = keyed_stream(seed, 0x5EED_5A17);
    let values = (0..len).map(|_| dist.draw(&mut rng)).collect();
    Ok(LatticeConfiguration::closed(origin, values))
}

/// Two-sided product sample: sites left of the origin draw from the density
/// `lambda` marginal, the rest from `rho`.
pub fn sample_step_profile(
    table: &RateTable,
    lambda: f64,
    rho: f64,
    origin: i64,
    len: usize,
    seed: u64,
) -> Result<LatticeConfiguration> {
    let left = site_distribution(table, lambda)?;
    let right = site_distribution(table, rho)?;
    let mut rng = keyed_stream(seed, 0x57E9_5A17);
    let values = (0..len)
        .map(|i| {
            let site = origin + i as i64;
            if site < 0 {
                left.draw(&mut rng)
            } else {
                right.draw(&mut rng)
            }
        })
        .collect();
    Ok(LatticeConfiguration::closed(origin, values))
}

// ---------------------------------------------------------------------------
