//! `misan`: checks, simulations, and hydrodynamic experiments for
//! conservative lattice particle systems with batch jumps.
//!
//! Every subcommand is deterministic given its flags: all randomness flows
//! from `--seed`, replica work is merged by index regardless of `--jobs`,
//! and output headers embed the full configuration. Check-style subcommands
//! exit nonzero when the property they test fails.

mod output;
mod runs;

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use misan::coupling::{
    check_attractive, detect_exchanges, random_attractive_rates, s2ep_reference_entries,
    Attractiveness, CouplingTable, ExchangeScan, Quad, ViolationSide, S2EP_PAIRS,
};
use misan::hydro::{
    compare_profiles, flux_from_measure, microscopic_current, riemann_solve, s2ep_flux,
    site_distribution, stp_flux, EntropySolution, FluxModel, SiteDist, Wave,
};
use misan::irreducibility::{check_ic, IcFailure, IcVerdict, WedgeFailure};
use misan::rates::{build_s2ep, Disp, RateTable};
use misan::simulate::{
    empirical_profile, run, run_coupled, sample_product_measure, sample_step_profile,
    CoupledMonitors, EventStream, LatticeConfiguration, SplitMix64,
};

use output::{bad, good, line_chart_svg, parse_config, write_text, ExperimentConfig};
use runs::{replica_map, replica_seed, site_uniform};

#[derive(Parser)]
#[command(name = "misan", version, about = "Coupled lattice particle systems: checks, simulation, hydrodynamics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scan all ordered pairs for violations of the partial-sum order
    /// conditions; exits 1 with a witness if the model is not attractive.
    CheckAttractive(CheckAttractiveArgs),
    /// Print the coupled jump rates of one quadruple as CSV.
    BuildCoupling(BuildCouplingArgs),
    /// Scan the coupling for exchange entries (moves that swap opposite
    /// discrepancies); exits 1 if any exist.
    DetectExchanges(DetectExchangesArgs),
    /// Check that coupled discrepancies can always be reduced, directly or
    /// through wedges; exits 1 with a witness otherwise.
    CheckIc(CheckIcArgs),
    /// Run the single-process dynamics from product initial data and write
    /// block-averaged density profiles.
    Simulate(SimulateArgs),
    /// Run two coupled marginals from ordered initial data and monitor
    /// order, discrepancy width, and the partial-sum bound.
    SimulateCoupled(SimulateCoupledArgs),
    /// Solve a Riemann problem with the flux envelope and compare against
    /// Monte Carlo profiles; writes CSV and optionally SVG.
    HydroRiemann(HydroRiemannArgs),
    /// Tabulate the closed-form flux against the measure-sampled flux.
    FluxTable(FluxTableArgs),
    /// Regression of the two-species coupling against its reference table
    /// on random attractive rate vectors.
    #[command(name = "regress-table1")]
    RegressTable1(RegressTable1Args),
}

#[derive(clap::Args)]
struct CheckAttractiveArgs {
    /// Model configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Value window for unbounded state spaces.
    #[arg(long, default_value_t = 10)]
    values: i64,
}

#[derive(clap::Args)]
struct BuildCouplingArgs {
    #[arg(long)]
    config: PathBuf,
    /// The four site values: alpha beta gamma delta.
    #[arg(long, num_args = 4, allow_negative_numbers = true, value_names = ["ALPHA", "BETA", "GAMMA", "DELTA"])]
    quad: Vec<i64>,
    /// Jump displacement, one or two comma-separated coordinates.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    z: String,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct DetectExchangesArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 10)]
    values: i64,
}

#[derive(clap::Args)]
struct CheckIcArgs {
    #[arg(long)]
    config: PathBuf,
    /// Site radius for wedge-chain connectivity.
    #[arg(long, default_value_t = 4)]
    window: i64,
    #[arg(long, default_value_t = 10)]
    values: i64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundaryKind {
    Periodic,
    Closed,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of lattice sites.
    #[arg(long = "L")]
    length: usize,
    /// Simulated time horizon.
    #[arg(long = "T")]
    t_end: f64,
    /// Initial product-measure density.
    #[arg(long)]
    rho: f64,
    #[arg(long, value_enum, default_value_t = BoundaryKind::Periodic)]
    boundary: BoundaryKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    /// Worker threads for replicas.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Sites per profile block.
    #[arg(long, default_value_t = 1)]
    block: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimulateCoupledArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "L")]
    length: usize,
    #[arg(long = "T")]
    t_end: f64,
    /// Density of the lower marginal.
    #[arg(long, allow_hyphen_values = true)]
    rho_low: f64,
    /// Density of the higher marginal.
    #[arg(long, allow_hyphen_values = true)]
    rho_high: f64,
    #[arg(long, value_enum, default_value_t = BoundaryKind::Closed)]
    boundary: BoundaryKind,
    /// Also track the partial-sum stability bound (needs a closed window
    /// and nearest-neighbor jumps).
    #[arg(long)]
    stability: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 1)]
    block: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct HydroRiemannArgs {
    #[arg(long)]
    config: PathBuf,
    /// Density left of the origin.
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    /// Density right of the origin.
    #[arg(long, allow_hyphen_values = true)]
    rho: f64,
    /// Scaling parameter: lattice units per macroscopic unit.
    #[arg(long = "N", default_value_t = 1000)]
    n: usize,
    /// Macroscopic time of the comparison.
    #[arg(long = "t", default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 10)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Sites per profile block; N/100 when omitted.
    #[arg(long)]
    block: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG overlay plot.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(clap::Args)]
struct FluxTableArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long, default_value_t = 21)]
    points: usize,
    /// Monte Carlo samples per grid point for the measured column.
    #[arg(long, default_value_t = 20000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct RegressTable1Args {
    #[arg(long, default_value_t = 1000)]
    vectors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    match run_subcommand(cli.cmd) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("{}: {err:#}", bad("error"));
            std::process::exit(1);
        }
    }
}

fn run_subcommand(cmd: Cmd) -> anyhow::Result<i32> {
    match cmd {
        Cmd::CheckAttractive(a) => cmd_check_attractive(a),
        Cmd::BuildCoupling(a) => cmd_build_coupling(a),
        Cmd::DetectExchanges(a) => cmd_detect_exchanges(a),
        Cmd::CheckIc(a) => cmd_check_ic(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::SimulateCoupled(a) => cmd_simulate_coupled(a),
        Cmd::HydroRiemann(a) => cmd_hydro_riemann(a),
        Cmd::FluxTable(a) => cmd_flux_table(a),
        Cmd::RegressTable1(a) => cmd_regress_table1(a),
    }
}

fn parse_disp(text: &str) -> anyhow::Result<Disp> {
    let coords: Vec<i32> = text
        .split(',')
        .map(|c| c.trim().parse::<i32>().with_context(|| format!("bad displacement `{text}`")))
        .collect::<anyhow::Result<_>>()?;
    match coords.as_slice() {
        [z] => Ok([*z, 0]),
        [zx, zy] => Ok([*zx, *zy]),
        _ => bail!("displacement needs 1 or 2 coordinates, got `{text}`"),
    }
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

fn cmd_check_attractive(a: CheckAttractiveArgs) -> anyhow::Result<i32> {
    let (table, _) = parse_config(&a.config)?;
    println!("model family: {}", table.family_name());
    match check_attractive(&table, a.values)? {
        Attractiveness::Attractive => {
            println!("verdict: {}", good("attractive"));
            Ok(0)
        }
        Attractiveness::Violation(v) => {
            let side = match v.side {
                ViolationSide::Upward => "the lower pair out-jumps the higher pair",
                ViolationSide::Downward => "the higher pair's shifted tail is too heavy",
            };
            println!("verdict: {}", bad("NOT attractive"));
            println!(
                "witness: quadruple (alpha, beta, gamma, delta) = ({}, {}, {}, {}), \
                 level k = {}, displacement z = [{}, {}]",
                v.quad.alpha, v.quad.beta, v.quad.gamma, v.quad.delta, v.level, v.z[0], v.z[1]
            );
            println!("         {side}");
            Ok(1)
        }
    }
}

fn cmd_build_coupling(a: BuildCouplingArgs) -> anyhow::Result<i32> {
    let (table, text) = parse_config(&a.config)?;
    let z = parse_disp(&a.z)?;
    let quad = Quad::new(a.quad[0], a.quad[1], a.quad[2], a.quad[3]);
    let coupling = CouplingTable::build(&table, quad, z)?;
    let total: f64 = coupling.entries.values().sum();

    let mut cfg = ExperimentConfig::new(0);
    cfg.param("family", table.family_name());
    cfg.param("quad", format!("({}, {}, {}, {})", quad.alpha, quad.beta, quad.gamma, quad.delta));
    cfg.param("z", format!("[{}, {}]", z[0], z[1]));
    cfg.param("total_rate", total);
    cfg.config_text = Some(text);

    let mut body = cfg.header("k,l,rate");
    for (&(k, l), &rate) in &coupling.entries {
        let _ = writeln!(body, "{k},{l},{rate}");
    }
    write_text(a.out.as_ref(), &body)?;
    eprintln!("{} nonzero coupled moves, total rate {total}", coupling.entries.len());
    Ok(0)
}

fn cmd_detect_exchanges(a: DetectExchangesArgs) -> anyhow::Result<i32> {
    let (table, _) = parse_config(&a.config)?;
    println!("model family: {}", table.family_name());
    match detect_exchanges(&table, a.values)? {
        ExchangeScan::None => {
            println!("verdict: {}", good("no exchange entries"));
            Ok(0)
        }
        ExchangeScan::Witness(w) => {
            println!("verdict: {}", bad("exchange entries present"));
            println!(
                "witness: quadruple ({}, {}, {}, {}), batches (k, l) = ({}, {}), \
                 z = [{}, {}], rate {}",
                w.quad.alpha, w.quad.beta, w.quad.gamma, w.quad.delta, w.k, w.l, w.z[0], w.z[1],
                w.rate
            );
            Ok(1)
        }
    }
}

fn cmd_check_ic(a: CheckIcArgs) -> anyhow::Result<i32> {
    let (table, _) = parse_config(&a.config)?;
    let report = check_ic(&table, a.window, a.values)?;
    println!("model family: {}", table.family_name());
    println!(
        "edges with positive rate: {}",
        report
            .edges
            .iter()
            .map(|z| format!("[{}, {}]", z[0], z[1]))
            .collect::<Vec<_>>()
            .join(" ")
    );
    for cov in &report.coverage {
        println!(
            "edge [{}, {}]: forward covers {:?}, backward covers {:?}",
            cov.edge[0], cov.edge[1], cov.forward, cov.backward
        );
    }
    match &report.verdict {
        IcVerdict::SatisfiedViaFullCoverage => {
            println!("verdict: {} (full coverage on every edge)", good("satisfied"));
            Ok(0)
        }
        IcVerdict::SatisfiedViaWedges { wedges } => {
            let list = wedges
                .iter()
                .map(|w| format!("([{}, {}], [{}, {}])", w.first[0], w.first[1], w.second[0], w.second[1]))
                .collect::<Vec<_>>()
                .join(" ");
            println!("verdict: {} (coverage gaps repaired by wedges {list})", good("satisfied"));
            Ok(0)
        }
        IcVerdict::Failed(f) => {
            println!("verdict: {}", bad("FAILED"));
            match f {
                IcFailure::NoEdges => println!("witness: no displacement carries any rate"),
                IcFailure::NotConnected => {
                    println!("witness: the rate-positive displacements do not span the lattice")
                }
                IcFailure::NoDecreasingPath { edge, quad } => println!(
                    "witness: quadruple ({}, {}, {}, {}) admits no discrepancy-reducing path \
                     across edge [{}, {}]",
                    quad.alpha, quad.beta, quad.gamma, quad.delta, edge[0], edge[1]
                ),
                IcFailure::TransferGap { edge, missing_forward, missing_backward, wedge_failure } => {
                    println!(
                        "witness: edge [{}, {}] leaves arrival values uncovered \
                         (forward {missing_forward:?}, backward {missing_backward:?})",
                        edge[0], edge[1]
                    );
                    match wedge_failure {
                        WedgeFailure::NoAdmissibleWedges => {
                            println!("         and no admissible wedge family repairs the gap")
                        }
                        WedgeFailure::NotChainConnected { target } => println!(
                            "         and wedge chains never reach offset [{}, {}]",
                            target[0], target[1]
                        ),
                    }
                }
            }
            Ok(1)
        }
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct SingleRun {
    events: u64,
    transport: i64,
    mean: f64,
    profile: Vec<(f64, f64)>,
}

fn cmd_simulate(a: SimulateArgs) -> anyhow::Result<i32> {
    let (table, text) = parse_config(&a.config)?;
    if a.block == 0 || a.length % a.block != 0 {
        bail!("--block must divide --L");
    }

    let mut cfg = ExperimentConfig::new(a.seed);
    cfg.param("family", table.family_name());
    cfg.param("L", a.length);
    cfg.param("T", a.t_end);
    cfg.param("rho", a.rho);
    cfg.param("boundary", if a.boundary == BoundaryKind::Periodic { "periodic" } else { "closed" });
    cfg.param("replicas", a.replicas);
    cfg.param("block", a.block);
    cfg.config_text = Some(text);

    let results: Vec<anyhow::Result<SingleRun>> = replica_map(a.replicas, a.jobs, |r| {
        let rs = replica_seed(a.seed, r);
        let drawn = sample_product_measure(&table, a.rho, 0, a.length, rs)?;
        let eta0 = match a.boundary {
            BoundaryKind::Periodic => LatticeConfiguration::torus(drawn.values),
            BoundaryKind::Closed => drawn,
        };
        let traj = run(&table, &eta0, a.t_end, &EventStream::new(rs))?;
        let total: i64 = traj.final_config.values.iter().sum();
        Ok(SingleRun {
            events: traj.events,
            transport: traj.transport,
            mean: total as f64 / a.length as f64,
            profile: empirical_profile(&traj.final_config, 1.0, a.block),
        })
    });

    let mut body = cfg.header("replica,x,density");
    for (r, res) in results.into_iter().enumerate() {
        let res = res.with_context(|| format!("replica {r}"))?;
        eprintln!(
            "replica {r}: events {}, net transport {}, mean density {:.6}, \
             mean current {:.6}",
            res.events,
            res.transport,
            res.mean,
            res.transport as f64 / (a.length as f64 * a.t_end)
        );
        for (x, v) in res.profile {
            let _ = writeln!(body, "{r},{x},{v}");
        }
    }
    write_text(a.out.as_ref(), &body)?;
    Ok(0)
}

struct CoupledRun {
    events: u64,
    order_intact: bool,
    width_monotone: bool,
    stability_line: String,
    stability_ok: bool,
    xi_profile: Vec<(f64, f64)>,
    zeta_profile: Vec<(f64, f64)>,
}

fn cmd_simulate_coupled(a: SimulateCoupledArgs) -> anyhow::Result<i32> {
    let (table, text) = parse_config(&a.config)?;
    if a.block == 0 || a.length % a.block != 0 {
        bail!("--block must divide --L");
    }
    if a.rho_low > a.rho_high {
        bail!("--rho-low must not exceed --rho-high");
    }
    let dist_lo = site_distribution(&table, a.rho_low)?;
    let dist_hi = site_distribution(&table, a.rho_high)?;

    let mut cfg = ExperimentConfig::new(a.seed);
    cfg.param("family", table.family_name());
    cfg.param("L", a.length);
    cfg.param("T", a.t_end);
    cfg.param("rho_low", a.rho_low);
    cfg.param("rho_high", a.rho_high);
    cfg.param("boundary", if a.boundary == BoundaryKind::Periodic { "periodic" } else { "closed" });
    cfg.param("stability", a.stability);
    cfg.param("replicas", a.replicas);
    cfg.param("block", a.block);
    cfg.config_text = Some(text);

    let monitors = CoupledMonitors { order: true, width: true, stability: a.stability };
    let results: Vec<anyhow::Result<CoupledRun>> = replica_map(a.replicas, a.jobs, |r| {
        let rs = replica_seed(a.seed, r);
        // The marginals share one uniform per site, so the initial pair is
        // ordered sitewise.
        let mut lo = Vec::with_capacity(a.length);
        let mut hi = Vec::with_capacity(a.length);
        for i in 0..a.length {
            let u = site_uniform(rs ^ 0xC01D_DA7A, i as i64);
            lo.push(dist_lo.draw_from(u));
            hi.push(dist_hi.draw_from(u));
        }
        let (xi0, zeta0) = match a.boundary {
            BoundaryKind::Periodic => {
                (LatticeConfiguration::torus(lo), LatticeConfiguration::torus(hi))
            }
            BoundaryKind::Closed => {
                (LatticeConfiguration::closed(0, lo), LatticeConfiguration::closed(0, hi))
            }
        };
        let out = run_coupled(&table, &xi0, &zeta0, a.t_end, &EventStream::new(rs), monitors)?;
        let (stability_line, stability_ok) = match &out.stability {
            Some(rep) => (
                format!(
                    "initial bound {}, peak {}, {}",
                    rep.initial,
                    rep.peak,
                    if rep.violated {
                        format!("violated at t = {:.6}", rep.first_violation.unwrap_or(f64::NAN))
                    } else {
                        "never violated".to_string()
                    }
                ),
                !rep.violated,
            ),
            None => ("not tracked".to_string(), true),
        };
        Ok(CoupledRun {
            events: out.events,
            order_intact: out.order_intact,
            width_monotone: out.width_monotone,
            stability_line,
            stability_ok,
            xi_profile: empirical_profile(&out.xi, 1.0, a.block),
            zeta_profile: empirical_profile(&out.zeta, 1.0, a.block),
        })
    });

    let mut all_ok = true;
    let mut body = cfg.header("replica,x,xi,zeta");
    for (r, res) in results.into_iter().enumerate() {
        let res = res.with_context(|| format!("replica {r}"))?;
        let ok = res.order_intact && res.width_monotone && res.stability_ok;
        all_ok &= ok;
        eprintln!(
            "replica {r}: events {}, order intact: {}, width monotone: {}, stability: {}",
            res.events,
            if res.order_intact { good("yes") } else { bad("NO") },
            if res.width_monotone { good("yes") } else { bad("NO") },
            res.stability_line
        );
        for ((x, xi), (_, zeta)) in res.xi_profile.into_iter().zip(res.zeta_profile) {
            let _ = writeln!(body, "{r},{x},{xi},{zeta}");
        }
    }
    write_text(a.out.as_ref(), &body)?;
    if all_ok {
        eprintln!("verdict: {}", good("all monitors clean"));
        Ok(0)
    } else {
        eprintln!("verdict: {}", bad("monitor violation"));
        Ok(1)
    }
}

// ---------------------------------------------------------------------------
// Hydrodynamics
// ---------------------------------------------------------------------------

/// Closed-form flux dispatch for the families with explicit product
/// measures.
fn closed_flux(table: &RateTable, rho: f64) -> anyhow::Result<f64> {
    match table.family_name() {
        "stp" => {
            let p1 = microscopic_current(table, 1, 0)?;
            let pm1 = -microscopic_current(table, 0, 1)?;
            Ok(stp_flux(p1, pm1, rho))
        }
        "s2ep" => Ok(s2ep_flux(table, rho)?),
        "sep" => {
            let p = match site_distribution(table, rho)? {
                SiteDist::Bernoulli { p } => p,
                _ => unreachable!("exclusion sites are Bernoulli"),
            };
            let mut g = 0.0;
            for (a, pa) in [(0i64, 1.0 - p), (1, p)] {
                for (b, pb) in [(0i64, 1.0 - p), (1, p)] {
                    g += pa * pb * microscopic_current(table, a, b)?;
                }
            }
            Ok(g)
        }
        other => bail!("no closed-form flux is wired for family {other}"),
    }
}

fn flux_model_for(table: &RateTable) -> anyhow::Result<FluxModel> {
    match table.family_name() {
        "stp" => {
            let p1 = microscopic_current(table, 1, 0)?;
            let pm1 = -microscopic_current(table, 0, 1)?;
            Ok(FluxModel::stick(p1, pm1))
        }
        "s2ep" => Ok(FluxModel::two_species(table)?),
        "sep" => {
            let mut j = [[0.0f64; 2]; 2];
            for a in 0..2i64 {
                for b in 0..2i64 {
                    j[a as usize][b as usize] = microscopic_current(table, a, b)?;
                }
            }
            Ok(FluxModel::from_fn("exclusion", move |rho| {
                let p = [1.0 - rho, rho];
                let mut g = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        g += p[a] * p[b] * j[a][b];
                    }
                }
                g
            }))
        }
        other => bail!("no hydrodynamic flux is wired for family {other}"),
    }
}

/// Largest flux slope magnitude over the density hull of {0, lambda, rho},
/// clamped to the value set's bounds. Bounds the speed of every wave and
/// wall fan the closed-window run can produce.
fn max_flux_slope(model: &FluxModel, table: &RateTable, lambda: f64, rho: f64) -> f64 {
    let mut lo = lambda.min(rho).min(0.0);
    let mut hi = lambda.max(rho).max(0.0);
    if let Some((xlo, xhi)) = table.value_set().bounds() {
        lo = lo.max(xlo as f64);
        hi = hi.min(xhi as f64);
    }
    if hi <= lo {
        return 0.0;
    }
    let steps = 512;
    let du = (hi - lo) / steps as f64;
    let mut smax = 0.0f64;
    let mut prev = model.eval(lo);
    for i in 1..=steps {
        let g = model.eval(lo + du * i as f64);
        smax = smax.max(((g - prev) / du).abs());
        prev = g;
    }
    smax
}

fn max_wave_speed(sol: &EntropySolution) -> f64 {
    let mut s = 0.0f64;
    for w in &sol.waves {
        match *w {
            Wave::Shock { speed, .. } | Wave::Contact { speed, .. } => s = s.max(speed.abs()),
            Wave::Rarefaction { lo, hi, .. } => s = s.max(lo.abs()).max(hi.abs()),
        }
    }
    s
}

fn describe_waves(sol: &EntropySolution) -> String {
    if sol.waves.is_empty() {
        return "constant (no waves)".to_string();
    }
    sol.waves
        .iter()
        .map(|w| match *w {
            Wave::Shock { speed, left, right } => {
                format!("shock at speed {speed:.6} ({left:.6} -> {right:.6})")
            }
            Wave::Contact { speed, left, right } => {
                format!("contact at speed {speed:.6} ({left:.6} -> {right:.6})")
            }
            Wave::Rarefaction { lo, hi, left, right } => {
                format!("fan over speeds [{lo:.6}, {hi:.6}] ({left:.6} -> {right:.6})")
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn cmd_hydro_riemann(a: HydroRiemannArgs) -> anyhow::Result<i32> {
    let (table, text) = parse_config(&a.config)?;
    let model = flux_model_for(&table)?;
    let sol = riemann_solve(&model, a.lambda, a.rho);
    eprintln!("entropy solution: {}", describe_waves(&sol));
    eprintln!("max Rankine-Hugoniot residual: {:.3e}", sol.max_rankine_hugoniot_residual(&model));

    let n = a.n as i64;
    let block = a.block.unwrap_or_else(|| (a.n / 100).max(1));
    if block == 0 {
        bail!("--block must be positive");
    }
    // The window is closed, so each wall starts a drainage or pile-up fan
    // besides the Riemann waves themselves. All of these move no faster
    // than the largest flux slope over the density hull of {0, lambda,
    // rho}, so a window sized from that bound keeps wall effects away from
    // the measured center.
    let slope = max_flux_slope(&model, &table, a.lambda, a.rho).max(max_wave_speed(&sol));
    let mut half = ((a.n as f64) * (1.25 * slope * a.t + 0.75)).ceil() as i64;
    half = half.max(2 * n);
    let b = block as i64;
    half = (half + b - 1) / b * b;
    let len = (2 * half) as usize;

    let mut cfg = ExperimentConfig::new(a.seed);
    cfg.param("family", table.family_name());
    cfg.param("lambda", a.lambda);
    cfg.param("rho", a.rho);
    cfg.param("N", a.n);
    cfg.param("t", a.t);
    cfg.param("replicas", a.replicas);
    cfg.param("block", block);
    cfg.param("window", format!("[{}, {}]", -half, half));
    cfg.config_text = Some(text);

    let results: Vec<anyhow::Result<Vec<(f64, f64)>>> = replica_map(a.replicas, a.jobs, |r| {
        let rs = replica_seed(a.seed, r);
        let eta0 = sample_step_profile(&table, a.lambda, a.rho, -half, len, rs)?;
        let traj = run(&table, &eta0, a.n as f64 * a.t, &EventStream::new(rs))?;
        eprintln!("replica {r}: events {}", traj.events);
        Ok(empirical_profile(&traj.final_config, a.n as f64, block))
    });

    let mut avg: Vec<(f64, f64)> = Vec::new();
    let mut count = 0usize;
    for (r, res) in results.into_iter().enumerate() {
        let profile = res.with_context(|| format!("replica {r}"))?;
        if avg.is_empty() {
            avg = profile;
        } else {
            for (acc, p) in avg.iter_mut().zip(profile) {
                acc.1 += p.1;
            }
        }
        count += 1;
    }
    for p in avg.iter_mut() {
        p.1 /= count as f64;
    }

    let extent = 0.8 * half as f64 / a.n as f64;
    let l1 = compare_profiles(&avg, &sol, a.t, -extent, extent);
    eprintln!("L1(empirical, entropy) on [{:.3}, {:.3}]: {l1:.6}", -extent, extent);

    let mut body = cfg.header("xi,u_entropy,u_empirical");
    for &(xi, v) in &avg {
        let u = sol.eval(xi / a.t);
        let _ = writeln!(body, "{xi},{u},{v}");
    }
    write_text(a.out.as_ref(), &body)?;

    if let Some(svg_path) = &a.svg {
        let entropy_pts: Vec<(f64, f64)> =
            avg.iter().map(|&(xi, _)| (xi, sol.eval(xi / a.t))).collect();
        let title = format!(
            "{} Riemann {} -> {} at t = {}",
            table.family_name(),
            a.lambda,
            a.rho,
            a.t
        );
        let svg = line_chart_svg(
            &cfg,
            &title,
            &[
                ("entropy solution", "#1f77b4", &entropy_pts),
                ("empirical profile", "#d62728", &avg),
            ],
        );
        write_text(Some(svg_path), &svg)?;
    }
    Ok(0)
}

fn cmd_flux_table(a: FluxTableArgs) -> anyhow::Result<i32> {
    let (table, text) = parse_config(&a.config)?;
    if a.points < 2 {
        bail!("--points must be at least 2");
    }

    let mut cfg = ExperimentConfig::new(a.seed);
    cfg.param("family", table.family_name());
    cfg.param("lo", a.lo);
    cfg.param("hi", a.hi);
    cfg.param("points", a.points);
    cfg.param("samples", a.samples);
    cfg.config_text = Some(text);

    let mut body = cfg.header("rho,g_closed,g_measured,stderr");
    let mut worst = 0.0f64;
    for i in 0..a.points {
        let rho = a.lo + (a.hi - a.lo) * i as f64 / (a.points - 1) as f64;
        let closed = closed_flux(&table, rho)?;
        let (measured, err) = flux_from_measure(&table, rho, a.samples, replica_seed(a.seed, i))?;
        if err > 0.0 {
            worst = worst.max((closed - measured).abs() / err);
        }
        let _ = writeln!(body, "{rho},{closed},{measured},{err}");
    }
    write_text(a.out.as_ref(), &body)?;
    eprintln!("largest |closed - measured| / stderr: {worst:.3}");
    Ok(0)
}

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

fn cmd_regress_table1(a: RegressTable1Args) -> anyhow::Result<i32> {
    let mut rng = SplitMix64::new(a.seed);
    let mut worst = 0.0f64;
    let mut worst_at = String::new();

    for v in 0..a.vectors {
        let rates = random_attractive_rates(&mut rng);
        let table = build_s2ep(rates)?;
        for (zi, z) in [(0usize, [1, 0]), (1, [-1, 0])] {
            let reference = s2ep_reference_entries(
                rates.g1_0m1[zi],
                rates.g2_1m1[zi],
                rates.g1_1m1[zi],
                rates.g1_00[zi],
                rates.g1_10[zi],
            );
            for &xi in &S2EP_PAIRS {
                for &zeta in &S2EP_PAIRS {
                    let quad = Quad::new(xi.0, xi.1, zeta.0, zeta.1);
                    let coupling = CouplingTable::build(&table, quad, z)?;
                    // Union of the constructed and reference supports;
                    // absent means zero on either side.
                    let mut keys: Vec<(u32, u32)> = coupling.entries.keys().copied().collect();
                    for (&(rxi, kl, rzeta), _) in &reference {
                        if rxi == xi && rzeta == zeta && !keys.contains(&kl) {
                            keys.push(kl);
                        }
                    }
                    for kl in keys {
                        let built = coupling.entries.get(&kl).copied().unwrap_or(0.0);
                        let expected =
                            reference.get(&(xi, kl, zeta)).copied().unwrap_or(0.0);
                        let dev = (built - expected).abs();
                        if dev > worst {
                            worst = dev;
                            worst_at = format!(
                                "vector {v}, pair ({}, {}) -> ({}, {}), batches ({}, {}), \
                                 z = [{}, {}]",
                                xi.0, xi.1, zeta.0, zeta.1, kl.0, kl.1, z[0], z[1]
                            );
                        }
                    }
                }
            }
        }
    }

    println!(
        "{} random attractive rate vectors, both directions, all {} pair blocks",
        a.vectors,
        S2EP_PAIRS.len() * S2EP_PAIRS.len()
    );
    println!("max |constructed - reference| = {worst:.3e}");
    if worst < 1e-12 {
        println!("verdict: {}", good("PASS"));
        Ok(0)
    } else {
        println!("verdict: {} ({worst_at})", bad("FAIL"));
        Ok(1)
    }
}
