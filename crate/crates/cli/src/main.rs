use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::Rng;

use istn_core::baselines::{es_search, AlgorithmId, ES_STATE_BUDGET};
use istn_core::ciim::{run_world, SlotContext, World};
use istn_core::link_budget::LinkParams;
use istn_core::metrics_io::{emit, run_sweep, write_run, Format, SweepSpec};
use istn_core::scenario::Scenario;
use istn_core::uara::{associate_gus, uara_round, waterfill, UaraOptions};

#[derive(Parser)]
#[command(name = "istn-sim", version, about = "Integrated satellite-terrestrial downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario with one algorithm and write per-slot metrics.
    Run {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "ciim")]
        algo: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's slot count.
        #[arg(long)]
        slots: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a parameter sweep described by a TOML spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of csv, json, plotdata.
        #[arg(long, default_value = "csv,json,plotdata")]
        format: String,
    },
    /// Quick self-check of the optimizers on small random instances.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        instances: u64,
    },
    /// Write channel gains and geometry for the first slots.
    DumpChannels {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        slots: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Scenario> {
    let mut s = match path {
        Some(p) => Scenario::from_file(p).with_context(|| format!("loading {}", p.display()))?,
        None => Scenario::default(),
    };
    if let Some(seed) = seed {
        s.rng_seed = seed;
    }
    Ok(s)
}

fn cmd_run(scenario: Option<&Path>, algo: &str, seed: Option<u64>, slots: Option<usize>, out: &Path) -> Result<ExitCode> {
    let algo: AlgorithmId = algo.parse()?;
    let mut s = load(scenario, seed)?;
    if let Some(t) = slots {
        if t == 0 {
            bail!("--slots must be at least 1");
        }
        s.n_timeslots = t;
    }
    let world = World::build(&s)?;
    let sim = run_world(&world, algo)?;
    for p in write_run(&sim, out)? {
        println!("wrote {}", p.display());
    }
    let bad: Vec<usize> = sim.metrics.iter().filter(|m| !m.violations.is_empty()).map(|m| m.t).collect();
    if !bad.is_empty() {
        eprintln!("constraint violations in {} slot(s), first at t={}", bad.len(), bad[0]);
        if algo.enforces_cap() {
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(spec_path: &Path, out: &Path, formats: &str) -> Result<ExitCode> {
    let spec = SweepSpec::from_file(spec_path)?;
    let formats: Vec<Format> = formats.split(',').map(str::parse).collect::<istn_core::Result<_>>()?;
    let base = spec.base_scenario()?;
    let result = run_sweep(&spec, &base)?;
    for f in formats {
        for p in emit(&result, f, out)? {
            println!("wrote {}", p.display());
        }
    }
    let failed: usize = result.cells.iter().map(|c| c.failed).sum();
    if failed > 0 {
        eprintln!("{failed} run(s) failed; see the errors column");
    }
    Ok(ExitCode::SUCCESS)
}

fn small_scenario(seed: u64) -> Result<Scenario> {
    let mut s = Scenario::from_toml_str(
        r#"
        n_tbs = 2
        n_gu = 6
        n_sc_terrestrial = 2
        n_sc_leo = 2
        n_connect = 2
        n_timeslots = 3
        [caching]
        files = 6
        cache_capacity = 3
        [constellation]
        model = "walker"
        planes = 6
        sats_per_plane = 10
        altitude_m = 550000.0
        inclination_deg = 53.0
        "#,
    )?;
    s.rng_seed = seed;
    Ok(s)
}

fn check(name: &str, ok: bool, detail: String, failures: &mut usize) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        *failures += 1;
    }
}

fn cmd_validate(seed: u64, instances: u64) -> Result<ExitCode> {
    let mut failures = 0;

    let (mut worst_ratio, mut es_time, mut uara_time) = (f64::INFINITY, 0.0, 0.0);
    let mut worst_gap = f64::INFINITY;
    let mut violations = 0;
    for i in 0..instances {
        let s = small_scenario(seed + i)?;
        let world = World::build(&s)?;
        let ch = world.channels(1);
        let cache = world.cache(1);
        let lp = LinkParams::new(&s, &ch);
        let association = associate_gus(&ch.mean_terr);
        let ctx = SlotContext { scenario: &s, ch: &ch, cache: &cache, lp: &lp, association: &association };
        let zero = vec![0.0; s.n_tbs];
        let pb = ctx.terr_problem(&zero);
        let t0 = Instant::now();
        let es = es_search(pb, false, ES_STATE_BUDGET)?;
        es_time += t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        let opts = UaraOptions { power: istn_core::uara::PowerAllocation::Equal, ..UaraOptions::default() };
        let u = uara_round(pb, &opts);
        uara_time += t0.elapsed().as_secs_f64();
        let v = istn_core::uara::terrestrial_utility(&u.provisional, &pb);
        if es.value > 0.0 {
            worst_ratio = worst_ratio.min(v / es.value);
        }

        let sim = run_world(&world, AlgorithmId::Ciim)?;
        for m in &sim.metrics {
            if !m.violations.is_empty() {
                violations += 1;
            }
        }
        let sol = istn_core::baselines::solve_slot(
            AlgorithmId::Ciim,
            &ctx,
            None,
            &zero,
            &istn_core::ciim::CiimOptions::from_scenario(&s),
        )?;
        for r in &sol.dual.history {
            if let Some(best) = r.best_primal {
                worst_gap = worst_gap.min(r.dual_bound - best);
            }
        }
    }
    check(
        "es-parity",
        worst_ratio >= 0.99,
        format!("worst matching/ES ratio {worst_ratio:.4}, matching {uara_time:.3}s vs ES {es_time:.3}s"),
        &mut failures,
    );
    check("weak-duality", worst_gap >= -1e-6, format!("smallest bound minus best primal {worst_gap:.3e}"), &mut failures);
    check("constraints", violations == 0, format!("{violations} violating slot(s)"), &mut failures);

    let mut worst_kkt: f64 = 0.0;
    let mut rng = istn_core::rng::stream_rng(seed, istn_core::rng::Stream::Instance, 0);
    for _ in 0..200 {
        let c = rng.random_range(1..=8);
        let n_eff: Vec<f64> = (0..c).map(|_| 10f64.powf(rng.random_range(-3.0..0.0))).collect();
        let p = rng.random_range(0.1..10.0);
        let w = waterfill(&n_eff, p);
        let total: f64 = w.powers.iter().sum();
        worst_kkt = worst_kkt.max((total - p).abs() / p);
        for (q, n) in w.powers.iter().zip(&n_eff) {
            if *q > 0.0 {
                worst_kkt = worst_kkt.max(((q + n) - w.mu).abs() / w.mu);
            }
        }
    }
    check("water-filling", worst_kkt <= 1e-6, format!("worst relative KKT residual {worst_kkt:.2e}"), &mut failures);

    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_dump(scenario: Option<&Path>, seed: Option<u64>, slots: usize, out: &Path) -> Result<ExitCode> {
    let s = load(scenario, seed)?;
    let world = World::build(&s)?;
    for t in 1..=slots.min(s.n_timeslots) {
        world.channels(t).dump_csv(out)?;
    }
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Run { scenario, algo, seed, slots, out } => cmd_run(scenario.as_deref(), algo, *seed, *slots, out),
        Command::Sweep { spec, out, format } => cmd_sweep(spec, out, format),
        Command::Validate { seed, instances } => cmd_validate(*seed, *instances),
        Command::DumpChannels { scenario, seed, slots, out } => cmd_dump(scenario.as_deref(), *seed, *slots, out),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
