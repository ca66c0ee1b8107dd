//! Lagrangian outer loop coordinating the satellite and terrestrial matchings.
//!
//! Each iteration matches satellites and GUs under the current multipliers,
//! evicts backhaul GUs where the backhaul constraint fails, and takes a projected
//! subgradient step on λ. The best feasible iterate is returned together with a
//! certified upper bound on the dual function.

use crate::baselines::{sat_stage, AlgorithmId};
use crate::caching::{CachePlacement, CacheState};
use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::imish::{HandoverLog, ImishOptions, ImishOutcome, SatMatching};
use crate::link_budget::{
    backhaul_capacity, backhaul_load, check_constraints, geo_gs_cinr, geo_gs_interference, sum_rate,
    terrestrial_rates, AssignmentB, AssignmentX, ConstraintId, ConstraintReport, LinkParams,
};
use crate::metrics_io::SlotMetrics;
use crate::scenario::{ConstellationState, Nodes, Scenario};
use crate::uara::{allocate_power, associate_gus, uara_round, waterfill, PowerAllocation, TerrProblem, UaraOptions};
use crate::units::linear_to_db;

/// Everything fixed within one slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotContext<'a> {
    pub scenario: &'a Scenario,
    pub ch: &'a ChannelState,
    pub cache: &'a CacheState,
    pub lp: &'a LinkParams,
    pub association: &'a [usize],
}

impl<'a> SlotContext<'a> {
    pub fn terr_problem(&self, lambda: &'a [f64]) -> TerrProblem<'a> {
        TerrProblem {
            h: &self.ch.h_terr,
            cache: self.cache,
            association: self.association,
            lp: self.lp,
            lambda,
        }
    }
}

/// How the satellite side is matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatStrategy {
    Imish { handover: bool },
    /// Random subchannel per (TBS, satellite) pair, then the IMISH machinery.
    Rraihm,
    /// Nearest satellites, lowest free subchannel.
    Mdh,
    /// Highest interference-free rate first.
    Greedy,
    Random,
}

impl SatStrategy {
    /// Whether the interference cap is enforced.
    pub fn protects_gs(self) -> bool {
        matches!(self, SatStrategy::Imish { handover: true } | SatStrategy::Rraihm | SatStrategy::Mdh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pipeline {
    pub sat: SatStrategy,
    pub power: PowerAllocation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiimOptions {
    pub theta0: f64,
    pub beta: f64,
    pub max_iterations: usize,
    pub tol: f64,
    pub imish: ImishOptions,
    pub uara: UaraOptions,
}

impl CiimOptions {
    pub fn from_scenario(s: &Scenario) -> Self {
        let a = &s.algorithm;
        CiimOptions {
            theta0: a.theta0,
            beta: a.beta,
            max_iterations: a.max_iterations,
            tol: a.convergence_tol,
            imish: ImishOptions::from_scenario(s),
            uara: UaraOptions {
                rho: a.preference_rho,
                wf_iterations: a.wf_iterations,
                power: PowerAllocation::WaterFill,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualRecord {
    pub iteration: usize,
    pub theta: f64,
    pub lambda: Vec<f64>,
    /// Lagrangian at this iterate (before repair).
    pub lagrangian: f64,
    /// Certified upper bound on the dual function at this λ.
    pub dual_bound: f64,
    /// Sum rate of the repaired iterate.
    pub primal: f64,
    pub feasible: bool,
    pub best_primal: Option<f64>,
    /// `C_m − backhaul load` before repair.
    pub slack: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub theta: f64,
    pub iter: usize,
    pub history: Vec<DualRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotSolution {
    pub x: AssignmentX,
    pub sat: ImishOutcome,
    pub dual: DualState,
    pub converged: bool,
    pub sum_rate: f64,
    /// Tightest dual bound seen.
    pub dual_bound: f64,
    pub report: ConstraintReport,
    pub feasible: bool,
    pub evicted: usize,
    pub unserved: usize,
    /// Largest proposal-round counts over the iterations.
    pub imish_rounds: usize,
    pub uara_rounds: usize,
}

/// Lagrangian `Σ R + Σ λ_m (C_m − Σ x(1−g)U_back)` evaluated directly.
pub fn dual_value(x: &AssignmentX, b: &AssignmentB, lambda: &[f64], cache: &CacheState, ch: &ChannelState, lp: &LinkParams) -> f64 {
    let rate = sum_rate(x, &ch.h_terr, cache, lp);
    let cap = backhaul_capacity(b, &ch.h_sat, lp.noise_ka, lp.b_ka);
    let load = backhaul_load(x, cache, lp.u_back);
    rate + lambda.iter().zip(cap.iter().zip(&load)).map(|(l, (c, u))| l * (c - u)).sum::<f64>()
}

/// Upper bound on `max L(X, B, P, λ)`: interference is dropped, every unit
/// takes its best candidate, and each TBS water-fills its full budget.
pub fn dual_bound(ctx: &SlotContext<'_>, lambda: &[f64]) -> f64 {
    let ch = ctx.ch;
    let lp = ctx.lp;
    let (n_m, n_j, n_c) = ch.h_terr.dim();
    let mut total = 0.0;
    for m in 0..n_m {
        let gus: Vec<usize> = (0..n_j).filter(|&j| ctx.association[j] == m).collect();
        let local: Vec<usize> = gus.iter().copied().filter(|&j| ctx.cache.is_local(m, j)).collect();
        let n_back = gus.len() - local.len();
        if !local.is_empty() {
            let n_eff: Vec<f64> = (0..n_c)
                .map(|c| {
                    let g = local.iter().map(|&j| ch.h_terr[[m, j, c]]).fold(0.0, f64::max);
                    lp.noise_c / g
                })
                .collect();
            let wl = waterfill(&n_eff, lp.p_tbs_total);
            total += lp.b_c * crate::uara::waterfill_objective(&n_eff, &wl.powers);
        }
        total += n_back.min(n_c) as f64 * lp.u_back * (1.0 - lambda[m]).max(0.0);
        // Satellite term: the N_r best interference-free unit rates.
        let mut rates: Vec<f64> = Vec::new();
        for n in 0..ch.n_sat() {
            if !ch.visible[[n, m]] {
                continue;
            }
            for k in 0..ch.n_sat_sc() {
                rates.push(lp.b_ka * (1.0 + lp.p_leo * ch.h_sat[[n, m, k]] / lp.noise_ka).log2());
            }
        }
        rates.sort_by(|a, b| b.total_cmp(a));
        total += lambda[m] * rates.iter().take(lp.n_connect).sum::<f64>();
    }
    total
}

/// Evicts backhaul GUs, lowest rate first, until each TBS's load fits its
/// backhaul capacity. Returns the number evicted.
pub fn repair(x: &mut AssignmentX, capacity: &[f64], ctx: &SlotContext<'_>) -> usize {
    let lp = ctx.lp;
    let mut evicted = 0;
    loop {
        let load = backhaul_load(x, ctx.cache, lp.u_back);
        let Some(m) = (0..load.len()).find(|&m| load[m] > capacity[m] * (1.0 + 1e-12)) else {
            return evicted;
        };
        let rates = terrestrial_rates(x, &ctx.ch.h_terr, ctx.cache, lp);
        let victim = rates
            .iter()
            .filter(|r| r.0 == m && !ctx.cache.is_local(m, r.1))
            .min_by(|a, b| a.3.total_cmp(&b.3).then((a.1, a.2).cmp(&(b.1, b.2))))
            .copied()
            .expect("load > 0 implies a backhaul link");
        x.x[[victim.0, victim.1, victim.2]] = false;
        x.p[[victim.0, victim.1, victim.2]] = 0.0;
        evicted += 1;
    }
}

fn allocate(x: &mut AssignmentX, ctx: &SlotContext<'_>, opts: &UaraOptions) {
    allocate_power(x, &ctx.ch.h_terr, ctx.cache, ctx.lp, opts.power, opts.wf_iterations);
}

/// One slot of the dual loop under `pipeline`.
pub fn ciim_slot(
    ctx: &SlotContext<'_>,
    pipeline: Pipeline,
    prev: Option<&SatMatching>,
    lambda0: &[f64],
    opts: &CiimOptions,
) -> SlotSolution {
    let lp = ctx.lp;
    let exempt: &[ConstraintId] = if pipeline.sat.protects_gs() { &[] } else { &[ConstraintId::C9] };
    let uara_opts = UaraOptions { power: pipeline.power, ..opts.uara.clone() };
    let mut lambda = lambda0.to_vec();
    let mut history = Vec::new();
    let mut best: Option<(f64, AssignmentX, ImishOutcome, ConstraintReport, usize, usize)> = None;
    let mut last: Option<(f64, AssignmentX, ImishOutcome, ConstraintReport, usize, usize)> = None;
    let mut cached: Option<(Vec<f64>, ImishOutcome, crate::uara::TerrOutcome)> = None;
    let mut bound = f64::INFINITY;
    let mut converged = false;
    let mut imish_rounds = 0;
    let mut uara_rounds = 0;
    let mut theta = opts.theta0;
    let mut iter = 0;
    while iter < opts.max_iterations {
        theta = opts.theta0 * opts.beta.powi(iter as i32);
        let (sat, terr) = match &cached {
            Some((l, s, t)) if *l == lambda => (s.clone(), t.clone()),
            _ => {
                let s = sat_stage(pipeline.sat, ctx, &lambda, prev, &opts.imish);
                let t = uara_round(ctx.terr_problem(&lambda), &uara_opts);
                cached = Some((lambda.clone(), s.clone(), t.clone()));
                (s, t)
            }
        };
        imish_rounds = imish_rounds.max(sat.proposal_rounds);
        uara_rounds = uara_rounds.max(terr.proposal_rounds);
        let cap = backhaul_capacity(&sat.b, &ctx.ch.h_sat, lp.noise_ka, lp.b_ka);
        let load = backhaul_load(&terr.x, ctx.cache, lp.u_back);
        let slack: Vec<f64> = cap.iter().zip(&load).map(|(c, u)| c - u).collect();
        let lagrangian = dual_value(&terr.x, &sat.b, &lambda, ctx.cache, ctx.ch, lp);
        let db = dual_bound(ctx, &lambda);
        bound = bound.min(db);

        let mut x = terr.x.clone();
        let evicted = repair(&mut x, &cap, ctx);
        if evicted > 0 {
            allocate(&mut x, ctx, &uara_opts);
        }
        let report = check_constraints(&x, &sat.b, ctx.ch, ctx.cache, lp);
        let feasible = report.is_feasible_except(exempt);
        let primal = sum_rate(&x, &ctx.ch.h_terr, ctx.cache, lp);
        let entry = (primal, x, sat, report, evicted, terr.unserved);
        if feasible && best.as_ref().is_none_or(|b| primal > b.0) {
            best = Some(entry.clone());
        }
        last = Some(entry);
        history.push(DualRecord {
            iteration: iter,
            theta,
            lambda: lambda.clone(),
            lagrangian,
            dual_bound: db,
            primal,
            feasible,
            best_primal: best.as_ref().map(|b| b.0),
            slack: slack.clone(),
        });

        let next: Vec<f64> = lambda
            .iter()
            .zip(&slack)
            .map(|(l, s)| (l - theta * s / lp.u_back).max(0.0))
            .collect();
        iter += 1;
        let theta_next = opts.theta0 * opts.beta.powi(iter as i32);
        if (theta_next - theta).abs() <= opts.tol || next == lambda {
            lambda = next;
            converged = true;
            break;
        }
        lambda = next;
    }
    let (sum, x, sat, report, evicted, _) = best.or(last).expect("at least one iteration");
    let feasible = report.is_feasible_except(exempt);
    let unserved = ctx.ch.n_gu() - x.x.iter().filter(|&&v| v).count();
    SlotSolution {
        x,
        sat,
        dual: DualState { lambda, theta, iter, history },
        converged,
        sum_rate: sum,
        dual_bound: bound,
        report,
        feasible,
        evicted,
        unserved,
        imish_rounds,
        uara_rounds,
    }
}

/// Static world: node positions, constellation and cache placement.
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Scenario,
    pub nodes: Nodes,
    pub constellation: ConstellationState,
    pub placement: CachePlacement,
}

impl World {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        let nodes = Nodes::place(scenario);
        let constellation = ConstellationState::generate(scenario, &nodes)?;
        Ok(World {
            placement: CachePlacement::for_scenario(scenario),
            scenario: scenario.clone(),
            nodes,
            constellation,
        })
    }

    pub fn with_constellation(scenario: &Scenario, nodes: Nodes, constellation: ConstellationState) -> Self {
        World {
            placement: CachePlacement::for_scenario(scenario),
            scenario: scenario.clone(),
            nodes,
            constellation,
        }
    }

    pub fn channels(&self, t: usize) -> ChannelState {
        ChannelState::sample(&self.scenario, &self.nodes, &self.constellation, t)
    }

    pub fn cache(&self, t: usize) -> CacheState {
        CacheState::for_slot(&self.scenario, &self.placement, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub metrics: Vec<SlotMetrics>,
    pub handovers: HandoverLog,
}

/// Runs `algo` over every slot of the world's scenario.
pub fn run_world(world: &World, algo: AlgorithmId) -> Result<Simulation> {
    let s = &world.scenario;
    let opts = CiimOptions::from_scenario(s);
    let mut prev: Option<SatMatching> = None;
    let mut lambda = vec![0.0; s.n_tbs];
    let mut metrics = Vec::with_capacity(s.n_timeslots);
    let mut handovers = HandoverLog::default();
    for t in 1..=s.n_timeslots {
        let ch = world.channels(t);
        let cache = world.cache(t);
        let lp = LinkParams::new(s, &ch);
        let association = associate_gus(&ch.mean_terr);
        let ctx = SlotContext { scenario: s, ch: &ch, cache: &cache, lp: &lp, association: &association };
        let start = if s.algorithm.warm_start { lambda.clone() } else { vec![0.0; s.n_tbs] };
        let sol = crate::baselines::solve_slot(algo, &ctx, prev.as_ref(), &start, &opts)?;
        metrics.push(slot_metrics(&ctx, algo, &sol));
        handovers.extend(sol.sat.handovers.clone());
        lambda = sol.dual.lambda.clone();
        prev = Some(sol.sat.matching.clone());
    }
    Ok(Simulation { metrics, handovers })
}

pub fn run_simulation(scenario: &Scenario, algo: AlgorithmId) -> Result<Simulation> {
    if scenario.n_timeslots == 0 {
        return Err(Error::invalid("n_timeslots", "must be at least 1"));
    }
    run_world(&World::build(scenario)?, algo)
}

pub fn slot_metrics(ctx: &SlotContext<'_>, algo: AlgorithmId, sol: &SlotSolution) -> SlotMetrics {
    let lp = ctx.lp;
    let cap = backhaul_capacity(&sol.sat.b, &ctx.ch.h_sat, lp.noise_ka, lp.b_ka);
    let interference = geo_gs_interference(&sol.sat.b, &ctx.ch.h_geo_gs);
    let cinr_db = geo_gs_cinr(&interference, &ctx.ch.h_geo_signal, lp.p_geo, lp.noise_ka)
        .into_iter()
        .map(linear_to_db)
        .collect();
    SlotMetrics {
        t: ctx.ch.t,
        algo,
        sum_rate_bps: sol.sum_rate,
        backhaul_capacity_total_bps: cap.iter().sum(),
        backhaul_capacity_bps: cap,
        geo_gs_cinr_db: cinr_db,
        interference_w: interference,
        handover_count: sol.sat.handovers.count(),
        unserved_gu_count: sol.unserved,
        dual_value: sol.dual_bound,
        converged: sol.converged,
        violations: sol.report.summary(),
        iterations: sol.dual.iter,
        imish_rounds: sol.imish_rounds,
        uara_rounds: sol.uara_rounds,
    }
}
