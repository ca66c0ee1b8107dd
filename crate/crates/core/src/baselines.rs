//! Comparison algorithms and the exhaustive-search oracle.

use std::fmt;
use std::str::FromStr;

use ndarray::Array3;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ciim::{ciim_slot, CiimOptions, Pipeline, SatStrategy, SlotContext, SlotSolution, DualState};
use crate::error::{Error, Result};
use crate::imish::{imish_round, support, HandoverLog, ImishOptions, ImishOutcome, SatMatching, SatProblem};
use crate::link_budget::{backhaul_capacity, check_constraints, AssignmentB, AssignmentX, ConstraintId};
use crate::rng::{stream_rng, Stream};
use crate::uara::{allocate_power, terrestrial_utility, PowerAllocation, TerrProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    Ciim,
    Jimua,
    Mdh,
    Rraihm,
    GreedySat,
    RandomSat,
    Uaaa,
    Es,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 8] = [
        AlgorithmId::Ciim,
        AlgorithmId::Jimua,
        AlgorithmId::Mdh,
        AlgorithmId::Rraihm,
        AlgorithmId::GreedySat,
        AlgorithmId::RandomSat,
        AlgorithmId::Uaaa,
        AlgorithmId::Es,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Ciim => "ciim",
            AlgorithmId::Jimua => "jimua",
            AlgorithmId::Mdh => "mdh",
            AlgorithmId::Rraihm => "rraihm",
            AlgorithmId::GreedySat => "greedy_sat",
            AlgorithmId::RandomSat => "random_sat",
            AlgorithmId::Uaaa => "uaaa",
            AlgorithmId::Es => "es",
        }
    }

    /// Dual-loop pipeline; ES has none.
    pub fn pipeline(self) -> Option<Pipeline> {
        let wf = PowerAllocation::WaterFill;
        let sat = match self {
            AlgorithmId::Ciim => SatStrategy::Imish { handover: true },
            AlgorithmId::Jimua => SatStrategy::Imish { handover: false },
            AlgorithmId::Mdh => SatStrategy::Mdh,
            AlgorithmId::Rraihm => SatStrategy::Rraihm,
            AlgorithmId::GreedySat => SatStrategy::Greedy,
            AlgorithmId::RandomSat => SatStrategy::Random,
            AlgorithmId::Uaaa => {
                return Some(Pipeline { sat: SatStrategy::Imish { handover: true }, power: PowerAllocation::Equal })
            }
            AlgorithmId::Es => return None,
        };
        Some(Pipeline { sat, power: wf })
    }

    /// Whether runs of this algorithm must keep the GS interference cap.
    pub fn enforces_cap(self) -> bool {
        match self.pipeline() {
            Some(p) => p.sat.protects_gs(),
            None => true,
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.name() == norm || (norm == "greedy" && *a == AlgorithmId::GreedySat) || (norm == "random" && *a == AlgorithmId::RandomSat))
            .ok_or_else(|| Error::invalid("algo", format!("unknown algorithm `{s}`")))
    }
}

/// Random subchannel per (TBS, satellite) pair, as an `[N, M, K]` mask.
pub fn rraihm_mask<R: Rng>(n_sat: usize, n_tbs: usize, n_sc: usize, rng: &mut R) -> Array3<bool> {
    let mut mask = Array3::from_elem((n_sat, n_tbs, n_sc), false);
    for m in 0..n_tbs {
        for n in 0..n_sat {
            mask[[n, m, rng.random_range(0..n_sc)]] = true;
        }
    }
    mask
}

type Link = (usize, usize, usize); // (m, n, k)

fn outcome(ctx: &SlotContext<'_>, links: &[Link], prev: Option<&SatMatching>, mode: crate::scenario::HandoverMode) -> ImishOutcome {
    let ch = ctx.ch;
    let mut b = AssignmentB::empty(ch.n_sat(), ch.n_tbs(), ch.n_sat_sc());
    for &(m, n, k) in links {
        b.b[[n, m, k]] = true;
        b.p[[n, m, k]] = ctx.lp.p_leo;
    }
    let matching = SatMatching::from_assignment(&b, ch);
    let handovers = support::diff_events(ch, ctx.lp, prev, &matching, mode);
    let cap = backhaul_capacity(&b, &ch.h_sat, ctx.lp.noise_ka, ctx.lp.b_ka);
    ImishOutcome {
        matching,
        b,
        handovers,
        proposal_rounds: 0,
        improvement_moves: 0,
        released_for_cap: Vec::new(),
        utility: cap.iter().sum(),
    }
}

fn unit_free(links: &[Link], m: usize, n: usize, k: usize) -> bool {
    !links.iter().any(|l| (l.1 == n && l.2 == k) || (l.0 == m && l.1 == n))
}

/// Nearest-satellite matching: each TBS takes its `N_r` closest visible
/// satellites on the lowest subchannel not yet used by the satellite or the TBS.
/// With `protect`, satellites that would break the GS cap are skipped.
pub fn mdh_links(ctx: &SlotContext<'_>, protect: bool) -> Vec<Link> {
    let ch = ctx.ch;
    let lp = ctx.lp;
    let mut links: Vec<Link> = Vec::new();
    for m in 0..ch.n_tbs() {
        let mut order: Vec<usize> = (0..ch.n_sat()).filter(|&n| ch.visible[[n, m]]).collect();
        order.sort_by(|&a, &b| ch.slant_range_m[[a, m]].total_cmp(&ch.slant_range_m[[b, m]]).then(a.cmp(&b)));
        for n in order {
            if links.iter().filter(|l| l.0 == m).count() >= lp.n_connect {
                break;
            }
            let used_by_tbs: Vec<usize> = links.iter().filter(|l| l.0 == m).map(|l| l.2).collect();
            let k = (0..ch.n_sat_sc())
                .filter(|&k| unit_free(&links, m, n, k))
                .find(|k| !used_by_tbs.contains(k))
                .or_else(|| (0..ch.n_sat_sc()).find(|&k| unit_free(&links, m, n, k)));
            let Some(k) = k else { continue };
            links.push((m, n, k));
            if protect && !cap_holds(ctx, &links) {
                links.pop();
            }
        }
    }
    links
}

fn cap_holds(ctx: &SlotContext<'_>, links: &[Link]) -> bool {
    let ch = ctx.ch;
    let mut b = AssignmentB::empty(ch.n_sat(), ch.n_tbs(), ch.n_sat_sc());
    for &(m, n, k) in links {
        b.b[[n, m, k]] = true;
        b.p[[n, m, k]] = ctx.lp.p_leo;
    }
    support::cap_ok_b(&b, ch, ctx.lp)
}

/// Rate-greedy matching that ignores interference: units are taken in
/// descending interference-free rate while C5/C6 allow.
pub fn greedy_links(ctx: &SlotContext<'_>) -> Vec<Link> {
    let ch = ctx.ch;
    let lp = ctx.lp;
    let mut units: Vec<(f64, Link)> = Vec::new();
    for m in 0..ch.n_tbs() {
        for n in 0..ch.n_sat() {
            if !ch.visible[[n, m]] {
                continue;
            }
            for k in 0..ch.n_sat_sc() {
                let r = lp.b_ka * (1.0 + lp.p_leo * ch.h_sat[[n, m, k]] / lp.noise_ka).log2();
                units.push((r, (m, n, k)));
            }
        }
    }
    units.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut links: Vec<Link> = Vec::new();
    for (_, (m, n, k)) in units {
        if links.iter().filter(|l| l.0 == m).count() < lp.n_connect && unit_free(&links, m, n, k) {
            links.push((m, n, k));
        }
    }
    links
}

/// Uniformly random feasible units, TBS by TBS.
pub fn random_links<R: Rng>(ctx: &SlotContext<'_>, rng: &mut R) -> Vec<Link> {
    let ch = ctx.ch;
    let mut links: Vec<Link> = Vec::new();
    for m in 0..ch.n_tbs() {
        for _ in 0..ctx.lp.n_connect {
            let free: Vec<(usize, usize)> = (0..ch.n_sat())
                .filter(|&n| ch.visible[[n, m]])
                .flat_map(|n| (0..ch.n_sat_sc()).map(move |k| (n, k)))
                .filter(|&(n, k)| unit_free(&links, m, n, k))
                .collect();
            let Some(&(n, k)) = free.choose(rng) else { break };
            links.push((m, n, k));
        }
    }
    links
}

/// Satellite stage of a pipeline under multipliers `lambda`.
pub fn sat_stage(
    strategy: SatStrategy,
    ctx: &SlotContext<'_>,
    lambda: &[f64],
    prev: Option<&SatMatching>,
    opts: &ImishOptions,
) -> ImishOutcome {
    let ch = ctx.ch;
    let mode = opts.handover_mode;
    let mut rng = stream_rng(ctx.scenario.rng_seed, Stream::Baseline, ch.t as u64);
    match strategy {
        SatStrategy::Imish { handover } => imish_round(
            SatProblem { ch, lp: ctx.lp, lambda, prev, allowed: None },
            &ImishOptions { handover, ..opts.clone() },
        ),
        SatStrategy::Rraihm => {
            let mask = rraihm_mask(ch.n_sat(), ch.n_tbs(), ch.n_sat_sc(), &mut rng);
            imish_round(
                SatProblem { ch, lp: ctx.lp, lambda, prev, allowed: Some(&mask) },
                &ImishOptions { handover: true, ..opts.clone() },
            )
        }
        SatStrategy::Mdh => outcome(ctx, &mdh_links(ctx, true), prev, mode),
        SatStrategy::Greedy => outcome(ctx, &greedy_links(ctx), prev, mode),
        SatStrategy::Random => outcome(ctx, &random_links(ctx, &mut rng), prev, mode),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsResult {
    pub x: AssignmentX,
    pub value: f64,
    /// Raw combinations visited.
    pub states: u64,
}

pub const ES_STATE_BUDGET: u64 = 10_000_000;

/// Exhaustive search over every terrestrial assignment: each (TBS, subchannel)
/// unit takes one of the `J` GUs or stays idle, and combinations violating
/// C1–C3 are discarded. Active units get `P_TBS / C`; with `waterfill` each
/// candidate is also water-filled before scoring.
pub fn es_search(pb: TerrProblem<'_>, waterfill: bool, budget: u64) -> Result<EsResult> {
    let (n_m, n_j, n_c) = pb.h.dim();
    let units = n_m * n_c;
    let states = (n_j as u64 + 1)
        .checked_pow(units as u32)
        .filter(|&s| s <= budget)
        .ok_or(Error::SearchBudget { states: (n_j as f64 + 1.0).powi(units as i32), budget: budget as f64 })?;
    let p0 = pb.provisional_power();
    let mut digits = vec![0usize; units];
    let mut best: Option<(f64, AssignmentX)> = None;
    let mut x = AssignmentX::with_association(pb.association, n_m, n_c);
    loop {
        // Digit 0 = idle, d ≥ 1 = GU d−1.
        let mut used = vec![false; n_j];
        let mut ok = true;
        for (u, &d) in digits.iter().enumerate() {
            if d == 0 {
                continue;
            }
            let j = d - 1;
            let m = u / n_c;
            if used[j] || pb.association[j] != m {
                ok = false;
                break;
            }
            used[j] = true;
        }
        if ok {
            x.x.fill(false);
            x.p.fill(0.0);
            for (u, &d) in digits.iter().enumerate() {
                if d > 0 {
                    let (m, c) = (u / n_c, u % n_c);
                    x.x[[m, d - 1, c]] = true;
                    x.p[[m, d - 1, c]] = p0;
                }
            }
            if waterfill {
                allocate_power(&mut x, pb.h, pb.cache, pb.lp, PowerAllocation::WaterFill, 1);
            }
            let v = terrestrial_utility(&x, &pb);
            if best.as_ref().is_none_or(|b| v > b.0) {
                best = Some((v, x.clone()));
            }
        }
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == units {
                let (value, x) = best.expect("the idle assignment is always feasible");
                return Ok(EsResult { x, value, states });
            }
            digits[i] += 1;
            if digits[i] <= n_j {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Solves one slot with `algo`.
pub fn solve_slot(
    algo: AlgorithmId,
    ctx: &SlotContext<'_>,
    prev: Option<&SatMatching>,
    lambda0: &[f64],
    opts: &CiimOptions,
) -> Result<SlotSolution> {
    if let Some(pipeline) = algo.pipeline() {
        return Ok(ciim_slot(ctx, pipeline, prev, lambda0, opts));
    }
    let zero = vec![0.0; ctx.ch.n_tbs()];
    let es = es_search(ctx.terr_problem(&zero), false, ES_STATE_BUDGET)?;
    let sat = sat_stage(SatStrategy::Imish { handover: true }, ctx, &zero, prev, &opts.imish);
    let mut x = es.x;
    let cap = backhaul_capacity(&sat.b, &ctx.ch.h_sat, ctx.lp.noise_ka, ctx.lp.b_ka);
    let evicted = crate::ciim::repair(&mut x, &cap, ctx);
    let report = check_constraints(&x, &sat.b, ctx.ch, ctx.cache, ctx.lp);
    let sum_rate = crate::link_budget::sum_rate(&x, &ctx.ch.h_terr, ctx.cache, ctx.lp);
    let unserved = ctx.ch.n_gu() - x.x.iter().filter(|&&v| v).count();
    Ok(SlotSolution {
        feasible: report.is_feasible(),
        x,
        dual_bound: crate::ciim::dual_bound(ctx, &zero),
        sat,
        dual: DualState { lambda: zero, theta: 0.0, iter: 0, history: Vec::new() },
        converged: true,
        sum_rate,
        report,
        evicted,
        unserved,
        imish_rounds: 0,
        uara_rounds: 0,
    })
}

/// Handover log from one satellite matching to the next.
pub fn handovers_between(ctx: &SlotContext<'_>, prev: Option<&SatMatching>, cur: &SatMatching, mode: crate::scenario::HandoverMode) -> HandoverLog {
    support::diff_events(ctx.ch, ctx.lp, prev, cur, mode)
}

/// C9 exemption per algorithm.
pub fn exempt_constraints(algo: AlgorithmId) -> &'static [ConstraintId] {
    if algo.enforces_cap() {
        &[]
    } else {
        &[ConstraintId::C9]
    }
}
