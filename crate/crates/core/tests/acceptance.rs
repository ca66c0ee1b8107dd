//! End-to-end acceptance suite. Runs every criterion, prints one line each and
//! exits non-zero if any fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{report, small_scenario, Slot};
use istn_core::baselines::{es_search, solve_slot, AlgorithmId, ES_STATE_BUDGET};
use istn_core::caching::{CachePlacement, CacheState};
use istn_core::channel::ChannelState;
use istn_core::ciim::{run_simulation, run_world, CiimOptions, Simulation, World};
use istn_core::imish::{imish_round, ImishOptions, SatMatching, SatProblem};
use istn_core::link_budget::{
    backhaul_capacity, check_constraints, geo_gs_interference, AssignmentB, AssignmentX, ConstraintId, LinkParams,
};
use istn_core::metrics_io::{emit, run_sweep, write_run, Format, SweepSpec};
use istn_core::scenario::{HandoverMode, Scenario, SicReading};
use istn_core::uara::{terrestrial_utility, uara_round, waterfill, waterfill_objective, UaraOptions};

/// Largest proposal-round counts seen across all runs, for the iteration bounds.
#[derive(Default)]
struct Rounds {
    runs: usize,
    imish_over: usize,
    uara_over: usize,
}

impl Rounds {
    fn record(&mut self, s: &Scenario, sim: &Simulation) {
        for m in &sim.metrics {
            self.runs += 1;
            if m.imish_rounds > s.n_tbs {
                self.imish_over += 1;
            }
            if m.uara_rounds > s.n_gu {
                self.uara_over += 1;
            }
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn toy(seed: u64, n_timeslots: usize) -> Scenario {
    let mut s = Scenario::from_toml_str(&format!(
        "n_tbs = 4\nn_gu = 20\nn_sc_terrestrial = 4\nn_timeslots = {n_timeslots}\n"
    ))
    .expect("toy scenario");
    s.rng_seed = seed;
    s
}

fn best_of<T>(reps: usize, mut f: impl FnMut() -> T) -> (T, Duration) {
    let mut best = Duration::MAX;
    let mut out = None;
    for _ in 0..reps {
        let t0 = Instant::now();
        let v = f();
        best = best.min(t0.elapsed());
        out = Some(v);
    }
    (out.expect("at least one repetition"), best)
}

fn es_parity(rounds: &mut Rounds) -> bool {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let (mut t_es, mut t_uara) = (Duration::ZERO, Duration::ZERO);
    let mut over = 0;
    for (j, c) in [(4, 2), (5, 2), (6, 2), (6, 3)] {
        for seed in 0..20 {
            let slot = Slot::new(small_scenario(2, j, c, 1000 + seed), 1);
            let ctx = slot.ctx();
            let zero = [0.0; 2];
            let pb = ctx.terr_problem(&zero);
            let (es, d_es) = best_of(3, || es_search(pb, false, ES_STATE_BUDGET).expect("within budget"));
            let (u, d_u) = best_of(3, || uara_round(pb, &UaraOptions::default()));
            if u.proposal_rounds > j {
                over += 1;
            }
            if es.value > 0.0 {
                worst = worst.min(terrestrial_utility(&u.provisional, &pb) / es.value);
            }
            if (j, c) == (6, 3) {
                t_es += d_es;
                t_uara += d_u;
            }
        }
    }
    rounds.uara_over += over;
    let ratio = t_uara.as_secs_f64() / t_es.as_secs_f64();
    let elapsed = start.elapsed();
    let pass = worst >= 0.99 && ratio < 0.01 && elapsed < Duration::from_secs(600);
    report(
        1,
        "ES parity",
        pass,
        &format!("worst UARA/ES {worst:.4}; runtime at (6,3) {:.2}% of ES; {elapsed:.1?}", 100.0 * ratio),
    );
    pass
}

fn weak_duality() -> bool {
    let start = Instant::now();
    let (mut checked, mut broken, mut infeasible, mut multi) = (0, 0, 0, 0);
    let mut worst = f64::INFINITY;
    for seed in 0..50u64 {
        let mut s = small_scenario(2 + (seed % 2) as usize, 6, 2, 500 + seed);
        if seed % 2 == 0 {
            // Backhaul-bound variant so that the multipliers move.
            s.caching.u_back_bps = 5e9;
        }
        let world = World::build(&s).expect("world");
        let opts = CiimOptions::from_scenario(&s);
        let mut prev: Option<SatMatching> = None;
        let mut lambda = vec![0.0; s.n_tbs];
        for t in 1..=s.n_timeslots {
            let slot = Slot::from_world(&world, t);
            let ctx = slot.ctx();
            let sol = solve_slot(AlgorithmId::Ciim, &ctx, prev.as_ref(), &lambda, &opts).expect("slot");
            if sol.dual.history.len() > 1 {
                multi += 1;
            }
            for r in &sol.dual.history {
                checked += 1;
                let mut primals = vec![];
                primals.extend(r.best_primal);
                if r.feasible {
                    primals.push(r.primal);
                }
                for p in primals {
                    worst = worst.min((r.dual_bound - p) / r.dual_bound.abs().max(1.0));
                    // Round-off only: at the multiplier fixed point bound and primal coincide.
                    if r.dual_bound < p - 1e-9 * p.abs() {
                        broken += 1;
                    }
                }
            }
            if !sol.report.is_feasible() {
                infeasible += 1;
            }
            lambda = sol.dual.lambda.clone();
            prev = Some(sol.sat.matching.clone());
        }
    }
    let elapsed = start.elapsed();
    let pass = broken == 0 && infeasible == 0 && checked > 0 && elapsed < Duration::from_secs(120);
    report(
        2,
        "weak duality",
        pass,
        &format!(
            "{checked} iterations ({multi} multi-iteration slots), {broken} bound violations, \
             {infeasible} infeasible slots, min relative margin {worst:.3e}; {elapsed:.1?}"
        ),
    );
    pass
}

/// Best objective over the simplex grid with `steps` increments of `p / steps`.
fn grid_best(n_eff: &[f64], p: f64, steps: usize) -> f64 {
    fn walk(n_eff: &[f64], left: usize, step: f64, acc: &mut Vec<f64>, best: &mut f64) {
        if acc.len() + 1 == n_eff.len() {
            acc.push(left as f64 * step);
            *best = best.max(waterfill_objective(n_eff, acc));
            acc.pop();
            return;
        }
        for q in 0..=left {
            acc.push(q as f64 * step);
            walk(n_eff, left - q, step, acc, best);
            acc.pop();
        }
    }
    let mut best = f64::NEG_INFINITY;
    walk(n_eff, steps, p / steps as f64, &mut Vec::new(), &mut best);
    best
}

fn waterfill_kkt() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_level, mut worst_obj): (f64, f64) = (0.0, f64::INFINITY);
    for _ in 0..1000 {
        let c = rng.random_range(1..=8);
        let n_eff: Vec<f64> = (0..c).map(|_| 10f64.powf(rng.random_range(-3.0..1.0))).collect();
        let p = 10f64.powf(rng.random_range(-2.0..1.5));
        let wl = waterfill(&n_eff, p);
        let total: f64 = wl.powers.iter().sum();
        worst_level = worst_level.max((total - p).abs() / p);
        for (q, n) in wl.powers.iter().zip(&n_eff) {
            if *q > 0.0 {
                worst_level = worst_level.max((q + n - wl.mu).abs() / wl.mu);
            } else {
                // Dry subchannels sit above the water level.
                worst_level = worst_level.max(((wl.mu - n) / wl.mu).max(0.0));
            }
        }
        let steps = [0, 1, 2000, 200, 60, 30, 20, 15, 12][c];
        let gap = waterfill_objective(&n_eff, &wl.powers) - grid_best(&n_eff, p, steps);
        worst_obj = worst_obj.min(gap);
    }
    let elapsed = start.elapsed();
    let pass = worst_level <= 1e-6 && worst_obj >= -1e-6 && elapsed < Duration::from_secs(60);
    report(
        3,
        "water-filling KKT",
        pass,
        &format!("worst level residual {worst_level:.2e}, worst objective minus grid {worst_obj:.2e}; {elapsed:.1?}"),
    );
    pass
}

/// Synthetic slot where every constraint can be broken in isolation.
struct Instance {
    ch: ChannelState,
    cache: CacheState,
    lp: LinkParams,
    x: AssignmentX,
    b: AssignmentB,
    /// Satellite whose GEO gain alone breaks the interference cap.
    hot: usize,
}

const M: usize = 3;
const J: usize = 9;
const C: usize = 4;
const N: usize = 6;
const K: usize = 2;

fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let hot = N - 1;
    let mut visible = Array2::from_shape_fn((N, M), |_| rng.random_bool(0.8));
    for m in 0..M {
        // Every TBS sees the hot satellite and misses satellite `m`.
        visible[[hot, m]] = true;
        visible[[m, m]] = false;
    }
    let ch = ChannelState {
        t: 1,
        h_terr: Array3::from_shape_fn((M, J, C), |_| 10f64.powf(rng.random_range(-12.0..-9.0))),
        mean_terr: Array2::from_elem((M, J), 1e-10),
        sat_ids: (0..N).collect(),
        visible,
        elevation_deg: Array2::from_elem((N, M), 50.0),
        slant_range_m: Array2::from_elem((N, M), 800e3),
        h_sat: Array3::from_shape_fn((N, M, K), |_| 10f64.powf(rng.random_range(-13.0..-11.0))),
        h_geo_gs: Array2::from_shape_fn((N, 1), |(n, _)| if n == hot { 1.0 } else { 1e-16 }),
        h_geo_signal: vec![1e-12],
        noise_c: 1e-13,
        noise_ka: 1e-13,
        clamped_links: 0,
    };
    let association: Vec<usize> = (0..J).map(|j| j % M).collect();
    // GU j requests file j; TBS caches all but the files of its first GU, which is backhaul.
    let placement = CachePlacement {
        files: (0..M).map(|m| (0..J).filter(|&f| f != m).collect()).collect(),
    };
    let cache = CacheState::new(placement, (0..J).collect());
    let lp = LinkParams {
        b_c: 20e6,
        b_ka: 400e6,
        noise_c: 1e-13,
        noise_ka: 1e-13,
        u_back: 3e6,
        p_tbs_total: 40.0,
        p_leo: 10.0,
        p_geo: 100.0,
        n_connect: 2,
        i_th: vec![1e-9],
    };
    let mut x = AssignmentX::with_association(&association, M, C);
    for m in 0..M {
        // Two of the three GUs of each TBS, the backhaul one included, on the first SCs.
        for (c, j) in (0..J).filter(|&j| association[j] == m).take(2).enumerate() {
            x.x[[m, j, c]] = true;
            x.p[[m, j, c]] = rng.random_range(1.0..lp.p_tbs_total / 2.0);
        }
    }
    let mut b = AssignmentB::empty(N, M, K);
    // One link per TBS on its own subchannel-satellite unit, never the hot one.
    let mut used = vec![];
    for m in 0..M {
        let options: Vec<(usize, usize)> = (0..hot)
            .flat_map(|n| (0..K).map(move |k| (n, k)))
            .filter(|&(n, k)| ch.visible[[n, m]] && !used.contains(&(n, k)))
            .collect();
        if options.is_empty() {
            continue;
        }
        let (n, k) = options[rng.random_range(0..options.len())];
        used.push((n, k));
        b.b[[n, m, k]] = true;
        b.p[[n, m, k]] = lp.p_leo;
    }
    Instance { ch, cache, lp, x, b, hot }
}

fn tbs_with_backhaul_link(inst: &Instance) -> Option<usize> {
    (0..M).find(|&m| (0..N).any(|n| (0..K).any(|k| inst.b.b[[n, m, k]])))
}

/// Applies a violation of `id` only; `None` when this instance cannot host it.
fn mutate(inst: &mut Instance, id: ConstraintId, rng: &mut ChaCha8Rng) -> Option<()> {
    let served = |x: &AssignmentX, m: usize| -> Vec<(usize, usize)> {
        (0..J).flat_map(|j| (0..C).map(move |c| (j, c))).filter(|&(j, c)| x.x[[m, j, c]]).collect()
    };
    let m = rng.random_range(0..M);
    match id {
        ConstraintId::C1 => {
            let (j, _) = served(&inst.x, m)[0];
            inst.x.a[[m, j]] = false;
            inst.x.a[[(m + 1) % M, j]] = true;
        }
        ConstraintId::C2 => {
            // A local GU takes a second, powerless subchannel.
            let (j, _) = *served(&inst.x, m).iter().find(|&&(j, _)| inst.cache.is_local(m, j))?;
            inst.x.x[[m, j, C - 1]] = true;
        }
        ConstraintId::C3 => {
            let j = (0..J).find(|&j| inst.x.a[[m, j]] && (0..C).all(|c| !inst.x.x[[m, j, c]]))?;
            let (_, c) = served(&inst.x, m)[0];
            inst.x.x[[m, j, c]] = true;
        }
        ConstraintId::C4 => {
            // Satellite `m` is below the mask of TBS `m`; use a subchannel nobody holds.
            let k = (0..K).find(|&k| (0..M).all(|mi| !inst.b.b[[m, mi, k]]))?;
            inst.b.b[[m, m, k]] = true;
            inst.b.p[[m, m, k]] = inst.lp.p_leo;
        }
        ConstraintId::C5 => {
            let mut added = 0;
            for n in 0..inst.hot {
                for k in 0..K {
                    let links = inst.b.b.indexed_iter().filter(|((_, mi, _), &on)| on && *mi == m).count();
                    if links > inst.lp.n_connect {
                        break;
                    }
                    let taken = (0..M).any(|mi| inst.b.b[[n, mi, k]]) || (0..K).any(|kk| inst.b.b[[n, m, kk]]);
                    if inst.ch.visible[[n, m]] && !taken {
                        inst.b.b[[n, m, k]] = true;
                        inst.b.p[[n, m, k]] = inst.lp.p_leo;
                        added += 1;
                    }
                }
            }
            let links = inst.b.b.indexed_iter().filter(|((_, mi, _), &on)| on && *mi == m).count();
            if added == 0 || links <= inst.lp.n_connect {
                return None;
            }
        }
        ConstraintId::C6 => {
            let (n, holder, k) = inst.b.links().iter().map(|l| (l.0, l.1, l.2)).next()?;
            let other = (0..M).find(|&mi| {
                mi != holder && inst.ch.visible[[n, mi]] && (0..N).all(|nn| (0..K).all(|kk| !inst.b.b[[nn, mi, kk]]) || nn != n)
            })?;
            let links = inst.b.b.indexed_iter().filter(|((_, mi, _), &on)| on && *mi == other).count();
            if links >= inst.lp.n_connect {
                return None;
            }
            inst.b.b[[n, other, k]] = true;
            inst.b.p[[n, other, k]] = inst.lp.p_leo;
        }
        ConstraintId::C7 => {
            // A TBS serving its backhaul GU loses all satellite links.
            let m = tbs_with_backhaul_link(inst)?;
            for n in 0..N {
                for k in 0..K {
                    inst.b.b[[n, m, k]] = false;
                    inst.b.p[[n, m, k]] = 0.0;
                }
            }
        }
        ConstraintId::C8 => {
            let (j, c) = served(&inst.x, m)[0];
            inst.x.p[[m, j, c]] = inst.lp.p_tbs_total * 1.5;
        }
        ConstraintId::C9 => {
            let m = (0..M).find(|&m| inst.b.b.indexed_iter().filter(|((_, mi, _), &on)| on && *mi == m).count() < inst.lp.n_connect)?;
            let k = (0..K).find(|&k| (0..M).all(|mi| !inst.b.b[[inst.hot, mi, k]]))?;
            inst.b.b[[inst.hot, m, k]] = true;
            inst.b.p[[inst.hot, m, k]] = inst.lp.p_leo;
        }
    }
    Some(())
}

fn constraint_soundness() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut coverage = [0usize; 9];
    let (mut mutations, mut wrong, mut base_bad, mut i) = (0, 0, 0, 0);
    while mutations < 500 {
        let id = ConstraintId::ALL[i % 9];
        let mut inst = instance(&mut rng);
        let base = check_constraints(&inst.x, &inst.b, &inst.ch, &inst.cache, &inst.lp);
        if !base.is_feasible() {
            base_bad += 1;
            continue;
        }
        if mutate(&mut inst, id, &mut rng).is_none() {
            continue;
        }
        let r = check_constraints(&inst.x, &inst.b, &inst.ch, &inst.cache, &inst.lp);
        mutations += 1;
        coverage[i % 9] += 1;
        i += 1;
        if r.failed().into_iter().collect::<Vec<_>>() != vec![id] {
            wrong += 1;
            eprintln!("mutation {id} flagged {}", r.summary());
        }
    }
    let elapsed = start.elapsed();
    let min_cov = *coverage.iter().min().expect("nine constraints");
    let pass = wrong == 0 && base_bad == 0 && min_cov >= 50 && elapsed < Duration::from_secs(60);
    report(
        4,
        "constraint soundness",
        pass,
        &format!(
            "{mutations} mutations, {wrong} misflagged, {base_bad} infeasible bases, per-constraint coverage {coverage:?}; {elapsed:.1?}"
        ),
    );
    pass
}

fn gs_protection(rounds: &mut Rounds) -> bool {
    let start = Instant::now();
    let (mut slots, mut bad) = (0, 0);
    for seed in 1..=5 {
        let s = toy(seed, 100);
        let sim = run_simulation(&s, AlgorithmId::Ciim).expect("run");
        rounds.record(&s, &sim);
        for m in &sim.metrics {
            slots += 1;
            if m.violations.contains("C9") {
                bad += 1;
            }
        }
    }
    // Tightened protection target: the plain matching keeps interferers the
    // handover process has to shed.
    let mut adv = toy(1, 10);
    adv.cinr_threshold_db = 6.0;
    let count = |algo| {
        let sim = run_simulation(&adv, algo).expect("run");
        sim.metrics.iter().filter(|m| m.violations.contains("C9")).count()
    };
    let (jimua, ciim) = (count(AlgorithmId::Jimua), count(AlgorithmId::Ciim));
    let elapsed = start.elapsed();
    let pass = bad == 0 && jimua >= 1 && ciim == 0 && elapsed < Duration::from_secs(300);
    report(
        5,
        "GEO-GS protection",
        pass,
        &format!(
            "CIIM {bad}/{slots} violating slots; adversarial scenario: JIMUA {jimua}/10, CIIM {ciim}/10; {elapsed:.1?}"
        ),
    );
    pass
}

fn handover_monotonicity(rounds: &mut Rounds) -> bool {
    let start = Instant::now();
    let mut rows = vec![];
    let mut pass = true;
    for seed in 1..=5 {
        let mut row = vec![];
        for h in [1.0, 3.0, 5.0, 7.0] {
            let mut s = toy(seed, 100);
            s.handover_threshold_db = h;
            let sim = run_simulation(&s, AlgorithmId::Ciim).expect("run");
            rounds.record(&s, &sim);
            row.push(sim.metrics.iter().map(|m| m.handover_count).sum::<usize>());
        }
        pass &= row.windows(2).all(|w| w[1] <= w[0]);
        rows.push(row);
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    report(6, "handover threshold monotonicity", pass, &format!("handovers per seed over H=1,3,5,7 dB: {rows:?}; {elapsed:.1?}"));
    pass
}

fn orderings(rounds: &mut Rounds) -> bool {
    let start = Instant::now();
    let mut failures = vec![];
    let slots = 8;
    for seed in 1..=5 {
        let mut s = Scenario::default();
        s.rng_seed = seed;
        s.n_timeslots = slots;
        let world = World::build(&s).expect("world");
        let run = |algo| {
            let sim = run_world(&world, algo).expect("run");
            let cap = mean(&sim.metrics.iter().map(|m| m.backhaul_capacity_total_bps).collect::<Vec<_>>());
            let rate = mean(&sim.metrics.iter().map(|m| m.sum_rate_bps).collect::<Vec<_>>());
            (cap, rate, sim)
        };
        let (imish, ciim_rate, sim) = run(AlgorithmId::Ciim);
        rounds.record(&s, &sim);
        let (rraihm, _, _) = run(AlgorithmId::Rraihm);
        let (random, _, _) = run(AlgorithmId::RandomSat);
        let (mdh, _, _) = run(AlgorithmId::Mdh);
        let (_, uaaa_rate, _) = run(AlgorithmId::Uaaa);
        for (ok, what) in [
            (imish >= rraihm, "IMISH >= RRAIHM"),
            (rraihm >= random, "RRAIHM >= Random"),
            (imish >= mdh, "IMISH >= MDH"),
            (ciim_rate >= uaaa_rate, "UARA >= UAAA"),
        ] {
            if !ok {
                failures.push(format!("seed {seed}: {what}"));
            }
        }
    }
    // Gap to the dual upper bound as the user density grows.
    let mut gaps = vec![];
    let mut above = 0;
    for j in [50, 100, 200, 400] {
        let mut g = vec![];
        for seed in 1..=5 {
            let mut s = Scenario::default();
            s.rng_seed = seed;
            s.n_gu = j;
            s.n_timeslots = 5;
            let sim = run_simulation(&s, AlgorithmId::Ciim).expect("run");
            rounds.record(&s, &sim);
            for m in &sim.metrics {
                if m.sum_rate_bps > m.dual_value {
                    above += 1;
                }
                g.push((m.dual_value - m.sum_rate_bps) / m.dual_value);
            }
        }
        gaps.push(mean(&g));
    }
    if above > 0 {
        failures.push(format!("{above} slots above the upper bound"));
    }
    if !gaps.windows(2).all(|w| w[1] <= w[0]) {
        failures.push("gap not non-increasing in J".into());
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(900);
    let gaps: Vec<String> = gaps.iter().map(|g| format!("{g:.4}")).collect();
    report(
        7,
        "baseline orderings",
        pass,
        &format!("5 seeds; mean gap to bound over J=50,100,200,400: [{}]; failures {failures:?}; {elapsed:.1?}", gaps.join(", ")),
    );
    pass
}

fn nr_saturation(rounds: &mut Rounds) -> bool {
    let start = Instant::now();
    let (mut base, mut more) = (vec![], vec![]);
    for seed in 1..=5 {
        for (nr, out) in [(3, &mut base), (5, &mut more)] {
            let mut s = Scenario::default();
            s.rng_seed = seed;
            s.n_timeslots = 8;
            s.n_connect = nr;
            let sim = run_simulation(&s, AlgorithmId::Ciim).expect("run");
            rounds.record(&s, &sim);
            out.push(mean(&sim.metrics.iter().map(|m| m.backhaul_capacity_total_bps).collect::<Vec<_>>()));
        }
    }
    let gain = mean(&more) / mean(&base) - 1.0;
    let elapsed = start.elapsed();
    let pass = gain <= 0.02 && elapsed < Duration::from_secs(600);
    report(8, "N_r saturation", pass, &format!("mean backhaul gain N_r 3 -> 5: {:.2}%; {elapsed:.1?}", 100.0 * gain));
    pass
}

/// Random satellite instance with `m` TBSs, `n` satellites and `k` subchannels.
fn sat_instance(m: usize, n: usize, k: usize, rng: &mut ChaCha8Rng) -> (ChannelState, LinkParams) {
    let h_geo = Array2::from_shape_fn((n, 1), |_| 10f64.powf(rng.random_range(-16.0..-13.0)));
    let ch = ChannelState {
        t: 1,
        h_terr: Array3::from_elem((m, 1, 1), 1e-10),
        mean_terr: Array2::from_elem((m, 1), 1e-10),
        sat_ids: (0..n).collect(),
        visible: Array2::from_shape_fn((n, m), |_| rng.random_bool(0.8)),
        elevation_deg: Array2::from_elem((n, m), 50.0),
        slant_range_m: Array2::from_elem((n, m), 800e3),
        h_sat: Array3::from_shape_fn((n, m, k), |_| 10f64.powf(rng.random_range(-13.5..-11.5))),
        h_geo_gs: h_geo.clone(),
        h_geo_signal: vec![1e-12],
        noise_c: 1e-13,
        noise_ka: 1e-13,
        clamped_links: 0,
    };
    let p_leo = 10.0;
    // Cap that admits roughly two typical interferers.
    let i_th = 2.0 * p_leo * h_geo.iter().sum::<f64>() / n as f64;
    let lp = LinkParams {
        b_c: 20e6,
        b_ka: 400e6,
        noise_c: 1e-13,
        noise_ka: 1e-13,
        u_back: 3e6,
        p_tbs_total: 40.0,
        p_leo,
        p_geo: 100.0,
        n_connect: rng.random_range(1..=2),
        i_th: vec![i_th],
    };
    (ch, lp)
}

type SatLinks = Vec<(usize, usize, usize)>; // (m, n, k)

fn sat_feasible(links: &SatLinks, ch: &ChannelState, lp: &LinkParams) -> bool {
    let to_b = assignment_b(links, ch, lp);
    let i = geo_gs_interference(&to_b, &ch.h_geo_gs);
    links.iter().all(|&(m, n, _)| ch.visible[[n, m]])
        && (0..ch.n_tbs()).all(|m| links.iter().filter(|l| l.0 == m).count() <= lp.n_connect)
        && links.iter().all(|a| links.iter().filter(|b| b.1 == a.1 && (b.2 == a.2 || b.0 == a.0)).count() == 1)
        && i.iter().zip(&lp.i_th).all(|(i, th)| *i <= th * (1.0 + 1e-9))
}

fn assignment_b(links: &SatLinks, ch: &ChannelState, lp: &LinkParams) -> AssignmentB {
    let mut b = AssignmentB::empty(ch.n_sat(), ch.n_tbs(), ch.n_sat_sc());
    for &(m, n, k) in links {
        b.b[[n, m, k]] = true;
        b.p[[n, m, k]] = lp.p_leo;
    }
    b
}

fn sat_utility(links: &SatLinks, ch: &ChannelState, lp: &LinkParams, w: &[f64]) -> f64 {
    let cap = backhaul_capacity(&assignment_b(links, ch, lp), &ch.h_sat, lp.noise_ka, lp.b_ka);
    cap.iter().zip(w).map(|(c, w)| c * w).sum()
}

/// Single-unit deviations of unit `(n, k)` toward TBS `m`: drop it, or take it
/// (evicting any holder) as an addition, a retune, or a replacement.
fn sat_deviations(links: &SatLinks, m: usize, n: usize, k: usize) -> Vec<SatLinks> {
    if links.contains(&(m, n, k)) {
        return vec![links.iter().copied().filter(|&l| l != (m, n, k)).collect()];
    }
    let base: SatLinks = links.iter().copied().filter(|l| !(l.1 == n && l.2 == k)).collect();
    let mut out = vec![];
    if let Some(&same) = base.iter().find(|l| l.0 == m && l.1 == n) {
        let mut t: SatLinks = base.iter().copied().filter(|&l| l != same).collect();
        t.push((m, n, k));
        return vec![t];
    }
    let mut add = base.clone();
    add.push((m, n, k));
    out.push(add);
    for &old in base.iter().filter(|l| l.0 == m) {
        let mut t: SatLinks = base.iter().copied().filter(|&l| l != old).collect();
        t.push((m, n, k));
        out.push(t);
    }
    out
}

fn terrestrial_deviation(x: &AssignmentX, j: usize, m: usize, target: Option<usize>, p0: f64) -> AssignmentX {
    let (_, n_j, n_c) = x.x.dim();
    let from = (0..n_c).find(|&c| x.x[[m, j, c]]);
    let mut y = x.clone();
    if let Some(f) = from {
        y.x[[m, j, f]] = false;
        y.p[[m, j, f]] = 0.0;
    }
    if let Some(t) = target {
        if let Some(o) = (0..n_j).find(|&o| o != j && x.x[[m, o, t]]) {
            y.x[[m, o, t]] = false;
            y.p[[m, o, t]] = 0.0;
            if let Some(f) = from {
                y.x[[m, o, f]] = true;
                y.p[[m, o, f]] = p0;
            }
        }
        y.x[[m, j, t]] = true;
        y.p[[m, j, t]] = p0;
    }
    y
}

fn stability(rounds: &mut Rounds) -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut sat_instances, mut sat_blocking) = (0, 0);
    for m in 1..=3 {
        for n in 1..=4 {
            for k in 1..=2 {
                for _ in 0..8 {
                    let (ch, lp) = sat_instance(m, n, k, &mut rng);
                    let lambda: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.5) { rng.random_range(0.0..1.0) } else { 0.0 }).collect();
                    let opts = ImishOptions {
                        handover: true,
                        threshold_db: 3.0,
                        sic_reading: SicReading::Verbatim,
                        handover_mode: HandoverMode::RatioDb,
                        weight_floor: 1e-6,
                    };
                    let pb = SatProblem { ch: &ch, lp: &lp, lambda: &lambda, prev: None, allowed: None };
                    let out = imish_round(pb, &opts);
                    if out.proposal_rounds > m {
                        rounds.imish_over += 1;
                    }
                    let links: SatLinks = out.b.links().iter().map(|l| (l.1, l.0, l.2)).collect();
                    let w: Vec<f64> = lambda.iter().map(|l| l + opts.weight_floor).collect();
                    let u = sat_utility(&links, &ch, &lp, &w);
                    sat_instances += 1;
                    let blocked = (0..m).any(|mm| {
                        (0..n).any(|nn| {
                            (0..k).any(|kk| {
                                sat_deviations(&links, mm, nn, kk).iter().any(|d| {
                                    sat_feasible(d, &ch, &lp) && sat_utility(d, &ch, &lp, &w) > u + 1e-9 * u.abs()
                                })
                            })
                        })
                    });
                    if blocked {
                        sat_blocking += 1;
                    }
                }
            }
        }
    }
    let (mut terr_instances, mut terr_blocking) = (0, 0);
    for m in 1..=2 {
        for j in 1..=5 {
            for c in 1..=2 {
                for seed in 0..5 {
                    let slot = Slot::new(small_scenario(m, j, c, 7000 + seed), 1);
                    let ctx = slot.ctx();
                    let lambda: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.5) { rng.random_range(0.0..50.0) } else { 0.0 }).collect();
                    let pb = ctx.terr_problem(&lambda);
                    let out = uara_round(pb, &UaraOptions::default());
                    if out.proposal_rounds > j {
                        rounds.uara_over += 1;
                    }
                    let x = &out.provisional;
                    let u = terrestrial_utility(x, &pb);
                    let tol = 1e-9 * slot.lp.b_c;
                    let p0 = pb.provisional_power();
                    terr_instances += 1;
                    let blocked = (0..j).any(|g| {
                        let tbs = slot.association[g];
                        (0..c).map(Some).chain([None]).any(|t| {
                            terrestrial_utility(&terrestrial_deviation(x, g, tbs, t, p0), &pb) > u + tol
                        })
                    });
                    if blocked {
                        terr_blocking += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = sat_blocking == 0 && terr_blocking == 0 && elapsed < Duration::from_secs(120);
    report(
        9,
        "matching stability",
        pass,
        &format!(
            "satellite side {sat_blocking}/{sat_instances} with a blocking pair, terrestrial side \
             {terr_blocking}/{terr_instances}; {elapsed:.1?}"
        ),
    );
    pass
}

fn files_equal(a: &Path, b: &Path) -> bool {
    let mut names: Vec<_> = std::fs::read_dir(a).expect("dir").map(|e| e.expect("entry").file_name()).collect();
    names.sort();
    !names.is_empty()
        && names.iter().all(|n| std::fs::read(a.join(n)).expect("read") == std::fs::read(b.join(n)).unwrap_or_default())
}

fn determinism() -> bool {
    let tmp = tempfile::tempdir().expect("tempdir");
    let s = small_scenario(2, 8, 2, 42);
    for d in ["run1", "run2"] {
        let sim = run_simulation(&s, AlgorithmId::Ciim).expect("run");
        write_run(&sim, &tmp.path().join(d)).expect("write");
    }
    let spec = SweepSpec::from_toml_str(
        "variable = \"H\"\nvalues = [1.0, 5.0]\nseeds = [1, 2]\nalgos = [\"ciim\", \"mdh\"]\nn_timeslots = 2\n",
    )
    .expect("spec");
    for d in ["sweep1", "sweep2"] {
        let result = run_sweep(&spec, &s).expect("sweep");
        for f in [Format::Csv, Format::Json, Format::Plotdata] {
            emit(&result, f, &tmp.path().join(d)).expect("emit");
        }
    }
    let run_same = files_equal(&tmp.path().join("run1"), &tmp.path().join("run2"));
    let sweep_same = files_equal(&tmp.path().join("sweep1"), &tmp.path().join("sweep2"));
    let pass = run_same && sweep_same;
    report(10, "determinism", pass, &format!("run outputs identical: {run_same}; sweep outputs identical: {sweep_same}"));
    pass
}

fn iteration_bounds(rounds: &Rounds) -> bool {
    let pass = rounds.imish_over == 0 && rounds.uara_over == 0 && rounds.runs > 0;
    report(
        11,
        "iteration bounds",
        pass,
        &format!(
            "{} simulated slots plus direct matchings; IMISH rounds > N_M: {}, UARA rounds > N_J: {}",
            rounds.runs, rounds.imish_over, rounds.uara_over
        ),
    );
    pass
}

fn main() {
    let mut rounds = Rounds::default();
    let results = [
        es_parity(&mut rounds),
        weak_duality(),
        waterfill_kkt(),
        constraint_soundness(),
        gs_protection(&mut rounds),
        handover_monotonicity(&mut rounds),
        orderings(&mut rounds),
        nr_saturation(&mut rounds),
        stability(&mut rounds),
        determinism(),
        iteration_bounds(&rounds),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
