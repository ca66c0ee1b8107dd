//! Satellite side: many-to-one matching of LEO subchannel units to TBSs with
//! GEO ground-station protection and thresholded inter-satellite handover.
//!
//! A slot starts from the previous slot's links that are still visible. When
//! the GEO interference cap is violated at entry, the worst interferers are
//! released and banned for the slot. Free TBSs are then seeded with the
//! worst-link rule, and a local search applies single-unit moves (add, drop,
//! replace, retune, steal) while the weighted capacity `Σ (λ_m + ε) C_m`
//! strictly improves. A TBS may swap an incumbent for a new satellite only
//! when the newcomer clears the handover threshold.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::link_budget::{AssignmentB, LinkParams};
use crate::scenario::{HandoverMode, Scenario, SicReading};
use crate::units::linear_to_db;

/// One backhaul link, satellite given by its constellation-wide id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SatLink {
    pub tbs: usize,
    pub sat: usize,
    pub sc: usize,
}

/// Φ: the set of (TBS, satellite, subchannel) links.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatMatching {
    pub links: Vec<SatLink>,
}

impl SatMatching {
    pub fn sats_of(&self, tbs: usize) -> BTreeSet<usize> {
        self.links.iter().filter(|l| l.tbs == tbs).map(|l| l.sat).collect()
    }

    /// Dense form on the candidate-satellite axis of `ch`. Links to satellites
    /// absent from `ch` are dropped.
    pub fn to_assignment(&self, ch: &ChannelState, p_leo: f64) -> AssignmentB {
        let mut b = AssignmentB::empty(ch.n_sat(), ch.n_tbs(), ch.n_sat_sc());
        for l in &self.links {
            if let Some(n) = ch.sat_ids.iter().position(|&s| s == l.sat) {
                b.b[[n, l.tbs, l.sc]] = true;
                b.p[[n, l.tbs, l.sc]] = p_leo;
            }
        }
        b
    }

    pub fn from_assignment(b: &AssignmentB, ch: &ChannelState) -> Self {
        let mut links: Vec<SatLink> = b
            .links()
            .into_iter()
            .map(|(n, m, k, _)| SatLink { tbs: m, sat: ch.sat_ids[n], sc: k })
            .collect();
        links.sort();
        SatMatching { links }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub t: usize,
    pub tbs: usize,
    pub from_sat: usize,
    pub to_sat: usize,
    /// Newcomer's utility (dB of received power over injected GS interference,
    /// or watts in linear mode).
    pub utility_db: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HandoverLog {
    pub events: Vec<HandoverEvent>,
}

impl HandoverLog {
    pub fn count(&self) -> usize {
        self.events.len()
    }

    pub fn extend(&mut self, other: HandoverLog) {
        self.events.extend(other.events);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "tbs", "from_sat", "to_sat", "utility_db"]).expect("in-memory write");
        for e in &self.events {
            w.write_record([
                e.t.to_string(),
                e.tbs.to_string(),
                e.from_sat.to_string(),
                e.to_sat.to_string(),
                format!("{:.6}", e.utility_db),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// SIC-ordered preference of a candidate unit `(m', (n', k))` seen from the
/// matched unit `(m, (n, k))`. Arguments are power gains:
/// `h_cand = h_{n',m',k}`, `h_cross = h_{n,m',k}`, `h_own = h_{n,m,k}`.
pub fn sic_preference(h_cand: f64, h_cross: f64, h_own: f64, reading: SicReading) -> f64 {
    if h_cand > h_cross {
        match reading {
            SicReading::Verbatim => h_cand / h_own,
            SicReading::Symmetric => h_cand / h_cross,
        }
    } else {
        h_cand
    }
}

/// Eq.-23 style utility of one link: received power at the TBS against the
/// interference the same transmission injects at the GEO ground stations.
pub fn link_utility(ch: &ChannelState, p: f64, n: usize, m: usize, k: usize, mode: HandoverMode) -> f64 {
    let signal = ch.h_sat[[n, m, k]].max(0.0);
    let injected: f64 = ch.h_geo_gs.row(n).sum();
    match mode {
        HandoverMode::RatioDb => linear_to_db(signal / injected),
        HandoverMode::Linear => p * (signal - injected),
    }
}

/// Eq.-23 utility of satellite `n` over its links in `b`.
pub fn handover_utility(b: &AssignmentB, ch: &ChannelState, n: usize) -> f64 {
    let (_, n_m, n_k) = b.b.dim();
    let mut signal = 0.0;
    let mut injected = 0.0;
    for m in 0..n_m {
        for k in 0..n_k {
            if b.b[[n, m, k]] {
                signal += b.p[[n, m, k]] * ch.h_sat[[n, m, k]].max(0.0);
                injected += b.p[[n, m, k]] * ch.h_geo_gs.row(n).sum();
            }
        }
    }
    signal - injected
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImishOptions {
    /// Run the GS-protecting handover process and enforce the interference cap.
    pub handover: bool,
    pub threshold_db: f64,
    pub sic_reading: SicReading,
    pub handover_mode: HandoverMode,
    pub weight_floor: f64,
}

impl ImishOptions {
    pub fn from_scenario(s: &Scenario) -> Self {
        ImishOptions {
            handover: true,
            threshold_db: s.handover_threshold_db,
            sic_reading: s.algorithm.sic_reading,
            handover_mode: s.algorithm.handover_mode,
            weight_floor: s.algorithm.capacity_weight_floor,
        }
    }
}

/// Inputs of one satellite matching.
#[derive(Debug, Clone, Copy)]
pub struct SatProblem<'a> {
    pub ch: &'a ChannelState,
    pub lp: &'a LinkParams,
    pub lambda: &'a [f64],
    pub prev: Option<&'a SatMatching>,
    /// Optional `[N, M, K]` mask of units a TBS may use.
    pub allowed: Option<&'a Array3<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImishOutcome {
    pub matching: SatMatching,
    pub b: AssignmentB,
    pub handovers: HandoverLog,
    /// Initialization rounds; each one seats at least one TBS.
    pub proposal_rounds: usize,
    pub improvement_moves: usize,
    /// Satellites released at entry to restore the interference cap.
    pub released_for_cap: Vec<usize>,
    /// `Σ (λ_m + ε) C_m` of the result.
    pub utility: f64,
}

type Link = (usize, usize, usize); // (m, n, k), n on the candidate axis

/// Weighted capacity of a link list by direct summation.
fn weighted_capacity(links: &[Link], ch: &ChannelState, lp: &LinkParams, w: &[f64]) -> f64 {
    let mut total = 0.0;
    for &(m, n, k) in links {
        let signal = lp.p_leo * ch.h_sat[[n, m, k]].max(0.0);
        let mut interference = lp.noise_ka;
        for &(_, n2, k2) in links {
            if k2 == k && n2 != n {
                interference += lp.p_leo * ch.h_sat[[n2, m, k]].max(0.0);
            }
        }
        total += w[m] * lp.b_ka * (1.0 + signal / interference).log2();
    }
    total
}

fn cap_ok(links: &[Link], ch: &ChannelState, lp: &LinkParams) -> bool {
    (0..ch.n_gs()).all(|l| {
        let i: f64 = links.iter().map(|&(_, n, _)| lp.p_leo * ch.h_geo_gs[[n, l]]).sum();
        i <= lp.i_th[l] * (1.0 + 1e-9)
    })
}

/// Previous-slot link of a TBS, resolved against this slot.
#[derive(Debug, Clone)]
struct Incumbent {
    sat: usize,
    /// Candidate index when still visible to the TBS and not banned.
    n: Option<usize>,
    k: usize,
}

struct Matcher<'a> {
    ch: &'a ChannelState,
    lp: &'a LinkParams,
    opts: &'a ImishOptions,
    allowed: Option<&'a Array3<bool>>,
    w: Vec<f64>,
    banned: Vec<bool>,
    /// Per TBS; empty when there is no previous slot.
    incumbents: Vec<Vec<Incumbent>>,
    has_prev: bool,
    enforce_cap: bool,
    u_cache: Array3<f64>,
}

impl<'a> Matcher<'a> {
    fn new(pb: &SatProblem<'a>, opts: &'a ImishOptions) -> Self {
        let ch = pb.ch;
        let w = pb.lambda.iter().map(|l| l + opts.weight_floor).collect();
        let u_cache = Array3::from_shape_fn((ch.n_sat(), ch.n_tbs(), ch.n_sat_sc()), |(n, m, k)| {
            if ch.visible[[n, m]] {
                link_utility(ch, pb.lp.p_leo, n, m, k, opts.handover_mode)
            } else {
                f64::NAN
            }
        });
        Matcher {
            ch,
            lp: pb.lp,
            opts,
            allowed: pb.allowed,
            w,
            banned: vec![false; ch.n_sat()],
            incumbents: vec![Vec::new(); ch.n_tbs()],
            has_prev: pb.prev.is_some(),
            enforce_cap: opts.handover,
            u_cache,
        }
    }

    fn index_of(&self, sat: usize) -> Option<usize> {
        self.ch.sat_ids.iter().position(|&s| s == sat)
    }

    fn unit_usable(&self, m: usize, n: usize, k: usize) -> bool {
        self.ch.visible[[n, m]] && !self.banned[n] && self.allowed.is_none_or(|a| a[[n, m, k]])
    }

    fn utility(&self, links: &[Link]) -> f64 {
        weighted_capacity(links, self.ch, self.lp, &self.w)
    }

    fn threshold(&self) -> f64 {
        self.opts.threshold_db
    }

    /// Handover admissibility of TBS `m` under `links`.
    fn gate_ok(&self, m: usize, links: &[Link]) -> bool {
        if !self.opts.handover || !self.has_prev {
            return true;
        }
        let inc = &self.incumbents[m];
        let cur: Vec<(usize, usize)> = links.iter().filter(|l| l.0 == m).map(|l| (l.1, l.2)).collect();
        let is_inc = |n: usize| inc.iter().any(|i| i.n == Some(n));
        let new: Vec<f64> = cur
            .iter()
            .filter(|&&(n, _)| !is_inc(n))
            .map(|&(n, k)| self.u_cache[[n, m, k]])
            .collect();
        let mut voluntary: Vec<f64> = Vec::new();
        let mut forced = 0;
        for i in inc {
            if i.n.is_none_or(|n| !cur.iter().any(|c| c.0 == n)) {
                match i.n {
                    Some(n) => voluntary.push(self.u_cache[[n, m, i.k]]),
                    None => forced += 1,
                }
            }
        }
        let h = self.threshold();
        if forced + voluntary.len() > 0 && new.iter().any(|&u| u < h) {
            return false;
        }
        // Newcomers not covering a lost satellite replace a usable incumbent
        // and must beat it by H.
        let swaps = new.len().saturating_sub(forced).min(voluntary.len());
        if swaps == 0 {
            return true;
        }
        let mut new_sorted = new;
        new_sorted.sort_by(|a, b| b.total_cmp(a));
        let mut top: Vec<f64> = new_sorted.into_iter().take(swaps).collect();
        top.sort_by(f64::total_cmp);
        voluntary.sort_by(f64::total_cmp);
        top.iter().zip(&voluntary).all(|(un, ur)| un - ur >= h)
    }

    fn admissible(&self, links: &[Link], touched: &[usize]) -> bool {
        (!self.enforce_cap || cap_ok(links, self.ch, self.lp)) && touched.iter().all(|&m| self.gate_ok(m, links))
    }

    /// Resolves the previous matching, then releases the worst GS interferers
    /// until the cap holds. Returns the starting link list.
    fn carry_over(&mut self, prev: Option<&SatMatching>) -> (Vec<Link>, Vec<usize>) {
        let mut links = Vec::new();
        if let Some(prev) = prev {
            for l in &prev.links {
                let n = self.index_of(l.sat).filter(|&n| self.ch.visible[[n, l.tbs]]);
                self.incumbents[l.tbs].push(Incumbent { sat: l.sat, n, k: l.sc });
                if let Some(n) = n {
                    if self.allowed.is_none_or(|a| a[[n, l.tbs, l.sc]]) {
                        links.push((l.tbs, n, l.sc));
                    }
                }
            }
        }
        let mut released = Vec::new();
        if self.opts.handover {
            while !cap_ok(&links, self.ch, self.lp) {
                let worst = self.worst_interferer(&links);
                self.banned[worst] = true;
                links.retain(|l| l.1 != worst);
                released.push(self.ch.sat_ids[worst]);
            }
            for inc in self.incumbents.iter_mut().flatten() {
                if inc.n.is_some_and(|n| self.banned[n]) {
                    inc.n = None;
                }
            }
        }
        links.sort();
        (links, released)
    }

    fn worst_interferer(&self, links: &[Link]) -> usize {
        let mut score: BTreeMap<usize, f64> = BTreeMap::new();
        for &(_, n, _) in links {
            let s = (0..self.ch.n_gs())
                .map(|l| self.lp.p_leo * self.ch.h_geo_gs[[n, l]] / self.lp.i_th[l].max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            *score.entry(n).or_insert(0.0) += s;
        }
        let mut best = (usize::MAX, f64::MIN);
        for (n, s) in score {
            if s > best.1 {
                best = (n, s);
            }
        }
        best.0
    }

    fn count(links: &[Link], m: usize) -> usize {
        links.iter().filter(|l| l.0 == m).count()
    }

    /// Worst-link seeding: every subchannel unused anywhere proposes to the TBS
    /// whose weakest free unit on it is strongest; each TBS keeps the best
    /// proposals up to its remaining quota and leaves the unmatched set.
    fn initialize(&self, links: &mut Vec<Link>) -> usize {
        let (n_n, n_m, n_k) = (self.ch.n_sat(), self.ch.n_tbs(), self.ch.n_sat_sc());
        let mut unmatched: Vec<bool> = (0..n_m).map(|m| Self::count(links, m) < self.lp.n_connect).collect();
        let mut rounds = 0;
        while unmatched.iter().any(|&u| u) {
            let mut inbox: Vec<Vec<Link>> = vec![Vec::new(); n_m];
            for k in 0..n_k {
                if links.iter().any(|l| l.2 == k) {
                    continue;
                }
                let mut best: Option<(usize, usize, f64)> = None;
                for m in (0..n_m).filter(|&m| unmatched[m]) {
                    let mut worst: Option<(usize, f64)> = None;
                    for n in 0..n_n {
                        if !self.unit_usable(m, n, k) || links.iter().any(|l| l.1 == n && (l.2 == k || l.0 == m)) {
                            continue;
                        }
                        let h = self.ch.h_sat[[n, m, k]];
                        if worst.is_none_or(|(_, wh)| h < wh) {
                            worst = Some((n, h));
                        }
                    }
                    if let Some((n, h)) = worst {
                        if best.is_none_or(|(_, _, bh)| h > bh) {
                            best = Some((m, n, h));
                        }
                    }
                }
                if let Some((m, n, _)) = best {
                    inbox[m].push((m, n, k));
                }
            }
            let mut seated = false;
            for (m, props) in inbox.into_iter().enumerate() {
                if props.is_empty() {
                    continue;
                }
                let base = self.utility(links);
                let mut ranked: Vec<(Link, f64)> = props
                    .into_iter()
                    .map(|p| {
                        let mut trial = links.clone();
                        trial.push(p);
                        (p, self.utility(&trial) - base)
                    })
                    .collect();
                ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let mut took = false;
                for (p, _) in ranked {
                    if Self::count(links, m) >= self.lp.n_connect || links.iter().any(|l| l.0 == m && l.1 == p.1) {
                        continue;
                    }
                    let before = self.utility(links);
                    links.push(p);
                    if self.utility(links) > before && self.admissible(links, &[m]) {
                        took = true;
                    } else {
                        links.pop();
                    }
                }
                if took {
                    unmatched[m] = false;
                    seated = true;
                }
            }
            if !seated {
                break;
            }
            rounds += 1;
        }
        links.sort();
        rounds
    }

    /// All single-unit moves that put unit `(n, k)` at TBS `m`, or drop it.
    fn moves_for(&self, links: &[Link], m: usize, n: usize, k: usize) -> Vec<(Vec<Link>, Vec<usize>)> {
        let mut out = Vec::new();
        if links.contains(&(m, n, k)) {
            let trial: Vec<Link> = links.iter().copied().filter(|&l| l != (m, n, k)).collect();
            out.push((trial, vec![m]));
            return out;
        }
        if !self.unit_usable(m, n, k) {
            return out;
        }
        let holder = links.iter().find(|l| l.1 == n && l.2 == k).map(|l| l.0);
        let base: Vec<Link> = links.iter().copied().filter(|l| !(l.1 == n && l.2 == k)).collect();
        let mut touched = vec![m];
        touched.extend(holder);
        if let Some(&same) = base.iter().find(|l| l.0 == m && l.1 == n) {
            // Retune: the satellite stays, the subchannel changes.
            let mut trial: Vec<Link> = base.iter().copied().filter(|&l| l != same).collect();
            trial.push((m, n, k));
            out.push((trial, touched));
            return out;
        }
        if Self::count(&base, m) < self.lp.n_connect {
            let mut trial = base.clone();
            trial.push((m, n, k));
            out.push((trial, touched.clone()));
        }
        for &old in base.iter().filter(|l| l.0 == m) {
            let mut trial: Vec<Link> = base.iter().copied().filter(|&l| l != old).collect();
            trial.push((m, n, k));
            out.push((trial, touched.clone()));
        }
        out
    }

    fn preference(&self, links: &[Link], m: usize, n: usize, k: usize) -> f64 {
        let h_cand = self.ch.h_sat[[n, m, k]];
        links
            .iter()
            .filter(|l| l.2 == k)
            .map(|&(mo, no, _)| {
                let h_cross = self.ch.h_sat[[no, m, k]].max(0.0);
                sic_preference(h_cand, h_cross, self.ch.h_sat[[no, mo, k]], self.opts.sic_reading)
            })
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
            .unwrap_or(h_cand)
    }

    /// Per round, each subchannel applies its best improving move; candidates
    /// are scanned in descending SIC preference so that it breaks ties.
    fn improve(&self, links: &mut Vec<Link>) -> usize {
        let (n_n, n_m, n_k) = (self.ch.n_sat(), self.ch.n_tbs(), self.ch.n_sat_sc());
        let mut moves = 0;
        loop {
            let mut changed = false;
            for k in 0..n_k {
                let current = self.utility(links);
                let tol = 1e-10 * current.abs().max(1e-300);
                let mut cands: Vec<(f64, usize, usize)> = Vec::new();
                for m in 0..n_m {
                    for n in 0..n_n {
                        if self.ch.visible[[n, m]] {
                            cands.push((self.preference(links, m, n, k), m, n));
                        }
                    }
                }
                cands.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
                let mut best: Option<(Vec<Link>, f64)> = None;
                for &(_, m, n) in &cands {
                    for (trial, touched) in self.moves_for(links, m, n, k) {
                        let u = self.utility(&trial);
                        if u > current + tol && best.as_ref().is_none_or(|b| u > b.1) && self.admissible(&trial, &touched) {
                            best = Some((trial, u));
                        }
                    }
                }
                if let Some((mut trial, _)) = best {
                    trial.sort();
                    *links = trial;
                    moves += 1;
                    changed = true;
                }
            }
            if !changed {
                return moves;
            }
        }
    }

    fn handover_events(&self, links: &[Link], t: usize) -> HandoverLog {
        let mut log = HandoverLog::default();
        if !self.has_prev {
            return log;
        }
        for m in 0..self.ch.n_tbs() {
            let inc = &self.incumbents[m];
            let cur: Vec<(usize, usize)> = links.iter().filter(|l| l.0 == m).map(|l| (l.1, l.2)).collect();
            let mut released: Vec<(f64, usize)> = Vec::new();
            let mut seen = BTreeSet::new();
            for i in inc {
                if !seen.insert(i.sat) {
                    continue;
                }
                let kept = i.n.is_some_and(|n| cur.iter().any(|c| c.0 == n));
                if !kept {
                    let u = i.n.map_or(f64::NEG_INFINITY, |n| self.u_cache[[n, m, i.k]]);
                    released.push((u, i.sat));
                }
            }
            let mut added: Vec<(f64, usize)> = cur
                .iter()
                .filter(|&&(n, _)| !inc.iter().any(|i| i.sat == self.ch.sat_ids[n]))
                .map(|&(n, k)| (self.u_cache[[n, m, k]], self.ch.sat_ids[n]))
                .collect();
            released.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            added.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for ((_, from), (u, to)) in released.iter().zip(&added) {
                log.events.push(HandoverEvent {
                    t,
                    tbs: m,
                    from_sat: *from,
                    to_sat: *to,
                    utility_db: *u,
                });
            }
        }
        log
    }

    fn finish(&self, links: Vec<Link>, t: usize, rounds: usize, moves: usize, released: Vec<usize>) -> ImishOutcome {
        let mut b = AssignmentB::empty(self.ch.n_sat(), self.ch.n_tbs(), self.ch.n_sat_sc());
        for &(m, n, k) in &links {
            b.b[[n, m, k]] = true;
            b.p[[n, m, k]] = self.lp.p_leo;
        }
        let matching = SatMatching::from_assignment(&b, self.ch);
        ImishOutcome {
            utility: self.utility(&links),
            handovers: self.handover_events(&links, t),
            matching,
            b,
            proposal_rounds: rounds,
            improvement_moves: moves,
            released_for_cap: released,
        }
    }
}

/// One full satellite matching for slot `ch.t`.
pub fn imish_round(pb: SatProblem<'_>, opts: &ImishOptions) -> ImishOutcome {
    let mut mt = Matcher::new(&pb, opts);
    let (mut links, released) = mt.carry_over(pb.prev);
    let rounds = mt.initialize(&mut links);
    let moves = mt.improve(&mut links);
    mt.finish(links, pb.ch.t, rounds, moves, released)
}

/// Shared pieces for the distance- and rate-driven baselines.
pub(crate) mod support {
    use super::*;

    pub(crate) fn cap_ok_b(b: &AssignmentB, ch: &ChannelState, lp: &LinkParams) -> bool {
        let links: Vec<Link> = b.links().into_iter().map(|(n, m, k, _)| (m, n, k)).collect();
        cap_ok(&links, ch, lp)
    }

    /// Handover events between `prev` and `cur`, pairing releases with new
    /// satellites per TBS.
    pub(crate) fn diff_events(ch: &ChannelState, lp: &LinkParams, prev: Option<&SatMatching>, cur: &SatMatching, mode: HandoverMode) -> HandoverLog {
        let opts = ImishOptions {
            handover: true,
            threshold_db: 0.0,
            sic_reading: SicReading::Verbatim,
            handover_mode: mode,
            weight_floor: 0.0,
        };
        let lambda = vec![0.0; ch.n_tbs()];
        let pb = SatProblem { ch, lp, lambda: &lambda, prev, allowed: None };
        let mut mt = Matcher::new(&pb, &opts);
        mt.enforce_cap = false;
        mt.carry_over_without_release(prev);
        let links: Vec<Link> = cur
            .links
            .iter()
            .filter_map(|l| mt.index_of(l.sat).map(|n| (l.tbs, n, l.sc)))
            .collect();
        mt.handover_events(&links, ch.t)
    }
}

impl Matcher<'_> {
    fn carry_over_without_release(&mut self, prev: Option<&SatMatching>) {
        if let Some(prev) = prev {
            for l in &prev.links {
                let n = self.index_of(l.sat).filter(|&n| self.ch.visible[[n, l.tbs]]);
                self.incumbents[l.tbs].push(Incumbent { sat: l.sat, n, k: l.sc });
            }
        }
    }
}
