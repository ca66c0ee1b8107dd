//! Terrestrial side: GU association, one-to-one GU ↔ (TBS, subchannel) matching
//! and per-TBS water-filling.
//!
//! Matching runs at the provisional power `P_TBS / C` on every unit. The
//! proposal phase follows the gain-driven initialization and the Θ-ranked
//! candidate proposals; a refinement pass then applies single-GU moves until
//! no move raises the penalized sum rate. Powers are assigned afterwards.

use ndarray::Array3;

use crate::caching::CacheState;
use crate::link_budget::{gu_rate, AssignmentX, LinkParams};

/// Each GU joins the TBS with the largest mean received power; ties go to the
/// lowest index.
pub fn associate_gus(mean_gain: &ndarray::Array2<f64>) -> Vec<usize> {
    let (n_m, n_j) = mean_gain.dim();
    (0..n_j)
        .map(|j| {
            let mut best = 0;
            for m in 1..n_m {
                if mean_gain[[m, j]] > mean_gain[[best, j]] {
                    best = m;
                }
            }
            best
        })
        .collect()
}

/// Θ = h_own^ρ / h_cross for a candidate GU: own gain from its serving TBS over
/// the gain from the proposing unit's TBS.
pub fn theta_preference(h_own: f64, h_cross: f64, rho: f64) -> f64 {
    h_own.powf(rho) / h_cross
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerAllocation {
    WaterFill,
    /// Equal split over the active subchannels of each TBS.
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UaraOptions {
    pub rho: f64,
    pub wf_iterations: usize,
    pub power: PowerAllocation,
}

impl Default for UaraOptions {
    fn default() -> Self {
        UaraOptions {
            rho: 1.0,
            wf_iterations: 1,
            power: PowerAllocation::WaterFill,
        }
    }
}

/// Inputs of one terrestrial matching.
#[derive(Debug, Clone, Copy)]
pub struct TerrProblem<'a> {
    /// `[M, J, C]` gains.
    pub h: &'a Array3<f64>,
    pub cache: &'a CacheState,
    pub association: &'a [usize],
    pub lp: &'a LinkParams,
    pub lambda: &'a [f64],
}

impl TerrProblem<'_> {
    pub fn n_tbs(&self) -> usize {
        self.h.dim().0
    }
    pub fn n_gu(&self) -> usize {
        self.h.dim().1
    }
    pub fn n_sc(&self) -> usize {
        self.h.dim().2
    }
    pub fn provisional_power(&self) -> f64 {
        self.lp.p_tbs_total / self.n_sc() as f64
    }
    fn penalty(&self, m: usize, j: usize) -> f64 {
        if self.cache.is_local(m, j) {
            0.0
        } else {
            self.lambda[m] * self.lp.u_back
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerrOutcome {
    /// Matching with final powers.
    pub x: AssignmentX,
    /// Same matching at provisional power.
    pub provisional: AssignmentX,
    /// Proposal rounds that admitted at least one GU.
    pub proposal_rounds: usize,
    pub refinement_moves: usize,
    pub unserved: usize,
}

/// Occupancy bookkeeping at provisional power.
#[derive(Debug, Clone)]
pub(crate) struct TerrState<'a> {
    pb: TerrProblem<'a>,
    p0: f64,
    /// Occupant of `(m, c)` at `m * C + c`.
    occ: Vec<Option<usize>>,
    n_c: usize,
    /// `[j]` subchannel at the associated TBS.
    at: Vec<Option<usize>>,
    /// Committed penalized rate per subchannel.
    sc_u: Vec<f64>,
    /// `p0 · h[m, j, c]` at `(c * J + j) * M + m`.
    rx: Vec<f64>,
    backhaul: Vec<bool>,
    penalty: Vec<f64>,
    /// Subchannel utility by column code (NaN = not yet seen). Empty when the
    /// code space is too large to tabulate.
    memo: Vec<f64>,
    /// Memo code of each subchannel column, and the weight of row `m` in it.
    code: Vec<usize>,
    weight: Vec<usize>,
    /// Per-column stamp, renewed on every change (0 stands for "unmatched").
    ver: Vec<u64>,
    clock: u64,
    /// `[j * (C + 1) + t]`: the (from, target) stamps at which moving `j` to
    /// `t` (`t = C` for unmatched) was last found not to improve.
    settled: Vec<(u64, u64)>,
}

const MEMO_LIMIT: usize = 1 << 18;

impl<'a> TerrState<'a> {
    pub(crate) fn new(pb: TerrProblem<'a>) -> Self {
        let mut st = TerrState {
            p0: pb.provisional_power(),
            occ: vec![None; pb.n_tbs() * pb.n_sc()],
            n_c: pb.n_sc(),
            at: vec![None; pb.n_gu()],
            sc_u: vec![0.0; pb.n_sc()],
            rx: {
                let (n_m, n_j, n_c) = pb.h.dim();
                let p0 = pb.provisional_power();
                let mut rx = Vec::with_capacity(n_m * n_j * n_c);
                for c in 0..n_c {
                    for j in 0..n_j {
                        rx.extend((0..n_m).map(|m| p0 * pb.h[[m, j, c]]));
                    }
                }
                rx
            },
            backhaul: (0..pb.n_gu()).map(|j| !pb.cache.is_local(pb.association[j], j)).collect(),
            penalty: (0..pb.n_gu()).map(|j| pb.penalty(pb.association[j], j)).collect(),
            memo: {
                let codes = (0..pb.n_tbs())
                    .try_fold(pb.n_sc(), |acc: usize, _| acc.checked_mul(pb.n_gu() + 1))
                    .filter(|&n| n <= MEMO_LIMIT);
                codes.map_or_else(Vec::new, |n| vec![f64::NAN; n])
            },
            code: Vec::new(),
            weight: Vec::new(),
            ver: (1..=pb.n_sc() as u64).collect(),
            clock: pb.n_sc() as u64,
            settled: vec![(u64::MAX, u64::MAX); pb.n_gu() * (pb.n_sc() + 1)],
            pb,
        };
        if !st.memo.is_empty() {
            let (n_m, n_c, base) = (pb.n_tbs(), pb.n_sc(), pb.n_gu() + 1);
            st.weight = (0..n_m).map(|m| base.pow((n_m - 1 - m) as u32)).collect();
            st.code = (0..n_c).map(|c| c * base.pow(n_m as u32)).collect();
        }
        st
    }

    fn rate(&self, m: usize, c: usize) -> f64 {
        let Some(j) = self.occ[m * self.n_c + c] else { return 0.0 };
        let n_m = self.pb.n_tbs();
        let rx = &self.rx[(c * self.pb.n_gu() + j) * n_m..][..n_m];
        let mut interference = self.pb.lp.noise_c;
        for (mi, g) in rx.iter().enumerate() {
            if mi != m && self.occ[mi * self.n_c + c].is_some() {
                interference += g;
            }
        }
        gu_rate(rx[m] / interference, self.backhaul[j], self.pb.lp.u_back, self.pb.lp.b_c)
    }

    /// Penalized rate carried on subchannel `c`.
    fn sc_utility(&mut self, c: usize) -> f64 {
        self.column_utility(c, 0, self.occ[c])
    }

    /// Utility of subchannel `c` with row `m` set to `v`.
    fn column_utility(&mut self, c: usize, m: usize, v: Option<usize>) -> f64 {
        let idx = m * self.n_c + c;
        if self.memo.is_empty() {
            let saved = std::mem::replace(&mut self.occ[idx], v);
            let u = self.sc_utility_direct(c);
            self.occ[idx] = saved;
            return u;
        }
        let old = self.occ[idx].map_or(0, |j| j + 1);
        let code = self.code[c] + v.map_or(0, |j| j + 1) * self.weight[m] - old * self.weight[m];
        let u = self.memo[code];
        if !u.is_nan() {
            return u;
        }
        let saved = std::mem::replace(&mut self.occ[idx], v);
        let u = self.sc_utility_direct(c);
        self.occ[idx] = saved;
        self.memo[code] = u;
        u
    }

    fn sc_utility_direct(&self, c: usize) -> f64 {
        (0..self.pb.n_tbs())
            .filter_map(|m| self.occ[m * self.n_c + c].map(|j| self.rate(m, c) - self.penalty[j]))
            .sum()
    }

    /// Committed placement; refreshes the cached subchannel utilities.
    fn place(&mut self, j: usize, c: Option<usize>) {
        let old = self.at[j];
        self.place_raw(j, c);
        for sc in old.into_iter().chain(c) {
            self.sc_u[sc] = self.sc_utility(sc);
        }
    }

    fn place_raw(&mut self, j: usize, c: Option<usize>) {
        let m = self.pb.association[j];
        let tracked = !self.code.is_empty();
        if let Some(old) = self.at[j] {
            self.occ[m * self.n_c + old] = None;
            self.clock += 1;
            self.ver[old] = self.clock;
            if tracked {
                self.code[old] -= (j + 1) * self.weight[m];
            }
        }
        if let Some(c) = c {
            debug_assert!(self.occ[m * self.n_c + c].is_none());
            self.occ[m * self.n_c + c] = Some(j);
            self.clock += 1;
            self.ver[c] = self.clock;
            if tracked {
                self.code[c] += (j + 1) * self.weight[m];
            }
        }
        self.at[j] = c;
    }

    /// Utility change of adding unmatched `j` on free `(a_j, c)`.
    fn add_delta(&mut self, j: usize, c: usize) -> f64 {
        let m = self.pb.association[j];
        self.column_utility(c, m, Some(j)) - self.sc_u[c]
    }

    pub(crate) fn to_assignment(&self) -> AssignmentX {
        let (m, j, c) = self.pb.h.dim();
        let mut x = AssignmentX::with_association(self.pb.association, m, c);
        debug_assert_eq!(j, self.at.len());
        for (j, slot) in self.at.iter().enumerate() {
            if let Some(c) = *slot {
                let m = self.pb.association[j];
                x.x[[m, j, c]] = true;
                x.p[[m, j, c]] = self.p0;
            }
        }
        x
    }

    /// Gain-driven initialization: every subchannel with no matched unit
    /// proposes to its strongest unmatched GU; a GU with several proposals keeps
    /// the strongest channel.
    fn initialize(&mut self) -> usize {
        let (n_m, n_j, n_c) = self.pb.h.dim();
        let mut rounds = 0;
        loop {
            let mut proposals: Vec<Option<(usize, f64)>> = vec![None; n_j];
            for c in 0..n_c {
                if (0..n_m).any(|m| self.occ[m * self.n_c + c].is_some()) {
                    continue;
                }
                let mut best: Option<(usize, f64)> = None;
                for j in 0..n_j {
                    if self.at[j].is_some() {
                        continue;
                    }
                    let g = self.pb.h[[self.pb.association[j], j, c]];
                    if best.is_some_and(|(_, bg)| g <= bg) {
                        continue;
                    }
                    if self.add_delta(j, c) < 0.0 {
                        continue;
                    }
                    best = Some((j, g));
                }
                if let Some((j, g)) = best {
                    if proposals[j].is_none_or(|(_, pg)| g > pg) {
                        proposals[j] = Some((c, g));
                    }
                }
            }
            let mut admitted = false;
            for (j, p) in proposals.into_iter().enumerate() {
                if let Some((c, _)) = p {
                    self.place(j, Some(c));
                    admitted = true;
                }
            }
            if !admitted {
                return rounds;
            }
            rounds += 1;
        }
    }

    /// Θ-ranked proposals from matched units to unmatched GUs at TBSs still free
    /// on the same subchannel. Local candidates are tried first; a backhaul
    /// candidate is used when the local one lowers the utility.
    fn propose(&mut self, rho: f64) -> usize {
        let (n_m, n_j, n_c) = self.pb.h.dim();
        let mut rounds = 0;
        loop {
            // Best proposal per GU: (c, delta).
            let mut inbox: Vec<Option<(usize, f64)>> = vec![None; n_j];
            for c in 0..n_c {
                let mut local: Option<(usize, f64)> = None;
                let mut backhaul: Option<(usize, f64)> = None;
                for m in 0..n_m {
                    if self.occ[m * self.n_c + c].is_none() {
                        continue;
                    }
                    let mut best_l: Option<(usize, f64)> = None;
                    let mut best_b: Option<(usize, f64)> = None;
                    for j in 0..n_j {
                        let mj = self.pb.association[j];
                        if self.at[j].is_some() || self.occ[mj * self.n_c + c].is_some() {
                            continue;
                        }
                        let th = theta_preference(self.pb.h[[mj, j, c]], self.pb.h[[m, j, c]], rho);
                        let slot = if self.pb.cache.is_local(mj, j) { &mut best_l } else { &mut best_b };
                        if slot.is_none_or(|(_, t)| th > t) {
                            *slot = Some((j, th));
                        }
                    }
                    for (cand, set) in [(best_l, &mut local), (best_b, &mut backhaul)] {
                        if let Some((j, _)) = cand {
                            let d = self.add_delta(j, c);
                            if set.is_none_or(|(_, bd)| d > bd) {
                                *set = Some((j, d));
                            }
                        }
                    }
                }
                let pick = match (local, backhaul) {
                    (Some(l), _) if l.1 >= 0.0 => Some(l),
                    (_, Some(b)) if b.1 >= 0.0 => Some(b),
                    _ => None,
                };
                if let Some((j, d)) = pick {
                    if inbox[j].is_none_or(|(_, bd)| d > bd) {
                        inbox[j] = Some((c, d));
                    }
                }
            }
            let mut admitted = false;
            for (j, p) in inbox.into_iter().enumerate() {
                if let Some((c, _)) = p {
                    self.place(j, Some(c));
                    admitted = true;
                }
            }
            if !admitted {
                return rounds;
            }
            rounds += 1;
        }
    }

    fn stamps(&self, j: usize, target: Option<usize>) -> (usize, (u64, u64)) {
        let slot = j * (self.n_c + 1) + target.unwrap_or(self.n_c);
        let v = |c: Option<usize>| c.map_or(0, |c| self.ver[c]);
        (slot, (v(self.at[j]), v(target)))
    }

    /// Whether moving `j` to `target` is known not to improve.
    fn is_settled(&self, j: usize, target: Option<usize>) -> bool {
        let (slot, key) = self.stamps(j, target);
        self.settled[slot] == key
    }

    fn settle(&mut self, j: usize, target: Option<usize>) {
        let (slot, key) = self.stamps(j, target);
        self.settled[slot] = key;
    }

    fn apply_move(&mut self, j: usize, target: Option<usize>) {
        let from = self.at[j];
        self.move_raw(j, target);
        for sc in from.into_iter().chain(target) {
            self.sc_u[sc] = self.sc_utility(sc);
        }
    }

    fn move_raw(&mut self, j: usize, target: Option<usize>) {
        let m = self.pb.association[j];
        let from = self.at[j];
        let occupant = target.and_then(|c| self.occ[m * self.n_c + c]);
        if let Some(o) = occupant {
            self.place_raw(o, None);
        }
        self.place_raw(j, target);
        if let Some(o) = occupant {
            self.place_raw(o, from);
        }
    }

    fn utility(&self) -> f64 {
        self.sc_u.iter().sum()
    }

    /// Best-improvement single-GU moves until none helps. Banned GUs stay
    /// put and banned units take no new occupant.
    fn refine_masked(&mut self, ban: Option<&Ban>) -> usize {
        let n_j = self.pb.n_gu();
        let n_c = self.pb.n_sc();
        let tol = 1e-9 * self.pb.lp.b_c;
        let mut moves = 0;
        loop {
            let mut improved = false;
            for j in 0..n_j {
                if ban.is_some_and(|b| b.gu(j)) {
                    continue;
                }
                let m = self.pb.association[j];
                let from = self.at[j];
                let from_banned = from.is_some_and(|f| ban.is_some_and(|b| b.unit(m, f)));
                // Utility change of simply leaving `from`, computed on demand.
                let mut leave = None;
                let mut best: Option<(Option<usize>, f64)> = None;
                if let Some(f) = from.filter(|_| !self.is_settled(j, None)) {
                    let d = self.column_utility(f, m, None) - self.sc_u[f];
                    leave = Some(d);
                    if d > tol {
                        best = Some((None, d));
                    } else {
                        self.settle(j, None);
                    }
                }
                for c in 0..n_c {
                    if Some(c) == from || ban.is_some_and(|b| b.unit(m, c)) || self.is_settled(j, Some(c)) {
                        continue;
                    }
                    let occupant = self.occ[m * self.n_c + c];
                    let d = match (occupant, from) {
                        // A swap would move the occupant into our old unit.
                        (Some(_), Some(_)) if from_banned => continue,
                        (Some(o), Some(f)) => {
                            self.column_utility(f, m, Some(o)) - self.sc_u[f] + self.column_utility(c, m, Some(j))
                                - self.sc_u[c]
                        }
                        (_, Some(f)) => {
                            let l = *leave.get_or_insert_with(|| self.column_utility(f, m, None) - self.sc_u[f]);
                            l + self.column_utility(c, m, Some(j)) - self.sc_u[c]
                        }
                        (_, None) => self.column_utility(c, m, Some(j)) - self.sc_u[c],
                    };
                    if d <= tol {
                        self.settle(j, Some(c));
                    } else if best.is_none_or(|(_, bd)| d > bd) {
                        best = Some((Some(c), d));
                    }
                }
                if let Some((target, _)) = best {
                    self.apply_move(j, target);
                    moves += 1;
                    improved = true;
                }
            }
            if !improved {
                return moves;
            }
        }
    }

    fn refine(&mut self) -> usize {
        self.refine_masked(None)
    }

    /// Descent under `ban`, then without it.
    fn descend_banned(&mut self, ban: &Ban) -> usize {
        self.refine_masked(Some(ban)) + self.refine()
    }

    /// Ejection chains: vacate a GU, a unit or a whole TBS (or force a served GU
    /// onto another unit), re-descend with it banned, then lift the ban and descend again. Kept only on strict
    /// improvement, so the result is still a single-move local optimum.
    fn eject(&mut self) -> usize {
        let tol = 1e-9 * self.pb.lp.b_c;
        let (n_m, n_j, n_c) = (self.pb.n_tbs(), self.pb.n_gu(), self.pb.n_sc());
        let mut kicks: Vec<Kick> = (0..n_j).map(|j| Kick::Vacate(Ban::Gu(j))).collect();
        kicks.extend((0..n_m).flat_map(|m| (0..n_c).map(move |c| Kick::Vacate(Ban::Unit(m, c)))));
        if n_c > 1 {
            kicks.extend((0..n_m).map(|m| Kick::Vacate(Ban::Tbs(m))));
        }
        // Forced relocation of a served GU, held while the rest re-descends.
        kicks.extend((0..n_j).flat_map(|j| (0..n_c).map(move |c| Kick::Force(j, c))));
        let mut moves = 0;
        let mut current = self.utility();
        // Stop once every kick has failed against the current state.
        let mut failed = 0;
        let mut i = 0;
        while failed < kicks.len() {
            let kick = kicks[i];
            i = (i + 1) % kicks.len();
            failed += 1;
            let vacate: Vec<usize> = match kick {
                Kick::Vacate(ban) => (0..n_j)
                    .filter(|&j| match ban {
                        Ban::Gu(g) => g == j && self.at[j].is_some(),
                        Ban::Unit(m, c) => self.occ[m * self.n_c + c] == Some(j),
                        Ban::Tbs(m) => self.pb.association[j] == m && self.at[j].is_some(),
                    })
                    .collect(),
                Kick::Force(j, c) => {
                    if self.at[j].is_none_or(|from| from == c) {
                        continue;
                    }
                    Vec::new()
                }
            };
            if matches!(kick, Kick::Vacate(_)) && vacate.is_empty() {
                continue;
            }
            let saved = (self.occ.clone(), self.at.clone(), self.sc_u.clone(), self.code.clone(), self.ver.clone());
            let n = match kick {
                Kick::Vacate(ban) => {
                    for &j in &vacate {
                        self.apply_move(j, None);
                    }
                    vacate.len() + self.descend_banned(&ban)
                }
                Kick::Force(j, c) => {
                    self.apply_move(j, Some(c));
                    1 + self.descend_banned(&Ban::Gu(j))
                }
            };
            let u = self.utility();
            if u > current + tol {
                current = u;
                moves += n;
                failed = 0;
            } else {
                (self.occ, self.at, self.sc_u, self.code, self.ver) = saved;
            }
        }
        moves
    }
}

#[derive(Debug, Clone, Copy)]
enum Kick {
    Vacate(Ban),
    Force(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ban {
    Gu(usize),
    Unit(usize, usize),
    Tbs(usize),
}

impl Ban {
    fn gu(&self, j: usize) -> bool {
        *self == Ban::Gu(j)
    }

    fn unit(&self, m: usize, c: usize) -> bool {
        match *self {
            Ban::Unit(bm, bc) => bm == m && bc == c,
            Ban::Tbs(bm) => bm == m,
            Ban::Gu(_) => false,
        }
    }
}

pub fn match_terrestrial(pb: TerrProblem<'_>, rho: f64) -> (AssignmentX, usize, usize) {
    let mut st = TerrState::new(pb);
    let mut rounds = st.initialize();
    rounds += st.propose(rho);
    let moves = st.refine() + st.eject();
    (st.to_assignment(), rounds, moves)
}

/// Penalized sum rate `Σ R − Σ λ_m U_back` (backhaul GUs) of an assignment at its
/// own powers, by direct summation.
pub fn terrestrial_utility(x: &AssignmentX, pb: &TerrProblem<'_>) -> f64 {
    let rates = crate::link_budget::terrestrial_rates(x, pb.h, pb.cache, pb.lp);
    rates.iter().map(|&(m, j, _, r)| r - pb.penalty(m, j)).sum()
}

pub fn uara_round(pb: TerrProblem<'_>, opts: &UaraOptions) -> TerrOutcome {
    let (provisional, proposal_rounds, refinement_moves) = match_terrestrial(pb, opts.rho);
    let mut x = provisional.clone();
    allocate_power(&mut x, pb.h, pb.cache, pb.lp, opts.power, opts.wf_iterations);
    let served = x.x.iter().filter(|&&v| v).count();
    TerrOutcome {
        x,
        provisional,
        proposal_rounds,
        refinement_moves,
        unserved: pb.n_gu() - served,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterLevel {
    pub powers: Vec<f64>,
    pub mu: f64,
}

/// Maximizes `Σ log2(1 + p_c / n_c)` subject to `Σ p_c = p_total`, where `n_c`
/// is the effective noise `(I_c + σ²) / h_c`.
pub fn waterfill(n_eff: &[f64], p_total: f64) -> WaterLevel {
    assert!(!n_eff.is_empty() && p_total > 0.0);
    let mut order: Vec<usize> = (0..n_eff.len()).collect();
    order.sort_by(|&a, &b| n_eff[a].total_cmp(&n_eff[b]).then(a.cmp(&b)));
    let mut prefix = 0.0;
    let mut mu = 0.0;
    for (i, &c) in order.iter().enumerate() {
        prefix += n_eff[c];
        let level = (p_total + prefix) / (i + 1) as f64;
        let next = order.get(i + 1).map(|&c| n_eff[c]);
        if next.is_none_or(|n| level <= n) {
            mu = level;
            break;
        }
    }
    WaterLevel {
        powers: n_eff.iter().map(|n| (mu - n).max(0.0)).collect(),
        mu,
    }
}

/// Active `(j, c)` links of TBS `m`.
fn tbs_links(x: &AssignmentX, m: usize) -> Vec<(usize, usize)> {
    let (_, n_j, n_c) = x.x.dim();
    let mut out = Vec::new();
    for j in 0..n_j {
        for c in 0..n_c {
            if x.x[[m, j, c]] {
                out.push((j, c));
            }
        }
    }
    out
}

/// One water-filling pass over all TBSs, each holding the others' current
/// powers fixed.
pub fn waterfill_pass(x: &mut AssignmentX, h: &Array3<f64>, noise: f64, p_total: f64) {
    let n_m = x.x.dim().0;
    let snapshot = x.clone();
    for m in 0..n_m {
        let links = tbs_links(&snapshot, m);
        if links.is_empty() {
            continue;
        }
        let n_eff: Vec<f64> = links
            .iter()
            .map(|&(j, c)| {
                let mut i = noise;
                for mi in 0..n_m {
                    if mi == m {
                        continue;
                    }
                    for (ji, ci) in tbs_links(&snapshot, mi) {
                        if ci == c {
                            i += snapshot.p[[mi, ji, ci]] * h[[mi, j, c]];
                        }
                    }
                }
                i / h[[m, j, c]]
            })
            .collect();
        let wl = waterfill(&n_eff, p_total);
        for (&(j, c), p) in links.iter().zip(wl.powers) {
            x.p[[m, j, c]] = p;
        }
    }
}

/// Sets the powers of `x` under `power`. Water-filling starts from the even
/// split and keeps each pass only while it raises the sum rate.
pub fn allocate_power(
    x: &mut AssignmentX,
    h: &Array3<f64>,
    cache: &CacheState,
    lp: &LinkParams,
    power: PowerAllocation,
    wf_iterations: usize,
) {
    equal_power(x, lp.p_tbs_total);
    if power == PowerAllocation::Equal {
        return;
    }
    let sum_rate = |x: &AssignmentX| -> f64 { crate::link_budget::terrestrial_rates(x, h, cache, lp).iter().map(|r| r.3).sum() };
    let mut current = sum_rate(x);
    for _ in 0..wf_iterations.max(1) {
        let mut next = x.clone();
        waterfill_pass(&mut next, h, lp.noise_c, lp.p_tbs_total);
        let v = sum_rate(&next);
        if v <= current {
            break;
        }
        *x = next;
        current = v;
    }
}

/// Splits `p_total` evenly over each TBS's active subchannels.
pub fn equal_power(x: &mut AssignmentX, p_total: f64) {
    for m in 0..x.x.dim().0 {
        let links = tbs_links(x, m);
        let share = p_total / links.len().max(1) as f64;
        for (j, c) in links {
            x.p[[m, j, c]] = share;
        }
    }
}

/// Objective maximized by [`waterfill`].
pub fn waterfill_objective(n_eff: &[f64], powers: &[f64]) -> f64 {
    n_eff.iter().zip(powers).map(|(n, p)| (1.0 + p / n).log2()).sum()
}
