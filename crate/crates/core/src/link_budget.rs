//! Closed-form link performance: SINRs, rates, backhaul capacity, GEO ground-station
//! interference and the feasibility checker for constraints C1–C9.
//!
//! Everything here works on dense assignment tensors and sums directly, so it
//! doubles as the reference evaluation for the incremental bookkeeping done
//! inside the matching algorithms.

use std::collections::BTreeSet;
use std::fmt;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::caching::CacheState;
use crate::channel::ChannelState;
use crate::scenario::Scenario;
use crate::units::db_to_linear;

/// GU ↔ TBS-subchannel assignment with powers.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentX {
    /// `[M, J, C]`.
    pub x: Array3<bool>,
    /// `[M, J, C]`, watts.
    pub p: Array3<f64>,
    /// `[M, J]` association.
    pub a: Array2<bool>,
}

impl AssignmentX {
    pub fn empty(m: usize, j: usize, c: usize) -> Self {
        AssignmentX {
            x: Array3::from_elem((m, j, c), false),
            p: Array3::zeros((m, j, c)),
            a: Array2::from_elem((m, j), false),
        }
    }

    pub fn with_association(association: &[usize], m: usize, c: usize) -> Self {
        let mut out = Self::empty(m, association.len(), c);
        for (j, &tbs) in association.iter().enumerate() {
            out.a[[tbs, j]] = true;
        }
        out
    }

    /// Active links `(m, j, c, p)`.
    pub fn links(&self) -> Vec<(usize, usize, usize, f64)> {
        self.x
            .indexed_iter()
            .filter(|(_, &on)| on)
            .map(|((m, j, c), _)| (m, j, c, self.p[[m, j, c]]))
            .collect()
    }
}

/// LEO-subchannel ↔ TBS assignment with powers.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentB {
    /// `[N, M, K]`.
    pub b: Array3<bool>,
    /// `[N, M, K]`, watts.
    pub p: Array3<f64>,
}

impl AssignmentB {
    pub fn empty(n: usize, m: usize, k: usize) -> Self {
        AssignmentB {
            b: Array3::from_elem((n, m, k), false),
            p: Array3::zeros((n, m, k)),
        }
    }

    pub fn links(&self) -> Vec<(usize, usize, usize, f64)> {
        self.b
            .indexed_iter()
            .filter(|(_, &on)| on)
            .map(|((n, m, k), _)| (n, m, k, self.p[[n, m, k]]))
            .collect()
    }
}

/// Scalars needed by the rate formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub b_c: f64,
    pub b_ka: f64,
    pub noise_c: f64,
    pub noise_ka: f64,
    pub u_back: f64,
    pub p_tbs_total: f64,
    pub p_leo: f64,
    pub p_geo: f64,
    pub n_connect: usize,
    /// Per ground-station interference cap I_th (W).
    pub i_th: Vec<f64>,
}

impl LinkParams {
    pub fn new(scenario: &Scenario, ch: &ChannelState) -> Self {
        LinkParams {
            b_c: scenario.bands.b_c_hz,
            b_ka: scenario.bands.b_ka_hz,
            noise_c: ch.noise_c,
            noise_ka: ch.noise_ka,
            u_back: scenario.caching.u_back_bps,
            p_tbs_total: scenario.powers.p_tbs_total,
            p_leo: scenario.powers.p_leo_per_sc,
            p_geo: scenario.powers.p_geo,
            n_connect: scenario.n_connect,
            i_th: interference_thresholds(scenario, ch),
        }
    }
}

/// Interference caps: the explicit override when configured, otherwise the
/// interference level at which the station's CINR falls to `cinr_threshold_db`.
pub fn interference_thresholds(scenario: &Scenario, ch: &ChannelState) -> Vec<f64> {
    if let Some(v) = scenario.interference_threshold_w {
        return vec![v; ch.n_gs()];
    }
    let ratio = db_to_linear(scenario.cinr_threshold_db);
    ch.h_geo_signal
        .iter()
        .map(|h| (scenario.powers.p_geo * h / ratio - ch.noise_ka).max(0.0))
        .collect()
}

/// SINR of GU `j` served by TBS `m` on subchannel `c`; interference is every
/// other active link on the same subchannel.
pub fn gu_sinr(
    x: &AssignmentX,
    h_terr: &Array3<f64>,
    noise: f64,
    m: usize,
    j: usize,
    c: usize,
) -> f64 {
    let signal = x.p[[m, j, c]] * h_terr[[m, j, c]] * x.x[[m, j, c]] as u8 as f64;
    let (n_m, n_j, _) = x.x.dim();
    let mut interference = 0.0;
    for mi in 0..n_m {
        for ji in 0..n_j {
            if (mi, ji) != (m, j) && x.x[[mi, ji, c]] {
                interference += x.p[[mi, ji, c]] * h_terr[[mi, j, c]];
            }
        }
    }
    signal / (interference + noise)
}

/// Access rate `B_C·log2(1+γ)`, capped at `u_back` for backhaul GUs.
pub fn gu_rate(sinr: f64, is_backhaul: bool, u_back: f64, b_c: f64) -> f64 {
    let r = b_c * (1.0 + sinr).log2();
    if is_backhaul {
        r.min(u_back)
    } else {
        r
    }
}

/// Achieved rate per active link `(m, j, c, rate)`.
pub fn terrestrial_rates(
    x: &AssignmentX,
    h_terr: &Array3<f64>,
    cache: &CacheState,
    lp: &LinkParams,
) -> Vec<(usize, usize, usize, f64)> {
    x.links()
        .into_iter()
        .map(|(m, j, c, _)| {
            let g = gu_sinr(x, h_terr, lp.noise_c, m, j, c);
            (m, j, c, gu_rate(g, !cache.is_local(m, j), lp.u_back, lp.b_c))
        })
        .collect()
}

pub fn sum_rate(x: &AssignmentX, h_terr: &Array3<f64>, cache: &CacheState, lp: &LinkParams) -> f64 {
    terrestrial_rates(x, h_terr, cache, lp)
        .iter()
        .map(|r| r.3)
        .sum()
}

/// Backhaul traffic `Σ_{j,c} x(1−g)U_back` per TBS.
pub fn backhaul_load(x: &AssignmentX, cache: &CacheState, u_back: f64) -> Vec<f64> {
    let mut load = vec![0.0; x.x.dim().0];
    for (m, j, _, _) in x.links() {
        if !cache.is_local(m, j) {
            load[m] += u_back;
        }
    }
    load
}

fn gain_or_zero(h: f64) -> f64 {
    // NaN marks an absent pair.
    h.max(0.0)
}

/// SINR of the backhaul link `(n, m, k)`: interference from every other active
/// link on subchannel `k` received at TBS `m`.
pub fn backhaul_sinr(b: &AssignmentB, h_sat: &Array3<f64>, noise: f64, n: usize, m: usize, k: usize) -> f64 {
    if !b.b[[n, m, k]] {
        return 0.0;
    }
    let signal = b.p[[n, m, k]] * gain_or_zero(h_sat[[n, m, k]]);
    let (n_n, n_m, _) = b.b.dim();
    let mut interference = 0.0;
    for ni in 0..n_n {
        for mi in 0..n_m {
            if ni != n && b.b[[ni, mi, k]] {
                interference += b.p[[ni, mi, k]] * gain_or_zero(h_sat[[ni, m, k]]);
            }
        }
    }
    signal / (interference + noise)
}

/// Backhaul capacity `C_m = Σ_{n,k} B_Ka·log2(1+γ_{n,m,k})` per TBS.
pub fn backhaul_capacity(b: &AssignmentB, h_sat: &Array3<f64>, noise: f64, b_ka: f64) -> Vec<f64> {
    let mut cap = vec![0.0; b.b.dim().1];
    for (n, m, k, _) in b.links() {
        cap[m] += b_ka * (1.0 + backhaul_sinr(b, h_sat, noise, n, m, k)).log2();
    }
    cap
}

/// Aggregate LEO interference `I_l` at each GEO ground station.
pub fn geo_gs_interference(b: &AssignmentB, h_geo_gs: &Array2<f64>) -> Vec<f64> {
    let mut out = vec![0.0; h_geo_gs.ncols()];
    for (n, _, _, p) in b.links() {
        for (l, o) in out.iter_mut().enumerate() {
            *o += p * h_geo_gs[[n, l]];
        }
    }
    out
}

/// GEO ground-station CINR `p_geo·h / (I + σ²)` (linear).
pub fn geo_gs_cinr(interference: &[f64], h_geo_signal: &[f64], p_geo: f64, noise: f64) -> Vec<f64> {
    interference
        .iter()
        .zip(h_geo_signal)
        .map(|(i, h)| p_geo * h / (i + noise))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintId {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 9] = [
        ConstraintId::C1,
        ConstraintId::C2,
        ConstraintId::C3,
        ConstraintId::C4,
        ConstraintId::C5,
        ConstraintId::C6,
        ConstraintId::C7,
        ConstraintId::C8,
        ConstraintId::C9,
    ];
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Link to a TBS the GU is not associated with.
    C1 { tbs: usize, gu: usize, sc: usize },
    C2 { gu: usize, links: usize },
    C3 { tbs: usize, sc: usize, gus: usize },
    C4 { sat: usize, tbs: usize, sc: usize },
    C5 { tbs: usize, links: usize },
    C6 { sat: usize, sc: usize, tbs_count: usize },
    C7 { tbs: usize, load: f64, capacity: f64, deficit: f64 },
    C8 { tbs: usize, power: f64 },
    C9 { gs: usize, interference: f64, threshold: f64 },
}

impl Violation {
    pub fn id(&self) -> ConstraintId {
        match self {
            Violation::C1 { .. } => ConstraintId::C1,
            Violation::C2 { .. } => ConstraintId::C2,
            Violation::C3 { .. } => ConstraintId::C3,
            Violation::C4 { .. } => ConstraintId::C4,
            Violation::C5 { .. } => ConstraintId::C5,
            Violation::C6 { .. } => ConstraintId::C6,
            Violation::C7 { .. } => ConstraintId::C7,
            Violation::C8 { .. } => ConstraintId::C8,
            Violation::C9 { .. } => ConstraintId::C9,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn failed(&self) -> BTreeSet<ConstraintId> {
        self.violations.iter().map(Violation::id).collect()
    }

    pub fn passes(&self, id: ConstraintId) -> bool {
        !self.violations.iter().any(|v| v.id() == id)
    }

    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn is_feasible_except(&self, exempt: &[ConstraintId]) -> bool {
        self.violations.iter().all(|v| exempt.contains(&v.id()))
    }

    /// Compact `C2;C7` style summary, empty when feasible.
    pub fn summary(&self) -> String {
        self.failed()
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";")
    }
}

const REL_TOL: f64 = 1e-9;

fn exceeds(value: f64, limit: f64) -> bool {
    value > limit + REL_TOL * limit.abs().max(1e-30)
}

/// Evaluates C1–C9 for one slot. Pure; violations are returned as data.
pub fn check_constraints(
    x: &AssignmentX,
    b: &AssignmentB,
    ch: &ChannelState,
    cache: &CacheState,
    lp: &LinkParams,
) -> ConstraintReport {
    let mut v = Vec::new();
    let (n_m, n_j, n_c) = x.x.dim();
    for ((m, j, c), &on) in x.x.indexed_iter() {
        if on && !x.a[[m, j]] {
            v.push(Violation::C1 { tbs: m, gu: j, sc: c });
        }
    }
    for j in 0..n_j {
        let links = (0..n_m)
            .flat_map(|m| (0..n_c).map(move |c| (m, c)))
            .filter(|&(m, c)| x.x[[m, j, c]])
            .count();
        if links > 1 {
            v.push(Violation::C2 { gu: j, links });
        }
    }
    for m in 0..n_m {
        for c in 0..n_c {
            let gus = (0..n_j).filter(|&j| x.x[[m, j, c]]).count();
            if gus > 1 {
                v.push(Violation::C3 { tbs: m, sc: c, gus });
            }
        }
    }
    let (n_n, _, n_k) = b.b.dim();
    for ((n, m, k), &on) in b.b.indexed_iter() {
        if on && !ch.visible[[n, m]] {
            v.push(Violation::C4 { sat: n, tbs: m, sc: k });
        }
    }
    for m in 0..n_m {
        let links = b.b.indexed_iter().filter(|((_, mi, _), &on)| on && *mi == m).count();
        if links > lp.n_connect {
            v.push(Violation::C5 { tbs: m, links });
        }
    }
    for n in 0..n_n {
        for k in 0..n_k {
            let tbs_count = (0..n_m).filter(|&m| b.b[[n, m, k]]).count();
            if tbs_count > 1 {
                v.push(Violation::C6 { sat: n, sc: k, tbs_count });
            }
        }
    }
    let capacity = backhaul_capacity(b, &ch.h_sat, lp.noise_ka, lp.b_ka);
    let load = backhaul_load(x, cache, lp.u_back);
    for m in 0..n_m {
        if exceeds(load[m], capacity[m]) {
            v.push(Violation::C7 {
                tbs: m,
                load: load[m],
                capacity: capacity[m],
                deficit: load[m] - capacity[m],
            });
        }
    }
    for m in 0..n_m {
        let mut power = 0.0;
        for j in 0..n_j {
            for c in 0..n_c {
                if x.x[[m, j, c]] {
                    power += x.p[[m, j, c]];
                }
            }
        }
        if exceeds(power, lp.p_tbs_total) {
            v.push(Violation::C8 { tbs: m, power });
        }
    }
    let interference = geo_gs_interference(b, &ch.h_geo_gs);
    for (l, (&i, &th)) in interference.iter().zip(&lp.i_th).enumerate() {
        if exceeds(i, th) {
            v.push(Violation::C9 {
                gs: l,
                interference: i,
                threshold: th,
            });
        }
    }
    ConstraintReport { violations: v }
}
