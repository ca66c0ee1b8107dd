//! Per-slot channel power gains for the terrestrial access links, the
//! satellite backhaul links and the LEO → GEO ground-station interference paths.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::scenario::orbit::{angle_between_deg, distance, elevation_angle, sub, Vec3};
use crate::scenario::placement::planar_distance;
use crate::scenario::{ConstellationState, Nodes, Scenario};
use crate::units::{db_to_linear, friis_gain};

/// Shortest terrestrial distance used in path loss.
pub const MIN_DISTANCE_M: f64 = 1.0;
/// Floor of the ground-station off-axis mask, dBi.
pub const OFF_AXIS_FLOOR_DBI: f64 = -10.0;

/// Receive gain (dBi) of a GEO ground station at `phi_deg` off its boresight:
/// `32 − 25·log10(φ)` clamped to `[−10, peak]`.
pub fn off_axis_gain_dbi(phi_deg: f64, peak_dbi: f64) -> f64 {
    if phi_deg <= 0.0 {
        return peak_dbi;
    }
    (32.0 - 25.0 * phi_deg.log10()).clamp(OFF_AXIS_FLOOR_DBI, peak_dbi)
}

/// Unit-power Rayleigh fading power `|g|²`.
pub fn rayleigh_power<R: Rng>(rng: &mut R) -> f64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    (re * re + im * im) / 2.0
}

/// Unit-power Rician fading power with linear K-factor `k`; `k = ∞` is pure line of sight.
pub fn rician_power<R: Rng>(k: f64, rng: &mut R) -> f64 {
    if k.is_infinite() {
        return 1.0;
    }
    let los = (k / (k + 1.0)).sqrt();
    let s = (1.0 / (k + 1.0)).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let x = los + s * re / std::f64::consts::SQRT_2;
    let y = s * im / std::f64::consts::SQRT_2;
    x * x + y * y
}

/// All gains for one timeslot.
///
/// The satellite dimension is indexed by candidate satellites only: those
/// above the elevation mask of at least one TBS. `sat_ids[n]` maps back to
/// the constellation index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub t: usize,
    /// `[M, J, C]`, linear power gain including antenna gains.
    pub h_terr: Array3<f64>,
    /// `[M, J]` fading-free mean gain.
    pub mean_terr: Array2<f64>,
    pub sat_ids: Vec<usize>,
    /// `[N, M]` elevation mask test.
    pub visible: Array2<bool>,
    pub elevation_deg: Array2<f64>,
    pub slant_range_m: Array2<f64>,
    /// `[N, M, K]`; NaN marks an absent (non-visible) pair.
    pub h_sat: Array3<f64>,
    /// `[N, L]`.
    pub h_geo_gs: Array2<f64>,
    /// `[L]` desired GEO → ground-station gain.
    pub h_geo_signal: Vec<f64>,
    pub noise_c: f64,
    pub noise_ka: f64,
    /// Terrestrial links whose distance was clamped to [`MIN_DISTANCE_M`].
    pub clamped_links: usize,
}

impl ChannelState {
    pub fn n_tbs(&self) -> usize {
        self.h_terr.shape()[0]
    }
    pub fn n_gu(&self) -> usize {
        self.h_terr.shape()[1]
    }
    pub fn n_sc(&self) -> usize {
        self.h_terr.shape()[2]
    }
    pub fn n_sat(&self) -> usize {
        self.sat_ids.len()
    }
    pub fn n_sat_sc(&self) -> usize {
        self.h_sat.shape()[2]
    }
    pub fn n_gs(&self) -> usize {
        self.h_geo_signal.len()
    }

    /// Satellite → TBS gain, `None` when the pair is below the elevation mask.
    pub fn sat_gain(&self, n: usize, m: usize, k: usize) -> Option<f64> {
        if self.visible[[n, m]] {
            Some(self.h_sat[[n, m, k]])
        } else {
            None
        }
    }

    /// Samples everything for slot `t`.
    pub fn sample(
        scenario: &Scenario,
        nodes: &Nodes,
        constellation: &ConstellationState,
        t: usize,
    ) -> Self {
        let (h_terr, mean_terr, clamped_links) = sample_terrestrial_gains(scenario, nodes, t);
        let positions = constellation.positions(t);
        let geom = satellite_geometry(scenario, nodes, &positions);
        let h_sat = sample_satellite_gains(scenario, &geom, t);
        let (h_geo_gs, h_geo_signal) =
            geo_gs_interference_gains(scenario, constellation, &geom.positions);
        ChannelState {
            t,
            h_terr,
            mean_terr,
            sat_ids: geom.sat_ids,
            visible: geom.visible,
            elevation_deg: geom.elevation_deg,
            slant_range_m: geom.slant_range_m,
            h_sat,
            h_geo_gs,
            h_geo_signal,
            noise_c: scenario.bands.noise_c(),
            noise_ka: scenario.bands.noise_ka(),
            clamped_links,
        }
    }

    /// Writes `terrestrial.csv`, `satellite.csv` and `geo_gs.csv` for this slot under `dir/t{t}/`.
    pub fn dump_csv(&self, dir: &Path) -> Result<()> {
        let slot_dir = dir.join(format!("t{}", self.t));
        std::fs::create_dir_all(&slot_dir).map_err(|e| Error::io(&slot_dir, e))?;
        let write = |name: &str, body: String| -> Result<()> {
            let path = slot_dir.join(name);
            let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))
        };
        let mut s = String::from("tbs,gu,sc,gain\n");
        for ((m, j, c), g) in self.h_terr.indexed_iter() {
            s.push_str(&format!("{m},{j},{c},{g:e}\n"));
        }
        write("terrestrial.csv", s)?;
        let mut s = String::from("sat_id,tbs,sc,elevation_deg,gain\n");
        for n in 0..self.n_sat() {
            for m in 0..self.n_tbs() {
                if !self.visible[[n, m]] {
                    continue;
                }
                for k in 0..self.n_sat_sc() {
                    s.push_str(&format!(
                        "{},{m},{k},{},{:e}\n",
                        self.sat_ids[n],
                        self.elevation_deg[[n, m]],
                        self.h_sat[[n, m, k]]
                    ));
                }
            }
        }
        write("satellite.csv", s)?;
        let mut s = String::from("sat_id,gs,gain\n");
        for ((n, l), g) in self.h_geo_gs.indexed_iter() {
            s.push_str(&format!("{},{l},{g:e}\n", self.sat_ids[n]));
        }
        write("geo_gs.csv", s)
    }
}

/// Rayleigh-faded TBS → GU gains plus their fading-free means; returns the
/// number of links whose distance had to be clamped.
pub fn sample_terrestrial_gains(
    scenario: &Scenario,
    nodes: &Nodes,
    t: usize,
) -> (Array3<f64>, Array2<f64>, usize) {
    let (m_n, j_n, c_n) = (nodes.tbs.len(), nodes.gus.len(), scenario.n_sc_terrestrial);
    let antenna = scenario.powers.g_t * scenario.powers.g_r;
    let mut clamped = 0;
    let mean = Array2::from_shape_fn((m_n, j_n), |(m, j)| {
        let mut d = planar_distance(nodes.tbs[m], nodes.gus[j]);
        if d < MIN_DISTANCE_M {
            d = MIN_DISTANCE_M;
            clamped += 1;
        }
        friis_gain(d, scenario.bands.f_c_hz) * antenna
    });
    let mut rng = stream_rng(scenario.rng_seed, Stream::TerrestrialFading, t as u64);
    let mut h = Array3::zeros((m_n, j_n, c_n));
    for ((m, j, _), v) in h.indexed_iter_mut() {
        *v = mean[[m, j]] * rayleigh_power(&mut rng);
    }
    (h, mean, clamped)
}

/// Geometry of the candidate satellites at one slot.
#[derive(Debug, Clone)]
pub struct SatelliteGeometry {
    pub sat_ids: Vec<usize>,
    pub positions: Vec<Vec3>,
    pub visible: Array2<bool>,
    pub elevation_deg: Array2<f64>,
    pub slant_range_m: Array2<f64>,
}

pub fn satellite_geometry(scenario: &Scenario, nodes: &Nodes, all: &[Vec3]) -> SatelliteGeometry {
    let mut sat_ids = Vec::new();
    let mut rows = Vec::new();
    for (id, p) in all.iter().enumerate() {
        let el: Vec<f64> = nodes.tbs_ecef.iter().map(|g| elevation_angle(*p, *g)).collect();
        if el.iter().any(|&e| e >= scenario.elevation_min_deg) {
            sat_ids.push(id);
            rows.push((*p, el));
        }
    }
    let (n, m) = (rows.len(), nodes.tbs_ecef.len());
    let elevation_deg = Array2::from_shape_fn((n, m), |(i, j)| rows[i].1[j]);
    let visible = elevation_deg.mapv(|e| e >= scenario.elevation_min_deg);
    let slant_range_m =
        Array2::from_shape_fn((n, m), |(i, j)| distance(rows[i].0, nodes.tbs_ecef[j]));
    SatelliteGeometry {
        sat_ids,
        positions: rows.into_iter().map(|r| r.0).collect(),
        visible,
        elevation_deg,
        slant_range_m,
    }
}

/// Rician-faded satellite → TBS gains on visible pairs; NaN elsewhere.
pub fn sample_satellite_gains(scenario: &Scenario, geom: &SatelliteGeometry, t: usize) -> Array3<f64> {
    let (n_n, m_n) = geom.visible.dim();
    let k_n = scenario.n_sc_leo;
    let antenna = scenario.powers.g_sat_tx * scenario.powers.ka_rx_peak_gain();
    let mut rng = stream_rng(scenario.rng_seed, Stream::SatelliteFading, t as u64);
    let mut h = Array3::from_elem((n_n, m_n, k_n), f64::NAN);
    for n in 0..n_n {
        for m in 0..m_n {
            let mean = friis_gain(geom.slant_range_m[[n, m]], scenario.bands.f_ka_hz) * antenna;
            for k in 0..k_n {
                // Draw for every pair so the stream layout does not depend on visibility.
                let fade = rician_power(scenario.rician_k, &mut rng);
                if geom.visible[[n, m]] {
                    h[[n, m, k]] = mean * fade;
                }
            }
        }
    }
    h
}

/// LEO → GEO-GS interference gains `[N, L]` (off-axis masked, no fading) and
/// the desired GEO → GS gains `[L]`.
pub fn geo_gs_interference_gains(
    scenario: &Scenario,
    constellation: &ConstellationState,
    sat_positions: &[Vec3],
) -> (Array2<f64>, Vec<f64>) {
    let peak_db = scenario.powers.ka_rx_peak_gain_db();
    let g_tx = scenario.powers.g_sat_tx;
    let f = scenario.bands.f_ka_hz;
    let gs = &constellation.gs_positions;
    let geo = constellation.geo_position;
    let h = Array2::from_shape_fn((sat_positions.len(), gs.len()), |(n, l)| {
        let to_geo = sub(geo, gs[l]);
        let to_sat = sub(sat_positions[n], gs[l]);
        let phi = angle_between_deg(to_geo, to_sat);
        friis_gain(distance(sat_positions[n], gs[l]), f)
            * g_tx
            * db_to_linear(off_axis_gain_dbi(phi, peak_db))
    });
    let signal = gs
        .iter()
        .map(|g| friis_gain(distance(geo, *g), f) * g_tx * db_to_linear(peak_db))
        .collect();
    (h, signal)
}
