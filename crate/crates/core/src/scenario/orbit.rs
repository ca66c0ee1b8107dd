//! Circular-orbit constellation geometry on a spherical Earth.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::{ConstellationConfig, Scenario};
use super::placement::Nodes;

pub type Vec3 = [f64; 3];

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const MU_EARTH: f64 = 3.986e14;
pub const GEO_ALTITUDE_M: f64 = 35_786_000.0;
pub const LEO_MIN_ALT_M: f64 = 300_000.0;
pub const LEO_MAX_ALT_M: f64 = 2_000_000.0;

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Angle in degrees between two direction vectors.
pub fn angle_between_deg(a: Vec3, b: Vec3) -> f64 {
    let c = (dot(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Earth-centred coordinates of a point at the given geodetic position and height.
pub fn ecef(lat_deg: f64, lon_deg: f64, height_m: f64) -> Vec3 {
    let (lat, lon) = (lat_deg.to_radians(), lon_deg.to_radians());
    let r = EARTH_RADIUS_M + height_m;
    [r * lat.cos() * lon.cos(), r * lat.cos() * lon.sin(), r * lat.sin()]
}

/// Elevation of `sat` seen from a ground point `ground`, in degrees within [-90, 90].
pub fn elevation_angle(sat: Vec3, ground: Vec3) -> f64 {
    let los = sub(sat, ground);
    let up_dot = dot(los, ground) / (norm(los) * norm(ground));
    up_dot.clamp(-1.0, 1.0).asin().to_degrees()
}

/// Circular orbit period in seconds at `altitude_m`.
pub fn orbital_period(altitude_m: f64) -> f64 {
    let a = EARTH_RADIUS_M + altitude_m;
    2.0 * PI * (a.powi(3) / MU_EARTH).sqrt()
}

/// Walker-delta shell parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkerShell {
    pub planes: usize,
    pub sats_per_plane: usize,
    pub altitude_m: f64,
    pub inclination_deg: f64,
    pub phasing: usize,
}

impl WalkerShell {
    pub fn len(&self) -> usize {
        self.planes * self.sats_per_plane
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn angular_velocity(&self) -> f64 {
        let a = EARTH_RADIUS_M + self.altitude_m;
        (MU_EARTH / a.powi(3)).sqrt()
    }

    /// Positions of every satellite `elapsed_s` seconds after epoch.
    /// Satellite `p * sats_per_plane + s` is slot `s` of plane `p`.
    pub fn positions(&self, elapsed_s: f64) -> Vec<Vec3> {
        let a = EARTH_RADIUS_M + self.altitude_m;
        let inc = self.inclination_deg.to_radians();
        let total = self.len() as f64;
        let advance = self.angular_velocity() * elapsed_s;
        let mut out = Vec::with_capacity(self.len());
        for p in 0..self.planes {
            let raan = 2.0 * PI * p as f64 / self.planes as f64;
            let (sr, cr) = raan.sin_cos();
            let offset = 2.0 * PI * (self.phasing * p) as f64 / total;
            for s in 0..self.sats_per_plane {
                let u = 2.0 * PI * s as f64 / self.sats_per_plane as f64 + offset + advance;
                let (su, cu) = u.sin_cos();
                out.push([
                    a * (cr * cu - sr * su * inc.cos()),
                    a * (sr * cu + cr * su * inc.cos()),
                    a * su * inc.sin(),
                ]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Orbits {
    Walker(WalkerShell),
    /// `positions[t - 1][sat]`.
    Trace(Vec<Vec<Vec3>>),
}

/// Satellite positions for every timeslot plus the fixed GEO geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationState {
    orbits: Orbits,
    n_leo: usize,
    n_timeslots: usize,
    slot_duration_s: f64,
    pub geo_position: Vec3,
    pub gs_positions: Vec<Vec3>,
}

impl ConstellationState {
    /// Builds the constellation named in the scenario.
    pub fn generate(scenario: &Scenario, nodes: &Nodes) -> Result<Self> {
        let orbits = match &scenario.constellation {
            ConstellationConfig::Walker {
                planes,
                sats_per_plane,
                altitude_m,
                inclination_deg,
                phasing,
            } => Orbits::Walker(WalkerShell {
                planes: *planes,
                sats_per_plane: *sats_per_plane,
                altitude_m: *altitude_m,
                inclination_deg: *inclination_deg,
                phasing: *phasing,
            }),
            ConstellationConfig::Trace { path } => {
                Orbits::Trace(load_trace(path, scenario.n_timeslots)?)
            }
        };
        Ok(Self::from_parts(orbits, scenario, nodes))
    }

    pub fn walker(shell: WalkerShell, scenario: &Scenario, nodes: &Nodes) -> Self {
        Self::from_parts(Orbits::Walker(shell), scenario, nodes)
    }

    /// Uses explicit per-slot positions (`positions[t - 1][sat]`).
    pub fn from_positions(
        positions: Vec<Vec<Vec3>>,
        scenario: &Scenario,
        nodes: &Nodes,
    ) -> Result<Self> {
        check_positions(&positions, scenario.n_timeslots)?;
        Ok(Self::from_parts(Orbits::Trace(positions), scenario, nodes))
    }

    fn from_parts(orbits: Orbits, scenario: &Scenario, nodes: &Nodes) -> Self {
        let n_leo = match &orbits {
            Orbits::Walker(w) => w.len(),
            Orbits::Trace(p) => p.first().map_or(0, Vec::len),
        };
        ConstellationState {
            orbits,
            n_leo,
            n_timeslots: scenario.n_timeslots,
            slot_duration_s: scenario.slot_duration_s,
            geo_position: ecef(0.0, scenario.center_lon_deg, GEO_ALTITUDE_M),
            gs_positions: nodes.geo_gs_ecef.clone(),
        }
    }

    pub fn n_leo(&self) -> usize {
        self.n_leo
    }

    pub fn n_timeslots(&self) -> usize {
        self.n_timeslots
    }

    /// LEO positions at timeslot `t` (1-based).
    pub fn positions(&self, t: usize) -> Vec<Vec3> {
        assert!(t >= 1, "timeslots are 1-based");
        match &self.orbits {
            Orbits::Walker(w) => w.positions((t - 1) as f64 * self.slot_duration_s),
            Orbits::Trace(p) => p[(t - 1) % p.len()].clone(),
        }
    }
}

fn check_positions(positions: &[Vec<Vec3>], n_timeslots: usize) -> Result<()> {
    if positions.len() < n_timeslots {
        return Err(Error::TraceGap {
            t: positions.len() + 1,
            sat: 0,
        });
    }
    for slot in positions {
        for (sat, p) in slot.iter().enumerate() {
            let alt = norm(*p) - EARTH_RADIUS_M;
            if !(LEO_MIN_ALT_M..=LEO_MAX_ALT_M).contains(&alt) {
                return Err(Error::Altitude {
                    sat,
                    altitude_m: alt,
                    min_m: LEO_MIN_ALT_M,
                    max_m: LEO_MAX_ALT_M,
                });
            }
        }
    }
    Ok(())
}

/// Reads a `t,sat_id,x_m,y_m,z_m` CSV. Satellite ids are remapped to
/// `0..N` in ascending order; every (t, sat) pair for `t in 1..=T` must be present.
pub fn load_trace(path: &Path, n_timeslots: usize) -> Result<Vec<Vec<Vec3>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(file, n_timeslots)
}

pub fn parse_trace<R: std::io::Read>(reader: R, n_timeslots: usize) -> Result<Vec<Vec<Vec3>>> {
    #[derive(serde::Deserialize)]
    struct Row {
        t: usize,
        sat_id: u64,
        x_m: f64,
        y_m: f64,
        z_m: f64,
    }
    let parse_err = |e: csv::Error| Error::Parse {
        what: "trace".into(),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: Row = rec.map_err(parse_err)?;
        rows.push(row);
    }
    let mut ids: Vec<u64> = rows.iter().map(|r| r.sat_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut grid: Vec<Vec<Option<Vec3>>> = vec![vec![None; ids.len()]; n_timeslots];
    for r in &rows {
        if r.t == 0 || r.t > n_timeslots {
            continue;
        }
        let idx = ids.binary_search(&r.sat_id).expect("id collected above");
        grid[r.t - 1][idx] = Some([r.x_m, r.y_m, r.z_m]);
    }
    let mut out = Vec::with_capacity(n_timeslots);
    for (ti, slot) in grid.into_iter().enumerate() {
        let mut row = Vec::with_capacity(slot.len());
        for (sat, p) in slot.into_iter().enumerate() {
            row.push(p.ok_or(Error::TraceGap { t: ti + 1, sat })?);
        }
        out.push(row);
    }
    if ids.is_empty() {
        return Err(Error::TraceGap { t: 1, sat: 0 });
    }
    check_positions(&out, n_timeslots)?;
    Ok(out)
}

/// Per-TBS coverage summary: fraction of slots with at least `n_connect` visible satellites.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityReport {
    pub covered_fraction: Vec<f64>,
    pub min_visible: usize,
    pub mean_visible: f64,
}

impl VisibilityReport {
    pub fn satisfies(&self, fraction: f64) -> bool {
        self.covered_fraction.iter().all(|&f| f >= fraction)
    }
}

pub fn visibility_report(
    scenario: &Scenario,
    constellation: &ConstellationState,
    nodes: &Nodes,
    slots: impl IntoIterator<Item = usize>,
) -> VisibilityReport {
    let mut covered = vec![0usize; nodes.tbs_ecef.len()];
    let mut n_slots = 0usize;
    let mut min_visible = usize::MAX;
    let mut total_visible = 0usize;
    for t in slots {
        n_slots += 1;
        let pos = constellation.positions(t);
        for (m, g) in nodes.tbs_ecef.iter().enumerate() {
            let vis = pos
                .iter()
                .filter(|s| elevation_angle(**s, *g) >= scenario.elevation_min_deg)
                .count();
            if vis >= scenario.n_connect {
                covered[m] += 1;
            }
            min_visible = min_visible.min(vis);
            total_visible += vis;
        }
    }
    let denom = n_slots.max(1) as f64;
    VisibilityReport {
        covered_fraction: covered.iter().map(|&c| c as f64 / denom).collect(),
        min_visible: if n_slots == 0 { 0 } else { min_visible },
        mean_visible: total_visible as f64 / (denom * nodes.tbs_ecef.len().max(1) as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zenith_is_ninety() {
        let g = ecef(10.0, 20.0, 0.0);
        let s = ecef(10.0, 20.0, 550e3);
        assert!((elevation_angle(s, g) - 90.0).abs() < 1e-9);
    }

    #[test]
    fn horizon_is_zero() {
        let g = [EARTH_RADIUS_M, 0.0, 0.0];
        let s = [EARTH_RADIUS_M, 1.0e6, 0.0];
        assert!(elevation_angle(s, g).abs() < 1e-9);
    }

    #[test]
    fn five_degree_offset_matches_spherical_oracle() {
        // Independent oracle: plane triangle Earth centre / ground / satellite.
        let (r_e, r_s, gamma) = (EARTH_RADIUS_M, EARTH_RADIUS_M + 550e3, 5f64.to_radians());
        let oracle = ((gamma.cos() - r_e / r_s) / gamma.sin()).atan().to_degrees();
        assert!((oracle - 40.96).abs() < 0.01);
        let g = ecef(0.0, 0.0, 0.0);
        let s = ecef(0.0, 5.0, 550e3);
        assert!((elevation_angle(s, g) - oracle).abs() < 0.5);
    }

    #[test]
    fn period_at_550_km() {
        // Kepler's third law evaluated by hand: 2π·sqrt((6921e3)³ / 3.986e14).
        assert!((orbital_period(550e3) - 5730.13).abs() < 1.0);
    }

    #[test]
    fn half_period_is_antipodal() {
        let shell = WalkerShell {
            planes: 1,
            sats_per_plane: 1,
            altitude_m: 550e3,
            inclination_deg: 0.0,
            phasing: 0,
        };
        let p0 = shell.positions(0.0)[0];
        let p1 = shell.positions(orbital_period(550e3) / 2.0)[0];
        for i in 0..3 {
            assert!((p0[i] + p1[i]).abs() < 1e-3, "{p0:?} {p1:?}");
        }
    }

    #[test]
    fn walker_size_and_altitude() {
        let shell = WalkerShell {
            planes: 36,
            sats_per_plane: 40,
            altitude_m: 550e3,
            inclination_deg: 53.0,
            phasing: 1,
        };
        let pos = shell.positions(1234.0);
        assert_eq!(pos.len(), 1440);
        for p in pos {
            assert!((norm(p) - EARTH_RADIUS_M - 550e3).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_angular_rate() {
        let shell = WalkerShell {
            planes: 3,
            sats_per_plane: 5,
            altitude_m: 700e3,
            inclination_deg: 70.0,
            phasing: 1,
        };
        let dt = 60.0;
        let a = shell.positions(0.0);
        let b = shell.positions(dt);
        let c = shell.positions(2.0 * dt);
        for i in 0..shell.len() {
            let ab = angle_between_deg(a[i], b[i]);
            let bc = angle_between_deg(b[i], c[i]);
            assert!((ab - bc).abs() < 1e-9);
            assert!((ab.to_radians() - shell.angular_velocity() * dt).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_parses_and_detects_gaps() {
        let alt = EARTH_RADIUS_M + 550e3;
        let good = format!("t,sat_id,x_m,y_m,z_m\n1,7,{alt},0,0\n2,7,0,{alt},0\n");
        let p = parse_trace(good.as_bytes(), 2).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[1][0], [0.0, alt, 0.0]);

        let gap = format!("t,sat_id,x_m,y_m,z_m\n1,7,{alt},0,0\n1,9,{alt},0,0\n2,7,0,{alt},0\n");
        assert!(matches!(
            parse_trace(gap.as_bytes(), 2),
            Err(Error::TraceGap { t: 2, sat: 1 })
        ));

        let low = "t,sat_id,x_m,y_m,z_m\n1,0,6400000,0,0\n";
        assert!(matches!(parse_trace(low.as_bytes(), 1), Err(Error::Altitude { .. })));
    }
}
