use rand::Rng;

use crate::rng::{stream_rng, Stream};

use super::config::{Scenario, TbsLayout};
use super::orbit::{ecef, Vec3, EARTH_RADIUS_M};

pub type Point = [f64; 2];

/// Ground node positions: planar coordinates inside the square plus their Earth-centred equivalents.
#[derive(Debug, Clone, PartialEq)]
pub struct Nodes {
    pub tbs: Vec<Point>,
    pub gus: Vec<Point>,
    pub geo_gs: Vec<Point>,
    pub tbs_ecef: Vec<Vec3>,
    pub geo_gs_ecef: Vec<Vec3>,
}

impl Nodes {
    /// Places TBSs (grid or i.i.d.), GUs and GEO ground stations (i.i.d. uniform).
    pub fn place(scenario: &Scenario) -> Self {
        let side = scenario.area_side_m;
        let mut rng = stream_rng(scenario.rng_seed, Stream::Placement, 0);
        let mut uniform = |n: usize| -> Vec<Point> {
            (0..n)
                .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
                .collect()
        };
        let gus = uniform(scenario.n_gu);
        let geo_gs = uniform(scenario.n_geo_gs);
        let tbs = match scenario.tbs_layout {
            TbsLayout::Grid => grid_points(scenario.n_tbs, side),
            TbsLayout::Random => uniform(scenario.n_tbs),
        };
        Self::from_points(scenario, tbs, gus, geo_gs)
    }

    pub fn from_points(
        scenario: &Scenario,
        tbs: Vec<Point>,
        gus: Vec<Point>,
        geo_gs: Vec<Point>,
    ) -> Self {
        let to_ecef = |p: &Point| local_to_ecef(scenario, *p);
        Nodes {
            tbs_ecef: tbs.iter().map(to_ecef).collect(),
            geo_gs_ecef: geo_gs.iter().map(to_ecef).collect(),
            tbs,
            gus,
            geo_gs,
        }
    }
}

/// Cell centres of a near-square grid, filled row-major.
pub fn grid_points(n: usize, side: f64) -> Vec<Point> {
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    let rows = n.div_ceil(cols);
    let (w, h) = (side / cols as f64, side / rows as f64);
    (0..n)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            [(c as f64 + 0.5) * w, (r as f64 + 0.5) * h]
        })
        .collect()
}

/// Maps a point of the square (origin at its south-west corner) onto the sphere
/// around the scene centre.
pub fn local_to_ecef(scenario: &Scenario, p: Point) -> Vec3 {
    let half = scenario.area_side_m / 2.0;
    let lat0 = scenario.center_lat_deg;
    let dlat = ((p[1] - half) / EARTH_RADIUS_M).to_degrees();
    let dlon = ((p[0] - half) / (EARTH_RADIUS_M * lat0.to_radians().cos())).to_degrees();
    ecef(lat0 + dlat, scenario.center_lon_deg + dlon, 0.0)
}

pub fn planar_distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
