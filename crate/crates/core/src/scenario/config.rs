use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::caching::CacheConfig;
use crate::error::{Error, Result};
use crate::units::{db_to_linear, dbm_to_watt};

/// Raw scenario document as written in a TOML file. Powers are in dBm and
/// gains in dB; [`Scenario::from_config`] converts and validates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area_side_m: f64,
    pub n_tbs: usize,
    pub n_gu: usize,
    pub n_geo_gs: usize,
    pub n_sc_terrestrial: usize,
    pub n_sc_leo: usize,
    pub elevation_min_deg: f64,
    pub n_connect: usize,
    pub handover_threshold_db: f64,
    pub cinr_threshold_db: f64,
    /// Overrides the per-station interference cap derived from `cinr_threshold_db`.
    pub interference_threshold_w: Option<f64>,
    pub n_timeslots: usize,
    pub slot_duration_s: f64,
    pub rng_seed: u64,
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    pub tbs_layout: TbsLayout,
    pub rician_k_db: f64,
    pub bands: BandSection,
    pub powers: PowerSection,
    pub caching: CacheConfig,
    pub constellation: ConstellationConfig,
    pub algorithm: AlgorithmConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_side_m: 3000.0,
            n_tbs: 4,
            n_gu: 100,
            n_geo_gs: 2,
            n_sc_terrestrial: 16,
            n_sc_leo: 8,
            elevation_min_deg: 30.0,
            n_connect: 3,
            handover_threshold_db: 3.0,
            cinr_threshold_db: 0.0,
            interference_threshold_w: None,
            n_timeslots: 1440,
            slot_duration_s: 60.0,
            rng_seed: 1,
            center_lat_deg: 35.0,
            center_lon_deg: 0.0,
            tbs_layout: TbsLayout::Grid,
            rician_k_db: 10.0,
            bands: BandSection::default(),
            powers: PowerSection::default(),
            caching: CacheConfig::default(),
            constellation: ConstellationConfig::default(),
            algorithm: AlgorithmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TbsLayout {
    Grid,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BandSection {
    pub f_c_hz: f64,
    pub f_ka_hz: f64,
    pub b_c_hz: f64,
    pub b_ka_hz: f64,
    pub noise_psd_dbm_hz: f64,
}

impl Default for BandSection {
    fn default() -> Self {
        Self {
            f_c_hz: 4.9e9,
            f_ka_hz: 30e9,
            b_c_hz: 100e6,
            b_ka_hz: 500e6,
            noise_psd_dbm_hz: -174.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub p_tbs_dbm: f64,
    pub p_leo_dbm: f64,
    pub p_geo_dbm: f64,
    /// Terrestrial transmit / receive antenna gains.
    pub g_t_db: f64,
    pub g_r_db: f64,
    /// Satellite (LEO and GEO) transmit antenna gain.
    pub g_sat_tx_db: f64,
    pub g_over_t_db_k: f64,
    pub system_temp_k: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            p_tbs_dbm: 47.0,
            p_leo_dbm: 48.0,
            p_geo_dbm: 60.0,
            g_t_db: 15.0,
            g_r_db: 0.0,
            g_sat_tx_db: 30.0,
            g_over_t_db_k: 18.5,
            system_temp_k: 290.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstellationConfig {
    Walker {
        planes: usize,
        sats_per_plane: usize,
        altitude_m: f64,
        inclination_deg: f64,
        #[serde(default = "default_phasing")]
        phasing: usize,
    },
    Trace {
        path: PathBuf,
    },
}

fn default_phasing() -> usize {
    1
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        ConstellationConfig::Walker {
            planes: 36,
            sats_per_plane: 40,
            altitude_m: 550e3,
            inclination_deg: 53.0,
            phasing: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SicReading {
    /// Ratio branch divides by the matched pair's own gain, as printed.
    Verbatim,
    /// Ratio branch divides by the matched satellite's gain toward the candidate TBS.
    Symmetric,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum HandoverMode {
    /// Candidate must beat the released link's signal-to-GS-interference ratio by H dB.
    RatioDb,
    /// Raw linear difference of received power minus injected interference, compared with H in watts.
    Linear,
}

/// Tuning knobs of the optimization stack.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub theta0: f64,
    pub beta: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub warm_start: bool,
    pub wf_iterations: usize,
    pub preference_rho: f64,
    pub sic_reading: SicReading,
    pub handover_mode: HandoverMode,
    /// Weight added to every multiplier in the satellite utility so that the
    /// matching still maximizes capacity when all multipliers are zero.
    pub capacity_weight_floor: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            theta0: 1.0,
            beta: 0.9,
            max_iterations: 200,
            convergence_tol: 1e-6,
            warm_start: true,
            wf_iterations: 1,
            preference_rho: 1.0,
            sic_reading: SicReading::Verbatim,
            handover_mode: HandoverMode::RatioDb,
            capacity_weight_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandConfig {
    pub f_c_hz: f64,
    pub f_ka_hz: f64,
    pub b_c_hz: f64,
    pub b_ka_hz: f64,
    pub noise_psd_dbm_hz: f64,
}

impl BandConfig {
    pub fn noise_c(&self) -> f64 {
        crate::units::noise_power(self.noise_psd_dbm_hz, self.b_c_hz)
    }

    pub fn noise_ka(&self) -> f64 {
        crate::units::noise_power(self.noise_psd_dbm_hz, self.b_ka_hz)
    }
}

/// Linear-unit powers (W) and gains.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerConfig {
    pub p_tbs_total: f64,
    pub p_leo_per_sc: f64,
    pub p_geo: f64,
    pub g_t: f64,
    pub g_r: f64,
    pub g_sat_tx: f64,
    pub g_over_t_db_k: f64,
    pub system_temp_k: f64,
}

impl PowerConfig {
    /// Peak receive gain of Ka-band ground terminals implied by G/T and the system temperature.
    pub fn ka_rx_peak_gain_db(&self) -> f64 {
        self.g_over_t_db_k + 10.0 * self.system_temp_k.log10()
    }

    pub fn ka_rx_peak_gain(&self) -> f64 {
        db_to_linear(self.ka_rx_peak_gain_db())
    }
}

/// Validated, immutable world description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub area_side_m: f64,
    pub n_tbs: usize,
    pub n_gu: usize,
    pub n_geo_gs: usize,
    pub n_sc_terrestrial: usize,
    pub n_sc_leo: usize,
    pub elevation_min_deg: f64,
    pub n_connect: usize,
    pub handover_threshold_db: f64,
    pub cinr_threshold_db: f64,
    pub interference_threshold_w: Option<f64>,
    pub n_timeslots: usize,
    pub slot_duration_s: f64,
    pub rng_seed: u64,
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    pub tbs_layout: TbsLayout,
    pub rician_k: f64,
    pub bands: BandConfig,
    pub powers: PowerConfig,
    pub caching: CacheConfig,
    pub constellation: ConstellationConfig,
    pub algorithm: AlgorithmConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::from_config(&ScenarioConfig::default()).expect("defaults are valid")
    }
}

impl Scenario {
    /// Parses a TOML document; missing keys take their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
            what: "scenario".into(),
            message: e.to_string(),
        })?;
        Scenario::from_config(&cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scenario = Scenario::from_toml_str(&text)?;
        // Trace paths are relative to the scenario file.
        if let ConstellationConfig::Trace { path: trace } = &mut scenario.constellation {
            if trace.is_relative() {
                if let Some(dir) = path.parent() {
                    *trace = dir.join(&*trace);
                }
            }
        }
        Ok(scenario)
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        validate(cfg)?;
        let p = &cfg.powers;
        let b = &cfg.bands;
        Ok(Scenario {
            area_side_m: cfg.area_side_m,
            n_tbs: cfg.n_tbs,
            n_gu: cfg.n_gu,
            n_geo_gs: cfg.n_geo_gs,
            n_sc_terrestrial: cfg.n_sc_terrestrial,
            n_sc_leo: cfg.n_sc_leo,
            elevation_min_deg: cfg.elevation_min_deg,
            n_connect: cfg.n_connect,
            handover_threshold_db: cfg.handover_threshold_db,
            cinr_threshold_db: cfg.cinr_threshold_db,
            interference_threshold_w: cfg.interference_threshold_w,
            n_timeslots: cfg.n_timeslots,
            slot_duration_s: cfg.slot_duration_s,
            rng_seed: cfg.rng_seed,
            center_lat_deg: cfg.center_lat_deg,
            center_lon_deg: cfg.center_lon_deg,
            tbs_layout: cfg.tbs_layout,
            rician_k: db_to_linear(cfg.rician_k_db),
            bands: BandConfig {
                f_c_hz: b.f_c_hz,
                f_ka_hz: b.f_ka_hz,
                b_c_hz: b.b_c_hz,
                b_ka_hz: b.b_ka_hz,
                noise_psd_dbm_hz: b.noise_psd_dbm_hz,
            },
            powers: PowerConfig {
                p_tbs_total: dbm_to_watt(p.p_tbs_dbm),
                p_leo_per_sc: dbm_to_watt(p.p_leo_dbm),
                p_geo: dbm_to_watt(p.p_geo_dbm),
                g_t: db_to_linear(p.g_t_db),
                g_r: db_to_linear(p.g_r_db),
                g_sat_tx: db_to_linear(p.g_sat_tx_db),
                g_over_t_db_k: p.g_over_t_db_k,
                system_temp_k: p.system_temp_k,
            },
            caching: cfg.caching.clone(),
            constellation: cfg.constellation.clone(),
            algorithm: cfg.algorithm.clone(),
        })
    }

    /// Ground-user density in GUs per square kilometre.
    pub fn gu_density_per_km2(&self) -> f64 {
        self.n_gu as f64 / (self.area_side_m * self.area_side_m / 1e6)
    }

    /// Provisional per-subchannel TBS power used while matching.
    pub fn provisional_sc_power(&self) -> f64 {
        self.powers.p_tbs_total / self.n_sc_terrestrial as f64
    }
}

fn validate(cfg: &ScenarioConfig) -> Result<()> {
    let counts = [
        ("n_tbs", cfg.n_tbs),
        ("n_gu", cfg.n_gu),
        ("n_geo_gs", cfg.n_geo_gs),
        ("n_sc_terrestrial", cfg.n_sc_terrestrial),
        ("n_sc_leo", cfg.n_sc_leo),
        ("n_timeslots", cfg.n_timeslots),
        ("n_connect", cfg.n_connect),
    ];
    for (field, v) in counts {
        if v < 1 {
            return Err(Error::invalid(field, "must be at least 1"));
        }
    }
    if !(cfg.area_side_m > 0.0) {
        return Err(Error::invalid("area_side_m", "must be positive"));
    }
    if !(cfg.elevation_min_deg > 0.0 && cfg.elevation_min_deg <= 90.0) {
        return Err(Error::invalid(
            "elevation_min",
            format!("{} not in (0, 90] degrees", cfg.elevation_min_deg),
        ));
    }
    if !(cfg.slot_duration_s > 0.0) {
        return Err(Error::invalid("slot_duration_s", "must be positive"));
    }
    if !(-90.0..=90.0).contains(&cfg.center_lat_deg) {
        return Err(Error::invalid("center_lat_deg", "not a latitude"));
    }
    let b = &cfg.bands;
    for (field, v) in [
        ("f_c_hz", b.f_c_hz),
        ("f_ka_hz", b.f_ka_hz),
        ("b_c_hz", b.b_c_hz),
        ("b_ka_hz", b.b_ka_hz),
    ] {
        if !(v > 0.0) {
            return Err(Error::invalid(field, "must be positive"));
        }
    }
    if !(b.noise_psd_dbm_hz < 0.0) {
        return Err(Error::invalid("noise_psd_dbm_hz", "must be below 0 dBm/Hz"));
    }
    let p = &cfg.powers;
    for (field, v) in [
        ("p_tbs_dbm", p.p_tbs_dbm),
        ("p_leo_dbm", p.p_leo_dbm),
        ("p_geo_dbm", p.p_geo_dbm),
    ] {
        if !v.is_finite() {
            return Err(Error::invalid(field, "must be finite"));
        }
    }
    if !(p.system_temp_k > 0.0) {
        return Err(Error::invalid("system_temp_k", "must be positive"));
    }
    if let Some(ith) = cfg.interference_threshold_w {
        if !(ith >= 0.0) {
            return Err(Error::invalid("interference_threshold_w", "must be non-negative"));
        }
    }
    cfg.caching.validate()?;
    if let ConstellationConfig::Walker {
        planes,
        sats_per_plane,
        altitude_m,
        inclination_deg,
        ..
    } = &cfg.constellation
    {
        if *planes < 1 || *sats_per_plane < 1 {
            return Err(Error::invalid("constellation", "needs at least one satellite"));
        }
        if !(super::orbit::LEO_MIN_ALT_M..=super::orbit::LEO_MAX_ALT_M).contains(altitude_m) {
            return Err(Error::invalid(
                "altitude_m",
                format!("{altitude_m} m outside the LEO band"),
            ));
        }
        if !(0.0..=180.0).contains(inclination_deg) {
            return Err(Error::invalid("inclination_deg", "not in [0, 180]"));
        }
    }
    let a = &cfg.algorithm;
    if !(a.theta0 > 0.0) || !(a.beta > 0.0 && a.beta < 1.0) {
        return Err(Error::invalid("algorithm", "theta0 > 0 and 0 < beta < 1 required"));
    }
    if a.max_iterations < 1 {
        return Err(Error::invalid("max_iterations", "must be at least 1"));
    }
    if a.preference_rho < 0.0 {
        return Err(Error::invalid("preference_rho", "must be non-negative"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let s = Scenario::from_toml_str("").unwrap();
        assert_eq!(s.bands.noise_psd_dbm_hz, -174.0);
        assert_eq!(s.bands.f_c_hz, 4.9e9);
        assert_eq!(s.bands.f_ka_hz, 30e9);
        assert_eq!(s.bands.b_c_hz, 100e6);
        assert_eq!(s.bands.b_ka_hz, 500e6);
        assert!((s.powers.p_tbs_total - 50.119).abs() < 1e-3);
        assert!((s.powers.p_leo_per_sc - 63.096).abs() < 1e-3);
        assert!((s.powers.p_geo - 1000.0).abs() < 1e-9);
        assert_eq!(s.powers.g_over_t_db_k, 18.5);
        assert_eq!(s.elevation_min_deg, 30.0);
        assert_eq!(s.algorithm.preference_rho, 1.0);
        assert_eq!(s.n_timeslots, 1440);
        assert_eq!(s.caching.n_files, 50);
        assert_eq!(s.caching.cache_capacity, 40);
        assert_eq!(s.caching.zipf_omega, 0.5);
        assert_eq!(s.caching.u_back_bps, 3e6);
    }

    #[test]
    fn zero_elevation_rejected() {
        let err = Scenario::from_toml_str("elevation_min_deg = 0.0").unwrap_err();
        assert!(err.to_string().contains("elevation_min out of range"), "{err}");
    }

    #[test]
    fn zero_count_names_field() {
        let err = Scenario::from_toml_str("n_tbs = 0").unwrap_err();
        assert!(err.to_string().contains("n_tbs"));
    }

    #[test]
    fn nested_sections_parse() {
        let s = Scenario::from_toml_str(
            r#"
            n_tbs = 2
            [powers]
            p_tbs_dbm = 40.0
            [caching]
            files = 10
            cache_capacity = 3
            [constellation]
            model = "walker"
            planes = 2
            sats_per_plane = 3
            altitude_m = 600000.0
            inclination_deg = 60.0
            "#,
        )
        .unwrap();
        assert_eq!(s.n_tbs, 2);
        assert!((s.powers.p_tbs_total - 10.0).abs() < 1e-12);
        assert_eq!(s.caching.n_files, 10);
    }

    #[test]
    fn unknown_key_is_parse_error() {
        assert!(matches!(
            Scenario::from_toml_str("bogus = 1"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn bad_altitude_rejected() {
        let err = Scenario::from_toml_str(
            "[constellation]\nmodel = \"walker\"\nplanes = 1\nsats_per_plane = 1\naltitude_m = 100000.0\ninclination_deg = 0.0",
        )
        .unwrap_err();
        assert!(err.to_string().contains("altitude_m"));
    }
}
