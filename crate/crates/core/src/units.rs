//! Decibel and power-unit conversions.

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN_DB: f64 = -228.6;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

/// Free-space (Friis) power gain `(c / 4πdf)²` at distance `d` metres and frequency `f` Hz.
pub fn friis_gain(distance_m: f64, freq_hz: f64) -> f64 {
    let x = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * distance_m * freq_hz);
    x * x
}

/// Noise power in watts for a PSD given in dBm/Hz over `bandwidth_hz`.
pub fn noise_power(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watt(psd_dbm_hz) * bandwidth_hz
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn friis_at_one_km_c_band() {
        assert!((linear_to_db(friis_gain(1000.0, 4.9e9)) + 106.25).abs() < 0.01);
    }

    #[test]
    fn friis_at_550_km_ka_band() {
        assert!((linear_to_db(friis_gain(550e3, 30e9)) + 176.8).abs() < 0.1);
    }

    #[test]
    fn tbs_power_47_dbm() {
        assert!((dbm_to_watt(47.0) - 50.119).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn dbm_round_trip(dbm in -200.0f64..100.0) {
            let back = watt_to_dbm(dbm_to_watt(dbm));
            prop_assert!(((back - dbm) / dbm.abs().max(1.0)).abs() < 1e-9);
        }
    }
}
