//! Power and gain unit conversions. Link budgets are evaluated in linear
//! milliwatts; configuration uses dBm and dB.

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

/// Thermal noise floor over `bandwidth_hz` plus a receiver noise figure.
pub fn thermal_noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_trip() {
        let mw = dbm_to_mw(23.0);
        assert!((mw - 199.526_231_5).abs() / 199.526_231_5 < 1e-9);
        assert!((mw_to_dbm(mw) - 23.0).abs() / 23.0 < 1e-9);
    }

    #[test]
    fn bs_noise_for_one_megahertz() {
        assert!((thermal_noise_dbm(1e6, 5.0) + 109.0).abs() < 1e-12);
    }

    #[test]
    fn speed_conversion() {
        assert!((kmh_to_mps(36.0) - 10.0).abs() < 1e-12);
        assert!((kmh_to_mps(54.0) - 15.0).abs() < 1e-12);
    }
}
