//! Unit conventions and conversions used throughout the crate.
//!
//! Internally everything is SI: angular frequencies in rad/s, propagation
//! constants in 1/m, lengths in m, powers in W. Config files and CSV
//! interfaces use the units spelled out in their key names (nm, mW, ps^k/km)
//! and are converted at the boundary.

/// Speed of light in vacuum, m/s.
pub const C_M_PER_S: f64 = 2.997_924_58e8;

/// 2πc, convenient for wavelength <-> angular frequency conversions.
pub const TWO_PI_C: f64 = 2.0 * std::f64::consts::PI * C_M_PER_S;

/// beta2 given in ps²/km -> s²/m
pub const PS2_PER_KM: f64 = 1e-27;
/// beta3 given in ps³/km -> s³/m
pub const PS3_PER_KM: f64 = 1e-39;
/// beta4 given in ps⁴/km -> s⁴/m
pub const PS4_PER_KM: f64 = 1e-51;
/// group-slowness walk-off given in ps/km -> s/m
pub const PS_PER_KM: f64 = 1e-15;

/// Vacuum wavelength in nm -> angular frequency in rad/s.
pub fn omega_from_nm(wavelength_nm: f64) -> f64 {
    TWO_PI_C / (wavelength_nm * 1e-9)
}

/// Angular frequency in rad/s -> vacuum wavelength in nm.
pub fn nm_from_omega(omega: f64) -> f64 {
    TWO_PI_C / omega * 1e9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelength_frequency_round_trip() {
        for nm in [555.0, 683.0, 796.0, 808.0, 989.0, 1550.0] {
            let back = nm_from_omega(omega_from_nm(nm));
            assert!((back - nm).abs() < 1e-9, "{nm} -> {back}");
        }
    }

    #[test]
    fn omega_magnitude_sane() {
        // 808 nm sits in the 2.3e15 rad/s range
        let w = omega_from_nm(808.0);
        assert!(w > 2.3e15 && w < 2.4e15);
    }
}
