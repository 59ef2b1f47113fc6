//! Physical constants and the laboratory/atomic unit conversions.
//!
//! The dynamics modules work exclusively in atomic units (ħ = mₑ = e = 1).
//! Laboratory quantities (V/cm, GHz) are converted once, when a run is
//! configured, through the functions here.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Atomic unit of electric field in V/cm (CODATA 2018: 5.142 206 747 63 × 10¹¹ V/m).
pub const ATOMIC_FIELD_V_PER_CM: f64 = 5.142_206_747_63e9;

/// Atomic unit of time in seconds (CODATA 2018).
pub const ATOMIC_TIME_S: f64 = 2.418_884_326_585_7e-17;

/// Conversion factors between laboratory and atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    /// Atomic units of field per V/cm.
    pub field_au_per_vcm: f64,
    /// Atomic units of time per second.
    pub time_au_per_s: f64,
}

impl UnitSystem {
    pub const CODATA_2018: UnitSystem = UnitSystem {
        field_au_per_vcm: 1.0 / ATOMIC_FIELD_V_PER_CM,
        time_au_per_s: 1.0 / ATOMIC_TIME_S,
    };

    /// Angular frequency in atomic units for a frequency given in Hz.
    pub fn angular_frequency_au(&self, hz: f64) -> f64 {
        2.0 * PI * hz / self.time_au_per_s
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::CODATA_2018
    }
}

fn check_finite(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {x}")))
    }
}

/// Field amplitude in V/cm to atomic units.
pub fn field_to_au(v_per_cm: f64) -> Result<f64> {
    check_finite("field", v_per_cm)?;
    if v_per_cm < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "field amplitude must be non-negative, got {v_per_cm} V/cm"
        )));
    }
    Ok(v_per_cm / ATOMIC_FIELD_V_PER_CM)
}

/// Field amplitude in atomic units to V/cm.
pub fn field_from_au(au: f64) -> Result<f64> {
    check_finite("field", au)?;
    if au < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "field amplitude must be non-negative, got {au} a.u."
        )));
    }
    Ok(au * ATOMIC_FIELD_V_PER_CM)
}

/// Frequency in GHz to angular frequency ω = 2πν in atomic units.
pub fn frequency_to_au(ghz: f64) -> Result<f64> {
    check_finite("frequency", ghz)?;
    if ghz <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "frequency must be positive, got {ghz} GHz"
        )));
    }
    Ok(2.0 * PI * ghz * 1e9 * ATOMIC_TIME_S)
}

/// Angular frequency in atomic units back to GHz.
pub fn frequency_from_au(omega: f64) -> Result<f64> {
    check_finite("angular frequency", omega)?;
    if omega <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "angular frequency must be positive, got {omega} a.u."
        )));
    }
    Ok(omega / (2.0 * PI * ATOMIC_TIME_S) / 1e9)
}

/// Duration of one field cycle in atomic units of time.
pub fn cycle_period_au(omega: f64) -> f64 {
    2.0 * PI / omega
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_field() {
        assert_eq!(field_to_au(0.0).unwrap(), 0.0);
    }

    #[test]
    fn field_examples() {
        // 345 / 5.14220674763e9, evaluated by hand.
        assert_relative_eq!(field_to_au(345.0).unwrap(), 6.709181e-8, max_relative = 1e-6);
        assert_relative_eq!(field_to_au(5.142_206_747_63e9).unwrap(), 1.0, max_relative = 1e-10);
        assert_relative_eq!(
            UnitSystem::CODATA_2018.field_au_per_vcm,
            1.0 / 5.142_206e9,
            max_relative = 1e-6
        );
    }

    #[test]
    fn negative_field_rejected() {
        assert!(field_to_au(-1.0).is_err());
        assert!(field_to_au(f64::NAN).is_err());
    }

    #[test]
    fn frequency_examples() {
        let omega = frequency_to_au(9.92).unwrap();
        assert_relative_eq!(omega, 1.5077e-6, max_relative = 1e-4);
        // Scaled frequency n₀³ω at n₀ = 37.
        assert_relative_eq!(37f64.powi(3) * omega, 0.0764, max_relative = 1e-3);
        let unit_hz = 1.0 / (2.0 * PI * ATOMIC_TIME_S);
        assert_relative_eq!(frequency_to_au(unit_hz / 1e9).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(
            UnitSystem::CODATA_2018.angular_frequency_au(9.92e9),
            omega,
            max_relative = 1e-14
        );
    }

    #[test]
    fn non_positive_frequency_rejected() {
        assert!(frequency_to_au(0.0).is_err());
        assert!(frequency_to_au(-9.92).is_err());
    }

    proptest! {
        #[test]
        fn conversions_are_linear(x in 0.0f64..1e6, a in 0.0f64..1e3) {
            let lhs = field_to_au(a * x).unwrap();
            let rhs = a * field_to_au(x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1e-300));
            if x > 0.0 && a > 0.0 {
                let lhs = frequency_to_au(a * x).unwrap();
                let rhs = a * frequency_to_au(x).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs());
            }
        }

        #[test]
        fn round_trips(x in 1e-6f64..1e9) {
            let f = field_from_au(field_to_au(x).unwrap()).unwrap();
            prop_assert!((f - x).abs() <= 1e-12 * x);
            let g = frequency_from_au(frequency_to_au(x).unwrap()).unwrap();
            prop_assert!((g - x).abs() <= 1e-12 * x);
        }
    }
}
