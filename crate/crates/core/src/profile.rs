//! Initial-data families for `u(0, x)` and `u_t(0, x)`.
//!
//! Radial runs evaluate a profile at the radius `r = |x|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussians count as supported within this many widths of the center.
const GAUSSIAN_SUPPORT_WIDTHS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    Constant {
        value: f64,
    },
    /// `amplitude * exp(-((x - center) / width)^2)`
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// Smooth compactly supported bump,
    /// `amplitude * exp(1 - 1 / (1 - ((x - center) / width)^2))` inside the support.
    Bump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// `slope * x + intercept`
    Linear {
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    /// `amplitude * sin(wavenumber * x)`
    Sine {
        amplitude: f64,
        wavenumber: f64,
    },
    /// Values at the grid coordinates; piecewise linear in between and
    /// zero outside the sampled range.
    Sampled {
        x0: f64,
        dx: f64,
        values: Vec<f64>,
    },
}

impl InitialProfile {
    pub fn zero() -> Self {
        InitialProfile::Constant { value: 0.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Constant { value } => value,
            InitialProfile::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let z = (x - center) / width;
                amplitude * (-z * z).exp()
            }
            InitialProfile::Bump {
                amplitude,
                width,
                center,
            } => {
                let z = (x - center) / width;
                if z.abs() < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - z * z)).exp()
                } else {
                    0.0
                }
            }
            InitialProfile::Linear { slope, intercept } => slope * x + intercept,
            InitialProfile::Sine {
                amplitude,
                wavenumber,
            } => amplitude * (wavenumber * x).sin(),
            InitialProfile::Sampled {
                x0,
                dx,
                ref values,
            } => {
                let pos = (x - x0) / dx;
                if pos < 0.0 || pos > (values.len() - 1) as f64 {
                    return 0.0;
                }
                let i = (pos.floor() as usize).min(values.len() - 2);
                let w = pos - i as f64;
                values[i] * (1.0 - w) + values[i + 1] * w
            }
        }
    }

    /// Spatial derivative.
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Constant { .. } => 0.0,
            InitialProfile::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let z = (x - center) / width;
                -2.0 * z / width * amplitude * (-z * z).exp()
            }
            InitialProfile::Bump { width, center, .. } => {
                let z = (x - center) / width;
                if z.abs() < 1.0 {
                    let q = 1.0 - z * z;
                    self.eval(x) * (-2.0 * z / (q * q)) / width
                } else {
                    0.0
                }
            }
            InitialProfile::Linear { slope, .. } => slope,
            InitialProfile::Sine {
                amplitude,
                wavenumber,
            } => amplitude * wavenumber * (wavenumber * x).cos(),
            InitialProfile::Sampled { dx, .. } => {
                (self.eval(x + dx) - self.eval(x - dx)) / (2.0 * dx)
            }
        }
    }

    /// Radius of a ball around the origin outside of which the profile
    /// vanishes, if there is one.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            InitialProfile::Constant { value: 0.0 } => Some(0.0),
            InitialProfile::Gaussian { width, center, .. } => {
                Some(center.abs() + GAUSSIAN_SUPPORT_WIDTHS * width.abs())
            }
            InitialProfile::Bump { width, center, .. } => Some(center.abs() + width.abs()),
            InitialProfile::Linear {
                slope: 0.0,
                intercept: 0.0,
            } => Some(0.0),
            InitialProfile::Sine { amplitude: 0.0, .. } => Some(0.0),
            _ => None,
        }
    }

    /// Scale the amplitude in place (used by sweep jitter).
    pub fn scale(&mut self, factor: f64) {
        match self {
            InitialProfile::Constant { value } => *value *= factor,
            InitialProfile::Gaussian { amplitude, .. }
            | InitialProfile::Bump { amplitude, .. }
            | InitialProfile::Sine { amplitude, .. } => *amplitude *= factor,
            InitialProfile::Linear { slope, intercept } => {
                *slope *= factor;
                *intercept *= factor;
            }
            InitialProfile::Sampled { values, .. } => values.iter_mut().for_each(|v| *v *= factor),
        }
    }

    /// Sample at the given coordinates.
    pub fn sample(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if let InitialProfile::Sampled { values, .. } = self {
            if values.len() != coords.len() {
                return Err(Error::Profile(format!(
                    "sampled profile has {} values but the grid has {} points",
                    values.len(),
                    coords.len()
                )));
            }
        }
        let out: Vec<f64> = coords.iter().map(|&x| self.eval(x)).collect();
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Profile(format!(
                "non-finite sample at x = {}",
                coords[i]
            )));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let profiles = [
            InitialProfile::Gaussian {
                amplitude: 2.0,
                width: 0.7,
                center: 0.3,
            },
            InitialProfile::Bump {
                amplitude: 1.5,
                width: 1.2,
                center: -0.1,
            },
            InitialProfile::Sine {
                amplitude: 0.5,
                wavenumber: 3.0,
            },
            InitialProfile::Linear {
                slope: -2.0,
                intercept: 1.0,
            },
        ];
        let h = 1e-5;
        for prof in &profiles {
            for &x in &[-0.8, -0.2, 0.0, 0.45, 0.9] {
                let fd = (prof.eval(x + h) - prof.eval(x - h)) / (2.0 * h);
                assert!(
                    (fd - prof.derivative(x)).abs() < 1e-6,
                    "{prof:?} at {x}: {fd} vs {}",
                    prof.derivative(x)
                );
            }
        }
    }

    #[test]
    fn bump_has_compact_support() {
        let b = InitialProfile::Bump {
            amplitude: 1.0,
            width: 1.0,
            center: 0.0,
        };
        assert_eq!(b.eval(0.0), 1.0);
        assert_eq!(b.eval(1.0), 0.0);
        assert_eq!(b.eval(-1.5), 0.0);
        assert_eq!(b.support_radius(), Some(1.0));
    }

    #[test]
    fn sampled_length_mismatch_is_reported() {
        let s = InitialProfile::Sampled {
            x0: 0.0,
            dx: 0.1,
            values: vec![0.0; 5],
        };
        let coords: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        assert!(matches!(s.sample(&coords), Err(Error::Profile(_))));
    }
}
