use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::Seed;

/// One Gaussian bump of a PSD.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdBump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsdSpec {
    pub components: Vec<PsdBump>,
}

/// Ranges for random PSD specs.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdRanges {
    pub bumps_min: usize,
    pub bumps_max: usize,
    pub amp_min: f64,
    pub amp_max: f64,
    pub width_min: f64,
    pub width_max: f64,
}

impl Default for PsdRanges {
    fn default() -> Self {
        Self {
            bumps_min: 2,
            bumps_max: 4,
            amp_min: 0.5,
            amp_max: 2.0,
            width_min: 2.0,
            width_max: 6.0,
        }
    }
}

impl PsdRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.bumps_min >= 1
            && self.bumps_min <= self.bumps_max
            && self.amp_min > 0.0
            && self.amp_min <= self.amp_max
            && self.width_min > 0.0
            && self.width_min <= self.width_max;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid PSD ranges {self:?}")))
        }
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Random spec: bump count, amplitudes, widths from `ranges`, centers U[0, K).
pub fn random_psd_spec(bins: usize, ranges: &PsdRanges, seed: Seed) -> Result<PsdSpec> {
    ranges.validate()?;
    let mut rng = seed.rng();
    let count = rng.random_range(ranges.bumps_min..=ranges.bumps_max);
    let components = (0..count)
        .map(|_| PsdBump {
            amplitude: uniform(&mut rng, ranges.amp_min, ranges.amp_max),
            center: uniform(&mut rng, 0.0, bins as f64),
            width: uniform(&mut rng, ranges.width_min, ranges.width_max),
        })
        .collect();
    Ok(PsdSpec { components })
}

/// c(k) = Σ_m amp_m · exp(−(k − center_m)² / (2 width_m²)).
pub fn generate_psd(bins: usize, spec: &PsdSpec) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::invalid("K must be positive"));
    }
    if spec.components.is_empty() {
        return Err(Error::invalid("PSD spec has no components"));
    }
    for b in &spec.components {
        if !(b.amplitude > 0.0 && b.width > 0.0 && b.center.is_finite()) {
            return Err(Error::invalid(format!("invalid PSD bump {b:?}")));
        }
    }
    Ok((0..bins)
        .map(|k| {
            spec.components
                .iter()
                .map(|b| {
                    let d = k as f64 - b.center;
                    b.amplitude * (-d * d / (2.0 * b.width * b.width)).exp()
                })
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(amplitude: f64, center: f64, width: f64) -> PsdBump {
        PsdBump {
            amplitude,
            center,
            width,
        }
    }

    #[test]
    fn single_bump_peaks_at_center() {
        let c = generate_psd(
            64,
            &PsdSpec {
                components: vec![bump(1.0, 32.0, 4.0)],
            },
        )
        .unwrap();
        let argmax = (0..64).max_by(|&a, &b| c[a].total_cmp(&c[b])).unwrap();
        assert_eq!(argmax, 32);
        assert_eq!(c[32], 1.0);
        for d in 1..20 {
            assert_eq!(c[32 - d], c[32 + d]);
        }
    }

    #[test]
    fn bumps_add() {
        let a = bump(1.0, 10.0, 2.0);
        let b = bump(0.7, 50.0, 3.0);
        let ca = generate_psd(
            64,
            &PsdSpec {
                components: vec![a],
            },
        )
        .unwrap();
        let cb = generate_psd(
            64,
            &PsdSpec {
                components: vec![b],
            },
        )
        .unwrap();
        let both = generate_psd(
            64,
            &PsdSpec {
                components: vec![a, b],
            },
        )
        .unwrap();
        for k in 0..64 {
            assert!((both[k] - (ca[k] + cb[k])).abs() <= 1e-15);
        }
    }

    #[test]
    fn empty_spec_rejected() {
        assert!(generate_psd(8, &PsdSpec { components: vec![] }).is_err());
    }

    #[test]
    fn random_specs_are_nonnegative_and_in_range() {
        let ranges = PsdRanges::default();
        for s in 0..50 {
            let spec = random_psd_spec(64, &ranges, Seed(s)).unwrap();
            assert!((2..=4).contains(&spec.components.len()));
            for b in &spec.components {
                assert!((0.5..2.0).contains(&b.amplitude));
                assert!((0.0..64.0).contains(&b.center));
                assert!((2.0..6.0).contains(&b.width));
            }
            let c = generate_psd(64, &spec).unwrap();
            assert!(c.iter().all(|&v| v >= 0.0));
        }
    }
}
