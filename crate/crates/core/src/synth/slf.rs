use crate::error::{Error, Result};
use crate::seed::Seed;
use crate::tensor::{PsdMatrix, RadioMapTensor, SlfMatrix};

use super::shadowing::{ShadowingParams, shadowing_field};

/// Path loss with log-normal shadowing:
/// S(i,j) = min(1, d^(−γ) · 10^(shadow_dB / 10)), d clamped below at 1 m.
pub fn generate_slf(
    rows: usize,
    cols: usize,
    params: &ShadowingParams,
    seed: Seed,
) -> Result<SlfMatrix> {
    let shadow = shadowing_field(rows, cols, params, seed)?;
    let (ei, ej) = (params.emitter.0 as f64, params.emitter.1 as f64);
    let data = (0..rows * cols)
        .map(|idx| {
            let di = (idx / cols) as f64 - ei;
            let dj = (idx % cols) as f64 - ej;
            let d = (di * di + dj * dj).sqrt().max(1.0);
            let gain = d.powf(-params.path_loss_exponent) * 10f64.powf(shadow[idx] / 10.0);
            gain.min(1.0)
        })
        .collect();
    SlfMatrix::new(rows, cols, data)
}

/// X(i,j,k) = Σ_r S_r(i,j) · C(k,r).
pub fn assemble_map(slfs: &[SlfMatrix], psd: &PsdMatrix) -> Result<RadioMapTensor> {
    let first = slfs
        .first()
        .ok_or_else(|| Error::invalid("need at least one SLF"))?;
    let (rows, cols) = (first.rows(), first.cols());
    if slfs.iter().any(|s| s.rows() != rows || s.cols() != cols) {
        return Err(Error::invalid("SLFs have inconsistent dims"));
    }
    if psd.emitters() != slfs.len() {
        return Err(Error::invalid(format!(
            "{} SLFs but {} PSD columns",
            slfs.len(),
            psd.emitters()
        )));
    }
    let bins = psd.bins();
    let mut data = vec![0.0; rows * cols * bins];
    for (r, slf) in slfs.iter().enumerate() {
        let column = psd.column(r);
        for (cell, &s) in slf.data().iter().enumerate() {
            let fiber = &mut data[cell * bins..(cell + 1) * bins];
            for (x, c) in fiber.iter_mut().zip(column) {
                *x += s * c;
            }
        }
    }
    RadioMapTensor::new((rows, cols, bins), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(emitter: (usize, usize)) -> ShadowingParams {
        ShadowingParams {
            xc: 50.0,
            eta: 0.0,
            path_loss_exponent: 2.0,
            emitter,
        }
    }

    #[test]
    fn pure_path_loss() {
        let s = generate_slf(32, 32, &flat((5, 5)), Seed(0)).unwrap();
        assert!((s.get(15, 5) - 1e-2).abs() < 1e-15);
        assert!((s.get(5, 15) - 1e-2).abs() < 1e-15);
        assert_eq!(s.get(5, 5), 1.0);
        // d = 1 for direct neighbours
        assert_eq!(s.get(5, 6), 1.0);
        assert!(s.data().iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn emitter_outside_grid_rejected() {
        assert!(generate_slf(4, 4, &flat((4, 0)), Seed(0)).is_err());
    }

    #[test]
    fn translation_invariance_without_shadowing() {
        let a = generate_slf(20, 20, &flat((6, 7)), Seed(0)).unwrap();
        let b = generate_slf(20, 20, &flat((9, 10)), Seed(0)).unwrap();
        for i in 0..17 {
            for j in 0..17 {
                assert_eq!(a.get(i, j), b.get(i + 3, j + 3));
            }
        }
    }

    #[test]
    fn shadowing_is_zero_mean_in_log_gain() {
        let p = ShadowingParams {
            xc: 6.0,
            eta: 6.0,
            path_loss_exponent: 2.0,
            emitter: (0, 0),
        };
        let cell = (7, 9);
        let seeds = 200;
        let mean_log: f64 = (0..seeds)
            .map(|s| {
                generate_slf(12, 12, &p, Seed(300 + s))
                    .unwrap()
                    .get(cell.0, cell.1)
                    .ln()
            })
            .sum::<f64>()
            / seeds as f64;
        let d2 = (cell.0 * cell.0 + cell.1 * cell.1) as f64;
        let pure = -d2.ln();
        assert!(
            ((mean_log - pure) / pure).abs() < 0.10,
            "{mean_log} vs {pure}"
        );
    }

    #[test]
    fn one_hot_psd_slab() {
        let s = SlfMatrix::new(2, 3, vec![1.0; 6]).unwrap();
        let mut c = vec![0.0; 5];
        c[2] = 1.0;
        let x = assemble_map(&[s], &PsdMatrix::from_columns(&[c]).unwrap()).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..5 {
                    assert_eq!(x.get(i, j, k), if k == 2 { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn duplicated_emitter_doubles() {
        let s = SlfMatrix::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let c = vec![1.0, 0.5, 0.25];
        let one = assemble_map(
            std::slice::from_ref(&s),
            &PsdMatrix::from_columns(std::slice::from_ref(&c)).unwrap(),
        )
        .unwrap();
        let two = assemble_map(
            &[s.clone(), s],
            &PsdMatrix::from_columns(&[c.clone(), c]).unwrap(),
        )
        .unwrap();
        for (a, b) in one.data().iter().zip(two.data()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn dims_mismatch() {
        let s = SlfMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        let c = PsdMatrix::from_columns(&[vec![1.0], vec![1.0]]).unwrap();
        assert!(assemble_map(&[s], &c).is_err());
    }
}
