use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::Measurements;
use crate::seed::Seed;
use crate::tensor::RadioMapTensor;

const DAMPING: f64 = 1e-8;
const NNLS_SWEEPS: usize = 50;

/// Block-term model Σ_r (A_r B_rᵀ) ∘ c_r fitted by alternating least squares.
#[derive(Clone, Debug, PartialEq)]
pub struct BtdConfig {
    pub rank: usize,
    pub iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for BtdConfig {
    fn default() -> Self {
        Self {
            rank: 4,
            iters: 200,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Fitted factors. `a[r]` is I×L, `b[r]` is J×L, `c` is K×R.
#[derive(Clone, Debug)]
pub struct BtdFactors {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub c: DMatrix<f64>,
}

impl BtdFactors {
    pub fn emitters(&self) -> usize {
        self.a.len()
    }

    /// S_r = A_r B_rᵀ.
    pub fn slf(&self, r: usize) -> DMatrix<f64> {
        &self.a[r] * self.b[r].transpose()
    }

    /// Assembled map with negative entries clamped to zero.
    pub fn assemble(&self) -> Result<RadioMapTensor> {
        let slfs: Vec<DMatrix<f64>> = (0..self.emitters()).map(|r| self.slf(r)).collect();
        let (rows, cols, bins) = (self.a[0].nrows(), self.b[0].nrows(), self.c.nrows());
        let mut data = vec![0.0; rows * cols * bins];
        for i in 0..rows {
            for j in 0..cols {
                for k in 0..bins {
                    let v: f64 = slfs
                        .iter()
                        .enumerate()
                        .map(|(r, s)| s[(i, j)] * self.c[(k, r)])
                        .sum();
                    data[(i * cols + j) * bins + k] = v.max(0.0);
                }
            }
        }
        RadioMapTensor::new((rows, cols, bins), data)
    }
}

/// Observed data grouped by row and by column of the grid.
struct Layout<'a> {
    m: &'a Measurements,
    by_row: Vec<Vec<usize>>,
    by_col: Vec<Vec<usize>>,
}

impl<'a> Layout<'a> {
    fn new(m: &'a Measurements) -> Self {
        let (rows, cols, _) = m.dims();
        let mut by_row = vec![Vec::new(); rows];
        let mut by_col = vec![Vec::new(); cols];
        for (n, &(i, j)) in m.locations().iter().enumerate() {
            by_row[i].push(n);
            by_col[j].push(n);
        }
        Self { m, by_row, by_col }
    }
}

/// ½‖M ⊛ (Y − model)‖² over the observed fibers.
pub fn btd_objective(measurements: &Measurements, f: &BtdFactors) -> f64 {
    let slfs: Vec<DMatrix<f64>> = (0..f.emitters()).map(|r| f.slf(r)).collect();
    let mut total = 0.0;
    for (n, &(i, j)) in measurements.locations().iter().enumerate() {
        for (k, y) in measurements.fiber(n).iter().enumerate() {
            let v: f64 = slfs
                .iter()
                .enumerate()
                .map(|(r, s)| s[(i, j)] * f.c[(k, r)])
                .sum();
            total += (y - v).powi(2);
        }
    }
    0.5 * total
}

/// Exact damped least squares for one row of every A_r (or, with `by_col`,
/// one row of every B_r). `other` holds the opposite factors.
fn solve_rows(
    lay: &Layout,
    target: &mut [DMatrix<f64>],
    other: &[DMatrix<f64>],
    c: &DMatrix<f64>,
    rows_first: bool,
) -> Result<()> {
    let emitters = target.len();
    let rank = target[0].ncols();
    let dim = emitters * rank;
    let cc = c.transpose() * c;
    let groups = if rows_first { &lay.by_row } else { &lay.by_col };
    for (line, obs) in groups.iter().enumerate() {
        let mut gram = DMatrix::<f64>::identity(dim, dim) * DAMPING;
        let mut rhs = DVector::<f64>::zeros(dim);
        for &n in obs {
            let (i, j) = lay.m.locations()[n];
            let partner = if rows_first { j } else { i };
            let yc = c.transpose() * DVector::from_column_slice(lay.m.fiber(n));
            for r in 0..emitters {
                for l in 0..rank {
                    let br = other[r][(partner, l)];
                    rhs[r * rank + l] += br * yc[r];
                    for r2 in 0..emitters {
                        for l2 in 0..rank {
                            gram[(r * rank + l, r2 * rank + l2)] +=
                                br * other[r2][(partner, l2)] * cc[(r, r2)];
                        }
                    }
                }
            }
        }
        let sol = gram
            .cholesky()
            .ok_or_else(|| Error::Domain("BTD normal equations are not positive definite".into()))?
            .solve(&rhs);
        for r in 0..emitters {
            for l in 0..rank {
                target[r][(line, l)] = sol[r * rank + l];
            }
        }
    }
    Ok(())
}

/// Nonnegative least squares for every PSD row by exact coordinate descent,
/// which never increases the objective.
fn solve_psd(lay: &Layout, f: &mut BtdFactors) {
    let emitters = f.emitters();
    let bins = f.c.nrows();
    let slfs: Vec<DMatrix<f64>> = (0..emitters).map(|r| f.slf(r)).collect();
    let mut gram = DMatrix::<f64>::zeros(emitters, emitters);
    let mut rhs = DMatrix::<f64>::zeros(bins, emitters);
    for (n, &(i, j)) in lay.m.locations().iter().enumerate() {
        let s: Vec<f64> = slfs.iter().map(|m| m[(i, j)]).collect();
        for r in 0..emitters {
            for r2 in 0..emitters {
                gram[(r, r2)] += s[r] * s[r2];
            }
            for (k, y) in lay.m.fiber(n).iter().enumerate() {
                rhs[(k, r)] += s[r] * y;
            }
        }
    }
    for k in 0..bins {
        for _ in 0..NNLS_SWEEPS {
            let mut moved = 0.0f64;
            for r in 0..emitters {
                if gram[(r, r)] <= 0.0 {
                    continue;
                }
                let resid: f64 = rhs[(k, r)]
                    - (0..emitters)
                        .map(|q| gram[(r, q)] * f.c[(k, q)])
                        .sum::<f64>();
                let new = (f.c[(k, r)] + resid / gram[(r, r)]).max(0.0);
                moved = moved.max((new - f.c[(k, r)]).abs());
                f.c[(k, r)] = new;
            }
            if moved < 1e-14 {
                break;
            }
        }
    }
}

/// Rescale each term so A_r, B_r and c_r carry equal norms; the model is
/// unchanged.
fn rebalance(f: &mut BtdFactors) {
    for r in 0..f.emitters() {
        let na = f.a[r].norm();
        let nb = f.b[r].norm();
        let nc = f.c.column(r).norm();
        if na == 0.0 || nb == 0.0 || nc == 0.0 {
            continue;
        }
        let g = (na * nb * nc).cbrt();
        f.a[r] *= g / na;
        f.b[r] *= g / nb;
        let mut col = f.c.column_mut(r);
        col *= g / nc;
    }
}

fn check_inputs(measurements: &Measurements, emitters: usize, config: &BtdConfig) -> Result<()> {
    let (rows, cols, _) = measurements.dims();
    if emitters == 0 {
        return Err(Error::invalid("BTD needs R >= 1"));
    }
    if config.rank == 0 || config.rank > rows.min(cols) {
        return Err(Error::invalid(format!(
            "BTD rank {} outside 1..={}",
            config.rank,
            rows.min(cols)
        )));
    }
    if measurements.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("BTD measurements must be finite"));
    }
    Ok(())
}

/// Alternating block least squares on the observed linear-power fibers,
/// recording the objective after every block update.
pub fn btd_fit(
    measurements: &Measurements,
    emitters: usize,
    config: &BtdConfig,
) -> Result<(BtdFactors, Vec<f64>)> {
    check_inputs(measurements, emitters, config)?;
    let (rows, cols, bins) = measurements.dims();
    let mut rng = Seed(config.seed).derive("btd").rng();
    let mut draw = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(0.0..1.0));
    let a = (0..emitters).map(|_| draw(rows, config.rank)).collect();
    let b = (0..emitters).map(|_| draw(cols, config.rank)).collect();
    let c = draw(bins, emitters);
    let mut f = BtdFactors { a, b, c };
    let lay = Layout::new(measurements);
    let mut history = vec![btd_objective(measurements, &f)];
    for _ in 0..config.iters {
        let before = *history.last().unwrap();
        solve_rows(&lay, &mut f.a, &f.b, &f.c, true)?;
        history.push(btd_objective(measurements, &f));
        solve_rows(&lay, &mut f.b, &f.a, &f.c, false)?;
        history.push(btd_objective(measurements, &f));
        solve_psd(&lay, &mut f);
        rebalance(&mut f);
        let after = btd_objective(measurements, &f);
        history.push(after);
        if (before - after).abs() <= config.tol * before.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok((f, history))
}

/// BTD estimate of the full map from linear-power fibers.
pub fn btd_recover(
    measurements: &Measurements,
    emitters: usize,
    config: &BtdConfig,
) -> Result<RadioMapTensor> {
    btd_fit(measurements, emitters, config)?.0.assemble()
}
