//! Bound grids: `key = v1, v2, …` per line, evaluated over the Cartesian product.

use std::fmt::Write as _;

use rmc_core::analysis::{BoundParams, cover_bound_h, cover_bound_xunn, prop_bound_terms};
use rmc_core::{Error, Result};

pub const KEYS: [&str; 15] = [
    "R", "K", "D0", "L", "W", "s", "b", "a", "kappa", "gamma", "P", "epsilon", "N", "delta", "nu",
];

fn default_value(key: &str) -> f64 {
    let p = BoundParams::default();
    match key {
        "R" => p.emitters,
        "K" => p.bins,
        "D0" => p.latent_side,
        "L" => p.layers,
        "W" => p.width,
        "s" => p.s,
        "b" => p.b,
        "a" => p.a,
        "kappa" => p.kappa,
        "gamma" => p.gamma,
        "P" => p.lipschitz,
        "epsilon" => p.epsilon,
        "N" => p.samples,
        "delta" => p.delta,
        _ => p.nu,
    }
}

fn params_from(values: &[f64; 15]) -> BoundParams {
    let [
        emitters,
        bins,
        latent_side,
        layers,
        width,
        s,
        b,
        a,
        kappa,
        gamma,
        lipschitz,
        epsilon,
        samples,
        delta,
        nu,
    ] = *values;
    BoundParams {
        emitters,
        bins,
        latent_side,
        layers,
        width,
        s,
        b,
        a,
        kappa,
        gamma,
        lipschitz,
        epsilon,
        samples,
        delta,
        nu,
        ..BoundParams::default()
    }
}

/// One value list per key, defaults filling the gaps.
pub fn parse_grid(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut grid: Vec<Option<Vec<f64>>> = vec![None; KEYS.len()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = values", lineno + 1)))?;
        let key = key.trim();
        let idx = KEYS.iter().position(|k| *k == key).ok_or_else(|| {
            Error::Config(format!("line {}: unknown bound key {key:?}", lineno + 1))
        })?;
        if grid[idx].is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {key:?}",
                lineno + 1
            )));
        }
        let values = raw
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        grid[idx] = Some(values);
    }
    Ok(grid
        .into_iter()
        .zip(KEYS)
        .map(|(v, k)| v.unwrap_or_else(|| vec![default_value(k)]))
        .collect())
}

/// CSV with one row per grid point; evaluator errors go in the last column.
pub fn evaluate_grid(grid: &[Vec<f64>]) -> String {
    let mut out = KEYS.join(",");
    out.push_str(",log_cover_h,log_cover_xunn,term1_fp,term2_fp,term1_q,term2_q,error\n");
    let mut idx = vec![0usize; grid.len()];
    loop {
        let mut values = [0.0; 15];
        for (k, v) in values.iter_mut().enumerate() {
            *v = grid[k][idx[k]];
        }
        let p = params_from(&values);
        let row: Vec<String> = values.iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        let evaluated = (|| -> Result<[f64; 6]> {
            let h = cover_bound_h(&p)?;
            let x = cover_bound_xunn(&p)?;
            let fp = prop_bound_terms(&p, false)?;
            let q = prop_bound_terms(&p, true)?;
            Ok([h, x, fp.term1, fp.term2, q.term1, q.term2])
        })();
        match evaluated {
            Ok(cols) => {
                for c in cols {
                    let _ = write!(out, ",{c}");
                }
                out.push_str(",\n");
            }
            Err(e) => {
                let _ = writeln!(out, ",,,,,,,{}", e.to_string().replace(',', ";"));
            }
        }
        let mut pos = grid.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < grid[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_matches_calculator() {
        let grid = parse_grid("R = 2\nepsilon = 0.5\nN = 100\n").unwrap();
        let csv = evaluate_grid(&grid);
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        let p = BoundParams {
            emitters: 2.0,
            epsilon: 0.5,
            samples: 100.0,
            ..BoundParams::default()
        };
        assert_eq!(
            row[16].parse::<f64>().unwrap(),
            cover_bound_xunn(&p).unwrap()
        );
        assert_eq!(row[15].parse::<f64>().unwrap(), cover_bound_h(&p).unwrap());
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn sweep_rows_and_errors() {
        let grid = parse_grid("N = 10, 100, 1000\nepsilon = 1, -1\n").unwrap();
        let csv = evaluate_grid(&grid);
        assert_eq!(csv.lines().count(), 7);
        let errors = csv.lines().skip(1).filter(|l| !l.ends_with(',')).count();
        assert_eq!(errors, 3);
        let term1: Vec<f64> = csv
            .lines()
            .skip(1)
            .filter(|l| l.ends_with(','))
            .map(|l| l.split(',').nth(17).unwrap().parse().unwrap())
            .collect();
        assert!(term1.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_keys() {
        assert!(matches!(parse_grid("foo = 1"), Err(Error::Config(_))));
        assert!(matches!(parse_grid("R = x"), Err(Error::Config(_))));
        assert!(matches!(parse_grid("R = 1\nR = 2"), Err(Error::Config(_))));
    }
}
