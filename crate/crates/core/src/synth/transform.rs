//! Dynamic-range compression applied by the sensors: h(x) = ln(x + a).

#[inline]
pub fn h_transform(x: f64, a_offset: f64) -> f64 {
    (x + a_offset).ln()
}

/// Inverse of [`h_transform`], clipped at zero power.
#[inline]
pub fn h_inverse(y: f64, a_offset: f64) -> f64 {
    (y.exp() - a_offset).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basics() {
        let a = 1e-3;
        assert_eq!(h_transform(0.0, a), a.ln());
        assert!((h_inverse(h_transform(5.0, a), a) - 5.0).abs() < 1e-12);
        assert_eq!(h_inverse(-50.0, a), 0.0);
        let xs = [0.0, 1e-6, 1e-3, 0.5, 2.0, 100.0];
        for w in xs.windows(2) {
            assert!(h_transform(w[0], a) < h_transform(w[1], a));
        }
    }
}
