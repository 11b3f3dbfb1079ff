//! Layer primitives and their adjoints. Feature maps are channel-major:
//! `data[(c * side + p) * side + q]`.

/// Source taps of ×2 bilinear upsampling along one axis (align-corners off):
/// output index o samples the input at o/2 − 1/4, clamped to the border.
fn upsample_taps(n: usize) -> Vec<[(usize, f64); 2]> {
    (0..2 * n)
        .map(|o| {
            let m = o / 2;
            if o % 2 == 0 {
                if m == 0 {
                    [(0, 1.0), (0, 0.0)]
                } else {
                    [(m - 1, 0.25), (m, 0.75)]
                }
            } else {
                [(m, 0.75), ((m + 1).min(n - 1), 0.25)]
            }
        })
        .collect()
}

/// ×2 bilinear upsampling of `channels` maps of side `side`.
pub fn upsample2x(input: &[f64], channels: usize, side: usize) -> Vec<f64> {
    let taps = upsample_taps(side);
    let wide = 2 * side;
    // along columns, then rows
    let mut tmp = vec![0.0; channels * side * wide];
    for (src, dst) in input.chunks_exact(side).zip(tmp.chunks_exact_mut(wide)) {
        for (d, t) in dst.iter_mut().zip(&taps) {
            *d = t[0].1 * src[t[0].0] + t[1].1 * src[t[1].0];
        }
    }
    let mut out = vec![0.0; channels * wide * wide];
    for c in 0..channels {
        let plane = &tmp[c * side * wide..(c + 1) * side * wide];
        for (o, t) in taps.iter().enumerate() {
            let row = &mut out[(c * wide + o) * wide..(c * wide + o + 1) * wide];
            let (a, wa) = t[0];
            let (b, wb) = t[1];
            let ra = &plane[a * wide..(a + 1) * wide];
            let rb = &plane[b * wide..(b + 1) * wide];
            for q in 0..wide {
                row[q] = wa * ra[q] + wb * rb[q];
            }
        }
    }
    out
}

/// Adjoint of [`upsample2x`].
pub fn upsample2x_backward(grad_out: &[f64], channels: usize, side: usize) -> Vec<f64> {
    let taps = upsample_taps(side);
    let wide = 2 * side;
    let mut tmp = vec![0.0; channels * side * wide];
    for c in 0..channels {
        let plane = &mut tmp[c * side * wide..(c + 1) * side * wide];
        for (o, t) in taps.iter().enumerate() {
            let g = &grad_out[(c * wide + o) * wide..(c * wide + o + 1) * wide];
            for &(src, w) in t {
                if w == 0.0 {
                    continue;
                }
                let row = &mut plane[src * wide..(src + 1) * wide];
                for q in 0..wide {
                    row[q] += w * g[q];
                }
            }
        }
    }
    let mut grad_in = vec![0.0; channels * side * side];
    for (g, dst) in tmp.chunks_exact(wide).zip(grad_in.chunks_exact_mut(side)) {
        for (o, t) in taps.iter().enumerate() {
            for &(src, w) in t {
                dst[src] += w * g[o];
            }
        }
    }
    grad_in
}

/// Valid output range along one axis for a tap offset `d` (zero padding).
#[inline]
fn valid(side: usize, d: isize) -> std::ops::Range<usize> {
    let lo = (-d).max(0) as usize;
    let hi = (side as isize - d).clamp(0, side as isize) as usize;
    lo..hi.max(lo)
}

/// Same-size n×n convolution (cross-correlation), zero padding (n−1)/2, no
/// bias. `weights[((ci * c_out + co) * n + a) * n + b]`.
pub fn conv_same(
    input: &[f64],
    c_in: usize,
    c_out: usize,
    side: usize,
    weights: &[f64],
    n: usize,
) -> Vec<f64> {
    let half = (n / 2) as isize;
    let hw = side * side;
    let mut out = vec![0.0; c_out * hw];
    for co in 0..c_out {
        let dst = &mut out[co * hw..(co + 1) * hw];
        for ci in 0..c_in {
            let src = &input[ci * hw..(ci + 1) * hw];
            for a in 0..n {
                let di = a as isize - half;
                for b in 0..n {
                    let dj = b as isize - half;
                    let w = weights[((ci * c_out + co) * n + a) * n + b];
                    if w == 0.0 {
                        continue;
                    }
                    let cols = valid(side, dj);
                    for p in valid(side, di) {
                        let sp = (p as isize + di) as usize;
                        let drow = &mut dst[p * side + cols.start..p * side + cols.end];
                        let s0 = (sp * side) as isize + cols.start as isize + dj;
                        let srow = &src[s0 as usize..s0 as usize + cols.len()];
                        for (d, s) in drow.iter_mut().zip(srow) {
                            *d += w * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`conv_same`]: returns (grad_input, grad_weights).
pub fn conv_same_backward(
    input: &[f64],
    grad_out: &[f64],
    c_in: usize,
    c_out: usize,
    side: usize,
    weights: &[f64],
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let half = (n / 2) as isize;
    let hw = side * side;
    let mut grad_in = vec![0.0; c_in * hw];
    let mut grad_w = vec![0.0; weights.len()];
    for co in 0..c_out {
        let g = &grad_out[co * hw..(co + 1) * hw];
        for ci in 0..c_in {
            let src = &input[ci * hw..(ci + 1) * hw];
            let gin = &mut grad_in[ci * hw..(ci + 1) * hw];
            for a in 0..n {
                let di = a as isize - half;
                for b in 0..n {
                    let dj = b as isize - half;
                    let widx = ((ci * c_out + co) * n + a) * n + b;
                    let w = weights[widx];
                    let cols = valid(side, dj);
                    let mut acc = 0.0;
                    for p in valid(side, di) {
                        let sp = (p as isize + di) as usize;
                        let grow = &g[p * side + cols.start..p * side + cols.end];
                        let s0 = ((sp * side) as isize + cols.start as isize + dj) as usize;
                        let srow = &src[s0..s0 + cols.len()];
                        for (gv, sv) in grow.iter().zip(srow) {
                            acc += gv * sv;
                        }
                        let irow = &mut gin[s0..s0 + cols.len()];
                        for (iv, gv) in irow.iter_mut().zip(grow) {
                            *iv += w * gv;
                        }
                    }
                    grad_w[widx] += acc;
                }
            }
        }
    }
    (grad_in, grad_w)
}

/// Cached statistics of one channel-normalization call.
#[derive(Clone, Debug)]
pub struct NormCache {
    /// Standardized input (x − μ)/(σ + ε), channel-major.
    pub xhat: Vec<f64>,
    /// Population std σ per channel.
    pub sigma: Vec<f64>,
}

/// Per-channel standardization over spatial positions followed by the affine
/// map `scale · x̂ + shift`.
pub fn channel_norm(
    input: &[f64],
    channels: usize,
    scale: &[f64],
    shift: &[f64],
    eps: f64,
) -> (Vec<f64>, NormCache) {
    let hw = input.len() / channels;
    let mut out = vec![0.0; input.len()];
    let mut xhat = vec![0.0; input.len()];
    let mut sigma = vec![0.0; channels];
    for c in 0..channels {
        let x = &input[c * hw..(c + 1) * hw];
        let mean = x.iter().sum::<f64>() / hw as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / hw as f64;
        let sd = var.sqrt();
        let denom = sd + eps;
        sigma[c] = sd;
        for ((o, xh), v) in out[c * hw..(c + 1) * hw]
            .iter_mut()
            .zip(&mut xhat[c * hw..(c + 1) * hw])
            .zip(x)
        {
            *xh = (v - mean) / denom;
            *o = scale[c] * *xh + shift[c];
        }
    }
    (out, NormCache { xhat, sigma })
}

/// Adjoint of [`channel_norm`]: returns (grad_input, grad_scale, grad_shift).
pub fn channel_norm_backward(
    grad_out: &[f64],
    cache: &NormCache,
    channels: usize,
    scale: &[f64],
    eps: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hw = grad_out.len() / channels;
    let n = hw as f64;
    let mut grad_in = vec![0.0; grad_out.len()];
    let mut grad_scale = vec![0.0; channels];
    let mut grad_shift = vec![0.0; channels];
    for c in 0..channels {
        let g = &grad_out[c * hw..(c + 1) * hw];
        let xh = &cache.xhat[c * hw..(c + 1) * hw];
        grad_scale[c] = g.iter().zip(xh).map(|(a, b)| a * b).sum();
        grad_shift[c] = g.iter().sum();
        let sd = cache.sigma[c];
        let denom = sd + eps;
        // dx̂ = scale·g; x − μ = x̂·denom
        let mean_dxh = scale[c] * grad_shift[c] / n;
        let dxh_dot_xc = scale[c] * grad_scale[c] * denom;
        let coupling = if sd > 0.0 {
            dxh_dot_xc / (denom * denom * n * sd)
        } else {
            0.0
        };
        for ((gi, gv), xv) in grad_in[c * hw..(c + 1) * hw].iter_mut().zip(g).zip(xh) {
            let dxh = scale[c] * gv;
            *gi = (dxh - mean_dxh) / denom - coupling * xv * denom;
        }
    }
    (grad_in, grad_scale, grad_shift)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
