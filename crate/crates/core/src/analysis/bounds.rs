use crate::decoder::DecoderArch;
use crate::error::{Error, Result};

/// Norm caps, dimensions and sample counts entering the covering-number and
/// error-bound expressions. All logarithms are natural.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundParams {
    /// Number of emitters R.
    pub emitters: f64,
    /// Number of frequency bins K.
    pub bins: f64,
    /// Latent side D_0.
    pub latent_side: f64,
    /// Number of up-blocks L.
    pub layers: f64,
    /// Widest layer W.
    pub width: f64,
    /// Spectral-norm cap s.
    pub s: f64,
    /// (2,1)-norm cap b.
    pub b: f64,
    /// Latent-norm cap a.
    pub a: f64,
    /// PSD-norm cap κ.
    pub kappa: f64,
    /// SLF Frobenius cap γ.
    pub gamma: f64,
    /// Product of squared activation Lipschitz constants.
    pub lipschitz: f64,
    /// Cover radius ε.
    pub epsilon: f64,
    /// Number of observed fibers N.
    pub samples: f64,
    /// Failure probability δ; carried but unused by the evaluators.
    pub delta: f64,
    /// Misspecification ν.
    pub nu: f64,
    pub dims: (usize, usize, usize),
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            emitters: 1.0,
            bins: 1.0,
            latent_side: 1.0,
            layers: 1.0,
            width: 2.0,
            s: 1.0,
            b: 1.0,
            a: 1.0,
            kappa: 1.0,
            gamma: 1.0,
            lipschitz: 1.0,
            epsilon: 1.0,
            samples: 1.0,
            delta: 0.05,
            nu: 0.0,
            dims: (1, 1, 1),
        }
    }
}

impl BoundParams {
    /// Structural fields from a decoder; ReLU and Sigmoid are 1-Lipschitz, so
    /// the Lipschitz product is 1.
    pub fn for_arch(arch: &DecoderArch, emitters: usize, dims: (usize, usize, usize)) -> Self {
        Self {
            emitters: emitters as f64,
            bins: dims.2 as f64,
            latent_side: arch.latent_side as f64,
            layers: arch.n_blocks() as f64,
            width: arch.max_width() as f64,
            lipschitz: 1.0,
            dims,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "cover radius must be > 0, got {}",
                self.epsilon
            )));
        }
        let positive = [
            ("R", self.emitters),
            ("K", self.bins),
            ("L", self.layers),
            ("W", self.width),
            ("s", self.s),
            ("b", self.b),
            ("a", self.a),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("P", self.lipschitz),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.latent_side >= 0.0 && self.nu >= 0.0) {
            return Err(Error::invalid("D0 and nu must be >= 0"));
        }
        Ok(())
    }

    /// a²b²P·ln(2W²)·s^{2L−2}·L³/ε², shared by both cover bounds.
    fn depth_term(&self) -> f64 {
        self.a.powi(2)
            * self.b.powi(2)
            * self.lipschitz
            * (2.0 * self.width.powi(2)).ln()
            * self.s.powf(2.0 * self.layers - 2.0)
            * self.layers.powi(3)
            / self.epsilon.powi(2)
    }
}

fn checked_ln(what: &str, arg: f64) -> Result<f64> {
    if arg > 0.0 {
        Ok(arg.ln())
    } else {
        Err(Error::Domain(format!(
            "{what}: log argument {arg} is not positive"
        )))
    }
}

/// Log covering number of the decoder output set:
/// 4a²b²P·ln(2W²)·s^{2L−2}·L³/ε² + D0²·ln(6Pa/ε).
pub fn cover_bound_h(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let latent = checked_ln("latent term", 6.0 * p.lipschitz * p.a / p.epsilon)?;
    Ok(4.0 * p.depth_term() + p.latent_side.powi(2) * latent)
}

/// Log covering number of the factored model set:
/// R³(κ+γ)a²b²P·ln(2W²)·s^{2L−2}·L³/ε² + R·D0²·ln(6RPa(κ+γ)/ε)
/// + RK·ln(3Rκ(κ+γ)/ε).
pub fn cover_bound_xunn(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let r = p.emitters;
    let kg = p.kappa + p.gamma;
    let latent = checked_ln("latent term", 6.0 * r * p.lipschitz * p.a * kg / p.epsilon)?;
    let spectral = checked_ln("PSD term", 3.0 * r * p.kappa * kg / p.epsilon)?;
    Ok(
        r.powi(3) * kg * p.depth_term()
            + r * p.latent_side.powi(2) * latent
            + r * p.bins * spectral,
    )
}

/// The two bracketed rate terms of the recovery error bounds (constant 1)
/// and the misspecification passthrough.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundTerms {
    pub term1: f64,
    pub term2: f64,
    pub nu: f64,
}

/// Full precision: R/√N and (log 𝒩)^{1/4}/(√K·N^{1/4}).
/// Quantized: √R/(K√N) and √(log 𝒩 / N).
pub fn prop_bound_terms(p: &BoundParams, quantized: bool) -> Result<BoundTerms> {
    if !(p.samples > 0.0) {
        return Err(Error::invalid("bound terms need N > 0"));
    }
    let log_cover = cover_bound_xunn(p)?;
    let n = p.samples;
    let (term1, term2) = if quantized {
        (
            p.emitters.sqrt() / (p.bins * n.sqrt()),
            (log_cover / n).sqrt(),
        )
    } else {
        (
            p.emitters / n.sqrt(),
            log_cover.powf(0.25) / (p.bins.sqrt() * n.powf(0.25)),
        )
    };
    Ok(BoundTerms {
        term1,
        term2,
        nu: p.nu,
    })
}
