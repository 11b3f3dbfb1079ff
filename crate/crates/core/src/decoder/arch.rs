use crate::error::{Error, Result};

/// Shape of a deep decoder: `widths = [k_0, k_1, …, k_L, k_{L+1}]` where each
/// of the L up-blocks maps k_i → k_{i+1} channels with an n×n convolution and
/// doubles the spatial side, and the head is a 1×1 convolution k_L → k_{L+1}.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderArch {
    pub widths: Vec<usize>,
    pub kernel: usize,
    /// D_0, side of the latent input (the latent code has D_0² entries).
    pub latent_side: usize,
    pub norm_epsilon: f64,
}

impl Default for DecoderArch {
    /// 4×4 latent → 64×64 output, 6 channels, 3×3 kernels: 1080 parameters.
    fn default() -> Self {
        Self {
            widths: vec![1, 6, 6, 6, 6, 1],
            kernel: 3,
            latent_side: 4,
            norm_epsilon: 1e-6,
        }
    }
}

impl DecoderArch {
    /// `blocks` up-blocks of uniform `width`, sized to produce `output_side`.
    pub fn uniform(blocks: usize, width: usize, kernel: usize, output_side: usize) -> Result<Self> {
        if blocks == 0 || !output_side.is_multiple_of(1 << blocks) {
            return Err(Error::invalid(format!(
                "output side {output_side} is not divisible by 2^{blocks}"
            )));
        }
        let mut widths = vec![1];
        widths.extend(std::iter::repeat_n(width, blocks));
        widths.push(1);
        let arch = Self {
            widths,
            kernel,
            latent_side: output_side >> blocks,
            ..Self::default()
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn n_blocks(&self) -> usize {
        self.widths.len().saturating_sub(2)
    }

    pub fn out_channels(&self) -> usize {
        *self.widths.last().unwrap_or(&0)
    }

    pub fn output_side(&self) -> usize {
        self.latent_side << self.n_blocks()
    }

    pub fn latent_len(&self) -> usize {
        self.latent_side * self.latent_side
    }

    /// Widest hidden layer, max(k_1 … k_L).
    pub fn max_width(&self) -> usize {
        self.widths[1..self.widths.len() - 1]
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 {
            return Err(Error::invalid("decoder needs at least one up-block"));
        }
        if self.widths[0] != 1 {
            return Err(Error::invalid(format!(
                "input width k_0 must be 1, got {}",
                self.widths[0]
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::invalid(format!(
                "zero channel width in {:?}",
                self.widths
            )));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel size must be odd, got {}",
                self.kernel
            )));
        }
        if self.latent_side == 0 {
            return Err(Error::invalid("latent side must be positive"));
        }
        if !(self.norm_epsilon > 0.0) {
            return Err(Error::invalid("norm epsilon must be positive"));
        }
        Ok(())
    }

    /// Per-layer parameter counts: one entry per up-block, then the head.
    pub fn layer_counts(&self) -> Result<Vec<usize>> {
        self.validate()?;
        let n2 = self.kernel * self.kernel;
        let mut counts: Vec<usize> = self
            .widths
            .windows(2)
            .take(self.n_blocks())
            .map(|w| w[0] * w[1] * n2 + 2 * w[1])
            .collect();
        let l = self.n_blocks();
        counts.push(self.widths[l] * self.widths[l + 1]);
        Ok(counts)
    }

    /// Conv kernels (no bias), per-channel affine of each normalization, and
    /// the 1×1 head.
    pub fn count_params(&self) -> Result<usize> {
        Ok(self.layer_counts()?.iter().sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let arch = DecoderArch::default();
        assert_eq!(arch.layer_counts().unwrap(), vec![66, 336, 336, 336, 6]);
        assert_eq!(arch.count_params().unwrap(), 1080);
        assert_eq!(arch.output_side(), 64);
        assert_eq!(arch.latent_len(), 16);
        assert_eq!(DecoderArch::uniform(4, 6, 3, 64).unwrap(), arch);
    }

    #[test]
    fn inconsistent_chains_rejected() {
        let mut a = DecoderArch::default();
        a.widths[0] = 2;
        assert!(a.count_params().is_err());
        let mut b = DecoderArch::default();
        b.widths[2] = 0;
        assert!(b.count_params().is_err());
        let c = DecoderArch {
            kernel: 2,
            ..DecoderArch::default()
        };
        assert!(c.count_params().is_err());
        let d = DecoderArch {
            widths: vec![1, 1],
            ..DecoderArch::default()
        };
        assert!(d.count_params().is_err());
    }
}
