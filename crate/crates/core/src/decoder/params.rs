use std::ops::Range;

use crate::error::{Error, Result};

use super::arch::DecoderArch;

/// Offsets of each parameter group inside the flat vector. Order: for each
/// up-block, the kernel (k_i × k_{i+1} × n × n, input channel slowest), the
/// normalization scales (k_{i+1}) and shifts (k_{i+1}); then the head
/// (k_L × k_{L+1}, input channel slowest).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    pub blocks: Vec<BlockLayout>,
    pub head: Range<usize>,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockLayout {
    pub kernel: Range<usize>,
    pub scale: Range<usize>,
    pub shift: Range<usize>,
}

impl ParamLayout {
    pub fn new(arch: &DecoderArch) -> Result<Self> {
        arch.validate()?;
        let n2 = arch.kernel * arch.kernel;
        let mut at = 0;
        let mut take = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        let blocks = arch
            .widths
            .windows(2)
            .take(arch.n_blocks())
            .map(|w| BlockLayout {
                kernel: take(w[0] * w[1] * n2),
                scale: take(w[1]),
                shift: take(w[1]),
            })
            .collect();
        let l = arch.n_blocks();
        let head = take(arch.widths[l] * arch.widths[l + 1]);
        Ok(Self {
            blocks,
            head,
            total: at,
        })
    }
}

/// Shared decoder weights θ as one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams {
    layout: ParamLayout,
    values: Vec<f64>,
}

impl DecoderParams {
    /// All kernels zero, normalization scale 1 and shift 0.
    pub fn zeros(arch: &DecoderArch) -> Result<Self> {
        let layout = ParamLayout::new(arch)?;
        let mut values = vec![0.0; layout.total];
        for b in &layout.blocks {
            values[b.scale.clone()].fill(1.0);
        }
        Ok(Self { layout, values })
    }

    pub fn from_values(arch: &DecoderArch, values: Vec<f64>) -> Result<Self> {
        let layout = ParamLayout::new(arch)?;
        if values.len() != layout.total {
            return Err(Error::invalid(format!(
                "arch needs {} parameters, got {}",
                layout.total,
                values.len()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_arch(&self, arch: &DecoderArch) -> Result<()> {
        if ParamLayout::new(arch)? != self.layout {
            return Err(Error::invalid(
                "decoder parameters do not match the architecture",
            ));
        }
        Ok(())
    }
}

/// Per-emitter latent codes Z = [z_1 … z_R], each of length D_0²; stored
/// emitter-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCodes {
    code_len: usize,
    data: Vec<f64>,
}

impl LatentCodes {
    pub fn new(code_len: usize, data: Vec<f64>) -> Result<Self> {
        if code_len == 0 || data.is_empty() || !data.len().is_multiple_of(code_len) {
            return Err(Error::invalid(format!(
                "{} latent values do not split into codes of length {code_len}",
                data.len()
            )));
        }
        Ok(Self { code_len, data })
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    pub fn emitters(&self) -> usize {
        self.data.len() / self.code_len
    }

    pub fn code(&self, r: usize) -> &[f64] {
        &self.data[r * self.code_len..(r + 1) * self.code_len]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}
