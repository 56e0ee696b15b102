//! Layer tables for the autoencoders.

use crate::numerics::kernels::{conv2d_output_size, tconv2d_output_size};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum LayerKind {
    Conv2d = 1,
    TConv2d = 2,
    MaxPool2d = 3,
    Linear = 4,
    Relu = 5,
    Sigmoid = 6,
    Flatten = 7,
    Reshape = 8,
}

impl LayerKind {
    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        use LayerKind::*;
        Some(match code {
            1 => Conv2d,
            2 => TConv2d,
            3 => MaxPool2d,
            4 => Linear,
            5 => Relu,
            6 => Sigmoid,
            7 => Flatten,
            8 => Reshape,
            _ => return None,
        })
    }

    pub fn has_params(self) -> bool {
        matches!(self, LayerKind::Conv2d | LayerKind::TConv2d | LayerKind::Linear)
    }
}

/// One row of a layer table.
///
/// Field use by kind:
/// - `Conv2d`/`TConv2d`: all fields;
/// - `MaxPool2d`: `kernel` is the window (stride equals the window);
/// - `Linear`: `in_channels` → `out_channels` features;
/// - `Reshape`: target `[out_channels, kernel.0, kernel.1]`;
/// - `Relu`, `Sigmoid`, `Flatten`: no fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerSpec {
    fn bare(kind: LayerKind) -> Self {
        LayerSpec {
            kind,
            kernel: (0, 0),
            stride: (0, 0),
            in_channels: 0,
            out_channels: 0,
        }
    }

    pub fn conv2d(cin: usize, cout: usize, k: usize, s: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Conv2d,
            kernel: (k, k),
            stride: (s, s),
            in_channels: cin,
            out_channels: cout,
        }
    }

    pub fn tconv2d(cin: usize, cout: usize, k: usize, s: usize) -> Self {
        LayerSpec {
            kind: LayerKind::TConv2d,
            ..Self::conv2d(cin, cout, k, s)
        }
    }

    pub fn maxpool2d(window: usize) -> Self {
        LayerSpec {
            kernel: (window, window),
            stride: (window, window),
            ..Self::bare(LayerKind::MaxPool2d)
        }
    }

    pub fn linear(din: usize, dout: usize) -> Self {
        LayerSpec {
            in_channels: din,
            out_channels: dout,
            ..Self::bare(LayerKind::Linear)
        }
    }

    pub fn relu() -> Self {
        Self::bare(LayerKind::Relu)
    }

    pub fn sigmoid() -> Self {
        Self::bare(LayerKind::Sigmoid)
    }

    pub fn flatten() -> Self {
        Self::bare(LayerKind::Flatten)
    }

    pub fn reshape(c: usize, h: usize, w: usize) -> Self {
        LayerSpec {
            kernel: (h, w),
            out_channels: c,
            ..Self::bare(LayerKind::Reshape)
        }
    }

    /// Weight shape and fan-in for parameterized layers.
    pub fn weight_shape(&self) -> Option<(Vec<usize>, usize)> {
        let (kh, kw) = self.kernel;
        let (i, o) = (self.in_channels, self.out_channels);
        match self.kind {
            LayerKind::Conv2d => Some((vec![o, i, kh, kw], i * kh * kw)),
            LayerKind::TConv2d => Some((vec![i, o, kh, kw], i * kh * kw)),
            LayerKind::Linear => Some((vec![i, o], i)),
            _ => None,
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let err = |why: String| Err(Error::Dimension(format!("{:?} layer: {why}", self.kind)));
        let numel: usize = input.iter().product();
        match self.kind {
            LayerKind::Conv2d | LayerKind::TConv2d | LayerKind::MaxPool2d => {
                let &[c, h, w] = input else {
                    return err(format!("needs a C×H×W input, got {input:?}"));
                };
                let (kh, kw) = self.kernel;
                let (sh, sw) = self.stride;
                if kh == 0 || kw == 0 || sh == 0 || sw == 0 {
                    return err("kernel and stride must be ≥ 1".into());
                }
                match self.kind {
                    LayerKind::MaxPool2d => {
                        if kh > h || kw > w {
                            return err(format!("window {kh}×{kw} exceeds {h}×{w}"));
                        }
                        Ok(vec![c, h / kh, w / kw])
                    }
                    _ if c != self.in_channels => err(format!("expects {} channels, got {c}", self.in_channels)),
                    LayerKind::Conv2d => match (conv2d_output_size(h, kh, sh), conv2d_output_size(w, kw, sw)) {
                        (Some(oh), Some(ow)) => Ok(vec![self.out_channels, oh, ow]),
                        _ => err(format!("kernel {kh}×{kw} exceeds {h}×{w}")),
                    },
                    _ => Ok(vec![
                        self.out_channels,
                        tconv2d_output_size(h, kh, sh),
                        tconv2d_output_size(w, kw, sw),
                    ]),
                }
            }
            LayerKind::Linear => {
                if input.len() != 1 || input[0] != self.in_channels {
                    return err(format!("expects [{}], got {input:?}", self.in_channels));
                }
                Ok(vec![self.out_channels])
            }
            LayerKind::Relu | LayerKind::Sigmoid => Ok(input.to_vec()),
            LayerKind::Flatten => Ok(vec![numel]),
            LayerKind::Reshape => {
                let target = vec![self.out_channels, self.kernel.0, self.kernel.1];
                if target.iter().product::<usize>() != numel {
                    return err(format!("cannot reshape {input:?} into {target:?}"));
                }
                Ok(target)
            }
        }
    }
}

/// Full description of an encoder/decoder pair.
///
/// The encoder table is a sequential trunk followed by exactly two `Linear`
/// heads (mean, then log-variance) that both read the trunk output. The
/// trunk begins with a `Reshape` giving the input image geometry. The
/// decoder table is sequential from the latent vector to a `1×H×W` map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
}

impl Architecture {
    /// The shipped 64×64 architecture.
    ///
    /// Encoder: three conv3×3 + ReLU + maxpool2 stages (1→16→32→64 channels)
    /// reduce 64×64 to 6×6×64 (64→62→31→29→14→12→6). Decoder: linear to
    /// 2304, reshape to 64×6×6, five ReLU transposed convolutions
    /// (6→13→27→55→57→59) and a final 6×6 transposed convolution with
    /// sigmoid to 64×64.
    pub fn standard(latent_dim: usize) -> Self {
        use LayerSpec as L;
        let encoder = vec![
            L::reshape(1, 64, 64),
            L::conv2d(1, 16, 3, 1),
            L::relu(),
            L::maxpool2d(2),
            L::conv2d(16, 32, 3, 1),
            L::relu(),
            L::maxpool2d(2),
            L::conv2d(32, 64, 3, 1),
            L::relu(),
            L::maxpool2d(2),
            L::flatten(),
            L::linear(2304, latent_dim),
            L::linear(2304, latent_dim),
        ];
        let decoder = vec![
            L::linear(latent_dim, 2304),
            L::reshape(64, 6, 6),
            L::tconv2d(64, 64, 3, 2),
            L::relu(),
            L::tconv2d(64, 32, 3, 2),
            L::relu(),
            L::tconv2d(32, 16, 3, 2),
            L::relu(),
            L::tconv2d(16, 16, 3, 1),
            L::relu(),
            L::tconv2d(16, 8, 3, 1),
            L::relu(),
            L::tconv2d(8, 1, 6, 1),
            L::sigmoid(),
        ];
        Architecture { encoder, decoder }
    }

    /// A 4×4-input miniature with every layer kind, for gradient checks.
    pub fn toy(latent_dim: usize) -> Self {
        use LayerSpec as L;
        Architecture {
            encoder: vec![
                L::reshape(1, 4, 4),
                L::conv2d(1, 3, 2, 1),
                L::relu(),
                L::maxpool2d(2),
                L::flatten(),
                L::linear(3, latent_dim),
                L::linear(3, latent_dim),
            ],
            decoder: vec![
                L::linear(latent_dim, 16),
                L::reshape(4, 2, 2),
                L::tconv2d(4, 2, 2, 1),
                L::relu(),
                L::tconv2d(2, 1, 2, 1),
                L::sigmoid(),
            ],
        }
    }

    pub fn trunk(&self) -> &[LayerSpec] {
        &self.encoder[..self.encoder.len().saturating_sub(2)]
    }

    pub fn heads(&self) -> (&LayerSpec, &LayerSpec) {
        let n = self.encoder.len();
        (&self.encoder[n - 2], &self.encoder[n - 1])
    }

    /// Input geometry `(C, H, W)` from the leading reshape.
    pub fn input_shape(&self) -> [usize; 3] {
        let r = &self.encoder[0];
        [r.out_channels, r.kernel.0, r.kernel.1]
    }

    pub fn input_len(&self) -> usize {
        self.input_shape().iter().product()
    }

    pub fn latent_dim(&self) -> usize {
        self.heads().0.out_channels
    }

    /// Checks every table constraint and returns per-layer output shapes of
    /// (trunk, decoder).
    pub fn validate(&self) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
        let bad = |m: &str| Err(Error::Dimension(format!("architecture: {m}")));
        if self.encoder.len() < 4 {
            return bad("encoder needs a reshape, a trunk and two heads");
        }
        if self.encoder[0].kind != LayerKind::Reshape {
            return bad("encoder must start with a reshape");
        }
        let (mean, logvar) = self.heads();
        if mean.kind != LayerKind::Linear || logvar.kind != LayerKind::Linear || mean != logvar {
            return bad("encoder must end with two identical linear heads");
        }
        for l in self.encoder.iter().chain(&self.decoder) {
            if matches!(l.kind, LayerKind::Conv2d | LayerKind::TConv2d)
                && (l.kernel.0 == 0 || l.kernel.1 == 0 || l.stride.0 == 0 || l.stride.1 == 0)
            {
                return bad("conv kernels and strides must be ≥ 1");
            }
        }
        let [c, h, w] = self.input_shape();
        let mut shape = vec![c * h * w];
        let mut trunk_shapes = Vec::new();
        for l in self.trunk() {
            shape = l.output_shape(&shape)?;
            trunk_shapes.push(shape.clone());
        }
        mean.output_shape(&shape)?;
        let mut shape = vec![mean.out_channels];
        let mut dec_shapes = Vec::new();
        for l in &self.decoder {
            shape = l.output_shape(&shape)?;
            dec_shapes.push(shape.clone());
        }
        if shape.iter().product::<usize>() != c * h * w {
            return bad(&format!("decoder ends at {shape:?}, input is {:?}", [c, h, w]));
        }
        Ok((trunk_shapes, dec_shapes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_stack_reaches_stated_sizes() {
        let arch = Architecture::standard(16);
        let (trunk, dec) = arch.validate().unwrap();
        let before_flatten = &trunk[trunk.len() - 2];
        assert_eq!(before_flatten, &vec![64, 6, 6]);
        assert_eq!(dec.last().unwrap(), &vec![1, 64, 64]);
        let spatial: Vec<usize> = trunk.iter().filter(|s| s.len() == 3).map(|s| s[1]).collect();
        assert_eq!(spatial, [64, 62, 62, 31, 29, 29, 14, 12, 12, 6]);
        let dec_spatial: Vec<usize> = dec
            .iter()
            .zip(&arch.decoder)
            .filter(|(_, l)| l.kind == LayerKind::TConv2d)
            .map(|(s, _)| s[1])
            .collect();
        assert_eq!(dec_spatial, [13, 27, 55, 57, 59, 64]);
        let relu_tconvs = arch
            .decoder
            .windows(2)
            .filter(|w| w[0].kind == LayerKind::TConv2d && w[1].kind == LayerKind::Relu)
            .count();
        assert_eq!(relu_tconvs, 5);
    }

    #[test]
    fn toy_validates() {
        Architecture::toy(2).validate().unwrap();
    }

    #[test]
    fn kind_codes_roundtrip() {
        for code in 1..=8 {
            assert_eq!(LayerKind::from_code(code).unwrap().code(), code);
        }
        assert!(LayerKind::from_code(0).is_none());
    }

    #[test]
    fn broken_tables_rejected() {
        let mut arch = Architecture::standard(16);
        arch.decoder.pop();
        assert!(arch.validate().is_ok(), "sigmoid removal keeps shape");
        arch.decoder.pop();
        assert!(arch.validate().is_err());

        let mut arch = Architecture::standard(16);
        arch.encoder[1].stride = (0, 0);
        assert!(arch.validate().is_err());
    }
}
