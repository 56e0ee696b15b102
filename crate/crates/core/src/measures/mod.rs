//! Per-mask complexity measures and their combination.
//!
//! Every measure maps a [`Mask`] into [0, 1], higher meaning more complex.

mod compression;
mod fft;

use std::fmt;
use std::str::FromStr;

pub use compression::{compression_complexity, deflate, inflate, DEFLATE_LEVEL};
pub use fft::{fft2d, fft_complexity, fft_in_place};

use crate::imaging::{fill_ratio, Mask};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Fill,
    Compression,
    Fft,
    Vae,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::Fill, Component::Compression, Component::Fft, Component::Vae];
    /// The measures that make up the default combined score.
    pub const COMBINED: [Component; 3] = [Component::Compression, Component::Fft, Component::Vae];

    pub fn name(self) -> &'static str {
        match self {
            Component::Fill => "fill",
            Component::Compression => "compression",
            Component::Fft => "fft",
            Component::Vae => "vae",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown measure `{s}` (expected fill, compression, fft or vae)")))
    }
}

/// Parses a comma-separated measure list, rejecting duplicates.
pub fn parse_components(list: &str) -> Result<Vec<Component>> {
    let mut out: Vec<Component> = Vec::new();
    for part in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let c: Component = part.parse()?;
        if out.contains(&c) {
            return Err(Error::Parameter(format!("measure `{c}` listed twice")));
        }
        out.push(c);
    }
    if out.is_empty() {
        return Err(Error::Parameter("empty measure list".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub id: String,
    pub fill: f64,
    pub compression: f64,
    pub fft: f64,
    pub vae: Option<f64>,
}

impl ScoreVector {
    /// Scores every non-VAE measure; `vae` is attached separately.
    pub fn of(m: &Mask) -> Self {
        ScoreVector {
            id: m.id().to_owned(),
            fill: fill_ratio(m),
            compression: compression_complexity(m),
            fft: fft_complexity(m),
            vae: None,
        }
    }

    pub fn get(&self, c: Component) -> Option<f64> {
        match c {
            Component::Fill => Some(self.fill),
            Component::Compression => Some(self.compression),
            Component::Fft => Some(self.fft),
            Component::Vae => self.vae,
        }
    }

    fn require(&self, c: Component) -> Result<f64> {
        self.get(c).ok_or(Error::MissingComponent(c.name()))
    }
}

fn check_components(components: &[Component]) -> Result<()> {
    if components.is_empty() {
        return Err(Error::Parameter("no components to combine".into()));
    }
    Ok(())
}

/// `‖v‖ / √n` over the chosen components, so the result stays in [0, 1].
pub fn combine(scores: &ScoreVector, components: &[Component]) -> Result<f64> {
    check_components(components)?;
    let mut sq = 0.0;
    for &c in components {
        let v = scores.require(c)?;
        sq += v * v;
    }
    Ok((sq / components.len() as f64).sqrt())
}

/// [`combine`] after rescaling each component to [0, 1] over the batch.
///
/// A component that is constant over the batch contributes 0. Needs at
/// least two shapes since equalization is a property of the set.
pub fn combine_equalized(all: &[ScoreVector], components: &[Component]) -> Result<Vec<f64>> {
    check_components(components)?;
    if all.len() < 2 {
        return Err(Error::Parameter(format!(
            "equalized combination needs at least 2 shapes, got {}",
            all.len()
        )));
    }
    let mut sq = vec![0.0; all.len()];
    for &c in components {
        let vals = all.iter().map(|s| s.require(c)).collect::<Result<Vec<f64>>>()?;
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > min {
            for (acc, v) in sq.iter_mut().zip(&vals) {
                let e = (v - min) / (max - min);
                *acc += e * e;
            }
        }
    }
    let n = components.len() as f64;
    Ok(sq.into_iter().map(|s| (s / n).sqrt()).collect())
}

/// Anything a shape set can be ranked by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Single(Component),
    Combined,
    CombinedEq,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Single(c) => c.name(),
            Measure::Combined => "combined",
            Measure::CombinedEq => "combined_eq",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "combined" => Ok(Measure::Combined),
            "combined_eq" => Ok(Measure::CombinedEq),
            _ => s.parse().map(Measure::Single),
        }
    }
}

/// Values of `measure` for every shape; `components` feeds the combined forms.
pub fn measure_values(scores: &[ScoreVector], measure: Measure, components: &[Component]) -> Result<Vec<f64>> {
    match measure {
        Measure::Single(c) => scores.iter().map(|s| s.require(c)).collect(),
        Measure::Combined => scores.iter().map(|s| combine(s, components)).collect(),
        Measure::CombinedEq => combine_equalized(scores, components),
    }
}
