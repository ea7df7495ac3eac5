//! Frequency-grid payloads shared by every sweep, fit and file format.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl ChannelData {
    pub fn len(&self) -> usize {
        match self {
            ChannelData::Real(v) => v.len(),
            ChannelData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub label: String,
    pub data: ChannelData,
    /// One-standard-error uncertainty per sample, when known.
    pub sigma: Option<Vec<f64>>,
}

/// Samples on an angular-frequency grid (rad/s), one or more labelled channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    omega: Vec<f64>,
    channels: Vec<Channel>,
}

impl Spectrum {
    /// Empty spectrum on `omega`; the grid must be strictly increasing.
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("omega", "frequency grid must be strictly increasing"));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("omega", "frequency grid contains non-finite values"));
        }
        Ok(Spectrum {
            omega,
            channels: Vec::new(),
        })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn push_channel(&mut self, channel: Channel) -> Result<()> {
        if channel.data.len() != self.omega.len() {
            return Err(Error::invalid(
                channel.label.clone(),
                format!(
                    "channel has {} samples, grid has {}",
                    channel.data.len(),
                    self.omega.len()
                ),
            ));
        }
        if let Some(s) = &channel.sigma {
            if s.len() != self.omega.len() {
                return Err(Error::invalid(
                    channel.label.clone(),
                    "uncertainty column length differs from grid",
                ));
            }
        }
        if self.channels.iter().any(|c| c.label == channel.label) {
            return Err(Error::invalid(channel.label.clone(), "duplicate channel label"));
        }
        self.channels.push(channel);
        Ok(())
    }

    pub fn with_real(mut self, label: &str, data: Vec<f64>) -> Result<Self> {
        self.push_channel(Channel {
            label: label.to_string(),
            data: ChannelData::Real(data),
            sigma: None,
        })?;
        Ok(self)
    }

    pub fn with_complex(mut self, label: &str, data: Vec<Complex64>) -> Result<Self> {
        self.push_channel(Channel {
            label: label.to_string(),
            data: ChannelData::Complex(data),
            sigma: None,
        })?;
        Ok(self)
    }

    pub fn channel(&self, label: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.label == label)
    }

    pub fn real(&self, label: &str) -> Option<&[f64]> {
        match self.channel(label).map(|c| &c.data) {
            Some(ChannelData::Real(v)) => Some(v),
            _ => None,
        }
    }

    pub fn complex(&self, label: &str) -> Option<&[Complex64]> {
        match self.channel(label).map(|c| &c.data) {
            Some(ChannelData::Complex(v)) => Some(v),
            _ => None,
        }
    }

    /// First real channel, the common case for single-trace measurements.
    pub fn first_real(&self) -> Option<(&str, &[f64])> {
        self.channels.iter().find_map(|c| match &c.data {
            ChannelData::Real(v) => Some((c.label.as_str(), v.as_slice())),
            _ => None,
        })
    }
}

/// Linear or logarithmic grid of `points` samples between `start` and `stop`.
pub fn grid(start: f64, stop: f64, points: usize, log: bool) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::invalid("points", "a grid needs at least two points"));
    }
    if !(stop > start) {
        return Err(Error::invalid("stop", "grid stop must exceed start"));
    }
    if log && start <= 0.0 {
        return Err(Error::invalid("start", "logarithmic grid requires start > 0"));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let t = i as f64 / last;
            // endpoints exactly as given
            if i == 0 {
                start
            } else if i == points - 1 {
                stop
            } else if log {
                (start.ln() + t * (stop.ln() - start.ln())).exp()
            } else {
                start + t * (stop - start)
            }
        })
        .collect())
}

/// Trapezoidal integral of `y` over `x`.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}
