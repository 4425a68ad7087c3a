//! Uniformly sampled multi-channel time series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    t_s: f64,
    t0: f64,
    names: Vec<String>,
    channels: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(t_s: f64) -> Result<Self> {
        Self::with_start(t_s, 0.0)
    }

    pub fn with_start(t_s: f64, t0: f64) -> Result<Self> {
        if !(t_s > 0.0) || !t_s.is_finite() {
            return Err(Error::Domain(format!("sample time must be positive, got {t_s}")));
        }
        Ok(Self {
            t_s,
            t0,
            names: Vec::new(),
            channels: Vec::new(),
        })
    }

    /// Adds a channel. The first channel fixes the trace length.
    pub fn push_channel(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if self.names.iter().any(|n| n == &name) {
            return Err(Error::Domain(format!("duplicate channel `{name}`")));
        }
        if !self.channels.is_empty() && values.len() != self.len() {
            return Err(Error::Dimension(format!(
                "channel `{name}` has {} samples, trace has {}",
                values.len(),
                self.len()
            )));
        }
        self.names.push(name);
        self.channels.push(values);
        Ok(())
    }

    pub fn t_s(&self) -> f64 {
        self.t_s
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.t_s
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.channels[i].as_slice())
    }

    pub fn channel_or_err(&self, name: &str) -> Result<&[f64]> {
        self.channel(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn channel_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&mut self.channels[i])
    }

    pub fn value(&self, name: &str, k: usize) -> Result<f64> {
        Ok(self.channel_or_err(name)?[k])
    }

    pub fn channels(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.channels.iter().map(Vec::as_slice))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_channels() {
        let mut tr = Trace::new(0.1).unwrap();
        tr.push_channel("a", vec![0.0, 1.0]).unwrap();
        assert!(tr.push_channel("b", vec![0.0]).is_err());
        assert!(tr.push_channel("a", vec![0.0, 1.0]).is_err());
        assert_eq!(tr.len(), 2);
        assert!((tr.time(1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_sample_time() {
        assert!(Trace::new(0.0).is_err());
        assert!(Trace::new(-1.0).is_err());
    }
}
