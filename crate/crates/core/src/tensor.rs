use crate::error::{ensure_finite, Error, Result};

/// Dense `tokens x channels x states` tensor, row-major.
///
/// The `channels * states` values of one token are contiguous, so a token row
/// is a slice over all lanes. The scan kernels walk the tree vertex by vertex
/// and update every lane of a vertex in one inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneTensor {
    tokens: usize,
    channels: usize,
    states: usize,
    data: Vec<f64>,
}

impl LaneTensor {
    pub fn zeros(tokens: usize, channels: usize, states: usize) -> Self {
        Self::filled(tokens, channels, states, 0.0)
    }

    pub fn filled(tokens: usize, channels: usize, states: usize, value: f64) -> Self {
        Self {
            tokens,
            channels,
            states,
            data: vec![value; tokens * channels * states],
        }
    }

    pub fn from_vec(tokens: usize, channels: usize, states: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != tokens * channels * states {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {tokens}x{channels}x{states} tensor",
                data.len()
            )));
        }
        Ok(Self {
            tokens,
            channels,
            states,
            data,
        })
    }

    pub fn from_fn(
        tokens: usize,
        channels: usize,
        states: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(tokens * channels * states);
        for i in 0..tokens {
            for c in 0..channels {
                for n in 0..states {
                    data.push(f(i, c, n));
                }
            }
        }
        Self {
            tokens,
            channels,
            states,
            data,
        }
    }

    #[inline]
    pub fn tokens(&self) -> usize {
        self.tokens
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn states(&self) -> usize {
        self.states
    }

    /// Number of independent scalar lanes (`channels * states`).
    #[inline]
    pub fn lanes(&self) -> usize {
        self.channels * self.states
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.tokens, self.channels, self.states)
    }

    #[inline]
    pub fn get(&self, i: usize, c: usize, n: usize) -> f64 {
        self.data[self.offset(i, c, n)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, c: usize, n: usize, value: f64) {
        let k = self.offset(i, c, n);
        self.data[k] = value;
    }

    #[inline]
    fn offset(&self, i: usize, c: usize, n: usize) -> usize {
        debug_assert!(i < self.tokens && c < self.channels && n < self.states);
        (i * self.channels + c) * self.states + n
    }

    /// All lanes of token `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.lanes();
        &self.data[i * w..(i + 1) * w]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.lanes();
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn ensure_finite(&self, what: &'static str) -> Result<()> {
        ensure_finite(what, &self.data)
    }

    /// Largest absolute elementwise difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "shape mismatch in max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
