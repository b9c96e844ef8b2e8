use crate::error::{ensure_finite, Error, Result};
use crate::lattice::FeatureMap;
use crate::tensor::LaneTensor;

/// Continuous selective-SSM parameters with diagonal (per channel, per state)
/// transitions.
///
/// Layouts, all row-major: `a` is `C x N`, `b` and `c_out` are `L x N`,
/// `d` has length `C` and `delta` is `L x C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousScanParams {
    pub tokens: usize,
    pub channels: usize,
    pub states: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c_out: Vec<f64>,
    pub d: Vec<f64>,
    pub delta: Vec<f64>,
}

impl ContinuousScanParams {
    pub fn validate(&self) -> Result<()> {
        let (l, c, n) = (self.tokens, self.channels, self.states);
        if l == 0 || c == 0 || n == 0 {
            return Err(Error::Invalid(format!("empty parameter shape {l}x{c}x{n}")));
        }
        let fields: [(&'static str, &[f64], usize); 5] = [
            ("A", &self.a, c * n),
            ("B", &self.b, l * n),
            ("C", &self.c_out, l * n),
            ("D", &self.d, c),
            ("delta", &self.delta, l * c),
        ];
        for (name, values, expected) in fields {
            if values.len() != expected {
                return Err(Error::Shape(format!(
                    "parameter {name} has {} values, expected {expected} for L={l} C={c} N={n}",
                    values.len()
                )));
            }
            ensure_finite(name, values)?;
        }
        if let Some(k) = self.delta.iter().position(|&d| d <= 0.0) {
            return Err(Error::Invalid(format!(
                "delta must be positive, got {} at flat index {k}",
                self.delta[k]
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn a_at(&self, c: usize, n: usize) -> f64 {
        self.a[c * self.states + n]
    }

    #[inline]
    pub fn b_at(&self, i: usize, n: usize) -> f64 {
        self.b[i * self.states + n]
    }

    #[inline]
    pub fn c_at(&self, i: usize, n: usize) -> f64 {
        self.c_out[i * self.states + n]
    }

    #[inline]
    pub fn delta_at(&self, i: usize, c: usize) -> f64 {
        self.delta[i * self.channels + c]
    }
}

/// Per-token, per-lane discrete transitions `a_bar` and input scalars `b_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteScanParams {
    pub a_bar: LaneTensor,
    pub b_bar: LaneTensor,
}

impl DiscreteScanParams {
    pub fn new(a_bar: LaneTensor, b_bar: LaneTensor) -> Result<Self> {
        super::check_same("b_bar", &a_bar, &b_bar)?;
        a_bar.ensure_finite("a_bar")?;
        b_bar.ensure_finite("b_bar")?;
        Ok(Self { a_bar, b_bar })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.a_bar.shape()
    }
}

/// Zero-order-hold transitions with the first-order input approximation:
/// `a_bar = exp(delta * A)`, `b_bar = delta * B`.
pub fn discretize(params: &ContinuousScanParams) -> Result<DiscreteScanParams> {
    params.validate()?;
    let (l, c, n) = (params.tokens, params.channels, params.states);
    let a_bar = LaneTensor::from_fn(l, c, n, |i, ch, s| {
        (params.delta_at(i, ch) * params.a_at(ch, s)).exp()
    });
    let b_bar = LaneTensor::from_fn(l, c, n, |i, ch, s| {
        params.delta_at(i, ch) * params.b_at(i, s)
    });
    DiscreteScanParams::new(a_bar, b_bar)
}

/// Gradients with respect to the continuous parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousGrads {
    pub d_a: Vec<f64>,
    pub d_b: Vec<f64>,
    pub d_c_out: Vec<f64>,
    pub d_d: Vec<f64>,
    pub d_delta: Vec<f64>,
}

/// Chain rule through [`discretize`]. Fills `d_a`, `d_b` and `d_delta`;
/// `d_c_out` and `d_d` come back zeroed.
pub fn discretize_backward(
    params: &ContinuousScanParams,
    discrete: &DiscreteScanParams,
    d_a_bar: &LaneTensor,
    d_b_bar: &LaneTensor,
) -> Result<ContinuousGrads> {
    super::check_same("d_a_bar", &discrete.a_bar, d_a_bar)?;
    super::check_same("d_b_bar", &discrete.b_bar, d_b_bar)?;
    let (l, c, n) = (params.tokens, params.channels, params.states);
    if discrete.shape() != (l, c, n) {
        return Err(Error::Shape(
            "discrete parameters do not match continuous ones".into(),
        ));
    }
    let mut g = ContinuousGrads {
        d_a: vec![0.0; c * n],
        d_b: vec![0.0; l * n],
        d_c_out: vec![0.0; l * n],
        d_d: vec![0.0; c],
        d_delta: vec![0.0; l * c],
    };
    for i in 0..l {
        for ch in 0..c {
            let dt = params.delta_at(i, ch);
            let mut dd = 0.0;
            for s in 0..n {
                let ab = discrete.a_bar.get(i, ch, s);
                let ga = d_a_bar.get(i, ch, s);
                let gb = d_b_bar.get(i, ch, s);
                // d(exp(dt*A))/dA = dt*a_bar, d/d(dt) = A*a_bar; d(dt*B)/dB = dt, d/d(dt) = B
                g.d_a[ch * n + s] += ga * dt * ab;
                g.d_b[i * n + s] += gb * dt;
                dd += ga * params.a_at(ch, s) * ab + gb * params.b_at(i, s);
            }
            g.d_delta[i * c + ch] = dd;
        }
    }
    Ok(g)
}

/// Normalization applied to the hidden states before the output projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormMode {
    /// Per-token RMS over all `C x N` hidden entries: `h / sqrt(mean(h^2) + eps)`.
    Rms {
        eps: f64,
    },
    Identity,
}

impl Default for NormMode {
    fn default() -> Self {
        NormMode::Rms { eps: 1e-6 }
    }
}

fn token_scale(norm: NormMode, row: &[f64]) -> f64 {
    match norm {
        NormMode::Identity => 1.0,
        NormMode::Rms { eps } => {
            let ms = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
            1.0 / (ms + eps).sqrt()
        }
    }
}

fn check_projection_shapes(h: &LaneTensor, p: &ContinuousScanParams, x: &FeatureMap) -> Result<()> {
    p.validate()?;
    let (l, c, n) = h.shape();
    if (l, c, n) != (p.tokens, p.channels, p.states) || x.len() != l || x.channels() != c {
        return Err(Error::Shape(format!(
            "hidden {:?}, params {}x{}x{}, features {}x{} disagree",
            h.shape(),
            p.tokens,
            p.channels,
            p.states,
            x.len(),
            x.channels()
        )));
    }
    Ok(())
}

/// `Y[i][c] = sum_n C[i][n] * Norm(h)[i][c][n] + D[c] * x[i][c]`.
pub fn output_projection(
    h: &LaneTensor,
    p: &ContinuousScanParams,
    x: &FeatureMap,
    norm: NormMode,
) -> Result<FeatureMap> {
    check_projection_shapes(h, p, x)?;
    let (l, c, n) = h.shape();
    let mut y = Vec::with_capacity(l * c);
    for i in 0..l {
        let scale = token_scale(norm, h.row(i));
        for ch in 0..c {
            let mut acc = 0.0;
            for s in 0..n {
                acc += p.c_at(i, s) * h.get(i, ch, s) * scale;
            }
            y.push(acc + p.d[ch] * x.get(i, ch));
        }
    }
    FeatureMap::new(y, l, c)
}

/// Local derivatives of [`output_projection`] for an upstream gradient `d_y`
/// (row-major `L x C`).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGrads {
    pub d_h: LaneTensor,
    pub d_c_out: Vec<f64>,
    pub d_d: Vec<f64>,
    /// Feedthrough contribution only (`D[c] * d_y`).
    pub d_x: Vec<f64>,
}

pub fn output_projection_backward(
    h: &LaneTensor,
    p: &ContinuousScanParams,
    x: &FeatureMap,
    norm: NormMode,
    d_y: &[f64],
) -> Result<ProjectionGrads> {
    check_projection_shapes(h, p, x)?;
    let (l, c, n) = h.shape();
    if d_y.len() != l * c {
        return Err(Error::Shape(format!(
            "d_y has {} values, expected {}",
            d_y.len(),
            l * c
        )));
    }
    let mut d_h = LaneTensor::zeros(l, c, n);
    let mut d_c_out = vec![0.0; l * n];
    let mut d_d = vec![0.0; c];
    let mut d_x = vec![0.0; l * c];
    let mut g_norm = vec![0.0; c * n];
    for i in 0..l {
        let row = h.row(i);
        let scale = token_scale(norm, row);
        for ch in 0..c {
            let gy = d_y[i * c + ch];
            d_d[ch] += gy * x.get(i, ch);
            d_x[i * c + ch] = gy * p.d[ch];
            for s in 0..n {
                d_c_out[i * n + s] += gy * row[ch * n + s] * scale;
                g_norm[ch * n + s] = gy * p.c_at(i, s);
            }
        }
        let out = d_h.row_mut(i);
        match norm {
            NormMode::Identity => out.copy_from_slice(&g_norm),
            NormMode::Rms { .. } => {
                // y_k = h_k * r with r = (mean(h^2) + eps)^(-1/2):
                // dh_j = r * (g_j - y_j * sum_k(g_k * y_k) / M)
                let m = row.len() as f64;
                let dot: f64 = g_norm.iter().zip(row).map(|(g, v)| g * v * scale).sum();
                for ((o, g), v) in out.iter_mut().zip(&g_norm).zip(row) {
                    *o = scale * (g - v * scale * dot / m);
                }
            }
        }
    }
    Ok(ProjectionGrads {
        d_h,
        d_c_out,
        d_d,
        d_x,
    })
}
