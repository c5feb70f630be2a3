//! Fully connected scorer: sparse input, rectifier hidden layers, linear scalar output.

use std::fmt::Write as _;

use rand::Rng;

use super::TrainError;

pub const PARAMS_MAGIC: &str = "dynrank-mlp";
pub const PARAMS_VERSION: u32 = 1;

pub const DEFAULT_HIDDEN: [usize; 3] = [32, 16, 8];

/// One dense layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.inputs + inp]
    }
}

/// Parameters of the pre-ranker. Both branches of a training pair are
/// evaluated with the same instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

/// Per-layer pre-activations and activations of one forward pass.
pub(crate) struct Trace {
    /// `pre[l]` is the pre-activation of layer `l`.
    pre: Vec<Vec<f64>>,
    /// `act[l]` is the output of layer `l` (rectified for hidden layers).
    act: Vec<Vec<f64>>,
}

impl Trace {
    pub(crate) fn output(&self) -> f64 {
        self.act.last().map(|a| a[0]).unwrap_or(0.0)
    }
}

impl MlpParams {
    /// All-zero network of the given shape.
    pub fn zeros(m_feat: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut inputs = m_feat;
        for &h in hidden.iter().chain(std::iter::once(&1)) {
            layers.push(Dense::zeros(inputs, h));
            inputs = h;
        }
        MlpParams { layers }
    }

    /// Every weight and bias uniform in `[-half_width, half_width]`.
    pub fn init_uniform<R: Rng + ?Sized>(
        m_feat: usize,
        hidden: &[usize],
        half_width: f64,
        rng: &mut R,
    ) -> Self {
        let mut params = Self::zeros(m_feat, hidden);
        if half_width > 0.0 {
            params.for_each_param_mut(|p| *p = rng.random_range(-half_width..=half_width));
        }
        params
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.outputs)
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(&mut f);
            layer.bias.iter_mut().for_each(&mut f);
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params());
        let mut it = values.iter();
        self.for_each_param_mut(|p| *p = *it.next().unwrap());
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    /// `self += scale * other`, shape-for-shape.
    pub(crate) fn add_scaled(&mut self, other: &MlpParams, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
    }

    pub(crate) fn zeros_like(&self) -> MlpParams {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    fn check_input(&self, features: &[(usize, f64)]) -> Result<(), TrainError> {
        let m = self.input_dim();
        match features.iter().find(|(i, _)| *i >= m) {
            Some(&(i, _)) => Err(TrainError::DimensionMismatch {
                expected: m,
                index: i,
            }),
            None => Ok(()),
        }
    }

    /// Raw score of one sparse feature vector.
    pub fn forward(&self, features: &[(usize, f64)]) -> Result<f64, TrainError> {
        Ok(self.trace(features)?.output())
    }

    pub(crate) fn trace(&self, features: &[(usize, f64)]) -> Result<Trace, TrainError> {
        self.check_input(features)?;
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut act: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.clone();
            if l == 0 {
                for (o, zo) in z.iter_mut().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    *zo += features.iter().map(|&(i, v)| row[i] * v).sum::<f64>();
                }
            } else {
                let input = &act[l - 1];
                for (o, zo) in z.iter_mut().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    *zo += row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
                }
            }
            let a = if l == last {
                z.clone()
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            pre.push(z);
            act.push(a);
        }
        Ok(Trace { pre, act })
    }

    /// Accumulates `upstream * d(output)/d(params)` into `grad`.
    pub(crate) fn backward(
        &self,
        features: &[(usize, f64)],
        trace: &Trace,
        upstream: f64,
        grad: &mut MlpParams,
    ) {
        let last = self.layers.len() - 1;
        let mut delta = vec![upstream];
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let g = &mut grad.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
            }
            if l == 0 {
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for &(i, v) in features {
                        row[i] += d * v;
                    }
                }
                break;
            }
            let input = &trace.act[l - 1];
            let mut next = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let base = o * layer.inputs;
                for j in 0..layer.inputs {
                    g.weights[base + j] += d * input[j];
                    next[j] += d * layer.weights[base + j];
                }
            }
            // rectifier derivative, 0 at the kink
            for (n, &z) in next.iter_mut().zip(&trace.pre[l - 1]) {
                if z <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
    }

    /// Versioned text form. Values use the shortest decimal that round-trips.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{PARAMS_MAGIC} {PARAMS_VERSION}");
        let _ = writeln!(out, "layers {}", self.layers.len());
        for layer in &self.layers {
            let _ = writeln!(out, "dense {} {}", layer.inputs, layer.outputs);
            for row in layer.weights.chunks(layer.inputs.max(1)) {
                let _ = writeln!(out, "{}", join(row));
            }
            let _ = writeln!(out, "{}", join(&layer.bias));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TrainError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines.next().map(|(n, l)| (n + 1, l)).ok_or_else(|| {
                TrainError::Format(format!("unexpected end of input, wanted {what}"))
            })
        };
        let bad = |n: usize, m: String| TrainError::Format(format!("line {n}: {m}"));

        let (n, header) = next("header")?;
        let version = header
            .strip_prefix(PARAMS_MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| bad(n, format!("expected `{PARAMS_MAGIC} <version>`")))?;
        if version != PARAMS_VERSION {
            return Err(bad(n, format!("unsupported version {version}")));
        }
        let (n, count) = next("layer count")?;
        let count = count
            .strip_prefix("layers ")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| bad(n, "expected `layers <count>`".into()))?;
        if count == 0 {
            return Err(bad(n, "network needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, shape) = next("layer shape")?;
            let dims: Vec<usize> = shape
                .strip_prefix("dense ")
                .map(|s| {
                    s.split_whitespace()
                        .filter_map(|x| x.parse().ok())
                        .collect()
                })
                .unwrap_or_default();
            if dims.len() != 2 {
                return Err(bad(n, "expected `dense <inputs> <outputs>`".into()));
            }
            let (inputs, outputs) = (dims[0], dims[1]);
            if let Some(prev) = layers.last().map(|l: &Dense| l.outputs) {
                if prev != inputs {
                    return Err(bad(
                        n,
                        format!("layer input {inputs} != previous output {prev}"),
                    ));
                }
            }
            let mut weights = Vec::with_capacity(inputs * outputs);
            for _ in 0..outputs {
                let (n, row) = next("weight row")?;
                let row = parse_row(row).map_err(|m| bad(n, m))?;
                if row.len() != inputs {
                    return Err(bad(
                        n,
                        format!("expected {inputs} weights, got {}", row.len()),
                    ));
                }
                weights.extend(row);
            }
            let (n, bias) = next("bias row")?;
            let bias = parse_row(bias).map_err(|m| bad(n, m))?;
            if bias.len() != outputs {
                return Err(bad(
                    n,
                    format!("expected {outputs} biases, got {}", bias.len()),
                ));
            }
            layers.push(Dense {
                inputs,
                outputs,
                weights,
                bias,
            });
        }
        if layers.last().map(|l| l.outputs) != Some(1) {
            return Err(TrainError::Format("output layer must have width 1".into()));
        }
        Ok(MlpParams { layers })
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_row(line: &str) -> Result<Vec<f64>, String> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent dense-matrix forward pass used as an oracle.
    fn oracle_forward(params: &MlpParams, features: &[(usize, f64)]) -> f64 {
        let mut x = vec![0.0; params.input_dim()];
        for &(i, v) in features {
            x[i] = v;
        }
        let n = params.layers.len();
        for (l, layer) in params.layers.iter().enumerate() {
            let mut y = vec![0.0; layer.outputs];
            for o in 0..layer.outputs {
                let mut acc = layer.bias[o];
                for i in 0..layer.inputs {
                    acc += layer.weight(o, i) * x[i];
                }
                y[o] = if l + 1 < n { acc.max(0.0) } else { acc };
            }
            x = y;
        }
        x[0]
    }

    #[test]
    fn zero_network_scores_zero() {
        let p = MlpParams::zeros(4, &DEFAULT_HIDDEN);
        assert_eq!(p.forward(&[(0, 3.0), (3, -2.0)]).unwrap(), 0.0);
        assert_eq!(
            p.num_params(),
            4 * 32 + 32 + 32 * 16 + 16 + 16 * 8 + 8 + 8 + 1
        );
    }

    #[test]
    fn identity_path() {
        let mut p = MlpParams::zeros(2, &[1, 1, 1]);
        for l in &mut p.layers {
            l.weights[0] = 1.0;
        }
        assert_eq!(p.forward(&[(0, 2.5)]).unwrap(), 2.5);
        assert_eq!(p.forward(&[(0, 2.5), (1, 9.0)]).unwrap(), 2.5);
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = MlpParams::init_uniform(10, &DEFAULT_HIDDEN, 0.7, &mut rng);
            let mut feats = Vec::new();
            for i in 0..10 {
                if rng.random_bool(0.6) {
                    feats.push((i, rng.random_range(-2.0..2.0)));
                }
            }
            let a = p.forward(&feats).unwrap();
            let b = oracle_forward(&p, &feats);
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300), "{a} vs {b}");
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = MlpParams::zeros(3, &[2]);
        assert!(matches!(
            p.forward(&[(3, 1.0)]),
            Err(TrainError::DimensionMismatch {
                expected: 3,
                index: 3
            })
        ));
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = MlpParams::init_uniform(6, &[5, 4, 3], 1.3, &mut rng);
        let back = MlpParams::from_text(&p.to_text()).unwrap();
        assert_eq!(back, p);
        let f = [(1, 0.25), (5, -3.5)];
        assert_eq!(
            p.forward(&f).unwrap().to_bits(),
            back.forward(&f).unwrap().to_bits()
        );
    }

    #[test]
    fn text_format_errors() {
        assert!(MlpParams::from_text("").is_err());
        assert!(MlpParams::from_text("dynrank-mlp 9\nlayers 1\n").is_err());
        let p = MlpParams::zeros(2, &[]);
        let text = p.to_text().replace("0 0\n", "0\n");
        assert!(MlpParams::from_text(&text).is_err());
    }
}
