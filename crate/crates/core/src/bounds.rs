//! Sound per-neuron activation ranges by interval-bound propagation, and the
//! binning parameters derived from them.
//!
//! Every supported activation is monotone, so the image of an interval is the
//! interval between the images of its endpoints. The affine part splits each
//! weight by sign. Endpoints are not outward-rounded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InputRange, Network};

/// A closed interval `[lo, hi]` bounding one neuron's value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronInterval {
    pub lo: f64,
    pub hi: f64,
}

impl NeuronInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "[{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.lo - tol <= x && x <= self.hi + tol
    }
}

/// Parameters `(c, Δ, N)` of the binning function over `[c, c + (N+1)Δ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub c: f64,
    pub delta: f64,
    pub n: u32,
}

impl BinningSpec {
    pub fn new(c: f64, delta: f64, n: u32) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidArgument(format!("binning offset c = {c} is not finite")));
        }
        check_delta(delta)?;
        Ok(Self { c, delta, n })
    }

    /// Number of bins, `N + 1`.
    pub fn bins(&self) -> usize {
        self.n as usize + 1
    }

    /// Upper end of the binning domain, `c + (N+1)Δ`.
    pub fn domain_hi(&self) -> f64 {
        self.c + (self.n as f64 + 1.0) * self.delta
    }

    /// Upper end of the range guaranteed to contain activations, `c + NΔ`.
    pub fn covered_hi(&self) -> f64 {
        self.c + self.n as f64 * self.delta
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bin width must be positive and finite, got {delta}"
        )));
    }
    Ok(())
}

/// Work done by one propagation, for checking the single-pass cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PropagationCost {
    /// Neurons whose interval was computed.
    pub neurons: usize,
    /// Weight terms accumulated.
    pub weight_terms: usize,
}

/// Intervals of every neuron at `layer` over the network's whole input box.
pub fn propagate_intervals(net: &Network, layer: usize) -> Result<Vec<NeuronInterval>> {
    let input = vec![net.input_range(); net.input_dim()];
    Ok(propagate_box(net, layer, &input)?.0)
}

/// Intervals at `layer` for an arbitrary input box, together with the work counter.
pub fn propagate_box(
    net: &Network,
    layer: usize,
    input: &[InputRange],
) -> Result<(Vec<NeuronInterval>, PropagationCost)> {
    net.check_layer(layer)?;
    if input.len() != net.input_dim() {
        return Err(Error::InputShape {
            expected: net.input_dim(),
            actual: input.len(),
        });
    }
    let mut cost = PropagationCost::default();
    let mut current: Vec<NeuronInterval> = input.iter().map(|r| NeuronInterval::new(r.lo, r.hi)).collect();
    for l in &net.layers()[..layer] {
        let act = l.activation();
        current = l
            .weights()
            .iter()
            .zip(l.bias())
            .map(|(row, b)| {
                let (mut lo, mut hi) = (*b, *b);
                for (w, iv) in row.iter().zip(&current) {
                    if *w >= 0.0 {
                        lo += w * iv.lo;
                        hi += w * iv.hi;
                    } else {
                        lo += w * iv.hi;
                        hi += w * iv.lo;
                    }
                }
                cost.weight_terms += row.len();
                cost.neurons += 1;
                NeuronInterval::new(act.apply(lo), act.apply(hi))
            })
            .collect();
    }
    Ok((current, cost))
}

/// `c` is the smallest lower bound and `N = ⌈(max hi − c)/Δ⌉`, so every interval
/// fits in `[c, c + NΔ]`.
pub fn derive_binning(intervals: &[NeuronInterval], delta: f64) -> Result<BinningSpec> {
    check_delta(delta)?;
    if intervals.is_empty() {
        return Err(Error::EmptyInput("no intervals to derive a binning from"));
    }
    let c = intervals.iter().map(|iv| iv.lo).fold(f64::INFINITY, f64::min);
    let top = intervals.iter().map(|iv| iv.hi).fold(f64::NEG_INFINITY, f64::max);
    let steps = ((top - c) / delta).ceil();
    if !steps.is_finite() || steps > u32::MAX as f64 {
        return Err(Error::InvalidArgument(format!(
            "range [{c}, {top}] needs too many bins of width {delta}"
        )));
    }
    BinningSpec::new(c, delta, steps.max(0.0) as u32)
}

/// Intervals and binning for one layer, as printed by the `bounds` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub layer: usize,
    pub intervals: Vec<NeuronInterval>,
    pub spec: BinningSpec,
}

pub fn bounds_report(net: &Network, layer: usize, delta: f64) -> Result<BoundsReport> {
    let intervals = propagate_intervals(net, layer)?;
    let spec = derive_binning(&intervals, delta)?;
    Ok(BoundsReport {
        layer,
        intervals,
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, Layer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net(layers: Vec<Layer>, dim: usize, lo: f64, hi: f64) -> Network {
        Network::new(dim, InputRange::new(lo, hi).unwrap(), layers).unwrap()
    }

    #[test]
    fn identity_layer_keeps_input_box() {
        let l = Layer::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0; 2], Activation::Identity).unwrap();
        let iv = propagate_intervals(&net(vec![l], 2, -1.0, 1.0), 1).unwrap();
        assert_eq!(iv, vec![NeuronInterval::new(-1.0, 1.0); 2]);
    }

    #[test]
    fn single_relu_neuron_by_hand_and_sampling() {
        // pre-activation x0 - 2 x1 + 1 over [-1,1]^2 is [-2, 4]
        let pre = Layer::new(vec![vec![1.0, -2.0]], vec![1.0], Activation::Identity).unwrap();
        let post = Layer::new(vec![vec![1.0, -2.0]], vec![1.0], Activation::Relu).unwrap();
        let pre_iv = propagate_intervals(&net(vec![pre], 2, -1.0, 1.0), 1).unwrap();
        assert_eq!(pre_iv, vec![NeuronInterval::new(-2.0, 4.0)]);
        let n = net(vec![post], 2, -1.0, 1.0);
        let iv = propagate_intervals(&n, 1).unwrap();
        assert_eq!(iv, vec![NeuronInterval::new(0.0, 4.0)]);

        let (mut seen_lo, mut seen_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in 0..=20 {
            for b in 0..=20 {
                let x = [-1.0 + a as f64 * 0.1, -1.0 + b as f64 * 0.1];
                let y = n.forward(&x).unwrap()[0][0];
                seen_lo = seen_lo.min(y);
                seen_hi = seen_hi.max(y);
            }
        }
        assert!((seen_lo - 0.0).abs() < 1e-12 && (seen_hi - 4.0).abs() < 1e-12);
    }

    #[test]
    fn widening_input_never_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l1 = Layer::new(
            (0..4).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            vec![0.1, -0.2, 0.0, 0.3],
            Activation::Tanh,
        )
        .unwrap();
        let l2 = Layer::new(
            (0..2).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            vec![0.0, 0.5],
            Activation::LeakyRelu { slope: 0.01 },
        )
        .unwrap();
        let n = net(vec![l1, l2], 3, -1.0, 1.0);
        let narrow = vec![InputRange::new(-0.5, 0.5).unwrap(); 3];
        let wide = vec![InputRange::new(-1.0, 1.0).unwrap(); 3];
        let (a, _) = propagate_box(&n, 2, &narrow).unwrap();
        let (b, _) = propagate_box(&n, 2, &wide).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(y.lo <= x.lo && x.hi <= y.hi);
        }
    }

    #[test]
    fn cost_is_one_pass() {
        let mk = |o: usize, i: usize| Layer::new(vec![vec![0.5; i]; o], vec![0.0; o], Activation::Relu).unwrap();
        let n = net(vec![mk(5, 3), mk(7, 5), mk(2, 7)], 3, 0.0, 1.0);
        let input = vec![n.input_range(); 3];
        let (_, c2) = propagate_box(&n, 2, &input).unwrap();
        let (_, c3) = propagate_box(&n, 3, &input).unwrap();
        assert_eq!(c2, PropagationCost { neurons: 12, weight_terms: 15 + 35 });
        assert_eq!(c3, PropagationCost { neurons: 14, weight_terms: 15 + 35 + 14 });
    }

    #[test]
    fn derive_binning_examples() {
        let s = derive_binning(&[NeuronInterval::new(0.0, 14.0), NeuronInterval::new(0.0, 5.0)], 3.0).unwrap();
        assert_eq!((s.c, s.n), (0.0, 5));
        let s = derive_binning(&[NeuronInterval::new(2.0, 2.0)], 1.0).unwrap();
        assert_eq!((s.c, s.n), (2.0, 0));
        let s = derive_binning(&[NeuronInterval::new(-1.0, 1.0), NeuronInterval::new(0.0, 7.0)], 2.0).unwrap();
        assert_eq!((s.c, s.n), (-1.0, 4));
    }

    #[test]
    fn derive_binning_errors() {
        assert!(matches!(derive_binning(&[], 1.0), Err(Error::EmptyInput(_))));
        assert!(derive_binning(&[NeuronInterval::new(0.0, 1.0)], 0.0).is_err());
        assert!(matches!(propagate_intervals(&net(
            vec![Layer::new(vec![vec![1.0]], vec![0.0], Activation::Relu).unwrap()], 1, 0.0, 1.0), 2),
            Err(Error::LayerRange { layer: 2, max: 1 })));
    }
}
