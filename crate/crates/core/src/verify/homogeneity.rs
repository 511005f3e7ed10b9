//! Degree growth of the cross stack with attention coefficients held fixed.
//!
//! With softmax weights frozen, every layer is multilinear: `Z_l` is linear
//! in `X_l`, `P_l` multiplies it by `X_0`, and pooling is a fixed average, so
//! `Y_l(tX) = t^(l+1) Y_l(X)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{init_multi_head, MultiHeadParams};
use crate::crossnet::{stack_layers, LayerOptions};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor};
use crate::params::uniform;

/// Per-layer `Y` of the stack on `scale * x`, using attention weights
/// computed once from the unscaled `x`. `layers[l]` holds the multi-head
/// tensors of layer `l` in [`MultiHeadParams::from_vars`] order.
pub fn frozen_forward(x: &Tensor, layers: &[Vec<Tensor>], options: LayerOptions, scale: f64) -> Result<Vec<Tensor>> {
    let mut probe = Tape::new();
    let x0 = probe.constant(x.clone());
    let params = bind_layers(&mut probe, layers)?;
    let traces = stack_layers(&mut probe, x0, &params, options, None)?;
    let weights: Vec<Vec<Tensor>> = traces
        .iter()
        .map(|t| t.attention.iter().map(|&w| probe.value(w).clone()).collect())
        .collect();

    let mut tape = Tape::new();
    let xs = tape.constant(x.scale(scale));
    let params = bind_layers(&mut tape, layers)?;
    let frozen: Vec<Vec<_>> = weights
        .into_iter()
        .map(|ws| ws.into_iter().map(|w| tape.constant(w)).collect())
        .collect();
    let traces = stack_layers(&mut tape, xs, &params, options, Some(&frozen))?;
    Ok(traces.iter().map(|t| tape.value(t.y).clone()).collect())
}

fn bind_layers(tape: &mut Tape, layers: &[Vec<Tensor>]) -> Result<Vec<MultiHeadParams>> {
    layers
        .iter()
        .map(|ts| {
            let vars: Vec<_> = ts.iter().map(|t| tape.constant(t.clone())).collect();
            MultiHeadParams::from_vars(&vars)
        })
        .collect()
}

/// One (layer, scale) measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneityRow {
    /// 1-based layer index.
    pub layer: usize,
    pub scale: f64,
    /// `|Y(tX)| / |Y(X)|`.
    pub observed_ratio: f64,
    /// `t^(l+1)`.
    pub expected_ratio: f64,
    /// `|Y(tX) - t^(l+1) Y(X)| / |Y(X)|`.
    pub deviation: f64,
}

/// Least-squares slope of `ln |Y_l(tX)|` against `ln t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub layer: usize,
    pub slope: f64,
    pub expected: f64,
}

/// Every measurement is kept, failing or not.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HomogeneityReport {
    pub rows: Vec<HomogeneityRow>,
    pub slopes: Vec<SlopeFit>,
}

impl HomogeneityReport {
    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().map(|r| r.deviation).fold(0.0, f64::max)
    }

    pub fn max_slope_error(&self) -> f64 {
        self.slopes.iter().map(|s| (s.slope - s.expected).abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, deviation_tol: f64, slope_tol: f64) -> bool {
        !self.rows.is_empty()
            && self.rows.iter().all(|r| r.deviation <= deviation_tol)
            && self.slopes.iter().all(|s| (s.slope - s.expected).abs() <= slope_tol)
    }

    pub fn tsv(&self) -> String {
        let mut out = String::from("layer\tscale\tobserved_ratio\texpected_ratio\tdeviation\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{:.12e}\t{:.12e}\t{:.3e}\n",
                r.layer, r.scale, r.observed_ratio, r.expected_ratio, r.deviation
            ));
        }
        out.push_str("layer\tslope\texpected_slope\n");
        for s in &self.slopes {
            out.push_str(&format!("{}\t{:.12}\t{}\n", s.layer, s.slope, s.expected));
        }
        out
    }
}

/// Setup of a homogeneity experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneitySetup {
    pub fields: usize,
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub options: LayerOptions,
    pub scales: Vec<f64>,
    pub slope_scales: Vec<f64>,
    pub seed: u64,
}

impl Default for HomogeneitySetup {
    fn default() -> Self {
        HomogeneitySetup {
            fields: 5,
            dim: 4,
            heads: 2,
            layers: 3,
            options: LayerOptions::default(),
            scales: vec![0.5, 2.0, 3.0],
            slope_scales: vec![1.0, 2.0, 4.0, 8.0],
            seed: 7,
        }
    }
}

pub fn homogeneity_check(setup: &HomogeneitySetup) -> Result<HomogeneityReport> {
    if setup.slope_scales.len() < 2 || setup.scales.iter().chain(&setup.slope_scales).any(|&t| !(t > 0.0)) {
        return Err(Error::Config("scales must be positive and the slope fit needs two".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let x = uniform(&[setup.fields, setup.dim], 1.0, &mut rng)?;
    let layers = (0..setup.layers)
        .map(|_| init_multi_head(setup.dim, setup.heads, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let base = frozen_forward(&x, &layers, setup.options, 1.0)?;

    let mut report = HomogeneityReport::default();
    for &t in &setup.scales {
        let scaled = frozen_forward(&x, &layers, setup.options, t)?;
        for (l, (y, y_t)) in base.iter().zip(&scaled).enumerate() {
            let expected = t.powi(l as i32 + 2);
            let reference = y.norm();
            report.rows.push(HomogeneityRow {
                layer: l + 1,
                scale: t,
                observed_ratio: y_t.norm() / reference,
                expected_ratio: expected,
                deviation: y_t.sub(&y.scale(expected))?.norm() / reference,
            });
        }
    }

    let mut norms = vec![Vec::new(); setup.layers];
    for &t in &setup.slope_scales {
        for (l, y) in frozen_forward(&x, &layers, setup.options, t)?.iter().enumerate() {
            norms[l].push((t.ln(), y.norm().ln()));
        }
    }
    for (l, points) in norms.iter().enumerate() {
        report.slopes.push(SlopeFit {
            layer: l + 1,
            slope: least_squares_slope(points),
            expected: (l + 2) as f64,
        });
    }
    Ok(report)
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scale_matches_normal_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = uniform(&[4, 4], 1.0, &mut rng).unwrap();
        let layers: Vec<_> = (0..2).map(|_| init_multi_head(4, 2, &mut rng).unwrap()).collect();
        let frozen = frozen_forward(&x, &layers, LayerOptions::default(), 1.0).unwrap();

        let mut tape = Tape::new();
        let x0 = tape.constant(x);
        let params = bind_layers(&mut tape, &layers).unwrap();
        let traces = stack_layers(&mut tape, x0, &params, LayerOptions::default(), None).unwrap();
        for (f, t) in frozen.iter().zip(&traces) {
            assert_eq!(f, tape.value(t.y));
        }
    }

    #[test]
    fn degrees_two_and_three_at_scale_two() {
        let r = homogeneity_check(&HomogeneitySetup {
            scales: vec![2.0],
            ..HomogeneitySetup::default()
        })
        .unwrap();
        let ratio = |l: usize| r.rows.iter().find(|row| row.layer == l).unwrap().observed_ratio;
        assert!((ratio(1) - 4.0).abs() < 1e-9);
        assert!((ratio(2) - 8.0).abs() < 1e-9);
        assert!(r.passes(1e-8, 1e-6));
    }

    #[test]
    fn slope_of_a_line() {
        assert!((least_squares_slope(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]) - 2.0).abs() < 1e-15);
    }
}
