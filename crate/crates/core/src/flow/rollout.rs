use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::attention::{AttentionStack, SquareMatrix};
use crate::flow::network::check_residual;
use crate::report::{AttributionReport, Method};

/// Aggregated attention from output positions back to input tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub n: usize,
    pub residual: Option<f64>,
    /// `matrix[j][i]`: attention output position `j` pays, through all
    /// layers, to input token `i`.
    pub matrix: Vec<Vec<f64>>,
}

impl RolloutResult {
    /// Per-input-token attribution: row `target` of the rollout, or the
    /// column sums (attention received from every output) when `target` is
    /// `None`.
    pub fn attribution(&self, target: Option<usize>) -> AttributionReport {
        let values: Vec<f64> = match target {
            Some(j) => self.matrix[j].clone(),
            None => (0..self.n)
                .map(|i| self.matrix.iter().map(|row| row[i]).sum())
                .collect(),
        };
        let total = values.iter().sum();
        AttributionReport::new(Method::Rollout, values, total)
    }
}

/// `Ã_L · Ã_{L−1} ⋯ Ã_1`, with `Ã_l = w·I + (1−w)·A_l` (rows renormalized)
/// when `residual = Some(w)` and `Ã_l = A_l` otherwise.
pub fn attention_rollout(stack: &AttentionStack, residual: Option<f64>) -> Result<RolloutResult> {
    check_residual(residual)?;
    let mix = |a: &SquareMatrix| match residual {
        Some(w) => a.with_residual(w),
        None => a.clone(),
    };
    let mut product = mix(stack.layer(0));
    for layer in &stack.layers()[1..] {
        product = mix(layer).matmul(&product);
    }
    Ok(RolloutResult {
        n: stack.n(),
        residual,
        matrix: product.rows(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_layer_is_itself() {
        let layer = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
        let stack = AttentionStack::from_rows(std::slice::from_ref(&layer)).unwrap();
        assert_eq!(attention_rollout(&stack, None).unwrap().matrix, layer);
    }

    #[test]
    fn identity_layers_roll_out_to_identity() {
        let id = SquareMatrix::identity(4).rows();
        let stack = AttentionStack::from_rows(&[id.clone(), id.clone(), id.clone()]).unwrap();
        assert_eq!(attention_rollout(&stack, None).unwrap().matrix, id);
        assert_eq!(attention_rollout(&stack, Some(0.5)).unwrap().matrix, id);
    }

    #[test]
    fn uniform_over_identity() {
        let stack = AttentionStack::from_rows(&[
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        ])
        .unwrap();
        let r = attention_rollout(&stack, None).unwrap();
        assert_eq!(r.matrix, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(r.attribution(None).values, vec![1.0, 1.0]);
        assert_eq!(r.attribution(Some(1)).values, vec![0.5, 0.5]);
    }

    #[test]
    fn order_is_later_layers_on_the_left() {
        let a1 = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let a2 = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        let stack = AttentionStack::from_rows(&[a1, a2]).unwrap();
        // A2 · A1: every output reaches input 0 through middle token 1
        let r = attention_rollout(&stack, None).unwrap();
        assert_eq!(r.matrix, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn bad_residual_weight() {
        let stack = AttentionStack::from_rows(&[vec![vec![1.0]]]).unwrap();
        assert!(attention_rollout(&stack, Some(0.0)).is_err());
    }
}
