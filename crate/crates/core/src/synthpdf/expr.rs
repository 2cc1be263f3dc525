//! Expression trees of base functions joined by `add`/`multiply`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::synthpdf::base::{sample_base_function, BaseFunctionSpec, TagFilter};

/// The operator set; both preserve non-negativity of the operands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineOp {
    Add,
    Multiply,
}

/// One node of the expression tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum ExprNode {
    Leaf {
        spec: BaseFunctionSpec,
        axis: usize,
    },
    Combine {
        op: CombineOp,
        left: Box<ExprNode>,
        right: Box<ExprNode>,
    },
}

impl ExprNode {
    pub fn eval(&self, point: &[f64]) -> f64 {
        match self {
            ExprNode::Leaf { spec, axis } => spec.eval(point[*axis]),
            ExprNode::Combine { op, left, right } => {
                let l = left.eval(point);
                let r = right.eval(point);
                match op {
                    CombineOp::Add => l + r,
                    CombineOp::Multiply => l * r,
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            ExprNode::Leaf { .. } => 1,
            ExprNode::Combine { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Evaluate a subtree that reads exactly one axis at the scalar value of
    /// that axis (used by the separable normalization fast path).
    pub(crate) fn eval_single_axis(&self, x: f64) -> f64 {
        match self {
            ExprNode::Leaf { spec, .. } => spec.eval(x),
            ExprNode::Combine { op, left, right } => {
                let l = left.eval_single_axis(x);
                let r = right.eval_single_axis(x);
                match op {
                    CombineOp::Add => l + r,
                    CombineOp::Multiply => l * r,
                }
            }
        }
    }

    /// The single axis this subtree reads, if it reads exactly one.
    fn single_axis(&self) -> Option<usize> {
        match self {
            ExprNode::Leaf { axis, .. } => Some(*axis),
            ExprNode::Combine { left, right, .. } => {
                let a = left.single_axis()?;
                let b = right.single_axis()?;
                (a == b).then_some(a)
            }
        }
    }

    fn max_axis(&self) -> usize {
        match self {
            ExprNode::Leaf { axis, .. } => *axis,
            ExprNode::Combine { left, right, .. } => left.max_axis().max(right.max_axis()),
        }
    }

    /// Collect the factors of a top-level multiplication chain.
    fn multiply_factors<'a>(&'a self, out: &mut Vec<&'a ExprNode>) {
        match self {
            ExprNode::Combine {
                op: CombineOp::Multiply,
                left,
                right,
            } => {
                left.multiply_factors(out);
                right.multiply_factors(out);
            }
            other => out.push(other),
        }
    }
}

/// An unnormalized synthetic density: an expression tree over a
/// `dim`-dimensional box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionExpr {
    pub node: ExprNode,
    pub dim: usize,
}

impl FunctionExpr {
    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.dim);
        self.node.eval(point)
    }

    pub fn leaf_count(&self) -> usize {
        self.node.leaf_count()
    }

    /// Every axis index must lie below the declared dimensionality.
    pub fn axes_valid(&self) -> bool {
        self.node.max_axis() < self.dim
    }

    /// When the tree is a product of single-axis factors on pairwise distinct
    /// axes, return the factors keyed by axis. Axes the tree never reads are
    /// simply absent. Used for the separable normalization fast path.
    pub fn separable_factors(&self) -> Option<Vec<(usize, &ExprNode)>> {
        let mut factors = Vec::new();
        self.node.multiply_factors(&mut factors);
        let mut keyed: Vec<(usize, &ExprNode)> = Vec::with_capacity(factors.len());
        for f in factors {
            let axis = f.single_axis()?;
            if keyed.iter().any(|(a, _)| *a == axis) {
                return None;
            }
            keyed.push((axis, f));
        }
        keyed.sort_by_key(|(a, _)| *a);
        Some(keyed)
    }
}

/// Rules that restrict composition in the high-dimensional regime.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompositionRules {
    /// Join with `add` only (forced for `d >= 50`).
    pub add_only: bool,
    /// Minimum allowed base-function maximum (0 disables the constraint).
    pub min_base_max: f64,
}

fn draw_op<R: Rng + ?Sized>(rng: &mut R, rules: &CompositionRules) -> CombineOp {
    if rules.add_only {
        return CombineOp::Add;
    }
    if rng.gen::<bool>() {
        CombineOp::Add
    } else {
        CombineOp::Multiply
    }
}

fn leaf<R: Rng + ?Sized>(
    rng: &mut R,
    axis: usize,
    extent: f64,
    filter: &TagFilter,
    rules: &CompositionRules,
) -> Result<ExprNode> {
    Ok(ExprNode::Leaf {
        spec: sample_base_function(rng, extent, filter, rules.min_base_max)?,
        axis,
    })
}

/// Left-deep composition of `n_c` base functions on one axis.
pub fn compose_1d_on_axis<R: Rng + ?Sized>(
    rng: &mut R,
    n_c: usize,
    axis: usize,
    extent: f64,
    filter: &TagFilter,
    rules: &CompositionRules,
) -> Result<ExprNode> {
    assert!((2..=7).contains(&n_c), "n_c must lie in [2, 7]");
    let mut node = leaf(rng, axis, extent, filter, rules)?;
    for _ in 1..n_c {
        let right = leaf(rng, axis, extent, filter, rules)?;
        let op = draw_op(rng, rules);
        node = ExprNode::Combine {
            op,
            left: Box::new(node),
            right: Box::new(right),
        };
    }
    Ok(node)
}

/// One-dimensional synthetic function of `n_c` joined base functions.
pub fn compose_1d<R: Rng + ?Sized>(
    rng: &mut R,
    n_c: usize,
    extent: f64,
    filter: &TagFilter,
    rules: &CompositionRules,
) -> Result<FunctionExpr> {
    Ok(FunctionExpr {
        node: compose_1d_on_axis(rng, n_c, 0, extent, filter, rules)?,
        dim: 1,
    })
}

/// The two high-dimensional composition schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionScheme {
    /// Scheme A: build one `n_c`-leaf composition per axis, then join the
    /// `d` per-axis functions.
    PerAxisThenCombine,
    /// Scheme B: build `n_c` terms that each join one leaf per axis, then
    /// join the `n_c` terms.
    BuildDimThenCombine,
}

/// `d`-dimensional synthetic function under the chosen scheme.
///
/// `extents[i]` is the domain upper bound of axis `i`.
pub fn compose_highdim<R: Rng + ?Sized>(
    rng: &mut R,
    n_c: usize,
    scheme: CompositionScheme,
    extents: &[f64],
    filter: &TagFilter,
    rules: &CompositionRules,
) -> Result<FunctionExpr> {
    let dim = extents.len();
    assert!(dim >= 2, "high-dimensional composition needs d >= 2");
    let node = match scheme {
        CompositionScheme::PerAxisThenCombine => {
            let mut node = compose_1d_on_axis(rng, n_c, 0, extents[0], filter, rules)?;
            for (axis, &extent) in extents.iter().enumerate().skip(1) {
                let right = compose_1d_on_axis(rng, n_c, axis, extent, filter, rules)?;
                let op = draw_op(rng, rules);
                node = ExprNode::Combine {
                    op,
                    left: Box::new(node),
                    right: Box::new(right),
                };
            }
            node
        }
        CompositionScheme::BuildDimThenCombine => {
            let mut terms = Vec::with_capacity(n_c);
            for _ in 0..n_c {
                let mut term = leaf(rng, 0, extents[0], filter, rules)?;
                for (axis, &extent) in extents.iter().enumerate().skip(1) {
                    let right = leaf(rng, axis, extent, filter, rules)?;
                    let op = draw_op(rng, rules);
                    term = ExprNode::Combine {
                        op,
                        left: Box::new(term),
                        right: Box::new(right),
                    };
                }
                terms.push(term);
            }
            let mut node = terms.remove(0);
            for term in terms {
                let op = draw_op(rng, rules);
                node = ExprNode::Combine {
                    op,
                    left: Box::new(node),
                    right: Box::new(term),
                };
            }
            node
        }
    };
    Ok(FunctionExpr { node, dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::synthpdf::base::BaseKind;

    fn leaf_node(kind: BaseKind, s: f64, axis: usize) -> ExprNode {
        ExprNode::Leaf {
            spec: BaseFunctionSpec {
                kind,
                r: 0.5,
                s,
                alpha: None,
                mu: None,
                sigma: None,
            },
            axis,
        }
    }

    #[test]
    fn two_leaf_product_evaluates_x_times_one_minus_x() {
        let expr = FunctionExpr {
            node: ExprNode::Combine {
                op: CombineOp::Multiply,
                left: Box::new(leaf_node(BaseKind::LinearUp, 1.0, 0)),
                right: Box::new(leaf_node(BaseKind::SlopeDown, 1.0, 0)),
            },
            dim: 1,
        };
        for &x in &[0.0, 0.25, 0.5, 0.9] {
            assert!((expr.eval(&[x]) - x * (1.0 - x)).abs() < 1e-15);
        }
    }

    #[test]
    fn add_only_rule_yields_no_products() {
        let rules = CompositionRules {
            add_only: true,
            min_base_max: 0.0,
        };
        let mut rng = stream_rng(21, 0);
        for _ in 0..200 {
            let expr = compose_1d(&mut rng, 2, 1.0, &TagFilter::default(), &rules).unwrap();
            if let ExprNode::Combine { op, .. } = &expr.node {
                assert_eq!(*op, CombineOp::Add);
            } else {
                panic!("expected a combine node");
            }
        }
    }

    #[test]
    fn seven_leaves_make_six_joins() {
        let mut rng = stream_rng(22, 0);
        let expr = compose_1d(
            &mut rng,
            7,
            2.0,
            &TagFilter::default(),
            &CompositionRules::default(),
        )
        .unwrap();
        assert_eq!(expr.leaf_count(), 7);
        fn combine_count(node: &ExprNode) -> usize {
            match node {
                ExprNode::Leaf { .. } => 0,
                ExprNode::Combine { left, right, .. } => {
                    1 + combine_count(left) + combine_count(right)
                }
            }
        }
        assert_eq!(combine_count(&expr.node), 6);
    }

    #[test]
    fn scheme_arity_matches() {
        let mut rng = stream_rng(23, 0);
        let extents = [1.0, 2.0, 3.0];
        for scheme in [
            CompositionScheme::PerAxisThenCombine,
            CompositionScheme::BuildDimThenCombine,
        ] {
            let expr = compose_highdim(
                &mut rng,
                2,
                scheme,
                &extents,
                &TagFilter::default(),
                &CompositionRules::default(),
            )
            .unwrap();
            assert_eq!(expr.leaf_count(), 6);
            assert!(expr.axes_valid());
        }
    }

    #[test]
    fn separable_product_detected() {
        let expr = FunctionExpr {
            node: ExprNode::Combine {
                op: CombineOp::Multiply,
                left: Box::new(leaf_node(BaseKind::LinearUp, 1.0, 0)),
                right: Box::new(leaf_node(BaseKind::SlopeDown, 1.0, 1)),
            },
            dim: 2,
        };
        let factors = expr.separable_factors().unwrap();
        assert_eq!(factors.len(), 2);
        assert_eq!(factors[0].0, 0);
        assert_eq!(factors[1].0, 1);

        let not_separable = FunctionExpr {
            node: ExprNode::Combine {
                op: CombineOp::Add,
                left: Box::new(leaf_node(BaseKind::LinearUp, 1.0, 0)),
                right: Box::new(leaf_node(BaseKind::SlopeDown, 1.0, 1)),
            },
            dim: 2,
        };
        assert!(not_separable.separable_factors().is_none());
    }

    #[test]
    fn expression_round_trips_through_json() {
        let mut rng = stream_rng(24, 0);
        let expr = compose_1d(
            &mut rng,
            4,
            5.0,
            &TagFilter::default(),
            &CompositionRules::default(),
        )
        .unwrap();
        let text = serde_json::to_string(&expr).unwrap();
        let back: FunctionExpr = serde_json::from_str(&text).unwrap();
        assert_eq!(expr, back);
    }
}
