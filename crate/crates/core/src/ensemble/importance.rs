//! Impurity-decrease feature importance.

use serde::ser::{Serialize, SerializeMap, Serializer};

use super::Model;

/// Normalized importance per feature, in model feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub weights: Vec<(String, f64)>,
}

impl FeatureImportance {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.weights.iter().find(|(n, _)| n == name).map(|(_, w)| *w)
    }

    /// True when the model had no splits and every weight is zero.
    pub fn is_degenerate(&self) -> bool {
        self.weights.iter().all(|(_, w)| *w == 0.0)
    }

    /// Feature with the largest weight; first one on ties.
    pub fn top(&self) -> Option<&str> {
        let mut best: Option<&(String, f64)> = None;
        for entry in &self.weights {
            if best.is_none_or(|b| entry.1 > b.1) {
                best = Some(entry);
            }
        }
        best.map(|(n, _)| n.as_str())
    }

    /// Horizontal bar chart as a standalone SVG document.
    pub fn to_svg(&self) -> String {
        const BAR_H: usize = 24;
        const LABEL_W: usize = 130;
        const BAR_W: f64 = 300.0;
        let height = 40 + BAR_H * self.weights.len();
        let width = LABEL_W + BAR_W as usize + 70;
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
             font-family=\"sans-serif\" font-size=\"12\">\n\
             <text x=\"10\" y=\"20\" font-size=\"14\">Feature importance</text>\n"
        );
        for (i, (name, weight)) in self.weights.iter().enumerate() {
            let y = 30 + i * BAR_H;
            let w = weight * BAR_W;
            svg.push_str(&format!(
                "<text x=\"10\" y=\"{ty}\">{name}</text>\n\
                 <rect x=\"{LABEL_W}\" y=\"{y}\" width=\"{w:.2}\" height=\"{bh}\" fill=\"#4878a8\"/>\n\
                 <text x=\"{tx:.2}\" y=\"{ty}\">{weight:.3}</text>\n",
                ty = y + 16,
                bh = BAR_H - 6,
                tx = LABEL_W as f64 + w + 5.0,
                name = xml_escape(name),
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl Serialize for FeatureImportance {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.weights.len()))?;
        for (name, weight) in &self.weights {
            map.serialize_entry(name, weight)?;
        }
        map.end()
    }
}

/// Sums `(n_node / n_root) * impurity_decrease` per feature over every split
/// of every tree, then normalizes to total 1. A model without splits gets
/// all-zero weights.
pub fn feature_importance(model: &Model) -> FeatureImportance {
    let names = super::ProbabilityModel::feature_names(model);
    let mut totals = vec![0.0; names.len()];
    for tree in model.trees() {
        let root_n = tree.n().max(1) as f64;
        tree.for_each_split(&mut |feature, decrease, n| {
            totals[feature] += n as f64 / root_n * decrease;
        });
    }
    let sum: f64 = totals.iter().sum();
    if sum > 0.0 {
        totals.iter_mut().for_each(|w| *w /= sum);
    }
    FeatureImportance {
        weights: names.iter().cloned().zip(totals).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{ForestParams, RandomForest};
    use crate::tree::TreeNode;

    fn forest(trees: Vec<TreeNode>) -> Model {
        Model::RandomForest(RandomForest {
            feature_names: ["a", "b", "c"].map(String::from).to_vec(),
            seed: 0,
            hyperparameters: ForestParams::default(),
            trees,
        })
    }

    fn leaf(n: usize) -> Box<TreeNode> {
        Box::new(TreeNode::Leaf { value: 0.5, n })
    }

    #[test]
    fn single_split_gets_all_weight() {
        let tree = TreeNode::Split {
            feature: 2,
            threshold: 0.0,
            impurity_decrease: 0.3,
            n: 10,
            left: leaf(5),
            right: leaf(5),
        };
        let imp = feature_importance(&forest(vec![tree]));
        assert_eq!(imp.weights, vec![("a".into(), 0.0), ("b".into(), 0.0), ("c".into(), 1.0)]);
        assert_eq!(imp.top(), Some("c"));
    }

    #[test]
    fn node_weighting_and_normalization() {
        let inner = TreeNode::Split {
            feature: 1,
            threshold: 0.0,
            impurity_decrease: 0.4,
            n: 5,
            left: leaf(2),
            right: leaf(3),
        };
        let tree = TreeNode::Split {
            feature: 0,
            threshold: 0.0,
            impurity_decrease: 0.2,
            n: 10,
            left: Box::new(inner),
            right: leaf(5),
        };
        // a: 1.0 * 0.2, b: 0.5 * 0.4 -> equal shares
        let imp = feature_importance(&forest(vec![tree]));
        assert!((imp.get("a").unwrap() - 0.5).abs() < 1e-15);
        assert!((imp.get("b").unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn splitless_model_is_all_zero() {
        let imp = feature_importance(&forest(vec![*leaf(4), *leaf(4)]));
        assert!(imp.is_degenerate());
        assert_eq!(serde_json::to_string(&imp).unwrap(), r#"{"a":0.0,"b":0.0,"c":0.0}"#);
    }

    #[test]
    fn svg_has_one_bar_per_feature() {
        let imp = feature_importance(&forest(vec![*leaf(4)]));
        let svg = imp.to_svg();
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
