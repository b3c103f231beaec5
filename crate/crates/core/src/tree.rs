//! CART decision trees.
//!
//! One grower serves both ensembles: classification trees split on gini
//! impurity and store the positive-class fraction in their leaves;
//! regression trees split on variance and store the mean target. Candidate
//! features are redrawn at every node when `max_features` is below the
//! feature count.
//!
//! Rows are routed with `x[feature] < threshold` to the left child.
//! Thresholds are midpoints between consecutive distinct training values,
//! so no training row sits on a boundary.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

/// Number of features considered at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    /// `ceil(sqrt(arity))`
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, arity: usize) -> Result<usize> {
        let f = match self {
            MaxFeatures::All => arity,
            MaxFeatures::Sqrt => (arity as f64).sqrt().ceil() as usize,
            MaxFeatures::Count(f) => f,
        };
        if f == 0 || f > arity {
            return Err(SdmError::invalid(format!(
                "max_features {f} outside 1..={arity}"
            )));
        }
        Ok(f)
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = SdmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(MaxFeatures::All),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            n => n
                .parse::<usize>()
                .map(MaxFeatures::Count)
                .map_err(|_| SdmError::invalid(format!("max_features '{n}' is not all|sqrt|<count>"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub task: Task,
}

impl TreeConfig {
    pub fn classification(max_depth: usize) -> Self {
        TreeConfig {
            max_depth,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
            task: Task::Classification,
        }
    }

    pub fn regression(max_depth: usize) -> Self {
        TreeConfig {
            task: Task::Regression,
            ..TreeConfig::classification(max_depth)
        }
    }

    pub fn validate(&self, arity: usize) -> Result<usize> {
        if self.max_depth < 1 {
            return Err(SdmError::invalid("max_depth must be >= 1"));
        }
        if self.min_samples_split < 2 {
            return Err(SdmError::invalid("min_samples_split must be >= 2"));
        }
        self.max_features.resolve(arity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        value: f64,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        impurity_decrease: f64,
        n: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn n(&self) -> usize {
        match self {
            TreeNode::Leaf { n, .. } | TreeNode::Split { n, .. } => *n,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    /// Leaf value reached by `x`. Fails if a split references a feature
    /// past the end of `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return Ok(*value),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let v = *x.get(*feature).ok_or(SdmError::Arity {
                        expected: feature + 1,
                        got: x.len(),
                    })?;
                    node = if v < *threshold { left } else { right };
                }
            }
        }
    }

    /// Longest root-to-leaf path in edges.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Visits every split node as `(feature, impurity_decrease, n)`.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, f64, usize)) {
        if let TreeNode::Split {
            feature,
            impurity_decrease,
            n,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *impurity_decrease, *n);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }
}

/// `1 - p0^2 - p1^2` over a 0/1 label vector.
pub fn gini(labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(SdmError::invalid("gini of an empty label set"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    Ok(gini_from_counts(pos as f64, labels.len() as f64))
}

fn gini_from_counts(pos: f64, n: f64) -> f64 {
    let p = pos / n;
    let q = (n - pos) / n;
    1.0 - (p * p + q * q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best positive-gain split of all rows of `x` over `candidate_features`.
pub fn best_split(x: &[Vec<f64>], y: &[f64], candidate_features: &[usize], task: Task) -> Option<SplitCandidate> {
    let rows: Vec<usize> = (0..y.len()).collect();
    search_splits(x, y, &rows, candidate_features, task).best
}

/// Impurity of the target values of `rows`: gini or population variance.
fn node_impurity(y: &[f64], rows: &[usize], task: Task) -> f64 {
    let n = rows.len() as f64;
    let sum: f64 = rows.iter().map(|&r| y[r]).sum();
    match task {
        Task::Classification => gini_from_counts(sum, n),
        Task::Regression => {
            let mean = sum / n;
            rows.iter().map(|&r| (y[r] - mean).powi(2)).sum::<f64>() / n
        }
    }
}

struct SplitSearch {
    best: Option<SplitCandidate>,
    /// Lowest (feature, threshold) that separates any two rows, gain or not.
    first_separating: Option<SplitCandidate>,
}

fn search_splits(x: &[Vec<f64>], y: &[f64], rows: &[usize], features: &[usize], task: Task) -> SplitSearch {
    let mut search = SplitSearch {
        best: None,
        first_separating: None,
    };
    if rows.len() < 2 {
        return search;
    }
    let n = rows.len() as f64;
    let parent = node_impurity(y, rows, task);
    // centring keeps the running sums of squares well conditioned
    let shift = match task {
        Task::Classification => 0.0,
        Task::Regression => rows.iter().map(|&r| y[r]).sum::<f64>() / n,
    };
    let (total_sum, total_sq) = rows.iter().fold((0.0, 0.0), |(s, q), &r| {
        let v = y[r] - shift;
        (s + v, q + v * v)
    });
    let child_impurity = |cnt: f64, sum: f64, sq: f64| match task {
        Task::Classification => gini_from_counts(sum, cnt),
        Task::Regression => ((sq - sum * sum / cnt) / cnt).max(0.0),
    };

    let mut order: Vec<usize> = rows.to_vec();
    for &feature in features {
        order.copy_from_slice(rows);
        order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
        let (mut lsum, mut lsq) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let v = y[order[k]] - shift;
            lsum += v;
            lsq += v * v;
            let a = x[order[k]][feature];
            let b = x[order[k + 1]][feature];
            if !(a < b) {
                continue;
            }
            if search.first_separating.is_none() {
                search.first_separating = Some(SplitCandidate {
                    feature,
                    threshold: midpoint(a, b),
                    gain: 0.0,
                });
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            let gain = parent
                - (nl / n) * child_impurity(nl, lsum, lsq)
                - (nr / n) * child_impurity(nr, total_sum - lsum, total_sq - lsq);
            if gain <= parent * 1e-12 || gain <= 0.0 {
                continue;
            }
            if search.best.is_none_or(|cur| gain > cur.gain) {
                search.best = Some(SplitCandidate {
                    feature,
                    threshold: midpoint(a, b),
                    gain,
                });
            }
        }
    }
    search
}

/// Threshold strictly above `a` and at most `b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if a < mid && mid <= b && mid.is_finite() {
        mid
    } else {
        b
    }
}

/// Grows a CART tree on all rows of `(x, y)`.
///
/// `y` holds 0/1 labels for classification or arbitrary targets for
/// regression.
pub fn train_decision_tree<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[f64],
    config: &TreeConfig,
    rng: &mut R,
) -> Result<TreeNode> {
    let rows: Vec<usize> = (0..y.len()).collect();
    train_on_rows(x, y, &rows, config, rng)
}

/// Grows a tree on the multiset `rows` of `(x, y)`; duplicates act as
/// repeated samples.
pub fn train_on_rows<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    config: &TreeConfig,
    rng: &mut R,
) -> Result<TreeNode> {
    if x.len() != y.len() {
        return Err(SdmError::invalid(format!(
            "{} feature rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    if rows.is_empty() {
        return Err(SdmError::invalid("cannot grow a tree on zero rows"));
    }
    let arity = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != arity) {
        return Err(SdmError::Arity {
            expected: arity,
            got: bad.len(),
        });
    }
    if arity == 0 {
        return Err(SdmError::invalid("feature rows are empty"));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= y.len()) {
        return Err(SdmError::invalid(format!("row index {r} out of range")));
    }
    if config.task == Task::Classification && rows.iter().any(|&r| y[r] != 0.0 && y[r] != 1.0) {
        return Err(SdmError::invalid("classification targets must be 0 or 1"));
    }
    let n_features = config.validate(arity)?;
    let grower = Grower {
        x,
        y,
        config,
        arity,
        n_features,
    };
    Ok(grower.grow(rows.to_vec(), 0, rng))
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    config: &'a TreeConfig,
    arity: usize,
    n_features: usize,
}

impl Grower<'_> {
    fn leaf(&self, rows: &[usize]) -> TreeNode {
        let sum: f64 = rows.iter().map(|&r| self.y[r]).sum();
        TreeNode::Leaf {
            value: sum / rows.len() as f64,
            n: rows.len(),
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.y[rows[0]];
        rows.iter().all(|&r| self.y[r] == first)
    }

    fn grow<R: Rng + ?Sized>(&self, rows: Vec<usize>, depth: usize, rng: &mut R) -> TreeNode {
        if depth >= self.config.max_depth || rows.len() < self.config.min_samples_split || self.is_pure(&rows) {
            return self.leaf(&rows);
        }
        let features: Vec<usize> = if self.n_features == self.arity {
            (0..self.arity).collect()
        } else {
            let mut f = index::sample(rng, self.arity, self.n_features).into_vec();
            f.sort_unstable();
            f
        };
        // An impure node with no positive-gain split (XOR-like layouts)
        // still splits on the first separating threshold.
        let search = search_splits(self.x, self.y, &rows, &features, self.config.task);
        let Some(split) = search.best.or(search.first_separating) else {
            return self.leaf(&rows);
        };
        let n = rows.len();
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.x[r][split.feature] < split.threshold);
        let left = self.grow(left, depth + 1, rng);
        let right = self.grow(right, depth + 1, rng);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            impurity_decrease: split.gain,
            n,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}
