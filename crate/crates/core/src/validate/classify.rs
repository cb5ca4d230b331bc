//! Classifiers used for inception scoring: CART, k-nearest neighbours on
//! one-hot rows, and a one-hidden-layer MLP.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    adam_step, argmax, forward, forward_graph, Activation, AdamConfig, AdamState, BoundParams, Graph, HeadKind,
    HeadSpec, MlpSpec, ParameterSet, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    DecisionTree,
    Knn,
    Cmlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::DecisionTree, ClassifierKind::Knn, ClassifierKind::Cmlp];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::Knn => "knn",
            ClassifierKind::Cmlp => "cmlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub tree_max_depth: usize,
    pub knn_k: usize,
    pub cmlp_hidden: usize,
    pub cmlp_leaky_slope: f64,
    pub cmlp_epochs: usize,
    pub cmlp_batch_size: usize,
    pub cmlp_adam: AdamConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            tree_max_depth: 12,
            knn_k: 5,
            cmlp_hidden: 64,
            cmlp_leaky_slope: 0.01,
            cmlp_epochs: 30,
            cmlp_batch_size: 256,
            cmlp_adam: AdamConfig::default(),
        }
    }
}

fn check_training(x: &Tensor, y: &[usize]) -> Result<usize> {
    if x.rows() == 0 {
        return Err(Error::Data("classifier training set is empty".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::Data(format!(
            "training labels contain a single class ({}); need at least two",
            y[0]
        )));
    }
    Ok(n_classes.max(2))
}

fn majority(counts: &[usize]) -> usize {
    // lowest class wins ties
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        class: usize,
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART with Gini impurity. Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_classes: usize,
}

fn gini_mass(counts: &[usize], n: usize) -> f64 {
    // n * gini = n - sum(c^2) / n
    if n == 0 {
        return 0.0;
    }
    let s: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - s / n as f64
}

pub fn train_decision_tree(x: &Tensor, y: &[usize], max_depth: usize) -> Result<DecisionTree> {
    let n_classes = check_training(x, y)?;
    let mut tree = DecisionTree {
        nodes: Vec::new(),
        n_classes,
    };
    let idx: Vec<usize> = (0..x.rows()).collect();
    grow(&mut tree, x, y, idx, 0, max_depth);
    Ok(tree)
}

fn grow(tree: &mut DecisionTree, x: &Tensor, y: &[usize], idx: Vec<usize>, depth: usize, max_depth: usize) -> usize {
    let k = tree.n_classes;
    let mut counts = vec![0; k];
    for &i in &idx {
        counts[y[i]] += 1;
    }
    let id = tree.nodes.len();
    tree.nodes.push(TreeNode::Leaf {
        class: majority(&counts),
        counts: counts.clone(),
    });
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || depth >= max_depth || idx.len() < 2 {
        return id;
    }

    let parent = gini_mass(&counts, idx.len());
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.clone();
    for f in 0..x.cols() {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let mut left = vec![0; k];
        for pos in 0..order.len() - 1 {
            left[y[order[pos]]] += 1;
            let (v, next) = (x.get(order[pos], f), x.get(order[pos + 1], f));
            if v == next {
                continue;
            }
            let nl = pos + 1;
            let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
            let gain = parent - gini_mass(&left, nl) - gini_mass(&right, idx.len() - nl);
            if gain > 1e-12 && best.map_or(true, |(g, _, _)| gain > g) {
                best = Some((gain, f, 0.5 * (v + next)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return id;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x.get(i, feature) <= threshold);
    let left = grow(tree, x, y, l, depth + 1, max_depth);
    let right = grow(tree, x, y, r, depth + 1, max_depth);
    tree.nodes[id] = TreeNode::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => n = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, n: usize) -> usize {
            match &t.nodes[n] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}

/// k-NN over 0/1 rows with Hamming distance, stored as bitsets.
/// Equal distances are ordered by training index; tied votes go to the
/// lowest class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub width: usize,
    pub n_classes: usize,
    words: usize,
    bits: Vec<u64>,
    labels: Vec<usize>,
}

fn pack_bits(row: &[f64], words: usize) -> Result<Vec<u64>> {
    let mut out = vec![0u64; words];
    for (j, &v) in row.iter().enumerate() {
        if v == 1.0 {
            out[j / 64] |= 1 << (j % 64);
        } else if v != 0.0 {
            return Err(Error::Data(format!("k-NN expects 0/1 features, found {v}")));
        }
    }
    Ok(out)
}

pub fn train_knn(x: &Tensor, y: &[usize], k: usize) -> Result<Knn> {
    let n_classes = check_training(x, y)?;
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let words = x.cols().div_ceil(64).max(1);
    let mut bits = Vec::with_capacity(words * x.rows());
    for row in x.iter_rows() {
        bits.extend(pack_bits(row, words)?);
    }
    Ok(Knn {
        k,
        width: x.cols(),
        n_classes,
        words,
        bits,
        labels: y.to_vec(),
    })
}

impl Knn {
    pub fn predict_row(&self, row: &[f64]) -> Result<usize> {
        let q = pack_bits(row, self.words)?;
        let n = self.labels.len();
        // counting sort on distance keeps index order within each distance
        let mut by_dist: Vec<Vec<usize>> = vec![Vec::new(); self.width + 1];
        for i in 0..n {
            let d: u32 = self.bits[i * self.words..(i + 1) * self.words]
                .iter()
                .zip(&q)
                .map(|(a, b)| (a ^ b).count_ones())
                .sum();
            by_dist[d as usize].push(i);
        }
        let mut votes = vec![0usize; self.n_classes];
        let mut taken = 0;
        'outer: for bucket in &by_dist {
            for &i in bucket {
                if taken == self.k {
                    break 'outer;
                }
                votes[self.labels[i]] += 1;
                taken += 1;
            }
        }
        Ok(majority(&votes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cmlp {
    pub spec: MlpSpec,
    pub params: ParameterSet,
}

pub fn train_cmlp(x: &Tensor, y: &[usize], config: &ClassifierConfig, seed: u64) -> Result<Cmlp> {
    let n_classes = check_training(x, y)?;
    let spec = MlpSpec::new(
        x.cols(),
        &[(config.cmlp_hidden, Activation::LeakyRelu(config.cmlp_leaky_slope))],
        vec![HeadSpec {
            dim: n_classes,
            kind: HeadKind::Softmax,
        }],
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParameterSet::init(&spec, &mut rng);
    let mut adam = AdamState::new(&params, config.cmlp_adam)?;
    let mut order: Vec<usize> = (0..x.rows()).collect();
    for _ in 0..config.cmlp_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.cmlp_batch_size.max(1)) {
            let mut onehot = vec![0.0; chunk.len() * n_classes];
            for (r, &i) in chunk.iter().enumerate() {
                onehot[r * n_classes + y[i]] = 1.0;
            }
            let mut g = Graph::new();
            let bound = BoundParams::trainable(&mut g, &params);
            let xv = g.constant(x.select_rows(chunk));
            let heads = forward_graph(&mut g, &spec, &bound, xv, None)?;
            let lp = g.log_softmax(heads.logits[0]);
            let t = g.constant(Tensor::matrix(chunk.len(), n_classes, onehot)?);
            let picked = g.mul(lp, t)?;
            let s = g.sum(picked);
            let loss = g.scale(s, -1.0 / chunk.len() as f64);
            let grads = g.backward(loss)?;
            let pg = bound.gradients(&g, &grads);
            adam_step(&mut params, &pg, &mut adam)?;
        }
    }
    Ok(Cmlp { spec, params })
}

impl Cmlp {
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let probs = forward(&self.spec, &self.params, x, None)?;
        Ok(probs[0].iter_rows().map(argmax).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    DecisionTree(DecisionTree),
    Knn(Knn),
    Cmlp(Cmlp),
}

pub fn train_classifier(
    kind: ClassifierKind,
    x: &Tensor,
    y: &[usize],
    config: &ClassifierConfig,
    seed: u64,
) -> Result<Classifier> {
    Ok(match kind {
        ClassifierKind::DecisionTree => Classifier::DecisionTree(train_decision_tree(x, y, config.tree_max_depth)?),
        ClassifierKind::Knn => Classifier::Knn(train_knn(x, y, config.knn_k)?),
        ClassifierKind::Cmlp => Classifier::Cmlp(train_cmlp(x, y, config, seed)?),
    })
}

impl Classifier {
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        match self {
            Classifier::DecisionTree(t) => Ok(x.iter_rows().map(|r| t.predict_row(r)).collect()),
            Classifier::Knn(k) => x.iter_rows().map(|r| k.predict_row(r)).collect(),
            Classifier::Cmlp(m) => m.predict(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn tree_separates_on_single_feature() {
        let x = Tensor::matrix(6, 2, vec![0., 1., 0., 0., 0., 1., 1., 0., 1., 1., 1., 0.]).unwrap();
        let y = [0, 0, 0, 1, 1, 1];
        let t = train_decision_tree(&x, &y, 12).unwrap();
        assert_eq!(Classifier::DecisionTree(t.clone()).predict(&x).unwrap(), y);
        assert_eq!(t.depth(), 1);
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn tree_tie_prefers_lowest_feature() {
        // features 0 and 1 are identical copies of the label
        let x = Tensor::matrix(4, 2, vec![0., 0., 0., 0., 1., 1., 1., 1.]).unwrap();
        let t = train_decision_tree(&x, &[0, 0, 1, 1], 12).unwrap();
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn tree_respects_max_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::matrix(200, 6, (0..1200).map(|_| f64::from(rng.random_range(0..2u8))).collect()).unwrap();
        let y: Vec<usize> = (0..200).map(|i| i % 2).collect();
        assert!(train_decision_tree(&x, &y, 3).unwrap().depth() <= 3);
    }

    #[test]
    fn knn_exact_match_and_ties() {
        let x = Tensor::matrix(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let knn = train_knn(&x, &[1, 0, 1], 1).unwrap();
        assert_eq!(knn.predict_row(&[0., 1., 0.]).unwrap(), 0);
        assert_eq!(knn.predict_row(&[1., 0., 0.]).unwrap(), 1);
        // k=2 over two equidistant points with labels 1 and 0 -> tie -> class 0
        let x = Tensor::matrix(2, 2, vec![1., 0., 0., 1.]).unwrap();
        let knn = train_knn(&x, &[1, 0], 2).unwrap();
        assert_eq!(knn.predict_row(&[0., 0.]).unwrap(), 0);
        assert!(knn.predict_row(&[0.5, 0.]).is_err());
    }

    #[test]
    fn cmlp_learns_separable_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 400;
        let mut d = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            d.extend([a, b]);
            y.push(usize::from(a + b > 0.0));
        }
        let x = Tensor::matrix(n, 2, d).unwrap();
        let cfg = ClassifierConfig {
            cmlp_epochs: 200,
            cmlp_batch_size: 64,
            ..ClassifierConfig::default()
        };
        let m = train_cmlp(&x, &y, &cfg, 3).unwrap();
        let pred = m.predict(&x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / n as f64;
        assert!(acc >= 0.99, "{acc}");
    }

    #[test]
    fn degenerate_training_sets() {
        let x = Tensor::matrix(2, 1, vec![0., 1.]).unwrap();
        for kind in ClassifierKind::ALL {
            assert!(train_classifier(kind, &x, &[1, 1], &ClassifierConfig::default(), 0).is_err());
            assert!(train_classifier(kind, &Tensor::zeros(0, 1), &[], &ClassifierConfig::default(), 0).is_err());
        }
    }
}
