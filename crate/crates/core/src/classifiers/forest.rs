//! Bagged CART trees with Gini splits over random feature subsets.

use crate::par::{self, Execution};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf { vote: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn vote(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { vote } => return vote,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Fraction of trees voting malignant.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.vote(x)).sum::<f64>() / self.trees.len() as f64
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Majority vote; an even split votes one half.
fn leaf(pos: usize, n: usize) -> Node {
    let vote = match (2 * pos).cmp(&n) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => 0.5,
    };
    Node::Leaf { vote }
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    mtry: usize,
    max_depth: usize,
    rng: SplitMix64,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let dim = self.rows[0].len();
        let mut features: Vec<usize> = (0..dim).collect();
        // Partial Fisher-Yates: the first `mtry` entries are the sample.
        for k in 0..self.mtry.min(dim) {
            let j = k + self.rng.below(dim - k);
            features.swap(k, j);
        }
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        let parent = gini(total_pos, n);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted: Vec<usize> = idx.to_vec();
        for &f in &features[..self.mtry.min(dim)] {
            sorted.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let mut left_pos = 0;
            for k in 0..n - 1 {
                left_pos += self.labels[sorted[k]];
                let (a, b) = (self.rows[sorted[k]][f], self.rows[sorted[k + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = k + 1;
                let weighted = (nl as f64 * gini(left_pos, nl) + (n - nl) as f64 * gini(total_pos - left_pos, n - nl)) / n as f64;
                let gain = parent - weighted;
                if gain > 1e-12 && best.map_or(true, |(_, _, g)| gain > g) {
                    best = Some((f, a + (b - a) / 2.0, gain));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let pos = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        self.nodes.push(leaf(pos, idx.len()));
        if depth >= self.max_depth || pos == 0 || pos == idx.len() || idx.len() < 2 {
            return id;
        }
        if let Some((feature, threshold)) = self.best_split(idx) {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.rows[i][feature] <= threshold);
            let left = self.grow(&l, depth + 1);
            let right = self.grow(&r, depth + 1);
            self.nodes[id] = Node::Split { feature, threshold, left, right };
        }
        id
    }
}

pub(crate) fn train(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_trees: usize,
    max_depth: usize,
    seed: u64,
    exec: Execution,
) -> Forest {
    let n = rows.len();
    let mtry = ((rows[0].len() as f64).sqrt().floor() as usize).max(1);
    let trees = par::map_range(exec, n_trees, |t| {
        let mut rng = SplitMix64::new(derive_seed(seed, t as u64));
        let bag: Vec<usize> = (0..n).map(|_| rng.below(n)).collect();
        let mut b = Builder { rows, labels, mtry, max_depth, rng, nodes: Vec::new() };
        b.grow(&bag, 0);
        Tree { nodes: b.nodes }
    });
    Forest { trees }
}
