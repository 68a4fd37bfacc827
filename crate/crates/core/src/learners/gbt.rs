//! Gradient-boosted regression trees for binary log-loss.
//!
//! Trees are grown level by level with exact greedy splits chosen by
//! variance reduction of the current residuals `y - p`. Leaf values are
//! Newton steps `sum(r) / (sum(p(1-p)) + lambda)`. If adding a tree would
//! raise the training loss its contribution is halved until it does not.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::sigmoid;
use crate::error::{Error, Result};
use crate::serial::{ArrayBlob, Envelope, Persist};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub lambda: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_leaf: 5,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf(value)],
        }
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub params: GbtParams,
    pub input_dim: usize,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Training log-loss before the first tree and after each one.
    pub loss_trace: Vec<f64>,
}

fn log_loss(margins: &[f64], y: &[f64]) -> f64 {
    margins
        .iter()
        .zip(y)
        .map(|(&z, &t)| z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z)
        .sum::<f64>()
        / margins.len() as f64
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    sorted: &'a [Vec<usize>],
    params: &'a GbtParams,
}

impl Grower<'_> {
    /// Grows one tree on residuals `r` with hessians `h`.
    fn grow(&self, r: &[f64], h: &[f64]) -> Tree {
        let n = r.len();
        let mut nodes = vec![Node::Leaf(0.0)];
        // current node of each row; rows in finished leaves keep their id
        let mut node_of = vec![0usize; n];
        let mut frontier = vec![0usize];
        for _depth in 0..self.params.max_depth {
            if frontier.is_empty() {
                break;
            }
            let slot: Vec<Option<usize>> = {
                let mut s = vec![None; nodes.len()];
                for (k, &id) in frontier.iter().enumerate() {
                    s[id] = Some(k);
                }
                s
            };
            let m = frontier.len();
            let mut tot_sum = vec![0.0; m];
            let mut tot_cnt = vec![0usize; m];
            for i in 0..n {
                if let Some(k) = slot[node_of[i]] {
                    tot_sum[k] += r[i];
                    tot_cnt[k] += 1;
                }
            }
            let mut best: Vec<Option<Candidate>> = vec![None; m];
            for (f, order) in self.sorted.iter().enumerate() {
                let mut left_sum = vec![0.0; m];
                let mut left_cnt = vec![0usize; m];
                let mut prev: Vec<f64> = vec![f64::NAN; m];
                for &i in order {
                    let Some(k) = slot[node_of[i]] else { continue };
                    let v = self.x[[i, f]];
                    let lc = left_cnt[k];
                    if lc >= self.params.min_leaf && tot_cnt[k] - lc >= self.params.min_leaf && v > prev[k] {
                        let ls = left_sum[k];
                        let rs = tot_sum[k] - ls;
                        let rc = tot_cnt[k] - lc;
                        let gain = ls * ls / lc as f64 + rs * rs / rc as f64
                            - tot_sum[k] * tot_sum[k] / tot_cnt[k] as f64;
                        if gain > 1e-12 && best[k].is_none_or(|b| gain > b.gain) {
                            let a = prev[k];
                            let mut t = a + (v - a) / 2.0;
                            if t >= v {
                                t = a;
                            }
                            best[k] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold: t,
                            });
                        }
                    }
                    left_sum[k] += r[i];
                    left_cnt[k] += 1;
                    prev[k] = v;
                }
            }
            let mut next = Vec::new();
            let mut child_of: Vec<Option<(usize, usize, usize, f64)>> = vec![None; nodes.len()];
            for (k, &id) in frontier.iter().enumerate() {
                if let Some(c) = best[k] {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf(0.0));
                    nodes.push(Node::Leaf(0.0));
                    nodes[id] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    child_of[id] = Some((left, right, c.feature, c.threshold));
                    next.push(left);
                    next.push(right);
                }
            }
            for (i, node) in node_of.iter_mut().enumerate() {
                if let Some(Some((l, rt, f, t))) = child_of.get(*node) {
                    *node = if self.x[[i, *f]] <= *t { *l } else { *rt };
                }
            }
            frontier = next;
        }
        let mut g_sum = vec![0.0; nodes.len()];
        let mut h_sum = vec![0.0; nodes.len()];
        for i in 0..n {
            g_sum[node_of[i]] += r[i];
            h_sum[node_of[i]] += h[i];
        }
        for (id, node) in nodes.iter_mut().enumerate() {
            if let Node::Leaf(v) = node {
                *v = g_sum[id] / (h_sum[id] + self.params.lambda);
            }
        }
        Tree { nodes }
    }
}

pub fn fit_gbt(x: ArrayView2<f64>, y: &[bool], params: &GbtParams) -> Result<GbtModel> {
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n == 0 {
        return Err(Error::invalid("GBT needs at least one row"));
    }
    if params.max_depth == 0 || params.min_leaf == 0 || !(params.learning_rate > 0.0) {
        return Err(Error::invalid(format!("invalid GBT parameters {params:?}")));
    }
    let t: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let pos = t.iter().sum::<f64>();
    // clipped so single-class data still gets a finite prior
    let prior = ((pos + 0.5) / (n as f64 + 1.0)).clamp(1e-6, 1.0 - 1e-6);
    let base_score = (prior / (1.0 - prior)).ln();

    let sorted: Vec<Vec<usize>> = (0..d)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
            idx
        })
        .collect();
    let grower = Grower {
        x,
        sorted: &sorted,
        params,
    };

    let mut margins = vec![base_score; n];
    let mut loss = log_loss(&margins, &t);
    let mut loss_trace = vec![loss];
    let mut trees = Vec::with_capacity(params.n_trees);
    for round in 0..params.n_trees {
        let p: Vec<f64> = margins.iter().map(|&z| sigmoid(z)).collect();
        let r: Vec<f64> = t.iter().zip(&p).map(|(t, p)| t - p).collect();
        let h: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let mut tree = grower.grow(&r, &h);
        let outputs: Vec<f64> = (0..n).map(|i| tree.predict(x.row(i))).collect();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = margins
                .iter()
                .zip(&outputs)
                .map(|(m, o)| m + params.learning_rate * scale * o)
                .collect();
            let l = log_loss(&trial, &t);
            if !l.is_finite() {
                return Err(Error::Numerical(format!("GBT loss non-finite in round {round}")));
            }
            if l <= loss {
                accepted = Some((trial, l));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((trial, l)) => {
                if scale != 1.0 {
                    for node in &mut tree.nodes {
                        if let Node::Leaf(v) = node {
                            *v *= scale;
                        }
                    }
                }
                margins = trial;
                loss = l;
            }
            None => tree = Tree::leaf(0.0),
        }
        loss_trace.push(loss);
        trees.push(tree);
    }
    Ok(GbtModel {
        params: *params,
        input_dim: d,
        base_score,
        trees,
        loss_trace,
    })
}

impl GbtModel {
    pub fn margin(&self, x: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let s: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(self.base_score + self.params.learning_rate * s)
    }

    pub fn predict_prob(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.margin(x).map(sigmoid)
    }

    pub fn max_tree_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }
}

#[derive(Serialize, Deserialize)]
struct Params {
    params: GbtParams,
    input_dim: usize,
    tree_sizes: Vec<usize>,
}

impl Persist for GbtModel {
    const KIND: &'static str = "gbt";

    fn to_envelope(&self) -> Envelope {
        // per node: feature (-1 for a leaf), threshold or leaf value, left, right
        let mut nodes = Vec::new();
        for tree in &self.trees {
            for node in &tree.nodes {
                match *node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => nodes.extend([feature as f64, threshold, left as f64, right as f64]),
                    Node::Leaf(v) => nodes.extend([-1.0, v, 0.0, 0.0]),
                }
            }
        }
        let total = nodes.len() / 4;
        Envelope::new(
            Self::KIND,
            Params {
                params: self.params,
                input_dim: self.input_dim,
                tree_sizes: self.trees.iter().map(|t| t.nodes.len()).collect(),
            },
        )
        .with_array("base_score", ArrayBlob::from_vec1(&[self.base_score]))
        .with_array("nodes", ArrayBlob::from_slice(vec![total, 4], &nodes))
        .with_array("loss_trace", ArrayBlob::from_vec1(&self.loss_trace))
    }

    fn from_envelope(env: &Envelope) -> Result<Self> {
        let p: Params = env.params()?;
        let base = env.array("base_score")?.values()?;
        let flat = env.array("nodes")?.values()?;
        if base.len() != 1 || flat.len() != 4 * p.tree_sizes.iter().sum::<usize>() {
            return Err(Error::Format("GBT node table does not match tree sizes".into()));
        }
        let mut rows = flat.chunks_exact(4);
        let mut trees = Vec::with_capacity(p.tree_sizes.len());
        for &size in &p.tree_sizes {
            let mut nodes = Vec::with_capacity(size);
            for _ in 0..size {
                let r = rows.next().unwrap();
                let node = if r[0] < 0.0 {
                    Node::Leaf(r[1])
                } else {
                    let (feature, left, right) = (r[0] as usize, r[2] as usize, r[3] as usize);
                    if feature >= p.input_dim || left >= size || right >= size {
                        return Err(Error::Format("GBT node index out of range".into()));
                    }
                    Node::Split {
                        feature,
                        threshold: r[1],
                        left,
                        right,
                    }
                };
                nodes.push(node);
            }
            trees.push(Tree { nodes });
        }
        Ok(Self {
            params: p.params,
            input_dim: p.input_dim,
            base_score: base[0],
            trees,
            loss_trace: env.array("loss_trace")?.values()?,
        })
    }
}
