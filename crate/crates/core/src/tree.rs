//! Cost-sensitive classification trees used as weak learners.
//!
//! A tree `Phi` is grown to minimize `sum_i alpha[i][Phi(x_i)]` for a
//! nonnegative `n x K` weight table `alpha`. Growth is best-first: the
//! leaf whose best axis-aligned split lowers the weighted cost the most is
//! split next, until the leaf budget is reached or no split helps.

use std::fmt;

use crate::data::Matrix;
use crate::error::{invalid, Error, Result};
use crate::simplex::argmin;

/// Relative cost reduction a split must exceed to be taken.
const MIN_GAIN: f64 = 1e-12;

/// Per-example, per-class weights `alpha[i][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl WeightTable {
    pub fn new(n: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * k {
            return Err(invalid(format!(
                "weight table {n} x {k} needs {} values, got {}",
                n * k,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!(
                "weight at row {}, class {} must be finite and >= 0, got {}",
                i / k + 1,
                i % k + 1,
                values[i]
            )));
        }
        Ok(Self { n, k, values })
    }

    pub(crate) fn zeros(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            values: vec![0.0; n * k],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, class: usize) -> f64 {
        self.values[i * self.k + class]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Divides every entry by the table sum.
    pub(crate) fn normalize(&mut self) -> f64 {
        let s = self.total();
        if s > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= s);
        }
        s
    }
}

/// The class minimizing the summed weights of `rows`; ties go to the
/// smallest class index.
pub fn leaf_label<R: AsRef<[f64]>>(rows: &[R]) -> Result<usize> {
    let first = rows
        .first()
        .ok_or_else(|| invalid("leaf label of an empty row set"))?;
    let k = first.as_ref().len();
    let mut sums = vec![0.0; k];
    for r in rows {
        let r = r.as_ref();
        if r.len() != k {
            return Err(invalid("weight rows have different lengths"));
        }
        sums.iter_mut().zip(r).for_each(|(s, v)| *s += v);
    }
    Ok(argmin(sums))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf {
        class: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// An axis-aligned classification tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    n_features: usize,
    n_classes: usize,
    leaf_count: usize,
}

impl Tree {
    /// Validates and assembles a tree.
    ///
    /// Children must have larger indices than their parent and every node
    /// must be reachable exactly once from the root.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize, n_classes: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid("a tree needs at least one node"));
        }
        let mut parents = vec![0usize; nodes.len()];
        let mut leaf_count = 0;
        for (id, node) in nodes.iter().enumerate() {
            match *node {
                Node::Leaf { class } => {
                    if class >= n_classes {
                        return Err(invalid(format!(
                            "node {id}: class {} out of range for K = {n_classes}",
                            class + 1
                        )));
                    }
                    leaf_count += 1;
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features {
                        return Err(invalid(format!(
                            "node {id}: feature index {feature} out of range for {n_features} features"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(invalid(format!("node {id}: threshold is not finite")));
                    }
                    for child in [left, right] {
                        if child <= id || child >= nodes.len() {
                            return Err(invalid(format!("node {id}: bad child index {child}")));
                        }
                        parents[child] += 1;
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(invalid("tree nodes do not form a single binary tree"));
        }
        Ok(Self {
            nodes,
            n_features,
            n_classes,
            leaf_count,
        })
    }

    /// A one-leaf tree predicting `class` everywhere.
    pub fn constant(class: usize, n_features: usize, n_classes: usize) -> Result<Self> {
        Self::from_nodes(vec![Node::Leaf { class }], n_features, n_classes)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Index of the leaf node `x` is routed to.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Class of the leaf `x` falls into. `x` must have at least
    /// [`n_features`](Self::n_features) entries.
    pub fn predict(&self, x: &[f64]) -> usize {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { class } => class,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Parses the line format written by `Display`.
    pub fn parse<'a>(
        lines: impl IntoIterator<Item = (usize, &'a str)>,
        n_features: usize,
        n_classes: usize,
    ) -> Result<Self> {
        let mut nodes = Vec::new();
        for (line_no, line) in lines {
            let err = |message: String| Error::Format {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 7 {
                return Err(err(format!("expected 7 node fields, got {}", fields.len())));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| err(format!("bad node id `{}`", fields[0])))?;
            if id != nodes.len() {
                return Err(err(format!("node ids must be sequential, got {id}")));
            }
            let num = |s: &str, what: &str| -> Result<usize> {
                s.parse()
                    .map_err(|_| err(format!("bad {what} `{s}`")))
            };
            let node = match fields[1] {
                "leaf" => {
                    let label = num(fields[4], "label")?;
                    if label == 0 {
                        return Err(err("class labels are 1-based".into()));
                    }
                    Node::Leaf { class: label - 1 }
                }
                "split" => Node::Split {
                    feature: num(fields[2], "feature")?,
                    threshold: fields[3]
                        .parse()
                        .map_err(|_| err(format!("bad threshold `{}`", fields[3])))?,
                    left: num(fields[5], "left child")?,
                    right: num(fields[6], "right child")?,
                },
                other => return Err(err(format!("unknown node kind `{other}`"))),
            };
            nodes.push(node);
        }
        Self::from_nodes(nodes, n_features, n_classes)
    }
}

impl fmt::Display for Tree {
    /// One node per line: `id kind feature threshold label left right`,
    /// with `-` for fields that do not apply. Labels are 1-based, feature
    /// indices 0-based.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { class } => writeln!(f, "{id} leaf - - {} - -", class + 1)?,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => writeln!(f, "{id} split {feature} {threshold:?} - {left} {right}")?,
            }
        }
        Ok(())
    }
}

/// Per-feature row orderings of a fixed training matrix, reused across
/// boosting rounds.
#[derive(Debug, Clone)]
pub struct TreeLearner<'a> {
    x: &'a Matrix,
    sorted: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    feature: usize,
    threshold: f64,
}

struct Growing {
    /// Weighted cost of the leaf as a single region.
    cost: f64,
    class: usize,
    best: Option<Candidate>,
}

impl<'a> TreeLearner<'a> {
    pub fn new(x: &'a Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(invalid("cannot fit a tree to zero rows"));
        }
        if x.rows() > u32::MAX as usize {
            return Err(invalid("too many rows"));
        }
        let sorted = (0..x.cols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, j).total_cmp(&x.get(b as usize, j)));
                idx
            })
            .collect();
        Ok(Self { x, sorted })
    }

    /// Fits a tree and returns it with the leaf node index of every
    /// training row.
    pub fn fit(&self, weights: &WeightTable, max_leaves: usize) -> Result<(Tree, Vec<usize>)> {
        let n = self.x.rows();
        if weights.n() != n {
            return Err(invalid(format!(
                "weight table has {} rows but the data has {n}",
                weights.n()
            )));
        }
        if max_leaves < 2 {
            return Err(invalid(format!("max_leaves must be >= 2, got {max_leaves}")));
        }
        let k = weights.k();
        let min_gain = MIN_GAIN * weights.total();

        // Leaf ids index `growing`; `node_of_row` holds each row's leaf id.
        let mut node_of_row = vec![0usize; n];
        let mut growing: Vec<Growing> = Vec::new();
        let mut structure: Vec<Option<(usize, f64, usize, usize)>> = Vec::new();
        let mut scratch = Scratch::new(k);

        let root = self.evaluate_leaf(weights, &node_of_row, 0, &mut scratch);
        growing.push(root);
        structure.push(None);
        let mut leaves = 1;

        while leaves < max_leaves {
            let mut pick: Option<(usize, f64)> = None;
            for (id, g) in growing.iter().enumerate() {
                if structure[id].is_some() {
                    continue;
                }
                if let Some(c) = g.best {
                    let gain = g.cost - c.cost;
                    if gain > min_gain && pick.is_none_or(|(_, best)| gain > best) {
                        pick = Some((id, gain));
                    }
                }
            }
            let Some((id, _)) = pick else { break };
            let cand = growing[id].best.expect("picked leaf has a split");
            let left = growing.len();
            let right = left + 1;
            for (i, node) in node_of_row.iter_mut().enumerate() {
                if *node == id {
                    *node = if self.x.get(i, cand.feature) <= cand.threshold {
                        left
                    } else {
                        right
                    };
                }
            }
            structure[id] = Some((cand.feature, cand.threshold, left, right));
            for child in [left, right] {
                let g = self.evaluate_leaf(weights, &node_of_row, child, &mut scratch);
                growing.push(g);
                structure.push(None);
            }
            leaves += 1;
        }

        // Renumber breadth-first so children follow parents.
        let mut order = vec![0usize];
        let mut new_id = vec![usize::MAX; growing.len()];
        let mut head = 0;
        while head < order.len() {
            let id = order[head];
            new_id[id] = head;
            if let Some((_, _, l, r)) = structure[id] {
                order.push(l);
                order.push(r);
            }
            head += 1;
        }
        let nodes = order
            .iter()
            .map(|&id| match structure[id] {
                Some((feature, threshold, l, r)) => Node::Split {
                    feature,
                    threshold,
                    left: new_id[l],
                    right: new_id[r],
                },
                None => Node::Leaf {
                    class: growing[id].class,
                },
            })
            .collect();
        let tree = Tree::from_nodes(nodes, self.x.cols(), k)?;
        let assignment = node_of_row.iter().map(|&id| new_id[id]).collect();
        Ok((tree, assignment))
    }

    fn evaluate_leaf(
        &self,
        weights: &WeightTable,
        node_of_row: &[usize],
        leaf: usize,
        s: &mut Scratch,
    ) -> Growing {
        let k = weights.k();
        s.total.fill(0.0);
        for (i, &node) in node_of_row.iter().enumerate() {
            if node == leaf {
                s.total
                    .iter_mut()
                    .zip(weights.row(i))
                    .for_each(|(t, w)| *t += w);
            }
        }
        let class = argmin(s.total.iter().copied());
        let cost = s.total[class];

        let mut best: Option<Candidate> = None;
        for (feature, order) in self.sorted.iter().enumerate() {
            s.left.fill(0.0);
            let mut prev: Option<f64> = None;
            for &row in order {
                let row = row as usize;
                if node_of_row[row] != leaf {
                    continue;
                }
                let v = self.x.get(row, feature);
                if let Some(p) = prev {
                    if v > p {
                        let lc = s.left.iter().copied().fold(f64::INFINITY, f64::min);
                        let rc = (0..k)
                            .map(|c| s.total[c] - s.left[c])
                            .fold(f64::INFINITY, f64::min);
                        let split_cost = lc + rc.max(0.0);
                        if best.is_none_or(|b| split_cost < b.cost) {
                            best = Some(Candidate {
                                cost: split_cost,
                                feature,
                                threshold: midpoint(p, v),
                            });
                        }
                    }
                }
                s.left
                    .iter_mut()
                    .zip(weights.row(row))
                    .for_each(|(l, w)| *l += w);
                prev = Some(v);
            }
        }
        Growing { cost, class, best }
    }
}

struct Scratch {
    total: Vec<f64>,
    left: Vec<f64>,
}

impl Scratch {
    fn new(k: usize) -> Self {
        Self {
            total: vec![0.0; k],
            left: vec![0.0; k],
        }
    }
}

/// A threshold `t` with `lo <= t < hi`, the midpoint when representable.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + 0.5 * (hi - lo);
    if lo <= m && m < hi {
        m
    } else {
        lo
    }
}

/// Fits a tree with at most `max_leaves` leaves to the weight table.
pub fn fit_tree(x: &Matrix, weights: &WeightTable, max_leaves: usize) -> Result<Tree> {
    TreeLearner::new(x)?.fit(weights, max_leaves).map(|(t, _)| t)
}

/// `sum_i alpha[i][tree(x_i)]`.
pub fn weighted_cost(tree: &Tree, x: &Matrix, weights: &WeightTable) -> f64 {
    (0..x.rows())
        .map(|i| weights.get(i, tree.predict(x.row(i))))
        .sum()
}
