//! The trajectory aggregation tree.
//!
//! Candidate plans are folded into a rooted tree one element at a time. Each
//! node keeps the elements merged into it, the weight `λ^t` each one brought,
//! and the weighted average of those elements as its state. Decisions pick the
//! root child with the largest accumulated weight, and pruning promotes that
//! child to the new root.
//!
//! Nodes live in an arena (`Vec<TreeNode>`, root at slot 0). Pruning compacts
//! the arena, so slots are only meaningful for the revision they were handed
//! out in; every mutation bumps the revision and handles from older revisions
//! are rejected.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::element::{StateMode, TatConfig, Trajectory, TrajectoryElement};
use crate::error::{Result, TatError};
use crate::fmt::sig12;

pub type NodeId = u64;

/// One node: merged elements `X`, their weights `V`, and the cached state
/// `x(e) = Σ x_i v_i / Σ v_i`.
#[derive(Debug, Clone)]
pub struct TreeNode {
    id: NodeId,
    depth: usize,
    parent: Option<usize>,
    elements: Vec<TrajectoryElement>,
    weights: Vec<f64>,
    weight_sum: f64,
    weighted_sum: Vec<f64>,
    state: TrajectoryElement,
    children: Vec<usize>,
}

impl TreeNode {
    fn empty(id: NodeId, depth: usize, parent: Option<usize>, dim: usize) -> Self {
        Self {
            id,
            depth,
            parent,
            elements: Vec::new(),
            weights: Vec::new(),
            weight_sum: 0.0,
            weighted_sum: vec![0.0; dim],
            state: TrajectoryElement::zeros(dim),
            children: Vec::new(),
        }
    }

    fn insert(&mut self, x: &TrajectoryElement, weight: f64) {
        if self.weighted_sum.len() != x.dim() {
            self.weighted_sum = vec![0.0; x.dim()];
        }
        for (acc, &v) in self.weighted_sum.iter_mut().zip(x.iter()) {
            *acc += v * weight;
        }
        self.weight_sum += weight;
        self.elements.push(x.clone());
        self.weights.push(weight);
        let total = self.weight_sum;
        self.state = TrajectoryElement::new(self.weighted_sum.iter().map(|a| a / total).collect());
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn elements(&self) -> &[TrajectoryElement] {
        &self.elements
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn state(&self) -> &TrajectoryElement {
        &self.state
    }

    /// `|X(e)|`.
    pub fn support(&self) -> usize {
        self.elements.len()
    }

    pub fn child_count(&self) -> usize {
        self.children.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// `Q(e) = Σ V(e)`.
    pub fn total_weight(&self) -> f64 {
        self.weight_sum
    }
}

/// `Q(e)`, the accumulated weight of a node; zero for an empty node.
pub fn node_total_weight(node: &TreeNode) -> f64 {
    node.total_weight()
}

/// Handle to a node, valid for the tree revision it was issued in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef {
    pub id: NodeId,
    slot: usize,
}

/// Result of walking a trajectory down the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    /// First index `L` that found no similar child; `horizon + 1` when the
    /// whole trajectory merged.
    pub merge_depth: usize,
    /// The depth `L - 1` node the unmerged tail hangs off.
    pub last_merged: NodeRef,
    revision: u64,
}

/// The acting step's choice among the root children.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub selected_child: NodeRef,
    pub target_state: TrajectoryElement,
    /// Action suffix of `target_state` when the tree runs on state-action
    /// elements; `None` for state-centric elements.
    pub action: Option<Vec<f64>>,
    pub weight: f64,
    pub support: usize,
    /// Trajectories of the batch that were refused by `plan_step`.
    pub rejected: usize,
    revision: u64,
}

#[derive(Debug, Clone)]
pub struct AggregationTree {
    config: TatConfig,
    nodes: Vec<TreeNode>,
    dim: Option<usize>,
    next_id: NodeId,
    revision: u64,
}

impl AggregationTree {
    /// A tree holding only an empty root whose state is the zero vector. The
    /// element dimension is fixed by the first trajectory.
    pub fn new(config: TatConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            nodes: vec![TreeNode::empty(0, 0, None, 0)],
            dim: None,
            next_id: 1,
            revision: 0,
        })
    }

    /// Like [`AggregationTree::new`] with the element dimension known up front.
    pub fn with_dimension(config: TatConfig, dim: usize) -> Result<Self> {
        let mut tree = Self::new(config)?;
        tree.fix_dimension(dim);
        Ok(tree)
    }

    pub fn config(&self) -> &TatConfig {
        &self.config
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// All live nodes, root first. Parents always precede their children.
    pub fn nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter()
    }

    pub fn children<'a>(&'a self, node: &'a TreeNode) -> impl Iterator<Item = &'a TreeNode> + 'a {
        node.children.iter().map(move |&s| &self.nodes[s])
    }

    pub fn parent(&self, node: &TreeNode) -> Option<&TreeNode> {
        node.parent.map(|s| &self.nodes[s])
    }

    pub fn find(&self, id: NodeId) -> Option<&TreeNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn get(&self, node: NodeRef) -> Option<&TreeNode> {
        self.nodes.get(node.slot).filter(|n| n.id == node.id)
    }

    /// Sum of every stored weight in the tree.
    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.weights.iter().sum::<f64>()).sum()
    }

    fn fix_dimension(&mut self, dim: usize) {
        if self.dim.is_none() {
            self.dim = Some(dim);
            let root = &mut self.nodes[0];
            if root.elements.is_empty() {
                root.state = TrajectoryElement::zeros(dim);
                root.weighted_sum = vec![0.0; dim];
            }
        }
    }

    fn weight_at(&self, t: usize) -> f64 {
        self.config.lambda.powi(t as i32)
    }

    fn node_ref(&self, slot: usize) -> NodeRef {
        NodeRef {
            id: self.nodes[slot].id,
            slot,
        }
    }

    /// Most similar child of `slot` passing the merge gate. Ties in similarity
    /// go to the earlier child.
    fn matching_child(&self, slot: usize, x: &TrajectoryElement) -> Option<usize> {
        let parent = &self.nodes[slot];
        match self.config.state_mode {
            StateMode::Discrete => parent
                .children
                .iter()
                .copied()
                .find(|&c| self.nodes[c].elements.first().is_some_and(|e| e.values() == x.values())),
            StateMode::Continuous => {
                let mut best: Option<(usize, f64)> = None;
                for &c in &parent.children {
                    let sim = similarity(x, &self.nodes[c].state, self.config.zero_norm_epsilon);
                    if sim > self.config.alpha && best.is_none_or(|(_, b)| sim > b) {
                        best = Some((c, sim));
                    }
                }
                best.map(|(c, _)| c)
            }
        }
    }

    /// Merges `traj` along the most similar path from the root.
    ///
    /// `x_0` always lands in the root with weight 1. The walk stops at the
    /// first `x_t` with no child above the similarity gate (strictly greater
    /// than `alpha`, or exact equality in discrete mode). The trajectory is
    /// validated before anything is touched, so a rejected trajectory leaves
    /// the tree unchanged.
    pub fn merge_trajectory(&mut self, traj: &Trajectory) -> Result<MergeOutcome> {
        let dim = traj.validate(self.config.horizon, self.dim)?;
        self.fix_dimension(dim);

        self.nodes[0].insert(&traj[0], 1.0);
        let horizon = self.config.horizon;
        let mut current = 0;
        let mut merge_depth = horizon + 1;
        for t in 1..=horizon {
            match self.matching_child(current, &traj[t]) {
                Some(child) => {
                    let w = self.weight_at(t);
                    self.nodes[child].insert(&traj[t], w);
                    current = child;
                }
                None => {
                    merge_depth = t;
                    break;
                }
            }
        }
        self.revision += 1;
        Ok(MergeOutcome {
            merge_depth,
            last_merged: self.node_ref(current),
            revision: self.revision,
        })
    }

    /// Hangs `x_L, ..., x_T` off `outcome.last_merged` as a fresh chain and
    /// returns the number of nodes created.
    pub fn expand(&mut self, traj: &Trajectory, outcome: &MergeOutcome) -> Result<usize> {
        if outcome.revision != self.revision || self.get(outcome.last_merged).is_none() {
            return Err(TatError::StaleMergeOutcome);
        }
        let horizon = self.config.horizon;
        if traj.len() != horizon + 1 {
            return Err(TatError::HorizonMismatch {
                horizon,
                actual: traj.len(),
            });
        }
        let dim = self.dim.unwrap_or(0);
        let mut parent = outcome.last_merged.slot;
        for t in outcome.merge_depth..=horizon {
            let slot = self.nodes.len();
            let depth = self.nodes[parent].depth + 1;
            let mut node = TreeNode::empty(self.next_id, depth, Some(parent), dim);
            self.next_id += 1;
            node.insert(&traj[t], self.weight_at(t));
            self.nodes.push(node);
            self.nodes[parent].children.push(slot);
            parent = slot;
        }
        self.revision += 1;
        Ok(horizon + 1 - outcome.merge_depth)
    }

    /// Merge followed by expansion; returns the number of new nodes.
    pub fn integrate(&mut self, traj: &Trajectory) -> Result<usize> {
        let outcome = self.merge_trajectory(traj)?;
        self.expand(traj, &outcome)
    }

    /// Heaviest child of `slot`: larger `Q`, then larger `|X|`, then the older
    /// node id.
    fn heaviest_child(&self, slot: usize) -> Option<usize> {
        self.nodes[slot]
            .children
            .iter()
            .copied()
            .max_by(|&a, &b| self.rank(a, b))
    }

    fn rank(&self, a: usize, b: usize) -> Ordering {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        na.weight_sum
            .partial_cmp(&nb.weight_sum)
            .unwrap_or(Ordering::Equal)
            .then(na.elements.len().cmp(&nb.elements.len()))
            .then(nb.id.cmp(&na.id))
    }

    /// Picks the root child with the largest accumulated weight.
    pub fn select_child(&self) -> Result<Decision> {
        let slot = self.heaviest_child(0).ok_or(TatError::NoPlansIntegrated)?;
        let node = &self.nodes[slot];
        Ok(Decision {
            selected_child: self.node_ref(slot),
            target_state: node.state.clone(),
            action: node
                .state
                .action_suffix(self.config.action_dim)
                .map(<[f64]>::to_vec),
            weight: node.weight_sum,
            support: node.elements.len(),
            rejected: 0,
            revision: self.revision,
        })
    }

    /// Promotes the selected child to root and drops every other subtree.
    /// Stored weights keep their insertion-time values.
    pub fn prune(&mut self, decision: &Decision) -> Result<()> {
        let slot = decision.selected_child.slot;
        let valid = decision.revision == self.revision
            && self
                .nodes
                .get(slot)
                .is_some_and(|n| n.id == decision.selected_child.id && n.parent == Some(0));
        if !valid {
            return Err(TatError::StaleDecision);
        }

        let mut old = std::mem::take(&mut self.nodes);
        let mut kept: Vec<TreeNode> = Vec::with_capacity(old.len());
        // (old slot, new parent slot)
        let mut queue = std::collections::VecDeque::from([(slot, None::<usize>)]);
        while let Some((old_slot, new_parent)) = queue.pop_front() {
            let new_slot = kept.len();
            let mut node = std::mem::replace(&mut old[old_slot], TreeNode::empty(0, 0, None, 0));
            node.depth -= 1;
            node.parent = new_parent;
            for c in std::mem::take(&mut node.children) {
                queue.push_back((c, Some(new_slot)));
            }
            if let Some(p) = new_parent {
                kept[p].children.push(new_slot);
            }
            kept.push(node);
        }
        self.nodes = kept;
        self.revision += 1;
        Ok(())
    }

    /// Greedy rollout from the root through the heaviest child at every level;
    /// returns up to `max_depth` node states.
    pub fn best_branch(&self, max_depth: usize) -> Result<Vec<TrajectoryElement>> {
        let mut current = self.heaviest_child(0).ok_or(TatError::NoPlansIntegrated)?;
        let mut branch = Vec::new();
        while branch.len() < max_depth {
            branch.push(self.nodes[current].state.clone());
            match self.heaviest_child(current) {
                Some(next) => current = next,
                None => break,
            }
        }
        Ok(branch)
    }

    /// One environment step: integrate the batch in order, act, prune.
    ///
    /// Trajectories that fail validation are skipped and counted in
    /// `Decision::rejected`; if nothing could be decided the first rejection
    /// is returned.
    pub fn plan_step(&mut self, batch: &[Trajectory]) -> Result<Decision> {
        if batch.is_empty() {
            return Err(TatError::EmptyBatch);
        }
        let mut rejected = 0;
        let mut first_err = None;
        for traj in batch {
            if let Err(e) = self.integrate(traj) {
                rejected += 1;
                first_err.get_or_insert(e);
            }
        }
        let mut decision = match self.select_child() {
            Ok(d) => d,
            Err(e) => return Err(first_err.unwrap_or(e)),
        };
        decision.rejected = rejected;
        self.prune(&decision)?;
        Ok(decision)
    }

    /// Multiplies every stored weight by `c > 0` (node states are unchanged).
    pub fn rescale_weights(&mut self, c: f64) -> Result<()> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(TatError::Domain(format!("scale must be positive, got {c}")));
        }
        for node in &mut self.nodes {
            for w in &mut node.weights {
                *w *= c;
            }
            node.weight_sum *= c;
            for a in &mut node.weighted_sum {
                *a *= c;
            }
        }
        self.revision += 1;
        Ok(())
    }

    /// Subtree mass (sum of `Q` over a node and its descendants) per slot.
    fn subtree_masses(&self) -> Vec<f64> {
        let mut mass: Vec<f64> = self.nodes.iter().map(|n| n.weight_sum).collect();
        // parents precede children in the arena, so a reverse sweep suffices
        for slot in (1..self.nodes.len()).rev() {
            if let Some(p) = self.nodes[slot].parent {
                mass[p] += mass[slot];
            }
        }
        mass
    }

    /// Line-oriented dump in pre-order: one node per line with tab-separated
    /// `id depth parent count q subtree_q state`.
    pub fn dump(&self) -> String {
        let mass = self.subtree_masses();
        let mut out = String::from("# id\tdepth\tparent\tcount\tq\tsubtree_q\tstate\n");
        let mut stack = vec![0usize];
        while let Some(slot) = stack.pop() {
            let n = &self.nodes[slot];
            let parent = n
                .parent
                .map(|p| self.nodes[p].id.to_string())
                .unwrap_or_else(|| "-".into());
            let state: Vec<String> = n.state.iter().map(|&v| sig12(v)).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t[{}]",
                n.id,
                n.depth,
                parent,
                n.elements.len(),
                sig12(n.weight_sum),
                sig12(mass[slot]),
                state.join(",")
            );
            stack.extend(n.children.iter().rev());
        }
        out
    }

    /// Approximate heap plus inline footprint of the tree in bytes.
    pub fn memory_bytes(&self) -> usize {
        use std::mem::size_of;
        let mut total = size_of::<Self>() + self.nodes.capacity() * size_of::<TreeNode>();
        for n in &self.nodes {
            total += n.elements.capacity() * size_of::<TrajectoryElement>();
            total += n.elements.iter().map(|e| e.dim() * size_of::<f64>()).sum::<usize>();
            total += (n.weights.capacity() + n.weighted_sum.capacity() + n.state.dim())
                * size_of::<f64>();
            total += n.children.capacity() * size_of::<usize>();
        }
        total
    }

    /// Verifies the structural and statistical invariants of every node.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let root = &self.nodes[0];
        if root.depth != 0 || root.parent.is_some() {
            return Err("root must sit at depth 0 without a parent".into());
        }
        let mut reachable = 0usize;
        let mut stack = vec![0usize];
        while let Some(slot) = stack.pop() {
            reachable += 1;
            let n = &self.nodes[slot];
            for &c in &n.children {
                let child = &self.nodes[c];
                if child.parent != Some(slot) || child.depth != n.depth + 1 {
                    return Err(format!("node {} has inconsistent parent/depth", child.id));
                }
                stack.push(c);
            }
        }
        if reachable != self.nodes.len() {
            return Err(format!(
                "node_count {} but {} reachable nodes",
                self.nodes.len(),
                reachable
            ));
        }
        for n in &self.nodes {
            if n.elements.len() != n.weights.len() {
                return Err(format!("node {}: |X| != |V|", n.id));
            }
            if let Some(w) = n.weights.iter().find(|&&w| !(w > 0.0 && w <= 1.0)) {
                return Err(format!("node {}: weight {w} outside (0, 1]", n.id));
            }
            if n.elements.is_empty() {
                continue;
            }
            let expected = crate::element::weighted_node_state(&n.elements, &n.weights)
                .map_err(|e| format!("node {}: {e}", n.id))?;
            let drift = expected
                .iter()
                .zip(n.state.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if drift > 1e-9 {
                return Err(format!("node {}: cached state drifted by {drift}", n.id));
            }
        }
        Ok(())
    }
}

// Inputs are validated finite and of equal length by the caller.
fn similarity(a: &[f64], b: &[f64], zero_norm_epsilon: f64) -> f64 {
    crate::element::cosine_similarity(a, b, zero_norm_epsilon).unwrap_or(f64::NEG_INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lambda: f64, horizon: usize) -> TatConfig {
        TatConfig::new(lambda, 0.9995, horizon).unwrap()
    }

    fn traj(rows: &[&[f64]]) -> Trajectory {
        Trajectory::from_rows(rows.iter().map(|r| r.to_vec()))
    }

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn fresh_tree() {
        let tree = AggregationTree::new(cfg(0.98, 3)).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.root().depth(), 0);
        assert_eq!(node_total_weight(tree.root()), 0.0);
        assert!(tree.root().elements().is_empty());
        assert!(AggregationTree::new(cfg(1.0, 1)).is_ok());
        assert!(AggregationTree::new(TatConfig { lambda: 0.0, ..TatConfig::default() }).is_err());
        let tree = AggregationTree::with_dimension(cfg(0.98, 3), 2).unwrap();
        assert_eq!(tree.root().state().values(), &[0.0, 0.0]);
    }

    #[test]
    fn total_weight_examples() {
        let mut tree = AggregationTree::new(cfg(0.98, 2)).unwrap();
        let t = traj(&[&[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        for _ in 0..3 {
            tree.integrate(&t).unwrap();
        }
        let d1 = tree.children(tree.root()).next().unwrap();
        assert!(approx(node_total_weight(d1), 3.0 * 0.98));
        assert!(approx(node_total_weight(tree.root()), 3.0));
        let mut single = AggregationTree::new(cfg(0.98, 1)).unwrap();
        single.integrate(&traj(&[&[1.0], &[2.0]])).unwrap();
        let c = single.children(single.root()).next().unwrap();
        assert_eq!(node_total_weight(c), 0.98);
    }

    #[test]
    fn merge_into_fresh_tree_stops_at_one() {
        let mut tree = AggregationTree::new(cfg(0.98, 3)).unwrap();
        let t = traj(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let out = tree.merge_trajectory(&t).unwrap();
        assert_eq!(out.merge_depth, 1);
        assert_eq!(out.last_merged.id, tree.root().id());
        assert_eq!(tree.expand(&t, &out).unwrap(), 3);
        assert_eq!(tree.node_count(), 4);
    }

    #[test]
    fn duplicate_trajectory_doubles_weights() {
        let mut tree = AggregationTree::new(cfg(0.98, 3)).unwrap();
        let t = traj(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        tree.integrate(&t).unwrap();
        let out = tree.merge_trajectory(&t).unwrap();
        assert_eq!(out.merge_depth, 4);
        assert_eq!(tree.expand(&t, &out).unwrap(), 0);
        for node in tree.nodes() {
            let w = 0.98f64.powi(node.depth() as i32);
            assert_eq!(node.weights(), &[w, w]);
            assert!(approx(node.total_weight(), 2.0 * w));
        }
    }

    #[test]
    fn merge_picks_most_similar_child() {
        let mut tree = AggregationTree::new(cfg(0.98, 1)).unwrap();
        tree.integrate(&traj(&[&[0.0, 0.0], &[1.0, 0.0]])).unwrap();
        tree.integrate(&traj(&[&[0.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(tree.root().child_count(), 2);

        let x1 = [1.0f64, 0.02];
        // independent evaluation of the gate against both children
        let s_a = x1[0] / (x1[0] * x1[0] + x1[1] * x1[1]).sqrt();
        let s_b = x1[1] / (x1[0] * x1[0] + x1[1] * x1[1]).sqrt();
        assert!(s_a > 0.9995 && (s_a - 0.99980).abs() < 1e-5);
        assert!((s_b - 0.0200).abs() < 1e-4);

        let out = tree.merge_trajectory(&traj(&[&[0.0, 0.0], &x1])).unwrap();
        assert_eq!(out.merge_depth, 2);
        let first = tree.children(tree.root()).next().unwrap();
        assert_eq!(first.support(), 2);
        let s = first.state();
        assert!(approx(s[0], 1.0) && approx(s[1], 0.01));
        tree.check_invariants().unwrap();
    }

    #[test]
    fn similarity_gate_is_strict() {
        let alpha = 0.8;
        let config = TatConfig::new(1.0, alpha, 1).unwrap();
        let mut tree = AggregationTree::new(config).unwrap();
        tree.integrate(&traj(&[&[0.0, 0.0], &[1.0, 0.0]])).unwrap();
        // cos([0.8, 0.6], [1, 0]) == 0.8 exactly: not merged
        let out = tree.merge_trajectory(&traj(&[&[0.0, 0.0], &[0.8, 0.6]])).unwrap();
        assert_eq!(out.merge_depth, 1);
    }

    #[test]
    fn discrete_mode_uses_exact_match() {
        let config = cfg(0.98, 1).with_mode(StateMode::Discrete);
        let mut tree = AggregationTree::new(config).unwrap();
        tree.integrate(&traj(&[&[0.0], &[2.0]])).unwrap();
        // parallel vectors would merge under cosine; here they must not
        tree.integrate(&traj(&[&[0.0], &[4.0]])).unwrap();
        tree.integrate(&traj(&[&[0.0], &[2.0]])).unwrap();
        let counts: Vec<usize> = tree.children(tree.root()).map(|c| c.support()).collect();
        assert_eq!(counts, vec![2, 1]);
    }

    #[test]
    fn expand_partial_tail_weights() {
        let lambda: f64 = 0.9;
        let mut tree = AggregationTree::new(cfg(lambda, 5)).unwrap();
        let base: Vec<Vec<f64>> = (0..6).map(|t| vec![1.0, t as f64]).collect();
        tree.integrate(&Trajectory::from_rows(base.clone())).unwrap();
        let mut fork = base.clone();
        for row in fork.iter_mut().skip(3) {
            row[0] = -1.0;
        }
        let fork = Trajectory::from_rows(fork);
        let out = tree.merge_trajectory(&fork).unwrap();
        assert_eq!(out.merge_depth, 3);
        assert_eq!(tree.expand(&fork, &out).unwrap(), 3);
        let tail: Vec<(usize, f64)> = tree
            .nodes()
            .filter(|n| n.support() == 1 && n.state()[0] == -1.0)
            .map(|n| (n.depth(), n.weights()[0]))
            .collect();
        assert_eq!(tail.iter().map(|t| t.0).collect::<Vec<_>>(), vec![3, 4, 5]);
        for (depth, w) in tail {
            assert!((w - lambda.powi(depth as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn stale_outcome_rejected() {
        let mut tree = AggregationTree::new(cfg(0.98, 1)).unwrap();
        let a = traj(&[&[0.0], &[1.0]]);
        let out = tree.merge_trajectory(&a).unwrap();
        tree.integrate(&a).unwrap();
        assert_eq!(tree.expand(&a, &out), Err(TatError::StaleMergeOutcome));
    }

    #[test]
    fn rejected_trajectory_leaves_tree_untouched() {
        let mut tree = AggregationTree::new(cfg(0.98, 2)).unwrap();
        tree.integrate(&traj(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]])).unwrap();
        let before = tree.dump();
        let bad = traj(&[&[0.0, 1.0], &[1.0, 0.0], &[f64::NAN, 1.0]]);
        assert_eq!(tree.integrate(&bad), Err(TatError::NonFiniteState));
        let short = traj(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(matches!(tree.integrate(&short), Err(TatError::HorizonMismatch { .. })));
        let wide = traj(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 2.0], &[1.0, 1.0, 2.0]]);
        assert!(matches!(tree.integrate(&wide), Err(TatError::DimensionMismatch { .. })));
        assert_eq!(tree.dump(), before);
    }

    #[test]
    fn integrate_fork_at_divergence() {
        let mut tree = AggregationTree::new(cfg(0.98, 3)).unwrap();
        tree.integrate(&traj(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]])).unwrap();
        tree.integrate(&traj(&[&[0.0, 1.0], &[1.0, 0.0], &[-1.0, 1.0], &[0.0, -1.0]])).unwrap();
        let d1: Vec<&TreeNode> = tree.children(tree.root()).collect();
        assert_eq!(d1.len(), 1);
        assert_eq!(d1[0].child_count(), 2);
        assert_eq!(tree.node_count(), 6);
    }

    #[test]
    fn select_child_ties_and_argmax() {
        let mut tree = AggregationTree::new(cfg(0.98, 1)).unwrap();
        let a = traj(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = traj(&[&[0.0, 0.0], &[0.0, 1.0]]);
        tree.integrate(&a).unwrap();
        for _ in 0..3 {
            tree.integrate(&b).unwrap();
        }
        tree.integrate(&a).unwrap();
        tree.integrate(&a).unwrap();
        // Q(a) = Q(b) = 3·0.98, |X| equal, a inserted first
        let d = tree.select_child().unwrap();
        assert_eq!(d.target_state.values(), &[1.0, 0.0]);
        assert_eq!(d.selected_child.id, 1);
        tree.integrate(&b).unwrap();
        assert_eq!(tree.select_child().unwrap().target_state.values(), &[0.0, 1.0]);

        let empty = AggregationTree::new(cfg(0.98, 1)).unwrap();
        assert_eq!(empty.select_child(), Err(TatError::NoPlansIntegrated));
        assert_eq!(empty.best_branch(3), Err(TatError::NoPlansIntegrated));
    }

    #[test]
    fn select_child_prefers_support_on_equal_weight() {
        // Equal Q with different |X| only arises after pruning mixes weights
        // from different insertion depths.
        let mut tree = AggregationTree::new(cfg(0.5, 2)).unwrap();
        tree.integrate(&traj(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        tree.integrate(&traj(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        let d = tree.select_child().unwrap();
        tree.prune(&d).unwrap();
        // the retained depth-1 node carries V = {0.25, 0.25}, Q = 0.5
        tree.integrate(&traj(&[&[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]])).unwrap();
        // fresh node at depth 1 has V = {0.5}, Q = 0.5, |X| = 1
        let d = tree.select_child().unwrap();
        assert_eq!(d.target_state.values(), &[0.0, 1.0]);
        assert_eq!(d.support, 2);
    }

    #[test]
    fn action_suffix_extracted() {
        let config = cfg(0.98, 1).with_action_dim(2);
        let mut tree = AggregationTree::new(config).unwrap();
        tree.integrate(&traj(&[&[3.0, 3.0, 0.0, 0.0], &[3.0, 4.0, 0.0, 1.0]])).unwrap();
        let d = tree.select_child().unwrap();
        assert_eq!(d.action, Some(vec![0.0, 1.0]));
        let mut plain = AggregationTree::new(cfg(0.98, 1)).unwrap();
        plain.integrate(&traj(&[&[3.0, 3.0], &[3.0, 4.0]])).unwrap();
        assert_eq!(plain.select_child().unwrap().action, None);
    }

    #[test]
    fn prune_chain_and_fork() {
        let mut tree = AggregationTree::new(cfg(0.98, 3)).unwrap();
        tree.integrate(&traj(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]])).unwrap();
        let d = tree.select_child().unwrap();
        let old_id = d.selected_child.id;
        tree.prune(&d).unwrap();
        assert_eq!(tree.root().id(), old_id);
        assert_eq!(tree.node_count(), 3);
        let depths: Vec<usize> = tree.nodes().map(|n| n.depth()).collect();
        assert_eq!(depths, vec![0, 1, 2]);
        // weights keep insertion-time values
        let d1 = tree.children(tree.root()).next().unwrap();
        assert_eq!(d1.depth(), 1);
        assert_eq!(d1.weights(), &[0.98f64.powi(2)]);
        tree.check_invariants().unwrap();
        assert_eq!(tree.prune(&d), Err(TatError::StaleDecision));
    }

    #[test]
    fn prune_discards_losing_subtree() {
        // heavy fork: 9 nodes below the first depth-1 child, 4 below the second
        let mut tree = AggregationTree::new(cfg(1.0, 5)).unwrap();
        let a: Vec<Vec<f64>> = (0..6).map(|t| vec![1.0, t as f64]).collect();
        let mut a2 = a.clone();
        for row in a2.iter_mut().skip(2) {
            row[1] = -(row[1]);
        }
        let b: Vec<Vec<f64>> = (0..6).map(|t| vec![-1.0, t as f64]).collect();
        tree.integrate(&Trajectory::from_rows(a.clone())).unwrap();
        tree.integrate(&Trajectory::from_rows(a2)).unwrap();
        tree.integrate(&Trajectory::from_rows(a)).unwrap();
        tree.integrate(&Trajectory::from_rows(b)).unwrap();
        let subtree: Vec<usize> = tree
            .children(tree.root())
            .map(|c| 1 + count_below(&tree, c))
            .collect();
        assert_eq!(subtree, vec![9, 5]);
        let d = tree.select_child().unwrap();
        tree.prune(&d).unwrap();
        assert_eq!(tree.node_count(), 9);
        tree.check_invariants().unwrap();
    }

    fn count_below(tree: &AggregationTree, n: &TreeNode) -> usize {
        tree.children(n).map(|c| 1 + count_below(tree, c)).sum()
    }

    #[test]
    fn prune_rejects_non_root_child() {
        let mut tree = AggregationTree::new(cfg(0.98, 2)).unwrap();
        tree.integrate(&traj(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]])).unwrap();
        let mut d = tree.select_child().unwrap();
        d.selected_child = tree.node_ref(2);
        assert_eq!(tree.prune(&d), Err(TatError::StaleDecision));
    }

    #[test]
    fn best_branch_follows_heaviest_path() {
        let mut tree = AggregationTree::new(cfg(1.0, 3)).unwrap();
        let chain = traj(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        tree.integrate(&chain).unwrap();
        let b = tree.best_branch(10).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(tree.best_branch(2).unwrap().len(), 2);

        let mut fork = AggregationTree::new(cfg(1.0, 1)).unwrap();
        fork.integrate(&traj(&[&[0.0, 0.0], &[0.0, 1.0]])).unwrap();
        for _ in 0..3 {
            fork.integrate(&traj(&[&[0.0, 0.0], &[1.0, 0.0]])).unwrap();
        }
        assert_eq!(fork.best_branch(5).unwrap()[0].values(), &[1.0, 0.0]);
    }

    #[test]
    fn plan_step_follows_majority() {
        let mut tree = AggregationTree::new(cfg(1.0, 2)).unwrap();
        let good = traj(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
        let bad = traj(&[&[0.0, 1.0], &[-1.0, 0.0], &[-1.0, -1.0]]);
        let batch = vec![bad, good.clone(), good.clone(), good.clone(), good];
        let d = tree.plan_step(&batch).unwrap();
        assert_eq!(d.target_state.values(), &[1.0, 0.0]);
        assert_eq!(d.support, 4);
        assert_eq!(tree.root().state().values(), &[1.0, 0.0]);
        assert_eq!(tree.node_count(), 2);
    }

    #[test]
    fn plan_step_counts_rejections() {
        let mut tree = AggregationTree::new(cfg(1.0, 1)).unwrap();
        let good = traj(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let bad = traj(&[&[0.0, 1.0], &[f64::NAN, 0.0]]);
        let d = tree.plan_step(&[bad.clone(), good]).unwrap();
        assert_eq!(d.rejected, 1);
        let mut fresh = AggregationTree::new(cfg(1.0, 1)).unwrap();
        assert_eq!(fresh.plan_step(&[bad]), Err(TatError::NonFiniteState));
        assert_eq!(fresh.plan_step(&[]), Err(TatError::EmptyBatch));
    }

    #[test]
    fn dump_is_stable() {
        let mut tree = AggregationTree::new(cfg(0.5, 2)).unwrap();
        tree.integrate(&traj(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]])).unwrap();
        tree.integrate(&traj(&[&[0.0, 1.0], &[1.0, 0.0], &[-1.0, 1.0]])).unwrap();
        let expected = "# id\tdepth\tparent\tcount\tq\tsubtree_q\tstate\n\
                        0\t0\t-\t2\t2\t3.5\t[0,1]\n\
                        1\t1\t0\t2\t1\t1.5\t[1,0]\n\
                        2\t2\t1\t1\t0.25\t0.25\t[1,1]\n\
                        3\t2\t1\t1\t0.25\t0.25\t[-1,1]\n";
        assert_eq!(tree.dump(), expected);
    }
}
