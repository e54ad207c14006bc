//! Search tree storage and the SoftUCT selection rule.

use alloc::vec::Vec;

use crate::game::N_ACTIONS;
use crate::hierarchy::softmax_policy;

const NONE: u32 = 0;

/// One history node. Children are indexed by (own action, observed partner
/// action); index 0 is the root and never a child, so it doubles as "absent".
#[derive(Clone, Debug)]
pub struct Node {
    pub visits: u32,
    pub legal: u8,
    pub count: [u32; N_ACTIONS],
    pub value: [f64; N_ACTIONS],
    children: [[u32; N_ACTIONS]; N_ACTIONS],
}

impl Node {
    fn new(legal: usize) -> Self {
        Node {
            visits: 0,
            legal: legal as u8,
            count: [0; N_ACTIONS],
            value: [0.0; N_ACTIONS],
            children: [[NONE; N_ACTIONS]; N_ACTIONS],
        }
    }

    /// Incremental mean: `Q̃ ← Q̃ + (R − Q̃)/N(h,a)`.
    pub fn record(&mut self, action: usize, ret: f64) {
        self.visits += 1;
        self.count[action] += 1;
        self.value[action] += (ret - self.value[action]) / self.count[action] as f64;
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn with_root(legal: usize) -> Self {
        Tree {
            nodes: alloc::vec![Node::new(legal)],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn node(&self, idx: u32) -> &Node {
        &self.nodes[idx as usize]
    }

    pub fn node_mut(&mut self, idx: u32) -> &mut Node {
        &mut self.nodes[idx as usize]
    }

    pub fn child(&self, idx: u32, action: usize, obs: usize) -> Option<u32> {
        let c = self.nodes[idx as usize].children[action][obs];
        (c != NONE).then_some(c)
    }

    pub fn expand(&mut self, parent: u32, action: usize, obs: usize, legal: usize) -> u32 {
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node::new(legal));
        self.nodes[parent as usize].children[action][obs] = idx;
        idx
    }
}

/// Samples from the softmax of `Q̃(a,h) + c·√(ln N(h) / N(h,a))`. Actions
/// never tried carry an infinite bonus: one of them is picked uniformly.
pub fn soft_uct_select<R: rand::Rng + ?Sized>(node: &Node, beta: f64, c: f64, rng: &mut R) -> usize {
    let legal = node.legal as usize;
    let unvisited = node.count[..legal].iter().filter(|&&n| n == 0).count();
    if unvisited > 0 {
        let mut pick = rng.gen_range(0..unvisited);
        for a in 0..legal {
            if node.count[a] == 0 {
                if pick == 0 {
                    return a;
                }
                pick -= 1;
            }
        }
    }
    let ln_n = libm::log(node.visits as f64);
    let mut aug = [0.0; N_ACTIONS];
    for a in 0..legal {
        aug[a] = node.value[a] + c * libm::sqrt(ln_n / node.count[a] as f64);
    }
    softmax_policy(&aug[..legal], beta).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn node_with(counts: [u32; 5], values: [f64; 5]) -> Node {
        let mut n = Node::new(5);
        n.count = counts;
        n.value = values;
        n.visits = counts.iter().sum();
        n
    }

    fn frequencies(node: &Node, beta: f64, c: f64, draws: usize) -> [f64; 5] {
        let mut rng = seed::rng(11);
        let mut f = [0.0; 5];
        for _ in 0..draws {
            f[soft_uct_select(node, beta, c, &mut rng)] += 1.0 / draws as f64;
        }
        f
    }

    #[test]
    fn unvisited_action_goes_first() {
        let n = node_with([4, 4, 0, 4, 4], [100.0, 100.0, -50.0, 100.0, 100.0]);
        let mut rng = seed::rng(1);
        for _ in 0..50 {
            assert_eq!(soft_uct_select(&n, 1.0 / 3.0, 25.0, &mut rng), 2);
        }
    }

    #[test]
    fn zero_exploration_is_plain_softmax() {
        let values = [0.0, 3.0, 6.0, 1.0, -2.0];
        let n = node_with([5; 5], values);
        let expected = softmax_policy(&values, 1.0 / 3.0);
        let f = frequencies(&n, 1.0 / 3.0, 0.0, 40_000);
        for a in 0..5 {
            assert!((f[a] - expected.prob(a)).abs() < 0.01);
        }
    }

    #[test]
    fn symmetric_node_is_uniform() {
        let n = node_with([7; 5], [2.0; 5]);
        let f = frequencies(&n, 1.0 / 3.0, 25.0, 40_000);
        for a in f {
            assert!((a - 0.2).abs() < 0.01);
        }
    }

    #[test]
    fn incremental_mean() {
        let mut n = Node::new(5);
        let returns = [3.0, -1.0, 10.0, 4.5];
        for r in returns {
            n.record(1, r);
        }
        assert_eq!(n.count[1], 4);
        assert_eq!(n.visits, 4);
        assert!((n.value[1] - 16.5 / 4.0).abs() < 1e-12);
    }
}
