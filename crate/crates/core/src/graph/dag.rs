//! Bare directed-acyclic structure: adjacency, ordering, reachability and
//! d-separation. Roles and weights live one level up in [`super::CausalGraph`].

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::GraphError;

/// Parent/child adjacency over dense node indices `0..len`.
///
/// Adjacency lists are sorted ascending so every traversal is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    /// Builds the adjacency and rejects cycles, self loops and dangling ids.
    pub fn new(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut parents = vec![Vec::new(); num_nodes];
        let mut children = vec![Vec::new(); num_nodes];
        for &(from, to) in edges {
            if from >= num_nodes {
                return Err(GraphError::UnknownNode(from));
            }
            if to >= num_nodes {
                return Err(GraphError::UnknownNode(to));
            }
            if from == to {
                return Err(GraphError::CycleDetected { nodes: vec![from] });
            }
            parents[to].push(from);
            children[from].push(to);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            if list.len() != before {
                return Err(GraphError::DuplicateEdge);
            }
        }
        let dag = Dag { parents, children };
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// Kahn's algorithm with a min-heap, so ties resolve by ascending index.
    pub fn topological_order(&self) -> Result<Vec<usize>, GraphError> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(node)) = ready.pop() {
            order.push(node);
            for &child in &self.children[node] {
                indegree[child] -= 1;
                if indegree[child] == 0 {
                    ready.push(Reverse(child));
                }
            }
        }
        if order.len() != n {
            let nodes = (0..n).filter(|&i| indegree[i] > 0).collect();
            return Err(GraphError::CycleDetected { nodes });
        }
        Ok(order)
    }

    /// All nodes reachable from `source` by a directed path (excluding `source`).
    pub fn descendants(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = self.children[source].clone();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend_from_slice(&self.children[v]);
            }
        }
        seen
    }

    /// Membership mask of `nodes` together with all of their ancestors.
    pub fn ancestral_closure(&self, nodes: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = nodes.to_vec();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend_from_slice(&self.parents[v]);
            }
        }
        seen
    }

    /// Nodes d-connected to `source` given `cond`, computed by the
    /// reachable-trail search over (node, direction) states.
    ///
    /// A node is "entered from a parent" when the trail arrives along an edge
    /// pointing into it and "entered from a child" otherwise. Runs in
    /// O(nodes + edges).
    pub fn d_connected(&self, source: usize, cond: &[bool]) -> Reachability {
        let n = self.len();
        debug_assert_eq!(cond.len(), n);
        let cond_nodes: Vec<usize> = (0..n).filter(|&i| cond[i]).collect();
        let opens_collider = self.ancestral_closure(&cond_nodes);

        let mut via_parent = vec![false; n];
        let mut via_child = vec![false; n];
        // the source behaves as if entered from a child: both directions open
        let mut stack = vec![(source, Direction::FromChild)];
        let mut visited_up = vec![false; n];
        let mut visited_down = vec![false; n];

        while let Some((v, dir)) = stack.pop() {
            let seen = match dir {
                Direction::FromChild => &mut visited_up[v],
                Direction::FromParent => &mut visited_down[v],
            };
            if *seen {
                continue;
            }
            *seen = true;

            if v != source && !cond[v] {
                match dir {
                    Direction::FromChild => via_child[v] = true,
                    Direction::FromParent => via_parent[v] = true,
                }
            }

            match dir {
                Direction::FromChild => {
                    if !cond[v] {
                        for &p in &self.parents[v] {
                            stack.push((p, Direction::FromChild));
                        }
                        for &c in &self.children[v] {
                            stack.push((c, Direction::FromParent));
                        }
                    }
                }
                Direction::FromParent => {
                    if !cond[v] {
                        for &c in &self.children[v] {
                            stack.push((c, Direction::FromParent));
                        }
                    }
                    if opens_collider[v] {
                        for &p in &self.parents[v] {
                            stack.push((p, Direction::FromChild));
                        }
                    }
                }
            }
        }
        Reachability {
            via_parent,
            via_child,
        }
    }

    /// True iff every trail between `a` and `b` is blocked by `cond`.
    pub fn d_separated(&self, a: usize, b: usize, cond: &[bool]) -> bool {
        !self.d_connected(a, cond).reached(b)
    }
}

#[derive(Debug, Clone, Copy)]
enum Direction {
    FromParent,
    FromChild,
}

/// Result of a single-source d-connection search.
#[derive(Debug, Clone)]
pub struct Reachability {
    via_parent: Vec<bool>,
    via_child: Vec<bool>,
}

impl Reachability {
    pub fn reached(&self, node: usize) -> bool {
        self.via_parent[node] || self.via_child[node]
    }

    /// Reached by an open trail whose last edge points into `node`.
    pub fn reached_from_parent(&self, node: usize) -> bool {
        self.via_parent[node]
    }

    pub fn reached_from_child(&self, node: usize) -> bool {
        self.via_child[node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(n: usize, nodes: &[usize]) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in nodes {
            m[i] = true;
        }
        m
    }

    #[test]
    fn chain_order() {
        let dag = Dag::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(dag.topological_order().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn order_breaks_ties_by_index() {
        // C -> A -> B with A=0, B=1, C=2
        let dag = Dag::new(3, &[(2, 0), (0, 1)]).unwrap();
        assert_eq!(dag.topological_order().unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn cycle_is_rejected() {
        let err = Dag::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap_err();
        assert!(matches!(err, GraphError::CycleDetected { .. }));
        assert!(matches!(
            Dag::new(2, &[(1, 1)]),
            Err(GraphError::CycleDetected { .. })
        ));
    }

    #[test]
    fn blocked_chain_and_opened_collider() {
        // chain 0 -> 1 -> 2
        let chain = Dag::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(chain.d_separated(0, 2, &mask(3, &[1])));
        assert!(!chain.d_separated(0, 2, &mask(3, &[])));

        // collider 0 -> 2 <- 1, with 2 -> 3
        let collider = Dag::new(4, &[(0, 2), (1, 2), (2, 3)]).unwrap();
        assert!(collider.d_separated(0, 1, &mask(4, &[])));
        assert!(!collider.d_separated(0, 1, &mask(4, &[2])));
        assert!(!collider.d_separated(0, 1, &mask(4, &[3])));
    }

    #[test]
    fn arrival_direction_is_tracked() {
        // 0 -> 1 <- 2
        let dag = Dag::new(3, &[(0, 1), (2, 1)]).unwrap();
        let r = dag.d_connected(0, &mask(3, &[1]));
        assert!(r.reached_from_child(2));
        assert!(!r.reached_from_parent(2));
        assert!(!r.reached(1));
    }
}
