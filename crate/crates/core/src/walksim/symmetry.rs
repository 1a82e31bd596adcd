use crate::graphs::{Graph, INITIAL, TARGET};

/// Nodes that some target-fixing automorphism maps the initial node onto.
///
/// These are the start positions indistinguishable from node 0 as far as
/// detection at the target is concerned; the set always contains node 0.
pub fn initial_orbit(g: &Graph) -> Vec<usize> {
    let search = AutomorphismSearch::new(g);
    (0..g.n())
        .filter(|&v| v != TARGET && search.exists(&[(TARGET, TARGET), (INITIAL, v)]))
        .collect()
}

/// Upper bound `1 / n_init` on the asymptotic quantum detection probability,
/// with `n_init` the size of [`initial_orbit`].
pub fn detection_bound(g: &Graph) -> f64 {
    1.0 / initial_orbit(g).len() as f64
}

struct AutomorphismSearch {
    n: usize,
    adj: Vec<Vec<bool>>,
    degree: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
}

impl AutomorphismSearch {
    fn new(g: &Graph) -> Self {
        let n = g.n();
        let mut adj = vec![vec![false; n]; n];
        for (a, b) in g.edges() {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        AutomorphismSearch {
            n,
            adj,
            degree: g.degrees(),
            neighbors: g.neighbors(),
        }
    }

    /// Whether an automorphism extending the partial map `fixed` exists.
    fn exists(&self, fixed: &[(usize, usize)]) -> bool {
        let mut image = vec![usize::MAX; self.n];
        let mut used = vec![false; self.n];
        for &(from, to) in fixed {
            if self.degree[from] != self.degree[to] || used[to] && image[from] != to {
                return false;
            }
            image[from] = to;
            used[to] = true;
        }
        for &(from, _) in fixed {
            if !self.consistent(&image, from) {
                return false;
            }
        }
        let order = self.search_order(fixed.iter().map(|&(f, _)| f));
        self.extend(&order, 0, &mut image, &mut used)
    }

    /// Breadth-first order from the fixed nodes so each new node has already
    /// mapped neighbors to prune against.
    fn search_order(&self, roots: impl Iterator<Item = usize>) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::new();
        for r in roots {
            if !std::mem::replace(&mut seen[r], true) {
                queue.push_back(r);
            }
        }
        let mut order = Vec::with_capacity(self.n);
        loop {
            while let Some(v) = queue.pop_front() {
                order.push(v);
                for &w in &self.neighbors[v] {
                    if !std::mem::replace(&mut seen[w], true) {
                        queue.push_back(w);
                    }
                }
            }
            match (0..self.n).find(|&v| !seen[v]) {
                Some(v) => {
                    seen[v] = true;
                    queue.push_back(v);
                }
                None => break,
            }
        }
        order
    }

    fn consistent(&self, image: &[usize], v: usize) -> bool {
        let iv = image[v];
        (0..self.n).all(|u| image[u] == usize::MAX || self.adj[v][u] == self.adj[iv][image[u]])
    }

    fn extend(&self, order: &[usize], pos: usize, image: &mut [usize], used: &mut [bool]) -> bool {
        let Some(&v) = order.get(pos) else {
            return true;
        };
        if image[v] != usize::MAX {
            return self.extend(order, pos + 1, image, used);
        }
        for cand in 0..self.n {
            if used[cand] || self.degree[cand] != self.degree[v] {
                continue;
            }
            image[v] = cand;
            if self.consistent(image, v) {
                used[cand] = true;
                if self.extend(order, pos + 1, image, used) {
                    return true;
                }
                used[cand] = false;
            }
            image[v] = usize::MAX;
        }
        false
    }
}
