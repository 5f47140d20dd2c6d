//! Boolean edge supports and strong connectivity.

/// Directed support over `n` nodes: `has(i, j)` means the edge `v_j -> v_i`
/// exists, mirroring `a_ij != 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Support {
    n: usize,
    bits: Vec<bool>,
}

impl Support {
    pub fn empty(n: usize) -> Self {
        Self { n, bits: vec![false; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.n + j] = true;
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Edge-set union; panics on mismatched node counts.
    pub fn union_with(&mut self, other: &Support) {
        assert_eq!(self.n, other.n, "node count mismatch");
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    /// Out-neighbours of `j` in the directed sense `v_j -> v_i`.
    fn successors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.has(i, j))
    }

    /// Strongly connected components (Tarjan), each sorted ascending, in
    /// order of completion.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        const UNVISITED: usize = usize::MAX;
        let n = self.n;
        let succ: Vec<Vec<usize>> = (0..n).map(|j| self.successors(j).collect()).collect();
        let mut index = vec![UNVISITED; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut components = Vec::new();
        let mut next = 0;

        for root in 0..n {
            if index[root] != UNVISITED {
                continue;
            }
            // (node, position in its successor list)
            let mut call: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = next;
            low[root] = next;
            next += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if let Some(&w) = succ[v].get(*pos) {
                    *pos += 1;
                    if index[w] == UNVISITED {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    components.push(comp);
                }
            }
        }
        components
    }

    /// One strongly connected component covering every node. A single node
    /// is trivially strongly connected; zero nodes are not.
    pub fn is_strongly_connected(&self) -> bool {
        self.n > 0 && self.strongly_connected_components().len() == 1
    }

    /// Weakly connected components, each sorted, ordered by smallest member.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let mut label = vec![usize::MAX; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut comp = vec![start];
            label[start] = id;
            let mut frontier = vec![start];
            while let Some(v) = frontier.pop() {
                for w in 0..n {
                    if label[w] == usize::MAX && (self.has(v, w) || self.has(w, v)) {
                        label[w] = id;
                        comp.push(w);
                        frontier.push(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}
