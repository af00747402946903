/// Binary sum tree over nonnegative leaf weights. Internal nodes are always
/// recomputed from their children, so totals never accumulate drift.
#[derive(Debug, Clone)]
pub(crate) struct SumTree {
    len: usize,
    cap: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(weights: &[f64]) -> Self {
        let len = weights.len();
        let cap = len.next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * cap];
        nodes[cap..cap + len].copy_from_slice(weights);
        for i in (1..cap).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { len, cap, nodes }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.cap + i]
    }

    pub fn set(&mut self, i: usize, w: f64) {
        let mut k = self.cap + i;
        self.nodes[k] = w;
        k /= 2;
        while k >= 1 {
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
            k /= 2;
        }
    }

    /// Index `i` with `prefix(i) <= u < prefix(i + 1)`, for `u` in `[0, total)`.
    pub fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.cap {
            let left = self.nodes[2 * k];
            if u < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        (k - self.cap).min(self.len - 1)
    }
}

/// Subset of `0..n` with O(1) insert, remove and uniform sampling.
#[derive(Debug, Clone)]
pub(crate) struct IndexSet {
    items: Vec<u32>,
    pos: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl IndexSet {
    pub fn new(n: usize) -> Self {
        Self {
            items: Vec::with_capacity(n),
            pos: vec![ABSENT; n],
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.pos[i] != ABSENT
    }

    pub fn insert(&mut self, i: usize) {
        if self.pos[i] == ABSENT {
            self.pos[i] = self.items.len() as u32;
            self.items.push(i as u32);
        }
    }

    pub fn remove(&mut self, i: usize) {
        let p = self.pos[i];
        if p != ABSENT {
            let last = self.items.pop().unwrap();
            if last as usize != i {
                self.items[p as usize] = last;
                self.pos[last as usize] = p;
            }
            self.pos[i] = ABSENT;
        }
    }

    pub fn assign(&mut self, i: usize, member: bool) {
        if member {
            self.insert(i)
        } else {
            self.remove(i)
        }
    }

    pub fn nth(&self, k: usize) -> usize {
        self.items[k] as usize
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.items.iter().map(|&i| i as usize).collect();
        v.sort_unstable();
        v
    }
}
