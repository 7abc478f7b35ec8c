//! Optimal integer timing for a fixed set of orderings.
//!
//! Minimizes `Σ_v linear_v·x_v + Σ_v Σ_(p,w) w·|x_v − p|` subject to
//! `lower ≤ x ≤ upper` and difference constraints `x_b − x_a ≥ gap`. The
//! objective is separable convex and the constraints are of difference
//! type, so the problem is L-natural convex and local optimality with
//! respect to shifting any set of variables by ±1 is global. Each step finds
//! the best closed set with a min cut and moves it as far as the cost
//! stays linear.

#[derive(Debug, Clone, Default)]
pub(crate) struct TimingProblem {
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    /// `(a, b, gap)`: `x_b − x_a ≥ gap`.
    pub arcs: Vec<(usize, usize, i64)>,
    pub linear: Vec<i64>,
    /// `(p, w)` pairs contributing `w·|x − p|`.
    pub kinks: Vec<Vec<(i64, i64)>>,
}

impl TimingProblem {
    pub fn add_var(&mut self, lower: i64, upper: i64, linear: i64) -> usize {
        self.lower.push(lower);
        self.upper.push(upper);
        self.linear.push(linear);
        self.kinks.push(Vec::new());
        self.lower.len() - 1
    }

    pub fn cost(&self, x: &[i64]) -> i64 {
        (0..x.len())
            .map(|v| {
                self.linear[v] * x[v]
                    + self.kinks[v].iter().map(|&(p, w)| w * (x[v] - p).abs()).sum::<i64>()
            })
            .sum()
    }

    pub fn is_feasible(&self, x: &[i64]) -> bool {
        (0..x.len()).all(|v| self.lower[v] <= x[v] && x[v] <= self.upper[v])
            && self.arcs.iter().all(|&(a, b, g)| x[b] - x[a] >= g)
    }

    fn marginal(&self, v: usize, x: i64, up: bool) -> i64 {
        let kinks: i64 = self.kinks[v]
            .iter()
            .map(|&(p, w)| {
                let away = if up { x >= p } else { x <= p };
                if away {
                    w
                } else {
                    -w
                }
            })
            .sum();
        if up {
            self.linear[v] + kinks
        } else {
            -self.linear[v] + kinks
        }
    }

    /// Descends from a feasible point to an optimal one.
    pub fn minimize(&self, mut x: Vec<i64>) -> Vec<i64> {
        debug_assert!(self.is_feasible(&x));
        let n = x.len();
        loop {
            let mut best: Option<(i64, bool, Vec<bool>)> = None;
            for up in [false, true] {
                if let Some((gain, set)) = self.best_closed_set(&x, up) {
                    if best.as_ref().is_none_or(|b| gain > b.0) {
                        best = Some((gain, up, set));
                    }
                }
            }
            let Some((_, up, set)) = best else {
                return x;
            };
            let mut delta = i64::MAX;
            for v in (0..n).filter(|&v| set[v]) {
                if up {
                    delta = delta.min(self.upper[v] - x[v]);
                    if let Some(p) = self.kinks[v].iter().map(|k| k.0).filter(|&p| p > x[v]).min() {
                        delta = delta.min(p - x[v]);
                    }
                } else {
                    delta = delta.min(x[v] - self.lower[v]);
                    if let Some(p) = self.kinks[v].iter().map(|k| k.0).filter(|&p| p < x[v]).max() {
                        delta = delta.min(x[v] - p);
                    }
                }
            }
            for &(a, b, g) in &self.arcs {
                let slack = x[b] - x[a] - g;
                if up && set[a] && !set[b] || !up && set[b] && !set[a] {
                    delta = delta.min(slack);
                }
            }
            debug_assert!((1..i64::MAX).contains(&delta));
            for v in 0..n {
                if set[v] {
                    x[v] += if up { delta } else { -delta };
                }
            }
        }
    }

    /// The closed set with the largest cost decrease for a unit move, if
    /// any decrease is possible.
    fn best_closed_set(&self, x: &[i64], up: bool) -> Option<(i64, Vec<bool>)> {
        let n = x.len();
        let (source, sink) = (n, n + 1);
        let mut flow = MaxFlow::new(n + 2);
        let mut positive = 0i64;
        for v in 0..n {
            let blocked = if up { x[v] >= self.upper[v] } else { x[v] <= self.lower[v] };
            if blocked {
                flow.add_edge(v, sink, INF);
                continue;
            }
            let gain = -self.marginal(v, x[v], up);
            if gain > 0 {
                positive += gain;
                flow.add_edge(source, v, gain);
            } else if gain < 0 {
                flow.add_edge(v, sink, -gain);
            }
        }
        for &(a, b, g) in &self.arcs {
            if x[b] - x[a] == g {
                // Moving `a` up drags `b`; moving `b` down drags `a`.
                if up {
                    flow.add_edge(a, b, INF);
                } else {
                    flow.add_edge(b, a, INF);
                }
            }
        }
        if positive == 0 {
            return None;
        }
        let cut = flow.max_flow(source, sink);
        let gain = positive - cut;
        if gain <= 0 {
            return None;
        }
        let reach = flow.reachable(source);
        Some((gain, reach[..n].to_vec()))
    }
}

const INF: i64 = i64::MAX / 4;

/// Dinic's algorithm on a small dense-ish graph.
struct MaxFlow {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
}

impl MaxFlow {
    fn new(n: usize) -> Self {
        Self { head: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new() }
    }

    fn add_edge(&mut self, a: usize, b: usize, c: i64) {
        self.head[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(c);
        self.head[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(0);
    }

    fn levels(&self, s: usize) -> Vec<i32> {
        let mut level = vec![-1; self.head.len()];
        let mut queue = std::collections::VecDeque::from([s]);
        level[s] = 0;
        while let Some(u) = queue.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && level[v] < 0 {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn push(&mut self, u: usize, t: usize, f: i64, level: &[i32], it: &mut [usize]) -> i64 {
        if u == t {
            return f;
        }
        while it[u] < self.head[u].len() {
            let e = self.head[u][it[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && level[v] == level[u] + 1 {
                let d = self.push(v, t, f.min(self.cap[e]), level, it);
                if d > 0 {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            it[u] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        loop {
            let level = self.levels(s);
            if level[t] < 0 {
                return total;
            }
            let mut it = vec![0; self.head.len()];
            loop {
                let f = self.push(s, t, INF, &level, &mut it);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        self.levels(s).iter().map(|&l| l >= 0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(p: &TimingProblem) -> i64 {
        let n = p.lower.len();
        let mut x = p.lower.clone();
        let mut best = i64::MAX;
        loop {
            if p.is_feasible(&x) {
                best = best.min(p.cost(&x));
            }
            let mut k = 0;
            loop {
                if k == n {
                    return best;
                }
                if x[k] < p.upper[k] {
                    x[k] += 1;
                    break;
                }
                x[k] = p.lower[k];
                k += 1;
            }
        }
    }

    #[test]
    fn pulls_a_task_back_to_its_reference() {
        // One task at 0 that used to start at 7; a makespan-like variable
        // after it with weight 1 and retiming weight 3.
        let mut p = TimingProblem::default();
        let t = p.add_var(0, 20, 1);
        p.kinks[t].push((7, 3));
        let m = p.add_var(0, 30, 1);
        p.arcs.push((t, m, 5));
        let x = p.minimize(vec![0, 5]);
        assert_eq!(x, vec![7, 12]);
        assert_eq!(p.cost(&x), brute(&p));
    }

    proptest! {
        #[test]
        fn matches_enumeration(
            n in 1usize..4,
            seeds in proptest::collection::vec((0i64..4, 0i64..8, 0i64..3, 0i64..3), 4),
            arcs in proptest::collection::vec((0usize..4, 0usize..4, 0i64..3), 0..4),
        ) {
            let mut p = TimingProblem::default();
            for &(lo, ref_pt, lin, w) in seeds.iter().take(n) {
                let v = p.add_var(lo, 9, lin);
                p.kinks[v].push((ref_pt, w));
                p.kinks[v].push((ref_pt / 2 + 1, 1));
            }
            for &(a, b, g) in &arcs {
                let (a, b) = (a % n, b % n);
                if a < b {
                    p.arcs.push((a, b, g));
                }
            }
            // Earliest feasible point by longest paths in topological order.
            let mut x = p.lower.clone();
            for b in 0..n {
                for &(a, bb, g) in &p.arcs {
                    if bb == b {
                        x[b] = x[b].max(x[a] + g);
                    }
                }
            }
            prop_assume!(p.is_feasible(&x));
            let got = p.minimize(x);
            prop_assert!(p.is_feasible(&got));
            prop_assert_eq!(p.cost(&got), brute(&p));
        }
    }
}
