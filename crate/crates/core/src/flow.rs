//! Dinic max-flow on floating capacities.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
    rev: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Dinic {
    graph: Vec<Vec<Edge>>,
    level: Vec<i64>,
    iter: Vec<usize>,
    eps: f64,
}

impl Dinic {
    /// `eps` is the smallest residual capacity treated as usable.
    pub fn new(nodes: usize, eps: f64) -> Self {
        Dinic {
            graph: vec![Vec::new(); nodes],
            level: vec![-1; nodes],
            iter: vec![0; nodes],
            eps,
        }
    }

    /// Adds `from -> to` and returns a handle `(from, index)` to the forward edge.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) -> (usize, usize) {
        let fwd = self.graph[from].len();
        let bwd = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge { to, cap, rev: bwd });
        self.graph[to].push(Edge {
            to: from,
            cap: 0.0,
            rev: fwd,
        });
        (from, fwd)
    }

    /// Flow currently routed through the forward edge `handle`.
    pub fn flow(&self, handle: (usize, usize)) -> f64 {
        let e = &self.graph[handle.0][handle.1];
        self.graph[e.to][e.rev].cap
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for e in &self.graph[v] {
                if e.cap > self.eps && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, limit: f64) -> f64 {
        if v == t {
            return limit;
        }
        while self.iter[v] < self.graph[v].len() {
            let k = self.iter[v];
            let Edge { to, cap, rev } = self.graph[v][k];
            if cap > self.eps && self.level[v] < self.level[to] {
                let pushed = self.dfs(to, t, limit.min(cap));
                if pushed > self.eps {
                    self.graph[v][k].cap -= pushed;
                    self.graph[to][rev].cap += pushed;
                    return pushed;
                }
            }
            self.iter[v] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return total;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= self.eps {
                    break;
                }
                total += f;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_network() {
        let mut d = Dinic::new(6, 1e-12);
        d.add_edge(0, 1, 10.0);
        d.add_edge(0, 2, 10.0);
        d.add_edge(1, 3, 4.0);
        d.add_edge(1, 4, 8.0);
        d.add_edge(2, 4, 9.0);
        d.add_edge(3, 5, 10.0);
        d.add_edge(4, 3, 6.0);
        d.add_edge(4, 5, 10.0);
        assert_eq!(d.max_flow(0, 5), 19.0);
    }

    #[test]
    fn disconnected_and_infinite_edges() {
        let mut d = Dinic::new(4, 1e-12);
        d.add_edge(0, 1, 10.0);
        d.add_edge(2, 3, 5.0);
        assert_eq!(d.max_flow(0, 3), 0.0);

        let mut d = Dinic::new(4, 1e-12);
        d.add_edge(0, 1, 2.5);
        let mid = d.add_edge(1, 2, f64::INFINITY);
        d.add_edge(2, 3, 4.0);
        assert_eq!(d.max_flow(0, 3), 2.5);
        assert_eq!(d.flow(mid), 2.5);
    }
}
