//! Exact min-cost-flow oracle: successive shortest paths with Johnson
//! potentials on integer data. Independent of the AL solver stack; used to
//! verify generated instances and check solution quality.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::lnf::{LnfError, LnfInstance};

const INF: i64 = i64::MAX / 4;

struct MinCostFlow {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i64>,
}

impl MinCostFlow {
    fn new(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n], to: Vec::new(), cap: Vec::new(), cost: Vec::new() }
    }

    /// Adds a forward edge and its zero-capacity reverse; returns the
    /// forward edge id.
    fn add_edge(&mut self, u: usize, v: usize, cap: i64, cost: i64) -> usize {
        let id = self.to.len();
        self.adj[u].push(id);
        self.to.push(v);
        self.cap.push(cap);
        self.cost.push(cost);
        self.adj[v].push(id + 1);
        self.to.push(u);
        self.cap.push(0);
        self.cost.push(-cost);
        id
    }

    /// Pushes up to `want` units from s to t; returns (flow, cost).
    /// All original costs are nonnegative, so zero initial potentials are
    /// valid and Dijkstra on reduced costs stays correct throughout.
    fn run(&mut self, s: usize, t: usize, want: i64) -> (i64, i64) {
        let n = self.adj.len();
        let mut potential = vec![0i64; n];
        let mut flow = 0i64;
        let mut total_cost = 0i64;
        let mut dist = vec![INF; n];
        let mut parent_edge = vec![usize::MAX; n];

        while flow < want {
            dist.fill(INF);
            parent_edge.fill(usize::MAX);
            dist[s] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0i64, s)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.adj[u] {
                    if self.cap[e] <= 0 {
                        continue;
                    }
                    let v = self.to[e];
                    let nd = d + self.cost[e] + potential[u] - potential[v];
                    if nd < dist[v] {
                        dist[v] = nd;
                        parent_edge[v] = e;
                        heap.push(Reverse((nd, v)));
                    }
                }
            }
            if parent_edge[t] == usize::MAX {
                break;
            }
            for u in 0..n {
                if dist[u] < INF {
                    potential[u] += dist[u];
                }
            }
            let mut push = want - flow;
            let mut v = t;
            while v != s {
                let e = parent_edge[v];
                push = push.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = parent_edge[v];
                self.cap[e] -= push;
                self.cap[e ^ 1] += push;
                total_cost += push * self.cost[e];
                v = self.to[e ^ 1];
            }
            flow += push;
        }
        (flow, total_cost)
    }
}

/// Exact optimum of an LNF instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LnfFlow {
    pub cost: i64,
    /// Flow per arc, in the instance's arc order.
    pub flows: Vec<i64>,
}

/// Solves the instance exactly, or reports infeasibility when the arc
/// capacities cannot carry the required supply.
pub fn lnf_oracle(instance: &LnfInstance) -> Result<LnfFlow, LnfError> {
    let n = instance.nodes.len();
    let (s, t) = (n, n + 1);
    let mut mcmf = MinCostFlow::new(n + 2);
    let mut arc_edges = Vec::with_capacity(instance.arcs.len());
    for arc in &instance.arcs {
        debug_assert_eq!(arc.lower, 0);
        arc_edges.push(mcmf.add_edge(arc.tail, arc.head, arc.upper, arc.cost));
    }
    let mut required = 0i64;
    for (i, node) in instance.nodes.iter().enumerate() {
        if node.supply > 0 {
            mcmf.add_edge(s, i, node.supply, 0);
            required += node.supply;
        } else if node.supply < 0 {
            mcmf.add_edge(i, t, -node.supply, 0);
        }
    }
    let (flow, cost) = mcmf.run(s, t, required);
    if flow < required {
        return Err(LnfError::Infeasible);
    }
    let flows = instance
        .arcs
        .iter()
        .zip(&arc_edges)
        .map(|(arc, &e)| arc.upper - mcmf.cap[e])
        .collect();
    Ok(LnfFlow { cost, flows })
}
