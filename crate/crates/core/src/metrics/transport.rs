//! Transportation problem with arbitrary marginals by successive shortest
//! paths: Dijkstra on reduced costs over the dense bipartite residual graph.

const EPS: f64 = 1e-15;

/// Minimum of `Σ π_ij c_ij` over couplings of `a` (rows) and `b` (columns).
pub fn solve(cost: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    assert_eq!(cost.len(), n * m);
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![0.0; n * m];
    // node k < n is a row, node n + j a column
    let nn = n + m;
    let mut pot = vec![0.0; nn];
    let mut dist = vec![0.0; nn];
    let mut pred = vec![usize::MAX; nn];
    let mut done = vec![false; nn];
    let total: f64 = a.iter().sum::<f64>().min(b.iter().sum());
    let mut moved = 0.0;
    while total - moved > EPS * total.max(1.0) {
        dist.fill(f64::INFINITY);
        pred.fill(usize::MAX);
        done.fill(false);
        for i in 0..n {
            if supply[i] > EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut best = f64::INFINITY;
            let mut k = usize::MAX;
            for (q, &dq) in dist.iter().enumerate() {
                if !done[q] && dq < best {
                    best = dq;
                    k = q;
                }
            }
            if k == usize::MAX {
                break;
            }
            done[k] = true;
            if k >= n && demand[k - n] > EPS {
                target = k;
                break;
            }
            if k < n {
                let row = &cost[k * m..(k + 1) * m];
                for j in 0..m {
                    let q = n + j;
                    if done[q] {
                        continue;
                    }
                    let nd = best + row[j] + pot[k] - pot[q];
                    if nd < dist[q] {
                        dist[q] = nd;
                        pred[q] = k;
                    }
                }
            } else {
                let j = k - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= EPS {
                        continue;
                    }
                    let nd = best - cost[i * m + j] + pot[k] - pot[i];
                    if nd < dist[i] {
                        dist[i] = nd;
                        pred[i] = k;
                    }
                }
            }
        }
        if target == usize::MAX {
            break;
        }
        let dt = dist[target];
        for q in 0..nn {
            pot[q] += dist[q].min(dt);
        }
        let mut amt = demand[target - n];
        let mut q = target;
        while pred[q] != usize::MAX {
            let p = pred[q];
            if p >= n {
                amt = amt.min(flow[q * m + (p - n)]);
            }
            q = p;
        }
        amt = amt.min(supply[q]);
        let src = q;
        let mut q = target;
        while pred[q] != usize::MAX {
            let p = pred[q];
            if p < n {
                flow[p * m + (q - n)] += amt;
            } else {
                flow[q * m + (p - n)] -= amt;
            }
            q = p;
        }
        supply[src] -= amt;
        demand[target - n] -= amt;
        moved += amt;
    }
    flow.iter().zip(cost).map(|(f, c)| f * c).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_mass() {
        // one row of mass 1 against two columns at costs 1 and 3
        let c = [1.0, 3.0];
        assert!((solve(&c, &[1.0], &[0.25, 0.75]) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn matches_assignment_for_uniform() {
        let n = 6;
        let c: Vec<f64> = (0..n * n).map(|k| ((k * 7919) % 31) as f64 / 7.0).collect();
        let w = vec![1.0 / n as f64; n];
        let (opt, _) = super::super::assignment::solve(&c, n);
        assert!((solve(&c, &w, &w) - opt / n as f64).abs() < 1e-12);
    }
}
