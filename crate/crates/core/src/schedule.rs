//! Static work partitioning for the data-parallel phases.

/// Splits `nodes` into `threads` queues by greedy longest-processing-time:
/// nodes are taken in descending cost (stable for ties) and each goes to the
/// queue with the smallest running total, lowest index on ties.
///
/// Queues are not rebalanced afterwards; the engine rebuilds them only when
/// the graph changes.
pub fn schedule<T: Copy>(nodes: &[(T, usize)], threads: usize) -> Vec<Vec<T>> {
    let threads = threads.max(1);
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[b].1.cmp(&nodes[a].1));
    let mut queues: Vec<Vec<T>> = vec![Vec::new(); threads];
    let mut totals = vec![0usize; threads];
    for i in order {
        let (node, cost) = nodes[i];
        let q = (0..threads)
            .min_by_key(|&q| (totals[q], q))
            .expect("at least one queue");
        queues[q].push(node);
        totals[q] += cost;
    }
    queues
}

/// Total cost per queue, given a cost lookup.
pub fn queue_costs<T: Copy>(queues: &[Vec<T>], cost: impl Fn(T) -> usize) -> Vec<usize> {
    queues.iter().map(|q| q.iter().map(|&n| cost(n)).sum()).collect()
}
