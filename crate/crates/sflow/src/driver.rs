//! Parallel scans. Nodes and segments are evaluated on the rayon pool and
//! reduced sequentially by [`sflow_core::scan::assemble`]; results do not
//! depend on the thread count.

use rayon::prelude::*;
use sflow_core::scan::{assemble, edge_jobs, nearest_node, NodeInfo, ParameterChart, ScanModel, ScanResult};

pub fn parallel_scan<M: ScanModel + ?Sized>(
    model: &M,
    chart: &ParameterChart,
    basepoint: &[f64],
) -> sflow_core::Result<ScanResult> {
    model.check_seams(chart)?;
    let base = nearest_node(chart, basepoint)?;
    let nodes: Vec<NodeInfo> = chart
        .points()
        .par_iter()
        .map(|p| model.node(p).unwrap_or_else(|_| NodeInfo::failed()))
        .collect();
    let jobs = edge_jobs(chart, &nodes);
    let values = jobs.par_iter().map(|j| model.edge_sfl(&j.a, &j.b, &nodes[j.from], &nodes[j.to])).collect();
    assemble(chart, nodes, &jobs, values, base, model.label_sign())
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sflow_core::family::registry;
    use sflow_core::scan::{scan, torus_chart, FamilyModel};

    #[test]
    fn matches_the_sequential_scan() {
        let model = FamilyModel::new(registry("torus_demo").unwrap());
        let chart = torus_chart(12).unwrap();
        let seq = scan(&model, &chart, &[0.0, 0.0]).unwrap();
        let par = with_threads(Some(3), || parallel_scan(&model, &chart, &[0.0, 0.0]).unwrap());
        assert_eq!(seq, par);
    }
}
