//! Maintain the pairwise correlation graph while one node's pressure diverges,
//! then split the network into enforced and schedulable nodes.

use std::collections::BTreeMap;

use hydrosched::correlation::{
    chauvenet_outliers, partition, ChauvenetConfig, CorrelationGraph, ObservationLog, LINK_THRESHOLD,
};
use hydrosched::stats::mean;
use hydrosched::trace_gen::{
    generate_traces, AnomalyEvent, AnomalyShape, EventLocation, FlowProfile, NetworkTopology, SamplingConfig,
};
use hydrosched::NodeId;

fn main() -> hydrosched::Result<()> {
    let sampling = SamplingConfig {
        sample_rate_hz: 8.0,
        interval_length_s: 100.0,
        ..SamplingConfig::default()
    };
    let spi = sampling.samples_per_interval();
    let profile = FlowProfile {
        anomaly_events: vec![AnomalyEvent {
            location: EventLocation::Node { id: NodeId(5) },
            start_sample: 4 * spi as u64,
            duration_samples: Some(3 * spi as u64),
            magnitude: 3.0,
            shape: AnomalyShape::Oscillation,
        }],
        ..FlowProfile::default()
    };
    let duration = 12;
    let traces = generate_traces(&NetworkTopology::case_study(), &profile, sampling, duration, 3)?;
    let n = traces.ids.len();
    let refs: Vec<f64> = traces.samples.iter().map(|s| mean(&s[..spi])).collect();
    let mut log = ObservationLog::new(refs, 8);
    let mut graph = CorrelationGraph::new(traces.ids.clone(), LINK_THRESHOLD);

    for t in 0..duration {
        let range = t as usize * spi..(t as usize + 1) * spi;
        let fresh: BTreeMap<usize, &[f64]> = (0..n).map(|i| (i, &traces.samples[i][range.clone()])).collect();
        log.push_samples(t, &fresh)?;
        let delta = graph.update(&log, 2);
        let name = |(a, b): (usize, usize)| format!("{}-{}", traces.ids[a], traces.ids[b]);
        println!(
            "interval {t:>2}: {:>2} links, removed {:?}, added {:?}",
            graph.links().len(),
            delta.removed.into_iter().map(name).collect::<Vec<_>>(),
            delta.added.into_iter().map(name).collect::<Vec<_>>()
        );
    }

    // Anomaly counters reported in one interval: node index 4 stands out.
    let counters = [0, 1, 0, 1, 9, 0, 1];
    let outliers = chauvenet_outliers(&counters, &ChauvenetConfig::default());
    let split = partition(&graph, &outliers, &[]);
    for e in &split.enforced {
        println!("enforced node {}: {:?}", traces.ids[e.node], e.reasons);
    }
    println!(
        "schedulable: {:?}",
        split.schedulable.iter().map(|&i| traces.ids[i].0).collect::<Vec<_>>()
    );
    Ok(())
}
