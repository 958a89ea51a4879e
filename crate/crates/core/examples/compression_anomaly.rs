//! Compress one node's pressure stream chunk by chunk, smooth the compression
//! rate with a Kalman filter and flag a pressure step from the rate alone.

use hydrosched::anomaly::{detect, kalman_filter, DetectorConfig, KalmanConfig};
use hydrosched::compression::{compress_chunk, decompress_chunk, rate_stream, Quantizer};
use hydrosched::trace_gen::{
    generate_traces, AnomalyEvent, AnomalyShape, EventLocation, FlowProfile, NetworkTopology, SamplingConfig,
};
use hydrosched::NodeId;

fn main() -> hydrosched::Result<()> {
    let sampling = SamplingConfig {
        sample_rate_hz: 32.0,
        interval_length_s: 100.0,
        ..SamplingConfig::default()
    };
    let node = NodeId(4);
    let onset_chunk = 60;
    let profile = FlowProfile {
        anomaly_events: vec![AnomalyEvent {
            location: EventLocation::Node { id: node },
            start_sample: (onset_chunk * sampling.chunk_len) as u64,
            duration_samples: None,
            magnitude: -2.0,
            shape: AnomalyShape::Step,
        }],
        ..FlowProfile::default()
    };
    let traces = generate_traces(&NetworkTopology::case_study(), &profile, sampling, 4, 7)?;
    let quantizer = Quantizer::default();
    let chunks = traces.chunks(node).expect("node is in the topology");

    let mut compressed = Vec::with_capacity(chunks.len());
    let mut max_err: f64 = 0.0;
    for chunk in &chunks {
        let c = compress_chunk(chunk, &quantizer)?;
        let back = decompress_chunk(&c, &quantizer)?;
        for (a, b) in chunk.samples.iter().zip(&back) {
            max_err = max_err.max((a - b).abs());
        }
        compressed.push(c);
    }
    let raw: u32 = compressed.iter().map(|c| c.original_size).sum();
    let packed: u32 = compressed.iter().map(|c| c.compressed_size).sum();
    println!(
        "{} chunks, {raw} bytes -> {packed} bytes, max reconstruction error {max_err:.4} m",
        chunks.len()
    );

    let rates = rate_stream(&compressed);
    let smoothed = kalman_filter(&rates, &KalmanConfig::default())?;
    let flagged = detect(&smoothed, &DetectorConfig::default())?;
    println!("step injected at chunk {onset_chunk}; detector flagged chunks {flagged:?}");
    for k in onset_chunk - 3..onset_chunk + 4 {
        println!("chunk {k:>3}: rate {:.4}  smoothed {:.4}", rates[k].rate, smoothed[k]);
    }
    Ok(())
}
