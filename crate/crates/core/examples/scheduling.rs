//! Schedule one interval with a hand-written reliability model and compare
//! exact DTS, FAST-DTS and the baselines on the same slot.

use fixedbitset::FixedBitSet;
use hydrosched::correlation::{EnforceReason, EnforcedNode, SchedulePartition};
use hydrosched::estimation::Reliability;
use hydrosched::scheduler::{
    baseline, dts_exact, fast_dts, lyapunov, min_reliability, Algorithm, NodeState, SchedulerConfig, SlotInput,
};

/// A silent node is recovered as well as its best transmitting partner allows.
struct PairTable {
    quality: Vec<Vec<f64>>,
}

impl Reliability for PairTable {
    fn node_count(&self) -> usize {
        self.quality.len()
    }

    fn rlb(&self, i: usize, y: &FixedBitSet) -> f64 {
        if y.contains(i) {
            return 1.0;
        }
        y.ones().map(|j| self.quality[i][j]).fold(0.0, f64::max)
    }
}

fn main() -> hydrosched::Result<()> {
    let n = 6;
    // Two clusters {0, 1, 2} and {3, 4, 5}; node 5 is only loosely tied to the rest.
    let quality: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (i / 3 == j / 3, i == 5 || j == 5) {
                    _ if i == j => 1.0,
                    (true, false) => 0.995,
                    (true, true) => 0.985,
                    (false, _) => 0.6,
                })
                .collect()
        })
        .collect();
    let model = PairTable { quality };
    let states: Vec<NodeState> = [420.0, 90.0, 260.0, 140.0, 310.0, 60.0]
        .iter()
        .map(|&battery| NodeState { battery, e_tr: 30.0 })
        .collect();
    let split = SchedulePartition {
        enforced: vec![EnforcedNode {
            node: 1,
            reasons: vec![EnforceReason::CounterOutlier],
        }],
        schedulable: vec![0, 2, 3, 4, 5],
    };
    let input = SlotInput {
        interval: 0,
        partition: &split,
        states: &states,
        reliability: &model,
        e_max: 45.0,
    };
    let cfg = SchedulerConfig::default();
    let batteries: Vec<f64> = states.iter().map(|s| s.battery).collect();
    println!(
        "L(t) = {:.0}, B_exp = {}, rlb_min = {}",
        lyapunov(&batteries, cfg.b_exp),
        cfg.b_exp,
        cfg.rlb_min
    );

    let mut decisions = vec![dts_exact(&input, &cfg)?, fast_dts(&input, &cfg)];
    for alg in [Algorithm::Rg, Algorithm::Eg(2), Algorithm::Rr(2)] {
        decisions.push(baseline(alg, &input)?);
    }
    for d in &decisions {
        let y = d.to_bitset(n);
        println!(
            "{:<5} min rlb {:.3}  {:?}",
            d.algorithm.to_string(),
            min_reliability(&input, &y),
            d.provenance
        );
    }
    Ok(())
}
