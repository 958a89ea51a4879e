//! FAST-DTS over the B_exp × rlb_min grid: gaps grow with the reliability
//! floor, waste grows with the battery target, and reliability peaks inside
//! the B_exp range.

use hydrosched::harness::{sweep, RunConfig, SweepGrid};

fn main() -> hydrosched::Result<()> {
    let cfg = RunConfig::case_study();
    let grid = SweepGrid::default();
    let result = sweep(&cfg, &grid)?;

    print!("{:>14}", "gaps  B_exp\\rlb");
    for r in &grid.rlb_min {
        print!("{r:>8}");
    }
    println!();
    for (i, b) in grid.b_exp.iter().enumerate() {
        print!("{b:>14}");
        for j in 0..grid.rlb_min.len() {
            print!("{:>8}", result.cells[i * grid.rlb_min.len() + j].gaps);
        }
        println!();
    }
    let a = &result.analysis;
    println!(
        "gaps vs rlb_min:  rho {:.3}, one-sided p {:.1e}",
        a.gaps_vs_rlb_min.rho, a.gaps_vs_rlb_min.p_value
    );
    println!(
        "waste vs B_exp:   rho {:.3}, one-sided p {:.1e}",
        a.waste_vs_b_exp.rho, a.waste_vs_b_exp.p_value
    );
    for (b, rel) in grid.b_exp.iter().zip(&a.reliability_by_b_exp) {
        println!("B_exp {b:>5}: mean reliability {rel:.3}%");
    }
    println!(
        "reliability peak strictly inside the grid: {}",
        a.reliability_peak_interior
    );
    Ok(())
}
