//! Throughput of the naive and planned convolutions against the ordinary one.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aeconv::{aeconv_forward_naive, aeconv_forward_planned, GatherPlan};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, RadialBasisField};
use crate::tensor::{standard_conv, FeatureMap, Kernel};
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub operator: &'static str,
    pub grid: usize,
    pub channels: usize,
    pub k: usize,
    pub ns_per_cell: f64,
}

/// Median wall time in nanoseconds over `reps` runs after one warmup.
fn median_ns(reps: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    f()?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_nanos() as f64);
    }
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    Ok(if times.len() % 2 == 1 {
        times[mid]
    } else {
        0.5 * (times[mid - 1] + times[mid])
    })
}

/// Times every operator on square `size x size` grids with `channels -> channels`
/// kernels of extent `k`. `reps` is clamped to at least 5.
pub fn run_bench(sizes: &[usize], channels: usize, k: usize, reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    let reps = reps.max(5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &n in sizes {
        if n == 0 {
            return Err(Error::config("bench grid size must be positive"));
        }
        let grid = GridSpec::centered(n, n, 0.8, Vec2::ZERO)?;
        let field = RadialBasisField::radial(&grid, Vec2::new(0.37, 0.11));
        let x = FeatureMap::random(channels, n, n, &mut rng);
        let kernel = Kernel::random(channels, channels, k, &mut rng)?;
        let cells = (n * n) as f64;
        let mut plan = GatherPlan::build(&field, k)?;

        let mut push = |operator: &'static str, ns: f64| {
            rows.push(BenchRow {
                operator,
                grid: n,
                channels,
                k,
                ns_per_cell: ns / cells,
            })
        };
        push(
            "plan_build",
            median_ns(reps, || {
                plan = GatherPlan::build(&field, k)?;
                Ok(())
            })?,
        );
        push(
            "aeconv_naive",
            median_ns(reps, || aeconv_forward_naive(&x, &kernel, &field).map(drop))?,
        );
        push(
            "aeconv_planned",
            median_ns(reps, || aeconv_forward_planned(&x, &kernel, &plan).map(drop))?,
        );
        push("standard", median_ns(reps, || standard_conv(&x, &kernel).map(drop))?);
    }
    Ok(rows)
}

pub fn write_bench_csv(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["operator", "grid", "channels", "k", "ns_per_cell"])?;
    for r in rows {
        w.write_record([
            r.operator.to_string(),
            format!("{0}x{0}", r.grid),
            r.channels.to_string(),
            r.k.to_string(),
            format!("{:.1}", r.ns_per_cell),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
