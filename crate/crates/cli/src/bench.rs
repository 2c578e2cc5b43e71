//! Wall-clock timings of the MAC operations on this machine.

use std::hint::black_box;
use std::time::Instant;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use spacemac::mac::{self, Dimensions, MacKey, SpaceId, Tag};
use spacemac::{FieldVector, Gf256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Mac,
    Combine,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub op: Op,
    pub tags: usize,
    pub runs: u64,
    pub mean_us: f64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n: usize,
    pub m: usize,
    pub tags: Vec<usize>,
    /// Tags folded together per combine.
    pub w: usize,
    pub runs: u64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { n: 1024, m: 32, tags: vec![1, 4], w: 4, runs: 100_000, seed: 1 }
    }
}

fn time<F: FnMut()>(runs: u64, mut f: F) -> f64 {
    let start = Instant::now();
    for _ in 0..runs {
        f();
    }
    start.elapsed().as_secs_f64() * 1e6 / runs as f64
}

pub fn run(cfg: &BenchConfig) -> Result<Vec<Timing>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    let runs = cfg.runs.max(1);
    for &l in &cfg.tags {
        let dims = Dimensions::new(cfg.n, cfg.m, l)?;
        let key = MacKey::random(&mut rng);
        let id = SpaceId(rng.gen());
        let y = FieldVector::random(dims.packet_len(), &mut rng);
        let tag = mac::mac(&key, id, dims, &y)?;
        let parts: Vec<(Gf256, Tag)> = (0..cfg.w).map(|_| (Gf256::random(&mut rng), Tag::random(l, &mut rng))).collect();

        let mut failed = None;
        let mac_us = time(runs, || {
            if let Err(e) = mac::mac(black_box(&key), id, dims, black_box(&y)) {
                failed = Some(e);
            }
        });
        let combine_us = time(runs, || {
            if let Err(e) = mac::combine_tags(black_box(&parts).iter().map(|(c, t)| (*c, t))) {
                failed = Some(e);
            }
        });
        let verify_us = time(runs, || match mac::verify(&key, id, dims, black_box(&y), black_box(&tag)) {
            Ok(ok) => {
                black_box(ok);
            }
            Err(e) => failed = Some(e),
        });
        if let Some(e) = failed {
            return Err(e.into());
        }
        for (op, mean_us) in [(Op::Mac, mac_us), (Op::Combine, combine_us), (Op::Verify, verify_us)] {
            out.push(Timing { op, tags: l, runs, mean_us });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_row_per_op_and_tag_count() {
        let cfg = BenchConfig { n: 16, m: 4, runs: 10, ..BenchConfig::default() };
        let rows = run(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows.iter().filter(|r| r.tags == 4).count(), 3);
        assert!(rows.iter().all(|r| r.mean_us >= 0.0 && r.runs == 10));
    }
}
