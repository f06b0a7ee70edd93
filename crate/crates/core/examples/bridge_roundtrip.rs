// Soft-argmax bridging: how close the softmax-weighted embedding lands to
// the argmax row as the scale grows.

use ccinfer::bridge::{argmax_distance, scale_sweep, soft_embed, SWEEP_SCALES};
use ccinfer::neural::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (v, d) = (50, 16);
    let e = Tensor::from_vec(v, d, (0..v * d).map(|_| rng.random_range(-1.0..1.0)).collect());
    let samples: Vec<Vec<f64>> = (0..500).map(|_| (0..v).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();

    let first = soft_embed(&samples[0], &e, 1.0)?;
    println!("bridged vector has {} coordinates", first.len());
    for scale in SWEEP_SCALES {
        let mean = samples.iter().map(|l| argmax_distance(l, &e, scale)).sum::<Result<f64, _>>()? / samples.len() as f64;
        println!("scale {scale:>5}: mean distance to argmax row {mean:.3}");
    }
    for (scale, acc) in scale_sweep(&e, &samples, &SWEEP_SCALES)? {
        println!("scale {scale:>5}: nearest-row round trip {acc:.3}");
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
