use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};

/// Independent generator for worker `stream` under a run seed.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multinomial draw of `n` trials by sequential conditional binomials.
pub(crate) fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: &[f64]) -> Vec<u64> {
    let mut out = vec![0; p.len()];
    let mut remaining = n;
    let mut mass: f64 = p.iter().map(|v| v.max(0.0)).sum();
    for (slot, &pi) in out.iter_mut().zip(p) {
        if remaining == 0 || mass <= 0.0 {
            break;
        }
        let q = (pi.max(0.0) / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q)
            .expect("probability clamped to [0, 1]")
            .sample(rng);
        *slot = k;
        remaining -= k;
        mass -= pi.max(0.0);
    }
    out
}

/// Poisson draw with the given mean; a zero mean yields zero.
pub(crate) fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    if mean > 0.0 {
        Poisson::new(mean)
            .expect("positive finite mean")
            .sample(rng)
    } else {
        0.0
    }
}
