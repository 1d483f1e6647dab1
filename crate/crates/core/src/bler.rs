//! Block error rate estimation for anything that maps messages to symbols.

use crate::channel::{Channel, ComplexBlock};
use crate::montecarlo::run_shards;
use crate::rng::SeedTree;
use crate::stats::Proportion;
use crate::Result;
use rand::Rng;

/// A message modulation scheme: `M` messages, `N` complex symbols each.
///
/// Messages are `0..M`.
pub trait MessageScheme: Sync {
    fn messages(&self) -> usize;
    fn symbols(&self) -> usize;
    fn encode(&self, messages: &[usize]) -> Result<ComplexBlock>;
    fn decode(&self, y: &ComplexBlock) -> Result<Vec<usize>>;
}

impl<T: MessageScheme + ?Sized> MessageScheme for Box<T> {
    fn messages(&self) -> usize {
        (**self).messages()
    }

    fn symbols(&self) -> usize {
        (**self).symbols()
    }

    fn encode(&self, messages: &[usize]) -> Result<ComplexBlock> {
        (**self).encode(messages)
    }

    fn decode(&self, y: &ComplexBlock) -> Result<Vec<usize>> {
        (**self).decode(y)
    }
}

/// Monte-Carlo `Pr(decoded != sent)` with a Wilson 95% interval.
///
/// Messages are drawn uniformly. Shards use disjoint streams derived from
/// `seeds`, so the estimate does not depend on the thread count.
pub fn evaluate_bler<S: MessageScheme + ?Sized>(
    scheme: &S,
    channel: Channel,
    n_samples: usize,
    seeds: &SeedTree,
) -> Result<Proportion> {
    if n_samples == 0 {
        return Err(crate::Error::config("BLER evaluation needs at least one sample"));
    }
    let m = scheme.messages();
    let counts = run_shards(n_samples, |shard, n| -> Result<u64> {
        let mut rng = seeds.shard("bler", shard);
        let msgs: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
        let x = scheme.encode(&msgs)?;
        let y = channel.transmit(&x, &mut rng);
        let decided = scheme.decode(&y)?;
        Ok(msgs.iter().zip(&decided).filter(|(a, b)| a != b).count() as u64)
    });
    let mut errors = 0;
    for c in counts {
        errors += c?;
    }
    Ok(Proportion::wilson(errors, n_samples as u64))
}
