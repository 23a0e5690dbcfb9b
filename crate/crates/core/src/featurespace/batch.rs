use std::ops::Deref;

use rand::seq::SliceRandom;

use super::SparseInstance;
use crate::error::{Error, Result};
use crate::numerics::rng_stream;

/// A non-empty group of instances processed together.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub instances: Vec<SparseInstance>,
}

impl Batch {
    pub fn new(instances: Vec<SparseInstance>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Parameter("a batch needs at least one instance".into()));
        }
        Ok(Self { instances })
    }

    pub fn size(&self) -> usize {
        self.instances.len()
    }

    /// Order-sensitive FNV-1a digest of labels, ids and value bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for inst in &self.instances {
            eat(&[inst.label]);
            for (id, v) in inst.ids.iter().zip(&inst.values) {
                eat(&id.to_le_bytes());
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }
}

impl Deref for Batch {
    type Target = [SparseInstance];

    fn deref(&self) -> &[SparseInstance] {
        &self.instances
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Sequential,
    Shuffled { seed: u64 },
}

/// Groups an instance stream into batches of `bs` (the last one may be short).
///
/// Sequential order streams lazily. Shuffled order buffers the whole epoch,
/// so source errors surface from this call.
pub fn batches<I>(source: I, bs: usize, order: Order) -> Result<Batches<I::IntoIter>>
where
    I: IntoIterator<Item = Result<SparseInstance>>,
{
    if bs == 0 {
        return Err(Error::Parameter("batch size must be at least 1".into()));
    }
    let inner = match order {
        Order::Sequential => Inner::Streaming(source.into_iter()),
        Order::Shuffled { seed } => {
            let mut all = source.into_iter().collect::<Result<Vec<_>>>()?;
            all.shuffle(&mut rng_stream(seed, 0x5_u64));
            Inner::Buffered(all.into_iter())
        }
    };
    Ok(Batches { inner, bs, failed: false })
}

enum Inner<I> {
    Streaming(I),
    Buffered(std::vec::IntoIter<SparseInstance>),
}

pub struct Batches<I> {
    inner: Inner<I>,
    bs: usize,
    failed: bool,
}

impl<I> Iterator for Batches<I>
where
    I: Iterator<Item = Result<SparseInstance>>,
{
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let mut buf = Vec::with_capacity(self.bs);
        while buf.len() < self.bs {
            let next = match &mut self.inner {
                Inner::Streaming(it) => it.next(),
                Inner::Buffered(it) => it.next().map(Ok),
            };
            match next {
                Some(Ok(inst)) => buf.push(inst),
                Some(Err(e)) => {
                    self.failed = true;
                    return Some(Err(e));
                }
                None => break,
            }
        }
        (!buf.is_empty()).then_some(Ok(Batch { instances: buf }))
    }
}

/// Index permutation of `0..n` for one epoch; identity when `seed` is `None`.
pub fn epoch_order(n: usize, seed: Option<u64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if let Some(s) = seed {
        idx.shuffle(&mut rng_stream(s, 0x5_u64));
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(i: u32) -> SparseInstance {
        SparseInstance { ids: vec![i], values: vec![1.0], label: (i % 2) as u8 }
    }

    fn source(n: u32) -> Vec<Result<SparseInstance>> {
        (0..n).map(|i| Ok(inst(i))).collect()
    }

    #[test]
    fn sizes_with_short_tail() {
        let sizes: Vec<usize> = batches(source(10), 4, Order::Sequential).unwrap().map(|b| b.unwrap().size()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }

    #[test]
    fn sequential_concatenation_equals_source() {
        let flat: Vec<SparseInstance> =
            batches(source(13), 5, Order::Sequential).unwrap().flat_map(|b| b.unwrap().instances).collect();
        assert_eq!(flat, (0..13).map(inst).collect::<Vec<_>>());
    }

    #[test]
    fn shuffle_is_reproducible_and_complete() {
        let run = |seed| -> Vec<Batch> {
            batches(source(50), 8, Order::Shuffled { seed }).unwrap().map(Result::unwrap).collect()
        };
        let a = run(9);
        assert_eq!(a, run(9));
        assert_ne!(a, run(10));
        let mut ids: Vec<u32> = a.iter().flat_map(|b| b.iter().map(|i| i.ids[0])).collect();
        ids.sort();
        assert_eq!(ids, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn errors_and_bad_sizes() {
        assert!(batches(source(3), 0, Order::Sequential).is_err());
        let src = vec![Ok(inst(0)), Err(Error::Parameter("boom".into())), Ok(inst(2))];
        let out: Vec<_> = batches(src, 4, Order::Sequential).unwrap().collect();
        assert_eq!(out.len(), 1);
        assert!(out[0].is_err());
        assert!(Batch::new(vec![]).is_err());
    }

    #[test]
    fn checksum_is_order_sensitive() {
        let a = Batch::new(vec![inst(1), inst(2)]).unwrap();
        let b = Batch::new(vec![inst(2), inst(1)]).unwrap();
        assert_ne!(a.checksum(), b.checksum());
        assert_eq!(a.checksum(), a.clone().checksum());
    }
}
